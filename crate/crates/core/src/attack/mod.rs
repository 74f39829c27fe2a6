//! Attack objectives, the exhaustive parameter search and success metrics.
//!
//! Success predicates:
//! - denial of service: the detector loses the face, `(y - f1(X_adv))^2 > 0`;
//! - dodging: two different faces under the same fringes embed within the
//!   verification threshold, `d(f2(X_adv), f2(U_adv)) <= delta`.

mod capture;
mod search;
mod sweep;

pub use capture::{Capture, PhasePolicy};
pub use search::{grid_search_dodging, grid_search_dos};
pub use sweep::{sweep_dodging, sweep_dos, SweepCondition};

use crate::detector::{feature_distance, DetectorVerdict, Embedding, EmbeddingError, OracleError};
use crate::perturb::{PerturbError, PerturbationParams};
use crate::sensor::SensorError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid search space: {0}")]
    Space(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("oracle failed while evaluating {theta}: {source}")]
    Oracle {
        theta: PerturbationParams,
        #[source]
        source: OracleError,
        /// Everything found before the failure.
        partial: Box<AttackResult>,
    },
    #[error("oracle failed: {0}")]
    OracleSetup(#[source] OracleError),
    #[error("success rate needs 0 <= successes <= trials and trials > 0, got {successes}/{trials}")]
    Rate { successes: usize, trials: usize },
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// `(y - label)^2`; with `y = 1`, 1 means the face was hidden.
pub fn dos_loss(verdict: DetectorVerdict, y: DetectorVerdict) -> f64 {
    let d = y.label() as f64 - verdict.label() as f64;
    d * d
}

/// Feature distance between the two perturbed faces.
pub fn dodging_loss(a: &Embedding, b: &Embedding) -> Result<f64, EmbeddingError> {
    feature_distance(a, b)
}

fn rate(successes: usize, trials: usize) -> Result<f64, AttackError> {
    if trials == 0 || successes > trials {
        return Err(AttackError::Rate { successes, trials });
    }
    Ok(successes as f64 / trials as f64)
}

/// Fraction of detectable samples hidden by the attack (`n_a / n_b`).
pub fn success_rate_dos(n_a: usize, n_b: usize) -> Result<f64, AttackError> {
    rate(n_a, n_b)
}

/// Fraction of correctly separated pairs the attack made match (`m_a / m_b`).
pub fn success_rate_dodging(m_a: usize, m_b: usize) -> Result<f64, AttackError> {
    rate(m_a, m_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    /// Stop at the first successful grid point.
    FirstHit,
    /// Evaluate the whole grid and return every success.
    CollectAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Dos,
    Dodging,
}

/// Grid over fringe width `b`, interval `s` and tilt `alpha`.
///
/// `b` runs `1, 1 + b_step, ..` up to `b_max` (likewise `s`); `alpha` runs
/// `0, alpha_step, ..` up to `alpha_max`. The grid is walked `max_iters`
/// times, which only matters when the lamp phase is randomized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub max_iters: usize,
    pub b_max: f64,
    pub s_max: f64,
    pub alpha_max: f64,
    pub b_step: f64,
    pub s_step: f64,
    pub alpha_step: f64,
    pub mode: SearchMode,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            max_iters: 1,
            b_max: 40.0,
            s_max: 40.0,
            alpha_max: 90.0,
            b_step: 1.0,
            s_step: 1.0,
            alpha_step: 45.0,
            mode: SearchMode::FirstHit,
        }
    }
}

fn axis(start: f64, max: f64, step: f64) -> Vec<f64> {
    // tolerate accumulated rounding at the upper end
    let n = ((max - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), AttackError> {
        let bad = |m: &str| Err(AttackError::Space(m.to_string()));
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1");
        }
        if !(self.b_max >= 1.0 && self.s_max >= 1.0) {
            return bad("b_max and s_max must be >= 1");
        }
        if !(self.alpha_max >= 0.0 && self.alpha_max <= 90.0) {
            return bad("alpha_max must lie in [0, 90]");
        }
        let steps = [self.b_step, self.s_step, self.alpha_step];
        if !steps.iter().all(|s| s.is_finite() && *s > 0.0) {
            return bad("steps must be finite and > 0");
        }
        Ok(())
    }

    pub fn widths(&self) -> Vec<f64> {
        axis(1.0, self.b_max, self.b_step)
    }

    pub fn intervals(&self) -> Vec<f64> {
        axis(1.0, self.s_max, self.s_step)
    }

    pub fn tilts(&self) -> Vec<f64> {
        axis(0.0, self.alpha_max, self.alpha_step)
    }

    /// Grid points in search order: `b` outermost, then `s`, then `alpha`.
    pub fn grid(&self) -> Result<Vec<PerturbationParams>, AttackError> {
        self.validate()?;
        let (bs, ss, alphas) = (self.widths(), self.intervals(), self.tilts());
        let mut out = Vec::with_capacity(bs.len() * ss.len() * alphas.len());
        for &b in &bs {
            for &s in &ss {
                for &a in &alphas {
                    out.push(PerturbationParams::new(b, s, a)?);
                }
            }
        }
        Ok(out)
    }
}

/// One successful grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub theta: PerturbationParams,
    /// `L1` for denial of service, `L2` for dodging.
    pub loss: f64,
    /// Position in [`SearchSpace::grid`].
    pub grid_index: usize,
    /// Outer iteration (0-based) in which the point first succeeded.
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub objective: Objective,
    pub mode: SearchMode,
    /// Successes in grid order.
    pub hits: Vec<Hit>,
    /// Grid points evaluated by the oracle (a dodging evaluation embeds two images).
    pub evaluations: usize,
    /// Grid points whose lamp drive would flicker visibly; never evaluated.
    pub skipped_perceptible: Vec<PerturbationParams>,
}

impl AttackResult {
    pub fn thetas(&self) -> Vec<PerturbationParams> {
        self.hits.iter().map(|h| h.theta).collect()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.hits.iter().map(|h| h.loss).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn report(&self, space: &SearchSpace) -> AttackReport {
        AttackReport {
            objective: self.objective,
            mode: self.mode,
            space: *space,
            thetas: self
                .hits
                .iter()
                .map(|h| ThetaLoss {
                    b: h.theta.width_rows(),
                    s: h.theta.interval_rows(),
                    alpha: h.theta.tilt_deg(),
                    loss: h.loss,
                })
                .collect(),
            evaluations: self.evaluations,
            skipped_perceptible: self.skipped_perceptible.clone(),
        }
    }

    /// One row per hit: `b,s,alpha,loss`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["b", "s", "alpha", "loss"])?;
        for h in &self.hits {
            w.write_record([
                h.theta.width_rows().to_string(),
                h.theta.interval_rows().to_string(),
                h.theta.tilt_deg().to_string(),
                h.loss.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaLoss {
    pub b: f64,
    pub s: f64,
    pub alpha: f64,
    pub loss: f64,
}

/// JSON form of an [`AttackResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub objective: Objective,
    pub mode: SearchMode,
    pub space: SearchSpace,
    pub thetas: Vec<ThetaLoss>,
    pub evaluations: usize,
    pub skipped_perceptible: Vec<PerturbationParams>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use DetectorVerdict::{Absent, Present};

    #[test]
    fn dos_loss_table() {
        assert_eq!(dos_loss(Absent, Present), 1.0);
        assert_eq!(dos_loss(Present, Present), 0.0);
        assert_eq!(dos_loss(Absent, Absent), 0.0);
    }

    #[test]
    fn dodging_loss_examples() {
        let a = Embedding::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(dodging_loss(&a, &a).unwrap(), 0.0);
        let b = Embedding::new(vec![4.0, 6.0]).unwrap();
        assert_eq!(dodging_loss(&a, &b).unwrap(), 5.0);
        assert!(dodging_loss(&a, &b).unwrap() > 1.0);
        let c = Embedding::new(vec![1.0]).unwrap();
        assert!(dodging_loss(&a, &c).is_err());
    }

    #[test]
    fn rates() {
        assert_eq!(success_rate_dos(300, 300).unwrap(), 1.0);
        assert_eq!(success_rate_dos(0, 17).unwrap(), 0.0);
        assert!((success_rate_dos(293, 300).unwrap() - 0.9767).abs() < 5e-5);
        assert_eq!(success_rate_dodging(12, 12).unwrap(), 1.0);
        assert_eq!(success_rate_dodging(0, 12).unwrap(), 0.0);
        assert!((success_rate_dodging(208, 300).unwrap() - 0.6933).abs() < 5e-5);
        assert!(matches!(success_rate_dos(1, 0), Err(AttackError::Rate { .. })));
        assert!(matches!(success_rate_dodging(5, 4), Err(AttackError::Rate { .. })));
    }

    #[test]
    fn grid_order_and_size() {
        let space = SearchSpace {
            b_max: 3.0,
            s_max: 2.0,
            alpha_max: 90.0,
            ..SearchSpace::default()
        };
        let grid = space.grid().unwrap();
        assert_eq!(grid.len(), 3 * 2 * 3);
        assert_eq!(grid[0], PerturbationParams::new(1.0, 1.0, 0.0).unwrap());
        assert_eq!(grid[1], PerturbationParams::new(1.0, 1.0, 45.0).unwrap());
        assert_eq!(grid[3], PerturbationParams::new(1.0, 2.0, 0.0).unwrap());
        assert_eq!(grid[6], PerturbationParams::new(2.0, 1.0, 0.0).unwrap());

        let single = SearchSpace {
            b_max: 1.0,
            s_max: 1.0,
            alpha_max: 0.0,
            ..SearchSpace::default()
        };
        assert_eq!(single.grid().unwrap().len(), 1);

        let stepped = SearchSpace {
            b_max: 10.0,
            b_step: 3.0,
            s_max: 1.0,
            alpha_max: 0.0,
            ..SearchSpace::default()
        };
        assert_eq!(stepped.widths(), vec![1.0, 4.0, 7.0, 10.0]);
    }

    #[test]
    fn invalid_spaces() {
        for space in [
            SearchSpace { max_iters: 0, ..SearchSpace::default() },
            SearchSpace { b_max: 0.5, ..SearchSpace::default() },
            SearchSpace { alpha_step: 0.0, ..SearchSpace::default() },
            SearchSpace { alpha_max: 120.0, ..SearchSpace::default() },
        ] {
            assert!(matches!(space.grid(), Err(AttackError::Space(_))));
        }
    }

    #[test]
    fn report_json_shape() {
        let theta = PerturbationParams::new(2.0, 3.0, 45.0).unwrap();
        let result = AttackResult {
            objective: Objective::Dos,
            mode: SearchMode::CollectAll,
            hits: vec![Hit { theta, loss: 1.0, grid_index: 4, iteration: 0 }],
            evaluations: 9,
            skipped_perceptible: vec![theta],
        };
        let v = serde_json::to_value(result.report(&SearchSpace::default())).unwrap();
        assert_eq!(v["mode"], "collect-all");
        assert_eq!(v["thetas"][0], serde_json::json!({"b": 2.0, "s": 3.0, "alpha": 45.0, "loss": 1.0}));
        assert_eq!(v["skipped_perceptible"][0]["alpha_deg"], 45.0);
        assert_eq!(v["evaluations"], 9);

        let mut csv = Vec::new();
        result.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "b,s,alpha,loss\n2,3,45,1\n");
    }
}
