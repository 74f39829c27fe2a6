//! Exhaustive search over the fringe grid.
//!
//! The walk order is `iteration`, then `b`, `s`, `alpha`. With several oracle
//! workers, grid points are handed out from a shared counter; results are
//! reassembled in walk order so the output does not depend on scheduling.
//! In first-hit mode workers stop claiming points past the best hit so far,
//! which means a parallel run may evaluate a few more points than a serial one.

use super::{AttackError, AttackResult, Capture, Hit, Objective, SearchMode, SearchSpace};
use crate::detector::{
    feature_distance, Detector, DetectorVerdict, Embedder, OracleError, VerifierConfig,
};
use crate::io::Image;
use crate::perturb::PerturbationParams;
use crate::sensor::expose;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    grid_index: usize,
    theta: PerturbationParams,
}

enum EvalError {
    Oracle(OracleError),
    Other(AttackError),
}

impl From<OracleError> for EvalError {
    fn from(e: OracleError) -> Self {
        EvalError::Oracle(e)
    }
}

impl From<AttackError> for EvalError {
    fn from(e: AttackError) -> Self {
        EvalError::Other(e)
    }
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    key: usize,
    loss: f64,
    success: bool,
}

struct Shared {
    next: AtomicUsize,
    best: AtomicUsize,
    abort: AtomicBool,
    outcomes: Mutex<Vec<Outcome>>,
    failures: Mutex<Vec<(usize, EvalError)>>,
}

/// Splits the grid into evaluated candidates and visibly flickering points.
fn partition(
    space: &SearchSpace,
    capture: &Capture,
) -> Result<(Vec<Candidate>, Vec<PerturbationParams>), AttackError> {
    let mut candidates = Vec::new();
    let mut skipped = Vec::new();
    for (grid_index, theta) in space.grid()?.into_iter().enumerate() {
        if capture.is_imperceptible(&theta)? {
            candidates.push(Candidate { grid_index, theta });
        } else {
            skipped.push(theta);
        }
    }
    Ok((candidates, skipped))
}

fn worker_loop<W, F>(worker: &mut W, shared: &Shared, total: usize, per_pass: usize, mode: SearchMode, candidates: &[Candidate], eval: &F)
where
    F: Fn(&mut W, &Candidate, usize) -> Result<(bool, f64), EvalError>,
{
    loop {
        if shared.abort.load(Ordering::SeqCst) {
            return;
        }
        let key = shared.next.fetch_add(1, Ordering::SeqCst);
        if key >= total {
            return;
        }
        if mode == SearchMode::FirstHit && key > shared.best.load(Ordering::SeqCst) {
            return;
        }
        let cand = &candidates[key % per_pass];
        match eval(worker, cand, key / per_pass) {
            Ok((success, loss)) => {
                shared.outcomes.lock().unwrap().push(Outcome { key, loss, success });
                if success && mode == SearchMode::FirstHit {
                    shared.best.fetch_min(key, Ordering::SeqCst);
                }
            }
            Err(e) => {
                shared.failures.lock().unwrap().push((key, e));
                shared.abort.store(true, Ordering::SeqCst);
                return;
            }
        }
    }
}

fn run_grid<W, F>(
    objective: Objective,
    space: &SearchSpace,
    capture: &Capture,
    workers: &mut [W],
    eval: F,
) -> Result<AttackResult, AttackError>
where
    W: Send,
    F: Fn(&mut W, &Candidate, usize) -> Result<(bool, f64), EvalError> + Sync,
{
    let (candidates, skipped) = partition(space, capture)?;
    let per_pass = candidates.len();
    let total = per_pass * space.max_iters;
    let shared = Shared {
        next: AtomicUsize::new(0),
        best: AtomicUsize::new(usize::MAX),
        abort: AtomicBool::new(false),
        outcomes: Mutex::new(Vec::new()),
        failures: Mutex::new(Vec::new()),
    };
    if per_pass > 0 {
        match workers {
            [only] => worker_loop(only, &shared, total, per_pass, space.mode, &candidates, &eval),
            many => std::thread::scope(|scope| {
                for w in many.iter_mut() {
                    let (shared, candidates, eval) = (&shared, &candidates, &eval);
                    scope.spawn(move || worker_loop(w, shared, total, per_pass, space.mode, candidates, eval));
                }
            }),
        }
    }

    let mut outcomes = shared.outcomes.into_inner().unwrap();
    outcomes.sort_by_key(|o| o.key);
    let mut failures = shared.failures.into_inner().unwrap();
    failures.sort_by_key(|(k, _)| *k);

    let first_failure = failures.first().map(|(k, _)| *k);
    let evaluations = outcomes.len();
    let mut hits: Vec<Hit> = Vec::new();
    let mut seen = vec![false; per_pass];
    for o in outcomes.iter().filter(|o| o.success) {
        let cand = candidates[o.key % per_pass];
        if seen[o.key % per_pass] {
            continue;
        }
        seen[o.key % per_pass] = true;
        hits.push(Hit {
            theta: cand.theta,
            loss: o.loss,
            grid_index: cand.grid_index,
            iteration: o.key / per_pass,
        });
        if space.mode == SearchMode::FirstHit {
            break;
        }
    }
    hits.sort_by_key(|h| (h.grid_index, h.iteration));

    let result = AttackResult {
        objective,
        mode: space.mode,
        hits,
        evaluations,
        skipped_perceptible: skipped,
    };

    if let Some(fail_key) = first_failure {
        let found_before = outcomes.iter().any(|o| o.success && o.key < fail_key);
        if !(space.mode == SearchMode::FirstHit && found_before) {
            let (key, err) = failures.into_iter().next().expect("first failure exists");
            let theta = candidates[key % per_pass].theta;
            return Err(match err {
                EvalError::Oracle(source) => AttackError::Oracle {
                    theta,
                    source,
                    partial: Box::new(result),
                },
                EvalError::Other(e) => e,
            });
        }
    }
    Ok(result)
}

/// Searches for fringes that make `detectors` lose the face in `image`.
///
/// A grid point succeeds when `(y - f1(X_adv))^2 > 0`. Each element of
/// `detectors` is an independent worker; pass one for a strictly serial run.
pub fn grid_search_dos<D: Detector>(
    image: &Image,
    space: &SearchSpace,
    detectors: &mut [D],
    capture: &Capture,
    y: DetectorVerdict,
) -> Result<AttackResult, AttackError> {
    space.validate()?;
    let Some(first) = detectors.first_mut() else {
        return Err(AttackError::Space("no detector workers".into()));
    };
    let steady = capture.unmodulated(image)?;
    let before = first.detect(&steady).map_err(AttackError::OracleSetup)?;
    if before != y {
        return Err(AttackError::Precondition(format!(
            "detector answers {} on the unmodulated image, expected {}",
            before.label(),
            y.label()
        )));
    }
    run_grid(Objective::Dos, space, capture, detectors, |det, cand, iteration| {
        let adv = capture.apply(image, &cand.theta, iteration, cand.grid_index)?;
        let loss = super::dos_loss(det.detect(&adv)?, y);
        Ok((loss > 0.0, loss))
    })
}

/// Searches for fringes that make two different faces verify as the same
/// person. Both images receive the same lamp drive; a grid point succeeds
/// when the embedding distance is at most the verifier threshold.
pub fn grid_search_dodging<E: Embedder>(
    image: &Image,
    other: &Image,
    space: &SearchSpace,
    embedders: &mut [E],
    verifier: &VerifierConfig,
    capture: &Capture,
) -> Result<AttackResult, AttackError> {
    space.validate()?;
    let Some(first) = embedders.first_mut() else {
        return Err(AttackError::Space("no embedder workers".into()));
    };
    let a = first.embed(&capture.unmodulated(image)?).map_err(AttackError::OracleSetup)?;
    let b = first.embed(&capture.unmodulated(other)?).map_err(AttackError::OracleSetup)?;
    let before = feature_distance(&a, &b)?;
    if before <= verifier.threshold() {
        return Err(AttackError::Precondition(format!(
            "faces already match without fringes (distance {before} <= {})",
            verifier.threshold()
        )));
    }
    let delta = verifier.threshold();
    run_grid(Objective::Dodging, space, capture, embedders, |emb, cand, iteration| {
        let pulse = capture.pulse(&cand.theta, iteration, cand.grid_index)?;
        let pat_x = capture.pattern(image, &pulse, cand.theta.tilt_deg())?;
        let x_adv = expose(image, &pat_x).map_err(AttackError::from)?;
        let u_adv = if (other.rows(), other.cols()) == (image.rows(), image.cols()) {
            expose(other, &pat_x).map_err(AttackError::from)?
        } else {
            let pat_u = capture.pattern(other, &pulse, cand.theta.tilt_deg())?;
            expose(other, &pat_u).map_err(AttackError::from)?
        };
        let ex = emb.embed(&x_adv)?;
        let eu = emb.embed(&u_adv)?;
        let loss = super::dodging_loss(&ex, &eu).map_err(AttackError::from)?;
        Ok((loss <= delta, loss))
    })
}
