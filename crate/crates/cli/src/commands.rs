use crate::args::*;
use crate::oracle::Oracles;
use crate::util::{extension, out_dir, parse_list, scene, write_json, write_with};
use anyhow::{anyhow, bail, Context, Result};
use rsfringe::attack::{
    grid_search_dodging, grid_search_dos, sweep_dodging, sweep_dos, AttackError, AttackResult, Capture, PhasePolicy,
    SearchMode, SearchSpace, SweepCondition,
};
use rsfringe::defense::{
    butterworth_notch_tilted, estimate_fringe_frequency, evaluate_defense_dos, suppression_db, DefenseError,
    FilterSpec, Repair,
};
use rsfringe::detector::{DetectorVerdict, VerifierConfig};
use rsfringe::io::{save_image, synth_face, write_rate_table, Condition, Encoding, Manifest, RateRow};
use rsfringe::perturb::{pulse_to_fringe, theta_to_signal};
use rsfringe::sensor::{expose, render_pattern, PatternRecord};
use rsfringe::signal::FLICKER_FUSION_HZ;
use rsfringe::{Image, PerturbationParams, PulseParams, SensorConfig};
use serde_json::{json, Value};
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOTHING_FOUND: i32 = 1;

fn write_run(out: &Path, invocation: &Value, resolved: Value) -> Result<()> {
    write_json(
        &out.join("run.json"),
        &json!({
            "version": env!("CARGO_PKG_VERSION"),
            "invocation": invocation,
            "resolved": resolved,
        }),
    )
}

fn capture(sensor: &SensorArgs, lamp: &LampArgs, seed: u64) -> Result<Capture> {
    // frame size is replaced by each image's own
    let cfg = SensorConfig::new(sensor.td, sensor.te, sensor.gain.unwrap_or(1.0 / sensor.te), 1, 1)?;
    let phase = if lamp.random_phase {
        PhasePolicy::Randomized { seed }
    } else {
        PhasePolicy::Fixed(lamp.phase_us)
    };
    // surface bad levels before any oracle work
    PulseParams::new(1.0, 0.5, 0.0, lamp.level_on, lamp.level_off)?;
    Ok(Capture::new(cfg).with_phase(phase).with_levels(lamp.level_on, lamp.level_off))
}

fn space(a: &SpaceArgs) -> Result<SearchSpace> {
    let space = SearchSpace {
        max_iters: a.iters,
        b_max: a.b_max,
        s_max: a.s_max,
        alpha_max: a.alpha_max,
        b_step: a.b_step,
        s_step: a.s_step,
        alpha_step: a.alpha_step,
        mode: match a.mode {
            ModeArg::FirstHit => SearchMode::FirstHit,
            ModeArg::CollectAll => SearchMode::CollectAll,
        },
    };
    space.validate()?;
    Ok(space)
}

pub fn simulate(a: &SimulateArgs, invocation: &Value) -> Result<i32> {
    let out = out_dir(&a.out)?;
    let (image, stem, enc) = scene(a.scene.image.as_deref(), a.scene.seed, a.scene.rows, a.scene.cols)?;
    let gain = a.gain.unwrap_or(1.0 / a.te);
    let sensor = SensorConfig::new(a.td, a.te, gain, image.rows(), image.cols())?;
    let levels = (a.lamp.level_on, a.lamp.level_off);
    let (pulse, tilt, theta) = match (&a.theta, a.period_us) {
        (Some(text), _) => {
            let theta: PerturbationParams = text.parse()?;
            let pulse = theta_to_signal(&theta, &sensor, levels, a.lamp.phase_us)?;
            (pulse, theta.tilt_deg(), Some(theta))
        }
        (None, Some(period)) => {
            let pulse = PulseParams::new(period, a.duty, a.lamp.phase_us, levels.0, levels.1)?;
            let (b, s) = pulse_to_fringe(period, a.duty, a.td)?;
            // duty 0 or 1 has no fringe to describe
            (pulse, a.tilt, PerturbationParams::new(b, s, a.tilt).ok())
        }
        (None, None) => bail!("give either --theta or --period-us"),
    };
    let pulse = if a.lamp.random_phase {
        Capture::new(sensor)
            .with_phase(PhasePolicy::Randomized { seed: a.scene.seed })
            .phased(pulse, 0, 0)?
    } else {
        pulse
    };
    write_run(&out, invocation, json!({ "sensor": sensor, "pulse": pulse, "tilt_deg": tilt }))?;

    let pattern = render_pattern(&sensor, &pulse, tilt)?;
    let adv = expose(&image, &pattern)?;

    let mut warnings = Vec::new();
    let imperceptible = pulse.is_imperceptible(FLICKER_FUSION_HZ);
    if !imperceptible {
        warnings.push(format!(
            "lamp flickers visibly: {} Hz is not above {FLICKER_FUSION_HZ} Hz",
            pulse.frequency_hz()
        ));
    }
    if let Some(t) = &theta {
        if t.period_rows() > image.rows() as f64 {
            warnings.push(format!("one fringe period ({} rows) is taller than the frame", t.period_rows()));
        }
    }
    let clipped = adv.data().iter().filter(|&&v| v > 1.0).count();
    if clipped > 0 {
        warnings.push(format!("{clipped} samples exceed 1.0 and are clipped when encoded"));
    }

    let adv_path = out.join(format!("{stem}.adv.{}", extension(&adv, enc)));
    save_image(&adv, &adv_path, enc)?;
    let pattern_path = out.join(format!("{stem}.pattern.pgm"));
    let full_scale = gain * a.te * a.lamp.level_on;
    std::fs::write(&pattern_path, pattern.preview_bytes(full_scale, Encoding::Pnm))?;
    write_json(
        &out.join(format!("{stem}.report.json")),
        &json!({
            "input": a.scene.image,
            "theta": theta,
            "frequency_hz": pulse.frequency_hz(),
            "imperceptible": imperceptible,
            "warnings": warnings,
            "outputs": { "adversarial": adv_path, "pattern": pattern_path },
            "pattern": PatternRecord::new(sensor, pulse, &pattern),
        }),
    )?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(EXIT_OK)
}

fn write_rates(out: &Path, name: &str, rows: &[RateRow], extra: Value) -> Result<()> {
    write_with(&out.join(format!("{name}.csv")), |buf| Ok(write_rate_table(buf, rows)?))?;
    let mut doc = json!({ "rows": rows });
    if let (Value::Object(doc), Value::Object(extra)) = (&mut doc, extra) {
        doc.extend(extra);
    }
    write_json(&out.join(format!("{name}.json")), &doc)
}

/// Writes the report (partial on oracle failure) and picks the exit code.
fn finish(
    out: &Path,
    name: &str,
    space: &SearchSpace,
    model: String,
    result: Result<AttackResult, AttackError>,
) -> Result<i32> {
    let write = |r: &AttackResult, error: Option<String>| -> Result<()> {
        let mut doc = serde_json::to_value(r.report(space))?;
        doc["model"] = json!(model);
        doc["partial"] = json!(error.is_some());
        if let Some(e) = error {
            doc["error"] = json!(e);
        }
        write_json(&out.join(format!("{name}.json")), &doc)?;
        write_with(&out.join(format!("{name}.csv")), |buf| Ok(r.write_csv(buf)?))
    };
    match result {
        Ok(r) => {
            write(&r, None)?;
            if r.is_empty() {
                eprintln!("no successful parameters in {} evaluations", r.evaluations);
                Ok(EXIT_NOTHING_FOUND)
            } else {
                println!("{} successful parameters, first {}", r.hits.len(), r.hits[0].theta);
                Ok(EXIT_OK)
            }
        }
        Err(AttackError::Oracle { theta, source, partial }) => {
            let err = AttackError::Oracle { theta, source, partial };
            if let AttackError::Oracle { partial, .. } = &err {
                write(partial, Some(err.to_string()))?;
            }
            Err(err.into())
        }
        Err(e) => Err(e.into()),
    }
}

pub fn attack_dos(a: &AttackDosArgs, invocation: &Value) -> Result<i32> {
    let out = out_dir(&a.out)?;
    let (image, stem, _) = scene(a.scene.image.as_deref(), a.scene.seed, a.scene.rows, a.scene.cols)?;
    let capture = capture(&a.sensor, &a.lamp, a.scene.seed)?;
    let oracles = Oracles::from_args(&a.oracle, &out)?;

    if let Some(periods) = &a.pulse_periods {
        let periods = parse_list(periods)?;
        let mut conditions = vec![SweepCondition::normal()];
        conditions.extend(periods.iter().map(|&p| SweepCondition::pulse(p, a.duty)));
        write_run(
            &out,
            invocation,
            json!({ "capture": capture, "oracle": oracles.echo, "periods": periods }),
        )?;
        let mut detector = oracles.detector_pool(1)?.remove(0);
        let rows = sweep_dos(std::slice::from_ref(&image), &conditions, &mut detector, &capture)?;
        write_rates(&out, &format!("{stem}.periods"), &rows, json!({ "objective": "dos" }))?;
        return Ok(EXIT_OK);
    }

    let space = space(&a.space)?;
    write_run(&out, invocation, json!({ "capture": capture, "oracle": oracles.echo, "space": space }))?;
    let mut detectors = oracles.detectors()?;
    let model = detectors[0].name();
    let result = grid_search_dos(&image, &space, &mut detectors, &capture, DetectorVerdict::Present);
    finish(&out, &format!("{stem}.dos"), &space, model, result)
}

pub fn attack_dodge(a: &AttackDodgeArgs, invocation: &Value) -> Result<i32> {
    let out = out_dir(&a.out)?;
    let (image, stem, _) = scene(a.scene.image.as_deref(), a.scene.seed, a.scene.rows, a.scene.cols)?;
    let (other, _, _) = scene(a.other.as_deref(), a.scene.seed + 1, a.scene.rows, a.scene.cols)?;
    let verifier = VerifierConfig::new(a.delta)?;
    let capture = capture(&a.sensor, &a.lamp, a.scene.seed)?;
    let oracles = Oracles::from_args(&a.oracle, &out)?;
    let space = space(&a.space)?;
    write_run(
        &out,
        invocation,
        json!({ "capture": capture, "oracle": oracles.echo, "space": space, "delta": verifier.threshold() }),
    )?;
    let mut embedders = oracles.embedders()?;
    let model = embedders[0].name();
    let result = grid_search_dodging(&image, &other, &space, &mut embedders, &verifier, &capture);
    finish(&out, &format!("{stem}.dodging"), &space, model, result)
}

fn column_means(image: &Image) -> Vec<f64> {
    let mut sums = vec![0.0; image.cols()];
    for i in 0..image.rows() {
        for (j, s) in sums.iter_mut().enumerate() {
            *s += image.luminance(i, j);
        }
    }
    sums.iter().map(|s| s / image.rows() as f64).collect()
}

pub fn defend(a: &DefendArgs, invocation: &Value) -> Result<i32> {
    let out = out_dir(&a.out)?;
    match (&a.image, &a.manifest) {
        (Some(path), None) => defend_one(a, path, &out, invocation),
        (None, Some(path)) => defend_batch(a, path, &out, invocation),
        _ => bail!("give either --image or --manifest"),
    }
}

fn defend_one(a: &DefendArgs, path: &Path, out: &Path, invocation: &Value) -> Result<i32> {
    let (image, stem, enc) = scene(Some(path), 0, 0, 0)?;
    let (f0, estimated) = match a.f0 {
        Some(f) => (f, false),
        None if a.tilt != 0.0 => bail!("--tilt needs --f0; the estimate only sees vertical profiles"),
        None => (
            estimate_fringe_frequency(&image).with_context(|| format!("no fringe frequency in {}", path.display()))?,
            true,
        ),
    };
    let spec = FilterSpec::new(f0, a.bandwidth_ratio * f0, a.order, a.harmonics)?;
    write_run(out, invocation, json!({ "spec": spec, "estimated": estimated }))?;
    let repaired = butterworth_notch_tilted(&image, &spec, a.tilt)?;

    let (sin, cos) = a.tilt.to_radians().sin_cos();
    let suppression = if cos.abs() >= sin.abs() {
        suppression_db(&image.row_means(), &repaired.row_means(), f0 * cos.abs())
    } else {
        suppression_db(&column_means(&image), &column_means(&repaired), f0 * sin.abs())
    };
    let repaired_path = out.join(format!("{stem}.repaired.{}", extension(&repaired, enc)));
    save_image(&repaired, &repaired_path, enc)?;
    write_json(
        &out.join(format!("{stem}.defense.json")),
        &json!({
            "input": path,
            "f0_cpr": f0,
            "estimated": estimated,
            "tilt_deg": a.tilt,
            "spec": spec,
            "suppression_db": suppression,
            "output": repaired_path,
            "inpainting": "not implemented; the notch filter is the only repair offered",
        }),
    )?;
    println!("f0 {f0:.5} cycles/row, fundamental down {suppression:.1} dB");
    Ok(EXIT_OK)
}

fn entry_label(e: &rsfringe::io::ManifestEntry) -> String {
    let mut label = e.condition.label();
    if let Some(t) = e.tilt_deg {
        label.push_str(&format!("@{t}deg"));
    }
    if let Some(d) = e.distance_cm {
        label.push_str(&format!("@{d}cm"));
    }
    label
}

fn defend_batch(a: &DefendArgs, path: &Path, out: &Path, invocation: &Value) -> Result<i32> {
    if a.tilt != 0.0 {
        bail!("--tilt applies to a single --image");
    }
    let manifest = Manifest::load(path)?;
    let repair = match a.f0 {
        Some(f0) => Repair::Fixed(FilterSpec::new(f0, a.bandwidth_ratio * f0, a.order, a.harmonics)?),
        None => Repair::Estimated {
            order: a.order,
            bandwidth_ratio: a.bandwidth_ratio,
            harmonics: a.harmonics,
        },
    };
    let oracles = Oracles::from_args(&a.oracle, out)?;
    write_run(out, invocation, json!({ "repair": repair, "oracle": oracles.echo }))?;

    // clean captures have nothing to repair
    let mut groups: Vec<(String, Vec<&rsfringe::io::ManifestEntry>)> = Vec::new();
    let mut skipped = 0;
    for e in &manifest.entries {
        if e.condition == Condition::Normal {
            skipped += 1;
            continue;
        }
        let label = entry_label(e);
        match groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, members)) => members.push(e),
            None => groups.push((label, vec![e])),
        }
    }
    if groups.is_empty() {
        bail!("{} lists no modulated captures to defend", path.display());
    }
    let mut detector = oracles.detector_pool(1)?.remove(0);
    let model = detector.name();
    let mut rows = Vec::new();
    for (label, members) in &groups {
        let images = members
            .iter()
            .map(|e| {
                let p = manifest.resolve(path, e);
                rsfringe::io::load_image(&p).with_context(|| format!("cannot read {}", p.display()))
            })
            .collect::<Result<Vec<_>>>()?;
        let outcome = match evaluate_defense_dos(&images, &repair, &mut detector) {
            Err(DefenseError::NotAdversarial(i)) => {
                bail!("{} is not adversarial: the detector still finds the face", members[i].path)
            }
            r => r?,
        };
        rows.push(RateRow {
            model: model.clone(),
            condition: label.clone(),
            n_b: outcome.members,
            n_a: outcome.flipped,
            rate: outcome.rate,
        });
    }
    write_rates(out, "defense", &rows, json!({ "repair": repair, "skipped_normal": skipped }))?;
    for r in &rows {
        println!("{} {}: {}/{} repaired", r.model, r.condition, r.n_a, r.n_b);
    }
    Ok(EXIT_OK)
}

fn conditions(a: &SweepArgs) -> Result<Vec<SweepCondition>> {
    let periods = parse_list(&a.pulse_periods)?;
    let opt = |s: &Option<String>| -> Result<Vec<Option<f64>>> {
        Ok(match s {
            Some(s) => parse_list(s)?.into_iter().map(Some).collect(),
            None => vec![None],
        })
    };
    let (distances, tilts) = (opt(&a.distances)?, opt(&a.tilts)?);
    let mut out = Vec::new();
    for &d in &distances {
        let normal = SweepCondition::normal();
        out.push(match d {
            Some(d) => normal.at_distance(d),
            None => normal,
        });
    }
    for &p in &periods {
        for &t in &tilts {
            for &d in &distances {
                let mut c = SweepCondition::pulse(p, a.duty);
                if let Some(t) = t {
                    c = c.with_tilt(t);
                }
                if let Some(d) = d {
                    c = c.at_distance(d);
                }
                out.push(c);
            }
        }
    }
    Ok(out)
}

fn manifest_images(path: &Path) -> Result<Vec<(String, Image)>> {
    let manifest = Manifest::load(path)?;
    manifest
        .entries
        .iter()
        .map(|e| {
            let p = manifest.resolve(path, e);
            let img = rsfringe::io::load_image(&p).with_context(|| format!("cannot read {}", p.display()))?;
            Ok((e.subject.clone(), img))
        })
        .collect()
}

pub fn sweep(a: &SweepArgs, invocation: &Value) -> Result<i32> {
    let out = out_dir(&a.out)?;
    let conditions = conditions(a)?;
    let capture = capture(&a.sensor, &a.lamp, a.seed)?;
    let oracles = Oracles::from_args(&a.oracle, &out)?;
    let labels: Vec<&str> = conditions.iter().map(|c| c.label.as_str()).collect();
    let rows = match a.objective {
        ObjectiveArg::Dos => {
            let samples: Vec<Image> = match &a.manifest {
                Some(p) => manifest_images(p)?.into_iter().map(|(_, i)| i).collect(),
                None => (0..a.count as u64)
                    .map(|k| synth_face(a.seed + k, a.rows, a.cols))
                    .collect::<Result<_, _>>()?,
            };
            if samples.is_empty() {
                bail!("nothing to sweep");
            }
            write_run(&out, invocation, json!({ "capture": capture, "oracle": oracles.echo, "conditions": labels }))?;
            let mut detector = oracles.detector_pool(1)?.remove(0);
            sweep_dos(&samples, &conditions, &mut detector, &capture)?
        }
        ObjectiveArg::Dodging => {
            let delta = a.delta.ok_or_else(|| anyhow!("--objective dodging needs --delta"))?;
            let verifier = VerifierConfig::new(delta)?;
            let pairs: Vec<(Image, Image)> = match &a.manifest {
                Some(p) => {
                    let images = manifest_images(p)?;
                    if images.len() % 2 != 0 {
                        bail!("dodging pairs consecutive manifest entries; {} entries is odd", images.len());
                    }
                    images
                        .chunks_exact(2)
                        .map(|c| {
                            if c[0].0 == c[1].0 {
                                bail!("pair of subject {:?} is not two different faces", c[0].0);
                            }
                            Ok((c[0].1.clone(), c[1].1.clone()))
                        })
                        .collect::<Result<_>>()?
                }
                None => (0..a.count as u64)
                    .map(|k| {
                        Ok((
                            synth_face(a.seed + 2 * k, a.rows, a.cols)?,
                            synth_face(a.seed + 2 * k + 1, a.rows, a.cols)?,
                        ))
                    })
                    .collect::<Result<_>>()?,
            };
            if pairs.is_empty() {
                bail!("nothing to sweep");
            }
            write_run(
                &out,
                invocation,
                json!({ "capture": capture, "oracle": oracles.echo, "conditions": labels, "delta": delta }),
            )?;
            let mut embedder = oracles.embedder_pool(1)?.remove(0);
            sweep_dodging(&pairs, &conditions, &mut embedder, &verifier, &capture)?
        }
    };
    let objective = match a.objective {
        ObjectiveArg::Dos => "dos",
        ObjectiveArg::Dodging => "dodging",
    };
    write_rates(&out, "sweep", &rows, json!({ "objective": objective }))?;
    for r in &rows {
        println!("{} {}: {}/{} = {}", r.model, r.condition, r.n_a, r.n_b, r.rate);
    }
    Ok(EXIT_OK)
}
