use super::config::{GridConfig, InputConfig, RunConfig};
use super::Outcome;
use crate::analytics::{scaling_row, write_scaling_csv, SpecialFunctionBudget};
use crate::circuit::{potential_minimum, validate_table};
use crate::drive::{
    exact_waveform, flux_noise_prefactor, fourier_coeffs, interval_grid, synthesis_error, waveform, write_coeffs_csv,
    BranchSchedule, DriveSpec, Harmonics,
};
use crate::error::Result;
use crate::hilbert::{
    phase_space_pure, squeezing_of_state, write_field_csv, Field, FockSpace, Grid, ModularOp, PhaseSpaceKind,
    StateVector,
};
use crate::linalg::C64;
use crate::modular_measure::{
    run_protocol, write_shots_csv, InputState, Measurement, ProtocolConfig, ShotRow, TargetState,
};
use crate::noise::{
    cubic_unitary, write_sweep_csv, CubicMeasurement, CubicParams, Damping, LossMode, LossParams, LossyMeasurement,
    SweepRow,
};
use crate::release::{ks_two_sample, release_moments, write_release_csv, Release, ReleaseConfig, ReleaseRow};
use crate::rng::{map_shots, substream};
use serde::Serialize;
use serde_json::json;
use std::f64::consts::PI;
use std::path::Path;

fn grid(g: &GridConfig) -> Grid {
    Grid::square(g.half_width, g.points)
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v.sqrt())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn tag(x: f64) -> String {
    format!("{x}")
}

#[derive(Serialize)]
struct WignerRow {
    input: String,
    re_beta: f64,
    im_beta: f64,
    phi: f64,
    #[serde(rename = "K")]
    k: f64,
    delta_q: f64,
    delta_p: f64,
    mean_photons: f64,
    input_delta_q: f64,
    input_delta_p: f64,
}

/// Ideal S_q measurement at the most likely outcome for each configured input.
pub fn fig_wigner(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let w = &cfg.wigner;
    let space = FockSpace::new(cfg.target_dim)?;
    let prep = cfg.prep(w.nbar);
    let m = Measurement::new(ModularOp::Sq, prep, space)?;
    let kind: PhaseSpaceKind = w.kind.into();
    let g = grid(&w.grid);
    let og = grid(&w.outcome_grid);
    let mut outputs = Vec::new();
    let mut rows = Vec::new();
    for input in &w.inputs {
        let label = input.label();
        let psi = InputState::from(*input).prepare(space)?;
        let before = squeezing_of_state(&psi);
        let state = TargetState::Pure(psi.clone());
        let frame = m.frame(&state);
        let pops = frame.populations();
        let (beta, _) = m.max_likelihood(&pops);
        let (post, p) = m.post(&frame, beta)?;
        let report = post.report(m.basis(), m.turns());
        let rec = m.record(beta, p);
        rows.push(WignerRow {
            input: label.clone(),
            re_beta: beta.re,
            im_beta: beta.im,
            phi: rec.phi,
            k: rec.concentration,
            delta_q: report.delta_q,
            delta_p: report.delta_p,
            mean_photons: report.mean_photons,
            input_delta_q: before.delta_q,
            input_delta_p: before.delta_p,
        });
        let after = match TargetState::from_frame(&post, m.basis(), m.turns(), space)? {
            TargetState::Pure(s) => s,
            TargetState::Mixed(_) => unreachable!("pure input with unit efficiency stays pure"),
        };
        for (name, s) in [("in", &psi), ("post", &after)] {
            let path = out.join(format!("wigner_{label}_{name}.csv"));
            write_field_csv(&phase_space_pure(s, &g, kind), &path)?;
            outputs.push(path);
        }
        let values = og.q.iter().flat_map(|&x| og.p.iter().map(move |&y| C64::new(x, y))).map(|b| m.density(&pops, b));
        let field = Field { grid: og.clone(), values: values.collect() };
        let path = out.join(format!("outcome_{label}.csv"));
        write_field_csv(&field, &path)?;
        outputs.push(path);
    }
    let path = out.join("fig_wigner.csv");
    write_rows(&rows, &path)?;
    outputs.insert(0, path);
    let summary = rows
        .iter()
        .map(|r| json!({"input": r.input, "beta": [r.re_beta, r.im_beta], "delta_q": r.delta_q, "delta_p": r.delta_p}))
        .collect::<Vec<_>>();
    Ok(Outcome { outputs, summary: json!({ "nbar": w.nbar, "reports": summary }) })
}

#[derive(Serialize)]
struct McRow {
    nbar: f64,
    alpha: f64,
    shots: usize,
    mean_delta_q: f64,
    std_delta_q: f64,
    sem_delta_q: f64,
}

fn protocol(cfg: &RunConfig, nbar: f64, efficiency: f64, input: InputConfig, shots: usize) -> ProtocolConfig {
    let mut ancilla = cfg.prep(nbar);
    ancilla.readout_efficiency = efficiency;
    ProtocolConfig {
        ancilla,
        target_dim: cfg.target_dim,
        input: input.into(),
        sequence: vec![ModularOp::Sq],
        shots,
        seed: cfg.seed,
    }
}

/// Monte-Carlo Δ_q against the analytic curves for each n̄.
pub fn fig_scaling(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let s = &cfg.scaling;
    let mut outputs = Vec::new();
    let mut curve = Vec::new();
    let mut mc = Vec::new();
    for &nbar in &s.nbar {
        let pc = protocol(cfg, nbar, s.readout_efficiency, s.input, s.shots);
        let shots = run_protocol(&pc, &format!("fig-scaling/{nbar}"), cfg.threads)?;
        let rows: Vec<ShotRow> = shots.iter().map(ShotRow::from_shot).collect();
        let path = out.join(format!("shots_nbar{}.csv", tag(nbar)));
        write_shots_csv(&rows, &path)?;
        outputs.push(path);
        let dq: Vec<f64> = rows.iter().map(|r| r.delta_q).collect();
        let (mean, std) = mean_std(&dq);
        let alpha = nbar.sqrt();
        mc.push(McRow {
            nbar,
            alpha,
            shots: dq.len(),
            mean_delta_q: mean,
            std_delta_q: std,
            sem_delta_q: std / (dq.len() as f64).sqrt(),
        });
        curve.push(scaling_row(alpha, SpecialFunctionBudget::default())?);
    }
    let path = out.join("scaling.csv");
    write_scaling_csv(&curve, &path)?;
    outputs.insert(0, path);
    let path = out.join("scaling_mc.csv");
    write_rows(&mc, &path)?;
    outputs.insert(1, path);
    let summary: Vec<_> = mc
        .iter()
        .zip(&curve)
        .map(|(m, c)| {
            json!({"nbar": m.nbar, "mean_delta_q": m.mean_delta_q, "sem": m.sem_delta_q,
                   "estimate": c.estimate, "lower_bound": c.lower_bound, "villain": c.villain_delta})
        })
        .collect();
    Ok(Outcome { outputs, summary: json!(summary) })
}

#[derive(Serialize)]
struct CubicRow {
    mode: String,
    re_beta: f64,
    im_beta: f64,
    delta_q: f64,
    delta_p: f64,
    mean_photons: f64,
}

/// Measurement through the cubic coupling, with and without the corrected
/// drive, plus the ideal reference.
pub fn fig_cubic(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let c = &cfg.cubic;
    let space = FockSpace::new(cfg.target_dim)?;
    let prep = cfg.prep(c.nbar);
    let psi = InputState::from(c.input).prepare(space)?;
    let kind: PhaseSpaceKind = c.kind.into();
    let g = grid(&c.grid);
    let mut outputs = Vec::new();
    let mut rows = Vec::new();

    let m = Measurement::new(ModularOp::Sq, prep, space)?;
    let frame = m.frame(&TargetState::Pure(psi.clone()));
    let (beta, _) = m.max_likelihood(&frame.populations());
    let (post, _) = m.post(&frame, beta)?;
    let r = post.report(m.basis(), 0);
    rows.push(CubicRow {
        mode: "ideal".into(),
        re_beta: beta.re,
        im_beta: beta.im,
        delta_q: r.delta_q,
        delta_p: r.delta_p,
        mean_photons: r.mean_photons,
    });

    for &corrected in &c.corrected {
        let mode = if corrected { "corrected" } else { "uncorrected" };
        let params = CubicParams { strength_ratio: c.strength_ratio, corrected_drive: corrected };
        let u = cubic_unitary(prep, params, space, cfg.ancilla_dim)?;
        let cm = CubicMeasurement::new(&u, &psi)?;
        let (beta, _) = cm.max_likelihood();
        let (post, _) = cm.post(beta)?;
        let r = squeezing_of_state(&post);
        rows.push(CubicRow {
            mode: mode.into(),
            re_beta: beta.re,
            im_beta: beta.im,
            delta_q: r.delta_q,
            delta_p: r.delta_p,
            mean_photons: r.mean_photons,
        });
        let path = out.join(format!("wigner_cubic_{mode}.csv"));
        write_field_csv(&phase_space_pure(&post, &g, kind), &path)?;
        outputs.push(path);
    }
    let path = out.join("cubic.csv");
    write_rows(&rows, &path)?;
    outputs.insert(0, path);
    let summary: Vec<_> =
        rows.iter().map(|r| json!({"mode": r.mode, "delta_p": r.delta_p, "delta_q": r.delta_q})).collect();
    Ok(Outcome { outputs, summary: json!({"strength_ratio": c.strength_ratio, "results": summary}) })
}

#[derive(Serialize)]
struct DriveErrorRow {
    delta: f64,
    /// 0 stands for the exact waveform.
    harmonics: usize,
    max_error: f64,
    zoh_error: f64,
}

#[derive(Serialize)]
struct FluxRow {
    delta: f64,
    schedule: String,
    intervals: usize,
    spurious_mean: f64,
    resonant_abs: f64,
}

/// Waveforms, sine coefficients, synthesis errors and the flux-offset echo.
pub fn drive(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let d = &cfg.drive;
    let omega = 2.0 * PI * d.f_t;
    let mut outputs = Vec::new();
    let mut errors = Vec::new();
    let mut flux = Vec::new();
    let mut defects = Vec::new();
    for &delta in &d.deltas {
        let spec = DriveSpec { delta, omega_t: omega, branch: d.branch, harmonics: Harmonics::Exact };
        let n = d.periods * d.samples_per_period;
        let times: Vec<f64> = (0..=n).map(|i| spec.period() * i as f64 / d.samples_per_period as f64).collect();
        let exact = exact_waveform(&spec, &times)?;
        defects.push(json!({"delta": delta, "defect": exact.defect, "continuity": exact.continuity_ratio(omega)}));
        let path = out.join(format!("waveform_delta{}_exact.csv", tag(delta)));
        exact.write_csv(&path)?;
        outputs.push(path);

        let coeffs = fourier_coeffs(&spec, d.coefficients)?;
        let path = out.join(format!("coeffs_delta{}.csv", tag(delta)));
        write_coeffs_csv(&spec, &coeffs, &path)?;
        outputs.push(path);

        errors.push(DriveErrorRow {
            delta,
            harmonics: 0,
            max_error: 0.0,
            zoh_error: synthesis_error(&spec, None, d.sample_rate)?,
        });
        for &h in &d.harmonics {
            let s = DriveSpec { harmonics: Harmonics::Count(h), ..spec };
            let path = out.join(format!("waveform_delta{}_n{h}.csv", tag(delta)));
            waveform(&s, &times)?.write_csv(&path)?;
            outputs.push(path);
            errors.push(DriveErrorRow {
                delta,
                harmonics: h,
                max_error: synthesis_error(&spec, Some(h), f64::INFINITY)?,
                zoh_error: synthesis_error(&spec, Some(h), d.sample_rate)?,
            });
        }

        let t = interval_grid(&spec, d.flux_intervals, 4000);
        for (name, sched) in [("fixed", BranchSchedule::Fixed(d.branch)), ("alternating", BranchSchedule::Alternating)]
        {
            let f = flux_noise_prefactor(&spec, d.flux_offset, &t, &sched)?;
            flux.push(FluxRow {
                delta,
                schedule: name.into(),
                intervals: d.flux_intervals,
                spurious_mean: f.spurious_mean,
                resonant_abs: f.spurious_resonant.norm(),
            });
        }
    }
    let path = out.join("drive_errors.csv");
    write_rows(&errors, &path)?;
    outputs.insert(0, path);
    let path = out.join("flux_noise.csv");
    write_rows(&flux, &path)?;
    outputs.insert(1, path);
    let summary = json!({
        "waveforms": defects,
        "errors": errors.iter().map(|e| json!({"delta": e.delta, "harmonics": e.harmonics,
            "max_error": e.max_error, "zoh_error": e.zoh_error})).collect::<Vec<_>>(),
    });
    Ok(Outcome { outputs, summary })
}

/// Derived circuit parameters against the target table.
pub fn params(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let p = &cfg.params;
    let spec = p.design.spec();
    let report = validate_table(&spec, &p.tolerances);
    let path = out.join("params.csv");
    report.write_csv(&path)?;
    let table = out.join("params.txt");
    std::fs::write(&table, report.table())?;
    let pm = potential_minimum(&spec, p.x_ext)?;
    let d = report.derived;
    let pot = out.join("potential.csv");
    let pairs = [
        ("x_a", pm.x_a),
        ("x_t", pm.x_t),
        ("bound_x_t", 1.05 * spec.e_j / spec.e_l_t),
        ("iterations", pm.iterations as f64),
    ];
    crate::release::write_summary(&pairs, &pot)?;
    let failing: Vec<&str> =
        report.rows.iter().filter(|r| r.required && !r.pass).map(|r| r.quantity.as_str()).collect();
    let summary = json!({
        "all_pass": report.all_pass(),
        "failing": failing,
        "g_mhz": d.g / 1e6,
        "t_coupl_ns": d.t_coupl * 1e9,
        "cross_kerr_over_g": report.row("cross_kerr_over_g").map(|r| r.value),
        "potential_minimum": {"x_a": pm.x_a, "x_t": pm.x_t, "within_bound": pm.within_bound},
        "violations": report.violations,
    });
    Ok(Outcome { outputs: vec![path, table, pot], summary })
}

/// Gradual-release readout against the direct heterodyne measurement.
pub fn release(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let r = &cfg.release;
    let space = FockSpace::new(cfg.target_dim)?;
    let mut prep = cfg.prep(r.nbar);
    prep.readout_efficiency = r.readout_efficiency;
    let rcfg = ReleaseConfig { kappa_open: r.kappa_open, t_meas: r.t_meas, steps: r.steps, filter: r.filter.clone() };
    let rel = Release::new(ModularOp::Sq, prep, rcfg.clone(), space)?;
    let state = TargetState::Pure(InputState::from(r.input).prepare(space)?);
    let frame = rel.meter().frame(&state);
    let rows = map_shots(r.shots, cfg.threads, |i| {
        let mut rng = substream(cfg.seed, "release/cascade", i as u64);
        let (o, post) = rel.shot(&frame, &mut rng)?;
        Ok(ReleaseRow::new(i, &o, &rel.report(&post)))
    })?;
    let path = out.join("release_shots.csv");
    write_release_csv(&rows, &path)?;

    let pc = protocol(cfg, r.nbar, r.readout_efficiency, r.input, r.shots);
    let direct: Vec<ShotRow> =
        run_protocol(&pc, "release/direct", cfg.threads)?.iter().map(ShotRow::from_shot).collect();
    let dpath = out.join("direct_shots.csv");
    write_shots_csv(&direct, &dpath)?;

    let a: Vec<f64> = rows.iter().map(|x| x.delta_q).collect();
    let b: Vec<f64> = direct.iter().map(|x| x.delta_q).collect();
    let ks = ks_two_sample(&a, &b)?;
    let k2: Vec<f64> = rows.iter().map(|x| x.k_eff * x.k_eff).collect();
    let (k2_mean, k2_std) = mean_std(&k2);
    let (k2_pred, bound) = release_moments(&prep, &rcfg);
    let (dq_rel, _) = mean_std(&a);
    let (dq_dir, _) = mean_std(&b);
    let spath = out.join("release_summary.csv");
    let pairs = [
        ("completeness", rcfg.completeness()),
        ("steps", rcfg.step_count() as f64),
        ("mean_k_eff_sq", k2_mean),
        ("sem_k_eff_sq", k2_std / (k2.len() as f64).sqrt()),
        ("predicted_k_eff_sq", k2_pred),
        ("bound_delta_q", bound),
        ("mean_delta_q_release", dq_rel),
        ("mean_delta_q_direct", dq_dir),
        ("ks_statistic", ks.statistic),
        ("ks_p_value", ks.p_value),
    ];
    crate::release::write_summary(&pairs, &spath)?;
    let summary = serde_json::Value::Object(pairs.iter().map(|(k, v)| (k.to_string(), json!(v))).collect());
    Ok(Outcome { outputs: vec![spath, path, dpath], summary })
}

#[derive(Serialize)]
struct AppdRow {
    nbar: f64,
    shot: usize,
    delta_p: f64,
    rel_error: f64,
    mean_photons: f64,
    delta_q: f64,
}

#[derive(Serialize)]
struct AppdSummary {
    nbar: f64,
    shots: usize,
    fraction_within: f64,
    median_rel_error: f64,
    p95_rel_error: f64,
    max_rel_error: f64,
}

/// Truncation check: Δ_p of vacuum after an S_q measurement should stay 1.
pub fn appd(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let a = &cfg.appd;
    let mut rows = Vec::new();
    let mut stats = Vec::new();
    for &nbar in &a.nbar {
        let pc = protocol(cfg, nbar, 1.0, InputConfig::Vacuum, a.shots);
        let shots = run_protocol(&pc, &format!("appd/{nbar}"), cfg.threads)?;
        let mut errs = Vec::with_capacity(shots.len());
        for s in &shots {
            let e = (s.report.delta_p - 1.0).abs();
            errs.push(e);
            rows.push(AppdRow {
                nbar,
                shot: s.shot,
                delta_p: s.report.delta_p,
                rel_error: e,
                mean_photons: s.report.mean_photons,
                delta_q: s.report.delta_q,
            });
        }
        let within = errs.iter().filter(|e| **e < a.tolerance).count() as f64 / errs.len() as f64;
        errs.sort_by(f64::total_cmp);
        stats.push(AppdSummary {
            nbar,
            shots: errs.len(),
            fraction_within: within,
            median_rel_error: quantile(&errs, 0.5),
            p95_rel_error: quantile(&errs, 0.95),
            max_rel_error: *errs.last().unwrap_or(&0.0),
        });
    }
    let path = out.join("appd.csv");
    write_rows(&rows, &path)?;
    let spath = out.join("appd_summary.csv");
    write_rows(&stats, &spath)?;
    let summary = serde_json::to_value(&stats).map_err(|e| crate::Error::Io(e.to_string()))?;
    Ok(Outcome { outputs: vec![path, spath], summary })
}

/// Photon-loss and readout-efficiency sweeps. Δ_p comes from the exact
/// outcome-averaged state, Δ_q from the mean over sampled shots.
pub fn noise(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let n = &cfg.noise;
    let space = FockSpace::new(cfg.target_dim)?;
    let prep = cfg.prep(n.nbar);
    let vacuum = TargetState::Pure(StateVector::vacuum(space));
    let damping = if n.half_damping { Damping::Half } else { Damping::Full };
    let mut rows = Vec::new();
    let mut predicted = Vec::new();
    let mut sweep = |param: &str, value: f64, loss: LossParams| -> Result<()> {
        let lm = LossyMeasurement::new(ModularOp::Sq, prep, loss, space)?;
        let frame = lm.frame(&vacuum);
        let (keep, lost) = lm.averaged_branches(&frame);
        let basis = lm.ideal().basis();
        let delta_p = keep.add(&lost).report(basis, 0).delta_p;
        let pops = frame.populations();
        let dq = map_shots(n.shots, cfg.threads, |i| {
            let mut rng = substream(cfg.seed, &format!("noise/{param}/{value}"), i as u64);
            let beta = lm.sample(&pops, &mut rng)?;
            let (post, _) = lm.post(&frame, beta, LossMode::Sample, &mut rng)?;
            Ok(post.report(basis, 0).delta_q)
        })?;
        rows.push(SweepRow { param: param.into(), value, delta_q: mean_std(&dq).0, delta_p });
        Ok(())
    };
    for &x in &n.loss {
        sweep("gamma_alpha2", x, LossParams { gamma: x / n.nbar, eta_eff: 1.0, damping })?;
        predicted.push(json!({"gamma_alpha2": x, "delta_p_predicted": (x / PI + 1.0).sqrt()}));
    }
    for &eta in &n.efficiency {
        sweep("eta", eta, LossParams { gamma: 0.0, eta_eff: eta, damping })?;
    }
    let path = out.join("noise_sweep.csv");
    write_sweep_csv(&rows, &path)?;
    let summary = json!({
        "rows": rows.iter().map(|r| json!({"param": r.param, "value": r.value,
            "delta_q": r.delta_q, "delta_p": r.delta_p})).collect::<Vec<_>>(),
        "predicted": predicted,
    });
    Ok(Outcome { outputs: vec![path], summary })
}
