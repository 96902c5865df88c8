//! Headline reproduction criteria. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use gkpmod::analytics::{mean_abs_beta, mean_beta_sq};
use gkpmod::cli::{run, Command, RunConfig};
use gkpmod::drive::{
    exact_waveform, flux_noise_prefactor, fourier_coeffs, interval_grid, synthesis_error, Branch, BranchSchedule,
    DriveSpec, Harmonics,
};
use gkpmod::hilbert::{build_operator, make_squeezed_vacuum, FockSpace, ModularOp, OperatorLabel, StateVector};
use gkpmod::linalg::{matmul, max_abs_block, C64};
use gkpmod::modular_measure::{
    measurement_operator, run_protocol, AncillaPrep, InputState, Measurement, ProtocolConfig, TargetState,
};
use gkpmod::noise::{LossParams, LossyMeasurement};
use gkpmod::rng::{map_shots, substream};
use serde_json::Value;
use std::f64::consts::PI;
use std::time::Instant;

const SEED: u64 = 1;

struct Tally {
    failed: Vec<&'static str>,
}

impl Tally {
    fn check(&mut self, name: &'static str, ok: bool, detail: String) {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(name);
        }
    }

    fn run(&mut self, name: &'static str, f: impl FnOnce() -> gkpmod::Result<(bool, String)>) {
        match f() {
            Ok((ok, detail)) => self.check(name, ok, detail),
            Err(e) => self.check(name, false, format!("error: {e}")),
        }
    }
}

fn command(cmd: Command, cfg: &RunConfig) -> gkpmod::Result<(Value, f64)> {
    let dir = tempfile::tempdir()?;
    let m = run(cmd, cfg, dir.path())?;
    Ok((m.summary, m.wall_clock_seconds))
}

fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn f(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or(f64::NAN)
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn fig2() -> gkpmod::Result<(bool, String)> {
    let cfg = RunConfig { seed: SEED, ..RunConfig::default() };
    let (s, secs) = command(Command::FigWigner, &cfg)?;
    let reports = s["reports"].as_array().cloned().unwrap_or_default();
    let find = |label: &str| reports.iter().find(|r| r["input"].as_str().is_some_and(|x| x.starts_with(label)));
    let (Some(v), Some(q)) = (find("vacuum"), find("squeezed")) else {
        return Ok((false, "missing vacuum or squeezed report".into()));
    };
    let ok = within(f(v, "delta_q"), 0.18, 0.02)
        && within(f(v, "delta_p"), 1.0, 0.01)
        && within(f(q, "delta_q"), 0.18, 0.02)
        && within(f(q, "delta_p"), 1.0 / 3.0, 0.01)
        && secs < 60.0;
    Ok((
        ok,
        format!(
            "vacuum ({:.4}, {:.4}) squeezed ({:.4}, {:.4}) [Δq, Δp], {secs:.1} s",
            f(v, "delta_q"),
            f(v, "delta_p"),
            f(q, "delta_q"),
            f(q, "delta_p")
        ),
    ))
}

fn fig3() -> gkpmod::Result<(bool, String)> {
    let mut cfg = RunConfig { seed: SEED, ..RunConfig::default() };
    cfg.scaling.nbar = vec![1.0, 2.0, 3.0, 4.0];
    cfg.scaling.shots = 200;
    let (s, _) = command(Command::FigScaling, &cfg)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for r in s.as_array().cloned().unwrap_or_default() {
        let (nbar, mean, sem) = (f(&r, "nbar"), f(&r, "mean_delta_q"), f(&r, "sem"));
        let (est, lb, vil) = (f(&r, "estimate"), f(&r, "lower_bound"), f(&r, "villain"));
        let est_ok = (mean / est - 1.0).abs() <= 0.30;
        let lb_ok = mean > lb - sem;
        let vil_ok = nbar < 2.0 || (vil / mean - 1.0).abs() <= 0.15;
        ok &= est_ok && lb_ok && vil_ok;
        parts.push(format!(
            "n̄={nbar}: {mean:.3}±{sem:.3} est {est:.3}{} lb {lb:.3}{} villain {vil:.3}{}",
            if est_ok { "" } else { "✗" },
            if lb_ok { "" } else { "✗" },
            if vil_ok { "" } else { "✗" }
        ));
    }
    Ok((ok && parts.len() == 4, parts.join("; ")))
}

fn fig4() -> gkpmod::Result<(bool, String)> {
    let mut cfg = RunConfig { seed: SEED, ..RunConfig::default() };
    cfg.cubic.strength_ratio = 1e-3;
    let (s, _) = command(Command::FigCubic, &cfg)?;
    let results = s["results"].as_array().cloned().unwrap_or_default();
    let get = |mode: &str| results.iter().find(|r| r["mode"] == mode).map(|r| (f(r, "delta_p"), f(r, "delta_q")));
    let (Some(u), Some(c)) = (get("uncorrected"), get("corrected")) else {
        return Ok((false, "missing cubic modes".into()));
    };
    let ok = within(u.0, 0.42, 0.03) && within(u.1, 0.20, 0.02) && within(c.0, 0.41, 0.03) && within(c.1, 0.18, 0.02);
    Ok((ok, format!("uncorrected ({:.4}, {:.4}) corrected ({:.4}, {:.4}) [Δp, Δq]", u.0, u.1, c.0, c.1)))
}

fn oracles() -> gkpmod::Result<(bool, String)> {
    let space = FockSpace::new(500)?;
    let prep = AncillaPrep::with_mean_photons(3.0);
    let alpha = prep.alpha.norm();
    let m = Measurement::new(ModularOp::Sq, prep, space)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, psi) in [("vacuum", StateVector::vacuum(space)), ("squeezed", make_squeezed_vacuum(3.0, space)?)] {
        let pops = m.frame(&TargetState::Pure(psi)).populations();
        let betas =
            map_shots(10_000, 0, |i| m.sample(&pops, &mut substream(SEED, &format!("oracle/{label}"), i as u64)))?;
        let abs: Vec<f64> = betas.iter().map(|b| b.norm()).collect();
        let sq: Vec<f64> = betas.iter().map(|b| b.norm_sqr()).collect();
        let (m1, e1) = mean_sem(&abs);
        let (m2, e2) = mean_sem(&sq);
        let (w1, w2) = (mean_abs_beta(alpha), mean_beta_sq(alpha));
        let good = (m1 - w1).abs() <= 3.0 * e1 && (m2 - w2).abs() <= 3.0 * e2;
        ok &= good;
        parts.push(format!("{label} ⟨|β|⟩ {m1:.4}±{e1:.4} vs {w1:.4}, ⟨|β|²⟩ {m2:.4}±{e2:.4} vs {w2:.4}"));
    }
    Ok((ok, parts.join("; ")))
}

fn stabilizers() -> gkpmod::Result<(bool, String)> {
    let space = FockSpace::new(500)?;
    let vac = StateVector::vacuum(space);
    let sq = build_operator(OperatorLabel::Sq, space);
    let overlap = vac.expect(&sq).norm();
    let prep = AncillaPrep::with_mean_photons(3.0);
    let mb = measurement_operator(C64::new(1.1, 0.6), prep, space)?;
    let comm = matmul(mb.matrix(), sq.matrix()) - matmul(sq.matrix(), mb.matrix());
    // the truncated S_q is only faithful well below the Fock edge
    let defect = max_abs_block(&comm, 250);

    let m = Measurement::new(ModularOp::Sq, prep, space)?;
    let pops = m.frame(&TargetState::Pure(vac)).populations();
    let h = 0.05;
    let mut total = 0.0;
    for i in -160..=160 {
        for j in -160..=160 {
            total += m.density(&pops, C64::new(i as f64 * h, j as f64 * h)) * h * h;
        }
    }
    let ok = (overlap - (-PI).exp()).abs() < 1e-3 && defect < 1e-8 && (total - 1.0).abs() < 0.01;
    Ok((ok, format!("|⟨S_q⟩| {overlap:.6} vs {:.6}, commutator {defect:.1e}, ∫P {total:.5}", (-PI).exp())))
}

fn photon_loss() -> gkpmod::Result<(bool, String)> {
    let space = FockSpace::new(500)?;
    let nbar = 3.0;
    let prep = AncillaPrep::with_mean_photons(nbar);
    let vac = TargetState::Pure(StateVector::vacuum(space));
    let mut ok = true;
    let mut parts = Vec::new();
    for x in [0.01, 0.05, 0.1, 0.2] {
        let lm = LossyMeasurement::new(ModularOp::Sq, prep, LossParams::new(x / nbar), space)?;
        let frame = lm.frame(&vac);
        let (keep, lost) = lm.averaged_branches(&frame);
        let basis = lm.ideal().basis();
        let sp = basis.q_matrix(ModularOp::Sp);
        let delta_p = keep.add(&lost).report(basis, 0).delta_p;
        let want = (x / PI + 1.0).sqrt();
        let t_keep = keep.expect(sp).norm();
        let t_lost = lost.expect(sp).norm();
        let ideal = lm.ideal().frame(&vac).expect(sp).norm();
        let scale = t_keep / ideal;
        let good =
            (delta_p / want - 1.0).abs() < 0.05 && t_lost < 1e-3 * t_keep && (scale / (1.0 - x) - 1.0).abs() < 2e-3;
        ok &= good;
        parts.push(format!("γ|α|²={x}: Δ̃p {delta_p:.4} vs {want:.4}, lost {t_lost:.1e}, scale {scale:.4}"));
    }
    Ok((ok, parts.join("; ")))
}

fn readout_loss() -> gkpmod::Result<(bool, String)> {
    let shots = 400;
    let mean = |nbar: f64, eta: f64| -> gkpmod::Result<(f64, f64)> {
        let mut ancilla = AncillaPrep::with_mean_photons(nbar);
        ancilla.readout_efficiency = eta;
        let pc = ProtocolConfig {
            ancilla,
            target_dim: 500,
            input: InputState::Vacuum,
            sequence: vec![ModularOp::Sq],
            shots,
            seed: SEED,
        };
        let dq: Vec<f64> =
            run_protocol(&pc, &format!("readout/{nbar}/{eta}"), 0)?.iter().map(|s| s.report.delta_q).collect();
        Ok(mean_sem(&dq))
    };
    let (a, ea) = mean(4.0, 0.5)?;
    let (b, eb) = mean(2.0, 1.0)?;
    let comb = (ea * ea + eb * eb).sqrt();
    Ok(((a - b).abs() <= 2.0 * comb, format!("n̄=4 η=0.5 {a:.4}±{ea:.4}, n̄=2 η=1 {b:.4}±{eb:.4}")))
}

fn drive() -> gkpmod::Result<(bool, String)> {
    let omega = 2.0 * PI * 250e6;
    let spec = |delta: f64| DriveSpec { delta, omega_t: omega, branch: Branch::Plus, harmonics: Harmonics::Exact };
    let mut defect: f64 = 0.0;
    for delta in [1.0, 0.5] {
        let s = spec(delta);
        let times: Vec<f64> = (0..8000).map(|i| i as f64 * 2.0 * s.period() / 8000.0).collect();
        defect = defect.max(exact_waveform(&s, &times)?.defect);
    }
    let b = fourier_coeffs(&spec(1.0), 8)?;
    let tri = b.iter().enumerate().all(|(n, bn)| bn.abs() == 8.0 / PI / ((2 * n + 1) as f64).powi(2));
    let two = synthesis_error(&spec(0.5), Some(2), f64::INFINITY)?;
    let mut echo: f64 = 0.0;
    for periods in [2, 4, 6, 8] {
        let s = spec(1.0);
        let fnz =
            flux_noise_prefactor(&s, 0.01, &interval_grid(&s, periods, 1000), &BranchSchedule::Fixed(Branch::Plus))?;
        echo = echo.max(fnz.spurious_resonant.norm()).max(fnz.spurious_mean.abs());
    }
    let ok = defect < 1e-12 && tri && two < 0.01 && echo < 1e-10;
    Ok((ok, format!("defect {defect:.1e}, triangle exact {tri}, δ=0.5 two-harmonic {two:.5}, echo {echo:.1e}")))
}

fn release() -> gkpmod::Result<(bool, String)> {
    let mut cfg = RunConfig { seed: SEED, ..RunConfig::default() };
    cfg.release.shots = cfg.release.shots.max(500);
    let (s, _) = command(Command::Release, &cfg)?;
    let (c, k2, sem, pred, p) = (
        f(&s, "completeness"),
        f(&s, "mean_k_eff_sq"),
        f(&s, "sem_k_eff_sq"),
        f(&s, "predicted_k_eff_sq"),
        f(&s, "ks_p_value"),
    );
    let ok = (c - 1.0).abs() <= 0.01 && (k2 - pred).abs() <= 3.0 * sem && p >= 0.05;
    Ok((
        ok,
        format!(
            "completeness {c:.5}, ⟨K²⟩ {k2:.2}±{sem:.2} vs {pred:.2}, KS p {p:.3} ({} shots/side)",
            cfg.release.shots
        ),
    ))
}

fn appendix_d(target_dim: usize) -> gkpmod::Result<(bool, String)> {
    let mut cfg = RunConfig { seed: SEED, target_dim, ..RunConfig::default() };
    cfg.appd.nbar = vec![4.0];
    cfg.appd.shots = 200;
    cfg.appd.tolerance = 0.01;
    let (s, _) = command(Command::Appd, &cfg)?;
    let r = &s[0];
    let frac = f(r, "fraction_within");
    Ok((frac >= 0.95, format!("dim {target_dim}: {:.1}% within 1%, p95 {:.4}", 100.0 * frac, f(r, "p95_rel_error"))))
}

fn circuit() -> gkpmod::Result<(bool, String)> {
    let cfg = RunConfig { seed: SEED, ..RunConfig::default() };
    let (s, _) = command(Command::Params, &cfg)?;
    let g = f(&s, "g_mhz");
    let all = s["all_pass"].as_bool().unwrap_or(false);
    let bound = s["potential_minimum"]["within_bound"].as_bool().unwrap_or(false);
    let ok = (3.0..=15.0).contains(&g) && all && bound;
    Ok((ok, format!("g/2π {g:.2} MHz, all bands {all} (failing {}), minimum bound {bound}", s["failing"])))
}

fn main() {
    let start = Instant::now();
    let mut t = Tally { failed: Vec::new() };
    t.run("fig2_wigner", fig2);
    t.run("fig3_scaling", fig3);
    t.run("fig4_cubic", fig4);
    t.run("closed_form_oracles", oracles);
    t.run("stabilizer_algebra", stabilizers);
    t.run("photon_loss", photon_loss);
    t.run("readout_loss", readout_loss);
    t.run("drive", drive);
    t.run("gradual_release", release);
    t.run("truncation_self_check", || appendix_d(500));
    match appendix_d(800) {
        Ok((_, d)) => println!("INFO truncation_self_check control: {d}"),
        Err(e) => println!("INFO truncation_self_check control: error {e}"),
    }
    t.run("circuit", circuit);
    println!("acceptance: {} failed, {:.0} s", t.failed.len(), start.elapsed().as_secs_f64());
    if !t.failed.is_empty() {
        println!("failed: {}", t.failed.join(", "));
        std::process::exit(1);
    }
}
