//! Gradual release of the ancilla through a cascade of weak beamsplitters.
//!
//! Each step leaks a fraction κδt of the remaining intracavity field into a
//! fresh traveling mode that is heterodyned. Conditioned on the target q̂
//! eigenvalue, step j emits β_j around α_j e^{iθ} with
//! α_j = α √(κδt) (1 − κδt)^{j/2}. The record enters the target only
//! through X = Σ_j α_j* β_j, so the conditional map is diagonal in the q̂
//! frame with entries ∝ exp(X* e^{iθ_k}). Whatever is still inside the
//! ancilla at `t_meas`, plus the undetected fraction, is traced out.

use crate::error::{Error, Result};
use crate::hilbert::{FockSpace, ModularOp, SqueezingReport};
use crate::linalg::C64;
use crate::modular_measure::{AncillaPrep, Frame, Measurement, TargetState, PROBABILITY_FLOOR};
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::io::Write;
use std::path::Path;

/// Default bound on the per-step leak κδt.
pub const MAX_STEP_LEAK: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Filter {
    /// `f(t) = e^{−κt/2}` sampled at `t = jδt`, matched to the leak profile.
    #[default]
    Exponential,
    /// One weight per step.
    Custom { samples: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseConfig {
    pub kappa_open: f64,
    pub t_meas: f64,
    /// Number of steps; `None` picks the smallest J with κδt ≤ [`MAX_STEP_LEAK`].
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub filter: Filter,
}

impl ReleaseConfig {
    pub fn new(kappa_open: f64, t_meas: f64) -> Self {
        ReleaseConfig { kappa_open, t_meas, steps: None, filter: Filter::Exponential }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = Some(steps);
        self
    }

    /// κ t_meas.
    pub fn opening(&self) -> f64 {
        self.kappa_open * self.t_meas
    }

    pub fn step_count(&self) -> usize {
        match self.steps {
            Some(j) => j,
            None => (self.opening() / MAX_STEP_LEAK).ceil() as usize,
        }
    }

    /// κδt.
    pub fn step_leak(&self) -> f64 {
        let j = self.step_count();
        if j == 0 {
            0.0
        } else {
            self.opening() / j as f64
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.kappa_open >= 0.0 && self.t_meas >= 0.0) || self.kappa_open.is_nan() || self.t_meas.is_nan() {
            return Err(Error::InvalidArgument("release rate and time must be non-negative".into()));
        }
        if !self.opening().is_finite() {
            return Err(Error::InvalidArgument("κ t_meas must be finite for a simulated release".into()));
        }
        if self.step_count() == 0 && self.opening() > 0.0 {
            return Err(Error::InvalidArgument("release needs at least one step".into()));
        }
        let leak = self.step_leak();
        if leak >= 1.0 {
            return Err(Error::Regime(format!("per-step leak κδt = {leak} must be below 1")));
        }
        if let Filter::Custom { samples } = &self.filter {
            if samples.len() != self.step_count() {
                return Err(Error::InvalidArgument(format!(
                    "custom filter has {} samples for {} steps",
                    samples.len(),
                    self.step_count()
                )));
            }
        }
        Ok(())
    }

    /// Per-step amplitudes relative to α: `√(κδt)(1 − κδt)^{j/2}`.
    pub fn step_weights(&self) -> Vec<f64> {
        let leak = self.step_leak();
        (0..self.step_count()).map(|j| (leak * (1.0 - leak).powi(j as i32)).sqrt()).collect()
    }

    /// Σ_j α_j² / |α|², i.e. 1 − (1 − κδt)^J. Infinite times give 1.
    pub fn completeness(&self) -> f64 {
        if self.opening().is_infinite() {
            return 1.0;
        }
        let j = self.step_count();
        if j == 0 {
            return 0.0;
        }
        1.0 - (1.0 - self.step_leak()).powi(j as i32)
    }

    /// Filter values at `t = jδt`.
    fn filter_values(&self) -> Vec<f64> {
        match &self.filter {
            Filter::Exponential => {
                let leak = self.step_leak();
                (0..self.step_count()).map(|j| (1.0 - leak).powf(j as f64 / 2.0)).collect()
            }
            Filter::Custom { samples } => samples.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratedOutcome {
    pub i_out: f64,
    pub q_out: f64,
    pub phi_out: f64,
    pub k_eff: f64,
}

impl IntegratedOutcome {
    /// From the filtered record `I + iQ`, with `|α|` the ancilla amplitude.
    pub fn from_iq(iq: C64, alpha_abs: f64) -> Self {
        IntegratedOutcome {
            i_out: iq.re,
            q_out: iq.im,
            phi_out: iq.im.atan2(iq.re),
            k_eff: alpha_abs * (2.0 * iq.norm_sqr()).sqrt(),
        }
    }

    pub fn iq(&self) -> C64 {
        C64::new(self.i_out, self.q_out)
    }
}

/// Release readout of a modular measurement.
#[derive(Clone)]
pub struct Release {
    meter: Measurement,
    cfg: ReleaseConfig,
    weights: Vec<f64>,
    filter: Vec<f64>,
    /// Intensity that never reaches the detector: undetected fraction plus
    /// the residual field at `t_meas`.
    dark: f64,
}

impl Release {
    pub fn new(op: ModularOp, prep: AncillaPrep, cfg: ReleaseConfig, space: FockSpace) -> Result<Self> {
        cfg.check()?;
        let meter = Measurement::new(op, prep, space)?;
        let n = prep.mean_photons();
        let dark = n - prep.readout_efficiency * n * cfg.completeness();
        Ok(Release { weights: cfg.step_weights(), filter: cfg.filter_values(), meter, cfg, dark })
    }

    pub fn meter(&self) -> &Measurement {
        &self.meter
    }

    pub fn config(&self) -> &ReleaseConfig {
        &self.cfg
    }

    /// Detected amplitudes α_j (complex, carrying the phase of α).
    pub fn amplitudes(&self) -> Vec<C64> {
        let a = self.meter.prep.detected_alpha();
        self.weights.iter().map(|w| a * w).collect()
    }

    /// One step record conditioned on the frame index `k`.
    pub fn emit<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<C64> {
        let rot = C64::from_polar(1.0, self.meter.phases()[k]);
        self.amplitudes()
            .into_iter()
            .map(|a| {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                a * rot + C64::new(x, y) * FRAC_1_SQRT_2
            })
            .collect()
    }

    /// `I + iQ = √2 e^{−i arg α} Σ_j f_j √(κδt) β_j`.
    pub fn integrate(&self, betas: &[C64]) -> IntegratedOutcome {
        let alpha = self.meter.prep.alpha;
        let unphase = if alpha.norm() > 0.0 { alpha.conj() / alpha.norm() } else { C64::from(1.0) };
        let root = self.cfg.step_leak().sqrt();
        let sum: C64 = betas.iter().zip(&self.filter).map(|(b, f)| b * (f * root)).sum();
        IntegratedOutcome::from_iq(sum * unphase * SQRT_2, alpha.norm())
    }

    /// Frame diagonal `exp(X* e^{iθ_k} − S/2 − i·shift·θ_k)` with
    /// `X* = (|α|/√2)(I − iQ)`, normalized so that Σ over records is a POVM for
    /// the matched filter.
    fn kraus(&self, out: &IntegratedOutcome) -> Vec<C64> {
        let a = self.meter.prep.detected_alpha().norm();
        let x_conj = out.iq().conj() * (a * FRAC_1_SQRT_2);
        let s = a * a * self.cfg.completeness();
        let shift = self.meter.counter_shift();
        self.meter
            .phases()
            .iter()
            .map(|&t| (x_conj * C64::from_polar(1.0, t) - s / 2.0 - C64::new(0.0, shift * t)).exp())
            .collect()
    }

    /// Conditional frame state (normalized) and its unnormalized weight.
    pub fn condition(&self, frame: &Frame, out: &IntegratedOutcome) -> Result<(Frame, f64)> {
        let m = self.kraus(out);
        let mut post = frame.kraus(&m);
        if self.dark > 0.0 {
            let theta = self.meter.phases();
            let dark = self.dark;
            post = post.dephase(|k, l| (C64::new(-dark, 0.0) + C64::from_polar(dark, theta[k] - theta[l])).exp());
        }
        let p = post.trace();
        if !(p > PROBABILITY_FLOOR) {
            return Err(Error::ZeroProbability(p));
        }
        post.scale(1.0 / p);
        Ok((post, p))
    }

    /// Ancestral shot: q̂ index from the populations, then the step record.
    pub fn shot<R: Rng + ?Sized>(&self, frame: &Frame, rng: &mut R) -> Result<(IntegratedOutcome, Frame)> {
        let w: Vec<f64> = frame.populations().iter().map(|p| p.max(0.0)).collect();
        let idx = WeightedIndex::new(&w).map_err(|e| Error::InvalidArgument(format!("populations: {e}")))?;
        let k = idx.sample(rng);
        let betas = self.emit(k, rng);
        let out = self.integrate(&betas);
        let (post, _) = self.condition(frame, &out)?;
        Ok((out, post))
    }

    pub fn report(&self, frame: &Frame) -> SqueezingReport {
        frame.report(self.meter.basis(), self.meter.turns())
    }
}

/// Single release shot measuring S_q on `state`.
pub fn release_shot<R: Rng + ?Sized>(
    state: &TargetState,
    prep: AncillaPrep,
    cfg: &ReleaseConfig,
    rng: &mut R,
) -> Result<(IntegratedOutcome, TargetState)> {
    let r = Release::new(ModularOp::Sq, prep, cfg.clone(), state.space())?;
    let frame = r.meter.frame(state);
    let (out, post) = r.shot(&frame, rng)?;
    let back = TargetState::from_frame(&post, r.meter.basis(), r.meter.turns(), state.space())?;
    Ok((out, back))
}

/// `⟨K_eff²⟩ = 4(S + S²)` with `S = η|α|²(1 − (1 − κδt)^J)`, and the
/// long-time lower bound `1/√(4π|α|√(1 + |α|²))` on Δ_q.
pub fn release_moments(prep: &AncillaPrep, cfg: &ReleaseConfig) -> (f64, f64) {
    let s = prep.readout_efficiency * prep.mean_photons() * cfg.completeness();
    let a = prep.detected_alpha().norm();
    let bound = 1.0 / (4.0 * PI * a * (1.0 + a * a).sqrt()).sqrt();
    (4.0 * (s + s * s), bound)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReleaseRow {
    pub shot: usize,
    #[serde(rename = "I_out")]
    pub i_out: f64,
    #[serde(rename = "Q_out")]
    pub q_out: f64,
    pub phi_out: f64,
    #[serde(rename = "K_eff")]
    pub k_eff: f64,
    pub delta_q: f64,
    pub delta_p: f64,
}

impl ReleaseRow {
    pub fn new(shot: usize, out: &IntegratedOutcome, report: &SqueezingReport) -> Self {
        ReleaseRow {
            shot,
            i_out: out.i_out,
            q_out: out.q_out,
            phi_out: out.phi_out,
            k_eff: out.k_eff,
            delta_q: report.delta_q,
            delta_p: report.delta_p,
        }
    }
}

pub fn write_release_csv(rows: &[ReleaseRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() || a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("KS samples must be non-empty and free of NaN".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsTest { statistic: d, p_value: kolmogorov_q(lambda) })
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Writes a `name,value` summary.
pub fn write_summary(pairs: &[(&str, f64)], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "quantity,value")?;
    for (k, v) in pairs {
        writeln!(f, "{k},{v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{bessel_i1e, integrate};
    use crate::hilbert::StateVector;
    use crate::rng::substream;
    use rand::SeedableRng;

    #[test]
    fn completeness_limit() {
        let cfg = ReleaseConfig::new(5.0, 1.0).with_steps(1000);
        let s: f64 = cfg.step_weights().iter().map(|w| w * w).sum();
        assert!((s - cfg.completeness()).abs() < 1e-12);
        assert!((s / (1.0 - (-5.0f64).exp()) - 1.0).abs() < 0.01);
        assert_eq!(ReleaseConfig::new(5.0, 1.0).step_count(), 500);
    }

    #[test]
    fn regime_guard() {
        let cfg = ReleaseConfig::new(1.0, 2.0).with_steps(1);
        assert!(matches!(cfg.check(), Err(Error::Regime(_))));
        let bad = ReleaseConfig { filter: Filter::Custom { samples: vec![1.0; 3] }, ..ReleaseConfig::new(1.0, 1.0) };
        assert!(matches!(bad.check(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn moments_closed_form() {
        let prep = AncillaPrep::with_mean_photons(3.0);
        let (k2, bound) = release_moments(&prep, &ReleaseConfig::new(1.0, f64::INFINITY));
        assert!((k2 - 48.0).abs() < 1e-12);
        assert!((bound - 1.0 / (4.0 * PI * 3f64.sqrt() * 2.0).sqrt()).abs() < 1e-15);
        assert_eq!(release_moments(&prep, &ReleaseConfig::new(1.0, 0.0)).0, 0.0);
    }

    #[test]
    fn closed_release_is_uninformative() {
        let space = FockSpace::new(200).unwrap();
        let state = TargetState::Pure(crate::hilbert::make_squeezed_vacuum(0.5, space).unwrap());
        let prep = AncillaPrep::with_mean_photons(2.0);
        let r = Release::new(ModularOp::Sq, prep, ReleaseConfig::new(1.0, 0.0), space).unwrap();
        let frame = r.meter().frame(&state);
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let (out, post) = r.shot(&frame, &mut rng).unwrap();
        assert_eq!((out.i_out, out.q_out, out.k_eff), (0.0, 0.0, 0.0));
        for (a, b) in post.populations().iter().zip(frame.populations()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_record_tracks_q() {
        // an input localized at one q̂ eigenvalue
        let space = FockSpace::new(300).unwrap();
        let prep = AncillaPrep::with_mean_photons(2.0);
        let cfg = ReleaseConfig::new(1.0, 3.0);
        let r = Release::new(ModularOp::Sq, prep, cfg.clone(), space).unwrap();
        let k = 150;
        let theta = r.meter().phases()[k];
        let n = 4000;
        let mut rng = substream(9, "release-mean", 0);
        let mean: C64 = (0..n).map(|_| r.integrate(&r.emit(k, &mut rng)).iq()).sum::<C64>() / n as f64;
        let want = C64::from_polar(SQRT_2 * 2f64.sqrt() * cfg.completeness(), theta);
        // per-component std of I is √(2S)/|α| ≈ 0.97
        assert!((mean - want).norm() < 4.0 * 0.97 / (n as f64).sqrt(), "{mean} {want}");
    }

    #[test]
    fn bessel_identity() {
        for i in 0..=8 {
            let y = 0.5 * i as f64;
            // e^{−y²−x²} I₁(2yx) = e^{−(x−y)²} i1e(2yx)
            let v = 2.0
                * integrate(|x| x * x * (-(x - y) * (x - y)).exp() * bessel_i1e(2.0 * y * x), 0.0, y + 12.0, 1e-12)
                    .unwrap();
            assert!((v - y).abs() < 1e-8, "{y}: {v}");
        }
    }

    #[test]
    fn ks_detects_shift() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..800).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..800).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let c: Vec<f64> = b.iter().map(|x| x + 0.3).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.05);
        assert!(ks_two_sample(&a, &c).unwrap().p_value < 1e-4);
        let same = ks_two_sample(&a, &a).unwrap();
        assert_eq!(same.statistic, 0.0);
    }

    #[test]
    fn matches_direct_for_complex_alpha() {
        // steps carrying β·w_j give X* = c·α β*, the direct record at amplitude √c·α
        let space = FockSpace::new(200).unwrap();
        let state = TargetState::Pure(crate::hilbert::make_squeezed_vacuum(0.7, space).unwrap());
        let alpha = C64::new(0.6, 1.3);
        let prep = AncillaPrep::new(alpha);
        let r = Release::new(ModularOp::Sq, prep, ReleaseConfig::new(1.0, 2.0), space).unwrap();
        let c = r.config().completeness();
        let beta = C64::new(-0.4, 1.1);
        let betas: Vec<C64> = r.config().step_weights().iter().map(|w| beta * (w / c.sqrt())).collect();
        let frame = r.meter().frame(&state);
        let (post, _) = r.condition(&frame, &r.integrate(&betas)).unwrap();
        let direct = Measurement::new(ModularOp::Sq, AncillaPrep::new(alpha * c.sqrt()), space).unwrap();
        let (want, _) = direct.post(&frame, beta).unwrap();
        for (a, b) in post.populations().iter().zip(want.populations()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn shot_is_normalized_state() {
        let space = FockSpace::new(120).unwrap();
        let state = TargetState::Pure(StateVector::vacuum(space));
        let prep = AncillaPrep::with_mean_photons(2.0);
        let mut rng = substream(1, "release", 0);
        let (out, post) = release_shot(&state, prep, &ReleaseConfig::new(1.0, 4.0), &mut rng).unwrap();
        assert!((out.phi_out - out.q_out.atan2(out.i_out)).abs() < 1e-15);
        assert!((out.k_eff - 2f64.sqrt() * (2.0 * out.iq().norm_sqr()).sqrt()).abs() < 1e-12);
        assert!((post.to_density().trace().re - 1.0).abs() < 1e-10);
    }
}
