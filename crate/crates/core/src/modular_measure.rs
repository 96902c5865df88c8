//! Modular quadrature measurement with a coherent ancilla read out by
//! heterodyne detection.
//!
//! Every Kraus operator here is a function of q̂ (or of p̂ after a quarter
//! turn), so the work happens in the q̂ eigenbasis where they are diagonal.
//! Measuring a p̂-type stabilizer rotates the state by `R = iⁿ̂`, runs the
//! q̂ machinery and rotates back.

use crate::error::{Error, Result};
use crate::hilbert::{
    coherent_leakage, make_coherent, make_gkp_approx, make_squeezed_vacuum, quad_basis, quarter_phase, trace_product,
    DensityOperator, FockSpace, Logical, ModularOp, OperatorHandle, OperatorLabel, QuadBasis, SqueezingReport,
    StateVector,
};
use crate::linalg::{ser_c64, CMat, CVec, C64};
use crate::rng::{map_shots, substream};
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, StandardNormal};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// Ancilla leakage accepted by default. A 20-level ancilla at |α|² = 4
/// loses about 1e−8, so the state threshold would reject the paper's setup.
pub const ANCILLA_LEAKAGE_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_ANCILLA_CUTOFF: usize = 20;
/// Outcome densities below this are rejected as zero-probability events.
pub const PROBABILITY_FLOOR: f64 = 1e-300;
/// Spacing of the likelihood grid search.
pub const ML_GRID_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AncillaPrep {
    #[serde(serialize_with = "ser_c64")]
    pub alpha: C64,
    pub counter_displacement_on: bool,
    pub fock_cutoff: usize,
    pub leakage_threshold: f64,
    /// Fraction of the ancilla intensity that reaches the detector.
    pub readout_efficiency: f64,
}

impl AncillaPrep {
    pub fn new(alpha: C64) -> Self {
        AncillaPrep {
            alpha,
            counter_displacement_on: true,
            fock_cutoff: DEFAULT_ANCILLA_CUTOFF,
            leakage_threshold: ANCILLA_LEAKAGE_THRESHOLD,
            readout_efficiency: 1.0,
        }
    }

    /// Real amplitude `√n̄`.
    pub fn with_mean_photons(nbar: f64) -> Self {
        AncillaPrep::new(C64::from(nbar.max(0.0).sqrt()))
    }

    pub fn mean_photons(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// Amplitude seen by the detector, `√η·α`.
    pub fn detected_alpha(&self) -> C64 {
        self.alpha * self.readout_efficiency.sqrt()
    }

    /// Counter-displacement in units of the per-photon phase: `|α|²/2`.
    pub fn counter_shift(&self) -> f64 {
        if self.counter_displacement_on {
            self.mean_photons() / 2.0
        } else {
            0.0
        }
    }

    pub fn leakage(&self) -> f64 {
        coherent_leakage(self.alpha, self.fock_cutoff)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.re.is_finite() || !self.alpha.im.is_finite() {
            return Err(Error::InvalidArgument("ancilla amplitude not finite".into()));
        }
        if self.fock_cutoff == 0 {
            return Err(Error::InvalidArgument("ancilla Fock cutoff must be positive".into()));
        }
        if !(self.readout_efficiency > 0.0 && self.readout_efficiency <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "readout efficiency {} outside (0, 1]",
                self.readout_efficiency
            )));
        }
        let leakage = self.leakage();
        if leakage > self.leakage_threshold {
            return Err(Error::Truncation { leakage, threshold: self.leakage_threshold });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementRecord {
    #[serde(serialize_with = "ser_c64")]
    pub beta: C64,
    pub phi: f64,
    pub concentration: f64,
    pub probability_density: f64,
    pub stabilizer: ModularOp,
}

/// `arg β` in (−π, π]; the negative real axis maps to +π.
pub fn outcome_phase(beta: C64) -> f64 {
    let phi = beta.im.atan2(beta.re);
    if phi <= -PI {
        PI
    } else {
        phi
    }
}

/// Target state in the q̂ eigenbasis of a measurement frame.
#[derive(Debug, Clone)]
pub enum Frame {
    Pure(CVec),
    Mixed(CMat),
}

impl Frame {
    pub fn populations(&self) -> Vec<f64> {
        match self {
            Frame::Pure(c) => c.iter().map(|z| z.norm_sqr()).collect(),
            Frame::Mixed(m) => (0..m.nrows()).map(|k| m[(k, k)].re.max(0.0)).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Frame::Pure(c) => c.norm_squared(),
            Frame::Mixed(m) => m.trace().re,
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        match self {
            Frame::Pure(c) => *c *= C64::from(s.sqrt()),
            Frame::Mixed(m) => *m *= C64::from(s),
        }
    }

    /// `ρ → m ρ m†` for diagonal `m`.
    pub fn kraus(&self, m: &[C64]) -> Frame {
        match self {
            Frame::Pure(c) => Frame::Pure(CVec::from_fn(c.len(), |k, _| m[k] * c[k])),
            Frame::Mixed(r) => Frame::Mixed(CMat::from_fn(r.nrows(), r.ncols(), |k, l| m[k] * r[(k, l)] * m[l].conj())),
        }
    }

    /// Multiplies matrix elements by `w(k, l)`; pure states become mixed.
    pub fn dephase(&self, w: impl Fn(usize, usize) -> C64) -> Frame {
        let m = self.matrix();
        Frame::Mixed(CMat::from_fn(m.nrows(), m.ncols(), |k, l| m[(k, l)] * w(k, l)))
    }

    pub fn matrix(&self) -> CMat {
        match self {
            Frame::Pure(c) => c * c.adjoint(),
            Frame::Mixed(m) => m.clone(),
        }
    }

    pub fn add(&self, other: &Frame) -> Frame {
        Frame::Mixed(self.matrix() + other.matrix())
    }

    /// `Tr(A ρ)` for an operator given in the same frame.
    pub fn expect(&self, a: &CMat) -> C64 {
        match self {
            Frame::Pure(c) => c.dotc(&(a * c)),
            Frame::Mixed(m) => trace_product(a, m),
        }
    }

    /// Squeezing of the (normalized) state, reported in the original frame.
    pub fn report(&self, basis: &QuadBasis, turns: i32) -> SqueezingReport {
        let tr = self.trace();
        let pops = self.populations();
        let c = 2.0 * PI.sqrt();
        let s_diag: C64 = pops.iter().zip(basis.q()).map(|(p, &q)| C64::from_polar(*p, c * q)).sum::<C64>() / tr;
        let s_off = self.expect(basis.q_matrix(ModularOp::Sp)) / tr;
        let n = self.expect(basis.number_q()).re / tr;
        // R S_q R† = S_p† and R S_p R† = S_q
        if turns.rem_euclid(2) == 0 {
            SqueezingReport::from_expectations(s_diag, s_off, n)
        } else {
            SqueezingReport::from_expectations(s_off.conj(), s_diag, n)
        }
    }
}

/// A state of the target oscillator.
#[derive(Debug, Clone)]
pub enum TargetState {
    Pure(StateVector),
    Mixed(DensityOperator),
}

impl TargetState {
    pub fn space(&self) -> FockSpace {
        match self {
            TargetState::Pure(s) => s.space(),
            TargetState::Mixed(r) => r.space(),
        }
    }

    pub fn frame(&self, basis: &QuadBasis, turns: i32) -> Frame {
        match self {
            TargetState::Pure(s) => Frame::Pure(basis.to_q(s.rotated(turns).amplitudes())),
            TargetState::Mixed(r) => Frame::Mixed(basis.density_to_q(r.rotated(turns).matrix())),
        }
    }

    /// Normalizes a frame state and maps it back to the Fock basis.
    pub fn from_frame(frame: &Frame, basis: &QuadBasis, turns: i32, space: FockSpace) -> Result<TargetState> {
        let tr = frame.trace();
        match frame {
            Frame::Pure(c) => {
                let v = basis.from_q(&(c / C64::from(tr.sqrt())));
                Ok(TargetState::Pure(StateVector::new(space, v, 0.0)?.rotated(-turns)))
            }
            Frame::Mixed(m) => {
                let f = basis.density_from_q(&(m / C64::from(tr)));
                let herm = (&f + f.adjoint()) * C64::from(0.5);
                Ok(TargetState::Mixed(DensityOperator::from_matrix_unchecked(space, herm).rotated(-turns)))
            }
        }
    }

    pub fn to_density(&self) -> DensityOperator {
        match self {
            TargetState::Pure(s) => s.to_density(),
            TargetState::Mixed(r) => r.clone(),
        }
    }
}

/// One configured measurement of a code displacement on a target of fixed
/// dimension.
#[derive(Clone)]
pub struct Measurement {
    pub op: ModularOp,
    pub prep: AncillaPrep,
    basis: Arc<QuadBasis>,
    theta: Vec<f64>,
    shift: f64,
}

impl Measurement {
    pub fn new(op: ModularOp, prep: AncillaPrep, space: FockSpace) -> Result<Self> {
        prep.validate()?;
        let basis = quad_basis(space.dim());
        let theta = basis.phases(op.scale());
        Ok(Measurement { op, prep, basis, theta, shift: prep.counter_shift() })
    }

    /// Overrides the counter-displacement (in units of the per-photon phase).
    pub fn with_counter_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn counter_shift(&self) -> f64 {
        self.shift
    }

    pub fn basis(&self) -> &QuadBasis {
        &self.basis
    }

    pub fn space(&self) -> FockSpace {
        FockSpace::new(self.basis.dim()).expect("basis dimension ≥ 2")
    }

    pub fn turns(&self) -> i32 {
        self.op.quarter_turns()
    }

    /// Ancilla phases `θ_k` conditioned on each q̂ eigenvalue.
    pub fn phases(&self) -> &[f64] {
        &self.theta
    }

    pub fn frame(&self, state: &TargetState) -> Frame {
        state.frame(&self.basis, self.turns())
    }

    /// Diagonal of `M_β` in the frame, built as the ancilla-Fock Kraus sum
    /// truncated at the cutoff.
    pub fn kraus_diagonal(&self, beta: C64) -> Vec<C64> {
        kraus_diagonal(beta, self.prep.detected_alpha(), self.shift, self.prep.fock_cutoff, &self.theta)
    }

    /// `M_β` in the Fock basis.
    pub fn operator(&self, beta: C64) -> OperatorHandle {
        let m = self.kraus_diagonal(beta);
        let base = crate::linalg::rsandwich_diag(self.basis.vectors(), &m);
        let d = base.nrows();
        let t = self.turns();
        let mat = if t == 0 {
            base
        } else {
            CMat::from_fn(d, d, |i, j| base[(i, j)] * quarter_phase(i, -t) * quarter_phase(j, t))
        };
        OperatorHandle::from_parts(self.space(), mat, OperatorLabel::Custom(format!("M_beta[{}]", self.op.name())))
    }

    /// Dephasing of frame coherences by the undetected part of the ancilla.
    fn readout_dephasing(&self) -> Option<impl Fn(usize, usize) -> C64 + '_> {
        let lost = (1.0 - self.prep.readout_efficiency) * self.prep.mean_photons();
        (lost > 0.0).then_some({
            move |k: usize, l: usize| {
                let d = self.theta[k] - self.theta[l];
                (C64::new(-lost, 0.0) + C64::from_polar(lost, d)).exp()
            }
        })
    }

    /// `P(β) = (1/π) Σ_k p_k exp(−|α e^{iθ_k} − β|²)`.
    pub fn density(&self, pops: &[f64], beta: C64) -> f64 {
        let a = self.prep.detected_alpha();
        pops.iter()
            .zip(&self.theta)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, &t)| p * (-(a * C64::from_polar(1.0, t) - beta).norm_sqr()).exp())
            .sum::<f64>()
            / PI
    }

    /// Ancestral draw: eigenvalue index from the populations, then β from a
    /// complex normal of unit total variance around `α e^{iθ_k}`.
    pub fn sample<R: Rng + ?Sized>(&self, pops: &[f64], rng: &mut R) -> Result<C64> {
        let w: Vec<f64> = pops.iter().map(|p| p.max(0.0)).collect();
        let idx = WeightedIndex::new(&w).map_err(|e| Error::InvalidArgument(format!("populations: {e}")))?;
        let k = idx.sample(rng);
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let noise = C64::new(x, y) * std::f64::consts::FRAC_1_SQRT_2;
        Ok(self.prep.detected_alpha() * C64::from_polar(1.0, self.theta[k]) + noise)
    }

    /// Unnormalized `M_β ρ M_β†` (including readout dephasing) and its trace.
    pub fn apply(&self, frame: &Frame, beta: C64) -> (Frame, f64) {
        let m = self.kraus_diagonal(beta);
        let mut out = frame.kraus(&m);
        if let Some(w) = self.readout_dephasing() {
            out = out.dephase(w);
        }
        let p = out.trace();
        (out, p)
    }

    /// Normalized post-measurement frame state and the outcome density.
    pub fn post(&self, frame: &Frame, beta: C64) -> Result<(Frame, f64)> {
        let (mut out, p) = self.apply(frame, beta);
        if !(p > PROBABILITY_FLOOR) {
            return Err(Error::ZeroProbability(p));
        }
        out.scale(1.0 / p);
        Ok((out, p))
    }

    pub fn record(&self, beta: C64, density: f64) -> MeasurementRecord {
        MeasurementRecord {
            beta,
            phi: outcome_phase(beta),
            concentration: 2.0 * self.prep.detected_alpha().norm() * beta.norm(),
            probability_density: density,
            stabilizer: self.op,
        }
    }

    /// Most likely outcome: grid search at spacing [`ML_GRID_STEP`] over
    /// |Re β|, |Im β| ≤ |α| + 4, then compass refinement.
    pub fn max_likelihood(&self, pops: &[f64]) -> (C64, f64) {
        let top = pops.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<f64> = pops.iter().map(|&p| if p > 1e-14 * top { p } else { 0.0 }).collect();
        let half = self.prep.detected_alpha().norm() + 4.0;
        let (b, _) = grid_argmax(half, |b| self.density(&keep, b));
        (b, self.density(pops, b))
    }
}

/// Maximizes `f` on the square |Re β|, |Im β| ≤ `half` at spacing
/// [`ML_GRID_STEP`], then refines by a shrinking compass search.
pub(crate) fn grid_argmax(half: f64, f: impl Fn(C64) -> f64) -> (C64, f64) {
    let n = (2.0 * half / ML_GRID_STEP).round() as usize + 1;
    let mut best = (C64::new(0.0, 0.0), f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..n {
            let b = C64::new(-half + i as f64 * ML_GRID_STEP, -half + j as f64 * ML_GRID_STEP);
            let d = f(b);
            if d > best.1 {
                best = (b, d);
            }
        }
    }
    let mut step = ML_GRID_STEP / 2.0;
    while step > 1e-8 {
        let mut moved = false;
        for dir in [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0)] {
            let b = best.0 + dir * step;
            let d = f(b);
            if d > best.1 {
                best = (b, d);
                moved = true;
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    best
}

fn kraus_diagonal(beta: C64, alpha: C64, shift: f64, cutoff: usize, theta: &[f64]) -> Vec<C64> {
    let pref = (-(alpha.norm_sqr() + beta.norm_sqr()) / 2.0).exp() / PI.sqrt();
    theta
        .iter()
        .map(|&t| {
            let z = beta.conj() * alpha * C64::from_polar(1.0, t);
            let mut term = C64::new(1.0, 0.0);
            let mut sum = term;
            for n in 1..cutoff {
                term = term * z / n as f64;
                sum += term;
            }
            sum * pref * C64::from_polar(1.0, -shift * t)
        })
        .collect()
}

pub fn measurement_operator(beta: C64, prep: AncillaPrep, target_space: FockSpace) -> Result<OperatorHandle> {
    Ok(Measurement::new(ModularOp::Sq, prep, target_space)?.operator(beta))
}

pub fn outcome_density(rho_in: &DensityOperator, prep: AncillaPrep, beta: C64) -> Result<f64> {
    outcome_density_for(ModularOp::Sq, &TargetState::Mixed(rho_in.clone()), prep, beta)
}

pub fn outcome_density_for(op: ModularOp, state: &TargetState, prep: AncillaPrep, beta: C64) -> Result<f64> {
    let m = Measurement::new(op, prep, state.space())?;
    Ok(m.density(&m.frame(state).populations(), beta))
}

pub fn sample_outcome<R: Rng + ?Sized>(
    rho_in: &DensityOperator,
    prep: AncillaPrep,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    sample_outcome_for(ModularOp::Sq, &TargetState::Mixed(rho_in.clone()), prep, rng)
}

pub fn sample_outcome_for<R: Rng + ?Sized>(
    op: ModularOp,
    state: &TargetState,
    prep: AncillaPrep,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    let m = Measurement::new(op, prep, state.space())?;
    let pops = m.frame(state).populations();
    let beta = m.sample(&pops, rng)?;
    Ok(m.record(beta, m.density(&pops, beta)))
}

pub fn post_measurement_state(
    rho_in: &DensityOperator,
    prep: AncillaPrep,
    beta: C64,
) -> Result<(DensityOperator, f64)> {
    let (s, p) = post_measurement_for(ModularOp::Sq, &TargetState::Mixed(rho_in.clone()), prep, beta)?;
    Ok((s.to_density(), p))
}

/// Post-measurement state; pure inputs stay pure unless readout loss
/// dephases them.
pub fn post_measurement_for(
    op: ModularOp,
    state: &TargetState,
    prep: AncillaPrep,
    beta: C64,
) -> Result<(TargetState, f64)> {
    let m = Measurement::new(op, prep, state.space())?;
    let (f, p) = m.post(&m.frame(state), beta)?;
    Ok((TargetState::from_frame(&f, m.basis(), m.turns(), state.space())?, p))
}

pub fn max_likelihood_outcome(op: ModularOp, state: &TargetState, prep: AncillaPrep) -> Result<(C64, f64)> {
    let m = Measurement::new(op, prep, state.space())?;
    Ok(m.max_likelihood(&m.frame(state).populations()))
}

/// Eigenvalue estimate `e^{iφ}`; with a prior, the phase of
/// `Σ_k p_k e^{iθ_k} e^{K cos(θ_k − φ)}`.
pub fn infer_eigenvalue(record: &MeasurementRecord, prior: Option<&DensityOperator>) -> C64 {
    let raw = C64::from_polar(1.0, record.phi);
    let Some(rho) = prior else { return raw };
    let basis = quad_basis(rho.space().dim());
    let pops = TargetState::Mixed(rho.clone()).frame(&basis, record.stabilizer.quarter_turns()).populations();
    let theta = basis.phases(record.stabilizer.scale());
    let k = record.concentration;
    let s: C64 =
        pops.iter().zip(&theta).map(|(p, &t)| C64::from_polar(p * (k * (t - record.phi).cos() - k).exp(), t)).sum();
    if s.norm() == 0.0 {
        raw
    } else {
        s / s.norm()
    }
}

/// Logical readout: measures `Z` (half the coupling phase); bit 0 when the
/// ancilla comes back unrotated.
pub fn measure_logical_z<R: Rng + ?Sized>(
    rho_in: &DensityOperator,
    prep: AncillaPrep,
    rng: &mut R,
) -> Result<(u8, MeasurementRecord, DensityOperator)> {
    let m = Measurement::new(ModularOp::Z, prep, rho_in.space())?;
    let frame = m.frame(&TargetState::Mixed(rho_in.clone()));
    let pops = frame.populations();
    let beta = m.sample(&pops, rng)?;
    let (post, p) = m.post(&frame, beta)?;
    let rec = m.record(beta, p);
    let bit = if rec.phi.cos() > 0.0 { 0 } else { 1 };
    let state = TargetState::from_frame(&post, m.basis(), m.turns(), rho_in.space())?;
    Ok((bit, rec, state.to_density()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputState {
    Vacuum,
    Coherent(C64),
    /// Squeezed vacuum with the given Δ_q.
    Squeezed(f64),
    Gkp {
        delta: f64,
        logical: Logical,
    },
    Fock(usize),
}

impl InputState {
    pub fn prepare(&self, space: FockSpace) -> Result<StateVector> {
        match *self {
            InputState::Vacuum => Ok(StateVector::vacuum(space)),
            InputState::Coherent(a) => make_coherent(a, space),
            InputState::Squeezed(d) => make_squeezed_vacuum(d, space),
            InputState::Gkp { delta, logical } => make_gkp_approx(delta, logical, space),
            InputState::Fock(n) => StateVector::fock(space, n),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub ancilla: AncillaPrep,
    pub target_dim: usize,
    pub input: InputState,
    /// Stabilizers measured in order on every shot, each with a fresh ancilla.
    pub sequence: Vec<ModularOp>,
    pub shots: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShotResult {
    pub shot: usize,
    pub records: Vec<MeasurementRecord>,
    pub report: SqueezingReport,
}

/// Runs `cfg.shots` independent shots; shot `i` draws from the substream
/// keyed by `(cfg.seed, stream, i)`.
pub fn run_protocol(cfg: &ProtocolConfig, stream: &str, threads: usize) -> Result<Vec<ShotResult>> {
    if cfg.sequence.is_empty() {
        return Err(Error::InvalidArgument("empty measurement sequence".into()));
    }
    let space = FockSpace::new(cfg.target_dim)?;
    let input = TargetState::Pure(cfg.input.prepare(space)?);
    let meters: Vec<Measurement> =
        cfg.sequence.iter().map(|&op| Measurement::new(op, cfg.ancilla, space)).collect::<Result<_>>()?;
    map_shots(cfg.shots, threads, |shot| {
        let mut rng = substream(cfg.seed, stream, shot as u64);
        let mut state = input.clone();
        let mut records = Vec::with_capacity(meters.len());
        let mut report = None;
        for (i, m) in meters.iter().enumerate() {
            let frame = m.frame(&state);
            let beta = m.sample(&frame.populations(), &mut rng)?;
            let (post, p) = m.post(&frame, beta)?;
            records.push(m.record(beta, p));
            if i + 1 == meters.len() {
                report = Some(post.report(m.basis(), m.turns()));
            } else {
                state = TargetState::from_frame(&post, m.basis(), m.turns(), space)?;
            }
        }
        Ok(ShotResult { shot, records, report: report.expect("non-empty sequence") })
    })
}

/// One row of the per-shot CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotRow {
    pub shot: usize,
    pub re_beta: f64,
    pub im_beta: f64,
    pub phi: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub delta_q: f64,
    pub delta_p: f64,
    pub mean_photons: f64,
}

impl ShotRow {
    /// Uses the last record of the shot.
    pub fn from_shot(r: &ShotResult) -> ShotRow {
        let rec = r.records.last().expect("shots carry at least one record");
        ShotRow {
            shot: r.shot,
            re_beta: rec.beta.re,
            im_beta: rec.beta.im,
            phi: rec.phi,
            k: rec.concentration,
            delta_q: r.report.delta_q,
            delta_p: r.report.delta_p,
            mean_photons: r.report.mean_photons,
        }
    }
}

pub fn write_shots_csv(rows: &[ShotRow], path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
