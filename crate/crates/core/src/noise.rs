//! Imperfections of the measurement: ancilla photon loss during the
//! coupling, inefficient readout, the third-order term of the coupling
//! potential, and a static flux offset.

use crate::error::{Error, Result};
use crate::hilbert::{quad_basis, FockSpace, ModularOp, OperatorHandle, OperatorLabel, QuadBasis, StateVector};
use crate::linalg::{matmul, rmatvec, rmatvec_t, rsandwich_diag, CMat, CVec, RMat, C64};
use crate::modular_measure::{grid_argmax, AncillaPrep, Frame, Measurement, TargetState, PROBABILITY_FLOOR};
use nalgebra::SymmetricEigen;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// Largest accepted expected number of lost photons γ|α|². The single-loss
/// expansion is already off by O((γ|α|²)²) well below this.
pub const LOSS_REGIME_LIMIT: f64 = 0.5;

pub const MAX_STRENGTH_RATIO: f64 = 0.05;

/// Amplitude decay applied to the ancilla in the branch without a loss event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Damping {
    /// `α e^{−γ}`
    #[default]
    Full,
    /// `α e^{−γ/2}`, the usual amplitude-damping rate.
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    /// κ_c·t_coupl
    pub gamma: f64,
    pub eta_eff: f64,
    #[serde(default)]
    pub damping: Damping,
}

impl LossParams {
    pub fn new(gamma: f64) -> Self {
        LossParams { gamma, eta_eff: 1.0, damping: Damping::Full }
    }

    /// Expected number of lost ancilla photons, γ|α|².
    pub fn loss_probability(&self, prep: &AncillaPrep) -> f64 {
        self.gamma * prep.mean_photons()
    }

    pub fn damped_alpha(&self, alpha: C64) -> C64 {
        match self.damping {
            Damping::Full => alpha * (-self.gamma).exp(),
            Damping::Half => alpha * (-self.gamma / 2.0).exp(),
        }
    }

    pub fn check(&self, prep: &AncillaPrep) -> Result<f64> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma = {}", self.gamma)));
        }
        if !(self.eta_eff > 0.0 && self.eta_eff <= 1.0) {
            return Err(Error::InvalidArgument(format!("eta_eff = {} outside (0, 1]", self.eta_eff)));
        }
        let p = self.loss_probability(prep);
        if p >= LOSS_REGIME_LIMIT {
            return Err(Error::Regime(format!("gamma*|alpha|^2 = {p:.3} beyond the single-loss expansion")));
        }
        Ok(p)
    }
}

/// Lowers the detection efficiency; the measurement then sees `√η α`.
pub fn readout_loss(prep: AncillaPrep, eta_eff: f64) -> Result<AncillaPrep> {
    if !(eta_eff > 0.0 && eta_eff <= 1.0) {
        return Err(Error::InvalidArgument(format!("eta_eff = {eta_eff} outside (0, 1]")));
    }
    Ok(AncillaPrep { readout_efficiency: prep.readout_efficiency * eta_eff, ..prep })
}

/// Whether the caller wants the outcome-conditioned mixture or one branch
/// drawn with its posterior weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    Average,
    Sample,
}

/// Measurement with at most one ancilla photon lost during the coupling.
///
/// The no-loss branch sees a damped ancilla while the counter-displacement
/// keeps its nominal size. A loss at a uniformly random time kicks the target
/// by a random fraction of the full displacement, which averages to a
/// sinc-weighted dephasing of q̂ coherences.
#[derive(Clone)]
pub struct LossyMeasurement {
    ideal: Measurement,
    damped: Measurement,
    p_loss: f64,
}

impl LossyMeasurement {
    pub fn new(op: ModularOp, prep: AncillaPrep, loss: LossParams, space: FockSpace) -> Result<Self> {
        let p_loss = loss.check(&prep)?;
        let prep = readout_loss(prep, loss.eta_eff)?;
        let ideal = Measurement::new(op, prep, space)?;
        let damped_prep = AncillaPrep { alpha: loss.damped_alpha(prep.alpha), ..prep };
        let damped = Measurement::new(op, damped_prep, space)?.with_counter_shift(prep.counter_shift());
        Ok(LossyMeasurement { ideal, damped, p_loss })
    }

    pub fn ideal(&self) -> &Measurement {
        &self.ideal
    }

    pub fn loss_probability(&self) -> f64 {
        self.p_loss
    }

    pub fn frame(&self, state: &TargetState) -> Frame {
        self.ideal.frame(state)
    }

    /// `e^{−iu} sinc(u)` with `u` half the phase difference.
    pub fn loss_kernel(&self) -> impl Fn(usize, usize) -> C64 + '_ {
        let th = self.ideal.phases();
        move |k, l| {
            let u = (th[k] - th[l]) / 2.0;
            let s = if u.abs() < 1e-12 { 1.0 } else { u.sin() / u };
            C64::from_polar(s, -u)
        }
    }

    pub fn density(&self, pops: &[f64], beta: C64) -> f64 {
        if self.p_loss == 0.0 {
            return self.ideal.density(pops, beta);
        }
        (1.0 - self.p_loss) * self.damped.density(pops, beta) + self.p_loss * self.ideal.density(pops, beta)
    }

    pub fn sample<R: Rng + ?Sized>(&self, pops: &[f64], rng: &mut R) -> Result<C64> {
        if self.p_loss > 0.0 && rng.random::<f64>() < self.p_loss {
            self.ideal.sample(pops, rng)
        } else {
            self.damped.sample(pops, rng)
        }
    }

    /// Unnormalized no-loss and single-loss parts of the conditional state.
    pub fn branches(&self, frame: &Frame, beta: C64) -> (Frame, Frame) {
        let (mut keep, _) = self.damped.apply(frame, beta);
        let (mut lost, _) = self.ideal.apply(&frame.dephase(self.loss_kernel()), beta);
        keep.scale(1.0 - self.p_loss);
        lost.scale(self.p_loss);
        (keep, lost)
    }

    pub fn post<R: Rng + ?Sized>(&self, frame: &Frame, beta: C64, mode: LossMode, rng: &mut R) -> Result<(Frame, f64)> {
        if self.p_loss == 0.0 {
            return self.ideal.post(frame, beta);
        }
        let (keep, lost) = self.branches(frame, beta);
        let (pk, pl) = (keep.trace(), lost.trace());
        let p = pk + pl;
        if !(p > PROBABILITY_FLOOR) {
            return Err(Error::ZeroProbability(p));
        }
        let mut out = match mode {
            LossMode::Average => keep.add(&lost),
            LossMode::Sample => {
                if rng.random::<f64>() * p < pl {
                    lost
                } else {
                    keep
                }
            }
        };
        let tr = out.trace();
        out.scale(1.0 / tr);
        Ok((out, p))
    }

    /// Outcome-averaged channel of each branch, `∫d²β M_β ρ M_β†`, in closed
    /// form: coherences between q̂ eigenvalues pick up the ancilla overlap
    /// `⟨αe^{iθ_l}|αe^{iθ_k}⟩` and the counter phase.
    pub fn averaged_branches(&self, frame: &Frame) -> (Frame, Frame) {
        let avg = |m: &Measurement, f: &Frame| {
            let a2 = m.prep.detected_alpha().norm_sqr();
            let lost = (1.0 - m.prep.readout_efficiency) * m.prep.mean_photons();
            let c = m.counter_shift();
            let th = m.phases();
            f.dephase(|k, l| {
                let d = th[k] - th[l];
                (C64::from(-(a2 + lost)) + C64::from_polar(a2 + lost, d)).exp() * C64::from_polar(1.0, -c * d)
            })
        };
        let mut keep = avg(&self.damped, frame);
        let mut lost = avg(&self.ideal, &frame.dephase(self.loss_kernel()));
        keep.scale(1.0 - self.p_loss);
        lost.scale(self.p_loss);
        (keep, lost)
    }
}

/// Conditional target state after a lossy measurement of `op` with outcome β.
pub fn lossy_measurement<R: Rng + ?Sized>(
    op: ModularOp,
    state: &TargetState,
    prep: AncillaPrep,
    beta: C64,
    loss: LossParams,
    mode: LossMode,
    rng: &mut R,
) -> Result<(TargetState, f64)> {
    let m = LossyMeasurement::new(op, prep, loss, state.space())?;
    let (post, p) = m.post(&m.frame(state), beta, mode, rng)?;
    Ok((TargetState::from_frame(&post, m.ideal().basis(), m.ideal().turns(), state.space())?, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicParams {
    /// ξ_T²/ξ_A²
    pub strength_ratio: f64,
    pub corrected_drive: bool,
}

impl CubicParams {
    pub fn epsilon3(&self) -> f64 {
        PI.sqrt() * self.strength_ratio / (3.0 * SQRT_2)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.strength_ratio >= 0.0 && self.strength_ratio <= MAX_STRENGTH_RATIO) {
            return Err(Error::Regime(format!(
                "cubic strength ratio {} outside [0, {MAX_STRENGTH_RATIO}]",
                self.strength_ratio
            )));
        }
        Ok(())
    }
}

fn real_annihilation(d: usize) -> RMat {
    RMat::from_fn(d, d, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
}

fn real_position(d: usize) -> RMat {
    let b = real_annihilation(d);
    (&b + b.transpose()) / SQRT_2
}

/// `b³ + b†³` on the truncated space.
fn cubic_ladder(d: usize) -> RMat {
    let b = real_annihilation(d);
    let b3 = &b * &b * &b;
    &b3 + b3.transpose()
}

enum Propagator {
    /// Phases in the q̂ eigenbasis.
    Diagonal(Vec<f64>),
    /// `exp(iH) = V diag(e^{iλ}) Vᵀ` for real symmetric `H`.
    Eigen { vectors: RMat, values: Vec<f64> },
}

/// Target unitaries conditioned on the ancilla photon number.
pub struct CubicUnitaries {
    space: FockSpace,
    basis: Arc<QuadBasis>,
    props: Vec<Propagator>,
    pub prep: AncillaPrep,
    pub cubic: CubicParams,
}

impl CubicUnitaries {
    pub fn cutoff(&self) -> usize {
        self.props.len()
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    /// `U_n ψ` for Fock-basis amplitudes.
    pub fn apply(&self, n: usize, psi: &CVec) -> CVec {
        match &self.props[n] {
            Propagator::Diagonal(ph) => {
                let c = self.basis.to_q(psi);
                self.basis.from_q(&CVec::from_fn(c.len(), |k, _| c[k] * C64::from_polar(1.0, ph[k])))
            }
            Propagator::Eigen { vectors, values } => {
                let c = rmatvec_t(vectors, psi);
                rmatvec(vectors, &CVec::from_fn(c.len(), |k, _| c[k] * C64::from_polar(1.0, values[k])))
            }
        }
    }

    pub fn matrix(&self, n: usize) -> CMat {
        match &self.props[n] {
            Propagator::Diagonal(ph) => {
                let d: Vec<C64> = ph.iter().map(|&t| C64::from_polar(1.0, t)).collect();
                rsandwich_diag(self.basis.vectors(), &d)
            }
            Propagator::Eigen { vectors, values } => {
                let d: Vec<C64> = values.iter().map(|&t| C64::from_polar(1.0, t)).collect();
                rsandwich_diag(vectors, &d)
            }
        }
    }

    pub fn operators(&self) -> Vec<OperatorHandle> {
        (0..self.cutoff())
            .map(|n| OperatorHandle::from_parts(self.space, self.matrix(n), OperatorLabel::Custom(format!("U3[{n}]"))))
            .collect()
    }
}

/// Per-ancilla-level target unitaries of the coupling with its cubic
/// correction. The counter-displacement runs during the coupling, so it
/// enters the generator.
pub fn cubic_unitary(
    prep: AncillaPrep,
    cubic: CubicParams,
    target_space: FockSpace,
    ancilla_cutoff: usize,
) -> Result<CubicUnitaries> {
    cubic.check()?;
    prep.validate()?;
    let d = target_space.dim();
    let basis = quad_basis(d);
    let eps = cubic.epsilon3();
    let c = prep.counter_shift();
    let k = 2.0 * PI.sqrt();
    let props = if cubic.corrected_drive || eps == 0.0 {
        (0..ancilla_cutoff)
            .map(|n| {
                let m = n as f64 - c;
                Propagator::Diagonal(basis.q().iter().map(|&x| k * m * x + 2.0 * SQRT_2 * eps * x.powi(3)).collect())
            })
            .collect()
    } else {
        let q = real_position(d);
        let cubic_part = (&q * &q * &q) * (2.0 * SQRT_2) - cubic_ladder(d);
        let cubic_part = cubic_part * eps;
        (0..ancilla_cutoff)
            .map(|n| {
                let h = &cubic_part + &q * (k * (n as f64 - c));
                let eig = SymmetricEigen::new(h);
                Propagator::Eigen { vectors: eig.eigenvectors, values: eig.eigenvalues.iter().cloned().collect() }
            })
            .collect()
    };
    Ok(CubicUnitaries { space: target_space, basis, props, prep, cubic })
}

/// Factorized form of the uncorrected unitary for ancilla level `n` as it is
/// usually quoted: `e^{i2√πnq̂}·e^{i2√2εq̂³}·e^{−iε(b³+b†³)}·e^{s n(b†²−b²)}`
/// with `s = 3√π ε/√2`. No counter-displacement.
///
/// Only the n = 0 factor is correct to O(ε²). For n ≥ 1 the squeeze has the
/// wrong sign for this operator order and an O(εn²) displacement is missing;
/// see [`cubic_first_order`].
pub fn cubic_factorized_approx(cubic: CubicParams, n: usize, space: FockSpace) -> Result<OperatorHandle> {
    factorized(cubic, n, space, 1.0, false, "U3_approx")
}

/// First-order (in ε) factorization with the same factor order as
/// [`cubic_factorized_approx`]: squeeze `e^{−s n(b†²−b²)}` and the extra
/// phase `e^{i ε(2√π n)²/√2 q̂}`.
pub fn cubic_first_order(cubic: CubicParams, n: usize, space: FockSpace) -> Result<OperatorHandle> {
    factorized(cubic, n, space, -1.0, true, "U3_first_order")
}

fn factorized(
    cubic: CubicParams,
    n: usize,
    space: FockSpace,
    sign: f64,
    kick: bool,
    name: &str,
) -> Result<OperatorHandle> {
    cubic.check()?;
    let d = space.dim();
    let basis = quad_basis(d);
    let eps = cubic.epsilon3();
    let k = 2.0 * PI.sqrt() * n as f64;
    let extra = if kick { eps * k * k / SQRT_2 } else { 0.0 };
    let diag = basis.function_of_q(|x| C64::from_polar(1.0, (k + extra) * x + 2.0 * SQRT_2 * eps * x.powi(3)));
    let eig = SymmetricEigen::new(cubic_ladder(d));
    let ph: Vec<C64> = eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -eps * l)).collect();
    let ladder = rsandwich_diag(&eig.eigenvectors, &ph);
    let b = real_annihilation(d);
    let b2 = &b * &b;
    let gen = (b2.transpose() - &b2) * (sign * 3.0 * PI.sqrt() * eps / SQRT_2 * n as f64);
    let squeeze = crate::linalg::expm_real(&gen).map(C64::from);
    let m = matmul(&matmul(&diag, &ladder), &squeeze);
    Ok(OperatorHandle::from_parts(space, m, OperatorLabel::Custom(format!("{name}[{n}]"))))
}

/// Heterodyne measurement of a pure target state through the cubic
/// coupling. The conditional state is `Σ_n c_n(β) U_n ψ`, so the outcome
/// density is a quadratic form in the ancilla amplitudes.
pub struct CubicMeasurement {
    alpha: C64,
    branches: Vec<CVec>,
    gram: CMat,
    space: FockSpace,
}

impl CubicMeasurement {
    pub fn new(unitaries: &CubicUnitaries, psi: &StateVector) -> Result<Self> {
        if unitaries.prep.readout_efficiency != 1.0 {
            return Err(Error::InvalidArgument("cubic model assumes unit readout efficiency".into()));
        }
        let branches: Vec<CVec> = (0..unitaries.cutoff()).map(|n| unitaries.apply(n, psi.amplitudes())).collect();
        let m = branches.len();
        let gram = CMat::from_fn(m, m, |i, j| branches[i].dotc(&branches[j]));
        Ok(CubicMeasurement { alpha: unitaries.prep.alpha, branches, gram, space: psi.space() })
    }

    /// `⟨β|n⟩⟨n|α⟩/√π`
    pub fn coefficients(&self, beta: C64) -> CVec {
        let z = beta.conj() * self.alpha;
        let mut t = C64::from((-(self.alpha.norm_sqr() + beta.norm_sqr()) / 2.0).exp() / PI.sqrt());
        CVec::from_fn(self.branches.len(), |n, _| {
            if n > 0 {
                t = t * z / n as f64;
            }
            t
        })
    }

    pub fn density(&self, beta: C64) -> f64 {
        let c = self.coefficients(beta);
        c.dotc(&(&self.gram * &c)).re
    }

    pub fn max_likelihood(&self) -> (C64, f64) {
        grid_argmax(self.alpha.norm() + 4.0, |b| self.density(b))
    }

    pub fn post(&self, beta: C64) -> Result<(StateVector, f64)> {
        let c = self.coefficients(beta);
        let mut v = CVec::zeros(self.space.dim());
        for (cn, b) in c.iter().zip(&self.branches) {
            v += b * *cn;
        }
        let p = v.norm_squared();
        if !(p > PROBABILITY_FLOOR) {
            return Err(Error::ZeroProbability(p));
        }
        v /= C64::from(p.sqrt());
        Ok((StateVector::new(self.space, v, 0.0)?, p))
    }
}

/// Instantaneous coupled quadrature `cos ε q̂ + sign·sin ε p̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledQuadrature {
    pub cos: f64,
    pub sin: f64,
    pub sign: f64,
}

impl CoupledQuadrature {
    /// Rotation of the coupled quadrature away from q̂.
    pub fn angle(&self) -> f64 {
        (self.sign * self.sin).atan2(self.cos)
    }
}

/// Coupled quadrature during half-period `k` of the drive with a static flux
/// offset ε. The p̂ admixture reverses every half-period.
pub fn flux_offset_coupling(epsilon: f64, half_period_index: i64) -> Result<CoupledQuadrature> {
    if !(epsilon.abs() < 0.3) {
        return Err(Error::InvalidArgument(format!("flux offset {epsilon} outside (−0.3, 0.3)")));
    }
    let sign = if half_period_index.rem_euclid(2) == 0 { -1.0 } else { 1.0 };
    Ok(CoupledQuadrature { cos: epsilon.cos(), sin: epsilon.sin(), sign })
}

/// Direction of the coupling accumulated over the first `half_periods`
/// half-periods, as an angle from q̂.
pub fn net_rotation(epsilon: f64, half_periods: usize) -> Result<f64> {
    let mut q = 0.0;
    let mut p = 0.0;
    for k in 0..half_periods {
        let c = flux_offset_coupling(epsilon, k as i64)?;
        q += c.cos;
        p += c.sign * c.sin;
    }
    Ok(p.atan2(q))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub delta_q: f64,
    pub delta_p: f64,
}

/// CSV `param,value,delta_q,delta_p`.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "param,value,delta_q,delta_p")?;
    for r in rows {
        writeln!(f, "{},{:.12e},{:.12e},{:.12e}", r.param, r.value, r.delta_q, r.delta_p)?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{delta_from_sharpness, make_squeezed_vacuum};
    use crate::linalg::max_abs_block;
    use crate::rng::substream;

    fn sp(d: usize) -> FockSpace {
        FockSpace::new(d).unwrap()
    }

    #[test]
    fn zero_gamma_is_ideal() {
        let s = sp(80);
        let prep = AncillaPrep::with_mean_photons(3.0);
        let lm = LossyMeasurement::new(ModularOp::Sq, prep, LossParams::new(0.0), s).unwrap();
        let st = TargetState::Pure(StateVector::vacuum(s));
        let f = lm.frame(&st);
        let beta = C64::new(1.4, 0.3);
        let mut rng = substream(1, "t", 0);
        let (a, pa) = lm.post(&f, beta, LossMode::Average, &mut rng).unwrap();
        let (b, pb) = lm.ideal().post(&f, beta).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn regime_guard() {
        let prep = AncillaPrep::with_mean_photons(4.0);
        let e = LossyMeasurement::new(ModularOp::Sq, prep, LossParams::new(0.2), sp(20));
        assert!(matches!(e, Err(Error::Regime(_))));
    }

    #[test]
    fn readout_loss_scales_amplitude() {
        let prep = AncillaPrep::with_mean_photons(3.0);
        let r = readout_loss(prep, 0.43).unwrap();
        assert!((r.detected_alpha().re / prep.alpha.re - 0.6557).abs() < 1e-4);
        assert_eq!(readout_loss(prep, 1.0).unwrap(), prep);
    }

    #[test]
    fn single_loss_randomizes_sp() {
        let s = sp(500);
        let prep = AncillaPrep::with_mean_photons(3.0);
        let lm = LossyMeasurement::new(ModularOp::Sq, prep, LossParams::new(0.05), s).unwrap();
        let f = lm.frame(&TargetState::Pure(StateVector::vacuum(s)));
        let (keep, lost) = lm.averaged_branches(&f);
        let sp_op = lm.ideal().basis().q_matrix(ModularOp::Sp);
        let t_keep = keep.expect(sp_op).norm();
        let t_lost = lost.expect(sp_op).norm();
        // the discrete q̂ spectrum of the truncated space limits both checks
        assert!((t_keep / (1.0 - 0.15) / (-PI).exp() - 1.0).abs() < 2e-3, "{t_keep}");
        assert!(t_lost < 1e-3 * t_keep, "{t_lost}");
        assert!((keep.trace() + lost.trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lossy_density_is_mixture_trace() {
        let s = sp(300);
        let prep = AncillaPrep::with_mean_photons(2.0);
        let lm = LossyMeasurement::new(ModularOp::Sp, prep, LossParams::new(0.04), s).unwrap();
        let st = TargetState::Pure(make_squeezed_vacuum(2.0, s).unwrap());
        let f = lm.frame(&st);
        let beta = C64::new(-0.4, 1.1);
        let (k, l) = lm.branches(&f, beta);
        let d = lm.density(&f.populations(), beta);
        assert!((k.trace() + l.trace() - d).abs() < 1e-12);
    }

    #[test]
    fn commutator_identity() {
        let d = 40;
        let q = real_position(d);
        let c = cubic_ladder(d);
        let b = real_annihilation(d);
        let b2 = &b * &b;
        let lhs = &q * &c - &c * &q;
        let rhs = (b2.transpose() - &b2) * (3.0 / SQRT_2);
        let diff = (lhs - rhs).map(C64::from);
        assert!(max_abs_block(&diff, d - 3) < 1e-10);
    }

    #[test]
    fn zero_strength_recovers_displacements() {
        let s = sp(60);
        let prep = AncillaPrep::with_mean_photons(2.0);
        let u = cubic_unitary(prep, CubicParams { strength_ratio: 0.0, corrected_drive: false }, s, 20).unwrap();
        let m = Measurement::new(ModularOp::Sq, prep, s).unwrap();
        let th = m.phases().to_vec();
        let c = prep.counter_shift();
        for n in [0usize, 3, 7] {
            let want: Vec<C64> = th.iter().map(|&t| C64::from_polar(1.0, (n as f64 - c) * t)).collect();
            let want = rsandwich_diag(m.basis().vectors(), &want);
            assert!(crate::linalg::max_abs(&(u.matrix(n) - want)) < 1e-12);
        }
    }

    #[test]
    fn corrected_commutes_with_sq() {
        let s = sp(100);
        let prep = AncillaPrep::with_mean_photons(3.0);
        let u = cubic_unitary(prep, CubicParams { strength_ratio: 1e-3, corrected_drive: true }, s, 20).unwrap();
        let sq = quad_basis(100).fock_matrix(ModularOp::Sq).clone();
        for n in [1usize, 5] {
            let un = u.matrix(n);
            let c = matmul(&un, &sq) - matmul(&sq, &un);
            assert!(max_abs_block(&c, 100) < 1e-10);
        }
    }

    #[test]
    fn eigen_propagator_is_unitary() {
        let s = sp(120);
        let prep = AncillaPrep::with_mean_photons(3.0);
        let u = cubic_unitary(prep, CubicParams { strength_ratio: 1e-3, corrected_drive: false }, s, 4).unwrap();
        let m = u.matrix(3);
        let g = matmul(&m.adjoint(), &m) - CMat::identity(120, 120);
        assert!(crate::linalg::max_abs(&g) < 1e-10);
    }

    #[test]
    fn cubic_measurement_matches_ideal_at_zero_strength() {
        let s = sp(300);
        let prep = AncillaPrep::with_mean_photons(3.0);
        let psi = StateVector::vacuum(s);
        let u = cubic_unitary(prep, CubicParams { strength_ratio: 0.0, corrected_drive: false }, s, 20).unwrap();
        let cm = CubicMeasurement::new(&u, &psi).unwrap();
        let m = Measurement::new(ModularOp::Sq, prep, s).unwrap();
        let st = TargetState::Pure(psi);
        let f = m.frame(&st);
        let beta = C64::new(1.5, -0.2);
        assert!((cm.density(beta) - m.density(&f.populations(), beta)).abs() < 1e-12);
        let (post, _) = cm.post(beta).unwrap();
        let (pf, _) = m.post(&f, beta).unwrap();
        let want = pf.report(m.basis(), 0);
        let got = crate::hilbert::squeezing_of_state(&post);
        assert!((got.delta_q - want.delta_q).abs() < 1e-9);
    }

    /// Largest singular value of `(a − b)` restricted to the lowest levels.
    fn low_norm(a: &CMat, b: &CMat, levels: usize) -> f64 {
        let blk: CMat = (a - b).columns(0, levels).into_owned();
        let g = matmul(&blk.adjoint(), &blk);
        g.symmetric_eigenvalues().iter().cloned().fold(0.0f64, f64::max).sqrt()
    }

    #[test]
    fn factorization_error_orders() {
        let s = sp(200);
        let mut prep = AncillaPrep::with_mean_photons(3.0);
        prep.counter_displacement_on = false;
        let err = |r: f64, n: usize, consistent: bool| {
            let c = CubicParams { strength_ratio: r, corrected_drive: false };
            let u = cubic_unitary(prep, c, s, n + 1).unwrap();
            let a = if consistent { cubic_first_order(c, n, s) } else { cubic_factorized_approx(c, n, s) };
            low_norm(&u.matrix(n), a.unwrap().matrix(), 10)
        };
        // quoted form: quadratic at n = 0, linear in ε otherwise
        let r0 = err(1e-3, 0, false) / err(1e-4, 0, false);
        assert!((r0 - 100.0).abs() < 5.0, "{r0}");
        for n in 1..=3 {
            let r = err(1e-3, n, false) / err(1e-4, n, false);
            assert!((r - 10.0).abs() < 1.0, "n={n}: {r}");
            let r = err(1e-3, n, true) / err(1e-4, n, true);
            assert!((r - 100.0).abs() < 5.0, "n={n}: {r}");
        }
    }

    #[test]
    fn flux_offset_echo() {
        let c = flux_offset_coupling(0.0, 3).unwrap();
        assert_eq!((c.cos, c.sin), (1.0, 0.0));
        assert!(net_rotation(0.1, 8).unwrap().abs() < 1e-15);
        assert!((net_rotation(0.1, 1).unwrap().abs() - 0.1).abs() < 1e-15);
        assert!(flux_offset_coupling(0.4, 0).is_err());
    }

    #[test]
    fn loss_delta_formula_single_point() {
        // exact outcome-averaged sharpness of the no-loss branch
        let s = sp(500);
        let prep = AncillaPrep::with_mean_photons(3.0);
        let gamma = 0.2 / 3.0;
        let lm = LossyMeasurement::new(ModularOp::Sq, prep, LossParams::new(gamma), s).unwrap();
        let f = lm.frame(&TargetState::Pure(StateVector::vacuum(s)));
        let (keep, _) = lm.averaged_branches(&f);
        let sharp = keep.expect(lm.ideal().basis().q_matrix(ModularOp::Sp)).norm();
        let want = (0.2 / PI + 1.0f64).sqrt();
        assert!((delta_from_sharpness(sharp) / want - 1.0).abs() < 0.05);
    }
}
