//! Truncated Fock-space substrate.

mod phase_space;
mod quadrature;
mod squeezing;
mod states;

pub use phase_space::{phase_space, phase_space_pure, write_field_csv, Field, Grid, PhaseSpaceKind};
pub use quadrature::{quad_basis, ModularOp, QuadBasis};
pub use squeezing::{delta_from_sharpness, effective_squeezing, squeezing_of_state, SqueezingReport, SHARPNESS_FLOOR};
pub use states::{
    coherent_leakage, hermite_functions, make_coherent, make_coherent_with, make_gkp_approx, make_squeezed_vacuum,
    Logical,
};

use crate::error::{Error, Result};
use crate::linalg::{expm, matmul, max_abs_block, CMat, CVec, C64, I};
use std::f64::consts::PI;

/// Default rejection threshold for truncation leakage of constructed states.
pub const DEFAULT_LEAKAGE_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockSpace {
    dim: usize,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!("Fock dimension {dim} < 2")));
        }
        Ok(FockSpace { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

#[derive(Debug, Clone)]
pub struct StateVector {
    amplitudes: CVec,
    space: FockSpace,
    leakage: f64,
}

impl StateVector {
    /// Wraps amplitudes, normalizing them. `leakage` is the weight known to
    /// be lost beyond the truncation.
    pub fn new(space: FockSpace, amplitudes: CVec, leakage: f64) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::InvalidArgument(format!(
                "amplitude length {} does not match dim {}",
                amplitudes.len(),
                space.dim()
            )));
        }
        let n = amplitudes.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument("state has zero or non-finite norm".into()));
        }
        Ok(StateVector { amplitudes: amplitudes / C64::from(n), space, leakage })
    }

    pub fn fock(space: FockSpace, n: usize) -> Result<Self> {
        if n >= space.dim() {
            return Err(Error::InvalidArgument(format!("level {n} outside dim {}", space.dim())));
        }
        let mut v = CVec::zeros(space.dim());
        v[n] = C64::new(1.0, 0.0);
        Ok(StateVector { amplitudes: v, space, leakage: 0.0 })
    }

    pub fn vacuum(space: FockSpace) -> Self {
        Self::fock(space, 0).expect("dim >= 2")
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn mean_photons(&self) -> f64 {
        self.amplitudes.iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr()).sum()
    }

    pub fn expect(&self, op: &OperatorHandle) -> C64 {
        self.amplitudes.dotc(&(op.matrix() * &self.amplitudes))
    }

    pub fn overlap(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Applies `(i)^{k n̂}`, a quarter-turn phase-space rotation per unit of `k`.
    pub fn rotated(&self, quarter_turns: i32) -> StateVector {
        let amps = CVec::from_fn(self.amplitudes.len(), |n, _| self.amplitudes[n] * quarter_phase(n, quarter_turns));
        StateVector { amplitudes: amps, space: self.space, leakage: self.leakage }
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator { matrix: &self.amplitudes * self.amplitudes.adjoint(), space: self.space }
    }
}

/// `i^{k n}`
pub(crate) fn quarter_phase(n: usize, k: i32) -> C64 {
    match ((n as i64 * k as i64).rem_euclid(4)) as u8 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: CMat,
    space: FockSpace,
}

impl DensityOperator {
    /// Validates hermiticity and unit trace within `tol`.
    pub fn new(space: FockSpace, matrix: CMat, tol: f64) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidArgument(format!("density matrix is not {d}x{d}")));
        }
        let herm = max_abs_block(&(&matrix - matrix.adjoint()), d);
        if herm > tol {
            return Err(Error::InvalidArgument(format!("density matrix not Hermitian (defect {herm:.2e})")));
        }
        let tr = matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::InvalidArgument(format!("density matrix trace {tr} != 1")));
        }
        Ok(DensityOperator { matrix, space })
    }

    pub(crate) fn from_matrix_unchecked(space: FockSpace, matrix: CMat) -> Self {
        DensityOperator { matrix, space }
    }

    pub fn maximally_mixed(space: FockSpace) -> Self {
        let d = space.dim();
        DensityOperator { matrix: CMat::identity(d, d) / C64::from(d as f64), space }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn mean_photons(&self) -> f64 {
        (0..self.space.dim()).map(|n| n as f64 * self.matrix[(n, n)].re).sum()
    }

    pub fn expect(&self, op: &OperatorHandle) -> C64 {
        trace_product(op.matrix(), &self.matrix)
    }

    /// Smallest eigenvalue; positivity holds within `floor` when this is ≥ −floor.
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = self.matrix.clone().symmetric_eigen();
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive(&self, floor: f64) -> bool {
        self.min_eigenvalue() >= -floor
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.matrix, &self.matrix).re
    }

    pub fn rotated(&self, quarter_turns: i32) -> DensityOperator {
        let d = self.space.dim();
        let m = CMat::from_fn(d, d, |i, j| {
            self.matrix[(i, j)] * quarter_phase(i, quarter_turns) * quarter_phase(j, -quarter_turns)
        });
        DensityOperator { matrix: m, space: self.space }
    }

    /// Eigen-decomposition into weighted pure components, dropping weights
    /// below `cut` relative to the largest.
    pub fn pure_components(&self, cut: f64) -> Vec<(f64, CVec)> {
        let eig = self.matrix.clone().symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let mut out = Vec::new();
        for (k, &w) in eig.eigenvalues.iter().enumerate() {
            if w > cut * top {
                out.push((w, eig.eigenvectors.column(k).into_owned()));
            }
        }
        out
    }
}

/// `Tr(a b)` in O(dim²).
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut s = C64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorLabel {
    A,
    ADag,
    N,
    Q,
    P,
    D(C64),
    Sq,
    Sp,
    X,
    Z,
    Custom(String),
}

#[derive(Debug, Clone)]
pub struct OperatorHandle {
    matrix: CMat,
    label: OperatorLabel,
    space: FockSpace,
}

impl OperatorHandle {
    pub fn custom(space: FockSpace, matrix: CMat, name: &str) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::InvalidArgument("operator shape does not match space".into()));
        }
        Ok(OperatorHandle { matrix, label: OperatorLabel::Custom(name.to_string()), space })
    }

    pub(crate) fn from_parts(space: FockSpace, matrix: CMat, label: OperatorLabel) -> Self {
        OperatorHandle { matrix, label, space }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn label(&self) -> &OperatorLabel {
        &self.label
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn apply(&self, psi: &StateVector) -> CVec {
        &self.matrix * psi.amplitudes()
    }

    pub fn mul(&self, other: &OperatorHandle) -> OperatorHandle {
        OperatorHandle {
            matrix: matmul(&self.matrix, &other.matrix),
            label: OperatorLabel::Custom("product".into()),
            space: self.space,
        }
    }

    /// ‖U†U − I‖_max on the lowest `levels` Fock states.
    pub fn unitarity_defect(&self, levels: usize) -> f64 {
        let d = self.space.dim();
        let prod = matmul(&self.matrix.adjoint(), &self.matrix) - CMat::identity(d, d);
        max_abs_block(&prod, levels)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        max_abs_block(&(&self.matrix - self.matrix.adjoint()), self.space.dim())
    }
}

pub fn annihilation(dim: usize) -> CMat {
    CMat::from_fn(dim, dim, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) })
}

/// Generator `γa† − γ*a` of the displacement `D(γ)`.
pub fn displacement_generator(dim: usize, gamma: C64) -> CMat {
    let a = annihilation(dim);
    a.adjoint() * gamma - a * gamma.conj()
}

pub fn displacement(space: FockSpace, gamma: C64) -> OperatorHandle {
    OperatorHandle { matrix: expm(&displacement_generator(space.dim(), gamma)), label: OperatorLabel::D(gamma), space }
}

pub fn build_operator(label: OperatorLabel, space: FockSpace) -> OperatorHandle {
    let d = space.dim();
    let a = annihilation(d);
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let matrix = match &label {
        OperatorLabel::A => a,
        OperatorLabel::ADag => a.adjoint(),
        OperatorLabel::N => {
            CMat::from_fn(d, d, |i, j| if i == j { C64::new(i as f64, 0.0) } else { C64::new(0.0, 0.0) })
        }
        OperatorLabel::Q => (&a + a.adjoint()) * C64::from(r2),
        OperatorLabel::P => (a.adjoint() - &a) * (I * r2),
        OperatorLabel::D(g) => return displacement(space, *g),
        OperatorLabel::Sq => return relabel(displacement(space, I * (2.0 * PI).sqrt()), label),
        OperatorLabel::Sp => return relabel(displacement(space, C64::from((2.0 * PI).sqrt())), label),
        OperatorLabel::Z => return relabel(displacement(space, I * (PI / 2.0).sqrt()), label),
        OperatorLabel::X => return relabel(displacement(space, C64::from((PI / 2.0).sqrt())), label),
        OperatorLabel::Custom(_) => CMat::identity(d, d),
    };
    OperatorHandle { matrix, label, space }
}

fn relabel(mut op: OperatorHandle, label: OperatorLabel) -> OperatorHandle {
    op.label = label;
    op
}
