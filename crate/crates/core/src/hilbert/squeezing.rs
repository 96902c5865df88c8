use super::{quad_basis, trace_product, DensityOperator, ModularOp, StateVector};
use crate::error::{Error, Result};
use crate::linalg::C64;
use serde::Serialize;
use std::f64::consts::PI;

/// Sharpness below which Δ is dominated by truncation and round-off
/// (|Tr S ρ| = 1e−2 corresponds to Δ ≈ 1.21).
pub const SHARPNESS_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezingReport {
    pub delta_q: f64,
    pub delta_p: f64,
    pub mean_photons: f64,
    #[serde(serialize_with = "crate::linalg::ser_c64")]
    pub s_q_expectation: C64,
    #[serde(serialize_with = "crate::linalg::ser_c64")]
    pub s_p_expectation: C64,
    /// Set when either sharpness is below [`SHARPNESS_FLOOR`].
    pub degenerate: bool,
}

/// `sqrt(ln(1/|s|²)/2π)`; infinite for `s = 0`.
pub fn delta_from_sharpness(s: f64) -> f64 {
    if s <= 0.0 {
        return f64::INFINITY;
    }
    (-(s * s).ln() / (2.0 * PI)).max(0.0).sqrt()
}

impl SqueezingReport {
    pub fn from_expectations(s_q: C64, s_p: C64, mean_photons: f64) -> Self {
        SqueezingReport {
            delta_q: delta_from_sharpness(s_q.norm()),
            delta_p: delta_from_sharpness(s_p.norm()),
            mean_photons,
            s_q_expectation: s_q,
            s_p_expectation: s_p,
            degenerate: s_q.norm() < SHARPNESS_FLOOR || s_p.norm() < SHARPNESS_FLOOR,
        }
    }

    /// Turns the degeneracy flag into an error.
    pub fn check(&self) -> Result<&Self> {
        let m = self.s_q_expectation.norm().min(self.s_p_expectation.norm());
        if self.degenerate {
            return Err(Error::DegenerateSharpness(m));
        }
        Ok(self)
    }
}

pub fn effective_squeezing(rho: &DensityOperator) -> SqueezingReport {
    let b = quad_basis(rho.space().dim());
    let s_q = trace_product(b.fock_matrix(ModularOp::Sq), rho.matrix());
    let s_p = trace_product(b.fock_matrix(ModularOp::Sp), rho.matrix());
    SqueezingReport::from_expectations(s_q, s_p, rho.mean_photons())
}

pub fn squeezing_of_state(psi: &StateVector) -> SqueezingReport {
    let b = quad_basis(psi.space().dim());
    let v = psi.amplitudes();
    let s_q = v.dotc(&(b.fock_matrix(ModularOp::Sq) * v));
    let s_p = v.dotc(&(b.fock_matrix(ModularOp::Sp) * v));
    SqueezingReport::from_expectations(s_q, s_p, psi.mean_photons())
}
