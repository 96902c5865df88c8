//! Eigenbasis of the truncated position operator.
//!
//! On the truncated space `exp(icQ) = V diag(e^{icq_k}) V^T` coincides with the
//! exponential of the truncated generator, and `P = R Q R†` with
//! `R = diag(iⁿ)`, so every function of q̂ or p̂ we need is a diagonal in this
//! basis up to a quarter-turn rotation.

use super::quarter_phase;
use crate::linalg::{rmatvec, rmatvec_t, rsandwich_diag, rsandwich_t, CMat, CVec, RMat, C64};
use nalgebra::SymmetricEigen;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// The four code displacements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModularOp {
    /// `exp(i2√π q̂)`
    Sq,
    /// `exp(−i2√π p̂)`
    Sp,
    /// `exp(i√π q̂)`
    Z,
    /// `exp(−i√π p̂)`
    X,
}

impl ModularOp {
    /// Multiple of `2√π` in the exponent.
    pub fn scale(self) -> f64 {
        match self {
            ModularOp::Sq | ModularOp::Sp => 1.0,
            ModularOp::Z | ModularOp::X => 0.5,
        }
    }

    /// Quarter turns `k` such that `op = R^{-k} (q̂-version) R^{k}` with
    /// `R = iⁿ̂`: zero for the q̂ family, one for the p̂ family.
    pub fn quarter_turns(self) -> i32 {
        match self {
            ModularOp::Sq | ModularOp::Z => 0,
            ModularOp::Sp | ModularOp::X => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModularOp::Sq => "S_q",
            ModularOp::Sp => "S_p",
            ModularOp::Z => "Z",
            ModularOp::X => "X",
        }
    }
}

pub struct QuadBasis {
    q: Vec<f64>,
    v: RMat,
    fock: [OnceLock<CMat>; 4],
    qrep: [OnceLock<CMat>; 4],
    number: OnceLock<CMat>,
}

fn slot(op: ModularOp) -> usize {
    match op {
        ModularOp::Sq => 0,
        ModularOp::Sp => 1,
        ModularOp::Z => 2,
        ModularOp::X => 3,
    }
}

impl QuadBasis {
    fn build(dim: usize) -> Self {
        let h = 0.5f64.sqrt();
        let qm = RMat::from_fn(dim, dim, |i, j| {
            if i + 1 == j {
                h * (j as f64).sqrt()
            } else if j + 1 == i {
                h * (i as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(qm);
        let mut idx: Vec<usize> = (0..dim).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let q: Vec<f64> = idx.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut v = RMat::from_fn(dim, dim, |i, j| eig.eigenvectors[(i, idx[j])]);
        // Sign convention: the largest entry of each column is positive.
        for j in 0..dim {
            let mut val = 0.0f64;
            for i in 0..dim {
                if v[(i, j)].abs() > val.abs() {
                    val = v[(i, j)];
                }
            }
            if val < 0.0 {
                v.column_mut(j).neg_mut();
            }
        }
        QuadBasis { q, v, fock: Default::default(), qrep: Default::default(), number: OnceLock::new() }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Eigenvalues of the truncated q̂, ascending.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Columns are the eigenvectors in the Fock basis.
    pub fn vectors(&self) -> &RMat {
        &self.v
    }

    /// Eigenvectors beyond this |q| are distorted by the truncation.
    pub fn reliable_q(&self) -> f64 {
        (2.0 * self.dim() as f64).sqrt() * 0.8
    }

    pub fn to_q(&self, psi: &CVec) -> CVec {
        rmatvec_t(&self.v, psi)
    }

    pub fn from_q(&self, phi: &CVec) -> CVec {
        rmatvec(&self.v, phi)
    }

    pub fn density_to_q(&self, rho: &CMat) -> CMat {
        rsandwich_t(&self.v, rho)
    }

    pub fn density_from_q(&self, rho_q: &CMat) -> CMat {
        crate::linalg::rsandwich(&self.v, rho_q)
    }

    /// `f(q̂)` in the Fock basis.
    pub fn function_of_q(&self, f: impl Fn(f64) -> C64) -> CMat {
        let d: Vec<C64> = self.q.iter().map(|&x| f(x)).collect();
        rsandwich_diag(&self.v, &d)
    }

    /// Eigenphases `λ·2√π·q_k` of the q̂-type displacement with scale `λ`.
    pub fn phases(&self, scale: f64) -> Vec<f64> {
        let c = scale * 2.0 * PI.sqrt();
        self.q.iter().map(|&x| c * x).collect()
    }

    /// Fock-basis matrix of a code displacement.
    pub fn fock_matrix(&self, op: ModularOp) -> &CMat {
        self.fock[slot(op)].get_or_init(|| {
            let c = op.scale() * 2.0 * PI.sqrt();
            match op.quarter_turns() {
                0 => self.function_of_q(|x| C64::from_polar(1.0, c * x)),
                // R† f(Q) R = f(−P), so exp(−ic p̂) = R† exp(icQ) R.
                _ => {
                    let base = self.function_of_q(|x| C64::from_polar(1.0, c * x));
                    let d = self.dim();
                    CMat::from_fn(d, d, |i, j| base[(i, j)] * quarter_phase(i, -1) * quarter_phase(j, 1))
                }
            }
        })
    }

    /// Matrix of a code displacement in the q̂ eigenbasis.
    pub fn q_matrix(&self, op: ModularOp) -> &CMat {
        self.qrep[slot(op)].get_or_init(|| rsandwich_t(&self.v, self.fock_matrix(op)))
    }
}

impl QuadBasis {
    /// Number operator in the q̂ eigenbasis.
    pub fn number_q(&self) -> &CMat {
        self.number.get_or_init(|| {
            let d = self.dim();
            let scaled = RMat::from_fn(d, d, |n, k| n as f64 * self.v[(n, k)]);
            let m = self.v.tr_mul(&scaled);
            m.map(C64::from)
        })
    }
}

/// Shared, lazily built basis per dimension.
pub fn quad_basis(dim: usize) -> Arc<QuadBasis> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().expect("basis cache poisoned").get(&dim) {
        return b.clone();
    }
    let built = Arc::new(QuadBasis::build(dim));
    cache.lock().expect("basis cache poisoned").entry(dim).or_insert(built).clone()
}
