//! Closed-form predictions: β-moments, the Villain sharpness, squeezing
//! scaling laws and the reflection phase of a dispersively shifted cavity.

use crate::error::{Error, Result};
use crate::hilbert::delta_from_sharpness;
use crate::linalg::C64;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialFunctionBudget {
    pub bessel_rel_tol: f64,
    pub theta_terms: usize,
}

impl Default for SpecialFunctionBudget {
    fn default() -> Self {
        SpecialFunctionBudget { bessel_rel_tol: 1e-12, theta_terms: 6 }
    }
}

// Below this the power series is used; above it the asymptotic series,
// whose smallest term at x is about e^{−2x}, is accurate to ~1e−13.
const BESSEL_SWITCH: f64 = 15.0;

fn bessel_series_scaled(x: f64, order: u32) -> f64 {
    let h = x / 2.0;
    let mut term = if order == 0 { 1.0 } else { h };
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= h * h / (k * (k + order as f64));
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum * (-x).exp()
}

fn bessel_asymptotic_scaled(x: f64, order: u32) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = -term * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// `e^{−|x|} I₀(x)`
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x < BESSEL_SWITCH {
        bessel_series_scaled(x, 0)
    } else {
        bessel_asymptotic_scaled(x, 0)
    }
}

/// `e^{−|x|} I₁(x)`, odd in x.
pub fn bessel_i1e(x: f64) -> f64 {
    let s = x.signum();
    let x = x.abs();
    let v = if x < BESSEL_SWITCH { bessel_series_scaled(x, 1) } else { bessel_asymptotic_scaled(x, 1) };
    s * v
}

pub fn bessel_i0(x: f64) -> f64 {
    bessel_i0e(x) * x.abs().exp()
}

pub fn bessel_i1(x: f64) -> f64 {
    bessel_i1e(x) * x.abs().exp()
}

/// `θ₃(z, q) = Σ_{|n|≤terms} q^{n²} e^{2inz}` for complex `z`.
pub fn theta3(z: C64, q: f64, terms: usize) -> C64 {
    let mut s = C64::new(1.0, 0.0);
    for n in 1..=terms as i64 {
        let w = q.powi((n * n) as i32);
        s += w * ((C64::new(0.0, 2.0 * n as f64) * z).exp() + (C64::new(0.0, -2.0 * n as f64) * z).exp());
    }
    s
}

// 7-point Gauss / 15-point Kronrod pair.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature to an absolute tolerance.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    let mut pending = vec![(a, b, gk15(&f, a, b))];
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut splits = 0;
    while let Some((lo, hi, (v, e))) = pending.pop() {
        let share = abs_tol * (hi - lo) / (b - a);
        if e <= share.max(1e-13 * v.abs()) || splits > 2000 {
            total += v;
            total_err += e;
            continue;
        }
        splits += 1;
        let mid = 0.5 * (lo + hi);
        pending.push((lo, mid, gk15(&f, lo, mid)));
        pending.push((mid, hi, gk15(&f, mid, hi)));
    }
    if total_err > abs_tol * 10.0 {
        return Err(Error::Quadrature { estimate: total, error: total_err });
    }
    Ok(total)
}

/// `⟨|β|⟩` for a coherent ancilla of real amplitude α, any target input.
pub fn mean_abs_beta(alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    let x = a2 / 2.0;
    PI.sqrt() / 2.0 * ((1.0 + a2) * bessel_i0e(x) + a2 * bessel_i1e(x))
}

pub fn mean_beta_sq(alpha: f64) -> f64 {
    1.0 + alpha * alpha
}

/// Mean S_q sharpness after one measurement on vacuum in the Villain
/// approximation; radial integral from `beta_cut` to α + 6.
pub fn villain_mean_sharpness(alpha: f64, beta_cut: f64, budget: SpecialFunctionBudget) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("Villain sharpness needs α > 0".into()));
    }
    let terms = budget.theta_terms.max(5);
    let radial = |b: f64| -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        let k = 2.0 * alpha * b;
        let q = (-PI - 1.0 / (2.0 * k)).exp();
        let angular =
            integrate(|phi| theta3(C64::new(-phi / 2.0, PI), q, terms).norm(), -PI, PI, 1e-10).unwrap_or(f64::NAN);
        b * (-(alpha - b).powi(2)).exp() * (-PI).exp() / (2.0 * k).sqrt() * angular
    };
    let v = integrate(radial, beta_cut.max(0.0), alpha + 6.0, 1e-8)?;
    if !v.is_finite() {
        return Err(Error::Quadrature { estimate: v, error: f64::INFINITY });
    }
    Ok(v / (PI * PI.sqrt()))
}

/// `(1/√(4πα²), 1/√(4πα√(1+α²)))`
pub fn expected_squeezing(alpha: f64) -> (f64, f64) {
    let est = 1.0 / (4.0 * PI * alpha * alpha).sqrt();
    let lb = 1.0 / (4.0 * PI * alpha * (1.0 + alpha * alpha).sqrt()).sqrt();
    (est, lb)
}

/// Phase of the field reflected off a cavity whose frequency is pulled by
/// `g·q_T`.
pub fn reflection_phase(q_t: f64, omega: f64, kappa: f64, omega_a: f64, g: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidArgument("κ must be positive".into()));
    }
    let det = omega_a + g * q_t - omega;
    Ok(2.0 * det.atan2(kappa / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub alpha: f64,
    pub estimate: f64,
    pub lower_bound: f64,
    pub villain_delta: f64,
}

pub fn scaling_row(alpha: f64, budget: SpecialFunctionBudget) -> Result<ScalingRow> {
    let (estimate, lower_bound) = expected_squeezing(alpha);
    let s = villain_mean_sharpness(alpha, 1.0 / alpha, budget)?;
    Ok(ScalingRow { alpha, estimate, lower_bound, villain_delta: delta_from_sharpness(s) })
}

pub fn write_scaling_csv(rows: &[ScalingRow], path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
