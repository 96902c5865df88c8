use super::{annihilation, FockSpace, StateVector, DEFAULT_LEAKAGE_THRESHOLD};
use crate::error::{Error, Result};
use crate::linalg::{expm_real, CVec, RMat, C64};
use std::f64::consts::PI;

/// Poisson tail `e^{−|α|²} Σ_{n≥dim} |α|^{2n}/n!`.
pub fn coherent_leakage(alpha: C64, dim: usize) -> f64 {
    let m = alpha.norm_sqr();
    if m == 0.0 {
        return 0.0;
    }
    // log of the first tail term, then sum ratios until negligible.
    let mut log_t = -m + dim as f64 * m.ln() - ln_factorial(dim);
    let mut sum = 0.0;
    let mut n = dim;
    loop {
        let t = log_t.exp();
        sum += t;
        if t < 1e-18 * sum.max(1e-300) && n as f64 > m {
            break;
        }
        if n > dim + 100_000 {
            break;
        }
        n += 1;
        log_t += m.ln() - (n as f64).ln();
    }
    sum.min(1.0)
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

pub fn make_coherent(alpha: C64, space: FockSpace) -> Result<StateVector> {
    make_coherent_with(alpha, space, DEFAULT_LEAKAGE_THRESHOLD)
}

pub fn make_coherent_with(alpha: C64, space: FockSpace, threshold: f64) -> Result<StateVector> {
    let leakage = coherent_leakage(alpha, space.dim());
    if leakage > threshold {
        return Err(Error::Truncation { leakage, threshold });
    }
    let mut amps = CVec::zeros(space.dim());
    amps[0] = C64::from((-alpha.norm_sqr() / 2.0).exp());
    for n in 1..space.dim() {
        amps[n] = amps[n - 1] * alpha / (n as f64).sqrt();
    }
    StateVector::new(space, amps, leakage)
}

/// Weight of a squeezed vacuum with parameter `r` beyond Fock level `dim`.
fn squeezed_leakage(r: f64, dim: usize) -> f64 {
    let t2 = r.tanh().powi(2);
    let mut c2 = 1.0 / r.cosh();
    let mut tail = 0.0;
    let mut m = 0usize;
    loop {
        if 2 * m >= dim {
            tail += c2;
        }
        if 2 * m >= dim && c2 < 1e-30 {
            break;
        }
        if m > 10 * dim + 100_000 {
            break;
        }
        c2 *= (2 * m + 1) as f64 / (2 * m + 2) as f64 * t2;
        m += 1;
    }
    tail
}

/// Vacuum squeezed so that Var(q) = Δ²/2 and Var(p) = 1/(2Δ²).
pub fn make_squeezed_vacuum(delta: f64, space: FockSpace) -> Result<StateVector> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("squeezing Δ = {delta} must be positive")));
    }
    let z = (1.0 / delta).ln();
    let leakage = squeezed_leakage(z.abs(), space.dim());
    if leakage > DEFAULT_LEAKAGE_THRESHOLD {
        return Err(Error::Truncation { leakage, threshold: DEFAULT_LEAKAGE_THRESHOLD });
    }
    let d = space.dim();
    let a = annihilation(d).map(|c| c.re);
    let a2 = &a * &a;
    let gen: RMat = (&a2 - a2.transpose()) * (z / 2.0);
    let s = expm_real(&gen);
    let amps = CVec::from_fn(d, |n, _| C64::from(s[(n, 0)]));
    StateVector::new(space, amps, leakage)
}

/// Normalized Hermite functions `h_0..h_{n-1}` at `x`.
pub fn hermite_functions(x: f64, n: usize, out: &mut [f64]) {
    assert!(out.len() >= n);
    if n == 0 {
        return;
    }
    out[0] = PI.powf(-0.25) * (-x * x / 2.0).exp();
    if n > 1 {
        out[1] = 2f64.sqrt() * x * out[0];
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Logical {
    Zero,
    One,
    Plus,
    Minus,
}

impl std::str::FromStr for Logical {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0" | "zero" => Ok(Logical::Zero),
            "1" | "one" => Ok(Logical::One),
            "+" | "plus" => Ok(Logical::Plus),
            "-" | "minus" => Ok(Logical::Minus),
            _ => Err(Error::Config(format!("unknown logical state '{s}'"))),
        }
    }
}

/// Approximate GKP codeword: Gaussian peaks of width Δ at multiples of √π
/// under a Gaussian envelope `e^{−Δ²x²/2}`, projected onto the Fock basis.
///
/// Peaks are summed until their envelope weight drops below 1e−8; the
/// projection uses the position-space overlap with Hermite functions.
pub fn make_gkp_approx(delta: f64, logical: Logical, space: FockSpace) -> Result<StateVector> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("GKP Δ = {delta} outside (0, 1]")));
    }
    let sp = PI.sqrt();
    let xmax = (2.0 * (1e8f64).ln()).sqrt() / delta;
    let kmax = (xmax / sp).ceil() as i64;
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for k in -kmax..=kmax {
        let sign = match logical {
            Logical::Zero if k.rem_euclid(2) == 1 => continue,
            Logical::One if k.rem_euclid(2) == 0 => continue,
            Logical::Minus if k.rem_euclid(2) == 1 => -1.0,
            _ => 1.0,
        };
        let x = k as f64 * sp;
        let w = (-delta * delta * x * x / 2.0).exp();
        if w >= 1e-8 {
            peaks.push((x, sign * w));
        }
    }
    let psi =
        |x: f64| -> f64 { peaks.iter().map(|&(xs, w)| w * (-(x - xs).powi(2) / (2.0 * delta * delta)).exp()).sum() };
    let reach = peaks.iter().map(|p| p.0.abs()).fold(0.0, f64::max) + 10.0 * delta + 1.0;
    let h = (delta / 20.0).min(0.01);
    let npts = (2.0 * reach / h).ceil() as usize + 1;
    let d = space.dim();
    let mut coeff = vec![0.0; d];
    let mut hn = vec![0.0; d];
    let mut norm2 = 0.0;
    for i in 0..npts {
        let x = -reach + i as f64 * h;
        let f = psi(x);
        if f == 0.0 {
            continue;
        }
        norm2 += f * f * h;
        hermite_functions(x, d, &mut hn);
        for n in 0..d {
            coeff[n] += f * hn[n] * h;
        }
    }
    let nrm = norm2.sqrt();
    let captured: f64 = coeff.iter().map(|c| (c / nrm).powi(2)).sum();
    let leakage = (1.0 - captured).max(0.0);
    if leakage > DEFAULT_LEAKAGE_THRESHOLD.max(1e-7) {
        return Err(Error::Truncation { leakage, threshold: DEFAULT_LEAKAGE_THRESHOLD.max(1e-7) });
    }
    StateVector::new(space, CVec::from_iterator(d, coeff.into_iter().map(C64::from)), leakage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{build_operator, OperatorLabel};

    fn sp(d: usize) -> FockSpace {
        FockSpace::new(d).unwrap()
    }

    #[test]
    fn coherent_mean_and_leakage() {
        let v = make_coherent(C64::new(0.0, 0.0), sp(10)).unwrap();
        assert_eq!(v.amplitudes()[0], C64::new(1.0, 0.0));
        let a = make_coherent(C64::from(3f64.sqrt()), sp(20)).unwrap();
        assert!((a.mean_photons() - 3.0).abs() < 1e-5);
        assert!(matches!(make_coherent(C64::from(3f64.sqrt()), sp(4)), Err(Error::Truncation { .. })));
    }

    #[test]
    fn coherent_leakage_matches_direct_sum() {
        // Poisson(3) tail beyond 4 levels: 1 − e^{−3}(1 + 3 + 9/2 + 27/6)
        let direct = 1.0 - (-3f64).exp() * (1.0 + 3.0 + 4.5 + 4.5);
        assert!((coherent_leakage(C64::from(3f64.sqrt()), 4) - direct).abs() < 1e-14);
    }

    #[test]
    fn squeezed_closed_form() {
        let s = sp(200);
        let st = make_squeezed_vacuum(2.0, s).unwrap();
        let r = (0.5f64).ln().abs();
        // ⟨2m|S|0⟩ = (−tanh z)^m √((2m)!)/(2^m m!) / √cosh z, z = ln(1/Δ)
        let t = -(0.5f64).ln().tanh();
        let mut c = 1.0 / r.cosh().sqrt();
        for m in 0..40 {
            assert!((st.amplitudes()[2 * m].re - c).abs() < 1e-12, "m={m}");
            assert!(st.amplitudes()[2 * m + 1].norm() < 1e-14);
            c *= t * ((2 * m + 1) as f64 * (2 * m + 2) as f64).sqrt() / (2.0 * (m + 1) as f64);
        }
        let q = build_operator(OperatorLabel::Q, s);
        let q2 = q.mul(&q);
        assert!((st.expect(&q2).re - 2.0).abs() < 1e-10);
    }

    #[test]
    fn hermite_orthonormal() {
        let n = 30;
        let mut buf = vec![0.0; n];
        let mut gram = vec![0.0; n * n];
        let h = 0.01;
        let mut x = -15.0;
        while x <= 15.0 {
            hermite_functions(x, n, &mut buf);
            for i in 0..n {
                for j in 0..n {
                    gram[i * n + j] += buf[i] * buf[j] * h;
                }
            }
            x += h;
        }
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * n + j] - want).abs() < 1e-10);
            }
        }
    }
}
