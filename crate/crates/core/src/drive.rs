//! Parametric flux drive with `sin x_ext(t) = 1 − δ + δ cos ω_T t`.

use crate::error::{Error, Result};
use crate::linalg::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Harmonics {
    Exact,
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub delta: f64,
    /// rad/s
    pub omega_t: f64,
    pub branch: Branch,
    pub harmonics: Harmonics,
}

impl DriveSpec {
    pub fn new(delta: f64, omega_t: f64) -> Self {
        DriveSpec { delta, omega_t, branch: Branch::Plus, harmonics: Harmonics::Exact }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidArgument(format!("delta {} outside (0, 1]", self.delta)));
        }
        if !(self.omega_t > 0.0 && self.omega_t.is_finite()) {
            return Err(Error::InvalidArgument(format!("omega_t = {}", self.omega_t)));
        }
        Ok(())
    }

    /// `4π/ω_T`
    pub fn period(&self) -> f64 {
        4.0 * PI / self.omega_t
    }

    pub fn target(&self, t: f64) -> f64 {
        1.0 - self.delta + self.delta * (self.omega_t * t).cos()
    }

    /// Index k of the interval `[2πk, 2π(k+1))` of ω_T t.
    pub fn interval(&self, t: f64) -> i64 {
        (self.omega_t * t / (2.0 * PI)).floor() as i64
    }

    fn excursion(&self, t: f64) -> f64 {
        FRAC_PI_2 - self.target(t).clamp(-1.0, 1.0).asin()
    }

    /// `π/2 ± (−1)^k (π/2 − arcsin s(t))`
    pub fn exact_at(&self, t: f64, branch: Branch) -> f64 {
        let k = self.interval(t);
        let parity = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        FRAC_PI_2 + branch.sign() * parity * self.excursion(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Waveform {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// max |sin x − s| over the samples
    pub defect: f64,
}

impl Waveform {
    fn from_values(spec: &DriveSpec, times: &[f64], values: Vec<f64>) -> Waveform {
        let defect = times.iter().zip(&values).map(|(&t, &x)| (x.sin() - spec.target(t)).abs()).fold(0.0, f64::max);
        Waveform { times: times.to_vec(), values, defect }
    }

    /// Largest jump between neighbouring samples relative to the bound
    /// ω_T·Δt set by the maximal slope; ≤ 1 for a continuous waveform.
    pub fn continuity_ratio(&self, omega_t: f64) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, x)| (x[1] - x[0]).abs() / (omega_t * (t[1] - t[0])).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// CSV `t,x_ext`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,x_ext")?;
        for (t, x) in self.times.iter().zip(&self.values) {
            writeln!(f, "{t:.12e},{x:.15e}")?;
        }
        f.flush()?;
        Ok(())
    }
}

fn check_sorted(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("times must be sorted".into()));
    }
    Ok(())
}

pub fn exact_waveform(spec: &DriveSpec, times: &[f64]) -> Result<Waveform> {
    spec.check()?;
    check_sorted(times)?;
    let values = times.iter().map(|&t| spec.exact_at(t, spec.branch)).collect();
    Ok(Waveform::from_values(spec, times, values))
}

/// Waveform as configured: exact, or its truncated sine series.
pub fn waveform(spec: &DriveSpec, times: &[f64]) -> Result<Waveform> {
    match spec.harmonics {
        Harmonics::Exact => exact_waveform(spec, times),
        Harmonics::Count(n) => {
            check_sorted(times)?;
            let b = fourier_coeffs(spec, n)?;
            let values = times.iter().map(|&t| reconstruct(spec, &b, t)).collect();
            Ok(Waveform::from_values(spec, times, values))
        }
    }
}

const PROJECTION_POINTS: usize = 1 << 15;

/// `(2/T)∫₀ᵀ (x(t) − π/2) sin(m ω_T t/2) dt` over one drive period, composite
/// Simpson with nodes on every kink of the waveform.
pub fn fourier_projection(spec: &DriveSpec, m: usize) -> Result<f64> {
    spec.check()?;
    let period = spec.period();
    let n = PROJECTION_POINTS;
    let h = period / n as f64;
    let f = |i: usize| {
        let t = i as f64 * h;
        // the kink at interval boundaries belongs to both sides; use the
        // continuous value π/2 there
        let x = if i.is_multiple_of(n / 2) { FRAC_PI_2 } else { spec.exact_at(t, spec.branch) };
        (x - FRAC_PI_2) * (m as f64 * spec.omega_t * t / 2.0).sin()
    };
    let mut s = f(0) + f(n);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 * f(i) } else { 2.0 * f(i) };
    }
    Ok(2.0 / period * s * h / 3.0)
}

/// Coefficients of `sin((2n+1)ω_T t/2)`. Closed form for δ = 1, projection
/// otherwise.
pub fn fourier_coeffs(spec: &DriveSpec, n_terms: usize) -> Result<Vec<f64>> {
    spec.check()?;
    if n_terms == 0 {
        return Err(Error::InvalidArgument("n_terms must be at least 1".into()));
    }
    if spec.delta == 1.0 {
        let s = spec.branch.sign();
        return Ok((0..n_terms)
            .map(|n| {
                let k = (2 * n + 1) as f64;
                let alt = if n % 2 == 0 { 1.0 } else { -1.0 };
                s * 8.0 / PI * alt / (k * k)
            })
            .collect());
    }
    (0..n_terms).map(|n| fourier_projection(spec, 2 * n + 1)).collect()
}

pub fn reconstruct(spec: &DriveSpec, coeffs: &[f64], t: f64) -> f64 {
    FRAC_PI_2
        + coeffs.iter().enumerate().map(|(n, b)| b * ((2 * n + 1) as f64 * spec.omega_t * t / 2.0).sin()).sum::<f64>()
}

/// CSV `n,omega_n,b_n` with ω_n = (2n+1)ω_T/2.
pub fn write_coeffs_csv(spec: &DriveSpec, coeffs: &[f64], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "n,omega_n,b_n")?;
    for (n, b) in coeffs.iter().enumerate() {
        writeln!(f, "{},{:.12e},{:.15e}", n, (2 * n + 1) as f64 * spec.omega_t / 2.0, b)?;
    }
    f.flush()?;
    Ok(())
}

const ERROR_GRID: usize = 20_000;

/// Max-norm error of an `n_harmonics` synthesis played through a
/// zero-order hold at `sample_rate`, relative to the drive amplitude
/// max|x − π/2|, over one drive period. `None` uses the exact waveform and
/// an infinite rate disables the hold.
pub fn synthesis_error(spec: &DriveSpec, n_harmonics: Option<usize>, sample_rate: f64) -> Result<f64> {
    spec.check()?;
    if !(sample_rate > spec.omega_t / PI) {
        return Err(Error::InvalidArgument(format!("sample rate {sample_rate} below ω_T/π")));
    }
    let coeffs = match n_harmonics {
        Some(n) => Some(fourier_coeffs(spec, n)?),
        None => None,
    };
    let synth = |t: f64| match &coeffs {
        Some(b) => reconstruct(spec, b, t),
        None => spec.exact_at(t, spec.branch),
    };
    let period = spec.period();
    let mut worst = 0.0f64;
    let mut amp = 0.0f64;
    for i in 0..=ERROR_GRID {
        let t = period * i as f64 / ERROR_GRID as f64;
        let held = if sample_rate.is_finite() { (t * sample_rate).floor() / sample_rate } else { t };
        let exact = spec.exact_at(t, spec.branch);
        worst = worst.max((synth(held) - exact).abs());
        amp = amp.max((exact - FRAC_PI_2).abs());
    }
    Ok(worst / amp)
}

/// Branch used in each interval k of ω_T t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchSchedule {
    Fixed(Branch),
    /// `+` on even intervals, `−` on odd ones.
    Alternating,
    /// Repeats cyclically.
    List(Vec<Branch>),
}

impl BranchSchedule {
    pub fn branch(&self, k: i64) -> Branch {
        match self {
            BranchSchedule::Fixed(b) => *b,
            BranchSchedule::Alternating => {
                if k.rem_euclid(2) == 0 {
                    Branch::Plus
                } else {
                    Branch::Minus
                }
            }
            BranchSchedule::List(v) => v[k.rem_euclid(v.len() as i64) as usize],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxNoise {
    /// `sin(x_ext(t) + ε)` per sample.
    pub values: Vec<f64>,
    /// Sample mean of the ε-induced term `sin ε cos x_ext(t)`.
    pub spurious_mean: f64,
    /// Sample mean of the same term times `e^{iω_T t}`, the part that
    /// couples resonantly to the target.
    #[serde(serialize_with = "crate::linalg::ser_c64")]
    pub spurious_resonant: C64,
}

/// `sin(x_ext + ε) = cos ε · s(t) + sin ε · cos x_ext(t)` with
/// `cos x_ext = −b(−1)^k √(1 − s²)` on the branch `b` scheduled for
/// interval k.
pub fn flux_noise_prefactor(
    spec: &DriveSpec,
    epsilon: f64,
    times: &[f64],
    schedule: &BranchSchedule,
) -> Result<FluxNoise> {
    spec.check()?;
    if !(epsilon.abs() < 0.3) {
        return Err(Error::InvalidArgument(format!("flux offset {epsilon} outside (−0.3, 0.3)")));
    }
    if let BranchSchedule::List(v) = schedule {
        if v.is_empty() {
            return Err(Error::InvalidArgument("empty branch schedule".into()));
        }
    }
    let mut values = Vec::with_capacity(times.len());
    let mut mean = 0.0;
    let mut res = C64::new(0.0, 0.0);
    for &t in times {
        let k = spec.interval(t);
        let x = spec.exact_at(t, schedule.branch(k));
        let spurious = epsilon.sin() * x.cos();
        values.push(epsilon.cos() * spec.target(t) + spurious);
        mean += spurious;
        res += C64::from_polar(spurious, spec.omega_t * t);
    }
    let n = times.len().max(1) as f64;
    Ok(FluxNoise { values, spurious_mean: mean / n, spurious_resonant: res / n })
}

/// Midpoint samples covering `intervals` whole intervals of ω_T t.
pub fn interval_grid(spec: &DriveSpec, intervals: usize, per_interval: usize) -> Vec<f64> {
    let len = 2.0 * PI / spec.omega_t;
    (0..intervals * per_interval).map(|i| (i as f64 + 0.5) * len / per_interval as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(delta: f64) -> DriveSpec {
        DriveSpec::new(delta, 2.0 * PI * 250e6)
    }

    fn grid(s: &DriveSpec, n: usize) -> Vec<f64> {
        (0..n).map(|i| 2.0 * s.period() * i as f64 / n as f64).collect()
    }

    #[test]
    fn defining_condition() {
        for d in [0.1, 0.5, 1.0] {
            for b in [Branch::Plus, Branch::Minus] {
                let s = DriveSpec { branch: b, ..spec(d) };
                let w = exact_waveform(&s, &grid(&s, 10_001)).unwrap();
                assert!(w.defect < 1e-12, "{d} {b:?}: {}", w.defect);
                assert!((w.values[0] - FRAC_PI_2).abs() < 1e-15);
                assert!(w.continuity_ratio(s.omega_t) <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn triangle_for_full_depth() {
        let s = spec(1.0);
        let t = PI / s.omega_t;
        assert!((s.exact_at(t, Branch::Plus) - 1.5 * PI).abs() < 1e-7);
        assert!((s.exact_at(t, Branch::Minus) + 0.5 * PI).abs() < 1e-7);
        // linear with slope ω_T inside the first quarter period
        let t1 = 0.3 / s.omega_t;
        assert!((s.exact_at(t1, Branch::Plus) - FRAC_PI_2 - 0.3).abs() < 1e-12);
        let p = s.period();
        assert!((s.exact_at(0.37 * p + p, Branch::Plus) - s.exact_at(0.37 * p, Branch::Plus)).abs() < 1e-9);
    }

    #[test]
    fn partial_sums_approach_extremes() {
        let s = spec(1.0);
        let b = fourier_coeffs(&s, 2000).unwrap();
        let x = reconstruct(&s, &b, PI / s.omega_t);
        assert!((x - 1.5 * PI).abs() < 1e-3);
        let m = DriveSpec { branch: Branch::Minus, ..s };
        let bm = fourier_coeffs(&m, 2000).unwrap();
        assert!((reconstruct(&m, &bm, PI / s.omega_t) + 0.5 * PI).abs() < 1e-3);
    }

    #[test]
    fn closed_form_coefficients() {
        let s = spec(1.0);
        let b = fourier_coeffs(&s, 4).unwrap();
        assert_eq!(b[0].abs(), 8.0 / PI);
        assert_eq!(b[1].abs(), 8.0 / (9.0 * PI));
        assert!(b[0] * b[1] < 0.0 && b[1] * b[2] < 0.0);
        for (n, bn) in b.iter().enumerate() {
            let p = fourier_projection(&s, 2 * n + 1).unwrap();
            assert!((p - bn).abs() < 1e-9, "{n}: {p} vs {bn}");
        }
    }

    #[test]
    fn only_odd_half_harmonics() {
        let s = spec(1.0);
        for k in 1..=6 {
            assert!(fourier_projection(&s, 2 * k).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn half_depth_two_harmonics() {
        let s = DriveSpec { harmonics: Harmonics::Count(2), ..spec(0.5) };
        let t = grid(&s, 4001);
        let approx = waveform(&s, &t).unwrap();
        let exact = exact_waveform(&s, &t).unwrap();
        let err = approx.values.iter().zip(&exact.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err / FRAC_PI_2 < 0.01, "{err}");
    }

    #[test]
    fn synthesis_error_properties() {
        let s = spec(1.0);
        assert_eq!(synthesis_error(&s, None, f64::INFINITY).unwrap(), 0.0);
        let mut last = f64::INFINITY;
        for n in 1..=8 {
            let e = synthesis_error(&s, Some(n), f64::INFINITY).unwrap();
            assert!(e <= last + 1e-12);
            // max-norm convergence of a triangle series is 1/n
            assert!(e * (n as f64) < 0.25, "{n}: {e}");
            last = e;
        }
        let zoh = synthesis_error(&s, None, 2.4e9).unwrap();
        assert!((zoh - 2.0 * PI * 250e6 / 2.4e9 / PI).abs() < 0.01, "{zoh}");
    }

    #[test]
    fn flux_noise_echo() {
        let s = spec(1.0);
        let t = interval_grid(&s, 4, 1000);
        let fixed = BranchSchedule::Fixed(Branch::Plus);
        let zero = flux_noise_prefactor(&s, 0.0, &t, &fixed).unwrap();
        for (v, &ti) in zero.values.iter().zip(&t) {
            assert!((v - s.target(ti)).abs() < 1e-15);
        }
        let f = flux_noise_prefactor(&s, 0.1, &t, &fixed).unwrap();
        assert!(f.spurious_mean.abs() < 1e-10 && f.spurious_resonant.norm() < 1e-10);
        for (v, &ti) in f.values.iter().zip(&t) {
            assert!((v - (s.exact_at(ti, Branch::Plus) + 0.1).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn flux_noise_partial_depth() {
        let s = spec(0.5);
        let fixed = BranchSchedule::Fixed(Branch::Plus);
        let one = flux_noise_prefactor(&s, 0.1, &interval_grid(&s, 1, 1000), &fixed).unwrap();
        assert!(one.spurious_resonant.norm() > 1e-3);
        let even = flux_noise_prefactor(&s, 0.1, &interval_grid(&s, 4, 1000), &fixed).unwrap();
        assert!(even.spurious_resonant.norm() < 1e-10);
        let alt = flux_noise_prefactor(&s, 0.1, &interval_grid(&s, 4, 1000), &BranchSchedule::Alternating).unwrap();
        assert!((alt.spurious_resonant - one.spurious_resonant).norm() < 1e-10);
        let full = spec(1.0);
        let single = flux_noise_prefactor(&full, 0.1, &interval_grid(&full, 1, 1000), &fixed).unwrap();
        assert!(single.spurious_resonant.norm() < 1e-10);
    }
}
