//! Coupling parameters of two flux-coupled oscillators sharing a Josephson
//! junction.
//!
//! All energies are frequencies in Hz (E/h, i.e. ω/2π). Fluxes are reduced,
//! x = 2πΦ/Φ₀.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::path::Path;

pub const FLUX_QUANTUM: f64 = 2.067_833_848e-15;
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Largest E_C/E_L treated as a weakly anharmonic oscillator.
pub const MAX_CHARGING_RATIO: f64 = 0.1;
/// Above this C_J/C_A the Ẽ_C ≈ E_C approximation is flagged.
pub const MAX_JUNCTION_CAPACITANCE_RATIO: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub e_j: f64,
    pub e_c_a: f64,
    pub e_c_t: f64,
    pub e_l_a: f64,
    pub e_l_t: f64,
    /// C_J/C_A
    #[serde(default)]
    pub c_j_ratio: f64,
    #[serde(default = "one")]
    pub delta_drive: f64,
}

fn one() -> f64 {
    1.0
}

/// Inductive energy (Hz) of an inductance in henry.
pub fn inductive_energy(inductance: f64) -> f64 {
    let phi = FLUX_QUANTUM / (2.0 * PI);
    phi * phi / inductance / PLANCK
}

/// Circuit chosen by Josephson energy, inductances and mean frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Design {
    /// Hz
    pub e_j: f64,
    /// H
    pub l_a: f64,
    pub l_t: f64,
    /// mean resonance frequencies, Hz
    pub f_a: f64,
    pub f_t: f64,
    #[serde(default)]
    pub c_j_ratio: f64,
    #[serde(default = "one")]
    pub delta_drive: f64,
}

impl Design {
    /// The midpoint of the targeted parameter table.
    pub fn table_midpoint() -> Design {
        Design { e_j: 10e9, l_a: 2e-9, l_t: 0.3e-9, f_a: 10e9, f_t: 0.5e9, c_j_ratio: 0.01, delta_drive: 1.0 }
    }

    /// Charging energies follow from `f = √(8 E_C E_L)` at x_ext = π/2,
    /// where Ẽ_L = E_L.
    pub fn spec(&self) -> CircuitSpec {
        let e_l_a = inductive_energy(self.l_a);
        let e_l_t = inductive_energy(self.l_t);
        CircuitSpec {
            e_j: self.e_j,
            e_c_a: self.f_a * self.f_a / (8.0 * e_l_a),
            e_c_t: self.f_t * self.f_t / (8.0 * e_l_t),
            e_l_a,
            e_l_t,
            c_j_ratio: self.c_j_ratio,
            delta_drive: self.delta_drive,
        }
    }
}

impl CircuitSpec {
    /// Regime violations, empty when the expansion applies.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, x) in [
            ("e_j", self.e_j),
            ("e_c_a", self.e_c_a),
            ("e_c_t", self.e_c_t),
            ("e_l_a", self.e_l_a),
            ("e_l_t", self.e_l_t),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} must be positive"));
            }
        }
        if !(self.delta_drive > 0.0 && self.delta_drive <= 1.0) {
            v.push(format!("delta_drive {} outside (0, 1]", self.delta_drive));
        }
        if self.e_j >= self.e_l_a {
            v.push("E_J >= E_L_A".into());
        }
        if self.e_j >= self.e_l_t {
            v.push("E_J >= E_L_T".into());
        }
        if self.e_c_a / self.e_l_a >= MAX_CHARGING_RATIO {
            v.push("E_C_A/E_L_A >= 0.1".into());
        }
        if self.e_c_t / self.e_l_t >= MAX_CHARGING_RATIO {
            v.push("E_C_T/E_L_T >= 0.1".into());
        }
        v
    }

    pub fn check(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidRegime(v.join("; ")))
        }
    }

    /// `√(8 E_C (E_L − E_J cos x))` for the ancilla (`true`) or the target.
    pub fn frequency(&self, ancilla: bool, x_ext: f64) -> f64 {
        let (ec, el) = if ancilla { (self.e_c_a, self.e_l_a) } else { (self.e_c_t, self.e_l_t) };
        (8.0 * ec * (el - self.e_j * x_ext.cos())).sqrt()
    }

    fn xi(&self, ancilla: bool, x_ext: f64) -> f64 {
        let (ec, el) = if ancilla { (self.e_c_a, self.e_l_a) } else { (self.e_c_t, self.e_l_t) };
        (2.0 * ec / (el - self.e_j * x_ext.cos())).powf(0.25)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    pub x_ext: f64,
    pub xi_a: f64,
    pub xi_t: f64,
    /// ω/2π in Hz at `x_ext`.
    pub omega_a: f64,
    pub omega_t: f64,
    /// Coupling g/2π in Hz. Uses the mean-point ξ, so it does not depend on
    /// `x_ext`.
    pub g: f64,
    pub self_kerr_a: f64,
    pub self_kerr_t: f64,
    pub cross_kerr: f64,
    /// ξ_T²/ξ_A²
    pub cubic_ratio: f64,
    /// Seconds for one full conditional displacement, √(2π)/g.
    pub t_coupl: f64,
}

fn derive_unchecked(spec: &CircuitSpec, x_ext: f64) -> DerivedParams {
    let xa0 = spec.xi(true, FRAC_PI_2);
    let xt0 = spec.xi(false, FRAC_PI_2);
    let xa = spec.xi(true, x_ext);
    let xt = spec.xi(false, x_ext);
    let g = spec.delta_drive / 2.0 * spec.e_j * xt0 * xa0 * xa0;
    let ec = spec.e_j * x_ext.cos();
    DerivedParams {
        x_ext,
        xi_a: xa,
        xi_t: xt,
        omega_a: spec.frequency(true, x_ext),
        omega_t: spec.frequency(false, x_ext),
        g,
        self_kerr_a: ec * xa.powi(4) / 4.0,
        self_kerr_t: ec * xt.powi(4) / 4.0,
        cross_kerr: ec * xa * xa * xt * xt,
        cubic_ratio: xt0 * xt0 / (xa0 * xa0),
        t_coupl: (2.0 * PI).sqrt() / (2.0 * PI * g),
    }
}

pub fn derive_params(spec: &CircuitSpec, x_ext: f64) -> Result<DerivedParams> {
    spec.check()?;
    Ok(derive_unchecked(spec, x_ext))
}

/// Inputs of the table check that are not part of the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableTolerances {
    /// Closed ancilla decay rate κ_c in 1/s.
    pub kappa_c: f64,
    pub mean_photons: f64,
    /// Upper limit standing in for κ_c t_coupl |α|² ≪ 1.
    pub loss_budget: f64,
}

impl Default for TableTolerances {
    fn default() -> Self {
        TableTolerances { kappa_c: 1.0 / 100e-6, mean_photons: 3.0, loss_budget: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub quantity: String,
    pub value: f64,
    pub unit: String,
    pub band_lo: f64,
    pub band_hi: f64,
    pub pass: bool,
    /// Informational rows do not enter [`TableReport::all_pass`].
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReport {
    pub derived: DerivedParams,
    pub rows: Vec<TableRow>,
    pub violations: Vec<String>,
}

impl TableReport {
    pub fn all_pass(&self) -> bool {
        self.violations.is_empty() && self.rows.iter().filter(|r| r.required).all(|r| r.pass)
    }

    pub fn row(&self, quantity: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    /// CSV `quantity,value,unit,band_lo,band_hi,pass`; informational rows carry
    /// an `info:` prefix.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "quantity,value,unit,band_lo,band_hi,pass")?;
        for r in &self.rows {
            let name = if r.required { r.quantity.clone() } else { format!("info:{}", r.quantity) };
            writeln!(f, "{},{:.12e},{},{:.6e},{:.6e},{}", name, r.value, r.unit, r.band_lo, r.band_hi, r.pass)?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<28} {:>14} {:<6} {:>22}  {}\n", "quantity", "value", "unit", "band", "pass");
        for r in &self.rows {
            let mark = match (r.pass, r.required) {
                (true, _) => "ok",
                (false, true) => "FAIL",
                (false, false) => "outside (info)",
            };
            s += &format!(
                "{:<28} {:>14.6e} {:<6} [{:>9.3e}, {:>9.3e}]  {}\n",
                r.quantity, r.value, r.unit, r.band_lo, r.band_hi, mark
            );
        }
        for v in &self.violations {
            s += &format!("regime: {v}\n");
        }
        s
    }
}

/// Compares derived ratios against the targeted bands. Kerr terms are taken
/// at their peak |cos x_ext| = 1 with mean-point ξ, the coupling at the mean
/// point.
pub fn validate_table(spec: &CircuitSpec, tol: &TableTolerances) -> TableReport {
    let d = derive_unchecked(spec, FRAC_PI_2);
    let xa4 = d.xi_a.powi(4);
    let xt4 = d.xi_t.powi(4);
    let cross = spec.e_j * d.xi_a * d.xi_a * d.xi_t * d.xi_t;
    let self_a = spec.e_j * xa4 / 4.0;
    let self_t = spec.e_j * xt4 / 4.0;
    let range_a = spec.frequency(true, PI) - spec.frequency(true, 0.0);
    let range_t = spec.frequency(false, PI) - spec.frequency(false, 0.0);
    let row = |q: &str, value: f64, unit: &str, lo: f64, hi: f64, required: bool| TableRow {
        quantity: q.into(),
        value,
        unit: unit.into(),
        band_lo: lo,
        band_hi: hi,
        pass: value >= lo && value <= hi,
        required,
    };
    let rows = vec![
        row("g", d.g / 1e6, "MHz", 3.0, 15.0, true),
        row("cross_kerr_over_g", cross / d.g, "1", 0.02, 0.05, true),
        row("self_kerr_t_over_g", self_t / d.g, "1", 1e-3, 1e-2, true),
        row("cubic_over_g", d.cubic_ratio, "1", 1e-3, 1e-2, true),
        row("loss_kappa_t_alpha2", tol.kappa_c * d.t_coupl * tol.mean_photons, "1", 0.0, tol.loss_budget, true),
        row("e_j_over_e_l_a", spec.e_j / spec.e_l_a, "1", 0.0, 1.0 - f64::EPSILON, true),
        row("e_j_over_e_l_t", spec.e_j / spec.e_l_t, "1", 0.0, 1.0 - f64::EPSILON, true),
        row("e_c_over_e_l_a", spec.e_c_a / spec.e_l_a, "1", 0.0, MAX_CHARGING_RATIO, true),
        row("e_c_over_e_l_t", spec.e_c_t / spec.e_l_t, "1", 0.0, MAX_CHARGING_RATIO, true),
        row("c_j_ratio", spec.c_j_ratio, "1", 0.0, MAX_JUNCTION_CAPACITANCE_RATIO, true),
        row("t_coupl", d.t_coupl * 1e6, "us", 0.2, 1.0, false),
        row("self_kerr_a_over_g", self_a / d.g, "1", 0.5, 1.0, false),
        row("f_a", d.omega_a / 1e9, "GHz", 10.0 * 0.8, 10.0 * 1.2, false),
        row("f_t", d.omega_t / 1e9, "GHz", 0.5 * 0.8, 0.5 * 1.2, false),
        row("range_a", range_a / 1e6, "MHz", 400.0, 600.0, false),
        row("range_t", range_t / 1e6, "MHz", 5.0, 10.0, false),
        row("e_j", spec.e_j / 1e9, "GHz", 5.0, 40.0, false),
        row("e_l_a", spec.e_l_a / 1e9, "GHz", 50.0, 400.0, false),
        row("e_l_t", spec.e_l_t / 1e9, "GHz", 50.0, 400.0, false),
        row("e_c_a", spec.e_c_a / 1e6, "MHz", 20.0, 200.0, false),
        row("e_c_t", spec.e_c_t / 1e6, "MHz", 0.02, 0.4, false),
    ];
    TableReport { derived: d, rows, violations: spec.violations() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialMinimum {
    pub x_a: f64,
    pub x_t: f64,
    pub iterations: usize,
    /// |x_T| ≤ 1.05·E_J/E_L_T
    pub within_bound: bool,
    pub opposite_signs: bool,
}

/// `U = E_LA x_A²/2 + E_LT x_T²/2 − E_J cos(x_T − x_A − x_ext)`, minimized by
/// damped Newton from the origin.
pub fn potential_minimum(spec: &CircuitSpec, x_ext: f64) -> Result<PotentialMinimum> {
    spec.check()?;
    let (ea, et, ej) = (spec.e_l_a, spec.e_l_t, spec.e_j);
    let u = |a: f64, t: f64| ea * a * a / 2.0 + et * t * t / 2.0 - ej * (t - a - x_ext).cos();
    let (mut a, mut t) = (0.0f64, 0.0f64);
    for it in 0..200 {
        let s = (t - a - x_ext).sin();
        let c = (t - a - x_ext).cos();
        let (ga, gt) = (ea * a - ej * s, et * t + ej * s);
        let (haa, htt, hat) = (ea + ej * c, et + ej * c, -ej * c);
        let det = haa * htt - hat * hat;
        if !(det > 0.0) {
            return Err(Error::Convergence(format!("indefinite Hessian at ({a}, {t})")));
        }
        let da = (htt * ga - hat * gt) / det;
        let dt = (haa * gt - hat * ga) / det;
        let mut step = 1.0;
        let u0 = u(a, t);
        while u(a - step * da, t - step * dt) > u0 + 1e-15 * u0.abs() && step > 1e-6 {
            step /= 2.0;
        }
        a -= step * da;
        t -= step * dt;
        if (step * da).abs().max((step * dt).abs()) < 1e-12 {
            let bound = ej / et * 1.05;
            return Ok(PotentialMinimum {
                x_a: a,
                x_t: t,
                iterations: it + 1,
                within_bound: t.abs() <= bound,
                opposite_signs: a * t < 0.0 || (a == 0.0 && t == 0.0),
            });
        }
    }
    Err(Error::Convergence("potential minimum: 200 Newton steps".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mid() -> CircuitSpec {
        Design::table_midpoint().spec()
    }

    #[test]
    fn inductive_energy_of_two_nanohenry() {
        assert!((inductive_energy(2e-9) / 1e9 - 81.73).abs() < 0.01);
    }

    #[test]
    fn design_hits_frequencies() {
        let s = mid();
        assert!((s.frequency(true, FRAC_PI_2) - 10e9).abs() < 1.0);
        assert!((s.frequency(false, FRAC_PI_2) - 0.5e9).abs() < 1e-3);
    }

    #[test]
    fn kerr_vanishes_at_mean_point() {
        let d = derive_params(&mid(), FRAC_PI_2).unwrap();
        assert!(d.cross_kerr.abs() < 1e-6 * d.g);
        assert!(d.self_kerr_a.abs() < 1e-6 * d.g);
        assert!(d.self_kerr_t.abs() < 1e-6 * d.g);
    }

    #[test]
    fn maximal_frequency_at_pi() {
        let s = mid();
        let d = derive_params(&s, PI).unwrap();
        assert!((d.omega_a - (8.0 * s.e_c_a * (s.e_l_a + s.e_j)).sqrt()).abs() < 1e-3);
        assert!(s.frequency(true, PI) > s.frequency(true, FRAC_PI_2));
        assert!(s.frequency(true, FRAC_PI_2) > s.frequency(true, 0.0));
    }

    #[test]
    fn coupling_and_time() {
        let s = mid();
        let d = derive_params(&s, 0.3).unwrap();
        assert!(d.g / 1e6 > 3.0 && d.g / 1e6 < 15.0, "{}", d.g);
        let xa = (2.0 * s.e_c_a / s.e_l_a).powf(0.25);
        let xt = (2.0 * s.e_c_t / s.e_l_t).powf(0.25);
        let t = 2.0 * (2.0 * PI).sqrt() / (2.0 * PI * s.e_j * xt * xa * xa * s.delta_drive);
        assert!((d.t_coupl / t - 1.0).abs() < 1e-12);
        assert!(d.xi_t < d.xi_a && d.xi_a < 1.0);
        let half = derive_params(&CircuitSpec { delta_drive: 0.5, ..s }, 0.3).unwrap();
        assert!((half.g / d.g - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ratios_follow_zero_point_amplitudes() {
        let s = mid();
        let r = validate_table(&s, &TableTolerances::default());
        let d = r.derived;
        let cross = r.row("cross_kerr_over_g").unwrap().value;
        assert!((cross - 2.0 * d.xi_t / s.delta_drive).abs() < 1e-12);
        let st = r.row("self_kerr_t_over_g").unwrap().value;
        assert!((st - d.xi_t.powi(3) / (2.0 * d.xi_a * d.xi_a)).abs() < 1e-15);
    }

    #[test]
    fn raised_josephson_energy_is_flagged() {
        let s = CircuitSpec { e_j: mid().e_j * 10.0, ..mid() };
        let r = validate_table(&s, &TableTolerances::default());
        assert!(r.violations.iter().any(|v| v.contains("E_J >= E_L_A")));
        assert!(!r.all_pass());
        assert!(matches!(derive_params(&s, 0.0), Err(Error::InvalidRegime(_))));
    }

    #[test]
    fn loss_budget_example() {
        // κ_c = 1/(100 µs), t_coupl = 0.5 µs, |α|² = 3
        let x: f64 = 1.0 / 100e-6 * 0.5e-6 * 3.0;
        assert!((x - 0.015).abs() < 1e-12 && x < TableTolerances::default().loss_budget);
    }

    #[test]
    fn potential_minimum_cases() {
        let s = mid();
        let m0 = potential_minimum(&s, 0.0).unwrap();
        assert_eq!((m0.x_a, m0.x_t), (0.0, 0.0));
        let m = potential_minimum(&s, FRAC_PI_2).unwrap();
        assert!(m.within_bound && m.opposite_signs);
        assert!((m.x_t - s.e_j / s.e_l_t).abs() < 0.1 * s.e_j / s.e_l_t);
        assert!((m.x_a + s.e_j / s.e_l_a).abs() < 0.2 * s.e_j / s.e_l_a);
        let mut last = 0.0;
        for k in 1..=20 {
            let x = FRAC_PI_2 * k as f64 / 20.0;
            let t = potential_minimum(&s, x).unwrap().x_t.abs();
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn shift_linear_in_josephson_energy() {
        let s = mid();
        let a = potential_minimum(&CircuitSpec { e_j: 1e6, ..s }, FRAC_PI_2).unwrap().x_t;
        let b = potential_minimum(&CircuitSpec { e_j: 2e6, ..s }, FRAC_PI_2).unwrap().x_t;
        assert!((b / a - 2.0).abs() < 1e-4);
    }

    #[test]
    fn ancilla_range_at_stiffer_inductance() {
        let s = Design { l_a: inductive_energy(1.0) / 200e9, ..Design::table_midpoint() }.spec();
        let range = s.frequency(true, PI) - s.frequency(true, 0.0);
        assert!((range / 500e6 - 1.0).abs() < 0.2, "{range}");
    }
}
