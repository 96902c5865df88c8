//! Wigner and Husimi functions on rectangular (q, p) grids.
//!
//! Both are densities in the (q, p) plane: ∫W dq dp = 1 and ∫Q d²β = 1 with
//! β = (q + ip)/√2, so ∫Q dq dp = 2.

use super::{hermite_functions, DensityOperator, StateVector};
use crate::error::Result;
use crate::linalg::{CVec, C64};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSpaceKind {
    Wigner,
    Husimi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl Grid {
    pub fn uniform(qmin: f64, qmax: f64, nq: usize, pmin: f64, pmax: f64, np: usize) -> Grid {
        let axis = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
            if n == 1 {
                return vec![lo];
            }
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        Grid { q: axis(qmin, qmax, nq), p: axis(pmin, pmax, np) }
    }

    pub fn square(half_width: f64, n: usize) -> Grid {
        Grid::uniform(-half_width, half_width, n, -half_width, half_width, n)
    }

    /// Trapezoid-free cell area, assuming uniform spacing.
    pub fn cell_area(&self) -> f64 {
        let dq = if self.q.len() > 1 { self.q[1] - self.q[0] } else { 1.0 };
        let dp = if self.p.len() > 1 { self.p[1] - self.p[0] } else { 1.0 };
        dq * dp
    }
}

/// Values stored row-major with q as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn at(&self, iq: usize, ip: usize) -> f64 {
        self.values[iq * self.grid.p.len() + ip]
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }
}

fn effective_levels(c: &CVec) -> usize {
    let top = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let last = c.iter().rposition(|z| z.norm() > 1e-13 * top).unwrap_or(0);
    last + 1
}

fn wavefunction(c: &CVec, levels: usize, x: f64, buf: &mut [f64]) -> C64 {
    hermite_functions(x, levels, buf);
    (0..levels).map(|n| c[n] * buf[n]).sum()
}

fn wigner_pure(c: &CVec, grid: &Grid, weight: f64, out: &mut [f64]) {
    let levels = effective_levels(c);
    let turning = (2.0 * levels as f64 + 1.0).sqrt();
    let pmax = grid.p.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let hy = (0.8 / (turning + pmax)).min(0.05);
    let ymax = turning + 6.0;
    let ny = (ymax / hy).ceil() as i64;
    let ys: Vec<f64> = (-ny..=ny).map(|j| j as f64 * hy).collect();
    let mut buf = vec![0.0; levels.max(1)];
    let phases: Vec<Vec<C64>> =
        grid.p.iter().map(|&p| ys.iter().map(|&y| C64::from_polar(1.0, 2.0 * p * y)).collect()).collect();
    for (iq, &q) in grid.q.iter().enumerate() {
        let prod: Vec<C64> = ys
            .iter()
            .map(|&y| wavefunction(c, levels, q + y, &mut buf).conj() * wavefunction(c, levels, q - y, &mut buf))
            .collect();
        for (ip, ph) in phases.iter().enumerate() {
            let s: C64 = prod.iter().zip(ph).map(|(a, b)| a * b).sum();
            out[iq * grid.p.len() + ip] += weight * s.re * hy / PI;
        }
    }
}

fn husimi_pure(c: &CVec, grid: &Grid, weight: f64, out: &mut [f64]) {
    let levels = effective_levels(c);
    for (iq, &q) in grid.q.iter().enumerate() {
        for (ip, &p) in grid.p.iter().enumerate() {
            let b = C64::new(q, p) / 2f64.sqrt();
            let bc = b.conj();
            let mut t = C64::from((-b.norm_sqr() / 2.0).exp());
            let mut s = t * c[0];
            for n in 1..levels {
                t = t * bc / (n as f64).sqrt();
                s += t * c[n];
            }
            out[iq * grid.p.len() + ip] += weight * s.norm_sqr() / PI;
        }
    }
}

pub fn phase_space_pure(psi: &StateVector, grid: &Grid, kind: PhaseSpaceKind) -> Field {
    let mut values = vec![0.0; grid.q.len() * grid.p.len()];
    match kind {
        PhaseSpaceKind::Wigner => wigner_pure(psi.amplitudes(), grid, 1.0, &mut values),
        PhaseSpaceKind::Husimi => husimi_pure(psi.amplitudes(), grid, 1.0, &mut values),
    }
    Field { grid: grid.clone(), values }
}

/// Mixed states are split into eigen-components with relative weight above 1e−12.
pub fn phase_space(rho: &DensityOperator, grid: &Grid, kind: PhaseSpaceKind) -> Field {
    let mut values = vec![0.0; grid.q.len() * grid.p.len()];
    for (w, v) in rho.pure_components(1e-12) {
        match kind {
            PhaseSpaceKind::Wigner => wigner_pure(&v, grid, w, &mut values),
            PhaseSpaceKind::Husimi => husimi_pure(&v, grid, w, &mut values),
        }
    }
    Field { grid: grid.clone(), values }
}

/// CSV with header `q,p,value`, row-major over the grid.
pub fn write_field_csv(field: &Field, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "q,p,value")?;
    for (iq, q) in field.grid.q.iter().enumerate() {
        for (ip, p) in field.grid.p.iter().enumerate() {
            writeln!(f, "{:.12e},{:.12e},{:.15e}", q, p, field.at(iq, ip))?;
        }
    }
    f.flush()?;
    Ok(())
}
