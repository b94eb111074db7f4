//! Discrete Dirichlet energy of circle-valued fields on a disk with
//! prescribed boundary values, and its growth under refinement.
//!
//! The square `[-1, 1]^2` is split into `n x n` cells. Cells whose center
//! lies in the open unit disk are free; every other cell is held at
//! `g(x / |x|)`. The energy is `sum |m_i - m_j|^2` over adjacent pairs with at
//! least one free cell, the grid form of `int |Dm|^2` in two dimensions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::degree::{sample_loop, winding_number};
use crate::descent::{minimize_unit_field, DescentConfig};
use crate::error::{Error, Result};

/// Boundary data on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum BoundaryData {
    /// `theta -> (cos k theta, sin k theta)`; `k = 0` is the constant `(1, 0)`.
    Winding { degree: i32 },
    /// Degree-zero data `theta -> e^{i a sin theta}`.
    Wavy { amplitude: f64 },
}

impl BoundaryData {
    fn angle(&self, theta: f64) -> f64 {
        match *self {
            BoundaryData::Winding { degree } => degree as f64 * theta,
            BoundaryData::Wavy { amplitude } => amplitude * theta.sin(),
        }
    }

    pub fn degree(&self) -> i32 {
        match *self {
            BoundaryData::Winding { degree } => degree,
            BoundaryData::Wavy { .. } => 0,
        }
    }

    /// Radial extension, the natural symmetric competitor.
    fn ansatz(&self, x: [f64; 2]) -> [f64; 2] {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let theta = x[1].atan2(x[0]);
        let a = match *self {
            BoundaryData::Winding { .. } => self.angle(theta),
            BoundaryData::Wavy { .. } => r.min(1.0) * self.angle(theta),
        };
        [a.cos(), a.sin()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VortexRow {
    pub n: usize,
    /// Energy of the relaxed field.
    pub energy: f64,
    /// Energy of the radial extension of the boundary data.
    pub ansatz_energy: f64,
    pub iterations: usize,
    pub residual: f64,
    pub monotone: bool,
    pub boundary_winding: i64,
    /// Winding of the relaxed field along the circle of radius 0.9.
    pub interior_winding: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VortexStudy {
    pub boundary: BoundaryData,
    pub rows: Vec<VortexRow>,
    /// `E(n_{k+1}) - E(n_k)`.
    pub increments: Vec<f64>,
    /// `2 pi ln(n_{k+1} / n_k)`, the reference growth of a single vortex.
    pub log_law: Vec<f64>,
    pub increasing: bool,
    /// Every increment is at least `LOG_LAW_FACTOR` times the log law.
    pub log_law_holds: bool,
    /// Largest relative deviation of the energies from their mean.
    pub relative_variation: f64,
    pub law_source: String,
}

/// Provenance of the reference law, carried in every report.
pub const LOG_LAW_SOURCE: &str = "2*pi*ln(n2/n1): standard single-vortex asymptotics, imported as an external oracle";

/// Safety factor on the logarithmic growth law.
pub const LOG_LAW_FACTOR: f64 = 0.8;

struct DiskGrid {
    n: usize,
    free: Vec<bool>,
    /// Adjacent pairs with at least one free cell.
    edges: Vec<(usize, usize)>,
}

impl DiskGrid {
    fn new(n: usize) -> Self {
        let h = 2.0 / n as f64;
        let center = |i: usize| -1.0 + (i as f64 + 0.5) * h;
        let mut free = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                free[i * n + j] = center(i).powi(2) + center(j).powi(2) < 1.0;
            }
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let a = i * n + j;
                if i + 1 < n && (free[a] || free[a + n]) {
                    edges.push((a, a + n));
                }
                if j + 1 < n && (free[a] || free[a + 1]) {
                    edges.push((a, a + 1));
                }
            }
        }
        DiskGrid { n, free, edges }
    }

    fn point(&self, idx: usize) -> [f64; 2] {
        let h = 2.0 / self.n as f64;
        [-1.0 + ((idx / self.n) as f64 + 0.5) * h, -1.0 + ((idx % self.n) as f64 + 0.5) * h]
    }

    fn energy(&self, v: &[f64], g: &mut [f64]) -> f64 {
        g.fill(0.0);
        let mut e = crate::sum::PairwiseSum::new();
        for &(a, b) in &self.edges {
            let d0 = v[2 * b] - v[2 * a];
            let d1 = v[2 * b + 1] - v[2 * a + 1];
            e.add(d0 * d0 + d1 * d1);
            g[2 * b] += 2.0 * d0;
            g[2 * b + 1] += 2.0 * d1;
            g[2 * a] -= 2.0 * d0;
            g[2 * a + 1] -= 2.0 * d1;
        }
        e.total()
    }

    fn cell_at(&self, x: [f64; 2]) -> usize {
        let h = 2.0 / self.n as f64;
        let i = (((x[0] + 1.0) / h).floor() as usize).min(self.n - 1);
        let j = (((x[1] + 1.0) / h).floor() as usize).min(self.n - 1);
        i * self.n + j
    }
}

/// Relaxes the field for one resolution. `perturbation` is the amplitude of
/// a seeded random angle added to the initial free values, which lets
/// symmetric but unstable configurations split.
pub fn vortex_energy(
    n: usize,
    boundary: BoundaryData,
    cfg: &DescentConfig,
    perturbation: f64,
    seed: u64,
) -> Result<VortexRow> {
    if n < 4 {
        return Err(Error::InvalidConfig(format!("vortex resolution {n} too small")));
    }
    let grid = DiskGrid::new(n);
    let mut values = vec![0.0; 2 * n * n];
    for idx in 0..n * n {
        let x = grid.point(idx);
        let v = if grid.free[idx] {
            boundary.ansatz(x)
        } else {
            let theta = x[1].atan2(x[0]);
            let a = boundary.angle(theta);
            [a.cos(), a.sin()]
        };
        values[2 * idx] = v[0];
        values[2 * idx + 1] = v[1];
    }
    let mut scratch = vec![0.0; values.len()];
    let ansatz_energy = grid.energy(&values, &mut scratch);
    if perturbation > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for idx in 0..n * n {
            if grid.free[idx] {
                let t = perturbation * (2.0 * rng.gen::<f64>() - 1.0);
                let (c, s) = (t.cos(), t.sin());
                let (a, b) = (values[2 * idx], values[2 * idx + 1]);
                values[2 * idx] = c * a - s * b;
                values[2 * idx + 1] = s * a + c * b;
            }
        }
    }
    let stats = minimize_unit_field(&mut values, 2, &grid.free, cfg, |v, g| grid.energy(v, g));
    if !stats.converged {
        log::warn!("vortex relaxation at n = {n} stopped with residual {:e}", stats.final_residual);
        return Err(Error::NonConvergence { residual: stats.final_residual });
    }
    let boundary_winding = winding_number(&sample_loop(
        |x| {
            let a = boundary.angle(x[1].atan2(x[0]));
            [a.cos(), a.sin()]
        },
        [0.0, 0.0],
        1.0,
        256,
    ))?;
    let interior_winding = winding_number(&sample_loop(
        |x| {
            let c = grid.cell_at(*x);
            [values[2 * c], values[2 * c + 1]]
        },
        [0.0, 0.0],
        0.9,
        4 * n,
    ))?;
    Ok(VortexRow {
        n,
        energy: stats.final_energy,
        ansatz_energy,
        iterations: stats.iterations,
        residual: stats.final_residual,
        monotone: stats.monotone(),
        boundary_winding,
        interior_winding,
    })
}

pub fn default_vortex_descent() -> DescentConfig {
    DescentConfig { max_iters: 200_000, step_size: 0.1, grad_tolerance: 1e-7 }
}

/// Minimal energies over a list of resolutions, checked against the
/// logarithmic growth `2 pi ln(n2 / n1)` of a degree-one vortex.
pub fn vortex_energy_study(
    resolutions: &[usize],
    p: f64,
    boundary: BoundaryData,
    cfg: &DescentConfig,
    perturbation: f64,
    seed: u64,
) -> Result<VortexStudy> {
    if p != 2.0 {
        return Err(Error::InvalidConfig(format!("the vortex study uses p = 2, got {p}")));
    }
    let rows = resolutions
        .iter()
        .map(|&n| vortex_energy(n, boundary, cfg, perturbation, seed))
        .collect::<Result<Vec<_>>>()?;
    let increments: Vec<f64> = rows.windows(2).map(|w| w[1].energy - w[0].energy).collect();
    let log_law: Vec<f64> = rows.windows(2).map(|w| 2.0 * PI * (w[1].n as f64 / w[0].n as f64).ln()).collect();
    let mean = rows.iter().map(|r| r.energy).sum::<f64>() / rows.len() as f64;
    let relative_variation = if mean > 0.0 {
        rows.iter().map(|r| (r.energy - mean).abs() / mean).fold(0.0, f64::max)
    } else {
        rows.iter().map(|r| r.energy.abs()).fold(0.0, f64::max)
    };
    Ok(VortexStudy {
        boundary,
        increasing: increments.iter().all(|&d| d > 0.0),
        log_law_holds: increments.iter().zip(&log_law).all(|(d, l)| *d >= LOG_LAW_FACTOR * l),
        increments,
        log_law,
        rows,
        relative_variation,
        law_source: LOG_LAW_SOURCE.to_string(),
    })
}

/// Least-squares slope of energy against `ln n`.
pub fn log_slope(rows: &[VortexRow], pick: impl Fn(&VortexRow) -> f64) -> f64 {
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(pick).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}
