//! Exchange plus uniaxial anisotropy energy of unit fields on the
//! perforated domain, its minimization, and the homogenization study of
//! the extended minimizers.
//!
//! `I(m) = sum_cells vol * (A |Dm|^2 + kappa (1 - (m.e)^2))` over SOLID
//! cells, with `|Dm|^2` the squared forward differences between adjacent
//! SOLID cells.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::norms::{w1p_norm, DiffPolicy};
use crate::descent::{minimize_unit_field, DescentConfig, DescentStats};
use crate::error::{Error, Result};
use crate::extension::constrained::extend_constrained;
use crate::extension::translation::TranslationSearchConfig;
use crate::field::VectorField;
use crate::manifold::{random_unit_vector, ManifoldSpec};
use crate::perforation::{PerforatedGrid, Variant};
use crate::sum::PairwiseSum;

/// Largest admissible deviation of `|m|` from 1 on input fields.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Boundary treatment of the cells in the outermost grid layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Collar {
    /// Free boundary.
    None,
    /// `m = e` on every boundary-layer cell.
    Uniform,
    /// `m = e` on the layer at `x_0 = 0` and `m = -e` on the layer at
    /// `x_0 = L_0`; the other faces are free.
    Wall,
}

impl std::str::FromStr for Collar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Collar::None),
            "uniform" => Ok(Collar::Uniform),
            "wall" => Ok(Collar::Wall),
            other => Err(Error::InvalidConfig(format!("unknown collar '{other}'"))),
        }
    }
}

impl std::fmt::Display for Collar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Collar::None => "none",
            Collar::Uniform => "uniform",
            Collar::Wall => "wall",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnergyConfig {
    pub exchange: f64,
    pub anisotropy_axis: Vec<f64>,
    pub anisotropy_weight: f64,
    pub max_iters: usize,
    /// `None` picks `0.2 * spacing^2`.
    pub step_size: Option<f64>,
    /// Tolerance on the largest tangential gradient of the energy density,
    /// in units of `exchange / spacing^2`.
    pub grad_tolerance: f64,
    pub collar: Collar,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            exchange: 1.0,
            anisotropy_axis: vec![0.0, 0.0, 1.0],
            anisotropy_weight: 0.0,
            max_iters: 20_000,
            step_size: None,
            grad_tolerance: 1e-8,
            collar: Collar::None,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self, grid: &PerforatedGrid) -> Result<()> {
        if !(self.exchange > 0.0) {
            return Err(Error::InvalidConfig(format!("exchange {} must be positive", self.exchange)));
        }
        if !(self.anisotropy_weight >= 0.0) {
            return Err(Error::InvalidConfig(format!("anisotropy weight {} must be nonnegative", self.anisotropy_weight)));
        }
        if self.anisotropy_axis.len() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: self.anisotropy_axis.len() });
        }
        let n: f64 = self.anisotropy_axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidConfig(format!("anisotropy axis has norm {n}, expected 1")));
        }
        Ok(())
    }

    pub fn resolved_step(&self, spacing: f64) -> f64 {
        self.step_size.unwrap_or(0.2 * spacing * spacing)
    }
}

/// Precomputed SOLID/SOLID pairs and masks of one grid.
struct Stencil {
    pairs: Vec<(usize, usize)>,
    solid: Vec<bool>,
    l: usize,
}

impl Stencil {
    fn new(grid: &PerforatedGrid, l: usize) -> Self {
        let solid = grid.solid_mask();
        let mut pairs = Vec::new();
        for idx in 0..grid.num_cells() {
            if !solid[idx] {
                continue;
            }
            for axis in 0..grid.dim() {
                if let Some(nb) = grid.forward_neighbor(idx, axis) {
                    if solid[nb] {
                        pairs.push((idx, nb));
                    }
                }
            }
        }
        Stencil { pairs, solid, l }
    }

    /// Energy density sum `I / vol` and its Euclidean gradient.
    fn density(&self, cfg: &EnergyConfig, spacing: f64, v: &[f64], g: &mut [f64]) -> f64 {
        let l = self.l;
        g.fill(0.0);
        let a = cfg.exchange / (spacing * spacing);
        let mut exchange = PairwiseSum::new();
        for &(i, j) in &self.pairs {
            let mut sq = 0.0;
            for k in 0..l {
                let d = v[j * l + k] - v[i * l + k];
                sq += d * d;
                g[j * l + k] += 2.0 * a * d;
                g[i * l + k] -= 2.0 * a * d;
            }
            exchange.add(sq);
        }
        let mut aniso = PairwiseSum::new();
        let e = &cfg.anisotropy_axis;
        let kappa = cfg.anisotropy_weight;
        if kappa > 0.0 {
            for (i, &s) in self.solid.iter().enumerate() {
                if !s {
                    continue;
                }
                let m = &v[i * l..(i + 1) * l];
                let dot: f64 = m.iter().zip(e).map(|(x, y)| x * y).sum();
                aniso.add(1.0 - dot * dot);
                for k in 0..l {
                    g[i * l + k] -= 2.0 * kappa * dot * e[k];
                }
            }
        }
        a * exchange.total() + kappa * aniso.total()
    }
}

fn check_unit(m: &VectorField, solid: &[bool]) -> Result<()> {
    let mut worst: f64 = 0.0;
    for (idx, &s) in solid.iter().enumerate() {
        if s {
            if !m.is_defined(idx) {
                return Err(Error::UndefinedInput { cell: idx });
            }
            let n: f64 = m.value(idx).iter().map(|x| x * x).sum::<f64>().sqrt();
            worst = worst.max((n - 1.0).abs());
        }
    }
    if worst > UNIT_TOLERANCE {
        return Err(Error::ConstraintViolation { deviation: worst });
    }
    Ok(())
}

fn check_components(m: &VectorField, cfg: &EnergyConfig) -> Result<()> {
    if m.components() != cfg.anisotropy_axis.len() {
        return Err(Error::DimensionMismatch { expected: cfg.anisotropy_axis.len(), got: m.components() });
    }
    Ok(())
}

/// Energy `I_eps(m)` of a unit field given on the SOLID cells.
pub fn energy(m: &VectorField, cfg: &EnergyConfig) -> Result<f64> {
    let grid = &m.grid;
    cfg.validate(grid)?;
    check_components(m, cfg)?;
    let stencil = Stencil::new(grid, m.components());
    check_unit(m, &stencil.solid)?;
    let mut g = vec![0.0; m.raw_values().len()];
    Ok(grid.cell_volume() * stencil.density(cfg, grid.spacing, m.raw_values(), &mut g))
}

/// Energy and its Euclidean gradient with respect to the raw cell values,
/// without the unit-length check.
pub fn energy_and_gradient(m: &VectorField, cfg: &EnergyConfig) -> Result<(f64, Vec<f64>)> {
    let grid = &m.grid;
    cfg.validate(grid)?;
    check_components(m, cfg)?;
    let stencil = Stencil::new(grid, m.components());
    let mut g = vec![0.0; m.raw_values().len()];
    let e = stencil.density(cfg, grid.spacing, m.raw_values(), &mut g);
    let vol = grid.cell_volume();
    g.iter_mut().for_each(|x| *x *= vol);
    Ok((vol * e, g))
}

/// Largest relative mismatch between the analytic directional derivative
/// and central differences over `directions` random directions.
pub fn gradient_check(m: &VectorField, cfg: &EnergyConfig, directions: usize, seed: u64) -> Result<f64> {
    use rand::Rng;
    let (_, g) = energy_and_gradient(m, cfg)?;
    let stencil = Stencil::new(&m.grid, m.components());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = m.raw_values().to_vec();
    let mut scratch = vec![0.0; base.len()];
    let vol = m.grid.cell_volume();
    let t = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let dir: Vec<f64> = (0..base.len())
            .map(|i| if stencil.solid[i / stencil.l] { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let shifted = |s: f64| base.iter().zip(&dir).map(|(b, d)| b + s * d).collect::<Vec<_>>();
        let plus = vol * stencil.density(cfg, m.grid.spacing, &shifted(t), &mut scratch);
        let minus = vol * stencil.density(cfg, m.grid.spacing, &shifted(-t), &mut scratch);
        let fd = (plus - minus) / (2.0 * t);
        let exact: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - exact).abs() / exact.abs().max(1e-300));
    }
    Ok(worst)
}

/// Seeded random unit field on the SOLID cells.
pub fn random_unit_field(grid: Arc<PerforatedGrid>, l: usize, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    VectorField::on_solid(grid, l, |_| random_unit_vector(l, &mut rng))
}

/// Fixed cells and their values for a collar.
fn collar_cells(grid: &PerforatedGrid, cfg: &EnergyConfig) -> Vec<(usize, f64)> {
    let dims = grid.dims();
    let mut out = Vec::new();
    for idx in 0..grid.num_cells() {
        if !grid.is_solid(idx) {
            continue;
        }
        let mi = grid.multi_index(idx);
        let sign = match cfg.collar {
            Collar::None => None,
            Collar::Uniform => mi.iter().zip(dims).any(|(&i, &n)| i == 0 || i + 1 == n).then_some(1.0),
            Collar::Wall => {
                if mi[0] == 0 {
                    Some(1.0)
                } else if mi[0] + 1 == dims[0] {
                    Some(-1.0)
                } else {
                    None
                }
            }
        };
        if let Some(s) = sign {
            out.push((idx, s));
        }
    }
    out
}

/// Projected gradient descent from a seeded random unit field. A run that
/// stops before reaching the tolerance logs a warning and still returns its
/// best iterate; `stats.converged` records the outcome.
pub fn minimize(
    grid: Arc<PerforatedGrid>,
    cfg: &EnergyConfig,
    seed: u64,
) -> Result<(VectorField, DescentStats)> {
    cfg.validate(&grid)?;
    if grid.variant != Variant::Safe {
        return Err(Error::WrongVariant { expected: "safe" });
    }
    let l = cfg.anisotropy_axis.len();
    let mut m = random_unit_field(grid.clone(), l, seed);
    let fixed = collar_cells(&grid, cfg);
    let stencil = Stencil::new(&grid, l);
    let mut free = stencil.solid.clone();
    for &(idx, s) in &fixed {
        free[idx] = false;
        let v: Vec<f64> = cfg.anisotropy_axis.iter().map(|x| s * x).collect();
        m.set(idx, &v);
    }
    let mut values = m.raw_values().to_vec();
    let descent = DescentConfig {
        max_iters: cfg.max_iters,
        step_size: cfg.resolved_step(grid.spacing),
        grad_tolerance: cfg.grad_tolerance * cfg.exchange / (grid.spacing * grid.spacing),
    };
    let spacing = grid.spacing;
    let mut stats = minimize_unit_field(&mut values, l, &free, &descent, |v, g| stencil.density(cfg, spacing, v, g));
    if !stats.converged {
        log::warn!(
            "energy descent stopped after {} iterations with residual {:e}",
            stats.iterations,
            stats.final_residual
        );
    }
    let vol = grid.cell_volume();
    stats.final_energy *= vol;
    stats.energies.iter_mut().for_each(|e| *e *= vol);
    for idx in 0..grid.num_cells() {
        if stencil.solid[idx] {
            m.set(idx, &values[idx * l..(idx + 1) * l]);
        }
    }
    Ok((m, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HomogenizationRow {
    pub epsilon: f64,
    pub energy: f64,
    pub exchange_energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub monotone: bool,
    /// Largest `| |m| - 1 |` over the descent iterates.
    pub descent_violation: f64,
    /// `||T_eps m_eps||_{W^{1,2}(Omega)}`.
    pub extension_w12: f64,
    /// Largest `| |T_eps m_eps| - 1 |` over all cells of the box.
    pub constraint_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HomogenizationStudy {
    pub config: EnergyConfig,
    pub rows: Vec<HomogenizationRow>,
    pub w12_max_over_min: f64,
    pub bounded: bool,
    pub constraint_holds: bool,
    pub all_monotone: bool,
}

/// Uniform `W^{1,2}` bound accepted across the sweep.
pub const W12_PLATEAU_FACTOR: f64 = 1.5;
/// Constraint tolerance on the extended minimizers.
pub const EXTENSION_TOLERANCE: f64 = 1e-12;

/// Minimizes on each grid, extends the minimizer and records the energy,
/// the `W^{1,2}` norm of the extension and its constraint violation.
pub fn homogenization_study(
    grids: &[Arc<PerforatedGrid>],
    cfg: &EnergyConfig,
    spec: &ManifoldSpec,
    tcfg: &TranslationSearchConfig,
    seed: u64,
) -> Result<HomogenizationStudy> {
    homogenization_study_with(grids, cfg, spec, tcfg, seed, |_, _| Ok(()))
}

/// As [`homogenization_study`], handing each minimizer and its extension
/// to `sink` before moving on.
pub fn homogenization_study_with<F>(
    grids: &[Arc<PerforatedGrid>],
    cfg: &EnergyConfig,
    spec: &ManifoldSpec,
    tcfg: &TranslationSearchConfig,
    seed: u64,
    mut sink: F,
) -> Result<HomogenizationStudy>
where
    F: FnMut(&VectorField, &VectorField) -> Result<()>,
{
    if spec.ambient_dim != cfg.anisotropy_axis.len() {
        return Err(Error::DimensionMismatch { expected: spec.ambient_dim, got: cfg.anisotropy_axis.len() });
    }
    let mut rows = Vec::with_capacity(grids.len());
    for grid in grids {
        let (m, stats) = minimize(grid.clone(), cfg, seed)?;
        let exchange_only = EnergyConfig { anisotropy_weight: 0.0, ..cfg.clone() };
        let exchange_energy = energy(&m, &exchange_only)?;
        let (ext, _) = extend_constrained(&m, spec, tcfg)?;
        sink(&m, &ext)?;
        let all = vec![true; grid.num_cells()];
        let extension_w12 = w1p_norm(&ext, 2.0, &all, DiffPolicy::WithinRegion)?;
        let constraint_violation = (0..grid.num_cells())
            .map(|i| (ext.value(i).iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max);
        log::info!(
            "homogenization epsilon = {}: energy {:.6}, W12 {:.6}, {} iterations",
            grid.epsilon,
            stats.final_energy,
            extension_w12,
            stats.iterations
        );
        rows.push(HomogenizationRow {
            epsilon: grid.epsilon,
            energy: stats.final_energy,
            exchange_energy,
            iterations: stats.iterations,
            converged: stats.converged,
            residual: stats.final_residual,
            monotone: stats.monotone(),
            descent_violation: stats.max_constraint_violation,
            extension_w12,
            constraint_violation,
        });
    }
    let max = rows.iter().map(|r| r.extension_w12).fold(f64::MIN, f64::max);
    let min = rows.iter().map(|r| r.extension_w12).fold(f64::MAX, f64::min);
    Ok(HomogenizationStudy {
        config: cfg.clone(),
        w12_max_over_min: max / min,
        bounded: max / min <= W12_PLATEAU_FACTOR,
        constraint_holds: rows.iter().all(|r| r.constraint_violation <= EXTENSION_TOLERANCE),
        all_monotone: rows.iter().all(|r| r.monotone),
        rows,
    })
}

impl HomogenizationStudy {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidConfig(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record([
            "epsilon",
            "energy",
            "exchangeEnergy",
            "iterations",
            "converged",
            "residual",
            "monotone",
            "extensionW12",
            "constraintViolation",
        ])
        .map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.epsilon.to_string(),
                r.energy.to_string(),
                r.exchange_energy.to_string(),
                r.iterations.to_string(),
                r.converged.to_string(),
                r.residual.to_string(),
                r.monotone.to_string(),
                r.extension_w12.to_string(),
                r.constraint_violation.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcell::{make_microcell, HoleShape};
    use crate::perforation::{build_grid, BoxDomain, CellLabel};

    fn grid(epsilon: f64, n: usize) -> Arc<PerforatedGrid> {
        let cell = make_microcell(HoleShape::disk(&[0.0; 3], 0.25), 3).unwrap();
        Arc::new(build_grid(&cell, &BoxDomain::unit(3), epsilon, 0.05, epsilon / n as f64, Variant::Safe).unwrap())
    }

    fn solid_volume(g: &PerforatedGrid) -> f64 {
        g.count(CellLabel::Solid) as f64 * g.cell_volume()
    }

    #[test]
    fn aligned_constant_has_zero_energy() {
        let g = grid(0.5, 8);
        let m = VectorField::on_solid(g, 3, |_| vec![0.0, 0.0, 1.0]);
        let cfg = EnergyConfig { anisotropy_weight: 3.0, ..Default::default() };
        assert_eq!(energy(&m, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn misaligned_constant_pays_the_solid_volume() {
        let g = grid(0.5, 8);
        let m = VectorField::on_solid(g.clone(), 3, |_| vec![1.0, 0.0, 0.0]);
        let cfg = EnergyConfig { anisotropy_weight: 1.0, ..Default::default() };
        let e = energy(&m, &cfg).unwrap();
        assert!((e - solid_volume(&g)).abs() < 1e-14);
    }

    #[test]
    fn coercivity_with_exchange_constant() {
        let g = grid(0.5, 8);
        let m = random_unit_field(g.clone(), 3, 4);
        let cfg = EnergyConfig { exchange: 0.7, anisotropy_weight: 2.0, ..Default::default() };
        let e = energy(&m, &cfg).unwrap();
        let semi = crate::analysis::norms::w1p_seminorm(&m, 2.0, &g.solid_mask()).unwrap();
        assert!(e >= 0.7 * semi * semi * (1.0 - 1e-12));
    }

    #[test]
    fn non_unit_input_is_rejected() {
        let g = grid(0.5, 8);
        let m = VectorField::on_solid(g, 3, |_| vec![0.0, 0.0, 1.0 + 1e-6]);
        assert!(matches!(energy(&m, &EnergyConfig::default()), Err(Error::ConstraintViolation { .. })));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g = grid(0.5, 8);
        let m = random_unit_field(g, 3, 11);
        let cfg = EnergyConfig { exchange: 1.3, anisotropy_weight: 10.0, ..Default::default() };
        assert!(gradient_check(&m, &cfg, 100, 3).unwrap() < 1e-5);
    }

    #[test]
    fn uniform_collar_relaxes_to_the_constant() {
        let g = grid(0.5, 8);
        let cfg = EnergyConfig { collar: Collar::Uniform, grad_tolerance: 1e-10, ..Default::default() };
        let (m, stats) = minimize(g.clone(), &cfg, 5).unwrap();
        assert!(stats.converged && stats.monotone());
        assert!(stats.final_energy <= 1e-8, "{}", stats.final_energy);
        assert!(stats.max_constraint_violation <= 1e-12);
        for idx in 0..g.num_cells() {
            if g.is_solid(idx) {
                assert!((m.value(idx)[2] - 1.0).abs() < 1e-6);
            }
        }
    }
}
