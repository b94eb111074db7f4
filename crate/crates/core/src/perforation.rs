//! Discretized perforated domains.
//!
//! The domain is an axis-aligned box `[0, L_1] x ... x [0, L_d]` tiled by a
//! uniform grid of square (cubic) cells. Holes are `eps * (Q_0 + z)` for
//! integer translations `z`, so the lattice cell `z` is centered at `eps * z`.
//! Cells are labelled by sampling their centers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microcell::MicroCell;

/// Minimum number of grid cells per lattice period.
pub const MIN_CELLS_PER_EPSILON: usize = 8;
/// Default safety margin `lambda` (multiple of `eps`) between holes and `dOmega`.
pub const DEFAULT_LAMBDA: f64 = 0.05;
/// Default corridor parameter `mu` of the retracted-set variant.
pub const DEFAULT_MU: f64 = 1.0;

const NO_HOLE: u32 = u32::MAX;

/// Axis-aligned box `[0, L_1] x ... x [0, L_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub sides: Vec<f64>,
}

impl BoxDomain {
    pub fn new(sides: &[f64]) -> Result<Self> {
        if !(2..=3).contains(&sides.len()) {
            return Err(Error::InvalidGrid(format!("unsupported dimension {}", sides.len())));
        }
        if sides.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidGrid(format!("side lengths must be positive, got {sides:?}")));
        }
        Ok(BoxDomain { sides: sides.to_vec() })
    }

    pub fn unit(dim: usize) -> Self {
        BoxDomain { sides: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn volume(&self) -> f64 {
        self.sides.iter().product()
    }

    /// `H^{d-1}` measure of the boundary.
    pub fn boundary_measure(&self) -> f64 {
        let d = self.dim();
        (0..d)
            .map(|k| 2.0 * (0..d).filter(|&j| j != k).map(|j| self.sides[j]).product::<f64>())
            .sum()
    }

    pub fn min_side(&self) -> f64 {
        self.sides.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        self.sides.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// Distance from an interior point to `dOmega`.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.sides)
            .map(|(xi, l)| xi.min(l - xi))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Which definition of the perforated domain is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Holes kept at distance `eps * lambda` from the boundary.
    Safe,
    /// `Omega ∩ eps E`: every lattice cell meeting `Omega` is perforated.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellLabel {
    Solid,
    Hole,
}

/// Perforated domain sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct PerforatedGrid {
    pub cell: MicroCell,
    pub domain: BoxDomain,
    pub epsilon: f64,
    pub lambda: f64,
    pub mu: f64,
    pub spacing: f64,
    pub variant: Variant,
    dims: Vec<usize>,
    strides: Vec<usize>,
    labels: Vec<CellLabel>,
    hole_of: Vec<u32>,
    holes: Vec<Vec<i64>>,
    z_interior: Vec<Vec<i64>>,
    z_boundary: Vec<Vec<i64>>,
    z_admissible: Vec<Vec<i64>>,
}

/// Builds the perforated grid.
///
/// `spacing` must divide both `epsilon` (at least [`MIN_CELLS_PER_EPSILON`]
/// times) and every side of the domain.
pub fn build_grid(
    cell: &MicroCell,
    domain: &BoxDomain,
    epsilon: f64,
    lambda: f64,
    spacing: f64,
    variant: Variant,
) -> Result<PerforatedGrid> {
    let d = domain.dim();
    if cell.dim != d {
        return Err(Error::DimensionMismatch { expected: d, got: cell.dim });
    }
    if !(epsilon > 0.0) || !(spacing > 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidGrid("epsilon, spacing and lambda must be positive".into()));
    }
    if epsilon >= domain.min_side() {
        return Err(Error::EpsilonTooLarge { epsilon, min_side: domain.min_side() });
    }
    let per_eps = epsilon / spacing;
    if per_eps + 1e-9 < MIN_CELLS_PER_EPSILON as f64 {
        return Err(Error::ResolutionTooCoarse {
            cells_per_epsilon: per_eps,
            minimum: MIN_CELLS_PER_EPSILON,
        });
    }
    if (per_eps - per_eps.round()).abs() > 1e-9 * per_eps {
        return Err(Error::InvalidGrid(format!("spacing {spacing} does not divide epsilon {epsilon}")));
    }
    let mut dims = Vec::with_capacity(d);
    for &side in &domain.sides {
        let n = side / spacing;
        if (n - n.round()).abs() > 1e-9 * n {
            return Err(Error::InvalidGrid(format!("spacing {spacing} does not divide side {side}")));
        }
        dims.push(n.round() as usize);
    }
    let mut strides = vec![1usize; d];
    for k in (0..d - 1).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }

    // per-axis translation ranges
    let mut meeting = Vec::with_capacity(d);
    let mut interior_axis = Vec::with_capacity(d);
    let mut admissible_axis = Vec::with_capacity(d);
    for k in 0..d {
        let side = domain.sides[k];
        let tol = 1e-12 * side;
        let zmax = (side / epsilon).ceil() as i64 + 1;
        let (lo, hi) = cell.hole.extent(k);
        let mut m = Vec::new();
        let mut i = Vec::new();
        let mut a = Vec::new();
        for z in -1..=zmax {
            let zf = z as f64;
            if epsilon * (zf - 0.5) < side && epsilon * (zf + 0.5) > 0.0 {
                m.push(z);
                if epsilon * (zf - 0.5) >= -tol && epsilon * (zf + 0.5) <= side + tol {
                    i.push(z);
                }
                if epsilon * (zf + lo) >= epsilon * lambda && epsilon * (zf + hi) <= side - epsilon * lambda {
                    a.push(z);
                }
            }
        }
        meeting.push(m);
        interior_axis.push(i);
        admissible_axis.push(a);
    }

    let all = cartesian(&meeting);
    let z_interior = cartesian(&interior_axis);
    let z_admissible = cartesian(&admissible_axis);
    let z_boundary: Vec<Vec<i64>> = all
        .iter()
        .filter(|z| z.iter().zip(&interior_axis).any(|(zi, ax)| !ax.contains(zi)))
        .cloned()
        .collect();

    let holes = match variant {
        Variant::Safe => z_admissible.clone(),
        Variant::General => all.clone(),
    };
    // dense lookup over the lattice box of all translations meeting Omega
    let zmin: Vec<i64> = meeting.iter().map(|m| m[0]).collect();
    let zlen: Vec<usize> = meeting.iter().map(|m| m.len()).collect();
    let lattice_index = |z: &[i64]| -> Option<usize> {
        let mut idx = 0usize;
        for k in 0..d {
            let off = z[k] - zmin[k];
            if off < 0 || off as usize >= zlen[k] {
                return None;
            }
            idx = idx * zlen[k] + off as usize;
        }
        Some(idx)
    };
    let mut lattice_hole = vec![NO_HOLE; zlen.iter().product()];
    for (h, z) in holes.iter().enumerate() {
        if let Some(i) = lattice_index(z) {
            lattice_hole[i] = h as u32;
        }
    }

    // per-axis lattice coordinate and offset of every grid line
    let axis_data: Vec<Vec<(i64, f64)>> = (0..d)
        .map(|k| {
            (0..dims[k])
                .map(|i| {
                    let x = (i as f64 + 0.5) * spacing;
                    let t = x / epsilon;
                    let z = t.round();
                    (z as i64, t - z)
                })
                .collect()
        })
        .collect();

    let total: usize = dims.iter().product();
    let mut labels = vec![CellLabel::Solid; total];
    let mut hole_of = vec![NO_HOLE; total];
    let mut multi = vec![0usize; d];
    let mut z = vec![0i64; d];
    let mut u = vec![0.0; d];
    for idx in 0..total {
        let mut rem = idx;
        for k in 0..d {
            multi[k] = rem / strides[k];
            rem %= strides[k];
            let (zk, uk) = axis_data[k][multi[k]];
            z[k] = zk;
            u[k] = uk;
        }
        if let Some(li) = lattice_index(&z) {
            let h = lattice_hole[li];
            if h != NO_HOLE && cell.signed_distance(&u) < 0.0 {
                labels[idx] = CellLabel::Hole;
                hole_of[idx] = h;
            }
        }
    }

    Ok(PerforatedGrid {
        cell: cell.clone(),
        domain: domain.clone(),
        epsilon,
        lambda,
        mu: DEFAULT_MU,
        spacing,
        variant,
        dims,
        strides,
        labels,
        hole_of,
        holes,
        z_interior,
        z_boundary,
        z_admissible,
    })
}

fn cartesian(axes: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &z in axis {
                let mut v = prefix.clone();
                v.push(z);
                next.push(v);
            }
        }
        out = next;
    }
    if axes.iter().any(|a| a.is_empty()) {
        out.clear();
    }
    out
}

/// `eps_bar = omega (1 - q0) / (4 sqrt(d) H^{d-1}(dOmega) q0)`.
pub fn epsilon_threshold_for(domain: &BoxDomain, q0: f64) -> f64 {
    let d = domain.dim() as f64;
    domain.volume() * (1.0 - q0) / (4.0 * d.sqrt() * domain.boundary_measure() * q0)
}

/// Hole measure inside a retracted set and the interior-translation bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RetractedHoleMeasure {
    pub margin: f64,
    /// Cell-counted measure of the perforations inside `Omega(margin)`.
    pub measure: f64,
    /// `#Z_int * eps^d * q0`.
    pub interior_bound: f64,
    /// The bound is only claimed once lattice cells meeting `Omega(margin)`
    /// lie inside `Omega`, which for a box needs `margin >= eps`.
    pub bound_applies: bool,
    pub bound_holds: bool,
}

/// JSON summary of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GridSummary {
    pub variant: Variant,
    pub dims: Vec<usize>,
    pub epsilon: f64,
    pub spacing: f64,
    pub lambda: f64,
    pub mu: f64,
    pub solid_cells: usize,
    pub hole_cells: usize,
    pub outside_cells: usize,
    pub z_admissible: usize,
    pub z_interior: usize,
    pub z_boundary: usize,
    pub q0: f64,
    pub measure_ratio: Option<f64>,
    pub epsilon_threshold: f64,
    pub connected_holes: bool,
}

impl PerforatedGrid {
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn num_cells(&self) -> usize {
        self.labels.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn cells_per_epsilon(&self) -> usize {
        (self.epsilon / self.spacing).round() as usize
    }

    pub fn labels(&self) -> &[CellLabel] {
        &self.labels
    }

    pub fn label(&self, idx: usize) -> CellLabel {
        self.labels[idx]
    }

    pub fn is_solid(&self, idx: usize) -> bool {
        self.labels[idx] == CellLabel::Solid
    }

    /// Index into [`PerforatedGrid::holes`] of the hole containing the cell.
    pub fn hole_of(&self, idx: usize) -> Option<usize> {
        match self.hole_of[idx] {
            NO_HOLE => None,
            h => Some(h as usize),
        }
    }

    /// Translations that carry a hole (`Z_eps` or all of `Z~_eps`).
    pub fn holes(&self) -> &[Vec<i64>] {
        &self.holes
    }

    pub fn z_interior(&self) -> &[Vec<i64>] {
        &self.z_interior
    }

    pub fn z_boundary(&self) -> &[Vec<i64>] {
        &self.z_boundary
    }

    pub fn z_admissible(&self) -> &[Vec<i64>] {
        &self.z_admissible
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        let mut rem = idx;
        self.strides
            .iter()
            .map(|s| {
                let i = rem / s;
                rem %= s;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().map(|&i| (i as f64 + 0.5) * self.spacing).collect()
    }

    /// Neighbour one step forward along `axis`, if inside the grid.
    pub fn forward_neighbor(&self, idx: usize, axis: usize) -> Option<usize> {
        let i = (idx / self.strides[axis]) % self.dims[axis];
        (i + 1 < self.dims[axis]).then(|| idx + self.strides[axis])
    }

    pub fn backward_neighbor(&self, idx: usize, axis: usize) -> Option<usize> {
        let i = (idx / self.strides[axis]) % self.dims[axis];
        (i > 0).then(|| idx - self.strides[axis])
    }

    /// Lattice-local coordinates `x / eps - z` of the cell center relative to hole `z`.
    pub fn local_coordinates(&self, idx: usize, z: &[i64]) -> Vec<f64> {
        self.center(idx)
            .iter()
            .zip(z)
            .map(|(x, zk)| x / self.epsilon - *zk as f64)
            .collect()
    }

    pub fn count(&self, label: CellLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn solid_mask(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l == CellLabel::Solid).collect()
    }

    pub fn hole_mask(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l == CellLabel::Hole).collect()
    }

    /// Cells whose centers lie in the retracted set `Omega(margin)`.
    pub fn retracted_mask(&self, margin: f64) -> Vec<bool> {
        (0..self.num_cells())
            .map(|i| self.domain.distance_to_boundary(&self.center(i)) > margin)
            .collect()
    }

    /// Exact measure `q0 eps^d #Z` of the perforations.
    pub fn exact_hole_measure(&self) -> f64 {
        self.cell.q0 * self.epsilon.powi(self.dim() as i32) * self.holes.len() as f64
    }

    /// Cell-counted measure of the perforations.
    pub fn counted_hole_measure(&self) -> f64 {
        self.count(CellLabel::Hole) as f64 * self.cell_volume()
    }

    /// `L(Omega_{0,eps}) / L(Omega_eps)` from exact per-hole measures.
    pub fn measure_ratio(&self) -> Result<f64> {
        if self.variant != Variant::Safe {
            return Err(Error::WrongVariant { expected: "safe" });
        }
        let holes = self.exact_hole_measure();
        let solid = self.domain.volume() - holes;
        if !(solid > 0.0) {
            return Err(Error::EmptySolidPart);
        }
        Ok(holes / solid)
    }

    /// Lemma-style upper bound `(1 + q0) / q1` on the measure ratio.
    pub fn measure_ratio_bound(&self) -> f64 {
        (1.0 + self.cell.q0) / self.cell.q1
    }

    pub fn epsilon_threshold(&self) -> f64 {
        epsilon_threshold_for(&self.domain, self.cell.q0)
    }

    pub fn general_hole_measure_in_retract(&self, margin: f64) -> Result<RetractedHoleMeasure> {
        if self.variant != Variant::General {
            return Err(Error::WrongVariant { expected: "general" });
        }
        let vol = self.cell_volume();
        let measure = (0..self.num_cells())
            .filter(|&i| {
                self.labels[i] == CellLabel::Hole
                    && self.domain.distance_to_boundary(&self.center(i)) > margin
            })
            .count() as f64
            * vol;
        let interior_bound =
            self.z_interior.len() as f64 * self.epsilon.powi(self.dim() as i32) * self.cell.q0;
        let bound_applies = margin >= self.epsilon;
        Ok(RetractedHoleMeasure {
            margin,
            measure,
            interior_bound,
            bound_applies,
            bound_holds: measure <= interior_bound,
        })
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            variant: self.variant,
            dims: self.dims.clone(),
            epsilon: self.epsilon,
            spacing: self.spacing,
            lambda: self.lambda,
            mu: self.mu,
            solid_cells: self.count(CellLabel::Solid),
            hole_cells: self.count(CellLabel::Hole),
            outside_cells: 0,
            z_admissible: self.z_admissible.len(),
            z_interior: self.z_interior.len(),
            z_boundary: self.z_boundary.len(),
            q0: self.cell.q0,
            measure_ratio: self.measure_ratio().ok(),
            epsilon_threshold: self.epsilon_threshold(),
            connected_holes: self.cell.touches_cell_boundary(),
        }
    }
}
