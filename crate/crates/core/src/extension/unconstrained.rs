//! Linear extension into the holes: reflection across the hole boundary,
//! blended toward the mean over a collar of solid cells.

use crate::error::{Error, Result};
use crate::extension::ExtensionDiagnostics;
use crate::field::VectorField;
use crate::perforation::{PerforatedGrid, Variant};
use crate::sum::PairwiseSum;

/// Collar thickness in units of `eps`.
pub const COLLAR_WIDTH: f64 = 0.25;

/// Cubic cutoff, 1 on the hole boundary and 0 at depth `COLLAR_WIDTH`.
fn cutoff(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        1.0 - t * t * (3.0 - 2.0 * t)
    }
}

/// Geometry of one hole, independent of the field being extended.
#[derive(Debug, Clone)]
struct HolePlan {
    /// Solid cells within `COLLAR_WIDTH * eps` of the hole, ascending.
    collar: Vec<usize>,
    /// `(cell, weight, reflected source cell)`.
    cells: Vec<(usize, f64, usize)>,
}

fn plan_holes(grid: &PerforatedGrid) -> Vec<HolePlan> {
    let d = grid.dim();
    let eps = grid.epsilon;
    let h = grid.spacing;
    let dims = grid.dims();
    let cell = &grid.cell;
    grid.holes()
        .iter()
        .enumerate()
        .map(|(hole, z)| {
            // index box covering the hole and its collar
            let mut lo = vec![0usize; d];
            let mut hi = vec![0usize; d];
            for k in 0..d {
                let (a, b) = cell.hole.extent(k);
                let xa = eps * (z[k] as f64 + a - COLLAR_WIDTH);
                let xb = eps * (z[k] as f64 + b + COLLAR_WIDTH);
                lo[k] = ((xa / h).floor().max(0.0) as usize).min(dims[k]);
                hi[k] = ((xb / h).ceil().max(0.0) as usize).min(dims[k]);
            }
            let mut collar = Vec::new();
            let mut members = Vec::new();
            for_each_in_box(&lo, &hi, |multi| {
                let idx = grid.flat_index(multi);
                let u = grid.local_coordinates(idx, z);
                let sd = cell.signed_distance(&u);
                if grid.is_solid(idx) {
                    if sd > 0.0 && sd <= COLLAR_WIDTH {
                        collar.push(idx);
                    }
                } else if grid.hole_of(idx) == Some(hole) {
                    members.push((idx, u, -sd));
                }
            });
            collar.sort_unstable();
            let cells = members
                .into_iter()
                .map(|(idx, u, depth)| {
                    let w = cutoff(depth / COLLAR_WIDTH);
                    let source = if w > 0.0 && !collar.is_empty() {
                        let x: Vec<f64> =
                            cell.reflect(&u).iter().zip(z).map(|(r, zk)| eps * (*zk as f64 + r)).collect();
                        snap(grid, &collar, &x)
                    } else {
                        usize::MAX
                    };
                    (idx, w, source)
                })
                .collect();
            HolePlan { collar, cells }
        })
        .collect()
}

/// Collar cell containing `x`, or the collar cell whose center is nearest.
fn snap(grid: &PerforatedGrid, collar: &[usize], x: &[f64]) -> usize {
    let dims = grid.dims();
    let mut multi = Vec::with_capacity(x.len());
    let mut inside = true;
    for (k, &xk) in x.iter().enumerate() {
        let i = (xk / grid.spacing).floor();
        if i < 0.0 || i >= dims[k] as f64 {
            inside = false;
            break;
        }
        multi.push(i as usize);
    }
    if inside {
        let idx = grid.flat_index(&multi);
        if collar.binary_search(&idx).is_ok() {
            return idx;
        }
    }
    let mut best = (f64::INFINITY, collar[0]);
    for &c in collar {
        let d2: f64 = grid.center(c).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best.0 {
            best = (d2, c);
        }
    }
    best.1
}

fn for_each_in_box<F: FnMut(&[usize])>(lo: &[usize], hi: &[usize], mut f: F) {
    if lo.iter().zip(hi).any(|(a, b)| a >= b) {
        return;
    }
    let mut multi = lo.to_vec();
    loop {
        f(&multi);
        let mut k = multi.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            multi[k] += 1;
            if multi[k] < hi[k] {
                break;
            }
            multi[k] = lo[k];
        }
    }
}

fn check_solid_defined(f: &VectorField) -> Result<()> {
    let grid = &f.grid;
    for idx in 0..grid.num_cells() {
        if grid.is_solid(idx) && !f.is_defined(idx) {
            return Err(Error::UndefinedInput { cell: idx });
        }
    }
    Ok(())
}

/// Applies the hole plans. Holes with an empty collar are reported through
/// `on_isolated` and left undefined.
fn apply(f: &VectorField, plans: &[HolePlan], mut on_isolated: impl FnMut(usize) -> Result<()>) -> Result<VectorField> {
    let grid = f.grid.clone();
    let l = f.components();
    let mut out = VectorField::undefined(grid.clone(), l);
    for idx in 0..grid.num_cells() {
        if grid.is_solid(idx) {
            out.set(idx, f.value(idx));
        }
    }
    let mut mean = vec![0.0; l];
    let mut value = vec![0.0; l];
    for (hole, plan) in plans.iter().enumerate() {
        if plan.cells.is_empty() {
            continue;
        }
        if plan.collar.is_empty() {
            on_isolated(hole)?;
            continue;
        }
        // mean written as an offset from the first collar value so that
        // constant data reproduces exactly
        let first = plan.collar[0];
        for (k, m) in mean.iter_mut().enumerate() {
            let base = f.value(first)[k];
            let mut acc = PairwiseSum::new();
            for &c in &plan.collar {
                acc.add(f.value(c)[k] - base);
            }
            *m = base + acc.total() / plan.collar.len() as f64;
        }
        for &(idx, w, source) in &plan.cells {
            if w > 0.0 {
                let s = f.value(source);
                for k in 0..l {
                    value[k] = mean[k] + w * (s[k] - mean[k]);
                }
                out.set(idx, &value);
            } else {
                out.set(idx, &mean);
            }
        }
    }
    Ok(out)
}

/// Extension `S_eps` on the safe perforated domain together with its
/// realized constants for the exponent `p`.
pub fn extend_unconstrained(f: &VectorField, p: f64) -> Result<(VectorField, ExtensionDiagnostics)> {
    let out = extend_safe_field(f)?;
    let grid = &f.grid;
    let diagnostics =
        ExtensionDiagnostics::compute(f, &out, p, &grid.solid_mask(), &vec![true; grid.num_cells()])?;
    Ok((out, diagnostics))
}

/// The extended field of [`extend_unconstrained`] without diagnostics.
pub fn extend_safe_field(f: &VectorField) -> Result<VectorField> {
    if f.grid.variant != Variant::Safe {
        return Err(Error::WrongVariant { expected: "safe" });
    }
    check_solid_defined(f)?;
    let plans = plan_holes(&f.grid);
    apply(f, &plans, |hole| Err(Error::IsolatedHole { hole }))
}

/// Extension on the general perforated domain, filling every hole whose
/// collar is nonempty. Boundary-cut holes without collar stay undefined.
pub fn extend_general_field(f: &VectorField) -> Result<(VectorField, usize)> {
    if f.grid.variant != Variant::General {
        return Err(Error::WrongVariant { expected: "general" });
    }
    check_solid_defined(f)?;
    let plans = plan_holes(&f.grid);
    let mut isolated = 0usize;
    let out = apply(f, &plans, |hole| {
        isolated += plans[hole].cells.len();
        Ok(())
    })?;
    Ok((out, isolated))
}

/// Result of the extension on the general perforated domain.
#[derive(Debug, Clone)]
pub struct GeneralExtension {
    /// Defined on `Omega(margin)` minus the unfilled hole cells.
    pub field: VectorField,
    /// `None` when `Omega(margin)` contains no cells.
    pub diagnostics: Option<ExtensionDiagnostics>,
    /// Hole cells inside `Omega(margin)` left undefined for lack of a collar.
    pub unfilled_cells: usize,
}

/// Extension `S~_eps` with output and diagnostics restricted to `Omega(margin)`.
pub fn extend_unconstrained_general(f: &VectorField, margin: f64, p: f64) -> Result<GeneralExtension> {
    let (full, _) = extend_general_field(f)?;
    let grid = &f.grid;
    let inside = grid.retracted_mask(margin);
    let field = full.restricted(&inside);
    let unfilled_cells = (0..grid.num_cells()).filter(|&i| inside[i] && !field.is_defined(i)).count();
    let in_region: Vec<bool> = (0..grid.num_cells()).map(|i| inside[i] && grid.is_solid(i)).collect();
    let out_region: Vec<bool> = field.defined_mask().to_vec();
    let diagnostics = if in_region.iter().any(|&b| b) {
        Some(ExtensionDiagnostics::compute(f, &field, p, &in_region, &out_region)?)
    } else {
        None
    };
    Ok(GeneralExtension { field, diagnostics, unfilled_cells })
}
