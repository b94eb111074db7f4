//! Discrete `L^p` norms and `W^{1,p}` seminorms on masked grids.

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::sum::PairwiseSum;

/// Which forward differences enter the discrete gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffPolicy {
    /// Both cells inside the region.
    WithinRegion,
    /// Both cells inside the region and carrying the same SOLID/HOLE label.
    SameLabel,
}

fn check_region(f: &VectorField, region: &[bool]) -> Result<()> {
    if region.len() != f.num_cells() {
        return Err(Error::DimensionMismatch { expected: f.num_cells(), got: region.len() });
    }
    let mut any = false;
    for (idx, &r) in region.iter().enumerate() {
        if r {
            any = true;
            if !f.is_defined(idx) {
                return Err(Error::UndefinedInput { cell: idx });
            }
        }
    }
    if !any {
        return Err(Error::EmptyRegion);
    }
    Ok(())
}

/// `(sum |f|^p * cell volume)^{1/p}` over the region.
pub fn lp_norm(f: &VectorField, p: f64, region: &[bool]) -> Result<f64> {
    check_region(f, region)?;
    let vol = f.grid.cell_volume();
    let mut acc = PairwiseSum::new();
    for idx in 0..region.len() {
        if region[idx] {
            let r2: f64 = f.value(idx).iter().map(|x| x * x).sum();
            acc.add(r2.powf(p / 2.0) * vol);
        }
    }
    Ok(acc.total().powf(1.0 / p))
}

/// `L^p` norm of the forward-difference gradient, Frobenius norm per cell.
pub fn w1p_seminorm(f: &VectorField, p: f64, region: &[bool]) -> Result<f64> {
    gradient_norm(f, p, region, DiffPolicy::SameLabel)
}

pub fn gradient_norm(f: &VectorField, p: f64, region: &[bool], policy: DiffPolicy) -> Result<f64> {
    check_region(f, region)?;
    let grid = &f.grid;
    let vol = grid.cell_volume();
    let h2 = grid.spacing * grid.spacing;
    let d = grid.dim();
    let labels = grid.labels();
    let mut acc = PairwiseSum::new();
    for idx in 0..region.len() {
        if !region[idx] {
            continue;
        }
        let mut sq = 0.0;
        for axis in 0..d {
            let Some(nb) = grid.forward_neighbor(idx, axis) else { continue };
            if !region[nb] || (policy == DiffPolicy::SameLabel && labels[nb] != labels[idx]) {
                continue;
            }
            for (a, b) in f.value(nb).iter().zip(f.value(idx)) {
                sq += (a - b) * (a - b);
            }
        }
        if sq > 0.0 {
            acc.add((sq / h2).powf(p / 2.0) * vol);
        }
    }
    Ok(acc.total().powf(1.0 / p))
}

/// Full `W^{1,p}` norm `(||f||_p^p + ||Df||_p^p)^{1/p}`.
pub fn w1p_norm(f: &VectorField, p: f64, region: &[bool], policy: DiffPolicy) -> Result<f64> {
    let a = lp_norm(f, p, region)?;
    let b = gradient_norm(f, p, region, policy)?;
    Ok((a.powf(p) + b.powf(p)).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcell::{make_microcell, HoleShape};
    use crate::perforation::{build_grid, BoxDomain, PerforatedGrid, Variant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn grid(n: usize, lambda: f64) -> Arc<PerforatedGrid> {
        let cell = make_microcell(HoleShape::disk(&[0.0, 0.0], 0.3), 2).unwrap();
        let eps = 0.25;
        Arc::new(build_grid(&cell, &BoxDomain::unit(2), eps, lambda, eps / n as f64, Variant::Safe).unwrap())
    }

    /// A grid without holes: the safety margin exceeds every admissible position.
    fn hole_free(n: usize) -> Arc<PerforatedGrid> {
        let g = grid(n, 4.0);
        assert_eq!(g.count(crate::perforation::CellLabel::Hole), 0);
        g
    }

    #[test]
    fn constant_field_norms() {
        let g = grid(8, 0.1);
        let solid = g.solid_mask();
        let f = VectorField::on_solid(g.clone(), 3, |_| vec![0.0, 0.6, 0.8]);
        let vol = solid.iter().filter(|&&s| s).count() as f64 * g.cell_volume();
        for p in [1.5, 2.0, 3.0] {
            assert!((lp_norm(&f, p, &solid).unwrap() - vol.powf(1.0 / p)).abs() < 1e-14);
            assert_eq!(w1p_seminorm(&f, p, &solid).unwrap(), 0.0);
        }
        let g2 = VectorField::on_solid(g, 3, |_| vec![0.0, 1.2, 1.6]);
        assert!((lp_norm(&g2, 2.0, &solid).unwrap() - 2.0 * vol.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn linear_field_lp_converges_quadratically() {
        // int_0^1 int_0^1 (2x - 1 + y)^2 = 1/3 + 1/3 - 1/2 + ... computed exactly below
        let exact: f64 = {
            // E[(2x-1+y)^2] with x,y ~ U(0,1): Var(2x)+Var(y)+(E)^2 = 4/12 + 1/12 + (1/2)^2
            4.0 / 12.0 + 1.0 / 12.0 + 0.25
        };
        let mut errors = vec![];
        for n in [8, 16, 32] {
            let g = hole_free(n);
            let all = vec![true; g.num_cells()];
            let f = VectorField::from_fn(g, 1, &all, |x| vec![2.0 * x[0] - 1.0 + x[1]]);
            let v = lp_norm(&f, 2.0, &all).unwrap().powi(2);
            errors.push((v - exact).abs());
        }
        assert!(errors[0] > 0.0);
        assert!(errors[0] / errors[1] > 3.5 && errors[1] / errors[2] > 3.5, "{errors:?}");
    }

    #[test]
    fn linear_field_gradient() {
        let a = 1.7;
        for n in [8, 16, 32] {
            let g = hole_free(n);
            let all = vec![true; g.num_cells()];
            let f = VectorField::from_fn(g.clone(), 1, &all, |x| vec![a * x[0]]);
            let v = w1p_seminorm(&f, 2.0, &all).unwrap();
            // forward differences vanish on the last column only
            let h = g.spacing;
            assert!((v - a).abs() <= a * h + 1e-12, "{v}");
        }
    }

    #[test]
    fn interface_jumps_are_excluded() {
        let g = grid(8, 0.1);
        let all = vec![true; g.num_cells()];
        let f = VectorField::from_fn(g.clone(), 1, &all, |_| vec![0.0]);
        let mut f = f;
        for i in 0..g.num_cells() {
            if !g.is_solid(i) {
                f.set(i, &[5.0]);
            }
        }
        assert_eq!(w1p_seminorm(&f, 2.0, &g.solid_mask()).unwrap(), 0.0);
        assert_eq!(gradient_norm(&f, 2.0, &all, DiffPolicy::SameLabel).unwrap(), 0.0);
        assert!(gradient_norm(&f, 2.0, &all, DiffPolicy::WithinRegion).unwrap() > 0.0);
    }

    #[test]
    fn errors() {
        let g = grid(8, 0.1);
        let f = VectorField::on_solid(g.clone(), 1, |_| vec![1.0]);
        let none = vec![false; g.num_cells()];
        assert_eq!(lp_norm(&f, 2.0, &none), Err(Error::EmptyRegion));
        let all = vec![true; g.num_cells()];
        assert!(matches!(lp_norm(&f, 2.0, &all), Err(Error::UndefinedInput { .. })));
    }

    #[test]
    fn homogeneity_and_triangle_inequality() {
        let g = grid(8, 0.1);
        let all = vec![true; g.num_cells()];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = VectorField::from_fn(g.clone(), 2, &all, |_| vec![rng.gen::<f64>() - 0.5, rng.gen::<f64>()]);
            let h = VectorField::from_fn(g.clone(), 2, &all, |_| vec![rng.gen::<f64>(), rng.gen::<f64>() - 0.5]);
            let t = -3.0 * rng.gen::<f64>();
            let scaled = f.linear_combination(t, &f, 0.0);
            let sum = f.linear_combination(1.0, &h, 1.0);
            for p in [1.5, 2.0, 4.0] {
                for norm in [lp_norm, w1p_seminorm] {
                    let nf = norm(&f, p, &all).unwrap();
                    let nh = norm(&h, p, &all).unwrap();
                    assert!((norm(&scaled, p, &all).unwrap() - t.abs() * nf).abs() <= 1e-12 * nf.max(1.0));
                    assert!(norm(&sum, p, &all).unwrap() <= nf + nh + 1e-12);
                }
            }
        }
    }
}
