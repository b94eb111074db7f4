//! Norms, winding numbers and the vortex energy study.

use std::f64::consts::PI;
use std::sync::Arc;

use manifold_extend::analysis::degree::{sample_loop, winding_number};
use manifold_extend::analysis::norms::{gradient_norm, lp_norm, DiffPolicy};
use manifold_extend::analysis::vortex::{default_vortex_descent, vortex_energy_study, BoundaryData};
use manifold_extend::field::VectorField;
use manifold_extend::microcell::{make_microcell, HoleShape};
use manifold_extend::perforation::{build_grid, BoxDomain, PerforatedGrid, Variant};
use proptest::prelude::*;

fn grid(n: usize) -> Arc<PerforatedGrid> {
    let cell = make_microcell(HoleShape::disk(&[0.0, 0.0], 0.3), 2).unwrap();
    Arc::new(build_grid(&cell, &BoxDomain::unit(2), 0.25, 0.05, 0.25 / n as f64, Variant::Safe).unwrap())
}

fn everywhere(g: &PerforatedGrid) -> Vec<bool> {
    vec![true; g.num_cells()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_norm_of_a_constant(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, p in 1.1f64..4.0) {
        let g = grid(8);
        let f = VectorField::from_fn(g.clone(), 2, &everywhere(&g), |_| vec![c0, c1]);
        let expected = (c0 * c0 + c1 * c1).sqrt() * (g.num_cells() as f64 * g.cell_volume()).powf(1.0 / p);
        prop_assert!((lp_norm(&f, p, &everywhere(&g)).unwrap() - expected).abs() <= 1e-12 * (1.0 + expected));
        prop_assert_eq!(gradient_norm(&f, p, &everywhere(&g), DiffPolicy::WithinRegion).unwrap(), 0.0);
    }

    #[test]
    fn norms_are_homogeneous_and_subadditive(a in -3.0f64..3.0, k in 0.5f64..4.0, p in 1.1f64..4.0) {
        let g = grid(8);
        let all = everywhere(&g);
        let f = VectorField::from_fn(g.clone(), 2, &all, |x| vec![(k * x[0]).sin(), x[1] * x[1]]);
        let h = VectorField::from_fn(g.clone(), 2, &all, |x| vec![x[0] - x[1], (k * x[1]).cos()]);
        let scaled = f.linear_combination(a, &f, 0.0);
        let sum = f.linear_combination(1.0, &h, 1.0);
        for policy in [DiffPolicy::WithinRegion, DiffPolicy::SameLabel] {
            let norm = |v: &VectorField| gradient_norm(v, p, &all, policy).unwrap();
            prop_assert!((norm(&scaled) - a.abs() * norm(&f)).abs() <= 1e-10 * (1.0 + norm(&scaled)));
            prop_assert!(norm(&sum) <= norm(&f) + norm(&h) + 1e-12);
        }
        let lp = |v: &VectorField| lp_norm(v, p, &all).unwrap();
        prop_assert!((lp(&scaled) - a.abs() * lp(&f)).abs() <= 1e-10 * (1.0 + lp(&scaled)));
        prop_assert!(lp(&sum) <= lp(&f) + lp(&h) + 1e-12);
    }

    /// A linear field has forward differences `a_k h` on every axis with a neighbour.
    #[test]
    fn gradient_of_a_linear_field(a0 in -2.0f64..2.0, a1 in -2.0f64..2.0, p in 1.1f64..4.0) {
        let g = grid(8);
        let all = everywhere(&g);
        let f = VectorField::from_fn(g.clone(), 1, &all, |x| vec![a0 * x[0] + a1 * x[1]]);
        let n = g.dims()[0];
        let mut expected = 0.0;
        for i in 0..n {
            for j in 0..n {
                let sq = if i + 1 < n { a0 * a0 } else { 0.0 } + if j + 1 < n { a1 * a1 } else { 0.0 };
                expected += sq.powf(p / 2.0) * g.cell_volume();
            }
        }
        let got = gradient_norm(&f, p, &all, DiffPolicy::WithinRegion).unwrap();
        prop_assert!((got - expected.powf(1.0 / p)).abs() <= 1e-10 * (1.0 + got));
    }

    #[test]
    fn winding_is_rotation_and_refinement_invariant(k in -4i64..5, phase in 0.0f64..6.3, samples in 64usize..400) {
        let map = move |x: &[f64; 2]| {
            let t = k as f64 * x[1].atan2(x[0]) + phase;
            [t.cos(), t.sin()]
        };
        prop_assert_eq!(winding_number(&sample_loop(map, [0.0, 0.0], 1.0, samples)).unwrap(), k);
        prop_assert_eq!(winding_number(&sample_loop(map, [0.0, 0.0], 0.3, 2 * samples)).unwrap(), k);
    }

    /// Degrees add under pointwise complex multiplication.
    #[test]
    fn winding_is_additive(a in -3i64..4, b in -3i64..4) {
        let power = |k: i64| move |x: &[f64; 2]| {
            let t = k as f64 * x[1].atan2(x[0]);
            [t.cos(), t.sin()]
        };
        let (u, v) = (sample_loop(power(a), [0.0, 0.0], 1.0, 128), sample_loop(power(b), [0.0, 0.0], 1.0, 128));
        let product: Vec<[f64; 2]> =
            u.iter().zip(&v).map(|(p, q)| [p[0] * q[0] - p[1] * q[1], p[0] * q[1] + p[1] * q[0]]).collect();
        prop_assert_eq!(winding_number(&product).unwrap(), a + b);
    }
}

#[test]
fn coarse_loops_are_rejected() {
    let map = |x: &[f64; 2]| {
        let t = 5.0 * x[1].atan2(x[0]);
        [t.cos(), t.sin()]
    };
    assert!(winding_number(&sample_loop(map, [0.0, 0.0], 1.0, 8)).is_err());
    assert!(winding_number(&sample_loop(map, [0.0, 0.0], 1.0, 16)).is_err());
}

#[test]
fn degree_zero_boundaries_have_bounded_energy() {
    let cfg = default_vortex_descent();
    let constant = vortex_energy_study(&[16, 32, 64], 2.0, BoundaryData::Winding { degree: 0 }, &cfg, 0.0, 1).unwrap();
    assert!(constant.rows.iter().all(|r| r.energy == 0.0));
    let wavy = vortex_energy_study(&[16, 32, 64], 2.0, BoundaryData::Wavy { amplitude: 1.0 }, &cfg, 0.0, 1).unwrap();
    assert!(wavy.relative_variation <= 0.1, "{:?}", wavy.rows);
    assert!(wavy.rows.iter().all(|r| r.boundary_winding == 0 && r.monotone));
}

#[test]
fn degree_one_energy_grows_logarithmically() {
    let study =
        vortex_energy_study(&[16, 32, 64], 2.0, BoundaryData::Winding { degree: 1 }, &default_vortex_descent(), 0.3, 7)
            .unwrap();
    assert!(study.increasing && study.log_law_holds, "{:?}", study.increments);
    for d in &study.increments {
        assert!((d - 2.0 * PI * 2f64.ln()).abs() <= 0.15 * 2.0 * PI * 2f64.ln(), "{:?}", study.increments);
    }
    assert!(study.rows.iter().all(|r| r.interior_winding == 1 && r.energy <= r.ansatz_energy));
}

/// The radial degree-`k` ansatz pays `k^2` times the degree-one logarithm.
#[test]
fn radial_ansatz_scales_with_the_square_of_the_degree() {
    let cfg = default_vortex_descent();
    let one = vortex_energy_study(&[32, 64], 2.0, BoundaryData::Winding { degree: 1 }, &cfg, 0.0, 1).unwrap();
    let three = vortex_energy_study(&[32, 64], 2.0, BoundaryData::Winding { degree: 3 }, &cfg, 0.3, 1).unwrap();
    let growth = |s: &manifold_extend::analysis::vortex::VortexStudy| s.rows[1].ansatz_energy - s.rows[0].ansatz_energy;
    assert!((growth(&three) / growth(&one) - 9.0).abs() <= 0.5, "{} vs {}", growth(&three), growth(&one));
    assert!(three.rows.iter().all(|r| r.boundary_winding == 3 && r.energy <= r.ansatz_energy));
}

#[test]
fn vortex_study_requires_p_two() {
    assert!(vortex_energy_study(&[16], 1.5, BoundaryData::Winding { degree: 1 }, &default_vortex_descent(), 0.0, 1)
        .is_err());
}
