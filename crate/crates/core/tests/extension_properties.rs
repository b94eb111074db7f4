//! Linear and manifold-constrained extension properties.

use std::sync::Arc;

use manifold_extend::analysis::norms::w1p_norm;
use manifold_extend::analysis::norms::DiffPolicy;
use manifold_extend::extension::{extend_constrained, extend_unconstrained, TranslationSearchConfig};
use manifold_extend::field::VectorField;
use manifold_extend::fixtures::Fixture;
use manifold_extend::manifold::{norm, ManifoldSpec};
use manifold_extend::microcell::{make_microcell, HoleShape};
use manifold_extend::perforation::{build_grid, BoxDomain, PerforatedGrid, Variant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid2(eps: f64, n: usize, r: f64) -> Arc<PerforatedGrid> {
    let cell = make_microcell(HoleShape::disk(&[0.0, 0.0], r), 2).unwrap();
    Arc::new(build_grid(&cell, &BoxDomain::unit(2), eps, 0.05, eps / n as f64, Variant::Safe).unwrap())
}

fn noise(grid: Arc<PerforatedGrid>, components: usize, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    VectorField::on_solid(grid, components, |_| (0..components).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
}

fn config(p: f64) -> TranslationSearchConfig {
    TranslationSearchConfig { p, ..TranslationSearchConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_extension_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0, r in 0.15f64..0.4) {
        let g = grid2(0.25, 8, r);
        let (f, h) = (noise(g.clone(), 3, seed), noise(g.clone(), 3, seed + 7919));
        let (sf, _) = extend_unconstrained(&f, 2.0).unwrap();
        let (sh, _) = extend_unconstrained(&h, 2.0).unwrap();
        let (combo, _) = extend_unconstrained(&f.linear_combination(a, &h, b), 2.0).unwrap();
        let expected = sf.linear_combination(a, &sh, b);
        prop_assert!(combo.max_difference(&expected) <= 1e-12 * (1.0 + a.abs() + b.abs()));
    }

    #[test]
    fn linear_extension_keeps_solid_values_and_the_hull(seed in 0u64..1000, r in 0.15f64..0.4) {
        let g = grid2(0.25, 8, r);
        let f = noise(g.clone(), 2, seed);
        let (s, diag) = extend_unconstrained(&f, 2.0).unwrap();
        prop_assert!(s.bit_equal_on(&f, &g.solid_mask()));
        // each component stays within the range of the input
        for k in 0..2 {
            let vals = (0..g.num_cells()).filter(|&i| g.is_solid(i)).map(|i| f.value(i)[k]);
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            for i in 0..g.num_cells() {
                let v = s.value(i)[k];
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
        prop_assert!(diag.convex_hull_violation <= 1e-12);
    }

    #[test]
    fn constrained_extension_lands_on_the_target(seed in 0u64..200, l in 2usize..4) {
        let g = grid2(0.25, 8, 0.3);
        let spec = ManifoldSpec::sphere(l).unwrap();
        let fixture = Fixture::smooth(l, 2, seed).unwrap();
        let f = fixture.field(g.clone()).unwrap();
        let cfg = TranslationSearchConfig { seed, ..config(1.5) };
        let (t, report) = extend_constrained(&f, &spec, &cfg).unwrap();
        prop_assert!(t.bit_equal_on(&f, &g.solid_mask()));
        prop_assert!(report.constraint_violation <= 1e-12);
        for i in 0..g.num_cells() {
            prop_assert!((norm(t.value(i)) - 1.0).abs() <= 1e-12);
        }
        let search = report.search.unwrap();
        prop_assert!(search.objective <= search.survivor_mean);
    }
}

/// The realized gradient constant of the constrained extension stays on a
/// plateau as the period shrinks in two dimensions.
#[test]
fn gradient_constant_is_uniform_in_epsilon_in_two_dimensions() {
    let spec = ManifoldSpec::sphere(2).unwrap();
    let fixture = Fixture::standard(2, 2).unwrap();
    let mut constants = Vec::new();
    for k in [4usize, 6, 8, 12, 16] {
        let g = grid2(1.0 / k as f64, 8, 0.3);
        let f = fixture.field(g).unwrap();
        let (_, report) = extend_constrained(&f, &spec, &config(1.5)).unwrap();
        constants.push(report.diagnostics.unwrap().c_grad.unwrap());
    }
    let max = constants.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = constants.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min <= 1.5, "{constants:?}");
}

/// At a fixed translation, `f_k -> f` in `W^{1,p}` gives `T f_k -> T f` strongly.
#[test]
fn constrained_extension_is_continuous_along_a_converging_sequence() {
    let g = grid2(0.125, 8, 0.3);
    let spec = ManifoldSpec::sphere(3).unwrap();
    let base = Fixture::standard(3, 2).unwrap();
    let f = base.field(g.clone()).unwrap();
    let (t, report) = extend_constrained(&f, &spec, &config(1.5)).unwrap();
    let fixed = TranslationSearchConfig { translation_override: Some(report.h.clone()), ..config(1.5) };
    let all = vec![true; g.num_cells()];
    let mut errors = Vec::new();
    for k in 1..=5 {
        let fk = base.perturbed(&[0.3, -0.2], &[0.1, 0.4], 1.0 / (k * k) as f64).field(g.clone()).unwrap();
        let (tk, _) = extend_constrained(&fk, &spec, &fixed).unwrap();
        let diff = tk.linear_combination(1.0, &t, -1.0);
        errors.push(w1p_norm(&diff, 1.5, &all, DiffPolicy::WithinRegion).unwrap());
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[4] < 0.1 * errors[0], "{errors:?}");
}

#[test]
fn constrained_extension_is_deterministic() {
    let g = grid2(0.125, 8, 0.3);
    let spec = ManifoldSpec::sphere(3).unwrap();
    let f = Fixture::standard(3, 2).unwrap().field(g.clone()).unwrap();
    let (a, ra) = extend_constrained(&f, &spec, &config(1.5)).unwrap();
    let (b, rb) = extend_constrained(&f, &spec, &config(1.5)).unwrap();
    assert_eq!(a.raw_values(), b.raw_values());
    assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
}

/// With the translation search in the loop the selected `h` is stable along
/// the sequence, so the searched operator converges too.
#[test]
fn translation_search_is_stable_along_a_converging_sequence() {
    let g = grid2(0.125, 8, 0.3);
    let spec = ManifoldSpec::sphere(3).unwrap();
    let base = Fixture::standard(3, 2).unwrap();
    let f = base.field(g.clone()).unwrap();
    let (t, report) = extend_constrained(&f, &spec, &config(1.5)).unwrap();
    let all = vec![true; g.num_cells()];
    let mut errors = Vec::new();
    for k in 1..=5 {
        let fk = base.perturbed(&[0.3, -0.2], &[0.1, 0.4], 1.0 / (k * k) as f64).field(g.clone()).unwrap();
        let (tk, rk) = extend_constrained(&fk, &spec, &config(1.5)).unwrap();
        assert_eq!(rk.h, report.h, "k = {k}");
        let diff = tk.linear_combination(1.0, &t, -1.0);
        errors.push(w1p_norm(&diff, 1.5, &all, DiffPolicy::WithinRegion).unwrap());
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}
