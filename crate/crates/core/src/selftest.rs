//! Built-in invariant suite run by the `selftest` command.
//!
//! Every check is deterministic given the seed and prints no timings, so
//! two runs produce byte-identical reports.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::degree::{sample_loop, winding_number};
use crate::analysis::norms::{lp_norm, w1p_seminorm};
use crate::analysis::sweep::{run_sweep, SweepSetup};
use crate::analysis::vortex::{default_vortex_descent, vortex_energy_study, BoundaryData};
use crate::error::Result;
use crate::extension::constrained::extend_constrained;
use crate::extension::translation::{select_translation, TranslationSearchConfig};
use crate::extension::unconstrained::extend_unconstrained;
use crate::field::VectorField;
use crate::fixtures::Fixture;
use crate::manifold::{dist, norm, ManifoldSpec};
use crate::micromag::{gradient_check, minimize, random_unit_field, Collar, EnergyConfig};
use crate::microcell::{make_microcell, HoleShape};
use crate::perforation::{build_grid, BoxDomain, PerforatedGrid, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelftestReport {
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<CheckResult>,
}

fn grid2(epsilon: f64, n: usize) -> Result<Arc<PerforatedGrid>> {
    let cell = make_microcell(HoleShape::disk(&[0.0, 0.0], 0.3), 2)?;
    Ok(Arc::new(build_grid(&cell, &BoxDomain::unit(2), epsilon, 0.05, epsilon / n as f64, Variant::Safe)?))
}

fn grid3(epsilon: f64, n: usize) -> Result<Arc<PerforatedGrid>> {
    let cell = make_microcell(HoleShape::disk(&[0.0; 3], 0.25), 3)?;
    Ok(Arc::new(build_grid(&cell, &BoxDomain::unit(3), epsilon, 0.05, epsilon / n as f64, Variant::Safe)?))
}

type Check = fn(u64) -> Result<(bool, String)>;

fn monte_carlo_volume_fraction(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (hole, d) in [
        (HoleShape::disk(&[0.0, 0.0], 0.3), 2),
        (HoleShape::disk(&[0.0; 3], 0.25), 3),
        (HoleShape::cuboid(&[0.1, 0.0], &[0.2, 0.3]), 2),
    ] {
        let cell = make_microcell(hole, d)?;
        let (estimate, se) = cell.monte_carlo_q0(200_000, &mut rng);
        worst = worst.max((estimate - cell.q0).abs() / se);
    }
    Ok((worst <= 3.0, format!("largest deviation {worst:.3} standard errors")))
}

fn measure_ratio_bound(_: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut bound = 0.0;
    for k in [8.0, 12.0, 16.0, 24.0, 32.0] {
        let g = grid2(1.0 / k, 8)?;
        worst = worst.max(g.measure_ratio()?);
        bound = g.measure_ratio_bound();
    }
    Ok((worst <= bound, format!("largest ratio {worst:.6} against {bound:.6}")))
}

fn extension_identity_and_constraint(seed: u64) -> Result<(bool, String)> {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (l, p) in [(2usize, 1.5), (3, 1.5)] {
        let g = grid2(0.125, 8)?;
        let f = Fixture::standard(l, 2)?.field(g.clone())?;
        let cfg = TranslationSearchConfig { p, seed, ..Default::default() };
        let (out, report) = extend_constrained(&f, &ManifoldSpec::sphere(l)?, &cfg)?;
        ok &= out.bit_equal_on(&f, &g.solid_mask());
        worst = worst.max(report.constraint_violation);
    }
    Ok((ok && worst <= 1e-12, format!("SOLID cells bit-equal: {ok}; constraint violation {worst:e}")))
}

fn linearity_and_convex_hull(seed: u64) -> Result<(bool, String)> {
    let g = grid2(0.125, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = || VectorField::on_solid(g.clone(), 3, |_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let (u, v) = (random(), random());
    let (a, b) = (0.7, -1.3);
    let (eu, _) = extend_unconstrained(&u, 2.0)?;
    let (ev, _) = extend_unconstrained(&v, 2.0)?;
    let (ecomb, _) = extend_unconstrained(&u.linear_combination(a, &v, b), 2.0)?;
    let linear = ecomb.max_difference(&eu.linear_combination(a, &ev, b));
    let sphere = Fixture::standard(3, 2)?.field(g.clone())?;
    let (es, _) = extend_unconstrained(&sphere, 2.0)?;
    let hull = (0..g.num_cells()).map(|i| norm(es.value(i))).fold(0.0, f64::max);
    Ok((linear <= 1e-12 && hull <= 1.0 + 1e-12, format!("linearity defect {linear:e}; largest norm {hull:.15}")))
}

fn retraction_gradient_law(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for l in [2, 3] {
        let spec = ManifoldSpec::sphere(l)?;
        for _ in 0..1000 {
            let y: Vec<f64> = (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect();
            worst = worst.max((spec.retraction_gradient_norm(&y)? * spec.singular_distance(&y) - 1.0).abs());
        }
    }
    Ok((worst <= 1e-12, format!("largest defect {worst:e}")))
}

fn inverse_round_trip(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for l in [2, 3] {
        let spec = ManifoldSpec::sphere(l)?;
        for _ in 0..1000 {
            let z = spec.random_point(&mut rng);
            let dir = spec.random_point(&mut rng);
            let r = spec.sigma / 2.0 * rng.gen::<f64>();
            let h: Vec<f64> = dir.iter().map(|x| r * x).collect();
            let back = spec.inverse_on_manifold(&h, &spec.retract_translated(&h, &z)?)?;
            worst = worst.max(dist(&back, &z));
        }
    }
    Ok((worst <= 1e-10, format!("largest round-trip error {worst:e}")))
}

fn translation_contract(seed: u64) -> Result<(bool, String)> {
    let g = grid2(0.125, 8)?;
    let spec = ManifoldSpec::sphere(3)?;
    let all = vec![true; g.num_cells()];
    let mut ok = true;
    for k in 0..4 {
        let f = Fixture::smooth(3, 2, seed + k)?.field(g.clone())?;
        let (ext, _) = extend_unconstrained(&f, 1.5)?;
        let cfg = TranslationSearchConfig { seed: seed + k, p: 1.5, ..Default::default() };
        let choice = select_translation(&ext, &spec, &cfg, &all)?;
        ok &= choice.objective <= choice.survivor_mean;
    }
    Ok((ok, format!("objective <= survivor mean on 4 runs: {ok}")))
}

fn winding_numbers(_: u64) -> Result<(bool, String)> {
    let identity = winding_number(&sample_loop(|x| *x, [0.0, 0.0], 1.0, 64))?;
    let cube = winding_number(&sample_loop(
        |x| {
            let t = 3.0 * x[1].atan2(x[0]);
            [t.cos(), t.sin()]
        },
        [0.0, 0.0],
        1.0,
        64,
    ))?;
    let constant = winding_number(&sample_loop(|_| [1.0, 0.0], [0.0, 0.0], 1.0, 64))?;
    Ok((identity == 1 && cube == 3 && constant == 0, format!("identity {identity}, cube {cube}, constant {constant}")))
}

fn vortex_growth(seed: u64) -> Result<(bool, String)> {
    let study = vortex_energy_study(&[16, 32], 2.0, BoundaryData::Winding { degree: 1 }, &default_vortex_descent(), 0.0, seed)?;
    Ok((
        study.increasing && study.log_law_holds,
        format!("increment {:.6} against log law {:.6}", study.increments[0], study.log_law[0]),
    ))
}

fn norm_homogeneity_and_triangle(seed: u64) -> Result<(bool, String)> {
    let g = grid2(0.125, 8)?;
    let solid = g.solid_mask();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = || VectorField::on_solid(g.clone(), 2, |_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let (u, v) = (random(), random());
    let mut worst: f64 = 0.0;
    for norm_fn in [lp_norm as fn(&VectorField, f64, &[bool]) -> Result<f64>, w1p_seminorm] {
        let nu = norm_fn(&u, 2.0, &solid)?;
        let nv = norm_fn(&v, 2.0, &solid)?;
        let scaled = norm_fn(&u.linear_combination(-2.5, &v, 0.0), 2.0, &solid)?;
        let sum = norm_fn(&u.linear_combination(1.0, &v, 1.0), 2.0, &solid)?;
        worst = worst.max((scaled - 2.5 * nu).abs() / nu).max((sum - nu - nv).max(0.0));
    }
    Ok((worst <= 1e-12, format!("largest defect {worst:e}")))
}

fn micromag_descent(seed: u64) -> Result<(bool, String)> {
    let g = grid3(0.5, 8)?;
    let cfg = EnergyConfig { anisotropy_weight: 10.0, collar: Collar::Wall, ..Default::default() };
    let gradient = gradient_check(&random_unit_field(g.clone(), 3, seed), &cfg, 100, seed)?;
    let (_, stats) = minimize(g, &cfg, seed)?;
    let ok = gradient <= 1e-5 && stats.monotone() && stats.max_constraint_violation <= 1e-12;
    Ok((
        ok,
        format!(
            "gradient mismatch {gradient:e}; {} monotone iterations; constraint {:e}",
            stats.iterations, stats.max_constraint_violation
        ),
    ))
}

fn sweep_determinism(seed: u64) -> Result<(bool, String)> {
    let setup = SweepSetup {
        domain: BoxDomain::unit(2),
        hole: HoleShape::disk(&[0.0, 0.0], 0.3),
        epsilons: vec![0.125, 1.0 / 16.0],
        lambda: 0.05,
        cells_per_epsilon: 8,
    };
    let spec = ManifoldSpec::sphere(3)?;
    let cfg = TranslationSearchConfig { seed, p: 1.5, ..Default::default() };
    let fixture = Fixture::standard(3, 2)?;
    let a = serde_json::to_string(&run_sweep(&setup, &fixture, &spec, &cfg)?).unwrap_or_default();
    let b = serde_json::to_string(&run_sweep(&setup, &fixture, &spec, &cfg)?).unwrap_or_default();
    Ok((!a.is_empty() && a == b, format!("{} bytes, identical: {}", a.len(), a == b)))
}

const CHECKS: &[(&str, Check)] = &[
    ("volume fraction matches Monte Carlo", monte_carlo_volume_fraction),
    ("measure ratio below (1+q0)/q1", measure_ratio_bound),
    ("extension identity and sphere constraint", extension_identity_and_constraint),
    ("unconstrained linearity and convex hull", linearity_and_convex_hull),
    ("retraction gradient times distance equals one", retraction_gradient_law),
    ("inverse round trip on the sphere", inverse_round_trip),
    ("selected translation beats the survivor mean", translation_contract),
    ("winding numbers of model loops", winding_numbers),
    ("vortex energy grows logarithmically", vortex_growth),
    ("norm homogeneity and triangle inequality", norm_homogeneity_and_triangle),
    ("micromagnetic gradient and monotone descent", micromag_descent),
    ("sweep reports are reproducible", sweep_determinism),
];

pub fn run_selftest(seed: u64) -> SelftestReport {
    let mut checks = Vec::with_capacity(CHECKS.len());
    for (name, check) in CHECKS {
        let (passed, detail) = match check(seed) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if passed {
            log::info!("selftest PASS {name}: {detail}");
        } else {
            log::error!("selftest FAIL {name}: {detail}");
        }
        checks.push(CheckResult { name: name.to_string(), passed, detail });
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    SelftestReport { seed, passed, failed: checks.len() - passed, checks }
}
