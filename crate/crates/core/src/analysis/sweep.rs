//! Epsilon sweeps of the constrained extension and the plateau statistics
//! of the realized constants.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extension::constrained::extend_constrained;
use crate::extension::translation::TranslationSearchConfig;
use crate::fixtures::Fixture;
use crate::manifold::ManifoldSpec;
use crate::microcell::{make_microcell, HoleShape};
use crate::perforation::{build_grid, BoxDomain, PerforatedGrid, Variant};

/// Geometry shared by every row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepSetup {
    pub domain: BoxDomain,
    pub hole: HoleShape,
    pub epsilons: Vec<f64>,
    pub lambda: f64,
    /// Grid cells per period, so `spacing = epsilon / cells_per_epsilon`.
    pub cells_per_epsilon: usize,
}

impl SweepSetup {
    pub fn grid(&self, epsilon: f64) -> Result<PerforatedGrid> {
        let cell = make_microcell(self.hole.clone(), self.domain.dim())?;
        build_grid(&cell, &self.domain, epsilon, self.lambda, epsilon / self.cells_per_epsilon as f64, Variant::Safe)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub epsilon: f64,
    pub holes: usize,
    pub measure_ratio: f64,
    pub epsilon_threshold: f64,
    pub c_func: f64,
    /// `None` (written as NA) when the input gradient vanishes.
    pub c_grad: Option<f64>,
    pub constraint_violation: f64,
    pub pre_snap_mismatch: f64,
    /// `epsilon` exceeds the measure-ratio threshold.
    pub warn: bool,
    #[serde(skip)]
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepReport {
    pub fixture_id: String,
    pub target: String,
    pub p: f64,
    pub d: usize,
    pub seed: u64,
    pub setup: SweepSetup,
    pub fixture: Fixture,
    pub search: TranslationSearchConfig,
    /// Sorted by decreasing epsilon.
    pub rows: Vec<SweepRow>,
}

/// Spread and trend of a realized constant across a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Plateau {
    pub max_over_min: f64,
    /// Least-squares slope of the constant against `1/epsilon`.
    pub slope: f64,
    pub slope_times_range: f64,
    pub mean: f64,
    pub holds: bool,
}

/// Largest admissible ratio between the extreme values of a constant.
pub const PLATEAU_FACTOR: f64 = 1.5;
/// `slope * range(1/epsilon)` must stay below this fraction of the mean.
pub const TREND_FRACTION: f64 = 0.1;

/// Plateau statistics of `(epsilon, c)` pairs.
pub fn plateau(points: &[(f64, f64)]) -> Plateau {
    let xs: Vec<f64> = points.iter().map(|(e, _)| 1.0 / e).collect();
    let ys: Vec<f64> = points.iter().map(|(_, c)| *c).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if den > 0.0 { num / den } else { 0.0 };
    let range = xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min);
    let max = ys.iter().cloned().fold(f64::MIN, f64::max);
    let min = ys.iter().cloned().fold(f64::MAX, f64::min);
    let max_over_min = max / min;
    let slope_times_range = slope * range;
    Plateau {
        max_over_min,
        slope,
        slope_times_range,
        mean: my,
        holds: max_over_min <= PLATEAU_FACTOR && slope_times_range < TREND_FRACTION * my,
    }
}

/// Runs the constrained extension of `fixture` for every epsilon of `setup`.
pub fn run_sweep(
    setup: &SweepSetup,
    fixture: &Fixture,
    spec: &ManifoldSpec,
    cfg: &TranslationSearchConfig,
) -> Result<SweepReport> {
    if fixture.l != spec.ambient_dim {
        return Err(Error::DimensionMismatch { expected: spec.ambient_dim, got: fixture.l });
    }
    let mut epsilons = setup.epsilons.clone();
    epsilons.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(epsilons.len());
    for &epsilon in &epsilons {
        let grid = Arc::new(setup.grid(epsilon)?);
        let f = fixture.field(grid.clone())?;
        let (_, report) = extend_constrained(&f, spec, cfg)?;
        let diagnostics = report.diagnostics.ok_or(Error::EmptyRegion)?;
        let threshold = grid.epsilon_threshold();
        let warn = epsilon > threshold;
        if warn {
            log::warn!("WARN epsilon = {epsilon} exceeds the threshold {threshold:.5}");
        }
        log::info!("sweep {} epsilon = {epsilon}: cFunc {:.4} in {:.0} ms", fixture.id, diagnostics.c_func, report.runtime_ms);
        rows.push(SweepRow {
            epsilon,
            holes: grid.holes().len(),
            measure_ratio: grid.measure_ratio()?,
            epsilon_threshold: threshold,
            c_func: diagnostics.c_func,
            c_grad: diagnostics.c_grad,
            constraint_violation: report.constraint_violation,
            pre_snap_mismatch: report.pre_snap_mismatch,
            warn,
            runtime_ms: report.runtime_ms,
        });
    }
    Ok(SweepReport {
        fixture_id: fixture.id.clone(),
        target: spec.to_string(),
        p: cfg.p,
        d: setup.domain.dim(),
        seed: cfg.seed,
        setup: setup.clone(),
        fixture: fixture.clone(),
        search: cfg.clone(),
        rows,
    })
}

impl SweepReport {
    pub fn c_func_plateau(&self) -> Plateau {
        plateau(&self.rows.iter().map(|r| (r.epsilon, r.c_func)).collect::<Vec<_>>())
    }

    /// `None` if some row has no gradient constant.
    pub fn c_grad_plateau(&self) -> Option<Plateau> {
        let pts: Option<Vec<(f64, f64)>> = self.rows.iter().map(|r| r.c_grad.map(|c| (r.epsilon, c))).collect();
        pts.map(|p| plateau(&p))
    }

    pub fn file_stem(&self) -> String {
        format!("sweep-{}-seed{}", self.fixture_id, self.seed)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidConfig(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record([
            "epsilon",
            "holes",
            "measureRatio",
            "epsilonThreshold",
            "cFunc",
            "cGrad",
            "constraintViolation",
            "preSnapMismatch",
            "warn",
        ])
        .map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.epsilon.to_string(),
                r.holes.to_string(),
                r.measure_ratio.to_string(),
                r.epsilon_threshold.to_string(),
                r.c_func.to_string(),
                r.c_grad.map_or_else(|| "NA".to_string(), |c| c.to_string()),
                r.constraint_violation.to_string(),
                r.pre_snap_mismatch.to_string(),
                if r.warn { "WARN".to_string() } else { String::new() },
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display())))
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        let csv_path = dir.join(format!("{}.csv", self.file_stem()));
        let json_path = dir.join(format!("{}.json", self.file_stem()));
        self.write_csv(&csv_path)?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        std::fs::write(&json_path, json + "\n")
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", json_path.display())))?;
        Ok((csv_path, json_path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(epsilons: Vec<f64>) -> SweepSetup {
        SweepSetup {
            domain: BoxDomain::unit(2),
            hole: HoleShape::disk(&[0.0, 0.0], 0.3),
            epsilons,
            lambda: 0.05,
            cells_per_epsilon: 8,
        }
    }

    #[test]
    fn constant_fixture_matches_the_volume_ratio() {
        let s = setup(vec![1.0 / 16.0, 1.0 / 8.0, 1.0 / 32.0]);
        let spec = ManifoldSpec::sphere(3).unwrap();
        let cfg = TranslationSearchConfig { p: 1.5, ..Default::default() };
        let report = run_sweep(&s, &Fixture::constant(3, 2).unwrap(), &spec, &cfg).unwrap();
        assert_eq!(report.rows.iter().map(|r| r.epsilon).collect::<Vec<_>>(), vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]);
        for r in &report.rows {
            let grid = s.grid(r.epsilon).unwrap();
            let solid = grid.count(crate::perforation::CellLabel::Solid) as f64 * grid.cell_volume();
            let expected = (1.0 / solid).powf(1.0 / 1.5);
            assert!((r.c_func - expected).abs() < 1e-12 * expected, "{} vs {expected}", r.c_func);
            assert_eq!(r.c_grad, None);
            assert!(r.constraint_violation < 1e-12);
        }
    }

    #[test]
    fn no_admissible_holes_gives_unit_constant() {
        // a period wider than the domain leaves no hole far enough from the boundary
        let mut s = setup(vec![0.25]);
        s.domain = BoxDomain::new(&[0.375, 0.375]).unwrap();
        s.lambda = 0.3;
        let spec = ManifoldSpec::sphere(2).unwrap();
        let cfg = TranslationSearchConfig { p: 1.5, ..Default::default() };
        let report = run_sweep(&s, &Fixture::standard(2, 2).unwrap(), &spec, &cfg).unwrap();
        assert_eq!(report.rows[0].holes, 0);
        assert_eq!(report.rows[0].measure_ratio, 0.0);
        assert_eq!(report.rows[0].c_func, 1.0);
        assert!(report.rows[0].warn);
    }

    #[test]
    fn plateau_statistics() {
        let flat = plateau(&[(0.125, 1.0), (0.0625, 1.0), (0.03125, 1.0)]);
        assert_eq!(flat.max_over_min, 1.0);
        assert_eq!(flat.slope, 0.0);
        assert!(flat.holds);
        // c = 1 + 0.01/eps grows with 1/eps: slope 0.01
        let growing = plateau(&[(0.125, 1.08), (0.0625, 1.16), (0.03125, 1.32)]);
        assert!((growing.slope - 0.01).abs() < 1e-12);
        assert!(!growing.holds);
    }

    #[test]
    fn reports_are_deterministic_and_written() {
        let s = setup(vec![1.0 / 8.0, 1.0 / 12.0]);
        let spec = ManifoldSpec::sphere(3).unwrap();
        let cfg = TranslationSearchConfig { p: 1.5, candidate_count: 16, ..Default::default() };
        let fx = Fixture::standard(3, 2).unwrap();
        let a = run_sweep(&s, &fx, &spec, &cfg).unwrap();
        let b = run_sweep(&s, &fx, &spec, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let (csv_path, json_path) = a.write(dir.path()).unwrap();
        assert!(csv_path.ends_with("sweep-standard-s2-seed42.csv"));
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("epsilon,holes,measureRatio"));
        let back: SweepReport = serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
        assert_eq!(back.rows.len(), 2);
    }
}
