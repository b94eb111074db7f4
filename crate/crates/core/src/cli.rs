//! Command orchestration: config in, reports out, exit status back.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::json;

use crate::analysis::sweep::{run_sweep, SweepSetup};
use crate::analysis::vortex::{default_vortex_descent, vortex_energy_study, BoundaryData};
use crate::config::{ConfigError, RunConfig};
use crate::error::Error;
use crate::extension::constrained::{extend_constrained, extend_constrained_retracted};
use crate::extension::translation::TranslationSearchConfig;
use crate::field::VectorField;
use crate::fixtures::Fixture;
use crate::manifold::ManifoldKind;
use crate::micromag::{homogenization_study_with, EnergyConfig};
use crate::microcell::make_microcell;
use crate::perforation::{build_grid, PerforatedGrid, Variant};
use crate::selftest::run_selftest;

pub const DEFAULT_SEED: u64 = 42;
/// Constraint tolerance checked on every produced extension.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-12;
/// Allowed spread of the energies of degree-zero vortex data.
pub const DEGREE_ZERO_VARIATION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    BuildDomain,
    Extend,
    Sweep,
    Vortex,
    Micromag,
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    ContractViolation = 1,
    ConfigurationError = 2,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Contract(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidShape(_)
            | Error::InvalidGrid(_)
            | Error::ResolutionTooCoarse { .. }
            | Error::EpsilonTooLarge { .. }
            | Error::EpsilonMarginViolation { .. }
            | Error::WrongVariant { .. }
            | Error::DimensionMismatch { .. }
            | Error::TargetNotCovered => Failure::Config(e.to_string()),
            other => Failure::Contract(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

struct Run<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    seed: u64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Contract(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Config(format!("cannot write {}: {e}", path.display()))
}

/// Records a failed invariant by name.
fn require(name: &str, ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(())
    } else {
        log::error!("invariant violated: {name} ({detail})");
        Err(Failure::Contract(format!("{name}: {detail}")))
    }
}

impl Run<'_> {
    fn grid(&self, epsilon: f64, variant: Variant) -> Result<Arc<PerforatedGrid>, Failure> {
        let c = self.cfg;
        let cell = make_microcell(c.hole.clone(), c.domain.dim())?;
        let grid = build_grid(&cell, &c.domain, epsilon, c.lambda, c.spacing(epsilon), variant)?.with_mu(c.mu);
        Ok(Arc::new(grid))
    }

    fn search(&self) -> TranslationSearchConfig {
        let c = self.cfg;
        TranslationSearchConfig {
            candidate_count: c.candidates,
            guard_eta: c.guard_eta,
            mollify_radius: c.mollify_radius,
            seed: self.seed,
            p: c.p,
            diagnostic_mode: c.diagnostic_mode,
            translation_override: c.translation.clone(),
        }
    }

    fn fixture(&self) -> Result<Fixture, Failure> {
        let target = &self.cfg.target;
        if target.kind == ManifoldKind::FlatTorus {
            if !self.cfg.diagnostic_mode {
                return Err(Error::TargetNotCovered.into());
            }
            return Err(Failure::Config("no built-in fixture maps into the flat torus".into()));
        }
        Ok(Fixture::named(self.cfg.fixture, target.ambient_dim, self.cfg.domain.dim())?)
    }

    fn build_domain(&self) -> Outcome {
        let c = self.cfg;
        let grid = self.grid(c.epsilon, c.variant)?;
        let summary = grid.summary();
        let warn = c.epsilon > grid.epsilon_threshold();
        if warn {
            log::warn!("WARN epsilon = {} exceeds the threshold {:.5}", c.epsilon, grid.epsilon_threshold());
        }
        let retracted = match (c.variant, c.margin) {
            (Variant::General, Some(m)) => Some(grid.general_hole_measure_in_retract(m)?),
            _ => None,
        };
        let holes_path = self.out.join("holes.csv");
        let mut text = (0..grid.dim()).map(|k| format!("z{k}")).collect::<Vec<_>>().join(",") + "\n";
        for z in grid.holes() {
            text += &(z.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n");
        }
        fs::write(&holes_path, text).map_err(io_failure(&holes_path))?;
        if let Some(r) = &retracted {
            if r.bound_applies {
                require("interior hole-measure bound", r.bound_holds, format!("{} > {}", r.measure, r.interior_bound))?;
            }
        }
        if let Some(ratio) = summary.measure_ratio {
            if !warn {
                let bound = grid.measure_ratio_bound();
                require("measure ratio bound", ratio <= bound, format!("{ratio} > {bound}"))?;
            }
        }
        write_json(
            &self.out.join("report.json"),
            &json!({
                "command": "build-domain",
                "seed": self.seed,
                "grid": summary,
                "measureRatioBound": grid.measure_ratio_bound(),
                "warn": warn,
                "retractedHoleMeasure": retracted,
            }),
        )
    }

    fn extend(&self) -> Outcome {
        let c = self.cfg;
        let fixture = self.fixture()?;
        let grid = self.grid(c.epsilon, c.variant)?;
        let f = fixture.field(grid.clone())?;
        let tcfg = self.search();
        let (out, report) = match c.variant {
            Variant::Safe => extend_constrained(&f, &c.target, &tcfg)?,
            Variant::General => {
                extend_constrained_retracted(&f, &c.target, &tcfg, c.margin.unwrap_or(c.mu * c.epsilon))?
            }
        };
        let input_path = self.out.join("input.field");
        f.write_binary(&input_path).map_err(io_failure(&input_path))?;
        let out_path = self.out.join("extended.field");
        out.write_binary(&out_path).map_err(io_failure(&out_path))?;
        let layer = if grid.dim() == 3 { grid.dims()[2] / 2 } else { 0 };
        out.write_slice_csv(&self.out.join("extended-slice.csv"), layer)?;
        write_json(
            &self.out.join("report.json"),
            &json!({
                "command": "extend",
                "seed": self.seed,
                "grid": grid.summary(),
                "fixture": fixture,
                "extension": report,
            }),
        )?;
        let produced: Vec<bool> = (0..grid.num_cells()).map(|i| out.is_defined(i) && grid.is_solid(i)).collect();
        require("identity on the solid part", out.bit_equal_on(&f, &produced), "SOLID cells changed".into())?;
        require(
            "manifold constraint",
            report.constraint_violation <= CONSTRAINT_TOLERANCE,
            format!("violation {:e}", report.constraint_violation),
        )
    }

    fn sweep(&self) -> Outcome {
        let c = self.cfg;
        if c.variant != Variant::Safe {
            return Err(Error::WrongVariant { expected: "safe" }.into());
        }
        let fixture = self.fixture()?;
        let setup = SweepSetup {
            domain: c.domain.clone(),
            hole: c.hole.clone(),
            epsilons: c.epsilons.clone(),
            lambda: c.lambda,
            cells_per_epsilon: c.resolution,
        };
        let report = run_sweep(&setup, &fixture, &c.target, &self.search())?;
        report.write(self.out)?;
        write_json(
            &self.out.join("report.json"),
            &json!({
                "command": "sweep",
                "seed": self.seed,
                "sweep": report,
                "cFuncPlateau": report.c_func_plateau(),
                "cGradPlateau": report.c_grad_plateau(),
            }),
        )?;
        let worst = report.rows.iter().map(|r| r.constraint_violation).fold(0.0, f64::max);
        require("manifold constraint", worst <= CONSTRAINT_TOLERANCE, format!("violation {worst:e}"))
    }

    fn vortex(&self) -> Outcome {
        let c = self.cfg;
        let degree = c.vortex_degree;
        // symmetric multi-degree configurations are unstable; a small seeded
        // kick lets them split
        let perturbation = if degree.abs() >= 2 { 0.3 } else { 0.0 };
        let study = vortex_energy_study(
            &c.vortex_resolutions,
            c.p,
            BoundaryData::Winding { degree },
            &default_vortex_descent(),
            perturbation,
            self.seed,
        )?;
        let path = self.out.join("vortex.csv");
        let mut text = String::from("n,energy,ansatzEnergy,iterations,residual,boundaryWinding,interiorWinding\n");
        for r in &study.rows {
            text += &format!(
                "{},{},{},{},{},{},{}\n",
                r.n, r.energy, r.ansatz_energy, r.iterations, r.residual, r.boundary_winding, r.interior_winding
            );
        }
        fs::write(&path, text).map_err(io_failure(&path))?;
        write_json(&self.out.join("report.json"), &json!({ "command": "vortex", "seed": self.seed, "study": study }))?;
        for r in &study.rows {
            require(
                "boundary degree",
                r.boundary_winding == degree as i64,
                format!("winding {} at n = {}", r.boundary_winding, r.n),
            )?;
            require("monotone descent", r.monotone, format!("energy increased at n = {}", r.n))?;
        }
        match degree {
            0 => require(
                "bounded degree-zero energy",
                study.relative_variation < DEGREE_ZERO_VARIATION,
                format!("variation {}", study.relative_variation),
            ),
            1 | -1 => {
                require("vortex energy increases", study.increasing, format!("{:?}", study.increments))?;
                require("logarithmic growth", study.log_law_holds, format!("{:?} vs {:?}", study.increments, study.log_law))
            }
            _ => require("vortex energy increases", study.increasing, format!("{:?}", study.increments)),
        }
    }

    fn micromag(&self) -> Outcome {
        let c = self.cfg;
        if c.variant != Variant::Safe {
            return Err(Error::WrongVariant { expected: "safe" }.into());
        }
        if c.target.kind != ManifoldKind::Sphere || c.target.ambient_dim != c.domain.dim() {
            return Err(Failure::Config(format!(
                "micromagnetics needs target sphere {} for d = {}",
                c.domain.dim(),
                c.domain.dim()
            )));
        }
        let energy_cfg = EnergyConfig {
            exchange: c.exchange,
            anisotropy_axis: c.anisotropy_axis.clone(),
            anisotropy_weight: c.anisotropy_weight,
            max_iters: c.max_iters,
            step_size: c.step_size,
            grad_tolerance: c.grad_tolerance,
            collar: c.collar,
        };
        let grids = c.epsilons.iter().map(|&e| self.grid(e, Variant::Safe)).collect::<Result<Vec<_>, _>>()?;
        let mut k = 0;
        let study = homogenization_study_with(&grids, &energy_cfg, &c.target, &self.search(), self.seed, |m, ext| {
            k += 1;
            let write = |f: &VectorField, name: String| {
                let path = self.out.join(name);
                f.write_binary(&path).map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display())))
            };
            write(m, format!("minimizer-{k}.field"))?;
            write(ext, format!("extension-{k}.field"))
        })?;
        study.write_csv(&self.out.join("homogenization.csv"))?;
        write_json(&self.out.join("report.json"), &json!({ "command": "micromag", "seed": self.seed, "study": study }))?;
        for r in &study.rows {
            if !r.converged {
                log::warn!("WARN descent at epsilon = {} stopped with residual {:e}", r.epsilon, r.residual);
            }
        }
        require("monotone energy descent", study.all_monotone, "energy increased".into())?;
        require("manifold constraint", study.constraint_holds, "extension leaves the sphere".into())?;
        require("uniform W12 bound", study.bounded, format!("max/min {}", study.w12_max_over_min))
    }

    fn selftest(&self) -> Outcome {
        let report = run_selftest(self.seed);
        write_json(&self.out.join("selftest.json"), &report)?;
        println!("{} passed invariants, {} failed", report.passed, report.failed);
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        require("selftest suite", failed.is_empty(), failed.join("; "))
    }
}

/// Runs one command and returns its exit status.
pub fn run(command: Command, config: Option<&Path>, out: &Path, seed: Option<u64>) -> Exit {
    let seed = seed.unwrap_or(DEFAULT_SEED);
    let result = (|| -> Outcome {
        fs::create_dir_all(out).map_err(|e| Failure::Config(format!("cannot create {}: {e}", out.display())))?;
        if command == Command::Selftest && config.is_none() {
            let cfg: RunConfig = SELFTEST_CONFIG.parse()?;
            return Run { cfg: &cfg, out, seed }.selftest();
        }
        let path: PathBuf = config.ok_or_else(|| Failure::Config("--config is required".into()))?.to_path_buf();
        let cfg = RunConfig::load(&path)?;
        let resolved = out.join("resolved.cfg");
        fs::write(&resolved, cfg.resolved_text()).map_err(io_failure(&resolved))?;
        let run = Run { cfg: &cfg, out, seed };
        match command {
            Command::BuildDomain => run.build_domain(),
            Command::Extend => run.extend(),
            Command::Sweep => run.sweep(),
            Command::Vortex => run.vortex(),
            Command::Micromag => run.micromag(),
            Command::Selftest => run.selftest(),
        }
    })();
    match result {
        Ok(()) => Exit::Success,
        Err(Failure::Config(msg)) => {
            log::error!("configuration error: {msg}");
            eprintln!("configuration error: {msg}");
            Exit::ConfigurationError
        }
        Err(Failure::Contract(msg)) => {
            log::error!("contract violation: {msg}");
            eprintln!("contract violation: {msg}");
            Exit::ContractViolation
        }
    }
}

/// Configuration used by `selftest` when none is given.
const SELFTEST_CONFIG: &str = "domain = 1 1\nepsilon = 0.125\nhole = disk 0 0 0.3\ntarget = sphere 2\n";
