//! Flat `key = value` run configuration with strict keys.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::fixtures::FixtureName;
use crate::manifold::ManifoldSpec;
use crate::micromag::Collar;
use crate::microcell::HoleShape;
use crate::perforation::{BoxDomain, Variant, MIN_CELLS_PER_EPSILON};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice (first on line {first})")]
    DuplicateKey { line: usize, key: String, first: usize },
    #[error("line {line}: `{key} = {value}` is not {expected}")]
    TypeMismatch { line: usize, key: String, value: String, expected: String },
    #[error("missing required key `{key}`")]
    MissingRequired { key: String },
}

/// Every accepted key with its default; `None` marks a required key.
const KEYS: &[(&str, Option<&str>)] = &[
    ("domain", None),
    ("epsilon", None),
    ("hole", None),
    ("target", None),
    ("epsilons", Some("auto")),
    ("lambda", Some("0.05")),
    ("mu", Some("1")),
    ("resolution", Some("8")),
    ("variant", Some("safe")),
    ("p", Some("2")),
    ("fixture", Some("standard")),
    ("candidates", Some("64")),
    ("guard_eta", Some("auto")),
    ("mollify_radius", Some("2")),
    ("diagnostic_mode", Some("false")),
    ("translation", Some("auto")),
    ("margin", Some("auto")),
    ("exchange", Some("1")),
    ("anisotropy_axis", Some("auto")),
    ("anisotropy_weight", Some("0")),
    ("max_iters", Some("20000")),
    ("step_size", Some("auto")),
    ("grad_tolerance", Some("1e-8")),
    ("collar", Some("none")),
    ("vortex_resolutions", Some("32 64 128")),
    ("vortex_degree", Some("1")),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub domain: BoxDomain,
    pub epsilon: f64,
    pub hole: HoleShape,
    pub target: ManifoldSpec,
    /// Sweep values, sorted by decreasing epsilon; `[epsilon]` when unset.
    pub epsilons: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
    /// Grid cells per period.
    pub resolution: usize,
    pub variant: Variant,
    pub p: f64,
    pub fixture: FixtureName,
    pub candidates: usize,
    pub guard_eta: Option<f64>,
    pub mollify_radius: usize,
    pub diagnostic_mode: bool,
    pub translation: Option<Vec<f64>>,
    /// Retraction margin for the general variant; `mu * epsilon` when unset.
    pub margin: Option<f64>,
    pub exchange: f64,
    pub anisotropy_axis: Vec<f64>,
    pub anisotropy_weight: f64,
    pub max_iters: usize,
    pub step_size: Option<f64>,
    pub grad_tolerance: f64,
    pub collar: Collar,
    pub vortex_resolutions: Vec<usize>,
    pub vortex_degree: i32,
    /// `(key, value, from default)` in the canonical key order.
    #[serde(skip)]
    pub resolved: Vec<(String, String, bool)>,
}

struct Entry {
    value: String,
    line: usize,
    default: bool,
}

struct Raw {
    entries: Vec<(&'static str, Entry)>,
}

impl Raw {
    fn get(&self, key: &str) -> &Entry {
        &self.entries.iter().find(|(k, _)| *k == key).expect("every key is resolved").1
    }

    fn parse<T: FromStr>(&self, key: &str, expected: &str) -> Result<T, ConfigError> {
        let e = self.get(key);
        e.value.parse().map_err(|_| mismatch(key, e, expected))
    }

    fn list<T: FromStr>(&self, key: &str, expected: &str) -> Result<Vec<T>, ConfigError> {
        let e = self.get(key);
        let items: Result<Vec<T>, _> = e.value.split_whitespace().map(str::parse).collect();
        match items {
            Ok(v) if !v.is_empty() => Ok(v),
            _ => Err(mismatch(key, e, expected)),
        }
    }

    fn is_auto(&self, key: &str) -> bool {
        self.get(key).value == "auto"
    }

    fn optional<T: FromStr>(&self, key: &str, expected: &str) -> Result<Option<T>, ConfigError> {
        if self.is_auto(key) {
            Ok(None)
        } else {
            self.parse(key, expected).map(Some)
        }
    }

    fn check(&self, key: &str, ok: bool, expected: &str) -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(mismatch(key, self.get(key), expected))
        }
    }
}

fn mismatch(key: &str, e: &Entry, expected: &str) -> ConfigError {
    ConfigError::TypeMismatch { line: e.line, key: key.to_string(), value: e.value.clone(), expected: expected.to_string() }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        text.parse()
    }

    /// Text of `resolved.cfg`: every key, defaults marked.
    pub fn resolved_text(&self) -> String {
        let mut out = String::new();
        for (key, value, default) in &self.resolved {
            if *default {
                let _ = writeln!(out, "{key} = {value} # default");
            } else {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        out
    }

    pub fn cells_per_epsilon(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self, epsilon: f64) -> f64 {
        epsilon / self.resolution as f64
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut given: Vec<(&'static str, Entry)> = Vec::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, text: raw_line.to_string() })?;
            let key = key.trim();
            let value = value.trim().trim_matches('"').trim();
            let known = KEYS
                .iter()
                .find(|(k, _)| *k == key)
                .ok_or_else(|| ConfigError::UnknownKey { line, key: key.to_string() })?;
            if let Some((_, first)) = given.iter().find(|(k, _)| *k == key) {
                return Err(ConfigError::DuplicateKey { line, key: key.to_string(), first: first.line });
            }
            given.push((known.0, Entry { value: value.to_string(), line, default: false }));
        }
        let mut entries = Vec::with_capacity(KEYS.len());
        for (key, default) in KEYS {
            match given.iter().position(|(k, _)| k == key) {
                Some(pos) => entries.push(given.swap_remove(pos)),
                None => match default {
                    Some(v) => entries.push((*key, Entry { value: v.to_string(), line: 0, default: true })),
                    None => return Err(ConfigError::MissingRequired { key: key.to_string() }),
                },
            }
        }
        let raw = Raw { entries };

        let sides: Vec<f64> = raw.list("domain", "a list of 2 or 3 positive side lengths")?;
        let domain = BoxDomain::new(&sides).map_err(|_| mismatch("domain", raw.get("domain"), "a list of 2 or 3 positive side lengths"))?;
        let d = domain.dim();
        let epsilon: f64 = raw.parse("epsilon", "a real number")?;
        raw.check("epsilon", epsilon > 0.0, "a positive real number")?;
        let hole: HoleShape = raw.parse("hole", "a hole descriptor (`disk c.. r` or `box c.. h..`)")?;
        raw.check("hole", hole.center().len() == d, &format!("a {d}-dimensional hole descriptor"))?;
        let target: ManifoldSpec = raw.parse("target", "a target (`sphere 2`, `sphere 3` or `flat-torus`)")?;
        let mut epsilons = if raw.is_auto("epsilons") {
            vec![epsilon]
        } else {
            raw.list::<f64>("epsilons", "a list of positive reals")?
        };
        raw.check("epsilons", epsilons.iter().all(|&e| e > 0.0), "a list of positive reals")?;
        epsilons.sort_by(|a, b| b.total_cmp(a));
        let lambda: f64 = raw.parse("lambda", "a real number")?;
        raw.check("lambda", lambda > 0.0 && lambda < 0.5, "a real number in (0, 1/2)")?;
        let mu: f64 = raw.parse("mu", "a real number")?;
        raw.check("mu", mu > 0.0, "a positive real number")?;
        let resolution: usize = raw.parse("resolution", "an integer")?;
        raw.check("resolution", resolution >= MIN_CELLS_PER_EPSILON, &format!("an integer >= {MIN_CELLS_PER_EPSILON}"))?;
        let variant = match raw.get("variant").value.as_str() {
            "safe" => Variant::Safe,
            "general" => Variant::General,
            _ => return Err(mismatch("variant", raw.get("variant"), "`safe` or `general`")),
        };
        let p: f64 = raw.parse("p", "a real number")?;
        raw.check("p", p > 1.0, "a real number greater than 1")?;
        let fixture: FixtureName = raw.parse("fixture", "`constant`, `standard` or `family-1` .. `family-5`")?;
        let candidates: usize = raw.parse("candidates", "an integer")?;
        raw.check("candidates", candidates >= 8, "an integer >= 8")?;
        let guard_eta: Option<f64> = raw.optional("guard_eta", "a real number or `auto`")?;
        raw.check("guard_eta", guard_eta.is_none_or(|g| g > 0.0), "a positive real number or `auto`")?;
        let mollify_radius: usize = raw.parse("mollify_radius", "an integer")?;
        let diagnostic_mode: bool = raw.parse("diagnostic_mode", "`true` or `false`")?;
        let translation: Option<Vec<f64>> = if raw.is_auto("translation") {
            None
        } else {
            let h = raw.list::<f64>("translation", "a list of reals or `auto`")?;
            raw.check("translation", h.len() == target.ambient_dim, &format!("a list of {} reals", target.ambient_dim))?;
            Some(h)
        };
        let margin: Option<f64> = raw.optional("margin", "a real number or `auto`")?;
        let exchange: f64 = raw.parse("exchange", "a real number")?;
        raw.check("exchange", exchange > 0.0, "a positive real number")?;
        let anisotropy_axis: Vec<f64> = if raw.is_auto("anisotropy_axis") {
            (0..d).map(|k| if k + 1 == d { 1.0 } else { 0.0 }).collect()
        } else {
            raw.list("anisotropy_axis", "a list of reals")?
        };
        let axis_norm = anisotropy_axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        raw.check(
            "anisotropy_axis",
            anisotropy_axis.len() == d && (axis_norm - 1.0).abs() <= 1e-9,
            &format!("a unit vector with {d} components"),
        )?;
        let anisotropy_weight: f64 = raw.parse("anisotropy_weight", "a real number")?;
        raw.check("anisotropy_weight", anisotropy_weight >= 0.0, "a nonnegative real number")?;
        let max_iters: usize = raw.parse("max_iters", "an integer")?;
        let step_size: Option<f64> = raw.optional("step_size", "a real number or `auto`")?;
        raw.check("step_size", step_size.is_none_or(|s| s > 0.0), "a positive real number or `auto`")?;
        let grad_tolerance: f64 = raw.parse("grad_tolerance", "a real number")?;
        raw.check("grad_tolerance", grad_tolerance > 0.0, "a positive real number")?;
        let collar: Collar = raw.parse("collar", "`none`, `uniform` or `wall`")?;
        let vortex_resolutions: Vec<usize> = raw.list("vortex_resolutions", "a list of integers")?;
        raw.check("vortex_resolutions", vortex_resolutions.iter().all(|&n| n >= 4), "a list of integers >= 4")?;
        let vortex_degree: i32 = raw.parse("vortex_degree", "an integer")?;

        let resolved = raw.entries.iter().map(|(k, e)| (k.to_string(), e.value.clone(), e.default)).collect();
        Ok(RunConfig {
            domain,
            epsilon,
            hole,
            target,
            epsilons,
            lambda,
            mu,
            resolution,
            variant,
            p,
            fixture,
            candidates,
            guard_eta,
            mollify_radius,
            diagnostic_mode,
            translation,
            margin,
            exchange,
            anisotropy_axis,
            anisotropy_weight,
            max_iters,
            step_size,
            grad_tolerance,
            collar,
            vortex_resolutions,
            vortex_degree,
            resolved,
        })
    }
}

/// Defaults applied when a key is absent, for documentation and tests.
pub fn default_value(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _)| *k == key).and_then(|(_, v)| *v)
}

/// All accepted keys in canonical order.
pub fn keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|(k, _)| *k)
}
