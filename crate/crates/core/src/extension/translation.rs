//! Choice of the translation `h` that steers field values off the singular
//! set of the retraction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::norms::{gradient_norm, DiffPolicy};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::manifold::{norm, ManifoldSpec};
use crate::sum::PairwiseSum;

const HALTON_BASES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranslationSearchConfig {
    /// Number of sampled translations `K`.
    pub candidate_count: usize,
    /// Exclusion radius around the translated singular set. `None` picks
    /// `max(1e-3, min(10 * spacing, sigma / 8))`.
    pub guard_eta: Option<f64>,
    /// Smoothing radius in grid cells.
    pub mollify_radius: usize,
    pub seed: u64,
    /// Exponent of the norms and of the selection objective.
    pub p: f64,
    /// Run targets that violate the connectivity hypotheses anyway.
    pub diagnostic_mode: bool,
    /// Skip the search and use this translation.
    pub translation_override: Option<Vec<f64>>,
}

impl Default for TranslationSearchConfig {
    fn default() -> Self {
        TranslationSearchConfig {
            candidate_count: 64,
            guard_eta: None,
            mollify_radius: 2,
            seed: 42,
            p: 2.0,
            diagnostic_mode: false,
            translation_override: None,
        }
    }
}

impl TranslationSearchConfig {
    pub fn resolved_guard(&self, spec: &ManifoldSpec, spacing: f64) -> f64 {
        self.guard_eta.unwrap_or_else(|| (10.0 * spacing).min(spec.sigma / 8.0).max(1e-3))
    }

    pub fn validate(&self, spec: &ManifoldSpec, spacing: f64) -> Result<()> {
        if self.candidate_count < 8 {
            return Err(Error::InvalidConfig(format!("candidate count {} below 8", self.candidate_count)));
        }
        let eta = self.resolved_guard(spec, spacing);
        if !(eta > 0.0 && eta < spec.sigma / 4.0) {
            return Err(Error::InvalidConfig(format!("guard radius {eta} not in (0, sigma/4 = {})", spec.sigma / 4.0)));
        }
        if !(self.p > 1.0) {
            return Err(Error::InvalidConfig(format!("exponent p = {} must exceed 1", self.p)));
        }
        Ok(())
    }
}

/// Outcome of the translation search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranslationChoice {
    pub h: Vec<f64>,
    /// `sum |D(P_h o f)|^p * cell volume` at the chosen `h`.
    pub objective: f64,
    pub survivor_mean: f64,
    pub candidates: usize,
    pub survivors: usize,
    pub guard_eta: f64,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut x = 0.0;
    while i > 0 {
        x += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    x
}

/// `count` points of the ball of radius `radius` in `R^l` from a randomly
/// shifted Halton sequence, accepted by rejection from the cube.
pub fn ball_candidates(l: usize, radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..l).map(|_| rng.gen()).collect();
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let u: Vec<f64> = (0..l)
            .map(|k| {
                let x = radical_inverse(i, HALTON_BASES[k]) + shift[k];
                2.0 * (x - x.floor()) - 1.0
            })
            .collect();
        i += 1;
        if norm(&u) < 1.0 {
            out.push(u.iter().map(|x| x * radius).collect());
        }
    }
    out
}

/// Objective `sum |D(P_h o f)|^p * vol` over adjacent pairs inside `region`.
pub fn translation_objective(
    f: &VectorField,
    spec: &ManifoldSpec,
    h: &[f64],
    p: f64,
    region: &[bool],
    scratch: &mut VectorField,
) -> Result<f64> {
    for idx in 0..region.len() {
        if region[idx] {
            spec.retract_translated_into(h, f.value(idx), scratch.value_mut(idx))?;
        }
    }
    Ok(gradient_norm(scratch, p, region, DiffPolicy::WithinRegion)?.powf(p))
}

/// Samples `K` translations in `B_{sigma/2}`, discards those bringing any
/// value within the guard radius of `X + h`, and returns the survivor with
/// the smallest objective.
pub fn select_translation(
    f_smooth: &VectorField,
    spec: &ManifoldSpec,
    cfg: &TranslationSearchConfig,
    region: &[bool],
) -> Result<TranslationChoice> {
    let eta = cfg.resolved_guard(spec, f_smooth.grid.spacing);
    let candidates = ball_candidates(spec.ambient_dim, spec.sigma / 2.0, cfg.candidate_count, cfg.seed);
    let cells: Vec<usize> = (0..region.len()).filter(|&i| region[i]).collect();
    if cells.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut scratch = VectorField::undefined(f_smooth.grid.clone(), spec.ambient_dim);
    let mut shifted = vec![0.0; spec.ambient_dim];
    let mut scored: Vec<(Vec<f64>, f64)> = Vec::new();
    for h in candidates {
        let clear = cells.iter().all(|&i| {
            for (s, (v, hk)) in shifted.iter_mut().zip(f_smooth.value(i).iter().zip(&h)) {
                *s = v - hk;
            }
            spec.singular_distance(&shifted) >= eta
        });
        if !clear {
            continue;
        }
        let objective = translation_objective(f_smooth, spec, &h, cfg.p, region, &mut scratch)?;
        scored.push((h, objective));
    }
    if scored.is_empty() {
        return Err(Error::NoAdmissibleTranslation);
    }
    let mut best = 0;
    for (k, (_, obj)) in scored.iter().enumerate() {
        if *obj < scored[best].1 {
            best = k;
        }
    }
    let min = scored[best].1;
    // written as min + mean excess so that min <= mean holds exactly in floating point
    let mut excess = PairwiseSum::new();
    for (_, obj) in &scored {
        excess.add(obj - min);
    }
    let survivor_mean = min + excess.total() / scored.len() as f64;
    log::debug!("translation search: {} of {} candidates survive the guard", scored.len(), cfg.candidate_count);
    Ok(TranslationChoice {
        h: scored[best].0.clone(),
        objective: min,
        survivor_mean,
        candidates: cfg.candidate_count,
        survivors: scored.len(),
        guard_eta: eta,
    })
}
