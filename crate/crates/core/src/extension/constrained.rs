//! Manifold-constrained extension: extend linearly, smooth, retract with a
//! well-chosen translation, undo the translation on `N`, and restore the
//! input on the solid cells.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extension::mollify::mollify;
use crate::extension::translation::{select_translation, TranslationChoice, TranslationSearchConfig};
use crate::extension::unconstrained::{extend_general_field, extend_safe_field};
use crate::extension::ExtensionDiagnostics;
use crate::field::VectorField;
use crate::manifold::{dist, norm, ManifoldKind, ManifoldSpec};
use crate::perforation::Variant;
use crate::sum::PairwiseSum;

/// Largest distance from `N` accepted for input values before re-projection.
pub const INGEST_TOLERANCE: f64 = 1e-9;
/// Pre-snap mismatch is expected below `MISMATCH_FACTOR * spacing * Lip(f)`.
pub const MISMATCH_FACTOR: f64 = 5.0;
/// The alarm fires at this multiple of the expected mismatch.
pub const MISMATCH_ALARM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConstrainedReport {
    pub target: String,
    pub d: usize,
    pub p: f64,
    pub connectivity_order: i32,
    pub hypotheses_hold: bool,
    pub warnings: Vec<String>,
    pub mollify_radius: usize,
    /// The translation actually applied.
    pub h: Vec<f64>,
    /// `None` when the translation was supplied by the caller.
    pub search: Option<TranslationChoice>,
    /// Largest `|pipeline value - f|` over solid cells before restoring `f`.
    pub pre_snap_mismatch: f64,
    pub lipschitz_estimate: f64,
    pub mismatch_alarm: bool,
    /// Largest distance of an output value from `N`.
    pub constraint_violation: f64,
    /// `None` when the output region is empty.
    pub diagnostics: Option<ExtensionDiagnostics>,
    #[serde(skip)]
    pub runtime_ms: f64,
}

/// Validates the input on `cells` and returns the re-projected copy.
fn ingest(f: &VectorField, spec: &ManifoldSpec, cells: &[bool]) -> Result<VectorField> {
    if f.components() != spec.ambient_dim {
        return Err(Error::DimensionMismatch { expected: spec.ambient_dim, got: f.components() });
    }
    let mut out = f.clone();
    for idx in 0..cells.len() {
        if !cells[idx] {
            continue;
        }
        if !f.is_defined(idx) {
            return Err(Error::UndefinedInput { cell: idx });
        }
        let deviation = spec.distance_to_manifold(f.value(idx));
        if !(deviation <= INGEST_TOLERANCE) {
            return Err(Error::ConstraintViolation { deviation });
        }
        let projected = spec.project(f.value(idx))?;
        out.set(idx, &projected);
    }
    Ok(out)
}

/// Largest difference quotient of `f` between adjacent solid cells.
pub fn lipschitz_estimate(f: &VectorField) -> f64 {
    let grid = &f.grid;
    let mut best: f64 = 0.0;
    for idx in 0..grid.num_cells() {
        if !grid.is_solid(idx) || !f.is_defined(idx) {
            continue;
        }
        for axis in 0..grid.dim() {
            if let Some(nb) = grid.forward_neighbor(idx, axis) {
                if grid.is_solid(nb) && f.is_defined(nb) {
                    best = best.max(dist(f.value(idx), f.value(nb)) / grid.spacing);
                }
            }
        }
    }
    best
}

fn hypothesis_warnings(spec: &ManifoldSpec, d: usize, p: f64) -> Vec<String> {
    let mut warnings = Vec::new();
    if p >= d as f64 {
        warnings.push(format!("WARN p = {p} >= d = {d}: no extension bound is claimed"));
    }
    if (p - 1.0).floor() as i32 > spec.connectivity_order {
        warnings.push(format!(
            "WARN target {spec} is not floor(p-1) = {}-connected (connectivity order {})",
            (p - 1.0).floor(),
            spec.connectivity_order
        ));
    }
    warnings
}

struct Pipeline<'a> {
    f: &'a VectorField,
    spec: &'a ManifoldSpec,
    cfg: &'a TranslationSearchConfig,
    /// Cells where the output is produced.
    region: Vec<bool>,
}

impl Pipeline<'_> {
    fn run(&self, extended: &VectorField) -> Result<(VectorField, ConstrainedReport)> {
        let start = Instant::now();
        let grid = self.f.grid.clone();
        let spec = self.spec;
        let cfg = self.cfg;
        let d = grid.dim();
        let warnings = hypothesis_warnings(spec, d, cfg.p);
        for w in &warnings {
            log::warn!("{w}");
        }
        let smooth = mollify(extended, cfg.mollify_radius);
        let region: Vec<bool> = (0..grid.num_cells()).map(|i| self.region[i] && smooth.is_defined(i)).collect();
        let mut report = ConstrainedReport {
            target: spec.to_string(),
            d,
            p: cfg.p,
            connectivity_order: spec.connectivity_order,
            hypotheses_hold: spec.hypotheses_hold(d, cfg.p),
            warnings,
            mollify_radius: cfg.mollify_radius,
            h: vec![0.0; spec.ambient_dim],
            search: None,
            pre_snap_mismatch: 0.0,
            lipschitz_estimate: lipschitz_estimate(self.f),
            mismatch_alarm: false,
            constraint_violation: 0.0,
            diagnostics: None,
            runtime_ms: 0.0,
        };
        let mut out = VectorField::undefined(grid.clone(), spec.ambient_dim);
        if !region.iter().any(|&r| r) {
            report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            return Ok((out, report));
        }
        let h = match &cfg.translation_override {
            Some(h) => {
                if h.len() != spec.ambient_dim {
                    return Err(Error::DimensionMismatch { expected: spec.ambient_dim, got: h.len() });
                }
                h.clone()
            }
            None => {
                let choice = select_translation(&smooth, spec, cfg, &region)?;
                let h = choice.h.clone();
                report.search = Some(choice);
                h
            }
        };
        let mut image = vec![0.0; spec.ambient_dim];
        for idx in 0..grid.num_cells() {
            if region[idx] {
                spec.retract_translated_into(&h, smooth.value(idx), &mut image)?;
                spec.inverse_into(&h, &image, out.value_mut(idx))?;
            }
        }
        let mut mismatch: f64 = 0.0;
        for idx in 0..grid.num_cells() {
            if region[idx] && grid.is_solid(idx) {
                mismatch = mismatch.max(dist(out.value(idx), self.f.value(idx)));
                out.set(idx, self.f.value(idx));
            }
        }
        report.h = h;
        report.pre_snap_mismatch = mismatch;
        let expected = MISMATCH_FACTOR * grid.spacing * report.lipschitz_estimate;
        report.mismatch_alarm = mismatch > MISMATCH_ALARM * expected && mismatch > 1e-12;
        if report.mismatch_alarm {
            log::warn!("pre-snap mismatch {mismatch:e} exceeds {MISMATCH_ALARM} x expected {expected:e}");
        }
        report.constraint_violation = (0..grid.num_cells())
            .filter(|&i| region[i])
            .map(|i| spec.distance_to_manifold(out.value(i)))
            .fold(0.0, f64::max);
        let in_region: Vec<bool> = (0..grid.num_cells()).map(|i| region[i] && grid.is_solid(i)).collect();
        if in_region.iter().any(|&b| b) {
            report.diagnostics = Some(ExtensionDiagnostics::compute(self.f, &out, cfg.p, &in_region, &region)?);
        }
        report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok((out, report))
    }
}

fn check_target(spec: &ManifoldSpec, cfg: &TranslationSearchConfig) -> Result<()> {
    if spec.kind == ManifoldKind::FlatTorus && !cfg.diagnostic_mode {
        return Err(Error::TargetNotCovered);
    }
    Ok(())
}

/// Constrained extension `T_eps` on the safe perforated domain.
pub fn extend_constrained(
    f: &VectorField,
    spec: &ManifoldSpec,
    cfg: &TranslationSearchConfig,
) -> Result<(VectorField, ConstrainedReport)> {
    let grid = f.grid.clone();
    if grid.variant != Variant::Safe {
        return Err(Error::WrongVariant { expected: "safe" });
    }
    check_target(spec, cfg)?;
    cfg.validate(spec, grid.spacing)?;
    let solid = grid.solid_mask();
    let clean = ingest(f, spec, &solid)?;
    let extended = extend_safe_field(&clean)?;
    let pipeline = Pipeline { f, spec, cfg, region: vec![true; grid.num_cells()] };
    pipeline.run(&extended)
}

/// Constrained extension on the general perforated domain, produced on the
/// retracted set `Omega(lambda_margin)`.
pub fn extend_constrained_retracted(
    f: &VectorField,
    spec: &ManifoldSpec,
    cfg: &TranslationSearchConfig,
    lambda_margin: f64,
) -> Result<(VectorField, ConstrainedReport)> {
    let grid = f.grid.clone();
    if grid.variant != Variant::General {
        return Err(Error::WrongVariant { expected: "general" });
    }
    let limit = lambda_margin / grid.mu;
    if grid.epsilon > limit {
        return Err(Error::EpsilonMarginViolation { epsilon: grid.epsilon, limit });
    }
    check_target(spec, cfg)?;
    cfg.validate(spec, grid.spacing)?;
    let clean = ingest(f, spec, &grid.solid_mask())?;
    let (extended, _) = extend_general_field(&clean)?;
    let pipeline = Pipeline { f, spec, cfg, region: grid.retracted_mask(lambda_margin) };
    pipeline.run(&extended)
}

/// Split of the `L^p` bound over the holes into the part where the linear
/// extension stays in the tubular neighbourhood and its complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LpBoundReport {
    pub p: f64,
    /// Reference point `y ∈ N`.
    pub y: Vec<f64>,
    pub hole_measure: f64,
    pub solid_measure: f64,
    pub k_measure: f64,
    pub k_complement_measure: f64,
    /// `int_K |T f - y|^p` and `int_K |S f - y|^p`.
    pub k_constrained: f64,
    pub k_linear: f64,
    pub kc_constrained: f64,
    pub kc_linear: f64,
    /// Realized `(int_K |T f - y|^p / int_K |S f - y|^p)^{1/p}`.
    pub realized_lipschitz: f64,
    /// `2 Gamma / delta`.
    pub complement_constant: f64,
    /// The complement estimate `int_Kc |Tf-y|^p <= (2 Gamma/delta)^p int_Kc |Sf-y|^p`.
    pub complement_estimate_holds: bool,
    /// `C = max(realized_lipschitz, 2 Gamma / delta)`.
    pub constant: f64,
    pub t_norm: f64,
    pub s_norm: f64,
    pub f_norm: f64,
    /// `C ||S f||_{L^p(Omega)} + (1 + C) |y| L(holes)^{1/p}`.
    pub assembled_bound: f64,
    pub assembled_bound_holds: bool,
    /// Same with the factor `2` in place of `1 + C`.
    pub two_gamma_form: f64,
    pub two_gamma_form_holds: bool,
    /// `|y| L(holes)^{1/p}`.
    pub ratio_term: f64,
    /// `(L(holes) / L(solid))^{1/p} ||f||`.
    pub measured_ratio_bound: f64,
    /// `((1 + q0) / q1)^{1/p} ||f||`.
    pub lemma_ratio_bound: f64,
    pub ratio_chain_holds: bool,
    pub notes: Vec<String>,
}

/// Evaluates the two-region decomposition behind the `L^p` bound of the
/// constrained extension `t` given its input `f` and the linear extension `s`.
pub fn lp_bound_decomposition(
    f: &VectorField,
    s: &VectorField,
    t: &VectorField,
    spec: &ManifoldSpec,
    p: f64,
) -> Result<LpBoundReport> {
    let grid = f.grid.clone();
    let vol = grid.cell_volume();
    let mut y = vec![0.0; spec.ambient_dim];
    y[0] = 1.0;
    if spec.kind == ManifoldKind::FlatTorus {
        y[2] = 1.0;
    }
    let mut acc = [PairwiseSum::new(), PairwiseSum::new(), PairwiseSum::new(), PairwiseSum::new()];
    let (mut nk, mut nkc, mut nsolid) = (0usize, 0usize, 0usize);
    let mut t_all = PairwiseSum::new();
    let mut s_all = PairwiseSum::new();
    let mut f_all = PairwiseSum::new();
    for idx in 0..grid.num_cells() {
        for (a, field) in [(&mut t_all, t), (&mut s_all, s)] {
            if !field.is_defined(idx) {
                return Err(Error::UndefinedInput { cell: idx });
            }
            a.add(norm(field.value(idx)).powf(p) * vol);
        }
        if grid.is_solid(idx) {
            nsolid += 1;
            f_all.add(norm(f.value(idx)).powf(p) * vol);
            continue;
        }
        let tv = dist(t.value(idx), &y).powf(p) * vol;
        let sv = dist(s.value(idx), &y).powf(p) * vol;
        if spec.distance_to_manifold(s.value(idx)) < spec.delta {
            nk += 1;
            acc[0].add(tv);
            acc[1].add(sv);
        } else {
            nkc += 1;
            acc[2].add(tv);
            acc[3].add(sv);
        }
    }
    let [k_constrained, k_linear, kc_constrained, kc_linear] = acc.map(|a| a.total());
    let hole_measure = (nk + nkc) as f64 * vol;
    let solid_measure = nsolid as f64 * vol;
    let realized_lipschitz = if k_linear > 0.0 { (k_constrained / k_linear).powf(1.0 / p) } else { 0.0 };
    let complement_constant = 2.0 * spec.gamma_max / spec.delta;
    let complement_estimate_holds = kc_constrained <= complement_constant.powf(p) * kc_linear * (1.0 + 1e-12);
    let constant = realized_lipschitz.max(complement_constant);
    let t_norm = t_all.total().powf(1.0 / p);
    let s_norm = s_all.total().powf(1.0 / p);
    let f_norm = f_all.total().powf(1.0 / p);
    let y_norm = norm(&y);
    let ratio_term = y_norm * hole_measure.powf(1.0 / p);
    let assembled_bound = constant * s_norm + (1.0 + constant) * ratio_term;
    let two_gamma_form = constant * s_norm + 2.0 * spec.gamma_min * hole_measure.powf(1.0 / p);
    let measured_ratio_bound =
        if solid_measure > 0.0 { (hole_measure / solid_measure).powf(1.0 / p) * f_norm } else { f64::INFINITY };
    let lemma_ratio_bound = ((1.0 + grid.cell.q0) / grid.cell.q1).powf(1.0 / p) * f_norm;
    let slack = 1e-12 * (1.0 + t_norm);
    let mut notes = vec!["the branch 0 ∈ N (gamma = 0) is not exercised: every supported target avoids 0".to_string()];
    if nk + nkc == 0 {
        notes.push("no hole cells: every partial integral vanishes".into());
    }
    Ok(LpBoundReport {
        p,
        y,
        hole_measure,
        solid_measure,
        k_measure: nk as f64 * vol,
        k_complement_measure: nkc as f64 * vol,
        k_constrained,
        k_linear,
        kc_constrained,
        kc_linear,
        realized_lipschitz,
        complement_constant,
        complement_estimate_holds,
        constant,
        t_norm,
        s_norm,
        f_norm,
        assembled_bound,
        assembled_bound_holds: t_norm <= assembled_bound + slack,
        two_gamma_form,
        two_gamma_form_holds: t_norm <= two_gamma_form + slack,
        ratio_term,
        measured_ratio_bound,
        lemma_ratio_bound,
        ratio_chain_holds: ratio_term <= measured_ratio_bound * (1.0 + 1e-12)
            && measured_ratio_bound <= lemma_ratio_bound * (1.0 + 1e-12),
        notes,
    })
}
