//! Extension operators from the perforated domain to the whole box.

pub mod constrained;
pub mod mollify;
pub mod translation;
pub mod unconstrained;

use serde::{Deserialize, Serialize};

use crate::analysis::norms::{gradient_norm, lp_norm, DiffPolicy};
use crate::error::Result;
use crate::field::VectorField;
use crate::manifold::norm;

pub use constrained::{
    extend_constrained, extend_constrained_retracted, lp_bound_decomposition, ConstrainedReport,
    LpBoundReport,
};
pub use mollify::mollify;
pub use translation::{select_translation, TranslationChoice, TranslationSearchConfig};
pub use unconstrained::{extend_unconstrained, extend_unconstrained_general, COLLAR_WIDTH};

/// Realized norms and constants of one extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExtensionDiagnostics {
    pub p: f64,
    pub lp_in: f64,
    pub lp_out: f64,
    /// Gradient seminorms with SOLID/HOLE interface differences excluded.
    pub grad_in: f64,
    pub grad_out: f64,
    pub c_func: f64,
    /// `None` when the input gradient vanishes.
    pub c_grad: Option<f64>,
    /// Output gradient including differences across SOLID/HOLE interfaces.
    pub grad_out_full: f64,
    pub c_grad_full: Option<f64>,
    /// Excess of the largest output norm over the largest input norm. For
    /// sphere-valued input this is the distance from the unit ball.
    pub convex_hull_violation: f64,
}

impl ExtensionDiagnostics {
    /// Compares `input` on `in_region` with `output` on `out_region`.
    pub fn compute(
        input: &VectorField,
        output: &VectorField,
        p: f64,
        in_region: &[bool],
        out_region: &[bool],
    ) -> Result<Self> {
        let lp_in = lp_norm(input, p, in_region)?;
        let lp_out = lp_norm(output, p, out_region)?;
        let grad_in = gradient_norm(input, p, in_region, DiffPolicy::SameLabel)?;
        let grad_out = gradient_norm(output, p, out_region, DiffPolicy::SameLabel)?;
        let grad_out_full = gradient_norm(output, p, out_region, DiffPolicy::WithinRegion)?;
        let max_norm = |f: &VectorField, region: &[bool]| {
            (0..region.len()).filter(|&i| region[i]).map(|i| norm(f.value(i))).fold(0.0, f64::max)
        };
        let ratio = |a: f64, b: f64| (b > 0.0).then(|| a / b);
        Ok(ExtensionDiagnostics {
            p,
            lp_in,
            lp_out,
            grad_in,
            grad_out,
            c_func: if lp_in > 0.0 { lp_out / lp_in } else { 1.0 },
            c_grad: ratio(grad_out, grad_in),
            grad_out_full,
            c_grad_full: ratio(grad_out_full, grad_in),
            convex_hull_violation: (max_norm(output, out_region) - max_norm(input, in_region)).max(0.0),
        })
    }
}
