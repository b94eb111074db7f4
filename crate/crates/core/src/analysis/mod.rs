//! Norms, parameter sweeps and the degree/vortex diagnostics.

pub mod degree;
pub mod norms;
pub mod sweep;
pub mod vortex;
