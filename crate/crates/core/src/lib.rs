//! Extension operators for manifold-valued Sobolev fields on periodically
//! perforated domains, with the numerical studies built on them.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod descent;
pub mod error;
pub mod extension;
pub mod field;
pub mod fixtures;
pub mod manifold;
pub mod micromag;
pub mod microcell;
pub mod perforation;
pub mod selftest;
pub mod sum;

pub use error::{Error, Result};
