//! Reproducible sphere-valued test fields.
//!
//! A fixture on `S^2` is `x -> (sin t cos s, sin t sin s, cos t)` with
//! affine angles `t = a.x + t0`, `s = c.x + s0`; on `S^1` it is
//! `x -> (cos s, sin s)`. Both are Lipschitz with constant at most
//! `sqrt(|a|^2 + |c|^2)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::perforation::PerforatedGrid;

/// Number of members of the fixed smooth family.
pub const FAMILY_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Fixture {
    pub id: String,
    /// Ambient dimension of the target sphere, 2 or 3.
    pub l: usize,
    pub a: Vec<f64>,
    pub t0: f64,
    pub c: Vec<f64>,
    pub s0: f64,
}

/// Named fixtures accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureName {
    Constant,
    Standard,
    /// Member `k` (1-based) of the fixed smooth family.
    Family(usize),
}

impl fmt::Display for FixtureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixtureName::Constant => write!(f, "constant"),
            FixtureName::Standard => write!(f, "standard"),
            FixtureName::Family(k) => write!(f, "family-{k}"),
        }
    }
}

impl FromStr for FixtureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "constant" => Ok(FixtureName::Constant),
            "standard" => Ok(FixtureName::Standard),
            other => other
                .strip_prefix("family-")
                .and_then(|k| k.parse().ok())
                .filter(|k| (1..=FAMILY_SIZE).contains(k))
                .map(FixtureName::Family)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown fixture '{other}'"))),
        }
    }
}

impl Fixture {
    /// The constant field pointing along the last axis (`(1, 0)` on `S^1`).
    pub fn constant(l: usize, d: usize) -> Result<Self> {
        check_target(l)?;
        Ok(Fixture { id: format!("constant-s{}", l - 1), l, a: vec![0.0; d], t0: 0.0, c: vec![0.0; d], s0: 0.0 })
    }

    /// A fixed smooth fixture with moderate gradients, away from the poles.
    pub fn standard(l: usize, d: usize) -> Result<Self> {
        check_target(l)?;
        let a: Vec<f64> = (0..d).map(|k| 0.6 - 0.2 * k as f64).collect();
        let c: Vec<f64> = (0..d).map(|k| 1.0 + 0.5 * k as f64).collect();
        Ok(Fixture { id: format!("standard-s{}", l - 1), l, a, t0: 0.9, c, s0: 0.3 })
    }

    /// Seed-deterministic smooth fixture with angle gradients of size at
    /// most 1.5 per axis.
    pub fn smooth(l: usize, d: usize, seed: u64) -> Result<Self> {
        check_target(l)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let t0 = rng.gen_range(0.8..2.3);
        let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let s0 = rng.gen_range(0.0..std::f64::consts::TAU);
        Ok(Fixture { id: format!("smooth-s{}-seed{seed}", l - 1), l, a, t0, c, s0 })
    }

    /// The fixed family of [`FAMILY_SIZE`] smooth fixtures.
    pub fn family(l: usize, d: usize) -> Result<Vec<Self>> {
        (1..=FAMILY_SIZE)
            .map(|k| {
                let mut f = Fixture::smooth(l, d, 1000 + k as u64)?;
                f.id = format!("family-{k}-s{}", l - 1);
                Ok(f)
            })
            .collect()
    }

    pub fn named(name: FixtureName, l: usize, d: usize) -> Result<Self> {
        match name {
            FixtureName::Constant => Fixture::constant(l, d),
            FixtureName::Standard => Fixture::standard(l, d),
            FixtureName::Family(k) => Ok(Fixture::family(l, d)?.swap_remove(k - 1)),
        }
    }

    /// Same fixture with the angle gradients moved by `t * (da, dc)`;
    /// converges to `self` in `W^{1,p}` as `t -> 0`.
    pub fn perturbed(&self, da: &[f64], dc: &[f64], t: f64) -> Self {
        let mut out = self.clone();
        for (x, d) in out.a.iter_mut().zip(da) {
            *x += t * d;
        }
        for (x, d) in out.c.iter_mut().zip(dc) {
            *x += t * d;
        }
        out.id = format!("{}-perturbed", self.id);
        out
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn lipschitz(&self) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        if self.l == 2 {
            sq(&self.c).sqrt()
        } else {
            (sq(&self.a) + sq(&self.c)).sqrt()
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let dot = |v: &[f64]| v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let s = dot(&self.c) + self.s0;
        if self.l == 2 {
            return vec![s.cos(), s.sin()];
        }
        let t = dot(&self.a) + self.t0;
        vec![t.sin() * s.cos(), t.sin() * s.sin(), t.cos()]
    }

    /// Samples the fixture at the SOLID cell centers of `grid`.
    pub fn field(&self, grid: Arc<PerforatedGrid>) -> Result<VectorField> {
        if grid.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: grid.dim() });
        }
        Ok(VectorField::on_solid(grid, self.l, |x| self.eval(x)))
    }
}

fn check_target(l: usize) -> Result<()> {
    if l == 2 || l == 3 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("fixtures map into S^1 or S^2, got ambient dimension {l}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_norm_error(f: &Fixture, x: &[f64]) -> f64 {
        (f.eval(x).iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs()
    }

    #[test]
    fn values_are_unit_vectors() {
        for f in Fixture::family(3, 3).unwrap().iter().chain([&Fixture::standard(2, 2).unwrap()]) {
            for k in 0..50 {
                let x: Vec<f64> = (0..f.dim()).map(|i| ((k * 7 + i * 3) % 11) as f64 / 11.0).collect();
                assert!(unit_norm_error(f, &x) < 1e-15);
            }
        }
    }

    #[test]
    fn lipschitz_bound_holds_on_difference_quotients() {
        let f = Fixture::smooth(3, 3, 7).unwrap();
        let lip = f.lipschitz();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            let y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-1e-3..1e-3)).collect();
            let dv: f64 = f.eval(&x).iter().zip(f.eval(&y)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let dx: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(dv <= lip * dx * (1.0 + 1e-6));
        }
    }

    #[test]
    fn seeds_reproduce_and_differ() {
        assert_eq!(Fixture::smooth(3, 3, 5).unwrap(), Fixture::smooth(3, 3, 5).unwrap());
        assert_ne!(Fixture::smooth(3, 3, 5).unwrap(), Fixture::smooth(3, 3, 6).unwrap());
        let fam = Fixture::family(3, 3).unwrap();
        assert_eq!(fam.len(), FAMILY_SIZE);
        assert_eq!(Fixture::named(FixtureName::Family(2), 3, 3).unwrap(), fam[1]);
    }

    #[test]
    fn names_round_trip() {
        for name in [FixtureName::Constant, FixtureName::Standard, FixtureName::Family(4)] {
            assert_eq!(name.to_string().parse::<FixtureName>().unwrap(), name);
        }
        assert!("family-9".parse::<FixtureName>().is_err());
        assert!("smooth".parse::<FixtureName>().is_err());
    }

    #[test]
    fn constant_fixture() {
        let f = Fixture::constant(3, 2).unwrap();
        assert_eq!(f.eval(&[0.3, 0.9]), vec![0.0, 0.0, 1.0]);
        assert_eq!(f.lipschitz(), 0.0);
        assert_eq!(Fixture::constant(2, 3).unwrap().eval(&[0.1, 0.2, 0.3]), vec![1.0, 0.0]);
        assert!(Fixture::constant(4, 2).is_err());
    }
}
