//! Periodic unit-cell microstructure.
//!
//! The unit cell is `Q = (-1/2, 1/2)^d`. The hole `Q_0` is drawn from a small
//! catalog of analytic shapes so that its volume, its signed distance and the
//! nearest boundary point are all available in closed form. The solid part is
//! `Q_1 = Q \ closure(Q_0)` and its periodic tiling is the set `E`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analytic hole descriptor in unit-cell coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HoleShape {
    /// Disk (d = 2) or ball (d = 3).
    Disk { center: Vec<f64>, radius: f64 },
    /// Axis-aligned box given by its center and half-widths.
    Box { center: Vec<f64>, half_widths: Vec<f64> },
}

impl HoleShape {
    pub fn disk(center: &[f64], radius: f64) -> Self {
        HoleShape::Disk { center: center.to_vec(), radius }
    }

    pub fn cuboid(center: &[f64], half_widths: &[f64]) -> Self {
        HoleShape::Box { center: center.to_vec(), half_widths: half_widths.to_vec() }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            HoleShape::Disk { center, .. } | HoleShape::Box { center, .. } => center,
        }
    }

    /// Per-axis extent `[lo, hi]` of the hole in unit-cell coordinates.
    pub fn extent(&self, axis: usize) -> (f64, f64) {
        match self {
            HoleShape::Disk { center, radius } => (center[axis] - radius, center[axis] + radius),
            HoleShape::Box { center, half_widths } => {
                (center[axis] - half_widths[axis], center[axis] + half_widths[axis])
            }
        }
    }
}

/// Parses `disk cx cy [cz] r` or `box cx cy [cz] hx hy [hz]`.
impl FromStr for HoleShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split_whitespace();
        let kind = tokens.next().ok_or_else(|| Error::InvalidShape("empty descriptor".into()))?;
        let numbers = tokens
            .map(|t| t.parse::<f64>().map_err(|_| Error::InvalidShape(format!("not a number: {t}"))))
            .collect::<Result<Vec<_>>>()?;
        match kind {
            "disk" => match numbers.len() {
                3 | 4 => {
                    let d = numbers.len() - 1;
                    Ok(HoleShape::disk(&numbers[..d], numbers[d]))
                }
                n => Err(Error::InvalidShape(format!("disk expects 3 or 4 numbers, got {n}"))),
            },
            "box" => match numbers.len() {
                4 | 6 => {
                    let d = numbers.len() / 2;
                    Ok(HoleShape::cuboid(&numbers[..d], &numbers[d..]))
                }
                n => Err(Error::InvalidShape(format!("box expects 4 or 6 numbers, got {n}"))),
            },
            other => Err(Error::InvalidShape(format!("unknown shape kind {other}"))),
        }
    }
}

impl fmt::Display for HoleShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
        match self {
            HoleShape::Disk { center, radius } => write!(f, "disk {} {}", join(center), radius),
            HoleShape::Box { center, half_widths } => {
                write!(f, "box {} {}", join(center), join(half_widths))
            }
        }
    }
}

/// Unit-cell microstructure with its exact volume fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroCell {
    pub hole: HoleShape,
    pub dim: usize,
    /// Lebesgue measure of the hole `Q_0`.
    pub q0: f64,
    /// Lebesgue measure of the solid part `Q_1`.
    pub q1: f64,
}

/// Validates a hole descriptor and computes its volume fractions.
pub fn make_microcell(hole: HoleShape, dim: usize) -> Result<MicroCell> {
    if !(2..=3).contains(&dim) {
        return Err(Error::InvalidShape(format!("unsupported dimension {dim}")));
    }
    let q0 = match &hole {
        HoleShape::Disk { center, radius } => {
            check_len(center.len(), dim)?;
            if !(*radius > 0.0) {
                return Err(Error::InvalidShape(format!("radius must be positive, got {radius}")));
            }
            // the disk must sit strictly inside the open cell
            if center.iter().any(|c| c.abs() + radius >= 0.5) {
                return Err(Error::InvalidShape(format!(
                    "disk of radius {radius} at {center:?} exits the unit cell"
                )));
            }
            match dim {
                2 => PI * radius * radius,
                _ => 4.0 / 3.0 * PI * radius.powi(3),
            }
        }
        HoleShape::Box { center, half_widths } => {
            check_len(center.len(), dim)?;
            check_len(half_widths.len(), dim)?;
            if half_widths.iter().any(|h| !(*h > 0.0)) {
                return Err(Error::InvalidShape("half-widths must be positive".into()));
            }
            // touching the cell boundary is allowed, crossing it is not
            if center.iter().zip(half_widths).any(|(c, h)| c.abs() + h > 0.5 + 1e-15) {
                return Err(Error::InvalidShape(format!(
                    "box at {center:?} with half-widths {half_widths:?} exits the unit cell"
                )));
            }
            half_widths.iter().map(|h| 2.0 * h).product()
        }
    };
    if !(q0 > 0.0 && q0 < 1.0) {
        return Err(Error::InvalidShape(format!("hole volume fraction {q0} is not in (0, 1)")));
    }
    Ok(MicroCell { hole, dim, q0, q1: 1.0 - q0 })
}

fn check_len(len: usize, dim: usize) -> Result<()> {
    if len != dim {
        return Err(Error::InvalidShape(format!("descriptor has {len} coordinates, dimension is {dim}")));
    }
    Ok(())
}

impl MicroCell {
    /// Signed distance from `u` (unit-cell coordinates) to the hole boundary:
    /// negative inside `Q_0`, positive outside. Exact for every `u` in `R^d`.
    pub fn signed_distance(&self, u: &[f64]) -> f64 {
        match &self.hole {
            HoleShape::Disk { center, radius } => dist(u, center) - radius,
            HoleShape::Box { center, half_widths } => {
                let mut outside = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for k in 0..self.dim {
                    let q = (u[k] - center[k]).abs() - half_widths[k];
                    if q > 0.0 {
                        outside += q * q;
                    }
                    inside = inside.max(q);
                }
                if outside > 0.0 {
                    outside.sqrt()
                } else {
                    inside.min(0.0)
                }
            }
        }
    }

    /// Nearest point of the hole boundary for a point `u` inside the hole.
    pub fn nearest_boundary_point(&self, u: &[f64]) -> Vec<f64> {
        match &self.hole {
            HoleShape::Disk { center, radius } => {
                let r = dist(u, center);
                if r == 0.0 {
                    let mut p = center.clone();
                    p[0] += radius;
                    return p;
                }
                center.iter().zip(u).map(|(c, x)| c + radius * (x - c) / r).collect()
            }
            HoleShape::Box { center, half_widths } => {
                let mut axis = 0;
                let mut best = f64::NEG_INFINITY;
                for k in 0..self.dim {
                    let q = (u[k] - center[k]).abs() - half_widths[k];
                    if q > best {
                        best = q;
                        axis = k;
                    }
                }
                let mut p = u.to_vec();
                let side = if u[axis] >= center[axis] { 1.0 } else { -1.0 };
                p[axis] = center[axis] + side * half_widths[axis];
                p
            }
        }
    }

    /// Reflection of an interior point across its nearest boundary point.
    pub fn reflect(&self, u: &[f64]) -> Vec<f64> {
        self.nearest_boundary_point(u).iter().zip(u).map(|(b, x)| 2.0 * b - x).collect()
    }

    /// True for box holes whose closure meets the boundary of the unit cell,
    /// in which case neighbouring holes connect across cells.
    pub fn touches_cell_boundary(&self) -> bool {
        (0..self.dim).any(|k| {
            let (lo, hi) = self.hole.extent(k);
            lo <= -0.5 || hi >= 0.5
        })
    }

    /// Monte-Carlo estimate of `q0` and its standard error.
    pub fn monte_carlo_q0<R: Rng>(&self, samples: usize, rng: &mut R) -> (f64, f64) {
        let mut u = vec![0.0; self.dim];
        let mut hits = 0usize;
        for _ in 0..samples {
            for x in u.iter_mut() {
                *x = rng.gen::<f64>() - 0.5;
            }
            if self.signed_distance(&u) < 0.0 {
                hits += 1;
            }
        }
        let p = hits as f64 / samples as f64;
        (p, (p * (1.0 - p) / samples as f64).sqrt())
    }
}

/// Signed distance to the hole for a point of the closed unit cell.
pub fn signed_distance_to_hole(cell: &MicroCell, x: &[f64]) -> f64 {
    cell.signed_distance(x)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
