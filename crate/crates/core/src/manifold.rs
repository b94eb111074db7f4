//! Target manifolds, their nearest-point projections and retractions.
//!
//! Two targets are supported. Round spheres `S^{l-1} ⊂ R^l`, where the
//! retraction is the radial map `y / |y|` with singular set `{0}`, and the flat
//! torus `S^1 x S^1 ⊂ R^4`, retracted by normalizing each planar factor. The
//! torus has a nontrivial fundamental group and is only used as a negative
//! example.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance to the singular set below which the retraction refuses to evaluate.
pub const SINGULAR_GUARD: f64 = 1e-14;
/// Residual accepted by [`ManifoldSpec::inverse_on_manifold`].
pub const INVERSE_TOLERANCE: f64 = 1e-10;
/// Residual the fixed-point iteration aims for, so the preimage error also
/// stays below [`INVERSE_TOLERANCE`].
const INVERSE_TARGET: f64 = 1e-14;
pub const INVERSE_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    Sphere,
    FlatTorus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    /// Ambient dimension `l`.
    pub ambient_dim: usize,
    /// Tubular radius.
    pub delta: f64,
    /// Half side of the ambient box `Q_R`.
    pub big_r: f64,
    /// Bound on the norm of every field value fed to the retraction.
    pub r_hat: f64,
    /// Translation budget `min(R - r_hat, delta)`.
    pub sigma: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Largest `j` with `pi_0 .. pi_j` trivial.
    pub connectivity_order: i32,
}

impl ManifoldSpec {
    /// Unit sphere `S^{l-1}` in `R^l`.
    pub fn sphere(ambient_dim: usize) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: ambient_dim });
        }
        Ok(Self::with_bounds(ManifoldKind::Sphere, ambient_dim, 0.5, 1.0, ambient_dim as i32 - 2))
    }

    pub fn flat_torus() -> Self {
        Self::with_bounds(ManifoldKind::FlatTorus, 4, 0.25, 2f64.sqrt(), 0)
    }

    fn with_bounds(kind: ManifoldKind, ambient_dim: usize, delta: f64, gamma: f64, order: i32) -> Self {
        let big_r = 2.0;
        // extended values lie in the convex hull of N, hence in the ball of radius gamma
        let r_hat = gamma;
        ManifoldSpec {
            kind,
            ambient_dim,
            delta,
            big_r,
            r_hat,
            sigma: (big_r - r_hat).min(delta),
            gamma_min: gamma,
            gamma_max: gamma,
            connectivity_order: order,
        }
    }

    /// Dimension of the manifold itself.
    pub fn manifold_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere => self.ambient_dim - 1,
            ManifoldKind::FlatTorus => 2,
        }
    }

    /// Whether the constrained-extension hypotheses hold for `(d, p)`:
    /// `p < d` and `N` is `floor(p - 1)`-connected.
    pub fn hypotheses_hold(&self, d: usize, p: f64) -> bool {
        p < d as f64 && (p - 1.0).floor() as i32 <= self.connectivity_order
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, got: y.len() });
        }
        Ok(())
    }

    /// Euclidean distance from `y` to `N`.
    pub fn distance_to_manifold(&self, y: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::Sphere => (norm(y) - 1.0).abs(),
            ManifoldKind::FlatTorus => {
                let a = norm(&y[..2]) - 1.0;
                let b = norm(&y[2..]) - 1.0;
                (a * a + b * b).sqrt()
            }
        }
    }

    /// Distance from `y` to the singular set `X` of the retraction.
    pub fn singular_distance(&self, y: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::Sphere => norm(y),
            ManifoldKind::FlatTorus => norm(&y[..2]).min(norm(&y[2..])),
        }
    }

    /// Nearest-point projection onto `N`, defined on the tubular neighbourhood.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.ambient_dim];
        self.project_into(v, &mut out)?;
        Ok(out)
    }

    pub fn project_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(v)?;
        let distance = self.distance_to_manifold(v);
        if !(distance < self.delta) {
            return Err(Error::OutsideTubular { distance, delta: self.delta });
        }
        self.normalize_into(v, out);
        Ok(())
    }

    fn normalize_into(&self, y: &[f64], out: &mut [f64]) {
        match self.kind {
            ManifoldKind::Sphere => {
                let r = norm(y);
                for (o, x) in out.iter_mut().zip(y) {
                    *o = x / r;
                }
            }
            ManifoldKind::FlatTorus => {
                let a = norm(&y[..2]);
                let b = norm(&y[2..]);
                out[0] = y[0] / a;
                out[1] = y[1] / a;
                out[2] = y[2] / b;
                out[3] = y[3] / b;
            }
        }
    }

    /// Retraction `P: Q_R \ X -> N`.
    pub fn retract(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.ambient_dim];
        self.retract_into(y, &mut out)?;
        Ok(out)
    }

    pub fn retract_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(y)?;
        let distance = self.singular_distance(y);
        if !(distance >= SINGULAR_GUARD) {
            return Err(Error::HitSingularSet { distance });
        }
        self.normalize_into(y, out);
        Ok(())
    }

    /// `P_h(y) = P(y - h)`.
    pub fn retract_translated(&self, h: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.ambient_dim];
        self.retract_translated_into(h, y, &mut out)?;
        Ok(out)
    }

    pub fn retract_translated_into(&self, h: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(h)?;
        let mut shifted = [0.0; 8];
        let shifted = &mut shifted[..self.ambient_dim];
        for k in 0..self.ambient_dim {
            shifted[k] = y[k] - h[k];
        }
        self.retract_into(shifted, out)
    }

    /// Inverse of `P_h` restricted to `N`: the point `y ∈ N` with `P_h(y) = z`.
    pub fn inverse_on_manifold(&self, h: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.ambient_dim];
        self.inverse_into(h, z, &mut out)?;
        Ok(out)
    }

    pub fn inverse_into(&self, h: &[f64], z: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_dim(h)?;
        self.check_dim(z)?;
        let l = self.ambient_dim;
        let mut buf = [0.0; 8];
        let mut img = [0.0; 8];
        for k in 0..l {
            buf[k] = z[k] + h[k];
        }
        self.project_into(&buf[..l], y)?;
        let mut residual = f64::INFINITY;
        for _ in 0..INVERSE_MAX_ITERS {
            self.retract_translated_into(h, y, &mut img[..l])?;
            residual = dist(&img[..l], z);
            if residual <= INVERSE_TARGET {
                return Ok(());
            }
            for k in 0..l {
                buf[k] = y[k] + (z[k] - img[k]);
            }
            self.project_into(&buf[..l], y)?;
        }
        self.retract_translated_into(h, y, &mut img[..l])?;
        residual = residual.min(dist(&img[..l], z));
        if residual <= INVERSE_TOLERANCE {
            return Ok(());
        }
        Err(Error::NoConvergence { residual, iterations: INVERSE_MAX_ITERS })
    }

    /// Closed-form candidate `P_{-h}|_N` for the inverse of `P_h|_N`. It is
    /// only correct to first order in `|h|`.
    pub fn approximate_inverse(&self, h: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        let minus: Vec<f64> = h.iter().map(|x| -x).collect();
        self.retract_translated(&minus, z)
    }

    /// Operator norm of the Jacobian of the retraction.
    pub fn retraction_gradient_norm(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y)?;
        let distance = self.singular_distance(y);
        if !(distance >= SINGULAR_GUARD) {
            return Err(Error::HitSingularSet { distance });
        }
        // the radial map has Jacobian (I - y y^T/|y|^2)/|y|; the torus is block diagonal
        Ok(1.0 / distance)
    }

    /// Uniformly distributed point of `N`.
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self.kind {
            ManifoldKind::Sphere => random_unit_vector(self.ambient_dim, rng),
            ManifoldKind::FlatTorus => {
                let a = rng.gen::<f64>() * 2.0 * PI;
                let b = rng.gen::<f64>() * 2.0 * PI;
                vec![a.cos(), a.sin(), b.cos(), b.sin()]
            }
        }
    }

    /// Empirical Lipschitz constant of the inverse of `P_h|_N` from nearby pairs.
    pub fn inverse_lipschitz_estimate<R: Rng>(&self, h: &[f64], samples: usize, rng: &mut R) -> Result<f64> {
        let mut best: f64 = 0.0;
        for _ in 0..samples {
            let z = self.random_point(rng);
            let step: Vec<f64> = (0..self.ambient_dim).map(|_| 1e-4 * (rng.gen::<f64>() - 0.5)).collect();
            let moved: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a + b).collect();
            let w = self.project(&moved)?;
            let dz = dist(&z, &w);
            if dz == 0.0 {
                continue;
            }
            let a = self.inverse_on_manifold(h, &z)?;
            let b = self.inverse_on_manifold(h, &w)?;
            best = best.max(dist(&a, &b) / dz);
        }
        Ok(best)
    }
}

/// Parses `sphere <l>` (ambient dimension) or `flat-torus`.
impl FromStr for ManifoldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        match tokens.as_slice() {
            ["flat-torus"] => Ok(ManifoldSpec::flat_torus()),
            ["sphere", l] => {
                let l: usize =
                    l.parse().map_err(|_| Error::InvalidConfig(format!("bad sphere dimension {l}")))?;
                if !(2..=3).contains(&l) {
                    return Err(Error::InvalidConfig(format!("sphere ambient dimension {l} not in 2..=3")));
                }
                ManifoldSpec::sphere(l)
            }
            _ => Err(Error::InvalidConfig(format!("unknown target {s:?}"))),
        }
    }
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ManifoldKind::Sphere => write!(f, "sphere {}", self.ambient_dim),
            ManifoldKind::FlatTorus => write!(f, "flat-torus"),
        }
    }
}

/// Midpoint Riemann sum of `|y|^{-p}` over `Q_R \ B_eta(0)` in `R^l`.
///
/// This is `|DP|^p` for the radial retraction. The mesh is graded
/// dyadically toward the origin: each shell between the cubes of half side
/// `s` and `s/2` is split into cells of side `s / (2m)`, and the innermost
/// cube containing the ball is resolved with cells of side `s / (8m)`.
pub fn radial_singular_sum(l: usize, big_r: f64, p: f64, eta: f64, m: usize) -> f64 {
    let mut total = 0.0;
    let mut s = big_r;
    loop {
        let last = s / 2.0 < eta;
        let per_axis = if last { 16 * m } else { 4 * m };
        let h = 2.0 * s / per_axis as f64;
        // cells with every index in [m, 3m) make up the next, smaller cube
        let (inner_lo, inner_hi) = (m, 3 * m);
        let cell = h.powi(l as i32);
        let mut idx = vec![0usize; l];
        let mut level = 0.0;
        'cells: loop {
            let skip = !last && idx.iter().all(|&i| i >= inner_lo && i < inner_hi);
            if !skip {
                let r2: f64 = idx.iter().map(|&i| (-s + (i as f64 + 0.5) * h).powi(2)).sum();
                let r = r2.sqrt();
                if r >= eta {
                    level += r.powf(-p) * cell;
                }
            }
            for k in 0..l {
                idx[k] += 1;
                if idx[k] < per_axis {
                    continue 'cells;
                }
                idx[k] = 0;
            }
            break;
        }
        total += level;
        if last {
            return total;
        }
        s /= 2.0;
    }
}

/// `H^{l-1}` measure of the unit sphere in `R^l`.
pub fn unit_sphere_area(l: usize) -> f64 {
    match l {
        1 => 2.0,
        2 => 2.0 * PI,
        n => 2.0 * PI / (n as f64 - 2.0) * unit_sphere_area(n - 2),
    }
}

pub fn random_unit_vector<R: Rng>(l: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..l).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
        let r = norm(&v);
        if r <= 1.0 && r > 1e-3 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        dist(a, b) <= tol
    }

    #[test]
    fn spec_constants() {
        let s = ManifoldSpec::sphere(3).unwrap();
        assert_eq!((s.delta, s.big_r, s.sigma, s.connectivity_order), (0.5, 2.0, 0.5, 1));
        let t = ManifoldSpec::flat_torus();
        assert_eq!(t.sigma, 0.25);
        assert_eq!(t.gamma_min, 2f64.sqrt());
        assert!(s.hypotheses_hold(3, 2.0));
        assert!(!s.hypotheses_hold(3, 3.0));
        assert!(!t.hypotheses_hold(3, 2.0));
        assert!(t.hypotheses_hold(3, 1.5));
        assert_eq!("sphere 2".parse::<ManifoldSpec>().unwrap(), ManifoldSpec::sphere(2).unwrap());
        assert!("sphere 7".parse::<ManifoldSpec>().is_err());
        assert!("torus".parse::<ManifoldSpec>().is_err());
    }

    #[test]
    fn projection_examples() {
        let s2 = ManifoldSpec::sphere(2).unwrap();
        assert_eq!(s2.project(&[0.9, 0.0]).unwrap(), vec![1.0, 0.0]);
        let s3 = ManifoldSpec::sphere(3).unwrap();
        assert_eq!(s3.project(&[0.0, 0.0, 1.3]).unwrap(), vec![0.0, 0.0, 1.0]);
        assert!(matches!(s3.project(&[0.0, 0.0, 1.6]), Err(Error::OutsideTubular { .. })));
        assert!(matches!(s3.project(&[0.0, 0.0, 0.2]), Err(Error::OutsideTubular { .. })));
    }

    #[test]
    fn torus_projection_matches_brute_force() {
        let t = ManifoldSpec::flat_torus();
        let v = [1.1, 0.0, 0.9, 0.1];
        let p = t.project(&v).unwrap();
        let s = 0.82f64.sqrt();
        assert!(close(&p, &[1.0, 0.0, 0.9 / s, 0.1 / s], 1e-15));
        assert!((p[2] - 0.9939).abs() < 1e-4 && (p[3] - 0.1104).abs() < 1e-4);
        // dense sample of the torus
        let n = 2000;
        let mut best = (f64::INFINITY, vec![]);
        for i in 0..n {
            let a = 2.0 * PI * i as f64 / n as f64;
            for j in 0..n {
                let b = 2.0 * PI * j as f64 / n as f64;
                let q = vec![a.cos(), a.sin(), b.cos(), b.sin()];
                let dq = dist(&q, &v);
                if dq < best.0 {
                    best = (dq, q);
                }
            }
        }
        assert!(close(&p, &best.1, 2.0 * PI / n as f64));
        assert!(dist(&p, &v) <= best.0 + 1e-15);
    }

    #[test]
    fn projection_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for spec in [ManifoldSpec::sphere(2).unwrap(), ManifoldSpec::sphere(3).unwrap(), ManifoldSpec::flat_torus()] {
            for _ in 0..1000 {
                let q = spec.random_point(&mut rng);
                let v: Vec<f64> = q.iter().map(|x| x + 0.1 * (rng.gen::<f64>() - 0.5)).collect();
                let p = spec.project(&v).unwrap();
                let pp = spec.project(&p).unwrap();
                assert!(close(&p, &pp, 1e-12));
                assert!(spec.distance_to_manifold(&p) < 1e-14);
                let r = norm(&p);
                assert!(r >= spec.gamma_min - 1e-12 && r <= spec.gamma_max + 1e-12);
            }
        }
    }

    #[test]
    fn retraction_examples() {
        let s2 = ManifoldSpec::sphere(2).unwrap();
        assert_eq!(s2.retract(&[0.2, 0.0]).unwrap(), vec![1.0, 0.0]);
        let t = 0.7f64;
        let r = s2.retract(&[3.0 * t.cos(), 3.0 * t.sin()]).unwrap();
        assert!(close(&r, &[t.cos(), t.sin()], 1e-15));
        assert!(matches!(s2.retract(&[0.0, 0.0]), Err(Error::HitSingularSet { .. })));
        let torus = ManifoldSpec::flat_torus();
        assert!(matches!(torus.retract(&[1.0, 0.0, 0.0, 0.0]), Err(Error::HitSingularSet { .. })));
    }

    #[test]
    fn retraction_fixes_manifold_and_agrees_with_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for spec in [ManifoldSpec::sphere(2).unwrap(), ManifoldSpec::sphere(3).unwrap(), ManifoldSpec::flat_torus()] {
            for _ in 0..10_000 {
                let y = spec.random_point(&mut rng);
                assert!(close(&spec.retract(&y).unwrap(), &y, 1e-15));
                let v: Vec<f64> = y.iter().map(|x| x * (1.0 + 0.9 * spec.delta / spec.gamma_max * (rng.gen::<f64>() - 0.5))).collect();
                assert_eq!(spec.retract(&v).unwrap(), spec.project(&v).unwrap());
            }
        }
    }

    #[test]
    fn translated_retraction_examples() {
        let s2 = ManifoldSpec::sphere(2).unwrap();
        let y = [0.3, -0.8];
        assert_eq!(s2.retract_translated(&[0.0, 0.0], &y).unwrap(), s2.retract(&y).unwrap());
        assert!(close(&s2.retract_translated(&[0.1, 0.0], &[1.0, 0.0]).unwrap(), &[1.0, 0.0], 1e-15));
        let r = s2.retract_translated(&[0.0, 0.1], &[1.0, 0.0]).unwrap();
        let s = 1.01f64.sqrt();
        assert!(close(&r, &[1.0 / s, -0.1 / s], 1e-15));
        assert!((r[0] - 0.99504).abs() < 1e-5 && (r[1] + 0.09950).abs() < 1e-5);
    }

    /// Exact inverse of `y -> (y - h)/|y - h|` on the unit circle/sphere:
    /// `y = h + t z` with `|y| = 1`, `t > 0`.
    fn sphere_inverse_oracle(h: &[f64], z: &[f64]) -> Vec<f64> {
        let hz: f64 = h.iter().zip(z).map(|(a, b)| a * b).sum();
        let hh: f64 = h.iter().map(|a| a * a).sum();
        let t = -hz + (hz * hz - hh + 1.0).sqrt();
        h.iter().zip(z).map(|(a, b)| a + t * b).collect()
    }

    #[test]
    fn inverse_examples() {
        let s2 = ManifoldSpec::sphere(2).unwrap();
        let z = [0.6, 0.8];
        assert!(close(&s2.inverse_on_manifold(&[0.0, 0.0], &z).unwrap(), &z, 1e-15));
        let fwd = s2.retract_translated(&[0.0, 0.1], &[1.0, 0.0]).unwrap();
        let inv = s2.inverse_on_manifold(&[0.0, 0.1], &fwd).unwrap();
        assert!(close(&inv, &[1.0, 0.0], 1e-10));
    }

    #[test]
    fn inverse_matches_closed_form_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for l in [2, 3] {
            let spec = ManifoldSpec::sphere(l).unwrap();
            for _ in 0..10_000 {
                let z = spec.random_point(&mut rng);
                let dir = random_unit_vector(l, &mut rng);
                let radius = spec.sigma / 2.0 * rng.gen::<f64>();
                let h: Vec<f64> = dir.iter().map(|x| x * radius).collect();
                let inv = spec.inverse_on_manifold(&h, &z).unwrap();
                assert!(close(&inv, &sphere_inverse_oracle(&h, &z), 1e-9));
                let back = spec.retract_translated(&h, &inv).unwrap();
                assert!(close(&back, &z, 1e-10));
            }
        }
    }

    #[test]
    fn torus_inverse_round_trip() {
        let t = ManifoldSpec::flat_torus();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let z = t.random_point(&mut rng);
            let dir = random_unit_vector(4, &mut rng);
            let h: Vec<f64> = dir.iter().map(|x| x * t.sigma / 2.0 * rng.gen::<f64>()).collect();
            let inv = t.inverse_on_manifold(&h, &z).unwrap();
            assert!(t.distance_to_manifold(&inv) < 1e-14);
            assert!(close(&t.retract_translated(&h, &inv).unwrap(), &z, 1e-10));
        }
    }

    #[test]
    fn closed_form_inverse_is_second_order() {
        let s2 = ManifoldSpec::sphere(2).unwrap();
        let dev = |r: f64| {
            let h = [0.0, r];
            (0..720)
                .map(|i| {
                    let a = i as f64 * PI / 360.0;
                    let z = [a.cos(), a.sin()];
                    dist(&s2.approximate_inverse(&h, &z).unwrap(), &sphere_inverse_oracle(&h, &z))
                })
                .fold(0.0, f64::max)
        };
        let (a, b) = (dev(0.05), dev(0.2));
        let slope = (b / a).ln() / 4f64.ln();
        assert!((slope - 2.0).abs() < 0.2, "{slope}");
        assert!(a > 1e-4);
    }

    fn jacobian_fd(spec: &ManifoldSpec, y: &[f64]) -> DMatrix<f64> {
        let l = y.len();
        let step = 1e-6;
        DMatrix::from_fn(l, l, |i, j| {
            let mut a = y.to_vec();
            let mut b = y.to_vec();
            a[j] += step;
            b[j] -= step;
            (spec.retract(&a).unwrap()[i] - spec.retract(&b).unwrap()[i]) / (2.0 * step)
        })
    }

    #[test]
    fn gradient_norm_examples_and_finite_differences() {
        let s2 = ManifoldSpec::sphere(2).unwrap();
        let s3 = ManifoldSpec::sphere(3).unwrap();
        assert_eq!(s2.retraction_gradient_norm(&[0.3, 0.4]).unwrap(), 2.0);
        assert_eq!(s3.retraction_gradient_norm(&[0.0, 0.25, 0.0]).unwrap(), 4.0);
        assert_eq!(s3.retraction_gradient_norm(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in [s2, s3, ManifoldSpec::flat_torus()] {
            for _ in 0..200 {
                let y: Vec<f64> = (0..spec.ambient_dim).map(|_| 3.0 * (rng.gen::<f64>() - 0.5)).collect();
                if spec.singular_distance(&y) < 0.1 {
                    continue;
                }
                let fd = jacobian_fd(&spec, &y).svd(false, false).singular_values.max();
                let exact = spec.retraction_gradient_norm(&y).unwrap();
                assert!((fd - exact).abs() <= 1e-5 * exact, "{fd} vs {exact}");
            }
        }
    }

    #[test]
    fn gradient_law_is_sharp() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let spec = ManifoldSpec::sphere(3).unwrap();
        for _ in 0..10_000 {
            let y: Vec<f64> = (0..3).map(|_| 4.0 * (rng.gen::<f64>() - 0.5)).collect();
            let v = spec.retraction_gradient_norm(&y).unwrap() * spec.singular_distance(&y);
            assert!((v - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn singular_sum_matches_radial_integral() {
        // integrable case on the ball: int_{B_1 \ B_eta} r^{-p} = area * (1 - eta^{l-p}) / (l - p);
        // the cube Q_R adds a corner part computed here by the same quadrature at p = 0
        let l = 2;
        let p = 1.5;
        let eta = 1e-4;
        let sum = radial_singular_sum(l, 1.0, p, eta, 8);
        // inside the unit-radius ball of the square [-1,1]^2 plus corners; check against
        // a fine uniform sum of the bounded remainder
        let ball = unit_sphere_area(l) * (1.0 - eta.powf(l as f64 - p)) / (l as f64 - p);
        let n = 2000;
        let hcell = 2.0 / n as f64;
        let mut corners = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = -1.0 + (i as f64 + 0.5) * hcell;
                let y = -1.0 + (j as f64 + 0.5) * hcell;
                let r = (x * x + y * y).sqrt();
                if r > 1.0 {
                    corners += r.powf(-p) * hcell * hcell;
                }
            }
        }
        let expected = ball + corners;
        assert!((sum - expected).abs() < 5e-3 * expected, "{sum} vs {expected}");
    }
}
