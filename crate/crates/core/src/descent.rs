//! Projected gradient descent for fields of unit vectors.
//!
//! Each step moves the free cells against the tangential part of the
//! gradient and renormalizes them. The step length starts from the
//! Barzilai-Borwein estimate and is halved until the energy does not
//! increase, so the recorded energies are non-increasing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DescentConfig {
    pub max_iters: usize,
    /// Initial step length.
    pub step_size: f64,
    /// Stop once the largest tangential gradient norm over free cells is below this.
    pub grad_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DescentStats {
    pub iterations: usize,
    pub converged: bool,
    pub final_energy: f64,
    pub final_residual: f64,
    /// Energy after every accepted step, starting with the initial energy.
    pub energies: Vec<f64>,
    /// Largest `| |m| - 1 |` over free cells seen at any iterate.
    pub max_constraint_violation: f64,
}

impl DescentStats {
    pub fn monotone(&self) -> bool {
        self.energies.windows(2).all(|w| w[1] <= w[0])
    }
}

fn tangential(values: &[f64], grad: &mut [f64], l: usize, free: &[bool]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, &is_free) in free.iter().enumerate() {
        let m = &values[i * l..(i + 1) * l];
        let g = &mut grad[i * l..(i + 1) * l];
        if !is_free {
            g.fill(0.0);
            continue;
        }
        let dot: f64 = m.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        let mut n2 = 0.0;
        for k in 0..l {
            g[k] -= dot * m[k];
            n2 += g[k] * g[k];
        }
        worst = worst.max(n2.sqrt());
    }
    worst
}

fn step(values: &[f64], grad: &[f64], tau: f64, l: usize, free: &[bool], out: &mut [f64]) -> f64 {
    out.copy_from_slice(values);
    let mut worst: f64 = 0.0;
    for (i, &is_free) in free.iter().enumerate() {
        if !is_free {
            continue;
        }
        let m = &mut out[i * l..(i + 1) * l];
        let g = &grad[i * l..(i + 1) * l];
        let mut n2 = 0.0;
        for k in 0..l {
            m[k] -= tau * g[k];
            n2 += m[k] * m[k];
        }
        let n = n2.sqrt();
        let mut r2 = 0.0;
        for x in m.iter_mut() {
            *x /= n;
            r2 += *x * *x;
        }
        worst = worst.max((r2.sqrt() - 1.0).abs());
    }
    worst
}

/// Minimizes `energy` over unit-vector fields. `energy(values, grad)` returns
/// the energy and writes its Euclidean gradient. Cells with `free[i] = false`
/// are held fixed. Returns the statistics and, on non-convergence, the
/// best iterate is still left in `values`.
pub fn minimize_unit_field<F>(
    values: &mut [f64],
    l: usize,
    free: &[bool],
    cfg: &DescentConfig,
    mut energy: F,
) -> DescentStats
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = values.len();
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut e = energy(values, &mut grad);
    let mut residual = tangential(values, &mut grad, l, free);
    let mut energies = vec![e];
    let mut tau = cfg.step_size;
    let mut violation: f64 = 0.0;
    let mut iterations = 0;
    while iterations < cfg.max_iters && residual > cfg.grad_tolerance {
        iterations += 1;
        let mut t = tau;
        let mut accepted = false;
        for _ in 0..60 {
            let v = step(values, &grad, t, l, free, &mut trial);
            let e_new = energy(&trial, &mut trial_grad);
            if e_new <= e {
                violation = violation.max(v);
                accepted = true;
                e = e_new;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let new_residual = tangential(&trial, &mut trial_grad, l, free);
        // Barzilai-Borwein length from the accepted step
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = trial[i] - values[i];
            ss += s * s;
            sy += s * (trial_grad[i] - grad[i]);
        }
        tau = if sy > 0.0 { (ss / sy).clamp(1e-3 * cfg.step_size, 1e3 * cfg.step_size) } else { t * 2.0 };
        values.copy_from_slice(&trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        residual = new_residual;
        energies.push(e);
    }
    DescentStats {
        iterations,
        converged: residual <= cfg.grad_tolerance,
        final_energy: e,
        final_residual: residual,
        energies,
        max_constraint_violation: violation,
    }
}

/// Turns a non-converged run into the corresponding error.
pub fn require_converged(stats: &DescentStats) -> Result<()> {
    if stats.converged {
        Ok(())
    } else {
        Err(Error::NonConvergence { residual: stats.final_residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Chain of unit vectors in the plane with fixed ends: the minimizer
    /// rotates uniformly, with energy `n_edges * |2 sin(total / (2 n_edges))|^2`.
    #[test]
    fn chain_relaxes_to_uniform_rotation() {
        let cells = 12;
        let total = 1.2f64;
        let mut values = vec![0.0; 2 * cells];
        for i in 0..cells {
            let a = if i == cells - 1 { total } else { 0.0 };
            values[2 * i] = a.cos();
            values[2 * i + 1] = a.sin();
        }
        let mut free = vec![true; cells];
        free[0] = false;
        free[cells - 1] = false;
        let energy = |v: &[f64], g: &mut [f64]| {
            g.fill(0.0);
            let mut e = 0.0;
            for i in 0..cells - 1 {
                for k in 0..2 {
                    let d = v[2 * (i + 1) + k] - v[2 * i + k];
                    e += d * d;
                    g[2 * (i + 1) + k] += 2.0 * d;
                    g[2 * i + k] -= 2.0 * d;
                }
            }
            e
        };
        // perturb the start so it is not a critical point
        for i in 1..cells - 1 {
            let a = 0.3 * (i as f64).sin();
            values[2 * i] = a.cos();
            values[2 * i + 1] = a.sin();
        }
        let cfg = DescentConfig { max_iters: 10_000, step_size: 0.1, grad_tolerance: 1e-10 };
        let stats = minimize_unit_field(&mut values, 2, &free, &cfg, energy);
        assert!(stats.converged);
        assert!(stats.monotone());
        assert!(stats.max_constraint_violation <= 1e-12);
        let edges = (cells - 1) as f64;
        let exact = edges * (2.0 * (total / (2.0 * edges)).sin()).powi(2);
        assert!((stats.final_energy - exact).abs() < 1e-12, "{} vs {exact}", stats.final_energy);
    }
}
