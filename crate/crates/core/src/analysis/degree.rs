//! Winding numbers of circle-valued loops.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

pub const MIN_LOOP_SAMPLES: usize = 16;

/// Degree of the closed loop `samples[0] -> ... -> samples[n-1] -> samples[0]`
/// of nonzero planar vectors.
pub fn winding_number(samples: &[[f64; 2]]) -> Result<i64> {
    let n = samples.len();
    if n < MIN_LOOP_SAMPLES {
        return Err(Error::GapTooLarge(format!("{n} samples, need at least {MIN_LOOP_SAMPLES}")));
    }
    let mut total = 0.0;
    for i in 0..n {
        let a = samples[i];
        let b = samples[(i + 1) % n];
        let cross = a[0] * b[1] - a[1] * b[0];
        let dot = a[0] * b[0] + a[1] * b[1];
        let step = cross.atan2(dot);
        if !(step.abs() < FRAC_PI_2) {
            return Err(Error::GapTooLarge(format!("angular gap {step:.3} between samples {i} and {}", (i + 1) % n)));
        }
        total += step;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Samples `f` on the circle of radius `radius` around `center`.
pub fn sample_loop<F: Fn(&[f64; 2]) -> [f64; 2]>(f: F, center: [f64; 2], radius: f64, samples: usize) -> Vec<[f64; 2]> {
    (0..samples)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / samples as f64;
            f(&[center[0] + radius * t.cos(), center[1] + radius * t.sin()])
        })
        .collect()
}
