//! Smoothing by a compactly supported, nonnegative product kernel.

use crate::field::VectorField;

/// Normalized 1-d weights `(1 - (k/(r+1))^2)^2` for `|k| <= r`.
pub fn bump_weights(radius: usize) -> Vec<f64> {
    let r = radius as f64 + 1.0;
    let raw: Vec<f64> = (-(radius as i64)..=radius as i64)
        .map(|k| {
            let t = k as f64 / r;
            (1.0 - t * t).powi(2)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Half-sample mirror: `-1 -> 0`, `n -> n - 1`.
fn mirror(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

/// Discrete convolution with the product bump of the given radius, mirrored
/// at the box faces. Fully defined fields are smoothed axis by axis; on a
/// partially defined field each defined cell averages the defined cells of
/// its stencil with renormalized weights. Radius 0 is the identity.
pub fn mollify(f: &VectorField, radius: usize) -> VectorField {
    if radius == 0 {
        return f.clone();
    }
    if f.defined_mask().iter().all(|&d| d) {
        separable(f, radius)
    } else {
        masked(f, radius)
    }
}

fn separable(f: &VectorField, radius: usize) -> VectorField {
    let grid = f.grid.clone();
    let w = bump_weights(radius);
    let l = f.components();
    let dims = grid.dims().to_vec();
    let strides = grid.strides().to_vec();
    let mut current = f.raw_values().to_vec();
    let mut next = vec![0.0; current.len()];
    for axis in 0..grid.dim() {
        let n = dims[axis];
        let stride = strides[axis];
        for idx in 0..grid.num_cells() {
            let i = (idx / stride) % n;
            let base = idx - i * stride;
            for c in 0..l {
                let mut acc = 0.0;
                for (t, wk) in w.iter().enumerate() {
                    let j = mirror(i as i64 + t as i64 - radius as i64, n);
                    acc += wk * current[(base + j * stride) * l + c];
                }
                next[idx * l + c] = acc;
            }
        }
        std::mem::swap(&mut current, &mut next);
    }
    let mut out = VectorField::undefined(grid.clone(), l);
    for idx in 0..grid.num_cells() {
        out.set(idx, &current[idx * l..(idx + 1) * l]);
    }
    out
}

fn masked(f: &VectorField, radius: usize) -> VectorField {
    let grid = f.grid.clone();
    let w = bump_weights(radius);
    let l = f.components();
    let d = grid.dim();
    let dims = grid.dims().to_vec();
    let span = 2 * radius + 1;
    let stencil = span.pow(d as u32);
    let mut out = VectorField::undefined(grid.clone(), l);
    let mut acc = vec![0.0; l];
    let mut multi = vec![0usize; d];
    let mut nb = vec![0usize; d];
    for idx in 0..grid.num_cells() {
        if !f.is_defined(idx) {
            continue;
        }
        let mut rem = idx;
        for k in 0..d {
            multi[k] = rem / grid.strides()[k];
            rem %= grid.strides()[k];
        }
        acc.fill(0.0);
        let mut mass = 0.0;
        for s in 0..stencil {
            let mut code = s;
            let mut weight = 1.0;
            for k in (0..d).rev() {
                let t = code % span;
                code /= span;
                weight *= w[t];
                nb[k] = mirror(multi[k] as i64 + t as i64 - radius as i64, dims[k]);
            }
            let j = grid.flat_index(&nb);
            if f.is_defined(j) {
                mass += weight;
                for (a, v) in acc.iter_mut().zip(f.value(j)) {
                    *a += weight * v;
                }
            }
        }
        for a in acc.iter_mut() {
            *a /= mass;
        }
        out.set(idx, &acc);
    }
    out
}
