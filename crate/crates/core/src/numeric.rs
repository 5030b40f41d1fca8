//! Small numeric helpers shared by several modules: the standard normal
//! distribution, symmetric eigenvalues of small matrices, and order statistics.

use faer::{Mat, Side};
use libm::erfc;

use crate::error::{invalid, Result};

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of the standard normal CDF by bracketed Newton iteration.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("quantile level {p} outside (0,1)")));
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    let mut x = 0.0_f64;
    for _ in 0..200 {
        let f = normal_cdf(x) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = f / normal_pdf(x).max(1e-300);
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Eigenvalues (ascending) of a dense symmetric matrix given row-major.
pub fn symmetric_eigenvalues(dim: usize, data: &[f64]) -> Vec<f64> {
    assert_eq!(data.len(), dim * dim);
    if dim == 0 {
        return Vec::new();
    }
    if dim == 1 {
        return vec![data[0]];
    }
    let m = Mat::<f64>::from_fn(dim, dim, |i, j| 0.5 * (data[i * dim + j] + data[j * dim + i]));
    let evd = m
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("symmetric eigenvalue decomposition");
    let mut vals = evd;
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

pub fn max_eigenvalue(dim: usize, data: &[f64]) -> f64 {
    symmetric_eigenvalues(dim, data)
        .last()
        .copied()
        .unwrap_or(0.0)
}

/// Lower median: the element of rank ⌊(n-1)/2⌋ after sorting.
pub fn lower_median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    values[(values.len() - 1) / 2]
}

/// Conventional median (average of the two middle values on even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear-interpolation quantile at level q in [0,1].
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] * (1.0 - frac) + v[hi] * frac
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// ⌊eps·n⌋ with a guard against representation error (0.29·100 = 28.999…).
pub fn corruption_count(eps: f64, n: usize) -> usize {
    (eps * n as f64 + 1e-9).floor() as usize
}
