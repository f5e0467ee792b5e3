//! Index arithmetic for vectors over a tensor product of factors. The last
//! axis varies fastest.

use std::ops::{Add, Mul};

use num_complex::Complex64;

pub trait Scalar: Copy + Add<Output = Self> + Mul<Output = Self> + Send + Sync {
    fn zero() -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
}

pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Offsets of every multi-index over `axes` (first axis most significant).
pub fn offsets(dims: &[usize], strides: &[usize], axes: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &a in axes {
        out = out
            .into_iter()
            .flat_map(|base| (0..dims[a]).map(move |i| base + i * strides[a]))
            .collect();
    }
    out
}

fn complement(n: usize, axes: &[usize]) -> Vec<usize> {
    (0..n).filter(|a| !axes.contains(a)).collect()
}

/// Applies the row-major D×D matrix `m` on the given axes.
pub fn apply_on_axes<T: Scalar>(v: &[T], dims: &[usize], axes: &[usize], m: &[T]) -> Vec<T> {
    let st = strides(dims);
    let sel = offsets(dims, &st, axes);
    let rest = offsets(dims, &st, &complement(dims.len(), axes));
    let d = sel.len();
    debug_assert_eq!(m.len(), d * d);
    let mut out = vec![T::zero(); v.len()];
    let mut gathered = vec![T::zero(); d];
    for &r in &rest {
        for (j, &o) in sel.iter().enumerate() {
            gathered[j] = v[r + o];
        }
        for (k, &o) in sel.iter().enumerate() {
            let row = &m[k * d..(k + 1) * d];
            let mut acc = T::zero();
            for j in 0..d {
                acc = acc + row[j] * gathered[j];
            }
            out[r + o] = acc;
        }
    }
    out
}

/// Reorders axes: output axis i is input axis `perm[i]`.
pub fn permute_axes<T: Scalar>(v: &[T], dims: &[usize], perm: &[usize]) -> Vec<T> {
    let src = offsets(dims, &strides(dims), perm);
    debug_assert_eq!(src.len(), v.len());
    src.into_iter().map(|o| v[o]).collect()
}

/// Sums out the given axes of a vector (classical marginal).
pub fn marginal<T: Scalar>(v: &[T], dims: &[usize], traced: &[usize]) -> Vec<T> {
    let st = strides(dims);
    let kept = offsets(dims, &st, &complement(dims.len(), traced));
    let tr = offsets(dims, &st, traced);
    kept.iter()
        .map(|&k| tr.iter().fold(T::zero(), |acc, &t| acc + v[k + t]))
        .collect()
}

/// Partial trace of a row-major density matrix over the given factors.
pub fn partial_trace(rho: &[Complex64], dims: &[usize], traced: &[usize]) -> Vec<Complex64> {
    let n: usize = dims.iter().product();
    let st = strides(dims);
    let kept = offsets(dims, &st, &complement(dims.len(), traced));
    let tr = offsets(dims, &st, traced);
    let k = kept.len();
    let mut out = vec![Complex64::new(0.0, 0.0); k * k];
    for (i, &ri) in kept.iter().enumerate() {
        for (j, &cj) in kept.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &t in &tr {
                acc += rho[(ri + t) * n + cj + t];
            }
            out[i * k + j] = acc;
        }
    }
    out
}
