// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex helpers on top of `faer`.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Mat<C64>;

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn matvec(m: &CMat, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.ncols(), v.len());
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

pub fn vecmat(v: &[C64], m: &CMat) -> Vec<C64> {
    assert_eq!(m.nrows(), v.len());
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| v[i] * m[(i, j)]).sum())
        .collect()
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs(m: &CMat) -> f64 {
    let mut out = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    m.eigenvalues()
        .map_err(|e| Error::Domain(format!("eigenvalue solver failed: {e:?}")))
}

/// Eigenvalues and right eigenvectors (as columns).
pub fn eigen(m: &CMat) -> Result<(Vec<C64>, CMat)> {
    let evd = m
        .eigen()
        .map_err(|e| Error::Domain(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S();
    let values = (0..m.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// Moore-Penrose pseudoinverse via SVD. Singular values at or below
/// `rel_cutoff * σ_max` are discarded; their count is returned alongside.
pub fn pseudo_inverse(m: &CMat, rel_cutoff: f64) -> Result<(CMat, usize)> {
    let svd = m
        .svd()
        .map_err(|e| Error::Domain(format!("singular value decomposition failed: {e:?}")))?;
    let s = svd.S();
    let u = svd.U();
    let v = svd.V();
    let k = s.dim();
    let sigma: Vec<f64> = (0..k).map(|i| s[i].re).collect();
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_cutoff * sigma_max;
    let mut out = zeros(m.ncols(), m.nrows());
    let mut discarded = 0;
    for (idx, &sv) in sigma.iter().enumerate() {
        if sv <= cutoff {
            discarded += 1;
            continue;
        }
        let inv = 1.0 / sv;
        for i in 0..m.ncols() {
            for j in 0..m.nrows() {
                out[(i, j)] += v[(i, idx)] * u[(j, idx)].conj() * inv;
            }
        }
    }
    Ok((out, discarded))
}
