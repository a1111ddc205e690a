//! Straight-from-formula dense computations used as independent test oracles.
//! Shared between unit tests and the integration suites; depends on nalgebra only.

#![allow(dead_code)]

use nalgebra::DMatrix;

pub fn centering(n: usize) -> DMatrix<f64> {
    DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
}

pub fn kernel(samples: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let n = samples.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let diff = samples.row(i) - samples.row(j);
        (-diff.norm_squared() / lambda).exp()
    })
}

pub fn centered_kernel(samples: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let h = centering(samples.nrows());
    &h * kernel(samples, lambda) * &h
}

/// `Q diag(ridge / (mu + ridge)) Q'` from a symmetric eigendecomposition.
pub fn residual_operator_eigen(kw: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let eig = kw.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|mu| ridge / (mu + ridge)));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

pub fn kci(
    x_aug: &DMatrix<f64>,
    u: &DMatrix<f64>,
    w: &DMatrix<f64>,
    bw_xu: f64,
    bw_w: f64,
    ridge: f64,
) -> f64 {
    let n = x_aug.nrows() as f64;
    let r = residual_operator_eigen(&centered_kernel(w, bw_w), ridge);
    let kx = &r * centered_kernel(x_aug, bw_xu) * &r;
    let ku = &r * centered_kernel(u, bw_xu) * &r;
    (kx * ku).trace() / n
}

pub fn hsic(x: &DMatrix<f64>, u: &DMatrix<f64>, bw: f64) -> f64 {
    let n = x.nrows() as f64;
    (centered_kernel(x, bw) * centered_kernel(u, bw)).trace() / (n * n)
}
