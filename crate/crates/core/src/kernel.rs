//! Gaussian kernel, Gram matrices and the centering operator.
//!
//! The kernel is parameterized as `k(v, v') = exp(-|v - v'|^2 / lambda)`,
//! i.e. `lambda` plays the role of `2 sigma^2`. Gram matrices never
//! materialize a feature map.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Sample size at or below which the heuristic picks the widest bandwidth.
pub const SMALL_SAMPLE_MAX: usize = 200;
/// Sample size above which the heuristic picks the narrowest bandwidth.
pub const LARGE_SAMPLE_MIN: usize = 1200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthMode {
    /// 0.8 for n <= 200, 0.3 for n > 1200, 0.5 otherwise.
    HeuristicByN,
    Fixed(f64),
}

/// How kernel bandwidths are chosen for a given sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthPolicy {
    mode: BandwidthMode,
    w_halving: bool,
}

impl Default for BandwidthPolicy {
    fn default() -> Self {
        Self::heuristic()
    }
}

impl BandwidthPolicy {
    pub fn heuristic() -> Self {
        Self {
            mode: BandwidthMode::HeuristicByN,
            w_halving: true,
        }
    }

    pub fn fixed(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::invalid(format!(
                "fixed bandwidth must be finite and > 0, got {value}"
            )));
        }
        Ok(Self {
            mode: BandwidthMode::Fixed(value),
            w_halving: true,
        })
    }

    /// Toggles halving of the heuristic bandwidth for the conditioning-set kernel.
    pub fn with_w_halving(mut self, on: bool) -> Self {
        self.w_halving = on;
        self
    }

    pub fn mode(&self) -> BandwidthMode {
        self.mode
    }

    pub fn w_halving(&self) -> bool {
        self.w_halving
    }
}

/// Resolves the bandwidth used for a sample of `n` rows.
///
/// Halving for the conditioning set only applies to the heuristic; a fixed
/// bandwidth is returned unchanged.
pub fn resolve_bandwidth(n: usize, policy: BandwidthPolicy, is_conditioning_set: bool) -> f64 {
    match policy.mode {
        BandwidthMode::Fixed(v) => v,
        BandwidthMode::HeuristicByN => {
            let base = if n <= SMALL_SAMPLE_MAX {
                0.8
            } else if n > LARGE_SAMPLE_MIN {
                0.3
            } else {
                0.5
            };
            if is_conditioning_set && policy.w_halving {
                base / 2.0
            } else {
                base
            }
        }
    }
}

/// Gaussian kernel between two points of equal dimension.
pub fn gauss_kernel(v: &[f64], v2: &[f64], lambda: f64) -> Result<f64> {
    if v.len() != v2.len() {
        return Err(Error::invalid(format!(
            "kernel arguments differ in dimension: {} vs {}",
            v.len(),
            v2.len()
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be > 0, got {lambda}")));
    }
    Ok(gauss_unchecked(v, v2, lambda))
}

#[inline]
fn gauss_unchecked(v: &[f64], v2: &[f64], lambda: f64) -> f64 {
    let sq: f64 = v.iter().zip(v2).map(|(a, b)| (a - b) * (a - b)).sum();
    (-sq / lambda).exp()
}

/// Dense symmetric kernel matrix together with the bandwidth that built it.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: DMatrix<f64>,
    bandwidth: f64,
    centered: bool,
}

impl GramMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Smallest and largest eigenvalue.
    pub fn eigen_range(&self) -> (f64, f64) {
        let eig = self.values.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    /// PSD up to `rel_tol` times the largest eigenvalue.
    pub fn is_psd(&self, rel_tol: f64) -> bool {
        let (min, max) = self.eigen_range();
        min >= -rel_tol * max.abs().max(1.0)
    }
}

/// Uncentered Gram matrix of the rows of `samples`.
pub fn gram(samples: &DMatrix<f64>, lambda: f64) -> Result<GramMatrix> {
    let (n, d) = samples.shape();
    if n == 0 || d == 0 {
        return Err(Error::invalid(format!("gram needs n >= 1 and d >= 1, got {n}x{d}")));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be > 0, got {lambda}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("gram input contains non-finite values"));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| samples.row(i).iter().copied().collect())
        .collect();

    // Each entry is computed independently, so the result does not depend on
    // how rayon schedules the rows.
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        gauss_unchecked(&rows[i], &rows[j], lambda)
                    }
                })
                .collect()
        })
        .collect();

    let mut values = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &k) in row.iter().enumerate() {
            let j = i + off;
            values[(i, j)] = k;
            values[(j, i)] = k;
        }
    }
    Ok(GramMatrix {
        values,
        bandwidth: lambda,
        centered: false,
    })
}

/// Applies `H K H` with `H = I - 11'/n`.
pub fn center(g: &GramMatrix) -> GramMatrix {
    GramMatrix {
        values: center_matrix(&g.values),
        bandwidth: g.bandwidth,
        centered: true,
    }
}

/// Double-centers a square symmetric matrix, keeping the output exactly symmetric.
pub(crate) fn center_matrix(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = k[(i, j)] - row_means[i] - row_means[j] + grand;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn kernel_identity_is_one() {
        let v = [0.3, -1.2];
        assert_eq!(gauss_kernel(&v, &v, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn kernel_closed_forms() {
        assert_abs_diff_eq!(
            gauss_kernel(&[0.0], &[1.0], 0.5).unwrap(),
            (-2.0f64).exp(),
            epsilon = 1e-15
        );
        let k = gauss_kernel(&[1.0, 2.0], &[3.0, 1.0], 2.0).unwrap();
        assert_abs_diff_eq!(k, (-2.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(k, 0.082085, epsilon = 1e-6);
    }

    #[test]
    fn kernel_dimension_mismatch() {
        assert!(matches!(
            gauss_kernel(&[1.0], &[1.0, 2.0], 1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn bandwidth_boundaries() {
        let p = BandwidthPolicy::heuristic();
        let cases = [
            (1, 0.8),
            (200, 0.8),
            (201, 0.5),
            (500, 0.5),
            (1200, 0.5),
            (1201, 0.3),
            (100_000, 0.3),
        ];
        for (n, want) in cases {
            assert_eq!(resolve_bandwidth(n, p, false), want, "n={n}");
            assert_eq!(resolve_bandwidth(n, p, true), want / 2.0, "n={n}");
        }
        assert_eq!(resolve_bandwidth(500, p, true), 0.25);
        let no_halving = p.with_w_halving(false);
        assert_eq!(resolve_bandwidth(500, no_halving, true), 0.5);
    }

    #[test]
    fn fixed_bandwidth_passes_through() {
        let p = BandwidthPolicy::fixed(1.7).unwrap();
        assert_eq!(resolve_bandwidth(10, p, false), 1.7);
        assert_eq!(resolve_bandwidth(10, p, true), 1.7);
        assert!(BandwidthPolicy::fixed(0.0).is_err());
        assert!(BandwidthPolicy::fixed(f64::NAN).is_err());
    }

    #[test]
    fn gram_small_cases() {
        let g = gram(&DMatrix::from_row_slice(1, 1, &[4.2]), 1.0).unwrap();
        assert_eq!(g.values(), &DMatrix::from_element(1, 1, 1.0));

        let g = gram(&DMatrix::from_row_slice(2, 1, &[3.0, 3.0]), 1.0).unwrap();
        assert_eq!(g.values(), &DMatrix::from_element(2, 2, 1.0));

        let g = gram(&DMatrix::from_row_slice(2, 1, &[0.0, 1.0]), 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert_eq!(g.values(), &DMatrix::from_row_slice(2, 2, &[1.0, e, e, 1.0]));
        assert!(!g.is_centered());
        assert_eq!(g.bandwidth(), 1.0);
    }

    #[test]
    fn gram_rejects_non_finite() {
        let s = DMatrix::from_row_slice(2, 1, &[0.0, f64::NAN]);
        assert!(matches!(gram(&s, 1.0), Err(Error::InvalidArgument(_))));
        let s = DMatrix::from_row_slice(2, 1, &[0.0, f64::INFINITY]);
        assert!(gram(&s, 1.0).is_err());
    }

    #[test]
    fn center_one_by_one_is_zero() {
        let g = gram(&DMatrix::from_row_slice(1, 1, &[0.0]), 1.0).unwrap();
        assert_eq!(center(&g).values()[(0, 0)], 0.0);
    }

    #[test]
    fn center_two_by_two_closed_form() {
        let g = gram(&DMatrix::from_row_slice(2, 1, &[0.0, 0.7]), 0.9).unwrap();
        let a = g.values()[(0, 1)];
        let c = center(&g);
        let h = (1.0 - a) / 2.0;
        let want = DMatrix::from_row_slice(2, 2, &[h, -h, -h, h]);
        assert!((c.values() - want).abs().max() < 1e-15);
        assert!(c.is_centered());
    }

    #[test]
    fn center_three_by_three_matches_dense_oracle() {
        // Frozen from an explicit H K H product (numpy, float64) for rows
        // (0), (1), (2) at lambda = 1.
        let want = DMatrix::from_row_slice(
            3,
            3,
            &[
                0.576775395789131,
                -0.1718664304669961,
                -0.4049089653221349,
                -0.17186643046699612,
                0.34373286093399225,
                -0.17186643046699612,
                -0.40490896532213494,
                -0.1718664304669961,
                0.5767753957891311,
            ],
        );
        let g = gram(&DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]), 1.0).unwrap();
        let c = center(&g);
        assert!((c.values() - &want).abs().max() < 1e-14);

        // and the same product assembled here with an explicit H
        let h = DMatrix::<f64>::identity(3, 3) - DMatrix::from_element(3, 3, 1.0 / 3.0);
        let explicit = &h * g.values() * &h;
        assert!((c.values() - explicit).abs().max() < 1e-14);
    }

    #[test]
    fn constant_rows_center_to_zero() {
        let g = gram(&DMatrix::from_element(5, 2, 0.25), 0.3).unwrap();
        assert!(center(&g).values().abs().max() < 1e-15);
    }

    fn sample_matrix() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..12, 1usize..4).prop_flat_map(|(n, d)| {
            prop::collection::vec(-3.0f64..3.0, n * d)
                .prop_map(move |v| DMatrix::from_row_slice(n, d, &v))
        })
    }

    proptest! {
        #[test]
        fn kernel_symmetric_and_bounded(
            a in prop::collection::vec(-5.0f64..5.0, 3),
            b in prop::collection::vec(-5.0f64..5.0, 3),
            lambda in 0.05f64..5.0,
        ) {
            let k1 = gauss_kernel(&a, &b, lambda).unwrap();
            let k2 = gauss_kernel(&b, &a, lambda).unwrap();
            prop_assert_eq!(k1, k2);
            prop_assert!(k1 > 0.0 || a != b);
            prop_assert!(k1 <= 1.0);
        }

        #[test]
        fn gram_symmetric_psd(s in sample_matrix(), lambda in 0.1f64..3.0) {
            let g = gram(&s, lambda).unwrap();
            let v = g.values();
            prop_assert_eq!(v, &v.transpose());
            for i in 0..g.n() {
                prop_assert_eq!(v[(i, i)], 1.0);
            }
            prop_assert!(g.is_psd(1e-8));
        }

        #[test]
        fn centering_annihilates_sums_and_is_idempotent(s in sample_matrix(), lambda in 0.1f64..3.0) {
            let g = gram(&s, lambda).unwrap();
            let c = center(&g);
            let n = g.n() as f64;
            for i in 0..g.n() {
                prop_assert!(c.values().row(i).sum().abs() <= 1e-8 * n);
                prop_assert!(c.values().column(i).sum().abs() <= 1e-8 * n);
            }
            prop_assert_eq!(c.values(), &c.values().transpose());
            prop_assert!(c.is_psd(1e-8));
            let cc = center(&c);
            prop_assert!((cc.values() - c.values()).abs().max() <= 1e-12);
        }
    }
}
