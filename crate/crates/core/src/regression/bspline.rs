//! Clamped cubic B-spline basis with quantile knots and a divided-difference penalty.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const DEGREE: usize = 3;
const ORDER: usize = DEGREE + 1;

/// Cubic B-spline basis over `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    /// Full knot vector, boundary knots repeated `ORDER` times.
    knots: Vec<f64>,
    n_basis: usize,
}

impl SplineBasis {
    /// Places interior knots at equally spaced quantiles of `x`.
    ///
    /// Falls back to equally spaced knots over the range when ties make the
    /// quantile knots coincide.
    pub fn from_data(x: &[f64], n_basis: usize) -> Result<Self> {
        if n_basis < ORDER {
            return Err(Error::invalid(format!(
                "spline basis needs at least {ORDER} functions, got {n_basis}"
            )));
        }
        if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("spline covariate must be non-empty and finite"));
        }
        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let lower = sorted[0];
        let upper = sorted[sorted.len() - 1];
        if upper - lower <= 0.0 {
            return Err(Error::invalid("spline covariate is constant"));
        }
        let n_interior = n_basis - ORDER;
        let min_gap = 1e-8 * (upper - lower);
        let mut interior: Vec<f64> = (1..=n_interior)
            .map(|j| quantile_sorted(&sorted, j as f64 / (n_interior + 1) as f64))
            .collect();
        let distinct = std::iter::once(lower)
            .chain(interior.iter().copied())
            .chain(std::iter::once(upper))
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[1] - w[0] > min_gap);
        if !distinct {
            interior = (1..=n_interior)
                .map(|j| lower + (upper - lower) * j as f64 / (n_interior + 1) as f64)
                .collect();
        }
        let mut knots = vec![lower; ORDER];
        knots.extend(interior);
        knots.extend(std::iter::repeat_n(upper, ORDER));
        Ok(Self { knots, n_basis })
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn lower(&self) -> f64 {
        self.knots[0]
    }

    pub fn upper(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// All basis functions at `x`, clamping `x` into the boundary knots.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_basis];
        self.eval_into(x, &mut out);
        out
    }

    pub(crate) fn eval_into(&self, x: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let x = x.clamp(self.lower(), self.upper());
        let t = &self.knots;
        // span s with t[s] <= x < t[s + 1], the last span closed on the right
        let mut span = self.n_basis - 1;
        for s in DEGREE..self.n_basis {
            if x < t[s + 1] {
                span = s;
                break;
            }
        }
        let mut n = [0.0; ORDER];
        let mut left = [0.0; ORDER];
        let mut right = [0.0; ORDER];
        n[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        for (r, v) in n.iter().enumerate() {
            out[span - DEGREE + r] = *v;
        }
    }

    /// Knot averages at which the coefficients of a linear function are that function.
    pub fn greville(&self) -> Vec<f64> {
        (0..self.n_basis)
            .map(|j| self.knots[j + 1..j + 1 + DEGREE].iter().sum::<f64>() / DEGREE as f64)
            .collect()
    }

    /// Second-order difference matrix taken on slopes between Greville points.
    ///
    /// Its null space is exactly the coefficient vectors of affine functions,
    /// and with uniformly spaced Greville points it is the usual second
    /// difference matrix.
    pub fn difference_matrix(&self) -> DMatrix<f64> {
        let k = self.n_basis;
        let g = self.greville();
        let mean_spacing = (g[k - 1] - g[0]) / (k - 1) as f64;
        let mut slopes = DMatrix::zeros(k - 1, k);
        for j in 0..k - 1 {
            let h = (g[j + 1] - g[j]) / mean_spacing;
            slopes[(j, j)] = -1.0 / h;
            slopes[(j, j + 1)] = 1.0 / h;
        }
        let mut diff = DMatrix::zeros(k - 2, k - 1);
        for j in 0..k - 2 {
            diff[(j, j)] = -1.0;
            diff[(j, j + 1)] = 1.0;
        }
        diff * slopes
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}
