//! Kernel conditional-independence statistic and its unconditional (HSIC) fallback.
//!
//! Only raw statistics are computed. There is no null distribution, so no
//! p-values: the classifier compares statistics between two fitted models.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::{center, gram, resolve_bandwidth, BandwidthPolicy, GramMatrix};

pub const DEFAULT_RIDGE: f64 = 1e-3;

/// Negative statistics down to this value are roundoff and get clamped to 0.
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-10;

/// Smallest sample accepted by either statistic.
pub const MIN_ROWS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KciConfig {
    bandwidth_policy: BandwidthPolicy,
    ridge: f64,
}

impl Default for KciConfig {
    fn default() -> Self {
        Self {
            bandwidth_policy: BandwidthPolicy::heuristic(),
            ridge: DEFAULT_RIDGE,
        }
    }
}

impl KciConfig {
    pub fn new(bandwidth_policy: BandwidthPolicy, ridge: f64) -> Result<Self> {
        if !(ridge.is_finite() && ridge > 0.0) {
            return Err(Error::invalid(format!("ridge must be finite and > 0, got {ridge}")));
        }
        Ok(Self {
            bandwidth_policy,
            ridge,
        })
    }

    pub fn bandwidth_policy(&self) -> BandwidthPolicy {
        self.bandwidth_policy
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }
}

/// A statistic value with the settings that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KciResult {
    pub statistic: f64,
    pub n: usize,
    /// Bandwidth of the regressor and residual kernels.
    pub bandwidth_xu: f64,
    /// Bandwidth of the conditioning-set kernel; `None` for HSIC.
    pub bandwidth_w: Option<f64>,
    /// Ridge of the conditioning operator; `None` for HSIC.
    pub ridge: Option<f64>,
    pub conditional: bool,
}

/// `R_W = I - K_W (K_W + ridge I)^-1` for a centered conditioning-set Gram matrix.
///
/// Evaluated as `ridge (K_W + ridge I)^-1`, which is the same matrix; the
/// eigenvalues are `ridge / (mu_i + ridge)` for the eigenvalues `mu_i` of `K_W`.
pub fn ridge_residual_operator(kw_centered: &GramMatrix, ridge: f64) -> Result<DMatrix<f64>> {
    if !kw_centered.is_centered() {
        return Err(Error::invalid("conditioning Gram matrix must be centered"));
    }
    if !(ridge.is_finite() && ridge > 0.0) {
        return Err(Error::invalid(format!("ridge must be finite and > 0, got {ridge}")));
    }
    residual_operator(kw_centered.values(), ridge)
}

pub(crate) fn residual_operator(kw: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let n = kw.nrows();
    let mut shifted = kw.clone();
    for i in 0..n {
        shifted[(i, i)] += ridge;
    }
    let chol = shifted.cholesky().ok_or_else(|| {
        Error::numeric("conditioning kernel plus ridge is not positive definite")
    })?;
    let mut r = chol.inverse();
    r *= ridge;
    // the Cholesky inverse is symmetric only up to roundoff
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (r[(i, j)] + r[(j, i)]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

fn check_rows(parts: &[(&str, &DMatrix<f64>)]) -> Result<usize> {
    let n = parts[0].1.nrows();
    for (name, m) in parts {
        if m.nrows() != n {
            return Err(Error::invalid(format!(
                "row-count mismatch: {} has {} rows, expected {n}",
                name,
                m.nrows()
            )));
        }
        if m.ncols() == 0 {
            return Err(Error::invalid(format!("{name} has no columns")));
        }
    }
    if n < MIN_ROWS {
        return Err(Error::invalid(format!(
            "independence statistics need at least {MIN_ROWS} rows, got {n}"
        )));
    }
    Ok(n)
}

/// Sum of the elementwise product, i.e. `tr(A B)` for symmetric `B`.
fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn clamp_statistic(value: f64) -> Result<f64> {
    if value.is_nan() {
        return Err(Error::numeric("statistic is NaN"));
    }
    if value >= 0.0 {
        Ok(value)
    } else if value >= -NEGATIVE_CLAMP_TOL {
        Ok(0.0)
    } else {
        Err(Error::numeric(format!(
            "statistic {value:e} is negative beyond roundoff; kernel input is not PSD"
        )))
    }
}

/// `(1/n) tr(R K_xaug R . R K_u R)` with `R` the ridge residual operator of the
/// centered conditioning-set kernel.
///
/// `x_aug` is the regressor stacked with the conditioning set, `u` the residual.
pub fn kci_statistic(
    x_aug: &DMatrix<f64>,
    u: &DMatrix<f64>,
    w: &DMatrix<f64>,
    cfg: &KciConfig,
) -> Result<KciResult> {
    if w.ncols() == 0 {
        return Err(Error::invalid(
            "conditioning set is empty; use the unconditional statistic",
        ));
    }
    let n = check_rows(&[("x_aug", x_aug), ("u", u), ("w", w)])?;
    let policy = cfg.bandwidth_policy;
    let bw_xu = resolve_bandwidth(n, policy, false);
    let bw_w = resolve_bandwidth(n, policy, true);

    let kx = center(&gram(x_aug, bw_xu)?).into_values();
    let ku = center(&gram(u, bw_xu)?).into_values();
    let kw = center(&gram(w, bw_w)?);
    let r = ridge_residual_operator(&kw, cfg.ridge)?;

    let kx_w = &r * kx * &r;
    let ku_w = &r * ku * &r;
    let statistic = clamp_statistic(trace_of_product(&kx_w, &ku_w) / n as f64)?;
    Ok(KciResult {
        statistic,
        n,
        bandwidth_xu: bw_xu,
        bandwidth_w: Some(bw_w),
        ridge: Some(cfg.ridge),
        conditional: true,
    })
}

/// `(1/n^2) tr(K_x K_u)` with both kernels centered.
pub fn hsic_statistic(
    x: &DMatrix<f64>,
    u: &DMatrix<f64>,
    policy: BandwidthPolicy,
) -> Result<KciResult> {
    let n = check_rows(&[("x", x), ("u", u)])?;
    let bw = resolve_bandwidth(n, policy, false);
    let kx = center(&gram(x, bw)?);
    let ku = center(&gram(u, bw)?);
    let nf = n as f64;
    let statistic = clamp_statistic(trace_of_product(kx.values(), ku.values()) / (nf * nf))?;
    Ok(KciResult {
        statistic,
        n,
        bandwidth_xu: bw,
        bandwidth_w: None,
        ridge: None,
        conditional: false,
    })
}
