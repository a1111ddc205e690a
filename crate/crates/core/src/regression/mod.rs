//! Additive regression with penalized cubic B-splines (P-splines) and
//! unpenalized categorical level effects.
//!
//! All terms are solved jointly in one penalized least-squares system. Each
//! spline term carries its own smoothing parameter, chosen by generalized
//! cross-validation on a fixed 17-point log grid `10^-4 ..= 10^4`. Every
//! term is constrained to have zero mean over the training rows, so the
//! intercept carries the level of the response.

mod bspline;

pub use bspline::SplineBasis;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_SPLINE_BASIS: usize = 10;
pub const SMOOTHING_GRID_LEN: usize = 17;

/// Above this many candidate combinations the smoothing search switches
/// from the full grid to coordinate-wise sweeps.
const EXHAUSTIVE_SEARCH_LIMIT: usize = SMOOTHING_GRID_LEN * SMOOTHING_GRID_LEN;
const MAX_SWEEPS: usize = 20;

/// `10^-4, 10^-3.5, ..., 10^4`.
pub fn smoothing_grid() -> [f64; SMOOTHING_GRID_LEN] {
    std::array::from_fn(|i| 10f64.powf(-4.0 + 0.5 * i as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermKind {
    Spline { n_basis: usize },
    Categorical { levels: Vec<f64> },
}

/// One additive term: which covariate column it reads and how.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSpec {
    column: usize,
    kind: TermKind,
}

impl TermSpec {
    pub fn spline(column: usize) -> Self {
        Self {
            column,
            kind: TermKind::Spline {
                n_basis: DEFAULT_SPLINE_BASIS,
            },
        }
    }

    pub fn spline_with_basis(column: usize, n_basis: usize) -> Result<Self> {
        if n_basis < 4 {
            return Err(Error::invalid(format!(
                "spline term needs at least 4 basis functions, got {n_basis}"
            )));
        }
        Ok(Self {
            column,
            kind: TermKind::Spline { n_basis },
        })
    }

    /// Level codes are compared exactly; duplicates are dropped.
    pub fn categorical(column: usize, levels: &[f64]) -> Result<Self> {
        let mut levels: Vec<f64> = levels.to_vec();
        if levels.is_empty() || levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("categorical term needs a non-empty finite level set"));
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        Ok(Self {
            column,
            kind: TermKind::Categorical { levels },
        })
    }

    pub fn column(&self) -> usize {
        self.column
    }

    pub fn kind(&self) -> &TermKind {
        &self.kind
    }

    fn dimension(&self) -> usize {
        match &self.kind {
            TermKind::Spline { n_basis } => *n_basis,
            TermKind::Categorical { levels } => levels.len(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub enum Smoothing {
    /// Per-term GCV over [`smoothing_grid`].
    #[default]
    Gcv,
    /// One value per spline term, in term order.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitOptions {
    pub smoothing: Smoothing,
}

#[derive(Debug, Clone, PartialEq)]
enum TermBasis {
    Spline(SplineBasis),
    Categorical(Vec<f64>),
}

impl TermBasis {
    fn dimension(&self) -> usize {
        match self {
            TermBasis::Spline(b) => b.n_basis(),
            TermBasis::Categorical(levels) => levels.len(),
        }
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        match self {
            TermBasis::Spline(b) => b.eval_into(x, out),
            TermBasis::Categorical(levels) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let idx = levels.iter().position(|&l| l == x).ok_or_else(|| {
                    Error::invalid(format!("categorical value {x} is not a known level"))
                })?;
                out[idx] = 1.0;
            }
        }
        Ok(())
    }
}

/// A fitted additive term, with coefficients on the unconstrained basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedTerm {
    column: usize,
    basis: TermBasis,
    coefficients: Vec<f64>,
    smoothing: Option<f64>,
}

impl FittedTerm {
    pub fn column(&self) -> usize {
        self.column
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `None` for unpenalized categorical terms.
    pub fn smoothing(&self) -> Option<f64> {
        self.smoothing
    }

    pub fn spline_basis(&self) -> Option<&SplineBasis> {
        match &self.basis {
            TermBasis::Spline(b) => Some(b),
            TermBasis::Categorical(_) => None,
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let mut row = vec![0.0; self.basis.dimension()];
        self.basis.eval_into(x, &mut row)?;
        Ok(row.iter().zip(&self.coefficients).map(|(b, c)| b * c).sum())
    }
}

/// Penalized additive fit; immutable and shareable across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedAdditiveModel {
    intercept: f64,
    terms: Vec<FittedTerm>,
    n_columns: usize,
    n_train: usize,
    training_rss: f64,
}

impl FittedAdditiveModel {
    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn terms(&self) -> &[FittedTerm] {
        &self.terms
    }

    /// Number of covariate columns the model expects.
    pub fn n_columns(&self) -> usize {
        self.n_columns
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn training_rss(&self) -> f64 {
        self.training_rss
    }

    /// Per-term contributions, one column per term.
    pub fn term_contributions(&self, covariates: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_schema(covariates)?;
        let m = covariates.nrows();
        let mut out = DMatrix::zeros(m, self.terms.len());
        for (t, term) in self.terms.iter().enumerate() {
            let mut row = vec![0.0; term.basis.dimension()];
            for i in 0..m {
                term.basis.eval_into(covariates[(i, term.column)], &mut row)?;
                out[(i, t)] = row.iter().zip(&term.coefficients).map(|(b, c)| b * c).sum();
            }
        }
        Ok(out)
    }

    /// Intercept plus the sum of the term contributions. Spline inputs outside
    /// the training range are evaluated at the nearest boundary knot.
    pub fn predict(&self, covariates: &DMatrix<f64>) -> Result<Vec<f64>> {
        let contrib = self.term_contributions(covariates)?;
        Ok((0..covariates.nrows())
            .map(|i| self.intercept + contrib.row(i).sum())
            .collect())
    }

    /// `y - predict(covariates)`, without re-centering.
    pub fn residuals(&self, y: &[f64], covariates: &DMatrix<f64>) -> Result<Vec<f64>> {
        if y.len() != covariates.nrows() {
            return Err(Error::invalid(format!(
                "response has {} rows but covariates have {}",
                y.len(),
                covariates.nrows()
            )));
        }
        let fitted = self.predict(covariates)?;
        Ok(y.iter().zip(fitted).map(|(a, b)| a - b).collect())
    }

    fn check_schema(&self, covariates: &DMatrix<f64>) -> Result<()> {
        if covariates.ncols() != self.n_columns {
            return Err(Error::invalid(format!(
                "model was fitted on {} covariate columns, got {}",
                self.n_columns,
                covariates.ncols()
            )));
        }
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariates contain non-finite values"));
        }
        Ok(())
    }
}

/// Fits with GCV smoothing selection.
pub fn fit_additive(
    y: &[f64],
    covariates: &DMatrix<f64>,
    terms: &[TermSpec],
) -> Result<FittedAdditiveModel> {
    fit_additive_with(y, covariates, terms, &FitOptions::default())
}

/// Penalized design in the constrained parameterization.
struct Design {
    x: DMatrix<f64>,
    /// Per term: offset of its block in `x`, the null-space map, and the
    /// penalty block (spline terms only).
    blocks: Vec<Block>,
}

struct Block {
    offset: usize,
    constraint: DMatrix<f64>,
    penalty: Option<DMatrix<f64>>,
}

pub fn fit_additive_with(
    y: &[f64],
    covariates: &DMatrix<f64>,
    terms: &[TermSpec],
    options: &FitOptions,
) -> Result<FittedAdditiveModel> {
    let n = covariates.nrows();
    if y.len() != n {
        return Err(Error::invalid(format!(
            "response has {} rows but covariates have {n}",
            y.len()
        )));
    }
    if y.iter().chain(covariates.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression inputs contain non-finite values"));
    }
    for t in terms {
        if t.column >= covariates.ncols() {
            return Err(Error::invalid(format!(
                "term column {} out of range for {} covariates",
                t.column,
                covariates.ncols()
            )));
        }
    }
    let p = 1 + terms.iter().map(|t| t.dimension() - 1).sum::<usize>();
    if n <= p {
        return Err(Error::invalid(format!(
            "need more rows than basis dimension: n = {n}, dimension = {p}"
        )));
    }
    let n_spline = terms
        .iter()
        .filter(|t| matches!(t.kind, TermKind::Spline { .. }))
        .count();
    if let Smoothing::Fixed(values) = &options.smoothing {
        if values.len() != n_spline {
            return Err(Error::invalid(format!(
                "{} smoothing values given for {n_spline} spline terms",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("smoothing parameters must be finite and > 0"));
        }
    }

    let bases = terms
        .iter()
        .map(|t| build_basis(t, covariates))
        .collect::<Result<Vec<_>>>()?;
    let design = build_design(&bases, terms, covariates, p)?;
    let yv = DVector::from_column_slice(y);
    let xtx = design.x.transpose() * &design.x;
    let xty = design.x.transpose() * &yv;
    let solver = PenalizedSolver {
        design: &design,
        xtx: &xtx,
        xty: &xty,
        y: &yv,
    };

    let lambdas = match &options.smoothing {
        Smoothing::Fixed(values) => values.clone(),
        Smoothing::Gcv => select_smoothing(&solver, n_spline),
    };
    let fit = solver
        .solve(&lambdas)
        .ok_or_else(|| Error::numeric("penalized normal equations are singular"))?;

    let intercept = fit.beta[0];
    let mut fitted_terms = Vec::with_capacity(terms.len());
    let mut spline_idx = 0;
    for ((term, basis), block) in terms.iter().zip(bases).zip(&design.blocks) {
        let reduced = fit
            .beta
            .rows(block.offset, block.constraint.ncols())
            .into_owned();
        let coefficients = (&block.constraint * reduced).iter().copied().collect();
        let smoothing = match basis {
            TermBasis::Spline(_) => {
                spline_idx += 1;
                Some(lambdas[spline_idx - 1])
            }
            TermBasis::Categorical(_) => None,
        };
        fitted_terms.push(FittedTerm {
            column: term.column,
            basis,
            coefficients,
            smoothing,
        });
    }
    if !fit.rss.is_finite() {
        return Err(Error::numeric("fit produced a non-finite residual sum of squares"));
    }
    Ok(FittedAdditiveModel {
        intercept,
        terms: fitted_terms,
        n_columns: covariates.ncols(),
        n_train: n,
        training_rss: fit.rss,
    })
}

fn build_basis(term: &TermSpec, covariates: &DMatrix<f64>) -> Result<TermBasis> {
    let col: Vec<f64> = covariates.column(term.column).iter().copied().collect();
    match &term.kind {
        TermKind::Spline { n_basis } => Ok(TermBasis::Spline(
            SplineBasis::from_data(&col, *n_basis)
                .map_err(|e| e.context(&format!("covariate column {}", term.column)))?,
        )),
        TermKind::Categorical { levels } => {
            for &l in levels {
                if !col.contains(&l) {
                    return Err(Error::invalid(format!(
                        "level {l} of covariate column {} is absent from the training rows",
                        term.column
                    )));
                }
            }
            Ok(TermBasis::Categorical(levels.clone()))
        }
    }
}

/// Orthonormal basis of the complement of `c`, from a Householder reflection.
fn null_space_of(c: &[f64]) -> DMatrix<f64> {
    let k = c.len();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v = DVector::from_column_slice(c);
    v[0] += if c[0] >= 0.0 { norm } else { -norm };
    let vtv = v.norm_squared();
    let q = DMatrix::<f64>::identity(k, k) - (&v * v.transpose()) * (2.0 / vtv);
    q.columns(1, k - 1).into_owned()
}

fn build_design(
    bases: &[TermBasis],
    terms: &[TermSpec],
    covariates: &DMatrix<f64>,
    p: usize,
) -> Result<Design> {
    let n = covariates.nrows();
    let mut x = DMatrix::zeros(n, p);
    x.column_mut(0).fill(1.0);
    let mut blocks = Vec::with_capacity(bases.len());
    let mut offset = 1;
    for (basis, term) in bases.iter().zip(terms) {
        let k = basis.dimension();
        let mut raw = DMatrix::zeros(n, k);
        let mut row = vec![0.0; k];
        for i in 0..n {
            basis.eval_into(covariates[(i, term.column)], &mut row)?;
            raw.row_mut(i).copy_from_slice(&row);
        }
        let sums: Vec<f64> = raw.column_iter().map(|c| c.sum()).collect();
        let constraint = null_space_of(&sums);
        let reduced = &raw * &constraint;
        x.columns_mut(offset, k - 1).copy_from(&reduced);

        let penalty = match basis {
            TermBasis::Spline(b) => {
                let d = b.difference_matrix() * &constraint;
                let s = d.transpose() * d;
                // scale the penalty to the data block so one grid serves every term
                let gram = reduced.transpose() * &reduced;
                let scale = gram.norm() / s.norm();
                Some(s * scale)
            }
            TermBasis::Categorical(_) => None,
        };
        blocks.push(Block {
            offset,
            constraint,
            penalty,
        });
        offset += k - 1;
    }
    Ok(Design { x, blocks })
}

struct PenalizedSolver<'a> {
    design: &'a Design,
    xtx: &'a DMatrix<f64>,
    xty: &'a DVector<f64>,
    y: &'a DVector<f64>,
}

struct Solution {
    beta: DVector<f64>,
    rss: f64,
    edf: f64,
}

impl PenalizedSolver<'_> {
    fn solve(&self, lambdas: &[f64]) -> Option<Solution> {
        let mut a = self.xtx.clone();
        let mut spline = 0;
        for block in &self.design.blocks {
            if let Some(s) = &block.penalty {
                let lambda = lambdas[spline];
                spline += 1;
                let dim = s.nrows();
                let mut view = a.view_mut((block.offset, block.offset), (dim, dim));
                view += s * lambda;
            }
        }
        let chol = a.cholesky()?;
        let beta = chol.solve(self.xty);
        let hat = chol.solve(self.xtx);
        let edf = hat.trace();
        let resid = self.y - &self.design.x * &beta;
        let rss = resid.norm_squared();
        if !(rss.is_finite() && edf.is_finite()) {
            return None;
        }
        Some(Solution { beta, rss, edf })
    }

    fn gcv(&self, lambdas: &[f64]) -> f64 {
        let n = self.y.len() as f64;
        match self.solve(lambdas) {
            Some(s) if n - s.edf > 0.0 => n * s.rss / ((n - s.edf) * (n - s.edf)),
            _ => f64::INFINITY,
        }
    }
}

/// Minimizes GCV over the grid; ties go to the later, i.e. larger, candidate.
fn select_smoothing(solver: &PenalizedSolver<'_>, n_spline: usize) -> Vec<f64> {
    let grid = smoothing_grid();
    if n_spline == 0 {
        return Vec::new();
    }
    let combos = SMOOTHING_GRID_LEN.checked_pow(n_spline as u32);
    if combos.is_some_and(|c| c <= EXHAUSTIVE_SEARCH_LIMIT) {
        let mut best = (f64::INFINITY, vec![grid[SMOOTHING_GRID_LEN / 2]; n_spline]);
        let mut idx = vec![0usize; n_spline];
        loop {
            let lambdas: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
            let score = solver.gcv(&lambdas);
            if score <= best.0 {
                best = (score, lambdas);
            }
            // odometer increment, last term fastest
            let mut pos = n_spline;
            loop {
                if pos == 0 {
                    return best.1;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < SMOOTHING_GRID_LEN {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    let mut current = vec![grid[SMOOTHING_GRID_LEN / 2]; n_spline];
    let mut current_score = solver.gcv(&current);
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for term in 0..n_spline {
            let mut trial = current.clone();
            for &g in &grid {
                trial[term] = g;
                let score = solver.gcv(&trial);
                if score < current_score || (score == current_score && g > current[term]) {
                    current_score = score;
                    current[term] = g;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    current
}
