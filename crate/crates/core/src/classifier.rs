//! Reverse-causality classifier.
//!
//! Fits an additive-noise regression in each direction on one half of the
//! data, residualizes the other half, and prefers the direction whose
//! residuals look more conditionally independent of the regressor given the
//! controls (the smaller kernel statistic).

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::independence::{hsic_statistic, kci_statistic, KciConfig, KciResult};
use crate::regression::{fit_additive, TermSpec, DEFAULT_SPLINE_BASIS};

/// Smallest dataset the classifier accepts.
pub const MIN_ROWS: usize = 8;

/// Which variable is the candidate cause, which the outcome, and what to control for.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    x: String,
    y: String,
    w: Vec<String>,
    seed: u64,
    kci: KciConfig,
    spline_basis: usize,
}

impl ProblemSpec {
    pub fn new(x: impl Into<String>, y: impl Into<String>, w: &[&str]) -> Result<Self> {
        let x = x.into();
        let y = y.into();
        if x == y {
            return Err(Error::invalid(format!("x and y name the same column `{x}`")));
        }
        let mut controls: Vec<String> = Vec::with_capacity(w.len());
        for name in w {
            if *name == x || *name == y {
                return Err(Error::invalid(format!(
                    "control `{name}` is also the cause or outcome candidate"
                )));
            }
            if controls.iter().any(|c| c == name) {
                return Err(Error::invalid(format!("control `{name}` listed twice")));
            }
            controls.push(name.to_string());
        }
        Ok(Self {
            x,
            y,
            w: controls,
            seed: 0,
            kci: KciConfig::default(),
            spline_basis: DEFAULT_SPLINE_BASIS,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_kci(mut self, kci: KciConfig) -> Self {
        self.kci = kci;
        self
    }

    pub fn with_spline_basis(mut self, n_basis: usize) -> Result<Self> {
        TermSpec::spline_with_basis(0, n_basis)?;
        self.spline_basis = n_basis;
        Ok(self)
    }

    /// Same problem with the roles of x and y exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
            ..self.clone()
        }
    }

    pub fn x(&self) -> &str {
        &self.x
    }

    pub fn y(&self) -> &str {
        &self.y
    }

    pub fn w(&self) -> &[String] {
        &self.w
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kci(&self) -> &KciConfig {
        &self.kci
    }

    pub fn spline_basis(&self) -> usize {
        self.spline_basis
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    CausalXtoY,
    CausalYtoX,
    Inconclusive,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::CausalXtoY => "CausalXtoY",
            Outcome::CausalYtoX => "CausalYtoX",
            Outcome::Inconclusive => "Inconclusive",
        }
    }

    pub fn mirrored(&self) -> Outcome {
        match self {
            Outcome::CausalXtoY => Outcome::CausalYtoX,
            Outcome::CausalYtoX => Outcome::CausalXtoY,
            Outcome::Inconclusive => Outcome::Inconclusive,
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CausalXtoY" => Ok(Outcome::CausalXtoY),
            "CausalYtoX" => Ok(Outcome::CausalYtoX),
            "Inconclusive" => Ok(Outcome::Inconclusive),
            other => Err(Error::invalid(format!("unknown outcome `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionDecision {
    pub outcome: Outcome,
    pub stat_causal: f64,
    pub stat_anticausal: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    /// Full statistic record for the x -> y model.
    pub causal: KciResult,
    /// Full statistic record for the y -> x model.
    pub anticausal: KciResult,
}

/// Strict comparison; only exact equality is inconclusive.
pub fn compare(stat_causal: f64, stat_anticausal: f64) -> Outcome {
    if stat_causal < stat_anticausal {
        Outcome::CausalXtoY
    } else if stat_causal > stat_anticausal {
        Outcome::CausalYtoX
    } else {
        Outcome::Inconclusive
    }
}

/// Rescales every continuous column to sample mean 0 and variance 1 (`n - 1`
/// denominator). Categorical columns pass through.
pub fn normalize(data: &Dataset) -> Result<Dataset> {
    data.map_columns(|c| {
        if c.kind() == ColumnKind::Categorical {
            return Ok(c.clone());
        }
        let v = c.values();
        let n = v.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "column `{}` needs at least 2 rows to normalize",
                c.name()
            )));
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if !(var > 0.0) {
            return Err(Error::invalid(format!(
                "column `{}` has zero variance",
                c.name()
            )));
        }
        let sd = var.sqrt();
        Ok(c.with_values(v.iter().map(|x| (x - mean) / sd).collect()))
    })
}

/// Seeded random halving: the first `ceil(n/2)` permuted rows train, the rest test.
pub fn split(data: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data.n_rows(), seed)?;
    Ok((data.select_rows(&train), data.select_rows(&test)))
}

pub(crate) fn split_indices(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < MIN_ROWS {
        return Err(Error::invalid(format!(
            "need at least {MIN_ROWS} rows to split, got {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n.div_ceil(2);
    let mut test = idx.split_off(n_train);
    idx.sort_unstable();
    test.sort_unstable();
    Ok((idx, test))
}

/// Runs the full pipeline: normalize, split, fit both directions, residualize
/// the test half, compute both statistics and compare.
pub fn decide(data: &Dataset, spec: &ProblemSpec) -> Result<DirectionDecision> {
    let mut names: Vec<&str> = vec![spec.x.as_str(), spec.y.as_str()];
    names.extend(spec.w.iter().map(String::as_str));
    let selected = data.select_columns(&names).map_err(|e| e.context("schema"))?;
    for name in [&spec.x, &spec.y] {
        if selected.require(name)?.kind() != ColumnKind::Continuous {
            return Err(Error::invalid(format!(
                "schema: `{name}` must be a continuous column"
            )));
        }
    }

    let normalized = normalize(&selected).map_err(|e| e.context("normalize"))?;
    let (train, test) = split(&normalized, spec.seed).map_err(|e| e.context("split"))?;

    let causal = direction_statistic(&train, &test, &spec.x, &spec.y, spec)
        .map_err(|e| e.context("causal model"))?;
    let anticausal = direction_statistic(&train, &test, &spec.y, &spec.x, spec)
        .map_err(|e| e.context("anticausal model"))?;

    Ok(DirectionDecision {
        outcome: compare(causal.statistic, anticausal.statistic),
        stat_causal: causal.statistic,
        stat_anticausal: anticausal.statistic,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        seed: spec.seed,
        causal,
        anticausal,
    })
}

/// Regresses `outcome` on (`cause`, W) on the training half and returns the
/// statistic for residual independence from `cause` given W on the test half.
fn direction_statistic(
    train: &Dataset,
    test: &Dataset,
    cause: &str,
    outcome: &str,
    spec: &ProblemSpec,
) -> Result<KciResult> {
    let mut regressors: Vec<&Column> = vec![train.require(cause)?];
    for w in &spec.w {
        regressors.push(train.require(w)?);
    }
    let terms = regressors
        .iter()
        .enumerate()
        .map(|(j, c)| match c.kind() {
            ColumnKind::Continuous => TermSpec::spline_with_basis(j, spec.spline_basis),
            ColumnKind::Categorical => TermSpec::categorical(j, &c.levels()),
        })
        .collect::<Result<Vec<_>>>()?;

    let model = fit_additive(
        train.require(outcome)?.values(),
        &regressor_matrix(train, cause, &spec.w)?,
        &terms,
    )?;
    let test_regressors = regressor_matrix(test, cause, &spec.w)?;
    let residuals = model.residuals(test.require(outcome)?.values(), &test_regressors)?;

    let n = test.n_rows();
    let cause_col = DMatrix::from_column_slice(n, 1, test.require(cause)?.values());
    let u = DMatrix::from_column_slice(n, 1, &residuals);
    if spec.w.is_empty() {
        return hsic_statistic(&cause_col, &u, spec.kci.bandwidth_policy());
    }
    let w = kernel_features(test, &spec.w, train)?;
    let x_aug = DMatrix::from_fn(n, 1 + w.ncols(), |i, j| {
        if j == 0 {
            cause_col[(i, 0)]
        } else {
            w[(i, j - 1)]
        }
    });
    kci_statistic(&x_aug, &u, &w, &spec.kci)
}

fn regressor_matrix(data: &Dataset, cause: &str, w: &[String]) -> Result<DMatrix<f64>> {
    let mut cols: Vec<&[f64]> = vec![data.require(cause)?.values()];
    for name in w {
        cols.push(data.require(name)?.values());
    }
    Ok(DMatrix::from_fn(data.n_rows(), cols.len(), |i, j| cols[j][i]))
}

/// Numeric representation of W for the kernels: continuous columns as-is,
/// categorical columns one-hot over the levels seen in either half.
fn kernel_features(data: &Dataset, w: &[String], other: &Dataset) -> Result<DMatrix<f64>> {
    let mut features: Vec<Vec<f64>> = Vec::new();
    for name in w {
        let col = data.require(name)?;
        match col.kind() {
            ColumnKind::Continuous => features.push(col.values().to_vec()),
            ColumnKind::Categorical => {
                let mut levels = col.levels();
                levels.extend(other.require(name)?.levels());
                levels.sort_by(f64::total_cmp);
                levels.dedup();
                for l in levels {
                    features.push(
                        col.values()
                            .iter()
                            .map(|&v| if v == l { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
            }
        }
    }
    Ok(DMatrix::from_fn(data.n_rows(), features.len(), |i, j| {
        features[j][i]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Normal, StandardNormal};

    fn column_stats(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    fn synthetic(n: usize, seed: u64, tau: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nx = Normal::new(0.0, 2f64.sqrt()).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.sample(nx)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| x[i] + tau * x[i] * x[i] + w[i] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        Dataset::new(vec![
            Column::continuous("y", y),
            Column::continuous("x", x),
            Column::continuous("w", w),
        ])
        .unwrap()
    }

    #[test]
    fn normalize_closed_form() {
        let d = Dataset::new(vec![
            Column::continuous("a", vec![1.0, 2.0, 3.0]),
            Column::categorical("g", vec![5.0, 5.0, 7.0]),
        ])
        .unwrap();
        let n = normalize(&d).unwrap();
        assert_eq!(n.require("a").unwrap().values(), &[-1.0, 0.0, 1.0]);
        assert_eq!(n.require("g").unwrap().values(), &[5.0, 5.0, 7.0]);
        let again = normalize(&n).unwrap();
        for (a, b) in again.require("a").unwrap().values().iter().zip(n.require("a").unwrap().values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn normalize_rejects_constant_column() {
        let d = Dataset::new(vec![Column::continuous("flat", vec![2.0; 5])]).unwrap();
        match normalize(&d) {
            Err(Error::InvalidArgument(m)) => assert!(m.contains("flat")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = Dataset::new(vec![Column::continuous("a", (0..10).map(f64::from).collect())]).unwrap();
        let (tr, te) = split(&d, 4).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (5, 5));
        let mut all: Vec<f64> = tr.require("a").unwrap().values().to_vec();
        all.extend(te.require("a").unwrap().values());
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(split(&d, 4).unwrap(), (tr, te));

        let d9 = d.select_rows(&(0..9).collect::<Vec<_>>());
        let (tr, te) = split(&d9, 1).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (5, 4));

        let d7 = d.select_rows(&(0..7).collect::<Vec<_>>());
        assert!(matches!(split(&d7, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn compare_branches() {
        assert_eq!(compare(0.1, 0.2), Outcome::CausalXtoY);
        assert_eq!(compare(0.3, 0.2), Outcome::CausalYtoX);
        assert_eq!(compare(0.2, 0.2), Outcome::Inconclusive);
    }

    #[test]
    fn identical_inputs_are_inconclusive() {
        // x and y carry the same values, so both directions compute the same statistic
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v: Vec<f64> = (0..60).map(|_| rng.sample(StandardNormal)).collect();
        let w: Vec<f64> = (0..60).map(|_| rng.sample(StandardNormal)).collect();
        let d = Dataset::new(vec![
            Column::continuous("a", v.clone()),
            Column::continuous("b", v),
            Column::continuous("w", w),
        ])
        .unwrap();
        let spec = ProblemSpec::new("a", "b", &["w"]).unwrap();
        let dec = decide(&d, &spec).unwrap();
        assert_eq!(dec.stat_causal, dec.stat_anticausal);
        assert_eq!(dec.outcome, Outcome::Inconclusive);
    }

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::new("x", "x", &[]).is_err());
        assert!(ProblemSpec::new("x", "y", &["x"]).is_err());
        assert!(ProblemSpec::new("x", "y", &["w", "w"]).is_err());
        assert!(ProblemSpec::new("x", "y", &["w"]).unwrap().with_spline_basis(3).is_err());
    }

    #[test]
    fn nonlinear_direction_is_found() {
        let d = synthetic(1000, 7, 1.0);
        let spec = ProblemSpec::new("x", "y", &["w"]).unwrap().with_seed(3);
        let dec = decide(&d, &spec).unwrap();
        assert_eq!(dec.outcome, Outcome::CausalXtoY);
        assert_eq!((dec.n_train, dec.n_test), (500, 500));
        assert_eq!(dec.causal.bandwidth_xu, 0.5);
        assert_eq!(dec.causal.bandwidth_w, Some(0.25));
    }

    #[test]
    fn unconditional_fallback_without_controls() {
        let d = synthetic(400, 8, 1.0);
        let spec = ProblemSpec::new("x", "y", &[]).unwrap();
        let dec = decide(&d, &spec).unwrap();
        assert!(!dec.causal.conditional && !dec.anticausal.conditional);
    }

    #[test]
    fn categorical_control_is_supported() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let n = 400;
        let g: Vec<f64> = (0..n).map(|i| (i % 3) as f64).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 1.4).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| x[i] + x[i] * x[i] + g[i] + 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let d = Dataset::new(vec![
            Column::continuous("x", x),
            Column::continuous("y", y),
            Column::categorical("g", g),
        ])
        .unwrap();
        let dec = decide(&d, &ProblemSpec::new("x", "y", &["g"]).unwrap()).unwrap();
        assert!(dec.stat_causal.is_finite() && dec.stat_anticausal.is_finite());
    }

    #[test]
    fn missing_column_and_categorical_target_fail() {
        let d = synthetic(50, 1, 1.0);
        assert!(decide(&d, &ProblemSpec::new("x", "nope", &[]).unwrap()).is_err());
        let g = Dataset::new(vec![
            Column::categorical("x", vec![0.0; 50]),
            d.require("y").unwrap().clone(),
        ])
        .unwrap();
        assert!(decide(&g, &ProblemSpec::new("x", "y", &[]).unwrap()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn normalize_moments(values in prop::collection::vec(-1e3f64..1e3, 3..60)) {
            let spread = values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - values.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assume!(spread > 1e-3);
            let d = Dataset::new(vec![Column::continuous("a", values)]).unwrap();
            let n = normalize(&d).unwrap();
            let (mean, var) = column_stats(n.require("a").unwrap().values());
            prop_assert!(mean.abs() <= 1e-10);
            prop_assert!((var - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn decide_is_deterministic_and_exchange_symmetric(seed in any::<u64>(), tau in 0.0f64..1.0) {
            let d = synthetic(80, seed, tau);
            let spec = ProblemSpec::new("x", "y", &["w"]).unwrap().with_seed(seed);
            let a = decide(&d, &spec).unwrap();
            let b = decide(&d, &spec).unwrap();
            prop_assert_eq!(&a, &b);
            let s = decide(&d, &spec.swapped()).unwrap();
            prop_assert_eq!(s.outcome, a.outcome.mirrored());
            prop_assert_eq!(s.stat_causal, a.stat_anticausal);
            prop_assert_eq!(s.stat_anticausal, a.stat_causal);
            prop_assert_eq!(a.n_test, 40);
        }

        #[test]
        fn split_is_a_seeded_partition(seed in any::<u64>(), n in 8usize..200) {
            let (tr, te) = split_indices(n, seed).unwrap();
            prop_assert_eq!(tr.len(), n.div_ceil(2));
            prop_assert_eq!(te.len(), n / 2);
            let mut all = tr.clone();
            all.extend(&te);
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(split_indices(n, seed).unwrap(), (tr, te));
        }
    }
}
