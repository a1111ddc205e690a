//! Quantile-bin analysis: partition rows by empirical quantiles of a proxy
//! column and run the classifier inside every bin.

use crate::classifier::{decide, DirectionDecision, Outcome, ProblemSpec, MIN_ROWS};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Assigns each value to one of `n_q` bins.
///
/// Cut point `k` is the lower empirical quantile at `k / n_q`; a value equal
/// to a cut point falls into the lower bin.
pub fn quantile_bins(values: &[f64], n_q: usize) -> Result<Vec<usize>> {
    if n_q < 1 {
        return Err(Error::invalid("number of quantiles must be >= 1"));
    }
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("bin column must be non-empty and finite"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let cuts: Vec<f64> = (1..n_q)
        .map(|k| sorted[(k * n).div_ceil(n_q).max(1) - 1])
        .collect();
    Ok(values
        .iter()
        .map(|v| cuts.iter().filter(|c| **c < *v).count())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinResult {
    pub bin: usize,
    pub n_rows: usize,
    pub lower: f64,
    pub upper: f64,
    pub decision: DirectionDecision,
}

/// Per-bin decisions for one number of quantiles and the share of bins
/// preferring each direction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileReport {
    pub n_q: usize,
    pub bins: Vec<BinResult>,
    pub share_causal: f64,
    pub share_anticausal: f64,
    pub share_inconclusive: f64,
}

impl QuantileReport {
    pub fn from_bins(n_q: usize, bins: Vec<BinResult>) -> Result<Self> {
        if n_q < 2 {
            return Err(Error::invalid(format!("n_q must be >= 2, got {n_q}")));
        }
        if bins.len() != n_q {
            return Err(Error::invalid(format!(
                "expected {n_q} bin decisions, got {}",
                bins.len()
            )));
        }
        let count = |o: Outcome| bins.iter().filter(|b| b.decision.outcome == o).count();
        let total = n_q as f64;
        let share_causal = count(Outcome::CausalXtoY) as f64 / total;
        let share_anticausal = count(Outcome::CausalYtoX) as f64 / total;
        let share_inconclusive = count(Outcome::Inconclusive) as f64 / total;
        Ok(Self {
            n_q,
            bins,
            share_causal,
            share_anticausal,
            share_inconclusive,
        })
    }

    pub fn count(&self, outcome: Outcome) -> usize {
        self.bins
            .iter()
            .filter(|b| b.decision.outcome == outcome)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantileRow {
    Report(QuantileReport),
    Skipped { n_q: usize, reason: String },
}

impl QuantileRow {
    pub fn n_q(&self) -> usize {
        match self {
            QuantileRow::Report(r) => r.n_q,
            QuantileRow::Skipped { n_q, .. } => *n_q,
        }
    }
}

/// Runs the classifier in every bin for each `n_q` in `nq_min..=nq_max`.
///
/// `data` must contain `bin_col`; the bin column is removed from the
/// controls. A bin with fewer than 8 rows, or a bin in which the classifier
/// fails, marks that `n_q` as skipped.
pub fn run_quantiles(
    data: &Dataset,
    spec: &ProblemSpec,
    bin_col: &str,
    nq_min: usize,
    nq_max: usize,
) -> Result<Vec<QuantileRow>> {
    if nq_min < 2 || nq_max < nq_min {
        return Err(Error::invalid(format!(
            "need 2 <= nq-min <= nq-max, got {nq_min}..{nq_max}"
        )));
    }
    let bin_values = data.require(bin_col)?.values().to_vec();
    let controls: Vec<&str> = spec
        .w()
        .iter()
        .map(String::as_str)
        .filter(|w| *w != bin_col)
        .collect();
    let bin_spec = ProblemSpec::new(spec.x(), spec.y(), &controls)?
        .with_seed(spec.seed())
        .with_kci(*spec.kci())
        .with_spline_basis(spec.spline_basis())?;

    let mut rows = Vec::new();
    for n_q in nq_min..=nq_max {
        let assignment = quantile_bins(&bin_values, n_q)?;
        let members: Vec<Vec<usize>> = (0..n_q)
            .map(|b| {
                assignment
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| **a == b)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        if let Some((b, m)) = members.iter().enumerate().find(|(_, m)| m.len() < MIN_ROWS) {
            rows.push(QuantileRow::Skipped {
                n_q,
                reason: format!("bin {b} has {} rows (< {MIN_ROWS})", m.len()),
            });
            continue;
        }
        let mut bins = Vec::with_capacity(n_q);
        let mut failure = None;
        for (b, idx) in members.iter().enumerate() {
            let subset = data.select_rows(idx);
            match decide(&subset, &bin_spec) {
                Ok(decision) => {
                    let vals = idx.iter().map(|&i| bin_values[i]);
                    bins.push(BinResult {
                        bin: b,
                        n_rows: idx.len(),
                        lower: vals.clone().fold(f64::INFINITY, f64::min),
                        upper: vals.fold(f64::NEG_INFINITY, f64::max),
                        decision,
                    });
                }
                Err(e) => {
                    failure = Some(format!("bin {b}: {e}"));
                    break;
                }
            }
        }
        rows.push(match failure {
            Some(reason) => QuantileRow::Skipped { n_q, reason },
            None => QuantileRow::Report(QuantileReport::from_bins(n_q, bins)?),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::independence::KciResult;

    fn decision(outcome: Outcome) -> DirectionDecision {
        let r = KciResult {
            statistic: 0.0,
            n: 4,
            bandwidth_xu: 0.8,
            bandwidth_w: None,
            ridge: None,
            conditional: false,
        };
        DirectionDecision {
            outcome,
            stat_causal: 0.0,
            stat_anticausal: 0.0,
            n_train: 4,
            n_test: 4,
            seed: 0,
            causal: r,
            anticausal: r,
        }
    }

    fn bin(b: usize, o: Outcome) -> BinResult {
        BinResult {
            bin: b,
            n_rows: 8,
            lower: 0.0,
            upper: 1.0,
            decision: decision(o),
        }
    }

    #[test]
    fn four_of_five_bins_is_eighty_percent() {
        let bins = (0..5)
            .map(|b| {
                bin(
                    b,
                    if b == 2 {
                        Outcome::CausalYtoX
                    } else {
                        Outcome::CausalXtoY
                    },
                )
            })
            .collect();
        let r = QuantileReport::from_bins(5, bins).unwrap();
        assert_eq!(r.share_causal, 0.8);
        assert_eq!(r.share_anticausal, 0.2);
        assert_eq!(r.share_inconclusive, 0.0);
        assert_eq!(r.count(Outcome::CausalXtoY), 4);
    }

    #[test]
    fn shares_sum_to_one() {
        for n_q in 2..=20 {
            let bins = (0..n_q)
                .map(|b| {
                    bin(
                        b,
                        [Outcome::CausalXtoY, Outcome::CausalYtoX, Outcome::Inconclusive][b % 3],
                    )
                })
                .collect();
            let r = QuantileReport::from_bins(n_q, bins).unwrap();
            let total = r.share_causal + r.share_anticausal + r.share_inconclusive;
            assert!((total - 1.0).abs() <= 1e-12);
        }
        assert!(QuantileReport::from_bins(3, vec![bin(0, Outcome::CausalXtoY)]).is_err());
    }

    #[test]
    fn bins_are_balanced_and_ties_go_low() {
        let v: Vec<f64> = (0..20).map(f64::from).collect();
        let b = quantile_bins(&v, 4).unwrap();
        for k in 0..4 {
            assert_eq!(b.iter().filter(|x| **x == k).count(), 5);
        }
        assert_eq!(b[4], 0);
        assert_eq!(b[5], 1);

        // heavy ties at a cut point stay in the lower bin
        let v = [1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 4.0];
        let b = quantile_bins(&v, 2).unwrap();
        assert_eq!(b, vec![0, 0, 0, 0, 0, 1, 1, 1]);
        assert_eq!(quantile_bins(&v, 1).unwrap(), vec![0; 8]);
    }

    #[test]
    fn too_many_quantiles_are_skipped() {
        use crate::data::Column;
        let n = 40;
        let d = Dataset::new(vec![
            Column::continuous("x", (0..n).map(|i| (i as f64 * 0.7).sin()).collect()),
            Column::continuous("y", (0..n).map(|i| (i as f64 * 1.3).cos()).collect()),
            Column::continuous("e", (0..n).map(f64::from).collect()),
        ])
        .unwrap();
        let spec = ProblemSpec::new("x", "y", &["e"]).unwrap();
        // 40 / 8 = 5 is the largest n_q whose bins can reach 8 rows
        let rows = run_quantiles(&d, &spec, "e", 6, 7).unwrap();
        assert!(rows.iter().all(|r| matches!(r, QuantileRow::Skipped { .. })));
        assert_eq!(rows.len(), 2);
        assert!(run_quantiles(&d, &spec, "e", 5, 4).is_err());
        assert!(run_quantiles(&d, &spec, "missing", 2, 2).is_err());
    }
}
