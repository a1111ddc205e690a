//! Comma-separated list syntax for grid flags, e.g. `--tau-grid 0,0.25,0.5`.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::simulation::Kappa;

/// Parses a non-empty comma-separated list; whitespace around items is ignored.
pub fn parse_list<T: FromStr>(text: &str, flag: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = text.split(',').map(str::trim).collect();
    if items.iter().all(|s| s.is_empty()) {
        return Err(Error::invalid(format!("{flag}: empty list")));
    }
    items
        .into_iter()
        .map(|s| {
            if s.is_empty() {
                return Err(Error::invalid(format!("{flag}: empty item in `{text}`")));
            }
            s.parse::<T>()
                .map_err(|_| Error::invalid(format!("{flag}: cannot parse `{s}`")))
        })
        .collect()
}

pub fn parse_reals(text: &str, flag: &str, min_exclusive: Option<f64>) -> Result<Vec<f64>> {
    let values: Vec<f64> = parse_list(text, flag)?;
    for v in &values {
        if !v.is_finite() {
            return Err(Error::invalid(format!("{flag}: `{v}` is not finite")));
        }
        if let Some(min) = min_exclusive {
            if *v <= min {
                return Err(Error::invalid(format!("{flag}: `{v}` must be > {min}")));
            }
        }
    }
    Ok(values)
}

pub fn parse_taus(text: &str) -> Result<Vec<f64>> {
    let v = parse_reals(text, "--tau-grid", None)?;
    if let Some(t) = v.iter().find(|t| **t < 0.0) {
        return Err(Error::invalid(format!("--tau-grid: `{t}` must be >= 0")));
    }
    Ok(v)
}

pub fn parse_rhos(text: &str) -> Result<Vec<u8>> {
    let v: Vec<u8> = parse_list(text, "--rho-grid")?;
    if let Some(r) = v.iter().find(|r| **r > 1) {
        return Err(Error::invalid(format!("--rho-grid: `{r}` must be 0 or 1")));
    }
    Ok(v)
}

pub fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    let v: Vec<usize> = parse_list(text, "--n-grid")?;
    if let Some(n) = v.iter().find(|n| **n < 8) {
        return Err(Error::invalid(format!("--n-grid: `{n}` must be >= 8")));
    }
    Ok(v)
}

pub fn parse_kappas(text: &str) -> Result<Vec<Kappa>> {
    parse_list(text, "--kappa")
}

/// Formats a list back into the syntax accepted by [`parse_list`].
pub fn format_list<T: ToString>(values: &[T]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_lists() {
        assert_eq!(parse_taus(" 0, 0.25 ,1").unwrap(), vec![0.0, 0.25, 1.0]);
        assert_eq!(parse_rhos("0,1").unwrap(), vec![0, 1]);
        assert_eq!(parse_sizes("250,500").unwrap(), vec![250, 500]);
        assert_eq!(parse_kappas("k1,2").unwrap(), vec![Kappa::K1, Kappa::K2]);
    }

    #[test]
    fn rejects_bad_syntax() {
        assert!(parse_taus("").is_err());
        assert!(parse_taus("0,,1").is_err());
        assert!(parse_taus("-1").is_err());
        assert!(parse_taus("a").is_err());
        assert!(parse_rhos("2").is_err());
        assert!(parse_sizes("4").is_err());
        assert!(parse_reals("0", "--q-grid", Some(0.0)).is_err());
        assert!(parse_reals("inf", "--var", Some(0.0)).is_err());
        assert!(parse_kappas("k9").is_err());
    }

    proptest! {
        #[test]
        fn format_then_parse(values in prop::collection::vec(-1e6f64..1e6, 1..8)) {
            let text = format_list(&values);
            prop_assert_eq!(parse_reals(&text, "--x", None).unwrap(), values);
        }
    }
}
