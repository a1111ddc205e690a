//! Column-oriented table of real-valued observations.

use std::collections::HashSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    /// Values are level codes; compared exactly.
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    name: String,
    kind: ColumnKind,
    values: Vec<f64>,
}

impl Column {
    pub fn continuous(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
            values,
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            values,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Distinct values in ascending order.
    pub fn levels(&self) -> Vec<f64> {
        let mut levels = self.values.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            name: self.name.clone(),
            kind: self.kind,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    n_rows: usize,
}

impl Dataset {
    /// Columns must share a length, carry unique names and hold finite values.
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |c| c.values.len());
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::invalid(format!("duplicate column name `{}`", c.name)));
            }
            if c.values.len() != n_rows {
                return Err(Error::invalid(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    c.name,
                    c.values.len()
                )));
            }
            if let Some(i) = c.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "column `{}` has a non-finite value at row {i}",
                    c.name
                )));
            }
        }
        Ok(Self { columns, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column> {
        self.column(name)
            .ok_or_else(|| Error::invalid(format!("no column named `{name}`")))
    }

    /// Keeps the named columns, in the given order.
    pub fn select_columns(&self, names: &[&str]) -> Result<Dataset> {
        let columns = names
            .iter()
            .map(|n| self.require(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(columns)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| c.with_values(rows.iter().map(|&r| c.values[r]).collect()))
            .collect();
        Dataset {
            columns,
            n_rows: rows.len(),
        }
    }

    pub(crate) fn map_columns(
        &self,
        mut f: impl FnMut(&Column) -> Result<Column>,
    ) -> Result<Dataset> {
        let columns = self.columns.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            columns,
            n_rows: self.n_rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks() {
        assert!(Dataset::new(vec![
            Column::continuous("a", vec![1.0, 2.0]),
            Column::continuous("a", vec![1.0, 2.0]),
        ])
        .is_err());
        assert!(Dataset::new(vec![
            Column::continuous("a", vec![1.0, 2.0]),
            Column::continuous("b", vec![1.0]),
        ])
        .is_err());
        assert!(Dataset::new(vec![Column::continuous("a", vec![f64::NAN])]).is_err());
        let d = Dataset::new(vec![
            Column::continuous("a", vec![1.0, 2.0, 3.0]),
            Column::categorical("b", vec![2.0, 1.0, 2.0]),
        ])
        .unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.require("b").unwrap().levels(), vec![1.0, 2.0]);
        assert!(d.require("c").is_err());
        let r = d.select_rows(&[2, 0]);
        assert_eq!(r.require("a").unwrap().values(), &[3.0, 1.0]);
        let s = d.select_columns(&["b"]).unwrap();
        assert_eq!(s.columns().len(), 1);
    }
}
