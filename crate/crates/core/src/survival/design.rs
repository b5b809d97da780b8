//! Covariate design matrices with the coding conventions used throughout:
//! categorical variables become 0/1 indicator columns against a reference
//! level (first category in sorted order), and age enters as decades from
//! the cohort mean so its coefficient reads as risk per decade.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// How a column was encoded; carried along so downstream reports can label
/// hazard ratios correctly.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ColumnEncoding {
    /// Plain numeric column.
    Numeric,
    /// 0/1 indicator against a named reference level.
    Indicator { reference: String },
}

/// A named, column-encoded covariate matrix aligned to a record list.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovariateMatrix {
    names: Vec<String>,
    encodings: Vec<ColumnEncoding>,
    /// Row-major `n_rows x names.len()`.
    data: Vec<f64>,
    n_rows: usize,
}

impl CovariateMatrix {
    /// Validate and assemble a matrix. Indicator columns must contain only
    /// 0/1; any constant column is rejected unless `allow_constant` is set.
    pub fn new(
        names: Vec<String>,
        encodings: Vec<ColumnEncoding>,
        data: Vec<f64>,
        n_rows: usize,
        allow_constant: bool,
    ) -> Result<Self> {
        let p = names.len();
        if encodings.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                got: encodings.len(),
            });
        }
        if data.len() != n_rows * p {
            return Err(Error::LengthMismatch {
                expected: n_rows * p,
                got: data.len(),
            });
        }
        for (j, name) in names.iter().enumerate() {
            let mut constant = n_rows > 0;
            let first = if n_rows > 0 { data[j] } else { 0.0 };
            for i in 0..n_rows {
                let v = data[i * p + j];
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite value in column {name}"
                    )));
                }
                if matches!(encodings[j], ColumnEncoding::Indicator { .. })
                    && v != 0.0
                    && v != 1.0
                {
                    return Err(Error::InvalidArgument(format!(
                        "indicator column {name} contains {v}"
                    )));
                }
                if v != first {
                    constant = false;
                }
            }
            if constant && !allow_constant {
                return Err(Error::ConstantColumn(name.clone()));
            }
        }
        Ok(Self {
            names,
            encodings,
            data,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn encodings(&self) -> &[ColumnEncoding] {
        &self.encodings
    }

    /// Row-major data, `n_rows x n_cols`.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let p = self.n_cols();
        (0..self.n_rows).map(|i| self.data[i * p + j]).collect()
    }

    /// Matrix with only the listed rows, in the given order; encodings and
    /// names are preserved so column layouts stay consistent across splits.
    pub fn rows_subset(&self, indices: &[usize]) -> Result<CovariateMatrix> {
        let p = self.n_cols();
        let mut data = Vec::with_capacity(indices.len() * p);
        for &i in indices {
            if i >= self.n_rows {
                return Err(Error::InvalidArgument(format!("row index {i} out of range")));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(CovariateMatrix {
            names: self.names.clone(),
            encodings: self.encodings.clone(),
            data,
            n_rows: indices.len(),
        })
    }

    /// Matrix with only the listed columns, in the given order.
    pub fn select(&self, cols: &[usize]) -> Result<CovariateMatrix> {
        let p = self.n_cols();
        let mut names = Vec::with_capacity(cols.len());
        let mut encodings = Vec::with_capacity(cols.len());
        for &c in cols {
            if c >= p {
                return Err(Error::InvalidArgument(format!("column index {c} out of range")));
            }
            names.push(self.names[c].clone());
            encodings.push(self.encodings[c].clone());
        }
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            for &c in cols {
                data.push(self.data[i * p + c]);
            }
        }
        Ok(CovariateMatrix {
            names,
            encodings,
            data,
            n_rows: self.n_rows,
        })
    }
}

/// Incremental builder applying the standard encodings.
#[derive(Debug)]
pub struct DesignBuilder {
    n_rows: usize,
    names: Vec<String>,
    encodings: Vec<ColumnEncoding>,
    columns: Vec<Vec<f64>>,
}

impl DesignBuilder {
    pub fn new(n_rows: usize) -> Self {
        Self {
            n_rows,
            names: Vec::new(),
            encodings: Vec::new(),
            columns: Vec::new(),
        }
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_rows {
            return Err(Error::LengthMismatch {
                expected: self.n_rows,
                got: values.len(),
            });
        }
        Ok(())
    }

    /// Numeric column, used as-is.
    pub fn numeric(mut self, name: &str, values: &[f64]) -> Result<Self> {
        self.check_len(values)?;
        self.names.push(name.to_string());
        self.encodings.push(ColumnEncoding::Numeric);
        self.columns.push(values.to_vec());
        Ok(self)
    }

    /// Numeric column standardized to zero mean and unit variance.
    pub fn standardized(mut self, name: &str, values: &[f64]) -> Result<Self> {
        self.check_len(values)?;
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var == 0.0 {
            return Err(Error::ConstantColumn(name.to_string()));
        }
        let sd = libm::sqrt(var);
        self.names.push(name.to_string());
        self.encodings.push(ColumnEncoding::Numeric);
        self.columns
            .push(values.iter().map(|v| (v - mean) / sd).collect());
        Ok(self)
    }

    /// Age in years, centered at the sample mean and scaled to decades.
    pub fn age_decades(mut self, name: &str, years: &[f64]) -> Result<Self> {
        self.check_len(years)?;
        let mean = years.iter().sum::<f64>() / years.len() as f64;
        self.names.push(name.to_string());
        self.encodings.push(ColumnEncoding::Numeric);
        self.columns
            .push(years.iter().map(|y| (y - mean) / 10.0).collect());
        Ok(self)
    }

    /// A 0/1 column kept as a single indicator with reference "0".
    pub fn indicator(mut self, name: &str, values: &[f64]) -> Result<Self> {
        self.check_len(values)?;
        for &v in values {
            if v != 0.0 && v != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "indicator column {name} contains {v}"
                )));
            }
        }
        self.names.push(name.to_string());
        self.encodings.push(ColumnEncoding::Indicator {
            reference: String::from("0"),
        });
        self.columns.push(values.to_vec());
        Ok(self)
    }

    /// Categorical column expanded to one indicator per non-reference level;
    /// the first level in sorted order is the reference. A single-level
    /// column is rejected as constant.
    pub fn categorical(mut self, name: &str, labels: &[String]) -> Result<Self> {
        if labels.len() != self.n_rows {
            return Err(Error::LengthMismatch {
                expected: self.n_rows,
                got: labels.len(),
            });
        }
        let mut levels: Vec<&String> = labels.iter().collect();
        levels.sort();
        levels.dedup();
        if levels.len() < 2 {
            return Err(Error::ConstantColumn(name.to_string()));
        }
        let reference = levels[0].clone();
        for level in levels.into_iter().skip(1) {
            self.names.push(format!("{name}={level}"));
            self.encodings.push(ColumnEncoding::Indicator {
                reference: reference.clone(),
            });
            self.columns.push(
                labels
                    .iter()
                    .map(|l| if l == level { 1.0 } else { 0.0 })
                    .collect(),
            );
        }
        Ok(self)
    }

    /// Assemble the matrix, enforcing the usual invariants.
    pub fn build(self) -> Result<CovariateMatrix> {
        let p = self.names.len();
        let mut data = Vec::with_capacity(self.n_rows * p);
        for i in 0..self.n_rows {
            for col in &self.columns {
                data.push(col[i]);
            }
        }
        CovariateMatrix::new(self.names, self.encodings, data, self.n_rows, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn categorical_expansion_uses_sorted_reference() {
        let labels: Vec<String> = ["g2", "g1", "g3", "g1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let m = DesignBuilder::new(4)
            .categorical("grade", &labels)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(m.names(), &["grade=g2".to_string(), "grade=g3".to_string()]);
        assert_eq!(
            m.encodings()[0],
            ColumnEncoding::Indicator {
                reference: "g1".into()
            }
        );
        assert_eq!(m.column(0), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.column(1), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn single_level_categorical_is_constant() {
        let labels: Vec<String> = vec!["x".into(), "x".into()];
        let err = DesignBuilder::new(2)
            .categorical("stage", &labels)
            .unwrap_err();
        assert_eq!(err, Error::ConstantColumn("stage".into()));
    }

    #[test]
    fn constant_column_rejected_at_build() {
        let err = DesignBuilder::new(3)
            .numeric("flat", &[2.0, 2.0, 2.0])
            .unwrap()
            .build()
            .unwrap_err();
        assert_eq!(err, Error::ConstantColumn("flat".into()));
    }

    #[test]
    fn age_decades_centering() {
        let m = DesignBuilder::new(3)
            .age_decades("age", &[55.0, 65.0, 75.0])
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(m.column(0), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn indicator_rejects_non_binary() {
        assert!(DesignBuilder::new(2).indicator("x", &[0.0, 2.0]).is_err());
    }

    #[test]
    fn select_projects_columns() {
        let m = DesignBuilder::new(2)
            .numeric("a", &[1.0, 2.0])
            .unwrap()
            .numeric("b", &[3.0, 4.0])
            .unwrap()
            .build()
            .unwrap();
        let s = m.select(&[1]).unwrap();
        assert_eq!(s.names(), &["b".to_string()]);
        assert_eq!(s.data(), &[3.0, 4.0]);
    }
}
