//! Observational datasets and design matrices.
//!
//! A [`Dataset`] holds the treatment indicator `z`, the outcome `y` and an
//! `N×p` covariate matrix whose columns keep the CSV header order. Models
//! select covariates by position through a [`DesignSpec`]; every design
//! matrix gets a leading intercept column.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, WateError};

/// Observed `(Z, X, Y)` triples. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    z: Vec<bool>,
    y: Vec<f64>,
    covariates: DMatrix<f64>,
    covariate_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking shapes and finiteness.
    pub fn new(
        z: Vec<bool>,
        y: Vec<f64>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = z.len();
        if n < 2 {
            return Err(WateError::InvalidDataset(format!(
                "need at least 2 rows, got {n}"
            )));
        }
        if y.len() != n || covariates.nrows() != n {
            return Err(WateError::InvalidDataset(format!(
                "length mismatch: z={n}, y={}, covariate rows={}",
                y.len(),
                covariates.nrows()
            )));
        }
        if covariate_names.len() != covariates.ncols() {
            return Err(WateError::InvalidDataset(format!(
                "{} covariate names for {} columns",
                covariate_names.len(),
                covariates.ncols()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(WateError::InvalidDataset(format!(
                "non-finite outcome at row {i}"
            )));
        }
        if let Some(idx) = covariates.iter().position(|v| !v.is_finite()) {
            return Err(WateError::InvalidDataset(format!(
                "non-finite covariate at row {}, column {}",
                idx % n,
                idx / n
            )));
        }
        Ok(Self {
            z,
            y,
            covariates,
            covariate_names,
        })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Number of covariates `p`.
    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn z(&self) -> &[bool] {
        &self.z
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn n_treated(&self) -> usize {
        self.z.iter().filter(|&&t| t).count()
    }

    pub fn n_control(&self) -> usize {
        self.n() - self.n_treated()
    }

    /// Position of a covariate by header name.
    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        self.covariate_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| WateError::UnknownCovariate(name.to_string()))
    }

    /// Row subset (with repetition) used by the resampling bootstraps.
    pub fn resample(&self, rows: &[usize]) -> Dataset {
        Dataset {
            z: rows.iter().map(|&i| self.z[i]).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            covariates: self.covariates.select_rows(rows),
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// Reads a header-first CSV. All columns other than the treatment and
    /// outcome become covariates, in header order.
    pub fn load_csv(
        path: impl AsRef<Path>,
        treatment_col: &str,
        outcome_col: &str,
    ) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, treatment_col, outcome_col)
    }

    pub fn read_csv<R: Read>(reader: R, treatment_col: &str, outcome_col: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| WateError::MissingColumn {
                    column: name.to_string(),
                })
        };
        let t_idx = find(treatment_col)?;
        let y_idx = find(outcome_col)?;
        let cov_idx: Vec<usize> = (0..headers.len())
            .filter(|&j| j != t_idx && j != y_idx)
            .collect();

        let mut z = Vec::new();
        let mut y = Vec::new();
        let mut cov_rows: Vec<f64> = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            // 1-based data rows, header excluded
            let row = row + 1;
            let cell = |j: usize| record.get(j).unwrap_or("");
            let numeric = |j: usize| -> Result<f64> {
                let raw = cell(j);
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(WateError::NonNumericCell {
                        row,
                        column: headers[j].clone(),
                        value: raw.to_string(),
                    }),
                }
            };
            z.push(match cell(t_idx) {
                "0" => false,
                "1" => true,
                other => {
                    return Err(WateError::NonBinaryTreatment {
                        row,
                        column: headers[t_idx].clone(),
                        value: other.to_string(),
                    })
                }
            });
            y.push(numeric(y_idx)?);
            for &j in &cov_idx {
                cov_rows.push(numeric(j)?);
            }
        }
        let n = z.len();
        let covariates = DMatrix::from_row_slice(n, cov_idx.len(), &cov_rows);
        let names = cov_idx.iter().map(|&j| headers[j].clone()).collect();
        Self::new(z, y, covariates, names)
    }

    /// Writes the dataset as CSV with the treatment and outcome columns first.
    /// Floats use the shortest representation that parses back to the same bits.
    pub fn write_csv<W: Write>(
        &self,
        writer: W,
        treatment_col: &str,
        outcome_col: &str,
    ) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec![treatment_col.to_string(), outcome_col.to_string()];
        header.extend(self.covariate_names.iter().cloned());
        wtr.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n() {
            record.clear();
            record.push(if self.z[i] { "1".to_string() } else { "0".to_string() });
            record.push(self.y[i].to_string());
            for j in 0..self.p() {
                record.push(self.covariates[(i, j)].to_string());
            }
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Which covariate columns enter a model. The intercept is always prepended.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DesignSpec {
    column_indices: Vec<usize>,
    include_intercept: bool,
}

impl DesignSpec {
    pub fn new(column_indices: Vec<usize>) -> Self {
        Self {
            column_indices,
            include_intercept: true,
        }
    }

    /// Every covariate of a `p`-column dataset.
    pub fn all(p: usize) -> Self {
        Self::new((0..p).collect())
    }

    pub fn from_names(ds: &Dataset, names: &[impl AsRef<str>]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| ds.covariate_index(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let spec = Self::new(idx);
        spec.validate(ds.p())?;
        Ok(spec)
    }

    pub fn column_indices(&self) -> &[usize] {
        &self.column_indices
    }

    pub fn include_intercept(&self) -> bool {
        self.include_intercept
    }

    /// Number of design columns, intercept included.
    pub fn width(&self) -> usize {
        self.column_indices.len() + usize::from(self.include_intercept)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.column_indices.len());
        for &index in &self.column_indices {
            if index >= p {
                return Err(WateError::IndexOutOfRange { index, available: p });
            }
            if !seen.insert(index) {
                return Err(WateError::DuplicateIndex { index });
            }
        }
        Ok(())
    }
}

/// Propensity-score and outcome-regression covariate sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelSpecs {
    pub ps: DesignSpec,
    pub or: DesignSpec,
}

impl ModelSpecs {
    pub fn new(ps: DesignSpec, or: DesignSpec) -> Self {
        Self { ps, or }
    }
}

/// `N×(k+1)` design: a column of ones followed by the selected covariates.
pub fn design_matrix(ds: &Dataset, spec: &DesignSpec) -> Result<DMatrix<f64>> {
    spec.validate(ds.p())?;
    let n = ds.n();
    let offset = usize::from(spec.include_intercept);
    let mut x = DMatrix::zeros(n, spec.width());
    if spec.include_intercept {
        x.column_mut(0).fill(1.0);
    }
    for (k, &j) in spec.column_indices.iter().enumerate() {
        x.column_mut(k + offset).copy_from(&ds.covariates.column(j));
    }
    Ok(x)
}
