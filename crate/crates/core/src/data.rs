//! Panel container, normalization, node exclusion, lag embedding and CSV I/O.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// T×N matrix of nodal measurements (rows are time, columns are nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel<T: Real> {
    values: DMatrix<T>,
    node_names: Vec<String>,
}

impl<T: Real> TimeSeriesPanel<T> {
    pub fn new(values: DMatrix<T>, node_names: Vec<String>) -> Result<Self> {
        let (t, n) = values.shape();
        if t < 2 {
            return Err(Error::InsufficientSamples { have: t, need: 2 });
        }
        if n < 2 {
            return Err(Error::Schema(format!("a panel needs at least 2 nodes, got {n}")));
        }
        if node_names.len() != n {
            return Err(Error::Schema(format!(
                "{} node names for {n} columns",
                node_names.len()
            )));
        }
        check_unique(&node_names)?;
        for c in 0..n {
            for r in 0..t {
                if !values[(r, c)].finite() {
                    return Err(Error::NonFinite { row: r, column: c });
                }
            }
        }
        Ok(Self { values, node_names })
    }

    /// Builds a panel with generated names `y0`, `y1`, ...
    pub fn from_matrix(values: DMatrix<T>) -> Result<Self> {
        let names = (0..values.ncols()).map(|i| format!("y{i}")).collect();
        Self::new(values, names)
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    /// Number of time samples T.
    pub fn samples(&self) -> usize {
        self.values.nrows()
    }

    /// Number of nodes N.
    pub fn nodes(&self) -> usize {
        self.values.ncols()
    }

    pub fn into_values(self) -> DMatrix<T> {
        self.values
    }

    /// Standardizes every column to mean 0 and unit population variance.
    pub fn normalize(&self) -> Result<Self> {
        let values = standardize_columns(&self.values)
            .map_err(|c| Error::DegenerateInput(format!("node {:?} has zero variance", self.node_names[c])))?;
        Ok(Self {
            values,
            node_names: self.node_names.clone(),
        })
    }

    /// Returns the panel without node `i`.
    pub fn exclude_node(&self, i: usize) -> Result<Self> {
        let n = self.nodes();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, nodes: n });
        }
        if n < 3 {
            return Err(Error::Underflow(n));
        }
        let mut node_names = self.node_names.clone();
        node_names.remove(i);
        Ok(Self {
            values: self.values.clone().remove_column(i),
            node_names,
        })
    }

    /// Renders the panel as CSV with a header row. Values use the shortest
    /// representation that parses back to the same number.
    pub fn to_csv(&self) -> String {
        let mut out = self.node_names.join(",");
        out.push('\n');
        for r in 0..self.samples() {
            for c in 0..self.nodes() {
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.values[(r, c)]);
            }
            out.push('\n');
        }
        out
    }
}

fn check_unique(names: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(names.len());
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateName(name.clone()));
        }
    }
    Ok(())
}

/// Column-wise standardization with population variance. On failure returns
/// the index of the first constant column.
pub(crate) fn standardize_columns<T: Real>(m: &DMatrix<T>) -> std::result::Result<DMatrix<T>, usize> {
    let rows = T::count(m.nrows());
    let mut out = m.clone();
    for (c, mut col) in out.column_iter_mut().enumerate() {
        let mean = col.sum() / rows;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).fold(T::zero(), |a, b| a + b) / rows;
        let scale = col.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
        let floor = T::lit(100.0) * T::eps() * scale;
        if var <= floor * floor {
            return Err(c);
        }
        let sd = var.sqrt();
        for v in col.iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
    Ok(out)
}

/// Parses a header-plus-rows CSV document into a panel.
///
/// Row numbers in errors are 1-based file lines (the header is line 1).
pub fn ingest_csv<T: Real>(text: &str) -> Result<TimeSeriesPanel<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| Error::Schema(e.to_string()))?,
        None => return Err(Error::Schema("empty input, expected a header row".into())),
    };
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    if names.iter().any(String::is_empty) {
        return Err(Error::Schema("empty node name in header".into()));
    }
    check_unique(&names)?;
    let n = names.len();

    let mut data: Vec<T> = Vec::new();
    let mut rows = 0usize;
    for (k, rec) in records.enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Schema(format!("row {line}: {e}")))?;
        if rec.len() == 1 && rec.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        if rec.len() != n {
            return Err(Error::RaggedRow {
                row: line,
                expected: n,
                found: rec.len(),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::ParseNumber {
                row: line,
                column: c + 1,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: line, column: c + 1 });
            }
            data.push(T::lit(v));
        }
        rows += 1;
    }
    let values = DMatrix::from_row_slice(rows, n, &data);
    TimeSeriesPanel::new(values, names)
}

/// Lagged regressors and aligned targets for a VAR of depth L.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDesign<T: Real> {
    /// (T−L) × (D·L); column block ℓ−1 holds lag ℓ of all D series.
    pub design: DMatrix<T>,
    /// (T−L) × D; row r is the observation at time L + r.
    pub targets: DMatrix<T>,
}

pub fn lag_embed<T: Real>(x: &DMatrix<T>, lag: usize) -> Result<LaggedDesign<T>> {
    if lag == 0 {
        return Err(Error::InvalidParameter("lag depth must be at least 1".into()));
    }
    let (t, d) = x.shape();
    if t <= lag {
        return Err(Error::InsufficientSamples { have: t, need: lag + 1 });
    }
    let rows = t - lag;
    let mut design = DMatrix::zeros(rows, d * lag);
    for l in 1..=lag {
        design
            .view_mut((0, (l - 1) * d), (rows, d))
            .copy_from(&x.view((lag - l, 0), (rows, d)));
    }
    let targets = x.rows(lag, rows).into_owned();
    Ok(LaggedDesign { design, targets })
}
