//! End-to-end causal graph inference.
//!
//! For a panel Y the full model runs
//! normalize → kernel PCA on state vectors → VAR on the feature series →
//! pre-image reconstruction → residual variances Σ_j.
//! The same pipeline is rerun on Y with node i removed (its own kernel PCA,
//! VAR and pre-image map), and `delta[i][j] = max(ln(Σ^{i−}_j / Σ_j), 0)`:
//! row index is the cause, column index the effect.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::TimeSeriesPanel;
use crate::error::{Error, Result, Stage};
use crate::kernels::{fit_kernel_pca, median_bandwidth, ComponentSelection, KernelPcaModel, KernelSpec};
use crate::preimage::{learn_preimage, PreimageMap};
use crate::scalar::Real;
use crate::varm::{fit_var, residual_variance_about, VarModelFit};

/// How state vectors are mapped to the feature series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureMap<T: Real> {
    /// Features are the (normalized) inputs themselves, P = N. The pipeline
    /// then reduces to classical linear Granger causality.
    LinearIdentity,
    /// Kernel PCA with a fixed kernel.
    Kernel(KernelSpec<T>),
    /// Kernel PCA with an rbf kernel whose bandwidth is `scale` times the
    /// median pairwise distance of the states being fit.
    RbfMedian { scale: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig<T: Real> {
    pub feature_map: FeatureMap<T>,
    pub components: ComponentSelection<T>,
    pub lag: usize,
    pub ridge_var: T,
    pub ridge_preimage: T,
    pub normalize_input: bool,
}

impl<T: Real> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            feature_map: FeatureMap::RbfMedian { scale: T::one() },
            components: ComponentSelection::Fraction(T::lit(0.95)),
            lag: 1,
            ridge_var: T::lit(1e-3),
            ridge_preimage: T::lit(1e-3),
            normalize_input: true,
        }
    }
}

impl<T: Real> PipelineConfig<T> {
    /// Identity features with OLS everywhere: classical linear GC.
    pub fn linear_baseline(lag: usize) -> Self {
        Self {
            feature_map: FeatureMap::LinearIdentity,
            components: ComponentSelection::Fraction(T::one()),
            lag,
            ridge_var: T::zero(),
            ridge_preimage: T::zero(),
            normalize_input: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lag == 0 {
            return Err(Error::InvalidParameter("lag must be at least 1".into()));
        }
        if !(self.ridge_var >= T::zero()) || !(self.ridge_preimage >= T::zero()) {
            return Err(Error::InvalidParameter("ridge penalties must be nonnegative".into()));
        }
        self.components.validate()?;
        match self.feature_map {
            FeatureMap::Kernel(spec) => spec.validate(),
            FeatureMap::RbfMedian { scale } if !(scale > T::zero() && scale.finite()) => Err(
                Error::InvalidParameter(format!("bandwidth scale must be positive, got {scale}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Everything produced by one run of the pipeline on one panel.
#[derive(Debug, Clone)]
pub struct FullModelRun<T: Real> {
    /// Observations aligned with the predictions: rows L..T of the (normalized) panel.
    pub targets: DMatrix<T>,
    /// Input-space one-step predictions Ŷ.
    pub reconstruction: DMatrix<T>,
    /// diag cov(Y − Ŷ), one entry per node.
    pub residual_variance: DVector<T>,
    /// T×P feature series H.
    pub features: DMatrix<T>,
    pub kernel_pca: Option<KernelPcaModel<T>>,
    pub var_fit: VarModelFit<T>,
    pub preimage: PreimageMap<T>,
}

impl<T: Real> FullModelRun<T> {
    pub fn components(&self) -> usize {
        self.features.ncols()
    }
}

/// Runs the full-model pipeline on a panel.
pub fn run_full_model<T: Real>(panel: &TimeSeriesPanel<T>, config: &PipelineConfig<T>) -> Result<FullModelRun<T>> {
    config.validate()?;
    let y = prepare(panel, config)?;
    run_pipeline(&y, config, false)
}

fn prepare<T: Real>(panel: &TimeSeriesPanel<T>, config: &PipelineConfig<T>) -> Result<DMatrix<T>> {
    let need = config.lag + 2;
    if panel.samples() < need {
        return Err(Error::InsufficientSamples {
            have: panel.samples(),
            need,
        });
    }
    if config.normalize_input {
        Ok(panel.normalize().map_err(|e| e.at(Stage::Normalize))?.into_values())
    } else {
        Ok(panel.values().clone())
    }
}

/// Pipeline on an already prepared T×D matrix. `cap_count` lowers a fixed
/// component count to the achievable rank instead of failing.
fn run_pipeline<T: Real>(y: &DMatrix<T>, config: &PipelineConfig<T>, cap_count: bool) -> Result<FullModelRun<T>> {
    let (features, kernel_pca) = match config.feature_map {
        FeatureMap::LinearIdentity => (y.clone(), None),
        FeatureMap::Kernel(spec) => {
            let model = fit_features(&spec, y, config.components, cap_count)?;
            (model.project(y).map_err(|e| e.at(Stage::Pca))?, Some(model))
        }
        FeatureMap::RbfMedian { scale } => {
            let bandwidth = median_bandwidth(y).map_err(|e| e.at(Stage::Pca))? * scale;
            let spec = KernelSpec::rbf(bandwidth).map_err(|e| e.at(Stage::Pca))?;
            let model = fit_features(&spec, y, config.components, cap_count)?;
            (model.project(y).map_err(|e| e.at(Stage::Pca))?, Some(model))
        }
    };

    let lag = config.lag;
    let var_fit = fit_var(&features, lag, config.ridge_var).map_err(|e| e.at(Stage::Var))?;
    let predicted = var_fit.predict(&features).map_err(|e| e.at(Stage::Var))?;

    let rows = y.nrows() - lag;
    let targets = y.rows(lag, rows).into_owned();
    let preimage = learn_preimage(&targets, &features.rows(lag, rows).into_owned(), config.ridge_preimage)
        .map_err(|e| e.at(Stage::Preimage))?;
    let reconstruction = preimage.reconstruct(&predicted).map_err(|e| e.at(Stage::Preimage))?;
    let residual_variance =
        residual_variance_about(&targets, &reconstruction).map_err(|e| e.at(Stage::Score))?;

    Ok(FullModelRun {
        targets,
        reconstruction,
        residual_variance,
        features,
        kernel_pca,
        var_fit,
        preimage,
    })
}

fn fit_features<T: Real>(
    spec: &KernelSpec<T>,
    y: &DMatrix<T>,
    selection: ComponentSelection<T>,
    cap_count: bool,
) -> Result<KernelPcaModel<T>> {
    match fit_kernel_pca(spec, y, selection) {
        Err(Error::Rank { achievable, .. }) if cap_count && achievable > 0 => {
            fit_kernel_pca(spec, y, ComponentSelection::Count(achievable))
        }
        other => other,
    }
    .map_err(|e| e.at(Stage::Pca))
}

/// `max(ln(var_reduced / var_full), 0)`.
pub fn causality_index<T: Real>(var_reduced: T, var_full: T) -> Result<T> {
    if !(var_reduced > T::zero()) || !(var_full > T::zero()) {
        return Err(Error::DegenerateModel(format!(
            "residual variances must be positive (reduced {var_reduced}, full {var_full})"
        )));
    }
    Ok((var_reduced / var_full).ln().max(T::zero()))
}

/// Directed causality scores between all node pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalGraph<T: Real> {
    delta: DMatrix<T>,
    raw_log_ratios: DMatrix<T>,
    node_names: Vec<String>,
}

/// One scored ordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge<T> {
    pub cause: usize,
    pub effect: usize,
    pub delta: T,
}

impl<T: Real> CausalGraph<T> {
    /// Builds a graph from raw log-ratios; `delta` is their clamp at zero with
    /// a zero diagonal.
    pub fn from_log_ratios(raw_log_ratios: DMatrix<T>, node_names: Vec<String>) -> Result<Self> {
        let n = node_names.len();
        if raw_log_ratios.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "{:?} score matrix for {n} nodes",
                raw_log_ratios.shape()
            )));
        }
        let delta = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                T::zero()
            } else {
                raw_log_ratios[(i, j)].max(T::zero())
            }
        });
        Ok(Self {
            delta,
            raw_log_ratios,
            node_names,
        })
    }

    /// N×N; entry (i, j) scores "i causes j".
    pub fn delta(&self) -> &DMatrix<T> {
        &self.delta
    }

    pub fn raw_log_ratios(&self) -> &DMatrix<T> {
        &self.raw_log_ratios
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn nodes(&self) -> usize {
        self.node_names.len()
    }

    /// Off-diagonal scores in row-major order.
    pub fn off_diagonal(&self) -> Vec<T> {
        let n = self.nodes();
        (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.delta[(i, j)])
            .collect()
    }

    /// All ordered pairs sorted by descending delta; ties keep row-major order.
    pub fn ranked_edges(&self) -> Vec<Edge<T>> {
        let n = self.nodes();
        let mut edges: Vec<Edge<T>> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(cause, effect)| Edge {
                cause,
                effect,
                delta: self.delta[(cause, effect)],
            })
            .collect();
        edges.sort_by(|a, b| b.delta.partial_cmp(&a.delta).unwrap_or(std::cmp::Ordering::Equal));
        edges
    }

    pub fn top_edge(&self) -> Option<Edge<T>> {
        self.ranked_edges().into_iter().next()
    }

    /// Edge-list CSV with header `cause,effect,delta`, sorted by descending delta.
    pub fn to_edge_csv(&self) -> String {
        let mut out = String::from("cause,effect,delta\n");
        for e in self.ranked_edges() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.node_names[e.cause],
                self.node_names[e.effect],
                e.delta.as_f64()
            ));
        }
        out
    }

    pub fn to_record(&self) -> GraphRecord {
        GraphRecord {
            node_names: self.node_names.clone(),
            delta: rows_f64(&self.delta),
            raw_log_ratios: rows_f64(&self.raw_log_ratios),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    /// Reorders nodes so that new node k is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.nodes();
        let pick = |m: &DMatrix<T>| DMatrix::from_fn(n, n, |i, j| m[(perm[i], perm[j])]);
        Self {
            delta: pick(&self.delta),
            raw_log_ratios: pick(&self.raw_log_ratios),
            node_names: perm.iter().map(|&k| self.node_names[k].clone()).collect(),
        }
    }
}

impl CausalGraph<f64> {
    pub fn from_json(text: &str) -> Result<Self> {
        let record: GraphRecord = serde_json::from_str(text)?;
        Self::try_from(record)
    }
}

fn rows_f64<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}

/// Serialized form of a [`CausalGraph`]; matrices are row-major, row = cause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphRecord {
    pub node_names: Vec<String>,
    pub delta: Vec<Vec<f64>>,
    pub raw_log_ratios: Vec<Vec<f64>>,
}

impl TryFrom<GraphRecord> for CausalGraph<f64> {
    type Error = Error;

    fn try_from(record: GraphRecord) -> Result<Self> {
        let n = record.node_names.len();
        let square = |rows: &[Vec<f64>], what: &str| -> Result<DMatrix<f64>> {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Shape(format!("{what} must be {n}×{n}")));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        };
        let delta = square(&record.delta, "delta")?;
        let raw = square(&record.raw_log_ratios, "raw_log_ratios")?;
        Ok(Self {
            delta,
            raw_log_ratios: raw,
            node_names: record.node_names,
        })
    }
}

/// Infers the directed graph of a panel with the leave-one-out pipeline.
///
/// Two-node panels are accepted: each reduced model is then univariate.
pub fn infer_graph<T: Real>(panel: &TimeSeriesPanel<T>, config: &PipelineConfig<T>) -> Result<CausalGraph<T>> {
    config.validate()?;
    let y = prepare(panel, config)?;
    let n = y.ncols();
    let full = run_pipeline(&y, config, false)?;
    let full_var = full.residual_variance;

    let reduced: Vec<Result<DVector<T>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let y_i = y.clone().remove_column(i);
            run_pipeline(&y_i, config, true)
                .map(|run| run.residual_variance)
                .map_err(|e| Error::AtNode {
                    node: panel.node_names()[i].clone(),
                    source: Box::new(e),
                })
        })
        .collect();

    let mut raw = DMatrix::zeros(n, n);
    for (i, reduced_var) in reduced.into_iter().enumerate() {
        let reduced_var = reduced_var?;
        for j in (0..n).filter(|&j| j != i) {
            let k = if j < i { j } else { j - 1 };
            causality_index(reduced_var[k], full_var[j]).map_err(|e| Error::AtNode {
                node: panel.node_names()[i].clone(),
                source: Box::new(e.at(Stage::Score)),
            })?;
            raw[(i, j)] = (reduced_var[k] / full_var[j]).ln();
        }
    }
    CausalGraph::from_log_ratios(raw, panel.node_names().to_vec())
}

/// Classical linear Granger causality: identity features, OLS, lag `lag`.
pub fn linear_gc_baseline<T: Real>(panel: &TimeSeriesPanel<T>, lag: usize) -> Result<CausalGraph<T>> {
    infer_graph(panel, &PipelineConfig::linear_baseline(lag))
}
