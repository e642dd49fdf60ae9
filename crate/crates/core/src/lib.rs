//! Nonlinear Granger causality discovery for multivariate time series.
//!
//! The pipeline maps each state vector of a panel through kernel PCA, fits a
//! linear vector autoregression on the resulting feature series, and brings
//! the one-step predictions back to input space with a least-squares
//! pre-image map. Comparing residual variances of the full model against
//! models with one node removed yields a directed causality score per pair.
//!
//! The numerical core is generic over the scalar type ([`Real`]); the
//! aliases below fix it to `f64`, which is what the benchmark harness and
//! CLI use.

// `!(x >= 0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod causality;
pub mod data;
pub mod error;
pub mod kernels;
pub mod preimage;
pub mod scalar;
pub mod synthgen;
pub mod varm;

pub use causality::{
    causality_index, infer_graph, linear_gc_baseline, run_full_model, CausalGraph, FeatureMap,
    FullModelRun, PipelineConfig,
};
pub use data::{lag_embed, LaggedDesign, TimeSeriesPanel};
pub use error::{Error, Result, Stage};
pub use kernels::{fit_kernel_pca, gram, median_bandwidth, ComponentSelection, KernelPcaModel, KernelSpec};
pub use preimage::{learn_preimage, PreimageMap};
pub use scalar::Real;
pub use varm::{fit_var, residual_variance_about, VarModelFit};

pub type Panel = TimeSeriesPanel<f64>;
pub type Graph = CausalGraph<f64>;
pub type Config = PipelineConfig<f64>;
pub type Kernel = KernelSpec<f64>;
pub type KernelPca = KernelPcaModel<f64>;
pub type VarFit = VarModelFit<f64>;
pub type Preimage = PreimageMap<f64>;

pub type PanelF32 = TimeSeriesPanel<f32>;
pub type GraphF32 = CausalGraph<f32>;
pub type ConfigF32 = PipelineConfig<f32>;
