use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage a failure is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Parse,
    Normalize,
    Pca,
    Var,
    Preimage,
    Score,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Parse => "parse",
            Stage::Normalize => "normalize",
            Stage::Pca => "pca",
            Stage::Var => "var",
            Stage::Preimage => "preimage",
            Stage::Score => "score",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    ParseNumber {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("row {row}, column {column}: non-finite value")]
    NonFinite { row: usize, column: usize },

    #[error("duplicate node name {0:?}")]
    DuplicateName(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("node index {index} out of range for {nodes} nodes")]
    IndexOutOfRange { index: usize, nodes: usize },

    #[error("cannot exclude a node from a {0}-node panel; at least 3 nodes are required")]
    Underflow(usize),

    #[error("insufficient samples: have {have}, need at least {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("requested {requested} components but the numerical rank is {achievable}")]
    Rank { requested: usize, achievable: usize },

    #[error("singular normal equations in {0}; use a positive ridge penalty")]
    Singular(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate model: {0}; raise the ridge penalty")]
    DegenerateModel(String),

    #[error("{generator} diverged at step {step} (|y| = {magnitude:e}) with params {params}")]
    Unstable {
        generator: String,
        step: usize,
        magnitude: f64,
        params: String,
    },

    #[error("AUC is undefined when all labels belong to one class")]
    UndefinedAuc,

    #[error("{stage}: {source}")]
    AtStage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("model without node {node:?}: {source}")]
    AtNode {
        node: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Self {
        Error::AtStage {
            stage,
            source: Box::new(self),
        }
    }

    /// Stage tag of the innermost stage annotation, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::AtStage { stage, source } => source.stage().or(Some(*stage)),
            Error::AtNode { source, .. } => source.stage(),
            _ => None,
        }
    }
}
