//! Seeded generators for the five benchmark networks.
//!
//! Every node draws its innovations from its own ChaCha stream derived from
//! the dataset seed, so datasets are reproducible bit for bit and independent
//! of generation order.
//!
//! Generator equations (nodes are 1-based in the equations, 0-based in the
//! ground-truth matrices; ε ~ N(0, noise_sd²) per node):
//!
//! * `logistic2`: x_t = f(x_{t−1}), y_t = f(c·x_{t−1} + (1−c)·y_{t−1}),
//!   f(u) = 4u(1−u), run noise-free, then observed with N(0, σ_obs²) noise.
//! * `fanout3`: y1 = a·y1 + ε; y2 = b2·tanh(y1) + s2·y2 + ε;
//!   y3 = b3·y1² + s3·y3 + ε (all right-hand sides at t−1).
//! * `fanin3`: y1, y2 independent AR(1); y3 = b1·tanh(y1) + b2·y2² + s3·y3 + ε.
//! * `linear5`: lower-triangular VAR(1) with edges 1→2, 2→3, 2→4, 4→5.
//! * `nonlinear5`: the `linear5` topology with cross terms passed through
//!   tanh (1→2, 2→4) or squared (2→3, 4→5); self terms stay linear.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::TimeSeriesPanel;
use crate::error::{Error, Result};

/// Magnitude at which a trajectory is declared diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
pub const MIN_SAMPLES: usize = 50;

/// Stream offset for observation noise, keeping it disjoint from innovations.
const OBSERVATION_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorId {
    Logistic2,
    Fanout3,
    Fanin3,
    Linear5,
    Nonlinear5,
}

impl GeneratorId {
    pub const ALL: [GeneratorId; 5] = [
        GeneratorId::Logistic2,
        GeneratorId::Fanout3,
        GeneratorId::Fanin3,
        GeneratorId::Linear5,
        GeneratorId::Nonlinear5,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GeneratorId::Logistic2 => "logistic2",
            GeneratorId::Fanout3 => "fanout3",
            GeneratorId::Fanin3 => "fanin3",
            GeneratorId::Linear5 => "linear5",
            GeneratorId::Nonlinear5 => "nonlinear5",
        }
    }

    pub fn nodes(&self) -> usize {
        match self {
            GeneratorId::Logistic2 => 2,
            GeneratorId::Fanout3 | GeneratorId::Fanin3 => 3,
            GeneratorId::Linear5 | GeneratorId::Nonlinear5 => 5,
        }
    }

    /// Binary adjacency, row = cause.
    pub fn ground_truth(&self) -> DMatrix<u8> {
        let edges: &[(usize, usize)] = match self {
            GeneratorId::Logistic2 => &[(0, 1)],
            GeneratorId::Fanout3 => &[(0, 1), (0, 2)],
            GeneratorId::Fanin3 => &[(0, 2), (1, 2)],
            GeneratorId::Linear5 | GeneratorId::Nonlinear5 => &[(0, 1), (1, 2), (1, 3), (3, 4)],
        };
        let n = self.nodes();
        let mut m = DMatrix::zeros(n, n);
        for &(i, j) in edges {
            m[(i, j)] = 1;
        }
        m
    }

    fn default_coefficients(&self) -> &'static [(&'static str, f64)] {
        match self {
            GeneratorId::Logistic2 => &[("coupling", 0.4)],
            GeneratorId::Fanout3 => &[
                ("hub_ar", 0.5),
                ("drive_2", 0.7),
                ("self_2", 0.3),
                ("drive_3", 0.7),
                ("self_3", -0.3),
            ],
            GeneratorId::Fanin3 => &[
                ("ar_1", 0.5),
                ("ar_2", 0.5),
                ("drive_1", 0.5),
                ("drive_2", 0.5),
                ("self_3", 0.2),
            ],
            GeneratorId::Linear5 | GeneratorId::Nonlinear5 => &[
                ("self_1", 0.6),
                ("self_2", 0.4),
                ("self_3", 0.3),
                ("self_4", 0.5),
                ("self_5", 0.3),
                ("c_1_2", 0.5),
                ("c_2_3", 0.6),
                ("c_2_4", 0.4),
                ("c_4_5", 0.5),
            ],
        }
    }
}

impl fmt::Display for GeneratorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeneratorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GeneratorId::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown generator {s:?}")))
    }
}

/// Tunable generator parameters. `coefficients` holds the named equation
/// coefficients; missing entries take the generator defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub burn_in: usize,
    pub noise_sd: f64,
    pub observation_noise_sd: f64,
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
}

impl GeneratorParams {
    pub fn defaults(id: GeneratorId) -> Self {
        let (noise_sd, observation_noise_sd) = match id {
            GeneratorId::Logistic2 => (0.0, 0.01),
            _ => (0.1, 0.0),
        };
        Self {
            burn_in: 1000,
            noise_sd,
            observation_noise_sd,
            coefficients: id
                .default_coefficients()
                .iter()
                .map(|&(k, v)| (k.to_string(), v))
                .collect(),
        }
    }

    /// Fills missing coefficients with defaults and rejects unknown names.
    fn resolved(&self, id: GeneratorId) -> Result<Self> {
        let mut out = Self::defaults(id);
        out.burn_in = self.burn_in;
        out.noise_sd = self.noise_sd;
        out.observation_noise_sd = self.observation_noise_sd;
        for (k, v) in &self.coefficients {
            match out.coefficients.get_mut(k) {
                Some(slot) => *slot = *v,
                None => {
                    return Err(Error::InvalidParameter(format!("{id} has no coefficient {k:?}")));
                }
            }
        }
        if !(self.noise_sd >= 0.0) || !(self.observation_noise_sd >= 0.0) {
            return Err(Error::InvalidParameter("noise scales must be nonnegative".into()));
        }
        Ok(out)
    }

    fn get(&self, key: &str) -> f64 {
        self.coefficients[key]
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub panel: TimeSeriesPanel<f64>,
    pub ground_truth: DMatrix<u8>,
    pub generator_id: GeneratorId,
    pub seed: u64,
    pub params: GeneratorParams,
}

impl SyntheticDataset {
    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            generator_id: self.generator_id,
            seed: self.seed,
            samples: self.panel.samples(),
            node_names: self.panel.node_names().to_vec(),
            ground_truth: self
                .ground_truth
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            params: self.params.clone(),
        }
    }
}

/// Ground-truth metadata written next to a generated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub generator_id: GeneratorId,
    pub seed: u64,
    pub samples: usize,
    pub node_names: Vec<String>,
    /// Row-major, row = cause.
    pub ground_truth: Vec<Vec<u8>>,
    pub params: GeneratorParams,
}

impl Sidecar {
    pub fn ground_truth_matrix(&self) -> Result<DMatrix<u8>> {
        let n = self.ground_truth.len();
        if self.ground_truth.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("ground truth must be square".into()));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| self.ground_truth[i][j]))
    }
}

/// (cause, effect) pairs of a binary adjacency in row-major order.
pub fn ground_truth_edges(adjacency: &DMatrix<u8>) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..adjacency.nrows() {
        for j in 0..adjacency.ncols() {
            if adjacency[(i, j)] != 0 {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn node_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Innovations {
    streams: Vec<ChaCha8Rng>,
    sd: f64,
}

impl Innovations {
    fn new(seed: u64, nodes: usize, sd: f64) -> Self {
        Self {
            streams: (0..nodes as u64).map(|k| node_stream(seed, k)).collect(),
            sd,
        }
    }

    fn draw(&mut self, node: usize) -> f64 {
        self.sd * self.streams[node].sample::<f64, _>(StandardNormal)
    }
}

type Link = fn(f64) -> f64;

pub fn generate(
    id: GeneratorId,
    samples: usize,
    seed: u64,
    params: Option<&GeneratorParams>,
) -> Result<SyntheticDataset> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "at least {MIN_SAMPLES} samples are required, got {samples}"
        )));
    }
    let params = match params {
        Some(p) => p.resolved(id)?,
        None => GeneratorParams::defaults(id),
    };
    let n = id.nodes();
    let steps = params.burn_in + samples;
    let mut eps = Innovations::new(seed, n, params.noise_sd);
    let mut state = vec![0.0; n];
    let mut out = DMatrix::zeros(samples, n);

    if id == GeneratorId::Logistic2 {
        for (k, s) in state.iter_mut().enumerate() {
            *s = eps.streams[k].gen_range(0.05..0.95);
        }
    }

    for step in 0..steps {
        let prev = state.clone();
        step_system(id, &params, &prev, &mut state, &mut eps);
        let magnitude = state.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(magnitude < DIVERGENCE_LIMIT) {
            return Err(Error::Unstable {
                generator: id.to_string(),
                step,
                magnitude,
                params: serde_json::to_string(&params).unwrap_or_default(),
            });
        }
        if step >= params.burn_in {
            let r = step - params.burn_in;
            for (c, v) in state.iter().enumerate() {
                out[(r, c)] = *v;
            }
        }
    }

    if params.observation_noise_sd > 0.0 {
        for c in 0..n {
            let mut rng = node_stream(seed, OBSERVATION_STREAM + c as u64);
            for r in 0..samples {
                out[(r, c)] += params.observation_noise_sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }

    let names = (1..=n).map(|k| format!("y{k}")).collect();
    Ok(SyntheticDataset {
        panel: TimeSeriesPanel::new(out, names)?,
        ground_truth: id.ground_truth(),
        generator_id: id,
        seed,
        params,
    })
}

fn logistic(u: f64) -> f64 {
    // keep the orbit off the absorbing points 0 and 1
    (4.0 * u * (1.0 - u)).clamp(1e-12, 1.0 - 1e-12)
}

fn step_system(id: GeneratorId, p: &GeneratorParams, prev: &[f64], next: &mut [f64], eps: &mut Innovations) {
    match id {
        GeneratorId::Logistic2 => {
            let c = p.get("coupling");
            next[0] = logistic(prev[0]);
            next[1] = logistic(c * prev[0] + (1.0 - c) * prev[1]);
        }
        GeneratorId::Fanout3 => {
            next[0] = p.get("hub_ar") * prev[0] + eps.draw(0);
            next[1] = p.get("drive_2") * prev[0].tanh() + p.get("self_2") * prev[1] + eps.draw(1);
            next[2] = p.get("drive_3") * prev[0] * prev[0] + p.get("self_3") * prev[2] + eps.draw(2);
        }
        GeneratorId::Fanin3 => {
            next[0] = p.get("ar_1") * prev[0] + eps.draw(0);
            next[1] = p.get("ar_2") * prev[1] + eps.draw(1);
            next[2] = p.get("drive_1") * prev[0].tanh()
                + p.get("drive_2") * prev[1] * prev[1]
                + p.get("self_3") * prev[2]
                + eps.draw(2);
        }
        GeneratorId::Linear5 | GeneratorId::Nonlinear5 => {
            let (g12, g23, g24, g45): (Link, Link, Link, Link) =
                if id == GeneratorId::Linear5 {
                    (identity, identity, identity, identity)
                } else {
                    (f64::tanh, square, f64::tanh, square)
                };
            next[0] = p.get("self_1") * prev[0] + eps.draw(0);
            next[1] = p.get("self_2") * prev[1] + p.get("c_1_2") * g12(prev[0]) + eps.draw(1);
            next[2] = p.get("self_3") * prev[2] + p.get("c_2_3") * g23(prev[1]) + eps.draw(2);
            next[3] = p.get("self_4") * prev[3] + p.get("c_2_4") * g24(prev[1]) + eps.draw(3);
            next[4] = p.get("self_5") * prev[4] + p.get("c_4_5") * g45(prev[3]) + eps.draw(4);
        }
    }
}

fn identity(x: f64) -> f64 {
    x
}

fn square(x: f64) -> f64 {
    x * x
}

/// Independent standard-normal nodes with no edges, for null calibration.
pub fn white_noise(nodes: usize, samples: usize, seed: u64) -> Result<TimeSeriesPanel<f64>> {
    let mut eps = Innovations::new(seed, nodes, 1.0);
    let mut m = DMatrix::zeros(samples, nodes);
    for r in 0..samples {
        for c in 0..nodes {
            m[(r, c)] = eps.draw(c);
        }
    }
    TimeSeriesPanel::new(m, (1..=nodes).map(|k| format!("y{k}")).collect())
}
