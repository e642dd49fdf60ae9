//! ROC-AUC scoring and the generator × method × T × seed sweep.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causality::{infer_graph, CausalGraph, PipelineConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::synthgen::{generate, GeneratorId, GeneratorParams};

/// Mann–Whitney AUC: probability that a random positive outscores a random
/// negative, ties counted one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("scores contain NaN".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // sum of midranks of the positives
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        rank_sum += midrank * order[start..end].iter().filter(|&&k| labels[k]).count() as f64;
        start = end;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// AUC of a graph's off-diagonal scores against a binary adjacency (row = cause).
pub fn graph_auc<T: Real>(graph: &CausalGraph<T>, ground_truth: &DMatrix<u8>) -> Result<f64> {
    let n = graph.nodes();
    if ground_truth.shape() != (n, n) {
        return Err(Error::Shape(format!(
            "graph has {n} nodes, ground truth is {:?}",
            ground_truth.shape()
        )));
    }
    let scores: Vec<f64> = graph.off_diagonal().into_iter().map(Real::as_f64).collect();
    let labels: Vec<bool> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| ground_truth[(i, j)] != 0)
        .collect();
    roc_auc(&scores, &labels)
}

/// A named pipeline configuration taking part in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub id: String,
    pub config: PipelineConfig<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub generators: Vec<GeneratorId>,
    pub methods: Vec<MethodSpec>,
    pub t_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Per-generator parameter overrides.
    pub params: Vec<(GeneratorId, GeneratorParams)>,
}

impl BenchmarkPlan {
    pub fn cell_count(&self) -> usize {
        self.generators.len() * self.methods.len() * self.t_grid.len() * self.seeds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.generators.is_empty() {
            return Err(Error::InvalidParameter("no generators".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods".into()));
        }
        if self.t_grid.is_empty() {
            return Err(Error::InvalidParameter("empty T grid".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("no seeds".into()));
        }
        for m in &self.methods {
            m.config
                .validate()
                .map_err(|e| Error::InvalidParameter(format!("method {}: {e}", m.id)))?;
        }
        Ok(())
    }

    fn params_for(&self, id: GeneratorId) -> Option<&GeneratorParams> {
        self.params.iter().find(|(g, _)| *g == id).map(|(_, p)| p)
    }

    /// Cells in canonical order: generator, method, T, seed.
    fn cells(&self) -> Vec<(GeneratorId, usize, usize, u64)> {
        let mut cells = Vec::with_capacity(self.cell_count());
        for &g in &self.generators {
            for m in 0..self.methods.len() {
                for &t in &self.t_grid {
                    for &s in &self.seeds {
                        cells.push((g, m, t, s));
                    }
                }
            }
        }
        cells
    }
}

/// Outcome of one (generator, method, T, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub generator: GeneratorId,
    pub method: String,
    pub samples: usize,
    pub seed: u64,
    pub auc: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub generator: GeneratorId,
    pub method: String,
    pub samples: usize,
    /// Successful records in the cell.
    pub n: usize,
    /// Records that failed and were left out.
    pub failed: usize,
    pub median: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
    pub mean: Option<f64>,
    /// Half-width of the normal 95% interval, 1.96·sd/√n.
    pub ci95: Option<f64>,
    /// Set when fewer than two successful records were available.
    pub insufficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub records: Vec<CellRecord>,
    pub summaries: Vec<CellSummary>,
}

impl BenchmarkReport {
    pub fn summary(&self, generator: GeneratorId, method: &str, samples: usize) -> Option<&CellSummary> {
        self.summaries
            .iter()
            .find(|s| s.generator == generator && s.method == method && s.samples == samples)
    }

    /// One row per cell: `generator,method,T,seed,auc,failure`.
    pub fn records_csv(&self) -> String {
        let mut out = String::from("generator,method,T,seed,auc,failure\n");
        for r in &self.records {
            let auc = r.auc.map(|a| a.to_string()).unwrap_or_default();
            let failure = r
                .failure
                .as_deref()
                .unwrap_or("")
                .replace([',', '\n', '"'], " ");
            let _ = writeln!(out, "{},{},{},{},{},{}", r.generator, r.method, r.samples, r.seed, auc, failure);
        }
        out
    }

    pub fn summaries_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summaries)?)
    }
}

/// Runs one cell: generate → infer → score.
pub fn run_cell(
    generator: GeneratorId,
    method: &MethodSpec,
    samples: usize,
    seed: u64,
    params: Option<&GeneratorParams>,
) -> CellRecord {
    let outcome = generate(generator, samples, seed, params)
        .and_then(|d| infer_graph(&d.panel, &method.config).and_then(|g| graph_auc(&g, &d.ground_truth)));
    CellRecord {
        generator,
        method: method.id.clone(),
        samples,
        seed,
        auc: outcome.as_ref().ok().copied(),
        failure: outcome.err().map(|e| e.to_string()),
    }
}

/// Runs every cell of the plan on `jobs` worker threads (all cores when
/// `None`). Records come back in canonical order regardless of scheduling.
/// `progress` is called after each finished cell with (done, total, record).
pub fn run_benchmark<F>(plan: &BenchmarkPlan, jobs: Option<usize>, progress: F) -> Result<BenchmarkReport>
where
    F: Fn(usize, usize, &CellRecord) + Sync,
{
    plan.validate()?;
    let cells = plan.cells();
    let total = cells.len();
    let done = AtomicUsize::new(0);
    let work = || -> Vec<CellRecord> {
        cells
            .par_iter()
            .map(|&(g, m, t, s)| {
                let record = run_cell(g, &plan.methods[m], t, s, plan.params_for(g));
                let finished = done.fetch_add(1, AtomicOrdering::Relaxed) + 1;
                progress(finished, total, &record);
                record
            })
            .collect()
    };
    let records = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let summaries = summarize(&records);
    Ok(BenchmarkReport { records, summaries })
}

/// Type-7 quantile (linear interpolation between order statistics) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per (generator, method, T) statistics, in first-appearance order.
pub fn summarize(records: &[CellRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(GeneratorId, &str, usize)> = Vec::new();
    for r in records {
        let key = (r.generator, r.method.as_str(), r.samples);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(generator, method, samples)| {
            let cell: Vec<&CellRecord> = records
                .iter()
                .filter(|r| r.generator == generator && r.method == method && r.samples == samples)
                .collect();
            let mut values: Vec<f64> = cell.iter().filter_map(|r| r.auc).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            let failed = cell.len() - values.len();
            let mut summary = CellSummary {
                generator,
                method: method.to_string(),
                samples,
                n: values.len(),
                failed,
                median: None,
                q25: None,
                q75: None,
                mean: None,
                ci95: None,
                insufficient: values.len() < 2,
            };
            if !values.is_empty() {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                summary.mean = Some(mean);
                summary.median = Some(quantile_sorted(&values, 0.5));
                summary.q25 = Some(quantile_sorted(&values, 0.25));
                summary.q75 = Some(quantile_sorted(&values, 0.75));
                if values.len() >= 2 {
                    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                    summary.ci95 = Some(1.96 * var.sqrt() / n.sqrt());
                }
            }
            summary
        })
        .collect()
}
