//! Release acceptance checks. Prints one PASS/FAIL/SKIP line per criterion
//! and exits nonzero if any criterion fails.
//!
//! Criterion 10 needs the river discharge CSV; point `RIVER_CSV` at it.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Instant;

use nalgebra::DMatrix;
use preimage_gc::bench::graph_auc;
use preimage_gc::synthgen::{generate, white_noise, GeneratorId};
use preimage_gc::{
    causality_index, fit_kernel_pca, fit_var, infer_graph, learn_preimage, linear_gc_baseline, median_bandwidth,
    ComponentSelection, Config, FeatureMap, KernelSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_preimage-gc");

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn check(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn standardize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = x.clone();
    for mut c in z.column_iter_mut() {
        let n = c.len() as f64;
        let mean = c.sum() / n;
        let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        c.apply(|v| *v = (*v - mean) / sd);
    }
    z
}

fn population_variance(c: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = c.clone().count() as f64;
    let mean = c.clone().sum::<f64>() / n;
    c.map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Per-target residual variances of an OLS VAR(lag) on the given columns,
/// solved through an SVD rather than the normal equations.
fn ols_residual_variances(z: &DMatrix<f64>, columns: &[usize], lag: usize) -> Vec<f64> {
    let rows = z.nrows() - lag;
    let d = columns.len();
    let x = DMatrix::from_fn(rows, d * lag, |r, c| z[(r + lag - 1 - c / d, columns[c % d])]);
    let y = DMatrix::from_fn(rows, d, |r, c| z[(r + lag, columns[c])]);
    let beta = x.clone().svd(true, true).solve(&y, 1e-14).unwrap();
    let resid = y - x * beta;
    resid.column_iter().map(|c| population_variance(c.iter().copied())).collect()
}

/// Linear Granger causality written out directly, row = cause.
fn linear_gc_oracle(values: &DMatrix<f64>, lag: usize) -> DMatrix<f64> {
    let z = standardize(values);
    let n = z.ncols();
    let all: Vec<usize> = (0..n).collect();
    let full = ols_residual_variances(&z, &all, lag);
    let mut raw = DMatrix::zeros(n, n);
    for i in 0..n {
        let kept: Vec<usize> = all.iter().copied().filter(|&k| k != i).collect();
        let reduced = ols_residual_variances(&z, &kept, lag);
        for (k, &j) in kept.iter().enumerate() {
            raw[(i, j)] = (reduced[k] / full[j]).ln();
        }
    }
    raw
}

fn c1_degeneracy() -> Outcome {
    let start = Instant::now();
    let config = Config {
        feature_map: FeatureMap::LinearIdentity,
        components: ComponentSelection::Count(5),
        lag: 1,
        ridge_var: 0.0,
        ridge_preimage: 0.0,
        normalize_input: true,
    };
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let data = generate(GeneratorId::Linear5, 500, seed, None).unwrap();
        let ours = infer_graph(&data.panel, &config).unwrap();
        let baseline = linear_gc_baseline(&data.panel, 1).unwrap();
        let oracle = linear_gc_oracle(data.panel.values(), 1);
        let oracle_delta = oracle.map(|v| v.max(0.0));
        worst = worst
            .max((ours.delta() - baseline.delta()).amax())
            .max((ours.raw_log_ratios() - &oracle).amax())
            .max((baseline.delta() - &oracle_delta).amax());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-10 && secs < 5.0,
        format!("max elementwise gap vs baseline and direct OLS oracle {worst:.2e}, {secs:.2} s"),
    )
}

struct Sweep {
    summaries: Vec<Value>,
    seconds: f64,
}

impl Sweep {
    fn mean(&self, generator: &str, method: &str, samples: u64) -> f64 {
        self.summaries
            .iter()
            .find(|s| s["generator"] == generator && s["method"] == method && s["samples"] == samples)
            .and_then(|s| s["mean"].as_f64())
            .unwrap_or(f64::NAN)
    }
}

fn run_sweep() -> Result<Sweep, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let status = Command::new(BIN)
        .args(["bench", "--config"])
        .arg(configs_dir().join("paper_sweep.toml"))
        .arg("--out")
        .arg(dir.path())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    let seconds = start.elapsed().as_secs_f64();
    if !status.success() {
        return Err(format!("bench exited with {status}"));
    }
    let text = fs::read_to_string(dir.path().join("summaries.json")).map_err(|e| e.to_string())?;
    let summaries: Vec<Value> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    for s in &summaries {
        if s["failed"].as_u64() != Some(0) {
            return Err(format!("failed cells in {s}"));
        }
    }
    Ok(Sweep { summaries, seconds })
}

fn c2_classical(sweep: &Sweep) -> Outcome {
    let auc = sweep.mean("linear5", "linear_gc", 500);
    check(auc > 0.9, format!("linear GC mean AUC on linear5 at T=500: {auc:.3}"))
}

fn c3_nonlinear_advantage(sweep: &Sweep) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for g in ["nonlinear5", "fanout3"] {
        let ours = sweep.mean(g, "ours", 500);
        let linear = sweep.mean(g, "linear_gc", 500);
        ok &= ours >= linear && ours > 0.8;
        parts.push(format!("{g} {ours:.3} vs {linear:.3}"));
    }
    check(ok, format!("mean AUC at T=500, kernel vs linear: {}", parts.join(", ")))
}

fn c4_short_t(sweep: &Sweep) -> Outcome {
    let grid = [50u64, 100, 200, 500];
    let mut monotone = true;
    let mut above = 0;
    let mut parts = Vec::new();
    for g in GeneratorId::ALL {
        let means: Vec<f64> = grid.iter().map(|&t| sweep.mean(g.as_str(), "ours", t)).collect();
        monotone &= means.windows(2).all(|w| w[1] >= w[0] - 0.03);
        if means[0] > 0.6 {
            above += 1;
        }
        let shown: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
        parts.push(format!("{g} [{}]", shown.join(" ")));
    }
    let minutes = sweep.seconds / 60.0;
    check(
        monotone && above >= 4 && minutes < 30.0,
        format!(
            "kernel mean AUC over T=50..500: {}; {above}/5 above 0.6 at T=50; sweep {minutes:.1} min",
            parts.join(", ")
        ),
    )
}

fn c5_null() -> Outcome {
    let reference = GeneratorId::Linear5.ground_truth();
    let config = Config::default();
    let mut aucs = Vec::new();
    let mut magnitudes = Vec::new();
    for seed in 0..50 {
        let panel = white_noise(5, 500, seed).unwrap();
        let graph = infer_graph(&panel, &config).unwrap();
        aucs.push(graph_auc(&graph, &reference).unwrap());
        let raw = graph.raw_log_ratios();
        for i in 0..5 {
            for j in (0..5).filter(|&j| j != i) {
                magnitudes.push(raw[(i, j)].abs());
            }
        }
    }
    let mean_auc = aucs.iter().sum::<f64>() / aucs.len() as f64;
    magnitudes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = (magnitudes[magnitudes.len() / 2 - 1] + magnitudes[magnitudes.len() / 2]) / 2.0;
    check(
        (0.4..=0.6).contains(&mean_auc) && median < 0.05,
        format!("mean AUC {mean_auc:.3}, median |raw log ratio| {median:.2e}"),
    )
}

fn c6_index() -> Outcome {
    let equal = causality_index(2.5f64, 2.5).unwrap();
    let e_ratio = causality_index(std::f64::consts::E, 1.0).unwrap();
    let smaller = causality_index(0.5f64, 1.0).unwrap();
    check(
        equal == 0.0 && e_ratio == 1.0 && smaller == 0.0,
        format!("equal -> {equal}, e-ratio -> {e_ratio}, smaller reduced -> {smaller}"),
    )
}

fn c7_pca_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let x = random_matrix(50, 4, 100 + seed);
        let mut xc = x.clone();
        for mut c in xc.column_iter_mut() {
            let m = c.mean();
            c.add_scalar_mut(-m);
        }
        let eig = (xc.transpose() * &xc).symmetric_eigen();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let scores = &xc * eig.eigenvectors.select_columns(&order);

        let model = fit_kernel_pca(&KernelSpec::Linear, &x, ComponentSelection::Count(4)).unwrap();
        let projected = model.project(&x).unwrap();
        for p in 0..4 {
            let want = scores.column(p);
            let got = projected.column(p);
            let sign = if got.dot(&want) < 0.0 { -1.0 } else { 1.0 };
            worst = worst.max((got * sign - want).norm() / want.norm());
        }
    }
    check(worst <= 1e-8, format!("max relative gap to covariance PCA scores {worst:.2e}"))
}

fn sinusoid_panel(seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(15.0..60.0), rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.5..2.0)))
        .collect();
    DMatrix::from_fn(400, 3, |t, d| {
        let (period, phase, amp) = waves[d];
        amp * (2.0 * std::f64::consts::PI * t as f64 / period + phase).sin()
    })
}

fn c8_round_trip() -> Outcome {
    let y = standardize(&random_matrix(60, 4, 7));
    let model = fit_kernel_pca(&KernelSpec::Linear, &y, ComponentSelection::Count(4)).unwrap();
    let h = model.project(&y).unwrap();
    let map = learn_preimage(&y, &h, 0.0).unwrap();
    let linear_mse = (map.reconstruct(&h).unwrap() - &y).norm_squared() / y.len() as f64;

    let mut worst_ratio = 0.0f64;
    for seed in 0..3 {
        let y = sinusoid_panel(seed);
        let bandwidth = median_bandwidth(&y).unwrap();
        let spec = KernelSpec::rbf(bandwidth).unwrap();
        let model = fit_kernel_pca(&spec, &y, ComponentSelection::Fraction(0.99)).unwrap();
        let h = model.project(&y).unwrap();
        let map = learn_preimage(&y, &h, 1e-3).unwrap();
        let mse = (map.reconstruct(&h).unwrap() - &y).norm_squared() / y.len() as f64;
        let signal = y.column_iter().map(|c| population_variance(c.iter().copied())).sum::<f64>() / 3.0;
        worst_ratio = worst_ratio.max(mse / signal);
    }
    check(
        linear_mse < 1e-10 && worst_ratio < 0.05,
        format!("linear MSE {linear_mse:.2e}; rbf MSE / signal variance {worst_ratio:.4} (worst of 3)"),
    )
}

fn c9_var_recovery() -> Outcome {
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let systems = [
        DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.0, 0.4]),
        DMatrix::from_row_slice(2, 2, &[0.95 * c, -0.95 * s, 0.95 * s, 0.95 * c]),
        DMatrix::from_row_slice(2, 2, &[0.9, -0.3, 0.2, 0.6]),
    ];
    let mut worst = 0.0f64;
    for (k, a) in systems.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let mut x = DMatrix::zeros(60, 2);
        x[(0, 0)] = rng.gen_range(-1.0..1.0);
        x[(0, 1)] = rng.gen_range(-1.0..1.0);
        for r in 1..60 {
            let next = a * x.row(r - 1).transpose();
            x.set_row(r, &next.transpose());
        }
        let fit = fit_var(&x, 1, 0.0).unwrap();
        worst = worst.max((&fit.coefficients()[0] - a).amax());
    }
    check(worst <= 1e-6, format!("max coefficient error over 3 systems {worst:.2e}"))
}

fn c10_river() -> Outcome {
    let Some(csv) = std::env::var_os("RIVER_CSV") else {
        return Outcome {
            status: Status::Skip,
            detail: "RIVER_CSV not set".into(),
        };
    };
    let dir = tempfile::tempdir().unwrap();
    let output = Command::new(BIN)
        .arg("infer")
        .arg(&csv)
        .arg("--config")
        .arg(configs_dir().join("river.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    if !output.status.success() {
        return check(false, String::from_utf8_lossy(&output.stderr).trim().to_string());
    }
    let graph = preimage_gc::Graph::from_json(&fs::read_to_string(dir.path().join("graph.json")).unwrap()).unwrap();
    let idx = |name: &str| graph.node_names().iter().position(|n| n == name);
    let (Some(ik), Some(dd), Some(il)) = (idx("IK"), idx("DD"), idx("IL")) else {
        return check(false, format!("expected IK, DD, IL columns, found {:?}", graph.node_names()));
    };
    let top = graph.top_edge().unwrap();
    let d = graph.delta();
    let ok = top.cause == ik && top.effect == dd && d[(il, ik)] < d[(ik, dd)] && d[(il, dd)] < d[(ik, dd)];
    check(
        ok,
        format!(
            "top edge {} -> {}; IK->DD {:.4}, IL->IK {:.4}, IL->DD {:.4}",
            graph.node_names()[top.cause],
            graph.node_names()[top.effect],
            d[(ik, dd)],
            d[(il, ik)],
            d[(il, dd)]
        ),
    )
}

fn run_cli(args: &[&str], threads: usize) -> Result<(), String> {
    let out = Command::new(BIN)
        .args(args)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> bool {
    names
        .iter()
        .all(|n| matches!((fs::read(a.join(n)), fs::read(b.join(n))), (Ok(x), Ok(y)) if x == y))
}

fn c11_determinism() -> Outcome {
    let max_threads = std::thread::available_parallelism().map_or(1, |n| n.get()).max(4);
    let root = tempfile::tempdir().unwrap();
    let p = |s: &str| root.path().join(s).to_string_lossy().into_owned();
    let quick = configs_dir().join("quick.toml").to_string_lossy().into_owned();
    let max_jobs = max_threads.to_string();

    let result = (|| -> Result<Vec<(&str, bool)>, String> {
        let mut checks = Vec::new();
        for (dir, threads) in [("s1", 1), ("s2", max_threads)] {
            run_cli(&["synth", "nonlinear5", "--T", "300", "--seed", "4", "--out", &p(dir)], threads)?;
            run_cli(&["synth", "logistic2", "--T", "200", "--seed", "9", "--out", &p(dir)], threads)?;
        }
        checks.push((
            "synth",
            same_files(
                &root.path().join("s1"),
                &root.path().join("s2"),
                &[
                    "nonlinear5_T300_seed4.csv",
                    "nonlinear5_T300_seed4.json",
                    "logistic2_T200_seed9.csv",
                    "logistic2_T200_seed9.json",
                ],
            ),
        ));

        let data = p("s1/nonlinear5_T300_seed4.csv");
        for (dir, threads) in [("i1", 1), ("i2", max_threads), ("i3", max_threads)] {
            run_cli(&["infer", &data, "--out", &p(dir)], threads)?;
        }
        let files = ["graph.json", "edges.csv"];
        checks.push((
            "infer",
            same_files(&root.path().join("i1"), &root.path().join("i2"), &files)
                && same_files(&root.path().join("i1"), &root.path().join("i3"), &files),
        ));

        for (dir, jobs) in [("b1", "1"), ("b2", max_jobs.as_str()), ("b3", max_jobs.as_str())] {
            run_cli(&["bench", "--config", &quick, "--out", &p(dir), "--jobs", jobs], max_threads)?;
        }
        let files = ["records.csv", "summaries.json"];
        checks.push((
            "bench",
            same_files(&root.path().join("b1"), &root.path().join("b2"), &files)
                && same_files(&root.path().join("b1"), &root.path().join("b3"), &files),
        ));
        Ok(checks)
    })();

    match result {
        Ok(checks) => {
            let shown: Vec<String> = checks
                .iter()
                .map(|(n, ok)| format!("{n} {}", if *ok { "identical" } else { "DIFFER" }))
                .collect();
            check(
                checks.iter().all(|(_, ok)| *ok),
                format!("1 vs {max_threads} threads: {}", shown.join(", ")),
            )
        }
        Err(e) => check(false, e),
    }
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        check(false, format!("panicked: {msg}"))
    })
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "degeneracy oracle", guarded(c1_degeneracy)));

    match run_sweep() {
        Ok(sweep) => {
            results.push((2, "classical GC sanity", guarded(|| c2_classical(&sweep))));
            results.push((3, "nonlinear advantage", guarded(|| c3_nonlinear_advantage(&sweep))));
            results.push((4, "short-T trend", guarded(|| c4_short_t(&sweep))));
        }
        Err(e) => {
            for (id, name) in [(2, "classical GC sanity"), (3, "nonlinear advantage"), (4, "short-T trend")] {
                results.push((id, name, check(false, format!("sweep failed: {e}"))));
            }
        }
    }
    results.push((5, "null calibration", guarded(c5_null)));
    results.push((6, "index clamp and formula", guarded(c6_index)));
    results.push((7, "kernel PCA oracle", guarded(c7_pca_oracle)));
    results.push((8, "pre-image round trip", guarded(c8_round_trip)));
    results.push((9, "VAR recovery", guarded(c9_var_recovery)));
    results.push((10, "river case study", guarded(c10_river)));
    results.push((11, "determinism", guarded(c11_determinism)));

    let mut failed = 0;
    for (id, name, outcome) in &results {
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!("{tag} {id:>2} {name}: {}", outcome.detail);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
