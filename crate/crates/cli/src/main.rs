mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use preimage_gc::bench::{graph_auc, run_benchmark};
use preimage_gc::data::ingest_csv;
use preimage_gc::synthgen::{generate, GeneratorId, Sidecar};
use preimage_gc::{infer_graph, Graph, Panel};

use crate::config::{BenchConfig, InferConfig, SynthConfig};

/// Nonlinear Granger causality via kernel PCA and a learned pre-image map.
#[derive(Debug, Parser)]
#[command(name = "preimage-gc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Infer a causal graph from a CSV panel (header row of node names).
    Infer {
        data: PathBuf,
        /// TOML file with a [pipeline] section.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for graph.json and edges.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic panel with known ground truth.
    Synth {
        generator: GeneratorId,
        #[arg(long = "T")]
        samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// TOML file with [params.<generator>] overrides.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a benchmark sweep described by a TOML file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the number of cells and exit.
        #[arg(long)]
        dry_run: bool,
        /// Worker threads (all cores by default).
        #[arg(long, env = "PREIMAGE_GC_JOBS")]
        jobs: Option<usize>,
    },
    /// Score a graph against a synthetic sidecar and print the AUC.
    Eval { graph: PathBuf, sidecar: PathBuf },
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration, or missing inputs (exit 2).
    Usage(String),
    /// Failures while running (exit 1).
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn runtime(e: preimage_gc::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))
}

fn infer(data: &Path, config: Option<&Path>, out: Option<PathBuf>) -> Result<(), CliError> {
    let (cfg, config_out) = match config {
        Some(path) => {
            let c: InferConfig = config::load(path)?;
            let out = c.out.as_deref().map(|o| config::relative_to(path, o));
            (c.pipeline.to_config("pipeline")?, out)
        }
        None => (InferConfig::default().pipeline.to_config("pipeline")?, None),
    };
    let out = out.or(config_out).unwrap_or_else(|| PathBuf::from("."));
    let text = read_input(data)?;
    prepare_dir(&out)?;

    let panel: Panel = ingest_csv(&text).map_err(|e| CliError::Runtime(format!("parse: {e}")))?;
    log::info!("{} samples x {} nodes from {}", panel.samples(), panel.nodes(), data.display());
    let graph = infer_graph(&panel, &cfg).map_err(runtime)?;

    write_output(&out.join("graph.json"), &graph.to_json().map_err(runtime)?)?;
    write_output(&out.join("edges.csv"), &graph.to_edge_csv())?;
    if let Some(top) = graph.top_edge() {
        println!(
            "top edge: {} -> {} (delta = {:.6})",
            graph.node_names()[top.cause],
            graph.node_names()[top.effect],
            top.delta
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn synth(id: GeneratorId, samples: usize, seed: u64, out: &Path, config: Option<&Path>) -> Result<(), CliError> {
    let params = match config {
        Some(path) => {
            let c: SynthConfig = config::load(path)?;
            config::resolve_params(&c.params)?
                .into_iter()
                .find(|(g, _)| *g == id)
                .map(|(_, p)| p)
        }
        None => None,
    };
    prepare_dir(out)?;
    let dataset = generate(id, samples, seed, params.as_ref()).map_err(runtime)?;
    let stem = format!("{id}_T{samples}_seed{seed}");
    let csv_path = out.join(format!("{stem}.csv"));
    let json_path = out.join(format!("{stem}.json"));
    let sidecar = serde_json::to_string_pretty(&dataset.sidecar()).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_output(&csv_path, &dataset.panel.to_csv())?;
    write_output(&json_path, &sidecar)?;
    println!("{}", csv_path.display());
    println!("{}", json_path.display());
    Ok(())
}

fn bench(config: &Path, out: Option<PathBuf>, dry_run: bool, jobs: Option<usize>) -> Result<(), CliError> {
    let cfg: BenchConfig = config::load(config)?;
    let plan = cfg.to_plan()?;
    plan.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if dry_run {
        println!("cells: {}", plan.cell_count());
        return Ok(());
    }
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let out = out
        .or_else(|| cfg.out.as_deref().map(|o| config::relative_to(config, o)))
        .unwrap_or_else(|| PathBuf::from("bench_out"));
    prepare_dir(&out)?;

    let report = run_benchmark(&plan, jobs, |done, total, r| {
        let outcome = match (&r.auc, &r.failure) {
            (Some(a), _) => format!("auc={a:.4}"),
            (None, Some(f)) => format!("failed: {f}"),
            (None, None) => String::new(),
        };
        let mut err = std::io::stderr().lock();
        let _ = writeln!(
            err,
            "[{done}/{total}] {} {} T={} seed={} {outcome}",
            r.generator, r.method, r.samples, r.seed
        );
    })
    .map_err(runtime)?;

    write_output(&out.join("records.csv"), &report.records_csv())?;
    write_output(&out.join("summaries.json"), &report.summaries_json().map_err(runtime)?)?;
    for s in &report.summaries {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        println!(
            "{:<11} {:<12} T={:<5} median={} mean={} ±{} (n={}, failed={})",
            s.generator.as_str(),
            s.method,
            s.samples,
            fmt(s.median),
            fmt(s.mean),
            fmt(s.ci95),
            s.n,
            s.failed
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn eval(graph: &Path, sidecar: &Path) -> Result<(), CliError> {
    let graph_text = read_input(graph)?;
    let sidecar_text = read_input(sidecar)?;
    let graph = Graph::from_json(&graph_text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", graph.display())))?;
    let sidecar: Sidecar = serde_json::from_str(&sidecar_text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", sidecar.display())))?;
    let truth = sidecar
        .ground_truth_matrix()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if truth.nrows() != graph.nodes() {
        return Err(CliError::Usage(format!(
            "graph has {} nodes but the ground truth has {}",
            graph.nodes(),
            truth.nrows()
        )));
    }
    let auc = graph_auc(&graph, &truth).map_err(runtime)?;
    println!("{auc:.6}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Infer { data, config, out } => infer(&data, config.as_deref(), out),
        Command::Synth {
            generator,
            samples,
            seed,
            out,
            config,
        } => synth(generator, samples, seed, &out, config.as_deref()),
        Command::Bench {
            config,
            out,
            dry_run,
            jobs,
        } => bench(&config, out, dry_run, jobs),
        Command::Eval { graph, sidecar } => eval(&graph, &sidecar),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
