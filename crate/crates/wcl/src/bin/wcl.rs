//! Command-line frontend: training runs, connected-component analysis of
//! embedding files, the β-sweep harness, and linear probing.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wcl::config::{DatasetSpec, RunConfig};
use wcl::encoder::{load_checkpoint, save_checkpoint};
use wcl::matkernel::{cosine_similarity_matrix, l2_normalize_rows, read_wcle};
use wcl::synthdata::{gen_sphere_mixture, load_dataset, Dataset};
use wcl::trainer::{evaluate, train};
use wcl::weakgraph::{build_one_nn_adjacency, component_stats, connected_components};
use wcl::{stream_seed, WclError};

#[derive(Parser)]
#[command(name = "wcl", about = "Weakly supervised contrastive learning engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full training job from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Report connected-component statistics of a WCLE embedding file.
    CclAnalyze {
        #[arg(long)]
        embeddings: PathBuf,
    },
    /// Train and probe once per β value, emitting sweep.csv.
    SweepBeta {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated β values, e.g. 0.125,0.25,0.5
        #[arg(long)]
        betas: String,
    },
    /// Probe a saved checkpoint on a saved dataset.
    Probe {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config } => cmd_train(&config),
        Command::CclAnalyze { embeddings } => cmd_ccl_analyze(&embeddings),
        Command::SweepBeta { config, betas } => cmd_sweep_beta(&config, &betas),
        Command::Probe {
            model,
            dataset,
            fraction,
            seed,
        } => cmd_probe(&model, &dataset, fraction, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Config and input-file problems exit 2; runtime failures exit 1.
fn exit_code(err: &WclError) -> u8 {
    match err {
        WclError::Config(_) | WclError::MalformedFile { .. } | WclError::InvalidParams { .. } => 2,
        _ => 1,
    }
}

fn build_dataset(cfg: &RunConfig) -> Result<Dataset, WclError> {
    match &cfg.dataset {
        DatasetSpec::Generate {
            classes,
            size,
            dim,
            spread,
        } => gen_sphere_mixture(
            *classes,
            *size,
            *dim,
            *spread,
            stream_seed(cfg.train.seed, "dataset"),
        ),
        DatasetSpec::File(path) => load_dataset(path),
    }
}

fn run_training(
    cfg: &RunConfig,
) -> Result<
    (
        f64,
        Vec<wcl::trainer::EpochMetrics>,
        wcl::encoder::ModelParams,
    ),
    WclError,
> {
    let mut cfg = cfg.clone();
    let dataset = build_dataset(&cfg)?;
    cfg.train.dims.input = dataset.dim();
    let (params, metrics) = train(&cfg.train, &dataset)?;
    let accuracy = evaluate(&params, &dataset, cfg.probe_fraction, cfg.probe_seed)?;
    Ok((accuracy, metrics, params))
}

fn cmd_train(config_path: &Path) -> Result<(), WclError> {
    let cfg = RunConfig::from_file(config_path)?;
    let (accuracy, metrics, params) = run_training(&cfg)?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut jsonl = std::fs::File::create(cfg.out_dir.join("metrics.jsonl"))?;
    for m in &metrics {
        writeln!(
            jsonl,
            "{}",
            serde_json::to_string(m).expect("metrics serialize")
        )?;
    }
    save_checkpoint(&cfg.out_dir.join("model.wclm"), &params)?;

    let counts: Vec<f64> = metrics.iter().map(|m| m.mean_component_count).collect();
    let summary = serde_json::json!({
        "probe_accuracy": accuracy,
        "component_count_mean": mean(&counts),
        "component_count_min": counts.iter().cloned().fold(f64::INFINITY, f64::min),
        "component_count_max": counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "final_overall_loss": metrics.last().map(|m| m.mean_overall),
        "epochs": metrics.len(),
    });
    std::fs::write(
        cfg.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serialize"),
    )?;
    println!("{}", serde_json::json!({"probe_accuracy": accuracy}));
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn cmd_ccl_analyze(embeddings_path: &Path) -> Result<(), WclError> {
    let raw = read_wcle(embeddings_path)?;
    let embeddings = l2_normalize_rows(&raw).map_err(|_| WclError::MalformedFile {
        path: embeddings_path.display().to_string(),
        reason: "contains a zero-norm embedding row".into(),
    })?;
    let sim = cosine_similarity_matrix(&embeddings, &embeddings)?;
    let adj = build_one_nn_adjacency(&sim).map_err(|e| match e {
        WclError::TooSmall { .. } => WclError::MalformedFile {
            path: embeddings_path.display().to_string(),
            reason: "need at least 2 embeddings".into(),
        },
        other => other,
    })?;
    let stats = component_stats(&connected_components(&adj));
    println!(
        "{}",
        serde_json::to_string(&stats).expect("stats serialize")
    );
    Ok(())
}

fn cmd_sweep_beta(config_path: &Path, betas: &str) -> Result<(), WclError> {
    let cfg = RunConfig::from_file(config_path)?;
    let values: Vec<f64> = betas
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| WclError::Config(format!("betas: `{s}` is not a number")))
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(WclError::Config("betas: list must not be empty".into()));
    }
    if let Some(bad) = values.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        return Err(WclError::Config(format!(
            "betas: {bad} must be non-negative"
        )));
    }

    let mut rows = Vec::with_capacity(values.len());
    for &beta in &values {
        let mut run = cfg.clone();
        run.train.beta = beta;
        let (accuracy, _, _) = run_training(&run)?;
        rows.push((beta, accuracy));
    }

    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut csv = String::from("beta,accuracy\n");
    for (beta, accuracy) in &rows {
        csv.push_str(&format!("{beta},{accuracy:.6}\n"));
    }
    std::fs::write(cfg.out_dir.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_probe(model: &Path, dataset: &Path, fraction: f64, seed: u64) -> Result<(), WclError> {
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(WclError::Config(
            "fraction: must lie strictly between 0 and 1".into(),
        ));
    }
    let params = load_checkpoint(model)?;
    let ds = load_dataset(dataset)?;
    let accuracy = evaluate(&params, &ds, fraction, seed)?;
    println!("{}", serde_json::json!({"accuracy": accuracy}));
    Ok(())
}
