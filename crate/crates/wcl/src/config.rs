//! Flat key=value run configuration: one pair per line, `#` comments,
//! unknown keys rejected.

use std::path::{Path, PathBuf};

use crate::error::WclError;
use crate::trainer::TrainConfig;

/// Where the training inputs come from.
#[derive(Debug, Clone)]
pub enum DatasetSpec {
    Generate {
        classes: usize,
        size: usize,
        dim: usize,
        spread: f64,
    },
    File(PathBuf),
}

/// A validated training run: hyperparameters, dataset source, outputs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub dataset: DatasetSpec,
    pub out_dir: PathBuf,
    pub probe_fraction: f64,
    pub probe_seed: u64,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, WclError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WclError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig, WclError> {
        let mut train = TrainConfig::default();
        let mut out_dir: Option<PathBuf> = None;
        let mut dataset_path: Option<PathBuf> = None;
        let mut classes = 8usize;
        let mut size = 256usize;
        let mut spread = 0.1f64;
        let mut dataset_dim: Option<usize> = None;
        let mut probe_fraction = 0.5f64;
        let mut probe_seed: Option<u64> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                WclError::Config(format!(
                    "line {}: expected key=value, got `{raw}`",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| WclError::Config(format!("{key}: {what} (got `{value}`)"));
            macro_rules! parse {
                ($ty:ty) => {
                    value
                        .parse::<$ty>()
                        .map_err(|_| bad(concat!("expected ", stringify!($ty))))?
                };
            }
            match key {
                "seed" => train.seed = parse!(u64),
                "epochs" => train.epochs = parse!(usize),
                "batch_size" => train.batch_size = parse!(usize),
                "base_lr" => train.base_lr = parse!(f64),
                "warmup_lr_epochs" => train.warmup_lr_epochs = parse!(usize),
                "tau" => train.tau = parse!(f64),
                "lambda" => train.lambda_c = parse!(f64),
                "beta" => train.beta = parse!(f64),
                "gamma" => train.gamma_c = parse!(f64),
                "knn_k" => train.knn_k = parse!(usize),
                "crop_warmup_fraction" => train.crop_warmup_fraction = parse!(f64),
                "crops_per_sample" => train.crops_per_sample = parse!(usize),
                "aug_strength" => train.aug_strength = parse!(f64),
                "crop_strength" => train.crop_strength = parse!(f64),
                "weight_decay" => train.weight_decay = parse!(f64),
                "supcon_mean_over_positives" => train.supcon_mean_over_positives = parse!(bool),
                "hidden_dim" => train.dims.hidden = parse!(usize),
                "feat_dim" => train.dims.feat = parse!(usize),
                "proj_dim" => train.dims.proj = parse!(usize),
                "dataset_classes" => classes = parse!(usize),
                "dataset_size" => size = parse!(usize),
                "dataset_dim" => dataset_dim = Some(parse!(usize)),
                "dataset_spread" => spread = parse!(f64),
                "dataset_path" => dataset_path = Some(PathBuf::from(value)),
                "out_dir" => out_dir = Some(PathBuf::from(value)),
                "probe_fraction" => probe_fraction = parse!(f64),
                "probe_seed" => probe_seed = Some(parse!(u64)),
                other => {
                    return Err(WclError::Config(format!("unknown key `{other}`")));
                }
            }
        }

        let dataset = match dataset_path {
            Some(path) => DatasetSpec::File(path),
            None => {
                let dim = dataset_dim.unwrap_or(16);
                train.dims.input = dim;
                DatasetSpec::Generate {
                    classes,
                    size,
                    dim,
                    spread,
                }
            }
        };
        if let DatasetSpec::Generate {
            classes,
            size,
            dim,
            spread,
        } = &dataset
        {
            if *classes < 2 {
                return Err(WclError::Config("dataset_classes: need at least 2".into()));
            }
            if *size < *classes {
                return Err(WclError::Config(
                    "dataset_size: need at least one sample per class".into(),
                ));
            }
            if *dim < 2 {
                return Err(WclError::Config("dataset_dim: need at least 2".into()));
            }
            if !(*spread > 0.0) {
                return Err(WclError::Config("dataset_spread: must be positive".into()));
            }
        }
        if !(0.0 < probe_fraction && probe_fraction < 1.0) {
            return Err(WclError::Config(
                "probe_fraction: must lie strictly between 0 and 1".into(),
            ));
        }
        train.validate()?;
        Ok(RunConfig {
            probe_seed: probe_seed.unwrap_or_else(|| crate::stream_seed(train.seed, "probe")),
            train,
            dataset,
            out_dir: out_dir.unwrap_or_else(|| PathBuf::from("out")),
            probe_fraction,
        })
    }
}
