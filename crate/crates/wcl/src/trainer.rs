//! Training orchestration: per-step two-view forward, weak-label
//! generation, the four loss terms, crop handling, SGD updates, feature
//! recording, and the epoch-end KNN refresh.

use std::time::Instant;

use serde::Serialize;

use crate::encoder::{
    backward, forward, lr_schedule, sgd_step, ModelDims, ModelParams, OptimizerState,
};
use crate::error::WclError;
use crate::losses::{
    crop_nce_loss, crop_sup_loss, nce_loss, overall_loss, swap_loss, LossParts, LossWeights,
};
use crate::matkernel::Matrix;
use crate::multicrop::{compute_knn_table, select_crop_sources, FeatureStore, KnnTable};
use crate::stream_seed;
use crate::synthdata::{augment, linear_probe, shuffle, Dataset};
use crate::weakgraph::{
    build_one_nn_adjacency, component_stats, connected_components, weak_labels, WeakLabelMatrix,
};

/// All training hyperparameters. Defaults follow the reference recipe:
/// τ=0.1, λ=1, β=0.5, γ=0.5, K=4, crop warm-up over the first 25% of
/// epochs.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub warmup_lr_epochs: usize,
    pub tau: f64,
    pub lambda_c: f64,
    pub beta: f64,
    pub gamma_c: f64,
    pub knn_k: usize,
    pub crop_warmup_fraction: f64,
    pub crops_per_sample: usize,
    pub aug_strength: f64,
    pub crop_strength: f64,
    pub weight_decay: f64,
    pub dims: ModelDims,
    pub seed: u64,
    pub supcon_mean_over_positives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 64,
            base_lr: 0.3,
            warmup_lr_epochs: 10,
            tau: 0.1,
            lambda_c: 1.0,
            beta: 0.5,
            gamma_c: 0.5,
            knn_k: 4,
            crop_warmup_fraction: 0.25,
            crops_per_sample: 6,
            aug_strength: 0.05,
            crop_strength: 0.4,
            weight_decay: 1e-6,
            dims: ModelDims {
                input: 16,
                hidden: 64,
                feat: 32,
                proj: 16,
            },
            seed: 0,
            supcon_mean_over_positives: false,
        }
    }
}

impl TrainConfig {
    /// Rejects invalid settings with a message naming the offending key.
    pub fn validate(&self) -> Result<(), WclError> {
        let bad = |key: &str, reason: &str| Err(WclError::Config(format!("{key}: {reason}")));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau", "must be positive");
        }
        for (key, v) in [
            ("lambda", self.lambda_c),
            ("beta", self.beta),
            ("gamma", self.gamma_c),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(key, "must be a finite non-negative number");
            }
        }
        if self.epochs > 0 && self.batch_size < 4 {
            return bad("batch_size", "must be at least 4");
        }
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return bad("base_lr", "must be finite and non-negative");
        }
        if self.epochs > 0 && self.warmup_lr_epochs >= self.epochs {
            return bad("warmup_lr_epochs", "must be smaller than epochs");
        }
        if !(0.0..=1.0).contains(&self.crop_warmup_fraction) {
            return bad("crop_warmup_fraction", "must lie in [0, 1]");
        }
        if self.crops_per_sample > 0 && self.knn_k == 0 {
            return bad("knn_k", "must be positive when crops are configured");
        }
        if self.epochs > 0
            && self.crops_per_sample > 0
            && crop_warmup_epochs(self.crop_warmup_fraction, self.epochs) == 0
        {
            return bad(
                "crop_warmup_fraction",
                "must allow at least one warm-up epoch when crops are configured",
            );
        }
        if !(self.aug_strength >= 0.0) || !(self.crop_strength >= 0.0) {
            return bad("aug_strength", "strengths must be non-negative");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay", "must be finite and non-negative");
        }
        Ok(())
    }

    fn weights(&self) -> LossWeights {
        LossWeights {
            tau: self.tau,
            lambda_c: self.lambda_c,
            beta: self.beta,
            gamma_c: self.gamma_c,
        }
    }
}

/// Epoch at which the crop scheduler switches from self-crops to KNN crops.
pub fn crop_warmup_epochs(fraction: f64, epochs: usize) -> usize {
    (fraction * epochs as f64).ceil() as usize
}

/// Per-epoch aggregates, one JSON line each in metrics.jsonl. Wall time is
/// tracked in memory but excluded from serialization so identical runs
/// produce byte-identical metrics files.
#[derive(Debug, Clone, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_nce: f64,
    pub mean_swap: f64,
    pub mean_cnce: Option<f64>,
    pub mean_cswap: Option<f64>,
    pub mean_overall: f64,
    pub mean_component_count: f64,
    pub learning_rate: f64,
    #[serde(skip_serializing)]
    pub wall_time_s: f64,
}

/// Loss values and batch graph statistics from one optimization step.
#[derive(Debug, Clone)]
pub struct StepMetrics {
    pub parts: LossParts,
    pub overall: f64,
    /// Mean connected-component count over the two view graphs.
    pub component_count: f64,
}

fn batch_weak_labels(
    v: &crate::matkernel::EmbeddingBatch,
) -> Result<(WeakLabelMatrix, usize), WclError> {
    let sim = crate::matkernel::cosine_similarity_matrix(v, v)?;
    let adj = build_one_nn_adjacency(&sim)?;
    let comp = connected_components(&adj);
    let stats = component_stats(&comp);
    Ok((weak_labels(&comp), stats.component_count))
}

/// One optimization step: two augmented views, weak labels from each
/// view's auxiliary embeddings, the four loss terms with swapped
/// supervision, a single SGD update, and view-1 feature recording.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    params: &mut ModelParams,
    opt_state: &mut OptimizerState,
    store: &mut FeatureStore,
    batch_x: &Matrix,
    batch_indices: &[usize],
    dataset_x: &Matrix,
    config: &TrainConfig,
    crop_sources: Option<&[Vec<usize>]>,
    lr: f64,
    step_id: u64,
) -> Result<StepMetrics, WclError> {
    let n = batch_x.rows();
    if n < 4 {
        return Err(WclError::TooSmall { min: 4, got: n });
    }
    let seed = config.seed;
    let x1 = augment(
        batch_x,
        config.aug_strength,
        stream_seed(seed, &format!("view1/{step_id}")),
    );
    let x2 = augment(
        batch_x,
        config.aug_strength,
        stream_seed(seed, &format!("view2/{step_id}")),
    );
    let t1 = forward(params, &x1)?;
    let t2 = forward(params, &x2)?;

    let (y1, count1) = batch_weak_labels(&t1.v)?;
    let (y2, count2) = batch_weak_labels(&t2.v)?;

    let mop = config.supcon_mean_over_positives;
    let nce = nce_loss(&t1.z, &t2.z, config.tau)?;
    let swap = swap_loss(&t1.v, &t2.v, &y1, &y2, config.tau, mop)?;

    let mut dz1 = nce.grads[0].clone();
    let dz2 = nce.grads[1].clone();
    let mut dv1 = Matrix::zeros(n, t1.v.dim());
    let mut dv2 = Matrix::zeros(n, t2.v.dim());
    // zero-weighted terms are skipped entirely so a β=λ=γ=0 run updates
    // parameters bit-identically to a plain NCE trainer
    if config.beta != 0.0 {
        dv1.add_scaled(&swap.grads[0], config.beta);
        dv2.add_scaled(&swap.grads[1], config.beta);
    }

    let mut parts = LossParts {
        nce: nce.value,
        swap: swap.value,
        cnce: None,
        cswap: None,
    };

    let mut crop_grads: Option<ModelParams> = None;
    if let Some(sources) = crop_sources {
        if config.crops_per_sample > 0 {
            // crop m = a·crops + c is a view of dataset row sources[a][c],
            // treated as an extra positive of batch anchor a
            let flat: Vec<usize> = sources.iter().flatten().copied().collect();
            let crop_x = augment(
                &dataset_x.select_rows(&flat),
                config.crop_strength,
                stream_seed(seed, &format!("crops/{step_id}")),
            );
            let tc = forward(params, &crop_x)?;
            let anchor_of: Vec<usize> = (0..n)
                .flat_map(|a| std::iter::repeat(a).take(config.crops_per_sample))
                .collect();

            let cnce = crop_nce_loss(&tc.z, &t1.z, &anchor_of, config.tau)?;
            let cswap = crop_sup_loss(&tc.v, &t2.v, &anchor_of, &y1, config.tau, mop)?;
            parts.cnce = Some(cnce.value);
            parts.cswap = Some(cswap.value);

            let mut dzc = Matrix::zeros(tc.z.len(), tc.z.dim());
            let mut dvc = Matrix::zeros(tc.v.len(), tc.v.dim());
            if config.lambda_c != 0.0 {
                dzc.add_scaled(&cnce.grads[0], config.lambda_c);
                dz1.add_scaled(&cnce.grads[1], config.lambda_c);
            }
            if config.gamma_c != 0.0 {
                dvc.add_scaled(&cswap.grads[0], config.gamma_c);
                dv2.add_scaled(&cswap.grads[1], config.gamma_c);
            }
            if config.lambda_c != 0.0 || config.gamma_c != 0.0 {
                let dh0 = Matrix::zeros(tc.h.rows(), tc.h.cols());
                crop_grads = Some(backward(params, &tc, &dzc, &dvc, &dh0)?);
            }
        }
    }

    let dh1 = Matrix::zeros(t1.h.rows(), t1.h.cols());
    let mut grads = backward(params, &t1, &dz1, &dv1, &dh1)?;
    let g2 = backward(params, &t2, &dz2, &dv2, &dh1)?;
    grads.add_scaled(&g2, 1.0);
    if let Some(gc) = crop_grads {
        grads.add_scaled(&gc, 1.0);
    }

    sgd_step(params, &grads, opt_state, lr);
    store.record_features(batch_indices, &t1.h)?;

    Ok(StepMetrics {
        overall: overall_loss(&parts, &config.weights()),
        parts,
        component_count: (count1 + count2) as f64 / 2.0,
    })
}

/// Runs the full training loop: shuffled full sweeps per epoch (remainder
/// dropped), crop scheduling against the warm-up fraction, and a KNN table
/// rebuild at every epoch end.
pub fn train(
    config: &TrainConfig,
    dataset: &Dataset,
) -> Result<(ModelParams, Vec<EpochMetrics>), WclError> {
    config.validate()?;
    if dataset.dim() != config.dims.input {
        return Err(WclError::Config(format!(
            "dataset_dim: dataset dimension {} does not match model input {}",
            dataset.dim(),
            config.dims.input
        )));
    }
    let mut params = ModelParams::init(&config.dims, stream_seed(config.seed, "init"));
    let mut metrics = Vec::new();
    if config.epochs == 0 {
        return Ok((params, metrics));
    }
    let n = dataset.len();
    if config.batch_size > n {
        return Err(WclError::Config(format!(
            "batch_size: {} exceeds dataset size {}",
            config.batch_size, n
        )));
    }
    if config.crops_per_sample > 0 && config.knn_k >= n {
        return Err(WclError::Config(format!(
            "knn_k: {} too large for dataset size {}",
            config.knn_k, n
        )));
    }

    let mut opt_state = OptimizerState::new(&params, config.weight_decay);
    let mut store = FeatureStore::new(n, config.dims.feat);
    let mut knn: Option<KnnTable> = None;

    let steps_per_epoch = n / config.batch_size;
    let total_steps = config.epochs * steps_per_epoch;
    let warmup_steps = config.warmup_lr_epochs * steps_per_epoch;
    let crop_warmup = crop_warmup_epochs(config.crop_warmup_fraction, config.epochs);

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut rng =
            rand::SeedableRng::seed_from_u64(stream_seed(config.seed, &format!("shuffle/{epoch}")));
        shuffle(&mut order, &mut rng);

        let mut sums = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0); // nce, swap, cnce, cswap, overall, components
        let mut last_lr = 0.0;
        for step in 0..steps_per_epoch {
            let batch_indices = &order[step * config.batch_size..(step + 1) * config.batch_size];
            let batch_x = dataset.x.select_rows(batch_indices);
            let crop_sources = if config.crops_per_sample > 0 {
                Some(select_crop_sources(
                    epoch,
                    crop_warmup,
                    knn.as_ref(),
                    batch_indices,
                    config.crops_per_sample,
                )?)
            } else {
                None
            };
            let global_step = epoch * steps_per_epoch + step;
            let lr = lr_schedule(global_step, warmup_steps, total_steps, config.base_lr);
            last_lr = lr;
            let out = train_step(
                &mut params,
                &mut opt_state,
                &mut store,
                &batch_x,
                batch_indices,
                &dataset.x,
                config,
                crop_sources.as_deref(),
                lr,
                global_step as u64,
            )?;
            sums.0 += out.parts.nce;
            sums.1 += out.parts.swap;
            sums.2 += out.parts.cnce.unwrap_or(0.0);
            sums.3 += out.parts.cswap.unwrap_or(0.0);
            sums.4 += out.overall;
            sums.5 += out.component_count;
        }

        if store.all_seen() && config.knn_k < n {
            knn = Some(compute_knn_table(&store, config.knn_k)?);
        }

        let inv = 1.0 / steps_per_epoch as f64;
        let has_crops = config.crops_per_sample > 0;
        metrics.push(EpochMetrics {
            epoch,
            mean_nce: sums.0 * inv,
            mean_swap: sums.1 * inv,
            mean_cnce: has_crops.then_some(sums.2 * inv),
            mean_cswap: has_crops.then_some(sums.3 * inv),
            mean_overall: sums.4 * inv,
            mean_component_count: sums.5 * inv,
            learning_rate: last_lr,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }
    Ok((params, metrics))
}

/// Forwards the whole dataset without augmentation and probes the backbone
/// features h with the linear evaluator.
pub fn evaluate(
    params: &ModelParams,
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<f64, WclError> {
    let trace = forward(params, &dataset.x)?;
    linear_probe(&trace.h, &dataset.labels, train_fraction, seed)
}
