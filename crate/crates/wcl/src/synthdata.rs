//! Synthetic data: Gaussian-on-sphere mixtures with known class structure,
//! an augmentation model (isotropic noise plus coordinate dropout), and a
//! linear-probe evaluator.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::WclError;
use crate::matkernel::{dot, l2_norm, read_wcle, write_wcle, Matrix};

/// Unit-norm inputs with ground-truth class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }
}

fn gaussian_row(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn unit_row(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut row = gaussian_row(d, rng);
        let norm = l2_norm(&row);
        if norm > 1e-9 {
            for v in row.iter_mut() {
                *v /= norm;
            }
            return row;
        }
    }
}

/// Samples `c` cluster centers uniformly on the unit sphere and draws
/// points as normalize(center + spread·gaussian). Labels are assigned
/// round-robin so class sizes are balanced within ±1.
pub fn gen_sphere_mixture(
    c: usize,
    n: usize,
    d: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset, WclError> {
    if c < 2 {
        return Err(WclError::invalid("c", "need at least 2 classes"));
    }
    if n < c {
        return Err(WclError::invalid("n", "need at least one sample per class"));
    }
    if d < 2 {
        return Err(WclError::invalid("d", "need at least 2 dimensions"));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(WclError::invalid("spread", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..c).map(|_| unit_row(d, &mut rng)).collect();
    let mut x = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % c;
        labels.push(class);
        loop {
            let noise = gaussian_row(d, &mut rng);
            let mut row: Vec<f64> = centers[class]
                .iter()
                .zip(&noise)
                .map(|(cv, nv)| cv + spread * nv)
                .collect();
            let norm = l2_norm(&row);
            if norm > 1e-9 {
                for v in row.iter_mut() {
                    *v /= norm;
                }
                x.row_mut(i).copy_from_slice(&row);
                break;
            }
        }
    }
    Ok(Dataset {
        x,
        labels,
        class_count: c,
        seed,
    })
}

/// Randomly perturbs each row: additive gaussian noise at `strength`, then
/// coordinate dropout with probability strength/2, then renormalization.
/// Strength 0 is the identity.
pub fn augment(x_rows: &Matrix, strength: f64, seed: u64) -> Matrix {
    if strength == 0.0 {
        return x_rows.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = x_rows.clone();
    let drop_p = strength / 2.0;
    for i in 0..out.rows() {
        let noisy: Vec<f64> = out
            .row(i)
            .iter()
            .map(|v| v + strength * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut masked: Vec<f64> = noisy
            .iter()
            .map(|&v| if rng.gen::<f64>() < drop_p { 0.0 } else { v })
            .collect();
        if l2_norm(&masked) < 1e-9 {
            masked = noisy; // dropout zeroed the whole row; keep the noisy version
        }
        let norm = l2_norm(&masked).max(crate::matkernel::NORM_EPS);
        for (o, v) in out.row_mut(i).iter_mut().zip(&masked) {
            *o = v / norm;
        }
    }
    out
}

/// Multinomial logistic regression on frozen features: full-batch gradient
/// descent, 500 iterations at lr 0.1, trained on a seeded `train_fraction`
/// split. Returns held-out accuracy.
pub fn linear_probe(
    features: &Matrix,
    labels: &[usize],
    train_fraction: f64,
    seed: u64,
) -> Result<f64, WclError> {
    let n = features.rows();
    if n != labels.len() {
        return Err(WclError::ShapeMismatch {
            expected: format!("{} labels", n),
            got: format!("{}", labels.len()),
        });
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle(&mut order, &mut rng);
    let train_n = ((train_fraction * n as f64).round() as usize).min(n);
    let (train_idx, test_idx) = order.split_at(train_n);
    if test_idx.is_empty() {
        return Err(WclError::DegenerateSplit);
    }
    let mut train_classes: Vec<bool> = vec![false; classes];
    for &i in train_idx {
        train_classes[labels[i]] = true;
    }
    if train_classes.iter().filter(|&&c| c).count() < 2 {
        return Err(WclError::DegenerateSplit);
    }

    let d = features.cols();
    // standardize with train-split statistics for a well-conditioned descent
    let mut mean = vec![0.0; d];
    for &i in train_idx {
        for (m, v) in mean.iter_mut().zip(features.row(i)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= train_n as f64;
    }
    let mut var = vec![0.0; d];
    for &i in train_idx {
        for ((s, v), m) in var.iter_mut().zip(features.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std: Vec<f64> = var
        .iter()
        .map(|s| (s / train_n as f64).sqrt().max(1e-8))
        .collect();
    let standardize = |i: usize| -> Vec<f64> {
        let mut row: Vec<f64> = features
            .row(i)
            .iter()
            .zip(&mean)
            .zip(&std)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        row.push(1.0); // bias feature
        row
    };

    let train: Vec<Vec<f64>> = train_idx.iter().map(|&i| standardize(i)).collect();
    let mut weights = Matrix::zeros(classes, d + 1);
    let lr = 0.1;
    for _ in 0..500 {
        let mut grad = Matrix::zeros(classes, d + 1);
        for (row, &i) in train.iter().zip(train_idx) {
            let logits: Vec<f64> = (0..classes).map(|c| dot(weights.row(c), row)).collect();
            let probs = softmax(&logits);
            for c in 0..classes {
                let coef = probs[c] - if labels[i] == c { 1.0 } else { 0.0 };
                for (g, v) in grad.row_mut(c).iter_mut().zip(row) {
                    *g += coef * v;
                }
            }
        }
        grad.scale(1.0 / train_n as f64);
        weights.add_scaled(&grad, -lr);
    }

    let mut correct = 0;
    for &i in test_idx {
        let row = standardize(i);
        let logits: Vec<f64> = (0..classes).map(|c| dot(weights.row(c), &row)).collect();
        let pred = argmax(&logits);
        if pred == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test_idx.len() as f64)
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn shuffle(indices: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
}

/// Writes a dataset as a WCLE matrix plus a `.labels` sidecar of u32-LE
/// class ids next to it.
pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<(), WclError> {
    write_wcle(path, &ds.x)?;
    let mut buf = Vec::with_capacity(4 * ds.labels.len());
    for &l in &ds.labels {
        buf.extend_from_slice(&(l as u32).to_le_bytes());
    }
    std::fs::File::create(labels_path(path))?.write_all(&buf)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, WclError> {
    let x = read_wcle(path)?;
    let lp = labels_path(path);
    let mut bytes = Vec::new();
    std::fs::File::open(&lp)?.read_to_end(&mut bytes)?;
    if bytes.len() != 4 * x.rows() {
        return Err(WclError::MalformedFile {
            path: lp.display().to_string(),
            reason: format!("expected {} label ids, got {} bytes", x.rows(), bytes.len()),
        });
    }
    let labels: Vec<usize> = bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let class_count = labels.iter().copied().max().map_or(0, |m| m + 1);
    Ok(Dataset {
        x,
        labels,
        class_count,
        seed: 0,
    })
}

fn labels_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".labels");
    std::path::PathBuf::from(s)
}
