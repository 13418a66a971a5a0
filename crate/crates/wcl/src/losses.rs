//! Contrastive loss kernels. Each loss returns its scalar value together
//! with analytic gradients with respect to the input embeddings.
//!
//! All kernels share one structure: build a coefficient matrix C over
//! anchor/candidate pairs from max-shifted softmax terms, then recover the
//! embedding gradients as (C + Cᵀ)·Z / τ (or C·B, Cᵀ·A for the asymmetric
//! crop losses). Gradients are taken with respect to the embeddings as
//! given; backprop through row normalization lives in the encoder.

use crate::error::WclError;
use crate::matkernel::{log_sum_exp, EmbeddingBatch, Matrix};
use crate::weakgraph::WeakLabelMatrix;

/// Scalar loss value plus one gradient matrix per input embedding batch.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub value: f64,
    pub grads: Vec<Matrix>,
}

/// Temperature and the Eq.-style combination weights.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub tau: f64,
    pub lambda_c: f64,
    pub beta: f64,
    pub gamma_c: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            tau: 0.1,
            lambda_c: 1.0,
            beta: 0.5,
            gamma_c: 0.5,
        }
    }
}

/// The four constituent loss values; crop terms are absent when no crops
/// are configured.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossParts {
    pub nce: f64,
    pub cnce: Option<f64>,
    pub swap: f64,
    pub cswap: Option<f64>,
}

fn check_tau(tau: f64) -> Result<(), WclError> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(WclError::NonPositiveTau(tau))
    }
}

/// Symmetrized NT-Xent over two views. Each row of `z1` and `z2` serves as
/// an anchor; its positive is the counterpart row in the other view and the
/// denominator runs over all 2N−1 other embeddings from both views. Returns
/// the mean over the 2N anchors with gradients for z1 and z2.
pub fn nce_loss(
    z1: &EmbeddingBatch,
    z2: &EmbeddingBatch,
    tau: f64,
) -> Result<LossReport, WclError> {
    check_tau(tau)?;
    if z1.len() != z2.len() || z1.dim() != z2.dim() {
        return Err(WclError::ShapeMismatch {
            expected: format!("{}x{}", z1.len(), z1.dim()),
            got: format!("{}x{}", z2.len(), z2.dim()),
        });
    }
    let n = z1.len();
    if n < 2 {
        return Err(WclError::TooSmall { min: 2, got: n });
    }
    let d = z1.dim();
    let m = 2 * n;

    // stacked views
    let mut stacked = Matrix::zeros(m, d);
    for i in 0..n {
        stacked.row_mut(i).copy_from_slice(z1.row(i));
        stacked.row_mut(n + i).copy_from_slice(z2.row(i));
    }
    let logits = {
        let mut s = stacked.matmul_bt(&stacked);
        s.scale(1.0 / tau);
        s
    };

    let mut value = 0.0;
    let mut coeff = Matrix::zeros(m, m);
    for i in 0..m {
        let pos = (i + n) % m;
        let row = logits.row(i);
        let others: Vec<f64> = (0..m).filter(|&k| k != i).map(|k| row[k]).collect();
        let lse = log_sum_exp(&others);
        value += lse - row[pos];
        for k in 0..m {
            if k == i {
                continue;
            }
            let mut c = (row[k] - lse).exp();
            if k == pos {
                c -= 1.0;
            }
            coeff.set(i, k, c);
        }
    }
    value /= m as f64;

    // dZ = (C + Cᵀ)·Z / (τ·2N)
    let mut sym = coeff.clone();
    for i in 0..m {
        for k in 0..m {
            sym.set(i, k, coeff.get(i, k) + coeff.get(k, i));
        }
    }
    let mut dz = sym.matmul(&stacked);
    dz.scale(1.0 / (tau * m as f64));

    let mut g1 = Matrix::zeros(n, d);
    let mut g2 = Matrix::zeros(n, d);
    for i in 0..n {
        g1.row_mut(i).copy_from_slice(dz.row(i));
        g2.row_mut(i).copy_from_slice(dz.row(n + i));
    }
    Ok(LossReport {
        value,
        grads: vec![g1, g2],
    })
}

/// Supervised contrastive loss over one batch: for each anchor i, sum
/// −log softmax over the other samples at every positive j with y[i][j]
/// set; the denominator includes positives and excludes only the anchor.
/// Anchors without positives contribute 0. The total is the mean over
/// anchors; `mean_over_positives` divides each anchor's sum by its
/// positive count instead of taking the literal sum.
pub fn sup_con_loss(
    v: &EmbeddingBatch,
    y: &WeakLabelMatrix,
    tau: f64,
    mean_over_positives: bool,
) -> Result<LossReport, WclError> {
    check_tau(tau)?;
    let n = v.len();
    if n != y.n() {
        return Err(WclError::ShapeMismatch {
            expected: format!("{} rows", y.n()),
            got: format!("{} rows", n),
        });
    }
    let logits = {
        let mut s = v.mat().matmul_bt(v.mat());
        s.scale(1.0 / tau);
        s
    };

    let mut value = 0.0;
    let mut coeff = Matrix::zeros(n, n);
    for i in 0..n {
        let positives = y.positives(i);
        if positives.is_empty() {
            continue;
        }
        let p = positives.len() as f64;
        let row = logits.row(i);
        let others: Vec<f64> = (0..n).filter(|&k| k != i).map(|k| row[k]).collect();
        let lse = log_sum_exp(&others);
        let pos_sum: f64 = positives.iter().map(|&j| row[j]).sum();
        let weight = if mean_over_positives { 1.0 / p } else { 1.0 };
        value += weight * (p * lse - pos_sum);
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut c = p * (row[k] - lse).exp();
            if y.get(i, k) {
                c -= 1.0;
            }
            coeff.set(i, k, weight * c);
        }
    }
    value /= n as f64;

    let mut sym = coeff.clone();
    for i in 0..n {
        for k in 0..n {
            sym.set(i, k, coeff.get(i, k) + coeff.get(k, i));
        }
    }
    let mut grad = sym.matmul(v.mat());
    grad.scale(1.0 / (tau * n as f64));

    Ok(LossReport {
        value,
        grads: vec![grad],
    })
}

/// Swapped supervision: view-1 embeddings scored against view-2 labels and
/// vice versa. Value is the sum of the two constituent losses; grads are
/// [dv1, dv2].
pub fn swap_loss(
    v1: &EmbeddingBatch,
    v2: &EmbeddingBatch,
    y1: &WeakLabelMatrix,
    y2: &WeakLabelMatrix,
    tau: f64,
    mean_over_positives: bool,
) -> Result<LossReport, WclError> {
    let a = sup_con_loss(v1, y2, tau, mean_over_positives)?;
    let b = sup_con_loss(v2, y1, tau, mean_over_positives)?;
    Ok(LossReport {
        value: a.value + b.value,
        grads: vec![
            a.grads.into_iter().next().unwrap(),
            b.grads.into_iter().next().unwrap(),
        ],
    })
}

/// Combined objective: L_NCE + λ·L_cNCE + β·L_swap + γ·L_cswap, with
/// absent crop terms treated as 0.
pub fn overall_loss(parts: &LossParts, w: &LossWeights) -> f64 {
    parts.nce
        + w.lambda_c * parts.cnce.unwrap_or(0.0)
        + w.beta * parts.swap
        + w.gamma_c * parts.cswap.unwrap_or(0.0)
}

/// NT-Xent term for crop views: each crop embedding is an anchor whose
/// positive is its source sample's embedding in `bank`; the denominator
/// runs over the whole bank. Crops never enter other anchors' denominators.
/// Grads are [d_crops, d_bank].
pub fn crop_nce_loss(
    crops: &EmbeddingBatch,
    bank: &EmbeddingBatch,
    sources: &[usize],
    tau: f64,
) -> Result<LossReport, WclError> {
    let positives: Vec<Vec<usize>> = sources.iter().map(|&s| vec![s]).collect();
    crop_contrastive(crops, bank, &positives, tau, false)
}

/// Supervised contrastive term for crop views with propagated labels: crop
/// m of batch anchor a takes positive set {j : y[a][j]} ∪ {a} against the
/// bank. Grads are [d_crops, d_bank].
pub fn crop_sup_loss(
    crops: &EmbeddingBatch,
    bank: &EmbeddingBatch,
    anchors: &[usize],
    y: &WeakLabelMatrix,
    tau: f64,
    mean_over_positives: bool,
) -> Result<LossReport, WclError> {
    if y.n() != bank.len() {
        return Err(WclError::ShapeMismatch {
            expected: format!("{} label rows", bank.len()),
            got: format!("{}", y.n()),
        });
    }
    let positives: Vec<Vec<usize>> = anchors
        .iter()
        .map(|&a| {
            let mut p = y.positives(a);
            p.push(a);
            p.sort_unstable();
            p
        })
        .collect();
    crop_contrastive(crops, bank, &positives, tau, mean_over_positives)
}

/// Shared crop kernel: anchors outside the bank, full-bank denominator,
/// arbitrary per-anchor positive sets.
fn crop_contrastive(
    crops: &EmbeddingBatch,
    bank: &EmbeddingBatch,
    positives: &[Vec<usize>],
    tau: f64,
    mean_over_positives: bool,
) -> Result<LossReport, WclError> {
    check_tau(tau)?;
    if crops.dim() != bank.dim() {
        return Err(WclError::DimensionMismatch {
            left: format!("{} cols", crops.dim()),
            right: format!("{} cols", bank.dim()),
        });
    }
    let m = crops.len();
    if positives.len() != m {
        return Err(WclError::ShapeMismatch {
            expected: format!("{} positive sets", m),
            got: format!("{}", positives.len()),
        });
    }
    let n = bank.len();
    let logits = {
        let mut s = crops.mat().matmul_bt(bank.mat());
        s.scale(1.0 / tau);
        s
    };

    let mut value = 0.0;
    let mut coeff = Matrix::zeros(m, n);
    for (i, pos) in positives.iter().enumerate() {
        debug_assert!(!pos.is_empty() && pos.iter().all(|&j| j < n));
        let p = pos.len() as f64;
        let row = logits.row(i);
        let lse = log_sum_exp(row);
        let pos_sum: f64 = pos.iter().map(|&j| row[j]).sum();
        let weight = if mean_over_positives { 1.0 / p } else { 1.0 };
        value += weight * (p * lse - pos_sum);
        for k in 0..n {
            let mut c = p * (row[k] - lse).exp();
            if pos.binary_search(&k).is_ok() {
                c -= 1.0;
            }
            coeff.set(i, k, weight * c);
        }
    }
    value /= m as f64;

    let scale = 1.0 / (tau * m as f64);
    let mut d_crops = coeff.matmul(bank.mat());
    d_crops.scale(scale);
    let mut d_bank = coeff.matmul_at_b(crops.mat());
    d_bank.scale(scale);

    Ok(LossReport {
        value,
        grads: vec![d_crops, d_bank],
    })
}
