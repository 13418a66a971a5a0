//! Feature store, end-of-epoch exact KNN table, and the warm-up-gated
//! crop-source scheduler.
//!
//! The store keeps the last-seen backbone features per sample across an
//! epoch; the table built from it at epoch end drives crop selection for
//! the whole next epoch. Stale entries are accepted by design.

use crate::error::WclError;
use crate::matkernel::{dot, l2_norm, Matrix, NORM_EPS};

/// Last-seen backbone features per dataset sample.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    features: Matrix,
    seen: Vec<bool>,
}

impl FeatureStore {
    pub fn new(capacity: usize, dim: usize) -> Self {
        FeatureStore {
            features: Matrix::zeros(capacity, dim),
            seen: vec![false; capacity],
        }
    }

    pub fn capacity(&self) -> usize {
        self.seen.len()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn all_seen(&self) -> bool {
        self.seen.iter().all(|&s| s)
    }

    /// Overwrites the rows at `indices` with the rows of `h` and marks
    /// them seen.
    pub fn record_features(&mut self, indices: &[usize], h: &Matrix) -> Result<(), WclError> {
        if h.rows() != indices.len() || h.cols() != self.features.cols() {
            return Err(WclError::ShapeMismatch {
                expected: format!("{}x{}", indices.len(), self.features.cols()),
                got: format!("{}x{}", h.rows(), h.cols()),
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.capacity()) {
            return Err(WclError::IndexOutOfRange {
                index: bad,
                capacity: self.capacity(),
            });
        }
        for (k, &i) in indices.iter().enumerate() {
            self.features.row_mut(i).copy_from_slice(h.row(k));
            self.seen[i] = true;
        }
        Ok(())
    }

    pub fn row(&self, i: usize) -> Option<&[f64]> {
        self.seen[i].then(|| self.features.row(i))
    }
}

/// Per-sample nearest neighbors, sorted by descending cosine similarity
/// with ties broken by lowest index. Never contains the sample itself.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnTable {
    k: usize,
    neighbors: Vec<usize>, // row-major, samples × k
}

impl KnnTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn samples(&self) -> usize {
        if self.k == 0 {
            self.neighbors.len()
        } else {
            self.neighbors.len() / self.k
        }
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }

    /// Indices widened to f64 for WCLE serialization.
    pub fn to_matrix(&self) -> Matrix {
        let n = if self.k == 0 {
            0
        } else {
            self.neighbors.len() / self.k
        };
        Matrix::from_vec(
            n,
            self.k,
            self.neighbors.iter().map(|&i| i as f64).collect(),
        )
        .unwrap()
    }
}

fn knn_row(features: &Matrix, norms: &[f64], i: usize, k: usize) -> Vec<usize> {
    let n = features.rows();
    let mut scored: Vec<(f64, usize)> = (0..n)
        .filter(|&j| j != i)
        .map(|j| {
            let s = dot(features.row(i), features.row(j)) / (norms[i] * norms[j]);
            (s, j)
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Exact cosine-similarity KNN over the complete store.
pub fn compute_knn_table(store: &FeatureStore, k: usize) -> Result<KnnTable, WclError> {
    knn_impl(store, k, true)
}

/// Sequential variant of [`compute_knn_table`], kept for benchmarking.
pub fn compute_knn_table_seq(store: &FeatureStore, k: usize) -> Result<KnnTable, WclError> {
    knn_impl(store, k, false)
}

fn knn_impl(store: &FeatureStore, k: usize, parallel: bool) -> Result<KnnTable, WclError> {
    if let Some(missing) = store.seen.iter().position(|&s| !s) {
        return Err(WclError::IncompleteStore { missing });
    }
    let n = store.capacity();
    if k >= n {
        return Err(WclError::KTooLarge { k, size: n });
    }
    let norms: Vec<f64> = (0..n)
        .map(|i| l2_norm(store.features.row(i)).max(NORM_EPS))
        .collect();
    if k == 0 {
        return Ok(KnnTable {
            k: 0,
            neighbors: vec![],
        });
    }
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        let rows: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|i| knn_row(&store.features, &norms, i, k))
            .collect();
        return Ok(KnnTable {
            k,
            neighbors: rows.into_iter().flatten().collect(),
        });
    }
    let _ = parallel;
    let mut flat = Vec::with_capacity(n * k);
    for i in 0..n {
        flat.extend(knn_row(&store.features, &norms, i, k));
    }
    Ok(KnnTable { k, neighbors: flat })
}

/// Picks the source sample for each crop of each anchor. During warm-up
/// every crop is an extra view of the anchor itself; afterwards crops come
/// from the anchor's nearest neighbors, cycling through the table row when
/// more crops than neighbors are requested.
pub fn select_crop_sources(
    epoch: usize,
    warmup_epochs: usize,
    knn: Option<&KnnTable>,
    anchors: &[usize],
    crops_per_anchor: usize,
) -> Result<Vec<Vec<usize>>, WclError> {
    if epoch < warmup_epochs {
        return Ok(anchors.iter().map(|&a| vec![a; crops_per_anchor]).collect());
    }
    let table = knn.ok_or(WclError::MissingKnnTable {
        epoch,
        warmup: warmup_epochs,
    })?;
    if crops_per_anchor > 0 && table.k() == 0 {
        return Err(WclError::KTooLarge {
            k: 0,
            size: table.samples(),
        });
    }
    Ok(anchors
        .iter()
        .map(|&a| {
            let row = table.row(a);
            (0..crops_per_anchor).map(|c| row[c % row.len()]).collect()
        })
        .collect())
}
