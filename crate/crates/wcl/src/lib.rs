//! Weakly supervised contrastive learning engine.
//!
//! The pipeline: embed a batch with a two-head MLP encoder, build the 1-NN
//! graph of the auxiliary embeddings, label its connected components with
//! union-find, and use the resulting per-batch weak labels as swapped
//! supervision alongside the regular instance-discrimination objective.
//! A KNN-based multi-crop schedule expands the positive sets after a
//! warm-up phase.
//!
//! Heavy kernels (similarity matrices, KNN search, batch forward passes)
//! run on rayon when the `parallel` feature is enabled (default) and fall
//! back to sequential loops otherwise. Both paths produce bit-identical
//! results; per-row work is independent and reduction order is fixed.

pub mod config;
pub mod encoder;
pub mod error;
pub mod losses;
pub mod matkernel;
pub mod multicrop;
pub mod synthdata;
pub mod trainer;
pub mod weakgraph;

pub use error::WclError;

/// Derives an independent RNG seed from the run seed and a consumer label.
///
/// Every randomness consumer gets its own stream keyed by a stable label,
/// so adding a consumer never perturbs the draws of existing ones.
pub fn stream_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, folded with the run seed, then splitmix64.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut x = h ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}
