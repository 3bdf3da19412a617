//! Compressed-domain distance bounds and mining.
//!
//! Sequences are transformed into an orthonormal basis (unitary DFT or Haar
//! DWT) and compressed per object by keeping a few high-energy coefficients
//! plus one scalar, the energy of everything discarded. Between two such
//! objects the Euclidean distance is no longer computable, but it can be
//! bracketed: this crate computes the provably tightest lower and upper
//! bounds via waterfilling allocations and an exact fixed-point energy split,
//! and builds the usual distance-based mining on top — k-NN with interval
//! proxies, bounds-based k-Means, and a VP-tree index with interval-safe
//! pruning — next to random-projection and PCA baselines under equal storage
//! budgets.
//!
//! Entry points:
//!
//! * [`transform`] — forward/inverse DFT and Haar transforms.
//! * [`compress`] — per-object representations and the binary database
//!   format.
//! * [`mod@waterfill`] / [`bounds`] — the distance-bound machinery.
//! * [`oracle`] — independent solvers and a KKT certifier for verification.
//! * [`baselines`] — GRP/BRP/ARP random projections and PCA.
//! * [`mining`] — k-NN, recall, k-Means and cluster agreement.
//! * [`vptree`] — the metric index.
//! * [`datagen`] / [`csvio`] — synthetic data, signatures, CSV plumbing.

// Negated comparisons like `!(x >= 0.0)` are the NaN-rejecting input checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bounds;
pub mod compress;
pub mod csvio;
pub mod datagen;
pub mod error;
pub mod mining;
pub mod oracle;
pub mod transform;
pub mod vptree;
pub mod waterfill;

pub use bounds::{
    bounds_vs_uncompressed, build_partition, distance_bounds, double_waterfill, BoundPair, Branch,
    DoubleWaterfillResult, Partition, SlotProblem,
};
pub use compress::{compress_first, compress_top, storage_budget, CompressedSeq, Method};
pub use error::{Error, Result};
pub use mining::{knn_projected, knn_search, recall_at_k, KnnResult, Proxy};
pub use transform::{dft_forward, dft_inverse, haar_forward, haar_inverse, Basis, Sequence, Spectrum};
pub use waterfill::{waterfill, WaterfillResult};
