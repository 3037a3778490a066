//! Dictionaries of local linear reduced-order bases.
//!
//! A snapshot set sampled from a solution manifold is partitioned with
//! k-medoids (PAM) under the squared sine dissimilarity, then each cluster
//! receives an orthonormal basis from snapshot-POD of its normalized
//! snapshots. The quality measure is the empirical normalized Kolmogorov
//! width: the mean squared relative projection error of the snapshots onto
//! their cluster's basis, weighted by cluster probability.
//!
//! ```
//! use romdict::{build_dictionary, evaluate, DictionaryConfig, InnerProduct, SnapshotSet};
//!
//! let snapshots = SnapshotSet::from_rows(&[
//!     vec![1.0, 0.0, 0.0],
//!     vec![5.0, 0.0, 0.0],
//!     vec![0.0, 0.2, 0.0],
//!     vec![0.0, -3.0, 0.0],
//! ])
//! .unwrap();
//! let ip = InnerProduct::Identity;
//! let config = DictionaryConfig { k: 2, n: 1, ..Default::default() };
//! let dict = build_dictionary(&snapshots, &ip, &config).unwrap();
//! let report = evaluate(&snapshots, &ip, &dict, &[]).unwrap();
//! assert!(report.total_cost < 1e-20);
//! ```

pub mod cli;
pub mod clustering;
pub mod dictionary;
pub mod dissimilarity;
mod error;
pub mod io;
pub mod manifold;
pub mod pod;
pub mod snapshot;

pub use clustering::{brute_force_kmedoids, kmeans_baseline, pam, ClusteringOutcome, Partition};
pub use dictionary::{
    brute_force_optimal_partition, build_dictionary, evaluate, Baseline, DictionaryConfig,
    DictionaryReport, RomDictionary,
};
pub use dissimilarity::{
    dissim_matrix, property1_residual, rel_proj_error, sine_dissim, DissimilarityMatrix,
};
pub use error::{Result, RomError};
pub use manifold::{generate, ManifoldKind, ManifoldSpec};
pub use pod::{empirical_width_sq, snapshot_pod, LocalBasis};
pub use snapshot::{gram, InnerProduct, SnapshotSet};
