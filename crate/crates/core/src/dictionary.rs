//! Dictionaries of local reduced-order bases.
//!
//! Construction is two-step: partition the snapshots with PAM on squared
//! sine dissimilarities (the optimal partition for one-dimensional local
//! bases restricted to snapshot directions), then fit a normalized
//! snapshot-POD basis of dimension `n` on each cluster. The cost of a
//! dictionary is
//!
//! ```text
//! sum_k (|cluster_k| / m) * mean_{i in cluster_k} rel_proj_error(u_i, basis_k)^2
//! ```
//!
//! i.e. the probability-weighted sum of the clusters' empirical squared
//! normalized widths.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans_baseline, pam, Partition};
use crate::dissimilarity::dissim_matrix;
use crate::error::{Result, RomError};
use crate::pod::{empirical_width_sq, snapshot_pod, LocalBasis};
use crate::snapshot::{InnerProduct, SnapshotSet};

/// Largest snapshot count accepted by [`brute_force_optimal_partition`].
pub const PARTITION_ORACLE_MAX_M: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryConfig {
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    /// Fit local bases on norm-normalized snapshots.
    pub normalized: bool,
    /// When set, each cluster keeps the fewest modes (at most `n`) whose
    /// energy fraction reaches this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_tolerance: Option<f64>,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        DictionaryConfig {
            k: 2,
            n: 1,
            seed: 0,
            restarts: 10,
            max_iter: 100,
            normalized: true,
            energy_tolerance: None,
        }
    }
}

impl DictionaryConfig {
    fn validate(&self, m: usize) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.restarts == 0 {
            return Err(RomError::InvalidParameter(format!(
                "k, n and restarts must be positive (k = {}, n = {}, restarts = {})",
                self.k, self.n, self.restarts
            )));
        }
        if self.k > m {
            return Err(RomError::InvalidParameter(format!(
                "k = {} exceeds the number of snapshots m = {m}",
                self.k
            )));
        }
        if let Some(tol) = self.energy_tolerance {
            if !(tol > 0.0 && tol <= 1.0) {
                return Err(RomError::InvalidParameter(format!(
                    "energy tolerance must be in (0, 1], got {tol}"
                )));
            }
        }
        Ok(())
    }
}

/// A partition plus one local basis per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct RomDictionary {
    pub partition: Partition,
    pub bases: Vec<LocalBasis>,
    pub config: DictionaryConfig,
}

fn local_basis(
    s: &SnapshotSet,
    ip: &InnerProduct,
    members: &[usize],
    config: &DictionaryConfig,
) -> Result<LocalBasis> {
    let basis = snapshot_pod(s, members, ip, config.n, config.normalized)?;
    let Some(tol) = config.energy_tolerance else {
        return Ok(basis);
    };
    let total: f64 = if config.normalized {
        members.len() as f64
    } else {
        members.iter().map(|&i| ip.norm_sq(s.row(i))).sum()
    };
    let mut acc = 0.0;
    for (j, e) in basis.energy().iter().enumerate() {
        acc += e;
        if acc >= tol * total {
            return Ok(basis.truncated(j + 1));
        }
    }
    Ok(basis)
}

/// Fits local bases on a given partition.
pub fn dictionary_from_partition(
    s: &SnapshotSet,
    ip: &InnerProduct,
    partition: Partition,
    config: &DictionaryConfig,
) -> Result<RomDictionary> {
    if partition.m() != s.m() {
        return Err(RomError::DimensionMismatch {
            expected: s.m(),
            got: partition.m(),
        });
    }
    let bases = partition
        .clusters()
        .par_iter()
        .map(|members| local_basis(s, ip, members, config))
        .collect::<Result<Vec<_>>>()?;
    let mut config = config.clone();
    config.k = partition.k();
    Ok(RomDictionary {
        partition,
        bases,
        config,
    })
}

/// PAM partition on squared sine dissimilarities followed by local POD.
pub fn build_dictionary(
    s: &SnapshotSet,
    ip: &InnerProduct,
    config: &DictionaryConfig,
) -> Result<RomDictionary> {
    config.validate(s.m())?;
    let d = dissim_matrix(s, ip, true)?;
    let outcome = pam(&d, config.k, config.seed, config.restarts, config.max_iter)?;
    dictionary_from_partition(s, ip, outcome.partition, config)
}

/// Per-cluster empirical widths `(size, width_sq)` of a dictionary.
fn cluster_widths(s: &SnapshotSet, ip: &InnerProduct, dict: &RomDictionary) -> Result<Vec<(usize, f64)>> {
    dict.partition
        .clusters()
        .par_iter()
        .zip(dict.bases.par_iter())
        .map(|(members, basis)| Ok((members.len(), empirical_width_sq(s, members, basis, ip)?)))
        .collect()
}

fn weighted_cost(widths: &[(usize, f64)], m: usize) -> f64 {
    widths
        .iter()
        .map(|&(size, w)| size as f64 / m as f64 * w)
        .sum()
}

/// Probability-weighted sum of per-cluster empirical squared widths.
pub fn dictionary_cost(s: &SnapshotSet, ip: &InnerProduct, dict: &RomDictionary) -> Result<f64> {
    Ok(weighted_cost(&cluster_widths(s, ip, dict)?, s.m()))
}

/// Cost of the dictionary obtained by fitting local bases on `partition`.
pub fn partition_cost(
    s: &SnapshotSet,
    ip: &InnerProduct,
    partition: &Partition,
    config: &DictionaryConfig,
) -> Result<f64> {
    let dict = dictionary_from_partition(s, ip, partition.clone(), config)?;
    dictionary_cost(s, ip, &dict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Baseline {
    /// One global basis (K = 1).
    GlobalPod,
    /// k-means partition in the Hilbert norm with local POD.
    KmeansDict,
    /// Uniformly random non-empty partition with local POD.
    RandomDict,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::GlobalPod, Baseline::KmeansDict, Baseline::RandomDict];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::GlobalPod => "global_pod",
            Baseline::KmeansDict => "kmeans_dict",
            Baseline::RandomDict => "random_dict",
        }
    }

    /// Comma-separated baseline names; empty input gives no baselines.
    pub fn parse_list(text: &str) -> Result<Vec<Baseline>> {
        let mut out: Vec<Baseline> = text
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = RomError;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                RomError::InvalidParameter(format!(
                    "unknown baseline {s:?} (expected global_pod, kmeans_dict or random_dict)"
                ))
            })
    }
}

/// Seeded uniform labels, redrawn until every cluster is non-empty.
fn random_partition(m: usize, k: usize, seed: u64) -> Result<Partition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..k)).collect();
        let mut seen = vec![false; k];
        labels.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&x| x) {
            return Ok(Partition::new(labels, k, None)?.canonical());
        }
    }
}

/// Builds the baseline dictionary with the same `n`, seed and restarts.
pub fn baseline_dictionary(
    s: &SnapshotSet,
    ip: &InnerProduct,
    baseline: Baseline,
    config: &DictionaryConfig,
) -> Result<RomDictionary> {
    config.validate(s.m())?;
    let partition = match baseline {
        Baseline::GlobalPod => Partition::new(vec![0; s.m()], 1, None)?,
        Baseline::KmeansDict => {
            kmeans_baseline(s, ip, config.k, config.seed, config.restarts, config.max_iter)?.partition
        }
        Baseline::RandomDict => random_partition(s.m(), config.k, config.seed)?,
    };
    let config = DictionaryConfig {
        normalized: true,
        ..config.clone()
    };
    dictionary_from_partition(s, ip, partition, &config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub id: usize,
    pub size: usize,
    pub probability: f64,
    pub width_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryReport {
    pub config: DictionaryConfig,
    pub per_cluster: Vec<ClusterReport>,
    pub total_cost: f64,
    pub baselines: BTreeMap<String, f64>,
}

impl DictionaryReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Per-cluster widths and weighted cost of `dict`, plus the cost of each
/// requested baseline.
pub fn evaluate(
    s: &SnapshotSet,
    ip: &InnerProduct,
    dict: &RomDictionary,
    baselines: &[Baseline],
) -> Result<DictionaryReport> {
    if dict.partition.m() != s.m() || dict.bases.len() != dict.partition.k() {
        return Err(RomError::InvalidPartition(
            "dictionary was not built from this snapshot set".into(),
        ));
    }
    let widths = cluster_widths(s, ip, dict)?;
    let m = s.m();
    let per_cluster = widths
        .iter()
        .enumerate()
        .map(|(id, &(size, width_sq))| ClusterReport {
            id,
            size,
            probability: size as f64 / m as f64,
            width_sq,
        })
        .collect();
    let total_cost = weighted_cost(&widths, m);
    let mut costs = BTreeMap::new();
    for &b in baselines {
        let bd = baseline_dictionary(s, ip, b, &dict.config)?;
        costs.insert(b.name().to_string(), dictionary_cost(s, ip, &bd)?);
    }
    Ok(DictionaryReport {
        config: dict.config.clone(),
        per_cluster,
        total_cost,
        baselines: costs,
    })
}

/// All labelings of `m` items into exactly `k` non-empty blocks, as
/// restricted growth strings (each partition once, canonical labels).
pub fn set_partitions(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(labels: &mut Vec<usize>, used: usize, m: usize, k: usize, out: &mut Vec<Vec<usize>>) {
        let i = labels.len();
        if i == m {
            if used == k {
                out.push(labels.clone());
            }
            return;
        }
        // not enough items left to open the remaining blocks
        if k - used > m - i {
            return;
        }
        for l in 0..used.min(k) {
            labels.push(l);
            rec(labels, used, m, k, out);
            labels.pop();
        }
        if used < k {
            labels.push(used);
            rec(labels, used + 1, m, k, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    if k >= 1 && k <= m {
        rec(&mut Vec::with_capacity(m), 0, m, k, &mut out);
    }
    out
}

/// Exact minimizer of the dictionary cost over all partitions of the
/// snapshots into `k` non-empty clusters, each fitted with normalized POD of
/// dimension `min(n, rank)`. Ties keep the first partition in enumeration
/// order.
pub fn brute_force_optimal_partition(
    s: &SnapshotSet,
    ip: &InnerProduct,
    k: usize,
    n: usize,
) -> Result<(Partition, f64)> {
    if s.m() > PARTITION_ORACLE_MAX_M {
        return Err(RomError::TooLarge(format!(
            "exhaustive partition search is limited to m <= {PARTITION_ORACLE_MAX_M} (m = {})",
            s.m()
        )));
    }
    let config = DictionaryConfig {
        k,
        n,
        ..Default::default()
    };
    config.validate(s.m())?;
    let candidates = set_partitions(s.m(), k);
    let costs: Vec<f64> = candidates
        .par_iter()
        .map(|labels| partition_cost(s, ip, &Partition::new(labels.clone(), k, None)?, &config))
        .collect::<Result<_>>()?;
    let (best, cost) = costs
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, &c)| if c < a.1 { (i, c) } else { a });
    Ok((Partition::new(candidates[best].clone(), k, None)?, cost))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub n: usize,
    pub total_cost: f64,
    pub baselines: BTreeMap<String, f64>,
}

/// Dictionary cost over a grid of `(k, n)`. The PAM and k-means partitions
/// depend only on `k` and are computed once per value.
pub fn sweep(
    s: &SnapshotSet,
    ip: &InnerProduct,
    ks: &[usize],
    ns: &[usize],
    base: &DictionaryConfig,
    baselines: &[Baseline],
) -> Result<Vec<SweepRow>> {
    if ks.is_empty() || ns.is_empty() {
        return Err(RomError::InvalidParameter("sweep ranges must be non-empty".into()));
    }
    let d = dissim_matrix(s, ip, true)?;
    let mut rows = Vec::with_capacity(ks.len() * ns.len());
    for &k in ks {
        let kconf = DictionaryConfig { k, ..base.clone() };
        kconf.validate(s.m())?;
        let pam_partition = pam(&d, k, base.seed, base.restarts, base.max_iter)?.partition;
        let mut baseline_partitions = Vec::new();
        for &b in baselines {
            let p = baseline_dictionary(s, ip, b, &kconf)?.partition;
            baseline_partitions.push((b, p));
        }
        for &n in ns {
            let conf = DictionaryConfig { k, n, ..base.clone() };
            conf.validate(s.m())?;
            let total_cost = partition_cost(s, ip, &pam_partition, &conf)?;
            let normalized = DictionaryConfig {
                normalized: true,
                ..conf.clone()
            };
            let mut costs = BTreeMap::new();
            for (b, p) in &baseline_partitions {
                costs.insert(b.name().to_string(), partition_cost(s, ip, p, &normalized)?);
            }
            rows.push(SweepRow {
                k,
                n,
                total_cost,
                baselines: costs,
            });
        }
    }
    Ok(rows)
}

/// CSV with header `k,n,total_cost,<baseline names>`.
pub fn sweep_csv(rows: &[SweepRow], baselines: &[Baseline]) -> String {
    let mut out = String::from("k,n,total_cost");
    for b in baselines {
        out.push(',');
        out.push_str(b.name());
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{},{},{}", row.k, row.n, row.total_cost));
        for b in baselines {
            out.push_str(&format!(",{}", row.baselines[b.name()]));
        }
        out.push('\n');
    }
    out
}
