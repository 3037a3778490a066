//! Partitions of the snapshot set.
//!
//! [`pam`] is the BUILD + SWAP k-medoids heuristic run on squared sine
//! dissimilarities; its cost `sum_i D(u_i, medoid(u_i))` is exactly the
//! empirical dictionary cost for one-dimensional local bases restricted to
//! snapshot directions. [`brute_force_kmedoids`] enumerates every medoid set
//! for small instances. [`kmeans_baseline`] is Lloyd's algorithm in the
//! Hilbert norm, the intensity-sensitive partitioning used for comparison.

use std::collections::HashMap;
use std::path::Path;

use itertools::Itertools;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dissimilarity::DissimilarityMatrix;
use crate::error::{Result, RomError};
use crate::io::write_text;
use crate::snapshot::{InnerProduct, SnapshotSet};

/// Largest snapshot count accepted by [`brute_force_kmedoids`].
pub const KMEDOIDS_ORACLE_MAX_M: usize = 15;

/// SWAP only accepts exchanges that lower the cost by more than this.
const SWAP_TOL: f64 = 1e-14;

/// Assignment of each snapshot to one of `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
    medoids: Option<Vec<usize>>,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize, medoids: Option<Vec<usize>>) -> Result<Self> {
        if k == 0 {
            return Err(RomError::InvalidPartition("zero clusters".into()));
        }
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(RomError::InvalidPartition(format!(
                    "snapshot {i} has label {l} >= k = {k}"
                )));
            }
            counts[l] += 1;
        }
        if let Some(c) = counts.iter().position(|&c| c == 0) {
            return Err(RomError::InvalidPartition(format!("cluster {c} is empty")));
        }
        if let Some(meds) = &medoids {
            if meds.len() != k {
                return Err(RomError::InvalidPartition(format!(
                    "{} medoids for {k} clusters",
                    meds.len()
                )));
            }
            for (c, &med) in meds.iter().enumerate() {
                if labels.get(med) != Some(&c) {
                    return Err(RomError::InvalidPartition(format!(
                        "medoid {med} of cluster {c} is not labeled {c}"
                    )));
                }
            }
        }
        Ok(Partition { labels, k, medoids })
    }

    /// Partition from labels alone; `k` is one past the largest label.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |&l| l + 1);
        Self::new(labels, k, None)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn medoids(&self) -> Option<&[usize]> {
        self.medoids.as_deref()
    }

    /// Snapshot indices of each cluster, ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Relabels clusters in order of their smallest member index.
    pub fn canonical(&self) -> Partition {
        let mut map: HashMap<usize, usize> = HashMap::new();
        for &l in &self.labels {
            let next = map.len();
            map.entry(l).or_insert(next);
        }
        let labels = self.labels.iter().map(|l| map[l]).collect();
        let medoids = self.medoids.as_ref().map(|meds| {
            let mut out = vec![0; self.k];
            for (c, &med) in meds.iter().enumerate() {
                out[map[&c]] = med;
            }
            out
        });
        Partition {
            labels,
            k: self.k,
            medoids,
        }
    }

    /// Same grouping of snapshots, ignoring cluster ids and medoids.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        self.canonical().labels == other.canonical().labels
    }

    /// CSV with header `snapshot_index,cluster_id,is_medoid`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("snapshot_index,cluster_id,is_medoid\n");
        for (i, &l) in self.labels.iter().enumerate() {
            let is_medoid = self.medoids.as_ref().is_some_and(|m| m[l] == i);
            out.push_str(&format!("{i},{l},{}\n", u8::from(is_medoid)));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv_string())
    }

    pub fn read_csv(path: &Path) -> Result<Partition> {
        let text = std::fs::read_to_string(path).map_err(|e| RomError::io(path, e))?;
        let malformed = |reason: String| RomError::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut rows: Vec<(usize, usize, bool)> = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(malformed(format!("line {}: expected 3 columns", lineno + 1)));
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| malformed(format!("line {}: {e}", lineno + 1)))
            };
            rows.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])? == 1));
        }
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
            return Err(malformed("snapshot indices must be 0..m without gaps".into()));
        }
        let labels: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let k = labels.iter().max().map_or(0, |&l| l + 1);
        let medoid_rows: Vec<&(usize, usize, bool)> = rows.iter().filter(|r| r.2).collect();
        let medoids = if medoid_rows.is_empty() {
            None
        } else {
            let mut meds = vec![usize::MAX; k];
            for r in medoid_rows {
                meds[r.1] = r.0;
            }
            Some(meds)
        };
        Partition::new(labels, k, medoids)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringOutcome {
    pub partition: Partition,
    /// k-medoids: sum of (squared) dissimilarities to the assigned medoid.
    /// k-means: sum of squared Hilbert distances to the assigned centroid.
    pub cost: f64,
    pub restarts_used: usize,
    pub converged: bool,
}

/// Sum over snapshots of the dissimilarity to their cluster's medoid.
pub fn kmedoids_cost(d: &DissimilarityMatrix, p: &Partition) -> Result<f64> {
    let meds = p
        .medoids()
        .ok_or_else(|| RomError::InvalidPartition("partition has no medoids".into()))?;
    if p.m() != d.m() {
        return Err(RomError::DimensionMismatch {
            expected: d.m(),
            got: p.m(),
        });
    }
    Ok(p.labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| d.get(i, meds[l]))
        .sum())
}

/// Labels for a medoid set: nearest medoid, ties to the lowest slot, and
/// each medoid in its own slot. Returns the canonical partition and cost.
fn assign_to_medoids(d: &DissimilarityMatrix, medoids: &[usize]) -> (Partition, f64) {
    let m = d.m();
    let mut labels = vec![0usize; m];
    let mut cost = 0.0;
    for (j, label) in labels.iter_mut().enumerate() {
        if let Some(slot) = medoids.iter().position(|&med| med == j) {
            *label = slot;
            continue;
        }
        let row = d.row(j);
        let mut best = 0;
        for (slot, &med) in medoids.iter().enumerate().skip(1) {
            if row[med] < row[medoids[best]] {
                best = slot;
            }
        }
        *label = best;
        cost += row[medoids[best]];
    }
    let p = Partition {
        labels,
        k: medoids.len(),
        medoids: Some(medoids.to_vec()),
    };
    (p.canonical(), cost)
}

fn check_kmedoids_input(d: &DissimilarityMatrix, k: usize) -> Result<()> {
    if !d.is_squared() {
        return Err(RomError::InvalidDissimilarity(
            "k-medoids expects squared sine dissimilarities".into(),
        ));
    }
    d.validate()?;
    if k == 0 || k > d.m() {
        return Err(RomError::InvalidParameter(format!(
            "cluster count k = {k} must be in [1, m = {}]",
            d.m()
        )));
    }
    Ok(())
}

/// Greedy BUILD: the first medoid minimizes the total cost, each next one
/// maximizes the cost reduction. Ties go to the lowest index.
fn build(d: &DissimilarityMatrix, k: usize) -> Vec<usize> {
    let m = d.m();
    let first = (0..m)
        .map(|i| (i, d.row(i).iter().sum::<f64>()))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
        .0;
    let mut medoids = vec![first];
    let mut nearest: Vec<f64> = d.row(first).to_vec();
    while medoids.len() < k {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for i in 0..m {
            if medoids.contains(&i) {
                continue;
            }
            let row = d.row(i);
            let gain: f64 = nearest
                .iter()
                .zip(row)
                .map(|(&n, &x)| (n - x).max(0.0))
                .sum();
            if gain > best.1 {
                best = (i, gain);
            }
        }
        medoids.push(best.0);
        for (n, &x) in nearest.iter_mut().zip(d.row(best.0)) {
            *n = n.min(x);
        }
    }
    medoids
}

/// SWAP passes until no exchange improves the cost by more than
/// `SWAP_TOL` or `max_iter` passes are spent. Returns whether it converged.
fn swap(d: &DissimilarityMatrix, medoids: &mut [usize], max_iter: usize) -> bool {
    let m = d.m();
    let k = medoids.len();
    for _ in 0..max_iter {
        // nearest slot, nearest and second-nearest dissimilarity per point
        let cache: Vec<(usize, f64, f64)> = (0..m)
            .map(|j| {
                let row = d.row(j);
                let mut near = (0, row[medoids[0]]);
                let mut second = f64::INFINITY;
                for (slot, &med) in medoids.iter().enumerate().skip(1) {
                    let x = row[med];
                    if x < near.1 {
                        second = near.1;
                        near = (slot, x);
                    } else if x < second {
                        second = x;
                    }
                }
                (near.0, near.1, second)
            })
            .collect();
        let candidates: Vec<(f64, usize, usize)> = (0..m)
            .into_par_iter()
            .filter(|h| !medoids.contains(h))
            .map(|h| {
                let col = d.row(h);
                let mut best = (f64::INFINITY, 0usize, h);
                for slot in 0..k {
                    let mut delta = 0.0;
                    for (j, &(near_slot, near, second)) in cache.iter().enumerate() {
                        let replaced = if near_slot == slot { second } else { near };
                        delta += col[j].min(replaced) - near;
                    }
                    if delta < best.0 {
                        best = (delta, slot, h);
                    }
                }
                best
            })
            .collect();
        let best = candidates
            .into_iter()
            .fold((f64::INFINITY, 0, 0), |a, c| if c.0 < a.0 { c } else { a });
        if best.0 < -SWAP_TOL {
            medoids[best.1] = best.2;
        } else {
            return true;
        }
    }
    false
}

/// Partitioning Around Medoids on a squared dissimilarity matrix.
///
/// Run 0 starts from BUILD; runs `1..restarts` start from distinct medoids
/// drawn from a ChaCha8 stream seeded by `seed`. The lowest-cost run wins
/// (first run on ties). The result does not depend on the thread count.
pub fn pam(
    d: &DissimilarityMatrix,
    k: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
) -> Result<ClusteringOutcome> {
    check_kmedoids_input(d, k)?;
    let restarts = restarts.max(1);
    let runs: Vec<(f64, Partition, bool)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut medoids = if r == 0 {
                build(d, k)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                sample(&mut rng, d.m(), k).into_vec()
            };
            let converged = swap(d, &mut medoids, max_iter);
            let (partition, cost) = assign_to_medoids(d, &medoids);
            (cost, partition, converged)
        })
        .collect();
    let (cost, partition, converged) = runs
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("at least one run");
    Ok(ClusteringOutcome {
        partition,
        cost,
        restarts_used: restarts,
        converged,
    })
}

/// Exact k-medoids optimum by enumerating all `C(m, k)` medoid sets.
/// The first minimal set in lexicographic order is returned.
pub fn brute_force_kmedoids(d: &DissimilarityMatrix, k: usize) -> Result<ClusteringOutcome> {
    if d.m() > KMEDOIDS_ORACLE_MAX_M {
        return Err(RomError::TooLarge(format!(
            "brute-force k-medoids enumerates C(m, k) medoid sets and is limited to m <= {KMEDOIDS_ORACLE_MAX_M} (m = {}); use pam",
            d.m()
        )));
    }
    check_kmedoids_input(d, k)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for meds in (0..d.m()).combinations(k) {
        let cost: f64 = (0..d.m())
            .map(|j| meds.iter().map(|&med| d.get(j, med)).fold(f64::INFINITY, f64::min))
            .sum();
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, meds));
        }
    }
    let (_, meds) = best.expect("k <= m gives at least one medoid set");
    let (partition, cost) = assign_to_medoids(d, &meds);
    Ok(ClusteringOutcome {
        partition,
        cost,
        restarts_used: 1,
        converged: true,
    })
}

fn sq_dist(u: &[f64], c: &[f64], ip: &InnerProduct) -> f64 {
    let diff: Vec<f64> = u.iter().zip(c).map(|(a, b)| a - b).collect();
    ip.norm_sq(&diff)
}

fn nearest_centroid(u: &[f64], centroids: &[Vec<f64>], ip: &InnerProduct) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let dist = sq_dist(u, centroid, ip);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn centroids_of(s: &SnapshotSet, labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; s.n_h()]; k];
    let mut counts = vec![0usize; k];
    for (row, &l) in s.rows().zip(labels) {
        counts[l] += 1;
        sums[l].iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count > 0 {
            sum.iter_mut().for_each(|x| *x /= count as f64);
        }
    }
    sums
}

/// k-means++ seeding in the Hilbert norm.
fn kmeans_pp(s: &SnapshotSet, ip: &InnerProduct, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let m = s.m();
    let mut chosen = vec![rng.random_range(0..m)];
    let mut dist: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| sq_dist(s.row(i), s.row(chosen[0]), ip))
        .collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &x) in dist.iter().enumerate() {
                acc += x;
                if acc > target && x > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| dist.iter().rposition(|&x| x > 0.0).unwrap())
        } else {
            let free: Vec<usize> = (0..m).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        let newest = s.row(next);
        let update: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|i| sq_dist(s.row(i), newest, ip))
            .collect();
        dist.iter_mut().zip(update).for_each(|(a, b)| *a = a.min(b));
    }
    chosen.into_iter().map(|i| s.row(i).to_vec()).collect()
}

struct LloydRun {
    labels: Vec<usize>,
    cost: f64,
    converged: bool,
}

fn lloyd(s: &SnapshotSet, ip: &InnerProduct, k: usize, mut centroids: Vec<Vec<f64>>, max_iter: usize) -> LloydRun {
    let m = s.m();
    let mut labels: Vec<usize> = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter.max(1) {
        let assigned: Vec<(usize, f64)> = (0..m)
            .into_par_iter()
            .map(|i| nearest_centroid(s.row(i), &centroids, ip))
            .collect();
        let mut new_labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        let mut dist: Vec<f64> = assigned.iter().map(|a| a.1).collect();

        // reseed each empty cluster with the point farthest from its centroid
        loop {
            let mut counts = vec![0usize; k];
            new_labels.iter().for_each(|&l| counts[l] += 1);
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let far = (0..m)
                .filter(|&i| counts[new_labels[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                })
                .expect("k <= m leaves a cluster with two points");
            new_labels[far] = empty;
            dist[far] = 0.0;
            centroids[empty] = s.row(far).to_vec();
        }

        let unchanged = new_labels == labels;
        labels = new_labels;
        centroids = centroids_of(s, &labels, k);
        if unchanged {
            converged = true;
            break;
        }
    }
    let cost = (0..m)
        .map(|i| sq_dist(s.row(i), &centroids[labels[i]], ip))
        .sum();
    LloydRun {
        labels,
        cost,
        converged,
    }
}

/// Lloyd's k-means in the Hilbert norm with k-means++ seeding, best of
/// `restarts` seeded runs. Distances depend on snapshot magnitudes, unlike
/// the sine dissimilarity.
pub fn kmeans_baseline(
    s: &SnapshotSet,
    ip: &InnerProduct,
    k: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
) -> Result<ClusteringOutcome> {
    ip.check_dim(s.n_h())?;
    if k == 0 || k > s.m() {
        return Err(RomError::InvalidParameter(format!(
            "cluster count k = {k} must be in [1, m = {}]",
            s.m()
        )));
    }
    let restarts = restarts.max(1);
    let runs: Vec<LloydRun> = (0..restarts)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let init = kmeans_pp(s, ip, k, &mut rng);
            lloyd(s, ip, k, init, max_iter)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.cost < a.cost { b } else { a })
        .expect("at least one run");
    let partition = Partition::new(best.labels, k, None)?.canonical();
    Ok(ClusteringOutcome {
        partition,
        cost: best.cost,
        restarts_used: restarts,
        converged: best.converged,
    })
}
