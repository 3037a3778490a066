#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use romdict::{InnerProduct, ManifoldKind, ManifoldSpec, SnapshotSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn random_diagonal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.1..3.0)).collect()
}

pub fn weights_of(ip: &InnerProduct, n: usize) -> Vec<f64> {
    match ip {
        InnerProduct::Identity => vec![1.0; n],
        InnerProduct::Diagonal(w) => w.clone(),
        InnerProduct::Dense { .. } => panic!("dense weights not used by the test oracles"),
    }
}

/// Plain weighted dot product, written independently of the library.
pub fn wdot(u: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        s += u[i] * w[i] * v[i];
    }
    s
}

/// Classical Gram-Schmidt in the weighted inner product.
pub fn orthonormal_rows(rows: &[Vec<f64>], w: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let mut v = r.clone();
        for _ in 0..2 {
            for h in &out {
                let c = wdot(&v, h, w);
                for i in 0..v.len() {
                    v[i] -= c * h[i];
                }
            }
        }
        let n = wdot(&v, &v, w).sqrt();
        out.push(v.iter().map(|x| x / n).collect());
    }
    out
}

/// Relative projection error by explicit projection and residual norm.
pub fn direct_eta(u: &[f64], basis: &[Vec<f64>], w: &[f64]) -> f64 {
    let mut r = u.to_vec();
    for h in basis {
        let c = wdot(u, h, w);
        for i in 0..r.len() {
            r[i] -= c * h[i];
        }
    }
    (wdot(&r, &r, w) / wdot(u, u, w)).sqrt()
}

/// Mean squared relative projection error of the listed snapshots.
pub fn direct_width_sq(s: &SnapshotSet, idx: &[usize], basis: &[Vec<f64>], w: &[f64]) -> f64 {
    idx.iter().map(|&i| direct_eta(s.row(i), basis, w).powi(2)).sum::<f64>() / idx.len() as f64
}

/// Seeded factors with random sign and magnitude in [1e-2, 1e2].
pub fn random_factors(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m)
        .map(|_| {
            let mag = 10f64.powf(rng.random_range(-2.0..2.0));
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

/// Manifolds shared by the suite-wide checks.
pub fn suite() -> Vec<(&'static str, ManifoldSpec)> {
    use romdict::manifold::CenterSampling;
    vec![
        (
            "translated_gaussian",
            ManifoldSpec::new(
                ManifoldKind::TranslatedGaussian {
                    sigma: 0.05,
                    center_range: [0.0, 1.0],
                    centers: CenterSampling::Random,
                },
                100,
                64,
                11,
            )
            .with_intensity(0.5, 2.0),
        ),
        (
            "multi_regime",
            ManifoldSpec::new(ManifoldKind::MultiRegime { regimes: 3, rho: 0.1 }, 40, 45, 12)
                .with_intensity(0.1, 10.0),
        ),
        (
            "pure_scaling",
            ManifoldSpec::new(ManifoldKind::PureScaling, 20, 30, 13).with_intensity(0.1, 10.0),
        ),
        (
            "random_lowrank",
            ManifoldSpec::new(ManifoldKind::RandomLowrank { rank: 6 }, 30, 40, 14)
                .with_intensity(0.2, 5.0),
        ),
    ]
}

/// Squared relative error of the best `n`-dimensional fit of the normalized
/// rows, from the `n_h x n_h` correlation matrix.
pub fn best_subspace_width_sq(s: &SnapshotSet, idx: &[usize], w: &[f64], dim: usize) -> f64 {
    let n = s.n_h();
    let mut c = nalgebra::DMatrix::<f64>::zeros(n, n);
    for &i in idx {
        let u = s.row(i);
        let norm = wdot(u, u, w).sqrt();
        // symmetric form sqrt(W) u for a weighted inner product
        let v: Vec<f64> = (0..n).map(|a| u[a] * w[a].sqrt() / norm).collect();
        for a in 0..n {
            for b in 0..n {
                c[(a, b)] += v[a] * v[b];
            }
        }
    }
    let mut eig: Vec<f64> = c.symmetric_eigenvalues().iter().cloned().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = eig.iter().take(dim).sum();
    (1.0 - top / idx.len() as f64).max(0.0)
}
