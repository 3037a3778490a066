//! Synthetic snapshot sets with known reducibility structure.
//!
//! Specs are plain JSON, e.g.
//!
//! ```json
//! {"kind": "multi_regime", "n_h": 100, "m": 40, "seed": 3,
//!  "regimes": 4, "rho": 0.0, "intensity_range": [0.1, 10.0]}
//! ```

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RomError};
use crate::snapshot::{dot, SnapshotSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterSampling {
    #[default]
    Equispaced,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldKind {
    /// `a_i exp(-(x - c_i)^2 / (2 sigma^2))` on a uniform grid of `[0, 1]`.
    /// Labels: `(c_i, a_i)`.
    TranslatedGaussian {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "default_center_range")]
        center_range: [f64; 2],
        #[serde(default)]
        centers: CenterSampling,
    },
    /// `a_i (d_r(i) + rho * xi_i)` with orthonormal regime directions `d_r`
    /// and unit random perturbations `xi_i`. Labels: `(r(i), a_i)`.
    MultiRegime {
        regimes: usize,
        #[serde(default)]
        rho: f64,
    },
    /// `a_i d` for one random unit direction. Labels: `(a_i)`.
    PureScaling,
    /// `a_i` times a random unit vector of a fixed random `rank`-dimensional
    /// subspace. Labels: `(a_i)`.
    RandomLowrank { rank: usize },
}

fn default_sigma() -> f64 {
    0.05
}

fn default_center_range() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_intensity_range() -> [f64; 2] {
    [1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    #[serde(flatten)]
    pub kind: ManifoldKind,
    pub n_h: usize,
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    /// Intensities `a_i` are uniform in this range, which must not contain 0.
    #[serde(default = "default_intensity_range")]
    pub intensity_range: [f64; 2],
    /// Flip the sign of each intensity with probability 1/2.
    #[serde(default)]
    pub random_sign: bool,
}

impl ManifoldSpec {
    pub fn new(kind: ManifoldKind, n_h: usize, m: usize, seed: u64) -> Self {
        ManifoldSpec {
            kind,
            n_h,
            m,
            seed,
            intensity_range: default_intensity_range(),
            random_sign: false,
        }
    }

    pub fn with_intensity(mut self, lo: f64, hi: f64) -> Self {
        self.intensity_range = [lo, hi];
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(RomError::InvalidParameter(msg));
        if self.m == 0 || self.n_h == 0 {
            return bad("manifold needs m >= 1 and n_h >= 1".into());
        }
        let [lo, hi] = self.intensity_range;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || (lo <= 0.0 && hi >= 0.0) {
            return bad(format!(
                "intensity range [{lo}, {hi}] must be ordered and exclude 0"
            ));
        }
        match self.kind {
            ManifoldKind::TranslatedGaussian {
                sigma,
                center_range: [c0, c1],
                ..
            } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("sigma must be positive, got {sigma}"));
                }
                if !(c0.is_finite() && c1.is_finite()) || c0 > c1 {
                    return bad(format!("center range [{c0}, {c1}] must be ordered"));
                }
            }
            ManifoldKind::MultiRegime { regimes, rho } => {
                if regimes == 0 || regimes > self.n_h {
                    return bad(format!("regimes must be in [1, n_h], got {regimes}"));
                }
                if !(rho >= 0.0 && rho.is_finite()) {
                    return bad(format!("rho must be >= 0, got {rho}"));
                }
            }
            ManifoldKind::RandomLowrank { rank } => {
                if rank == 0 || rank > self.n_h {
                    return bad(format!("rank must be in [1, n_h], got {rank}"));
                }
            }
            ManifoldKind::PureScaling => {}
        }
        Ok(())
    }
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// `count` orthonormal random directions (Euclidean).
fn random_directions(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        let mut v = gaussian_vector(rng, n);
        for _ in 0..2 {
            for d in &out {
                let c = dot(&v, d);
                v.iter_mut().zip(d).for_each(|(x, y)| *x -= c * y);
            }
        }
        if dot(&v, &v).sqrt() > 1e-8 {
            out.push(unit(v));
        }
    }
    out
}

/// Deterministic snapshot set for `spec`.
pub fn generate(spec: &ManifoldSpec) -> Result<SnapshotSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (m, n_h) = (spec.m, spec.n_h);
    let [lo, hi] = spec.intensity_range;
    let intensities: Vec<f64> = (0..m)
        .map(|_| {
            let a = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            if spec.random_sign && rng.random::<bool>() {
                -a
            } else {
                a
            }
        })
        .collect();

    let mut data = Vec::with_capacity(m * n_h);
    let labels: Vec<f64>;
    let p: usize;
    match spec.kind {
        ManifoldKind::TranslatedGaussian {
            sigma,
            center_range: [c0, c1],
            centers,
        } => {
            let grid: Vec<f64> = if n_h == 1 {
                vec![0.5]
            } else {
                (0..n_h).map(|g| g as f64 / (n_h - 1) as f64).collect()
            };
            let cs: Vec<f64> = match centers {
                CenterSampling::Equispaced if m == 1 => vec![0.5 * (c0 + c1)],
                CenterSampling::Equispaced => (0..m)
                    .map(|i| c0 + (c1 - c0) * i as f64 / (m - 1) as f64)
                    .collect(),
                CenterSampling::Random => (0..m)
                    .map(|_| if c0 == c1 { c0 } else { rng.random_range(c0..=c1) })
                    .collect(),
            };
            for (&c, &a) in cs.iter().zip(&intensities) {
                data.extend(
                    grid.iter()
                        .map(|x| a * (-(x - c).powi(2) / (2.0 * sigma * sigma)).exp()),
                );
            }
            p = 2;
            labels = cs.iter().zip(&intensities).flat_map(|(&c, &a)| [c, a]).collect();
        }
        ManifoldKind::MultiRegime { regimes, rho } => {
            let dirs = random_directions(&mut rng, n_h, regimes);
            let mut assignment: Vec<usize> = (0..m).map(|i| i % regimes).collect();
            assignment.shuffle(&mut rng);
            for (&r, &a) in assignment.iter().zip(&intensities) {
                if rho > 0.0 {
                    let xi = unit(gaussian_vector(&mut rng, n_h));
                    data.extend(dirs[r].iter().zip(&xi).map(|(d, x)| a * (d + rho * x)));
                } else {
                    data.extend(dirs[r].iter().map(|d| a * d));
                }
            }
            p = 2;
            labels = assignment
                .iter()
                .zip(&intensities)
                .flat_map(|(&r, &a)| [r as f64, a])
                .collect();
        }
        ManifoldKind::PureScaling => {
            let d = unit(gaussian_vector(&mut rng, n_h));
            for &a in &intensities {
                data.extend(d.iter().map(|x| a * x));
            }
            p = 1;
            labels = intensities.clone();
        }
        ManifoldKind::RandomLowrank { rank } => {
            let basis = random_directions(&mut rng, n_h, rank);
            for &a in &intensities {
                let coeffs = unit(gaussian_vector(&mut rng, rank));
                let mut v = vec![0.0; n_h];
                for (c, q) in coeffs.iter().zip(&basis) {
                    v.iter_mut().zip(q).for_each(|(x, y)| *x += a * c * y);
                }
                data.extend(v);
            }
            p = 1;
            labels = intensities.clone();
        }
    }
    SnapshotSet::new(data, m, n_h)?.with_labels(p, labels)
}
