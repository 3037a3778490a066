//! Local orthonormal bases from snapshot-POD (method of snapshots).

use nalgebra::SymmetricEigen;
use rayon::prelude::*;

use crate::dissimilarity::rel_proj_error_unchecked;
use crate::error::{Result, RomError};
use crate::snapshot::{InnerProduct, SnapshotSet};

/// Eigenvalues at or below this fraction of the largest one are treated as
/// numerically zero.
pub const EPS_RANK: f64 = 1e-12;

/// Maximum allowed deviation `|<h_i,h_j> - delta_ij|` for a basis to count
/// as orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Orthonormal family `{h_j}` spanning an approximation subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBasis {
    vectors: Vec<f64>,
    dim: usize,
    n_h: usize,
    energy: Vec<f64>,
    requested: usize,
}

impl LocalBasis {
    /// Orthonormalizes `rows` in `ip` by modified Gram-Schmidt, dropping
    /// vectors that are numerically dependent on the previous ones.
    pub fn orthonormalize(rows: &[&[f64]], ip: &InnerProduct) -> Result<Self> {
        let n_h = rows.first().map_or(0, |r| r.len());
        for r in rows {
            if r.len() != n_h {
                return Err(RomError::DimensionMismatch {
                    expected: n_h,
                    got: r.len(),
                });
            }
            ip.inner(r, r)?;
        }
        let kept = gram_schmidt(rows.iter().map(|r| r.to_vec()), ip);
        if kept.is_empty() {
            return Err(RomError::ZeroVector);
        }
        let dim = kept.len();
        Ok(LocalBasis {
            vectors: kept.concat(),
            dim,
            n_h,
            energy: Vec::new(),
            requested: rows.len(),
        })
    }

    /// Wraps vectors that are already orthonormal; fails otherwise.
    pub fn from_orthonormal(rows: &[&[f64]], ip: &InnerProduct) -> Result<Self> {
        let n_h = rows.first().map_or(0, |r| r.len());
        if rows.is_empty() || n_h == 0 {
            return Err(RomError::InvalidParameter("empty basis".into()));
        }
        for r in rows {
            if r.len() != n_h {
                return Err(RomError::DimensionMismatch {
                    expected: n_h,
                    got: r.len(),
                });
            }
        }
        let basis = LocalBasis {
            vectors: rows.concat(),
            dim: rows.len(),
            n_h,
            energy: Vec::new(),
            requested: rows.len(),
        };
        basis.check_orthonormal(ip)?;
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    /// Dimension asked for; larger than `dim()` when the cluster rank capped it.
    pub fn requested(&self) -> usize {
        self.requested
    }

    /// Retained Gram eigenvalues, non-increasing. Empty for bases not built by POD.
    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n_h..(j + 1) * self.n_h]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.n_h)
    }

    /// First `dim` vectors of this basis.
    pub fn truncated(&self, dim: usize) -> LocalBasis {
        let dim = dim.clamp(1, self.dim);
        LocalBasis {
            vectors: self.vectors[..dim * self.n_h].to_vec(),
            dim,
            n_h: self.n_h,
            energy: self.energy.iter().take(dim).cloned().collect(),
            requested: dim,
        }
    }

    /// `max_ij |<h_i,h_j> - delta_ij|`.
    pub fn orthonormality_defect(&self, ip: &InnerProduct) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip.dot(self.vector(i), self.vector(j)) - target).abs());
            }
        }
        worst
    }

    pub(crate) fn check_orthonormal(&self, ip: &InnerProduct) -> Result<()> {
        ip.check_dim(self.n_h)?;
        let defect = self.orthonormality_defect(ip);
        if defect > ORTHONORMAL_TOL || defect.is_nan() {
            return Err(RomError::NotOrthonormal(defect));
        }
        Ok(())
    }

    /// Coefficients `<u, h_j>`.
    pub fn coefficients(&self, u: &[f64], ip: &InnerProduct) -> Vec<f64> {
        self.vectors().map(|h| ip.dot(u, h)).collect()
    }

    /// `sum_j h_j h_j^T`, row-major `n_h x n_h`. Depends only on the
    /// spanned subspace, not on the choice of orthonormal basis.
    pub fn projector(&self) -> Vec<f64> {
        let n = self.n_h;
        let mut p = vec![0.0; n * n];
        for h in self.vectors() {
            for a in 0..n {
                for b in 0..n {
                    p[a * n + b] += h[a] * h[b];
                }
            }
        }
        p
    }
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
fn gram_schmidt(rows: impl Iterator<Item = Vec<f64>>, ip: &InnerProduct) -> Vec<Vec<f64>> {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for mut v in rows {
        let original = ip.norm_sq(&v).sqrt();
        if original == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for h in &kept {
                let c = ip.dot(&v, h);
                v.iter_mut().zip(h).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = ip.norm_sq(&v).sqrt();
        if norm <= 1e-10 * original {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        kept.push(v);
    }
    kept
}

/// Flips the vector so its entry of largest magnitude (first one on ties)
/// is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn check_indices(s: &SnapshotSet, indices: &[usize]) -> Result<()> {
    if indices.is_empty() {
        return Err(RomError::InvalidParameter("empty index set".into()));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= s.m()) {
        return Err(RomError::InvalidParameter(format!(
            "snapshot index {i} out of range for m = {}",
            s.m()
        )));
    }
    Ok(())
}

/// Snapshot-POD basis of dimension at most `n` for the snapshots in
/// `indices`.
///
/// With `normalized`, each snapshot is divided by its norm first; the
/// resulting basis minimizes the mean squared *relative* projection error
/// over the cluster, which is what the dictionary cost measures. The
/// dimension is capped at the numerical rank of the cluster (eigenvalues
/// above `EPS_RANK` times the largest); `requested()` keeps the original `n`.
pub fn snapshot_pod(
    s: &SnapshotSet,
    indices: &[usize],
    ip: &InnerProduct,
    n: usize,
    normalized: bool,
) -> Result<LocalBasis> {
    check_indices(s, indices)?;
    if n < 1 {
        return Err(RomError::InvalidParameter("basis dimension must be >= 1".into()));
    }
    ip.check_dim(s.n_h())?;
    let rows: Vec<&[f64]> = indices.iter().map(|&i| s.row(i)).collect();
    let c = rows.len();

    let mut g = ip.gram_of(&rows);
    let scale: Vec<f64> = if normalized {
        (0..c).map(|i| g[(i, i)].max(0.0).sqrt()).collect()
    } else {
        vec![1.0; c]
    };
    if let Some(i) = scale.iter().position(|&x| x == 0.0) {
        return Err(RomError::ZeroSnapshot {
            index: indices[i],
            norm: 0.0,
        });
    }
    if normalized {
        for i in 0..c {
            for j in 0..c {
                g[(i, j)] /= scale[i] * scale[j];
            }
        }
    }

    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]];
    let retained: Vec<usize> = order
        .into_iter()
        .take_while(|&j| eig.eigenvalues[j] > EPS_RANK * top)
        .take(n)
        .collect();

    let n_h = s.n_h();
    let modes: Vec<Vec<f64>> = retained
        .par_iter()
        .map(|&j| {
            let lambda = eig.eigenvalues[j];
            let mut h = vec![0.0; n_h];
            for (i, row) in rows.iter().enumerate() {
                let w = eig.eigenvectors[(i, j)] / (lambda.sqrt() * scale[i]);
                h.iter_mut().zip(row.iter()).for_each(|(x, y)| *x += w * y);
            }
            h
        })
        .collect();
    let energy_all: Vec<f64> = retained.iter().map(|&j| eig.eigenvalues[j]).collect();

    let mut kept = gram_schmidt(modes.into_iter(), ip);
    kept.iter_mut().for_each(|v| fix_sign(v));
    let dim = kept.len();
    if dim == 0 {
        return Err(RomError::ZeroVector);
    }
    if dim < n {
        log::warn!("POD dimension reduced from {n} to {dim} (cluster rank)");
    }
    Ok(LocalBasis {
        vectors: kept.concat(),
        dim,
        n_h,
        energy: energy_all.into_iter().take(dim).collect(),
        requested: n,
    })
}

/// Empirical squared normalized width of the cluster for basis `b`: the
/// mean of `rel_proj_error(u_i, b)^2` over `indices`.
pub fn empirical_width_sq(
    s: &SnapshotSet,
    indices: &[usize],
    b: &LocalBasis,
    ip: &InnerProduct,
) -> Result<f64> {
    check_indices(s, indices)?;
    if b.n_h() != s.n_h() {
        return Err(RomError::DimensionMismatch {
            expected: s.n_h(),
            got: b.n_h(),
        });
    }
    b.check_orthonormal(ip)?;
    let errors: Vec<f64> = indices
        .par_iter()
        .map(|&i| rel_proj_error_unchecked(s.row(i), b, ip))
        .collect::<Result<_>>()?;
    let sum: f64 = errors.iter().map(|e| e * e).sum();
    Ok(sum / indices.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissimilarity::rel_proj_error;

    fn e(n: usize, i: usize, scale: f64) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = scale;
        v
    }

    #[test]
    fn rank_one_cluster() {
        let s = SnapshotSet::from_rows(&[e(3, 0, 1.0), e(3, 0, 2.0), e(3, 0, -1.0)]).unwrap();
        let ip = InnerProduct::Identity;
        let b = snapshot_pod(&s, &[0, 1, 2], &ip, 1, true).unwrap();
        assert_eq!(b.dim(), 1);
        assert_eq!(b.vector(0), &[1.0, 0.0, 0.0]);
        for i in 0..3 {
            assert_eq!(rel_proj_error(s.row(i), &b, &ip).unwrap(), 0.0);
        }
        // rank caps the requested dimension
        let b = snapshot_pod(&s, &[0, 1, 2], &ip, 3, true).unwrap();
        assert_eq!((b.dim(), b.requested()), (1, 3));
    }

    #[test]
    fn full_rank_pair() {
        let s = SnapshotSet::from_rows(&[e(4, 0, 1.0), e(4, 1, 1.0)]).unwrap();
        let ip = InnerProduct::Identity;
        let b = snapshot_pod(&s, &[0, 1], &ip, 2, true).unwrap();
        assert_eq!(b.dim(), 2);
        for i in 0..2 {
            assert!(rel_proj_error(s.row(i), &b, &ip).unwrap() < 1e-15);
        }
    }

    #[test]
    fn width_hand_example() {
        let s = SnapshotSet::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let ip = InnerProduct::Identity;
        let b = LocalBasis::from_orthonormal(&[&[1.0, 0.0]], &ip).unwrap();
        let w = empirical_width_sq(&s, &[0, 1], &b, &ip).unwrap();
        assert!((w - 0.25).abs() < 1e-15);

        let s = SnapshotSet::from_rows(&[vec![0.0, 2.0, 0.0], vec![0.0, 0.0, -1.0]]).unwrap();
        let b = LocalBasis::from_orthonormal(&[&[1.0, 0.0, 0.0]], &ip).unwrap();
        assert_eq!(empirical_width_sq(&s, &[0, 1], &b, &ip).unwrap(), 1.0);
        let b = LocalBasis::from_orthonormal(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]], &ip).unwrap();
        assert_eq!(empirical_width_sq(&s, &[0, 1], &b, &ip).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let s = SnapshotSet::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let ip = InnerProduct::Identity;
        assert!(snapshot_pod(&s, &[], &ip, 1, true).is_err());
        assert!(snapshot_pod(&s, &[0], &ip, 0, true).is_err());
        assert!(snapshot_pod(&s, &[3], &ip, 1, true).is_err());
        assert!(matches!(
            LocalBasis::from_orthonormal(&[&[1.0, 0.0], &[1.0, 1.0]], &ip),
            Err(RomError::NotOrthonormal(_))
        ));
        let b = LocalBasis::from_orthonormal(&[&[1.0, 0.0, 0.0]], &ip).unwrap();
        assert!(empirical_width_sq(&s, &[0], &b, &ip).is_err());
    }

    #[test]
    fn sign_convention() {
        let s = SnapshotSet::from_rows(&[vec![0.1, -3.0, 0.2], vec![-0.1, -2.0, 0.3]]).unwrap();
        let b = snapshot_pod(&s, &[0, 1], &InnerProduct::Identity, 2, true).unwrap();
        for h in b.vectors() {
            let big = h.iter().cloned().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn weighted_orthonormality() {
        let ip = InnerProduct::diagonal(vec![0.5, 2.0, 1.0, 3.0]).unwrap();
        let s = SnapshotSet::from_rows(&[
            vec![1.0, 0.2, -0.3, 0.4],
            vec![0.1, 1.0, 0.5, -0.2],
            vec![-0.7, 0.3, 1.0, 0.9],
        ])
        .unwrap();
        let b = snapshot_pod(&s, &[0, 1, 2], &ip, 3, true).unwrap();
        assert_eq!(b.dim(), 3);
        assert!(b.orthonormality_defect(&ip) < 1e-12);
        assert!(b.energy().windows(2).all(|w| w[0] >= w[1]));
        let total: f64 = b.energy().iter().sum();
        assert!((total - 3.0).abs() < 1e-12);
    }
}
