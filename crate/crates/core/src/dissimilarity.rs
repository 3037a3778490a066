//! Sine dissimilarity and relative projection error.
//!
//! `sine_dissim(u, v)` is the sine of the angle between `u` and `v` in the
//! Hilbert inner product. It vanishes exactly on collinear pairs, so it is a
//! metric on directions rather than on vectors. For an orthonormal family
//! `{h_j}` of size `N`,
//!
//! ```text
//! rel_proj_error(u, H_N)^2 = 1 - N + sum_j sine_dissim(u, h_j)^2
//! ```
//!
//! and with a single vector `v`, `sine_dissim(u, v) = rel_proj_error(u, span{v})`.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, RomError};
use crate::io::{encode_csv_rows, write_text};
use crate::pod::LocalBasis;
use crate::snapshot::{gram, InnerProduct, SnapshotSet};

/// `sqrt(1 - <u,v>^2 / (|u|^2 |v|^2))`, clamped to `[0, 1]`.
pub fn sine_dissim(u: &[f64], v: &[f64], ip: &InnerProduct) -> Result<f64> {
    let uv = ip.inner(u, v)?;
    let uu = ip.inner(u, u)?;
    let vv = ip.inner(v, v)?;
    if uu <= 0.0 || vv <= 0.0 {
        return Err(RomError::ZeroVector);
    }
    Ok(sine_from_gram(uv, uu, vv).sqrt())
}

/// Squared sines below this are indistinguishable from rounding noise of
/// the Gram-ratio formula and are reported as exactly zero.
pub const SINE_SQ_FLOOR: f64 = 16.0 * f64::EPSILON;

/// Squared sine from Gram entries, clamped to `[0, 1]`.
#[inline]
fn sine_from_gram(uv: f64, uu: f64, vv: f64) -> f64 {
    let x = 1.0 - uv * uv / (uu * vv);
    if x < SINE_SQ_FLOOR {
        0.0
    } else {
        x.min(1.0)
    }
}

/// Pairwise sine dissimilarities of a snapshot set.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    values: Vec<f64>,
    m: usize,
    squared: bool,
}

impl DissimilarityMatrix {
    /// Wraps a row-major `m x m` matrix after checking symmetry (to 1e-12),
    /// an exactly zero diagonal and entries in `[0, 1]`.
    pub fn new(values: Vec<f64>, m: usize, squared: bool) -> Result<Self> {
        if values.len() != m * m || m == 0 {
            return Err(RomError::DimensionMismatch {
                expected: m * m,
                got: values.len(),
            });
        }
        let d = DissimilarityMatrix { values, m, squared };
        d.validate()?;
        Ok(d)
    }

    pub fn from_fn(m: usize, squared: bool, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut values = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                values[i * m + j] = f(i, j);
            }
        }
        Self::new(values, m, squared)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let m = self.m;
        for i in 0..m {
            if self.get(i, i) != 0.0 {
                return Err(RomError::InvalidDissimilarity(format!(
                    "nonzero diagonal entry at {i}"
                )));
            }
            for j in 0..m {
                let x = self.get(i, j);
                if !x.is_finite() || !(0.0..=1.0).contains(&x) {
                    return Err(RomError::InvalidDissimilarity(format!(
                        "entry ({i}, {j}) = {x} outside [0, 1]"
                    )));
                }
                if j > i && (x - self.get(j, i)).abs() > 1e-12 {
                    return Err(RomError::InvalidDissimilarity(format!(
                        "not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_squared(&self) -> bool {
        self.squared
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    /// Entrywise square (or square root) to switch representation.
    pub fn to_squared(&self, squared: bool) -> DissimilarityMatrix {
        let values = match (self.squared, squared) {
            (a, b) if a == b => self.values.clone(),
            (false, true) => self.values.iter().map(|x| x * x).collect(),
            _ => self.values.iter().map(|x| x.sqrt()).collect(),
        };
        DissimilarityMatrix {
            values,
            m: self.m,
            squared,
        }
    }

    pub fn to_csv_string(&self) -> String {
        encode_csv_rows(self.values.chunks_exact(self.m))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv_string())
    }
}

/// Sine dissimilarity matrix of `s`, computed from the Gram matrix as
/// `1 - G_ij^2 / (G_ii G_jj)`. With `squared`, entries are `sine^2`.
pub fn dissim_matrix(s: &SnapshotSet, ip: &InnerProduct, squared: bool) -> Result<DissimilarityMatrix> {
    let g = gram(s, ip)?;
    Ok(from_gram(&g, squared))
}

pub(crate) fn from_gram(g: &DMatrix<f64>, squared: bool) -> DissimilarityMatrix {
    let m = g.nrows();
    let mut values = vec![0.0; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let sq = sine_from_gram(g[(i, j)], g[(i, i)], g[(j, j)]);
            let x = if squared { sq } else { sq.sqrt() };
            values[i * m + j] = x;
            values[j * m + i] = x;
        }
    }
    DissimilarityMatrix { values, m, squared }
}

/// `|u - sum_j <u,h_j> h_j| / |u|`, clamped to `[0, 1]`.
pub fn rel_proj_error(u: &[f64], b: &LocalBasis, ip: &InnerProduct) -> Result<f64> {
    if u.len() != b.n_h() {
        return Err(RomError::DimensionMismatch {
            expected: b.n_h(),
            got: u.len(),
        });
    }
    ip.norm(u)?;
    b.check_orthonormal(ip)?;
    rel_proj_error_unchecked(u, b, ip)
}

pub(crate) fn rel_proj_error_unchecked(u: &[f64], b: &LocalBasis, ip: &InnerProduct) -> Result<f64> {
    let uu = ip.norm_sq(u);
    if uu <= 0.0 {
        return Err(RomError::ZeroVector);
    }
    let mut residual = u.to_vec();
    for h in b.vectors() {
        let c = ip.dot(u, h);
        residual.iter_mut().zip(h).for_each(|(r, x)| *r -= c * x);
    }
    Ok((ip.norm_sq(&residual) / uu).sqrt().clamp(0.0, 1.0))
}

/// `sqrt(1 - sum_j <u,h_j>^2 / |u|^2)`; the coefficient-energy form of the
/// relative projection error.
pub fn rel_proj_error_energy(u: &[f64], b: &LocalBasis, ip: &InnerProduct) -> Result<f64> {
    let uu = ip.norm(u)?.powi(2);
    if uu <= 0.0 {
        return Err(RomError::ZeroVector);
    }
    b.check_orthonormal(ip)?;
    let captured: f64 = b.coefficients(u, ip).iter().map(|c| c * c).sum();
    Ok((1.0 - captured / uu).clamp(0.0, 1.0).sqrt())
}

/// `|eta(u, B)^2 - (1 - N + sum_j sine_dissim(u, h_j)^2)|`.
pub fn property1_residual(u: &[f64], b: &LocalBasis, ip: &InnerProduct) -> Result<f64> {
    let eta = rel_proj_error(u, b, ip)?;
    let mut rhs = 1.0 - b.dim() as f64;
    for h in b.vectors() {
        rhs += sine_dissim(u, h, ip)?.powi(2);
    }
    Ok((eta * eta - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ID: InnerProduct = InnerProduct::Identity;

    #[test]
    fn sine_examples() {
        let u = [0.3, -1.0, 2.0];
        let neg: Vec<f64> = u.iter().map(|x| -3.0 * x).collect();
        assert_eq!(sine_dissim(&u, &u, &ID).unwrap(), 0.0);
        assert_eq!(sine_dissim(&u, &neg, &ID).unwrap(), 0.0);
        assert_eq!(sine_dissim(&[1.0, 0.0], &[0.0, 1.0], &ID).unwrap(), 1.0);
        let x = sine_dissim(&[1.0, 0.0], &[1.0, 1.0], &ID).unwrap();
        assert!((x - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sine_rejects_zero() {
        assert!(matches!(
            sine_dissim(&[0.0, 0.0], &[1.0, 0.0], &ID),
            Err(RomError::ZeroVector)
        ));
    }

    #[test]
    fn matrix_examples() {
        let u = vec![1.0, 2.0, -0.5];
        let s = SnapshotSet::from_rows(&[
            u.clone(),
            u.iter().map(|x| 2.0 * x).collect(),
            u.iter().map(|x| -x).collect(),
        ])
        .unwrap();
        let d = dissim_matrix(&s, &ID, true).unwrap();
        assert!(d.values.iter().all(|&x| x == 0.0));

        let s = SnapshotSet::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let d = dissim_matrix(&s, &ID, false).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d.get(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn matrix_matches_pairwise_calls() {
        let rows = vec![
            vec![0.2, 1.0, -0.4, 0.9],
            vec![1.1, -0.3, 0.6, 0.2],
            vec![-0.5, 0.5, 0.5, -1.5],
            vec![0.0, 2.0, 1.0, 0.3],
            vec![0.7, 0.7, -0.7, 0.1],
        ];
        let s = SnapshotSet::from_rows(&rows).unwrap();
        let ip = InnerProduct::diagonal(vec![1.0, 2.0, 0.5, 1.5]).unwrap();
        let d = dissim_matrix(&s, &ip, false).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 0.0 } else { sine_dissim(&rows[i], &rows[j], &ip).unwrap() };
                assert!((d.get(i, j) - expect).abs() <= 1e-12);
            }
        }
        assert!(d.validate().is_ok());
        let d2 = dissim_matrix(&s, &ip, true).unwrap();
        assert!((d2.get(1, 3) - d.get(1, 3).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn matrix_validation() {
        assert!(DissimilarityMatrix::new(vec![0.0, 0.5, 0.4, 0.0], 2, true).is_err());
        assert!(DissimilarityMatrix::new(vec![0.1, 0.5, 0.5, 0.0], 2, true).is_err());
        assert!(DissimilarityMatrix::new(vec![0.0, 1.5, 1.5, 0.0], 2, true).is_err());
        assert!(DissimilarityMatrix::new(vec![0.0, 0.5, 0.5, 0.0], 2, true).is_ok());
    }

    #[test]
    fn projection_examples() {
        let b = LocalBasis::from_orthonormal(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]], &ID).unwrap();
        assert_eq!(rel_proj_error(&[1.0, 2.0, 0.0], &b, &ID).unwrap(), 0.0);
        assert_eq!(rel_proj_error(&[0.0, 0.0, -4.0], &b, &ID).unwrap(), 1.0);
        let e1 = LocalBasis::from_orthonormal(&[&[1.0, 0.0, 0.0]], &ID).unwrap();
        let eta = rel_proj_error(&[1.0, 1.0, 0.0], &e1, &ID).unwrap();
        assert!((eta - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(rel_proj_error(&[0.0; 3], &b, &ID), Err(RomError::ZeroVector)));
    }

    #[test]
    fn property1_examples() {
        let b = LocalBasis::from_orthonormal(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]], &ID).unwrap();
        assert!(property1_residual(&[1.0, 1.0, 0.0], &b, &ID).unwrap() < 1e-15);
        assert_eq!(property1_residual(&[1.0, 0.0, 0.0], &b, &ID).unwrap(), 0.0);
    }

    #[test]
    fn energy_and_residual_forms_agree() {
        let ip = InnerProduct::diagonal(vec![1.0, 3.0, 0.5, 2.0]).unwrap();
        let b = LocalBasis::orthonormalize(&[&[1.0, 0.5, 0.0, 0.2], &[0.0, 1.0, 1.0, -0.3]], &ip).unwrap();
        let u = [0.4, -1.0, 2.0, 0.7];
        let a = rel_proj_error(&u, &b, &ip).unwrap();
        let e = rel_proj_error_energy(&u, &b, &ip).unwrap();
        assert!((a - e).abs() < 1e-8);
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let ip = InnerProduct::diagonal(vec![2.0, 1.0]).unwrap();
        // orthonormal for the identity, not for this weight
        let b = LocalBasis::from_orthonormal(&[&[1.0, 0.0]], &ID).unwrap();
        assert!(matches!(
            rel_proj_error(&[1.0, 1.0], &b, &ip),
            Err(RomError::NotOrthonormal(_))
        ));
    }
}
