//! Snapshot storage and the weighted inner product that defines the Hilbert
//! space the snapshots live in.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Result, RomError};

/// Snapshots whose norm falls below this fraction of the largest snapshot
/// norm are rejected as zero solutions.
pub const DEFAULT_EPS_ZERO: f64 = 1e-12;

/// Weight `W` of the inner product `<u, v> = u^T W v`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InnerProduct {
    #[default]
    Identity,
    /// Lumped (diagonal) mass matrix, all entries strictly positive.
    Diagonal(Vec<f64>),
    /// Dense symmetric positive definite matrix, row-major `n x n`.
    Dense { n: usize, matrix: Vec<f64> },
}

impl InnerProduct {
    pub fn diagonal(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(RomError::InvalidParameter("empty diagonal weight".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(RomError::NonFinite(i));
            }
            if w <= 0.0 {
                return Err(RomError::InvalidParameter(format!(
                    "diagonal weight {i} is {w}, weights must be strictly positive"
                )));
            }
        }
        Ok(InnerProduct::Diagonal(weights))
    }

    /// Dense weight. Symmetry and a positive diagonal are checked; positive
    /// definiteness is not.
    pub fn dense(n: usize, matrix: Vec<f64>) -> Result<Self> {
        if n == 0 || matrix.len() != n * n {
            return Err(RomError::DimensionMismatch {
                expected: n * n,
                got: matrix.len(),
            });
        }
        if let Some(i) = matrix.iter().position(|x| !x.is_finite()) {
            return Err(RomError::NonFinite(i));
        }
        for i in 0..n {
            if matrix[i * n + i] <= 0.0 {
                return Err(RomError::NotPositiveDefinite(matrix[i * n + i]));
            }
            for j in (i + 1)..n {
                let (a, b) = (matrix[i * n + j], matrix[j * n + i]);
                if (a - b).abs() > 1e-12 * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) {
                    return Err(RomError::InvalidParameter(format!(
                        "dense weight is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        log::warn!("dense inner-product weight accepted without a positive-definiteness check");
        Ok(InnerProduct::Dense { n, matrix })
    }

    /// Dimension fixed by the weight, `None` for the identity.
    pub fn dim(&self) -> Option<usize> {
        match self {
            InnerProduct::Identity => None,
            InnerProduct::Diagonal(w) => Some(w.len()),
            InnerProduct::Dense { n, .. } => Some(*n),
        }
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        match self.dim() {
            Some(n) if n != len => Err(RomError::DimensionMismatch {
                expected: n,
                got: len,
            }),
            _ => Ok(()),
        }
    }

    /// `<u, v>` with dimension and finiteness checks.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != v.len() {
            return Err(RomError::DimensionMismatch {
                expected: u.len(),
                got: v.len(),
            });
        }
        self.check_dim(u.len())?;
        check_finite(u)?;
        check_finite(v)?;
        Ok(self.dot(u, v))
    }

    /// Induced norm. Slightly negative `<u,u>` from roundoff clamps to zero;
    /// anything more negative means the weight is not positive definite.
    pub fn norm(&self, u: &[f64]) -> Result<f64> {
        let sq = self.inner(u, u)?;
        if sq < 0.0 {
            let scale = dot(u, u).max(f64::MIN_POSITIVE);
            if sq < -1e-12 * scale {
                return Err(RomError::NotPositiveDefinite(sq));
            }
            return Ok(0.0);
        }
        Ok(sq.sqrt())
    }

    /// Unchecked `<u, v>`.
    pub(crate) fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            InnerProduct::Identity => dot(u, v),
            InnerProduct::Diagonal(w) => u
                .iter()
                .zip(v)
                .zip(w)
                .map(|((a, b), w)| a * w * b)
                .sum(),
            InnerProduct::Dense { n, matrix } => {
                let wv = dense_apply(*n, matrix, v);
                dot(u, &wv)
            }
        }
    }

    pub(crate) fn norm_sq(&self, u: &[f64]) -> f64 {
        self.dot(u, u).max(0.0)
    }

    /// Gram matrix of arbitrary rows, exactly symmetric.
    pub(crate) fn gram_of(&self, rows: &[&[f64]]) -> DMatrix<f64> {
        let m = rows.len();
        // For a dense weight, apply W once per row instead of once per pair.
        let weighted: Option<Vec<Vec<f64>>> = match self {
            InnerProduct::Dense { n, matrix } => Some(
                rows.par_iter()
                    .map(|r| dense_apply(*n, matrix, r))
                    .collect(),
            ),
            _ => None,
        };
        let upper: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| {
                (i..m)
                    .map(|j| match (&weighted, self) {
                        (Some(w), _) => dot(rows[i], &w[j]),
                        (None, ip) => ip.dot(rows[i], rows[j]),
                    })
                    .collect()
            })
            .collect();
        let mut g = DMatrix::zeros(m, m);
        for (i, row) in upper.iter().enumerate() {
            for (offset, &val) in row.iter().enumerate() {
                let j = i + offset;
                g[(i, j)] = val;
                g[(j, i)] = val;
            }
        }
        g
    }
}

/// Euclidean dot product with a fixed summation order.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

fn dense_apply(n: usize, matrix: &[f64], v: &[f64]) -> Vec<f64> {
    matrix.chunks_exact(n).map(|row| dot(row, v)).collect()
}

fn check_finite(u: &[f64]) -> Result<()> {
    match u.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(RomError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Per-snapshot parameter vectors, carried as metadata only.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub p: usize,
    /// Row-major `m x p`.
    pub values: Vec<f64>,
}

impl Labels {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }
}

/// `m` snapshots of dimension `n_h`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    data: Vec<f64>,
    m: usize,
    n_h: usize,
    labels: Option<Labels>,
}

impl SnapshotSet {
    /// Builds a snapshot set, rejecting non-finite entries and snapshots
    /// that are zero relative to the largest one (Euclidean norm).
    pub fn new(data: Vec<f64>, m: usize, n_h: usize) -> Result<Self> {
        if m == 0 || n_h == 0 {
            return Err(RomError::InvalidParameter(format!(
                "snapshot set needs m >= 1 and n_h >= 1, got m = {m}, n_h = {n_h}"
            )));
        }
        if data.len() != m * n_h {
            return Err(RomError::DimensionMismatch {
                expected: m * n_h,
                got: data.len(),
            });
        }
        check_finite(&data)?;
        let set = SnapshotSet {
            data,
            m,
            n_h,
            labels: None,
        };
        set.check_nonzero(&InnerProduct::Identity, DEFAULT_EPS_ZERO)?;
        Ok(set)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n_h = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(m * n_h);
        for row in rows {
            if row.len() != n_h {
                return Err(RomError::DimensionMismatch {
                    expected: n_h,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, m, n_h)
    }

    pub fn with_labels(mut self, p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.m * p {
            return Err(RomError::DimensionMismatch {
                expected: self.m * p,
                got: values.len(),
            });
        }
        check_finite(&values)?;
        self.labels = Some(Labels { p, values });
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_h..(i + 1) * self.n_h]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_h)
    }

    /// Copy of the set with snapshot `i` multiplied by `factors[i]`.
    pub fn rescaled(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.m {
            return Err(RomError::DimensionMismatch {
                expected: self.m,
                got: factors.len(),
            });
        }
        let data = self
            .rows()
            .zip(factors)
            .flat_map(|(row, &f)| row.iter().map(move |x| x * f))
            .collect();
        let mut out = Self::new(data, self.m, self.n_h)?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Snapshot norms in `ip`; fails on the first snapshot whose norm is
    /// at most `eps_zero` times the largest norm.
    pub fn check_nonzero(&self, ip: &InnerProduct, eps_zero: f64) -> Result<Vec<f64>> {
        ip.check_dim(self.n_h)?;
        let norms: Vec<f64> = self
            .rows()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|r| ip.norm_sq(r).sqrt())
            .collect();
        let max = norms.iter().cloned().fold(0.0, f64::max);
        for (index, &norm) in norms.iter().enumerate() {
            if norm <= eps_zero * max || norm == 0.0 {
                return Err(RomError::ZeroSnapshot { index, norm });
            }
        }
        Ok(norms)
    }
}

/// `G_ij = <u_i, u_j>`; exactly symmetric with a strictly positive diagonal.
pub fn gram(s: &SnapshotSet, ip: &InnerProduct) -> Result<DMatrix<f64>> {
    s.check_nonzero(ip, DEFAULT_EPS_ZERO)?;
    let rows: Vec<&[f64]> = s.rows().collect();
    Ok(ip.gram_of(&rows))
}
