//! Dense linear-algebra kernels: orthonormal kernel and row-space bases,
//! pseudo-inverses and restricted singular values.
//!
//! Storage is a `nalgebra` matrix; singular value decompositions come from
//! `faer`, whose SVD stays accurate on exactly rank-deficient input. Every rank
//! decision goes through a relative tolerance: a singular value `σ` counts as
//! zero when `σ <= rank_tol * σ_max`. Passing `None` selects the usual
//! `max(rows, cols) * f64::EPSILON`.

use faer::{Mat, MatRef};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Immutable dense real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    inner: DMatrix<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite matrix entry {bad}")));
        }
        Ok(Self {
            inner: DMatrix::from_row_slice(rows, cols, &data),
        })
    }

    /// Builds a matrix from a slice of rows, which must all have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} entries, expected {cols}",
                r.len()
            )));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    /// Diagonal matrix with the given entries.
    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        let n = entries.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in entries.iter().enumerate() {
            data[i * n + i] = d;
        }
        Self::from_row_major(n, n, data)
    }

    /// Column vector (n×1).
    pub fn column(entries: &[f64]) -> Result<Self> {
        Self::from_row_major(entries.len(), 1, entries.to_vec())
    }

    pub(crate) fn from_na(inner: DMatrix<f64>) -> Self {
        debug_assert!(inner.iter().all(|v| v.is_finite()), "non-finite entry");
        Self { inner }
    }

    pub fn as_na(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.inner.row(i).iter().copied().collect()
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        self.inner.column(j).iter().copied().collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.nrows()).map(|i| self.row(i)).collect()
    }

    pub fn row_major(&self) -> Vec<f64> {
        self.to_rows().concat()
    }

    pub fn transpose(&self) -> Self {
        Self::from_na(self.inner.transpose())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.ncols() != other.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Self::from_na(&self.inner * &other.inner))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.ncols() != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {:?} by a vector of length {}",
                self.shape(),
                v.len()
            )));
        }
        Ok((&self.inner * DVector::from_column_slice(v)).iter().copied().collect())
    }

    /// `selfᵀ · v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.nrows() != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply transpose of {:?} by a vector of length {}",
                self.shape(),
                v.len()
            )));
        }
        Ok(self
            .inner
            .tr_mul(&DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect())
    }

    /// Submatrix formed by the listed columns, in the listed order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        Self::from_na(self.inner.select_columns(idx))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self::from_na(self.inner.select_rows(idx))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_na(&self.inner * s)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "cannot subtract {:?} from {:?}",
                other.shape(),
                self.shape()
            )));
        }
        Ok(Self::from_na(&self.inner - &other.inner))
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest singular value (0 for empty matrices).
    pub fn spectral_norm(&self) -> f64 {
        singular_values(&self.inner).first().copied().unwrap_or(0.0)
    }
}

impl Serialize for DenseMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DenseMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        DenseMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Thin singular value decomposition `M = U diag(σ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DenseMatrix,
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

pub fn svd(m: &DenseMatrix) -> SvdResult {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return SvdResult {
            u: DenseMatrix::zeros(r, 0),
            singular_values: Vec::new(),
            v: DenseMatrix::zeros(c, 0),
        };
    }
    let dec = to_faer(&m.inner).thin_svd().expect("SVD of a finite matrix");
    SvdResult {
        u: DenseMatrix::from_na(from_faer(dec.U())),
        singular_values: dec.S().column_vector().iter().copied().collect(),
        v: DenseMatrix::from_na(from_faer(dec.V())),
    }
}

pub fn default_rank_tol(m: &DenseMatrix) -> f64 {
    m.nrows().max(m.ncols()) as f64 * f64::EPSILON
}

fn resolve_tol(m: &DenseMatrix, rank_tol: Option<f64>) -> Result<f64> {
    match rank_tol {
        None => Ok(default_rank_tol(m)),
        Some(t) if t.is_finite() && t > 0.0 => Ok(t),
        Some(t) => Err(Error::InvalidInput(format!("rank tolerance must be positive, got {t}"))),
    }
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    to_faer(m).singular_values().expect("SVD of a finite matrix")
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn count_rank(sv: &[f64], rel_tol: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Orthonormal bases of the row space and of the kernel of `m`, obtained
/// from a full right singular basis.
pub(crate) struct RightSplit {
    pub row_space: DenseMatrix,
    pub kernel: DenseMatrix,
    pub singular_values: Vec<f64>,
}

pub(crate) fn right_split(m: &DenseMatrix, rel_tol: f64) -> RightSplit {
    right_split_by(m, |smax| rel_tol * smax)
}

/// As [`right_split`], but singular values at or below `abs_tol` count as zero.
pub(crate) fn right_split_abs(m: &DenseMatrix, abs_tol: f64) -> RightSplit {
    right_split_by(m, |_| abs_tol)
}

fn right_split_by(m: &DenseMatrix, threshold: impl Fn(f64) -> f64) -> RightSplit {
    let (r, c) = m.shape();
    if c == 0 {
        return RightSplit {
            row_space: DenseMatrix::zeros(0, 0),
            kernel: DenseMatrix::zeros(0, 0),
            singular_values: Vec::new(),
        };
    }
    if r == 0 {
        return RightSplit {
            row_space: DenseMatrix::zeros(c, 0),
            kernel: DenseMatrix::identity(c),
            singular_values: Vec::new(),
        };
    }
    let dec = to_faer(&m.inner).svd().expect("SVD of a finite matrix");
    let v = from_faer(dec.V());
    let sv: Vec<f64> = dec.S().column_vector().iter().copied().collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let cut = threshold(smax);
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > cut).count()
    };
    let mut row_space = v.columns(0, rank).into_owned();
    let mut kernel = v.columns(rank, c - rank).into_owned();
    normalize_signs(&mut row_space);
    normalize_signs(&mut kernel);
    RightSplit {
        row_space: DenseMatrix::from_na(row_space),
        kernel: DenseMatrix::from_na(kernel),
        singular_values: sv.into_iter().take(r.min(c)).collect(),
    }
}

/// Flips each column so that its first non-negligible entry is positive.
fn normalize_signs(basis: &mut DMatrix<f64>) {
    for mut col in basis.column_iter_mut() {
        let scale = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-10 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Orthonormal basis of `Ker(m)`; zero columns when the kernel is trivial.
pub fn nullspace_basis(m: &DenseMatrix, rank_tol: Option<f64>) -> Result<DenseMatrix> {
    let tol = resolve_tol(m, rank_tol)?;
    Ok(right_split(m, tol).kernel)
}

/// Orthonormal basis of the row space `Im(mᵀ)`, the orthogonal complement
/// of `Ker(m)`.
pub fn row_space_basis(m: &DenseMatrix, rank_tol: Option<f64>) -> Result<DenseMatrix> {
    let tol = resolve_tol(m, rank_tol)?;
    Ok(right_split(m, tol).row_space)
}

/// Orthonormal basis of the column space `Im(m)`.
pub fn range_basis(m: &DenseMatrix, rank_tol: Option<f64>) -> Result<DenseMatrix> {
    row_space_basis(&m.transpose(), rank_tol)
}

pub fn rank(m: &DenseMatrix, rank_tol: Option<f64>) -> Result<usize> {
    let tol = resolve_tol(m, rank_tol)?;
    Ok(count_rank(&singular_values(&m.inner), tol))
}

/// Moore–Penrose pseudo-inverse; singular values at or below
/// `rank_tol * σ_max` are treated as zero.
pub fn pseudo_inverse(m: &DenseMatrix, rank_tol: Option<f64>) -> Result<DenseMatrix> {
    let tol = resolve_tol(m, rank_tol)?;
    let (r, c) = m.shape();
    let dec = svd(m);
    let rank = count_rank(&dec.singular_values, tol);
    let mut pinv = DMatrix::zeros(c, r);
    for k in 0..rank {
        let vk = dec.v.inner.column(k);
        let uk = dec.u.inner.column(k);
        pinv += (vk * uk.transpose()) / dec.singular_values[k];
    }
    Ok(DenseMatrix::from_na(pinv))
}

/// Extreme singular values of `M` restricted to the subspace spanned by the
/// orthonormal columns of `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceMetrics {
    pub sigma_min: f64,
    pub sigma_max: f64,
}

pub fn subspace_metrics(m: &DenseMatrix, basis: &DenseMatrix) -> Result<SubspaceMetrics> {
    if basis.ncols() == 0 {
        return Err(Error::EmptySubspace);
    }
    if m.ncols() != basis.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "operator {:?} cannot act on basis {:?}",
            m.shape(),
            basis.shape()
        )));
    }
    let gram = basis.inner.tr_mul(&basis.inner);
    let k = basis.ncols();
    let off = (&gram - DMatrix::<f64>::identity(k, k)).amax();
    if off > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "basis is not orthonormal (‖BᵀB − I‖max = {off:e})"
        )));
    }
    let mb = &m.inner * &basis.inner;
    let sv = singular_values(&mb);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    // Fewer rows than basis vectors leaves a nontrivial kernel.
    let sigma_min = if mb.nrows() < k {
        0.0
    } else {
        sv.last().copied().unwrap_or(0.0)
    };
    Ok(SubspaceMetrics {
        sigma_min,
        sigma_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixMetrics {
    pub spectral_norm: f64,
    /// `σ_max / σ_min` over the numerically nonzero singular values.
    pub cond: f64,
    pub rank: usize,
    pub lambda_max_mmt: f64,
    pub lambda_min_mmt: f64,
}

pub fn matrix_metrics(m: &DenseMatrix, rank_tol: Option<f64>) -> Result<MatrixMetrics> {
    let tol = resolve_tol(m, rank_tol)?;
    let sv = singular_values(&m.inner);
    let rank = count_rank(&sv, tol);
    let smax = sv.first().copied().unwrap_or(0.0);
    let cond = if rank == 0 { 0.0 } else { smax / sv[rank - 1] };
    // M Mᵀ is rows×rows; it is singular whenever rows exceed the number of
    // singular values.
    let lambda_min_mmt = if m.nrows() > sv.len() {
        0.0
    } else {
        sv.last().map_or(0.0, |s| s * s)
    };
    Ok(MatrixMetrics {
        spectral_norm: smax,
        cond,
        rank,
        lambda_max_mmt: smax * smax,
        lambda_min_mmt,
    })
}

/// Solves `m x = rhs` for square nonsingular `m`.
pub(crate) fn solve_square(m: &DenseMatrix, rhs: &[f64]) -> Option<Vec<f64>> {
    let lu = m.inner.clone().lu();
    lu.solve(&DVector::from_column_slice(rhs))
        .map(|x| x.iter().copied().collect())
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn pick(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = DenseMatrix::from_row_major(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        assert!(DenseMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn nullspace_of_coordinate_projection_is_first_axis() {
        let q = nullspace_basis(&m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]), None).unwrap();
        assert_eq!(q.shape(), (3, 1));
        assert_abs_diff_eq!(q.get(0, 0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.get(1, 0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.get(2, 0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn nullspace_of_identity_is_trivial() {
        let q = nullspace_basis(&DenseMatrix::identity(3), None).unwrap();
        assert_eq!(q.shape(), (3, 0));
    }

    #[test]
    fn nullspace_of_single_row() {
        let q = nullspace_basis(&m(&[&[1.0, 1.0]]), None).unwrap();
        assert_eq!(q.shape(), (2, 1));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(q.get(0, 0), h, epsilon = 1e-15);
        assert_abs_diff_eq!(q.get(1, 0), -h, epsilon = 1e-15);
    }

    #[test]
    fn nullspace_rejects_bad_tolerance() {
        assert!(nullspace_basis(&DenseMatrix::identity(2), Some(0.0)).is_err());
        assert!(nullspace_basis(&DenseMatrix::identity(2), Some(f64::NAN)).is_err());
    }

    #[test]
    fn nullspace_of_empty_row_matrix_is_everything() {
        let q = nullspace_basis(&DenseMatrix::zeros(0, 3), None).unwrap();
        assert_eq!(q.shape(), (3, 3));
    }

    #[test]
    fn pseudo_inverse_examples() {
        let p = pseudo_inverse(&m(&[&[1.0, 10.0]]), None).unwrap();
        assert_eq!(p.shape(), (2, 1));
        assert_abs_diff_eq!(p.get(0, 0), 1.0 / 101.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(1, 0), 10.0 / 101.0, epsilon = 1e-15);

        let p = pseudo_inverse(&DenseMatrix::identity(2), None).unwrap();
        assert_abs_diff_eq!(p.sub(&DenseMatrix::identity(2)).unwrap().max_abs(), 0.0, epsilon = 1e-15);

        let p = pseudo_inverse(&m(&[&[3.0]]), None).unwrap();
        assert_abs_diff_eq!(p.get(0, 0), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn pseudo_inverse_of_zero_is_zero() {
        let p = pseudo_inverse(&DenseMatrix::zeros(2, 3), None).unwrap();
        assert_eq!(p.shape(), (3, 2));
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn subspace_metrics_examples() {
        let s = 102f64.sqrt();
        let b = DenseMatrix::column(&[1.0 / s, -1.0 / s, -10.0 / s]).unwrap();
        let r = subspace_metrics(&m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]), &b).unwrap();
        assert_abs_diff_eq!(r.sigma_min, (101.0f64 / 102.0).sqrt(), epsilon = 1e-14);

        let basis = nullspace_basis(&m(&[&[1.0, 2.0, 3.0]]), None).unwrap();
        let r = subspace_metrics(&DenseMatrix::identity(3), &basis).unwrap();
        assert_abs_diff_eq!(r.sigma_min, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.sigma_max, 1.0, epsilon = 1e-14);

        let e1 = DenseMatrix::column(&[1.0, 0.0, 0.0]).unwrap();
        let r = subspace_metrics(&m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]), &e1).unwrap();
        assert_abs_diff_eq!(r.sigma_min, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn subspace_metrics_errors() {
        let err = subspace_metrics(&DenseMatrix::identity(2), &DenseMatrix::zeros(2, 0)).unwrap_err();
        assert_eq!(err, Error::EmptySubspace);
        let not_orthonormal = DenseMatrix::column(&[1.0, 1.0]).unwrap();
        assert!(subspace_metrics(&DenseMatrix::identity(2), &not_orthonormal).is_err());
    }

    #[test]
    fn matrix_metrics_examples() {
        let r = matrix_metrics(&DenseMatrix::identity(3), None).unwrap();
        assert_eq!(
            (r.spectral_norm, r.cond, r.rank, r.lambda_max_mmt, r.lambda_min_mmt),
            (1.0, 1.0, 3, 1.0, 1.0)
        );

        let r = matrix_metrics(&DenseMatrix::diagonal(&[2.0, 1.0]).unwrap(), None).unwrap();
        assert_abs_diff_eq!(r.spectral_norm, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.cond, 2.0, epsilon = 1e-15);
        assert_eq!(r.rank, 2);
        assert_abs_diff_eq!(r.lambda_max_mmt, 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.lambda_min_mmt, 1.0, epsilon = 1e-14);

        let r = matrix_metrics(&m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]), None).unwrap();
        assert_abs_diff_eq!(r.spectral_norm, 1.0, epsilon = 1e-15);
        assert_eq!(r.rank, 2);
    }

    #[test]
    fn lambda_min_of_tall_matrix_is_zero() {
        let r = matrix_metrics(&m(&[&[1.0], &[1.0]]), None).unwrap();
        assert_eq!(r.lambda_min_mmt, 0.0);
        assert_eq!(r.rank, 1);
    }
}
