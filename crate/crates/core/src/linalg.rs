//! Dense linear-algebra kernels shared by every solver.
//!
//! [`DenseMatrix`] is a column-major `f64` matrix backed by `nalgebra`;
//! singular value decompositions go through `faer`. All kernels here are
//! pure functions; the matrices they return are freshly allocated.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative floor below which a singular value is treated as zero when
/// inverting `Σ`.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Entries with magnitude at or below this are skipped when choosing the sign
/// of a singular vector.
const SIGN_EPS: f64 = 1e-12;

/// Column-major real matrix with at least one row and one column and only
/// finite entries.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    inner: DMatrix<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        check_shape(rows, cols)?;
        Ok(Self {
            inner: DMatrix::zeros(rows, cols),
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_shape(n, n)?;
        Ok(Self {
            inner: DMatrix::identity(n, n),
        })
    }

    /// Square diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = Self::zeros(n, n)?;
        for (i, &v) in diag.iter().enumerate() {
            m.inner[(i, i)] = v;
        }
        m.check_finite()?;
        Ok(m)
    }

    /// Builds a matrix from column-major data.
    pub fn from_column_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        check_shape(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::DataLength {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_column_slice(rows, cols, data))
    }

    /// Builds a matrix from a list of rows. Convenient for small literals.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        check_shape(nrows, ncols)?;
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(Error::DataLength {
                expected: ncols,
                got: bad.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let ncols = columns.len();
        let nrows = columns.first().map_or(0, Vec::len);
        check_shape(nrows, ncols)?;
        let mut data = Vec::with_capacity(nrows * ncols);
        for c in columns {
            if c.len() != nrows {
                return Err(Error::DataLength {
                    expected: nrows,
                    got: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Self::from_column_slice(nrows, ncols, &data)
    }

    pub fn from_dmatrix(inner: DMatrix<f64>) -> Result<Self> {
        check_shape(inner.nrows(), inner.ncols())?;
        let m = Self { inner };
        m.check_finite()?;
        Ok(m)
    }

    /// Wraps kernel output whose shape and finiteness follow from finite inputs.
    pub(crate) fn from_dmatrix_unchecked(inner: DMatrix<f64>) -> Self {
        debug_assert!(inner.nrows() >= 1 && inner.ncols() >= 1);
        Self { inner }
    }

    fn check_finite(&self) -> Result<()> {
        let rows = self.rows();
        match self.inner.as_slice().iter().position(|v| !v.is_finite()) {
            Some(pos) => Err(Error::NonFinite {
                row: pos % rows,
                col: pos / rows,
            }),
            None => Ok(()),
        }
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    /// Column `j` as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        let r = self.rows();
        &self.inner.as_slice()[j * r..(j + 1) * r]
    }

    /// Column-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        self.inner.as_slice()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn transpose(&self) -> DenseMatrix {
        Self::from_dmatrix_unchecked(self.inner.transpose())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols() != rhs.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self::from_dmatrix_unchecked(&self.inner * &rhs.inner))
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(rhs)?;
        Ok(Self::from_dmatrix_unchecked(&self.inner + &rhs.inner))
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(rhs)?;
        Ok(Self::from_dmatrix_unchecked(&self.inner - &rhs.inner))
    }

    pub fn scale(&self, factor: f64) -> Result<DenseMatrix> {
        Self::from_dmatrix(&self.inner * factor)
    }

    /// The first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Result<DenseMatrix> {
        if k == 0 || k > self.cols() {
            return Err(Error::RankOutOfRange {
                k,
                max: self.cols(),
            });
        }
        Ok(Self::from_dmatrix_unchecked(
            self.inner.columns(0, k).into_owned(),
        ))
    }

    fn check_same_shape(&self, rhs: &DenseMatrix) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "DenseMatrix {}x{} {:?}",
            self.rows(),
            self.cols(),
            self.inner
        )
    }
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyShape { rows, cols });
    }
    Ok(())
}

/// Sorted set of distinct column indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ColumnIndexSet {
    indices: Vec<usize>,
}

impl ColumnIndexSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Sorts and deduplicates.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    /// `{0, 1, .., n-1}`.
    pub fn all(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn union(&self, other: &ColumnIndexSet) -> ColumnIndexSet {
        let (a, b) = (&self.indices, &other.indices);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        ColumnIndexSet { indices: out }
    }

    pub fn intersection_len(&self, other: &ColumnIndexSet) -> usize {
        self.iter().filter(|&i| other.contains(i)).count()
    }

    pub fn is_subset(&self, other: &ColumnIndexSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    /// Checks every index is below `cols`.
    pub fn validate(&self, cols: usize) -> Result<()> {
        match self.indices.last() {
            Some(&index) if index >= cols => Err(Error::IndexOutOfRange { index, cols }),
            _ => Ok(()),
        }
    }
}

impl FromIterator<usize> for ColumnIndexSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Rank-`k` singular triple `u · diag(sigma) · vᵀ`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    /// Orthonormal `d x k` left factor.
    pub u: DenseMatrix,
    /// Nonincreasing, nonnegative.
    pub sigma: Vec<f64>,
    /// Orthonormal `n x k` right factor.
    pub v: DenseMatrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `u · diag(sigma) · vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.as_dmatrix().clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        DenseMatrix::from_dmatrix_unchecked(us * self.v.as_dmatrix().transpose())
    }

    /// True when the trailing singular value sits at or below the relative
    /// floor, i.e. the source had numerical rank below `k`.
    pub fn is_rank_deficient(&self) -> bool {
        let top = self.sigma[0];
        self.sigma
            .last()
            .is_some_and(|&s| s <= SIGMA_FLOOR * top || top == 0.0)
    }
}

/// Top-`k` singular triple of `m`.
///
/// Each left singular vector is signed so that its first entry with
/// magnitude above `1e-12` is nonnegative. Within a block of tied singular
/// values any orthonormal basis may be returned.
pub fn truncated_svd(m: &DenseMatrix, k: usize) -> Result<TruncatedSvd> {
    let (d, n) = m.shape();
    let max = d.min(n);
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { k, max });
    }
    thin_svd(to_faer(m), k)
}

/// [`truncated_svd`] of `m` with the columns in `s` set to zero, without
/// materialising the masked copy.
pub fn truncated_svd_without(
    m: &DenseMatrix,
    s: &ColumnIndexSet,
    k: usize,
) -> Result<TruncatedSvd> {
    s.validate(m.cols())?;
    let max = m.rows().min(m.cols());
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { k, max });
    }
    let mut f = to_faer(m);
    for j in s.iter() {
        f.col_mut(j).fill(0.0);
    }
    thin_svd(f, k)
}

fn thin_svd(f: faer::Mat<f64>, k: usize) -> Result<TruncatedSvd> {
    let (d, n) = (f.nrows(), f.ncols());
    let svd = f.thin_svd().map_err(|_| Error::SvdNoConvergence)?;
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());

    let mut u = DMatrix::from_fn(d, k, |i, j| fu[(i, j)]);
    let mut v = DMatrix::from_fn(n, k, |i, j| fv[(i, j)]);
    let sigma: Vec<f64> = (0..k).map(|j| fs[j].max(0.0)).collect();

    for j in 0..k {
        let flip = u
            .column(j)
            .iter()
            .find(|x| x.abs() > SIGN_EPS)
            .is_some_and(|&x| x < 0.0);
        if flip {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }

    Ok(TruncatedSvd {
        u: DenseMatrix::from_dmatrix(u)?,
        sigma,
        v: DenseMatrix::from_dmatrix(v)?,
    })
}

fn to_faer(m: &DenseMatrix) -> faer::Mat<f64> {
    faer::MatRef::from_column_major_slice(m.as_slice(), m.rows(), m.cols()).to_owned()
}

/// `(I - u uᵀ) m`.
pub fn residual_projection(u: &DenseMatrix, m: &DenseMatrix) -> Result<DenseMatrix> {
    if u.rows() != m.rows() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows, matrix has {}",
            u.rows(),
            m.rows()
        )));
    }
    let um = u.as_dmatrix().transpose() * m.as_dmatrix();
    Ok(DenseMatrix::from_dmatrix_unchecked(
        m.as_dmatrix() - u.as_dmatrix() * um,
    ))
}

/// Expressivity scores `E = diag(sigma)⁻¹ uᵀ m`.
///
/// Rows whose singular value is at or below `sigma_floor * sigma[0]` are set
/// to zero. Fails only when every row is floored.
pub fn coherence_scores(
    svd: &TruncatedSvd,
    m: &DenseMatrix,
    sigma_floor: f64,
) -> Result<DenseMatrix> {
    if svd.u.rows() != m.rows() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows, matrix has {}",
            svd.u.rows(),
            m.rows()
        )));
    }
    let top = svd.sigma[0];
    let inv: Vec<f64> = svd
        .sigma
        .iter()
        .map(|&s| {
            if s > sigma_floor * top && s > 0.0 {
                1.0 / s
            } else {
                0.0
            }
        })
        .collect();
    if inv.iter().all(|&x| x == 0.0) {
        return Err(Error::RankDegenerate);
    }
    let mut e = svd.u.as_dmatrix().transpose() * m.as_dmatrix();
    for (i, w) in inv.iter().enumerate() {
        e.row_mut(i).scale_mut(*w);
    }
    Ok(DenseMatrix::from_dmatrix_unchecked(e))
}

/// Copy of `m` with the columns in `s` set to zero. Shape is preserved.
pub fn zero_columns(m: &DenseMatrix, s: &ColumnIndexSet) -> Result<DenseMatrix> {
    s.validate(m.cols())?;
    let mut out = m.as_dmatrix().clone();
    for j in s.iter() {
        out.column_mut(j).fill(0.0);
    }
    Ok(DenseMatrix::from_dmatrix_unchecked(out))
}

/// ℓ₂ norm of every column.
pub fn column_norms(m: &DenseMatrix) -> Vec<f64> {
    (0..m.cols()).map(|j| l2(m.column(j))).collect()
}

/// `‖(I - u uᵀ) l‖_F`.
pub fn subspace_residual(u: &DenseMatrix, l: &DenseMatrix) -> Result<f64> {
    Ok(residual_projection(u, l)?.frobenius_norm())
}

/// Largest singular value.
pub fn operator_norm(m: &DenseMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// All `min(rows, cols)` singular values, nonincreasing.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    match to_faer(m).singular_values() {
        Ok(sv) => sv.into_iter().map(|s| s.max(0.0)).collect(),
        Err(_) => {
            // Square roots of the Gram eigenvalues; less accurate for small
            // singular values but always available.
            let gram = m.as_dmatrix().transpose() * m.as_dmatrix();
            let mut ev: Vec<f64> = gram
                .symmetric_eigenvalues()
                .iter()
                .map(|x| x.max(0.0).sqrt())
                .collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            ev.truncate(m.rows().min(m.cols()));
            ev
        }
    }
}

pub(crate) fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
