//! Symmetric positive-definite matrices and the determinant inequalities
//! built on them.
//!
//! Determinants are always taken through Cholesky pivots. A ratio
//! `det(M) / det(M_i)` (the `i`-th row and column deleted) is the squared last
//! Cholesky pivot of `M` with index `i` moved to the end, which is also the
//! Schur complement of the remaining block.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted on construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Absolute slack under which a closed-form gap still counts as nonnegative.
pub const GAP_SLACK: f64 = 1e-9;

/// Relative tolerance for the matched-minor hypothesis of
/// [`bonnesen_linear_gap`].
pub const MINOR_MATCH_TOL: f64 = 1e-9;

/// Default condition-number cap for random covariances.
pub const DEFAULT_CONDITION_CAP: f64 = 1e3;

#[derive(Clone, Debug)]
pub struct SpdMatrix {
    entries: DMatrix<f64>,
    lower: DMatrix<f64>,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl SpdMatrix {
    /// Validates symmetry and positive definiteness and caches the Cholesky
    /// factor.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 {
            return Err(Error::InvalidDimension("matrix must be at least 1x1".into()));
        }
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.ncols(),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                let diff = (a - b).abs();
                if !(diff <= SYMMETRY_TOL * a.abs().max(1.0)) {
                    return Err(Error::NotSymmetric { row: i, col: j, diff });
                }
            }
        }
        let lower = cholesky_lower(&entries).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { entries, lower })
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_slice(n, &data)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n]).expect("identity is SPD")
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Lower-triangular `L` with `L Lᵀ = M`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.entries.row(i).iter().copied().collect())
            .collect()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn det(&self) -> f64 {
        self.log_det().exp()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = self.solve(&DMatrix::identity(n, n));
        symmetrize(&mut inv);
        inv
    }

    /// Solves `M X = B` through the cached factor.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self
            .lower
            .solve_lower_triangular(rhs)
            .expect("Cholesky factor has a positive diagonal");
        self.lower
            .tr_solve_lower_triangular(&y)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `vᵀ M⁻¹ v`.
    pub fn inverse_quadratic_form(&self, v: &[f64]) -> f64 {
        let b = DVector::from_column_slice(v);
        let w = self
            .lower
            .solve_lower_triangular(&b)
            .expect("Cholesky factor has a positive diagonal");
        w.norm_squared()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.entries * c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Self::new(&self.entries + &other.entries)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        same_dim(self, other)?;
        Self::new(&self.entries * a + &other.entries * b)
    }

    /// Principal submatrix on `indices`, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> Result<Self> {
        let n = self.dim();
        if indices.is_empty() {
            return Err(Error::InvalidDimension("empty index set".into()));
        }
        for &i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, dim: n });
            }
        }
        let k = indices.len();
        let sub = DMatrix::from_fn(k, k, |r, c| self.entries[(indices[r], indices[c])]);
        Self::new(sub)
    }

    /// Squared Cholesky pivots, i.e. successive ratios of leading principal
    /// minors `det(M_(j+1)) / det(M_(j))`.
    pub fn pivots(&self) -> Vec<f64> {
        self.lower.diagonal().iter().map(|d| d * d).collect()
    }
}

impl Serialize for SpdMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpdMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SpdMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = m.clone().cholesky()?;
    let lower = chol.l();
    if lower.diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) {
        Some(lower)
    } else {
        None
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn same_dim(a: &SpdMatrix, b: &SpdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// `ln det(M)` from Cholesky pivots.
pub fn log_det(m: &SpdMatrix) -> f64 {
    m.log_det()
}

/// The minor `M_i`: row and column `i` (0-based) removed.
pub fn delete_row_col(m: &SpdMatrix, i: usize) -> Result<SpdMatrix> {
    let n = m.dim();
    if n < 2 {
        return Err(Error::InvalidDimension(
            "cannot delete a row and column of a 1x1 matrix".into(),
        ));
    }
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, dim: n });
    }
    let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    m.submatrix(&keep)
}

/// Top-left `size × size` block.
pub fn leading_principal(m: &SpdMatrix, size: usize) -> Result<SpdMatrix> {
    let n = m.dim();
    if size == 0 || size > n {
        return Err(Error::InvalidDimension(format!(
            "leading block size {size} outside 1..={n}"
        )));
    }
    if size == n {
        return Ok(m.clone());
    }
    let keep: Vec<usize> = (0..size).collect();
    m.submatrix(&keep)
}

/// `a_nn − vᵀ (M^{n−1})⁻¹ v`, with `v` the last column above the diagonal.
pub fn schur_complement_last(m: &SpdMatrix) -> Result<f64> {
    let n = m.dim();
    if n < 2 {
        return Err(Error::InvalidDimension(
            "Schur complement needs dimension at least 2".into(),
        ));
    }
    let head = leading_principal(m, n - 1)?;
    let v: Vec<f64> = (0..n - 1).map(|r| m.get(r, n - 1)).collect();
    Ok(m.get(n - 1, n - 1) - head.inverse_quadratic_form(&v))
}

/// `det(M) / det(M_i)` as the last Cholesky pivot of `M` with index `i`
/// permuted to the end.
pub fn minor_ratio(m: &SpdMatrix, i: usize) -> Result<f64> {
    let n = m.dim();
    if n < 2 {
        return Err(Error::InvalidDimension(
            "minor ratio needs dimension at least 2".into(),
        ));
    }
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, dim: n });
    }
    let pivot = if i == n - 1 {
        m.lower[(n - 1, n - 1)]
    } else {
        let order: Vec<usize> = (0..n).filter(|&j| j != i).chain(std::iter::once(i)).collect();
        let permuted = m.submatrix(&order)?;
        permuted.lower[(n - 1, n - 1)]
    };
    Ok(pivot * pivot)
}

/// `(det(M) / det(M_(k)))^{1/k}` where `M_(k)` is the leading
/// `(n−k) × (n−k)` block.
pub fn leading_minor_ratio_root(m: &SpdMatrix, k: usize) -> Result<f64> {
    let n = m.dim();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", n - 1)));
    }
    let pivots = m.pivots();
    let ratio: f64 = pivots[n - k..].iter().product();
    Ok(if k == 1 { ratio } else { ratio.powf(1.0 / k as f64) })
}

/// `det(A+B)/det(A_i+B_i) − det(A)/det(A_i) − det(B)/det(B_i)`.
pub fn bergstrom_gap(a: &SpdMatrix, b: &SpdMatrix, i: usize) -> Result<f64> {
    let (lhs, rhs) = bergstrom_sides(a, b, i)?;
    Ok(lhs - rhs)
}

pub fn bergstrom_sides(a: &SpdMatrix, b: &SpdMatrix, i: usize) -> Result<(f64, f64)> {
    same_dim(a, b)?;
    let sum = a.add(b)?;
    Ok((
        minor_ratio(&sum, i)?,
        minor_ratio(a, i)? + minor_ratio(b, i)?,
    ))
}

/// Ky Fan gap for the leading `(n−k)` blocks.
pub fn kyfan_gap(a: &SpdMatrix, b: &SpdMatrix, k: usize) -> Result<f64> {
    let (lhs, rhs) = kyfan_sides(a, b, k)?;
    Ok(lhs - rhs)
}

pub fn kyfan_sides(a: &SpdMatrix, b: &SpdMatrix, k: usize) -> Result<(f64, f64)> {
    same_dim(a, b)?;
    let sum = a.add(b)?;
    Ok((
        leading_minor_ratio_root(&sum, k)?,
        leading_minor_ratio_root(a, k)? + leading_minor_ratio_root(b, k)?,
    ))
}

/// `det(λA + (1−λ)B) − λ det A − (1−λ) det B`, valid when `det(A_i) = det(B_i)`.
pub fn bonnesen_linear_gap(a: &SpdMatrix, b: &SpdMatrix, lambda: f64, i: usize) -> Result<f64> {
    let (lhs, rhs) = bonnesen_linear_sides(a, b, lambda, i)?;
    Ok(lhs - rhs)
}

pub fn bonnesen_linear_sides(
    a: &SpdMatrix,
    b: &SpdMatrix,
    lambda: f64,
    i: usize,
) -> Result<(f64, f64)> {
    same_dim(a, b)?;
    check_lambda(lambda)?;
    let det_ai = delete_row_col(a, i)?.det();
    let det_bi = delete_row_col(b, i)?.det();
    if (det_ai - det_bi).abs() > MINOR_MATCH_TOL * det_ai.abs().max(det_bi.abs()) {
        return Err(Error::Precondition(format!(
            "minors differ: det(A_{i}) = {det_ai}, det(B_{i}) = {det_bi}"
        )));
    }
    let mixed = a.combine(lambda, b, 1.0 - lambda)?;
    Ok((mixed.det(), lambda * a.det() + (1.0 - lambda) * b.det()))
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} outside [0, 1]")));
    }
    Ok(())
}

pub fn eigenvalues(m: &SpdMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.entries.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn condition_number(m: &SpdMatrix) -> f64 {
    let ev = eigenvalues(m);
    ev[ev.len() - 1] / ev[0]
}

/// `GᵀG + εI` with `G` standard normal and the smallest `ε ≥ 0` that brings
/// the condition number under `condition_cap`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, rng: &mut R, condition_cap: f64) -> SpdMatrix {
    assert!(n >= 1, "dimension must be at least 1");
    assert!(condition_cap >= 1.0, "condition cap must be at least 1");
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut s = g.transpose() * &g;
    symmetrize(&mut s);
    let ev = SymmetricEigen::new(s.clone()).eigenvalues;
    let lo = ev.min().max(0.0);
    let hi = ev.max().max(0.0);
    let shift = if condition_cap == 1.0 {
        // only a multiple of the identity has condition number 1
        s.fill(0.0);
        (hi + lo) / 2.0 + 1.0
    } else {
        let needed = ((hi - condition_cap * lo) / (condition_cap - 1.0)).max(0.0);
        // margin against eigenvalue rounding, plus a floor so that a
        // numerically singular draw still factors
        needed * (1.0 + 1e-9) + 1e-12 * hi.max(1.0)
    };
    for i in 0..n {
        s[(i, i)] += shift;
    }
    SpdMatrix::new(s).expect("shifted Gram matrix is SPD")
}

/// Two covariances identical except for entry `(n−1, n−1)`.
///
/// The second matrix keeps the Schur complement of the last coordinate
/// positive by rescaling it with a factor drawn from `[1/4, 4]`.
pub fn make_bonnesen_equality_pair<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> Result<(SpdMatrix, SpdMatrix)> {
    if n < 2 {
        return Err(Error::InvalidDimension(
            "equality pair needs dimension at least 2".into(),
        ));
    }
    let first = random_spd(n, rng, DEFAULT_CONDITION_CAP);
    let schur = schur_complement_last(&first)?;
    let factor: f64 = 0.25 * 16f64.powf(rng.random::<f64>());
    let mut entries = first.entries.clone();
    entries[(n - 1, n - 1)] += schur * (factor - 1.0);
    let second = SpdMatrix::new(entries)?;
    Ok((first, second))
}

/// Adds `delta` to the symmetric pair of entries `(row, n−1)` and
/// `(n−1, row)`. If the last Schur complement would drop below half its
/// previous value, the `(n−1, n−1)` entry is raised to restore it.
pub fn perturb_last_column(m: &SpdMatrix, row: usize, delta: f64) -> Result<SpdMatrix> {
    let n = m.dim();
    if n < 2 {
        return Err(Error::InvalidDimension("need dimension at least 2".into()));
    }
    if row >= n - 1 {
        return Err(Error::IndexOutOfRange { index: row, dim: n - 1 });
    }
    let before = schur_complement_last(m)?;
    let head = leading_principal(m, n - 1)?;
    let mut entries = m.entries.clone();
    entries[(row, n - 1)] += delta;
    entries[(n - 1, row)] += delta;
    let v: Vec<f64> = (0..n - 1).map(|r| entries[(r, n - 1)]).collect();
    let after = entries[(n - 1, n - 1)] - head.inverse_quadratic_form(&v);
    if after < 0.5 * before {
        entries[(n - 1, n - 1)] += 0.5 * before - after;
    }
    SpdMatrix::new(entries)
}
