//! Dense complex matrix kernel.
//!
//! Everything in this crate works on small dense matrices over `Complex64`.
//! This module wraps the decompositions the rest of the library is built on:
//! SVD-based rank and subspace extraction with explicit tolerances, linear
//! solves with a condition estimate, Moore-Penrose left-inverses, a
//! scaling-and-squaring matrix exponential, and principal angles between
//! subspaces.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal angle below which two subspaces are treated as equal.
pub const SUBSPACE_ANGLE_TOL: f64 = 1e-8;

/// Schur iteration cap for the spectrum helper; `None` from the
/// decomposition maps to [`Error::Computation`].
const SCHUR_MAX_ITER: usize = 10_000;

/// Dense complex matrix, row-major construction, finite entries enforced at
/// every public constructor.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub(crate) data: DMatrix<Complex64>,
}

impl CMatrix {
    /// Wraps an nalgebra matrix without the finiteness check.
    /// Internal arithmetic preserves finiteness except where documented
    /// (the exponential re-checks after squaring).
    pub(crate) fn wrap(data: DMatrix<Complex64>) -> Self {
        CMatrix { data }
    }

    fn validated(data: DMatrix<Complex64>) -> Result<Self> {
        for j in 0..data.ncols() {
            for i in 0..data.nrows() {
                let z = data[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(CMatrix { data })
    }

    /// Builds from rows of complex entries. Rows must be nonempty-consistent
    /// (all the same length).
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
        Self::validated(data)
    }

    /// Builds from rows of real entries.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let complex: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&complex)
    }

    /// Builds an `nrows x ncols` matrix from a closure.
    pub fn from_fn(
        nrows: usize,
        ncols: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        Self::validated(DMatrix::from_fn(nrows, ncols, |i, j| f(i, j)))
    }

    /// Column vector from a slice of entries.
    pub fn column(entries: &[Complex64]) -> Result<Self> {
        Self::validated(DMatrix::from_column_slice(entries.len(), 1, entries))
    }

    /// Column vector from real entries.
    pub fn real_column(entries: &[f64]) -> Result<Self> {
        let c: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::column(&c)
    }

    /// Zero matrix. Zero-sized dimensions are allowed and behave as empty
    /// operands in products.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CMatrix {
            data: DMatrix::zeros(nrows, ncols),
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        CMatrix {
            data: DMatrix::identity(n, n),
        }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0 || self.cols() == 0
    }

    /// Entry at `(row, col)`. Panics out of bounds, like slice indexing.
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[(row, col)]
    }

    /// Entries in row-major order.
    pub fn entries_row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    /// Conjugate transpose. A plain `'` throughout the docs means this.
    pub fn adjoint(&self) -> CMatrix {
        CMatrix::wrap(self.data.adjoint())
    }

    /// Scalar multiple.
    pub fn scale(&self, z: Complex64) -> CMatrix {
        CMatrix::wrap(&self.data * z)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    /// Largest entry modulus; 0 for empty matrices.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Spectral norm (largest singular value); 0 for empty matrices.
    pub fn norm2(&self) -> Result<f64> {
        if self.is_empty() {
            return Ok(0.0);
        }
        let sv = singular_values(&self.data)?;
        Ok(sv.first().copied().unwrap_or(0.0))
    }

    /// `self` with `other` appended on the right. Panics on row mismatch.
    pub fn hstack(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.rows(), other.rows(), "hstack row mismatch");
        let mut out = DMatrix::zeros(self.rows(), self.cols() + other.cols());
        out.view_mut((0, 0), (self.rows(), self.cols()))
            .copy_from(&self.data);
        out.view_mut((0, self.cols()), (other.rows(), other.cols()))
            .copy_from(&other.data);
        CMatrix::wrap(out)
    }

    /// `self` with `other` appended below. Panics on column mismatch.
    pub fn vstack(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols(), other.cols(), "vstack column mismatch");
        let mut out = DMatrix::zeros(self.rows() + other.rows(), self.cols());
        out.view_mut((0, 0), (self.rows(), self.cols()))
            .copy_from(&self.data);
        out.view_mut((self.rows(), 0), (other.rows(), other.cols()))
            .copy_from(&other.data);
        CMatrix::wrap(out)
    }

    /// Contiguous column block `[first, first + count)` as a new matrix.
    pub fn columns(&self, first: usize, count: usize) -> CMatrix {
        CMatrix::wrap(self.data.columns(first, count).into_owned())
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.data[idx]
    }
}

impl std::ops::Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix::wrap(&self.data + &rhs.data)
    }
}

impl std::ops::Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix::wrap(&self.data - &rhs.data)
    }
}

impl std::ops::Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        CMatrix::wrap(&self.data * &rhs.data)
    }
}

/// Rank decision rule applied to a singular value spectrum.
///
/// A singular value counts toward the rank iff it exceeds the threshold:
///
/// * `Machine`: `eps * max(rows, cols) * sigma_max` (the usual SVD default),
/// * `Relative(c)`: `c * sigma_max`,
/// * `Absolute(c)`: `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum RankTolerance {
    Machine,
    Relative(f64),
    Absolute(f64),
}

impl Default for RankTolerance {
    fn default() -> Self {
        RankTolerance::Machine
    }
}

impl RankTolerance {
    /// Threshold for a `rows x cols` matrix whose largest singular value is
    /// `sigma_max`.
    pub fn threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        match *self {
            RankTolerance::Machine => f64::EPSILON * rows.max(cols) as f64 * sigma_max,
            RankTolerance::Relative(c) => c * sigma_max,
            RankTolerance::Absolute(c) => c,
        }
    }

    /// Rejects non-finite or negative cutoffs. Called by every consumer,
    /// but exposed so externally constructed values (CLI flags, files) can
    /// be checked up front.
    pub fn validate(&self) -> Result<()> {
        let c = match *self {
            RankTolerance::Machine => return Ok(()),
            RankTolerance::Relative(c) | RankTolerance::Absolute(c) => c,
        };
        if c.is_finite() && c >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "rank tolerance must be finite and nonnegative, got {c}"
            )))
        }
    }
}

/// Orthonormal bases of the four fundamental subspaces of a matrix, split at
/// the numerical rank.
///
/// For an `m x n` matrix of rank `r`:
/// * `range_basis`: `m x r`, spans the column space,
/// * `corange_basis`: `n x r`, spans the row space (range of the adjoint),
/// * `kernel_basis`: `n x (n - r)`, spans the null space,
/// * `cokernel_basis`: `m x (m - r)`, spans the null space of the adjoint.
#[derive(Clone, Debug)]
pub struct SvdBases {
    pub range_basis: CMatrix,
    pub corange_basis: CMatrix,
    pub kernel_basis: CMatrix,
    pub cokernel_basis: CMatrix,
    pub rank: usize,
    /// All `min(m, n)` singular values, descending.
    pub singular_values: Vec<f64>,
}

/// Sweep cap for the one-sided Jacobi iteration; convergence is quadratic
/// and desk-scale matrices settle in well under ten sweeps.
const JACOBI_MAX_SWEEPS: usize = 64;

/// One-sided Jacobi SVD of a tall or square matrix (`rows >= cols`):
/// returns thin `U` (`rows x cols`), singular values (descending) and full
/// unitary `V` (`cols x cols`).
///
/// nalgebra's own complex SVD is not backward stable near rank deficiency
/// (reconstruction errors around 1e-5 on small shifted-power products, far
/// above machine precision), and every rank decision in this crate runs
/// through the SVD; the decomposition is therefore done here with plane
/// rotations, which keep every step unitary and the result accurate to
/// machine precision.
fn jacobi_svd_tall(
    m: &DMatrix<Complex64>,
) -> Result<(DMatrix<Complex64>, Vec<f64>, DMatrix<Complex64>)> {
    let (rows, cols) = m.shape();
    debug_assert!(rows >= cols, "caller orients the matrix tall");
    let mut a = m.clone();
    let mut v = DMatrix::<Complex64>::identity(cols, cols);

    // Each rotation puts couplings of a few machine epsilons back into
    // already-settled pairs, so demanding exactly epsilon-level
    // orthogonality livelocks; sqrt(rows) epsilons is the usual slack.
    let quiet = f64::EPSILON * (rows as f64).sqrt();
    // A column this far below the matrix norm is pure rounding noise, and
    // noise stays correlated with the live columns (the cosine never
    // decays), so such columns are frozen rather than rotated forever.
    let dead = f64::EPSILON * m.norm();
    let dead2 = dead * dead;
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols.saturating_sub(1) {
            for j in (i + 1)..cols {
                // Hermitian Gram block of the column pair.
                let mut app = 0.0_f64;
                let mut aqq = 0.0_f64;
                let mut apq = Complex64::new(0.0, 0.0);
                for r in 0..rows {
                    let ci = a[(r, i)];
                    let cj = a[(r, j)];
                    app += ci.norm_sqr();
                    aqq += cj.norm_sqr();
                    apq += ci.conj() * cj;
                }
                if app <= dead2 || aqq <= dead2 {
                    continue;
                }
                let off = apq.norm();
                if off <= quiet * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                // Peel the phase off the coupling so the remaining 2x2
                // problem is real symmetric, then rotate it away: the
                // combined unitary is diag(1, e^-i phi) * Givens(c, s).
                let rot = (apq / off).conj();
                let theta = (aqq - app) / (2.0 * off);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let ci = a[(r, i)];
                    let cj = a[(r, j)] * rot;
                    a[(r, i)] = ci * c - cj * s;
                    a[(r, j)] = ci * s + cj * c;
                }
                for r in 0..cols {
                    let vi = v[(r, i)];
                    let vj = v[(r, j)] * rot;
                    v[(r, i)] = vi * c - vj * s;
                    v[(r, j)] = vi * s + vj * c;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Computation("SVD did not converge".into()));
    }

    // Column norms are the singular values; sort them (with their columns)
    // descending.
    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let sorted: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let v_sorted = DMatrix::from_fn(cols, cols, |r, c_| v[(r, order[c_])]);

    let mut u = DMatrix::<Complex64>::zeros(rows, cols);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        if sorted[dst] > dead {
            let inv = Complex64::new(1.0 / sorted[dst], 0.0);
            for r in 0..rows {
                u[(r, dst)] = a[(r, src)] * inv;
            }
        } else {
            // Noise-floor columns point in correlated-noise directions, so
            // normalizing them would break the orthonormality of U.
            missing.push(dst);
        }
    }
    if !missing.is_empty() {
        fill_orthonormal(&mut u, &missing)?;
    }
    Ok((u, sorted, v_sorted))
}

/// Completes the columns listed in `missing` (left empty because their
/// singular values sit at or below the rounding floor) to vectors
/// orthonormal against every other column of `u`, by twice-reorthogonalized
/// projection of coordinate vectors.
fn fill_orthonormal(u: &mut DMatrix<Complex64>, missing: &[usize]) -> Result<()> {
    let rows = u.nrows();
    let floor = 16.0 * f64::EPSILON * rows as f64;
    for &dst in missing {
        // The squared residuals of the coordinate vectors sum to the
        // dimension of the remaining complement, so the best residual has
        // norm at least 1/sqrt(rows); starting from it keeps the
        // reorthogonalization far from cancellation.
        let mut best: Option<(f64, DMatrix<Complex64>)> = None;
        for e in 0..rows {
            let mut candidate = DMatrix::<Complex64>::zeros(rows, 1);
            candidate[(e, 0)] = Complex64::new(1.0, 0.0);
            project_out(u, missing, dst, &mut candidate);
            let norm = candidate.norm();
            if best.as_ref().map_or(true, |(b, _)| norm > *b) {
                best = Some((norm, candidate));
            }
        }
        let Some((norm, mut candidate)) = best else {
            return Err(Error::Computation(
                "could not complete an orthonormal basis".into(),
            ));
        };
        if norm <= floor {
            return Err(Error::Computation(
                "could not complete an orthonormal basis".into(),
            ));
        }
        let inv = Complex64::new(1.0 / norm, 0.0);
        for r in 0..rows {
            candidate[(r, 0)] *= inv;
        }
        project_out(u, missing, dst, &mut candidate);
        let second = candidate.norm();
        let inv = Complex64::new(1.0 / second, 0.0);
        for r in 0..rows {
            u[(r, dst)] = candidate[(r, 0)] * inv;
        }
    }
    Ok(())
}

/// One modified-Gram-Schmidt pass of `candidate` against the columns of
/// `u`, skipping the not-yet-filled slots (`missing` entries at or past
/// `dst`; earlier entries are already filled and must be projected out).
fn project_out(
    u: &DMatrix<Complex64>,
    missing: &[usize],
    dst: usize,
    candidate: &mut DMatrix<Complex64>,
) {
    let rows = u.nrows();
    for j in 0..u.ncols() {
        if missing.contains(&j) && j >= dst {
            continue;
        }
        let overlap: Complex64 = (0..rows)
            .map(|r| u[(r, j)].conj() * candidate[(r, 0)])
            .sum();
        for r in 0..rows {
            let adj = u[(r, j)] * overlap;
            candidate[(r, 0)] -= adj;
        }
    }
}

/// Computes the SVD, sorts singular values descending (permuting the
/// vectors to match) and returns `(u, sigma, v)` with `v` the
/// right-singular-vector matrix (not its adjoint).
fn svd_full(m: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, Vec<f64>, DMatrix<Complex64>)> {
    if m.nrows() >= m.ncols() {
        jacobi_svd_tall(m)
    } else {
        let (u_of_adjoint, s, v_of_adjoint) = jacobi_svd_tall(&m.adjoint())?;
        Ok((v_of_adjoint, s, u_of_adjoint))
    }
}

/// Singular values only, descending.
fn singular_values(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let oriented;
    let tall = if m.nrows() >= m.ncols() {
        m
    } else {
        oriented = m.adjoint();
        &oriented
    };
    jacobi_svd_tall(tall).map(|(_, s, _)| s)
}

/// Orthonormal basis of the orthogonal complement of `span(basis)` in
/// dimension `dim`. `basis` must have orthonormal columns.
fn orthonormal_complement(basis: &DMatrix<Complex64>, dim: usize) -> Result<DMatrix<Complex64>> {
    let r = basis.ncols();
    if r == 0 {
        return Ok(DMatrix::identity(dim, dim));
    }
    if r >= dim {
        return Ok(DMatrix::zeros(dim, 0));
    }
    // Projector onto the complement has eigenvalues 0 and 1; its leading
    // dim - r left singular vectors are the basis we want.
    let proj = DMatrix::identity(dim, dim) - basis * basis.adjoint();
    let (u, s, _) = svd_full(&proj)?;
    if s[dim - r - 1] < 0.5 {
        return Err(Error::Computation(
            "complement projector is not a projector; input basis not orthonormal?".into(),
        ));
    }
    Ok(u.columns(0, dim - r).into_owned())
}

/// Full SVD with rank decision and bases of all four fundamental subspaces.
///
/// Errors with [`Error::Dimension`] on empty input and
/// [`Error::Computation`] if the iteration fails to converge.
pub fn svd_bases(m: &CMatrix, tol: &RankTolerance) -> Result<SvdBases> {
    tol.validate()?;
    if m.is_empty() {
        return Err(Error::Dimension(format!(
            "svd_bases needs a nonempty matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let (rows, cols) = (m.rows(), m.cols());
    let (u, s, v) = svd_full(&m.data)?;
    let sigma_max = s.first().copied().unwrap_or(0.0);
    let thresh = tol.threshold(rows, cols, sigma_max);
    let rank = s.iter().take_while(|&&x| x > thresh).count();

    let range = u.columns(0, rank).into_owned();
    let corange = v.columns(0, rank).into_owned();
    // The thin factors only carry min(rows, cols) columns; complete the
    // deficient side through the complement projector when needed.
    let cokernel = if rows <= cols {
        u.columns(rank, rows - rank).into_owned()
    } else {
        orthonormal_complement(&range, rows)?
    };
    let kernel = if cols <= rows {
        v.columns(rank, cols - rank).into_owned()
    } else {
        orthonormal_complement(&corange, cols)?
    };

    Ok(SvdBases {
        range_basis: CMatrix::wrap(range),
        corange_basis: CMatrix::wrap(corange),
        kernel_basis: CMatrix::wrap(kernel),
        cokernel_basis: CMatrix::wrap(cokernel),
        rank,
        singular_values: s,
    })
}

/// Orthonormal basis of the orthogonal complement of the column span.
/// Columns of `basis` must be orthonormal (as produced by [`svd_bases`]).
pub fn complement_basis(basis: &CMatrix, dim: usize) -> Result<CMatrix> {
    if basis.rows() != dim && basis.cols() > 0 {
        return Err(Error::Dimension(format!(
            "complement in dimension {dim} of a basis with {} rows",
            basis.rows()
        )));
    }
    Ok(CMatrix::wrap(orthonormal_complement(&basis.data, dim)?))
}

/// Moore-Penrose left-inverse `(X'X)^-1 X'` of a full-column-rank matrix,
/// evaluated through the SVD as `V diag(1/sigma) U'`.
///
/// Errors with [`Error::Rank`] when the numerical rank (machine tolerance)
/// falls short of the column count.
pub fn left_inverse(x: &CMatrix) -> Result<CMatrix> {
    if x.cols() == 0 {
        return Ok(CMatrix::zeros(0, x.rows()));
    }
    if x.rows() < x.cols() {
        return Err(Error::Rank {
            rows: x.rows(),
            cols: x.cols(),
            rank: x.rows().min(x.cols()),
        });
    }
    let (u, s, v) = svd_full(&x.data)?;
    let sigma_max = s.first().copied().unwrap_or(0.0);
    let thresh = RankTolerance::Machine.threshold(x.rows(), x.cols(), sigma_max);
    let rank = s.iter().take_while(|&&x| x > thresh).count();
    if rank < x.cols() {
        return Err(Error::Rank {
            rows: x.rows(),
            cols: x.cols(),
            rank,
        });
    }
    let r = x.cols();
    let u1 = u.columns(0, r).into_owned();
    let sinv = DMatrix::from_fn(r, r, |i, j| {
        if i == j {
            Complex64::new(1.0 / s[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(CMatrix::wrap(v * sinv * u1.adjoint()))
}

/// Solves `M * X = RHS` for square `M` by LU with partial pivoting, after an
/// SVD condition check.
///
/// Errors with [`Error::Singular`] (carrying the condition estimate
/// `sigma_max / sigma_min`) when the smallest singular value sits below the
/// machine rank threshold.
pub fn solve(m: &CMatrix, rhs: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "solve needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() != rhs.rows() {
        return Err(Error::Dimension(format!(
            "solve: matrix is {}x{} but right-hand side has {} rows",
            m.rows(),
            m.cols(),
            rhs.rows()
        )));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, rhs.cols()));
    }
    let s = singular_values(&m.data)?;
    let (sigma_max, sigma_min) = (s[0], s[n - 1]);
    let thresh = RankTolerance::Machine.threshold(n, n, sigma_max);
    if sigma_min <= thresh {
        let cond = if sigma_min > 0.0 {
            sigma_max / sigma_min
        } else {
            f64::INFINITY
        };
        return Err(Error::Singular { cond });
    }
    if rhs.cols() == 0 {
        return Ok(CMatrix::zeros(n, 0));
    }
    m.data
        .clone()
        .lu()
        .solve(&rhs.data)
        .map(CMatrix::wrap)
        .ok_or_else(|| Error::Computation("LU solve failed after condition check".into()))
}

/// Inverse via [`solve`] against the identity.
pub(crate) fn inverse(m: &CMatrix) -> Result<CMatrix> {
    solve(m, &CMatrix::identity(m.rows()))
}

/// Right division `B * M^-1`, evaluated as `solve(M', B')'`.
pub(crate) fn right_divide(b: &CMatrix, m: &CMatrix) -> Result<CMatrix> {
    Ok(solve(&m.adjoint(), &b.adjoint())?.adjoint())
}

/// One-norm (max absolute column sum); the scaling estimate for the
/// exponential.
fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Scaling thresholds for the diagonal Pade approximants of orders
// 3, 5, 7, 9, 13 (one-norm of the scaled matrix below which the
// approximant reaches double-precision accuracy).
const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068;
const THETA_13: f64 = 5.371_920_351_148_152;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const PADE_9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Evaluates the order-(3|5|7|9) diagonal Pade approximant of `exp(a)`.
fn pade_low(a: &DMatrix<Complex64>, b: &[f64]) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    let ident = DMatrix::<Complex64>::identity(n, n);
    let a2 = a * a;
    // u = a * (sum of odd coefficients on powers of a2), v = even part.
    let mut u_inner = &ident * Complex64::new(b[1], 0.0);
    let mut v = &ident * Complex64::new(b[0], 0.0);
    let mut a2k = ident.clone();
    for k in 1..=(b.len() - 2) / 2 {
        a2k = &a2k * &a2;
        u_inner += &a2k * Complex64::new(b[2 * k + 1], 0.0);
        v += &a2k * Complex64::new(b[2 * k], 0.0);
    }
    let u = a * u_inner;
    pade_solve(&u, &v)
}

/// Evaluates the order-13 approximant with the factored Horner scheme.
fn pade_13(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let b = &PADE_13;
    let n = a.nrows();
    let ident = DMatrix::<Complex64>::identity(n, n);
    let c = |k: usize| Complex64::new(b[k], 0.0);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u = a
        * (&a6 * (&a6 * c(13) + &a4 * c(11) + &a2 * c(9))
            + &a6 * c(7)
            + &a4 * c(5)
            + &a2 * c(3)
            + &ident * c(1));
    let v = &a6 * (&a6 * c(12) + &a4 * c(10) + &a2 * c(8))
        + &a6 * c(6)
        + &a4 * c(4)
        + &a2 * c(2)
        + &ident * c(0);
    pade_solve(&u, &v)
}

/// Solves `(v - u) r = (v + u)` for the approximant value `r`.
fn pade_solve(u: &DMatrix<Complex64>, v: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    (v - u)
        .lu()
        .solve(&(v + u))
        .ok_or_else(|| Error::Computation("exponential Pade denominator is singular".into()))
}

/// `exp(M t)` by scaling and squaring with diagonal Pade approximants.
///
/// Errors with [`Error::Dimension`] for non-square input and
/// [`Error::Computation`] when `||M t||` is so large the squaring phase
/// overflows.
pub fn matrix_exponential(m: &CMatrix, t: f64) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "matrix exponential of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite time {t}")));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let a = &m.data * Complex64::new(t, 0.0);
    let eta = one_norm(&a);
    if !eta.is_finite() {
        return Err(Error::Computation(format!(
            "exponential overflow: ||M t|| = {eta}"
        )));
    }

    let result = if eta <= THETA_3 {
        pade_low(&a, &PADE_3)?
    } else if eta <= THETA_5 {
        pade_low(&a, &PADE_5)?
    } else if eta <= THETA_7 {
        pade_low(&a, &PADE_7)?
    } else if eta <= THETA_9 {
        pade_low(&a, &PADE_9)?
    } else {
        let s = if eta <= THETA_13 {
            0
        } else {
            (eta / THETA_13).log2().ceil() as i32
        };
        if s > 1022 {
            return Err(Error::Computation(format!(
                "exponential overflow: scaling 2^{s} exceeds range"
            )));
        }
        let scaled = &a * Complex64::new(0.5f64.powi(s), 0.0);
        let mut r = pade_13(&scaled)?;
        for _ in 0..s {
            r = &r * &r;
        }
        r
    };

    CMatrix::validated(result).map_err(|_| {
        Error::Computation("exponential overflow: non-finite entries after squaring".into())
    })
}

/// Largest principal angle (radians) between the column spans of `a` and `b`.
///
/// Spans of different dimensions are maximally apart: the angle is pi/2.
/// Uses the sine formulation `sigma_max((I - Qa Qa') Qb)`, which stays
/// accurate for small angles where the cosine version saturates near
/// `sqrt(eps)`.
pub fn max_principal_angle(a: &CMatrix, b: &CMatrix, tol: &RankTolerance) -> Result<f64> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "principal angle between subspaces of different ambient dimension: {} vs {}",
            a.rows(),
            b.rows()
        )));
    }
    let qa = if a.cols() == 0 {
        CMatrix::zeros(a.rows(), 0)
    } else {
        svd_bases(a, tol)?.range_basis
    };
    let qb = if b.cols() == 0 {
        CMatrix::zeros(b.rows(), 0)
    } else {
        svd_bases(b, tol)?.range_basis
    };
    if qa.cols() != qb.cols() {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    if qa.cols() == 0 {
        return Ok(0.0);
    }
    let residual = &qb - &(&qa * &(&qa.adjoint() * &qb));
    let s = singular_values(&residual.data)?;
    Ok(s.first().copied().unwrap_or(0.0).min(1.0).asin())
}

/// Spectrum signature of a square complex matrix, computed on the 2n x 2n
/// real embedding `[[Re, -Im], [Im, Re]]` so only a real Schur reduction is
/// needed. Returns `eig(M)` together with its conjugates, sorted
/// lexicographically by (re, im): a multiset signature suited to comparing
/// two matrices' spectra, not a plain eigenvalue list.
pub fn embedded_spectrum(m: &CMatrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "spectrum of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut emb = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m.data[(i, j)];
            emb[(i, j)] = z.re;
            emb[(i, j + n)] = -z.im;
            emb[(i + n, j)] = z.im;
            emb[(i + n, j + n)] = z.re;
        }
    }
    let schur = nalgebra::linalg::Schur::try_new(emb, f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Computation("Schur iteration did not converge".into()))?;
    let eig: DVector<Complex64> = schur.complex_eigenvalues();
    let mut out: Vec<Complex64> = eig.iter().copied().collect();
    out.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .expect("finite eigenvalues")
            .then(a.im.partial_cmp(&b.im).expect("finite eigenvalues"))
    });
    Ok(out)
}
