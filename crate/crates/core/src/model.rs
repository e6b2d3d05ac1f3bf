//! Descriptor systems `E x' = A x + B u` and their pencil analysis.
//!
//! A pencil `(E, A)` is regular when `det(s E - A)` is not identically zero;
//! then some shift `lambda` makes `A - lambda E` nonsingular and the whole
//! theory runs on the shifted matrix `F = (A - lambda E)^-1 E`. The system's
//! index is the smallest `k` at which `rank(F^(k+1)) = rank(F^k)`, and the
//! consistency space (initial states admitting a classical solution) is
//! `range(F^k*)`. Powers of `F` are never formed here: ranks and bases come
//! from iterated range compression `Q_(j+1) = orth(F Q_j)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{solve, svd_bases, CMatrix, RankTolerance};

/// Linear constant-coefficient descriptor system `E x' = A x + B u`.
///
/// `E` and `A` are square of the same order `n >= 1`; `B` is optional
/// (`n x m`). Nothing about regularity is assumed at construction.
#[derive(Clone, Debug)]
pub struct DescriptorSystem {
    e: CMatrix,
    a: CMatrix,
    b: Option<CMatrix>,
}

impl DescriptorSystem {
    pub fn new(e: CMatrix, a: CMatrix, b: Option<CMatrix>) -> Result<Self> {
        if !e.is_square() || !a.is_square() || e.rows() != a.rows() {
            return Err(Error::Dimension(format!(
                "E is {}x{}, A is {}x{}; both must be square of the same order",
                e.rows(),
                e.cols(),
                a.rows(),
                a.cols()
            )));
        }
        if e.rows() == 0 {
            return Err(Error::Dimension("system order must be at least 1".into()));
        }
        if let Some(b) = &b {
            if b.rows() != e.rows() {
                return Err(Error::Dimension(format!(
                    "B has {} rows, system order is {}",
                    b.rows(),
                    e.rows()
                )));
            }
        }
        Ok(DescriptorSystem { e, a, b })
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.e.rows()
    }

    /// Input dimension; 0 when there is no B.
    pub fn m(&self) -> usize {
        self.b.as_ref().map_or(0, CMatrix::cols)
    }

    pub fn e(&self) -> &CMatrix {
        &self.e
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> Option<&CMatrix> {
        self.b.as_ref()
    }
}

/// The system rewritten as `F x' = (I + lambda F) x + G u` with
/// `F = (A - lambda E)^-1 E` and `G = (A - lambda E)^-1 B`: an equivalent
/// description whose single matrix `F` carries the index and subspace
/// structure.
#[derive(Clone, Debug)]
pub struct ShiftedSystem {
    lambda: Complex64,
    f: CMatrix,
    g: Option<CMatrix>,
}

impl ShiftedSystem {
    /// Assembles a shifted system directly. `f` must be square; `g`, when
    /// present, must have matching row count.
    pub fn from_parts(lambda: Complex64, f: CMatrix, g: Option<CMatrix>) -> Result<Self> {
        if !f.is_square() {
            return Err(Error::Dimension(format!(
                "shifted matrix must be square, got {}x{}",
                f.rows(),
                f.cols()
            )));
        }
        if let Some(g) = &g {
            if g.rows() != f.rows() {
                return Err(Error::Dimension(format!(
                    "G has {} rows, F is {}x{}",
                    g.rows(),
                    f.rows(),
                    f.cols()
                )));
            }
        }
        Ok(ShiftedSystem { lambda, f, g })
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn f(&self) -> &CMatrix {
        &self.f
    }

    pub fn g(&self) -> Option<&CMatrix> {
        self.g.as_ref()
    }

    pub fn n(&self) -> usize {
        self.f.rows()
    }
}

/// Outcome of [`analyze`]: index, rank sequence and consistency dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexReport {
    /// System index: smallest k with rank(F^(k+1)) = rank(F^k).
    pub k_star: usize,
    /// rank(F^j) for j = 0 ..= k_star + 1; stabilizes at position k_star.
    pub rank_sequence: Vec<usize>,
    /// dim range(F^k_star) = rank_sequence[k_star].
    pub consistency_dim: usize,
    /// True when the consistency space is trivial (F nilpotent): the only
    /// unforced solution is x = 0.
    pub is_pure: bool,
    /// Shift that made `A - lambda E` nonsingular.
    pub lambda: Complex64,
}

/// Probes regularity of the pencil and returns a shift `lambda` with
/// `A - lambda E` nonsingular.
///
/// Tries 0 first (and prefers it when A is nonsingular, keeping real data
/// real), then `n + 1` points on the circle of radius
/// `1 + ||E||_F / (1 + ||A||_F)`, returning the candidate maximizing the
/// smallest singular value. `det(sE - A)` is a polynomial of degree at most
/// `n`, so for a regular pencil it cannot vanish at all `n + 2` candidates;
/// if every candidate fails the pencil is singular: [`Error::NotRegular`].
pub fn check_regularity(sys: &DescriptorSystem, tol: &RankTolerance) -> Result<Complex64> {
    let n = sys.n();
    let rho = 1.0 + sys.e.norm() / (1.0 + sys.a.norm());
    let mut candidates = vec![Complex64::new(0.0, 0.0)];
    for j in 0..=n {
        let phase = 2.0 * std::f64::consts::PI * j as f64 / (n + 1) as f64;
        candidates.push(Complex64::from_polar(rho, phase));
    }

    let mut best: Option<(f64, Complex64)> = None;
    for (i, &lambda) in candidates.iter().enumerate() {
        let shifted = &sys.a - &sys.e.scale(lambda);
        let bases = svd_bases(&shifted, tol)?;
        if bases.rank < n {
            continue;
        }
        if i == 0 {
            return Ok(lambda);
        }
        let sigma_min = bases.singular_values[n - 1];
        if best.is_none_or(|(s, _)| sigma_min > s) {
            best = Some((sigma_min, lambda));
        }
    }
    best.map(|(_, lambda)| lambda).ok_or(Error::NotRegular {
        tried: candidates.len(),
    })
}

/// Forms `F = (A - lambda E)^-1 E` and `G = (A - lambda E)^-1 B`.
///
/// Propagates [`Error::Singular`] when `A - lambda E` is singular at the
/// given shift.
pub fn shift(sys: &DescriptorSystem, lambda: Complex64) -> Result<ShiftedSystem> {
    if !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite shift {lambda}")));
    }
    let m = &sys.a - &sys.e.scale(lambda);
    let f = solve(&m, &sys.e)?;
    let g = match &sys.b {
        Some(b) => Some(solve(&m, b)?),
        None => None,
    };
    Ok(ShiftedSystem { lambda, f, g })
}

/// Rank sequence of the powers of `F`, computed without forming powers:
/// `bases[j]` is an orthonormal basis of `range(F^j)` obtained by
/// compressing `F * bases[j-1]`, and `ranks[j]` its column count.
pub(crate) struct RangeCompression {
    /// ranks[j] = rank(F^j), for j = 0 ..= max(k_star + 1, min_steps).
    pub ranks: Vec<usize>,
    /// bases[j]: orthonormal basis of range(F^j); bases[0] = I.
    pub bases: Vec<CMatrix>,
    /// Smallest j with ranks[j + 1] = ranks[j].
    pub k_star: usize,
}

pub(crate) fn compress_ranges(
    f: &CMatrix,
    min_steps: usize,
    tol: &RankTolerance,
) -> Result<RangeCompression> {
    if !f.is_square() {
        return Err(Error::Dimension(format!(
            "index analysis needs a square matrix, got {}x{}",
            f.rows(),
            f.cols()
        )));
    }
    let n = f.rows();
    let mut ranks = vec![n];
    let mut bases = vec![CMatrix::identity(n)];
    let mut k_star: Option<usize> = None;
    // Every compressed product F * bases[j] has sigma_max <= sigma_max(F)
    // because bases[j] is orthonormal, so rank decisions for all steps are
    // anchored to sigma_max(F). A per-step relative threshold would read a
    // numerically zero product (entries ~ eps * sigma_max(F)) as full rank
    // and the rank sequence would never reach zero.
    let mut step_tol: Option<RankTolerance> = None;
    let mut j = 0;
    loop {
        let prev_rank = ranks[j];
        let (rank, basis) = if prev_rank == 0 {
            (0, CMatrix::zeros(n, 0))
        } else {
            let effective = step_tol.as_ref().unwrap_or(tol);
            let compressed = svd_bases(&(f * &bases[j]), effective)?;
            if step_tol.is_none() {
                let sigma_ref = compressed.singular_values.first().copied().unwrap_or(0.0);
                step_tol = Some(RankTolerance::Absolute(tol.threshold(n, n, sigma_ref)));
            }
            (compressed.rank, compressed.range_basis)
        };
        ranks.push(rank);
        bases.push(basis);
        if rank == prev_rank && k_star.is_none() {
            k_star = Some(j);
        }
        j += 1;
        if let Some(k) = k_star {
            if j > k && j >= min_steps {
                break;
            }
        }
        // The rank sequence is nonincreasing by construction, so it must
        // stabilize within n steps; anything else is a tolerance pathology.
        if j > n + min_steps + 1 {
            return Err(Error::Computation("rank sequence did not stabilize".into()));
        }
    }
    Ok(RangeCompression {
        ranks,
        bases,
        k_star: k_star.expect("loop exits only once k_star is set"),
    })
}

/// Rank-revealing factorization `F^k = Q * Zt` with `Q` orthonormal
/// (`n x rank(F^k)`), accumulated one compressed factor per power so the
/// explicit product `F^k` is never formed. `range(Zt') = range((F')^k)`.
pub(crate) struct PowerFactorization {
    pub q: CMatrix,
    pub zt: CMatrix,
    /// ranks[j] = rank(F^j) for j = 0..=k.
    pub ranks: Vec<usize>,
}

pub(crate) fn power_factorization(
    f: &CMatrix,
    k: usize,
    tol: &RankTolerance,
) -> Result<PowerFactorization> {
    let n = f.rows();
    let mut q = CMatrix::identity(n);
    let mut zt = CMatrix::identity(n);
    let mut ranks = vec![n];
    // Same anchoring as in compress_ranges: each factor F * q has
    // sigma_max <= sigma_max(F), so later steps use the absolute threshold
    // derived from the first one.
    let mut step_tol: Option<RankTolerance> = None;
    for _ in 0..k {
        if q.cols() == 0 {
            ranks.push(0);
            continue;
        }
        let effective = step_tol.as_ref().unwrap_or(tol);
        let step = svd_bases(&(f * &q), effective)?;
        if step_tol.is_none() {
            let sigma_ref = step.singular_values.first().copied().unwrap_or(0.0);
            step_tol = Some(RankTolerance::Absolute(tol.threshold(n, n, sigma_ref)));
        }
        let r = step.rank;
        if r == 0 {
            q = CMatrix::zeros(n, 0);
            zt = CMatrix::zeros(0, n);
            ranks.push(0);
            continue;
        }
        // F * q = U1 Sigma V1' (numerically), so the new right factor is
        // diag(sigma) V1' times the old one.
        let v1 = &step.corange_basis;
        let sigma_vt = CMatrix::from_fn(r, v1.rows(), |i, j| {
            step.corange_basis.get(j, i).conj() * step.singular_values[i]
        })
        .expect("finite SVD factors");
        q = step.range_basis;
        zt = &sigma_vt * &zt;
        ranks.push(r);
    }
    Ok(PowerFactorization { q, zt, ranks })
}

/// Index of a square matrix: the smallest `k` with
/// `rank(F^(k+1)) = rank(F^k)`.
pub fn matrix_index(f: &CMatrix, tol: &RankTolerance) -> Result<usize> {
    Ok(compress_ranges(f, 0, tol)?.k_star)
}

/// Full pencil analysis with an explicit shift, or automatic selection when
/// `lambda` is `None`.
pub fn analyze_with(
    sys: &DescriptorSystem,
    lambda: Option<Complex64>,
    tol: &RankTolerance,
) -> Result<IndexReport> {
    let lambda = match lambda {
        Some(l) => l,
        None => check_regularity(sys, tol)?,
    };
    let shifted = shift(sys, lambda)?;
    let comp = compress_ranges(&shifted.f, 0, tol)?;
    let consistency_dim = comp.ranks[comp.k_star];
    Ok(IndexReport {
        k_star: comp.k_star,
        rank_sequence: comp.ranks,
        consistency_dim,
        is_pure: consistency_dim == 0,
        lambda,
    })
}

/// Full pencil analysis: regularity probe, shift, index, rank sequence and
/// consistency dimension.
pub fn analyze(sys: &DescriptorSystem, tol: &RankTolerance) -> Result<IndexReport> {
    analyze_with(sys, None, tol)
}

/// Orthonormal basis of the consistency space `range(F^k*)`; `n x 0` for a
/// pure system.
pub fn consistency_space(sys: &DescriptorSystem, tol: &RankTolerance) -> Result<CMatrix> {
    let lambda = check_regularity(sys, tol)?;
    let shifted = shift(sys, lambda)?;
    let comp = compress_ranges(&shifted.f, 0, tol)?;
    Ok(comp.bases[comp.k_star].clone())
}
