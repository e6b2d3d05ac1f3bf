//! Order and index reduction of the shifted system.
//!
//! With `F = (A - lambda E)^-1 E`, compressing the unforced dynamics onto a
//! basis of `range(F^k)` (or, dually, expressing them through `Y' x` for a
//! basis `Y` of `range((F')^k)`) yields an equivalent system of order
//! `rank(F^k)` whose shifted matrix is `X^+ F X` (resp. `Y' F Y^+'`) and
//! whose index drops to `max(k* - k, 0)`. At `k >= k*` the reduced matrix is
//! nonsingular and the system becomes an ordinary ODE `z' = A~ z` with
//! `A~ = F~^-1 + lambda I`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{
    inverse, left_inverse, max_principal_angle, right_divide, solve, svd_bases, CMatrix,
    RankTolerance, SUBSPACE_ANGLE_TOL,
};
use crate::model::{compress_ranges, ShiftedSystem};

/// Which side of the compression a reduction used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// State is constrained to `range(F^k)`: `x = lift z`, `z = proj x`.
    Range,
    /// State is observed through `range((F')^k)`: `z = Y' x`.
    Corange,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Range => write!(f, "range"),
            Side::Corange => write!(f, "corange"),
        }
    }
}

/// Reduced-order shifted system `F~ z' = (I + lambda F~) z` of order
/// `r = rank(F^k)`, together with the maps connecting it to the original
/// state space (`proj * lift = I_r`).
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub f_tilde: CMatrix,
    pub lambda: Complex64,
    /// `n x r`: reduced state to original state.
    pub lift: CMatrix,
    /// `r x n`: original state to reduced state.
    pub proj: CMatrix,
    pub k_used: usize,
    /// Index of the reduced system: `max(k* - k_used, 0)`.
    pub index: usize,
    pub side: Side,
}

/// Ordinary ODE `z' = A~ z` equivalent to the descriptor system on its
/// consistency space; `x = lift z`, `z = proj x`.
#[derive(Clone, Debug)]
pub struct StandardSystem {
    pub a_tilde: CMatrix,
    pub lift: CMatrix,
    pub proj: CMatrix,
}

/// Factorization `M = X Y'` with `X` orthonormal of `rank(M)` columns and
/// `Y = V diag(sigma)`.
#[derive(Clone, Debug)]
pub struct FullRankDecomposition {
    pub x: CMatrix,
    pub y: CMatrix,
    pub rank: usize,
}

/// The cross-basis inverse formulas: explicit left-inverses of `X` and `Y`
/// and both reduced ODE matrices computed from `Y'X` and `Y'FX` alone.
#[derive(Clone, Debug)]
pub struct CrossBasisInverses {
    /// `(Y'X)^-1 Y'`, a left-inverse of X.
    pub x_dagger: CMatrix,
    /// `((Y'X)')^-1 X'`, a left-inverse of Y.
    pub y_dagger: CMatrix,
    /// `(Y'FX)^-1 Y'X + lambda I`: the range-side ODE matrix.
    pub a_tilde_range: CMatrix,
    /// `Y'X (Y'FX)^-1 + lambda I`: the corange-side ODE matrix.
    pub a_tilde_corange: CMatrix,
}

/// Rank-revealing full-rank decomposition `M = X Y'` via the SVD.
pub fn full_rank_decomposition(m: &CMatrix, tol: &RankTolerance) -> Result<FullRankDecomposition> {
    let bases = svd_bases(m, tol)?;
    let r = bases.rank;
    let y = CMatrix::from_fn(m.cols(), r, |i, j| {
        bases.corange_basis.get(i, j) * bases.singular_values[j]
    })
    .expect("finite SVD factors");
    Ok(FullRankDecomposition {
        x: bases.range_basis,
        y,
        rank: r,
    })
}

/// Checks a user-supplied basis against the computed orthonormal one:
/// same shape, full column rank, and same span up to [`SUBSPACE_ANGLE_TOL`].
pub(crate) fn validate_basis(
    user: &CMatrix,
    reference: &CMatrix,
    what: &str,
    tol: &RankTolerance,
) -> Result<()> {
    if user.rows() != reference.rows() || user.cols() != reference.cols() {
        return Err(Error::BasisMismatch(format!(
            "{what} must be {}x{}, got {}x{}",
            reference.rows(),
            reference.cols(),
            user.rows(),
            user.cols()
        )));
    }
    let rank = svd_bases(user, tol)?.rank;
    if rank < user.cols() {
        return Err(Error::BasisMismatch(format!(
            "{what} is rank deficient: rank {rank} < {} columns",
            user.cols()
        )));
    }
    let angle = max_principal_angle(user, reference, tol)?;
    if angle > SUBSPACE_ANGLE_TOL {
        return Err(Error::BasisMismatch(format!(
            "{what} spans the wrong subspace: principal angle {angle:.3e}"
        )));
    }
    Ok(())
}

/// Reduces onto a basis of `range(F^k)`: the order-`rank(F^k)` system
/// `F~ z' = (I + lambda F~) z` with `F~ = X^+ F X`, `x = X z`, `z = X^+ x`.
///
/// `x_basis` overrides the computed basis; it must span `range(F^k)`
/// exactly (checked to [`SUBSPACE_ANGLE_TOL`], else
/// [`Error::BasisMismatch`]). Errors [`Error::PureSystem`] when
/// `rank(F^k) = 0` and [`Error::InvalidArgument`] for `k = 0`.
pub fn reduce_via_range(
    shifted: &ShiftedSystem,
    k: usize,
    x_basis: Option<&CMatrix>,
    tol: &RankTolerance,
) -> Result<ReducedSystem> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "reduction power k must be at least 1".into(),
        ));
    }
    let comp = compress_ranges(shifted.f(), k, tol)?;
    if comp.ranks[k] == 0 {
        return Err(Error::PureSystem { k });
    }
    let x = match x_basis {
        Some(user) => {
            validate_basis(user, &comp.bases[k], "range basis", tol)?;
            user.clone()
        }
        None => comp.bases[k].clone(),
    };
    let x_dagger = left_inverse(&x)?;
    let f_tilde = &(&x_dagger * shifted.f()) * &x;
    Ok(ReducedSystem {
        f_tilde,
        lambda: shifted.lambda(),
        lift: x,
        proj: x_dagger,
        k_used: k,
        index: comp.k_star.saturating_sub(k),
        side: Side::Range,
    })
}

/// Reduces through the corange: `z = Y' x` satisfies
/// `F~ z' = (I + lambda F~) z` with `F~ = Y' F Y^+'` for any full-rank `Y`
/// spanning `range((F')^k)`.
///
/// The returned lift `H` satisfies `Y' H = I_r`; it maps into the
/// consistency space whenever `k >= k*` (where it is the unique such lift
/// and reproduces original solutions), and otherwise extends the
/// consistency-compatible lift by directions orthogonal to `range(Y)`.
pub fn reduce_via_corange(
    shifted: &ShiftedSystem,
    k: usize,
    y_basis: Option<&CMatrix>,
    tol: &RankTolerance,
) -> Result<ReducedSystem> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "reduction power k must be at least 1".into(),
        ));
    }
    let comp = compress_ranges(shifted.f(), k, tol)?;
    let r = comp.ranks[k];
    if r == 0 {
        return Err(Error::PureSystem { k });
    }
    let adj_comp = compress_ranges(&shifted.f().adjoint(), k, tol)?;
    if adj_comp.ranks[k] != r {
        return Err(Error::Computation(format!(
            "rank of the adjoint power ({}) disagrees with rank of F^{k} ({r})",
            adj_comp.ranks[k]
        )));
    }
    let y = match y_basis {
        Some(user) => {
            validate_basis(user, &adj_comp.bases[k], "corange basis", tol)?;
            user.clone()
        }
        None => adj_comp.bases[k].clone(),
    };
    let y_dagger = left_inverse(&y)?;
    let f_tilde = &(&y.adjoint() * shifted.f()) * &y_dagger.adjoint();

    // Lift with Y'H = I_r built from the Moore-Penrose lift plus a
    // kernel-side correction pulling it toward the consistency space:
    // H = Y^+' + (I - Y Y^+)(C - Y^+' S) S^+ with S = Y'C. For k >= k* this
    // collapses to C (Y'C)^-1, the unique lift into the consistency space.
    let c = &comp.bases[comp.k_star];
    let y_mp_lift = y_dagger.adjoint();
    let s = &y.adjoint() * c;
    let s_dagger = left_inverse(&s)?;
    let residual = &(c - &(&y_mp_lift * &s)) * &s_dagger;
    let correction = &residual - &(&y_mp_lift * &(&y.adjoint() * &residual));
    let lift = &y_mp_lift + &correction;

    Ok(ReducedSystem {
        f_tilde,
        lambda: shifted.lambda(),
        lift,
        proj: y.adjoint(),
        k_used: k,
        index: comp.k_star.saturating_sub(k),
        side: Side::Corange,
    })
}

/// Collapses the descriptor system to the ordinary ODE `z' = A~ z` on its
/// consistency space, using `k = k*` and the requested side.
///
/// Range side: `A~ = (X^+ F X)^-1 + lambda I`, lift `X`, proj `X^+`.
/// Corange side: `A~ = (Y' F Y^+')^-1 + lambda I`, proj `Y'`, lift
/// `C (Y'C)^-1` (the transpose of the cross-basis left-inverse of `Y`; the
/// unique lift mapping into the consistency space).
///
/// Errors [`Error::PureSystem`] when `F` is nilpotent.
pub fn to_standard(
    shifted: &ShiftedSystem,
    side: Side,
    tol: &RankTolerance,
) -> Result<StandardSystem> {
    let comp = compress_ranges(shifted.f(), 0, tol)?;
    let k = comp.k_star;
    let r = comp.ranks[k];
    if r == 0 {
        return Err(Error::PureSystem { k });
    }
    let lambda_eye = CMatrix::identity(r).scale(shifted.lambda());
    match side {
        Side::Range => {
            let x = comp.bases[k].clone();
            let x_dagger = left_inverse(&x)?;
            let f_tilde = &(&x_dagger * shifted.f()) * &x;
            let a_tilde = &inverse(&f_tilde)? + &lambda_eye;
            Ok(StandardSystem {
                a_tilde,
                lift: x,
                proj: x_dagger,
            })
        }
        Side::Corange => {
            let adj_comp = compress_ranges(&shifted.f().adjoint(), k.max(1), tol)?;
            let y = adj_comp.bases[k].clone();
            let y_dagger = left_inverse(&y)?;
            let f_tilde = &(&y.adjoint() * shifted.f()) * &y_dagger.adjoint();
            let a_tilde = &inverse(&f_tilde)? + &lambda_eye;
            let c = &comp.bases[k];
            let s = &y.adjoint() * c;
            let lift = right_divide(c, &s)?;
            Ok(StandardSystem {
                a_tilde,
                lift,
                proj: y.adjoint(),
            })
        }
    }
}

/// Cross-basis inverse formulas for full-rank `X` spanning `range(F^k)` and
/// `Y` spanning `range((F')^k)` with `k >= k*`: left-inverses of both bases
/// and the two reduced ODE matrices, all through `Y'X` and `Y'FX`.
///
/// Errors [`Error::BasisMismatch`] when `Y'X` or `Y'FX` is singular, which
/// signals `k < k*` or bases spanning the wrong subspaces.
pub fn cross_basis_formulas(
    f: &CMatrix,
    x: &CMatrix,
    y: &CMatrix,
    lambda: Complex64,
) -> Result<CrossBasisInverses> {
    if !f.is_square() {
        return Err(Error::Dimension(format!(
            "shifted matrix must be square, got {}x{}",
            f.rows(),
            f.cols()
        )));
    }
    let n = f.rows();
    if x.rows() != n || y.rows() != n || x.cols() != y.cols() || x.cols() == 0 {
        return Err(Error::Dimension(format!(
            "bases must be {n}xr with matching r >= 1, got {}x{} and {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    let s = &y.adjoint() * x;
    let x_dagger = solve(&s, &y.adjoint()).map_err(|e| match e {
        Error::Singular { cond } => Error::BasisMismatch(format!(
            "Y'X is singular (condition estimate {cond:.3e}); k < k* or wrong bases"
        )),
        other => other,
    })?;
    let y_dagger = solve(&s.adjoint(), &x.adjoint()).map_err(|e| match e {
        Error::Singular { cond } => Error::BasisMismatch(format!(
            "X'Y is singular (condition estimate {cond:.3e}); k < k* or wrong bases"
        )),
        other => other,
    })?;
    let sfx = &(&y.adjoint() * f) * x;
    let map_sfx = |e: Error| match e {
        Error::Singular { cond } => Error::BasisMismatch(format!(
            "Y'FX is singular (condition estimate {cond:.3e}); k < k* or wrong bases"
        )),
        other => other,
    };
    let lambda_eye = CMatrix::identity(x.cols()).scale(lambda);
    let a_tilde_range = &solve(&sfx, &s).map_err(map_sfx)? + &lambda_eye;
    let a_tilde_corange = &right_divide(&s, &sfx).map_err(map_sfx)? + &lambda_eye;
    Ok(CrossBasisInverses {
        x_dagger,
        y_dagger,
        a_tilde_range,
        a_tilde_corange,
    })
}

/// Full-order ODE matrix `A^ = X (Y'FX)^-1 Y' + lambda X (Y'X)^-1 Y'` at
/// `k = k*`: `x' = A^ x` reproduces descriptor solutions for initial states
/// in the consistency space (and `A^ = E^-1 A` when `E` is nonsingular).
pub fn full_order_standard(shifted: &ShiftedSystem, tol: &RankTolerance) -> Result<CMatrix> {
    let comp = compress_ranges(shifted.f(), 0, tol)?;
    let k = comp.k_star;
    if comp.ranks[k] == 0 {
        return Err(Error::PureSystem { k });
    }
    let x = &comp.bases[k];
    let adj_comp = compress_ranges(&shifted.f().adjoint(), k.max(1), tol)?;
    let y = &adj_comp.bases[k];
    let sfx = &(&y.adjoint() * shifted.f()) * x;
    let s = &y.adjoint() * x;
    let dynamic = x * &solve(&sfx, &y.adjoint())?;
    let shift_back = x * &solve(&s, &y.adjoint())?;
    Ok(&dynamic + &shift_back.scale(shifted.lambda()))
}
