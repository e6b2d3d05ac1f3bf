//! Quasi-Weierstrass decoupling: slow ODE plus nilpotent fast chain.
//!
//! For a regular system with singular `E`, pick `k >= k*` and split the
//! state space along four bases: `X` spanning `range(F^k)`, `Y` spanning
//! `range((F')^k)`, `V` spanning `ker(F^k)` and `W` spanning `ker((F')^k)`.
//! Then `[Y W]` is invertible with inverse `[(X'Y)^-1 X'; (V'W)^-1 V']`, and
//! `z1 = Y'x`, `z2 = W'x` evolve independently:
//!
//! * slow: `z1' = A~ z1 + B1~ u` with `A~ = (Y'F Y^+')^-1 + lambda I`,
//! * fast: `N~ z2' = z2 + B2~ u` with `N~ = (I + lambda N)^-1 N` nilpotent,
//!   `N = W'F W^+'`.
//!
//! The state reassembles as `x = X (Y'X)^-1 z1 + V (W'V)^-1 z2`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{
    complement_basis, inverse, left_inverse, right_divide, solve, CMatrix, RankTolerance,
};
use crate::model::{check_regularity, compress_ranges, shift, DescriptorSystem, ShiftedSystem};
use crate::reduction::validate_basis;

/// Bases of the four fundamental subspaces of `F^k` (all orthonormal when
/// produced by [`four_bases`]; user-supplied ones only need full column
/// rank and the right spans).
#[derive(Clone, Debug)]
pub struct FourBases {
    /// `n x r`: spans `range(F^k)`.
    pub x: CMatrix,
    /// `n x r`: spans `range((F')^k)`.
    pub y: CMatrix,
    /// `n x (n - r)`: spans `ker(F^k)`.
    pub v: CMatrix,
    /// `n x (n - r)`: spans `ker((F')^k)`.
    pub w: CMatrix,
    /// Power the bases were taken at (`k >= k*`).
    pub k: usize,
}

/// Reduced slow dynamics `F~ z1' = (I + lambda F~) z1 + G1~ u`, plus the
/// resolved ODE form when `F~` is nonsingular (guaranteed for `k >= k*`).
#[derive(Clone, Debug)]
pub struct SlowSubsystem {
    /// `Y'F Y^+'`.
    pub f_tilde: CMatrix,
    /// `Y'G`.
    pub g1_tilde: CMatrix,
    pub standard: Option<SlowStandard>,
}

/// `z1' = A~ z1 + B1~ u` with `A~ = F~^-1 + lambda I`, `B1~ = F~^-1 G1~`.
#[derive(Clone, Debug)]
pub struct SlowStandard {
    pub a_tilde: CMatrix,
    pub b1_tilde: CMatrix,
}

/// Fast dynamics `N~ z2' = z2 + B2~ u` with `N~` nilpotent: the solution is
/// an algebraic chain of input derivatives, not an evolution.
#[derive(Clone, Debug)]
pub struct FastSubsystem {
    /// `(I + lambda N)^-1 N`, nilpotent with `N~^k = 0`.
    pub n_tilde: CMatrix,
    /// `(I + lambda N)^-1 W'G`.
    pub b2_tilde: CMatrix,
}

/// The full decoupled form plus the maps in and out of original
/// coordinates: `x = lift1 z1 + lift2 z2`, `z1 = proj1 x`, `z2 = proj2 x`,
/// and `lift1 proj1 + lift2 proj2 = I`.
#[derive(Clone, Debug)]
pub struct QuasiWeierstrass {
    pub a_tilde: CMatrix,
    pub b1_tilde: CMatrix,
    pub n_tilde: CMatrix,
    pub b2_tilde: CMatrix,
    /// `X (Y'X)^-1`, `n x r`.
    pub lift1: CMatrix,
    /// `V (W'V)^-1`, `n x (n - r)`.
    pub lift2: CMatrix,
    /// `Y'`.
    pub proj1: CMatrix,
    /// `W'`.
    pub proj2: CMatrix,
    /// `N~^k_nilpotent = 0`.
    pub k_nilpotent: usize,
    pub lambda: Complex64,
}

impl QuasiWeierstrass {
    /// Slow dimension `r` (consistency dimension).
    pub fn slow_dim(&self) -> usize {
        self.a_tilde.rows()
    }

    /// Fast dimension `n - r`.
    pub fn fast_dim(&self) -> usize {
        self.n_tilde.rows()
    }

    pub fn n(&self) -> usize {
        self.lift1.rows()
    }

    pub fn m(&self) -> usize {
        self.b1_tilde.cols()
    }
}

/// Computes orthonormal bases of the four fundamental subspaces of `F^k`.
///
/// Requires `1 <= k` and `k >= k*` ([`Error::InvalidArgument`] otherwise).
/// Errors [`Error::PureSystem`] when `F` is nilpotent (no slow part) and
/// [`Error::NoFastPart`] when `F` is nonsingular (no kernel to split off).
pub fn four_bases(f: &CMatrix, k: usize, tol: &RankTolerance) -> Result<FourBases> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "decoupling power k must be at least 1".into(),
        ));
    }
    let comp = compress_ranges(f, k, tol)?;
    if k < comp.k_star {
        return Err(Error::InvalidArgument(format!(
            "k = {k} is below the index {}; the kernel splitting needs k >= index",
            comp.k_star
        )));
    }
    let n = f.rows();
    let r = comp.ranks[k];
    if r == 0 {
        return Err(Error::PureSystem { k });
    }
    if r == n {
        return Err(Error::NoFastPart(
            "F is nonsingular, the state has no algebraic part".into(),
        ));
    }
    let adj_comp = compress_ranges(&f.adjoint(), k, tol)?;
    if adj_comp.ranks[k] != r {
        return Err(Error::Computation(format!(
            "rank of the adjoint power ({}) disagrees with rank of F^{k} ({r})",
            adj_comp.ranks[k]
        )));
    }
    let x = comp.bases[k].clone();
    let y = adj_comp.bases[k].clone();
    // Orthogonal complements: range((F')^k)^perp = ker(F^k) and
    // range(F^k)^perp = ker((F')^k).
    let v = complement_basis(&y, n)?;
    let w = complement_basis(&x, n)?;
    Ok(FourBases { x, y, v, w, k })
}

/// Slow subsystem through `z1 = Y'x`. Needs the input matrix `G`
/// ([`Error::NoInput`] otherwise; systems without inputs go through
/// [`qw_decompose`], which supplies a zero-width `G`).
///
/// `standard` is `None` exactly when `Y'F Y^+'` is singular, which happens
/// iff the bases were taken at `k < k*`.
pub fn slow_subsystem(shifted: &ShiftedSystem, bases: &FourBases) -> Result<SlowSubsystem> {
    let g = shifted
        .g()
        .ok_or_else(|| Error::NoInput("slow subsystem needs G = (A - lambda E)^-1 B".into()))?;
    let y = &bases.y;
    let y_dagger = left_inverse(y)?;
    let f_tilde = &(&y.adjoint() * shifted.f()) * &y_dagger.adjoint();
    let g1_tilde = &y.adjoint() * g;
    let standard = match inverse(&f_tilde) {
        Ok(f_inv) => {
            let lambda_eye = CMatrix::identity(f_tilde.rows()).scale(shifted.lambda());
            Some(SlowStandard {
                a_tilde: &f_inv + &lambda_eye,
                b1_tilde: solve(&f_tilde, &g1_tilde)?,
            })
        }
        Err(Error::Singular { .. }) => None,
        Err(other) => return Err(other),
    };
    Ok(SlowSubsystem {
        f_tilde,
        g1_tilde,
        standard,
    })
}

/// Fast subsystem through `z2 = W'x`. Verifies the nilpotency postcondition
/// `N~^k = 0` (within `1e-10`, relative to `max(1, ||N~||^k)`), erroring
/// [`Error::NotNilpotent`] when it fails, which signals bases that do not
/// span the claimed kernels.
pub fn fast_subsystem(shifted: &ShiftedSystem, bases: &FourBases) -> Result<FastSubsystem> {
    let g = shifted
        .g()
        .ok_or_else(|| Error::NoInput("fast subsystem needs G = (A - lambda E)^-1 B".into()))?;
    if bases.w.cols() == 0 {
        return Err(Error::NoFastPart(
            "kernel bases are empty; F is nonsingular".into(),
        ));
    }
    let w = &bases.w;
    let w_dagger = left_inverse(w)?;
    let n_mat = &(&w.adjoint() * shifted.f()) * &w_dagger.adjoint();
    // I + lambda N is invertible because N is nilpotent (unit eigenvalues).
    let shifted_eye = &CMatrix::identity(n_mat.rows()) + &n_mat.scale(shifted.lambda());
    let n_tilde = solve(&shifted_eye, &n_mat)?;
    let b2_tilde = solve(&shifted_eye, &(&w.adjoint() * g))?;

    let mut power = CMatrix::identity(n_tilde.rows());
    for _ in 0..bases.k {
        power = &power * &n_tilde;
    }
    let scale = n_tilde.norm().powi(bases.k as i32).max(1.0);
    if power.norm() > 1e-10 * scale {
        return Err(Error::NotNilpotent {
            power: bases.k,
            norm: power.norm(),
        });
    }
    Ok(FastSubsystem { n_tilde, b2_tilde })
}

/// Assembles the decoupled form from already-validated bases.
fn qw_assemble(shifted: &ShiftedSystem, bases: &FourBases) -> Result<QuasiWeierstrass> {
    let slow = slow_subsystem(shifted, bases)?;
    let standard = slow
        .standard
        .ok_or_else(|| Error::Computation("slow block is singular although k >= index".into()))?;
    let fast = fast_subsystem(shifted, bases)?;
    let lift1 = right_divide(&bases.x, &(&bases.y.adjoint() * &bases.x))?;
    let lift2 = right_divide(&bases.v, &(&bases.w.adjoint() * &bases.v))?;
    Ok(QuasiWeierstrass {
        a_tilde: standard.a_tilde,
        b1_tilde: standard.b1_tilde,
        n_tilde: fast.n_tilde,
        b2_tilde: fast.b2_tilde,
        lift1,
        lift2,
        proj1: bases.y.adjoint(),
        proj2: bases.w.adjoint(),
        k_nilpotent: bases.k,
        lambda: shifted.lambda(),
    })
}

/// Decoupled form from user-supplied bases: each must have full column rank
/// and span the same subspace as the computed one
/// ([`Error::BasisMismatch`] otherwise).
pub fn qw_from_bases(
    shifted: &ShiftedSystem,
    bases: &FourBases,
    tol: &RankTolerance,
) -> Result<QuasiWeierstrass> {
    let reference = four_bases(shifted.f(), bases.k, tol)?;
    validate_basis(&bases.x, &reference.x, "range basis X", tol)?;
    validate_basis(&bases.y, &reference.y, "corange basis Y", tol)?;
    validate_basis(&bases.v, &reference.v, "kernel basis V", tol)?;
    validate_basis(&bases.w, &reference.w, "cokernel basis W", tol)?;
    qw_assemble(shifted, bases)
}

/// Full decomposition of a descriptor system: picks a shift when `lambda`
/// is `None` (or validates the given one), uses `k = k*` when `k` is `None`,
/// and treats an absent `B` as a zero-width input.
///
/// Errors: [`Error::NotRegular`] / [`Error::Singular`] for bad pencils or
/// shifts, [`Error::NoFastPart`] when `E` is nonsingular,
/// [`Error::PureSystem`] for nilpotent `F`, [`Error::InvalidArgument`] for
/// `k < k*`.
pub fn qw_decompose(
    sys: &DescriptorSystem,
    lambda: Option<Complex64>,
    k: Option<usize>,
    tol: &RankTolerance,
) -> Result<QuasiWeierstrass> {
    let lambda = match lambda {
        Some(l) => l,
        None => check_regularity(sys, tol)?,
    };
    let shifted = shift(sys, lambda)?;
    let shifted = match shifted.g() {
        Some(_) => shifted,
        None => ShiftedSystem::from_parts(
            lambda,
            shifted.f().clone(),
            Some(CMatrix::zeros(sys.n(), 0)),
        )?,
    };
    let k_star = compress_ranges(shifted.f(), 0, tol)?.k_star;
    if k_star == 0 {
        return Err(Error::NoFastPart(
            "E is nonsingular; the system is already an ODE".into(),
        ));
    }
    let k = k.unwrap_or(k_star);
    let bases = four_bases(shifted.f(), k, tol)?;
    qw_assemble(&shifted, &bases)
}

/// Reassembles original coordinates: `x = lift1 z1 + lift2 z2`. Accepts
/// column batches; `z1` and `z2` must have `slow_dim` and `fast_dim` rows
/// and matching column counts.
pub fn qw_reconstruct(qw: &QuasiWeierstrass, z1: &CMatrix, z2: &CMatrix) -> Result<CMatrix> {
    if z1.rows() != qw.slow_dim() || z2.rows() != qw.fast_dim() || z1.cols() != z2.cols() {
        return Err(Error::Dimension(format!(
            "expected z1 with {} rows and z2 with {} rows and equal column counts, \
             got {}x{} and {}x{}",
            qw.slow_dim(),
            qw.fast_dim(),
            z1.rows(),
            z1.cols(),
            z2.rows(),
            z2.cols()
        )));
    }
    Ok(&(&qw.lift1 * z1) + &(&qw.lift2 * z2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::matrix::max_principal_angle;

    const TOL: RankTolerance = RankTolerance::Machine;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zero() -> Complex64 {
        c(0.0, 0.0)
    }

    fn forced_shifted() -> ShiftedSystem {
        shift(&gallery::forced(), zero()).unwrap()
    }

    /// The printed full-column-rank bases of the worked example (note W is
    /// not orthonormal).
    fn printed_bases() -> FourBases {
        FourBases {
            x: CMatrix::real_column(&[0.0, 1.0, 1.0]).unwrap(),
            y: CMatrix::real_column(&[0.0, 1.0, 0.0]).unwrap(),
            v: CMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            w: CMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap(),
            k: 2,
        }
    }

    #[test]
    fn four_bases_spans_of_sample() {
        let bases = four_bases(&gallery::sample_f(), 2, &TOL).unwrap();
        let printed = printed_bases();
        for (computed, expected, name) in [
            (&bases.x, &printed.x, "x"),
            (&bases.y, &printed.y, "y"),
            (&bases.v, &printed.v, "v"),
            (&bases.w, &printed.w, "w"),
        ] {
            let angle = max_principal_angle(computed, expected, &TOL).unwrap();
            assert!(angle < 1e-12, "{name}: angle {angle}");
        }
        // Mutual orthogonality demanded by the construction.
        assert!((&bases.x.adjoint() * &bases.w).norm() < 1e-13);
        assert!((&bases.y.adjoint() * &bases.v).norm() < 1e-13);
    }

    #[test]
    fn four_bases_validates_power() {
        let f = gallery::sample_f();
        assert!(matches!(
            four_bases(&f, 0, &TOL).unwrap_err(),
            Error::InvalidArgument(_)
        ));
        assert!(matches!(
            four_bases(&f, 1, &TOL).unwrap_err(),
            Error::InvalidArgument(_)
        ));
        assert!(four_bases(&f, 3, &TOL).is_ok());
    }

    #[test]
    fn four_bases_rejects_degenerate_matrices() {
        let nilpotent = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            four_bases(&nilpotent, 2, &TOL).unwrap_err(),
            Error::PureSystem { .. }
        ));
        assert!(matches!(
            four_bases(&CMatrix::identity(3), 1, &TOL).unwrap_err(),
            Error::NoFastPart(_)
        ));
    }

    #[test]
    fn slow_subsystem_printed_values() {
        let slow = slow_subsystem(&forced_shifted(), &printed_bases()).unwrap();
        assert!((slow.f_tilde.get(0, 0) - c(-2.0, 0.0)).norm() < 1e-12);
        assert!(slow.g1_tilde.get(0, 0).norm() < 1e-13);
        let std_part = slow
            .standard
            .expect("k = k* so the slow block is invertible");
        assert!((std_part.a_tilde.get(0, 0) - c(-0.5, 0.0)).norm() < 1e-12);
        assert!(std_part.b1_tilde.get(0, 0).norm() < 1e-13);
    }

    #[test]
    fn fast_subsystem_printed_values() {
        let fast = fast_subsystem(&forced_shifted(), &printed_bases()).unwrap();
        let n_expected = CMatrix::from_real_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
        assert!((&fast.n_tilde - &n_expected).max_abs() < 1e-12);
        let b2_expected = CMatrix::real_column(&[0.5, 0.5]).unwrap();
        assert!((&fast.b2_tilde - &b2_expected).max_abs() < 1e-12);
        // Nilpotency at the declared power.
        let squared = &fast.n_tilde * &fast.n_tilde;
        assert!(squared.norm() < 1e-12);
    }

    #[test]
    fn subsystems_need_an_input_matrix() {
        let unforced = shift(&gallery::unforced(), zero()).unwrap();
        assert!(matches!(
            slow_subsystem(&unforced, &printed_bases()).unwrap_err(),
            Error::NoInput(_)
        ));
        assert!(matches!(
            fast_subsystem(&unforced, &printed_bases()).unwrap_err(),
            Error::NoInput(_)
        ));
    }

    #[test]
    fn qw_from_printed_bases_matches_example() {
        let qw = qw_from_bases(&forced_shifted(), &printed_bases(), &TOL).unwrap();
        assert!((qw.a_tilde.get(0, 0) - c(-0.5, 0.0)).norm() < 1e-12);
        assert!(qw.b1_tilde.get(0, 0).norm() < 1e-13);
        // lift1 = X (Y'X)^-1 = [0, 1, 1]'.
        let lift1_expected = CMatrix::real_column(&[0.0, 1.0, 1.0]).unwrap();
        assert!((&qw.lift1 - &lift1_expected).max_abs() < 1e-12);
        // lift2 = V (W'V)^-1 = [[1, 0], [0, 0], [0, -1]].
        let lift2_expected =
            CMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert!((&qw.lift2 - &lift2_expected).max_abs() < 1e-12);
        assert_eq!(qw.k_nilpotent, 2);
    }

    #[test]
    fn qw_from_bases_rejects_wrong_spans() {
        let mut bases = printed_bases();
        bases.y = CMatrix::real_column(&[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            qw_from_bases(&forced_shifted(), &bases, &TOL).unwrap_err(),
            Error::BasisMismatch(_)
        ));
    }

    #[test]
    fn qw_decompose_resolves_identity() {
        let qw = qw_decompose(&gallery::forced(), None, None, &TOL).unwrap();
        assert_eq!(qw.slow_dim(), 1);
        assert_eq!(qw.fast_dim(), 2);
        assert_eq!(qw.m(), 1);
        // proj/lift pairs are mutually annihilating partial inverses and
        // resolve the identity.
        let eye_slow = &qw.proj1 * &qw.lift1;
        assert!((&eye_slow - &CMatrix::identity(1)).norm() < 1e-12);
        let eye_fast = &qw.proj2 * &qw.lift2;
        assert!((&eye_fast - &CMatrix::identity(2)).norm() < 1e-12);
        assert!((&qw.proj1 * &qw.lift2).norm() < 1e-12);
        assert!((&qw.proj2 * &qw.lift1).norm() < 1e-12);
        let resolution = &(&qw.lift1 * &qw.proj1) + &(&qw.lift2 * &qw.proj2);
        assert!((&resolution - &CMatrix::identity(3)).norm() < 1e-12);
    }

    #[test]
    fn qw_decompose_unforced_has_zero_width_inputs() {
        let qw = qw_decompose(&gallery::unforced(), None, None, &TOL).unwrap();
        assert_eq!(qw.m(), 0);
        assert_eq!(qw.b2_tilde.cols(), 0);
        assert_eq!(qw.b1_tilde.rows(), 1);
    }

    #[test]
    fn qw_decompose_rejects_nonsingular_e() {
        let sys = DescriptorSystem::new(
            CMatrix::identity(2),
            CMatrix::from_real_rows(&[vec![-1.0, 0.0], vec![0.0, -2.0]]).unwrap(),
            None,
        )
        .unwrap();
        assert!(matches!(
            qw_decompose(&sys, None, None, &TOL).unwrap_err(),
            Error::NoFastPart(_)
        ));
    }

    #[test]
    fn qw_decompose_rejects_pure_and_bad_shift() {
        let e = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let pure = DescriptorSystem::new(e, CMatrix::identity(2), None).unwrap();
        assert!(matches!(
            qw_decompose(&pure, None, None, &TOL).unwrap_err(),
            Error::PureSystem { .. }
        ));
        // lambda = 1 makes A - lambda E singular when E = A.
        let a = gallery::sample_a();
        let sys = DescriptorSystem::new(a.clone(), a, None).unwrap();
        assert!(matches!(
            qw_decompose(&sys, Some(c(1.0, 0.0)), None, &TOL).unwrap_err(),
            Error::Singular { .. }
        ));
        assert!(matches!(
            qw_decompose(&gallery::forced(), None, Some(1), &TOL).unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    #[test]
    fn reconstruct_known_combination() {
        let qw = qw_from_bases(&forced_shifted(), &printed_bases(), &TOL).unwrap();
        let z1 = CMatrix::real_column(&[2.0]).unwrap();
        let z2 = CMatrix::real_column(&[3.0, -1.0]).unwrap();
        let x = qw_reconstruct(&qw, &z1, &z2).unwrap();
        let expected = CMatrix::real_column(&[3.0, 2.0, 3.0]).unwrap();
        assert!((&x - &expected).max_abs() < 1e-12);
        // Round trip back through the projections.
        let z1_back = &qw.proj1 * &x;
        let z2_back = &qw.proj2 * &x;
        assert!((&z1_back - &z1).norm() < 1e-12);
        assert!((&z2_back - &z2).norm() < 1e-12);
    }

    #[test]
    fn reconstruct_validates_shapes() {
        let qw = qw_decompose(&gallery::forced(), None, None, &TOL).unwrap();
        let bad = CMatrix::real_column(&[1.0, 2.0]).unwrap();
        assert!(matches!(
            qw_reconstruct(&qw, &bad, &bad).unwrap_err(),
            Error::Dimension(_)
        ));
    }
}
