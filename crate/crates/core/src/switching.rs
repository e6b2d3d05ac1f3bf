//! Reduction of switched descriptor systems sharing a consistency space.
//!
//! A family of modes `E_i x' = A_i x + B_i u` (common state dimension,
//! common shift `lambda`) can be reduced by a single projection when the
//! ranges `range(F_i^{k_i})` all coincide. With `X` an orthonormal basis
//! of that shared subspace, `z = X'x` reduces every mode at once to
//! `F~_i z' = (I + lambda F~_i) z + G~_i u` with `F~_i = X'F_i X`, and the
//! reduction commutes with switching because each `F_i` maps `span X` to
//! itself: `F_i X = X F~_i`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{inverse, max_principal_angle, solve, svd_bases, CMatrix, RankTolerance};
use crate::model::{compress_ranges, shift, DescriptorSystem, ShiftedSystem};

/// A finite family of modes with one shift valid for all of them.
#[derive(Clone, Debug)]
pub struct SwitchedDescriptorSystem {
    modes: Vec<DescriptorSystem>,
    shifted: Vec<ShiftedSystem>,
    lambda: Complex64,
}

impl SwitchedDescriptorSystem {
    /// Validates the family: at least one mode, equal state dimensions,
    /// and `A_i - lambda E_i` nonsingular for every mode
    /// ([`Error::Singular`] otherwise).
    pub fn new(modes: Vec<DescriptorSystem>, lambda: Complex64) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidArgument(
                "a switched system needs at least one mode".into(),
            ));
        }
        let n = modes[0].n();
        for (i, mode) in modes.iter().enumerate() {
            if mode.n() != n {
                return Err(Error::Dimension(format!(
                    "mode {i} has state dimension {}, expected {n}",
                    mode.n()
                )));
            }
        }
        let shifted = modes
            .iter()
            .map(|mode| shift(mode, lambda))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            modes,
            shifted,
            lambda,
        })
    }

    /// Builds the family with a shift chosen automatically: `0` when every
    /// `A_i` is nonsingular, otherwise the point on a fixed circle that
    /// maximizes the worst-mode relative smallest singular value of
    /// `A_i - lambda E_i`. Each `det(sE_i - A_i)` has degree at most `n`,
    /// so the product cannot vanish on all `N n + 1` circle points unless
    /// some pencil is singular ([`Error::NotRegular`]).
    pub fn with_auto_lambda(modes: Vec<DescriptorSystem>, tol: &RankTolerance) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidArgument(
                "a switched system needs at least one mode".into(),
            ));
        }
        let lambda = auto_lambda(&modes, tol)?;
        Self::new(modes, lambda)
    }

    pub fn modes(&self) -> &[DescriptorSystem] {
        &self.modes
    }

    pub(crate) fn shifted(&self) -> &[ShiftedSystem] {
        &self.shifted
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn n(&self) -> usize {
        self.modes[0].n()
    }
}

fn auto_lambda(modes: &[DescriptorSystem], tol: &RankTolerance) -> Result<Complex64> {
    let n = modes[0].n();
    let mut zero_ok = true;
    for mode in modes {
        if mode.n() != n {
            return Err(Error::Dimension(format!(
                "mode state dimensions differ: {} vs {n}",
                mode.n()
            )));
        }
        if svd_bases(mode.a(), tol)?.rank < n {
            zero_ok = false;
        }
    }
    if zero_ok {
        return Ok(Complex64::new(0.0, 0.0));
    }

    let max_e = modes.iter().map(|m| m.e().norm()).fold(0.0, f64::max);
    let max_a = modes.iter().map(|m| m.a().norm()).fold(0.0, f64::max);
    let rho = 1.0 + max_e / (1.0 + max_a);
    let count = modes.len() * n + 1;
    let mut best: Option<(f64, Complex64)> = None;
    for j in 0..count {
        let theta = std::f64::consts::TAU * j as f64 / count as f64;
        let lambda = Complex64::from_polar(rho, theta);
        let mut score = f64::INFINITY;
        let mut full_rank = true;
        for mode in modes {
            let pencil = mode.a() - &mode.e().scale(lambda);
            let bases = svd_bases(&pencil, tol)?;
            if bases.rank < n {
                full_rank = false;
                break;
            }
            let rel =
                bases.singular_values[n - 1] / bases.singular_values[0].max(f64::MIN_POSITIVE);
            score = score.min(rel);
        }
        if full_rank && best.is_none_or(|(s, _)| score > s) {
            best = Some((score, lambda));
        }
    }
    best.map(|(_, lambda)| lambda)
        .ok_or(Error::NotRegular { tried: count + 1 })
}

/// Principal angle between the ranges of two modes.
#[derive(Clone, Copy, Debug)]
pub struct MismatchReport {
    pub mode_a: usize,
    pub mode_b: usize,
    /// Largest principal angle between the two subspaces, radians.
    pub angle: f64,
}

/// Successful common-range verification: the shared orthonormal basis, the
/// per-mode depths the ranges were taken at, and every pairwise angle
/// (all of which passed `angle_tol`).
#[derive(Clone, Debug)]
pub struct CommonRangeOutcome {
    pub basis: CMatrix,
    /// Depth per mode: mode `i`'s range was `range(F_i^indices[i])`. The
    /// mode's own index `k_i*` unless explicit depths were given.
    pub indices: Vec<usize>,
    pub pairs: Vec<MismatchReport>,
    pub angle_tol: f64,
}

/// Verifies that all modes share their asymptotic range: computes
/// `range(F_i^{k_i*})` per mode and compares every pair by largest
/// principal angle. Any pair above `angle_tol` fails with
/// [`Error::CommonRange`] naming the worst pair; a shared but
/// zero-dimensional range fails with [`Error::PureSystem`].
pub fn common_range_check(
    switched: &SwitchedDescriptorSystem,
    tol: &RankTolerance,
    angle_tol: f64,
) -> Result<CommonRangeOutcome> {
    common_range_check_at(switched, None, tol, angle_tol)
}

/// [`common_range_check`] with explicit per-mode depths: mode `i`
/// contributes `range(F_i^depths[i])`. Each depth must be at least 1 and
/// at least the mode's own index `k_i*` (below it the shared range is not
/// invariant under the mode, so the projected dynamics would be singular).
pub fn common_range_check_at(
    switched: &SwitchedDescriptorSystem,
    depths: Option<&[usize]>,
    tol: &RankTolerance,
    angle_tol: f64,
) -> Result<CommonRangeOutcome> {
    if !angle_tol.is_finite() || angle_tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "angle tolerance must be finite and positive, got {angle_tol}"
        )));
    }
    if let Some(d) = depths {
        if d.len() != switched.modes.len() {
            return Err(Error::Dimension(format!(
                "{} depths given for {} modes",
                d.len(),
                switched.modes.len()
            )));
        }
    }
    let mut indices = Vec::with_capacity(switched.modes.len());
    let mut bases = Vec::with_capacity(switched.modes.len());
    for (i, sh) in switched.shifted().iter().enumerate() {
        let comp = compress_ranges(sh.f(), depths.map_or(0, |d| d[i]), tol)?;
        let k = match depths {
            None => comp.k_star,
            Some(d) => {
                if d[i] == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "mode {i}: depth must be at least 1"
                    )));
                }
                if d[i] < comp.k_star {
                    return Err(Error::InvalidArgument(format!(
                        "mode {i}: depth {} is below the mode's index {}",
                        d[i], comp.k_star
                    )));
                }
                d[i]
            }
        };
        indices.push(k);
        bases.push(comp.bases[k].clone());
    }

    let mut pairs = Vec::new();
    let mut worst: Option<MismatchReport> = None;
    for i in 0..bases.len() {
        for j in (i + 1)..bases.len() {
            let angle = max_principal_angle(&bases[i], &bases[j], tol)?;
            let report = MismatchReport {
                mode_a: i,
                mode_b: j,
                angle,
            };
            pairs.push(report);
            if worst.is_none_or(|w| angle > w.angle) {
                worst = Some(report);
            }
        }
    }
    if let Some(w) = worst {
        if w.angle > angle_tol {
            return Err(Error::CommonRange {
                mode_a: w.mode_a,
                mode_b: w.mode_b,
                angle: w.angle,
                angle_tol,
            });
        }
    }
    if bases[0].cols() == 0 {
        return Err(Error::PureSystem {
            k: indices.iter().copied().max().unwrap_or(0),
        });
    }
    Ok(CommonRangeOutcome {
        basis: bases.swap_remove(0),
        indices,
        pairs,
        angle_tol,
    })
}

/// One mode after projection onto the shared basis.
#[derive(Clone, Debug)]
pub struct ReducedMode {
    /// `X'F_i X`; nonsingular because the shared range is `F_i`-invariant.
    pub f_tilde: CMatrix,
    /// `F~_i^-1 + lambda I`: the mode as an explicit ODE.
    pub a_tilde: CMatrix,
    /// `X'G_i` (absent when the mode has no input).
    pub g_tilde: Option<CMatrix>,
    /// `F~_i^-1 G~_i` (absent when the mode has no input).
    pub b_tilde: Option<CMatrix>,
    /// `||F_i X - X F~_i|| / max(1, ||F_i||)`: how exactly the reduction
    /// commutes with the mode's dynamics.
    pub commutation_residual: f64,
}

/// All modes reduced through one projection `z = proj x`, `x = basis z`.
#[derive(Clone, Debug)]
pub struct SwitchedReduction {
    /// Shared orthonormal `X`, so `proj` is just its adjoint.
    pub basis: CMatrix,
    pub proj: CMatrix,
    pub modes: Vec<ReducedMode>,
    pub indices: Vec<usize>,
    pub pairs: Vec<MismatchReport>,
    pub lambda: Complex64,
}

impl SwitchedReduction {
    /// Reduced order (dimension of the shared range).
    pub fn order(&self) -> usize {
        self.basis.cols()
    }
}

/// Runs [`common_range_check`] and projects every mode onto the shared
/// basis. Each reduced mode is index zero, so its explicit ODE form is
/// always produced.
pub fn reduce_switching(
    switched: &SwitchedDescriptorSystem,
    tol: &RankTolerance,
    angle_tol: f64,
) -> Result<SwitchedReduction> {
    reduce_switching_at(switched, None, tol, angle_tol)
}

/// [`reduce_switching`] with explicit per-mode depths (see
/// [`common_range_check_at`]).
pub fn reduce_switching_at(
    switched: &SwitchedDescriptorSystem,
    depths: Option<&[usize]>,
    tol: &RankTolerance,
    angle_tol: f64,
) -> Result<SwitchedReduction> {
    let outcome = common_range_check_at(switched, depths, tol, angle_tol)?;
    let x = &outcome.basis;
    let proj = x.adjoint();
    let lambda_eye = CMatrix::identity(x.cols()).scale(switched.lambda());
    let mut modes = Vec::with_capacity(switched.modes.len());
    for sh in switched.shifted() {
        let f_tilde = &(&proj * sh.f()) * x;
        let commutation_residual =
            (&(sh.f() * x) - &(x * &f_tilde)).norm() / sh.f().norm().max(1.0);
        let a_tilde = &inverse(&f_tilde)? + &lambda_eye;
        let g_tilde = sh.g().map(|g| &proj * g);
        let b_tilde = match &g_tilde {
            Some(g) => Some(solve(&f_tilde, g)?),
            None => None,
        };
        modes.push(ReducedMode {
            f_tilde,
            a_tilde,
            g_tilde,
            b_tilde,
            commutation_residual,
        });
    }
    Ok(SwitchedReduction {
        basis: outcome.basis,
        proj,
        modes,
        indices: outcome.indices,
        pairs: outcome.pairs,
        lambda: switched.lambda(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    const TOL: RankTolerance = RankTolerance::Machine;
    const ANGLE_TOL: f64 = 1e-8;

    fn zero() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    /// Second mode sharing the sample's range span{[0, 1, 1]}: E is the
    /// square of the sample's F (so A = I gives F_2 = F^2), index one.
    fn companion_mode() -> DescriptorSystem {
        let e = CMatrix::from_real_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 4.0, 0.0],
            vec![0.0, 4.0, 0.0],
        ])
        .unwrap();
        DescriptorSystem::new(e, CMatrix::identity(3), None).unwrap()
    }

    /// Mode whose range is span{e2}, at 45 degrees to the shared one.
    fn disjoint_mode() -> DescriptorSystem {
        let e = CMatrix::from_real_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        DescriptorSystem::new(e, CMatrix::identity(3), None).unwrap()
    }

    fn shared_pair() -> SwitchedDescriptorSystem {
        SwitchedDescriptorSystem::new(vec![gallery::forced(), companion_mode()], zero()).unwrap()
    }

    #[test]
    fn constructor_validates_family() {
        assert!(matches!(
            SwitchedDescriptorSystem::new(vec![], zero()).unwrap_err(),
            Error::InvalidArgument(_)
        ));
        let small =
            DescriptorSystem::new(CMatrix::identity(2), CMatrix::identity(2), None).unwrap();
        assert!(matches!(
            SwitchedDescriptorSystem::new(vec![gallery::unforced(), small], zero()).unwrap_err(),
            Error::Dimension(_)
        ));
        // -0.5 is a pencil eigenvalue of the sample: A + 0.5 E is singular.
        assert!(matches!(
            SwitchedDescriptorSystem::new(vec![gallery::unforced()], Complex64::new(-0.5, 0.0))
                .unwrap_err(),
            Error::Singular { .. }
        ));
    }

    #[test]
    fn auto_lambda_prefers_zero_for_nonsingular_a() {
        let sw = SwitchedDescriptorSystem::with_auto_lambda(
            vec![gallery::forced(), companion_mode()],
            &TOL,
        )
        .unwrap();
        assert_eq!(sw.lambda(), zero());
    }

    #[test]
    fn auto_lambda_moves_off_zero_when_a_is_singular() {
        let a = CMatrix::from_real_rows(&[
            vec![1.0, 1.0, 1.0],
            vec![1.0, -1.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let mode = DescriptorSystem::new(CMatrix::identity(3), a, None).unwrap();
        let sw = SwitchedDescriptorSystem::with_auto_lambda(vec![mode], &TOL).unwrap();
        assert!(sw.lambda().norm() > 0.5);
    }

    #[test]
    fn auto_lambda_detects_singular_pencil() {
        let e = CMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let bad = DescriptorSystem::new(e.clone(), e, None).unwrap();
        assert!(matches!(
            SwitchedDescriptorSystem::with_auto_lambda(vec![bad], &TOL).unwrap_err(),
            Error::NotRegular { .. }
        ));
    }

    #[test]
    fn common_range_accepts_shared_ranges() {
        let outcome = common_range_check(&shared_pair(), &TOL, ANGLE_TOL).unwrap();
        assert_eq!(outcome.indices, vec![2, 1]);
        assert_eq!(outcome.basis.cols(), 1);
        assert_eq!(outcome.pairs.len(), 1);
        assert!(outcome.pairs[0].angle < 1e-12);
        // The shared range is span{[0, 1, 1]}.
        let direction = CMatrix::real_column(&[0.0, 1.0, 1.0]).unwrap();
        let angle = max_principal_angle(&outcome.basis, &direction, &TOL).unwrap();
        assert!(angle < 1e-12);
    }

    #[test]
    fn common_range_rejects_mismatched_ranges() {
        let sw = SwitchedDescriptorSystem::new(vec![gallery::forced(), disjoint_mode()], zero())
            .unwrap();
        let err = common_range_check(&sw, &TOL, ANGLE_TOL).unwrap_err();
        match err {
            Error::CommonRange {
                mode_a,
                mode_b,
                angle,
                angle_tol,
            } => {
                assert_eq!((mode_a, mode_b), (0, 1));
                assert!((angle - std::f64::consts::FRAC_PI_4).abs() < 1e-10);
                assert_eq!(angle_tol, ANGLE_TOL);
            }
            other => panic!("expected CommonRange, got {other:?}"),
        }
    }

    #[test]
    fn common_range_rejects_bad_tolerance_and_pure_family() {
        let sw = shared_pair();
        assert!(matches!(
            common_range_check(&sw, &TOL, 0.0).unwrap_err(),
            Error::InvalidArgument(_)
        ));
        // F = E is a single shift block, so ranks go 2, 1, 0 and k* = 2.
        let e = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let pure = DescriptorSystem::new(e, CMatrix::identity(2), None).unwrap();
        let sw = SwitchedDescriptorSystem::new(vec![pure.clone(), pure], zero()).unwrap();
        assert!(matches!(
            common_range_check(&sw, &TOL, ANGLE_TOL).unwrap_err(),
            Error::PureSystem { k: 2 }
        ));
    }

    #[test]
    fn explicit_depths_validate_and_match_defaults() {
        let sw = shared_pair();
        let auto = reduce_switching(&sw, &TOL, ANGLE_TOL).unwrap();
        let explicit = reduce_switching_at(&sw, Some(&[2, 1]), &TOL, ANGLE_TOL).unwrap();
        assert_eq!(explicit.indices, vec![2, 1]);
        assert!((&explicit.modes[0].f_tilde - &auto.modes[0].f_tilde).max_abs() < 1e-14);
        // Depths past stabilization land on the same range.
        let deeper = reduce_switching_at(&sw, Some(&[3, 2]), &TOL, ANGLE_TOL).unwrap();
        assert_eq!(deeper.order(), auto.order());
        // Below a mode's index, zero, or miscounted depths are rejected.
        assert!(matches!(
            reduce_switching_at(&sw, Some(&[1, 1]), &TOL, ANGLE_TOL).unwrap_err(),
            Error::InvalidArgument(_)
        ));
        assert!(matches!(
            reduce_switching_at(&sw, Some(&[2, 0]), &TOL, ANGLE_TOL).unwrap_err(),
            Error::InvalidArgument(_)
        ));
        assert!(matches!(
            reduce_switching_at(&sw, Some(&[2]), &TOL, ANGLE_TOL).unwrap_err(),
            Error::Dimension(_)
        ));
    }

    #[test]
    fn reduction_produces_known_scalar_modes() {
        let red = reduce_switching(&shared_pair(), &TOL, ANGLE_TOL).unwrap();
        assert_eq!(red.order(), 1);
        // X'F X = -2 for the sample and 4 for the companion, independent of
        // the sign of the unit basis vector.
        assert!((red.modes[0].f_tilde.get(0, 0) - Complex64::new(-2.0, 0.0)).norm() < 1e-12);
        assert!((red.modes[1].f_tilde.get(0, 0) - Complex64::new(4.0, 0.0)).norm() < 1e-12);
        assert!((red.modes[0].a_tilde.get(0, 0) - Complex64::new(-0.5, 0.0)).norm() < 1e-12);
        assert!((red.modes[1].a_tilde.get(0, 0) - Complex64::new(0.25, 0.0)).norm() < 1e-12);
        assert!(red.modes.iter().all(|m| m.commutation_residual < 1e-12));
        // Forced mode keeps its input, the input-free companion does not.
        assert!(red.modes[0].b_tilde.is_some());
        assert!(red.modes[1].b_tilde.is_none());
        // proj lift = identity on the reduced space.
        let eye = &red.proj * &red.basis;
        assert!((&eye - &CMatrix::identity(1)).norm() < 1e-13);
    }

    #[test]
    fn reduction_commutes_with_each_mode() {
        let sw = shared_pair();
        let red = reduce_switching(&sw, &TOL, ANGLE_TOL).unwrap();
        // F_i^l X = X F~_i^l for a few powers of each mode.
        for (sh, mode) in sw.shifted().iter().zip(&red.modes) {
            let mut lhs = red.basis.clone();
            let mut rhs = red.basis.clone();
            for _ in 0..3 {
                lhs = sh.f() * &lhs;
                rhs = &rhs * &mode.f_tilde;
                assert!((&lhs - &rhs).norm() < 1e-12);
            }
        }
    }
}
