//! descred: analysis and exact order/index reduction for linear descriptor
//! systems `E x' = A x + B u` with a regular pencil.
//!
//! The library shifts the pencil into `F = (A - lambda E)^-1 E`, reads the
//! system's index and consistency space off the rank sequence of the powers
//! of `F`, and compresses the dynamics onto bases of `range(F^k)` (or its
//! corange) where the reduced system has index `max(k* - k, 0)`. At `k = k*`
//! the reduction is an ordinary ODE; combining it with the complementary
//! kernel bases yields the full quasi-Weierstrass (slow/fast) decoupling.
//! A brute-force oracle, trajectory checks, a JSON CLI and Python bindings
//! sit on top.

pub mod error;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod qw;
pub mod reduction;
pub mod switching;
pub mod synth;

pub mod io;

pub use error::{Error, Result};
pub use matrix::{
    complement_basis, embedded_spectrum, left_inverse, matrix_exponential, max_principal_angle,
    solve, svd_bases, CMatrix, RankTolerance, SvdBases, SUBSPACE_ANGLE_TOL,
};
pub use model::{
    analyze, analyze_with, check_regularity, consistency_space, matrix_index, shift,
    DescriptorSystem, IndexReport, ShiftedSystem,
};
pub use oracle::{
    brute_force_identities, check_discrete, check_residual, check_unforced_reduction, solve_fast,
    solve_slow, IdentityCheck, IdentityReport, PolynomialInput, ResidualReport, UnforcedReduction,
};
pub use qw::{
    fast_subsystem, four_bases, qw_decompose, qw_from_bases, qw_reconstruct, slow_subsystem,
    FastSubsystem, FourBases, QuasiWeierstrass, SlowStandard, SlowSubsystem,
};
pub use reduction::{
    cross_basis_formulas, full_order_standard, full_rank_decomposition, reduce_via_corange,
    reduce_via_range, to_standard, CrossBasisInverses, FullRankDecomposition, ReducedSystem, Side,
    StandardSystem,
};
pub use switching::{
    common_range_check, common_range_check_at, reduce_switching, reduce_switching_at,
    CommonRangeOutcome, MismatchReport, ReducedMode, SwitchedDescriptorSystem, SwitchedReduction,
};
pub use synth::{synthesize, BlockSpec, SynthesizedSystem};

/// Shared fixtures for unit tests: a 3x3 index-two system worked out by hand
/// (regular pencil, singular E, one-dimensional consistency space) and its
/// known shifted matrix, bases and reduced forms at lambda = 0.
#[cfg(test)]
pub(crate) mod gallery {
    use crate::matrix::CMatrix;
    use crate::model::DescriptorSystem;

    /// E of the index-two sample; rank 2, last row zero.
    pub fn sample_e() -> CMatrix {
        CMatrix::from_real_rows(&[
            vec![2.0, -2.0, -2.0],
            vec![2.0, 2.0, -2.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap()
    }

    /// A of the index-two sample; nonsingular, so lambda = 0 works.
    pub fn sample_a() -> CMatrix {
        CMatrix::from_real_rows(&[
            vec![1.0, 1.0, 1.0],
            vec![1.0, -1.0, 1.0],
            vec![1.0, 1.0, -1.0],
        ])
        .unwrap()
    }

    /// Single-column input matrix for the forced variant.
    pub fn sample_b() -> CMatrix {
        CMatrix::real_column(&[0.0, 0.0, 1.0]).unwrap()
    }

    /// F = A^-1 E, verified by hand (A * F = E).
    pub fn sample_f() -> CMatrix {
        CMatrix::from_real_rows(&[
            vec![1.0, 1.0, -1.0],
            vec![0.0, -2.0, 0.0],
            vec![1.0, -1.0, -1.0],
        ])
        .unwrap()
    }

    pub fn unforced() -> DescriptorSystem {
        DescriptorSystem::new(sample_e(), sample_a(), None).unwrap()
    }

    pub fn forced() -> DescriptorSystem {
        DescriptorSystem::new(sample_e(), sample_a(), Some(sample_b())).unwrap()
    }
}
