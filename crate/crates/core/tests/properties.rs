//! Randomized invariants over synthesized systems of known structure.
//!
//! Every system here is built from a declared block recipe (slow
//! eigenvalues, nilpotent block sizes, input width) and hidden behind
//! well-conditioned changes of coordinates, so each property can compare
//! the library's answers against ground truth instead of against itself.

use descred::io::{
    format_hex_f64, matrix_from_portable, parse_hex_f64, portable_from_matrix, PortableMatrix,
};
use descred::{
    analyze_with, brute_force_identities, check_residual, cross_basis_formulas, embedded_spectrum,
    four_bases, left_inverse, matrix_index, qw_decompose, reduce_via_corange, reduce_via_range,
    shift, svd_bases, synthesize, to_standard, BlockSpec, CMatrix, PolynomialInput, RankTolerance,
    Side,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Synthesized systems carry conjugation noise well above machine scale
/// but far below their smallest structural singular values.
const SYNTH_TOL: RankTolerance = RankTolerance::Relative(1e-10);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn stable_eigenvalue() -> impl Strategy<Value = Complex64> {
    (-2.0..-0.4f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

/// Recipe with `min_slow..=3` slow states, `min_fast..=2` nilpotent blocks
/// of size up to 3 and the given input-width range; total order stays at
/// most 9 so brute-force checks with explicit powers remain cheap.
fn recipe(
    min_slow: usize,
    min_fast: usize,
    inputs: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = (BlockSpec, u64)> {
    (
        proptest::collection::vec(stable_eigenvalue(), min_slow..=3),
        proptest::collection::vec(1usize..=3, min_fast..=2),
        inputs,
        any::<u32>(),
    )
        .prop_map(|(slow_eigenvalues, nilpotent_blocks, inputs, seed)| {
            (
                BlockSpec {
                    slow_eigenvalues,
                    nilpotent_blocks,
                    inputs,
                },
                u64::from(seed),
            )
        })
}

fn pow(m: &CMatrix, k: usize) -> CMatrix {
    let mut acc = CMatrix::identity(m.rows());
    for _ in 0..k {
        acc = &acc * m;
    }
    acc
}

fn random_unit_column(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    loop {
        let v = CMatrix::from_fn(n, 1, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
        .unwrap();
        let norm = v.norm();
        if norm > 0.3 {
            return v.scale(Complex64::new(1.0 / norm, 0.0));
        }
    }
}

/// Invertible mixer close to the identity (singular values in
/// `[0.7, 1.3]`), used to turn an orthonormal basis into a merely
/// full-rank one without hurting conditioning.
fn mixer(rng: &mut ChaCha8Rng, r: usize) -> CMatrix {
    let noise = CMatrix::from_fn(r, r, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
    .unwrap();
    let scale = 0.3 / noise.norm().max(1e-9);
    &CMatrix::identity(r) + &noise.scale(Complex64::new(scale, 0.0))
}

/// Worst gap of a greedy nearest-neighbor matching between two spectra.
fn spectrum_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spectra have different sizes");
    let mut remaining: Vec<Complex64> = b.to_vec();
    let mut worst = 0.0_f64;
    for &ev in a {
        let (pos, gap) = remaining
            .iter()
            .enumerate()
            .map(|(i, &other)| (i, (ev - other).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty");
        worst = worst.max(gap);
        remaining.swap_remove(pos);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The brute-force oracle re-derives every commutation, factorization
    /// and kernel-splitting identity with explicit powers; analysis must
    /// also reproduce the declared index and slow dimension.
    #[test]
    fn identity_suite_passes_and_analysis_matches_ground_truth(
        (spec, seed) in recipe(1, 0, 0..=2),
    ) {
        let synth = synthesize(&spec, seed).unwrap();
        let report = analyze_with(&synth.system, Some(ZERO), &SYNTH_TOL).unwrap();
        prop_assert_eq!(report.k_star, synth.index);
        prop_assert_eq!(report.consistency_dim, synth.consistency_dim);

        let identities = brute_force_identities(&synth.system, Some(ZERO), &SYNTH_TOL).unwrap();
        let failures: Vec<String> = identities
            .failures()
            .iter()
            .map(|check| format!("{}: {:.3e} > {:.3e}", check.name, check.value, check.threshold))
            .collect();
        prop_assert!(failures.is_empty(), "failed identities: {}", failures.join("; "));
    }

    /// Reducing at depth `k` drops the index to `max(k* - k, 0)`, on both
    /// sides, and the connecting maps stay a projection pair.
    #[test]
    fn partial_reductions_obey_the_index_drop_law(
        (spec, seed) in recipe(1, 1, 0..=0),
    ) {
        let synth = synthesize(&spec, seed).unwrap();
        let shifted = shift(&synth.system, ZERO).unwrap();
        for k in 1..=synth.index {
            let expected = synth.index - k;
            for side in [Side::Range, Side::Corange] {
                let red = match side {
                    Side::Range => reduce_via_range(&shifted, k, None, &SYNTH_TOL).unwrap(),
                    Side::Corange => reduce_via_corange(&shifted, k, None, &SYNTH_TOL).unwrap(),
                };
                prop_assert_eq!(red.index, expected);
                let recomputed = matrix_index(&red.f_tilde, &SYNTH_TOL).unwrap();
                prop_assert_eq!(recomputed, expected);
                let round_trip = &red.proj * &red.lift;
                let gap = (&round_trip - &CMatrix::identity(red.f_tilde.rows())).max_abs();
                prop_assert!(gap <= 1e-10, "proj * lift off identity by {gap:.3e} ({side})");
            }
        }
    }

    /// The reduced matrix depends on the basis, its spectrum does not.
    #[test]
    fn reduced_spectrum_is_basis_invariant(
        (spec, seed) in recipe(1, 1, 0..=0),
    ) {
        let synth = synthesize(&spec, seed).unwrap();
        let shifted = shift(&synth.system, ZERO).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);

        let plain = reduce_via_range(&shifted, 1, None, &SYNTH_TOL).unwrap();
        let mixed_basis = &plain.lift * &mixer(&mut rng, plain.f_tilde.rows());
        let mixed = reduce_via_range(&shifted, 1, Some(&mixed_basis), &SYNTH_TOL).unwrap();

        let gap = spectrum_gap(
            &embedded_spectrum(&plain.f_tilde).unwrap(),
            &embedded_spectrum(&mixed.f_tilde).unwrap(),
        );
        prop_assert!(gap <= 1e-7, "spectra disagree by {gap:.3e}");
    }

    /// The standard form is equivalent to the original system exactly when
    /// `E lift A~ = A lift` holds; both compression sides must satisfy it.
    #[test]
    fn standard_form_satisfies_the_lift_identity(
        (spec, seed) in recipe(1, 0, 0..=0),
    ) {
        let synth = synthesize(&spec, seed).unwrap();
        let shifted = shift(&synth.system, ZERO).unwrap();
        for side in [Side::Range, Side::Corange] {
            let std_sys = to_standard(&shifted, side, &SYNTH_TOL).unwrap();
            let left = &(synth.system.e() * &std_sys.lift) * &std_sys.a_tilde;
            let right = synth.system.a() * &std_sys.lift;
            let scale = (left.norm() + right.norm()).max(1.0);
            let residual = (&left - &right).norm() / scale;
            prop_assert!(residual <= 1e-9, "lift identity residual {residual:.3e} ({side})");
        }
    }

    /// The four fundamental bases are mutually orthogonal the way the
    /// decoupling needs, the fast block is nilpotent at the declared
    /// power, and the two lift/projection pairs resolve the identity.
    #[test]
    fn four_bases_orthogonality_and_qw_resolution(
        (spec, seed) in recipe(1, 1, 0..=2),
    ) {
        let synth = synthesize(&spec, seed).unwrap();
        let shifted = shift(&synth.system, ZERO).unwrap();
        let k = synth.index;
        let bases = four_bases(shifted.f(), k, &SYNTH_TOL).unwrap();

        let f_k = pow(shifted.f(), k);
        let w_f = (&bases.w.adjoint() * &f_k).max_abs();
        prop_assert!(w_f <= 1e-10 * f_k.norm().max(1.0), "W'F^k = {w_f:.3e}");
        let x_w = (&bases.x.adjoint() * &bases.w).max_abs();
        prop_assert!(x_w <= 1e-10, "X'W = {x_w:.3e}");
        let y_v = (&bases.y.adjoint() * &bases.v).max_abs();
        prop_assert!(y_v <= 1e-10, "Y'V = {y_v:.3e}");

        let qw = qw_decompose(&synth.system, Some(ZERO), None, &SYNTH_TOL).unwrap();
        let n_pow = pow(&qw.n_tilde, qw.k_nilpotent).max_abs();
        let n_budget = 1e-10 * qw.n_tilde.norm().powi(qw.k_nilpotent as i32).max(1.0);
        prop_assert!(n_pow <= n_budget, "nilpotent residue {n_pow:.3e}");

        let resolution = &(&qw.lift1 * &qw.proj1) + &(&qw.lift2 * &qw.proj2);
        let gap = (&resolution - &CMatrix::identity(qw.n())).max_abs();
        prop_assert!(gap <= 1e-9, "resolution of identity off by {gap:.3e}");
    }

    /// Closed-form slow/fast trajectories with a polynomial input satisfy
    /// the original differential-algebraic equation on a time grid.
    #[test]
    fn closed_form_trajectories_satisfy_the_original_equation(
        (spec, seed) in recipe(1, 1, 1..=2),
    ) {
        let synth = synthesize(&spec, seed).unwrap();
        let qw = qw_decompose(&synth.system, Some(ZERO), None, &SYNTH_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
        let z1_0 = random_unit_column(&mut rng, qw.slow_dim());
        let coeffs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..qw.m()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let input = PolynomialInput::from_real(&coeffs).unwrap();

        let report = check_residual(&synth.system, &qw, &z1_0, Some(&input), 1.5, 7).unwrap();
        let budget = 1e-7 * (1.0 + report.max_state_norm());
        prop_assert!(
            report.max_residual <= budget,
            "residual {:.3e} over budget {:.3e}",
            report.max_residual,
            budget
        );
        prop_assert!(report.identity_residual <= 1e-9);
    }

    /// Numerical rank is invariant under unitary factors on either side.
    #[test]
    fn svd_rank_is_unitary_invariant(
        rows in 1usize..=7,
        cols in 1usize..=7,
        inner in 1usize..=7,
        seed in any::<u32>(),
    ) {
        let inner = inner.min(rows).min(cols);
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from(seed));
        let mut draw = |r: usize, c: usize| {
            CMatrix::from_fn(r, c, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
            .unwrap()
        };
        let m = &draw(rows, inner) * &draw(inner, cols);
        let rank = svd_bases(&m, &SYNTH_TOL).unwrap().rank;

        let left = svd_bases(&draw(rows, rows), &RankTolerance::Machine).unwrap().range_basis;
        let right = svd_bases(&draw(cols, cols), &RankTolerance::Machine).unwrap().range_basis;
        prop_assume!(left.cols() == rows && right.cols() == cols);
        let rotated = &(&left * &m) * &right.adjoint();
        prop_assert_eq!(svd_bases(&rotated, &SYNTH_TOL).unwrap().rank, rank);
    }

    /// Every left-inverse of `X` gives the same compression `X^+ F X`; the
    /// cross-basis inverse `(Y'X)^-1 Y'` must agree with Moore-Penrose.
    #[test]
    fn any_left_inverse_gives_the_same_reduced_matrix(
        (spec, seed) in recipe(1, 1, 0..=0),
    ) {
        let synth = synthesize(&spec, seed).unwrap();
        let shifted = shift(&synth.system, ZERO).unwrap();
        let bases = four_bases(shifted.f(), synth.index, &SYNTH_TOL).unwrap();

        let moore_penrose = left_inverse(&bases.x).unwrap();
        let cross = cross_basis_formulas(shifted.f(), &bases.x, &bases.y, ZERO).unwrap();

        let via_mp = &(&moore_penrose * shifted.f()) * &bases.x;
        let via_cross = &(&cross.x_dagger * shifted.f()) * &bases.x;
        let gap = (&via_mp - &via_cross).max_abs();
        prop_assert!(gap <= 1e-9 * via_mp.norm().max(1.0), "compressions differ by {gap:.3e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The portable hexadecimal encoding is lossless for every finite
    /// double, including signed zero and subnormals.
    #[test]
    fn hex_floats_round_trip_bit_exactly(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let back = parse_hex_f64(&format_hex_f64(x)).unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    /// Matrices survive the portable JSON form bit-exactly.
    #[test]
    fn portable_matrices_round_trip_bit_exactly(
        rows in 1usize..=5,
        cols in 1usize..=5,
        seed in any::<u32>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from(seed));
        let m = CMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(
                rng.random_range(-1e3..1e3) * 1e-200f64.powi(rng.random_range(0..=1)),
                rng.random_range(-1e3..1e3),
            )
        })
        .unwrap();
        let text = serde_json::to_string(&portable_from_matrix(&m)).unwrap();
        let parsed: PortableMatrix = serde_json::from_str(&text).unwrap();
        let back = matrix_from_portable(&parsed).unwrap();
        for (a, b) in m.entries_row_major().iter().zip(back.entries_row_major()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}
