//! Seeded generators for descriptor systems with known structure.
//!
//! Systems are assembled in canonical block form, `E_w = diag(I_r, N)` and
//! `A_w = diag(S, I)` with `S` diagonal (the chosen slow eigenvalues) and
//! `N` a direct sum of nilpotent shift blocks, then conjugated by random
//! well-conditioned matrices `P`, `Q`: `E = P E_w Q`, `A = P A_w Q`,
//! `B = P B_w`. Conjugation hides the block structure from the analysis
//! code but cannot change the index (largest shift block), the consistency
//! dimension `r`, or the slow spectrum, so every generated system carries
//! its ground truth with it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{svd_bases, CMatrix, RankTolerance};
use crate::model::DescriptorSystem;

/// Recipe for one synthesized system.
#[derive(Clone, Debug)]
pub struct BlockSpec {
    /// Eigenvalues of the slow part (must be nonzero so `A` stays
    /// nonsingular and the shift 0 is always usable); the consistency
    /// dimension is their count.
    pub slow_eigenvalues: Vec<Complex64>,
    /// Sizes of the nilpotent blocks, each at least 1; the index of the
    /// system is the largest size (0 with no blocks).
    pub nilpotent_blocks: Vec<usize>,
    /// Number of input channels; 0 leaves `B` out entirely.
    pub inputs: usize,
}

impl BlockSpec {
    pub fn n(&self) -> usize {
        self.slow_eigenvalues.len() + self.nilpotent_blocks.iter().sum::<usize>()
    }

    pub fn index(&self) -> usize {
        self.nilpotent_blocks.iter().copied().max().unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::InvalidArgument(
                "spec describes an empty system".into(),
            ));
        }
        for (i, ev) in self.slow_eigenvalues.iter().enumerate() {
            if !ev.re.is_finite() || !ev.im.is_finite() || ev.norm() < 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "slow eigenvalue {i} must be finite and bounded away from zero, got {ev}"
                )));
            }
        }
        if self.nilpotent_blocks.iter().any(|&q| q == 0) {
            return Err(Error::InvalidArgument(
                "nilpotent block sizes must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A generated system together with the ground truth it was built from.
#[derive(Clone, Debug)]
pub struct SynthesizedSystem {
    pub system: DescriptorSystem,
    /// True index `k*`.
    pub index: usize,
    /// True `rank(F^k*)`, the slow dimension.
    pub consistency_dim: usize,
    /// Eigenvalues of the slow ODE block, as specified.
    pub slow_eigenvalues: Vec<Complex64>,
    pub seed: u64,
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
    })
    .expect("finite random entries")
}

/// Haar-ish random unitary: orthonormal range basis of a full-rank random
/// square matrix (full rank with probability one; the remote degenerate
/// draw surfaces as a Computation error rather than a wrong answer).
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> Result<CMatrix> {
    let bases = svd_bases(&random_matrix(rng, n, n), &RankTolerance::Machine)?;
    if bases.rank < n {
        return Err(Error::Computation(
            "random draw was numerically singular; use another seed".into(),
        ));
    }
    Ok(bases.range_basis)
}

/// Random invertible matrix with singular values in `[0.5, 2]`, so its
/// condition number never exceeds 4 and conjugation does not wreck the
/// numerics of whatever it hides.
fn well_conditioned(rng: &mut ChaCha8Rng, n: usize) -> Result<CMatrix> {
    let u = random_unitary(rng, n)?;
    let v = random_unitary(rng, n)?;
    let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..=2.0)).collect();
    let scaled = CMatrix::from_fn(n, n, |i, j| u.get(i, j) * Complex64::new(sigma[j], 0.0))?;
    Ok(&scaled * &v.adjoint())
}

/// Builds the canonical pair `(E_w, A_w)` for the spec.
fn canonical_pair(spec: &BlockSpec) -> (CMatrix, CMatrix) {
    let r = spec.slow_eigenvalues.len();
    let n = spec.n();
    // Offsets of each nilpotent block after the slow block.
    let mut offsets = Vec::with_capacity(spec.nilpotent_blocks.len());
    let mut at = r;
    for &q in &spec.nilpotent_blocks {
        offsets.push(at);
        at += q;
    }
    let e = CMatrix::from_fn(n, n, |i, j| {
        if i < r {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        } else {
            // Shift block: ones on the superdiagonal inside each block.
            let in_same_block = offsets
                .iter()
                .zip(&spec.nilpotent_blocks)
                .any(|(&o, &q)| i >= o && i < o + q && j == i + 1 && j < o + q);
            if in_same_block {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
    })
    .expect("finite block entries");
    let a = CMatrix::from_fn(n, n, |i, j| {
        if i != j {
            Complex64::new(0.0, 0.0)
        } else if i < r {
            spec.slow_eigenvalues[i]
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
    .expect("finite block entries");
    (e, a)
}

/// Generates the system for `spec`, deterministically in `seed`.
///
/// The pencil is regular by construction and `A` is nonsingular, so the
/// shift 0 is always admissible; `analyze` on the result must report
/// `spec.index()` and a consistency dimension of
/// `spec.slow_eigenvalues.len()`.
pub fn synthesize(spec: &BlockSpec, seed: u64) -> Result<SynthesizedSystem> {
    spec.validate()?;
    let n = spec.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (e_w, a_w) = canonical_pair(spec);
    let p = well_conditioned(&mut rng, n)?;
    let q = well_conditioned(&mut rng, n)?;
    let e = &(&p * &e_w) * &q;
    let a = &(&p * &a_w) * &q;
    let b = if spec.inputs > 0 {
        Some(&p * &random_matrix(&mut rng, n, spec.inputs))
    } else {
        None
    };
    Ok(SynthesizedSystem {
        system: DescriptorSystem::new(e, a, b)?,
        index: spec.index(),
        consistency_dim: spec.slow_eigenvalues.len(),
        slow_eigenvalues: spec.slow_eigenvalues.clone(),
        seed,
    })
}
