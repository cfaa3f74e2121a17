//! Seeded random instance generators.
//!
//! Everything here is deterministic given the seed, so experiments and
//! regression tests can reproduce instances exactly. The stream cipher RNG is
//! fixed (not `StdRng`) because its output must not change across toolchain
//! upgrades.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;

use crate::linalg::{HermitianMatrix, PsdMatrix};
use crate::{C64, CMat, CVec};

/// Deterministic RNG used throughout; seeded per experiment.
pub type SeededRng = rand_chacha::ChaCha12Rng;

/// RNG from a bare `u64` seed.
pub fn rng_from_seed(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

fn uniform_sym(rng: &mut SeededRng) -> f64 {
    2.0 * rng.random::<f64>() - 1.0
}

/// Dense complex matrix with entries uniform in the square `[-scale, scale]²`.
pub fn random_complex_matrix(rng: &mut SeededRng, rows: usize, cols: usize, scale: f64) -> CMat {
    DMatrix::from_fn(rows, cols, |_, _| {
        C64::new(scale * uniform_sym(rng), scale * uniform_sym(rng))
    })
}

/// Random complex vector, entries uniform in `[-1, 1]²`.
pub fn random_vector(rng: &mut SeededRng, dim: usize) -> CVec {
    CVec::from_fn(dim, |_, _| C64::new(uniform_sym(rng), uniform_sym(rng)))
}

/// Vector rescaled so that `‖v‖² = norm_sq`.
pub fn random_vector_with_norm_sq(rng: &mut SeededRng, dim: usize, norm_sq: f64) -> CVec {
    let v = random_vector(rng, dim);
    let n = v.norm();
    if n == 0.0 {
        // astronomically unlikely; retry keeps the contract exact
        return random_vector_with_norm_sq(rng, dim, norm_sq);
    }
    v * C64::new(libm::sqrt(norm_sq) / n, 0.0)
}

/// Random Hermitian matrix `(G + G*)/2` with `G` uniform at the given scale.
pub fn random_hermitian(rng: &mut SeededRng, dim: usize, scale: f64) -> HermitianMatrix {
    let g = random_complex_matrix(rng, dim, dim, scale);
    let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    HermitianMatrix::new(h).expect("symmetrized matrix is Hermitian")
}

/// Random PSD matrix `GG*` where `G` is `dim × rank`.
pub fn random_psd(rng: &mut SeededRng, dim: usize, rank: usize, scale: f64) -> PsdMatrix {
    let g = random_complex_matrix(rng, dim, rank.max(1), scale);
    let p = &g * g.adjoint();
    PsdMatrix::new(HermitianMatrix::new(p).expect("GG* is Hermitian")).expect("GG* is PSD")
}

/// Random PSD matrix rescaled to an exact trace.
pub fn random_psd_with_trace(rng: &mut SeededRng, dim: usize, rank: usize, trace: f64) -> PsdMatrix {
    let p = random_psd(rng, dim, rank, 1.0);
    let t = p.trace();
    if t <= 0.0 {
        return random_psd_with_trace(rng, dim, rank, trace);
    }
    p.scale(trace / t).expect("nonnegative rescale")
}

/// Rank-one `vv*` with `tr = norm_sq`.
pub fn random_rank_one(rng: &mut SeededRng, dim: usize, norm_sq: f64) -> PsdMatrix {
    PsdMatrix::rank_one(&random_vector_with_norm_sq(rng, dim, norm_sq))
}

/// Haar-ish random unitary: QR of a random complex matrix with the phases of
/// the triangular factor's diagonal folded into Q so that QR = G exactly when
/// R has positive diagonal.
pub fn random_unitary(rng: &mut SeededRng, dim: usize) -> CMat {
    let g = random_complex_matrix(rng, dim, dim, 1.0);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let m = d.norm();
        let phase = if m > 0.0 { d / m } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `n ≥ dim` vectors whose outer products sum to the identity exactly (up to
/// rounding): draw a random spanning set and apply `S^{-1/2}`.
pub fn parseval_vectors(rng: &mut SeededRng, dim: usize, n: usize) -> Vec<CVec> {
    assert!(n >= dim, "need at least dim vectors to span");
    loop {
        let vs: Vec<CVec> = (0..n).map(|_| random_vector(rng, dim)).collect();
        let mut s = CMat::zeros(dim, dim);
        for v in &vs {
            s += v * v.adjoint();
        }
        let h = HermitianMatrix::new(s).expect("frame operator is Hermitian");
        let (vals, vecs) = h.eigen_pairs();
        if vals[0] <= 1e-8 {
            continue; // degenerate draw, resample
        }
        let inv_sqrt = CMat::from_fn(dim, dim, |i, j| {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..dim {
                acc += vecs.column(k)[i] * vecs.column(k)[j].conj() / libm::sqrt(vals[k]);
            }
            acc
        });
        return vs.iter().map(|v| &inv_sqrt * v).collect();
    }
}

/// Family of PSD operators with `Σ T_i = (1−slack)·I`, each given rank,
/// normalized the same way as [`parseval_vectors`].
pub fn near_tight_psd_family(
    rng: &mut SeededRng,
    dim: usize,
    count: usize,
    rank: usize,
    slack: f64,
) -> Vec<PsdMatrix> {
    loop {
        let raw: Vec<PsdMatrix> = (0..count).map(|_| random_psd(rng, dim, rank, 1.0)).collect();
        let mut s = CMat::zeros(dim, dim);
        for p in &raw {
            s += p.as_hermitian().as_matrix();
        }
        let h = HermitianMatrix::new(s).expect("sum is Hermitian");
        let (vals, vecs) = h.eigen_pairs();
        if vals[0] <= 1e-8 {
            continue;
        }
        let inv_sqrt = CMat::from_fn(dim, dim, |i, j| {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..dim {
                acc += vecs.column(k)[i] * vecs.column(k)[j].conj() / libm::sqrt(vals[k]);
            }
            acc
        });
        let scale = C64::new(libm::sqrt(1.0 - slack), 0.0);
        return raw
            .iter()
            .map(|p| {
                let m = (&inv_sqrt * scale) * p.as_hermitian().as_matrix() * (inv_sqrt.adjoint() * scale);
                PsdMatrix::new(HermitianMatrix::new(m).expect("conjugation keeps Hermitian"))
                    .expect("conjugation keeps PSD")
            })
            .collect();
    }
}
