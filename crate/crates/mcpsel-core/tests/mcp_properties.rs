//! Property suite for the mixed-characteristic-polynomial identities.
//!
//! Instances are generated from a seeded RNG so failures shrink to a seed.

use mcpsel_core::gen;
use mcpsel_core::linalg::{psd_sum, HermitianMatrix, PsdMatrix};
use mcpsel_core::mcp::{maxroot, mcp, mcp_oracle, reduced_mcp, RealPolynomial};
use mcpsel_core::CMat;
use proptest::prelude::*;

const TOL_EQ: f64 = 1e-8;
const TOL_ROOT: f64 = 1e-7;

fn coeff_scale(p: &RealPolynomial) -> f64 {
    p.coeffs().iter().fold(1.0f64, |a, &c| a.max(c.abs()))
}

fn hermitian_family(seed: u64, d: usize, m: usize, scale: f64) -> Vec<HermitianMatrix> {
    let mut rng = gen::rng_from_seed(seed);
    (0..m).map(|_| gen::random_hermitian(&mut rng, d, scale)).collect()
}

fn psd_family(seed: u64, d: usize, m: usize, rank: usize) -> Vec<PsdMatrix> {
    let mut rng = gen::rng_from_seed(seed);
    (0..m).map(|_| gen::random_psd(&mut rng, d, rank, 0.7)).collect()
}

fn as_herm(ps: &[PsdMatrix]) -> Vec<HermitianMatrix> {
    ps.iter().map(|p| p.as_hermitian().clone()).collect()
}

/// Embed a k-dim Hermitian into d-dim coordinates starting at `offset`.
fn embed(h: &HermitianMatrix, d: usize, offset: usize) -> HermitianMatrix {
    let k = h.dim();
    let mut m = CMat::zeros(d, d);
    m.view_mut((offset, offset), (k, k)).copy_from(h.as_matrix());
    HermitianMatrix::new(m).expect("embedding preserves self-adjointness")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_definitional_oracle(seed in any::<u64>(), d in 2usize..=4, m in 1usize..=3) {
        let mats = hermitian_family(seed, d, m, 1.0);
        let a = mcp(&mats).unwrap();
        let b = mcp_oracle(&mats).unwrap();
        prop_assert!(a.linf_distance(&b) <= TOL_EQ * coeff_scale(&a));
    }

    #[test]
    fn multi_affine_in_first_argument(seed in any::<u64>(), d in 2usize..=4, m in 1usize..=3, s in 0.0f64..=1.0) {
        let mut mats = hermitian_family(seed, d, m + 1, 1.0);
        let a_prime = mats.pop().unwrap();
        let a = mats[0].clone();
        let t = 1.0 - s;

        let mut blended = mats.clone();
        blended[0] = a.scale(s).add(&a_prime.scale(t)).unwrap();
        let lhs = mcp(&blended).unwrap();

        let pa = mcp(&mats).unwrap();
        let mut mats_b = mats.clone();
        mats_b[0] = a_prime;
        let pb = mcp(&mats_b).unwrap();
        let rhs = RealPolynomial::new(
            (0..=d).map(|k| s * pa.coeff(k) + t * pb.coeff(k)).collect(),
        );
        prop_assert!(lhs.linf_distance(&rhs) <= TOL_EQ * coeff_scale(&lhs));
    }

    #[test]
    fn symmetric_in_its_arguments(seed in any::<u64>(), d in 2usize..=4, m in 2usize..=3) {
        let mats = hermitian_family(seed, d, m, 1.0);
        let p = mcp(&mats).unwrap();
        let mut rotated = mats.clone();
        rotated.rotate_left(1);
        let q = mcp(&rotated).unwrap();
        prop_assert!(p.linf_distance(&q) <= TOL_EQ * coeff_scale(&p));
    }

    #[test]
    fn invariant_under_simultaneous_unitary_conjugation(seed in any::<u64>(), d in 2usize..=4, m in 1usize..=3) {
        let mats = hermitian_family(seed, d, m, 1.0);
        let mut rng = gen::rng_from_seed(seed.wrapping_add(1));
        let u = gen::random_unitary(&mut rng, d);
        let conj: Vec<HermitianMatrix> = mats.iter().map(|a| a.conjugate_by(&u)).collect();
        let p = mcp(&mats).unwrap();
        let q = mcp(&conj).unwrap();
        prop_assert!(p.linf_distance(&q) <= TOL_EQ * coeff_scale(&p));
    }

    #[test]
    fn degree_reduction_absorbs_diagonal_shift(seed in any::<u64>(), d in 2usize..=4, m in 1usize..=3, delta in 0.1f64..=2.0) {
        // Augmenting each A_i to diag(delta E_ii, A_i) shifts the reduced
        // polynomial's argument by delta.
        prop_assume!(m <= d);
        let mats = hermitian_family(seed, d, m, 1.0);
        let augmented: Vec<HermitianMatrix> = (0..m)
            .map(|i| {
                let mut unit = vec![0.0; m];
                unit[i] = delta;
                let top = HermitianMatrix::from_diagonal(&unit);
                let mut big = CMat::zeros(m + d, m + d);
                big.view_mut((0, 0), (m, m)).copy_from(top.as_matrix());
                big.view_mut((m, m), (d, d)).copy_from(mats[i].as_matrix());
                HermitianMatrix::new(big).unwrap()
            })
            .collect();
        let lhs = reduced_mcp(&augmented).unwrap();
        let rhs = reduced_mcp(&mats).unwrap().taylor_shift(-delta);
        prop_assert!(lhs.linf_distance(&rhs) <= 1e-7 * coeff_scale(&lhs));
    }

    #[test]
    fn orthogonal_families_factor(seed in any::<u64>(), k in 1usize..=2, l in 1usize..=2, ma in 1usize..=2, mb in 1usize..=2) {
        let d = k + l;
        let mut rng = gen::rng_from_seed(seed);
        let a_small: Vec<HermitianMatrix> =
            (0..ma).map(|_| gen::random_hermitian(&mut rng, k, 1.0)).collect();
        let b_small: Vec<HermitianMatrix> =
            (0..mb).map(|_| gen::random_hermitian(&mut rng, l, 1.0)).collect();
        let a: Vec<HermitianMatrix> = a_small.iter().map(|h| embed(h, d, 0)).collect();
        let b: Vec<HermitianMatrix> = b_small.iter().map(|h| embed(h, d, k)).collect();

        let mut joint = a.clone();
        joint.extend(b.iter().cloned());
        let lhs = mcp(&joint).unwrap().mul(&RealPolynomial::monomial(d));
        let rhs = mcp(&a).unwrap().mul(&mcp(&b).unwrap());
        prop_assert!(lhs.linf_distance(&rhs) <= TOL_EQ * coeff_scale(&lhs));
    }

    #[test]
    fn maxroot_monotone_in_the_semidefinite_order(seed in any::<u64>(), d in 2usize..=3, m in 1usize..=3) {
        let small = psd_family(seed, d, m, d);
        let mut rng = gen::rng_from_seed(seed.wrapping_add(7));
        let big: Vec<HermitianMatrix> = small
            .iter()
            .map(|p| {
                let bump = gen::random_psd(&mut rng, d, 1, 0.4);
                p.as_hermitian().add(bump.as_hermitian()).unwrap()
            })
            .collect();
        let lo = maxroot(&mcp(&as_herm(&small)).unwrap(), TOL_ROOT).unwrap().value;
        let hi = maxroot(&mcp(&big).unwrap(), TOL_ROOT).unwrap().value;
        prop_assert!(lo <= hi + TOL_ROOT, "lo={lo} hi={hi}");
    }

    #[test]
    fn sum_norm_bounded_by_maxroot(seed in any::<u64>(), d in 2usize..=3, m in 1usize..=3, rank in 1usize..=2) {
        let fam = psd_family(seed, d, m, rank);
        let norm = psd_sum(d, &fam).unwrap().operator_norm();
        let mr = maxroot(&mcp(&as_herm(&fam)).unwrap(), TOL_ROOT).unwrap().value;
        prop_assert!(norm <= mr + TOL_ROOT, "norm={norm} maxroot={mr}");
    }

    #[test]
    fn trace_capped_tight_families_are_real_rooted_with_bounded_maxroot(
        seed in any::<u64>(), d in 2usize..=3, m in 2usize..=4, slack in 0.0f64..=0.4
    ) {
        let mut rng = gen::rng_from_seed(seed);
        let fam = gen::near_tight_psd_family(&mut rng, d, m, 2, slack);
        let eps = fam.iter().map(PsdMatrix::trace).fold(0.0f64, f64::max);
        let p = mcp(&as_herm(&fam)).unwrap();
        let r = maxroot(&p, 1e-6).unwrap();
        prop_assert!(r.all_real, "imag residual {}", r.max_imag_residual);
        let bound = (1.0 + eps.sqrt()).powi(2);
        prop_assert!(r.value <= bound + TOL_ROOT, "maxroot={} bound={bound}", r.value);
    }

    #[test]
    fn per_block_maxroot_estimate(seed in any::<u64>(), m in 2usize..=3, d1 in 1usize..=2, d2 in 1usize..=2) {
        // Block-diagonal family with exact per-block traces; fixing block j
        // costs the maxroot at most the sum of the other blocks' traces.
        let mut rng = gen::rng_from_seed(seed);
        let dims = [d1, d2];
        let eps = [0.3 + 0.4 * (seed % 3) as f64 / 3.0, 0.2];
        let per_arg: Vec<Vec<PsdMatrix>> = (0..m)
            .map(|_| {
                (0..2)
                    .map(|j| gen::random_psd_with_trace(&mut rng, dims[j], dims[j], eps[j]))
                    .collect()
            })
            .collect();
        let full: Vec<HermitianMatrix> = per_arg
            .iter()
            .map(|blocks| {
                let total = d1 + d2;
                let mut mat = CMat::zeros(total, total);
                mat.view_mut((0, 0), (d1, d1)).copy_from(blocks[0].as_hermitian().as_matrix());
                mat.view_mut((d1, d1), (d2, d2)).copy_from(blocks[1].as_hermitian().as_matrix());
                HermitianMatrix::new(mat).unwrap()
            })
            .collect();
        let whole = maxroot(&mcp(&full).unwrap(), TOL_ROOT).unwrap().value;
        for j in 0..2 {
            let block_fam: Vec<HermitianMatrix> =
                per_arg.iter().map(|blocks| blocks[j].as_hermitian().clone()).collect();
            let block_root = maxroot(&mcp(&block_fam).unwrap(), TOL_ROOT).unwrap().value;
            let other: f64 = eps[1 - j];
            prop_assert!(
                block_root <= whole - other + 1e-6,
                "block {j}: {block_root} vs {whole} - {other}"
            );
        }
    }

    #[test]
    fn definite_perturbation_dominates_orthogonal_one(
        seed in any::<u64>(), k in 1usize..=2, c in 1usize..=2, m in 1usize..=2, extra in 0.0f64..=1.0
    ) {
        // A_i supported on the first k coordinates, Z0 on the complement; any
        // positive definite Z with tr Z >= tr Z0 pushes the maxroot at least
        // as high.
        let d = k + c;
        let mut rng = gen::rng_from_seed(seed);
        let a: Vec<HermitianMatrix> = (0..m)
            .map(|_| embed(gen::random_psd(&mut rng, k, k, 0.8).as_hermitian(), d, 0))
            .collect();
        let z0 = embed(gen::random_psd(&mut rng, c, c, 0.8).as_hermitian(), d, k);
        let z_raw = gen::random_psd(&mut rng, d, d, 0.8)
            .as_hermitian()
            .add(&HermitianMatrix::identity(d).scale(0.05))
            .unwrap();
        let z = z_raw.scale((z0.trace() * (1.0 + extra)) / z_raw.trace());

        let mut with_z0 = a.clone();
        with_z0[0] = a[0].add(&z0).unwrap();
        let mut with_z = a.clone();
        with_z[0] = a[0].add(&z).unwrap();
        let lo = maxroot(&mcp(&with_z0).unwrap(), TOL_ROOT).unwrap().value;
        let hi = maxroot(&mcp(&with_z).unwrap(), TOL_ROOT).unwrap().value;
        prop_assert!(hi >= lo - TOL_ROOT, "hi={hi} lo={lo}");
    }
}
