//! Property tests for frame-operator sampling: exactness of the binary
//! expansion, the projection-split ceiling, and the deviation / rate-bracket
//! / multiplicity promises of the sampling routines on random families.

use mcpsel_core::discretize::{
    binary_expand, derived_sampling_constant, discretize_continuous_frame,
    projection_split_check, scaf_sample, scal_sample, DyadicOperatorFamily, Subspace,
    WeightedOperatorFamily,
};
use mcpsel_core::frames::VectorSystem;
use mcpsel_core::gen;
use mcpsel_core::linalg::{HermitianMatrix, PsdMatrix};
use mcpsel_core::selector::SelectOptions;
use mcpsel_core::{C64, CMat};
use proptest::prelude::*;

fn pow2i(e: i32) -> f64 {
    libm::exp2(e as f64)
}

/// `‖(1/a)Σ multᵢ·Tᵢ − T‖` recomputed from scratch.
fn recomputed_deviation(
    operators: &[PsdMatrix],
    samples: &[(usize, u64)],
    a: f64,
    total: &HermitianMatrix,
) -> f64 {
    let d = total.dim();
    let mut acc = CMat::zeros(d, d);
    for &(i, c) in samples {
        acc += operators[i].as_hermitian().as_matrix() * C64::new(c as f64 / a, 0.0);
    }
    let sym = (acc.adjoint() + &acc) * C64::new(0.5, 0.0);
    HermitianMatrix::new(sym).unwrap().add(&total.scale(-1.0)).unwrap().operator_norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn binary_expansion_is_exact_and_strictly_sorted(
        numer in 1u32..=4_000_000,
        denom_log in 0i32..=16,
        bits in 4u32..=24,
    ) {
        let a = numer as f64 * pow2i(-denom_log);
        prop_assume!(a < pow2i(bits as i32));
        let exps = binary_expand(a, bits).unwrap();
        let sum: f64 = exps.iter().map(|&r| pow2i(-r)).sum();
        prop_assert!(sum <= a);
        prop_assert!(a - sum < pow2i(-(bits as i32)));
        for w in exps.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        // dyadic inputs with all digits inside the cutoff reconstruct exactly
        if denom_log <= bits as i32 {
            prop_assert_eq!(sum, a);
        }
    }

    #[test]
    fn projection_split_never_exceeds_its_ceiling(
        seed in 0u64..1000,
        d in 2usize..=6,
        cols in 0usize..=3,
    ) {
        prop_assume!(cols <= d);
        let mut rng = gen::rng_from_seed(seed);
        let t = gen::random_psd(&mut rng, d, d.min(3), 0.7);
        let u = gen::random_unitary(&mut rng, d);
        let k = Subspace::new(u.columns(0, cols).into_owned()).unwrap();
        let split = projection_split_check(&t, &k).unwrap();
        prop_assert!(split.gamma1 >= -1e-12);
        prop_assert!(split.gamma2 >= -1e-12);
        prop_assert!(split.max_violation <= 1e-8);
    }

    #[test]
    fn dyadic_sampling_keeps_every_promise(
        seed in 0u64..500,
        d in 2usize..=4,
        n in 4usize..=24,
        exponent in 7i32..=8,
        eps_cents in 30u32..=70,
        use_subspace in proptest::bool::ANY,
    ) {
        let eps = eps_cents as f64 / 100.0;
        let delta = pow2i(-6);
        let mut rng = gen::rng_from_seed(seed);
        let ops: Vec<PsdMatrix> =
            (0..n).map(|_| gen::random_rank_one(&mut rng, d, delta)).collect();
        let family = DyadicOperatorFamily::new(ops, vec![exponent; n], delta).unwrap();
        let k = if use_subspace {
            let u = gen::random_unitary(&mut rng, d);
            Subspace::new(u.columns(0, 1).into_owned()).unwrap()
        } else {
            Subspace::zero(d)
        };
        let opts = SelectOptions::default();
        let outcome = scaf_sample(&family, &k, eps, &opts).unwrap();
        let s = &outcome.sampling;
        let total = family.total().unwrap();

        // deviation: recomputable and below the accuracy
        let dev = recomputed_deviation(family.operators(), &s.samples, s.a, &total);
        prop_assert!((dev - s.deviation).abs() <= 1e-12);
        prop_assert!(s.deviation < eps + 1e-9);

        // rate bracket at the declared trace cap
        let bracket = derived_sampling_constant() * delta / (eps * eps);
        prop_assert!(s.a > bracket * (1.0 - 1e-12));
        prop_assert!(s.a <= 2.0 * bracket * (1.0 + 1e-12));

        // multiplicities respect a(1+eps)
        for &(j, c) in &s.samples {
            let norm = family.operators()[j].as_hermitian().operator_norm();
            prop_assert!(c as f64 * norm <= s.a * (1.0 + eps) * (1.0 + 1e-9));
        }

        // kept leaf does not exceed the subspace trace of the total
        let mut on_k = 0.0;
        for &(j, c) in &s.samples {
            on_k += c as f64 / s.a * k.trace_on(family.operators()[j].as_hermitian()).unwrap();
        }
        prop_assert!(on_k <= outcome.gamma + 1e-8);

        // sandwich, re-verified spectrally
        let d_mat = {
            let mut acc = CMat::zeros(d, d);
            for &(j, c) in &s.samples {
                acc += family.operators()[j].as_hermitian().as_matrix()
                    * C64::new(c as f64 / s.a, 0.0);
            }
            let sym = (acc.adjoint() + &acc) * C64::new(0.5, 0.0);
            HermitianMatrix::new(sym).unwrap().add(&total.scale(-1.0)).unwrap()
        };
        let envelope = {
            let m = CMat::identity(d, d)
                * C64::new(4.0 * outcome.gamma.max(0.0).sqrt(), 0.0)
                + k.co_projector() * C64::new(eps, 0.0);
            let sym = (m.adjoint() + &m) * C64::new(0.5, 0.0);
            HermitianMatrix::new(sym).unwrap()
        };
        let upper = envelope.add(&d_mat.scale(-1.0)).unwrap();
        let lower = envelope.add(&d_mat).unwrap();
        prop_assert!(upper.eigenvalues()[0] >= -1e-9);
        prop_assert!(lower.eigenvalues()[0] >= -1e-9);
    }

    #[test]
    fn weighted_sampling_meets_the_requested_accuracy(
        seed in 0u64..500,
        d in 2usize..=4,
        n in 3usize..=12,
        eps_cents in 25u32..=85,
        bits in 3u32..=5,
    ) {
        let eps = eps_cents as f64 / 100.0;
        let delta = pow2i(-10);
        let mut rng = gen::rng_from_seed(seed);
        let ops: Vec<PsdMatrix> =
            (0..n).map(|_| gen::random_rank_one(&mut rng, d, delta)).collect();
        let weights: Vec<f64> =
            (0..n).map(|i| 0.1 + 0.8 * ((seed as usize + 3 * i) % 17) as f64 / 17.0).collect();
        let family = WeightedOperatorFamily::new(ops, weights, delta).unwrap();
        let total = family.total().unwrap();
        let opts = SelectOptions::default();
        // low starting precisions keep the planned level small, so the suite
        // stays fast while still crossing both the virtual and physical routes
        let res = scal_sample(&family, eps, bits, &opts).unwrap();

        let dev = recomputed_deviation(family.operators(), &res.samples, res.a, &total);
        prop_assert!((dev - res.deviation).abs() <= 1e-12);
        prop_assert!(res.deviation < eps + 1e-9);

        // bracket at the accuracy that actually drove the window
        let bracket =
            derived_sampling_constant() * delta / (res.epsilon_run * res.epsilon_run);
        let core_rate = res.a * res.norm_scale;
        prop_assert!(core_rate > bracket * (1.0 - 1e-12));
        prop_assert!(core_rate <= 2.0 * bracket * (1.0 + 1e-12));

        for &(i, c) in &res.samples {
            let norm = family.operators()[i].as_hermitian().operator_norm();
            prop_assert!(
                c as f64 * norm
                    <= core_rate * (1.0 + res.epsilon_run) * (1.0 + 1e-9)
            );
        }
    }

    #[test]
    fn parseval_quadratures_discretize_inside_the_window(
        seed in 0u64..500,
        d in 2usize..=4,
        extra in 0usize..=6,
        eps_cents in 30u32..=80,
    ) {
        let eps = eps_cents as f64 / 100.0;
        let n = d + extra;
        let mut rng = gen::rng_from_seed(seed);
        let vectors = gen::parseval_vectors(&mut rng, d, n);
        let system = VectorSystem::new(d, vectors).unwrap();
        let frame = discretize_continuous_frame(
            &system,
            &vec![1.0; n],
            eps,
            24,
            &SelectOptions::default(),
        )
        .unwrap();
        // the weighted total is the identity
        prop_assert!((frame.continuous_bounds.0 - 1.0).abs() <= 1e-8);
        prop_assert!((frame.continuous_bounds.1 - 1.0).abs() <= 1e-8);
        let a = frame.sampling.a;
        prop_assert!(frame.lower_bound >= a * (1.0 - eps) - a * 1e-9);
        prop_assert!(frame.upper_bound <= a * (1.0 + eps) + a * 1e-9);
        prop_assert!(frame.lower_bound <= frame.upper_bound);
    }
}
