use fpcert::attack::{
    apply_candidate, attack_linear, attack_linear_at, attack_linear_threshold, candidate_set, fp_neighbors, replay, scale_to_radius,
    AttackBudget, AttackOutcome, Domain, ThresholdKind, Verdict,
};
use fpcert::certify::{exact_radius_linear, CertificateReport};
use fpcert::fp::next_up;
use fpcert::data_io::gen_random_linear_case;
use fpcert::fp::{ulp, ulp_distance};
use fpcert::models::norm;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn finite_delta() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn candidates_stay_within_n_ulps(delta in finite_delta(), n in 1u32..4, seed in any::<u64>()) {
        let budget = AttackBudget::new(50, n, seed).unwrap();
        for cand in fp_neighbors(&delta, &budget).unwrap() {
            for (c, d) in cand.iter().zip(&delta) {
                prop_assert!(ulp_distance(*c, *d).unsigned_abs() <= u128::from(n));
            }
        }
    }

    #[test]
    fn candidate_sets_are_sorted_and_deduplicated(v in -1e6f64..1e6, n in 1u32..5) {
        let set = candidate_set(v, n).unwrap();
        prop_assert_eq!(set.len(), 2 * n as usize + 1);
        prop_assert!(set.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(set.contains(&v));
    }

    #[test]
    fn larger_budget_keeps_success(d in 2usize..30, seed in any::<u64>()) {
        let (m, x) = gen_random_linear_case(d, seed).unwrap();
        let small = attack_linear(&m, &x, &AttackBudget::new(d * d, 2, seed).unwrap(), None).unwrap();
        let large = attack_linear(&m, &x, &AttackBudget::new(4 * d * d, 2, seed).unwrap(), None).unwrap();
        if small.is_success() {
            prop_assert_eq!(small, large);
        }
    }

    #[test]
    fn successes_replay_and_stay_in_domain(d in 1usize..40, seed in any::<u64>()) {
        let (m, x) = gen_random_linear_case(d, seed).unwrap();
        let x: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let domain = Some(Domain::new(0.0, 1.0).unwrap());
        let budget = AttackBudget::new(d * d, 2, seed).unwrap();
        for kind in [ThresholdKind::RTilde, ThresholdKind::RLo] {
            let out = attack_linear_threshold(&m, &x, kind, &budget, domain).unwrap();
            if let AttackOutcome::Success(r) = out {
                prop_assert!(kind == ThresholdKind::RTilde);
                prop_assert!(r.x_prime.iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert!(r.delta_norm <= r.threshold);
                prop_assert!(replay(&r, domain, |p| Ok(Verdict::Class(m.predict(p)?.into()))).unwrap());
            }
        }
    }
}

#[test]
fn neighbour_draws_are_reproducible() {
    let delta = [0.3, -1.7, 2.5e-10];
    let b = AttackBudget::new(64, 2, 99).unwrap();
    assert_eq!(fp_neighbors(&delta, &b).unwrap(), fp_neighbors(&delta, &b).unwrap());
    let longer = fp_neighbors(&delta, &AttackBudget::new(128, 2, 99).unwrap()).unwrap();
    assert_eq!(&longer[..64], &fp_neighbors(&delta, &b).unwrap()[..]);
}

#[test]
fn spec_neighbour_example() {
    assert_eq!(candidate_set(1.0, 1).unwrap(), vec![0.9999999999999999, 1.0, 1.0000000000000002]);
}

/// Deviation of the recomputed norm from the radius, in ulps of the radius.
fn scaled_norm_deviation(rng: &mut ChaCha8Rng, d: usize) -> Option<f64> {
    let nu: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    if norm(&nu) == 0.0 {
        return None;
    }
    let r: f64 = rng.random_range(0.0..10.0);
    let delta = scale_to_radius(&nu, r, if rng.random::<bool>() { 1 } else { -1 }).unwrap();
    Some((norm(&delta) - r).abs() / ulp(r))
}

#[test]
fn scaled_seed_norm_is_close_to_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let d = rng.random_range(1..=20);
        if let Some(dev) = scaled_norm_deviation(&mut rng, d) {
            worst = worst.max(dev);
        }
    }
    assert!(worst <= 4.0, "worst deviation {worst} ulps of the radius");
}

// Two sequential norms plus the scaling: about 2(D + 2) unit roundoffs.
#[test]
fn scaled_seed_norm_error_grows_with_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [50, 100, 400, 784] {
        for _ in 0..500 {
            if let Some(dev) = scaled_norm_deviation(&mut rng, d) {
                assert!(dev <= 2.0 * (d as f64 + 2.0), "D={d}: {dev} ulps");
            }
        }
    }
}

#[test]
fn clipped_coordinates_use_the_applied_step() {
    let x = [0.9, 0.5];
    let delta = [0.3, 0.1];
    let (mut xp, mut applied) = ([0.0; 2], [0.0; 2]);
    apply_candidate(&x, &delta, Some(Domain::new(0.0, 1.0).unwrap()), &mut xp, &mut applied);
    assert_eq!(xp, [1.0, 0.5 + 0.1]);
    assert_eq!(applied, [1.0 - 0.9, 0.1]);
}

#[test]
fn lower_bound_attack_finds_nothing() {
    for seed in 0..300u64 {
        let d = 1 + (seed % 60) as usize;
        let (m, x) = gen_random_linear_case(d, seed).unwrap();
        let out = attack_linear_threshold(&m, &x, ThresholdKind::RLo, &AttackBudget::new(d * d, 2, seed).unwrap(), None)
            .unwrap();
        assert!(!out.is_success(), "seed {seed}, r_tilde {}", exact_radius_linear(&m, &x).unwrap());
    }
}

#[test]
fn rhat_is_attack_free_and_inside_the_enclosure() {
    for seed in 0..12u64 {
        let d = 20;
        let (m, x) = gen_random_linear_case(d, seed).unwrap();
        let budget = AttackBudget::new(d * d, 2, seed).unwrap();
        let rep = CertificateReport::linear(&m, &x).unwrap().with_rhat(&m, &x, &budget).unwrap();
        let r_hat = rep.r_hat.unwrap();
        assert!(rep.r_lo <= r_hat && r_hat <= rep.r_hi, "seed {seed}");
        let at = attack_linear_at(&m, &x, r_hat, ThresholdKind::R, &budget, None).unwrap();
        assert!(!matches!(at, AttackOutcome::Success(_)), "seed {seed}: attack succeeds at r_hat");
        // Just above R̂ the attack succeeds, unless R̂ is already the upper bound.
        if r_hat < rep.r_hi {
            let above = attack_linear_at(&m, &x, next_up(r_hat).unwrap(), ThresholdKind::R, &budget, None).unwrap();
            assert!(matches!(above, AttackOutcome::Success(_)), "seed {seed}: nothing just above r_hat");
        }
    }
}
