use std::collections::HashSet;

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uav_iab::agent::{select_action, DuelingNet, EpsilonSchedule};
use uav_iab::channel::{Position, RadioParams};
use uav_iab::environment::{reward, RewardWeights};
use uav_iab::stats::percentile_linear;
use uav_iab::topology::{effective_rate, evaluate_network, form_backhaul, GroundStation, Uav, UserTerminal};

fn uav_strategy() -> impl Strategy<Value = Vec<(f64, f64, bool)>> {
    prop::collection::vec((0.0..300.0f64, 0.0..300.0f64, prop::bool::weighted(0.85)), 0..=6)
}

fn user_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..300.0f64, 0.0..300.0f64), 1..=40)
}

fn build(
    bs: (f64, f64),
    uavs: &[(f64, f64, bool)],
    users: &[(f64, f64)],
) -> (GroundStation, Vec<Uav>, Vec<UserTerminal>) {
    let bs = GroundStation {
        pos: Position::new(bs.0, bs.1, 10.0),
    };
    let uavs = uavs
        .iter()
        .enumerate()
        .map(|(id, &(x, y, alive))| Uav {
            id,
            pos: Position::new(x, y, 100.0),
            alive,
        })
        .collect();
    let users = users
        .iter()
        .enumerate()
        .map(|(id, &(x, y))| UserTerminal {
            id,
            pos: Position::ground(x, y),
        })
        .collect();
    (bs, uavs, users)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn chain_hops_are_valid(
        bs in (0.0..300.0f64, 0.0..300.0f64),
        uavs in uav_strategy(),
        range in 90.0..400.0f64,
    ) {
        let params = RadioParams { comm_range_m: range, ..RadioParams::default() };
        let (bs, uavs, _) = build(bs, &uavs, &[(0.0, 0.0)]);
        let chain = form_backhaul(&bs, &uavs, &params);
        prop_assert_eq!(chain.order.len(), chain.hop_snr.len());
        let mut seen = HashSet::new();
        let mut prev = bs.pos;
        for (&id, &snr) in chain.order.iter().zip(&chain.hop_snr) {
            let uav = &uavs[id];
            prop_assert!(uav.alive);
            prop_assert!(seen.insert(id));
            prop_assert!(snr > params.snr_threshold);
            prop_assert!(prev.distance(&uav.pos) <= range);
            prev = uav.pos;
        }
    }

    #[test]
    fn rates_do_not_depend_on_user_order(
        bs in (0.0..300.0f64, 0.0..300.0f64),
        uavs in uav_strategy(),
        users in user_strategy(),
        shuffle_seed in any::<u64>(),
    ) {
        let params = RadioParams { comm_range_m: 250.0, ..RadioParams::default() };
        let (bs, uavs, users) = build(bs, &uavs, &users);
        let mut shuffled = users.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        let a = evaluate_network(&bs, &uavs, &users, &params);
        let b = evaluate_network(&bs, &uavs, &shuffled, &params);
        for (k, user) in shuffled.iter().enumerate() {
            prop_assert_eq!(b.user_rates_bps[k].to_bits(), a.user_rates_bps[user.id].to_bits());
            prop_assert_eq!(b.association[k], a.association[user.id]);
        }
    }

    #[test]
    fn rates_finite_and_non_negative(
        bs in (0.0..300.0f64, 0.0..300.0f64),
        uavs in uav_strategy(),
        users in user_strategy(),
    ) {
        let (bs, uavs, users) = build(bs, &uavs, &users);
        let snap = evaluate_network(&bs, &uavs, &users, &RadioParams::default());
        prop_assert!(snap.user_rates_bps.iter().all(|r| r.is_finite() && *r >= 0.0));
    }

    #[test]
    fn reward_monotone_in_each_rate(
        rates in prop::collection::vec(0.0..1e3f64, 1..40),
        pick in any::<prop::sample::Index>(),
        bump in 0.0..500.0f64,
        alpha in 0.0..=1.0f64,
    ) {
        let weights = RewardWeights { alpha };
        let before = reward(&rates, &weights).unwrap();
        let mut raised = rates.clone();
        let k = pick.index(raised.len());
        raised[k] += bump;
        let after = reward(&raised, &weights).unwrap();
        prop_assert!(after >= before - 1e-9 * before.abs().max(1.0));
    }

    #[test]
    fn percentile_stays_within_sample(values in prop::collection::vec(-1e6..1e6f64, 1..60), q in 0.0..=1.0f64) {
        let p = percentile_linear(&values, q);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p >= lo && p <= hi);
    }

    #[test]
    fn greedy_choice_ignores_constant_shift(
        values in prop::array::uniform5(-10.0..10.0f64),
        shift in -1e3..1e3f64,
        seed in any::<u64>(),
    ) {
        // exact shifts only: integer-valued offsets keep ties intact
        let shift = shift.round();
        let values = values.map(|v| (v * 8.0).round() / 8.0);
        let shifted = values.map(|v| v + shift);
        let a = select_action(&values, 0.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = select_action(&shifted, 0.0, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn advantage_offset_leaves_q_unchanged(seed in any::<u64>(), offset in -50.0..50.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = DuelingNet::new(6, &[8, 8], 8, &mut rng);
        let obs = Array2::from_shape_fn((4, 6), |(i, j)| ((i * 6 + j) as f64 * 0.37).sin().abs());
        let mut shifted = net.clone();
        shifted.advantage_out.bias.mapv_inplace(|b| b + offset);
        let q = net.forward_batch(&obs).unwrap();
        let q_shifted = shifted.forward_batch(&obs).unwrap();
        for (a, b) in q.iter().zip(q_shifted.iter()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn effective_rate_bounded_and_hop_removal_safe(
        chain in prop::collection::vec(0.0..1e9f64, 0..6),
        fronthaul in 0.0..1e9f64,
        direct in 0.0..1e9f64,
        drop in any::<prop::sample::Index>(),
    ) {
        let rate = effective_rate(&chain, Some(fronthaul), direct);
        let min_term = chain.iter().copied().fold(fronthaul, f64::min);
        prop_assert!(rate <= direct.max(min_term));
        prop_assert!(rate >= direct);
        if !chain.is_empty() {
            let mut shorter = chain.clone();
            shorter.remove(drop.index(chain.len()));
            let shorter_min = shorter.iter().copied().fold(fronthaul, f64::min);
            prop_assert!(shorter_min >= min_term);
        }
    }

    #[test]
    fn epsilon_stays_in_bounds(steps in 0usize..400, delta in 0.001..0.5f64) {
        let mut s = EpsilonSchedule::new(0.99, 0.01, delta);
        for _ in 0..steps {
            s = s.decay();
        }
        prop_assert!(s.current >= 0.01 && s.current <= 0.99);
    }
}

#[test]
fn killing_a_uav_removes_it_from_every_link() {
    let params = RadioParams::default();
    let (bs, mut uavs, users) = build(
        (10.0, 0.0),
        &[(10.0, 0.0, true), (60.0, 60.0, true)],
        &[(70.0, 70.0), (65.0, 75.0)],
    );
    let before = evaluate_network(&bs, &uavs, &users, &params);
    assert_eq!(before.chain.order, vec![0, 1]);
    uavs[1].alive = false;
    let after = evaluate_network(&bs, &uavs, &users, &params);
    assert_eq!(after.chain.order, vec![0]);
    assert!(after.fronthaul_snr.iter().all(|row| row[1] == 0.0));
}
