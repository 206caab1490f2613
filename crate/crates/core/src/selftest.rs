//! Fast invariant checks runnable from the command line.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{double_q_target, select_action, DuelingNet, ReplayBuffer, Transition};
use crate::channel::{atg_path_loss_db, elevation_angle, fspl_db, los_probability, Position, RadioParams};
use crate::environment::{reward, Action, RewardWeights};
use crate::topology::{evaluate_network, form_backhaul, GroundStation, Uav, UserTerminal};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn random_topology(rng: &mut ChaCha8Rng) -> (GroundStation, Vec<Uav>, Vec<UserTerminal>) {
    let bs = GroundStation {
        pos: Position::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0), 10.0),
    };
    let n_uavs = rng.random_range(0..=5);
    let uavs = (0..n_uavs)
        .map(|id| Uav {
            id,
            pos: Position::new(rng.random_range(0.0..300.0), rng.random_range(0.0..300.0), 100.0),
            alive: rng.random_bool(0.9),
        })
        .collect();
    let n_users = rng.random_range(1..=50);
    let users = (0..n_users)
        .map(|id| UserTerminal {
            id,
            pos: Position::ground(rng.random_range(0.0..300.0), rng.random_range(0.0..300.0)),
        })
        .collect();
    (bs, uavs, users)
}

fn channel_identity(rng: &mut ChaCha8Rng) -> Check {
    let params = RadioParams {
        eta_los_db: 0.0,
        eta_nlos_db: 0.0,
        f_a2a_hz: RadioParams::default().f_access_hz,
        ..RadioParams::default()
    };
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = rng.random_range(1.0..5000.0);
        let phi = rng.random_range(0.0..=std::f64::consts::FRAC_PI_2);
        let a = atg_path_loss_db(d, phi, &params).unwrap_or(f64::NAN);
        let b = fspl_db(d, &params).unwrap_or(f64::NAN);
        worst = worst.max((a - b).abs());
    }
    check("channel identity", worst <= 1e-9, format!("max |ATG - FSPL| = {worst:e} dB"))
}

fn los_monotone() -> Check {
    let params = RadioParams::default();
    let probs: Vec<f64> = (0..=90)
        .map(|deg| los_probability((deg as f64).to_radians(), &params).unwrap_or(f64::NAN))
        .collect();
    let ok = probs.iter().all(|p| *p > 0.0 && *p < 1.0) && probs.windows(2).all(|w| w[1] > w[0]);
    check("LoS probability monotone in (0, 1)", ok, format!("p(0) = {:.4e}", probs[0]))
}

fn chain_invariants(rng: &mut ChaCha8Rng) -> Check {
    let params = RadioParams {
        comm_range_m: 150.0,
        ..RadioParams::default()
    };
    let mut bad = 0;
    for _ in 0..2000 {
        let (bs, uavs, _) = random_topology(rng);
        let chain = form_backhaul(&bs, &uavs, &params);
        let mut seen = std::collections::HashSet::new();
        let mut prev = bs.pos;
        for (k, &id) in chain.order.iter().enumerate() {
            let uav = uavs.iter().find(|u| u.id == id).expect("chain member exists");
            let fine = uav.alive
                && seen.insert(id)
                && chain.hop_snr[k] >= params.snr_threshold
                && prev.distance(&uav.pos) <= params.comm_range_m;
            if !fine {
                bad += 1;
                break;
            }
            prev = uav.pos;
        }
    }
    check("backhaul chain invariants", bad == 0, format!("{bad} violating topologies"))
}

fn rates_non_negative(rng: &mut ChaCha8Rng) -> Check {
    let params = RadioParams::default();
    let mut bad = 0;
    for _ in 0..300 {
        let (bs, uavs, users) = random_topology(rng);
        let snap = evaluate_network(&bs, &uavs, &users, &params);
        if snap.user_rates_bps.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            bad += 1;
        }
        // elevation angles stay in range for every pair
        for u in &users {
            let phi = elevation_angle(&bs.pos, &u.pos);
            if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&phi) {
                bad += 1;
            }
        }
    }
    check("finite non-negative rates", bad == 0, format!("{bad} violations"))
}

fn reward_monotone(rng: &mut ChaCha8Rng) -> Check {
    let weights = RewardWeights::default();
    let mut bad = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..30);
        let mut rates: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1e3)).collect();
        let before = reward(&rates, &weights).unwrap_or(f64::NAN);
        let k = rng.random_range(0..n);
        rates[k] += rng.random_range(0.0..100.0);
        let after = reward(&rates, &weights).unwrap_or(f64::NAN);
        if after < before {
            bad += 1;
        }
    }
    check("reward monotone in every rate", bad == 0, format!("{bad} decreases"))
}

fn argmax_shift_invariance(rng: &mut ChaCha8Rng) -> Check {
    let mut bad = 0;
    for _ in 0..1000 {
        let values: [f64; 5] = std::array::from_fn(|_| rng.random_range(-5.0..5.0));
        let shift = rng.random_range(-100.0..100.0);
        let shifted = values.map(|v| v + shift);
        let seed = rng.random::<u64>();
        let a = select_action(&values, 0.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = select_action(&shifted, 0.0, &mut ChaCha8Rng::seed_from_u64(seed));
        if a != b {
            bad += 1;
        }
    }
    check("greedy choice invariant to constant shift", bad == 0, format!("{bad} changes"))
}

fn replay_uniformity(rng: &mut ChaCha8Rng) -> Check {
    let n = 1000;
    let mut buf = ReplayBuffer::new(n);
    for i in 0..n {
        buf.push(Transition {
            obs: vec![i as f64],
            action: Action::Hover,
            reward: i as f64,
            next_obs: vec![i as f64],
            terminal: false,
        });
    }
    let draws = 100_000usize;
    let batch = 50;
    let mut counts = vec![0usize; n];
    for _ in 0..draws / batch {
        for i in buf.sample_indices(batch, rng).expect("buffer is full") {
            counts[i] += 1;
        }
    }
    let p = 1.0 / n as f64;
    let expected = draws as f64 * p;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    let worst = counts.iter().map(|&c| (c as f64 - expected).abs() / sd).fold(0.0, f64::max);
    check("replay sampling uniform", worst < 4.0, format!("max |z| = {worst:.2}"))
}

fn dueling_identity(rng: &mut ChaCha8Rng) -> Check {
    let net = DuelingNet::new(9, &[16, 16], 8, rng);
    let obs = Array2::from_shape_fn((64, 9), |_| rng.random::<f64>());
    let cache = net.forward_cached(&obs).expect("widths match");
    let worst = (0..64)
        .map(|i| (cache.q.row(i).mean().unwrap_or(f64::NAN) - cache.value[[i, 0]]).abs())
        .fold(0.0, f64::max);
    check("dueling mean_a Q = V", worst <= 1e-9, format!("max error {worst:e}"))
}

/// Largest relative error between analytic and central-difference gradients.
pub fn gradient_check(net: &DuelingNet, obs: &Array2<f64>, actions: &[usize], targets: &[f64], h: f64) -> f64 {
    let (_, grads) = net.loss_and_gradients(obs, actions, targets).expect("shapes match");
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    let n_layers = net.layers().len();
    for li in 0..n_layers {
        let (rows, cols) = net.layers()[li].weights.dim();
        let mut params: Vec<(Option<(usize, usize)>, usize)> = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                params.push((Some((r, c)), 0));
            }
        }
        for b in 0..cols {
            params.push((None, b));
        }
        for (w, b) in params {
            let analytic = match w {
                Some(rc) => grads.layers()[li].weights[rc],
                None => grads.layers()[li].bias[b],
            };
            let mut eval = |delta: f64| {
                {
                    let mut layers = probe.layers_mut();
                    match w {
                        Some(rc) => layers[li].weights[rc] += delta,
                        None => layers[li].bias[b] += delta,
                    }
                }
                probe.loss(obs, actions, targets).expect("shapes match")
            };
            let plus = eval(h);
            let minus = eval(-2.0 * h);
            eval(h);
            let numeric = (plus - minus) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

fn finite_difference(rng: &mut ChaCha8Rng) -> Check {
    let net = DuelingNet::new(3, &[4, 4], 4, rng);
    let obs = Array2::from_shape_fn((6, 3), |_| rng.random_range(-1.0..1.0));
    let actions: Vec<usize> = (0..6).map(|_| rng.random_range(0..5)).collect();
    let targets: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let worst = gradient_check(&net, &obs, &actions, &targets, 1e-6);
    check("dueling gradient matches finite differences", worst < 1e-4, format!("max relative error {worst:e}"))
}

fn double_target_bound(rng: &mut ChaCha8Rng) -> Check {
    let mut bad = 0;
    for _ in 0..2000 {
        let online: [f64; 5] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
        let target: [f64; 5] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
        let r = rng.random_range(-5.0..5.0);
        let gamma = rng.random_range(0.0..1.0);
        let y = double_q_target(r, gamma, false, &online, &target);
        let bound = r + gamma * target.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if y > bound {
            bad += 1;
        }
    }
    check("double target below target-network max", bad == 0, format!("{bad} violations"))
}

pub fn run_all(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        channel_identity(&mut rng),
        los_monotone(),
        chain_invariants(&mut rng),
        rates_non_negative(&mut rng),
        reward_monotone(&mut rng),
        argmax_shift_invariance(&mut rng),
        replay_uniformity(&mut rng),
        dueling_identity(&mut rng),
        finite_difference(&mut rng),
        double_target_bound(&mut rng),
    ]
}
