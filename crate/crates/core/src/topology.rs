//! Network entities, backhaul chain formation, user association and the
//! per-user effective end-to-end rate.
//!
//! Traffic for UAV-served users flows `BS -> ψ1 -> ψ2 -> … -> ψU -> user`.
//! The chain `Ψ` is grown breadth-first from the base station: every round
//! probes each unexplored UAV against the current frontier and attaches the
//! strongest feasible one. Users are served by the chain tail `ψU` and keep the
//! better of that path and their direct base-station link.

use serde::{Deserialize, Serialize};

use crate::channel::{link_rate_bps, link_snr, LinkClass, Position, RadioParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStation {
    pub pos: Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uav {
    pub id: usize,
    pub pos: Position,
    pub alive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserTerminal {
    pub id: usize,
    pub pos: Position,
}

/// Ordered relay chain from the base station towards the users.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BackhaulChain {
    /// UAV ids, `order[0]` attached to the base station.
    pub order: Vec<usize>,
    /// Linear SNR of each hop; `hop_snr[k]` feeds `order[k]`.
    pub hop_snr: Vec<f64>,
}

impl BackhaulChain {
    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    /// The UAV that serves users, if any.
    pub fn tail(&self) -> Option<usize> {
        self.order.last().copied()
    }

    pub fn min_hop_snr(&self) -> Option<f64> {
        self.hop_snr.iter().copied().reduce(f64::min)
    }

    pub fn contains(&self, uav_id: usize) -> bool {
        self.order.contains(&uav_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Association {
    Direct,
    ViaUav,
}

/// Work counters for one network evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounters {
    /// Candidate hops probed while forming the chain.
    pub backhaul_pairs: usize,
    /// UAV-to-user links evaluated during association.
    pub fronthaul_links: usize,
    pub direct_links: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub bs: GroundStation,
    /// All UAVs sorted by id, dead ones included.
    pub uavs: Vec<Uav>,
    pub users: Vec<UserTerminal>,
    pub chain: BackhaulChain,
    /// Per user, same order as `users`.
    pub association: Vec<Association>,
    /// Effective end-to-end rate per user, bit/s.
    pub user_rates_bps: Vec<f64>,
    /// Effective end-to-end SNR per user: the better of the relay path
    /// bottleneck and the direct link.
    pub end_to_end_snr: Vec<f64>,
    /// `fronthaul_snr[m][k]` is the SNR from `uavs[k]` to `users[m]`; zero for
    /// dead UAVs and out-of-range pairs.
    pub fronthaul_snr: Vec<Vec<f64>>,
    pub counters: EvalCounters,
}

impl NetworkSnapshot {
    pub fn rate_of(&self, user_id: usize) -> Option<f64> {
        self.users
            .iter()
            .position(|u| u.id == user_id)
            .map(|i| self.user_rates_bps[i])
    }

    pub fn mean_rate_bps(&self) -> f64 {
        crate::stats::mean(&self.user_rates_bps)
    }
}

fn within_range(a: &Position, b: &Position, params: &RadioParams) -> bool {
    a.distance(b) <= params.comm_range_m
}

/// Grow the backhaul chain from the base station.
///
/// Each round evaluates the hop from the chain frontier (initially the base
/// station) to every unexplored UAV and attaches the one with the highest SNR
/// among those within range and above the SNR threshold; ties keep the earlier
/// UAV. Growth stops when no unexplored UAV is reachable from the frontier.
/// Dead UAVs are ignored.
pub fn form_backhaul(bs: &GroundStation, uavs: &[Uav], params: &RadioParams) -> BackhaulChain {
    form_backhaul_counted(bs, uavs, params).0
}

/// [`form_backhaul`] plus the number of candidate hops it evaluated. At most
/// `U·(U+1)/2 + U` for `U` alive UAVs.
pub fn form_backhaul_counted(
    bs: &GroundStation,
    uavs: &[Uav],
    params: &RadioParams,
) -> (BackhaulChain, usize) {
    let mut unexplored: Vec<&Uav> = uavs.iter().filter(|u| u.alive).collect();
    let mut chain = BackhaulChain::default();
    let mut frontier = bs.pos;
    let mut evaluations = 0;

    while !unexplored.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for (slot, uav) in unexplored.iter().enumerate() {
            evaluations += 1;
            if !within_range(&frontier, &uav.pos, params) {
                continue;
            }
            let snr = link_snr(LinkClass::Backhaul, &frontier, &uav.pos, params);
            if snr > params.snr_threshold && best.is_none_or(|(_, s)| snr > s) {
                best = Some((slot, snr));
            }
        }
        let Some((slot, snr)) = best else { break };
        let uav = unexplored.remove(slot);
        chain.order.push(uav.id);
        chain.hop_snr.push(snr);
        frontier = uav.pos;
    }
    (chain, evaluations)
}

/// Users go through the UAV path only when its bottleneck SNR strictly beats
/// the direct link.
pub fn associate_user(snr_fronthaul: f64, snr_chain_min: f64, snr_direct: f64) -> Association {
    if snr_fronthaul.min(snr_chain_min) > snr_direct {
        Association::ViaUav
    } else {
        Association::Direct
    }
}

/// `max(min(chain ∪ {fronthaul}), direct)`. Without a serving UAV the user
/// only has its direct link.
pub fn effective_rate(chain_rates_bps: &[f64], fronthaul_rate_bps: Option<f64>, direct_rate_bps: f64) -> f64 {
    match fronthaul_rate_bps {
        None => direct_rate_bps,
        Some(fronthaul) => {
            let bottleneck = chain_rates_bps.iter().copied().fold(fronthaul, f64::min);
            bottleneck.max(direct_rate_bps)
        }
    }
}

/// Form the chain, evaluate every link and fill in per-user rates.
pub fn evaluate_network(
    bs: &GroundStation,
    uavs: &[Uav],
    users: &[UserTerminal],
    params: &RadioParams,
) -> NetworkSnapshot {
    let mut uavs = uavs.to_vec();
    uavs.sort_by_key(|u| u.id);

    let (chain, backhaul_pairs) = form_backhaul_counted(bs, &uavs, params);
    let mut counters = EvalCounters {
        backhaul_pairs,
        ..EvalCounters::default()
    };

    let chain_rates: Vec<f64> = chain
        .hop_snr
        .iter()
        .map(|&snr| link_rate_bps(LinkClass::Backhaul, snr, params))
        .collect();
    let chain_min_snr = chain.min_hop_snr();
    let serving = chain
        .tail()
        .map(|id| uavs.iter().position(|u| u.id == id).expect("chain member exists"));

    let mut association = Vec::with_capacity(users.len());
    let mut user_rates_bps = Vec::with_capacity(users.len());
    let mut end_to_end_snr = Vec::with_capacity(users.len());
    let mut fronthaul_snr = Vec::with_capacity(users.len());

    for user in users {
        let row: Vec<f64> = uavs
            .iter()
            .map(|uav| {
                if !uav.alive {
                    return 0.0;
                }
                counters.fronthaul_links += 1;
                if within_range(&uav.pos, &user.pos, params) {
                    link_snr(LinkClass::Fronthaul, &uav.pos, &user.pos, params)
                } else {
                    0.0
                }
            })
            .collect();

        counters.direct_links += 1;
        let direct_snr = link_snr(LinkClass::Direct, &bs.pos, &user.pos, params);
        let direct_rate = link_rate_bps(LinkClass::Direct, direct_snr, params);

        let (tag, rate, e2e) = match (serving, chain_min_snr) {
            (Some(k), Some(chain_min)) => {
                let fronthaul = row[k];
                let fronthaul_rate = link_rate_bps(LinkClass::Fronthaul, fronthaul, params);
                (
                    associate_user(fronthaul, chain_min, direct_snr),
                    effective_rate(&chain_rates, Some(fronthaul_rate), direct_rate),
                    fronthaul.min(chain_min).max(direct_snr),
                )
            }
            _ => (Association::Direct, effective_rate(&[], None, direct_rate), direct_snr),
        };
        association.push(tag);
        user_rates_bps.push(rate);
        end_to_end_snr.push(e2e);
        fronthaul_snr.push(row);
    }

    NetworkSnapshot {
        bs: *bs,
        uavs,
        users: users.to_vec(),
        chain,
        association,
        user_rates_bps,
        end_to_end_snr,
        fronthaul_snr,
        counters,
    }
}

/// Fraction of users whose end-to-end SNR meets the threshold.
pub fn coverage_ratio(snapshot: &NetworkSnapshot, params: &RadioParams) -> f64 {
    if snapshot.users.is_empty() {
        return 0.0;
    }
    let covered = snapshot
        .end_to_end_snr
        .iter()
        .filter(|&&snr| snr >= params.snr_threshold)
        .count();
    covered as f64 / snapshot.users.len() as f64
}
