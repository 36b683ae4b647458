//! Randomized flood configurations and a trace checker for the protocol invariants.

use std::collections::HashMap;

use ctflood_core::airtime::PhyMode;
use ctflood_core::link::{default_link_table, LinkTable};
use ctflood_core::mesh::{SimConfig, SimOutput, SlotAction, Topology};
use ctflood_core::node::NodePolicy;
use rand::seq::IndexedRandom;
use rand::Rng;

/// A small random connected network with a random policy, trace recording on.
pub fn random_case(seed: u64) -> SimConfig {
    let mut rng = ctflood_core::rng::stream(seed, &[0x7E57]);
    let n = rng.random_range(2..=7usize);
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v, rng.random_range(-85.0..-50.0)));
    }
    for _ in 0..rng.random_range(0..n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            edges.push((a, b, rng.random_range(-85.0..-50.0)));
        }
    }
    let topology = Topology::from_edges(n, &edges, 0).unwrap().with_random_cfo(10.0, seed).unwrap();
    let n_tx = rng.random_range(1..=4u32);
    let mut policy = NodePolicy::new(n_tx, rng.random_range(0..=3u32));
    policy.resync_rounds = rng.random_range(1..=3u32);
    let pool = [37u8, 38, 39, 5, 20];
    policy.hop_sequence = (0..rng.random_range(1..=4)).map(|_| *pool.choose(&mut rng).unwrap()).collect();
    let link_table = if rng.random_bool(0.5) {
        default_link_table()
    } else {
        LinkTable::uniform(rng.random_range(0.2..1.0)).unwrap()
    };
    let mode = *[PhyMode::Le2M, PhyMode::Le1M, PhyMode::Coded500K, PhyMode::Coded125K].choose(&mut rng).unwrap();
    SimConfig {
        link_table,
        rounds: rng.random_range(2..=8),
        seed,
        noise_floor_dbm: -90.0,
        fading_std_db: rng.random_range(0.0..2.0),
        start_synced: rng.random_bool(0.5),
        record_trace: true,
        ..SimConfig::new(topology, policy, mode)
    }
}

/// Checks causality, channel agreement, the per-round transmission bound,
/// the hop-count lower bound, scan dwell and resynchronisation.
#[allow(clippy::needless_range_loop)]
pub fn check(cfg: &SimConfig, out: &SimOutput) -> Result<(), String> {
    let policy = &cfg.policy;
    let init = cfg.topology.initiator;
    let n = cfg.topology.len();
    let dwell = policy.scan_dwell() as usize;
    let dist = cfg.hop_distances();
    let slot_len = cfg.slot_length();

    let mut channel_at: HashMap<(u16, u32), u8> = HashMap::new();
    for rec in &out.trace {
        if let (Some(c), SlotAction::Transmit(ch) | SlotAction::Listen(ch)) = (rec.counters, rec.action) {
            if *channel_at.entry(c).or_insert(ch) != ch || ch != policy.channel_for(c.0, c.1) {
                return Err(format!("channel disagreement at counters {c:?}"));
            }
        }
    }

    for m in &out.rounds {
        for v in 0..n {
            let budget = if v == init { policy.wait_slots } else { policy.n_tx };
            if m.tx_count[v] > budget {
                return Err(format!("round {} node {v}: {} transmissions", m.round, m.tx_count[v]));
            }
            if let (Some(h), Some(d)) = (m.hop_count[v], dist[v]) {
                if h < d {
                    return Err(format!("round {} node {v}: hop {h} below distance {d}", m.round));
                }
            }
            if let (Some(h), Some(l)) = (m.hop_count[v], m.latency[v]) {
                if (l - h as f64 * slot_len).abs() > 1e-12 {
                    return Err(format!("round {} node {v}: latency identity broken", m.round));
                }
            }
        }
    }

    for v in 0..n {
        let recs: Vec<_> = out.trace.iter().filter(|r| r.node == v).collect();
        // causality within each round
        for round in 0..cfg.rounds {
            let rr: Vec<_> = recs.iter().filter(|r| r.round == round).collect();
            let first_rx = rr.iter().find(|r| r.received).map(|r| r.slot);
            let first_tx = rr.iter().find(|r| matches!(r.action, SlotAction::Transmit(_))).map(|r| r.slot);
            if v != init {
                if let Some(t) = first_tx {
                    if first_rx.is_none_or(|rx| t <= rx) {
                        return Err(format!("round {round} node {v}: transmits at {t} before receiving ({first_rx:?})"));
                    }
                }
            }
        }
        // scan dwell: channel changes only on multiples of 2C within a scan run
        let mut run_pos = 0usize;
        let mut prev: Option<u8> = None;
        for r in &recs {
            match (r.counters, r.action) {
                (None, SlotAction::Listen(ch)) => {
                    if let Some(p) = prev {
                        if p != ch && !run_pos.is_multiple_of(dwell) {
                            return Err(format!("node {v}: scan hop after {run_pos} slots (dwell {dwell})"));
                        }
                    }
                    prev = Some(ch);
                    run_pos += 1;
                    if r.received {
                        run_pos = 0;
                        prev = None;
                    }
                }
                _ => {
                    run_pos = 0;
                    prev = None;
                }
            }
        }
        // resynchronisation after exactly R silent synced rounds
        let mut silent = 0u32;
        let mut prev: Option<(bool, bool)> = None;
        for round in 0..cfg.rounds {
            let start = recs.iter().find(|r| r.round == round && r.slot == 0).unwrap();
            let scanning = start.counters.is_none();
            let got = out.rounds[round as usize].received[v];
            if let Some((prev_scanning, prev_got)) = prev {
                let expected = !prev_got && (prev_scanning || silent >= policy.resync_rounds);
                if scanning != expected {
                    return Err(format!("node {v} round {round}: scanning={scanning} after {silent} silent rounds"));
                }
            }
            if v == init && scanning {
                return Err("initiator scanned".into());
            }
            silent = if scanning || got || v == init { 0 } else { silent + 1 };
            prev = Some((scanning, got));
        }
    }
    Ok(())
}
