//! Slot-level simulation of BlueFlood rounds over a fixed topology.
//!
//! Every slot, each node picks an action from its state machine. Listeners
//! resolve what they hear from the transmitters on their channel through the
//! link table: the two strongest in-range arrivals define the power delta,
//! arrival-time delta and beat period of the query, and a Bernoulli draw
//! decides the reception.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::airtime::{air_time, slot_length, Framing, PhyMode, DEFAULT_GUARD};
use crate::analytic::clock_jitter_sigma;
use crate::error::{invalid, Error, Result};
use crate::link::{default_link_table, LinkQuery, LinkTable};
use crate::node::{advance_slot, handle_reception, next_action, round_start, Action, NodePolicy, NodeState, Phase};
use crate::rng;

/// Carrier frequency used to turn a ppm clock error into a CFO.
pub const CARRIER_HZ: f64 = 2.44e9;
/// Radio clock that sets the default timing jitter.
pub const DEFAULT_CLOCK_HZ: f64 = 16e6;

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// `gain_db[src][dst]`; `-inf` means no link.
    pub gain_db: Vec<Vec<f64>>,
    pub cfo_hz: Vec<f64>,
    /// Standard deviation of one hop's timing error, seconds.
    pub jitter_sigma: Vec<f64>,
    pub initiator: usize,
}

impl Topology {
    pub fn new(gain_db: Vec<Vec<f64>>, cfo_hz: Vec<f64>, initiator: usize) -> Result<Self> {
        let n = gain_db.len();
        let t = Self { gain_db, cfo_hz, jitter_sigma: vec![clock_jitter_sigma(DEFAULT_CLOCK_HZ); n], initiator };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.gain_db.len();
        if n < 2 {
            return Err(invalid("topology needs at least two nodes"));
        }
        if self.gain_db.iter().any(|row| row.len() != n) {
            return Err(invalid("gain matrix is not square"));
        }
        if self.cfo_hz.len() != n || self.jitter_sigma.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: self.cfo_hz.len().min(self.jitter_sigma.len()) });
        }
        if self.initiator >= n {
            return Err(invalid(format!("initiator {} out of range", self.initiator)));
        }
        if self.gain_db.iter().flatten().any(|g| g.is_nan() || *g == f64::INFINITY) {
            return Err(invalid("gains must be finite or -inf"));
        }
        if self.cfo_hz.iter().any(|c| !c.is_finite()) || self.jitter_sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(invalid("cfo and jitter must be finite and jitter >= 0"));
        }
        if !(0..n).any(|d| d != self.initiator && self.gain_db[self.initiator][d].is_finite()) {
            return Err(invalid("no node is reachable from the initiator"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gain_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gain_db.is_empty()
    }

    /// Builds a matrix from symmetric edges, all other pairs disconnected.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], initiator: usize) -> Result<Self> {
        let mut g = vec![vec![f64::NEG_INFINITY; n]; n];
        for &(a, b, gain) in edges {
            if a >= n || b >= n {
                return Err(invalid(format!("edge ({a}, {b}) references a missing node")));
            }
            g[a][b] = gain;
            g[b][a] = gain;
        }
        Self::new(g, vec![0.0; n], initiator)
    }

    /// Nodes `0..n` in a line, each linked to its neighbours, initiator at node 0.
    pub fn line(n: usize, gain_db: f64) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, gain_db)).collect();
        Self::from_edges(n, &edges, 0)
    }

    /// Every pair linked with the same gain, initiator at node 0.
    pub fn full(n: usize, gain_db: f64) -> Result<Self> {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.push((a, b, gain_db));
            }
        }
        Self::from_edges(n, &edges, 0)
    }

    /// Draws each node's CFO from a zero-mean normal with `ppm_std` clock error.
    pub fn with_random_cfo(mut self, ppm_std: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, ppm_std * 1e-6 * CARRIER_HZ).map_err(|e| invalid(e.to_string()))?;
        for (i, c) in self.cfo_hz.iter_mut().enumerate() {
            *c = normal.sample(&mut rng::stream(seed, &[0xCF0, i as u64]));
        }
        Ok(self)
    }

    /// Unweighted shortest-path hop distance from the initiator over links
    /// with gain at least `min_gain_db`.
    pub fn hop_distances(&self, min_gain_db: f64) -> Vec<Option<u32>> {
        let n = self.len();
        let mut dist = vec![None; n];
        dist[self.initiator] = Some(0);
        let mut queue = VecDeque::from([self.initiator]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if v != u && dist[v].is_none() && self.gain_db[u][v] >= min_gain_db {
                    dist[v] = Some(dist[u].unwrap() + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn edges_csv(&self) -> String {
        let mut out = String::from("src,dst,gain_db\n");
        for (s, row) in self.gain_db.iter().enumerate() {
            for (d, g) in row.iter().enumerate() {
                if s != d && g.is_finite() {
                    let _ = writeln!(out, "{s},{d},{g}");
                }
            }
        }
        out
    }

    pub fn nodes_csv(&self) -> String {
        let mut out = String::from("id,cfo_hz,is_initiator\n");
        for (i, c) in self.cfo_hz.iter().enumerate() {
            let _ = writeln!(out, "{i},{c},{}", i == self.initiator);
        }
        out
    }

    /// Parses an edge list (directed rows) and a node table whose second column is
    /// either `cfo_hz` or `ppm_seed`; the latter draws the CFO with `ppm_std`.
    pub fn from_csv(edges: &str, nodes: &str, ppm_std: f64) -> Result<Self> {
        let node_rows = data_rows(nodes, &[&["id", "cfo_hz", "is_initiator"], &["id", "ppm_seed", "is_initiator"]])?;
        let by_seed = node_rows.header[1] == "ppm_seed";
        let n = node_rows.rows.len();
        let mut cfo = vec![f64::NAN; n];
        let mut initiator = None;
        for (line, f) in &node_rows.rows {
            let id: usize = parse_field(f[0], *line)?;
            if id >= n || !cfo[id].is_nan() {
                return Err(Error::Parse { line: *line, msg: format!("node id {id} duplicated or not dense") });
            }
            cfo[id] = if by_seed {
                let seed: u64 = parse_field(f[1], *line)?;
                let normal = Normal::new(0.0, ppm_std * 1e-6 * CARRIER_HZ).map_err(|e| invalid(e.to_string()))?;
                normal.sample(&mut rng::stream(seed, &[0xCF0]))
            } else {
                parse_field(f[1], *line)?
            };
            if parse_flag(f[2], *line)? && initiator.replace(id).is_some() {
                return Err(Error::Parse { line: *line, msg: "more than one initiator".into() });
            }
        }
        let initiator = initiator.ok_or_else(|| invalid("node table names no initiator"))?;
        let mut g = vec![vec![f64::NEG_INFINITY; n]; n];
        for (line, f) in data_rows(edges, &[&["src", "dst", "gain_db"]])?.rows {
            let (s, d): (usize, usize) = (parse_field(f[0], line)?, parse_field(f[1], line)?);
            if s >= n || d >= n {
                return Err(Error::Parse { line, msg: format!("edge ({s}, {d}) references a missing node") });
            }
            g[s][d] = parse_field(f[2], line)?;
        }
        Self::new(g, cfo, initiator)
    }
}

struct Rows<'a> {
    header: Vec<&'a str>,
    rows: Vec<(usize, Vec<&'a str>)>,
}

fn data_rows<'a>(text: &'a str, headers: &[&[&str]]) -> Result<Rows<'a>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, head) = lines.next().ok_or_else(|| invalid("CSV is empty"))?;
    let header: Vec<&str> = head.split(',').map(str::trim).collect();
    if !headers.contains(&header.as_slice()) {
        return Err(Error::Parse { line: 1, msg: format!("unexpected header '{head}'") });
    }
    let mut rows = Vec::new();
    for (i, l) in lines {
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != header.len() {
            return Err(Error::Parse { line: i + 1, msg: format!("expected {} fields, got {}", header.len(), f.len()) });
        }
        rows.push((i + 1, f));
    }
    Ok(Rows { header, rows })
}

fn parse_flag(s: &str, line: usize) -> Result<bool> {
    match s {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(Error::Parse { line, msg: format!("expected 0/1 or true/false, got '{s}'") }),
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line, msg: format!("cannot parse '{s}'") })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub topology: Topology,
    /// Shared policy; the initiator flag is set per node from the topology.
    pub policy: NodePolicy,
    pub mode: PhyMode,
    pub pdu_len: usize,
    pub framing: Framing,
    pub link_table: LinkTable,
    pub rounds: u32,
    pub seed: u64,
    pub tx_power_dbm: f64,
    /// Received power below which a transmitter is out of range.
    pub noise_floor_dbm: f64,
    /// Per-slot Gaussian perturbation of every link gain.
    pub fading_std_db: f64,
    /// Probability that a channel is jammed in a given slot.
    pub channel_erasure: BTreeMap<u8, f64>,
    pub guard: f64,
    /// Nodes start knowing the schedule; otherwise non-initiators boot scanning.
    pub start_synced: bool,
    pub record_trace: bool,
}

impl SimConfig {
    pub fn new(topology: Topology, policy: NodePolicy, mode: PhyMode) -> Self {
        Self {
            topology,
            policy,
            mode,
            pdu_len: crate::airtime::IBEACON_PDU_LEN,
            framing: Framing::Measured,
            link_table: default_link_table(),
            rounds: 1000,
            seed: 0,
            tx_power_dbm: 0.0,
            noise_floor_dbm: -95.0,
            fading_std_db: 1.0,
            channel_erasure: BTreeMap::new(),
            guard: DEFAULT_GUARD,
            start_synced: true,
            record_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.policy.validate()?;
        if self.rounds == 0 {
            return Err(invalid("rounds must be >= 1"));
        }
        if !(self.fading_std_db >= 0.0) || !self.tx_power_dbm.is_finite() || !self.noise_floor_dbm.is_finite() {
            return Err(invalid("fading std, tx power and noise floor must be finite, fading >= 0"));
        }
        if self.channel_erasure.values().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("erasure probabilities must lie in [0, 1]"));
        }
        if self.link_table.surface(self.mode, true).is_none() {
            return Err(Error::MissingSurface(format!("mode {} same_data=true", self.mode)));
        }
        air_time(self.mode, self.pdu_len, self.framing)?;
        Ok(())
    }

    pub fn air_time(&self) -> f64 {
        air_time(self.mode, self.pdu_len, self.framing).expect("validated PDU length")
    }

    pub fn slot_length(&self) -> f64 {
        slot_length(self.mode, self.pdu_len, self.framing, self.guard, self.mode.slot_padding()).expect("validated")
    }

    fn in_range(&self, src: usize, dst: usize) -> bool {
        src != dst && self.tx_power_dbm + self.topology.gain_db[src][dst] >= self.noise_floor_dbm
    }

    /// Hop distance from the initiator over in-range links.
    pub fn hop_distances(&self) -> Vec<Option<u32>> {
        self.topology.hop_distances(self.noise_floor_dbm - self.tx_power_dbm)
    }
}

/// One transmission heard at a listener.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub node: usize,
    pub power_dbm: f64,
    pub time_offset: f64,
    pub cfo_hz: f64,
}

/// Decides whether a listener decodes the superposition of `arrivals`.
/// Returns the strongest sender on success.
pub fn resolve_arrivals<R: Rng + ?Sized>(
    arrivals: &[Arrival],
    mode: PhyMode,
    t_packet: f64,
    table: &LinkTable,
    rng: &mut R,
) -> Result<Option<usize>> {
    let mut sorted: Vec<&Arrival> = arrivals.iter().collect();
    sorted.sort_by(|a, b| b.power_dbm.total_cmp(&a.power_dbm));
    let query = match sorted.as_slice() {
        [] => return Ok(None),
        [_] => LinkQuery::single(mode, t_packet),
        [a, b, ..] => {
            let df = (a.cfo_hz - b.cfo_hz).abs();
            LinkQuery {
                mode,
                same_data: true,
                delta_p_db: a.power_dbm - b.power_dbm,
                delta_t: (a.time_offset - b.time_offset).abs(),
                t_packet,
                t_beat: if df > 0.0 { 1.0 / df } else { f64::INFINITY },
                snr_db: None,
            }
        }
    };
    let p = table.reception_probability(&query)?;
    Ok((rng.random::<f64>() < p).then_some(sorted[0].node))
}

/// A node transmitting in the current slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub node: usize,
    pub channel: u8,
    /// Hops from the initiator; scales the timing jitter.
    pub hop_depth: u32,
}

/// Reception outcome for one listener: filters transmitters by channel and
/// range, applies channel erasure, fading and per-hop jitter, then resolves.
pub fn resolve_slot<R: Rng + ?Sized>(
    listener: usize,
    channel: u8,
    transmitters: &[Transmission],
    config: &SimConfig,
    rng: &mut R,
) -> Result<Option<usize>> {
    let topo = &config.topology;
    let in_range: Vec<&Transmission> =
        transmitters.iter().filter(|t| t.channel == channel && config.in_range(t.node, listener)).collect();
    if in_range.is_empty() {
        return Ok(None);
    }
    if let Some(&p) = config.channel_erasure.get(&channel) {
        if rng.random::<f64>() < p {
            return Ok(None);
        }
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let arrivals: Vec<Arrival> = in_range
        .iter()
        .map(|t| {
            let fading = config.fading_std_db * std_normal.sample(rng);
            let jitter = (t.hop_depth as f64).sqrt() * topo.jitter_sigma[t.node] * std_normal.sample(rng);
            Arrival {
                node: t.node,
                power_dbm: config.tx_power_dbm + topo.gain_db[t.node][listener] + fading,
                time_offset: jitter,
                cfo_hz: topo.cfo_hz[t.node],
            }
        })
        .collect();
    resolve_arrivals(&arrivals, config.mode, config.air_time(), &config.link_table, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: u32,
    pub received: Vec<bool>,
    /// First-reception slot + 1; 0 for the initiator.
    pub hop_count: Vec<Option<u32>>,
    pub latency: Vec<Option<f64>>,
    pub tx_count: Vec<u32>,
    /// Slots with the radio on (listen or transmit), per node.
    pub active_slots: Vec<u32>,
}

impl RoundMetrics {
    /// The round fails if any node missed the flood.
    pub fn success(&self) -> bool {
        self.received.iter().all(|&r| r)
    }

    pub fn total_active_slots(&self) -> u64 {
        self.active_slots.iter().map(|&a| a as u64).sum()
    }
}

/// What one node did in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotAction {
    Transmit(u8),
    Listen(u8),
    Sleep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotRecord {
    pub round: u32,
    pub slot: u32,
    pub node: usize,
    pub action: SlotAction,
    /// Node's `(round, slot)` counters when synced.
    pub counters: Option<(u16, u32)>,
    pub received: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub rounds: Vec<RoundMetrics>,
    pub trace: Vec<SlotRecord>,
}

pub fn run(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let n = config.topology.len();
    let init = config.topology.initiator;
    let policies: Vec<NodePolicy> = (0..n).map(|i| config.policy.clone().initiator(i == init)).collect();
    let mut states: Vec<NodeState> = policies
        .iter()
        .map(|p| if config.start_synced || p.is_initiator { NodeState::synced(p, 0) } else { NodeState::scanning(p) })
        .collect();
    let mut link_rng: ChaCha8Rng = rng::stream(config.seed, &[0x51_07]);
    let mut node_rngs: Vec<ChaCha8Rng> = (0..n).map(|i| rng::stream(config.seed, &[0x5CA7, i as u64])).collect();
    let slots = config.policy.slots_per_round();
    let slot_len = config.slot_length();
    let mut rounds = Vec::with_capacity(config.rounds as usize);
    let mut trace = Vec::new();
    let mut tick: u64 = 0;

    for round in 0..config.rounds {
        let r16 = round as u16;
        for (s, p) in states.iter_mut().zip(&policies) {
            *s = round_start(s, p, r16);
        }
        let mut m = RoundMetrics {
            round,
            received: vec![false; n],
            hop_count: vec![None; n],
            latency: vec![None; n],
            tx_count: vec![0; n],
            active_slots: vec![0; n],
        };
        m.received[init] = true;
        m.hop_count[init] = Some(0);
        m.latency[init] = Some(0.0);

        for slot in 0..slots {
            let actions: Vec<Action> = states.iter().zip(&policies).map(|(s, p)| next_action(s, p)).collect();
            let txs: Vec<Transmission> = actions
                .iter()
                .enumerate()
                .filter_map(|(i, a)| match a {
                    Action::Transmit { channel, .. } => {
                        Some(Transmission { node: i, channel: *channel, hop_depth: m.hop_count[i].unwrap_or(0) })
                    }
                    _ => None,
                })
                .collect();
            for i in 0..n {
                let action = &actions[i];
                let counters = match states[i].phase {
                    Phase::Synced { round, slot } => Some((round, slot)),
                    _ => None,
                };
                let mut heard = None;
                if let Action::Listen { channel } = action {
                    heard = resolve_slot(i, *channel, &txs, config, &mut link_rng)?;
                }
                if action.radio_on() {
                    m.active_slots[i] += 1;
                }
                if let Action::Transmit { .. } = action {
                    m.tx_count[i] += 1;
                }
                states[i] = match heard {
                    Some(sender) => {
                        let Action::Transmit { frame, .. } = &actions[sender] else { unreachable!() };
                        if !m.received[i] {
                            m.received[i] = true;
                            m.hop_count[i] = Some(slot + 1);
                            m.latency[i] = Some((slot + 1) as f64 * slot_len);
                        }
                        handle_reception(&states[i], &policies[i], &frame.pdu_bytes, tick)
                    }
                    None => advance_slot(&states[i], &policies[i], action, &mut node_rngs[i]),
                };
                if config.record_trace {
                    let action = match action {
                        Action::Transmit { channel, .. } => SlotAction::Transmit(*channel),
                        Action::Listen { channel } => SlotAction::Listen(*channel),
                        Action::Sleep => SlotAction::Sleep,
                    };
                    trace.push(SlotRecord { round, slot, node: i, action, counters, received: heard.is_some() });
                }
            }
            tick += 1;
        }
        rounds.push(m);
    }
    Ok(SimOutput { rounds, trace })
}

/// Radio-on time per node and round: `hop·guard + (N+1)·air`.
pub fn radio_time_avg(avg_hop: f64, guard: f64, n_tx: u32, air: f64) -> f64 {
    avg_hop * guard + (n_tx as f64 + 1.0) * air
}

/// Duty cycle where each failed round costs `wait_slots` full-length receptions.
pub fn duty_cycle_formula(r_avg: f64, per: f64, wait_slots: u32, air: f64, round_period: f64) -> f64 {
    (r_avg * (1.0 - per) + wait_slots as f64 * air * per) / round_period
}

/// Energy per round: `(hop·guard + air)·P_rx + N·air·P_tx`.
pub fn average_power_formula(avg_hop: f64, guard: f64, air: f64, n_tx: u32, p_tx: f64, p_rx: f64) -> f64 {
    (avg_hop * guard + air) * p_rx + n_tx as f64 * air * p_tx
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rounds: u32,
    pub end_to_end_per: f64,
    pub avg_hop: f64,
    pub avg_latency_ms: f64,
    /// Mean radio-on slots per round over the whole network.
    pub active_slots: f64,
    pub r_avg_ms: f64,
    pub duty_cycle_pct: f64,
}

/// Fraction of rounds in which at least one node missed the flood.
pub fn end_to_end_per(rounds: &[RoundMetrics]) -> f64 {
    if rounds.is_empty() {
        return 0.0;
    }
    rounds.iter().filter(|r| !r.success()).count() as f64 / rounds.len() as f64
}

/// Mean hop count over every successful non-initiator reception.
pub fn average_hop(rounds: &[RoundMetrics], initiator: usize) -> f64 {
    let hops: Vec<u32> = rounds
        .iter()
        .flat_map(|r| r.hop_count.iter().enumerate().filter(|(i, _)| *i != initiator).filter_map(|(_, h)| *h))
        .collect();
    if hops.is_empty() {
        0.0
    } else {
        hops.iter().map(|&h| h as f64).sum::<f64>() / hops.len() as f64
    }
}

/// Per-node count of rounds in which the node received.
pub fn delivery_counts(rounds: &[RoundMetrics]) -> Vec<u64> {
    let n = rounds.first().map_or(0, |r| r.received.len());
    let mut c = vec![0; n];
    for r in rounds {
        for (ci, &got) in c.iter_mut().zip(&r.received) {
            *ci += u64::from(got);
        }
    }
    c
}

pub fn duty_cycle(rounds: &[RoundMetrics], config: &SimConfig) -> f64 {
    let air = config.air_time();
    let r = radio_time_avg(average_hop(rounds, config.topology.initiator), config.guard, config.policy.n_tx, air);
    duty_cycle_formula(r, end_to_end_per(rounds), config.policy.wait_slots, air, config.policy.round_period)
}

pub fn average_power(rounds: &[RoundMetrics], config: &SimConfig, p_tx: f64, p_rx: f64) -> f64 {
    let hop = average_hop(rounds, config.topology.initiator);
    average_power_formula(hop, config.guard, config.air_time(), config.policy.n_tx, p_tx, p_rx)
}

pub fn summarize(rounds: &[RoundMetrics], config: &SimConfig) -> Summary {
    let init = config.topology.initiator;
    let air = config.air_time();
    let avg_hop = average_hop(rounds, init);
    let lat: Vec<f64> = rounds
        .iter()
        .flat_map(|r| r.latency.iter().enumerate().filter(|(i, _)| *i != init).filter_map(|(_, l)| *l))
        .collect();
    let avg_latency_ms = if lat.is_empty() { 0.0 } else { 1e3 * lat.iter().sum::<f64>() / lat.len() as f64 };
    let active_slots = if rounds.is_empty() {
        0.0
    } else {
        rounds.iter().map(RoundMetrics::total_active_slots).sum::<u64>() as f64 / rounds.len() as f64
    };
    Summary {
        rounds: rounds.len() as u32,
        end_to_end_per: end_to_end_per(rounds),
        avg_hop,
        avg_latency_ms,
        active_slots,
        r_avg_ms: 1e3 * radio_time_avg(avg_hop, config.guard, config.policy.n_tx, air),
        duty_cycle_pct: 100.0 * duty_cycle(rounds, config),
    }
}

pub const ROUND_CSV_HEADER: &str = "round,node,received,hop_count,latency_s,tx_count,active_slots";
pub const SUMMARY_CSV_HEADER: &str = "rounds,end_to_end_per,avg_hop,avg_latency_ms,active_slots,r_avg_ms,duty_cycle_pct";

pub fn rounds_to_csv(rounds: &[RoundMetrics]) -> String {
    let mut out = format!("{ROUND_CSV_HEADER}\n");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rounds {
        for i in 0..r.received.len() {
            let _ = writeln!(
                out,
                "{},{i},{},{},{},{},{}",
                r.round,
                r.received[i],
                opt(r.hop_count[i].map(|h| h.to_string())),
                opt(r.latency[i].map(|l| l.to_string())),
                r.tx_count[i],
                r.active_slots[i]
            );
        }
    }
    out
}

pub fn rounds_from_csv(text: &str) -> Result<Vec<RoundMetrics>> {
    let rows = data_rows(text, &[&ROUND_CSV_HEADER.split(',').collect::<Vec<_>>()])?;
    let mut rounds: Vec<RoundMetrics> = Vec::new();
    for (line, f) in rows.rows {
        let round: u32 = parse_field(f[0], line)?;
        let node: usize = parse_field(f[1], line)?;
        if rounds.last().is_none_or(|r| r.round != round) {
            rounds.push(RoundMetrics {
                round,
                received: vec![],
                hop_count: vec![],
                latency: vec![],
                tx_count: vec![],
                active_slots: vec![],
            });
        }
        let r = rounds.last_mut().unwrap();
        if node != r.received.len() {
            return Err(Error::Parse { line, msg: format!("node {node} out of order") });
        }
        r.received.push(parse_field(f[2], line)?);
        r.hop_count.push(non_empty(f[3]).map(|s| parse_field(s, line)).transpose()?);
        r.latency.push(non_empty(f[4]).map(|s| parse_field(s, line)).transpose()?);
        r.tx_count.push(parse_field(f[5], line)?);
        r.active_slots.push(parse_field(f[6], line)?);
    }
    Ok(rounds)
}

fn non_empty(s: &str) -> Option<&str> {
    (!s.is_empty()).then_some(s)
}

pub fn summary_to_csv(s: &Summary) -> String {
    format!(
        "{SUMMARY_CSV_HEADER}\n{},{},{},{},{},{},{}\n",
        s.rounds, s.end_to_end_per, s.avg_hop, s.avg_latency_ms, s.active_slots, s.r_avg_ms, s.duty_cycle_pct
    )
}

pub fn summary_from_csv(text: &str) -> Result<Summary> {
    let rows = data_rows(text, &[&SUMMARY_CSV_HEADER.split(',').collect::<Vec<_>>()])?;
    let [(line, f)] = rows.rows.as_slice() else {
        return Err(invalid("summary CSV must hold exactly one row"));
    };
    let line = *line;
    Ok(Summary {
        rounds: parse_field(f[0], line)?,
        end_to_end_per: parse_field(f[1], line)?,
        avg_hop: parse_field(f[2], line)?,
        avg_latency_ms: parse_field(f[3], line)?,
        active_slots: parse_field(f[4], line)?,
        r_avg_ms: parse_field(f[5], line)?,
        duty_cycle_pct: parse_field(f[6], line)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ideal(topology: Topology, n_tx: u32, diameter: u32) -> SimConfig {
        SimConfig {
            link_table: LinkTable::uniform(1.0).unwrap(),
            rounds: 20,
            tx_power_dbm: 0.0,
            noise_floor_dbm: -90.0,
            ..SimConfig::new(topology, NodePolicy::new(n_tx, diameter), PhyMode::Le1M)
        }
    }

    #[test]
    fn two_nodes_perfect_link() {
        let cfg = ideal(Topology::line(2, -60.0).unwrap(), 1, 0);
        let out = run(&cfg).unwrap();
        for r in &out.rounds {
            assert!(r.success());
            assert_eq!(r.hop_count[1], Some(1));
        }
        assert_eq!(end_to_end_per(&out.rounds), 0.0);
    }

    #[test]
    fn chain_hop_counts_and_latency() {
        let cfg = ideal(Topology::line(4, -60.0).unwrap(), 2, 3);
        let out = run(&cfg).unwrap();
        let slot = cfg.slot_length();
        for r in &out.rounds {
            assert_eq!(r.hop_count, vec![Some(0), Some(1), Some(2), Some(3)]);
            for (h, l) in r.hop_count.iter().zip(&r.latency) {
                assert_abs_diff_eq!(l.unwrap(), h.unwrap() as f64 * slot, epsilon = 1e-15);
            }
        }
        assert_eq!(cfg.hop_distances(), vec![Some(0), Some(1), Some(2), Some(3)]);
    }

    #[test]
    fn full_connectivity_ideal_table() {
        let cfg = ideal(Topology::full(6, -50.0).unwrap(), 3, 1);
        let out = run(&cfg).unwrap();
        assert!(out.rounds.iter().all(|r| r.success() && r.hop_count[1..].iter().all(|h| *h == Some(1))));
    }

    #[test]
    fn out_of_range_links_are_silent() {
        let mut cfg = ideal(Topology::line(3, -60.0).unwrap(), 1, 2);
        cfg.topology.gain_db[1][2] = -120.0;
        cfg.topology.gain_db[2][1] = -120.0;
        let out = run(&cfg).unwrap();
        assert!(out.rounds.iter().all(|r| !r.received[2]));
        assert_eq!(end_to_end_per(&out.rounds), 1.0);
    }

    #[test]
    fn erasure_blocks_reception() {
        let mut cfg = ideal(Topology::line(2, -60.0).unwrap(), 1, 0);
        cfg.channel_erasure.insert(37, 1.0);
        assert_eq!(end_to_end_per(&run(&cfg).unwrap().rounds), 1.0);
    }

    #[test]
    fn single_arrival_reception_is_near_certain() {
        let table = default_link_table();
        let mut rng = rng::stream(3, &[]);
        let a = [Arrival { node: 4, power_dbm: -60.0, time_offset: 0.0, cfo_hz: 0.0 }];
        let ok = (0..1000)
            .filter(|_| resolve_arrivals(&a, PhyMode::Le1M, 0.368e-3, &table, &mut rng).unwrap() == Some(4))
            .count();
        assert!(ok >= 990);
        assert_eq!(resolve_arrivals(&[], PhyMode::Le1M, 0.368e-3, &table, &mut rng).unwrap(), None);
    }

    #[test]
    fn equal_power_fast_beating_pair() {
        let table = default_link_table();
        let mut rng = rng::stream(4, &[]);
        let a = [
            Arrival { node: 0, power_dbm: -60.0, time_offset: 0.0, cfo_hz: 0.0 },
            Arrival { node: 1, power_dbm: -60.0, time_offset: 0.0, cfo_hz: 9645.0 },
        ];
        let n = 20_000;
        let ok = (0..n).filter(|_| resolve_arrivals(&a, PhyMode::Le1M, 0.368e-3, &table, &mut rng).unwrap().is_some()).count();
        assert_abs_diff_eq!(ok as f64 / n as f64, 0.06, epsilon = 0.01);
    }

    #[test]
    fn strong_capture_ignores_small_time_delta() {
        let table = default_link_table();
        let q = |dt: f64| LinkQuery {
            mode: PhyMode::Le1M,
            same_data: true,
            delta_p_db: 8.0,
            delta_t: dt,
            t_packet: 0.368e-3,
            t_beat: 1e-3,
            snr_db: None,
        };
        for dt in [0.0, 0.25e-6, 0.5e-6] {
            assert!(table.reception_probability(&q(dt)).unwrap() > 0.95);
        }
    }

    #[test]
    fn reference_duty_cycle_numbers() {
        let r = radio_time_avg(2.5, 32e-6, 3, 0.188e-3);
        assert_abs_diff_eq!(r, 0.832e-3, epsilon = 1e-12);
        assert_abs_diff_eq!(100.0 * duty_cycle_formula(r, 0.001, 13, 0.188e-3, 0.2), 0.41681, epsilon = 1e-5);
        assert_abs_diff_eq!(100.0 * duty_cycle_formula(r, 0.001, 13, 0.188e-3, 1.0), 0.083362, epsilon = 1e-6);
    }

    #[test]
    fn average_power_reductions() {
        assert_eq!(average_power_formula(2.5, 32e-6, 0.188e-3, 3, 0.0, 0.0), 0.0);
        assert_abs_diff_eq!(average_power_formula(2.5, 32e-6, 0.188e-3, 0, 5.0, 1.0), 0.268e-3, epsilon = 1e-12);
        assert_abs_diff_eq!(average_power_formula(2.5, 32e-6, 0.188e-3, 3, 1.0, 1.0), 0.832e-3, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_and_csv_roundtrip() {
        let mut cfg = SimConfig {
            rounds: 50,
            seed: 9,
            ..SimConfig::new(Topology::line(5, -70.0).unwrap().with_random_cfo(10.0, 1).unwrap(), NodePolicy::new(3, 4), PhyMode::Le2M)
        };
        cfg.noise_floor_dbm = -90.0;
        let a = run(&cfg).unwrap();
        assert_eq!(a, run(&cfg).unwrap());
        assert_eq!(rounds_from_csv(&rounds_to_csv(&a.rounds)).unwrap(), a.rounds);
        let s = summarize(&a.rounds, &cfg);
        assert_eq!(summary_from_csv(&summary_to_csv(&s)).unwrap(), s);
    }

    #[test]
    fn topology_csv_roundtrip_and_errors() {
        let t = Topology::line(4, -63.5).unwrap().with_random_cfo(20.0, 3).unwrap();
        assert_eq!(Topology::from_csv(&t.edges_csv(), &t.nodes_csv(), 0.0).unwrap(), t);
        let nodes = "id,ppm_seed,is_initiator\n0,1,true\n1,2,0\n";
        let t2 = Topology::from_csv("src,dst,gain_db\n0,1,-50\n", nodes, 20.0).unwrap();
        assert!(t2.cfo_hz[0] != t2.cfo_hz[1]);
        assert!(Topology::from_csv("src,dst,gain_db\n0,5,-50\n", nodes, 20.0).is_err());
        assert!(Topology::from_csv("src,dst,gain_db\n0,1,-50\n", "id,ppm_seed,is_initiator\n0,1,false\n1,2,false\n", 1.0).is_err());
        assert!(Topology::from_csv("a,b\n", nodes, 1.0).is_err());
        assert!(Topology::new(vec![vec![f64::NEG_INFINITY; 2]; 2], vec![0.0; 2], 0).is_err());
    }
}
