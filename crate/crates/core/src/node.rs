//! Per-node BlueFlood state machine.
//!
//! A round is `wait_slots + N` slots long. The initiator transmits in the
//! first `wait_slots` slots. Every other node listens until its first valid
//! reception, transmits in the `N` following slots and then sleeps. Rounds
//! and slots are numbered from 0; the round and slot of the sender travel in
//! the iBeacon major/minor fields.

use rand::Rng;

use crate::airtime::{decode_beacon, BeaconCodec, BeaconFrame};
use crate::error::{invalid, Result};

pub const MAX_CHANNELS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct NodePolicy {
    pub n_tx: u32,
    pub wait_slots: u32,
    pub is_initiator: bool,
    /// Consecutive silent rounds after which a node falls back to scanning.
    pub resync_rounds: u32,
    /// Channel hopping sequence indexed by the global slot number.
    pub hop_sequence: Vec<u8>,
    pub round_period: f64,
    pub diameter: u32,
    pub codec: BeaconCodec,
}

impl NodePolicy {
    /// `wait_slots = N + 2·diameter`, single advertising channel 37.
    pub fn new(n_tx: u32, diameter: u32) -> Self {
        Self {
            n_tx,
            wait_slots: n_tx + 2 * diameter,
            is_initiator: false,
            resync_rounds: 4,
            hop_sequence: vec![37],
            round_period: 0.2,
            diameter,
            codec: BeaconCodec::default(),
        }
    }

    pub fn initiator(mut self, yes: bool) -> Self {
        self.is_initiator = yes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop_sequence.is_empty() {
            return Err(invalid("hop sequence is empty"));
        }
        if self.channel_count() > MAX_CHANNELS {
            return Err(invalid(format!("{} channels exceed the limit of {MAX_CHANNELS}", self.channel_count())));
        }
        if self.wait_slots == 0 {
            return Err(invalid("wait_slots must be >= 1"));
        }
        if self.resync_rounds == 0 {
            return Err(invalid("resync threshold must be >= 1"));
        }
        if !(self.round_period > 0.0) {
            return Err(invalid("round period must be positive"));
        }
        Ok(())
    }

    pub fn slots_per_round(&self) -> u32 {
        self.wait_slots + self.n_tx
    }

    /// Number of distinct channels in the hop sequence.
    pub fn channel_count(&self) -> usize {
        let mut c = self.hop_sequence.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    }

    /// Slots spent on one scan channel before hopping.
    pub fn scan_dwell(&self) -> u32 {
        2 * self.channel_count() as u32
    }

    /// Transmissions the node makes in a round once it is allowed to send.
    pub fn tx_budget(&self) -> u32 {
        if self.is_initiator {
            self.wait_slots
        } else {
            self.n_tx
        }
    }

    pub fn channel_for(&self, round: u16, slot: u32) -> u8 {
        channel_for(round, slot, self.slots_per_round(), &self.hop_sequence)
    }
}

/// `sequence[(round·slots_per_round + slot) mod len]`.
pub fn channel_for(round: u16, slot: u32, slots_per_round: u32, sequence: &[u8]) -> u8 {
    let idx = (round as u64 * slots_per_round as u64 + slot as u64) % sequence.len() as u64;
    sequence[idx as usize]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Scanning { channel: u8, periods_left: u32 },
    Synced { round: u16, slot: u32 },
    Sleeping { until_round: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeState {
    pub phase: Phase,
    pub pending_tx: u32,
    pub missed_rounds: u32,
    pub received_this_round: bool,
    pub tx_this_round: u32,
    pub last_sync_timestamp: u64,
}

impl NodeState {
    /// A node that already knows the schedule, at the start of `round`.
    pub fn synced(policy: &NodePolicy, round: u16) -> Self {
        Self {
            phase: Phase::Synced { round, slot: 0 },
            pending_tx: if policy.is_initiator { policy.tx_budget() } else { 0 },
            missed_rounds: 0,
            received_this_round: false,
            tx_this_round: 0,
            last_sync_timestamp: 0,
        }
    }

    /// A freshly booted node scanning on the first channel of the sequence.
    pub fn scanning(policy: &NodePolicy) -> Self {
        Self {
            phase: Phase::Scanning { channel: policy.hop_sequence[0], periods_left: policy.scan_dwell() },
            pending_tx: 0,
            missed_rounds: 0,
            received_this_round: false,
            tx_this_round: 0,
            last_sync_timestamp: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Transmit { channel: u8, frame: BeaconFrame },
    Listen { channel: u8 },
    Sleep,
}

impl Action {
    pub fn radio_on(&self) -> bool {
        !matches!(self, Action::Sleep)
    }
}

pub fn next_action(state: &NodeState, policy: &NodePolicy) -> Action {
    match state.phase {
        Phase::Scanning { channel, .. } => Action::Listen { channel },
        Phase::Sleeping { .. } => Action::Sleep,
        Phase::Synced { round, slot } => {
            let channel = policy.channel_for(round, slot);
            let may_send = policy.is_initiator || state.received_this_round;
            if may_send && state.pending_tx > 0 && slot < policy.slots_per_round() {
                let frame = policy
                    .codec
                    .encode(round, slot as u16, &[])
                    .expect("an empty payload always fits");
                Action::Transmit { channel, frame }
            } else if !policy.is_initiator && !state.received_this_round && slot < policy.wait_slots {
                Action::Listen { channel }
            } else {
                Action::Sleep
            }
        }
    }
}

fn decode_valid(pdu: &[u8], policy: &NodePolicy) -> Option<BeaconFrame> {
    let frame = decode_beacon(pdu).ok()?;
    (frame.uuid == policy.codec.uuid && (frame.slot as u32) < policy.slots_per_round()).then_some(frame)
}

/// Adopts the sender's counters and positions the node at the next slot.
///
/// Frames that do not decode, or belong to another flood, leave the state unchanged.
pub fn handle_reception(state: &NodeState, policy: &NodePolicy, pdu: &[u8], timestamp: u64) -> NodeState {
    let Some(frame) = decode_valid(pdu, policy) else {
        return state.clone();
    };
    let mut next = state.clone();
    if !state.received_this_round {
        next.pending_tx = policy.tx_budget();
        next.received_this_round = true;
    }
    next.missed_rounds = 0;
    next.last_sync_timestamp = timestamp;
    next.phase = Phase::Synced { round: frame.round, slot: frame.slot as u32 + 1 };
    if frame.slot as u32 + 1 >= policy.slots_per_round() {
        return round_end(&next, policy);
    }
    next
}

/// One scan period without reception; hops to a random channel when the dwell runs out.
pub fn scan_step<R: Rng + ?Sized>(state: &NodeState, policy: &NodePolicy, rng: &mut R) -> NodeState {
    let Phase::Scanning { channel, periods_left } = state.phase else {
        return state.clone();
    };
    let mut next = state.clone();
    next.phase = if periods_left > 1 {
        Phase::Scanning { channel, periods_left: periods_left - 1 }
    } else {
        let mut channels = policy.hop_sequence.clone();
        channels.sort_unstable();
        channels.dedup();
        let pick = channels[rng.random_range(0..channels.len())];
        Phase::Scanning { channel: pick, periods_left: policy.scan_dwell() }
    };
    next
}

/// Closes the current round: synced nodes go to sleep until the next one,
/// or start scanning after `resync_rounds` silent rounds.
pub fn round_end(state: &NodeState, policy: &NodePolicy) -> NodeState {
    let round = match state.phase {
        Phase::Synced { round, .. } => round,
        _ => return state.clone(),
    };
    let mut next = state.clone();
    if !policy.is_initiator {
        if state.received_this_round {
            next.missed_rounds = 0;
        } else {
            next.missed_rounds += 1;
        }
    }
    next.received_this_round = false;
    next.pending_tx = 0;
    next.tx_this_round = 0;
    next.phase = if !policy.is_initiator && next.missed_rounds >= policy.resync_rounds {
        next.missed_rounds = 0;
        Phase::Scanning { channel: policy.channel_for(round.wrapping_add(1), 0), periods_left: policy.scan_dwell() }
    } else {
        Phase::Sleeping { until_round: round.wrapping_add(1) }
    };
    next
}

/// Wakes a sleeping node at the start of `round`.
pub fn round_start(state: &NodeState, policy: &NodePolicy, round: u16) -> NodeState {
    match state.phase {
        Phase::Sleeping { until_round } if until_round == round => {
            let mut next = NodeState::synced(policy, round);
            next.missed_rounds = state.missed_rounds;
            next.last_sync_timestamp = state.last_sync_timestamp;
            next
        }
        _ => state.clone(),
    }
}

/// Moves past a slot in which the node did not receive.
pub fn advance_slot<R: Rng + ?Sized>(state: &NodeState, policy: &NodePolicy, action: &Action, rng: &mut R) -> NodeState {
    match state.phase {
        Phase::Scanning { .. } => scan_step(state, policy, rng),
        Phase::Sleeping { .. } => state.clone(),
        Phase::Synced { round, slot } => {
            let mut next = state.clone();
            if matches!(action, Action::Transmit { .. }) {
                next.pending_tx -= 1;
                next.tx_this_round += 1;
            }
            next.phase = Phase::Synced { round, slot: slot + 1 };
            if slot + 1 >= policy.slots_per_round() {
                round_end(&next, policy)
            } else {
                next
            }
        }
    }
}
