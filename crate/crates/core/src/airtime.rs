//! PHY modes, on-air durations, slot budgets and the iBeacon frame codec.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Bluetooth 5 PHY modes plus IEEE 802.15.4 O-QPSK for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhyMode {
    Le2M,
    Le1M,
    Coded500K,
    Coded125K,
    Ieee802154,
}

/// Which framing arithmetic to use for the symbol counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Framing {
    /// Standard arithmetic plus per-mode overhead that matches the measured
    /// slot table (6 extra bytes in the coded modes, one byte fewer for 802.15.4).
    #[default]
    Measured,
    /// Plain standard framing.
    Strict,
}

impl PhyMode {
    pub const ALL: [PhyMode; 5] =
        [PhyMode::Le2M, PhyMode::Le1M, PhyMode::Coded500K, PhyMode::Coded125K, PhyMode::Ieee802154];

    pub fn name(self) -> &'static str {
        match self {
            PhyMode::Le2M => "2m",
            PhyMode::Le1M => "1m",
            PhyMode::Coded500K => "500k",
            PhyMode::Coded125K => "125k",
            PhyMode::Ieee802154 => "802154",
        }
    }

    /// On-air symbols per second (802.15.4: 4-bit symbols, 32 chips each).
    pub fn symbol_rate(self) -> f64 {
        match self {
            PhyMode::Le2M => 2e6,
            PhyMode::Le1M | PhyMode::Coded500K | PhyMode::Coded125K => 1e6,
            PhyMode::Ieee802154 => 62.5e3,
        }
    }

    /// Modulation rate of the underlying radio: BFSK symbols or O-QPSK chips.
    pub fn chip_rate(self) -> f64 {
        match self {
            PhyMode::Ieee802154 => 2e6,
            m => m.symbol_rate(),
        }
    }

    /// Duration of one information bit.
    pub fn bit_period(self) -> f64 {
        match self {
            PhyMode::Le2M => 0.5e-6,
            PhyMode::Le1M => 1e-6,
            PhyMode::Coded500K => 2e-6,
            PhyMode::Coded125K => 8e-6,
            PhyMode::Ieee802154 => 4e-6,
        }
    }

    /// Radio symbol period that concurrent transmitters must align to.
    pub fn ct_symbol_period(self) -> f64 {
        1.0 / self.chip_rate()
    }

    pub fn preamble_bytes(self) -> u32 {
        match self {
            PhyMode::Le2M => 2,
            PhyMode::Le1M => 1,
            PhyMode::Coded500K | PhyMode::Coded125K => 10,
            PhyMode::Ieee802154 => 4,
        }
    }

    /// Radio symbols (or chips per 8) per information bit.
    pub fn fec_expansion(self) -> u32 {
        match self {
            PhyMode::Le2M | PhyMode::Le1M => 1,
            PhyMode::Coded500K => 2,
            PhyMode::Coded125K | PhyMode::Ieee802154 => 8,
        }
    }

    pub fn is_coded(self) -> bool {
        matches!(self, PhyMode::Coded500K | PhyMode::Coded125K)
    }

    pub fn is_uncoded_ble(self) -> bool {
        matches!(self, PhyMode::Le2M | PhyMode::Le1M)
    }

    pub fn extra_overhead_bytes(self, framing: Framing) -> i32 {
        match (framing, self) {
            (Framing::Strict, _) => 0,
            (Framing::Measured, PhyMode::Coded500K | PhyMode::Coded125K) => 6,
            (Framing::Measured, PhyMode::Ieee802154) => -1,
            (Framing::Measured, _) => 0,
        }
    }

    /// Radio ramp-up and software setup time on top of the air time.
    pub fn radio_setup_time(self) -> f64 {
        match self {
            PhyMode::Le2M => 170e-6,
            PhyMode::Le1M => 154e-6,
            PhyMode::Coded500K => 116e-6,
            PhyMode::Coded125K => 195e-6,
            PhyMode::Ieee802154 => 328e-6,
        }
    }

    /// Default processing padding at the end of a slot.
    pub fn slot_padding(self) -> f64 {
        match self {
            PhyMode::Le2M => 11.6e-6,
            PhyMode::Le1M => 16.5e-6,
            PhyMode::Coded500K | PhyMode::Coded125K => 80e-6,
            PhyMode::Ieee802154 => 67e-6,
        }
    }
}

impl fmt::Display for PhyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2m" => Ok(PhyMode::Le2M),
            "1m" => Ok(PhyMode::Le1M),
            "500k" => Ok(PhyMode::Coded500K),
            "125k" => Ok(PhyMode::Coded125K),
            "802154" => Ok(PhyMode::Ieee802154),
            other => Err(invalid(format!("unknown PHY mode '{other}'"))),
        }
    }
}

pub const MAX_PDU_LEN: usize = 255;
const ACCESS_ADDRESS_BYTES: u32 = 4;
const CRC_BYTES: u32 = 3;
// coded PHY FEC block 1: access address (32 bits), CI (2), TERM1 (3), always S=8
const CODED_BLOCK1_SYMBOLS: u32 = (32 + 2 + 3) * 8;
const CODED_TERM2_BITS: u32 = 3;
// 802.15.4 SHR (preamble + SFD) and PHR overhead beyond the preamble, plus FCS
const IEEE802154_SFD_PHR_BYTES: u32 = 2;
const IEEE802154_FCS_BYTES: u32 = 2;

fn check_pdu(pdu_len: usize) -> Result<()> {
    if (1..=MAX_PDU_LEN).contains(&pdu_len) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("PDU length {pdu_len} not in 1..=255")))
    }
}

/// Radio symbols on air for a PDU of `pdu_len` bytes.
pub fn symbols_on_air(mode: PhyMode, pdu_len: usize, framing: Framing) -> Result<u32> {
    check_pdu(pdu_len)?;
    let pdu = pdu_len as u32;
    let extra = mode.extra_overhead_bytes(framing);
    let symbols = match mode {
        PhyMode::Le2M | PhyMode::Le1M => 8 * (mode.preamble_bytes() + ACCESS_ADDRESS_BYTES + pdu + CRC_BYTES),
        PhyMode::Coded500K | PhyMode::Coded125K => {
            let body_bits = 8 * (pdu as i32 + CRC_BYTES as i32 + extra) as u32 + CODED_TERM2_BITS;
            8 * mode.preamble_bytes() + CODED_BLOCK1_SYMBOLS + body_bits * mode.fec_expansion()
        }
        PhyMode::Ieee802154 => {
            let bytes = mode.preamble_bytes() + IEEE802154_SFD_PHR_BYTES + pdu + IEEE802154_FCS_BYTES;
            2 * (bytes as i32 + extra) as u32
        }
    };
    Ok(symbols)
}

/// Packet air time in seconds.
pub fn air_time(mode: PhyMode, pdu_len: usize, framing: Framing) -> Result<f64> {
    Ok(symbols_on_air(mode, pdu_len, framing)? as f64 / mode.symbol_rate())
}

/// Air time plus radio setup: how long the radio is busy with one packet.
pub fn radio_slot(mode: PhyMode, pdu_len: usize, framing: Framing) -> Result<f64> {
    Ok(air_time(mode, pdu_len, framing)? + mode.radio_setup_time())
}

/// Full slot length: radio slot, receive guard and processing padding.
pub fn slot_length(mode: PhyMode, pdu_len: usize, framing: Framing, guard: f64, processing_overhead: f64) -> Result<f64> {
    if !(guard >= 0.0) || !(processing_overhead >= 0.0) {
        return Err(invalid("guard and processing overhead must be >= 0"));
    }
    Ok(radio_slot(mode, pdu_len, framing)? + guard + processing_overhead)
}

/// Receive guard time used throughout the evaluation: 32 µs for every mode.
pub const DEFAULT_GUARD: f64 = 32e-6;

/// Slot length with the default guard and the mode's default padding.
pub fn default_slot_length(mode: PhyMode, pdu_len: usize, framing: Framing) -> Result<f64> {
    slot_length(mode, pdu_len, framing, DEFAULT_GUARD, mode.slot_padding())
}

// iBeacon advertising layout
const PDU_TYPE_ADV_NONCONN_IND_RANDOM: u8 = 0x42;
const AD_FLAGS: [u8; 3] = [0x02, 0x01, 0x06];
const IBEACON_PREFIX: [u8; 6] = [0x1A, 0xFF, 0x4C, 0x00, 0x02, 0x15];
const AD_TYPE_MANUFACTURER: u8 = 0xFF;
const HEADER_LEN: usize = 2;
const ADV_ADDR_LEN: usize = 6;
/// Flags + iBeacon manufacturer structure.
pub const IBEACON_ADV_DATA_LEN: usize = 30;
/// PDU length of a bare iBeacon.
pub const IBEACON_PDU_LEN: usize = HEADER_LEN + ADV_ADDR_LEN + IBEACON_ADV_DATA_LEN;
const MAJOR_OFFSET: usize = HEADER_LEN + ADV_ADDR_LEN + 3 + 6 + 16;

/// A flooded beacon. The iBeacon major/minor fields carry the round and slot numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeaconFrame {
    pub pdu_bytes: Vec<u8>,
    pub round: u16,
    pub slot: u16,
    pub uuid: [u8; 16],
    /// Application bytes appended as an extra manufacturer AD structure.
    pub payload: Vec<u8>,
}

impl BeaconFrame {
    pub fn pdu_len(&self) -> usize {
        self.pdu_bytes.len()
    }

    /// The advertising data following the advertiser address.
    pub fn adv_data(&self) -> &[u8] {
        &self.pdu_bytes[HEADER_LEN + ADV_ADDR_LEN..]
    }
}

/// Fixed identity fields written into every frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeaconCodec {
    pub adv_address: [u8; 6],
    pub uuid: [u8; 16],
    pub measured_power: i8,
}

impl Default for BeaconCodec {
    fn default() -> Self {
        Self {
            adv_address: [0xC0, 0xFF, 0xEE, 0x00, 0x00, 0x01],
            uuid: *b"BlueFlood-flood0",
            measured_power: -59,
        }
    }
}

impl BeaconCodec {
    /// Largest application payload that still fits in a 255-byte PDU.
    pub const MAX_PAYLOAD: usize = MAX_PDU_LEN - IBEACON_PDU_LEN - 2;

    pub fn encode(&self, round: u16, slot: u16, payload: &[u8]) -> Result<BeaconFrame> {
        if payload.len() > Self::MAX_PAYLOAD {
            return Err(invalid(format!(
                "payload of {} bytes exceeds the {} byte budget",
                payload.len(),
                Self::MAX_PAYLOAD
            )));
        }
        let extra = if payload.is_empty() { 0 } else { payload.len() + 2 };
        let pdu_len = IBEACON_PDU_LEN + extra;
        let mut pdu = Vec::with_capacity(pdu_len);
        pdu.push(PDU_TYPE_ADV_NONCONN_IND_RANDOM);
        pdu.push((pdu_len - HEADER_LEN) as u8);
        pdu.extend_from_slice(&self.adv_address);
        pdu.extend_from_slice(&AD_FLAGS);
        pdu.extend_from_slice(&IBEACON_PREFIX);
        pdu.extend_from_slice(&self.uuid);
        pdu.extend_from_slice(&round.to_be_bytes());
        pdu.extend_from_slice(&slot.to_be_bytes());
        pdu.push(self.measured_power as u8);
        if !payload.is_empty() {
            pdu.push((payload.len() + 1) as u8);
            pdu.push(AD_TYPE_MANUFACTURER);
            pdu.extend_from_slice(payload);
        }
        debug_assert_eq!(pdu.len(), pdu_len);
        Ok(BeaconFrame { pdu_bytes: pdu, round, slot, uuid: self.uuid, payload: payload.to_vec() })
    }
}

/// Encodes with the default identity.
pub fn encode_beacon(round: u16, slot: u16, payload: &[u8]) -> Result<BeaconFrame> {
    BeaconCodec::default().encode(round, slot, payload)
}

/// Parses a PDU; any structural mismatch is reported as a malformed frame.
pub fn decode_beacon(pdu: &[u8]) -> Result<BeaconFrame> {
    let bad = |m: &str| Error::MalformedFrame(m.to_string());
    if pdu.len() < IBEACON_PDU_LEN || pdu.len() > MAX_PDU_LEN {
        return Err(bad("length out of range"));
    }
    if pdu[0] & 0x0F != PDU_TYPE_ADV_NONCONN_IND_RANDOM & 0x0F {
        return Err(bad("not a non-connectable advertisement"));
    }
    if pdu[1] as usize != pdu.len() - HEADER_LEN {
        return Err(bad("header length disagrees with PDU size"));
    }
    let ad = &pdu[HEADER_LEN + ADV_ADDR_LEN..];
    if ad[..3] != AD_FLAGS || ad[3..9] != IBEACON_PREFIX {
        return Err(bad("missing iBeacon advertising structure"));
    }
    let uuid: [u8; 16] = ad[9..25].try_into().unwrap();
    let round = u16::from_be_bytes([pdu[MAJOR_OFFSET], pdu[MAJOR_OFFSET + 1]]);
    let slot = u16::from_be_bytes([pdu[MAJOR_OFFSET + 2], pdu[MAJOR_OFFSET + 3]]);
    let rest = &pdu[IBEACON_PDU_LEN..];
    let payload = match rest {
        [] => Vec::new(),
        [len, ty, body @ ..] if *ty == AD_TYPE_MANUFACTURER && *len as usize == body.len() + 1 && !body.is_empty() => {
            body.to_vec()
        }
        _ => return Err(bad("trailing advertising data is malformed")),
    };
    Ok(BeaconFrame { pdu_bytes: pdu.to_vec(), round, slot, uuid, payload })
}
