//! Reception probability of a concurrent (two-transmitter) reception.
//!
//! A [`LinkTable`] stores, per `(mode, same_data)` pair, a dense probability
//! tensor over three axes: power delta `ΔP` (dB), time delta `Δt` (fraction
//! of the mode's radio symbol period) and beat ratio `T_packet / T_beat`.
//! Queries are answered by trilinear interpolation with clamping at the
//! axis ends.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::airtime::PhyMode;
use crate::analytic::{ber_bfsk, per_from_ber, Ebn0};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Axes {
    pub delta_p_db: Vec<f64>,
    pub delta_t_frac: Vec<f64>,
    pub beat_ratio: Vec<f64>,
}

impl Axes {
    fn validate(&self) -> Result<()> {
        for (name, axis) in self.named() {
            if axis.is_empty() {
                return Err(invalid(format!("axis {name} is empty")));
            }
            // a lone transmitter may be tabulated as ΔP = +inf
            let finite_part = if name == "delta_p_db" && axis.last() == Some(&f64::INFINITY) {
                &axis[..axis.len() - 1]
            } else {
                &axis[..]
            };
            if finite_part.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("axis {name} has a non-finite entry")));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(format!("axis {name} is not strictly increasing")));
            }
        }
        Ok(())
    }

    fn named(&self) -> [(&'static str, &Vec<f64>); 3] {
        [("delta_p_db", &self.delta_p_db), ("delta_t_frac", &self.delta_t_frac), ("beat_ratio", &self.beat_ratio)]
    }

    pub fn len(&self) -> usize {
        self.delta_p_db.len() * self.delta_t_frac.len() * self.beat_ratio.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn index(&self, ip: usize, it: usize, ib: usize) -> usize {
        (ip * self.delta_t_frac.len() + it) * self.beat_ratio.len() + ib
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SurfaceKey {
    pub mode: PhyMode,
    pub same_data: bool,
}

/// Conditions of one reception.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkQuery {
    pub mode: PhyMode,
    pub same_data: bool,
    /// Power of the strongest arrival over the second strongest, dB.
    /// `+inf` for a lone transmitter.
    pub delta_p_db: f64,
    /// Arrival-time difference, seconds.
    pub delta_t: f64,
    pub t_packet: f64,
    /// Beat period; `+inf` when the carriers coincide.
    pub t_beat: f64,
    /// Optional E_b/N_0 of the strongest arrival; applies an AWGN packet
    /// success factor for uncoded BLE modes.
    pub snr_db: Option<f64>,
}

impl LinkQuery {
    pub fn single(mode: PhyMode, t_packet: f64) -> Self {
        Self {
            mode,
            same_data: true,
            delta_p_db: f64::INFINITY,
            delta_t: 0.0,
            t_packet,
            t_beat: f64::INFINITY,
            snr_db: None,
        }
    }

    pub fn beat_ratio(&self) -> f64 {
        self.t_packet / self.t_beat
    }

    pub fn delta_t_frac(&self) -> f64 {
        self.delta_t.abs() / self.mode.ct_symbol_period()
    }
}

/// Interpolated probability plus which axes had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub probability: f64,
    pub clamped: [bool; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    axes: Axes,
    surfaces: BTreeMap<SurfaceKey, Vec<f64>>,
    pub provenance: Vec<(String, String)>,
}

fn bracket(axis: &[f64], x: f64) -> (usize, usize, f64, bool) {
    let last = axis.len() - 1;
    if x.is_nan() || x <= axis[0] {
        return (0, 0, 0.0, x < axis[0]);
    }
    if x >= axis[last] {
        return (last, last, 0.0, x > axis[last]);
    }
    let hi = axis.partition_point(|&a| a <= x);
    let lo = hi - 1;
    let w = (x - axis[lo]) / (axis[hi] - axis[lo]);
    (lo, hi, w, false)
}

impl LinkTable {
    pub fn new(axes: Axes) -> Result<Self> {
        axes.validate()?;
        Ok(Self { axes, surfaces: BTreeMap::new(), provenance: Vec::new() })
    }

    /// Every mode and data flavour receives with probability `p` regardless of conditions.
    pub fn uniform(p: f64) -> Result<Self> {
        let mut t = Self::new(Axes { delta_p_db: vec![0.0], delta_t_frac: vec![0.0], beat_ratio: vec![0.0] })?;
        for mode in PhyMode::ALL {
            for same_data in [true, false] {
                t.insert_surface(mode, same_data, vec![p])?;
            }
        }
        t.provenance.push(("source".into(), format!("uniform p={p}")));
        Ok(t)
    }

    pub fn axes(&self) -> &Axes {
        &self.axes
    }

    pub fn surfaces(&self) -> impl Iterator<Item = (&SurfaceKey, &Vec<f64>)> {
        self.surfaces.iter()
    }

    pub fn surface(&self, mode: PhyMode, same_data: bool) -> Option<&[f64]> {
        self.surfaces.get(&SurfaceKey { mode, same_data }).map(Vec::as_slice)
    }

    /// Stores a tensor laid out as `[delta_p][delta_t][beat_ratio]`.
    pub fn insert_surface(&mut self, mode: PhyMode, same_data: bool, values: Vec<f64>) -> Result<()> {
        if values.len() != self.axes.len() {
            return Err(Error::LengthMismatch { expected: self.axes.len(), actual: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("probability {v} outside [0, 1]")));
        }
        self.surfaces.insert(SurfaceKey { mode, same_data }, values);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    /// Stored value at grid indices.
    pub fn at(&self, mode: PhyMode, same_data: bool, ip: usize, it: usize, ib: usize) -> Option<f64> {
        self.surface(mode, same_data).map(|s| s[self.axes.index(ip, it, ib)])
    }

    pub fn lookup(&self, q: &LinkQuery) -> Result<Lookup> {
        if self.surfaces.is_empty() {
            return Err(invalid("link table is empty"));
        }
        if !(q.t_packet > 0.0) || !(q.t_beat > 0.0) {
            return Err(invalid("t_packet and t_beat must be positive"));
        }
        let key = SurfaceKey { mode: q.mode, same_data: q.same_data };
        let surface = self.surfaces.get(&key).ok_or_else(|| {
            Error::MissingSurface(format!("mode {} same_data={}", q.mode, q.same_data))
        })?;
        let (p0, p1, wp, cp) = bracket(&self.axes.delta_p_db, q.delta_p_db.abs());
        let (t0, t1, wt, ct) = bracket(&self.axes.delta_t_frac, q.delta_t_frac());
        let (b0, b1, wb, cb) = bracket(&self.axes.beat_ratio, q.beat_ratio());
        let mut acc = 0.0;
        for (ip, fp) in [(p0, 1.0 - wp), (p1, wp)] {
            for (it, ft) in [(t0, 1.0 - wt), (t1, wt)] {
                for (ib, fb) in [(b0, 1.0 - wb), (b1, wb)] {
                    let f = fp * ft * fb;
                    if f != 0.0 {
                        acc += f * surface[self.axes.index(ip, it, ib)];
                    }
                }
            }
        }
        let mut probability = acc.clamp(0.0, 1.0);
        if let Some(snr_db) = q.snr_db {
            probability *= awgn_packet_success(q.mode, q.t_packet, snr_db)?;
        }
        Ok(Lookup { probability, clamped: [cp, ct, cb] })
    }

    pub fn reception_probability(&self, q: &LinkQuery) -> Result<f64> {
        Ok(self.lookup(q)?.probability)
    }

    /// CSV with `#`-prefixed provenance lines, a header row and one row per grid cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.provenance {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("mode,same_data,delta_p_db,delta_t_frac,beat_ratio,probability\n");
        for (key, values) in &self.surfaces {
            for (ip, p) in self.axes.delta_p_db.iter().enumerate() {
                for (it, t) in self.axes.delta_t_frac.iter().enumerate() {
                    for (ib, b) in self.axes.beat_ratio.iter().enumerate() {
                        let v = values[self.axes.index(ip, it, ib)];
                        let _ = writeln!(out, "{},{},{p},{t},{b},{v}", key.mode, key.same_data);
                    }
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut provenance = Vec::new();
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.trim().split_once('=') {
                    provenance.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if !header_seen {
                if line != "mode,same_data,delta_p_db,delta_t_frac,beat_ratio,probability" {
                    return Err(Error::Parse { line: line_no, msg: format!("unexpected header '{line}'") });
                }
                header_seen = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::Parse { line: line_no, msg: format!("expected 6 fields, got {}", f.len()) });
            }
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            let mode: PhyMode = f[0].parse().map_err(|e: Error| perr(e.to_string()))?;
            let same: bool = f[1].parse().map_err(|_| perr(format!("bad flag '{}'", f[1])))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| perr(format!("bad number '{s}'")));
            rows.push((SurfaceKey { mode, same_data: same }, num(f[2])?, num(f[3])?, num(f[4])?, num(f[5])?));
        }
        if rows.is_empty() {
            return Err(invalid("link table CSV has no rows"));
        }
        let axis = |sel: fn(&(SurfaceKey, f64, f64, f64, f64)) -> f64| {
            let mut v: Vec<f64> = rows.iter().map(sel).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.dedup();
            v
        };
        let axes = Axes { delta_p_db: axis(|r| r.1), delta_t_frac: axis(|r| r.2), beat_ratio: axis(|r| r.3) };
        let mut table = LinkTable::new(axes)?;
        let mut dense: BTreeMap<SurfaceKey, Vec<Option<f64>>> = BTreeMap::new();
        let pos = |axis: &[f64], x: f64| axis.iter().position(|&a| a == x).unwrap();
        for (key, p, t, b, v) in &rows {
            let idx = table.axes.index(
                pos(&table.axes.delta_p_db, *p),
                pos(&table.axes.delta_t_frac, *t),
                pos(&table.axes.beat_ratio, *b),
            );
            let cells = dense.entry(*key).or_insert_with(|| vec![None; table.axes.len()]);
            if cells[idx].replace(*v).is_some() {
                return Err(invalid(format!("duplicate cell for {} same_data={}", key.mode, key.same_data)));
            }
        }
        for (key, cells) in dense {
            let values: Option<Vec<f64>> = cells.into_iter().collect();
            let values = values.ok_or_else(|| {
                invalid(format!("surface {} same_data={} is not dense", key.mode, key.same_data))
            })?;
            table.insert_surface(key.mode, key.same_data, values)?;
        }
        table.provenance = provenance;
        Ok(table)
    }
}

fn awgn_packet_success(mode: PhyMode, t_packet: f64, snr_db: f64) -> Result<f64> {
    if !mode.is_uncoded_ble() {
        return Ok(1.0);
    }
    let bits = (t_packet / mode.bit_period()).round().max(1.0) as u32;
    Ok(1.0 - per_from_ber(ber_bfsk(Ebn0::from_db(snr_db)), bits)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beating {
    Slow,
    Fast,
}

/// Slow when the beat period is at least the packet duration.
pub fn classify_beating(t_packet: f64, t_beat: f64) -> Result<Beating> {
    if !(t_packet > 0.0) || !(t_beat > 0.0) {
        return Err(invalid("t_packet and t_beat must be positive"));
    }
    Ok(if t_beat >= t_packet { Beating::Slow } else { Beating::Fast })
}

// ---------------------------------------------------------------------------
// Built-in table encoding the measured CT behaviour
// ---------------------------------------------------------------------------

const DP_AXIS: [f64; 7] = [0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 12.0];
const DT_AXIS: [f64; 8] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.5];
const BEAT_AXIS: [f64; 14] =
    [0.0, 0.0045, 0.009, 0.024, 0.0736, 0.33, 0.65, 1.74, 1.8, 3.6, 5.35, 9.58, 29.44, 100.0];

/// Same-data PRR at zero power and time delta, by beat ratio (from PER measurements of
/// transmitter pairs with 0.025, 1.83 and 9.645 kHz CFO).
fn beat_anchors(mode: PhyMode) -> &'static [(f64, f64)] {
    match mode {
        PhyMode::Le2M => &[(0.0045, 0.7514), (0.33, 0.6119), (1.8, 0.2644)],
        PhyMode::Le1M => &[(0.009, 0.9134), (0.65, 0.2312), (3.6, 0.0604)],
        PhyMode::Coded500K => &[(0.024, 0.9321), (1.74, 0.5255), (9.58, 0.8343)],
        PhyMode::Coded125K => &[(0.0736, 0.9613), (5.35, 0.9016), (29.44, 0.9914)],
        PhyMode::Ieee802154 => &[],
    }
}

fn piecewise(points: &[(f64, f64)], x: f64) -> f64 {
    let (first, last) = (points[0], points[points.len() - 1]);
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= x);
    let (a, b) = (points[i - 1], points[i]);
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

const P_MAX: f64 = 0.999;
/// Share of the gap to `P_MAX` closed by a power delta, per `DP_AXIS` entry.
const SAME_DATA_GAIN: [f64; 7] = [0.0, 0.6, 0.9, 0.97, 0.99, 1.0, 1.0];

fn different_data(mode: PhyMode, ip: usize, dt: f64) -> f64 {
    const CAPTURE: [f64; 7] = [0.02, 0.03, 0.05, 0.20, 0.50, 0.92, 0.98];
    const CAPTURE_500K: [f64; 7] = [0.05, 0.08, 0.15, 0.35, 0.60, 0.94, 0.98];
    const CODED_125K_ALIGNED: [f64; 7] = [0.60, 0.70, 0.80, 0.90, 0.95, 0.98, 0.99];
    const CODED_125K_LATE: [f64; 7] = [0.15, 0.40, 0.80, 0.90, 0.95, 0.98, 0.99];
    match mode {
        PhyMode::Coded125K if dt <= 0.5 => CODED_125K_ALIGNED[ip],
        PhyMode::Coded125K => CODED_125K_LATE[ip],
        PhyMode::Coded500K => CAPTURE_500K[ip],
        // 2M keeps a timing penalty even in the capture zone
        PhyMode::Le2M if dt >= 0.5 && DP_AXIS[ip] >= 8.0 => 0.85,
        _ => CAPTURE[ip],
    }
}

/// Same-data PRR once the symbols are misaligned by half a symbol or more.
fn misaligned_same_data(mode: PhyMode, ip: usize, dt: f64, aligned: f64) -> f64 {
    let dp = DP_AXIS[ip];
    let floor = match mode {
        PhyMode::Coded125K if dp >= 2.0 => return aligned,
        _ if dp <= 2.0 => different_data(mode, ip, dt),
        PhyMode::Le2M => [0.60, 0.75, 0.85, 0.90][ip - 3],
        _ if dt < 1.0 => [0.60, 0.80, 0.97, 0.99][ip - 3],
        // recovery past the symbol boundary through power capture
        _ => [0.80, 0.90, 0.98, 0.99][ip - 3],
    };
    floor.min(aligned)
}

/// Weight of the misaligned regime: 0 up to a quarter symbol, 1 from half a symbol.
fn misalignment_weight(dt: f64) -> f64 {
    ((dt - 0.25) / 0.25).clamp(0.0, 1.0)
}

/// Default table hand-encoded from the measured CT behaviour over Bluetooth 5.
pub fn default_link_table() -> LinkTable {
    default_link_table_with(0.99)
}

/// As [`default_link_table`], with a configurable same-data PRR for 802.15.4.
pub fn default_link_table_with(ieee802154_same_data: f64) -> LinkTable {
    let axes = Axes { delta_p_db: DP_AXIS.to_vec(), delta_t_frac: DT_AXIS.to_vec(), beat_ratio: BEAT_AXIS.to_vec() };
    let mut table = LinkTable::new(axes).expect("built-in axes are valid");
    for mode in PhyMode::ALL {
        let mut same = Vec::with_capacity(table.axes.len());
        let mut diff = Vec::with_capacity(table.axes.len());
        for (ip, &gain) in SAME_DATA_GAIN.iter().enumerate() {
            for &dt in &DT_AXIS {
                for &ratio in &BEAT_AXIS {
                    let p_same = if mode == PhyMode::Ieee802154 {
                        ieee802154_same_data
                    } else {
                        let base = piecewise(beat_anchors(mode), ratio);
                        let aligned = base + (P_MAX - base) * gain;
                        let beta = misalignment_weight(dt);
                        (1.0 - beta) * aligned + beta * misaligned_same_data(mode, ip, dt, aligned)
                    };
                    same.push(p_same);
                    diff.push(different_data(mode, ip, dt));
                }
            }
        }
        table.insert_surface(mode, true, same).expect("probabilities in range");
        table.insert_surface(mode, false, diff).expect("probabilities in range");
    }
    table.provenance = vec![
        ("source".into(), "built-in measured CT behaviour".into()),
        ("ieee802154_same_data".into(), ieee802154_same_data.to_string()),
        ("capture_ramp_db".into(), "6..8 linear".into()),
    ];
    table
}
