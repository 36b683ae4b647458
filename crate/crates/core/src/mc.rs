//! Monte Carlo BER/PER experiments with one or two concurrent BFSK transmitters.
//!
//! Each replica draws its own bits, carrier phases and noise from an RNG
//! stream keyed by `(seed, point, replica)`, so serial and parallel runs pool
//! to identical counts.

use std::fmt::Write as _;
use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::airtime::PhyMode;
use crate::error::{invalid, Result};
use crate::link::{Axes, LinkTable};
use crate::rng;
use crate::rx::{count_bit_errors, demodulate_with, ReceiverConfig, ToneBank};
use crate::stats::EstimateWithCI;
use crate::waveform::{add_noise_in_place, modulate, noise_variance_per_dimension, superpose, ModulationParams, TransmitterSpec};

pub const CONFIDENCE: f64 = 0.95;
pub const MIN_PER_REPLICAS: usize = 100;

/// Carrier offset between the two transmitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeatSpec {
    /// `T_packet / T_beat`.
    Ratio(f64),
    /// Beat frequency in Hz.
    Frequency(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhyExperimentSpec {
    pub modulation: ModulationParams,
    pub packet_bits: usize,
    pub ebn0_points: Vec<f64>,
    /// `20·log10(A1/A2)`; `+inf` runs a single transmitter.
    pub power_delta_db: f64,
    /// Delay of the second transmitter in symbol periods.
    pub time_delta_frac: f64,
    pub beat: BeatSpec,
    pub same_data: bool,
    pub replicas: usize,
    pub seed: u64,
}

impl PhyExperimentSpec {
    pub fn new(modulation: ModulationParams, packet_bits: usize) -> Self {
        Self {
            modulation,
            packet_bits,
            ebn0_points: Vec::new(),
            power_delta_db: 0.0,
            time_delta_frac: 0.0,
            beat: BeatSpec::Ratio(0.0),
            same_data: true,
            replicas: 2000,
            seed: 0,
        }
    }

    pub fn single(modulation: ModulationParams, packet_bits: usize) -> Self {
        Self { power_delta_db: f64::INFINITY, ..Self::new(modulation, packet_bits) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.packet_bits == 0 {
            return Err(invalid("packet must carry at least one bit"));
        }
        if self.replicas == 0 {
            return Err(invalid("replicas must be >= 1"));
        }
        if self.power_delta_db.is_nan() || self.power_delta_db == f64::NEG_INFINITY {
            return Err(invalid(format!("power delta {} dB is not usable", self.power_delta_db)));
        }
        if !(self.time_delta_frac >= 0.0 && self.time_delta_frac <= self.packet_bits as f64) {
            return Err(invalid(format!("time delta {} outside [0, L]", self.time_delta_frac)));
        }
        let f = self.beat_frequency();
        if !(f.is_finite() && f >= 0.0) {
            return Err(invalid(format!("beat frequency {f} Hz is not usable")));
        }
        Ok(())
    }

    pub fn is_single(&self) -> bool {
        self.power_delta_db == f64::INFINITY
    }

    pub fn packet_duration(&self) -> f64 {
        self.packet_bits as f64 * self.modulation.symbol_period
    }

    pub fn beat_frequency(&self) -> f64 {
        match self.beat {
            BeatSpec::Ratio(r) => r / self.packet_duration(),
            BeatSpec::Frequency(f) => f,
        }
    }

    pub fn beat_ratio(&self) -> f64 {
        match self.beat {
            BeatSpec::Ratio(r) => r,
            BeatSpec::Frequency(f) => f * self.packet_duration(),
        }
    }

    pub fn second_amplitude(&self) -> f64 {
        10f64.powf(-self.power_delta_db / 20.0)
    }
}

/// Converts a per-sample SNR into E_b/N_0 at `samples_per_symbol` samples per bit.
pub fn ebn0_from_sample_snr(snr_db: f64, samples_per_symbol: usize) -> f64 {
    snr_db + 10.0 * (samples_per_symbol as f64).log10()
}

struct Prepared {
    bank: ToneBank,
    rx: ReceiverConfig,
    sigma: f64,
}

fn prepare(spec: &PhyExperimentSpec, ebn0_db: f64) -> Result<Prepared> {
    spec.validate()?;
    let sigma = noise_variance_per_dimension(ebn0_db, &spec.modulation, 1.0)?.sqrt();
    Ok(Prepared { bank: ToneBank::new(&spec.modulation), rx: ReceiverConfig::aligned(spec.modulation), sigma })
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random()).collect()
}

/// Bit errors in one packet; the receiver follows the first transmitter.
fn packet_errors(spec: &PhyExperimentSpec, prep: &Prepared, rng: &mut ChaCha8Rng) -> Result<usize> {
    let bits = random_bits(rng, spec.packet_bits);
    let f_beat = spec.beat_frequency();
    let first = TransmitterSpec::new(bits.clone()).cfo(f_beat / 2.0).random_phase(rng);
    let mut stream = modulate(&spec.modulation, &first)?;
    if !spec.is_single() {
        let other_bits = if spec.same_data { bits.clone() } else { random_bits(rng, spec.packet_bits) };
        let second = TransmitterSpec::new(other_bits)
            .amplitude(spec.second_amplitude())
            .cfo(-f_beat / 2.0)
            .time_offset(spec.time_delta_frac * spec.modulation.symbol_period)
            .random_phase(rng);
        stream = superpose(&[stream, modulate(&spec.modulation, &second)?])?;
    }
    add_noise_in_place(&mut stream.samples, prep.sigma, rng);
    let rx = demodulate_with(&stream, &prep.rx, spec.packet_bits, &prep.bank)?;
    count_bit_errors(&bits, &rx)
}

fn replica_rng(spec: &PhyExperimentSpec, point: u64, replica: usize) -> ChaCha8Rng {
    rng::stream(spec.seed, &[point, replica as u64])
}

/// Pooled `(bit errors, failed packets)` over a replica range, run serially.
pub fn count_errors(spec: &PhyExperimentSpec, ebn0_db: f64, point: u64, replicas: Range<usize>) -> Result<(u64, u64)> {
    let prep = prepare(spec, ebn0_db)?;
    let mut bits = 0;
    let mut packets = 0;
    for r in replicas {
        let e = packet_errors(spec, &prep, &mut replica_rng(spec, point, r))? as u64;
        bits += e;
        packets += u64::from(e > 0);
    }
    Ok((bits, packets))
}

/// As [`count_errors`] over all replicas, spread across the rayon pool.
pub fn count_errors_parallel(spec: &PhyExperimentSpec, ebn0_db: f64, point: u64) -> Result<(u64, u64)> {
    let prep = prepare(spec, ebn0_db)?;
    (0..spec.replicas)
        .into_par_iter()
        .map(|r| {
            let e = packet_errors(spec, &prep, &mut replica_rng(spec, point, r))? as u64;
            Ok((e, u64::from(e > 0)))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))
}

fn point_key(ebn0_db: f64) -> u64 {
    ebn0_db.to_bits()
}

/// Bit error rate at one E_b/N_0 over `replicas` packets.
pub fn run_ber_point(spec: &PhyExperimentSpec, ebn0_db: f64) -> Result<EstimateWithCI> {
    let (errors, _) = count_errors_parallel(spec, ebn0_db, point_key(ebn0_db))?;
    EstimateWithCI::from_counts(errors, (spec.replicas * spec.packet_bits) as u64, CONFIDENCE)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerPoint {
    pub ebn0_db: f64,
    pub estimate: EstimateWithCI,
}

/// Packet error rate at each configured E_b/N_0 point.
pub fn run_per_sweep(spec: &PhyExperimentSpec) -> Result<Vec<PerPoint>> {
    if spec.replicas < MIN_PER_REPLICAS {
        return Err(invalid(format!("PER needs >= {MIN_PER_REPLICAS} replicas, got {}", spec.replicas)));
    }
    spec.ebn0_points
        .iter()
        .map(|&x| {
            let (_, failures) = count_errors_parallel(spec, x, point_key(x))?;
            let estimate = EstimateWithCI::from_counts(failures, spec.replicas as u64, CONFIDENCE)?;
            Ok(PerPoint { ebn0_db: x, estimate })
        })
        .collect()
}

/// One row of the PER CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PerRow {
    pub mode: PhyMode,
    pub same_data: bool,
    pub delta_p_db: f64,
    pub delta_t_frac: f64,
    pub beat_ratio: f64,
    pub ebn0_db: f64,
    pub estimate: EstimateWithCI,
    pub seed: u64,
}

impl PerRow {
    pub fn from_point(mode: PhyMode, spec: &PhyExperimentSpec, p: &PerPoint) -> Self {
        Self {
            mode,
            same_data: spec.same_data,
            delta_p_db: spec.power_delta_db,
            delta_t_frac: spec.time_delta_frac,
            beat_ratio: spec.beat_ratio(),
            ebn0_db: p.ebn0_db,
            estimate: p.estimate,
            seed: spec.seed,
        }
    }
}

pub const PER_CSV_HEADER: &str =
    "mode,same_data,delta_p_db,delta_t_frac,beat_ratio,ebn0_db,trials,failures,per,ci_low,ci_high,seed";

pub fn per_rows_to_csv(rows: &[PerRow]) -> String {
    let mut out = String::from(PER_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let e = &r.estimate;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.mode, r.same_data, r.delta_p_db, r.delta_t_frac, r.beat_ratio, r.ebn0_db,
            e.n_trials, e.successes, e.point, e.ci_low, e.ci_high, r.seed
        );
    }
    out
}

/// Grid swept by [`calibrate_link_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationGrid {
    pub modes: Vec<PhyMode>,
    pub same_data: Vec<bool>,
    pub axes: Axes,
    pub ebn0_db: f64,
    pub packet_bits: usize,
    pub replicas: usize,
    pub seed: u64,
}

/// Tabulates `1 − PER` over the grid for the uncoded BLE modes.
pub fn calibrate_link_table(grid: &CalibrationGrid) -> Result<LinkTable> {
    if grid.modes.is_empty() || grid.same_data.is_empty() || grid.axes.is_empty() {
        return Err(invalid("calibration grid is empty"));
    }
    if let Some(m) = grid.modes.iter().find(|m| !m.is_uncoded_ble()) {
        return Err(invalid(format!("calibration covers uncoded BLE modes only, got {m}")));
    }
    let mut table = LinkTable::new(grid.axes.clone())?;
    for (im, &mode) in grid.modes.iter().enumerate() {
        let modulation = ModulationParams::orthogonal(mode.ct_symbol_period());
        for &same_data in &grid.same_data {
            let mut values = Vec::with_capacity(grid.axes.len());
            let mut point = 0u64;
            for &dp in &grid.axes.delta_p_db {
                for &dt in &grid.axes.delta_t_frac {
                    for &ratio in &grid.axes.beat_ratio {
                        let spec = PhyExperimentSpec {
                            power_delta_db: dp,
                            time_delta_frac: dt,
                            beat: BeatSpec::Ratio(ratio),
                            same_data,
                            replicas: grid.replicas,
                            seed: grid.seed,
                            ..PhyExperimentSpec::new(modulation, grid.packet_bits)
                        };
                        let key = rng::derive_seed(point, &[im as u64, u64::from(same_data)]);
                        let (_, failures) = count_errors_parallel(&spec, grid.ebn0_db, key)?;
                        values.push(1.0 - failures as f64 / grid.replicas as f64);
                        point += 1;
                    }
                }
            }
            table.insert_surface(mode, same_data, values)?;
        }
    }
    table.provenance = vec![
        ("source".into(), "monte-carlo calibration".into()),
        ("seed".into(), grid.seed.to_string()),
        ("replicas".into(), grid.replicas.to_string()),
        ("packet_bits".into(), grid.packet_bits.to_string()),
        ("ebn0_db".into(), grid.ebn0_db.to_string()),
    ];
    Ok(table)
}
