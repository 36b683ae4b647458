//! Two-branch non-coherent BFSK energy detector.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::waveform::{offset_samples, ModulationParams, SampleStream, TransmitterSpec};

/// Receiver locked to the symbol timing of one transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub params: ModulationParams,
    /// Index of the transmitter whose timing the receiver follows.
    pub sync_reference: usize,
    /// Start of the reference transmitter's first symbol, in samples.
    pub timing_offset: usize,
}

impl ReceiverConfig {
    /// Locks to `transmitters[sync_reference]`.
    pub fn locked_to(params: ModulationParams, transmitters: &[TransmitterSpec], sync_reference: usize) -> Result<Self> {
        let tx = transmitters.get(sync_reference).ok_or_else(|| {
            invalid(format!(
                "sync reference {sync_reference} out of range for {} transmitters",
                transmitters.len()
            ))
        })?;
        Ok(Self { params, sync_reference, timing_offset: offset_samples(tx.time_offset, &params)? })
    }

    /// Receiver for a stream whose reference symbols start at sample 0.
    pub fn aligned(params: ModulationParams) -> Self {
        Self { params, sync_reference: 0, timing_offset: 0 }
    }
}

/// Correlator taps for both tone hypotheses over one symbol.
#[derive(Debug, Clone)]
pub struct ToneBank {
    upper: Vec<Complex64>,
    lower: Vec<Complex64>,
}

impl ToneBank {
    pub fn new(params: &ModulationParams) -> Self {
        let fs = params.sample_rate();
        let tap = |f: f64| -> Vec<Complex64> {
            (0..params.samples_per_symbol)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * f * k as f64 / fs))
                .collect()
        };
        Self { upper: tap(params.freq_deviation), lower: tap(-params.freq_deviation) }
    }

    /// Energy in the `+Δf` and `−Δf` branches for one symbol window.
    pub fn energies(&self, window: &[Complex64]) -> (f64, f64) {
        let mut up = Complex64::new(0.0, 0.0);
        let mut lo = Complex64::new(0.0, 0.0);
        for ((x, u), l) in window.iter().zip(&self.upper).zip(&self.lower) {
            up += x * u;
            lo += x * l;
        }
        (up.norm_sqr(), lo.norm_sqr())
    }

    /// Bit decision; ties go to 0.
    pub fn decide(&self, window: &[Complex64]) -> bool {
        let (up, lo) = self.energies(window);
        up > lo
    }
}

/// Demodulates `n_bits` symbols starting at the receiver's timing offset.
pub fn demodulate(stream: &SampleStream, cfg: &ReceiverConfig, n_bits: usize) -> Result<Vec<bool>> {
    let bank = ToneBank::new(&cfg.params);
    demodulate_with(stream, cfg, n_bits, &bank)
}

pub(crate) fn demodulate_with(
    stream: &SampleStream,
    cfg: &ReceiverConfig,
    n_bits: usize,
    bank: &ToneBank,
) -> Result<Vec<bool>> {
    let sps = cfg.params.samples_per_symbol;
    let needed = cfg.timing_offset + n_bits * sps;
    if stream.len() < needed {
        return Err(Error::StreamTooShort { needed, available: stream.len() });
    }
    Ok(stream.samples[cfg.timing_offset..needed].chunks_exact(sps).map(|w| bank.decide(w)).collect())
}

/// Hamming distance between two equal-length bit sequences.
pub fn count_bit_errors(tx: &[bool], rx: &[bool]) -> Result<usize> {
    if tx.len() != rx.len() {
        return Err(Error::LengthMismatch { expected: tx.len(), actual: rx.len() });
    }
    Ok(tx.iter().zip(rx).filter(|(a, b)| a != b).count())
}
