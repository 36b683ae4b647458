//! Complex-baseband BFSK waveforms for one or more concurrent transmitters.
//!
//! A transmitter's real passband signal `A·cos(2π(f_c + n·Δf)t)` is carried
//! as its complex envelope relative to the nominal carrier, so the carrier
//! frequency offset (CFO) shows up as a slow residual rotation and two
//! transmitters with different CFOs beat at `|cfo_1 − cfo_2|`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Symbol timing and tone spacing of the BFSK modulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationParams {
    /// Symbol (bit) period `T_S` in seconds.
    pub symbol_period: f64,
    /// Tone deviation `Δf` in Hz; bit 1 is sent at `+Δf`, bit 0 at `−Δf`.
    pub freq_deviation: f64,
    pub samples_per_symbol: usize,
}

impl ModulationParams {
    pub fn new(symbol_period: f64, freq_deviation: f64, samples_per_symbol: usize) -> Result<Self> {
        if !(symbol_period > 0.0 && symbol_period.is_finite()) {
            return Err(invalid(format!("symbol period must be positive, got {symbol_period}")));
        }
        if !(freq_deviation > 0.0 && freq_deviation.is_finite()) {
            return Err(invalid(format!("frequency deviation must be positive, got {freq_deviation}")));
        }
        if samples_per_symbol < 8 {
            return Err(invalid(format!(
                "samples per symbol must be >= 8, got {samples_per_symbol}"
            )));
        }
        Ok(Self { symbol_period, freq_deviation, samples_per_symbol })
    }

    /// Minimum-index orthogonal BFSK (`Δf = 1/(2·T_S)`, `h = 1`) at 16 samples per symbol.
    pub fn orthogonal(symbol_period: f64) -> Self {
        Self::orthogonal_with_sps(symbol_period, 16)
    }

    pub fn orthogonal_with_sps(symbol_period: f64, samples_per_symbol: usize) -> Self {
        Self::new(symbol_period, 1.0 / (2.0 * symbol_period), samples_per_symbol)
            .expect("orthogonal parameters are valid for positive T_S and sps >= 8")
    }

    /// `h = 2·Δf·T_S`.
    pub fn modulation_index(&self) -> f64 {
        2.0 * self.freq_deviation * self.symbol_period
    }

    pub fn sample_rate(&self) -> f64 {
        self.samples_per_symbol as f64 / self.symbol_period
    }

    /// Time quantum of transmitter offsets (one sample).
    pub fn sample_period(&self) -> f64 {
        self.symbol_period / self.samples_per_symbol as f64
    }
}

impl Default for ModulationParams {
    fn default() -> Self {
        Self::orthogonal(1e-6)
    }
}

/// One concurrent transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitterSpec {
    /// Linear amplitude of the complex envelope.
    pub amplitude: f64,
    /// Carrier frequency offset from nominal, Hz.
    pub cfo: f64,
    /// Start delay relative to the common time origin, seconds.
    pub time_offset: f64,
    /// Initial carrier phase, radians.
    pub phase: f64,
    pub bits: Vec<bool>,
}

impl TransmitterSpec {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { amplitude: 1.0, cfo: 0.0, time_offset: 0.0, phase: 0.0, bits }
    }

    pub fn amplitude(mut self, a: f64) -> Self {
        self.amplitude = a;
        self
    }

    pub fn cfo(mut self, hz: f64) -> Self {
        self.cfo = hz;
        self
    }

    pub fn time_offset(mut self, seconds: f64) -> Self {
        self.time_offset = seconds;
        self
    }

    pub fn phase(mut self, radians: f64) -> Self {
        self.phase = radians;
        self
    }

    /// Draws the phase uniformly in `[0, 2π)`.
    pub fn random_phase<R: Rng + ?Sized>(mut self, rng: &mut R) -> Self {
        self.phase = rng.random_range(0.0..2.0 * PI);
        self
    }
}

/// Uniformly sampled complex baseband signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

impl SampleStream {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        Self { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.samples.iter().map(|s| s * k).collect(), self.sample_rate)
    }

    /// Multiplies every sample by `e^{jθ}`.
    pub fn rotated(&self, theta: f64) -> Self {
        let r = Complex64::from_polar(1.0, theta);
        Self::new(self.samples.iter().map(|s| s * r).collect(), self.sample_rate)
    }

    pub fn max_magnitude(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }
}

/// Number of whole samples a time offset maps to.
pub fn offset_samples(time_offset: f64, params: &ModulationParams) -> Result<usize> {
    if !(time_offset >= 0.0 && time_offset.is_finite()) {
        return Err(invalid(format!("time offset must be finite and >= 0, got {time_offset}")));
    }
    Ok((time_offset / params.sample_period()).round() as usize)
}

/// Synthesizes the complex envelope of `tx`.
///
/// The head of the stream is zero-padded by the transmitter's time offset
/// (rounded to the nearest sample). Phase is accumulated continuously, which
/// for `h = 1` coincides with evaluating each tone at absolute time.
pub fn modulate(params: &ModulationParams, tx: &TransmitterSpec) -> Result<SampleStream> {
    if tx.bits.is_empty() {
        return Err(invalid("bit sequence is empty"));
    }
    if !(tx.amplitude >= 0.0 && tx.amplitude.is_finite()) {
        return Err(invalid(format!("amplitude must be >= 0, got {}", tx.amplitude)));
    }
    let fs = params.sample_rate();
    if !(tx.cfo.abs() < fs / 2.0) {
        return Err(invalid(format!("CFO {} Hz outside sampled bandwidth ±{} Hz", tx.cfo, fs / 2.0)));
    }
    let packet_duration = tx.bits.len() as f64 * params.symbol_period;
    if tx.time_offset > packet_duration {
        return Err(invalid(format!(
            "time offset {} s exceeds the packet duration {} s",
            tx.time_offset, packet_duration
        )));
    }
    let pad = offset_samples(tx.time_offset, params)?;
    let sps = params.samples_per_symbol;

    let mut samples = Vec::with_capacity(pad + tx.bits.len() * sps);
    samples.resize(pad, Complex64::new(0.0, 0.0));
    // integer running sum of tone signs keeps the phase exact over long packets
    let mut sign_sum: i64 = 0;
    let mut k: u64 = 0;
    for &bit in &tx.bits {
        let n: i64 = if bit { 1 } else { -1 };
        for _ in 0..sps {
            let cycles = (tx.cfo * k as f64 + params.freq_deviation * sign_sum as f64) / fs;
            let theta = tx.phase + 2.0 * PI * cycles.fract();
            samples.push(Complex64::from_polar(tx.amplitude, theta));
            sign_sum += n;
            k += 1;
        }
    }
    Ok(SampleStream::new(samples, fs))
}

/// Pointwise sum of streams on a common time origin; shorter streams are
/// treated as zero past their end.
pub fn superpose(streams: &[SampleStream]) -> Result<SampleStream> {
    let first = streams.first().ok_or_else(|| invalid("no streams to superpose"))?;
    let fs = first.sample_rate;
    for s in streams {
        if s.sample_rate != fs {
            return Err(Error::SampleRateMismatch(fs, s.sample_rate));
        }
    }
    let len = streams.iter().map(SampleStream::len).max().unwrap_or(0);
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for s in streams {
        for (o, x) in out.iter_mut().zip(&s.samples) {
            *o += x;
        }
    }
    Ok(SampleStream::new(out, fs))
}

/// Per-dimension noise variance for a requested single-transmitter E_b/N_0.
///
/// With `E_b0 = A²·T_S/2` and `N_0 = E_b0/(E_b/N_0)`, each real dimension of
/// the complex envelope carries variance `N_0·f_s`, so the symbol correlator
/// sees exactly the requested `E_b/N_0`.
pub fn noise_variance_per_dimension(ebn0_db: f64, params: &ModulationParams, ref_amplitude: f64) -> Result<f64> {
    if !(ref_amplitude > 0.0 && ref_amplitude.is_finite()) {
        return Err(invalid(format!("reference amplitude must be > 0, got {ref_amplitude}")));
    }
    if ebn0_db.is_nan() || ebn0_db == f64::NEG_INFINITY {
        return Err(invalid(format!("Eb/N0 must be finite or +inf, got {ebn0_db}")));
    }
    if ebn0_db == f64::INFINITY {
        return Ok(0.0);
    }
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    let eb0 = ref_amplitude * ref_amplitude * params.symbol_period / 2.0;
    let n0 = eb0 / ebn0;
    Ok(n0 * params.sample_rate())
}

/// Adds independent Gaussian noise with the given per-dimension standard deviation.
pub fn add_noise_in_place<R: Rng + ?Sized>(samples: &mut [Complex64], sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    for s in samples {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += Complex64::new(sigma * re, sigma * im);
    }
}

/// Adds AWGN so that a single transmitter of amplitude `ref_amplitude` is
/// received at `ebn0_db`. `+inf` returns the stream unchanged.
pub fn add_awgn(
    stream: &SampleStream,
    ebn0_db: f64,
    params: &ModulationParams,
    ref_amplitude: f64,
    seed: u64,
) -> Result<SampleStream> {
    if (stream.sample_rate - params.sample_rate()).abs() > 1e-9 * stream.sample_rate {
        return Err(Error::SampleRateMismatch(stream.sample_rate, params.sample_rate()));
    }
    let var = noise_variance_per_dimension(ebn0_db, params, ref_amplitude)?;
    let mut out = stream.clone();
    let mut rng = rng::stream(seed, &[0xA7A7]);
    add_noise_in_place(&mut out.samples, var.sqrt(), &mut rng);
    Ok(out)
}

/// Positive envelope of two same-data transmitters beating at `f_beat`:
/// `(A1 − A2) + 2·A2·|cos(2π·(f_beat/2)·t)|`, with `A1 >= A2` enforced by swapping.
pub fn envelope_analytic(a1: f64, a2: f64, f_beat: f64, t: f64) -> f64 {
    let (hi, lo) = if a1 >= a2 { (a1, a2) } else { (a2, a1) };
    (hi - lo) + 2.0 * lo * (2.0 * PI * (f_beat / 2.0) * t).cos().abs()
}

/// Peak magnitude over consecutive non-overlapping windows.
///
/// Returns `(window centre time, peak)` pairs. The window must span at least
/// two samples and at most an eighth of the beat period `t_beat`, so the
/// peak tracks the envelope rather than smearing a whole beat.
pub fn measured_envelope(stream: &SampleStream, window: f64, t_beat: f64) -> Result<Vec<(f64, f64)>> {
    let dt = 1.0 / stream.sample_rate;
    if !(window >= 2.0 * dt) {
        return Err(Error::OutOfRange(format!("window {window} s shorter than two samples")));
    }
    if !(t_beat > 0.0) || window > t_beat / 8.0 {
        return Err(Error::OutOfRange(format!(
            "window {window} s longer than T_beat/8 = {} s",
            t_beat / 8.0
        )));
    }
    let w = (window / dt).round() as usize;
    Ok(stream
        .samples
        .chunks_exact(w)
        .enumerate()
        .map(|(i, chunk)| {
            let peak = chunk.iter().map(|s| s.norm()).fold(0.0, f64::max);
            // centre of samples i*w .. i*w + w - 1
            let t = (i * w) as f64 * dt + (w - 1) as f64 * dt / 2.0;
            (t, peak)
        })
        .collect())
}

/// Beat frequency of a transmitter pair, `|cfo_1 − cfo_2|`.
pub fn beat_frequency(cfos: &[f64]) -> Result<f64> {
    match cfos {
        [a, b] => Ok((a - b).abs()),
        _ => Err(invalid(format!("beat frequency needs exactly 2 CFOs, got {}", cfos.len()))),
    }
}

pub const CTIQ_MAGIC: &[u8; 4] = b"CTIQ";
pub const CTIQ_VERSION: u32 = 1;

/// Writes `stream` as a CTIQ file: magic, u32 version, f64 sample rate
/// (16-byte header, little-endian) followed by interleaved f32 I/Q pairs.
pub fn write_ctiq<W: Write>(stream: &SampleStream, mut w: W) -> Result<()> {
    w.write_all(CTIQ_MAGIC)?;
    w.write_all(&CTIQ_VERSION.to_le_bytes())?;
    w.write_all(&stream.sample_rate.to_le_bytes())?;
    let mut buf = Vec::with_capacity(stream.len() * 8);
    for s in &stream.samples {
        buf.extend_from_slice(&(s.re as f32).to_le_bytes());
        buf.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_ctiq<R: Read>(mut r: R) -> Result<SampleStream> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[0..4] != CTIQ_MAGIC {
        return Err(invalid("not a CTIQ file"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != CTIQ_VERSION {
        return Err(invalid(format!("unsupported CTIQ version {version}")));
    }
    let sample_rate = f64::from_le_bytes(header[8..16].try_into().unwrap());
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() % 8 != 0 {
        return Err(invalid("CTIQ body is not a whole number of I/Q pairs"));
    }
    let samples = body
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    Ok(SampleStream::new(samples, sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bits(pattern: &str) -> Vec<bool> {
        pattern.chars().map(|c| c == '1').collect()
    }

    // Mean phase increment per sample within symbol `i`, in Hz.
    fn symbol_frequency(s: &SampleStream, sps: usize, i: usize) -> f64 {
        let w = &s.samples[i * sps..(i + 1) * sps];
        let dphi: f64 = w.windows(2).map(|p| (p[1] * p[0].conj()).arg()).sum::<f64>() / (sps - 1) as f64;
        dphi * s.sample_rate / (2.0 * PI)
    }

    #[test]
    fn params_validation() {
        let p = ModulationParams::default();
        assert_relative_eq!(p.modulation_index(), 1.0);
        assert_eq!(p.samples_per_symbol, 16);
        assert_relative_eq!(p.sample_rate(), 16e6);
        assert!(ModulationParams::new(1e-6, 5e5, 4).is_err());
        assert!(ModulationParams::new(1e-6, 0.0, 16).is_err());
    }

    #[test]
    fn all_zero_bits_is_constant_tone() {
        let p = ModulationParams::default();
        let tx = TransmitterSpec::new(vec![false; 8]).amplitude(0.7);
        let s = modulate(&p, &tx).unwrap();
        assert_eq!(s.len(), 8 * 16);
        for z in &s.samples {
            assert_relative_eq!(z.norm(), 0.7, epsilon = 1e-12);
        }
        for i in 0..8 {
            assert_relative_eq!(symbol_frequency(&s, 16, i), -p.freq_deviation, max_relative = 1e-9);
        }
    }

    #[test]
    fn alternating_bits_toggle_frequency() {
        let p = ModulationParams::default();
        let cfo = 20e3;
        let s = modulate(&p, &TransmitterSpec::new(bits("1010")).cfo(cfo)).unwrap();
        for (i, want) in [1.0, -1.0, 1.0, -1.0].iter().enumerate() {
            assert_relative_eq!(symbol_frequency(&s, 16, i), cfo + want * p.freq_deviation, max_relative = 1e-9);
        }
    }

    #[test]
    fn amplitude_linearity() {
        let p = ModulationParams::default();
        let b = bits("110100111");
        let s1 = modulate(&p, &TransmitterSpec::new(b.clone()).phase(0.3)).unwrap();
        let s2 = modulate(&p, &TransmitterSpec::new(b).amplitude(2.0).phase(0.3)).unwrap();
        for (a, b) in s1.samples.iter().zip(&s2.samples) {
            assert_relative_eq!((b - a * 2.0).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn time_offset_pads_head() {
        let p = ModulationParams::default();
        let tx = TransmitterSpec::new(bits("1011")).time_offset(0.25e-6);
        let s = modulate(&p, &tx).unwrap();
        assert_eq!(s.len(), 4 + 4 * 16);
        assert!(s.samples[..4].iter().all(|z| z.norm() == 0.0));
        assert_relative_eq!(s.samples[4].norm(), 1.0);
        assert!(modulate(&p, &TransmitterSpec::new(bits("10")).time_offset(3e-6)).is_err());
        assert!(modulate(&p, &TransmitterSpec::new(bits("10")).time_offset(-1e-9)).is_err());
        assert!(modulate(&p, &TransmitterSpec::new(vec![])).is_err());
    }

    #[test]
    fn superpose_identity_zero_and_rate_check() {
        let p = ModulationParams::default();
        let a = modulate(&p, &TransmitterSpec::new(bits("1001")).phase(1.0)).unwrap();
        assert_eq!(superpose(std::slice::from_ref(&a)).unwrap(), a);
        let z = modulate(&p, &TransmitterSpec::new(bits("0110")).amplitude(0.0)).unwrap();
        assert_eq!(superpose(&[a.clone(), z]).unwrap(), a);
        let other = SampleStream::new(vec![Complex64::new(1.0, 0.0)], 1.0);
        assert!(matches!(superpose(&[a, other]), Err(Error::SampleRateMismatch(..))));
        assert!(superpose(&[]).is_err());
    }

    #[test]
    fn unmodulated_carriers_beat_at_cfo_difference() {
        // constant data on both transmitters leaves only the CFO rotation
        let p = ModulationParams::default();
        let f = 25e3;
        let b = vec![true; 400];
        let s = superpose(&[
            modulate(&p, &TransmitterSpec::new(b.clone()).cfo(f / 2.0)).unwrap(),
            modulate(&p, &TransmitterSpec::new(b).cfo(-f / 2.0)).unwrap(),
        ])
        .unwrap();
        // count envelope minima: one per beat period
        let mags: Vec<f64> = s.samples.iter().map(|z| z.norm()).collect();
        let minima = mags.windows(3).filter(|w| w[1] < w[0] && w[1] <= w[2] && w[1] < 0.1).count();
        let expected = s.duration() * f;
        assert!((minima as f64 - expected).abs() <= 1.0, "{minima} vs {expected}");
    }

    #[test]
    fn noiseless_awgn_and_determinism() {
        let p = ModulationParams::default();
        let s = modulate(&p, &TransmitterSpec::new(bits("1100101"))).unwrap();
        assert_eq!(add_awgn(&s, f64::INFINITY, &p, 1.0, 3).unwrap(), s);
        let a = add_awgn(&s, 5.0, &p, 1.0, 3).unwrap();
        let b = add_awgn(&s, 5.0, &p, 1.0, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, add_awgn(&s, 5.0, &p, 1.0, 4).unwrap());
        assert!(add_awgn(&s, 5.0, &p, 0.0, 3).is_err());
    }

    #[test]
    fn awgn_sample_variance_matches_configuration() {
        let p = ModulationParams::default();
        let n_bits = 1_000_000 / 16;
        let s = modulate(&p, &TransmitterSpec::new(vec![true; n_bits])).unwrap();
        let ebn0_db = 7.0;
        let want = noise_variance_per_dimension(ebn0_db, &p, 1.0).unwrap();
        // closed form: A²·sps / (2·Eb/N0)
        assert_relative_eq!(want, 16.0 / (2.0 * 10f64.powf(0.7)), max_relative = 1e-12);
        let noisy = add_awgn(&s, ebn0_db, &p, 1.0, 11).unwrap();
        let n = s.len() as f64;
        let (mut vr, mut vi) = (0.0, 0.0);
        for (y, x) in noisy.samples.iter().zip(&s.samples) {
            let d = y - x;
            vr += d.re * d.re;
            vi += d.im * d.im;
        }
        assert_relative_eq!(vr / n, want, max_relative = 0.01);
        assert_relative_eq!(vi / n, want, max_relative = 0.01);
    }

    #[test]
    fn envelope_analytic_cases() {
        assert_eq!(envelope_analytic(0.8, 0.0, 1e3, 0.123), 0.8);
        assert_eq!(envelope_analytic(1.0, 1.0, 1e3, 0.0), 2.0);
        assert!(envelope_analytic(1.0, 1.0, 1e3, 1.0 / 2e3) < 1e-12);
        assert_eq!(envelope_analytic(0.5, 1.0, 1e3, 0.1), envelope_analytic(1.0, 0.5, 1e3, 0.1));
    }

    #[test]
    fn measured_envelope_of_constant_carrier() {
        let p = ModulationParams::default();
        let s = modulate(&p, &TransmitterSpec::new(vec![false; 64]).amplitude(1.5)).unwrap();
        let env = measured_envelope(&s, 2e-6, 64e-6).unwrap();
        assert_eq!(env.len(), 32);
        for (_, v) in env {
            assert_relative_eq!(v, 1.5, epsilon = 1e-12);
        }
        assert!(measured_envelope(&s, 10e-6, 64e-6).is_err());
        assert!(measured_envelope(&s, 0.05e-6, 64e-6).is_err());
    }

    #[test]
    fn beat_frequency_pairs() {
        assert_relative_eq!(beat_frequency(&[-8580.0, -6750.0]).unwrap(), 1830.0, epsilon = 1e-9);
        assert_relative_eq!(1.0 / 1830.0, 0.546e-3, max_relative = 1e-3);
        assert_eq!(beat_frequency(&[3.0, 3.0]).unwrap(), 0.0);
        assert_relative_eq!(beat_frequency(&[-18250.0, -8580.0]).unwrap(), 9670.0, epsilon = 1e-9);
        assert!(beat_frequency(&[1.0]).is_err());
        assert!(beat_frequency(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn ctiq_roundtrip_and_header() {
        let p = ModulationParams::default();
        let s = modulate(&p, &TransmitterSpec::new(bits("1011")).phase(0.4)).unwrap();
        let mut buf = Vec::new();
        write_ctiq(&s, &mut buf).unwrap();
        assert_eq!(&buf[0..4], b"CTIQ");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(buf[8..16].try_into().unwrap()), 16e6);
        assert_eq!(buf.len(), 16 + s.len() * 8);
        let back = read_ctiq(&buf[..]).unwrap();
        assert_eq!(back.sample_rate, s.sample_rate);
        for (a, b) in back.samples.iter().zip(&s.samples) {
            assert!((a - b).norm() < 1e-6);
        }
        assert!(read_ctiq(&b"XXXX0000000000000"[..]).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn stream_strategy() -> impl Strategy<Value = (Vec<bool>, f64, f64, f64)> {
            (
                proptest::collection::vec(any::<bool>(), 1..24),
                0.0f64..3.0,
                -200e3f64..200e3,
                0.0f64..std::f64::consts::TAU,
            )
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn magnitude_bound_for_k_transmitters(
                txs in proptest::collection::vec(stream_strategy(), 1..5)
            ) {
                let p = ModulationParams::default();
                let streams: Vec<_> = txs.iter().map(|(b, a, c, ph)| {
                    modulate(&p, &TransmitterSpec::new(b.clone()).amplitude(*a).cfo(*c).phase(*ph)).unwrap()
                }).collect();
                let sum = superpose(&streams).unwrap();
                let bound: f64 = txs.iter().map(|t| t.1).sum();
                prop_assert!(sum.max_magnitude() <= bound + 1e-9);
            }

            #[test]
            fn superposition_commutes_and_associates(
                a in stream_strategy(), b in stream_strategy(), c in stream_strategy()
            ) {
                let p = ModulationParams::default();
                let m = |t: &(Vec<bool>, f64, f64, f64)| modulate(
                    &p, &TransmitterSpec::new(t.0.clone()).amplitude(t.1).cfo(t.2).phase(t.3)).unwrap();
                let (x, y, z) = (m(&a), m(&b), m(&c));
                let xy = superpose(&[x.clone(), y.clone()]).unwrap();
                let yx = superpose(&[y.clone(), x.clone()]).unwrap();
                prop_assert_eq!(&xy, &yx);
                let left = superpose(&[xy, z.clone()]).unwrap();
                let right = superpose(&[x, superpose(&[y, z]).unwrap()]).unwrap();
                for (l, r) in left.samples.iter().zip(&right.samples) {
                    prop_assert!((l - r).norm() < 1e-12);
                }
            }

            #[test]
            fn modulate_is_amplitude_linear(
                t in stream_strategy(), k in 0.0f64..4.0
            ) {
                let p = ModulationParams::default();
                let base = TransmitterSpec::new(t.0.clone()).amplitude(t.1).cfo(t.2).phase(t.3);
                let s1 = modulate(&p, &base).unwrap();
                let s2 = modulate(&p, &base.clone().amplitude(t.1 * k)).unwrap();
                for (a, b) in s1.samples.iter().zip(&s2.samples) {
                    prop_assert!((b - a * k).norm() < 1e-9);
                }
            }
        }
    }
}
