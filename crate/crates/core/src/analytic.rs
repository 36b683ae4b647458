//! Closed-form error-rate, energy and scalability expressions.
//!
//! All E_b/N_0 arguments are single-transmitter ratios: for two equal
//! concurrent transmitters the bit energy swings between 0 and four times
//! the single-transmitter energy `E_b0`.

use crate::error::{Error, Result};

/// Energy-per-bit to noise-density ratio, stored linearly.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Ebn0(f64);

impl Ebn0 {
    pub fn linear(value: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::OutOfRange(format!("Eb/N0 must be >= 0, got {value}")));
        }
        Ok(Ebn0(value))
    }

    /// `+inf` dB maps to an infinite ratio (noiseless).
    pub fn from_db(db: f64) -> Self {
        Ebn0(10f64.powf(db / 10.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }
}

/// Non-coherent orthogonal BFSK bit error rate in AWGN: `½·exp(−x/2)`.
pub fn ber_bfsk(ebn0: Ebn0) -> f64 {
    0.5 * (-ebn0.0 / 2.0).exp()
}

/// Beat-period averaged BER of two equal-amplitude, time-aligned concurrent
/// transmitters under slow beating: `½·exp(−x)·I_0(x)`.
///
/// `exp(−x)·I_0(x)` is evaluated as a scaled Bessel value so the expression
/// stays finite for large `x`.
pub fn ber_2ct_equal(ebn0: Ebn0) -> f64 {
    0.5 * bessel_i0_scaled(ebn0.0)
}

const SERIES_LIMIT: f64 = 15.0;
const I0_DOMAIN: f64 = 50.0;

/// Modified Bessel function of the first kind, order zero, for `|x| <= 50`.
pub fn bessel_i0(x: f64) -> Result<f64> {
    let ax = x.abs();
    if !(ax <= I0_DOMAIN) {
        return Err(Error::OutOfRange(format!("I_0 argument {x} outside [-50, 50]")));
    }
    Ok(if ax <= SERIES_LIMIT {
        i0_series(ax)
    } else {
        ax.exp() * i0_asymptotic_scaled(ax)
    })
}

/// `exp(−|x|)·I_0(x)` for any finite `x`.
fn bessel_i0_scaled(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_LIMIT {
        (-ax).exp() * i0_series(ax)
    } else {
        i0_asymptotic_scaled(ax)
    }
}

// Σ (x²/4)^k / (k!)²
fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

// Hankel expansion: I_0(x)·e^{-x} ≈ (2πx)^{-1/2} Σ ((2k−1)!!)² / (k!·(8x)^k)
fn i0_asymptotic_scaled(x: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = term * (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
        if next >= term {
            break;
        }
        term = next;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// Instantaneous bit energy of two equal concurrent transmitters,
/// `4·E_b0·cos²(2π·(f_beat/2)·t)`.
pub fn energy_2ct(t: f64, eb0: f64, f_beat: f64) -> f64 {
    let c = (2.0 * std::f64::consts::PI * (f_beat / 2.0) * t).cos();
    4.0 * eb0 * c * c
}

/// Packet error rate from independent bit errors, `1 − (1 − ber)^L`.
pub fn per_from_ber(ber: f64, packet_bits: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&ber) {
        return Err(Error::OutOfRange(format!("BER {ber} not in [0, 1]")));
    }
    if packet_bits == 0 {
        return Err(Error::OutOfRange("packet length must be >= 1 bit".into()));
    }
    // ln1p keeps precision for tiny BER
    Ok(-f64::exp_m1(packet_bits as f64 * (-ber).ln_1p()))
}

/// Delivery probability after `n` independent attempts, `1 − (1 − prr)^n`.
pub fn pdr_repeats(prr: f64, n: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&prr) {
        return Err(Error::OutOfRange(format!("PRR {prr} not in [0, 1]")));
    }
    if n == 0 {
        return Err(Error::OutOfRange("repeat count must be >= 1".into()));
    }
    Ok(1.0 - (1.0 - prr).powi(n as i32))
}

/// Result of [`nmax_concurrent`]: the floored bound plus the unfloored value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmaxBound {
    pub n_max: u64,
    pub continuous: f64,
    /// Set when `f_clock·T_S < 3`, i.e. the bound is below one transmitter.
    pub degenerate: bool,
}

/// Maximum number of concurrent transmitters that keep the accumulated clock
/// jitter below half a symbol, `(T_S·f_clock/3)²`.
pub fn nmax_concurrent(f_clock: f64, symbol_period: f64) -> NmaxBound {
    let ticks = f_clock * symbol_period;
    let continuous = (ticks / 3.0).powi(2);
    if ticks < 3.0 {
        return NmaxBound { n_max: 0, continuous, degenerate: true };
    }
    // guard against 27.999999 style float error at exact boundaries
    let n_max = (continuous + 1e-9).floor() as u64;
    NmaxBound { n_max, continuous, degenerate: false }
}

/// Per-transmitter jitter standard deviation for a clock of `f_clock` Hz.
pub fn clock_jitter_sigma(f_clock: f64) -> f64 {
    1.0 / (2.0 * f_clock)
}

/// Positive root of `exp(−x/2)·I_0(x) = 1`: the E_b/N_0 (linear) above which
/// two equal concurrent transmitters have a higher BER than one.
pub fn crossover_ebn0() -> Ebn0 {
    let f = |x: f64| ber_2ct_equal(Ebn0(x)) - ber_bfsk(Ebn0(x));
    let (mut lo, mut hi) = (0.5, 10.0);
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ebn0(0.5 * (lo + hi))
}
