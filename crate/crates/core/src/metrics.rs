//! Figures of merit: BER, Q-factor, EVM-SNR, rate efficiency and channel
//! memory.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{invalid_field, Result};
use crate::fiber::FiberParams;
use crate::modem::{decide_qpsk, map_bits_qpsk};

/// Fewest symbols for which a counted BER is taken at face value.
pub const MIN_BER_SYMBOLS: u64 = 10_000;

/// `η = N_b / (N_z + N_b)`.
pub fn rate_efficiency(n_b: usize, n_z: usize) -> Result<f64> {
    if n_b == 0 {
        return Err(invalid_field("n_b", "a burst needs at least one symbol"));
    }
    Ok(n_b as f64 / (n_b + n_z) as f64)
}

/// Dispersive broadening `2π|β2| L R_s² (1+β)` in symbol times, or the
/// per-side half of it when the compensation is split between TX and RX.
pub fn channel_memory_symbols(
    fiber: &FiberParams,
    symbol_rate: f64,
    rolloff: f64,
    precompensation: bool,
) -> f64 {
    let full = 2.0
        * std::f64::consts::PI
        * fiber.beta2.abs()
        * fiber.length
        * symbol_rate.powi(2)
        * (1.0 + rolloff);
    if precompensation {
        full / 2.0
    } else {
        full
    }
}

/// Conditions under which a report's Q values need care.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityFlag {
    /// No bit errors were counted; the BER-based Q is only a lower bound
    /// and is not reported.
    NoErrors,
    /// BER at or above 0.5: Q is zero (minus infinity in dB).
    NoInformation,
    /// Fewer than [`MIN_BER_SYMBOLS`] symbols went into the BER.
    FewSymbols,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub ber: f64,
    /// Headline Q in dB, from the EVM-SNR (`Q² = SNR`).
    pub q_db: f64,
    /// `20 log10(√2 erfc⁻¹(2 BER))`, absent when flagged.
    pub q_db_ber: Option<f64>,
    pub evm_snr_db: f64,
    pub symbols_counted: u64,
    pub errors_counted: u64,
    pub repaired_spectrum_points: u64,
    pub flags: Vec<QualityFlag>,
}

/// `Q = √2 erfc⁻¹(2 BER)` (linear).
pub fn q_from_ber(ber: f64) -> f64 {
    if ber >= 0.5 {
        0.0
    } else {
        std::f64::consts::SQRT_2 * erfc_inv(2.0 * ber)
    }
}

/// Mergeable error statistics of detected QPSK symbols.
///
/// The squared error is accumulated as a running mean (Chan's pairwise
/// update), so partial results from separate bursts can be combined.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymbolStats {
    pub symbols: u64,
    pub bit_errors: u64,
    pub mean_error_power: f64,
    pub mean_signal_power: f64,
    pub repaired: u64,
}

impl SymbolStats {
    /// Statistics of one block of soft symbols against the transmitted bits.
    pub fn from_block(soft: &[Complex64], bits: &[bool]) -> Result<Self> {
        if bits.len() != 2 * soft.len() {
            return Err(invalid_field(
                "reference_bits",
                format!("{} bits for {} symbols", bits.len(), soft.len()),
            ));
        }
        let reference = map_bits_qpsk(bits)?;
        let decided = decide_qpsk(soft);
        let bit_errors = decided.iter().zip(bits).filter(|(a, b)| a != b).count() as u64;
        let n = soft.len();
        if n == 0 {
            return Ok(Self::default());
        }
        let err: f64 = soft
            .iter()
            .zip(&reference)
            .map(|(y, x)| (y - x).norm_sqr())
            .sum::<f64>()
            / n as f64;
        let sig: f64 = reference.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64;
        Ok(Self {
            symbols: n as u64,
            bit_errors,
            mean_error_power: err,
            mean_signal_power: sig,
            repaired: 0,
        })
    }

    pub fn with_repaired(self, repaired: u64) -> Self {
        Self { repaired, ..self }
    }

    pub fn merge(&self, other: &Self) -> Self {
        let n = self.symbols + other.symbols;
        if n == 0 {
            return Self {
                repaired: self.repaired + other.repaired,
                ..Self::default()
            };
        }
        let w = other.symbols as f64 / n as f64;
        Self {
            symbols: n,
            bit_errors: self.bit_errors + other.bit_errors,
            mean_error_power: self.mean_error_power
                + (other.mean_error_power - self.mean_error_power) * w,
            mean_signal_power: self.mean_signal_power
                + (other.mean_signal_power - self.mean_signal_power) * w,
            repaired: self.repaired + other.repaired,
        }
    }

    pub fn report(&self) -> PerformanceReport {
        let bits = 2 * self.symbols;
        let ber = if bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / bits as f64
        };
        let evm_snr = self.mean_signal_power / self.mean_error_power;
        let evm_snr_db = 10.0 * evm_snr.log10();
        let mut flags = Vec::new();
        if self.symbols < MIN_BER_SYMBOLS {
            flags.push(QualityFlag::FewSymbols);
        }
        let q_db_ber = if self.bit_errors == 0 {
            flags.push(QualityFlag::NoErrors);
            None
        } else if ber >= 0.5 {
            flags.push(QualityFlag::NoInformation);
            None
        } else {
            Some(20.0 * q_from_ber(ber).log10())
        };
        PerformanceReport {
            ber,
            q_db: evm_snr_db,
            q_db_ber,
            evm_snr_db,
            symbols_counted: self.symbols,
            errors_counted: self.bit_errors,
            repaired_spectrum_points: self.repaired,
            flags,
        }
    }
}

/// Report for one set of soft symbols and the bits they carry.
pub fn q_factor(soft: &[Complex64], reference_bits: &[bool]) -> Result<PerformanceReport> {
    Ok(SymbolStats::from_block(soft, reference_bits)?.report())
}
