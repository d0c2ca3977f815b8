//! Physical link description and the mapping to normalized NLSE units.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_field, Result};
use crate::signal::{ComplexSignal, UnitsMode};

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Carrier frequency at 1550 nm (Hz).
pub const CARRIER_1550NM: f64 = 193.41e12;

/// Standard single-mode fiber link.
///
/// Units: `beta2` in s²/m, `gamma` in 1/(W m), `length` in m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberParams {
    pub alpha_db_per_km: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub length: f64,
    pub eta_sp: f64,
    pub carrier_freq: f64,
}

impl FiberParams {
    /// 2000 km of SMF: 0.2 dB/km, -20.39 ps²/km, 1.22 1/(W km), eta_sp = 4.
    pub fn standard_smf() -> Self {
        Self {
            alpha_db_per_km: 0.2,
            beta2: -20.39e-27,
            gamma: 1.22e-3,
            length: 2000e3,
            eta_sp: 4.0,
            carrier_freq: CARRIER_1550NM,
        }
    }

    /// Same link with sixteen times lower dispersion (-1.27 ps²/km).
    pub fn low_dispersion() -> Self {
        Self {
            beta2: -1.27e-27,
            ..Self::standard_smf()
        }
    }

    pub fn with_length(self, length: f64) -> Self {
        Self { length, ..self }
    }

    /// Attenuation in 1/m (power).
    pub fn alpha_lin(&self) -> f64 {
        self.alpha_db_per_km * std::f64::consts::LN_10 / 10.0 / 1e3
    }

    /// Checks the invariants needed by the focusing, vanishing-boundary NFT.
    ///
    /// `noise` enables the `eta_sp >= 1` requirement.
    pub fn validate(&self, noise: bool) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(invalid_field("fiber.length", "must be positive"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid_field("fiber.gamma", "must be non-negative"));
        }
        if !(self.beta2 < 0.0 && self.beta2.is_finite()) {
            return Err(invalid_field(
                "fiber.beta2",
                "must be negative (anomalous dispersion, focusing regime)",
            ));
        }
        if !(self.alpha_db_per_km >= 0.0 && self.alpha_db_per_km.is_finite()) {
            return Err(invalid_field(
                "fiber.alpha_db_per_km",
                "must be non-negative",
            ));
        }
        if noise && !(self.eta_sp >= 1.0) {
            return Err(invalid_field(
                "fiber.eta_sp",
                "must be >= 1 when noise is enabled",
            ));
        }
        if !(self.carrier_freq > 0.0) {
            return Err(invalid_field("fiber.carrier_freq", "must be positive"));
        }
        Ok(())
    }
}

/// The `(T0, Z0, P0)` triple turning the lossless physical NLSE into
/// `j q_z = q_tt + 2|q|^2 q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationScheme {
    pub t0: f64,
    pub z0: f64,
    pub p0: f64,
}

impl NormalizationScheme {
    /// `Z0 = 2 T0² / |β2|`, `P0 = |β2| / (γ T0²)`.
    pub fn for_fiber(fiber: &FiberParams, t0: f64) -> Self {
        let b2 = fiber.beta2.abs();
        Self {
            t0,
            z0: 2.0 * t0 * t0 / b2,
            p0: b2 / (fiber.gamma * t0 * t0),
        }
    }

    pub fn normalized_length(&self, length: f64) -> f64 {
        length / self.z0
    }

    pub fn normalized_time(&self, t: f64) -> f64 {
        t / self.t0
    }

    pub fn normalize(&self, signal: &ComplexSignal) -> Result<ComplexSignal> {
        signal.require_units(UnitsMode::Physical)?;
        let a = 1.0 / self.p0.sqrt();
        let mut out = signal.clone().relabel(
            signal.dt() / self.t0,
            signal.t_start() / self.t0,
            UnitsMode::Normalized,
        );
        out.scale(a);
        Ok(out)
    }

    pub fn denormalize(&self, signal: &ComplexSignal) -> Result<ComplexSignal> {
        signal.require_units(UnitsMode::Normalized)?;
        let a = self.p0.sqrt();
        let mut out = signal.clone().relabel(
            signal.dt() * self.t0,
            signal.t_start() * self.t0,
            UnitsMode::Physical,
        );
        out.scale(a);
        Ok(out)
    }
}
