//! Numerical self-checks of the NFT stages on noise-free QPSK bursts.

use serde::Serialize;

use crate::error::Result;
use crate::fiber::FiberParams;
use crate::metrics::{channel_memory_symbols, rate_efficiency};
use crate::modem::{nis_encode, shape_burst};
use crate::nft::oracle::{pair_distance, OdeOracle, Potential};
use crate::nft::{nft_energy, time_energy, ForwardNft};
use crate::signal::ComplexSignal;
use crate::spectrum::{LambdaGrid, NonlinearSpectrum};

use super::chain::Chain;
use super::config::{ExperimentConfig, SystemKind};

/// Outcome of one check: `value` must not exceed `limit`.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
        }
    }

    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.limit
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}: {:.3e} (limit {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.limit
        )
    }
}

/// Normalized linear QPSK burst `burst` of `config` at its launch power.
pub fn linear_burst(config: &ExperimentConfig, burst: u64) -> Result<ComplexSignal> {
    let chain = Chain::new(config)?;
    let w = chain.linear_waveform(&chain.burst_frame(burst))?;
    chain.normalization().normalize(&w)
}

/// In-band λ grid of a normalized frame.
pub fn band_grid(config: &ExperimentConfig, signal: &ComplexSignal) -> LambdaGrid {
    let lambda_max = std::f64::consts::PI * (1.0 + config.shaping.rolloff) * config.symbol_rate
        / 2.0
        * config.symbol_time();
    LambdaGrid::band(signal.len(), signal.dt(), lambda_max)
}

/// Relative L² distance between the layer-peeling Jost coefficients and
/// the fine-step ODE reference, over the in-band λ.
pub fn oracle_distance(config: &ExperimentConfig, signal: &ComplexSignal) -> Result<f64> {
    let grid = band_grid(config, signal);
    let lp = ForwardNft::new(config.nft.interpolation).scatter(signal, &grid)?;
    let reference = OdeOracle::default().scatter(signal, &grid.values(), Potential::BandLimited);
    Ok(pair_distance(&lp, &reference.pair))
}

/// `max | |a|² + |b|² - 1 |` over the full conjugate grid.
pub fn unimodularity(config: &ExperimentConfig, signal: &ComplexSignal) -> Result<f64> {
    let grid = LambdaGrid::conjugate(signal.len(), signal.dt());
    Ok(ForwardNft::new(config.nft.interpolation)
        .scatter(signal, &grid)?
        .unimodularity_defect())
}

/// Synthesized NFDM burst with the spectrum it was built from, both on the
/// conjugate grid of the full frame.
pub struct RoundTrip {
    pub signal: ComplexSignal,
    pub requested: NonlinearSpectrum,
    pub recovered: NonlinearSpectrum,
    pub window_symbols: usize,
}

impl RoundTrip {
    /// `||F(B(ρ)) - ρ|| / ||ρ||`.
    pub fn residual(&self) -> f64 {
        self.recovered.relative_l2(&self.requested)
    }

    /// Relative difference between spectral and time-domain energy.
    pub fn parseval_defect(&self) -> f64 {
        let e = time_energy(&self.signal);
        (nft_energy(&self.recovered) - e).abs() / e
    }
}

/// Launches burst `burst` of an NFDM configuration (without
/// precompensation) and transforms the synthesized field back.
pub fn round_trip(config: &ExperimentConfig, burst: u64) -> Result<RoundTrip> {
    let mut c = config.clone();
    c.system = SystemKind::Nfdm;
    c.precompensation = false;
    let chain = Chain::new(&c)?;
    let frame = chain.burst_frame(burst);
    let tx = chain.nfdm_transmit(&frame)?;
    let norm = chain.normalization();
    let q = norm.normalize(&tx.signal)?;
    let shaped = norm.normalize(&shape_burst(&frame, chain.geometry(), &c.shaping)?)?;
    let grid = LambdaGrid::conjugate(q.len(), q.dt());
    let mut requested = nis_encode(&shaped, 1.0)?;
    for r in requested.rho.iter_mut() {
        *r *= tx.kappa;
    }
    let recovered = ForwardNft::new(c.nft.interpolation).continuous(&q, &grid)?;
    Ok(RoundTrip {
        signal: q,
        requested,
        recovered,
        window_symbols: tx.window_symbols,
    })
}

/// Closed-form spot checks: standard and low-dispersion channel memory and
/// the rate efficiency of a 100-symbol burst.
pub fn formula_checks() -> Vec<Check> {
    let memory = channel_memory_symbols(&FiberParams::standard_smf(), 50e9, 0.2, false);
    let low = channel_memory_symbols(&FiberParams::low_dispersion(), 50e9, 0.2, false);
    let eta = rate_efficiency(100, 800).unwrap_or(f64::NAN);
    vec![
        Check::new("channel memory 768.7 symbols", (memory - 768.7).abs(), 0.05),
        Check::new("low-dispersion memory 48 symbols", (low - 48.0).abs(), 0.5),
        Check::new("rate efficiency 100/900", (eta - 0.111).abs(), 5e-4),
    ]
}

/// Quick suite on a short frame: oracle equivalence, unimodularity,
/// round trip and Parseval.
pub fn quick_suite(base: &ExperimentConfig) -> Result<Vec<Check>> {
    let mut c = base.clone();
    c.system = SystemKind::Nfdm;
    c.n_b = 8;
    c.n_z = 64;
    c.noise = false;
    let mut checks = formula_checks();
    let q = linear_burst(&c, 0)?;
    checks.push(Check::new(
        "layer peeling vs ODE oracle",
        oracle_distance(&c, &q)?,
        1e-4,
    ));
    let mut fine = c.clone();
    fine.oversampling = 16;
    let q16 = linear_burst(&fine, 0)?;
    checks.push(Check::new(
        "unimodularity at 16 samples/symbol",
        unimodularity(&fine, &q16)?,
        1e-6,
    ));
    let rt = round_trip(&c, 0)?;
    checks.push(Check::new(
        "backward/forward round trip",
        rt.residual(),
        1e-3,
    ));
    checks.push(Check::new("Parseval", rt.parseval_defect(), 1e-3));
    Ok(checks)
}
