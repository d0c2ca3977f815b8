//! Nonlinear Fourier transforms for the focusing NLSE with vanishing
//! boundaries.
//!
//! Conventions: the normalized signal obeys `j q_z = q_tt + 2|q|² q`, the
//! scattering problem is `v_t = [[-jλ, q], [-q*, jλ]] v` with
//! `v → (1, 0) e^{-jλt}` on the left, and `ρ = b/a` evolves as
//! `ρ(z, λ) = ρ(0, λ) e^{-4jλ²z}`. In the weak-signal limit
//! `ρ(λ) ≈ -conj(Q(-2λ))`, where `Q(ω) = ∫ q e^{-jωt} dt`.

mod energy;
mod inverse;
mod layer_peeling;
pub mod oracle;
mod repair;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_field, Error, Result};
use crate::signal::{ComplexSignal, UnitsMode};
use crate::spectrum::{LambdaGrid, NonlinearSpectrum, ScatteringPair};

pub use energy::{nft_energy, time_energy};
pub use inverse::{bnft, BackwardNft, Synthesis};
pub use layer_peeling::Interpolation;
pub use repair::{repair_instabilities, RepairConfig};

pub(crate) use layer_peeling::PreparedPotential;

/// Relative edge magnitude (vs. the peak) above which a frame is reported
/// as not vanishing at its boundaries.
const BOUNDARY_FRACTION: f64 = 1e-3;

const SNAP_TOL: f64 = 1e-9;

/// Moving-window specification for [`fnft_windowed`].
///
/// The window for λ is centered at `t_λ = -2 β2 L λ / T0` (seconds) and is
/// `t_w` seconds wide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub t_w: f64,
    pub link_beta2: f64,
    pub link_length: f64,
    pub t0: f64,
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_w > 0.0 && self.t_w.is_finite()) {
            return Err(invalid_field("window.t_w", "must be positive"));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(invalid_field("window.t0", "must be positive"));
        }
        if !(self.link_length >= 0.0 && self.link_length.is_finite() && self.link_beta2.is_finite())
        {
            return Err(invalid_field(
                "window.link_length",
                "must be finite and non-negative",
            ));
        }
        Ok(())
    }

    /// Window center in seconds.
    pub fn center(&self, lambda: f64) -> f64 {
        -2.0 * self.link_beta2 * self.link_length * lambda / self.t0
    }

    /// Inclusive sample span `[n_lo, n_hi]` (as a half-open range) of the
    /// clipped window for `lambda` on a normalized frame.
    ///
    /// The frame is `[t_start, t_start + N dt)`; window edges are snapped
    /// outward to sample instants.
    pub fn sample_range(&self, lambda: f64, signal: &ComplexSignal) -> std::ops::Range<usize> {
        let n = signal.len();
        let h = signal.dt();
        let f_lo = signal.t_start();
        let f_hi = f_lo + n as f64 * h;
        let width = self.t_w / self.t0;
        if width >= f_hi - f_lo {
            return 0..n;
        }
        let c = self.center(lambda) / self.t0;
        let lo = (c - width / 2.0).max(f_lo);
        let hi = (c + width / 2.0).min(f_hi);
        if lo > hi {
            return 0..0;
        }
        // The tolerance keeps round-off from snapping a full sample outward.
        let n_lo = ((lo - f_lo) / h + SNAP_TOL).floor().max(0.0) as usize;
        let n_hi = ((((hi - f_lo) / h) - SNAP_TOL).ceil().max(0.0) as usize).min(n - 1);
        n_lo.min(n_hi)..n_hi + 1
    }
}

/// Forward NFT settings.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForwardNft {
    pub interpolation: Interpolation,
    pub repair: RepairConfig,
}

impl ForwardNft {
    pub fn new(interpolation: Interpolation) -> Self {
        Self {
            interpolation,
            ..Self::default()
        }
    }

    fn prepare(&self, signal: &ComplexSignal) -> Result<PreparedPotential> {
        signal.require_units(UnitsMode::Normalized)?;
        signal.check_finite()?;
        Ok(PreparedPotential::new(signal, self.interpolation))
    }

    /// Jost coefficients over the whole frame.
    pub fn scatter(&self, signal: &ComplexSignal, grid: &LambdaGrid) -> Result<ScatteringPair> {
        Ok(self.prepare(signal)?.scatter_grid(grid))
    }

    /// `ρ = b/a` over the whole frame, with instability repair.
    pub fn continuous(
        &self,
        signal: &ComplexSignal,
        grid: &LambdaGrid,
    ) -> Result<NonlinearSpectrum> {
        let pair = self.scatter(signal, grid)?;
        self.finish(signal, *grid, pair)
    }

    /// `ρ = b/a` with each λ scattered over its own clipped moving window.
    pub fn windowed(
        &self,
        signal: &ComplexSignal,
        grid: &LambdaGrid,
        window: &WindowSpec,
    ) -> Result<NonlinearSpectrum> {
        window.validate()?;
        let prep = self.prepare(signal)?;
        let lambdas = grid.values();
        let ranges: Vec<_> = lambdas
            .iter()
            .map(|&l| window.sample_range(l, signal))
            .collect();
        let pair = if ranges.iter().all(|r| *r == (0..signal.len())) {
            prep.scatter_grid(grid)
        } else {
            prep.scatter_ranges(&lambdas, &ranges)
        };
        self.finish(signal, *grid, pair)
    }

    fn finish(
        &self,
        signal: &ComplexSignal,
        grid: LambdaGrid,
        pair: ScatteringPair,
    ) -> Result<NonlinearSpectrum> {
        let mut spectrum = NonlinearSpectrum::from_scattering(grid, pair)?;
        spectrum.boundary_warning = boundary_warning(signal);
        repair_instabilities(&mut spectrum, &self.repair)?;
        Ok(spectrum)
    }
}

fn boundary_warning(signal: &ComplexSignal) -> bool {
    let q = signal.samples();
    let peak = q.iter().map(|x| x.norm()).fold(0.0, f64::max);
    match (q.first(), q.last()) {
        (Some(a), Some(b)) => a.norm().max(b.norm()) > BOUNDARY_FRACTION * peak,
        _ => false,
    }
}

/// Layer-peeling Jost coefficients with band-limited interpolation.
pub fn zs_scatter_lp(signal: &ComplexSignal, grid: &LambdaGrid) -> Result<ScatteringPair> {
    ForwardNft::default().scatter(signal, grid)
}

/// Full-window forward NFT with default settings.
pub fn fnft_continuous(signal: &ComplexSignal, grid: &LambdaGrid) -> Result<NonlinearSpectrum> {
    ForwardNft::default().continuous(signal, grid)
}

/// Moving-window forward NFT with default settings.
pub fn fnft_windowed(
    signal: &ComplexSignal,
    grid: &LambdaGrid,
    window: &WindowSpec,
) -> Result<NonlinearSpectrum> {
    ForwardNft::default().windowed(signal, grid, window)
}

pub(crate) fn require_conjugate(grid: &LambdaGrid, signal: &ComplexSignal) -> Result<()> {
    if grid.is_conjugate_to(signal.len(), signal.dt()) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "λ grid (step {:.6e}) is not conjugate to a {}-sample frame with dt = {:.6e}",
            grid.step(),
            signal.len(),
            signal.dt()
        )))
    }
}
