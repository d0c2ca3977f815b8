use crate::signal::ComplexSignal;
use crate::spectrum::NonlinearSpectrum;

/// Energy carried by the continuous spectrum,
/// `E = (1/π) Σ log(1 + |ρ(λ)|²) Δλ`.
pub fn nft_energy(spectrum: &NonlinearSpectrum) -> f64 {
    let sum: f64 = spectrum.rho.iter().map(|r| r.norm_sqr().ln_1p()).sum();
    sum * spectrum.grid.step() / std::f64::consts::PI
}

/// `Σ |q_n|² dt`.
pub fn time_energy(signal: &ComplexSignal) -> f64 {
    signal.energy()
}
