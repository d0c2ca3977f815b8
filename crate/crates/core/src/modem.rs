//! NIS transceiver building blocks: QPSK mapping, root-raised-cosine
//! shaping, the linear↔nonlinear spectrum map, channel-phase rotation,
//! launch-power control and matched filtering.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, invalid_field, Error, Result};
use crate::fourier::Fourier;
use crate::signal::{fft_frequencies, make_grid, ComplexSignal, UnitsMode};
use crate::spectrum::{LambdaGrid, NonlinearSpectrum};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Gray-mapped QPSK: `00 → (1+j)/√2`, `01 → (-1+j)/√2`, `11 → (-1-j)/√2`,
/// `10 → (1-j)/√2`. The first bit selects the sign of the imaginary part,
/// the second the sign of the real part.
pub fn map_bits_qpsk(bits: &[bool]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(invalid(format!(
            "QPSK needs an even bit count, got {}",
            bits.len()
        )));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|b| {
            let re = if b[1] { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
            let im = if b[0] { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
            Complex64::new(re, im)
        })
        .collect())
}

/// Minimum-distance QPSK decisions. A component that is exactly zero
/// (or NaN) decides for the positive half-plane, so `decide(0) = 00`.
pub fn decide_qpsk(soft: &[Complex64]) -> Vec<bool> {
    soft.iter().flat_map(|s| [s.im < 0.0, s.re < 0.0]).collect()
}

/// Root-raised-cosine pulse parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shaping {
    pub rolloff: f64,
    /// Truncation span in symbols.
    pub span: usize,
}

impl Default for Shaping {
    fn default() -> Self {
        Self {
            rolloff: 0.2,
            span: 32,
        }
    }
}

impl Shaping {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(invalid_field("shaping.rolloff", "must lie in [0, 1]"));
        }
        if self.span == 0 {
            return Err(invalid_field("shaping.span", "must be positive"));
        }
        Ok(())
    }

    /// Pulse taps at `t = m / oversampling` symbols for
    /// `|m| <= span * oversampling / 2`, normalized to unit energy per symbol
    /// (`Σ p² = oversampling`).
    pub fn taps(&self, oversampling: usize) -> Vec<f64> {
        let half = (self.span * oversampling / 2) as i64;
        let mut p: Vec<f64> = (-half..=half)
            .map(|m| rrc(m as f64 / oversampling as f64, self.rolloff))
            .collect();
        let e: f64 = p.iter().map(|x| x * x).sum();
        let s = (oversampling as f64 / e).sqrt();
        for x in &mut p {
            *x *= s;
        }
        p
    }

    /// One-sided bandwidth of the shaped signal in units of the symbol rate.
    pub fn half_bandwidth(&self) -> f64 {
        0.5 * (1.0 + self.rolloff)
    }
}

/// Root-raised-cosine impulse response at `t` symbol times (peak-normalized
/// form with `p(0) = 1 - β + 4β/π`).
pub fn rrc(t: f64, beta: f64) -> f64 {
    use std::f64::consts::PI;
    if t == 0.0 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && (4.0 * beta * t.abs() - 1.0).abs() < 1e-12 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Sampling geometry of one burst frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub n_b: usize,
    pub n_z: usize,
    pub oversampling: usize,
    /// Symbol time (s).
    pub t_s: f64,
}

impl FrameGeometry {
    pub fn new(n_b: usize, n_z: usize, oversampling: usize, t_s: f64) -> Result<Self> {
        let g = Self {
            n_b,
            n_z,
            oversampling,
            t_s,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_b == 0 {
            return Err(invalid_field("n_b", "must be at least 1"));
        }
        if self.n_z == 0 {
            return Err(invalid_field("n_z", "must be at least 1"));
        }
        if self.oversampling == 0 {
            return Err(invalid_field("oversampling", "must be at least 1"));
        }
        if !(self.t_s > 0.0 && self.t_s.is_finite()) {
            return Err(invalid_field("t_s", "must be positive"));
        }
        Ok(())
    }

    pub fn symbols(&self) -> usize {
        self.n_b + self.n_z
    }

    pub fn len(&self) -> usize {
        self.symbols() * self.oversampling
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.symbols() as f64 * self.t_s
    }

    /// Guard symbols before the burst.
    pub fn lead(&self) -> usize {
        self.n_z / 2
    }

    /// Sample index of the center of symbol `k`.
    pub fn symbol_index(&self, k: usize) -> usize {
        (self.lead() + k) * self.oversampling + self.oversampling / 2
    }

    /// Samples spanned by the `n_b` symbol slots.
    pub fn burst_range(&self) -> std::ops::Range<usize> {
        let s = self.lead() * self.oversampling;
        s..s + self.n_b * self.oversampling
    }

    /// All-zero physical frame.
    pub fn grid(&self) -> Result<ComplexSignal> {
        make_grid(self.n_b, self.n_z, self.oversampling, self.t_s)
    }

    pub fn check(&self, signal: &ComplexSignal) -> Result<()> {
        if signal.len() != self.len() {
            return Err(Error::FrameMismatch(format!(
                "frame holds {} samples, geometry expects {}",
                signal.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// One burst of QPSK symbols and its launch settings.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstFrame {
    pub bits: Vec<bool>,
    pub symbols: Vec<Complex64>,
    pub n_z: usize,
    pub launch_power_dbm: f64,
}

impl BurstFrame {
    pub fn from_bits(bits: Vec<bool>, n_z: usize, launch_power_dbm: f64) -> Result<Self> {
        let symbols = map_bits_qpsk(&bits)?;
        Ok(Self {
            bits,
            symbols,
            n_z,
            launch_power_dbm,
        })
    }

    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        n_b: usize,
        n_z: usize,
        launch_power_dbm: f64,
    ) -> Self {
        let bits: Vec<bool> = (0..2 * n_b).map(|_| rng.gen()).collect();
        Self::from_bits(bits, n_z, launch_power_dbm).expect("even bit count")
    }

    pub fn n_b(&self) -> usize {
        self.symbols.len()
    }

    pub fn launch_power_watts(&self) -> f64 {
        dbm_to_watts(self.launch_power_dbm)
    }
}

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    1e-3 * 10f64.powf(p_dbm / 10.0)
}

/// Root-raised-cosine shaped burst with unit average symbol energy
/// (`≈ 1` average power over the burst), on the physical frame of
/// `geometry`. Symbols sit at the centers of the burst slots.
pub fn shape_burst(
    frame: &BurstFrame,
    geometry: &FrameGeometry,
    shaping: &Shaping,
) -> Result<ComplexSignal> {
    shaping.validate()?;
    geometry.validate()?;
    if frame.n_b() != geometry.n_b || frame.n_z != geometry.n_z {
        return Err(Error::FrameMismatch(format!(
            "burst of {}+{} symbols on a {}+{} frame",
            frame.n_b(),
            frame.n_z,
            geometry.n_b,
            geometry.n_z
        )));
    }
    if shaping.span > geometry.n_z {
        return Err(invalid_field(
            "shaping.span",
            format!(
                "pulse span {} exceeds the guard of {} symbols",
                shaping.span, geometry.n_z
            ),
        ));
    }
    let s = geometry.oversampling;
    let taps = shaping.taps(s);
    let half = (taps.len() / 2) as i64;
    let n = geometry.len() as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); geometry.len()];
    for (k, sym) in frame.symbols.iter().enumerate() {
        let c = geometry.symbol_index(k) as i64;
        for (m, p) in taps.iter().enumerate() {
            let idx = (c + m as i64 - half).rem_euclid(n) as usize;
            out[idx] += sym * p;
        }
    }
    Ok(geometry.grid()?.with_samples(out))
}

/// Matched RRC filter (circular convolution with the truncated pulse) and
/// one sample per symbol, divided by the known chain `gain`.
pub fn matched_filter_and_sample(
    waveform: &ComplexSignal,
    geometry: &FrameGeometry,
    shaping: &Shaping,
    gain: Complex64,
) -> Result<Vec<Complex64>> {
    geometry.check(waveform)?;
    let s = geometry.oversampling;
    let taps = shaping.taps(s);
    let n = geometry.len();
    let half = taps.len() / 2;
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    for (m, p) in taps.iter().enumerate() {
        let idx = (m as i64 - half as i64).rem_euclid(n as i64) as usize;
        h[idx] += p / s as f64;
    }
    let mut ft = Fourier::new(n);
    let mut x = waveform.samples().to_vec();
    ft.forward(&mut x);
    ft.forward(&mut h);
    for (a, b) in x.iter_mut().zip(&h) {
        // the pulse is real and even, so correlation equals convolution
        *a *= b;
    }
    ft.inverse(&mut x);
    Ok((0..geometry.n_b)
        .map(|k| x[geometry.symbol_index(k)] / gain)
        .collect())
}

/// Ideal brick-wall low-pass keeping `|f| <= bandwidth` (Hz) of a physical
/// waveform.
pub fn dac_adc_filter(waveform: &ComplexSignal, bandwidth: f64) -> Result<ComplexSignal> {
    waveform.require_units(UnitsMode::Physical)?;
    let n = waveform.len();
    let f = fft_frequencies(n, waveform.dt());
    if f.iter().all(|x| x.abs() <= bandwidth) {
        return Ok(waveform.clone());
    }
    let mut ft = Fourier::new(n);
    let mut x = waveform.samples().to_vec();
    ft.forward(&mut x);
    for (v, fk) in x.iter_mut().zip(&f) {
        if fk.abs() > bandwidth {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    ft.inverse(&mut x);
    Ok(waveform.with_samples(x))
}

/// NIS map of a normalized waveform onto the full conjugate λ grid:
/// `ρ(λ) = -κ Σ conj(w_n) e^{-2jλ t_n} dt`, the weak-signal nonlinear
/// spectrum of `κ w`.
pub fn nis_encode(waveform: &ComplexSignal, kappa: f64) -> Result<NonlinearSpectrum> {
    waveform.require_units(UnitsMode::Normalized)?;
    let n = waveform.len();
    let h = waveform.dt();
    let grid = LambdaGrid::conjugate(n, h);
    let mut x: Vec<Complex64> = waveform.samples().iter().map(|w| w.conj()).collect();
    Fourier::new(n).forward(&mut x);
    let t0 = waveform.t_start();
    let rho = (0..n)
        .map(|i| {
            let k = grid.index(i);
            let bin = k.rem_euclid(n as i64) as usize;
            let ph = Complex64::from_polar(1.0, -2.0 * grid.value(i) * t0);
            -kappa * h * x[bin] * ph
        })
        .collect();
    NonlinearSpectrum::new(grid, rho)
}

/// Inverse of [`nis_encode`] onto the normalized frame `template`.
/// Points of the conjugate grid missing from `spectrum` count as zero.
pub fn nis_decode(
    spectrum: &NonlinearSpectrum,
    kappa: f64,
    template: &ComplexSignal,
) -> Result<ComplexSignal> {
    template.require_units(UnitsMode::Normalized)?;
    crate::nft::require_conjugate(&spectrum.grid, template)?;
    if !(kappa != 0.0 && kappa.is_finite()) {
        return Err(invalid("NIS scale factor must be finite and non-zero"));
    }
    let n = template.len();
    let h = template.dt();
    let t0 = template.t_start();
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for (i, r) in spectrum.rho.iter().enumerate() {
        let k = spectrum.grid.index(i);
        let bin = k.rem_euclid(n as i64) as usize;
        let ph = Complex64::from_polar(1.0, 2.0 * spectrum.grid.value(i) * t0);
        x[bin] = r * ph;
    }
    Fourier::new(n).inverse(&mut x);
    let s = -1.0 / (kappa * h);
    Ok(template.with_samples(x.iter().map(|v| (v * s).conj()).collect()))
}

/// Channel-phase factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rotation {
    /// `e^{+4jλ²L'}`: removes the whole propagation phase at the receiver.
    FullRx,
    /// `e^{+2jλ²L'}`: half of the compensation, applied at each end.
    Half,
}

/// Multiplies `ρ(λ)` by the selected rotation for normalized length `l`.
pub fn apply_phase_rotation(
    spectrum: &mut NonlinearSpectrum,
    rotation: Rotation,
    l: f64,
) -> Result<()> {
    if !(l >= 0.0 && l.is_finite()) {
        return Err(invalid("normalized length must be non-negative"));
    }
    let c = match rotation {
        Rotation::FullRx => 4.0,
        Rotation::Half => 2.0,
    };
    let step = spectrum.grid.step();
    let k0 = spectrum.grid.k_lo();
    for (i, r) in spectrum.rho.iter_mut().enumerate() {
        let lam = (k0 + i as i64) as f64 * step;
        *r *= Complex64::from_polar(1.0, c * lam * lam * l);
    }
    Ok(())
}

/// Ideal channel law `ρ(L) = ρ(0) e^{-4jλ²L'}`.
pub fn propagate_spectrum(spectrum: &mut NonlinearSpectrum, l: f64) {
    let step = spectrum.grid.step();
    let k0 = spectrum.grid.k_lo();
    for (i, r) in spectrum.rho.iter_mut().enumerate() {
        let lam = (k0 + i as i64) as f64 * step;
        *r *= Complex64::from_polar(1.0, -4.0 * lam * lam * l);
    }
}

/// Where the dispersion phase is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhasePlan {
    pub tx: Option<Rotation>,
    pub rx: Rotation,
}

/// Off: the receiver rotates by the full phase. On: half at each end.
pub fn precompensation_mode(precompensation: bool) -> PhasePlan {
    if precompensation {
        PhasePlan {
            tx: Some(Rotation::Half),
            rx: Rotation::Half,
        }
    } else {
        PhasePlan {
            tx: None,
            rx: Rotation::FullRx,
        }
    }
}

/// Which span of time the launch power is averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerAveraging {
    /// Burst energy divided by `N_b T_s`.
    #[default]
    Burst,
    /// Burst energy divided by `(N_b + N_z) T_s`.
    Frame,
}

impl PowerAveraging {
    /// Averaging time in symbol times.
    pub fn symbols(&self, geometry: &FrameGeometry) -> f64 {
        match self {
            PowerAveraging::Burst => geometry.n_b as f64,
            PowerAveraging::Frame => geometry.symbols() as f64,
        }
    }
}

/// Real scale `κ` such that `κ ρ0` carries the normalized energy `target`
/// according to the continuous-spectrum Parseval identity, found by secant
/// iteration on `log E(κ)`.
pub fn power_control(rho0: &NonlinearSpectrum, target: f64) -> Result<f64> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(invalid("target energy must be finite and non-negative"));
    }
    let step = rho0.grid.step();
    let mags: Vec<f64> = rho0.rho.iter().map(|r| r.norm_sqr()).collect();
    let lin: f64 = mags.iter().sum::<f64>() * step / std::f64::consts::PI;
    if target == 0.0 {
        return Ok(0.0);
    }
    if lin == 0.0 {
        return Err(invalid(
            "cannot reach a positive launch power from an empty spectrum",
        ));
    }
    let energy = |k: f64| {
        mags.iter().map(|m| (k * k * m).ln_1p()).sum::<f64>() * step / std::f64::consts::PI
    };
    let g = |lk: f64| energy(lk.exp()).ln() - target.ln();
    // log κ: the linear estimate undershoots, so bracket from it upward.
    let mut x0 = 0.5 * (target / lin).ln();
    let mut g0 = g(x0);
    let mut x1 = x0 + 0.1;
    let mut g1 = g(x1);
    for _ in 0..100 {
        if g1.abs() < 1e-13 {
            break;
        }
        let d = g1 - g0;
        if d == 0.0 {
            break;
        }
        let x2 = x1 - g1 * (x1 - x0) / d;
        x0 = x1;
        g0 = g1;
        x1 = x2;
        g1 = g(x1);
    }
    if !(g1.abs() < 1e-9) {
        return Err(invalid(format!(
            "launch power control did not converge (log error {g1:.3e})"
        )));
    }
    Ok(x1.exp())
}
