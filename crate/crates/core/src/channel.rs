//! Fiber propagation and the reference receivers.
//!
//! The lossless physical NLSE is integrated in the form matching the
//! normalized equation `j q_z = q_tt + 2|q|² q`: the dispersive sub-step
//! multiplies the spectrum (`e^{-jωt}` forward transform) by `e^{-j β2 ω² dz / 2}` and the Kerr sub-step multiplies the
//! field by `e^{-j γ |A|² dz}`. Loss is exactly compensated by ideal
//! distributed gain, whose ASE is injected along the link.
//!
//! The transform makes the frame periodic; the guard interval keeps bursts
//! from wrapping around.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_field, Error, Result};
use crate::fiber::{FiberParams, PLANCK};
use crate::fourier::Fourier;
use crate::signal::{fft_frequencies, ComplexSignal, UnitsMode};

/// Nonlinear phase per step above which a policy is refused (rad).
pub const MAX_STEP_PHASE: f64 = 0.05;

/// Accumulated ASE power spectral density `η_sp h ν α L` (W/Hz, one
/// polarization).
pub fn ase_accumulated_psd(fiber: &FiberParams) -> f64 {
    fiber.eta_sp * PLANCK * fiber.carrier_freq * fiber.alpha_lin() * fiber.length
}

/// How ASE is spread along the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseInjection {
    /// After every step, in proportion to its length.
    #[default]
    PerStep,
    /// In `n` equal lumps at the ends of `n` equal link segments.
    Segments(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub enabled: bool,
    pub eta_sp: f64,
    /// Total PSD to inject over the whole link (W/Hz).
    pub psd_accumulated: f64,
    pub injection: NoiseInjection,
}

impl NoiseModel {
    pub fn off() -> Self {
        Self {
            enabled: false,
            eta_sp: 0.0,
            psd_accumulated: 0.0,
            injection: NoiseInjection::PerStep,
        }
    }

    pub fn for_fiber(fiber: &FiberParams) -> Self {
        Self {
            enabled: true,
            eta_sp: fiber.eta_sp,
            psd_accumulated: ase_accumulated_psd(fiber),
            injection: NoiseInjection::PerStep,
        }
    }

    pub fn with_injection(self, injection: NoiseInjection) -> Self {
        Self { injection, ..self }
    }

    /// PSD injected after a step of length `dz` on a link of length `length`.
    pub fn per_step_injection(&self, dz: f64, length: f64) -> f64 {
        if self.enabled && length > 0.0 {
            self.psd_accumulated * dz / length
        } else {
            0.0
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.psd_accumulated >= 0.0 && self.psd_accumulated.is_finite()) {
            return Err(invalid_field(
                "noise.psd_accumulated",
                "must be finite and non-negative",
            ));
        }
        if self.enabled && self.eta_sp < 1.0 {
            return Err(invalid_field(
                "noise.eta_sp",
                "must be >= 1 when noise is enabled",
            ));
        }
        if let NoiseInjection::Segments(0) = self.injection {
            return Err(invalid_field(
                "noise.injection",
                "needs at least one segment",
            ));
        }
        Ok(())
    }
}

/// Step-size rule of the split-step integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// Fixed `dz` (m); the last step is shortened to end on the link length.
    Constant { dz: f64 },
    /// `dz = dz_max / 2^k` with the smallest `k` keeping the nonlinear phase
    /// `γ max|A|² dz` below `max_phase`, re-evaluated every step.
    Adaptive { max_phase: f64, dz_max: f64 },
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy::Adaptive {
            max_phase: 4e-3,
            dz_max: 4000.0,
        }
    }
}

impl StepPolicy {
    fn validate(&self) -> Result<()> {
        match *self {
            StepPolicy::Constant { dz } => {
                if !(dz > 0.0 && dz.is_finite()) {
                    return Err(invalid_field("steps.dz", "must be positive"));
                }
            }
            StepPolicy::Adaptive { max_phase, dz_max } => {
                if !(dz_max > 0.0 && dz_max.is_finite()) {
                    return Err(invalid_field("steps.dz_max", "must be positive"));
                }
                if !(max_phase > 0.0) {
                    return Err(invalid_field("steps.max_phase", "must be positive"));
                }
                if max_phase > MAX_STEP_PHASE {
                    return Err(Error::StepTooLarge {
                        phase: max_phase,
                        limit: MAX_STEP_PHASE,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Noise source for one propagation.
pub struct NoiseSource<'a, R: Rng> {
    pub model: NoiseModel,
    pub rng: &'a mut R,
}

struct Propagator {
    n: usize,
    dt: f64,
    omega2: Vec<f64>,
    beta2: f64,
    gamma: f64,
    fft: Fourier,
    cache: HashMap<u64, Vec<Complex64>>,
}

impl Propagator {
    fn new(n: usize, dt: f64, beta2: f64, gamma: f64) -> Self {
        let omega2 = fft_frequencies(n, dt)
            .iter()
            .map(|f| (2.0 * std::f64::consts::PI * f).powi(2))
            .collect();
        Self {
            n,
            dt,
            omega2,
            beta2,
            gamma,
            fft: Fourier::new(n),
            cache: HashMap::new(),
        }
    }

    /// Dispersion factor for a sub-step of length `dz`, cached by value.
    fn dispersion(&mut self, dz: f64) -> &[Complex64] {
        let key = dz.to_bits();
        let (omega2, beta2) = (&self.omega2, self.beta2);
        self.cache.entry(key).or_insert_with(|| {
            omega2
                .iter()
                .map(|w2| Complex64::from_polar(1.0, -beta2 * w2 * dz / 2.0))
                .collect()
        })
    }

    fn apply_dispersion(&mut self, spec: &mut [Complex64], dz: f64) {
        if dz == 0.0 {
            return;
        }
        let d = self.dispersion(dz).to_vec();
        for (s, f) in spec.iter_mut().zip(&d) {
            *s *= f;
        }
    }

    fn step_length(&self, policy: &StepPolicy, peak: f64, remaining: f64) -> Result<f64> {
        let dz = match *policy {
            StepPolicy::Constant { dz } => {
                let phase = self.gamma.abs() * peak * dz.min(remaining);
                if phase > MAX_STEP_PHASE {
                    return Err(Error::StepTooLarge {
                        phase,
                        limit: MAX_STEP_PHASE,
                    });
                }
                dz
            }
            StepPolicy::Adaptive { max_phase, dz_max } => {
                let mut dz = dz_max;
                let g = self.gamma.abs() * peak;
                while g * dz > max_phase && dz > dz_max * 1e-9 {
                    dz *= 0.5;
                }
                dz
            }
        };
        Ok(dz.min(remaining))
    }

    /// Symmetric split-step over `length`. The spectrum is held between
    /// steps so adjacent half dispersion steps share one transform pair.
    fn run<R: Rng>(
        &mut self,
        samples: &mut Vec<Complex64>,
        length: f64,
        policy: &StepPolicy,
        mut noise: Option<NoiseSource<'_, R>>,
    ) -> Result<usize> {
        let n = self.n;
        let segment_marks: Vec<f64> = match noise.as_ref().map(|s| s.model.injection) {
            Some(NoiseInjection::Segments(k)) => {
                (1..=k).map(|i| length * i as f64 / k as f64).collect()
            }
            _ => Vec::new(),
        };
        let mut next_mark = 0;
        let mut z = 0.0;
        let mut steps = 0;
        let mut field = std::mem::take(samples);
        let peak = |f: &[Complex64]| f.iter().map(|x| x.norm_sqr()).fold(0.0, f64::max);
        let mut dz = self.step_length(policy, peak(&field), length)?;
        if let Some(&m) = segment_marks.first() {
            dz = dz.min(m);
        }
        let mut spec = field.clone();
        self.fft.forward(&mut spec);
        self.apply_dispersion(&mut spec, dz / 2.0);
        while z < length {
            field.copy_from_slice(&spec);
            self.fft.inverse(&mut field);
            let g = self.gamma;
            for x in field.iter_mut() {
                *x *= Complex64::from_polar(1.0, -g * x.norm_sqr() * dz);
            }
            spec.copy_from_slice(&field);
            self.fft.forward(&mut spec);
            self.apply_dispersion(&mut spec, dz / 2.0);
            z += dz;
            steps += 1;
            if length - z <= length * 1e-12 {
                z = length;
            }

            if let Some(src) = noise.as_mut() {
                let psd = match src.model.injection {
                    NoiseInjection::PerStep => src.model.per_step_injection(dz, length),
                    NoiseInjection::Segments(k) => {
                        if next_mark < segment_marks.len()
                            && z >= segment_marks[next_mark] * (1.0 - 1e-12)
                        {
                            next_mark += 1;
                            if src.model.enabled {
                                src.model.psd_accumulated / k as f64
                            } else {
                                0.0
                            }
                        } else {
                            0.0
                        }
                    }
                };
                if psd > 0.0 {
                    // White noise of per-sample variance psd/dt is, after the
                    // unnormalized transform, white with variance n psd/dt.
                    let sigma = (n as f64 * psd / self.dt / 2.0).sqrt();
                    for s in spec.iter_mut() {
                        let re: f64 = StandardNormal.sample(src.rng);
                        let im: f64 = StandardNormal.sample(src.rng);
                        *s += Complex64::new(sigma * re, sigma * im);
                    }
                }
            }

            if z >= length {
                break;
            }
            let mut next = self.step_length(policy, peak(&field), length - z)?;
            if next_mark < segment_marks.len() {
                next = next.min(segment_marks[next_mark] - z).max(0.0);
            }
            self.apply_dispersion(&mut spec, next / 2.0);
            dz = next;
        }
        self.fft.inverse(&mut spec);
        *samples = spec;
        Ok(steps)
    }
}

fn propagate_core<R: Rng>(
    signal: &ComplexSignal,
    beta2: f64,
    gamma: f64,
    length: f64,
    policy: &StepPolicy,
    noise: Option<NoiseSource<'_, R>>,
) -> Result<(ComplexSignal, usize)> {
    signal.require_units(UnitsMode::Physical)?;
    signal.check_finite()?;
    policy.validate()?;
    if let Some(src) = noise.as_ref() {
        src.model.validate()?;
    }
    if length == 0.0 {
        return Ok((signal.clone(), 0));
    }
    let mut p = Propagator::new(signal.len(), signal.dt(), beta2, gamma);
    let mut samples = signal.samples().to_vec();
    let steps = p.run(&mut samples, length, policy, noise)?;
    Ok((signal.with_samples(samples), steps))
}

/// Split-step propagation over the fiber with optional distributed ASE.
/// Returns the output field and the number of steps taken.
pub fn ssfm_propagate<R: Rng>(
    signal: &ComplexSignal,
    fiber: &FiberParams,
    noise: Option<NoiseSource<'_, R>>,
    policy: &StepPolicy,
) -> Result<(ComplexSignal, usize)> {
    fiber.validate(noise.as_ref().map(|n| n.model.enabled).unwrap_or(false))?;
    propagate_core(
        signal,
        fiber.beta2,
        fiber.gamma,
        fiber.length,
        policy,
        noise,
    )
}

/// Ideal digital backpropagation: noise-free split-step with negated β2
/// and γ over the whole link.
pub fn dbp_receiver(
    signal: &ComplexSignal,
    fiber: &FiberParams,
    policy: &StepPolicy,
) -> Result<ComplexSignal> {
    fiber.validate(false)?;
    let (out, _) = propagate_core::<rand_chacha::ChaCha8Rng>(
        signal,
        -fiber.beta2,
        -fiber.gamma,
        fiber.length,
        policy,
        None,
    )?;
    Ok(out)
}

/// Electronic dispersion compensation: removes the quadratic phase of the
/// whole link in one multiplication.
pub fn edc_receiver(signal: &ComplexSignal, fiber: &FiberParams) -> Result<ComplexSignal> {
    signal.require_units(UnitsMode::Physical)?;
    let n = signal.len();
    let mut p = Propagator::new(n, signal.dt(), -fiber.beta2, 0.0);
    let mut x = signal.samples().to_vec();
    p.fft.forward(&mut x);
    p.apply_dispersion(&mut x, fiber.length);
    p.fft.inverse(&mut x);
    Ok(signal.with_samples(x))
}

/// Adds white circular Gaussian noise of the given PSD (W/Hz) over the
/// simulation band: per-sample variance `psd / dt`.
pub fn add_white_noise<R: Rng>(
    signal: &ComplexSignal,
    psd: f64,
    rng: &mut R,
) -> Result<ComplexSignal> {
    signal.require_units(UnitsMode::Physical)?;
    if psd == 0.0 {
        return Ok(signal.clone());
    }
    let var = psd / signal.dt();
    let out = signal
        .samples()
        .iter()
        .map(|x| x + crate::random::complex_gaussian(rng, var))
        .collect();
    Ok(signal.with_samples(out))
}

/// AWGN control channel: the accumulated ASE of the fiber, no propagation.
pub fn awgn_channel<R: Rng>(
    signal: &ComplexSignal,
    fiber: &FiberParams,
    rng: &mut R,
) -> Result<ComplexSignal> {
    add_white_noise(signal, ase_accumulated_psd(fiber), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::NormalizationScheme;
    use crate::random::RandomStream;
    use crate::spectrum::relative_l2;
    use rand_chacha::ChaCha8Rng;

    fn pulse(n: usize, dt: f64, width: f64, peak: f64) -> ComplexSignal {
        let t0 = -(n as f64) * dt / 2.0;
        let s = (0..n)
            .map(|i| {
                let t = t0 + i as f64 * dt;
                Complex64::new(peak.sqrt() * (-(t / width).powi(2) / 2.0).exp(), 0.0)
            })
            .collect();
        ComplexSignal::new(s, dt, t0, UnitsMode::Physical).unwrap()
    }

    #[test]
    fn ase_psd_paper_value() {
        let f = FiberParams::standard_smf();
        let p = ase_accumulated_psd(&f);
        assert!((p - 4.722e-17).abs() < 0.005e-17, "{p}");
        assert_eq!(ase_accumulated_psd(&f.with_length(0.0)), 0.0);
        let p2 = ase_accumulated_psd(&f.with_length(4000e3));
        assert!((p2 / p - 2.0).abs() < 1e-14);
    }

    #[test]
    fn per_step_injection_sums_to_total() {
        let f = FiberParams::standard_smf();
        let m = NoiseModel::for_fiber(&f);
        let dzs: [f64; 3] = [700.0, 1000.0, 300.0];
        let mut z = 0.0;
        let mut total = 0.0;
        while z < f.length {
            let dz = dzs[(z as usize / 700) % 3].min(f.length - z);
            total += m.per_step_injection(dz, f.length);
            z += dz;
        }
        assert!((total / m.psd_accumulated - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_limit_is_exact_dispersion() {
        let f = FiberParams {
            gamma: 0.0,
            ..FiberParams::standard_smf().with_length(100e3)
        };
        let x = pulse(1024, 5e-12, 50e-12, 1e-3);
        let (y, _) =
            ssfm_propagate::<ChaCha8Rng>(&x, &f, None, &StepPolicy::Constant { dz: 5e3 }).unwrap();
        // analytic: spectrum times exp(-j β2 ω² L / 2)
        let mut spec = x.samples().to_vec();
        let mut ft = Fourier::new(1024);
        ft.forward(&mut spec);
        let fr = fft_frequencies(1024, 5e-12);
        for (s, fk) in spec.iter_mut().zip(&fr) {
            let w = 2.0 * std::f64::consts::PI * fk;
            *s *= Complex64::from_polar(1.0, -f.beta2 * w * w * f.length / 2.0);
        }
        ft.inverse(&mut spec);
        assert!(relative_l2(y.samples(), &spec) < 1e-10);
        // and EDC undoes it
        let back = edc_receiver(&y, &f).unwrap();
        assert!(relative_l2(back.samples(), x.samples()) < 1e-10);
    }

    #[test]
    fn energy_conserved_without_noise() {
        let f = FiberParams::standard_smf().with_length(200e3);
        let x = pulse(1024, 5e-12, 30e-12, 20e-3);
        let (y, steps) =
            ssfm_propagate::<ChaCha8Rng>(&x, &f, None, &StepPolicy::default()).unwrap();
        assert!(steps >= 200);
        assert!((y.energy() / x.energy() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fundamental_soliton_keeps_shape() {
        let f = FiberParams::standard_smf();
        let t0 = 20e-12;
        let norm = NormalizationScheme::for_fiber(&f, t0);
        let fiber = f.with_length(5.0 * norm.z0);
        let n = 1024;
        let dt = 0.0625 * t0;
        let start = -(n as f64) * dt / 2.0;
        // q = sech(t) in normalized units
        let s = (0..n)
            .map(|i| {
                let t = (start + i as f64 * dt) / t0;
                Complex64::new(norm.p0.sqrt() / t.cosh(), 0.0)
            })
            .collect();
        let x = ComplexSignal::new(s, dt, start, UnitsMode::Physical).unwrap();
        let (y, _) = ssfm_propagate::<ChaCha8Rng>(
            &x,
            &fiber,
            None,
            &StepPolicy::Adaptive {
                max_phase: 1e-3,
                dz_max: 1000.0,
            },
        )
        .unwrap();
        let env_in: Vec<Complex64> = x
            .samples()
            .iter()
            .map(|v| Complex64::new(v.norm(), 0.0))
            .collect();
        let env_out: Vec<Complex64> = y
            .samples()
            .iter()
            .map(|v| Complex64::new(v.norm(), 0.0))
            .collect();
        let err = relative_l2(&env_out, &env_in);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn dbp_inverts_constant_step_propagation() {
        let f = FiberParams::standard_smf().with_length(100e3);
        let x = pulse(512, 5e-12, 40e-12, 10e-3);
        let pol = StepPolicy::Constant { dz: 500.0 };
        let (y, _) = ssfm_propagate::<ChaCha8Rng>(&x, &f, None, &pol).unwrap();
        let back = dbp_receiver(&y, &f, &pol).unwrap();
        assert!(relative_l2(back.samples(), x.samples()) < 1e-6);
        // with γ = 0, DBP is EDC
        let lin = FiberParams { gamma: 0.0, ..f };
        let a = dbp_receiver(&y, &lin, &pol).unwrap();
        let b = edc_receiver(&y, &lin).unwrap();
        assert!(relative_l2(a.samples(), b.samples()) < 1e-12);
    }

    #[test]
    fn edc_is_not_idempotent_and_trivial_without_dispersion() {
        let f = FiberParams::standard_smf().with_length(100e3);
        let x = pulse(256, 5e-12, 20e-12, 1e-3);
        let once = edc_receiver(&x, &f).unwrap();
        let twice = edc_receiver(&once, &f).unwrap();
        assert!(relative_l2(twice.samples(), once.samples()) > 1e-3);
        let flat = FiberParams { beta2: 0.0, ..f };
        let same = edc_receiver(&x, &flat).unwrap();
        assert!(relative_l2(same.samples(), x.samples()) < 1e-14);
    }

    #[test]
    fn step_refusal() {
        let f = FiberParams::standard_smf().with_length(100e3);
        let x = pulse(256, 5e-12, 20e-12, 1.0);
        let r = ssfm_propagate::<ChaCha8Rng>(&x, &f, None, &StepPolicy::Constant { dz: 1000.0 });
        assert!(matches!(r, Err(Error::StepTooLarge { .. })));
        let r = ssfm_propagate::<ChaCha8Rng>(
            &x,
            &f,
            None,
            &StepPolicy::Adaptive {
                max_phase: 0.1,
                dz_max: 1000.0,
            },
        );
        assert!(matches!(r, Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn awgn_variance_per_sample() {
        let f = FiberParams::standard_smf();
        let dt = 5e-12;
        let zero = ComplexSignal::zeros(1 << 20, dt, 0.0, UnitsMode::Physical).unwrap();
        let mut rng = RandomStream::new(11, 0).rng();
        let y = awgn_channel(&zero, &f, &mut rng).unwrap();
        let var = y.samples().iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
        let want = ase_accumulated_psd(&f) / dt;
        assert!((var / want - 1.0).abs() < 0.01, "{var} vs {want}");
        let none = add_white_noise(&zero, 0.0, &mut rng).unwrap();
        assert_eq!(none, zero);
    }

    #[test]
    fn distributed_noise_matches_awgn_total() {
        // γ = 0 and β2 unitary: the injected noise energy is what remains.
        let f = FiberParams {
            gamma: 0.0,
            ..FiberParams::standard_smf()
        };
        let dt = 5e-12;
        let zero = ComplexSignal::zeros(1 << 12, dt, 0.0, UnitsMode::Physical).unwrap();
        let mut rng = RandomStream::new(3, 1).rng();
        let src = NoiseSource {
            model: NoiseModel::for_fiber(&f),
            rng: &mut rng,
        };
        let (y, steps) =
            ssfm_propagate(&zero, &f, Some(src), &StepPolicy::Constant { dz: 8000.0 }).unwrap();
        assert_eq!(steps, 250);
        let var = y.samples().iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
        let want = ase_accumulated_psd(&f) / dt;
        assert!((var / want - 1.0).abs() < 0.03, "{var} vs {want}");

        let mut rng = RandomStream::new(3, 2).rng();
        let src = NoiseSource {
            model: NoiseModel::for_fiber(&f).with_injection(NoiseInjection::Segments(10)),
            rng: &mut rng,
        };
        let (y, _) =
            ssfm_propagate(&zero, &f, Some(src), &StepPolicy::Constant { dz: 8000.0 }).unwrap();
        let var = y.samples().iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
        assert!((var / want - 1.0).abs() < 0.03, "{var} vs {want}");
    }
}
