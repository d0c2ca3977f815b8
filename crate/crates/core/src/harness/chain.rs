//! One burst through the configured transmission system.

use num_complex::Complex64;

use crate::channel::{
    add_white_noise, ase_accumulated_psd, dbp_receiver, edc_receiver, ssfm_propagate, NoiseModel,
    NoiseSource,
};
use crate::error::Result;
use crate::fiber::NormalizationScheme;
use crate::metrics::SymbolStats;
use crate::modem::{
    apply_phase_rotation, dac_adc_filter, dbm_to_watts, matched_filter_and_sample, nis_decode,
    nis_encode, power_control, precompensation_mode, shape_burst, BurstFrame, FrameGeometry,
    PhasePlan,
};
use crate::nft::{BackwardNft, ForwardNft, WindowSpec};
use crate::random::{Purpose, RandomStream};
use crate::signal::ComplexSignal;
use crate::spectrum::{LambdaGrid, NonlinearSpectrum};

use super::config::{ExperimentConfig, SystemKind};

/// Launched NFDM burst.
#[derive(Debug, Clone)]
pub struct Transmission {
    /// Physical field on the full frame.
    pub signal: ComplexSignal,
    /// NIS scale factor of the burst.
    pub kappa: f64,
    /// In-band round-trip residual of the synthesis.
    pub residual: f64,
    /// Length of the synthesis window in symbols.
    pub window_symbols: usize,
}

/// Per-burst outcome.
#[derive(Debug, Clone, Copy, Default)]
pub struct BurstOutcome {
    pub stats: SymbolStats,
    /// Backward NFT residual at the transmitter (zero for linear systems).
    pub synthesis_residual: f64,
    /// Synthesis window in symbols (zero for linear systems).
    pub synthesis_symbols: usize,
    pub ssfm_steps: usize,
}

/// Everything about a configuration that is shared by its bursts.
pub struct Chain {
    config: ExperimentConfig,
    geometry: FrameGeometry,
    norm: NormalizationScheme,
    power: f64,
    /// Normalized link length seen by the spectrum phase.
    l_norm: f64,
    phase: PhasePlan,
    precomp: bool,
    rx_grid: LambdaGrid,
    fnft: ForwardNft,
    bnft: BackwardNft,
    window: Option<WindowSpec>,
}

impl Chain {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let geometry = config.geometry()?;
        let t0 = config.symbol_time();
        let norm = NormalizationScheme::for_fiber(&config.fiber, t0);
        // Over the AWGN control there is no dispersion to split.
        let precomp = config.precompensation && config.system == SystemKind::Nfdm;
        let l_norm = if config.system == SystemKind::NfdmAwgn {
            0.0
        } else {
            norm.normalized_length(config.fiber.length)
        };
        let h = t0 / config.oversampling as f64 / norm.t0;
        // ω = -2λ: the shaped band |f| <= (1+β) R_s / 2 maps to |λ| <= λ_max.
        let lambda_max = std::f64::consts::PI * (1.0 + config.shaping.rolloff) * config.symbol_rate
            / 2.0
            * norm.t0;
        let rx_grid = LambdaGrid::band(geometry.len(), h, lambda_max);
        let mut fnft = ForwardNft::new(config.nft.interpolation);
        fnft.repair = config.nft.repair;
        let bnft = BackwardNft {
            target: config.nft.bnft_target,
            max_refinements: config.nft.bnft_max_refinements,
            interpolation: config.nft.interpolation,
            ..BackwardNft::default()
        };
        let window = config.window_tw.map(|tw| WindowSpec {
            t_w: tw * geometry.duration(),
            link_beta2: config.fiber.beta2,
            link_length: if config.system == SystemKind::NfdmAwgn {
                0.0
            } else if precomp {
                config.fiber.length / 2.0
            } else {
                config.fiber.length
            },
            t0: norm.t0,
        });
        Ok(Self {
            config: config.clone(),
            geometry,
            norm,
            power: dbm_to_watts(config.launch_power_dbm),
            l_norm,
            phase: precompensation_mode(precomp),
            precomp,
            rx_grid,
            fnft,
            bnft,
            window,
        })
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geometry
    }

    pub fn normalization(&self) -> &NormalizationScheme {
        &self.norm
    }

    /// Normalized energy the launched burst must carry.
    fn target_energy(&self) -> f64 {
        let symbols = self.config.power_averaging.symbols(&self.geometry);
        self.power / self.norm.p0 * symbols * self.config.symbol_time() / self.norm.t0
    }

    /// Amplitude that puts a unit-power shaped burst at the launch power.
    fn linear_gain(&self) -> f64 {
        let symbols = self.config.power_averaging.symbols(&self.geometry);
        (self.power * symbols / self.config.n_b as f64).sqrt()
    }

    /// Symbols of burst `burst`.
    pub fn burst_frame(&self, burst: u64) -> BurstFrame {
        let c = &self.config;
        let mut data_rng = RandomStream::for_burst(c.seed, burst, Purpose::Symbols).rng();
        BurstFrame::random(&mut data_rng, c.n_b, c.n_z, c.launch_power_dbm)
    }

    pub fn run_burst(&self, burst: u64) -> Result<BurstOutcome> {
        self.detect(burst).map(|(_, o)| o)
    }

    /// Soft symbols of burst `burst` with its outcome.
    pub fn detect(&self, burst: u64) -> Result<(Vec<Complex64>, BurstOutcome)> {
        let frame = self.burst_frame(burst);
        if self.config.system.is_nfdm() {
            self.run_nfdm(burst, &frame)
        } else {
            self.run_linear(burst, &frame)
        }
    }

    /// Channel: fiber with distributed ASE, or only the accumulated ASE.
    fn channel(&self, burst: u64, tx: &ComplexSignal) -> Result<(ComplexSignal, usize)> {
        let c = &self.config;
        let mut rng = RandomStream::for_burst(c.seed, burst, Purpose::Noise).rng();
        match c.system {
            SystemKind::NfdmAwgn => {
                if c.noise {
                    Ok((
                        add_white_noise(tx, ase_accumulated_psd(&c.fiber), &mut rng)?,
                        0,
                    ))
                } else {
                    Ok((tx.clone(), 0))
                }
            }
            _ => {
                let source = c.noise.then(|| NoiseSource {
                    model: NoiseModel::for_fiber(&c.fiber).with_injection(c.noise_injection),
                    rng: &mut rng,
                });
                ssfm_propagate(tx, &c.fiber, source, &c.steps)
            }
        }
    }

    /// Shaped burst at the launch power (physical units).
    pub fn linear_waveform(&self, frame: &BurstFrame) -> Result<ComplexSignal> {
        let mut tx = shape_burst(frame, &self.geometry, &self.config.shaping)?;
        tx.scale(self.linear_gain());
        Ok(tx)
    }

    fn run_linear(&self, burst: u64, frame: &BurstFrame) -> Result<(Vec<Complex64>, BurstOutcome)> {
        let c = &self.config;
        let tx = self.linear_waveform(frame)?;
        let gain = self.linear_gain();
        let (rx, steps) = self.channel(burst, &tx)?;
        let rx = dac_adc_filter(&rx, c.adc_bandwidth)?;
        let eq = match c.system {
            SystemKind::Dbp => dbp_receiver(&rx, &c.fiber, &c.steps)?,
            _ => edc_receiver(&rx, &c.fiber)?,
        };
        let soft =
            matched_filter_and_sample(&eq, &self.geometry, &c.shaping, Complex64::new(gain, 0.0))?;
        let outcome = BurstOutcome {
            stats: SymbolStats::from_block(&soft, &frame.bits)?,
            synthesis_residual: 0.0,
            synthesis_symbols: 0,
            ssfm_steps: steps,
        };
        Ok((soft, outcome))
    }

    /// NIS transmitter: the shaped burst's spectrum, scaled to the launch
    /// energy, is synthesized on a short window centered in the frame.
    ///
    /// The nonlinear signal is wider than the linear burst, increasingly so
    /// with energy. The window margin therefore doubles until a single
    /// layer-peeling pass leaves at most `synthesis_tail` of the energy in
    /// the outer half of each margin; the refined synthesis then runs on that
    /// window, which keeps growing while its residual exceeds
    /// `synthesis_tolerance`. The frame length caps the window.
    pub fn nfdm_transmit(&self, frame: &BurstFrame) -> Result<Transmission> {
        let c = &self.config;
        let mut margin = c.nft.synthesis_margin.max(1);
        loop {
            let geometry = synthesis_geometry(c, self.precomp, margin)?;
            let full_frame = geometry.n_z == c.n_z;
            let (rho, w, kappa) = self.spectrum_on(frame, &geometry)?;
            if !full_frame {
                let q = self.bnft.peel(&rho, &w)?;
                if tail_fraction(q.samples(), margin / 2 * c.oversampling) > c.nft.synthesis_tail {
                    margin *= 2;
                    continue;
                }
            }
            let s = self.bnft.synthesize(&rho, &w)?;
            if s.residual > c.nft.synthesis_tolerance && !full_frame {
                margin *= 2;
                continue;
            }
            let frame_grid = self.norm.normalize(&self.geometry.grid()?)?;
            let offset = (self.geometry.len() - geometry.len()) / 2;
            let mut samples = frame_grid.samples().to_vec();
            samples[offset..offset + s.signal.len()].copy_from_slice(s.signal.samples());
            let signal = self.norm.denormalize(&frame_grid.with_samples(samples))?;
            return Ok(Transmission {
                signal,
                kappa,
                residual: s.residual,
                window_symbols: geometry.symbols(),
            });
        }
    }

    /// Launch spectrum of the burst on the conjugate grid of `geometry`,
    /// with the normalized linear waveform and the NIS scale factor.
    fn spectrum_on(
        &self,
        frame: &BurstFrame,
        geometry: &FrameGeometry,
    ) -> Result<(NonlinearSpectrum, ComplexSignal, f64)> {
        let c = &self.config;
        let short = BurstFrame {
            n_z: geometry.n_z,
            ..frame.clone()
        };
        let shaped = shape_burst(&short, geometry, &c.shaping)?;
        let w = self.norm.normalize(&shaped)?;
        let mut rho = nis_encode(&w, 1.0)?;
        let kappa = power_control(&rho, self.target_energy())?;
        for r in rho.rho.iter_mut() {
            *r *= kappa;
        }
        if let Some(rot) = self.phase.tx {
            apply_phase_rotation(&mut rho, rot, self.l_norm)?;
        }
        Ok((rho, w, kappa))
    }

    /// FNFT over the processing band, phase removal, NIS inverse.
    fn nfdm_receive(&self, rx: &ComplexSignal, kappa: f64) -> Result<(ComplexSignal, usize)> {
        let c = &self.config;
        let rx = dac_adc_filter(rx, c.adc_bandwidth)?;
        let q = self.norm.normalize(&rx)?;
        let band = match &self.window {
            Some(w) => self.fnft.windowed(&q, &self.rx_grid, w)?,
            None => self.fnft.continuous(&q, &self.rx_grid)?,
        };
        let repaired = band.repaired_points();
        let full_grid = LambdaGrid::conjugate(q.len(), q.dt());
        let mut spec = NonlinearSpectrum::zeros(full_grid);
        let shift = (self.rx_grid.k_lo() - spec.grid.k_lo()) as usize;
        spec.rho[shift..shift + band.len()].copy_from_slice(&band.rho);
        apply_phase_rotation(&mut spec, self.phase.rx, self.l_norm)?;
        let u = nis_decode(&spec, kappa, &q)?;
        Ok((self.norm.denormalize(&u)?, repaired))
    }

    fn run_nfdm(&self, burst: u64, frame: &BurstFrame) -> Result<(Vec<Complex64>, BurstOutcome)> {
        let c = &self.config;
        let tx = self.nfdm_transmit(frame)?;
        let (rx, steps) = self.channel(burst, &tx.signal)?;
        let (u, repaired) = self.nfdm_receive(&rx, tx.kappa)?;
        let soft =
            matched_filter_and_sample(&u, &self.geometry, &c.shaping, Complex64::new(1.0, 0.0))?;
        let outcome = BurstOutcome {
            stats: SymbolStats::from_block(&soft, &frame.bits)?.with_repaired(repaired as u64),
            synthesis_residual: tx.residual,
            synthesis_symbols: tx.window_symbols,
            ssfm_steps: steps,
        };
        Ok((soft, outcome))
    }
}

/// Energy fraction in the first and last `edge` samples.
fn tail_fraction(q: &[Complex64], edge: usize) -> f64 {
    let total: f64 = q.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let edge = edge.min(q.len() / 2);
    let tails: f64 = q[..edge]
        .iter()
        .chain(&q[q.len() - edge..])
        .map(|v| v.norm_sqr())
        .sum();
    tails / total
}

/// Short frame on which the transmitter synthesizes: burst, pulse tails,
/// margins and, with precompensation, the dispersive spread over half the
/// link. Its guard has the parity of the frame guard so that the symbol
/// slots line up after centering.
fn synthesis_geometry(
    config: &ExperimentConfig,
    precomp: bool,
    margin: usize,
) -> Result<FrameGeometry> {
    let spread = if precomp {
        config.channel_memory().ceil() as usize
    } else {
        0
    };
    let mut n_z = config.shaping.span + 2 * margin + spread;
    if n_z >= config.n_z {
        n_z = config.n_z;
    } else if (config.n_z - n_z) % 2 == 1 {
        n_z += 1;
    }
    FrameGeometry::new(config.n_b, n_z, config.oversampling, config.symbol_time())
}
