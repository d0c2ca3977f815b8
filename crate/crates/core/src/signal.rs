//! Uniformly sampled complex baseband waveforms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Whether a waveform is expressed in SI units or in the normalized units of
/// the integrable NLSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitsMode {
    /// Amplitude in sqrt(W), time in s.
    Physical,
    /// Dimensionless amplitude and time.
    Normalized,
}

impl UnitsMode {
    pub fn name(self) -> &'static str {
        match self {
            UnitsMode::Physical => "physical",
            UnitsMode::Normalized => "normalized",
        }
    }
}

/// A complex waveform on the uniform grid `t_n = t_start + n * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
    dt: f64,
    t_start: f64,
    units: UnitsMode,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, dt: f64, t_start: f64, units: UnitsMode) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("signal must hold at least one sample"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!(
                "sample spacing must be positive, got {dt}"
            )));
        }
        if !t_start.is_finite() {
            return Err(invalid("t_start must be finite"));
        }
        Ok(Self {
            samples,
            dt,
            t_start,
            units,
        })
    }

    pub fn zeros(len: usize, dt: f64, t_start: f64, units: UnitsMode) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len], dt, t_start, units)
    }

    /// Same grid, new samples.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        assert_eq!(
            samples.len(),
            self.samples.len(),
            "sample count must match the grid"
        );
        Self {
            samples,
            dt: self.dt,
            t_start: self.t_start,
            units: self.units,
        }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn units(&self) -> UnitsMode {
        self.units
    }

    /// Time of sample `n`.
    pub fn time(&self, n: usize) -> f64 {
        self.t_start + n as f64 * self.dt
    }

    /// Frame duration `N * dt`.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    /// Spacing of the conjugate (FFT) frequency grid, `1 / (N dt)`.
    pub fn frequency_step(&self) -> f64 {
        1.0 / self.duration()
    }

    /// `sum |x_n|^2 dt`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * self.dt
    }

    /// Energy of samples `range`.
    pub fn energy_in(&self, range: std::ops::Range<usize>) -> f64 {
        self.samples[range]
            .iter()
            .map(|s| s.norm_sqr())
            .sum::<f64>()
            * self.dt
    }

    pub fn scale(&mut self, factor: f64) {
        for s in &mut self.samples {
            *s *= factor;
        }
    }

    /// Index of the first non-finite sample, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.samples
            .iter()
            .position(|s| !(s.re.is_finite() && s.im.is_finite()))
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some(i) => Err(Error::NonFinite(i)),
            None => Ok(()),
        }
    }

    pub(crate) fn require_units(&self, expected: UnitsMode) -> Result<()> {
        if self.units != expected {
            return Err(Error::UnitsMismatch {
                expected: expected.name(),
                found: self.units.name(),
            });
        }
        Ok(())
    }

    pub(crate) fn relabel(mut self, dt: f64, t_start: f64, units: UnitsMode) -> Self {
        self.dt = dt;
        self.t_start = t_start;
        self.units = units;
        self
    }
}

/// All-zero physical frame for a burst of `n_b` symbols with `n_z` guard
/// symbols, `oversampling` samples per symbol and symbol time `t_s`.
///
/// The frame spans `-T/2 <= t < T/2` with `T = (n_b + n_z) t_s`.
pub fn make_grid(n_b: usize, n_z: usize, oversampling: usize, t_s: f64) -> Result<ComplexSignal> {
    if n_b == 0 || n_z == 0 || oversampling == 0 {
        return Err(invalid(format!(
            "burst geometry must be positive (n_b={n_b}, n_z={n_z}, oversampling={oversampling})"
        )));
    }
    if !(t_s > 0.0 && t_s.is_finite()) {
        return Err(invalid(format!("symbol time must be positive, got {t_s}")));
    }
    let n = (n_b + n_z) * oversampling;
    let dt = t_s / oversampling as f64;
    let period = (n_b + n_z) as f64 * t_s;
    ComplexSignal::zeros(n, dt, -period / 2.0, UnitsMode::Physical)
}

/// FFT-ordered frequencies for `n` samples spaced by `dt`.
pub fn fft_frequencies(n: usize, dt: f64) -> Vec<f64> {
    let df = 1.0 / (n as f64 * dt);
    (0..n)
        .map(|k| {
            let k = k as i64;
            let k = if k >= (n as i64 + 1) / 2 {
                k - n as i64
            } else {
                k
            };
            k as f64 * df
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let g = make_grid(8, 800, 4, 20e-12).unwrap();
        assert_eq!(g.len(), 3232);
        assert!((g.duration() - 16.16e-9).abs() < 1e-20);
        assert!((g.t_start() + 8.08e-9).abs() < 1e-20);
        assert_eq!(g.dt(), 5e-12);

        let g = make_grid(1024, 800, 4, 20e-12).unwrap();
        assert_eq!(g.len(), 7296);
    }

    #[test]
    fn grid_rejects_zero() {
        assert!(make_grid(0, 800, 4, 20e-12).is_err());
        assert!(make_grid(8, 0, 4, 20e-12).is_err());
        assert!(make_grid(8, 800, 0, 20e-12).is_err());
        assert!(make_grid(8, 800, 4, 0.0).is_err());
        assert!(make_grid(8, 800, 4, -1.0).is_err());
    }

    #[test]
    fn conjugate_grid_consistent() {
        for &(nb, nz, s) in &[(8, 800, 4), (32, 200, 4), (3, 5, 7), (128, 800, 16)] {
            let g = make_grid(nb, nz, s, 20e-12).unwrap();
            let f = fft_frequencies(g.len(), g.dt());
            let df = f[1] - f[0];
            assert!((df - g.frequency_step()).abs() < 1e-9 * df);
            assert!((df * g.len() as f64 * g.dt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_of_constant() {
        let s = ComplexSignal::new(
            vec![Complex64::new(1.0, 1.0); 10],
            0.5,
            0.0,
            UnitsMode::Normalized,
        )
        .unwrap();
        assert!((s.energy() - 10.0).abs() < 1e-12);
    }
}
