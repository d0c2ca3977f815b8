//! Nonlinear spectra on uniform λ grids.
//!
//! The spectral parameter is tied to the linear frequency `f` of a normalized
//! signal by `λ = -π f`. A grid point `λ_k = k Δλ` with `Δλ = π / (N dt)` is
//! therefore the FFT bin `-k mod N` of an `N`-sample frame.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform, strictly increasing grid `λ_i = (k_lo + i) Δλ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    k_lo: i64,
    len: usize,
    step: f64,
}

impl LambdaGrid {
    pub fn new(k_lo: i64, len: usize, step: f64) -> Result<Self> {
        if len == 0 {
            return Err(Error::GridMismatch("λ grid must not be empty".into()));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::GridMismatch(format!(
                "λ step must be positive, got {step}"
            )));
        }
        Ok(Self { k_lo, len, step })
    }

    /// Every FFT bin of an `n`-sample normalized frame with spacing `dt`.
    pub fn conjugate(n: usize, dt: f64) -> Self {
        let k_lo = 1 - ((n as i64) + 1) / 2;
        Self {
            k_lo,
            len: n,
            step: std::f64::consts::PI / (n as f64 * dt),
        }
    }

    /// Bins of the conjugate grid with `|λ| <= lambda_max`.
    pub fn band(n: usize, dt: f64, lambda_max: f64) -> Self {
        let full = Self::conjugate(n, dt);
        let k_max = (lambda_max / full.step + 1e-9).floor() as i64;
        let lo = (-k_max).max(full.k_lo);
        let hi = k_max.min(full.k_lo + n as i64 - 1);
        Self {
            k_lo: lo,
            len: (hi - lo + 1).max(1) as usize,
            step: full.step,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn k_lo(&self) -> i64 {
        self.k_lo
    }

    pub fn index(&self, i: usize) -> i64 {
        self.k_lo + i as i64
    }

    pub fn value(&self, i: usize) -> f64 {
        self.index(i) as f64 * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.value(i)).collect()
    }

    /// FFT bin of grid point `i` in an `n`-point transform.
    pub fn fft_bin(&self, i: usize, n: usize) -> usize {
        (-self.index(i)).rem_euclid(n as i64) as usize
    }

    /// Whether this grid lies on the conjugate grid of an `n`-sample frame
    /// with spacing `dt`.
    pub fn is_conjugate_to(&self, n: usize, dt: f64) -> bool {
        let full = Self::conjugate(n, dt);
        (self.step - full.step).abs() <= 1e-9 * full.step
            && self.k_lo >= full.k_lo
            && self.k_lo + self.len as i64 <= full.k_lo + n as i64
    }
}

/// Jost coefficients `a(λ)`, `b(λ)` per grid point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScatteringPair {
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

impl ScatteringPair {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `max | |a|² + |b|² - 1 |`.
    pub fn unimodularity_defect(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| (a.norm_sqr() + b.norm_sqr() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Why a spectral point was replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instability {
    /// `|a(λ)|` below the configured floor.
    SmallA,
    /// `ρ(λ)` is NaN or infinite.
    NonFinite,
    /// `|ρ(λ)|` far above the median of its neighbours.
    Spike,
}

/// Continuous nonlinear spectrum `ρ(λ) = b(λ)/a(λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearSpectrum {
    pub grid: LambdaGrid,
    pub rho: Vec<Complex64>,
    pub scattering: Option<ScatteringPair>,
    /// One entry per grid point; `Some` marks a point that was repaired.
    pub flags: Vec<Option<Instability>>,
    /// Set when the analysed signal did not vanish at the frame edges.
    pub boundary_warning: bool,
}

impl NonlinearSpectrum {
    pub fn new(grid: LambdaGrid, rho: Vec<Complex64>) -> Result<Self> {
        if rho.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} spectral values for a {}-point grid",
                rho.len(),
                grid.len()
            )));
        }
        let n = rho.len();
        Ok(Self {
            grid,
            rho,
            scattering: None,
            flags: vec![None; n],
            boundary_warning: false,
        })
    }

    pub fn zeros(grid: LambdaGrid) -> Self {
        let n = grid.len();
        Self::new(grid, vec![Complex64::new(0.0, 0.0); n]).expect("length matches")
    }

    /// Builds `ρ = b/a` from a scattering pair.
    pub fn from_scattering(grid: LambdaGrid, pair: ScatteringPair) -> Result<Self> {
        if pair.a.len() != grid.len() || pair.b.len() != grid.len() {
            return Err(Error::GridMismatch(
                "scattering pair does not match grid".into(),
            ));
        }
        let rho = pair.a.iter().zip(&pair.b).map(|(a, b)| b / a).collect();
        let mut s = Self::new(grid, rho)?;
        s.scattering = Some(pair);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.grid.values()
    }

    pub fn repaired_points(&self) -> usize {
        self.flags.iter().filter(|f| f.is_some()).count()
    }

    /// Relative L² distance `||ρ - other|| / ||other||` on a common grid.
    pub fn relative_l2(&self, reference: &NonlinearSpectrum) -> f64 {
        assert_eq!(self.grid, reference.grid, "spectra live on different grids");
        relative_l2(&self.rho, &reference.rho)
    }
}

pub fn relative_l2(x: &[Complex64], reference: &[Complex64]) -> f64 {
    let num: f64 = x
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    let den: f64 = reference.iter().map(|b| b.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
