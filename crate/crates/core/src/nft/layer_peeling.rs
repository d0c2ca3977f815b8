//! Layer-peeling forward NFT.
//!
//! The Zakharov–Shabat system `v_t = [[-jλ, q], [-q*, jλ]] v` is integrated
//! across the frame as a product of exact constant-potential transfer
//! matrices
//!
//! ```text
//! exp(M h) = cos(k h) I + sin(k h)/k M,    k² = λ² + |q|²,
//! ```
//!
//! which are unitary for real λ. Two potential models are supported:
//!
//! * [`Interpolation::PiecewiseConstant`]: one matrix per sample, holding
//!   `q_n` over `[t_n - h/2, t_n + h/2]`. Exact for sample-and-hold inputs.
//! * [`Interpolation::BandLimited`]: the samples are read as a band-limited
//!   waveform. Each sample interval is the product of two exact matrices
//!   whose potentials combine the interpolant at the two Gauss nodes
//!   (fourth-order commutator-free exponential integrator).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fourier::fractional_shift;
use crate::signal::ComplexSignal;
use crate::spectrum::{LambdaGrid, ScatteringPair};

/// How the sampled potential is extended to continuous time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    BandLimited,
    PiecewiseConstant,
}

const SQRT3_6: f64 = 0.288_675_134_594_812_9; // √3/6
const CF4_HEAVY: f64 = 0.25 + SQRT3_6;
const CF4_LIGHT: f64 = 0.25 - SQRT3_6;

/// λ values processed together in the inner loop.
const BLOCK: usize = 64;

/// Potential prepared for repeated scattering at many λ.
#[derive(Debug, Clone)]
pub(crate) struct PreparedPotential {
    h: f64,
    t_start: f64,
    len: usize,
    stages: usize,
    lambda_scale: f64,
    pot: Vec<Complex64>,
    abs2: Vec<f64>,
}

impl PreparedPotential {
    pub(crate) fn new(signal: &ComplexSignal, interpolation: Interpolation) -> Self {
        let q = signal.samples();
        let (stages, lambda_scale, pot) = match interpolation {
            Interpolation::PiecewiseConstant => (1, 1.0, q.to_vec()),
            Interpolation::BandLimited => {
                let early = fractional_shift(q, -SQRT3_6);
                let late = fractional_shift(q, SQRT3_6);
                let mut pot = Vec::with_capacity(2 * q.len());
                for (e, l) in early.iter().zip(&late) {
                    pot.push(e * CF4_HEAVY + l * CF4_LIGHT);
                    pot.push(e * CF4_LIGHT + l * CF4_HEAVY);
                }
                (2, 0.5, pot)
            }
        };
        let abs2 = pot.iter().map(|p| p.norm_sqr()).collect();
        Self {
            h: signal.dt(),
            t_start: signal.t_start(),
            len: q.len(),
            stages,
            lambda_scale,
            pot,
            abs2,
        }
    }

    /// Left edge of the cell of sample `n`.
    fn edge(&self, n: usize) -> f64 {
        self.t_start + (n as f64 - 0.5) * self.h
    }

    /// Scatters every λ in `lambdas` over samples `range`, writing `(a, b)`.
    pub(crate) fn scatter_block(
        &self,
        lambdas: &[f64],
        range: std::ops::Range<usize>,
        a_out: &mut [Complex64],
        b_out: &mut [Complex64],
    ) {
        let m = lambdas.len();
        debug_assert!(m <= BLOCK);
        let mut v1r = [1.0f64; BLOCK];
        let mut v1i = [0.0f64; BLOCK];
        let mut v2r = [0.0f64; BLOCK];
        let mut v2i = [0.0f64; BLOCK];
        let mut ell = [0.0f64; BLOCK];
        let mut ell2h2 = [0.0f64; BLOCK];
        let h = self.h;
        for j in 0..m {
            ell[j] = lambdas[j] * self.lambda_scale;
            ell2h2[j] = ell[j] * ell[j] * h * h;
        }
        let ell2h2_max = ell2h2[..m].iter().fold(0.0f64, |a, &b| a.max(b));
        for n in range.clone() {
            for s in 0..self.stages {
                let idx = n * self.stages + s;
                let p = self.pot[idx];
                let ph2 = self.abs2[idx] * h * h;
                // The series covers the whole block unless the potential is
                // very strong, in which case the exact branch is taken.
                if ell2h2_max + ph2 < 1.0 {
                    for j in 0..m {
                        let (c, sk) = cos_sinc_series(ell2h2[j] + ph2);
                        step(
                            c,
                            sk * h,
                            ell[j],
                            p,
                            (&mut v1r[j], &mut v1i[j], &mut v2r[j], &mut v2i[j]),
                        );
                    }
                } else {
                    for j in 0..m {
                        let (c, sk) = cos_sinc(ell2h2[j] + ph2);
                        step(
                            c,
                            sk * h,
                            ell[j],
                            p,
                            (&mut v1r[j], &mut v1i[j], &mut v2r[j], &mut v2i[j]),
                        );
                    }
                }
            }
        }
        let w1 = self.edge(range.start);
        let w2 = self.edge(range.end);
        for j in 0..m {
            let lam = lambdas[j];
            let v1 = Complex64::new(v1r[j], v1i[j]);
            let v2 = Complex64::new(v2r[j], v2i[j]);
            a_out[j] = v1 * Complex64::from_polar(1.0, lam * (w2 - w1));
            b_out[j] = v2 * Complex64::from_polar(1.0, -lam * (w1 + w2));
        }
    }

    /// Full-frame scattering at every point of `grid`, parallel over λ.
    pub(crate) fn scatter_grid(&self, grid: &LambdaGrid) -> ScatteringPair {
        let lambdas = grid.values();
        let mut a = vec![Complex64::new(0.0, 0.0); lambdas.len()];
        let mut b = a.clone();
        lambdas
            .par_chunks(BLOCK)
            .zip(a.par_chunks_mut(BLOCK))
            .zip(b.par_chunks_mut(BLOCK))
            .for_each(|((lam, a), b)| self.scatter_block(lam, 0..self.len, a, b));
        ScatteringPair { a, b }
    }

    /// Per-λ sample ranges (e.g. moving windows), parallel over λ.
    pub(crate) fn scatter_ranges(
        &self,
        lambdas: &[f64],
        ranges: &[std::ops::Range<usize>],
    ) -> ScatteringPair {
        let out: Vec<(Complex64, Complex64)> = lambdas
            .par_iter()
            .zip(ranges.par_iter())
            .map(|(&lam, r)| {
                let mut a = [Complex64::new(0.0, 0.0)];
                let mut b = [Complex64::new(0.0, 0.0)];
                self.scatter_block(&[lam], r.clone(), &mut a, &mut b);
                (a[0], b[0])
            })
            .collect();
        ScatteringPair {
            a: out.iter().map(|p| p.0).collect(),
            b: out.iter().map(|p| p.1).collect(),
        }
    }
}

/// Applies one constant-potential exponential `[[c - j ℓ s, p s], [-p* s, c + j ℓ s]]`.
#[inline(always)]
fn step(c: f64, s: f64, ell: f64, p: Complex64, v: (&mut f64, &mut f64, &mut f64, &mut f64)) {
    let ls = ell * s;
    let (pr, pi) = (p.re * s, p.im * s);
    let (a1r, a1i, a2r, a2i) = (*v.0, *v.1, *v.2, *v.3);
    *v.0 = c * a1r + ls * a1i + (pr * a2r - pi * a2i);
    *v.1 = c * a1i - ls * a1r + (pr * a2i + pi * a2r);
    *v.2 = -(pr * a1r + pi * a1i) + (c * a2r - ls * a2i);
    *v.3 = -(pr * a1i - pi * a1r) + (c * a2i + ls * a2r);
}

// Reciprocals of (2k+1)(2k+2) and (2k+2)(2k+3) for the Taylor series.
const C_COEF: [f64; 9] = [
    1.0 / 2.0,
    1.0 / 12.0,
    1.0 / 30.0,
    1.0 / 56.0,
    1.0 / 90.0,
    1.0 / 132.0,
    1.0 / 182.0,
    1.0 / 240.0,
    1.0 / 306.0,
];
const S_COEF: [f64; 9] = [
    1.0 / 6.0,
    1.0 / 20.0,
    1.0 / 42.0,
    1.0 / 72.0,
    1.0 / 110.0,
    1.0 / 156.0,
    1.0 / 210.0,
    1.0 / 272.0,
    1.0 / 342.0,
];

/// Taylor part of [`cos_sinc`]; truncation error below 1/20! for x < 1.
#[inline(always)]
fn cos_sinc_series(x: f64) -> (f64, f64) {
    let mut c = 1.0;
    let mut s = 1.0;
    for k in (0..9).rev() {
        c = 1.0 - x * C_COEF[k] * c;
        s = 1.0 - x * S_COEF[k] * s;
    }
    (c, s)
}

/// `(cos √x, sin √x / √x)` for `x >= 0`.
#[inline(always)]
fn cos_sinc(x: f64) -> (f64, f64) {
    if x < 1.0 {
        cos_sinc_series(x)
    } else {
        let k = x.sqrt();
        let (sn, cs) = k.sin_cos();
        (cs, sn / k)
    }
}
