//! Fine-step ODE integration of the scattering problem, used as a reference
//! for the layer-peeling transforms.
//!
//! In the interaction picture `u = (e^{jλt} v1, e^{-jλt} v2)` the system is
//!
//! ```text
//! u1' =  q(t) e^{2jλt} u2
//! u2' = -q*(t) e^{-2jλt} u1,      u(W1) = (1, 0)
//! ```
//!
//! and the Jost coefficients are read off directly as `a = u1(W2)`,
//! `b = u2(W2)`. Integration is classical RK4 with a uniform step.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::fourier::upsample;
use crate::signal::ComplexSignal;
use crate::spectrum::{relative_l2, ScatteringPair};

/// How the oracle reads the samples of a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Potential {
    /// Band-limited interpolant of the samples.
    BandLimited,
    /// `q_n` held over `[t_n - dt/2, t_n + dt/2]`.
    SampleAndHold,
}

/// Adaptive driver: the number of RK4 steps per sample is doubled until
/// successive results agree to `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOracle {
    pub initial_steps: usize,
    pub max_steps: usize,
    pub tolerance: f64,
}

impl Default for OdeOracle {
    fn default() -> Self {
        Self {
            initial_steps: 32,
            max_steps: 512,
            tolerance: 1e-10,
        }
    }
}

/// Reference result with its self-convergence estimate.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub pair: ScatteringPair,
    pub steps_per_sample: usize,
    pub estimated_error: f64,
}

impl OdeOracle {
    pub fn scatter(
        &self,
        signal: &ComplexSignal,
        lambdas: &[f64],
        potential: Potential,
    ) -> OracleResult {
        let mut steps = self.initial_steps.max(1);
        let mut prev = scatter_fixed(signal, lambdas, potential, steps);
        loop {
            let next_steps = steps * 2;
            let next = scatter_fixed(signal, lambdas, potential, next_steps);
            let err = pair_distance(&next, &prev);
            steps = next_steps;
            prev = next;
            if err <= self.tolerance || steps >= self.max_steps {
                return OracleResult {
                    pair: prev,
                    steps_per_sample: steps,
                    estimated_error: err,
                };
            }
        }
    }
}

/// Relative L² distance between two scattering results, over `a` and `b`
/// jointly.
pub fn pair_distance(x: &ScatteringPair, reference: &ScatteringPair) -> f64 {
    let xs: Vec<Complex64> = x.a.iter().chain(&x.b).copied().collect();
    let rs: Vec<Complex64> = reference.a.iter().chain(&reference.b).copied().collect();
    relative_l2(&xs, &rs)
}

/// RK4 with `steps` uniform steps per sample interval over the frame
/// `[t_0 - dt/2, t_{N-1} + dt/2]`.
pub fn scatter_fixed(
    signal: &ComplexSignal,
    lambdas: &[f64],
    potential: Potential,
    steps: usize,
) -> ScatteringPair {
    let n = signal.len();
    let h = signal.dt();
    let w1 = signal.t_start() - h / 2.0;
    let out: Vec<(Complex64, Complex64)> = match potential {
        Potential::BandLimited => {
            // Fine grid with two points per RK4 step: step endpoints on even
            // indices, midpoints on odd ones.
            let f = 2 * steps;
            let fine = upsample(signal.samples(), f);
            let m = fine.len();
            let shift = m - f / 2;
            let path: Vec<Complex64> = (0..=m).map(|i| fine[(i + shift) % m]).collect();
            let hf = h / f as f64;
            lambdas
                .par_iter()
                .map(|&lam| integrate(&path, w1, 2.0 * hf, lam))
                .collect()
        }
        Potential::SampleAndHold => {
            let path: Vec<Complex64> = signal
                .samples()
                .iter()
                .flat_map(|&q| std::iter::repeat_n(q, 2 * steps))
                .chain(std::iter::once(Complex64::new(0.0, 0.0)))
                .collect();
            let hs = h / steps as f64;
            lambdas
                .par_iter()
                .map(|&lam| integrate_held(&path, w1, hs, lam, n * steps))
                .collect()
        }
    };
    ScatteringPair {
        a: out.iter().map(|p| p.0).collect(),
        b: out.iter().map(|p| p.1).collect(),
    }
}

#[inline]
fn rhs(q: Complex64, t: f64, lam: f64, u: (Complex64, Complex64)) -> (Complex64, Complex64) {
    let e = Complex64::from_polar(1.0, 2.0 * lam * t);
    (q * e * u.1, -(q.conj() * e.conj()) * u.0)
}

fn rk4_step(
    q: [Complex64; 3],
    t: f64,
    step: f64,
    lam: f64,
    u: (Complex64, Complex64),
) -> (Complex64, Complex64) {
    let half = step / 2.0;
    let k1 = rhs(q[0], t, lam, u);
    let k2 = rhs(q[1], t + half, lam, (u.0 + k1.0 * half, u.1 + k1.1 * half));
    let k3 = rhs(q[1], t + half, lam, (u.0 + k2.0 * half, u.1 + k2.1 * half));
    let k4 = rhs(q[2], t + step, lam, (u.0 + k3.0 * step, u.1 + k3.1 * step));
    let s = step / 6.0;
    (
        u.0 + (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0) * s,
        u.1 + (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1) * s,
    )
}

/// `path` holds the potential at `w1 + i step/2`.
fn integrate(path: &[Complex64], w1: f64, step: f64, lam: f64) -> (Complex64, Complex64) {
    let mut u = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    let count = (path.len() - 1) / 2;
    for k in 0..count {
        let t = w1 + k as f64 * step;
        u = rk4_step(
            [path[2 * k], path[2 * k + 1], path[2 * k + 2]],
            t,
            step,
            lam,
            u,
        );
    }
    u
}

/// Piecewise-constant potential: every step lies inside one cell, so the
/// cell value is used at all three RK4 nodes.
fn integrate_held(
    path: &[Complex64],
    w1: f64,
    step: f64,
    lam: f64,
    count: usize,
) -> (Complex64, Complex64) {
    let mut u = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    for k in 0..count {
        let q = path[2 * k];
        let t = w1 + k as f64 * step;
        u = rk4_step([q, q, q], t, step, lam, u);
    }
    u
}
