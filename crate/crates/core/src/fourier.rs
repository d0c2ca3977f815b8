//! Thin wrappers over `rustfft` for the transforms used throughout the chain.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse plan pair of a fixed length. The inverse is normalized by
/// `1/n`, so `inverse(forward(x)) == x`.
pub struct Fourier {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fourier {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `X_k = sum_n x_n exp(-2 pi j k n / N)`.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.fwd.process_with_scratch(data, &mut self.scratch);
    }

    /// `x_n = (1/N) sum_k X_k exp(2 pi j k n / N)`.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.inv.process_with_scratch(data, &mut self.scratch);
        let s = 1.0 / self.n as f64;
        for x in data.iter_mut() {
            *x *= s;
        }
    }
}

/// Signed FFT bin index of position `k` (`k >= ceil(n/2)` maps negative).
pub fn signed_bin(k: usize, n: usize) -> i64 {
    let k = k as i64;
    if k >= (n as i64 + 1) / 2 {
        k - n as i64
    } else {
        k
    }
}

/// Band-limited interpolation at `t_n + shift * dt` for every sample, where
/// `shift` is in units of the sample spacing.
///
/// The Nyquist bin of an even-length signal is treated as the symmetric
/// cosine so that real inputs stay real.
pub fn fractional_shift(samples: &[Complex64], shift: f64) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    let mut ft = Fourier::new(n);
    ft.forward(&mut buf);
    for (k, x) in buf.iter_mut().enumerate() {
        let m = signed_bin(k, n);
        if n.is_multiple_of(2) && m == -(n as i64) / 2 {
            *x *= (std::f64::consts::PI * shift).cos();
        } else {
            let ph = 2.0 * std::f64::consts::PI * m as f64 * shift / n as f64;
            *x *= Complex64::from_polar(1.0, ph);
        }
    }
    ft.inverse(&mut buf);
    buf
}

/// Band-limited upsampling by an integer `factor` (zero padding in the
/// frequency domain). Output sample `m` sits at `t_0 + m dt / factor`.
pub fn upsample(samples: &[Complex64], factor: usize) -> Vec<Complex64> {
    let n = samples.len();
    let m = n * factor;
    let mut buf = samples.to_vec();
    Fourier::new(n).forward(&mut buf);
    let mut wide = vec![Complex64::new(0.0, 0.0); m];
    for (k, x) in buf.iter().enumerate() {
        let s = signed_bin(k, n);
        if n.is_multiple_of(2) && s == -(n as i64) / 2 {
            // split the Nyquist bin symmetrically
            wide[n / 2] += 0.5 * x;
            wide[m - n / 2] += 0.5 * x;
        } else {
            let idx = s.rem_euclid(m as i64) as usize;
            wide[idx] = *x;
        }
    }
    let mut ft = Fourier::new(m);
    ft.inverse(&mut wide);
    for x in &mut wide {
        *x *= factor as f64;
    }
    wide
}
