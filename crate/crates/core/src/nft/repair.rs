//! Detection and interpolation of numerically unstable spectral points.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{Instability, NonlinearSpectrum};

/// Thresholds for [`repair_instabilities`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    /// Points with `|a(λ)|` below this are flagged.
    pub a_min: f64,
    /// A point is a spike when `|ρ|` exceeds this multiple of the median of
    /// its neighbours.
    pub spike_factor: f64,
    /// Number of nearest unflagged neighbours in the spike median.
    pub neighbors: usize,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            a_min: 1e-6,
            spike_factor: 1e3,
            neighbors: 32,
        }
    }
}

/// Flags unstable points and replaces their `ρ` by linear interpolation
/// between the nearest unflagged neighbours (constant extrapolation at the
/// grid ends). Returns the number of repaired points.
pub fn repair_instabilities(
    spectrum: &mut NonlinearSpectrum,
    config: &RepairConfig,
) -> Result<usize> {
    let n = spectrum.len();
    let mut flags: Vec<Option<Instability>> = vec![None; n];
    for i in 0..n {
        let r = spectrum.rho[i];
        if !(r.re.is_finite() && r.im.is_finite()) {
            flags[i] = Some(Instability::NonFinite);
        } else if let Some(pair) = &spectrum.scattering {
            if pair.a[i].norm() < config.a_min {
                flags[i] = Some(Instability::SmallA);
            }
        }
    }

    let mags: Vec<f64> = spectrum.rho.iter().map(|r| r.norm()).collect();
    let mut spikes = Vec::new();
    let mut window = Vec::with_capacity(config.neighbors);
    for i in 0..n {
        if flags[i].is_some() {
            continue;
        }
        nearest_unflagged(&flags, i, config.neighbors, &mags, &mut window);
        if window.is_empty() {
            continue;
        }
        let med = median(&mut window);
        if med > 0.0 && mags[i] > config.spike_factor * med {
            spikes.push(i);
        }
    }
    for i in spikes {
        flags[i] = Some(Instability::Spike);
    }

    let good: Vec<usize> = (0..n).filter(|&i| flags[i].is_none()).collect();
    if good.is_empty() {
        return Err(Error::UnrecoverableSpectrum);
    }
    let repaired = n - good.len();
    if repaired > 0 {
        let mut next = 0;
        for i in 0..n {
            if flags[i].is_none() {
                continue;
            }
            while next < good.len() && good[next] < i {
                next += 1;
            }
            let right = good.get(next).copied();
            let left = if next > 0 { Some(good[next - 1]) } else { None };
            spectrum.rho[i] = match (left, right) {
                (Some(l), Some(r)) => {
                    let w = (i - l) as f64 / (r - l) as f64;
                    spectrum.rho[l] * (1.0 - w) + spectrum.rho[r] * w
                }
                (Some(l), None) => spectrum.rho[l],
                (None, Some(r)) => spectrum.rho[r],
                (None, None) => Complex64::new(0.0, 0.0),
            };
        }
    }
    for (slot, flag) in spectrum.flags.iter_mut().zip(flags) {
        if slot.is_none() {
            *slot = flag;
        }
    }
    Ok(repaired)
}

/// Fills `out` with `|ρ|` of up to `k` unflagged points nearest to `i`
/// (excluding `i`), alternating left and right.
fn nearest_unflagged(
    flags: &[Option<Instability>],
    i: usize,
    k: usize,
    mags: &[f64],
    out: &mut Vec<f64>,
) {
    out.clear();
    let n = flags.len();
    let (mut l, mut r) = (i, i + 1);
    while out.len() < k && (l > 0 || r < n) {
        if l > 0 {
            l -= 1;
            if flags[l].is_none() {
                out.push(mags[l]);
            }
        }
        if out.len() < k && r < n {
            if flags[r].is_none() {
                out.push(mags[r]);
            }
            r += 1;
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let upper = *m;
    if v.len() % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}
