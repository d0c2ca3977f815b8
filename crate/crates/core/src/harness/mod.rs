//! Seeded Monte Carlo runs of the transmission systems and result files.
//!
//! Bursts are independent: burst `i` draws its symbols and its noise from
//! sub-streams `(seed, i)`, and per-burst statistics are merged in burst
//! order, so reports do not depend on the number of workers.

mod chain;
mod config;
pub mod validate;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid_field, Error, Result};
use crate::metrics::{PerformanceReport, SymbolStats};

pub use chain::{BurstOutcome, Chain, Transmission};
pub use config::{ExperimentConfig, NftSettings, Preset, Sweep, SweepAxis, SystemKind};

/// Version string carried by every result file.
pub const CODE_VERSION: &str = concat!("nfdm-core ", env!("CARGO_PKG_VERSION"));

pub const CSV_HEADER: &str =
    "axis,value,q_db_evm,q_db_ber,ber,evm_snr_db,bursts,repaired_points,config_hash,seed";

/// Report of one operating point plus chain diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub report: PerformanceReport,
    pub bursts: usize,
    pub max_synthesis_residual: f64,
    pub max_synthesis_symbols: usize,
    pub mean_ssfm_steps: f64,
}

/// Runs `config.bursts` bursts on the current rayon pool.
pub fn run_point(config: &ExperimentConfig) -> Result<PointResult> {
    let chain = Chain::new(config)?;
    let outcomes: Vec<Result<BurstOutcome>> = (0..config.bursts as u64)
        .into_par_iter()
        .map(|b| chain.run_burst(b))
        .collect();
    let mut stats = SymbolStats::default();
    let mut residual: f64 = 0.0;
    let mut steps = 0usize;
    let mut window = 0usize;
    for o in outcomes {
        let o = o?;
        stats = stats.merge(&o.stats);
        residual = residual.max(o.synthesis_residual);
        window = window.max(o.synthesis_symbols);
        steps += o.ssfm_steps;
    }
    Ok(PointResult {
        report: stats.report(),
        bursts: config.bursts,
        max_synthesis_residual: residual,
        max_synthesis_symbols: window,
        mean_ssfm_steps: steps as f64 / config.bursts as f64,
    })
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(invalid_field("workers", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Optimum of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub value: f64,
    pub q_db: f64,
    /// False when the sampled maximum sits at the edge of the sweep and no
    /// parabola could be fitted.
    pub interpolated: bool,
}

/// Vertex of the parabola through the sampled maximum and its two
/// neighbours.
pub fn quadratic_peak(xs: &[f64], ys: &[f64]) -> Option<Peak> {
    if xs.is_empty() || xs.len() != ys.len() {
        return None;
    }
    let (i, _) = ys
        .iter()
        .enumerate()
        .filter(|(_, y)| y.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let fallback = Peak {
        value: xs[i],
        q_db: ys[i],
        interpolated: false,
    };
    if i == 0 || i + 1 == xs.len() {
        return Some(fallback);
    }
    let (x0, x1, x2) = (xs[i - 1], xs[i], xs[i + 1]);
    let (y0, y1, y2) = (ys[i - 1], ys[i], ys[i + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a < 0.0) {
        return Some(fallback);
    }
    let b = d01 - a * (x0 + x1);
    let xv = -b / (2.0 * a);
    let c = y1 - a * x1 * x1 - b * x1;
    Some(Peak {
        value: xv,
        q_db: a * xv * xv + b * xv + c,
        interpolated: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub result: PointResult,
}

/// One curve: the rows of a sweep (or a single point) with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: String,
    pub rows: Vec<SweepRow>,
    pub peak: Option<Peak>,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub code_version: String,
}

/// SHA-256 of the canonical JSON of the configuration and the code version.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let json = serde_json::to_string(config).expect("configuration serializes");
    let digest = Sha256::new()
        .chain_update(CODE_VERSION.as_bytes())
        .chain_update([0u8])
        .chain_update(json.as_bytes())
        .finalize();
    digest.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Runs every point of the configured sweep (points and bursts in
/// parallel). Without a sweep, runs the single configured point on the
/// power axis.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepTable> {
    config.validate()?;
    let (axis, values) = match &config.sweep {
        Some(s) => (s.axis, s.values.clone()),
        None => (SweepAxis::Power, vec![config.launch_power_dbm]),
    };
    let points: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| config.at(axis, v))
        .collect::<Result<_>>()?;
    let results: Vec<Result<PointResult>> = points.par_iter().map(run_point).collect();
    let mut rows = Vec::with_capacity(values.len());
    for (v, r) in values.iter().zip(results) {
        rows.push(SweepRow {
            value: *v,
            result: r?,
        });
    }
    let peak = if axis == SweepAxis::Power {
        let ys: Vec<f64> = rows.iter().map(|r| r.result.report.q_db).collect();
        quadratic_peak(&values, &ys)
    } else {
        None
    };
    Ok(SweepTable {
        axis: axis.name().to_string(),
        rows,
        peak,
        config: config.clone(),
        config_hash: config_hash(config),
        code_version: CODE_VERSION.to_string(),
    })
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let r = &row.result.report;
            let q_ber = r.q_db_ber.map(|q| q.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                self.axis,
                row.value,
                r.q_db,
                q_ber,
                r.ber,
                r.evm_snr_db,
                row.result.bursts,
                r.repaired_spectrum_points,
                self.config_hash,
                self.config.seed
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, self.to_json()?)?;
        Ok((csv, json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(system: SystemKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(Preset::Fast);
        c.system = system;
        c.fiber = c.fiber.with_length(100e3);
        c.n_b = 8;
        c.n_z = 48;
        c.bursts = 4;
        c.noise = false;
        c.nft.synthesis_margin = 4;
        c
    }

    #[test]
    fn parabola_vertex() {
        let xs = [-2.0, -1.0, 0.0, 1.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 5.0 - (x + 0.3).powi(2)).collect();
        let p = quadratic_peak(&xs, &ys).unwrap();
        assert!(p.interpolated);
        assert!((p.value + 0.3).abs() < 1e-12 && (p.q_db - 5.0).abs() < 1e-12);
        let p = quadratic_peak(&[0.0, 1.0], &[1.0, 2.0]).unwrap();
        assert!(!p.interpolated && p.value == 1.0);
        assert!(quadratic_peak(&[], &[]).is_none());
    }

    #[test]
    fn linear_chain_is_exact_at_low_power() {
        let mut c = tiny(SystemKind::Edc);
        c.launch_power_dbm = -25.0;
        let r = run_point(&c).unwrap();
        assert!(r.report.evm_snr_db >= 40.0, "{:?}", r.report);
        assert_eq!(r.report.errors_counted, 0);
    }

    #[test]
    fn noise_free_nfdm_chain() {
        let mut c = tiny(SystemKind::Nfdm);
        c.launch_power_dbm = -30.0;
        let r = run_point(&c).unwrap();
        assert!(r.report.evm_snr_db >= 30.0, "{:?}", r.report);
        c.system = SystemKind::NfdmAwgn;
        let r = run_point(&c).unwrap();
        assert!(r.report.evm_snr_db >= 30.0, "{:?}", r.report);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut c = tiny(SystemKind::Nfdm);
        c.noise = true;
        c.sweep = Some(Sweep {
            axis: SweepAxis::Power,
            values: vec![-6.0, -3.0],
        });
        let one = with_workers(Some(1), || run_sweep(&c)).unwrap().unwrap();
        let two = with_workers(Some(3), || run_sweep(&c)).unwrap().unwrap();
        assert_eq!(one.to_csv(), two.to_csv());
        assert!(one.to_csv().starts_with(CSV_HEADER));
        assert_eq!(one.rows.len(), 2);
        assert!(with_workers(Some(0), || ()).is_err());
    }

    #[test]
    fn hash_tracks_configuration() {
        let c = tiny(SystemKind::Nfdm);
        let mut d = c.clone();
        assert_eq!(config_hash(&c), config_hash(&d));
        d.seed += 1;
        assert_ne!(config_hash(&c), config_hash(&d));
        assert_eq!(config_hash(&c).len(), 16);
    }
}
