//! Command-line front end: single points, sweeps, self-checks and oracle
//! references.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use nfdm_core::error::{Error, Result};
use nfdm_core::harness::validate::{self, Check};
use nfdm_core::harness::{
    config_hash, run_sweep, with_workers, ExperimentConfig, Preset, Sweep, SweepAxis, SweepTable,
    SystemKind,
};
use nfdm_core::nft::oracle::{OdeOracle, Potential};

#[derive(Parser)]
#[command(
    name = "nfdm",
    version,
    about = "NFDM and conventional fiber transmission experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one operating point.
    Run(Common),
    /// Run a sweep along one axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Sweep axis.
        #[arg(long, value_parser = parse_axis)]
        axis: Option<SweepAxis>,
        /// Comma-separated axis values, e.g. `-6,-4.5,-3`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Run the numerical self-checks.
    Validate(Common),
    /// Write fine-step ODE scattering references for a burst.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Burst index within the seeded stream.
        #[arg(long, default_value_t = 0)]
        burst: u64,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file: JSON or one `key = value` per line.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Paper)]
    preset: Preset,
    /// Override any field, e.g. `--set nft.repair.enabled=false`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, value_parser = parse_system)]
    system: Option<SystemKind>,
    #[arg(long)]
    n_b: Option<usize>,
    #[arg(long)]
    n_z: Option<usize>,
    #[arg(long)]
    oversampling: Option<usize>,
    /// Launch power (dBm).
    #[arg(long, allow_hyphen_values = true)]
    power: Option<f64>,
    #[arg(long)]
    precompensation: Option<bool>,
    /// FNFT window as a fraction of the frame.
    #[arg(long)]
    window_tw: Option<f64>,
    #[arg(long)]
    noise: Option<bool>,
    #[arg(long)]
    bursts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for result files.
    #[arg(long, short, default_value = "results")]
    out: PathBuf,
}

fn parse_axis(s: &str) -> std::result::Result<SweepAxis, String> {
    serde_json::from_value(json!(s))
        .map_err(|_| format!("unknown axis `{s}` (power, n_b, n_z, t_w)"))
}

fn parse_system(s: &str) -> std::result::Result<SystemKind, String> {
    serde_json::from_value(json!(s))
        .map_err(|_| format!("unknown system `{s}` (nfdm, edc, dbp, nfdm_awgn)"))
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::preset(self.preset);
        if let Some(path) = &self.config {
            c = ExperimentConfig::parse(&std::fs::read_to_string(path)?, &c)?;
        }
        let mut pairs = Vec::new();
        for o in &self.overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::InvalidField {
                field: o.clone(),
                reason: "expected KEY=VALUE".into(),
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        c = c.with_overrides(&pairs)?;
        if let Some(v) = self.system {
            c.system = v;
        }
        if let Some(v) = self.n_b {
            c.n_b = v;
        }
        if let Some(v) = self.n_z {
            c.n_z = v;
        }
        if let Some(v) = self.oversampling {
            c.oversampling = v;
        }
        if let Some(v) = self.power {
            c.launch_power_dbm = v;
        }
        if let Some(v) = self.precompensation {
            c.precompensation = v;
        }
        if self.window_tw.is_some() {
            c.window_tw = self.window_tw;
        }
        if let Some(v) = self.noise {
            c.noise = v;
        }
        if let Some(v) = self.bursts {
            c.bursts = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn stem(c: &ExperimentConfig, axis: &str) -> String {
    format!(
        "{}_nb{}_nz{}_{axis}_{}",
        c.system.name(),
        c.n_b,
        c.n_z,
        config_hash(c)
    )
}

fn emit(table: &SweepTable, out: &std::path::Path) -> Result<()> {
    let (csv, json) = table.write(out, &stem(&table.config, &table.axis))?;
    print!("{}", table.to_csv());
    if let Some(p) = table.peak {
        println!(
            "# optimum {} = {:.2}, Q = {:.2} dB{}",
            table.axis,
            p.value,
            p.q_db,
            if p.interpolated { "" } else { " (sampled)" }
        );
    }
    info!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn report_checks(checks: &[Check]) -> bool {
    for c in checks {
        println!("{}", c.line());
    }
    checks.iter().all(Check::passed)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(common) => {
            let mut c = common.config()?;
            c.sweep = None;
            let table = with_workers(common.workers, || run_sweep(&c))??;
            emit(&table, &common.out)?;
            Ok(true)
        }
        Command::Sweep {
            common,
            axis,
            values,
        } => {
            let mut c = common.config()?;
            if let Some(axis) = axis {
                c.sweep = Some(Sweep { axis, values });
            }
            c.validate()?;
            let table = with_workers(common.workers, || run_sweep(&c))??;
            emit(&table, &common.out)?;
            Ok(true)
        }
        Command::Validate(common) => {
            let c = common.config()?;
            let checks = with_workers(common.workers, || validate::quick_suite(&c))??;
            Ok(report_checks(&checks))
        }
        Command::Oracle { common, burst } => {
            let c = common.config()?;
            let q = validate::linear_burst(&c, burst)?;
            let lambdas = validate::band_grid(&c, &q).values();
            let r = with_workers(common.workers, || {
                OdeOracle::default().scatter(&q, &lambdas, Potential::BandLimited)
            })?;
            let doc = json!({
                "config": c,
                "config_hash": config_hash(&c),
                "burst": burst,
                "steps_per_sample": r.steps_per_sample,
                "estimated_error": r.estimated_error,
                "lambda": lambdas,
                "a": r.pair.a.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "b": r.pair.b.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            });
            std::fs::create_dir_all(&common.out)?;
            let path = common
                .out
                .join(format!("oracle_{}_b{burst}.json", config_hash(&c)));
            std::fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
            println!(
                "{}: {} points, {} RK4 steps per sample, self-convergence {:.1e}",
                path.display(),
                lambdas.len(),
                r.steps_per_sample,
                r.estimated_error
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
