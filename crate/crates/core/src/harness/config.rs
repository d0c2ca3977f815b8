use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::{NoiseInjection, StepPolicy};
use crate::error::{invalid_field, Error, Result};
use crate::fiber::FiberParams;
use crate::metrics::channel_memory_symbols;
use crate::modem::{FrameGeometry, PowerAveraging, Shaping};
use crate::nft::{Interpolation, RepairConfig};

/// Transmission system under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    #[default]
    Nfdm,
    /// Linear dispersion compensation at the receiver.
    Edc,
    /// Ideal digital backpropagation.
    Dbp,
    /// NFDM chain with the fiber replaced by its accumulated ASE.
    NfdmAwgn,
}

impl SystemKind {
    pub fn is_nfdm(self) -> bool {
        matches!(self, SystemKind::Nfdm | SystemKind::NfdmAwgn)
    }

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Nfdm => "nfdm",
            SystemKind::Edc => "edc",
            SystemKind::Dbp => "dbp",
            SystemKind::NfdmAwgn => "nfdm_awgn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 2000 km, 50 GBd, 800 guard symbols.
    Paper,
    /// 500 km with the guard scaled by the channel memory (200 symbols).
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Launch power in dBm.
    Power,
    #[serde(rename = "n_b")]
    NB,
    #[serde(rename = "n_z")]
    NZ,
    /// Processing window as a fraction of the frame duration.
    #[serde(rename = "t_w")]
    Tw,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Power => "power",
            SweepAxis::NB => "n_b",
            SweepAxis::NZ => "n_z",
            SweepAxis::Tw => "t_w",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Numerical settings of the NFT stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NftSettings {
    pub interpolation: Interpolation,
    pub repair: RepairConfig,
    /// Initial extra symbols on each side of the TX synthesis window.
    pub synthesis_margin: usize,
    /// Largest energy fraction a peeled signal may leave in the outer half
    /// of each margin.
    pub synthesis_tail: f64,
    /// Round-trip residual above which the window keeps growing.
    pub synthesis_tolerance: f64,
    /// Refinement target of the backward NFT.
    pub bnft_target: f64,
    pub bnft_max_refinements: usize,
}

impl Default for NftSettings {
    fn default() -> Self {
        Self {
            interpolation: Interpolation::BandLimited,
            repair: RepairConfig::default(),
            synthesis_margin: 32,
            synthesis_tail: 1e-6,
            synthesis_tolerance: 1e-3,
            bnft_target: 1e-6,
            bnft_max_refinements: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    pub n_b: usize,
    pub n_z: usize,
    pub oversampling: usize,
    /// Symbols per second.
    pub symbol_rate: f64,
    pub launch_power_dbm: f64,
    pub sweep: Option<Sweep>,
    pub precompensation: bool,
    /// FNFT window width as a fraction of the frame; `None` is the whole
    /// frame.
    pub window_tw: Option<f64>,
    pub fiber: FiberParams,
    pub noise: bool,
    pub noise_injection: NoiseInjection,
    pub seed: u64,
    pub bursts: usize,
    pub shaping: Shaping,
    pub power_averaging: PowerAveraging,
    pub steps: StepPolicy,
    /// One-sided brick-wall DAC/ADC bandwidth (Hz).
    pub adc_bandwidth: f64,
    pub nft: NftSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Preset::Paper)
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let (length, n_z) = match preset {
            Preset::Paper => (2000e3, 800),
            Preset::Fast => (500e3, 200),
        };
        Self {
            system: SystemKind::Nfdm,
            n_b: 32,
            n_z,
            oversampling: 4,
            symbol_rate: 50e9,
            launch_power_dbm: -3.0,
            sweep: None,
            precompensation: false,
            window_tw: None,
            fiber: FiberParams::standard_smf().with_length(length),
            noise: true,
            noise_injection: NoiseInjection::PerStep,
            seed: 1,
            bursts: 64,
            shaping: Shaping::default(),
            power_averaging: PowerAveraging::Burst,
            steps: StepPolicy::default(),
            adc_bandwidth: 100e9,
            nft: NftSettings::default(),
        }
    }

    pub fn symbol_time(&self) -> f64 {
        1.0 / self.symbol_rate
    }

    pub fn geometry(&self) -> Result<FrameGeometry> {
        FrameGeometry::new(self.n_b, self.n_z, self.oversampling, self.symbol_time())
    }

    /// Number of bursts giving at least `symbols` information symbols.
    pub fn bursts_for_symbols(&self, symbols: usize) -> usize {
        symbols.div_ceil(self.n_b.max(1))
    }

    /// Dispersive broadening the guard has to absorb, in symbols.
    pub fn channel_memory(&self) -> f64 {
        channel_memory_symbols(
            &self.fiber,
            self.symbol_rate,
            self.shaping.rolloff,
            self.precompensation,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_b == 0 {
            return Err(invalid_field("n_b", "must be at least 1"));
        }
        if self.oversampling < 2 {
            return Err(invalid_field("oversampling", "must be at least 2"));
        }
        if !(self.symbol_rate > 0.0 && self.symbol_rate.is_finite()) {
            return Err(invalid_field("symbol_rate", "must be positive"));
        }
        if !self.launch_power_dbm.is_finite() {
            return Err(invalid_field("launch_power_dbm", "must be finite"));
        }
        if self.bursts == 0 {
            return Err(invalid_field("bursts", "must be at least 1"));
        }
        if let Some(tw) = self.window_tw {
            if !(tw > 0.0 && tw <= 1.0) {
                return Err(invalid_field("window_tw", "must lie in (0, 1]"));
            }
            if !self.system.is_nfdm() {
                return Err(invalid_field(
                    "window_tw",
                    "windowing applies to NFDM systems only",
                ));
            }
        }
        if !(self.adc_bandwidth > 0.0) {
            return Err(invalid_field("adc_bandwidth", "must be positive"));
        }
        self.shaping.validate()?;
        if self.shaping.span > self.n_z {
            return Err(invalid_field(
                "n_z",
                format!(
                    "guard of {} symbols is shorter than the pulse span {}",
                    self.n_z, self.shaping.span
                ),
            ));
        }
        if self.fiber.length < 0.0 {
            return Err(invalid_field("fiber.length", "must be non-negative"));
        }
        self.fiber.validate(self.noise)?;
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(invalid_field("sweep.values", "must not be empty"));
            }
            for (i, v) in s.values.iter().enumerate() {
                let field = format!("sweep.values[{i}]");
                match s.axis {
                    SweepAxis::Power if !v.is_finite() => {
                        return Err(invalid_field(field, "must be finite"))
                    }
                    SweepAxis::NB | SweepAxis::NZ if !(v.fract() == 0.0 && *v >= 1.0) => {
                        return Err(invalid_field(field, "must be a positive integer"))
                    }
                    _ => {}
                }
                self.at(s.axis, *v).map_err(|e| match e {
                    Error::InvalidField { field: f, reason } => {
                        invalid_field(format!("{field} -> {f}"), reason)
                    }
                    other => other,
                })?;
            }
        }
        Ok(())
    }

    /// The configuration of one sweep point, without the sweep.
    pub fn at(&self, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        c.sweep = None;
        match axis {
            SweepAxis::Power => c.launch_power_dbm = value,
            SweepAxis::NB => c.n_b = value as usize,
            SweepAxis::NZ => c.n_z = value as usize,
            SweepAxis::Tw => c.window_tw = Some(value),
        }
        c.validate()?;
        Ok(c)
    }

    /// Parses a configuration file: JSON when it starts with `{`, otherwise
    /// `key = value` lines over `base` (dotted keys reach nested fields,
    /// `#` starts a comment, values are JSON literals or bare strings).
    pub fn parse(text: &str, base: &ExperimentConfig) -> Result<ExperimentConfig> {
        if text.trim_start().starts_with('{') {
            let c: ExperimentConfig = serde_json::from_str(text)?;
            return Ok(c);
        }
        let mut pairs = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", no + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        base.with_overrides(&pairs)
    }

    /// Applies `key = value` overrides.
    pub fn with_overrides(&self, pairs: &[(String, String)]) -> Result<ExperimentConfig> {
        let mut tree = serde_json::to_value(self)?;
        for (key, raw) in pairs {
            let value: Value =
                serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            set_path(&mut tree, key, value)?;
        }
        serde_json::from_value(tree).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(m) => m,
            Value::Null => {
                *node = Value::Object(Default::default());
                match node {
                    Value::Object(m) => m,
                    _ => unreachable!(),
                }
            }
            _ => {
                return Err(invalid_field(
                    key,
                    format!("`{}` is not a section", parts[..i].join(".")),
                ))
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    Err(invalid_field(key, "empty key"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ExperimentConfig::preset(Preset::Paper).validate().unwrap();
        let f = ExperimentConfig::preset(Preset::Fast);
        f.validate().unwrap();
        // the fast guard covers the scaled memory
        assert!(f.n_z as f64 > f.channel_memory());
        let p = ExperimentConfig::preset(Preset::Paper);
        assert!(p.n_z as f64 > p.channel_memory());
    }

    #[test]
    fn key_value_overrides() {
        let base = ExperimentConfig::preset(Preset::Fast);
        let text = "system = edc\n# comment\nn_b = 128\nfiber.length = 1e5\nwindow_tw = 0.5\n\
                    sweep = {\"axis\": \"power\", \"values\": [-3, 0]}\nsteps = {\"constant\": {\"dz\": 100}}";
        let c = ExperimentConfig::parse(text, &base).unwrap();
        assert_eq!(c.system, SystemKind::Edc);
        assert_eq!(c.n_b, 128);
        assert_eq!(c.fiber.length, 1e5);
        assert_eq!(c.window_tw, Some(0.5));
        assert_eq!(c.sweep.as_ref().unwrap().values, vec![-3.0, 0.0]);
        assert_eq!(c.steps, StepPolicy::Constant { dz: 100.0 });
        // windowing is refused for the linear baseline
        assert!(
            matches!(c.validate(), Err(Error::InvalidField { ref field, .. }) if field == "window_tw")
        );
    }

    #[test]
    fn json_round_trip() {
        let c = ExperimentConfig::preset(Preset::Paper);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(
            ExperimentConfig::parse(&s, &ExperimentConfig::default()).unwrap(),
            c
        );
    }

    #[test]
    fn axis_names_parse_back() {
        for axis in [
            SweepAxis::Power,
            SweepAxis::NB,
            SweepAxis::NZ,
            SweepAxis::Tw,
        ] {
            let parsed: SweepAxis = serde_json::from_value(serde_json::json!(axis.name())).unwrap();
            assert_eq!(parsed, axis);
        }
    }

    #[test]
    fn errors_name_the_field() {
        let base = ExperimentConfig::preset(Preset::Fast);
        let bad = base.with_overrides(&[("n_z".into(), "10".into())]).unwrap();
        assert!(
            matches!(bad.validate(), Err(Error::InvalidField { ref field, .. }) if field == "n_z")
        );
        let bad = base
            .with_overrides(&[("sweep".into(), r#"{"axis":"n_b","values":[8, 2.5]}"#.into())])
            .unwrap();
        assert!(
            matches!(bad.validate(), Err(Error::InvalidField { ref field, .. }) if field == "sweep.values[1]")
        );
        let bad = base
            .with_overrides(&[("sweep".into(), r#"{"axis":"n_z","values":[8]}"#.into())])
            .unwrap();
        assert!(
            matches!(bad.validate(), Err(Error::InvalidField { ref field, .. }) if field == "sweep.values[0] -> n_z")
        );
        assert!(base
            .with_overrides(&[("no_such".into(), "1".into())])
            .is_err());
        assert!(ExperimentConfig::parse("n_b 3", &base).is_err());
    }
}
