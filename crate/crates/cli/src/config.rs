//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment; list values are comma
//! separated. Every key has a default except `dataset`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use dgids_core::attack::DEFAULT_EPS;
use dgids_core::data::{CsvProfile, PartitionStrategy};
use dgids_core::federation::FederationConfig;
use dgids_core::gan::{GanConfig, GeneratorObjective, PriorFamily};
use dgids_core::nn::{Activation, AdamConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Standalone,
    Central,
    Distributed,
    CompareAll,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Standalone => "standalone",
            Mode::Central => "central",
            Mode::Distributed => "distributed",
            Mode::CompareAll => "compare-all",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "standalone" => Some(Mode::Standalone),
            "central" => Some(Mode::Central),
            "distributed" => Some(Mode::Distributed),
            "compare-all" => Some(Mode::CompareAll),
            _ => None,
        }
    }

    pub fn includes(self, other: Mode) -> bool {
        self == Mode::CompareAll || self == other
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// The built-in heterogeneous Gaussian-mixture benchmark.
    Synthetic,
    Csv(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// One z-score fit on the pooled training rows.
    Pooled,
    /// A separate fit per device share.
    PerDevice,
    None,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::Pooled => "pooled",
            Normalization::PerDevice => "per-device",
            Normalization::None => "none",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "pooled" => Some(Normalization::Pooled),
            "per-device" => Some(Normalization::PerDevice),
            "none" => Some(Normalization::None),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub dataset: DatasetSource,
    pub csv_profile: CsvProfile,
    pub synthetic_rows: usize,
    pub n_devices: usize,
    pub partition: PartitionStrategy,
    pub normalization: Normalization,
    pub test_fraction: f64,
    pub generator_layers: Vec<usize>,
    pub discriminator_layers: Vec<usize>,
    pub discriminator_activation: Activation,
    pub latent_dim: usize,
    pub prior: PriorFamily,
    pub objective: GeneratorObjective,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub exchange_period: usize,
    pub swap_period: usize,
    pub eps: f64,
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub monitor_rows: usize,
    pub output_dir: PathBuf,
}

/// Every accepted key, in the order the resolved dump lists them.
pub const KEYS: &[&str] = &[
    "mode",
    "dataset",
    "csv_profile",
    "synthetic_rows",
    "n_devices",
    "partition",
    "normalization",
    "test_fraction",
    "generator_layers",
    "discriminator_layers",
    "discriminator_activation",
    "latent_dim",
    "prior",
    "objective",
    "learning_rate",
    "beta1",
    "beta2",
    "adam_epsilon",
    "batch_size",
    "epochs",
    "exchange_period",
    "swap_period",
    "eps",
    "ratios",
    "seeds",
    "monitor_rows",
    "output_dir",
];

fn config_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

/// Raw key/value pairs, last assignment wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            raw.set(key.trim(), value.trim())?;
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key, value.to_string());
        Ok(())
    }

    /// Applies `--key value` / `--key=value` flags on top of file values.
    pub fn apply_flags(&mut self, flags: &[String]) -> Result<(), CliError> {
        let mut it = flags.iter();
        while let Some(flag) = it.next() {
            let body = flag
                .strip_prefix("--")
                .ok_or_else(|| CliError::Config(format!("expected a `--key` flag, got `{flag}`")))?;
            match body.split_once('=') {
                Some((k, v)) => self.set(k, v)?,
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| CliError::Config(format!("flag `--{body}` needs a value")))?;
                    self.set(body, v)?;
                }
            }
        }
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn num<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| config_err(key, format!("cannot parse `{v}`"))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some("") => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| config_err(key, format!("cannot parse `{s}`"))))
                .collect(),
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mode = match self.get("mode") {
            None => Mode::CompareAll,
            Some(v) => Mode::parse(v).ok_or_else(|| config_err("mode", format!("unknown mode `{v}`")))?,
        };
        let dataset = match self.get("dataset") {
            None | Some("") => return Err(config_err("dataset", "required (`synthetic` or a CSV path)")),
            Some("synthetic") => DatasetSource::Synthetic,
            Some(path) => DatasetSource::Csv(PathBuf::from(path)),
        };
        let csv_profile = match self.get("csv_profile").unwrap_or("activity") {
            "activity" => CsvProfile::Activity,
            "generic" => CsvProfile::Generic,
            other => return Err(config_err("csv_profile", format!("unknown profile `{other}`"))),
        };
        let partition = match self.get("partition") {
            None => PartitionStrategy::BySubject,
            Some(v) => PartitionStrategy::parse(v)
                .ok_or_else(|| config_err("partition", format!("unknown strategy `{v}`")))?,
        };
        let normalization = match self.get("normalization") {
            None => Normalization::Pooled,
            Some(v) => Normalization::parse(v)
                .ok_or_else(|| config_err("normalization", format!("unknown value `{v}`")))?,
        };
        let discriminator_activation = match self.get("discriminator_activation") {
            None => Activation::Relu,
            Some(v) => Activation::parse(v)
                .ok_or_else(|| config_err("discriminator_activation", format!("unknown activation `{v}`")))?,
        };
        let prior = match self.get("prior") {
            None => PriorFamily::default(),
            Some(v) => PriorFamily::parse(v).map_err(|e| config_err("prior", e))?,
        };
        let objective = match self.get("objective") {
            None => GeneratorObjective::default(),
            Some(v) => GeneratorObjective::parse(v).map_err(|e| config_err("objective", e))?,
        };
        let gan_defaults = GanConfig::default();
        let adam_defaults = gan_defaults.discriminator_adam;
        let adam = AdamConfig {
            learning_rate: self.num("learning_rate", adam_defaults.learning_rate)?,
            beta1: self.num("beta1", adam_defaults.beta1)?,
            beta2: self.num("beta2", adam_defaults.beta2)?,
            epsilon: self.num("adam_epsilon", adam_defaults.epsilon)?,
        };
        let config = ExperimentConfig {
            mode,
            dataset,
            csv_profile,
            synthetic_rows: self.num("synthetic_rows", 4000)?,
            n_devices: self.num("n_devices", 4)?,
            partition,
            normalization,
            test_fraction: self.num("test_fraction", 0.2)?,
            generator_layers: self.list("generator_layers", gan_defaults.generator_hidden.clone())?,
            discriminator_layers: self.list("discriminator_layers", gan_defaults.discriminator_hidden.clone())?,
            discriminator_activation,
            latent_dim: self.num("latent_dim", gan_defaults.latent_dim)?,
            prior,
            objective,
            adam,
            batch_size: self.num("batch_size", gan_defaults.batch_size)?,
            epochs: self.num("epochs", gan_defaults.epochs)?,
            exchange_period: self.num("exchange_period", 1)?,
            swap_period: self.num("swap_period", 10)?,
            eps: self.num("eps", DEFAULT_EPS)?,
            ratios: self.list("ratios", (1..=10).map(|k| k as f64 / 10.0).collect())?,
            seeds: self.list("seeds", vec![0])?,
            monitor_rows: self.num("monitor_rows", 256)?,
            output_dir: PathBuf::from(self.get("output_dir").unwrap_or("dgids-out")),
        };
        config.validate()?;
        Ok(config)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_devices < 2 {
            return Err(config_err("n_devices", "must be at least 2"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(config_err("test_fraction", "must lie in (0, 1)"));
        }
        if self.synthetic_rows == 0 {
            return Err(config_err("synthetic_rows", "must be positive"));
        }
        if self.generator_layers.contains(&0) {
            return Err(config_err("generator_layers", "sizes must be positive"));
        }
        if self.discriminator_layers.contains(&0) {
            return Err(config_err("discriminator_layers", "sizes must be positive"));
        }
        if self.latent_dim == 0 {
            return Err(config_err("latent_dim", "must be positive"));
        }
        self.adam.validate().map_err(|e| config_err("learning_rate/beta1/beta2/adam_epsilon", e))?;
        if self.batch_size == 0 {
            return Err(config_err("batch_size", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(config_err("epochs", "must be positive"));
        }
        if self.exchange_period == 0 {
            return Err(config_err("exchange_period", "must be at least 1"));
        }
        if self.swap_period == 0 {
            return Err(config_err("swap_period", "must be at least 1"));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(config_err("eps", "must lie in (0, 0.5)"));
        }
        if self.ratios.is_empty() {
            return Err(config_err("ratios", "at least one ratio required"));
        }
        if self.ratios.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(config_err("ratios", "ratios must be non-negative"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "at least one seed required"));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(config_err("seeds", "seeds must be distinct"));
        }
        if self.monitor_rows == 0 {
            return Err(config_err("monitor_rows", "must be positive"));
        }
        Ok(())
    }

    pub fn gan(&self) -> GanConfig {
        GanConfig {
            latent_dim: self.latent_dim,
            prior: self.prior,
            generator_hidden: self.generator_layers.clone(),
            discriminator_hidden: self.discriminator_layers.clone(),
            discriminator_activation: self.discriminator_activation,
            batch_size: self.batch_size,
            epochs: self.epochs,
            generator_adam: self.adam,
            discriminator_adam: self.adam,
            objective: self.objective,
        }
    }

    pub fn federation(&self) -> FederationConfig {
        FederationConfig {
            gan: self.gan(),
            exchange_period: self.exchange_period,
            swap_period: self.swap_period,
        }
    }

    /// Every key with its resolved value, one per line in [`KEYS`] order.
    /// Parsing the dump yields the same config.
    pub fn to_resolved_string(&self) -> String {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let dataset = match &self.dataset {
            DatasetSource::Synthetic => "synthetic".to_string(),
            DatasetSource::Csv(p) => p.display().to_string(),
        };
        let profile = match self.csv_profile {
            CsvProfile::Activity => "activity",
            CsvProfile::Generic => "generic",
        };
        let values: Vec<(&str, String)> = vec![
            ("mode", self.mode.name().into()),
            ("dataset", dataset),
            ("csv_profile", profile.into()),
            ("synthetic_rows", self.synthetic_rows.to_string()),
            ("n_devices", self.n_devices.to_string()),
            ("partition", self.partition.name().into()),
            ("normalization", self.normalization.name().into()),
            ("test_fraction", self.test_fraction.to_string()),
            ("generator_layers", join(&self.generator_layers)),
            ("discriminator_layers", join(&self.discriminator_layers)),
            ("discriminator_activation", self.discriminator_activation.name().into()),
            ("latent_dim", self.latent_dim.to_string()),
            ("prior", self.prior.to_string()),
            ("objective", self.objective.name().into()),
            ("learning_rate", self.adam.learning_rate.to_string()),
            ("beta1", self.adam.beta1.to_string()),
            ("beta2", self.adam.beta2.to_string()),
            ("adam_epsilon", self.adam.epsilon.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("exchange_period", self.exchange_period.to_string()),
            ("swap_period", self.swap_period.to_string()),
            ("eps", self.eps.to_string()),
            ("ratios", join(&self.ratios)),
            ("seeds", join(&self.seeds)),
            ("monitor_rows", self.monitor_rows.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        let mut out = String::from("# resolved experiment configuration\n");
        for (k, v) in values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Reads an optional config file, then applies flag overrides.
pub fn parse_config(file_text: Option<&str>, flags: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut raw = match file_text {
        Some(text) => RawConfig::parse(text)?,
        None => RawConfig::default(),
    };
    raw.apply_flags(flags)?;
    raw.resolve()
}
