//! Simulation configuration: defaults, TOML config files and flag overrides.
//!
//! Config files use TOML sections. Every key is optional; missing keys take the
//! defaults listed below. Unknown keys are rejected.
//!
//! ```toml
//! seed = 1                       # 1
//!
//! [network]
//! input_dim = 784                # 784 (28 x 28 pixels)
//! r = 1                          # 1 synapse copy per pixel
//! neurons = 500                  # 500 output neurons
//! leak = 1.05                    # 0.02 * t_low per cycle
//! max_cycles_per_image = 100     # 100 integrate cycles before a timeout
//! init_parallel = 0.5            # 0.5 probability a synapse starts Parallel
//!
//! [device]
//! tmr = 3.0                      # 300 %
//! p_pot = 0.05                   # AP -> P per potentiation pulse
//! p_dep = 0.2                    # P -> AP per depression pulse
//!
//! [homeostasis]
//! t_low = 52.5                   # 0.35 * r * 150
//! t_high = 157.5                 # 3 * t_low
//! n_active = 100                 # cycles
//! n_inactive = 1000000           # cycles, longer than one pass over 60k images
//! during_eval = false            # thresholds frozen outside training
//!
//! [data]
//! dir = "data/mnist"             # unset; MRAM_SNN_DATA is consulted next
//! binarize_threshold = 128       # pixel >= 128 -> 1
//! train_offset = 0
//! train_count = 60000            # all training images
//! test_count = 10000             # all test images
//! epochs = 1
//! ```
//!
//! Precedence: command-line overrides, then the `MRAM_SNN_DATA` environment
//! variable (data directory only), then the file, then defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::device::DeviceConfig;
use crate::neuron::HomeostasisConfig;

/// Environment variable naming the MNIST directory.
pub const DATA_DIR_ENV: &str = "MRAM_SNN_DATA";

pub const DEFAULT_INPUT_DIM: usize = 784;
pub const DEFAULT_R: usize = 1;
pub const DEFAULT_NEURONS: usize = 500;
pub const DEFAULT_MAX_CYCLES: u32 = 100;
pub const DEFAULT_INIT_PARALLEL: f64 = 0.5;
pub const DEFAULT_TMR: f64 = 3.0;
pub const DEFAULT_P_POT: f64 = 0.05;
pub const DEFAULT_P_DEP: f64 = 0.2;
/// Mean count of lit pixels in a binarized MNIST digit, used to scale thresholds.
pub const TYPICAL_ACTIVE_PIXELS: f64 = 150.0;
pub const T_LOW_FRACTION: f64 = 0.35;
pub const T_HIGH_FACTOR: f64 = 3.0;
pub const LEAK_FRACTION: f64 = 0.02;
pub const DEFAULT_N_ACTIVE: u64 = 100;
/// A neuron that drops back to `t_low` just before training ends wins nearly
/// every image once thresholds are frozen, so the default keeps the window
/// longer than a full training pass.
pub const DEFAULT_N_INACTIVE: u64 = 1_000_000;
pub const DEFAULT_BINARIZE_THRESHOLD: u8 = 128;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` has the wrong type: expected {expected}")]
    WrongType { key: String, expected: &'static str },
    #[error("config value out of range for `{key}`: {value} ({reason})")]
    OutOfRange {
        key: String,
        value: String,
        reason: String,
    },
    #[error("no dataset path: set [data].dir, pass --data-dir, or export {DATA_DIR_ENV}")]
    MissingDatasetPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub dir: Option<PathBuf>,
    pub binarize_threshold: u8,
    pub train_offset: usize,
    pub train_count: Option<usize>,
    pub test_count: Option<usize>,
    pub epochs: u32,
}

/// Fully validated simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub input_dim: usize,
    /// Synapse copies per pixel (`r`).
    pub replication: usize,
    pub neurons: usize,
    /// Integration removed per integrate cycle.
    pub leak: f64,
    pub max_cycles_per_image: u32,
    pub init_parallel: f64,
    pub device: DeviceConfig,
    pub homeostasis: HomeostasisConfig,
    /// Keep adjusting thresholds while allocating/evaluating.
    pub homeostasis_during_eval: bool,
    pub seed: u64,
    pub data: DataConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        RawConfig::default()
            .resolve(None)
            .expect("defaults are valid")
    }
}

impl SimConfig {
    #[inline]
    pub fn cols(&self) -> usize {
        self.input_dim * self.replication
    }

    /// Default low threshold for a given replication count.
    pub fn default_t_low(r: usize) -> f64 {
        T_LOW_FRACTION * r as f64 * TYPICAL_ACTIVE_PIXELS
    }

    /// Small configuration for `input_dim`-wide synthetic networks.
    pub fn small(input_dim: usize, replication: usize, neurons: usize) -> Self {
        RawConfig {
            input_dim: Some(input_dim),
            r: Some(replication),
            neurons: Some(neurons),
            ..Default::default()
        }
        .resolve(None)
        .expect("small config is valid")
    }

    pub fn data_dir(&self) -> Result<&Path, ConfigError> {
        self.data.dir.as_deref().ok_or(ConfigError::MissingDatasetPath)
    }

    /// Range checks for configs assembled in code rather than parsed.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let raw = RawConfig::from_sim(self);
        raw.resolve(self.data.dir.clone()).map(|_| ())
    }
}

/// Optional overrides, typically from command-line flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub seed: Option<u64>,
    pub input_dim: Option<usize>,
    pub r: Option<usize>,
    pub neurons: Option<usize>,
    pub leak: Option<f64>,
    pub max_cycles_per_image: Option<u32>,
    pub init_parallel: Option<f64>,
    pub tmr: Option<f64>,
    pub p_pot: Option<f64>,
    pub p_dep: Option<f64>,
    pub t_low: Option<f64>,
    pub t_high: Option<f64>,
    pub n_active: Option<u64>,
    pub n_inactive: Option<u64>,
    pub during_eval: Option<bool>,
    pub data_dir: Option<PathBuf>,
    pub binarize_threshold: Option<i64>,
    pub train_offset: Option<usize>,
    pub train_count: Option<usize>,
    pub test_count: Option<usize>,
    pub epochs: Option<u32>,
}

/// Config with the explicit precedence rule applied:
/// `overrides`, then `env_data_dir`, then `file`, then defaults.
pub fn parse_config(
    file: Option<&Path>,
    overrides: &RawConfig,
    env_data_dir: Option<PathBuf>,
) -> Result<SimConfig, ConfigError> {
    let base = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            RawConfig::from_toml_str(&text)?
        }
        None => RawConfig::default(),
    };
    let mut merged = base.merged_with(overrides);
    if overrides.data_dir.is_none() {
        if let Some(env) = env_data_dir {
            merged.data_dir = Some(env);
        }
    }
    merged.resolve(None)
}

/// Directory given by `MRAM_SNN_DATA`, if set and non-empty.
pub fn env_data_dir() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RawConfig {
    pub fn merged_with(&self, over: &RawConfig) -> RawConfig {
        let mut out = self.clone();
        merge_fields!(out, over;
            seed, input_dim, r, neurons, leak, max_cycles_per_image, init_parallel,
            tmr, p_pot, p_dep, t_low, t_high, n_active, n_inactive, during_eval,
            data_dir, binarize_threshold, train_offset, train_count, test_count, epochs);
        out
    }

    /// Every field pinned to the value in `c`.
    pub fn from_sim(c: &SimConfig) -> RawConfig {
        RawConfig {
            seed: Some(c.seed),
            input_dim: Some(c.input_dim),
            r: Some(c.replication),
            neurons: Some(c.neurons),
            leak: Some(c.leak),
            max_cycles_per_image: Some(c.max_cycles_per_image),
            init_parallel: Some(c.init_parallel),
            tmr: Some(c.device.tmr),
            p_pot: Some(c.device.p_pot),
            p_dep: Some(c.device.p_dep),
            t_low: Some(c.homeostasis.t_low),
            t_high: Some(c.homeostasis.t_high),
            n_active: Some(c.homeostasis.n_active),
            n_inactive: Some(c.homeostasis.n_inactive),
            during_eval: Some(c.homeostasis_during_eval),
            data_dir: c.data.dir.clone(),
            binarize_threshold: Some(c.data.binarize_threshold as i64),
            train_offset: Some(c.data.train_offset),
            train_count: c.data.train_count,
            test_count: c.data.test_count,
            epochs: Some(c.data.epochs),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<RawConfig, ConfigError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut raw = RawConfig::default();
        for (key, value) in &table {
            match key.as_str() {
                "seed" => raw.seed = Some(as_u64(key, value)?),
                "network" => raw.read_network(section(key, value)?)?,
                "device" => raw.read_device(section(key, value)?)?,
                "homeostasis" => raw.read_homeostasis(section(key, value)?)?,
                "data" => raw.read_data(section(key, value)?)?,
                _ => return Err(ConfigError::UnknownKey(key.clone())),
            }
        }
        Ok(raw)
    }

    fn read_network(&mut self, t: &Table) -> Result<(), ConfigError> {
        for (k, v) in t {
            let key = format!("network.{k}");
            match k.as_str() {
                "input_dim" => self.input_dim = Some(as_usize(&key, v)?),
                "r" => self.r = Some(as_usize(&key, v)?),
                "neurons" => self.neurons = Some(as_usize(&key, v)?),
                "leak" => self.leak = Some(as_f64(&key, v)?),
                "max_cycles_per_image" => {
                    self.max_cycles_per_image = Some(as_bounded::<u32>(&key, v)?)
                }
                "init_parallel" => self.init_parallel = Some(as_f64(&key, v)?),
                _ => return Err(ConfigError::UnknownKey(key)),
            }
        }
        Ok(())
    }

    fn read_device(&mut self, t: &Table) -> Result<(), ConfigError> {
        for (k, v) in t {
            let key = format!("device.{k}");
            match k.as_str() {
                "tmr" => self.tmr = Some(as_f64(&key, v)?),
                "p_pot" => self.p_pot = Some(as_f64(&key, v)?),
                "p_dep" => self.p_dep = Some(as_f64(&key, v)?),
                _ => return Err(ConfigError::UnknownKey(key)),
            }
        }
        Ok(())
    }

    fn read_homeostasis(&mut self, t: &Table) -> Result<(), ConfigError> {
        for (k, v) in t {
            let key = format!("homeostasis.{k}");
            match k.as_str() {
                "t_low" => self.t_low = Some(as_f64(&key, v)?),
                "t_high" => self.t_high = Some(as_f64(&key, v)?),
                "n_active" => self.n_active = Some(as_u64(&key, v)?),
                "n_inactive" => self.n_inactive = Some(as_u64(&key, v)?),
                "during_eval" => {
                    self.during_eval = Some(v.as_bool().ok_or(ConfigError::WrongType {
                        key,
                        expected: "boolean",
                    })?)
                }
                _ => return Err(ConfigError::UnknownKey(key)),
            }
        }
        Ok(())
    }

    fn read_data(&mut self, t: &Table) -> Result<(), ConfigError> {
        for (k, v) in t {
            let key = format!("data.{k}");
            match k.as_str() {
                "dir" => {
                    let s = v.as_str().ok_or(ConfigError::WrongType {
                        key,
                        expected: "string",
                    })?;
                    self.data_dir = Some(PathBuf::from(s));
                }
                "binarize_threshold" => {
                    self.binarize_threshold = Some(v.as_integer().ok_or(ConfigError::WrongType {
                        key,
                        expected: "integer",
                    })?)
                }
                "train_offset" => self.train_offset = Some(as_usize(&key, v)?),
                "train_count" => self.train_count = Some(as_usize(&key, v)?),
                "test_count" => self.test_count = Some(as_usize(&key, v)?),
                "epochs" => self.epochs = Some(as_bounded::<u32>(&key, v)?),
                _ => return Err(ConfigError::UnknownKey(key)),
            }
        }
        Ok(())
    }

    /// Apply defaults and range-check every field.
    pub fn resolve(&self, fallback_dir: Option<PathBuf>) -> Result<SimConfig, ConfigError> {
        let input_dim = self.input_dim.unwrap_or(DEFAULT_INPUT_DIM);
        at_least("network.input_dim", input_dim as u64, 1)?;
        let r = self.r.unwrap_or(DEFAULT_R);
        at_least("network.r", r as u64, 1)?;
        let neurons = self.neurons.unwrap_or(DEFAULT_NEURONS);
        at_least("network.neurons", neurons as u64, 1)?;
        let max_cycles = self.max_cycles_per_image.unwrap_or(DEFAULT_MAX_CYCLES);
        at_least("network.max_cycles_per_image", max_cycles as u64, 1)?;
        let init_parallel = self.init_parallel.unwrap_or(DEFAULT_INIT_PARALLEL);
        probability("network.init_parallel", init_parallel)?;

        let tmr = self.tmr.unwrap_or(DEFAULT_TMR);
        if !(tmr.is_finite() && tmr > 0.0) {
            return Err(out_of_range("device.tmr", tmr, "must be finite and > 0"));
        }
        let p_pot = self.p_pot.unwrap_or(DEFAULT_P_POT);
        probability("device.p_pot", p_pot)?;
        let p_dep = self.p_dep.unwrap_or(DEFAULT_P_DEP);
        probability("device.p_dep", p_dep)?;

        let t_low = self.t_low.unwrap_or_else(|| SimConfig::default_t_low(r));
        if !(t_low.is_finite() && t_low > 0.0) {
            return Err(out_of_range("homeostasis.t_low", t_low, "must be finite and > 0"));
        }
        let t_high = self.t_high.unwrap_or(T_HIGH_FACTOR * t_low);
        if !(t_high.is_finite() && t_high > t_low) {
            return Err(out_of_range("homeostasis.t_high", t_high, "must exceed t_low"));
        }
        let n_active = self.n_active.unwrap_or(DEFAULT_N_ACTIVE);
        at_least("homeostasis.n_active", n_active, 1)?;
        let n_inactive = self.n_inactive.unwrap_or(DEFAULT_N_INACTIVE);
        if n_inactive < n_active {
            return Err(out_of_range(
                "homeostasis.n_inactive",
                n_inactive,
                "must be >= n_active",
            ));
        }
        let leak = self.leak.unwrap_or(LEAK_FRACTION * t_low);
        if !(leak.is_finite() && leak >= 0.0) {
            return Err(out_of_range("network.leak", leak, "must be finite and >= 0"));
        }

        let binarize = self
            .binarize_threshold
            .unwrap_or(DEFAULT_BINARIZE_THRESHOLD as i64);
        if !(0..=255).contains(&binarize) {
            return Err(out_of_range(
                "data.binarize_threshold",
                binarize,
                "must lie in [0, 255]",
            ));
        }
        let epochs = self.epochs.unwrap_or(1);
        at_least("data.epochs", epochs as u64, 1)?;

        Ok(SimConfig {
            input_dim,
            replication: r,
            neurons,
            leak,
            max_cycles_per_image: max_cycles,
            init_parallel,
            device: DeviceConfig { tmr, p_pot, p_dep },
            homeostasis: HomeostasisConfig {
                t_high,
                t_low,
                n_active,
                n_inactive,
            },
            homeostasis_during_eval: self.during_eval.unwrap_or(false),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            data: DataConfig {
                dir: self.data_dir.clone().or(fallback_dir),
                binarize_threshold: binarize as u8,
                train_offset: self.train_offset.unwrap_or(0),
                train_count: self.train_count,
                test_count: self.test_count,
                epochs,
            },
        })
    }
}

fn section<'a>(key: &str, v: &'a Value) -> Result<&'a Table, ConfigError> {
    v.as_table().ok_or(ConfigError::WrongType {
        key: key.to_string(),
        expected: "table",
    })
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(ConfigError::WrongType {
            key: key.to_string(),
            expected: "number",
        }),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64, ConfigError> {
    as_bounded::<u64>(key, v)
}

fn as_usize(key: &str, v: &Value) -> Result<usize, ConfigError> {
    as_bounded::<usize>(key, v)
}

fn as_bounded<T: TryFrom<i64>>(key: &str, v: &Value) -> Result<T, ConfigError> {
    let i = v.as_integer().ok_or(ConfigError::WrongType {
        key: key.to_string(),
        expected: "integer",
    })?;
    T::try_from(i).map_err(|_| out_of_range(key, i, "must be a non-negative integer in range"))
}

fn out_of_range(key: &str, value: impl ToString, reason: &str) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn at_least(key: &str, value: u64, min: u64) -> Result<(), ConfigError> {
    if value < min {
        Err(out_of_range(key, value, &format!("must be >= {min}")))
    } else {
        Ok(())
    }
}

fn probability(key: &str, p: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(out_of_range(key, p, "probability must lie in [0, 1]"))
    }
}
