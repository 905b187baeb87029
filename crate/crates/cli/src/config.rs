//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Keys
//! are dot-separated section paths with a unit suffix where a physical unit
//! applies. Unknown and repeated keys are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use dfesim_core::{Error as CoreError, PrbsConfig, SimConfig, SweepConfig, TapCodes};
use thiserror::Error;

/// Every accepted key with its default, in documentation order.
pub const KEYS: &[(&str, &str)] = &[
    ("bitrate_hz", "1e9"),
    ("samples_per_ui", "32"),
    ("n_bits", "100000"),
    ("warmup_bits", "32"),
    ("shard_bits", "10000"),
    ("sample_phase_ui", "0.5"),
    ("seed", "1"),
    ("prbs.order", "7"),
    ("channel.tau_ui", "1"),
    ("channel.ffe_tap", "0"),
    ("channel.amplitude_mv", "30"),
    ("channel.delay_ui", "0"),
    ("cmp.v_of_mv", "0"),
    ("cmp.noise_sigma_mv", "0"),
    ("cmp.g_fb", "0.5"),
    ("cmp.fb_polarity", "-1"),
    ("loop.latency_ui", "1"),
    ("loop.settle_factor", "1"),
    ("dac.v_cm_mv", "600"),
    ("taps.reg_of", "15"),
    ("taps.beta", "0"),
    ("measure.threshold_ber", "1e-3"),
    ("measure.n_phases", "64"),
    ("out_dir", "out"),
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given more than once")]
    Duplicate { line: usize, key: String },
    #[error("{key}: cannot parse `{value}`, expected {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("{key}: {source}")]
    Invalid {
        key: String,
        #[source]
        source: CoreError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub sweep: SweepConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            sim: SimConfig::default(),
            sweep: SweepConfig::default(),
            out_dir: PathBuf::new(),
        };
        for (key, value) in KEYS {
            cfg.set(key, value).expect("documented defaults are valid");
        }
        cfg
    }
}

fn bad(key: &str, value: &str, expected: &'static str) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    }
}

fn float(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| bad(key, value, "a finite number"))
}

fn int<T: TryFrom<i64>>(key: &str, value: &str, expected: &'static str) -> Result<T, ConfigError> {
    value
        .parse::<i64>()
        .ok()
        .and_then(|v| T::try_from(v).ok())
        .ok_or_else(|| bad(key, value, expected))
}

/// Config key that owns a core validation error.
fn key_for(err: &CoreError) -> String {
    let name = match err {
        CoreError::OutOfRange { name, .. } => *name,
        _ => return "config".to_string(),
    };
    match name {
        "reg_of" => "taps.reg_of",
        "beta" => "taps.beta",
        "channel.amplitude" => "channel.amplitude_mv",
        "cmp.noise_sigma" => "cmp.noise_sigma_mv",
        "phase_ui" => "sample_phase_ui",
        "ui_seconds" => "bitrate_hz",
        other => other,
    }
    .to_string()
}

impl RunConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        const MV: f64 = 1e-3;
        let sim = &mut self.sim;
        match key {
            "bitrate_hz" => {
                let hz = float(key, value)?;
                if hz <= 0.0 {
                    return Err(bad(key, value, "a positive rate"));
                }
                sim.ui_seconds = 1.0 / hz;
            }
            "samples_per_ui" => sim.samples_per_ui = int(key, value, "a positive integer")?,
            "n_bits" => sim.n_bits = int(key, value, "a non-negative integer")?,
            "warmup_bits" => sim.warmup_bits = int(key, value, "a non-negative integer")?,
            "shard_bits" => sim.shard_bits = int(key, value, "a positive integer")?,
            "sample_phase_ui" => sim.phase_ui = float(key, value)?,
            "seed" => sim.seed = int(key, value, "a non-negative integer")?,
            "prbs.order" => {
                let order = int(key, value, "one of 7, 9, 15, 23, 31")?;
                sim.prbs = PrbsConfig::all_ones(order).map_err(|source| ConfigError::Invalid {
                    key: key.to_string(),
                    source,
                })?;
            }
            "channel.tau_ui" => sim.channel.tau_ui = float(key, value)?,
            "channel.ffe_tap" => sim.channel.ffe_tap = float(key, value)?,
            "channel.amplitude_mv" => sim.channel.amplitude = float(key, value)? * MV,
            "channel.delay_ui" => sim.channel.delay_ui = float(key, value)?,
            "cmp.v_of_mv" => sim.cmp.v_of = float(key, value)? * MV,
            "cmp.noise_sigma_mv" => sim.cmp.noise_sigma = float(key, value)? * MV,
            "cmp.g_fb" => sim.cmp.g_fb = float(key, value)?,
            "cmp.fb_polarity" => sim.cmp.fb_polarity = int(key, value, "-1 or 1")?,
            "loop.latency_ui" => sim.loop_cfg.latency_ui = int(key, value, "a positive integer")?,
            "loop.settle_factor" => sim.loop_cfg.settle_factor = float(key, value)?,
            "dac.v_cm_mv" => sim.dac.v_cm = float(key, value)? * MV,
            "taps.reg_of" => sim.taps.reg_of = int(key, value, "an integer in 8..23")?,
            "taps.beta" => sim.taps.beta = int(key, value, "an integer in 0..8")?,
            "measure.threshold_ber" => self.sweep.threshold = float(key, value)?,
            "measure.n_phases" => self.sweep.n_phases = int(key, value, "an integer >= 8")?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => unreachable!("key table and setter disagree on `{key}`"),
        }
        Ok(())
    }

    /// Parses configuration text on top of the documented defaults and
    /// validates the result.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |source: CoreError| ConfigError::Invalid {
            key: key_for(&source),
            source,
        };
        TapCodes::new(self.sim.taps.reg_of, self.sim.taps.beta).map_err(invalid)?;
        self.sim.validate().map_err(invalid)?;
        if self.sweep.n_phases < 8 {
            return Err(bad(
                "measure.n_phases",
                &self.sweep.n_phases.to_string(),
                "an integer >= 8",
            ));
        }
        if !(self.sweep.threshold > 0.0 && self.sweep.threshold < 1.0) {
            return Err(bad(
                "measure.threshold_ber",
                &self.sweep.threshold.to_string(),
                "a probability in (0, 1)",
            ));
        }
        Ok(())
    }

    /// Sweep settings with `n_bits` counted per phase.
    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            per_phase_bits: self.sim.n_bits,
            ..self.sweep
        }
    }
}
