//! Flat `key=value` configuration files for sessions and sensor profiles.
//! Blank lines and `#` comments are ignored.

use std::path::PathBuf;

use thiserror::Error;

use crate::glovesim::{SensorProfile, FINGER_COUNT, NOMINAL_RATE_HZ};
use crate::recognition::RecognizerParams;
use crate::wordmodel::WindowSpec;

pub const DEFAULT_PORT: u16 = 7878;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn pairs(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(n, l)| {
            let (k, v) = l.split_once('=').ok_or(ConfigError::Syntax { line: n })?;
            Ok((n, k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn per_finger(key: &str, value: &str) -> Result<[u16; FINGER_COUNT], ConfigError> {
    let parsed: Vec<u16> = value.split(',').map(|v| num(key, v.trim())).collect::<Result<_, _>>()?;
    parsed.try_into().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

/// Settings shared by the CLI subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub rate_hz: f64,
    pub params: RecognizerParams,
    pub window: WindowSpec,
    pub profile: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub port: u16,
    pub seed: Option<u64>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            rate_hz: NOMINAL_RATE_HZ,
            params: RecognizerParams::default(),
            window: WindowSpec::default(),
            profile: None,
            calibration: None,
            model: None,
            port: DEFAULT_PORT,
            seed: None,
        }
    }
}

impl SessionConfig {
    pub fn parse(text: &str) -> Result<SessionConfig, ConfigError> {
        let mut cfg = SessionConfig::default();
        for (_, key, value) in pairs(text)? {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "rate_hz" => self.rate_hz = num(key, value)?,
            "gyro_var_threshold" => self.params.gyro_var_threshold = num(key, value)?,
            "digit_var_threshold" => self.params.digit_var_threshold = num(key, value)?,
            "mode_majority_fraction" => self.params.mode_majority_fraction = num(key, value)?,
            "rearm_var_threshold" => self.params.rearm_var_threshold = num(key, value)?,
            "sample_len_ms" => self.window.sample_len_ms = num(key, value)?,
            "infer_window_ms" => self.window.infer_window_ms = num(key, value)?,
            "frameshift_ms" => self.window.frameshift_ms = num(key, value)?,
            "profile" => self.profile = Some(value.into()),
            "calibration" => self.calibration = Some(value.into()),
            "model" => self.model = Some(value.into()),
            "port" => self.port = num(key, value)?,
            "seed" => self.seed = Some(num(key, value)?),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(ConfigError::Invalid("rate_hz must be > 0".into()));
        }
        self.params
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !self.window.is_valid() {
            return Err(ConfigError::Invalid(
                "frameshift_ms must be positive and at most infer_window_ms".into(),
            ));
        }
        Ok(())
    }
}

/// Reads a sensor profile; keys not present keep their defaults.
///
/// ```text
/// straight_adc=210,185,180,190,200
/// fullbend_adc=760,790,800,780,770
/// noise_sigma_adc=15
/// drift_rate=0.0
/// hours_in_use=0.0
/// accel_noise_g=0.01
/// gyro_noise_dps=1.0
/// seed=24301
/// ```
pub fn parse_profile(text: &str) -> Result<SensorProfile, ConfigError> {
    let mut p = SensorProfile::default();
    for (_, key, value) in pairs(text)? {
        match key.as_str() {
            "straight_adc" => p.straight_adc = per_finger(&key, &value)?,
            "fullbend_adc" => p.fullbend_adc = per_finger(&key, &value)?,
            "noise_sigma_adc" => p.noise_sigma_adc = num(&key, &value)?,
            "drift_rate" => p.drift_rate = num(&key, &value)?,
            "hours_in_use" => p.hours_in_use = num(&key, &value)?,
            "accel_noise_g" => p.accel_noise_g = num(&key, &value)?,
            "gyro_noise_dps" => p.gyro_noise_dps = num(&key, &value)?,
            "seed" => p.seed = num(&key, &value)?,
            _ => return Err(ConfigError::UnknownKey(key)),
        }
    }
    p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(p)
}

pub fn format_profile(p: &SensorProfile) -> String {
    let join = |v: &[u16; FINGER_COUNT]| v.map(|x| x.to_string()).join(",");
    format!(
        "straight_adc={}\nfullbend_adc={}\nnoise_sigma_adc={}\ndrift_rate={}\nhours_in_use={}\naccel_noise_g={}\ngyro_noise_dps={}\nseed={}\n",
        join(&p.straight_adc),
        join(&p.fullbend_adc),
        p.noise_sigma_adc,
        p.drift_rate,
        p.hours_in_use,
        p.accel_noise_g,
        p.gyro_noise_dps,
        p.seed
    )
}
