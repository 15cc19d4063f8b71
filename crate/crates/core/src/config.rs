//! Plain `key = value` configuration text.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are matched
//! exactly; unknown keys are errors.

use std::str::FromStr;

use crate::catalog::{SynthConfig, SynthTask};
use crate::error::{Error, Result};

/// A configuration that can be read from and written to key/value text.
pub trait KvConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<()>;
    fn to_kv(&self) -> Vec<(String, String)>;

    /// Applies every entry of `text` in order.
    fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_kv(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    fn to_text(&self) -> String {
        self.to_kv().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key=value, got `{line}`", n + 1)));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

pub(crate) fn unknown(key: &str) -> Error {
    Error::Config(format!("unknown configuration key `{key}`"))
}

impl FromStr for SynthTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sunrise-sunset" => Ok(SynthTask::SunriseSunset),
            "temperature" => Ok(SynthTask::Temperature),
            other => Err(Error::Config(format!(
                "unknown task `{other}` (expected sunrise-sunset or temperature)"
            ))),
        }
    }
}

impl std::fmt::Display for SynthTask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SynthTask::SunriseSunset => "sunrise-sunset",
            SynthTask::Temperature => "temperature",
        })
    }
}

impl KvConfig for SynthConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "task" => self.task = parse(key, value)?,
            "n_cameras" => self.n_cameras = parse(key, value)?,
            "days_per_camera" => self.days_per_camera = parse(key, value)?,
            "height" => self.height = parse(key, value)?,
            "width" => self.width = parse(key, value)?,
            "cue_strength" => self.cue_strength = parse(key, value)?,
            "nuisance_strength" => self.nuisance_strength = parse(key, value)?,
            "noise_sigma" => self.noise_sigma = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(unknown(key)),
        }
        Ok(())
    }

    fn to_kv(&self) -> Vec<(String, String)> {
        vec![
            ("task".into(), self.task.to_string()),
            ("n_cameras".into(), self.n_cameras.to_string()),
            ("days_per_camera".into(), self.days_per_camera.to_string()),
            ("height".into(), self.height.to_string()),
            ("width".into(), self.width.to_string()),
            ("cue_strength".into(), self.cue_strength.to_string()),
            ("nuisance_strength".into(), self.nuisance_strength.to_string()),
            ("noise_sigma".into(), self.noise_sigma.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}
