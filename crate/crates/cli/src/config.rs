//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

/// Every accepted key with its default. An empty default means unset.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("dataset", "synth"),
    ("layout", "flat"),
    ("manifest", ""),
    ("synth_n", "2"),
    ("out", "run"),
    ("resume", ""),
    ("seed", "0"),
    ("epochs", "100"),
    ("max_iterations", ""),
    ("lr", "0.0002"),
    ("beta1", "0.5"),
    ("beta2", "0.999"),
    ("batch_size", "2"),
    ("lambda_l1", "100"),
    ("checkpoint_interval", "0"),
    ("base_channels", "64"),
    ("depth", "8"),
    ("preprocess", "true"),
    ("clahe_clip", "3.0"),
    ("augment", "true"),
    ("augment_variants", "20"),
    ("log_every", "10"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with the lines of `text`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::Config(format!("unknown config key `{key}`"))),
        }
    }

    /// Apply a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("key listed in DEFAULTS")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.raw(key);
        v.parse()
            .map_err(|_| CliError::Config(format!("config key `{key}` has invalid value `{v}`")))
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.raw(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_overrides() {
        let cfg = RunConfig::parse("# run\nepochs = 3  # short\n\nlr=0.001\n").unwrap();
        assert_eq!(cfg.get::<usize>("epochs").unwrap(), 3);
        assert_eq!(cfg.get::<f64>("lr").unwrap(), 0.001);
        assert_eq!(cfg.get::<f64>("lambda_l1").unwrap(), 100.0);
        assert_eq!(cfg.optional::<u64>("max_iterations").unwrap(), None);
    }

    #[test]
    fn unknown_key_names_it() {
        match RunConfig::parse("epoch = 3\n") {
            Err(CliError::Config(msg)) => assert!(msg.contains("`epoch`")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_value_is_a_config_error() {
        let cfg = RunConfig::parse("epochs = many\n").unwrap();
        assert!(matches!(cfg.get::<usize>("epochs"), Err(CliError::Config(_))));
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set_pair("seed=9").unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
