//! `--config` files: `key = value` lines with `#` comments. Keys are long
//! flag names without the dashes. Command-line flags take precedence.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

const KEYS: &[&str] = &[
    "alpha", "beta", "delta", "ic", "frame", "chart", "t-end", "tau-end", "stride", "rtol", "atol", "max-steps",
    "alphas", "betas", "jobs", "state", "inverse",
];

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            let k = k.trim().replace('_', "-");
            if !KEYS.contains(&k.as_str()) {
                return Err(format!("line {}: unknown key '{k}'", i + 1));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(Self { values })
    }

    /// The flag if given, else the config value, else `None`.
    pub fn value<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| format!("config key '{key}' = '{v}': {e}")))
            .transpose()
    }

    pub fn required<T>(&self, flag: Option<T>, key: &str) -> Result<T, String>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.value(flag, key)?.ok_or_else(|| format!("missing required --{key}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let s = Settings::parse("alpha = 1\n# comment\nbeta=2 # trailing\n").unwrap();
        assert_eq!(s.value::<f64>(None, "alpha").unwrap(), Some(1.0));
        assert_eq!(s.value(Some(3.0), "alpha").unwrap(), Some(3.0));
        assert_eq!(s.required::<f64>(None, "beta").unwrap(), 2.0);
        assert!(s.required::<f64>(None, "delta").is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Settings::parse("speed = 3").is_err());
        assert!(Settings::parse("alpha").is_err());
        let s = Settings::parse("alpha = x").unwrap();
        assert!(s.value::<f64>(None, "alpha").is_err());
    }
}
