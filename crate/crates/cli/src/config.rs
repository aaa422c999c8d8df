//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use mcflab::io::format_key_values;

/// One configurable key of a subcommand.
#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

pub const fn key(key: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { key, default, help }
}

/// Bad user input; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// A fully resolved single-experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub command: String,
    values: BTreeMap<String, String>,
    /// Keys that vary across the items of a sweep.
    pub swept: Vec<String>,
    /// Swept keys and keys whose value differs from the default.
    changed: Vec<String>,
}

impl Config {
    /// Defaults, then the config file, then command-line flags. A value
    /// holding commas is a sweep; the cartesian product is returned in
    /// lexicographic key order.
    pub fn resolve(
        command: &str,
        specs: &[KeySpec],
        file: &BTreeMap<String, String>,
        flags: &[(String, String)],
    ) -> anyhow::Result<Vec<Config>> {
        let mut values: BTreeMap<String, String> =
            specs.iter().map(|s| (s.key.to_string(), s.default.to_string())).collect();
        for (k, v) in file.iter().map(|(k, v)| (k, v)).chain(flags.iter().map(|(k, v)| (k, v))) {
            if !values.contains_key(k.as_str()) {
                return Err(usage(format!("unknown key `{k}` for `{command}`")));
            }
            values.insert(k.clone(), v.trim().to_string());
        }
        let swept: Vec<String> = values.iter().filter(|(_, v)| v.contains(',')).map(|(k, _)| k.clone()).collect();
        let mut items = vec![values.clone()];
        for k in &swept {
            let choices: Vec<String> = values[k].split(',').map(|s| s.trim().to_string()).collect();
            if choices.iter().any(String::is_empty) {
                return Err(usage(format!("empty entry in the sweep of `{k}`")));
            }
            items = items
                .into_iter()
                .flat_map(|base| {
                    choices.iter().map(move |c| {
                        let mut m = base.clone();
                        m.insert(k.clone(), c.clone());
                        m
                    })
                })
                .collect();
        }
        let defaults: BTreeMap<&str, &str> = specs.iter().map(|s| (s.key, s.default)).collect();
        Ok(items
            .into_iter()
            .map(|values| {
                let changed = values
                    .iter()
                    .filter(|(k, v)| defaults[k.as_str()] != v.as_str() || swept.contains(k))
                    .map(|(k, _)| k.clone())
                    .collect();
                Config { command: command.to_string(), values, swept: swept.clone(), changed }
            })
            .collect())
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("key `{key}` not registered"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> anyhow::Result<T> {
        let raw = self.str(key);
        raw.parse().map_err(|_| usage(format!("cannot parse `{key} = {raw}`")))
    }

    /// `None` for the literal `auto`.
    pub fn get_auto<T: FromStr>(&self, key: &str) -> anyhow::Result<Option<T>> {
        if self.str(key) == "auto" {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn echo(&self) -> String {
        let mut m = self.values.clone();
        m.insert("command".into(), self.command.clone());
        format_key_values(&m)
    }

    /// Run directory below the command, e.g. `dz=0.005_n=2`; `None` when
    /// every key has its default.
    pub fn label(&self) -> Option<String> {
        self.join(&self.changed)
    }

    /// Identifies an item among the outputs of a sweep.
    pub fn sweep_label(&self) -> Option<String> {
        self.join(&self.swept)
    }

    fn join(&self, keys: &[String]) -> Option<String> {
        if keys.is_empty() {
            return None;
        }
        let parts: Vec<String> = keys.iter().map(|k| format!("{k}={}", self.values[k].replace('/', "_"))).collect();
        Some(parts.join("_"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPECS: &[KeySpec] = &[key("n", "3", ""), key("dz", "0.01", ""), key("initial", "dumbbell", "")];

    #[test]
    fn precedence_and_sweeps() {
        let file: BTreeMap<String, String> = [("dz".to_string(), "0.02".to_string())].into();
        let flags = vec![("n".to_string(), "2,3".to_string())];
        let items = Config::resolve("simulate", SPECS, &file, &flags).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].get::<usize>("n").unwrap(), 2);
        assert_eq!(items[1].get::<f64>("dz").unwrap(), 0.02);
        assert_eq!(items[1].sweep_label().as_deref(), Some("n=3"));
        assert_eq!(items[1].label().as_deref(), Some("dz=0.02_n=3"));
        assert_eq!(items[0].label().as_deref(), Some("dz=0.02_n=2"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let flags = vec![("bogus".to_string(), "1".to_string())];
        let err = Config::resolve("simulate", SPECS, &BTreeMap::new(), &flags).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
