//! Run directories: outputs, gnuplot companions and the checksummed manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sha2::{Digest, Sha256};

use crate::config::Config;

pub const MANIFEST: &str = "manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A verdict recorded against an acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub criterion: u32,
    pub name: String,
    pub pass: bool,
}

#[derive(Debug)]
pub struct Run {
    pub dir: PathBuf,
    command: String,
    files: BTreeMap<String, String>,
    metrics: BTreeMap<String, String>,
    checks: Vec<Check>,
}

impl Run {
    pub fn create(root: &Path, cfg: &Config) -> anyhow::Result<Run> {
        let mut dir = root.join(&cfg.command);
        if let Some(label) = cfg.label() {
            dir = dir.join(label);
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut run = Run {
            dir,
            command: cfg.command.clone(),
            files: BTreeMap::new(),
            metrics: BTreeMap::new(),
            checks: Vec::new(),
        };
        run.write("config.txt", &cfg.echo())?;
        Ok(run)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.files.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    /// Writes `name` and a gnuplot script plotting `using` from it.
    pub fn csv(&mut self, name: &str, contents: &str, using: &str, extra: &str) -> anyhow::Result<()> {
        self.write(name, contents)?;
        let stem = name.trim_end_matches(".csv");
        let script = format!(
            "set datafile separator ','\nset key autotitle columnhead\nset title '{stem}'\n{extra}plot '{name}' using {using} with linespoints\n"
        );
        self.write(&format!("{stem}.gp"), &script)
    }

    pub fn metric(&mut self, key: &str, value: impl Display) {
        self.metrics.insert(key.to_string(), value.to_string());
    }

    pub fn check(&mut self, criterion: u32, name: &str, pass: bool) {
        self.checks.push(Check { criterion, name: name.to_string(), pass });
    }

    /// Writes the manifest: metrics, checks and a SHA-256 per output file.
    pub fn finish(self) -> anyhow::Result<PathBuf> {
        let mut out = String::new();
        out.push_str(&format!("command = {}\n", self.command));
        let mut criteria: Vec<u32> = self.checks.iter().map(|c| c.criterion).collect();
        criteria.sort_unstable();
        criteria.dedup();
        let list: Vec<String> = criteria.iter().map(u32::to_string).collect();
        out.push_str(&format!("criteria = {}\n", list.join(" ")));
        for c in &self.checks {
            out.push_str(&format!("check.{}.{} = {}\n", c.criterion, c.name, if c.pass { "pass" } else { "fail" }));
        }
        for (k, v) in &self.metrics {
            out.push_str(&format!("metric.{k} = {v}\n"));
        }
        for (k, v) in &self.files {
            out.push_str(&format!("file.{k} = {v}\n"));
        }
        let path = self.dir.join(MANIFEST);
        fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
