//! Consolidated acceptance table from run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mcflab::io::parse_key_values;

use crate::output::{sha256_hex, MANIFEST};

pub const CRITERIA: u32 = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass,
    Skipped,
    Fail,
    Error,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
            Status::Error => "ERROR",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub criterion: String,
    pub status: Status,
    pub runs: usize,
    pub detail: String,
}

/// A parsed manifest, or the reason it could not be trusted.
struct Manifest {
    path: PathBuf,
    entries: BTreeMap<String, String>,
}

fn load(path: &Path) -> Result<Manifest, (String, Option<Vec<u32>>)> {
    let text = fs::read_to_string(path).map_err(|e| (format!("{}: {e}", path.display()), None))?;
    let entries = parse_key_values(&text).map_err(|e| (format!("{}: {e}", path.display()), None))?;
    let criteria = entries
        .get("criteria")
        .map(|c| c.split_whitespace().map(str::parse::<u32>).collect::<Result<Vec<_>, _>>())
        .and_then(Result::ok);
    let fail = |msg: String| Err((format!("{}: {msg}", path.display()), criteria.clone()));
    if !entries.contains_key("command") || criteria.is_none() {
        return fail("missing command or criteria".into());
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    if !entries.keys().any(|k| k.starts_with("file.")) {
        return fail("lists no files".into());
    }
    for (k, sha) in entries.iter().filter(|(k, _)| k.starts_with("file.")) {
        let name = &k["file.".len()..];
        match fs::read(dir.join(name)) {
            Ok(bytes) if sha256_hex(&bytes) == *sha => {}
            Ok(_) => return fail(format!("checksum mismatch for {name}")),
            Err(e) => return fail(format!("{name}: {e}")),
        }
    }
    for (k, v) in entries.iter().filter(|(k, _)| k.starts_with("check.")) {
        if v != "pass" && v != "fail" {
            return fail(format!("bad check value `{k} = {v}`"));
        }
    }
    Ok(Manifest { path: path.to_path_buf(), entries })
}

/// Every `manifest.txt` below `root`, skipping earlier report runs.
pub fn discover(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let Ok(rd) = fs::read_dir(&dir) else { continue };
        let mut entries: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                if p.file_name().is_some_and(|n| n != "report") {
                    stack.push(p);
                }
            } else if p.file_name().is_some_and(|n| n == MANIFEST) {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn run_name(m: &Manifest, root: &Path) -> String {
    let dir = m.path.parent().unwrap_or(Path::new(""));
    dir.strip_prefix(root).unwrap_or(dir).display().to_string()
}

pub fn build(manifests: &[PathBuf], root: &Path) -> Vec<Row> {
    let mut good = Vec::new();
    let mut errors: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    let mut orphan = Vec::new();
    for p in manifests {
        match load(p) {
            Ok(m) => good.push(m),
            Err((msg, Some(cs))) if !cs.is_empty() => {
                for c in cs {
                    errors.entry(c).or_default().push(msg.clone());
                }
            }
            Err((msg, _)) => orphan.push(msg),
        }
    }
    let mut rows = Vec::new();
    for c in 1..=CRITERIA {
        if c == CRITERIA {
            rows.push(determinism_row(&good));
            continue;
        }
        let prefix = format!("check.{c}.");
        let mut detail = Vec::new();
        let (mut runs, mut all_pass) = (0, true);
        for m in &good {
            let checks: Vec<(&String, &String)> = m.entries.iter().filter(|(k, _)| k.starts_with(&prefix)).collect();
            if checks.is_empty() {
                continue;
            }
            runs += 1;
            let failed: Vec<&str> =
                checks.iter().filter(|(_, v)| v.as_str() != "pass").map(|(k, _)| &k[prefix.len()..]).collect();
            all_pass &= failed.is_empty();
            let metrics: Vec<String> = m
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix("metric.").map(|k| format!("{k}={v}")))
                .collect();
            let mut d = format!("{}: {}", run_name(m, root), metrics.join(" "));
            if !failed.is_empty() {
                d.push_str(&format!(" failed[{}]", failed.join(",")));
            }
            detail.push(d);
        }
        let status = if let Some(e) = errors.get(&c) {
            detail.extend(e.iter().cloned());
            Status::Error
        } else if runs == 0 {
            Status::Skipped
        } else if all_pass {
            Status::Pass
        } else {
            Status::Fail
        };
        rows.push(Row { criterion: c.to_string(), status, runs, detail: detail.join("; ") });
    }
    if !orphan.is_empty() {
        rows.push(Row { criterion: "unknown".into(), status: Status::Error, runs: 0, detail: orphan.join("; ") });
    }
    rows
}

/// Runs sharing a configuration must agree on every output checksum.
fn determinism_row(good: &[Manifest]) -> Row {
    let mut groups: BTreeMap<&str, Vec<&Manifest>> = BTreeMap::new();
    for m in good {
        if let Some(sha) = m.entries.get("file.config.txt") {
            groups.entry(sha.as_str()).or_default().push(m);
        }
    }
    let repeated: Vec<&Vec<&Manifest>> = groups.values().filter(|g| g.len() > 1).collect();
    let files = |m: &Manifest| -> Vec<(String, String)> {
        m.entries.iter().filter(|(k, _)| k.starts_with("file.")).map(|(k, v)| (k.clone(), v.clone())).collect()
    };
    let mismatched: Vec<String> = repeated
        .iter()
        .filter(|g| g.iter().any(|m| files(m) != files(g[0])))
        .map(|g| g[0].path.parent().map(|p| p.display().to_string()).unwrap_or_default())
        .collect();
    let status = if repeated.is_empty() {
        Status::Skipped
    } else if mismatched.is_empty() {
        Status::Pass
    } else {
        Status::Fail
    };
    let detail = if mismatched.is_empty() {
        format!("repeated_configs={}", repeated.len())
    } else {
        format!("repeated_configs={} differing: {}", repeated.len(), mismatched.join(","))
    };
    Row { criterion: CRITERIA.to_string(), status, runs: repeated.iter().map(|g| g.len()).sum(), detail }
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut s = String::from("criterion,status,runs,detail\n");
    for r in rows {
        s.push_str(&format!("{},{},{},\"{}\"\n", r.criterion, r.status.as_str(), r.runs, r.detail.replace('"', "'")));
    }
    s
}

pub fn to_text(rows: &[Row]) -> String {
    let mut s = String::new();
    for r in rows {
        s.push_str(&format!("criterion {:>7}  {:<7}  runs={}  {}\n", r.criterion, r.status.as_str(), r.runs, r.detail));
    }
    s
}
