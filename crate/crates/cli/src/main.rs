//! `mcflab`: batch driver for the flow, soliton, spectral and diagnostic
//! pipelines. Exit codes: 0 success, 2 invalid input, 3 numerical failure.

mod commands;
mod config;
mod output;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Arg, ArgAction, ArgMatches, Command};

use config::{usage, Config, UsageError};

const OUT_ENV: &str = "MCFLAB_OUT_DIR";

fn cli() -> Command {
    let mut cmd = Command::new("mcflab")
        .about("Rotationally symmetric mean curvature flow laboratory")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).value_name("PATH").help("flat key = value configuration file"))
        .arg(Arg::new("out").long("out").global(true).value_name("DIR").help(format!("output root (overrides ${OUT_ENV})")))
        .arg(
            Arg::new("jobs")
                .long("jobs")
                .global(true)
                .value_name("K")
                .value_parser(clap::value_parser!(usize))
                .help("workers for parameter sweeps"),
        )
        .arg(
            Arg::new("print-config")
                .long("print-config")
                .global(true)
                .action(ArgAction::SetTrue)
                .help("print the resolved configuration and exit"),
        );
    for (name, about) in commands::COMMANDS {
        let mut sub = Command::new(*name).about(*about);
        if *name == "report" {
            sub = sub.arg(Arg::new("paths").num_args(0..).value_name("PATH").help("manifests or run directories"));
        } else {
            sub = sub.after_help("Comma-separated values sweep a key; sweeps run in parallel with --jobs.");
        }
        for spec in commands::specs(name) {
            sub = sub.arg(
                Arg::new(spec.key)
                    .long(spec.key)
                    .value_name("VALUE")
                    .allow_negative_numbers(true)
                    .help(format!("{} [default: {}]", spec.help, spec.default)),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    if let Some(m) = e.downcast_ref::<mcflab::Error>() {
        return if m.is_validation() { 2 } else { 3 };
    }
    3
}

fn out_root(m: &ArgMatches) -> PathBuf {
    m.get_one::<String>("out")
        .cloned()
        .or_else(|| std::env::var(OUT_ENV).ok().filter(|s| !s.is_empty()))
        .unwrap_or_else(|| "mcflab-out".into())
        .into()
}

fn resolve(name: &str, m: &ArgMatches) -> anyhow::Result<Vec<Config>> {
    let specs = commands::specs(name);
    let file = match m.get_one::<String>("config") {
        Some(p) => commands::read_config_file(Path::new(p))?,
        None => BTreeMap::new(),
    };
    let flags: Vec<(String, String)> =
        specs.iter().filter_map(|s| m.get_one::<String>(s.key).map(|v| (s.key.to_string(), v.clone()))).collect();
    Config::resolve(name, &specs, &file, &flags)
}

/// Runs sweep items on `jobs` workers; results come back in item order.
fn run_items(items: &[Config], root: &Path, jobs: usize) -> Vec<anyhow::Result<String>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<anyhow::Result<String>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= items.len() {
                    break;
                }
                let r = commands::run(&items[k], root);
                results.lock().expect("no worker panicked")[k] = Some(r);
            });
        }
    });
    results.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every item ran")).collect()
}

fn report(m: &ArgMatches, root: &Path) -> anyhow::Result<u8> {
    let paths: Vec<PathBuf> = m.get_many::<String>("paths").map(|v| v.map(PathBuf::from).collect()).unwrap_or_default();
    let mut manifests = Vec::new();
    if paths.is_empty() {
        manifests = report::discover(root);
    }
    for p in &paths {
        if p.is_dir() {
            manifests.extend(report::discover(p));
        } else if p.exists() {
            manifests.push(p.clone());
        } else {
            return Err(usage(format!("no such manifest or directory: {}", p.display())));
        }
    }
    let rows = report::build(&manifests, root);
    let dir = root.join("report");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("report.csv"), report::to_csv(&rows))?;
    let text = report::to_text(&rows);
    std::fs::write(dir.join("report.txt"), &text)?;
    print!("{text}");
    Ok(if rows.iter().any(|r| r.status == report::Status::Error) { 3 } else { 0 })
}

fn real_main() -> anyhow::Result<u8> {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print()?;
            return Ok(code);
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let root = out_root(sub);
    if name == "report" {
        return report(sub, &root);
    }
    let items = resolve(name, sub)?;
    if sub.get_flag("print-config") {
        for c in &items {
            println!("{}", c.echo());
        }
        return Ok(0);
    }
    let jobs = sub.get_one::<usize>("jobs").copied().unwrap_or(1);
    let mut code = 0;
    for (cfg, r) in items.iter().zip(run_items(&items, &root, jobs)) {
        let label = cfg.sweep_label().map(|l| format!("[{l}] ")).unwrap_or_default();
        match r {
            Ok(text) => {
                for line in text.lines() {
                    println!("{label}{line}");
                }
            }
            Err(e) => {
                eprintln!("error: {label}{e:#}");
                code = code.max(exit_code(&e));
            }
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
