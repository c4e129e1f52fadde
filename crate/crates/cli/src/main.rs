//! `actinfo`: figure data, calibration experiments and model summaries as
//! CSV files.
//!
//! Every run writes `manifest.txt` into the output directory. Each CSV file
//! starts with a `# manifest_hash=<sha256>` comment line, then a header row.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches};

use crate::commands::{Artifact, Context, COMMANDS};
use crate::config::{parse_config_file, Settings};
use crate::error::CliError;

const COMMON: [&str; 4] = ["seed", "jobs", "out", "plot"];

fn cli() -> clap::Command {
    let mut app = clap::Command::new("actinfo")
        .version(actinfo::VERSION)
        .about("Active information experiments on finite-state searches")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for c in COMMANDS {
        let mut sub = clap::Command::new(c.name)
            .about(c.about)
            .arg(Arg::new("seed").long("seed").value_name("U64").help("random seed, required by stochastic commands"))
            .arg(Arg::new("jobs").long("jobs").value_name("N").help("worker threads [default: 1]"))
            .arg(Arg::new("out").long("out").value_name("DIR").help("output directory [default: .]"))
            .arg(Arg::new("config").long("config").value_name("FILE").help("key=value settings, overridden by flags"))
            .arg(Arg::new("plot").long("plot").action(ArgAction::SetTrue).help("also write gnuplot scripts"));
        for p in c.params {
            let help = match p.default {
                Some(d) => format!("{} [default: {d}]", p.help),
                None => p.help.to_string(),
            };
            sub = sub.arg(Arg::new(p.key).long(p.key).value_name("VALUE").allow_hyphen_values(true).help(help));
        }
        app = app.subcommand(sub);
    }
    app
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// A common valued setting: flag, then config file, then nothing.
fn common(m: &ArgMatches, config: &[(String, String)], key: &str) -> Option<String> {
    m.get_one::<String>(key).cloned().or_else(|| config.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.clone()))
}

fn parse_common<T: std::str::FromStr>(key: &str, value: Option<String>) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    value.map(|v| v.trim().parse::<T>().map_err(|e| CliError::config(key, format!("{v:?}: {e}")))).transpose()
}

fn execute(name: &str, m: &ArgMatches) -> Result<Vec<PathBuf>, CliError> {
    let command = commands::find(name).expect("subcommand registered");
    let config_path = m.get_one::<String>("config").map(PathBuf::from);
    let config = match &config_path {
        Some(p) => parse_config_file(&read(p).map_err(|e| CliError::config("config", e.to_string()))?)?,
        None => Vec::new(),
    };
    let seed: Option<u64> = parse_common("seed", common(m, &config, "seed"))?;
    let jobs: usize = parse_common("jobs", common(m, &config, "jobs"))?.unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::config("jobs", "must be at least 1"));
    }
    let out = PathBuf::from(common(m, &config, "out").unwrap_or_else(|| ".".into()));
    let from_file = config.iter().rev().find(|(k, _)| k == "plot").map(|(_, v)| v.clone());
    let plot = m.get_flag("plot") || parse_common::<bool>("plot", from_file)?.unwrap_or(false);

    let own: Vec<(String, String)> = config.into_iter().filter(|(k, _)| !COMMON.contains(&k.as_str())).collect();
    let flags: Vec<(&'static str, String)> =
        command.params.iter().filter_map(|p| m.get_one::<String>(p.key).map(|v| (p.key, v.clone()))).collect();
    let settings = Settings::resolve(name, command.params, &own, &flags)?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::config("jobs", e.to_string()))?;
    let artifacts: Vec<Artifact> = (command.run)(&Context { settings: &settings, seed, pool: &pool })?;

    let run_lines = [
        ("jobs", jobs.to_string()),
        ("out", out.display().to_string()),
        ("config", config_path.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string())),
        ("plot", plot.to_string()),
    ];
    let manifest = settings.manifest(actinfo::VERSION, seed, &run_lines);
    std::fs::create_dir_all(&out).map_err(|source| CliError::Io { path: out.display().to_string(), source })?;
    let mut written = Vec::new();
    for a in &artifacts {
        let path = out.join(&a.name);
        write(&path, &format!("# manifest_hash={}\n{}", manifest.hash, a.table))?;
        written.push(path);
        if let (true, Some(script)) = (plot, &a.plot) {
            let path = out.join(Path::new(&a.name).with_extension("gp"));
            write(&path, script)?;
            written.push(path);
        }
    }
    let path = out.join("manifest.txt");
    write(&path, &manifest.text)?;
    written.push(path);
    Ok(written)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand required");
    match execute(name, sub) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("actinfo {name}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
