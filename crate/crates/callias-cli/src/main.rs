use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use callias_cli::config::ExperimentConfig;
use callias_cli::runner::{self, to_json_bytes};
use callias_core::{CoreError, ErrorClass};
use clap::{Parser, Subcommand};
use serde_json::Value;

/// Numerical index-theory laboratory for wave-type operators on 1+1-D
/// cylinders.
#[derive(Parser)]
#[command(name = "callias", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all tasks of one experiment config.
    Run {
        /// Path to the JSON experiment config.
        config: PathBuf,
        /// Output directory for report, CSV exports, and manifest.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Override config fields, e.g. `--set numerics.resolution=128`.
        /// Values are parsed as JSON, falling back to strings.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Run one config repeatedly over a list of values for one field.
    Sweep {
        /// Path to the JSON experiment config.
        config: PathBuf,
        /// Dotted path of the field to vary, e.g. `numerics.resolution`.
        #[arg(long)]
        param: String,
        /// Comma-separated values, each parsed as JSON.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

/// Exit codes: 0 success, 1 configuration error, 2 numerical failure,
/// 3 identity violation.
fn exit_code_for(err: &CoreError) -> u8 {
    match err.class() {
        ErrorClass::Config => 1,
        ErrorClass::Numerical => 2,
        ErrorClass::Identity => 3,
    }
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Set a dotted path inside a JSON value, erroring on paths that do not
/// exist in the config (strict schema: overrides cannot invent fields).
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = cur
            .as_object_mut()
            .ok_or_else(|| format!("`{}` is not an object", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            if !map.contains_key(*part) {
                return Err(format!("config has no field `{path}`"));
            }
            map.insert(part.to_string(), value);
            return Ok(());
        }
        cur = map
            .get_mut(*part)
            .ok_or_else(|| format!("config has no field `{}`", parts[..=i].join(".")))?;
    }
    Err("empty override path".to_string())
}

fn load_config(path: &Path, sets: &[(String, Value)]) -> Result<ExperimentConfig, String> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut value: Value =
        serde_json::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))?;
    for (k, v) in sets {
        set_path(&mut value, k, v.clone())?;
    }
    serde_json::from_value(value).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_outputs(dir: &Path, output: runner::RunOutput) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let mut files = BTreeMap::<String, Vec<u8>>::new();
    files.insert("report.json".to_string(), to_json_bytes(&output.report));
    for (name, bytes) in output.artifacts {
        files.insert(name, bytes);
    }
    let manifest = runner::manifest(&files);
    files.insert("manifest.json".to_string(), to_json_bytes(&manifest));
    for (name, bytes) in &files {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
    }
    Ok(())
}

fn init_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// File-system-safe directory name for one sweep value.
fn slug(raw: &str) -> String {
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            sets,
        } => {
            init_workers(workers);
            let mut parsed = Vec::new();
            for s in &sets {
                match s.split_once('=') {
                    Some((k, v)) => parsed.push((k.to_string(), parse_scalar(v))),
                    None => return fail(1, &format!("--set needs KEY=VALUE, got `{s}`")),
                }
            }
            let cfg = match load_config(&config, &parsed) {
                Ok(c) => c,
                Err(e) => return fail(1, &e),
            };
            match runner::run(&cfg) {
                Ok(output) => match write_outputs(&out, output) {
                    Ok(()) => {
                        println!("wrote {}", out.join("report.json").display());
                        ExitCode::SUCCESS
                    }
                    Err(e) => fail(1, &e),
                },
                Err(err) => fail(exit_code_for(&err), &err.to_string()),
            }
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
            workers,
        } => {
            init_workers(workers);
            if values.is_empty() {
                return fail(1, "--values must list at least one value");
            }
            let mut worst: Option<u8> = None;
            let results: Vec<(String, Result<(), (u8, String)>)> = {
                use rayon::prelude::*;
                values
                    .par_iter()
                    .map(|raw| {
                        let sets = vec![(param.clone(), parse_scalar(raw))];
                        let one = || -> Result<(), (u8, String)> {
                            let cfg = load_config(&config, &sets).map_err(|e| (1u8, e))?;
                            let output = runner::run(&cfg)
                                .map_err(|e| (exit_code_for(&e), e.to_string()))?;
                            let dir = out.join(format!("{}={}", slug(&param), slug(raw)));
                            write_outputs(&dir, output).map_err(|e| (1u8, e))
                        };
                        (raw.clone(), one())
                    })
                    .collect()
            };
            for (raw, r) in results {
                match r {
                    Ok(()) => println!("{param}={raw}: ok"),
                    Err((code, msg)) => {
                        eprintln!("{param}={raw}: {msg}");
                        worst = Some(worst.map_or(code, |w| w.max(code)));
                    }
                }
            }
            match worst {
                None => ExitCode::SUCCESS,
                Some(code) => ExitCode::from(code),
            }
        }
    }
}
