//! `langevin-lab` command line: runs one configured experiment and writes
//! `records.csv`, `summary.json`, and `resolved_config.json` to the output
//! directory.
//!
//! Exit codes: 0 on success, 2 on config errors, 3 when more than 10% of
//! replicas diverged numerically.

use std::path::PathBuf;
use std::process::ExitCode;

use langevin_lab::harness::{run_experiment, write_outputs, ExperimentConfig, ExperimentSpec};

const USAGE: &str = "\
langevin-lab <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--replicas <n>] [--threads <n>]

Subcommands:
  run-hitting         hitting-time experiment (config kind hitting_fosp / hitting_sosp)
  run-escape          saddle-escape experiment (config kind escape)
  run-ergodicity      SGLD vs PGD reachability contrast (config kind ergodicity)
  check-bounds        theorem constants and matrix-product validators (config kind check_bounds)
  estimate-constants  analytic vs empirical assumption constants (config kind estimate_constants)

Options:
  --config <path>    JSON experiment config (required)
  --out <dir>        output directory (default: out)
  --seed <u64>       override master_seed
  --replicas <n>     override replica count
  --threads <n>      size of the worker pool (default: all cores)
";

struct Args {
    subcommand: String,
    config: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    replicas: Option<u64>,
    threads: Option<usize>,
}

fn parse_args(mut argv: impl Iterator<Item = String>) -> Result<Args, String> {
    let subcommand = argv.next().ok_or_else(|| "missing subcommand".to_string())?;
    let mut config = None;
    let mut out = PathBuf::from("out");
    let mut seed = None;
    let mut replicas = None;
    let mut threads = None;
    while let Some(flag) = argv.next() {
        let mut value = |name: &str| {
            argv.next()
                .ok_or_else(|| format!("{name} requires a value"))
        };
        match flag.as_str() {
            "--config" => config = Some(PathBuf::from(value("--config")?)),
            "--out" => out = PathBuf::from(value("--out")?),
            "--seed" => {
                seed = Some(
                    value("--seed")?
                        .parse()
                        .map_err(|e| format!("--seed: {e}"))?,
                )
            }
            "--replicas" => {
                replicas = Some(
                    value("--replicas")?
                        .parse()
                        .map_err(|e| format!("--replicas: {e}"))?,
                )
            }
            "--threads" => {
                threads = Some(
                    value("--threads")?
                        .parse()
                        .map_err(|e| format!("--threads: {e}"))?,
                )
            }
            other => return Err(format!("unknown flag `{other}`")),
        }
    }
    Ok(Args {
        subcommand,
        config: config.ok_or_else(|| "--config is required".to_string())?,
        out,
        seed,
        replicas,
        threads,
    })
}

/// The subcommand must agree with the config's experiment kind.
fn check_subcommand(sub: &str, spec: &ExperimentSpec) -> Result<(), String> {
    let ok = matches!(
        (sub, spec),
        ("run-hitting", ExperimentSpec::HittingFosp(_))
            | ("run-hitting", ExperimentSpec::HittingSosp(_))
            | ("run-escape", ExperimentSpec::Escape(_))
            | ("run-ergodicity", ExperimentSpec::Ergodicity(_))
            | ("check-bounds", ExperimentSpec::CheckBounds(_))
            | ("estimate-constants", ExperimentSpec::EstimateConstants(_))
    );
    if ok {
        Ok(())
    } else {
        Err(format!(
            "subcommand `{sub}` does not match config experiment kind `{}`",
            spec.name()
        ))
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    if argv.iter().any(|a| a == "--help" || a == "-h") || argv.is_empty() {
        print!("{USAGE}");
        return ExitCode::from(if argv.is_empty() { 2 } else { 0 });
    }
    let args = match parse_args(argv.into_iter()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match ExperimentConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(msg) = check_subcommand(&args.subcommand, &cfg.experiment) {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(replicas) = args.replicas {
        cfg.replicas = replicas;
    }

    let run = || -> langevin_lab::Result<i32> {
        let output = run_experiment(&cfg)?;
        write_outputs(&output, &args.out)?;
        println!(
            "{}: wrote records.csv, summary.json, resolved_config.json to {}",
            cfg.experiment.name(),
            args.out.display()
        );
        Ok(output.exit_code)
    };
    let result = match args.threads {
        Some(n) => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: cannot build thread pool: {e}");
                    return ExitCode::from(2);
                }
            };
            pool.install(run)
        }
        None => run(),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e @ langevin_lab::Error::Config { .. }) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
