use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use recsim_cli::config::parse_seeds;
use recsim_cli::presets;
use recsim_cli::{parse_config, render, run_experiment, ExperimentConfig, RunError};

const EXIT_CHECKS_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_IO: u8 = 4;

/// Run recommendation-strategy experiments from a config file or a named preset.
#[derive(Parser, Debug)]
#[command(name = "recsim", version)]
struct Args {
    /// Experiment config file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Named preset, see --list-presets.
    #[arg(long)]
    preset: Option<String>,

    /// Seeds, e.g. `1-10` or `1,4,9`. Overrides the config.
    #[arg(long)]
    seeds: Option<String>,

    /// Output directory.
    #[arg(long, env = "RECSIM_OUT")]
    out: Option<PathBuf>,

    /// Worker threads for seeds.
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// Record every k-th session in traces. Overrides the config.
    #[arg(long)]
    decimate: Option<u64>,

    /// Print the fully expanded config and exit.
    #[arg(long)]
    render: bool,

    /// Print the preset names and exit.
    #[arg(long)]
    list_presets: bool,
}

fn load(args: &Args) -> Result<ExperimentConfig, (u8, String)> {
    let text = match (&args.config, &args.preset) {
        (Some(path), _) => {
            std::fs::read_to_string(path).map_err(|e| (EXIT_IO, format!("cannot read {}: {e}", path.display())))?
        }
        (None, Some(name)) => format!("preset = {name}\n"),
        (None, None) => return Err((EXIT_CONFIG, "one of --config or --preset is required".into())),
    };
    let mut config = parse_config(&text).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    if let Some(seeds) = &args.seeds {
        config.seeds = parse_seeds(seeds).map_err(|e| (EXIT_CONFIG, format!("--seeds: {e}")))?;
    }
    if let Some(k) = args.decimate {
        if k == 0 {
            return Err((EXIT_CONFIG, "--decimate: must be at least 1".into()));
        }
        config.decimate = k;
    }
    if args.jobs == 0 {
        return Err((EXIT_CONFIG, "--jobs: must be at least 1".into()));
    }
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_presets {
        for name in presets::NAMES {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    let config = match load(&args) {
        Ok(c) => c,
        Err((code, message)) => {
            eprintln!("error: {message}");
            return ExitCode::from(code);
        }
    };
    if args.render {
        print!("{}", render(&config));
        return ExitCode::SUCCESS;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&config.name));
    match run_experiment(&config, &out, args.jobs) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            println!("wrote {} files to {}", outcome.files.len(), out.display());
            if outcome.checks_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECKS_FAILED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                RunError::Domain(_) => EXIT_DOMAIN,
                RunError::Io { .. } => EXIT_IO,
            })
        }
    }
}
