mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use error::CliError;
use maglab_core::checks::DEFAULT_SEED;
use output::RunDir;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical laboratory for magnetic spectral inverse problems.
#[derive(Debug, Parser)]
#[command(name = "maglab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Flat TOML file with experiment parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory (default `runs/<subcommand>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random draw (default 7).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance the subcommand enforces on its headline residual.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Truncation order of symbol computations.
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Fourier cutoff of Galerkin matrices.
    #[arg(long, global = true)]
    cutoff: Option<usize>,
    /// Also run the acceptance checks and write checks.csv.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Closed geodesics of the genus-2 surface up to `l_max`.
    Lengths,
    /// Structure-equation residuals on the unit cosphere bundle.
    Brackets,
    /// Pestov identity for manufactured transport solutions.
    Pestov,
    /// Transport equation along torus lines.
    Transport,
    /// Magnetic Schrödinger eigenvalues, optionally against a gauge partner.
    Schrodinger,
    /// Flux decision for two potentials.
    Gauge,
    /// X-ray transforms along closed geodesics.
    Xray,
    /// Full symbol of the DN map from boundary jets.
    SteklovSymbol,
    /// Radial disk DN eigenvalues against the symbol expansion.
    SteklovOracle,
    /// Recover boundary jets up to gauge from two symbols.
    RecoverJets,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Lengths => "lengths",
            Command::Brackets => "brackets",
            Command::Pestov => "pestov",
            Command::Transport => "transport",
            Command::Schrodinger => "schrodinger",
            Command::Gauge => "gauge",
            Command::Xray => "xray",
            Command::SteklovSymbol => "steklov-symbol",
            Command::SteklovOracle => "steklov-oracle",
            Command::RecoverJets => "recover-jets",
        }
    }
}

fn merged_config(cli: &Cli, name: &str) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.subcommand = name.into();
    cfg.seed = cli.seed.or(cfg.seed);
    cfg.tol = cli.tol.or(cfg.tol);
    cfg.order = cli.order.or(cfg.order);
    cfg.cutoff = cli.cutoff.or(cfg.cutoff);
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cmd: Command, cfg: &ExperimentConfig, run: &mut RunDir, seed: u64) -> Result<commands::Notes, CliError> {
    match cmd {
        Command::Lengths => commands::lengths(cfg, run),
        Command::Brackets => commands::brackets(cfg, run),
        Command::Pestov => commands::pestov(cfg, run, seed),
        Command::Transport => commands::transport(cfg, run),
        Command::Schrodinger => commands::schrodinger(cfg, run),
        Command::Gauge => commands::gauge_cmd(cfg, run),
        Command::Xray => commands::xray(cfg, run),
        Command::SteklovSymbol => commands::steklov_symbol(cfg, run),
        Command::SteklovOracle => commands::steklov_oracle(cfg, run),
        Command::RecoverJets => commands::recover_jets(cfg, run, seed),
    }
}

fn execute(cli: &Cli, cmd: Command) -> Result<(), CliError> {
    let name = cmd.name();
    let cfg = merged_config(cli, name)?;
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let root = cli.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(name));
    let mut run = RunDir::create(&root, seed)?;
    let config_json = serde_json::to_value(&cfg)?;

    let mut result = dispatch(cmd, &cfg, &mut run, seed);
    let mut summary = json!({});
    if cli.check {
        match commands::check(&mut run, seed) {
            Ok((outcomes, lines)) => {
                for l in &lines {
                    println!("{l}");
                }
                let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.clone()).collect();
                summary["checks"] = json!({ "passed": outcomes.len() - failed.len(), "failed": failed });
                if !failed.is_empty() && result.is_ok() {
                    result = Err(CliError::Check { failed });
                }
            }
            Err(e) if result.is_ok() => result = Err(e),
            Err(_) => {}
        }
    }

    match result {
        Ok(notes) => {
            run.manifest(name, config_json, "ok", &notes, summary)?;
            println!("{}", json!({ "status": "ok", "subcommand": name, "out": run.root() }));
            Ok(())
        }
        Err(e) => {
            let doc = e.to_json(name);
            std::fs::write(run.root().join("error.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
            run.manifest(name, config_json, "error", &[e.message()], summary)?;
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json(""));
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let Some(cmd) = cli.command else {
        let err = CliError::Usage("missing subcommand; see --help".into());
        eprintln!("{}", err.to_json(""));
        return ExitCode::from(err.exit_code() as u8);
    };
    match execute(&cli, cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json(cmd.name()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
