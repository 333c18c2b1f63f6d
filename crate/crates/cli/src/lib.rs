//! Command-line driver for the `lggan` toolkit.
//!
//! Every command reads a flat `key = value` config (`--config <file>`), takes
//! `--key value` overrides and logs its fully resolved configuration to
//! stderr before running. Exit codes: 0 success, 1 usage or configuration
//! error, 2 data error, 3 numerical divergence.

pub mod commands;
pub mod config;

use std::fs;
use std::io::Write;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{parse_file, parse_flags, ConfigError, Key, Resolved};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Diverged(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "lggan",
    version,
    about = "Labeled graph generation and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings come from `--config <file>` and `--key value` overrides.
#[derive(Args, Debug)]
struct Settings {
    /// `--config <file>`, `--seed <n>` and `--<key> <value>` pairs.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--KEY VALUE"
    )]
    args: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract ego networks from a host graph into a dataset.
    Prepare(Settings),
    /// Train a labeled-graph GAN.
    Train(Settings),
    /// Sample graphs from a trained checkpoint.
    Generate(Settings),
    /// MMD report between generated and reference graphs.
    Evaluate(Settings),
    /// Kernel SVM accuracy when training on one set and testing on another.
    Classify(Settings),
    /// Nearest-neighbor kernel distance histograms.
    Diversity(Settings),
    /// Fit or sample classical baselines.
    #[command(subcommand)]
    Baseline(BaselineCommand),
}

#[derive(Subcommand, Debug)]
enum BaselineCommand {
    /// Fit an er, ba or mmsb model to a dataset.
    Fit(Settings),
    /// Sample a dataset from fitted parameters.
    Sample(Settings),
}

fn resolve(command: &str, schema: &[Key], args: &[String]) -> Result<Resolved, CliError> {
    let flags = parse_flags(args)?;
    let mut file = Vec::new();
    let mut rest = Vec::new();
    for (k, v) in flags {
        if k == "config" {
            let text = fs::read_to_string(&v).map_err(|e| ConfigError::Read {
                path: v.clone(),
                reason: e.to_string(),
            })?;
            file = parse_file(&text, &v)?;
        } else {
            rest.push((k, v));
        }
    }
    Ok(Resolved::resolve(command, schema, &file, &rest)?)
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// code.
pub fn run(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    let (name, schema, args, exec): (&str, &[Key], &[String], commands::Exec) = match &cli.command {
        Command::Prepare(s) => ("prepare", commands::PREPARE, &s.args, commands::prepare),
        Command::Train(s) => ("train", commands::TRAIN, &s.args, commands::train),
        Command::Generate(s) => ("generate", commands::GENERATE, &s.args, commands::generate),
        Command::Evaluate(s) => ("evaluate", commands::EVALUATE, &s.args, commands::evaluate),
        Command::Classify(s) => ("classify", commands::CLASSIFY, &s.args, commands::classify),
        Command::Diversity(s) => (
            "diversity",
            commands::DIVERSITY,
            &s.args,
            commands::diversity,
        ),
        Command::Baseline(BaselineCommand::Fit(s)) => (
            "baseline fit",
            commands::BASELINE_FIT,
            &s.args,
            commands::baseline_fit,
        ),
        Command::Baseline(BaselineCommand::Sample(s)) => (
            "baseline sample",
            commands::BASELINE_SAMPLE,
            &s.args,
            commands::baseline_sample,
        ),
    };
    let result = resolve(name, schema, args).and_then(|cfg| {
        let _ = write!(err, "{cfg}");
        exec(&cfg, out, err)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
