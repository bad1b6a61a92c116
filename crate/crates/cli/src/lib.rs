//! Command-line front end: argument parsing, configuration merging, error
//! records and run manifests. The `kinema` binary is a thin wrapper around
//! [`run`].

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "kinema",
    version,
    about = "Kinematic 4D control signals for robot video generation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct CommandArgs {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand actions into joint configurations and per-link poses.
    Fk(CommandArgs),
    /// Solve inverse kinematics for one target pose.
    Ik(CommandArgs),
    /// Render pointmaps, occupancy and soft masks (optionally perturbed).
    Project(CommandArgs),
    /// Prepare normalized, pseudo-RGB and width-concatenated signals.
    Signal(CommandArgs),
    /// Perturb an existing pointmap tensor.
    Perturb(CommandArgs),
    /// Curate raw episode directories into fixed-length episodes.
    Curate(CommandArgs),
    /// Compute geometric, image and policy metrics.
    Eval(CommandArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fk(_) => "fk",
            Command::Ik(_) => "ik",
            Command::Project(_) => "project",
            Command::Signal(_) => "signal",
            Command::Perturb(_) => "perturb",
            Command::Curate(_) => "curate",
            Command::Eval(_) => "eval",
        }
    }

    fn args(&self) -> &CommandArgs {
        match self {
            Command::Fk(a)
            | Command::Ik(a)
            | Command::Project(a)
            | Command::Signal(a)
            | Command::Perturb(a)
            | Command::Curate(a)
            | Command::Eval(a) => a,
        }
    }
}

/// Runs one parsed command and writes the output manifest.
pub fn execute(command: &Command) -> Result<String, CliError> {
    let args = command.args();
    let cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?.merged(args.run.clone()),
        None => args.run.clone(),
    };
    if let Some(jobs) = cfg.jobs {
        // ignored when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let summary = match command {
        Command::Fk(_) => commands::cmd_fk(&cfg)?,
        Command::Ik(_) => commands::cmd_ik(&cfg)?,
        Command::Project(_) => commands::cmd_project(&cfg)?,
        Command::Signal(_) => commands::cmd_signal(&cfg)?,
        Command::Perturb(_) => commands::cmd_perturb(&cfg)?,
        Command::Curate(_) => commands::cmd_curate(&cfg)?,
        Command::Eval(_) => commands::cmd_eval(&cfg)?,
    };
    if let Some(out) = &cfg.output {
        if out.is_dir() {
            manifest::write_manifest(out, command.name(), &cfg)?;
        }
    }
    Ok(summary)
}

/// Parses `args`, runs the command and returns the process exit code.
/// Results go to stdout; failures go to stderr as one JSON record.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            if code != EXIT_OK {
                eprintln!("{}", CliError::Usage(e.kind().to_string()).record());
            }
            return code;
        }
    };
    let outcome = std::panic::catch_unwind(|| execute(&cli.command)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".to_string());
        Err(CliError::Internal(msg))
    });
    match outcome {
        Ok(summary) => {
            if !summary.is_empty() {
                println!("{summary}");
            }
            EXIT_OK
        }
        Err(e) => {
            log::debug!("{e}");
            eprintln!("{}", e.record());
            e.exit_code()
        }
    }
}
