//! Configuration, staged pipeline and command-line front end for the
//! cavity feedback-control workflow.

pub mod config;
mod error;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::PipelineConfig;
pub use error::{PipelineError, Result};
pub use pipeline::{Pipeline, Stage};

#[derive(Debug, Parser)]
#[command(
    name = "hjbpod",
    version,
    about = "Reduced-order feedback control of the lid-driven cavity"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Configuration file (flat `key = value`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory; overrides the `out` key.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// `key=value` applied after the config file; repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Uncontrolled spin-up and snapshot set.
    Simulate(StageArgs),
    /// POD basis, DEIM, steady shape functions and reduced models.
    Reduce(StageArgs),
    /// Value iteration and feedback policy.
    SolveHjb(StageArgs),
    /// Closed-loop runs and report CSVs.
    Control(StageArgs),
    /// Combined tables and quiver data.
    Report(StageArgs),
    /// All stages in order.
    RunAll(StageArgs),
}

#[derive(Debug, clap::Args)]
pub struct StageArgs {
    /// Configuration file; same as `--config`.
    pub config_file: Option<PathBuf>,
}

impl Cli {
    /// Effective configuration: file, then overrides, then `--out`.
    pub fn resolve_config(&self) -> Result<PipelineConfig> {
        let args = self.stage_args();
        let path = match (&self.config, &args.config_file) {
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config(
                    "config given both as --config and positionally".into(),
                ))
            }
            (Some(p), None) | (None, Some(p)) => Some(p),
            (None, None) => None,
        };
        let cfg = match path {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let mut cfg = cfg.with_overrides(&self.overrides)?;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }

    fn stage_args(&self) -> &StageArgs {
        match &self.command {
            Command::Simulate(a)
            | Command::Reduce(a)
            | Command::SolveHjb(a)
            | Command::Control(a)
            | Command::Report(a)
            | Command::RunAll(a) => a,
        }
    }

    pub fn execute(&self) -> Result<()> {
        let pipeline = Pipeline::new(self.resolve_config()?);
        match self.command {
            Command::Simulate(_) => pipeline.run(Stage::Simulate),
            Command::Reduce(_) => pipeline.run(Stage::Reduce),
            Command::SolveHjb(_) => pipeline.run(Stage::SolveHjb),
            Command::Control(_) => pipeline.run(Stage::Control),
            Command::Report(_) => pipeline.run(Stage::Report),
            Command::RunAll(_) => pipeline.run_all(),
        }
    }
}
