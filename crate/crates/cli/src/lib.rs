//! Command-line front end: argument parsing, config loading and dispatch.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gccrop::Method;

pub use config::{Command, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "gccrop",
    version,
    about = "Gaussian-centered crop sampling, analytics and contrastive pretraining"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Cmd,
}

/// Flags shared by every subcommand. Scalar flags override the config file.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// JSON run configuration; defaults are used for anything it omits.
    #[arg(long, global = true, env = "GCCROP_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// For `sweep`, replaces the alpha grid with this single value.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// For `sweep`, replaces the crop-size grid with this single value.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub crop_size: Option<f64>,
    /// For `sweep`, replaces the method grid with this single method.
    #[arg(long, global = true)]
    pub method: Option<Method>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Sample one set of views from an image and write the rects and crops.
    DemoCrops {
        /// Binary PPM input; the first dataset image when omitted.
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Geometry statistics and false-positive rate for one cropper.
    Stats,
    /// Grid sweep over methods, alphas, crop sizes and seeds.
    Sweep,
    /// Contrastive pretraining; writes the encoder and its loss curve.
    Pretrain,
    /// Linear evaluation of a saved (or untrained) encoder.
    LinearEval {
        #[arg(long)]
        encoder: Option<PathBuf>,
    },
}

impl Cmd {
    pub fn kind(&self) -> Command {
        match self {
            Cmd::DemoCrops { .. } => Command::DemoCrops,
            Cmd::Stats => Command::Stats,
            Cmd::Sweep => Command::Sweep,
            Cmd::Pretrain => Command::Pretrain,
            Cmd::LinearEval { .. } => Command::LinearEval,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// The config is unusable; nothing was run or written.
    Invalid(Vec<String>),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Run(e)
    }
}

/// Read the config file (if any) and apply flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let o = &cli.overrides;
    let mut cfg = match &o.config {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| {
                CliError::Invalid(vec![format!(
                    "invalid config: cannot read {}: {e}",
                    path.display()
                )])
            })?;
            serde_json::from_slice::<RunConfig>(&bytes).map_err(|e| {
                CliError::Invalid(vec![format!("invalid config {}: {e}", path.display())])
            })?
        }
        None => RunConfig::default(),
    };
    let sweeping = matches!(cli.command, Cmd::Sweep);
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(p) = &o.out {
        cfg.out_dir = p.clone();
    }
    if let Some(a) = o.alpha {
        cfg.cropper.alpha = a;
        if sweeping {
            cfg.sweep.alphas = vec![a];
        }
    }
    if let Some(c) = o.crop_size {
        cfg.cropper.crop_size = c;
        if sweeping {
            cfg.sweep.crop_sizes = vec![c];
        }
    }
    if let Some(m) = o.method {
        cfg.cropper.method = m;
        if sweeping {
            cfg.sweep.methods = vec![m];
        }
    }
    if let Some(t) = o.tau {
        cfg.train.tau = t;
    }
    if let Some(e) = o.epochs {
        cfg.train.epochs = e;
    }
    match &cli.command {
        Cmd::DemoCrops { image: Some(p) } => cfg.demo_image = Some(p.clone()),
        Cmd::LinearEval { encoder: Some(p) } => cfg.encoder = Some(p.clone()),
        _ => {}
    }
    Ok(cfg)
}

/// Validate and run; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = resolve_config(cli)?;
    let kind = cli.command.kind();
    let diagnostics = cfg.diagnostics(kind);
    if !diagnostics.is_empty() {
        return Err(CliError::Invalid(diagnostics));
    }
    let written = match kind {
        Command::DemoCrops => commands::demo_crops(&cfg),
        Command::Stats => commands::stats(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Pretrain => commands::pretrain_cmd(&cfg),
        Command::LinearEval => commands::linear_eval_cmd(&cfg),
    }
    .with_context(|| format!("{kind:?} failed"))?;
    Ok(written)
}
