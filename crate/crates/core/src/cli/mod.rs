//! Figure and table reproduction commands behind the `gkpmod` binary.

mod commands;
pub mod config;

pub use config::RunConfig;

use crate::error::{Error, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    FigWigner,
    FigScaling,
    FigCubic,
    Drive,
    Params,
    Release,
    Appd,
    Noise,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::FigWigner,
        Command::FigScaling,
        Command::FigCubic,
        Command::Drive,
        Command::Params,
        Command::Release,
        Command::Appd,
        Command::Noise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::FigWigner => "fig-wigner",
            Command::FigScaling => "fig-scaling",
            Command::FigCubic => "fig-cubic",
            Command::Drive => "drive",
            Command::Params => "params",
            Command::Release => "release",
            Command::Appd => "appd",
            Command::Noise => "noise",
        }
    }

    pub fn from_name(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Files written by a command and a JSON summary of its headline numbers.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub version: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub summary: serde_json::Value,
}

/// Runs `cmd`, writing its files and `manifest.json` into `out`.
pub fn run(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    cfg.check()?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("cannot create {}: {e}", out.display())))?;
    let start = Instant::now();
    let outcome = match cmd {
        Command::FigWigner => commands::fig_wigner(cfg, out),
        Command::FigScaling => commands::fig_scaling(cfg, out),
        Command::FigCubic => commands::fig_cubic(cfg, out),
        Command::Drive => commands::drive(cfg, out),
        Command::Params => commands::params(cfg, out),
        Command::Release => commands::release(cfg, out),
        Command::Appd => commands::appd(cfg, out),
        Command::Noise => commands::noise(cfg, out),
    }?;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        command: cmd.name().to_string(),
        config: cfg.clone(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: outcome.outputs.iter().map(|p| p.strip_prefix(out).unwrap_or(p).display().to_string()).collect(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        summary: outcome.summary,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(out.join(MANIFEST_FILE), json + "\n")?;
    Ok(manifest)
}
