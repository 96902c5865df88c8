use clap::{Parser, ValueEnum};
use gkpmod::cli::{run, Command, RunConfig};
use gkpmod::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    FigWigner,
    FigScaling,
    FigCubic,
    Drive,
    Params,
    Release,
    Appd,
    Noise,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::FigWigner => Command::FigWigner,
            Cmd::FigScaling => Command::FigScaling,
            Cmd::FigCubic => Command::FigCubic,
            Cmd::Drive => Command::Drive,
            Cmd::Params => Command::Params,
            Cmd::Release => Command::Release,
            Cmd::Appd => Command::Appd,
            Cmd::Noise => Command::Noise,
        }
    }
}

/// Modular quadrature measurement simulations.
#[derive(Debug, Parser)]
#[command(name = "gkpmod", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dotted override, e.g. `--set scaling.shots=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(args: &Args) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p, &args.overrides)?,
        None => RunConfig::from_toml_str("", &args.overrides)?,
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = resolve(&args).and_then(|cfg| {
        if args.print_config {
            print!("{}", cfg.to_toml());
            return Ok(None);
        }
        run(args.command.into(), &cfg, &args.out).map(Some)
    });
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(m)) => {
            println!("{}", serde_json::to_string_pretty(&m.summary).unwrap_or_default());
            eprintln!(
                "{}: {} files in {} ({:.1} s)",
                m.command,
                m.outputs.len() + 1,
                args.out.display(),
                m.wall_clock_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = serde_json::json!({ "error": e.to_string(), "exit_code": e.exit_code() });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
