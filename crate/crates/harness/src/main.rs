use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mbmimo_harness::config::{Config, ExperimentKind, Mode};
use mbmimo_harness::experiments;
use mbmimo_harness::output::OutputDir;

#[derive(Parser)]
#[command(name = "mbmimo", version, about = "Multi-band massive MIMO array spacing and power allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON scenario file; the built-in preset is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides `seeds.master`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "MBMIMO_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config's `experiment.kind`.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "MBMIMO_THREADS")]
        threads: Option<usize>,
    },
    /// Sum rate against element spacing.
    SweepSpacing(Common),
    /// Schemes against the number of subcarriers per band.
    SweepSubcarriers(Common),
    /// Schemes against SNR.
    SweepSnr(Common),
    /// Band-wise allocation against the band power ratio.
    SweepBeta(Common),
    /// Channel gain and radiation efficiency against frequency.
    Bode(Common),
    /// Spacing optimization.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Mode::Offline)]
        mode: Mode,
    },
    /// Offline against online spacing optimization.
    CompareModes(Common),
    /// Print the preset configuration.
    Preset,
}

fn execute(kind: ExperimentKind, common: Common, mode: Option<Mode>, name: &str) -> Result<()> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::preset(),
    };
    if let Some(s) = common.seed {
        cfg.seeds.master = s;
    }
    let mut exp = cfg.experiment();
    if mode.is_some() {
        exp.mode = mode;
    }
    let outputs = experiments::outputs(kind, exp.mode.unwrap_or_default());
    let dir = OutputDir::create(&common.out, name, &cfg, &outputs, common.threads)?;
    for t in experiments::run(kind, &cfg, &exp)? {
        let path = dir.write(&t)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main_inner() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let cfg = Config::load(&config)?;
            let kind = cfg
                .experiment()
                .kind
                .context("`experiment.kind` is required by `run`")?;
            let common = Common {
                config: Some(config),
                out,
                seed,
                threads,
            };
            execute(kind, common, None, "run")
        }
        Command::SweepSpacing(c) => execute(ExperimentKind::SweepSpacing, c, None, "sweep-spacing"),
        Command::SweepSubcarriers(c) => execute(ExperimentKind::SweepSubcarriers, c, None, "sweep-subcarriers"),
        Command::SweepSnr(c) => execute(ExperimentKind::SweepSnr, c, None, "sweep-snr"),
        Command::SweepBeta(c) => execute(ExperimentKind::SweepBeta, c, None, "sweep-beta"),
        Command::Bode(c) => execute(ExperimentKind::Bode, c, None, "bode"),
        Command::Optimize { common, mode } => execute(ExperimentKind::Optimize, common, Some(mode), "optimize"),
        Command::CompareModes(c) => execute(ExperimentKind::CompareModes, c, None, "compare-modes"),
        Command::Preset => {
            println!("{}", serde_json::to_string_pretty(&Config::preset())?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
