use std::path::PathBuf;
use std::process::ExitCode;

use assured_ddf::ddf::FusionMode;
use assured_ddf::harness::{cmd_simulate, cmd_sweep, with_ospa_variant, RunManifest, SweepAxis};
use assured_ddf::metrics::OspaVariant;
use assured_ddf::par::Execution;
use assured_ddf::scenario::ScenarioConfig;
use assured_ddf::sim::Pipeline;
use assured_ddf::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Assured distributed data fusion simulator.
#[derive(Parser)]
#[command(name = "addf", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run seeded episodes and write frame logs and metrics per trial.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Skip the per-frame NDJSON logs.
        #[arg(long)]
        no_frames: bool,
    },
    /// Sweep one scenario parameter, comparing trust on and off.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values in [0, 1].
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    trust: Toggle,
    #[arg(long, value_enum, default_value_t = Fusion::Trust)]
    fusion: Fusion,
    #[arg(long = "ospa-variant", value_enum)]
    ospa_variant: Option<Variant>,
    #[arg(long)]
    out: PathBuf,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    force: bool,
    /// Run trials one at a time.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fusion {
    Plain,
    Trust,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Paper,
    Standard,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Density,
    AttackedFraction,
}

impl RunArgs {
    fn manifest(&self) -> Result<(RunManifest, Execution), Error> {
        let mut config = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(v) = self.ospa_variant {
            config = with_ospa_variant(
                config,
                match v {
                    Variant::Paper => OspaVariant::Paper,
                    Variant::Standard => OspaVariant::Standard,
                },
            );
        }
        let pipeline = Pipeline {
            trust_enabled: matches!(self.trust, Toggle::On),
            fusion_mode: match self.fusion {
                Fusion::Plain => FusionMode::Plain,
                Fusion::Trust => FusionMode::TrustWeighted,
            },
        };
        let manifest = RunManifest {
            config_path: self.config.clone(),
            config,
            seed: self.seed,
            trials: self.trials,
            pipeline,
            out: self.out.clone(),
            force: self.force,
        };
        let exec = if self.sequential { Execution::Sequential } else { Execution::Parallel };
        Ok((manifest, exec))
    }
}

fn fmt(s: assured_ddf::harness::Stat) -> String {
    format!("{:.4} ± {:.4}", s.mean, s.std)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Simulate { run, no_frames } => {
            let (m, exec) = run.manifest()?;
            let rec = cmd_simulate(&m, exec, !no_frames)?;
            let a = &rec.aggregate;
            println!("digest    {}", rec.manifest_digest);
            println!("trials    {}", rec.trials.len());
            println!("precision {}", fmt(a.precision));
            println!("recall    {}", fmt(a.recall));
            println!("f1        {}", fmt(a.f1));
            println!("ospa      {}", fmt(a.ospa));
            println!("track trust accuracy {}", fmt(a.track_trust_accuracy));
            println!("agent trust accuracy {}", fmt(a.agent_trust_accuracy));
            println!("outputs in {}", m.out.display());
        }
        Cmd::Sweep { run, axis, values } => {
            let (m, exec) = run.manifest()?;
            let axis = match axis {
                Axis::Density => SweepAxis::Density,
                Axis::AttackedFraction => SweepAxis::AttackedFraction,
            };
            let rows = cmd_sweep(&m, axis, &values, exec)?;
            println!("{:>8} {:>10} {:>18} {:>18} {:>18}", "value", "variant", "precision", "f1", "agent trust acc");
            for r in rows {
                println!(
                    "{:>8} {:>10} {:>18} {:>18} {:>18}",
                    r.value,
                    r.variant,
                    fmt(r.stats.precision),
                    fmt(r.stats.f1),
                    fmt(r.stats.agent_trust_accuracy)
                );
            }
            println!("outputs in {}", m.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config { .. }) { 2 } else { 1 })
        }
    }
}
