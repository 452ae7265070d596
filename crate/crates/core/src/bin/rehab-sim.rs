use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rehab_ilc::cli::{self, CliError, ConfigSource};
use rehab_ilc::config::parse_seed_list;
use rehab_ilc::narx::NetworkVariant;

#[derive(Parser)]
#[command(
    name = "rehab-sim",
    version,
    about = "Adaptive task-difficulty rehabilitation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Paper,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration document
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

impl ConfigArgs {
    fn source(&self) -> ConfigSource {
        match (&self.config, self.preset) {
            (Some(p), _) => ConfigSource::File(p.clone()),
            (None, _) => ConfigSource::PaperPreset,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and print its hash
    ValidateConfig(ConfigArgs),
    /// Pre-train one healthy network on the ultimate task
    Pretrain {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<NetworkVariant>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Remove hidden nodes from a saved network
    Lesion {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-layer removal counts, e.g. `2,1`
        #[arg(long, value_delimiter = ',')]
        removals: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every scenario of the configuration
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Seed override: `0..4` (inclusive), `1,5,9` or `7`
        #[arg(long, value_parser = parse_seeds)]
        seeds: Option<SeedList>,
        /// Worker threads (default: all cores)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Export plot-ready CSVs from summary.json files
    Figures {
        summaries: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Seed whose trace feeds the error-versus-amplitude file
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_variant(s: &str) -> Result<NetworkVariant, String> {
    match s.to_ascii_lowercase().as_str() {
        "narx1" => Ok(NetworkVariant::Narx1),
        "narx2" => Ok(NetworkVariant::Narx2),
        _ => Err(format!("unknown variant `{s}` (narx1 or narx2)")),
    }
}

#[derive(Clone)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    parse_seed_list(s).map(SeedList)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ValidateConfig(c) => {
            let hash = cli::cmd_validate_config(&c.source())?;
            println!("config ok, hash {hash}");
        }
        Command::Pretrain {
            config,
            out,
            variant,
            seed,
        } => {
            let o = cli::cmd_pretrain(&config.source(), &out, variant, seed)?;
            println!("wrote {}", o.network.display());
            println!("wrote {}", o.report.display());
        }
        Command::Lesion {
            network,
            out,
            removals,
            seed,
        } => {
            let p = cli::cmd_lesion(&network, &out, removals, seed)?;
            println!("wrote {}", p.display());
        }
        Command::Run {
            config,
            out,
            seeds,
            jobs,
        } => {
            let r = cli::cmd_run(&config.source(), &out, seeds.map(|s| s.0), jobs)?;
            for o in &r.outcomes {
                let last = o.stats.per_trial.last();
                println!(
                    "{:<24} seeds {:>3}  failed {:>3}  final amplitude {:.4}  final error {:.4}",
                    o.scenario,
                    o.sessions.len(),
                    o.failures.len(),
                    last.map_or(f64::NAN, |t| t.amplitude_mean),
                    last.map_or(f64::NAN, |t| t.error_mean),
                );
            }
            println!("wrote {}", out.join("manifest.json").display());
        }
        Command::Figures {
            summaries,
            out,
            seed,
        } => {
            let f = cli::cmd_figures(&summaries, &out, seed)?;
            for p in [f.error_vs_trial, f.amplitude_vs_trial, f.error_vs_amplitude] {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
