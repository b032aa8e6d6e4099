use std::path::PathBuf;
use std::process::ExitCode;

use choicebandit::bounds::check_bounds;
use choicebandit::output::emit_all;
use choicebandit::{presets, run_experiment, verify, ExperimentConfig, Format, HarnessError, Overrides};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "choicebandit", version, about = "Simulate GNL bandit and online-learning algorithms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// List or run the built-in experiments
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Run the invariant and bound checks
    Verify,
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Run {
        name: String,
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Args)]
struct RunOpts {
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Cap replications at 200
    #[arg(long)]
    fast: bool,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Svg,
    Both,
}

impl RunOpts {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            fast: self.fast,
            out: self.out.clone(),
            formats: self.format.map(|f| match f {
                FormatArg::Csv => vec![Format::Csv],
                FormatArg::Svg => vec![Format::Svg],
                FormatArg::Both => vec![Format::Csv, Format::Svg],
            }),
        }
    }
}

fn execute(mut cfg: ExperimentConfig, opts: &RunOpts) -> Result<(), HarnessError> {
    cfg.apply(&opts.overrides());
    if opts.threads == Some(0) {
        return Err(HarnessError::Config("--threads must be at least 1".into()));
    }
    let result = run_experiment(&cfg, opts.threads)?;
    for v in &result.variants {
        println!(
            "{:<14} {}={:<8} average reward {:.4}  optimal action {:.4}  min sampled p {:.2e}",
            v.name, v.rate_name, v.rate, v.total_average_reward, v.mean_pct_optimal, v.min_sampled_probability
        );
    }
    for b in check_bounds(&result) {
        println!(
            "bound {:<10} regret {:.3} (se {:.3}) <= {:.3}: {}",
            b.variant,
            b.mean_regret,
            b.regret_se,
            b.bound,
            if b.holds { "ok" } else { "VIOLATED" }
        );
    }
    for p in emit_all(&cfg, &result)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, opts } => ExperimentConfig::load(&config).and_then(|cfg| execute(cfg, &opts)),
        Command::Presets { action: PresetAction::List } => {
            for c in presets::preset_experiments() {
                println!("{:<22} T={:<5} B={:<5} variants: {}", c.name, c.steps, c.replications,
                    c.variants.iter().map(|v| v.name.as_str()).collect::<Vec<_>>().join(", "));
            }
            Ok(())
        }
        Command::Presets { action: PresetAction::Run { name, opts } } => match presets::preset(&name) {
            Some(cfg) => execute(cfg, &opts),
            None => Err(HarnessError::Config(format!("unknown preset '{name}'"))),
        },
        Command::Verify => {
            let checks = verify::run_all();
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                return ExitCode::from(3);
            }
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ HarnessError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
