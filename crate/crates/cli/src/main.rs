use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use workbench::bell::behavior::Behavior;
use workbench_cli::bell::{self, ModelName};
use workbench_cli::{
    configure_threads, emit, load_config, render, sg, with_envelope, CliError, CliResult, Overrides,
};

#[derive(Parser)]
#[command(name = "workbench", version, about = "Pilot-wave spin measurement and Bell workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stern-Gerlach scenarios.
    #[command(subcommand)]
    Sg(SgCommand),
    /// Two-particle local hidden-variable laboratory.
    #[command(subcommand)]
    Bell(BellCommand),
}

#[derive(Args)]
struct Common {
    /// TOML scenario file; every missing field takes its default.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Embed wall-clock runtime in the report.
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum SgCommand {
    /// One device along z on a sampled ensemble.
    Run {
        #[command(flatten)]
        common: Common,
        /// Preparation angle from the device axis, degrees.
        #[arg(long)]
        theta: Option<f64>,
        /// Directory for snapshot and trajectory CSV files.
        #[arg(long)]
        emit_plots: Option<PathBuf>,
    },
    /// Two partitions of one hidden sample and their intersection table.
    Partitions {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta_a: f64,
        #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
        theta_b: f64,
        #[arg(long)]
        emit_plots: Option<PathBuf>,
    },
    /// Two devices in succession.
    Sequential {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        first: f64,
        #[arg(long, default_value_t = 45.0, allow_negative_numbers = true)]
        second: f64,
        /// Also run the reverse order and report the difference.
        #[arg(long)]
        both_orders: bool,
    },
}

#[derive(Subcommand)]
enum BellCommand {
    /// Correlations and CHSH values of a named model.
    Chsh {
        #[arg(long, default_value = "singlet")]
        model: ModelName,
        /// Four angles a a' b b' in degrees.
        #[arg(long, num_args = 4, default_values_t = [0.0, 90.0, 45.0, 135.0], allow_negative_numbers = true)]
        angles: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Exhaustive maximum over the 16 deterministic strategies.
    Bound {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// E(θ) of the sphere model against −1 + 2θ/π.
    Toy {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Number of intervals on [0°, 180°].
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Joint-distribution feasibility of a behavior.
    Fine {
        /// Behavior JSON file.
        #[arg(long, conflicts_with_all = ["singlet", "scan"])]
        behavior: Option<PathBuf>,
        /// Use the analytic singlet behavior at --angles.
        #[arg(long)]
        singlet: bool,
        #[arg(long, num_args = 4, default_values_t = [0.0, 90.0, 45.0, 135.0], allow_negative_numbers = true)]
        angles: Vec<f64>,
        /// Run the randomized equivalence scan over this many behaviors.
        #[arg(long)]
        scan: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
}

fn overrides(c: &Common, theta: Option<f64>) -> Overrides {
    Overrides {
        seed: c.seed,
        samples: c.samples,
        theta_deg: theta,
    }
}

fn four(v: &[f64]) -> [f64; 4] {
    [v[0], v[1], v[2], v[3]]
}

fn finish<R: Serialize>(report: &R, out: Option<&std::path::Path>) -> CliResult<()> {
    emit(&render(report)?, out)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sg(cmd) => match cmd {
            SgCommand::Run {
                common,
                theta,
                emit_plots,
            } => {
                let cfg = load_config(common.config.as_deref(), overrides(&common, theta))?;
                let r = with_envelope("sg run", Some(&cfg), None, common.timing, || {
                    sg::sg_run(&cfg, emit_plots.as_deref())
                })?;
                finish(&r, common.out.as_deref())
            }
            SgCommand::Partitions {
                common,
                theta_a,
                theta_b,
                emit_plots,
            } => {
                let cfg = load_config(common.config.as_deref(), overrides(&common, None))?;
                let r = with_envelope("sg partitions", Some(&cfg), None, common.timing, || {
                    sg::sg_partitions(&cfg, theta_a, theta_b, emit_plots.as_deref())
                })?;
                finish(&r, common.out.as_deref())
            }
            SgCommand::Sequential {
                common,
                first,
                second,
                both_orders,
            } => {
                let cfg = load_config(common.config.as_deref(), overrides(&common, None))?;
                let r = with_envelope("sg sequential", Some(&cfg), None, common.timing, || {
                    sg::sg_sequential(&cfg, first, second, both_orders)
                })?;
                finish(&r, common.out.as_deref())
            }
        },
        Command::Bell(cmd) => match cmd {
            BellCommand::Chsh {
                model,
                angles,
                samples,
                seed,
                out,
                timing,
            } => {
                let r = with_envelope("bell chsh", None, Some(seed), timing, || {
                    bell::bell_chsh(model, four(&angles), samples, seed)
                })?;
                finish(&r, out.as_deref())
            }
            BellCommand::Bound { out, timing } => {
                let r = with_envelope("bell bound", None, None, timing, || Ok(bell::bell_bound()))?;
                finish(&r, out.as_deref())
            }
            BellCommand::Toy {
                samples,
                seed,
                points,
                out,
                timing,
            } => {
                let r = with_envelope("bell toy", None, Some(seed), timing, || {
                    bell::bell_toy(samples, seed, points)
                })?;
                finish(&r, out.as_deref())
            }
            BellCommand::Fine {
                behavior,
                singlet,
                angles,
                scan,
                seed,
                out,
                timing,
            } => {
                if let Some(n) = scan {
                    let r = with_envelope("bell fine", None, Some(seed), timing, || bell::bell_fine_scan(n, seed))?;
                    return finish(&r, out.as_deref());
                }
                let b = match (behavior, singlet) {
                    (Some(p), _) => bell::read_behavior(&p)?,
                    (None, true) => Behavior::singlet(four(&angles)),
                    (None, false) => {
                        return Err(CliError::invalid("bell fine needs --behavior, --singlet or --scan"))
                    }
                };
                let r = with_envelope("bell fine", None, None, timing, || bell::bell_fine(b))?;
                finish(&r, out.as_deref())
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
