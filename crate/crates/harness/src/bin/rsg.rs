use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rsg_core::analysis::check_conditions;
use rsg_core::equilibria::{solve_nse_with, solve_rse1_with, solve_rse2_with};
use rsg_core::{aggregate_impact, robust_waterfill, waterfill, ActionProfile, UncertaintySpec};
use rsg_harness::channels::Scenario;
use rsg_harness::config::OutputFormat;
use rsg_harness::experiment::{run_experiment, write_cdf};
use rsg_harness::heuristic::{heuristic_leader_selection, Selection};
use rsg_harness::montecarlo::monte_carlo_cdf;
use rsg_harness::{ExperimentConfig, HarnessError, Result};

#[derive(Parser)]
#[command(
    name = "rsg",
    version,
    about = "Robust Stackelberg equilibria for power-control games"
)]
struct Cli {
    /// JSON experiment configuration; defaults to a fixed two-player example.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `csv` or `csv+svg`.
    #[arg(long, global = true)]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    S1,
    S2,
    S3,
    None,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::S1 => Scenario::S1,
            ScenarioArg::S2 => Scenario::S2,
            ScenarioArg::S3 => Scenario::S3,
            ScenarioArg::None => Scenario::None,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Nominal Stackelberg equilibrium of instance 0.
    Nse,
    /// Equilibrium with followers planning against noisy observations.
    Rse1 {
        #[arg(long)]
        eps: f64,
    },
    /// Equilibrium with a leader unsure of its gains towards the followers.
    Rse2 {
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
    /// Conditions and regimes at the NSE of instance 0.
    Conditions,
    /// All grid points over the whole ensemble.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        eps_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        delta_grid: Option<Vec<f64>>,
    },
    /// CDF of the follower's relative utility change over a filtered ensemble.
    Montecarlo {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
    },
    /// Leader selection among several leaders of instance 0.
    Heuristic {
        /// Information radius per leader, comma separated; one value is used for all.
        #[arg(long, value_delimiter = ',', default_value = "0.01")]
        delta: Vec<f64>,
    },
    /// Budgeted best response of player 0 against silence, nominal and robust.
    WaterfillDemo {
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
}

fn load(cli: &Cli, montecarlo: Option<Scenario>) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, montecarlo) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(s)) => ExperimentConfig::budgeted_study(s),
        (None, None) => ExperimentConfig::example(),
    };
    if let Some(s) = montecarlo {
        cfg.scenario = s;
    }
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(f) = &cli.format {
        cfg.output.format = OutputFormat::parse(f)
            .ok_or_else(|| HarnessError::Config(format!("unknown format {f:?}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Nse => {
            let cfg = load(&cli, None)?;
            let spec = cfg.instance(0)?;
            print_json(&solve_nse_with(&spec, &cfg.solver, None)?)
        }
        Command::Rse1 { eps } => {
            let cfg = load(&cli, None)?;
            let spec = cfg.instance(0)?;
            let u = UncertaintySpec::uniform(&spec, *eps, 0.0);
            print_json(&solve_rse1_with(&spec, &u, &cfg.solver, None)?)
        }
        Command::Rse2 { delta, eps } => {
            let cfg = load(&cli, None)?;
            let spec = cfg.instance(0)?;
            let u = UncertaintySpec::uniform(&spec, *eps, *delta);
            for w in u.validate(&spec)? {
                log::warn!("{w}");
            }
            print_json(&solve_rse2_with(&spec, &u, &cfg.solver, None)?)
        }
        Command::Conditions => {
            let cfg = load(&cli, None)?;
            let spec = cfg.instance(0)?;
            let nse = solve_nse_with(&spec, &cfg.solver, None)?;
            print_json(&check_conditions(&spec, &nse)?)
        }
        Command::Sweep {
            eps_grid,
            delta_grid,
        } => {
            let mut cfg = load(&cli, None)?;
            if let Some(g) = eps_grid {
                cfg.eps_grid = g.clone();
            }
            if let Some(g) = delta_grid {
                cfg.delta_grid = g.clone();
            }
            cfg.validate()?;
            let out = run_experiment(&cfg)?;
            print!("{}", out.summary.table());
            println!("wrote {}", out.csv.display());
            for p in &out.svg {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Montecarlo { scenario } => {
            let cfg = load(&cli, Some((*scenario).into()))?;
            let report = monte_carlo_cdf(&cfg)?;
            println!(
                "scenario {:?}: {} instances, {} excluded, fraction with d_{} > 0: {:.4}",
                cfg.scenario,
                report.total,
                report.excluded.len(),
                report.player,
                report.positive_fraction
            );
            for p in write_cdf(&cfg.output.dir, &report, cfg.output.format)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Heuristic { delta } => {
            let cfg = load(&cli, None)?;
            let spec = cfg.instance(0)?;
            let nl = spec.leaders().len();
            let radii = if delta.len() == 1 {
                vec![delta[0]; nl]
            } else {
                delta.clone()
            };
            match heuristic_leader_selection(&spec, &radii, &cfg.solver)? {
                Selection::Selected(plan) => {
                    let outcome = plan.execute(&cfg.solver)?;
                    println!("selected leader {}", plan.leader);
                    println!(
                        "utility of the other players: NSE {:.6}, RSE2 {:.6}",
                        outcome.others_nse, outcome.others_rse2
                    );
                    print_json(&outcome)
                }
                Selection::NoEligibleLeader => {
                    println!("no leader satisfies the selection conditions");
                    Ok(())
                }
            }
        }
        Command::WaterfillDemo { eps } => {
            let cfg = load(&cli, None)?;
            let spec = cfg.instance(0)?;
            let budget = spec
                .budget(0)
                .unwrap_or_else(|| spec.action_max[0].iter().sum::<f64>() / 2.0);
            let silent = ActionProfile::at_min(&spec);
            let f = aggregate_impact(&spec, &silent, 0)?;
            let nominal = waterfill(&spec, 0, &f, budget)?;
            let robust = robust_waterfill(&spec, 0, &f, *eps, budget)?;
            println!("budget {budget}");
            println!(
                "{:>4} {:>12} {:>12} {:>12}",
                "dim", "impact", "nominal", "robust"
            );
            for k in 0..spec.n_dims() {
                println!(
                    "{k:>4} {:>12.6} {:>12.6} {:>12.6}",
                    f.values[k], nominal[k], robust[k]
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
