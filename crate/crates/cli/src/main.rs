//! `txtrack`: trace simulation, accuracy estimation, allocation, certificate
//! verification and the two experiment suites from the command line.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 when a
//! run fails.

mod args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use txtrack_core::experiments::{
    self, params_hash, ExperimentConfig, ExperimentError, ExperimentKind, NamedQueue,
};
use txtrack_core::queue_sim::{busy_periods, Discipline, QueueSpec};
use txtrack_core::seed::rng_for;
use txtrack_core::stochastics::DistributionSpec;
use txtrack_core::Policy;

#[derive(Parser)]
#[command(
    name = "txtrack",
    version,
    about = "Transaction tracking through queues from timestamps alone"
)]
struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: results/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment config file, TOML or JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Largest busy period scored by the matching policies.
    #[arg(long, global = true)]
    cap: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one queue and write its trace with ground truth.
    Simulate {
        #[command(flatten)]
        queue: QueueArgs,
        #[arg(long, default_value_t = 1000)]
        transactions: usize,
    },
    /// Estimate the tracking accuracy of one queue.
    Accuracy {
        #[command(flatten)]
        queue: QueueArgs,
        #[arg(long, default_value = "fifo")]
        policy: Policy,
        #[arg(long, default_value = "q0")]
        id: String,
        #[command(flatten)]
        reps: Reps,
    },
    /// Estimate accuracies of a roster and compare allocation strategies.
    Allocate {
        /// Queue as ID=ARRIVAL/SERVICE, optionally followed by /ps for
        /// processor sharing; repeatable. Ignored with --config.
        #[arg(long = "queue")]
        queues: Vec<String>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        policy: Option<Policy>,
        #[command(flatten)]
        reps: Reps,
    },
    /// Check the optimality certificates over a roster of queue pairs.
    Verify {
        #[command(flatten)]
        reps: Reps,
    },
    /// Run one of the experiment suites.
    Experiment {
        suite: Suite,
        #[command(flatten)]
        reps: Reps,
        /// Number of random rosters (fig6 only).
        #[arg(long)]
        configs: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Fig5,
    Fig6,
}

#[derive(Args)]
struct QueueArgs {
    /// Inter-arrival law: exp:RATE, weibull:SHAPE,SCALE, uniform:LOW,HIGH,
    /// det:VALUE or a JSON literal.
    #[arg(long, value_parser = args::parse_distribution)]
    arrival: DistributionSpec,
    /// Service (or job-length) law, same forms as --arrival.
    #[arg(long, value_parser = args::parse_distribution)]
    service: DistributionSpec,
    #[arg(long, value_parser = args::parse_discipline, default_value = "infinite-server")]
    discipline: Discipline,
}

#[derive(Args)]
struct Reps {
    /// Transactions per run.
    #[arg(long)]
    transactions: Option<usize>,
    /// Independent runs.
    #[arg(long)]
    runs: Option<usize>,
}

/// A failure and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Self {
            code: if e.is_config() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(
    cli: &Cli,
    expected: &[ExperimentKind],
) -> Result<Option<ExperimentConfig>, Failure> {
    let Some(path) = &cli.config else {
        return Ok(None);
    };
    let cfg = ExperimentConfig::load(path).map_err(|e| Failure::usage(e.to_string()))?;
    if !expected.contains(&cfg.kind) {
        let names: Vec<&str> = expected.iter().map(|k| k.label()).collect();
        return Err(Failure::usage(format!(
            "{} has kind `{}`, this command expects {}",
            path.display(),
            cfg.kind.label(),
            names.join(" or ")
        )));
    }
    Ok(Some(cfg))
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>, name: &str) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| Path::new("results").join(name))
}

fn apply_globals(cli: &Cli, cfg: &mut ExperimentConfig) {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(cap) = cli.cap {
        cfg.cap = cap;
    }
}

fn set(slot: &mut usize, value: Option<usize>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run_experiment(
    cli: &Cli,
    mut cfg: ExperimentConfig,
    name: &str,
) -> Result<Vec<PathBuf>, Failure> {
    apply_globals(cli, &mut cfg);
    let dir = out_dir(cli, Some(&cfg), name);
    Ok(experiments::run(&cfg, &dir, cli.jobs)?.files)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    let Format::Csv = cli.format;
    if cli.jobs == Some(0) {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    match &cli.command {
        Command::Simulate {
            queue,
            transactions,
        } => simulate(&cli, queue, *transactions),
        Command::Accuracy {
            queue,
            policy,
            id,
            reps,
        } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Custom);
            cfg.custom.budget = 0;
            cfg.custom.policy = *policy;
            cfg.custom.queues = vec![NamedQueue::new(
                id,
                queue.arrival,
                queue.service,
                queue.discipline,
            )];
            set(&mut cfg.custom.transactions, reps.transactions);
            set(&mut cfg.custom.runs, reps.runs);
            run_experiment(&cli, cfg, "accuracy")
        }
        Command::Allocate {
            queues,
            budget,
            policy,
            reps,
        } => {
            let mut cfg = match load_config(&cli, &[ExperimentKind::Custom])? {
                Some(cfg) => cfg,
                None => {
                    if queues.is_empty() {
                        return Err(Failure::usage(
                            "allocate needs --queue entries or a custom --config",
                        ));
                    }
                    let mut cfg = ExperimentConfig::new(ExperimentKind::Custom);
                    cfg.custom.queues = queues
                        .iter()
                        .map(|q| args::parse_queue(q))
                        .collect::<Result<_, _>>()
                        .map_err(Failure::usage)?;
                    cfg
                }
            };
            set(&mut cfg.custom.budget, *budget);
            if let Some(p) = policy {
                cfg.custom.policy = *p;
            }
            set(&mut cfg.custom.transactions, reps.transactions);
            set(&mut cfg.custom.runs, reps.runs);
            run_experiment(&cli, cfg, "allocate")
        }
        Command::Verify { reps } => {
            let mut cfg = load_config(&cli, &[ExperimentKind::VerifyOrder])?
                .unwrap_or_else(|| ExperimentConfig::new(ExperimentKind::VerifyOrder));
            set(&mut cfg.verify.transactions, reps.transactions);
            set(&mut cfg.verify.runs, reps.runs);
            run_experiment(&cli, cfg, "verify")
        }
        Command::Experiment {
            suite,
            reps,
            configs,
        } => {
            let kind = match suite {
                Suite::Fig5 => ExperimentKind::Fig5,
                Suite::Fig6 => ExperimentKind::Fig6,
            };
            let mut cfg =
                load_config(&cli, &[kind])?.unwrap_or_else(|| ExperimentConfig::new(kind));
            match suite {
                Suite::Fig5 => {
                    set(&mut cfg.fig5.transactions, reps.transactions);
                    set(&mut cfg.fig5.runs, reps.runs);
                    if configs.is_some() {
                        return Err(Failure::usage("--configs applies to fig6 only"));
                    }
                }
                Suite::Fig6 => {
                    set(&mut cfg.fig6.transactions, reps.transactions);
                    set(&mut cfg.fig6.runs, reps.runs);
                    set(&mut cfg.fig6.configs, *configs);
                }
            }
            run_experiment(&cli, cfg, kind.label())
        }
    }
}

#[derive(Serialize)]
struct SimulateParams<'a> {
    command: &'static str,
    queue: &'a QueueSpec,
    transactions: usize,
    seed: u64,
}

#[derive(Serialize)]
struct TraceRow<'a> {
    config_hash: &'a str,
    seed: u64,
    index: usize,
    arrival_time: f64,
    departure_rank: usize,
    departure_time: f64,
    duration: f64,
    work: f64,
    busy_period: usize,
    period_complete: bool,
}

fn simulate(cli: &Cli, q: &QueueArgs, transactions: usize) -> Result<Vec<PathBuf>, Failure> {
    let spec = QueueSpec::new(q.arrival, q.service, q.discipline)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let seed = cli.seed.unwrap_or(42);
    let hash = params_hash(&SimulateParams {
        command: "simulate",
        queue: &spec,
        transactions,
        seed,
    });
    let trace = spec
        .simulate(transactions, &mut rng_for(seed, &[0]))
        .map_err(|e| Failure::usage(e.to_string()))?;
    let mut period = vec![(0, false); trace.len()];
    for p in busy_periods(&trace) {
        for slot in period.iter_mut().skip(p.first).take(p.size()) {
            *slot = (p.id, p.complete);
        }
    }
    let dir = out_dir(cli, None, "simulate");
    let io = |e: std::io::Error| Failure {
        code: 2,
        message: e.to_string(),
    };
    std::fs::create_dir_all(&dir).map_err(io)?;
    let path = dir.join("trace.csv");
    let csv_err = |e: csv::Error| Failure {
        code: 2,
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    for i in 0..trace.len() {
        let rank = trace.true_matching[i];
        w.serialize(TraceRow {
            config_hash: &hash,
            seed,
            index: i,
            arrival_time: trace.arrivals[i],
            departure_rank: rank,
            departure_time: trace.departures[rank],
            duration: trace.durations[i],
            work: trace.work[i],
            busy_period: period[i].0,
            period_complete: period[i].1,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    if trace.unstable_suspected {
        eprintln!("warning: occupancy grows through the whole run; the queue may be unstable");
    }
    Ok(vec![path])
}
