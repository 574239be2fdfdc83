use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modelavg::audit;
use modelavg::config::ExperimentConfig;
use modelavg::experiment;
use modelavg::plan::{self, CostScale, DecayKind, TradeoffRequest};
use modelavg::CliError;
use modelavg_core::tradeoff::DecayModel;

/// Local-update model averaging experiments.
#[derive(Debug, Parser)]
#[command(name = "modelavg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write rounds.csv and run.json.
    Run(RunArgs),
    /// Optimal local step counts and cost curves; writes plan.json.
    Tradeoff(TradeoffArgs),
    /// Check the distance decrement on a run's artifacts.
    Audit(AuditArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir; default "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "1")]
    threads: NonZeroUsize,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Kind {
    Linear,
    Sublinear,
}

#[derive(Debug, Args)]
struct TradeoffArgs {
    /// JSON request; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    /// Loss power l for the sub-linear case (a = 2l - 2, β = (2l-1)/(2l-2)).
    #[arg(long, conflicts_with_all = ["a", "beta"])]
    loss_power: Option<u32>,
    /// Cost ratios C_g / C_c.
    #[arg(long = "r", value_delimiter = ',')]
    ratios: Vec<f64>,
    #[arg(long)]
    comm_cost: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    d0_sq: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    grid_max: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for interface uniformity; planning is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<NonZeroUsize>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// run.json written by `modelavg run`.
    run_json: PathBuf,
}

fn config_error(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config(modelavg::config::ConfigError {
        path: path.into(),
        message: message.into(),
    })
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = Some(out.clone());
    }
    let out_dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let base = args.config.parent().unwrap_or_else(|| Path::new("."));
    let summary = experiment::run_to_dir(&cfg, base, &out_dir, args.threads)?;
    println!(
        "{} rounds, termination {}, final grad_sq {:e}; wrote {}",
        summary.rounds_recorded,
        summary.termination.status,
        summary.final_state.grad_sq,
        out_dir.display()
    );
    Ok(())
}

fn tradeoff_request(args: &TradeoffArgs) -> Result<TradeoffRequest, CliError> {
    let mut req: Option<TradeoffRequest> = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            Some(serde_json::from_str(&text).map_err(|e| config_error("<config>", e.to_string()))?)
        }
        None => None,
    };
    let decay = match (args.kind, args.loss_power) {
        (_, Some(l)) => {
            let DecayModel::PowerLaw { a, beta } = DecayModel::for_loss_power(l)? else {
                unreachable!("loss powers map to power laws");
            };
            Some(DecayKind::Sublinear { a, beta })
        }
        (Some(Kind::Linear), None) => Some(DecayKind::Linear {
            beta: args.beta.ok_or_else(|| config_error("beta", "required for --kind linear"))?,
        }),
        (Some(Kind::Sublinear), None) => Some(DecayKind::Sublinear {
            a: args.a.ok_or_else(|| config_error("a", "required for --kind sublinear"))?,
            beta: args.beta.ok_or_else(|| config_error("beta", "required for --kind sublinear"))?,
        }),
        (None, None) => None,
    };
    let mut r = match (req.take(), decay) {
        (Some(mut r), d) => {
            if let Some(d) = d {
                r.decay = d;
            }
            r
        }
        (None, Some(d)) => TradeoffRequest {
            decay: d,
            ratios: Vec::new(),
            cost: CostScale::default(),
            grid_max: 10_000,
            grid_points: 40,
        },
        (None, None) => return Err(config_error("kind", "give --kind, --loss-power or --config")),
    };
    if !args.ratios.is_empty() {
        r.ratios = args.ratios.clone();
    }
    if r.ratios.is_empty() {
        return Err(config_error("r", "at least one cost ratio is required"));
    }
    let c = &mut r.cost;
    c.comm_cost = args.comm_cost.unwrap_or(c.comm_cost);
    c.nodes = args.nodes.unwrap_or(c.nodes);
    c.alpha = args.alpha.unwrap_or(c.alpha);
    c.d0_sq = args.d0_sq.unwrap_or(c.d0_sq);
    c.epsilon = args.epsilon.unwrap_or(c.epsilon);
    r.grid_max = args.grid_max.unwrap_or(r.grid_max);
    Ok(r)
}

fn cmd_tradeoff(args: TradeoffArgs) -> Result<(), CliError> {
    let req = tradeoff_request(&args)?;
    let plan = plan::plan(&req)?;
    let json = serde_json::to_string_pretty(&plan).expect("plan serializes") + "\n";
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            let path = dir.join("plan.json");
            fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
        }
        None => print!("{json}"),
    }
    for e in &plan.entries {
        eprintln!(
            "r = {}: T* = {:.6} (numeric {:.6}, integer {}), residual {:e}",
            e.r, e.t_star, e.t_star_numeric, e.t_star_rounded, e.stationarity_residual
        );
    }
    Ok(())
}

fn cmd_audit(args: AuditArgs) -> Result<(), CliError> {
    let report = audit::audit_run(&args.run_json)?;
    for v in &report.violations {
        println!("violation at round {}: lhs {:e} < rhs {:e}", v.round, v.lhs, v.rhs);
    }
    println!(
        "{} rounds checked, {} violations",
        report.rounds_checked,
        report.violations.len()
    );
    report.into_result().map(|_| ())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Tradeoff(a) => cmd_tradeoff(a),
        Command::Audit(a) => cmd_audit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
