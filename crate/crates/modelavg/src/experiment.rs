//! Building problems from an [`ExperimentConfig`], running them and writing
//! `rounds.csv` / `run.json`.

use std::fs;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::time::Instant;

use modelavg_core::geometry::AffineSubspace;
use modelavg_core::linalg;
use modelavg_core::simulator::{
    self, fit_gradient_decay, LocalUpdatePolicy, Problem, SimulationRun, StepRule, StopRule,
    Termination,
};
use modelavg_core::{Beck, Objective, OptimalSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::{DataSource, ExperimentConfig, PolicyConfig, PolicyMode, ProblemConfig, StartConfig};
use crate::data::{self, SparseDataset};
use crate::error::CliError;
use crate::executor::ThreadedExecutor;
use crate::instances::QuadraticInstance;

pub const ROUNDS_FILE: &str = "rounds.csv";
pub const RUN_FILE: &str = "run.json";

/// Column names of `rounds.csv`, in order. A `reference` column follows
/// when a reference anchor is configured.
pub const ROUND_COLUMNS: [&str; 7] = [
    "round",
    "grad_sq",
    "loss",
    "dist_S",
    "decrement_lhs",
    "decrement_rhs",
    "cum_local_steps",
];

// RNG streams derived from the master seed.
const START_STREAM: u64 = 1;
const INSTANCE_STREAM: u64 = 2;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Facts derived while building the problem, echoed into `run.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemDetails {
    pub dimension: usize,
    pub start: Vec<f64>,
    pub smoothness: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Rows per node for regression problems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows_per_node: Option<Vec<usize>>,
    /// Distinct labels (at most 10) used verbatim as regression targets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_values: Option<Vec<f64>>,
    pub solution_set_known: bool,
}

pub struct Experiment {
    /// Resolved configuration.
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub start: Vec<f64>,
    pub policies: Vec<LocalUpdatePolicy>,
    pub stop: StopRule,
    pub details: ProblemDetails,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment")
            .field("config", &self.config)
            .field("details", &self.details)
            .finish_non_exhaustive()
    }
}

struct Built {
    nodes: Vec<Box<dyn Objective>>,
    solution: Option<AffineSubspace>,
    dim: usize,
    rows_per_node: Option<Vec<usize>>,
    label_values: Option<Vec<f64>>,
}

fn distinct_labels(ds: &SparseDataset) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for l in ds.labels() {
        if !out.contains(&l) {
            out.push(l);
            if out.len() == 10 {
                break;
            }
        }
    }
    out
}

fn build_regression(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    start_of: impl Fn(usize) -> Result<Vec<f64>, CliError>,
) -> Result<(Built, Vec<f64>), CliError> {
    let ProblemConfig::Regression {
        source,
        power,
        scale_features,
        shuffle_seed,
        dim,
    } = &cfg.problem
    else {
        unreachable!("called for regression problems only");
    };
    let (ds, planted) = match source {
        DataSource::Synthetic { rows, dim, seed } => {
            let s = data::synthetic_regression(*rows, *dim, seed.unwrap_or(cfg.seed));
            (s.dataset, Some(s.planted))
        }
        DataSource::File { path } => {
            let full = if path.is_absolute() {
                path.clone()
            } else {
                base_dir.join(path)
            };
            let text = fs::read_to_string(&full).map_err(|e| CliError::io(&full, e))?;
            let ds = data::parse_libsvm(&text).map_err(|e| CliError::from(data::DataError::from(e)))?;
            let ds = if *scale_features { ds.scale_features() } else { ds };
            (ds, None)
        }
    };
    let d = dim.unwrap_or(ds.max_feature_index());
    let ds = ds.with_dim(d)?;
    let m = cfg.node_count();
    let part = match shuffle_seed {
        Some(s) => data::partition_shuffled(&ds, m, *s)?,
        None => data::partition_even(&ds, m)?,
    };
    let all: Vec<usize> = (0..ds.row_count()).collect();
    let (a, b) = ds.dense_rows(&all, d)?;
    let solution = AffineSubspace::from_constraints(&a, &b).ok();
    let anchor = planted
        .clone()
        .or_else(|| solution.as_ref().map(|s| s.anchor().to_vec()));
    let start = start_of(d)?;
    let mut nodes: Vec<Box<dyn Objective>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut ls = data::to_least_squares(&ds, &part, i, *power, d)?;
        if *power > 1 {
            // Gradient steps of size <= 1/L and averaging never move
            // further from a common solution, so a ball around it through
            // the start point contains every iterate.
            let (center, radius) = match &anchor {
                Some(p) => (p.clone(), linalg::distance(p, &start)),
                None => (start.clone(), linalg::norm(&start).max(1.0)),
            };
            ls = ls.with_smoothness_region(center, radius)?;
        }
        nodes.push(Box::new(ls));
    }
    Ok((
        Built {
            nodes,
            solution,
            dim: d,
            rows_per_node: Some(part.sizes()),
            label_values: Some(distinct_labels(&ds)),
        },
        start,
    ))
}

fn sample_start(start: &StartConfig, dim: usize, seed: u64) -> Result<Vec<f64>, CliError> {
    let mut rng = rng_for(seed, START_STREAM);
    Ok(match start {
        StartConfig::Zeros => vec![0.0; dim],
        StartConfig::Point { point } => {
            if point.len() != dim {
                return Err(crate::config::ConfigError {
                    path: "start.point".into(),
                    message: format!("has {} coordinates, problem dimension is {dim}", point.len()),
                }
                .into());
            }
            point.clone()
        }
        StartConfig::Box { low, high } => (0..dim).map(|_| rng.gen_range(*low..=*high)).collect(),
        StartConfig::Gaussian { scale } => (0..dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    })
}

fn policy_for(p: &PolicyConfig, oracle: &dyn Objective) -> LocalUpdatePolicy {
    let rule = match p.mode {
        PolicyMode::Fixed => StepRule::Fixed(p.steps.expect("validated")),
        PolicyMode::Threshold => StepRule::Threshold {
            g_tol: p.g_tol.expect("validated"),
            max_steps: p.max_steps.expect("resolved"),
        },
    };
    LocalUpdatePolicy {
        rule,
        step_size: p.step_size.unwrap_or(1.0 / oracle.smoothness()),
    }
}

impl Experiment {
    /// Validates `config` and builds the problem. Relative data paths are
    /// resolved against `base_dir`.
    pub fn prepare(config: &ExperimentConfig, base_dir: &Path) -> Result<Self, CliError> {
        config.validate()?;
        let cfg = config.resolved();
        let start_cfg = cfg.start.clone().expect("resolved");
        let seed = cfg.seed;
        let (built, start) = match &cfg.problem {
            ProblemConfig::Beck => {
                let nodes: Vec<Box<dyn Objective>> =
                    Beck::pair().into_iter().map(|b| Box::new(b) as Box<dyn Objective>).collect();
                let start = sample_start(&start_cfg, 2, seed)?;
                (
                    Built {
                        nodes,
                        solution: Some(Beck::intersection()),
                        dim: 2,
                        rows_per_node: None,
                        label_values: None,
                    },
                    start,
                )
            }
            ProblemConfig::Regression { .. } => {
                build_regression(&cfg, base_dir, |d| sample_start(&start_cfg, d, seed))?
            }
            ProblemConfig::CustomQuadratic { dim, seed: inst_seed } => {
                let mut rng = rng_for(inst_seed.unwrap_or(seed), INSTANCE_STREAM);
                let inst = QuadraticInstance::random(&mut rng, cfg.node_count(), *dim)?;
                let solution = Some(inst.collection()?.intersection());
                let nodes = inst
                    .nodes
                    .iter()
                    .map(|n| Box::new(n.clone()) as Box<dyn Objective>)
                    .collect();
                let start = sample_start(&start_cfg, *dim, seed)?;
                (
                    Built {
                        nodes,
                        solution,
                        dim: *dim,
                        rows_per_node: Some(inst.nodes.iter().map(|n| n.rows()).collect()),
                        label_values: None,
                    },
                    start,
                )
            }
        };

        let policies_cfg = cfg.node_policies.clone().expect("resolved");
        let policies: Vec<LocalUpdatePolicy> = built
            .nodes
            .iter()
            .zip(&policies_cfg)
            .map(|(n, p)| policy_for(p, n.as_ref()))
            .collect();
        let smoothness: Vec<f64> = built.nodes.iter().map(|n| n.smoothness()).collect();
        for (i, (p, l)) in policies.iter().zip(&smoothness).enumerate() {
            p.validate(*l).map_err(|e| crate::config::ConfigError {
                path: format!("node_policies[{i}].step_size"),
                message: format!("{e} (L = {l:e})"),
            })?;
        }
        let details = ProblemDetails {
            dimension: built.dim,
            start: start.clone(),
            step_sizes: policies.iter().map(|p| p.step_size).collect(),
            alphas: policies
                .iter()
                .zip(&smoothness)
                .map(|(p, l)| p.alpha(*l))
                .collect(),
            smoothness,
            rows_per_node: built.rows_per_node,
            label_values: built.label_values,
            solution_set_known: built.solution.is_some(),
        };
        let mut problem = Problem::new(built.nodes)?;
        if let Some(s) = built.solution {
            problem = problem.with_solution_set(OptimalSet::Affine(s))?;
        }
        let mut stop = StopRule::rounds(cfg.stop.max_rounds).without_iterates();
        if let Some(eps) = cfg.stop.epsilon {
            stop = stop.with_epsilon(eps);
        }
        Ok(Experiment {
            config: cfg,
            problem,
            start,
            policies,
            stop,
            details,
        })
    }

    /// Runs the simulation with node work spread over `threads` threads.
    pub fn execute(&self, threads: NonZeroUsize) -> Result<SimulationRun, CliError> {
        let exec = ThreadedExecutor::new(threads);
        let mut run =
            simulator::run_with(&self.problem, &self.start, &self.policies, &self.stop, &exec)?;
        run.config_digest = Some(self.config.digest());
        run.rng_seed = Some(self.config.seed);
        Ok(run)
    }
}

/// `C/n` matched to `grad_sq` at an anchor round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceLine {
    pub anchor: usize,
    pub constant: f64,
}

impl ReferenceLine {
    pub fn fit(run: &SimulationRun, anchor: usize) -> Option<Self> {
        if anchor == 0 {
            return None;
        }
        let r = run.rounds.get(anchor)?;
        Some(ReferenceLine {
            anchor,
            constant: anchor as f64 * r.grad_sq,
        })
    }

    pub fn value(&self, round: usize) -> Option<f64> {
        (round > 0).then(|| self.constant / round as f64)
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes the per-round series.
pub fn write_rounds_csv<W: Write>(
    run: &SimulationRun,
    reference: Option<&ReferenceLine>,
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = ROUND_COLUMNS.to_vec();
    if reference.is_some() {
        header.push("reference");
    }
    w.write_record(&header)?;
    for r in &run.rounds {
        let mut rec = vec![
            r.round.to_string(),
            num(r.grad_sq),
            num(r.loss),
            opt(r.distance),
            opt(r.decrement_lhs),
            opt(r.decrement_rhs),
            r.cumulative_local_steps.to_string(),
        ];
        if let Some(line) = reference {
            rec.push(opt(line.value(r.round)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TerminationReport {
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl From<Termination> for TerminationReport {
    fn from(t: Termination) -> Self {
        match t {
            Termination::RoundLimit => TerminationReport {
                status: "round_limit",
                epsilon: None,
            },
            Termination::GradientBelow(e) => TerminationReport {
                status: "gradient_below",
                epsilon: Some(e),
            },
            Termination::Stalled => TerminationReport {
                status: "stalled",
                epsilon: None,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub window: [usize; 2],
    pub power_law_slope: f64,
    pub power_law_residual: f64,
    pub geometric_slope: f64,
    pub geometric_residual: f64,
    pub looks_geometric: bool,
}

/// Decay fit of `grad_sq` over the configured window, clipped to the
/// recorded rounds. `None` when fewer than the minimum points remain or a
/// value is zero.
pub fn decay_report(run: &SimulationRun, window: [usize; 2]) -> Option<DecayReport> {
    let series = run.grad_sq_series();
    let last = series.len().checked_sub(1)?;
    let hi = window[1].min(last);
    let fit = fit_gradient_decay(&series, window[0]..=hi).ok()?;
    Some(DecayReport {
        window: [window[0], hi],
        power_law_slope: fit.power_law.slope,
        power_law_residual: fit.power_law.rms_residual,
        geometric_slope: fit.geometric.slope,
        geometric_residual: fit.geometric.rms_residual,
        looks_geometric: fit.looks_geometric(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalState {
    pub round: usize,
    pub grad_sq: f64,
    pub loss: f64,
    #[serde(rename = "dist_S")]
    pub dist_s: Option<f64>,
    pub cum_local_steps: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub seed: u64,
    pub resolved: ProblemDetails,
    pub termination: TerminationReport,
    pub rounds_recorded: usize,
    #[serde(rename = "final")]
    pub final_state: FinalState,
    /// Rounds in which some threshold-mode node stopped on its step cap.
    pub capped_rounds: Vec<usize>,
    pub decay_fit: Option<DecayReport>,
    pub reference: Option<ReferenceLine>,
    pub rounds_csv: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
}

/// Runs `config` and writes `rounds.csv` and `run.json` into `out_dir`.
pub fn run_to_dir(
    config: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
    threads: NonZeroUsize,
) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let exp = Experiment::prepare(config, base_dir)?;
    let run = exp.execute(threads)?;
    let reference = exp
        .config
        .output
        .reference_anchor
        .and_then(|a| ReferenceLine::fit(&run, a));

    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let rounds_path = out_dir.join(ROUNDS_FILE);
    let file = fs::File::create(&rounds_path).map_err(|e| CliError::io(&rounds_path, e))?;
    write_rounds_csv(&run, reference.as_ref(), std::io::BufWriter::new(file)).map_err(|e| {
        CliError::io(&rounds_path, std::io::Error::other(e))
    })?;

    let last = run.rounds.last().expect("a run records at least one round");
    let summary = RunSummary {
        config_digest: exp.config.digest(),
        seed: exp.config.seed,
        decay_fit: decay_report(&run, exp.config.output.slope_window),
        config: exp.config,
        resolved: exp.details,
        termination: run.termination.into(),
        rounds_recorded: run.rounds.len(),
        final_state: FinalState {
            round: last.round,
            grad_sq: last.grad_sq,
            loss: last.loss,
            dist_s: last.distance,
            cum_local_steps: last.cumulative_local_steps,
        },
        capped_rounds: run
            .rounds
            .iter()
            .filter(|r| !r.capped_nodes.is_empty())
            .map(|r| r.round)
            .collect(),
        reference,
        rounds_csv: ROUNDS_FILE.to_string(),
        threads: threads.get(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let run_path: PathBuf = out_dir.join(RUN_FILE);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&run_path, json + "\n").map_err(|e| CliError::io(&run_path, e))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beck_config(steps: usize, rounds: usize) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"problem":{{"kind":"beck"}},"policy":{{"mode":"fixed","steps":{steps}}},
                "stop":{{"max_rounds":{rounds}}},"seed":3}}"#
        ))
        .unwrap()
    }

    #[test]
    fn beck_start_lies_in_the_box() {
        let exp = Experiment::prepare(&beck_config(10, 5), Path::new(".")).unwrap();
        assert!(exp.start.iter().all(|v| (-2.0..=2.0).contains(v)));
        assert_eq!(exp.details.step_sizes, vec![0.5, 0.5]);
    }

    #[test]
    fn csv_has_fixed_columns() {
        let exp = Experiment::prepare(&beck_config(2, 3), Path::new(".")).unwrap();
        let run = exp.execute(NonZeroUsize::MIN).unwrap();
        let mut buf = Vec::new();
        write_rounds_csv(&run, None, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "round,grad_sq,loss,dist_S,decrement_lhs,decrement_rhs,cum_local_steps"
        );
        assert_eq!(text.lines().count(), 5);
        // the final round has no decrement
        assert!(text.lines().last().unwrap().contains(",,,"));
    }

    #[test]
    fn reference_line_matches_at_anchor() {
        let exp = Experiment::prepare(&beck_config(2, 20), Path::new(".")).unwrap();
        let run = exp.execute(NonZeroUsize::MIN).unwrap();
        let line = ReferenceLine::fit(&run, 10).unwrap();
        assert!((line.value(10).unwrap() - run.rounds[10].grad_sq).abs() <= 1e-15 * line.constant);
        assert_eq!(line.value(0), None);
    }
}
