//! Distributed gradient descent with local updates and model averaging.
//!
//! Each communication round every node pulls the server iterate `x_n`, runs
//! its own gradient descent for a fixed number of steps (or until its local
//! gradient is small), and the server replaces `x_n` by the mean of the
//! returned points. The run records per-round telemetry, including both
//! sides of the distance decrement inequality
//!
//! ```text
//! d(x_{n+1}, S)² <= d(x_n, S)² - (1/m) Σ_i Σ_t α_i ‖∇f_i(x_n^{i,t})‖²,
//! α_i = η_i (2/L_i - η_i)
//! ```
//!
//! so that it can be audited afterwards.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::geometry::OptimalSet;
use crate::linalg;
use crate::objectives::Objective;
use crate::regression::{fit_line, LineFit};

/// Safety cap on local steps per round in threshold mode.
pub const DEFAULT_MAX_LOCAL_STEPS: usize = 1_000_000;

/// Consecutive near-constant rounds before a run is declared stalled.
pub const STALL_ROUNDS: usize = 10;

/// Relative change below which a round counts towards a stall.
pub const STALL_RELATIVE_CHANGE: f64 = 1e-16;

/// Relative slack of the decrement audit: a round passes when
/// `lhs >= rhs - 1e-9 · max(1, d(x_n, S)²)`.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Exactly `T_i` local steps.
    Fixed(usize),
    /// Descend until `‖∇f_i‖² <= g_tol`, the stand-in for `T_i = ∞`.
    Threshold { g_tol: f64, max_steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalUpdatePolicy {
    pub rule: StepRule,
    pub step_size: f64,
}

impl LocalUpdatePolicy {
    pub fn fixed(steps: usize, step_size: f64) -> Self {
        LocalUpdatePolicy {
            rule: StepRule::Fixed(steps),
            step_size,
        }
    }

    pub fn threshold(g_tol: f64, step_size: f64) -> Self {
        LocalUpdatePolicy {
            rule: StepRule::Threshold {
                g_tol,
                max_steps: DEFAULT_MAX_LOCAL_STEPS,
            },
            step_size,
        }
    }

    /// `rule` with the default step size `1/L_i`.
    pub fn with_default_step<O: Objective + ?Sized>(rule: StepRule, oracle: &O) -> Self {
        LocalUpdatePolicy {
            rule,
            step_size: 1.0 / oracle.smoothness(),
        }
    }

    /// `α = η (2/L - η)`.
    pub fn alpha(&self, smoothness: f64) -> f64 {
        self.step_size * (2.0 / smoothness - self.step_size)
    }

    /// Checks the rule parameters and that `α > 0` for the given `L`.
    pub fn validate(&self, smoothness: f64) -> Result<()> {
        match self.rule {
            StepRule::Fixed(0) => {
                return Err(Error::invalid("fixed local step count must be positive"));
            }
            StepRule::Threshold { g_tol, max_steps } => {
                if !(g_tol > 0.0 && g_tol.is_finite()) {
                    return Err(Error::Domain {
                        what: "gradient threshold",
                        value: g_tol,
                    });
                }
                if max_steps == 0 {
                    return Err(Error::invalid("threshold step cap must be positive"));
                }
            }
            StepRule::Fixed(_) => {}
        }
        if !(smoothness > 0.0 && smoothness.is_finite()) {
            return Err(Error::Domain {
                what: "smoothness constant",
                value: smoothness,
            });
        }
        if !(self.step_size > 0.0 && self.alpha(smoothness) > 0.0) {
            return Err(Error::Domain {
                what: "step size (needs 0 < η < 2/L)",
                value: self.step_size,
            });
        }
        Ok(())
    }
}

/// Result of one node's local descent.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    pub point: Vec<f64>,
    /// `‖∇f_i(x^{i,t})‖²` for every step actually taken, `t = 0..steps`.
    pub grad_sq: Vec<f64>,
    /// Threshold mode stopped on its step cap rather than its tolerance.
    pub hit_cap: bool,
}

impl LocalOutcome {
    pub fn steps(&self) -> usize {
        self.grad_sq.len()
    }
}

/// Runs local gradient descent from `x0` under `policy`.
///
/// A non-finite gradient or iterate yields [`Error::Divergence`] with the
/// offending step; node and round are filled in by [`run`].
pub fn local_descent<O: Objective + ?Sized>(
    oracle: &O,
    x0: &[f64],
    policy: &LocalUpdatePolicy,
) -> Result<LocalOutcome> {
    if x0.len() != oracle.dimension() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dimension(),
            found: x0.len(),
        });
    }
    policy.validate(oracle.smoothness())?;
    let eta = policy.step_size;
    let mut x = x0.to_vec();
    let mut g = vec![0.0; x.len()];
    let mut trajectory = Vec::new();
    let mut hit_cap = false;
    let diverged = |step| Error::Divergence {
        node: 0,
        round: 0,
        step,
    };

    let mut t = 0;
    loop {
        match policy.rule {
            StepRule::Fixed(steps) if t >= steps => break,
            _ => {}
        }
        oracle.gradient_into(&x, &mut g);
        let gsq = linalg::norm_sq(&g);
        if !gsq.is_finite() {
            return Err(diverged(t));
        }
        if let StepRule::Threshold { g_tol, max_steps } = policy.rule {
            if gsq <= g_tol {
                break;
            }
            if t >= max_steps {
                hit_cap = true;
                break;
            }
        }
        trajectory.push(gsq);
        linalg::axpy(-eta, &g, &mut x);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(diverged(t));
        }
        t += 1;
    }
    Ok(LocalOutcome {
        point: x,
        grad_sq: trajectory,
        hit_cap,
    })
}

/// The nodes' local losses plus, when known in closed form, the common
/// optimal set `S` used for distance telemetry.
pub struct Problem {
    nodes: Vec<Box<dyn Objective>>,
    solution: Option<OptimalSet>,
}

impl core::fmt::Debug for Problem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Problem")
            .field("nodes", &self.nodes.len())
            .field("dimension", &self.dimension())
            .field("solution", &self.solution.is_some())
            .finish()
    }
}

impl Problem {
    pub fn new(nodes: Vec<Box<dyn Objective>>) -> Result<Self> {
        let first = nodes
            .first()
            .ok_or_else(|| Error::invalid("problem needs at least one node"))?;
        let d = first.dimension();
        for n in &nodes {
            if n.dimension() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: n.dimension(),
                });
            }
        }
        Ok(Problem {
            nodes,
            solution: None,
        })
    }

    pub fn with_solution_set(mut self, set: OptimalSet) -> Result<Self> {
        if set.dim() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: set.dim(),
            });
        }
        self.solution = Some(set);
        Ok(self)
    }

    pub fn nodes(&self) -> &[Box<dyn Objective>] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn dimension(&self) -> usize {
        self.nodes[0].dimension()
    }

    pub fn solution_set(&self) -> Option<&OptimalSet> {
        self.solution.as_ref()
    }

    /// `f(x) = (1/m) Σ f_i(x)`.
    pub fn loss(&self, x: &[f64]) -> f64 {
        let total: f64 = self.nodes.iter().map(|n| n.value(x)).sum();
        total / self.nodes.len() as f64
    }

    /// `∇f(x) = (1/m) Σ ∇f_i(x)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| {
                let mut g = vec![0.0; x.len()];
                n.gradient_into(x, &mut g);
                g
            })
            .collect();
        linalg::pairwise_mean(&grads)
    }
}

/// Runs the independent per-node work of one round.
///
/// Implementations may execute tasks concurrently but must return results in
/// node order.
pub trait NodeExecutor {
    fn execute(
        &self,
        count: usize,
        task: &(dyn Fn(usize) -> Result<LocalOutcome> + Sync),
    ) -> Vec<Result<LocalOutcome>>;
}

/// Runs node tasks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialExecutor;

impl NodeExecutor for SerialExecutor {
    fn execute(
        &self,
        count: usize,
        task: &(dyn Fn(usize) -> Result<LocalOutcome> + Sync),
    ) -> Vec<Result<LocalOutcome>> {
        (0..count).map(task).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopRule {
    /// Last round index that is recorded.
    pub max_rounds: usize,
    /// Stop once `‖∇f(x_n)‖² <= ε`.
    pub epsilon: Option<f64>,
    /// Keep `x_n` in every [`RoundRecord`].
    pub keep_iterates: bool,
}

impl StopRule {
    pub fn rounds(max_rounds: usize) -> Self {
        StopRule {
            max_rounds,
            epsilon: None,
            keep_iterates: true,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn without_iterates(mut self) -> Self {
        self.keep_iterates = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub iterate: Option<Vec<f64>>,
    /// `‖∇f(x_n)‖²`
    pub grad_sq: f64,
    /// `f(x_n)`
    pub loss: f64,
    /// `d(x_n, S)` when the problem exposes `S`.
    pub distance: Option<f64>,
    /// `d(x_n, S)² - d(x_{n+1}, S)²`; absent on the final round.
    pub decrement_lhs: Option<f64>,
    /// `(1/m) Σ_i Σ_t α_i ‖∇f_i(x_n^{i,t})‖²`; absent on the final round.
    pub decrement_rhs: Option<f64>,
    /// Local steps per node this round (empty on the final round).
    pub local_steps: Vec<usize>,
    /// Nodes whose threshold descent stopped on the step cap.
    pub capped_nodes: Vec<usize>,
    /// Local steps over all nodes in rounds `0..=n`.
    pub cumulative_local_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    RoundLimit,
    GradientBelow(f64),
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub config_digest: Option<String>,
    pub rng_seed: Option<u64>,
    pub rounds: Vec<RoundRecord>,
    pub termination: Termination,
    pub final_point: Vec<f64>,
    /// `α_i` per node.
    pub alphas: Vec<f64>,
}

impl SimulationRun {
    pub fn grad_sq_series(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.grad_sq).collect()
    }

    pub fn distance_series(&self) -> Option<Vec<f64>> {
        self.rounds.iter().map(|r| r.distance).collect()
    }

    /// First round with `‖∇f(x_n)‖² <= eps`.
    pub fn rounds_to(&self, eps: f64) -> Option<usize> {
        self.rounds.iter().find(|r| r.grad_sq <= eps).map(|r| r.round)
    }
}

/// Runs model averaging serially.
pub fn run(
    problem: &Problem,
    x0: &[f64],
    policies: &[LocalUpdatePolicy],
    stop: &StopRule,
) -> Result<SimulationRun> {
    run_with(problem, x0, policies, stop, &SerialExecutor)
}

/// Runs model averaging with the node work dispatched through `executor`.
///
/// Results are averaged in node order with pairwise summation, so the
/// records do not depend on how the executor schedules nodes.
pub fn run_with<E: NodeExecutor + ?Sized>(
    problem: &Problem,
    x0: &[f64],
    policies: &[LocalUpdatePolicy],
    stop: &StopRule,
    executor: &E,
) -> Result<SimulationRun> {
    let m = problem.node_count();
    if x0.len() != problem.dimension() {
        return Err(Error::DimensionMismatch {
            expected: problem.dimension(),
            found: x0.len(),
        });
    }
    if policies.len() != m {
        return Err(Error::invalid(alloc::format!(
            "{} policies for {} nodes",
            policies.len(),
            m
        )));
    }
    if let Some(eps) = stop.epsilon {
        if !(eps >= 0.0) {
            return Err(Error::Domain {
                what: "epsilon",
                value: eps,
            });
        }
    }
    let mut alphas = Vec::with_capacity(m);
    for (node, policy) in problem.nodes().iter().zip(policies) {
        policy.validate(node.smoothness())?;
        alphas.push(policy.alpha(node.smoothness()));
    }

    let mut x = x0.to_vec();
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut cumulative = 0u64;
    let mut stall = 0usize;
    let mut previous_metric: Option<f64> = None;

    let termination = loop {
        let n = rounds.len();
        let grad = problem.gradient(&x);
        let grad_sq = linalg::norm_sq(&grad);
        let loss = problem.loss(&x);
        let distance = match problem.solution_set() {
            Some(s) => Some(s.distance(&x)?),
            None => None,
        };
        if let (Some(prev), Some(d)) = (rounds.last_mut(), distance) {
            if let Some(pd) = prev.distance {
                prev.decrement_lhs = Some(pd * pd - d * d);
            }
        }

        let metric = distance.unwrap_or(grad_sq);
        if let Some(p) = previous_metric {
            if (metric - p).abs() <= STALL_RELATIVE_CHANGE * p.abs() {
                stall += 1;
            } else {
                stall = 0;
            }
        }
        previous_metric = Some(metric);

        let mut record = RoundRecord {
            round: n,
            iterate: stop.keep_iterates.then(|| x.clone()),
            grad_sq,
            loss,
            distance,
            decrement_lhs: None,
            decrement_rhs: None,
            local_steps: Vec::new(),
            capped_nodes: Vec::new(),
            cumulative_local_steps: cumulative,
        };

        if !grad_sq.is_finite() || !loss.is_finite() {
            return Err(Error::Divergence {
                node: 0,
                round: n,
                step: 0,
            });
        }
        if let Some(eps) = stop.epsilon {
            if grad_sq <= eps {
                rounds.push(record);
                break Termination::GradientBelow(eps);
            }
        }
        if stall >= STALL_ROUNDS {
            rounds.push(record);
            break Termination::Stalled;
        }
        if n >= stop.max_rounds {
            rounds.push(record);
            break Termination::RoundLimit;
        }

        let x_n = &x;
        let task = |i: usize| local_descent(problem.nodes()[i].as_ref(), x_n, &policies[i]);
        let outcomes = executor.execute(m, &task);
        let mut points = Vec::with_capacity(m);
        let mut rhs = 0.0;
        for (i, outcome) in outcomes.into_iter().enumerate() {
            let outcome = outcome.map_err(|e| match e {
                Error::Divergence { step, .. } => Error::Divergence {
                    node: i,
                    round: n,
                    step,
                },
                other => other,
            })?;
            rhs += alphas[i] * outcome.grad_sq.iter().sum::<f64>();
            record.local_steps.push(outcome.steps());
            if outcome.hit_cap {
                record.capped_nodes.push(i);
            }
            cumulative += outcome.steps() as u64;
            points.push(outcome.point);
        }
        record.decrement_rhs = Some(rhs / m as f64);
        record.cumulative_local_steps = cumulative;
        rounds.push(record);
        x = linalg::pairwise_mean(&points);
    };

    Ok(SimulationRun {
        config_digest: None,
        rng_seed: None,
        rounds,
        termination,
        final_point: x,
        alphas,
    })
}

/// One round of the decrement audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditEntry {
    pub round: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// `lhs >= rhs - AUDIT_TOLERANCE · max(1, d_n²)`.
pub fn decrement_holds(lhs: f64, rhs: f64, distance_sq: f64) -> bool {
    lhs >= rhs - AUDIT_TOLERANCE * distance_sq.max(1.0)
}

/// Checks the distance decrement inequality on every completed round.
pub fn audit_lemma1(run: &SimulationRun) -> Result<Vec<AuditEntry>> {
    let mut out = Vec::new();
    for r in &run.rounds {
        let d = r.distance.ok_or(Error::UnsupportedAudit)?;
        if let (Some(lhs), Some(rhs)) = (r.decrement_lhs, r.decrement_rhs) {
            out.push(AuditEntry {
                round: r.round,
                lhs,
                rhs,
                satisfied: decrement_holds(lhs, rhs, d * d),
            });
        }
    }
    Ok(out)
}

/// Slopes of `log y` against `log n` (power-law report) and against `n`
/// (geometric report) over a window of round indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub power_law: LineFit,
    pub geometric: LineFit,
}

impl DecayFit {
    /// Whether the semi-log fit explains the data better than the log-log one.
    pub fn looks_geometric(&self) -> bool {
        self.geometric.rms_residual < self.power_law.rms_residual
    }
}

pub const MIN_FIT_POINTS: usize = 10;

/// Fits `series[n]` for `n` in `window`. The window must start at 1 or later
/// and contain at least [`MIN_FIT_POINTS`] positive values.
pub fn fit_gradient_decay(series: &[f64], window: RangeInclusive<usize>) -> Result<DecayFit> {
    let (start, end) = (*window.start(), *window.end());
    if start == 0 {
        return Err(Error::invalid("decay window must start at round 1 or later"));
    }
    if end >= series.len() || end < start {
        return Err(Error::invalid(alloc::format!(
            "decay window {start}..={end} is outside a series of {} values",
            series.len()
        )));
    }
    let count = end - start + 1;
    if count < MIN_FIT_POINTS {
        return Err(Error::invalid(alloc::format!(
            "decay fit needs at least {MIN_FIT_POINTS} points, got {count}"
        )));
    }
    let mut n = Vec::with_capacity(count);
    let mut log_n = Vec::with_capacity(count);
    let mut log_y = Vec::with_capacity(count);
    for (i, &y) in series.iter().enumerate().take(end + 1).skip(start) {
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Domain {
                what: "decay sample",
                value: y,
            });
        }
        n.push(i as f64);
        log_n.push(libm::log(i as f64));
        log_y.push(libm::log(y));
    }
    Ok(DecayFit {
        power_law: fit_line(&log_n, &log_y)?,
        geometric: fit_line(&n, &log_y)?,
    })
}

/// `ρ = √(1 - c⁻¹ min_i(α_i μ_i²))` with each `α_i μ_i²` clamped to 1.
pub fn restricted_sc_rate(separation: f64, alphas: &[f64], moduli: &[f64]) -> Result<f64> {
    if alphas.len() != moduli.len() || alphas.is_empty() {
        return Err(Error::invalid("need one modulus per node"));
    }
    if !(separation >= 1.0) {
        return Err(Error::Domain {
            what: "separation constant",
            value: separation,
        });
    }
    let kappa_inv = alphas
        .iter()
        .zip(moduli)
        .map(|(a, mu)| (a * mu * mu).min(1.0))
        .fold(f64::INFINITY, f64::min);
    if !(kappa_inv > 0.0) {
        return Err(Error::Domain {
            what: "min α μ²",
            value: kappa_inv,
        });
    }
    Ok(libm::sqrt((1.0 - kappa_inv / separation).max(0.0)))
}

/// `√(1 - c⁻²)`, the per-round contraction with exact local projections onto
/// affine optimal sets.
pub fn affine_projection_rate(separation: f64) -> Result<f64> {
    if !(separation >= 1.0) {
        return Err(Error::Domain {
            what: "separation constant",
            value: separation,
        });
    }
    Ok(libm::sqrt(1.0 - 1.0 / (separation * separation)))
}
