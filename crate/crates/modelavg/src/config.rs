//! Declarative experiment configuration (JSON).
//!
//! ```json
//! {
//!   "problem": { "kind": "beck" },
//!   "policy": { "mode": "fixed", "steps": 10 },
//!   "stop": { "max_rounds": 10000 },
//!   "seed": 7
//! }
//! ```
//!
//! Omitted fields are filled by [`ExperimentConfig::resolved`], and the
//! resolved form is what run metadata echoes back.

use std::fmt;
use std::path::PathBuf;

use modelavg_core::objectives::MAX_POWER;
use modelavg_core::simulator::DEFAULT_MAX_LOCAL_STEPS;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    /// Dotted path of the offending field, e.g. `policy.steps`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn fail<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        path: path.into(),
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    /// Node count `m`, default 1. The Beck problem always has two nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    /// Policy shared by all nodes unless `node_policies` is given.
    pub policy: PolicyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_policies: Option<Vec<PolicyConfig>>,
    pub stop: StopConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<StartConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Disk and half-plane on R², meeting only at the origin.
    Beck,
    /// Least squares with power `l` on a LIBSVM file or synthetic data.
    Regression {
        source: DataSource,
        #[serde(default = "one")]
        power: u32,
        /// Map file features onto [-1, 1]. Synthetic data is generated
        /// scaled and ignores this.
        #[serde(default = "yes")]
        scale_features: bool,
        /// Shuffle rows with this seed before splitting into blocks.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shuffle_seed: Option<u64>,
        /// Fixed feature dimension (defaults to the largest index).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    /// Random consistent Gaussian quadratics with a planted optimum.
    CustomQuadratic {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

fn one() -> u32 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        rows: usize,
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Relative paths are resolved against the config file's directory.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    Fixed,
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub mode: PolicyMode,
    /// Local steps per round (`fixed`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Stop local descent once `‖∇f_i‖² <= g_tol` (`threshold`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_tol: Option<f64>,
    /// Safety cap for `threshold`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// Defaults to `1/L_i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
}

impl PolicyConfig {
    pub fn fixed(steps: usize) -> Self {
        PolicyConfig {
            mode: PolicyMode::Fixed,
            steps: Some(steps),
            g_tol: None,
            max_steps: None,
            step_size: None,
        }
    }

    pub fn threshold(g_tol: f64) -> Self {
        PolicyConfig {
            mode: PolicyMode::Threshold,
            steps: None,
            g_tol: Some(g_tol),
            max_steps: None,
            step_size: None,
        }
    }

    fn validate(&self, path: &str) -> Result<(), ConfigError> {
        match self.mode {
            PolicyMode::Fixed => {
                match self.steps {
                    None => return fail(format!("{path}.steps"), "required in fixed mode"),
                    Some(0) => return fail(format!("{path}.steps"), "must be at least 1"),
                    Some(_) => {}
                }
                if self.g_tol.is_some() || self.max_steps.is_some() {
                    return fail(path, "g_tol and max_steps only apply in threshold mode");
                }
            }
            PolicyMode::Threshold => {
                match self.g_tol {
                    None => return fail(format!("{path}.g_tol"), "required in threshold mode"),
                    Some(g) if !(g > 0.0 && g.is_finite()) => {
                        return fail(format!("{path}.g_tol"), "must be positive")
                    }
                    Some(_) => {}
                }
                if self.max_steps == Some(0) {
                    return fail(format!("{path}.max_steps"), "must be at least 1");
                }
                if self.steps.is_some() {
                    return fail(path, "steps only applies in fixed mode");
                }
            }
        }
        if let Some(eta) = self.step_size {
            if !(eta > 0.0 && eta.is_finite()) {
                return fail(format!("{path}.step_size"), "must be positive");
            }
        }
        Ok(())
    }

    fn resolved(&self) -> Self {
        let mut p = self.clone();
        if p.mode == PolicyMode::Threshold && p.max_steps.is_none() {
            p.max_steps = Some(DEFAULT_MAX_LOCAL_STEPS);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    /// Last round index recorded.
    pub max_rounds: usize,
    /// Stop at the first round with `‖∇f(x_n)‖² <= epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartConfig {
    Zeros,
    Point { point: Vec<f64> },
    /// Uniform on the cube `[low, high]^d`.
    Box { low: f64, high: f64 },
    /// `N(0, scale²)` per coordinate.
    Gaussian { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Append a `C/n` column matched to `grad_sq` at this round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_anchor: Option<usize>,
    /// Rounds `[first, last]` used for the decay fit in run.json.
    #[serde(default = "default_window")]
    pub slope_window: [usize; 2],
}

fn default_window() -> [usize; 2] {
    [100, 10_000]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            reference_anchor: None,
            slope_window: default_window(),
        }
    }
}

/// Start box for the Beck problem when none is configured.
pub const BECK_START_BOX: (f64, f64) = (-2.0, 2.0);

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            path: "<config>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn node_count(&self) -> usize {
        match self.problem {
            ProblemConfig::Beck => 2,
            _ => self.nodes.unwrap_or(1),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.problem {
            ProblemConfig::Beck => {
                if let Some(m) = self.nodes {
                    if m != 2 {
                        return fail("nodes", "the Beck problem has exactly 2 nodes");
                    }
                }
            }
            ProblemConfig::Regression {
                source, power, dim, ..
            } => {
                if !(1..=MAX_POWER).contains(power) {
                    return fail("problem.power", format!("must be in 1..={MAX_POWER}"));
                }
                if *dim == Some(0) {
                    return fail("problem.dim", "must be positive");
                }
                if let DataSource::Synthetic { rows, dim, .. } = source {
                    if *rows == 0 {
                        return fail("problem.source.synthetic.rows", "must be positive");
                    }
                    if *dim == 0 {
                        return fail("problem.source.synthetic.dim", "must be positive");
                    }
                    if self.node_count() > *rows {
                        return fail("nodes", format!("more nodes than the {rows} rows"));
                    }
                }
            }
            ProblemConfig::CustomQuadratic { dim, .. } => {
                if *dim == 0 {
                    return fail("problem.dim", "must be positive");
                }
            }
        }
        if self.nodes == Some(0) {
            return fail("nodes", "must be at least 1");
        }
        self.policy.validate("policy")?;
        if let Some(list) = &self.node_policies {
            if list.len() != self.node_count() {
                return fail(
                    "node_policies",
                    format!("{} entries for {} nodes", list.len(), self.node_count()),
                );
            }
            for (i, p) in list.iter().enumerate() {
                p.validate(&format!("node_policies[{i}]"))?;
            }
        }
        if let Some(eps) = self.stop.epsilon {
            if !(eps >= 0.0 && eps.is_finite()) {
                return fail("stop.epsilon", "must be a finite non-negative number");
            }
        }
        match &self.start {
            Some(StartConfig::Box { low, high }) if !(low < high) => {
                return fail("start", "box needs low < high");
            }
            Some(StartConfig::Gaussian { scale }) if !(*scale > 0.0 && scale.is_finite()) => {
                return fail("start.scale", "must be positive");
            }
            Some(StartConfig::Point { point }) if point.iter().any(|v| !v.is_finite()) => {
                return fail("start.point", "must be finite");
            }
            _ => {}
        }
        let [lo, hi] = self.output.slope_window;
        if lo == 0 || lo >= hi {
            return fail("output.slope_window", "needs 1 <= first < last");
        }
        Ok(())
    }

    /// Copy with every defaulted field made explicit.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.nodes = Some(self.node_count());
        match &mut c.problem {
            ProblemConfig::Regression {
                source: DataSource::Synthetic { seed, .. },
                ..
            }
            | ProblemConfig::CustomQuadratic { seed, .. } => {
                seed.get_or_insert(self.seed);
            }
            _ => {}
        }
        c.policy = self.policy.resolved();
        c.node_policies = Some(match &self.node_policies {
            Some(list) => list.iter().map(PolicyConfig::resolved).collect(),
            None => vec![c.policy.clone(); self.node_count()],
        });
        if c.start.is_none() {
            c.start = Some(match self.problem {
                ProblemConfig::Beck => StartConfig::Box {
                    low: BECK_START_BOX.0,
                    high: BECK_START_BOX.1,
                },
                ProblemConfig::Regression { .. } => StartConfig::Zeros,
                ProblemConfig::CustomQuadratic { .. } => StartConfig::Gaussian { scale: 1.0 },
            });
        }
        c
    }

    /// Hex SHA-256 prefix of the resolved configuration (output directory
    /// excluded).
    pub fn digest(&self) -> String {
        let mut c = self.resolved();
        c.output.dir = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        let hash = Sha256::digest(&bytes);
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_beck_config() {
        let c = ExperimentConfig::from_json(
            r#"{"problem":{"kind":"beck"},"policy":{"mode":"fixed","steps":10},"stop":{"max_rounds":5}}"#,
        )
        .unwrap();
        let r = c.resolved();
        assert_eq!(r.nodes, Some(2));
        assert_eq!(r.start, Some(StartConfig::Box { low: -2.0, high: 2.0 }));
        assert_eq!(r.node_policies.as_ref().unwrap().len(), 2);
        assert_eq!(r.output.slope_window, [100, 10_000]);
        // resolving is idempotent
        assert_eq!(r.resolved(), r);
        assert_eq!(c.digest(), r.digest());
    }

    #[test]
    fn field_paths_in_errors() {
        let e = ExperimentConfig::from_json(
            r#"{"problem":{"kind":"beck"},"policy":{"mode":"fixed"},"stop":{"max_rounds":5}}"#,
        )
        .unwrap_err();
        assert_eq!(e.path, "policy.steps");
        let e = ExperimentConfig::from_json(
            r#"{"problem":{"kind":"regression","source":{"synthetic":{"rows":4,"dim":3}},"power":7},
                "policy":{"mode":"threshold","g_tol":1e-8},"stop":{"max_rounds":5}}"#,
        )
        .unwrap_err();
        assert_eq!(e.path, "problem.power");
        let e = ExperimentConfig::from_json(
            r#"{"problem":{"kind":"beck"},"policy":{"mode":"fixed","steps":1},
                "node_policies":[{"mode":"threshold","g_tol":-1},{"mode":"fixed","steps":1}],
                "stop":{"max_rounds":5}}"#,
        )
        .unwrap_err();
        assert_eq!(e.path, "node_policies[0].g_tol");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = ExperimentConfig::from_json(
            r#"{"problem":{"kind":"beck"},"policy":{"mode":"fixed","steps":1},"stop":{"max_rounds":5},"colour":1}"#,
        )
        .unwrap_err();
        assert!(e.message.contains("colour"), "{e}");
    }
}
