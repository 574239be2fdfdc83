//! Optimal local step counts and cost curves for `modelavg tradeoff`.

use modelavg_core::tradeoff::{
    self, linear_stationarity, sublinear_stationarity, CostModel, DecayModel,
};
use modelavg_core::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayKind {
    /// `h(t) = β^t`
    Linear { beta: f64 },
    /// `h(t) = (1 + a t)^(-β)`
    Sublinear { a: f64, beta: f64 },
}

/// Cost fields other than the ratio. Only `r` affects `T*`; the rest scale
/// the reported cost curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostScale {
    pub comm_cost: f64,
    pub nodes: usize,
    pub alpha: f64,
    pub d0_sq: f64,
    pub epsilon: f64,
}

impl Default for CostScale {
    fn default() -> Self {
        CostScale {
            comm_cost: 1.0,
            nodes: 1,
            alpha: 1.0,
            d0_sq: 1.0,
            epsilon: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffRequest {
    pub decay: DecayKind,
    /// Cost ratios `r = C_g / C_c` to plan for.
    pub ratios: Vec<f64>,
    #[serde(default)]
    pub cost: CostScale,
    /// Largest `T` on the cost curve grid.
    #[serde(default = "default_grid_max")]
    pub grid_max: u64,
    /// Number of log-spaced grid points.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_grid_max() -> u64 {
    10_000
}

fn default_grid_points() -> usize {
    40
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: u64,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanEntry {
    pub r: f64,
    /// Closed form (linear) or root of the stationarity equation
    /// (sub-linear).
    pub t_star: f64,
    /// Golden-section minimizer of the cost factor.
    pub t_star_numeric: f64,
    /// Floor or ceil of `t_star`, whichever has the smaller cost bound.
    pub t_star_rounded: u64,
    pub stationarity_residual: f64,
    /// Small-`r` expression; diagnostic only.
    pub asymptotic: f64,
    pub asymptotic_caveat: &'static str,
    pub cost_curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub decay: DecayKind,
    pub cost: CostScale,
    pub entries: Vec<PlanEntry>,
}

const LINEAR_CAVEAT: &str =
    "small-r expression; does not track the exact minimizer in scale, reported for comparison only";
const SUBLINEAR_CAVEAT: &str =
    "leading term as r -> 0; underestimates the exact root at moderate r";

/// Log-spaced integers in `[1, max]`, deduplicated.
pub fn log_grid(max: u64, points: usize) -> Vec<u64> {
    let max = max.max(1);
    let points = points.max(2);
    let mut out: Vec<u64> = (0..points)
        .map(|k| {
            let e = (max as f64).ln() * k as f64 / (points - 1) as f64;
            e.exp().round() as u64
        })
        .map(|t| t.clamp(1, max))
        .collect();
    out.dedup();
    out
}

pub fn plan(req: &TradeoffRequest) -> Result<Plan> {
    let model = match req.decay {
        DecayKind::Linear { beta } => DecayModel::geometric(beta)?,
        DecayKind::Sublinear { a, beta } => DecayModel::power_law(a, beta)?,
    };
    let grid = log_grid(req.grid_max, req.grid_points);
    let mut entries = Vec::with_capacity(req.ratios.len());
    for &r in &req.ratios {
        let c = &req.cost;
        let cost = CostModel::new(c.comm_cost, r * c.comm_cost, c.nodes, c.alpha, c.d0_sq, c.epsilon)?;
        let (t_star, numeric, residual, asymptotic, caveat) = match req.decay {
            DecayKind::Linear { beta } => {
                let t = tradeoff::t_star_linear(beta, r)?;
                (
                    t,
                    tradeoff::t_star_linear_numeric(beta, r)?,
                    linear_stationarity(beta, r, t),
                    tradeoff::t_star_linear_asymptotic(beta, r)?,
                    LINEAR_CAVEAT,
                )
            }
            DecayKind::Sublinear { a, beta } => {
                let t = tradeoff::t_star_sublinear(a, beta, r)?;
                (
                    t,
                    tradeoff::t_star_sublinear_numeric(a, beta, r)?,
                    sublinear_stationarity(a, beta, r, t),
                    tradeoff::t_star_sublinear_asymptotic(a, beta, r)?,
                    SUBLINEAR_CAVEAT,
                )
            }
        };
        let cost_curve = tradeoff::cost_curve(&cost, &model, &grid)?
            .into_iter()
            .map(|(t, total_cost)| CurvePoint { t, total_cost })
            .collect();
        entries.push(PlanEntry {
            r,
            t_star,
            t_star_numeric: numeric,
            t_star_rounded: tradeoff::round_t_star(&cost, &model, t_star)?,
            stationarity_residual: residual,
            asymptotic,
            asymptotic_caveat: caveat,
            cost_curve,
        });
    }
    Ok(Plan {
        decay: req.decay,
        cost: req.cost,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_increasing_and_bounded() {
        let g = log_grid(10_000, 40);
        assert_eq!(g[0], 1);
        assert_eq!(*g.last().unwrap(), 10_000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn linear_plan() {
        let p = plan(&TradeoffRequest {
            decay: DecayKind::Linear { beta: 0.9 },
            ratios: vec![0.001, 0.01, 0.1],
            cost: CostScale::default(),
            grid_max: 1000,
            grid_points: 20,
        })
        .unwrap();
        let e = &p.entries[1];
        assert!((e.t_star - 25.17).abs() < 0.01);
        assert!((e.t_star - e.t_star_numeric).abs() < 0.5);
        assert!(p.entries.windows(2).all(|w| w[1].t_star <= w[0].t_star));
    }

    #[test]
    fn sublinear_plan_domain() {
        let req = TradeoffRequest {
            decay: DecayKind::Sublinear { a: 2.0, beta: 0.5 },
            ratios: vec![0.01],
            cost: CostScale::default(),
            grid_max: 100,
            grid_points: 5,
        };
        assert!(plan(&req).is_err());
    }
}
