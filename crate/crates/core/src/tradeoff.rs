//! Communication/computation trade-off for local update counts.
//!
//! If local descent shrinks squared gradient norms no faster than a decay
//! model `h(t)` (`h(0) = 1`, decreasing), the number of rounds to first reach
//! `‖∇f(x_n)‖² <= ε` with `T` local steps per round is bounded by
//!
//! ```text
//! n* <= d(x_0, S)² / (α ε Σ_{t<T} h(t))
//! ```
//!
//! and with communication cost `C_c` per node per round and `C_g` per local
//! step (`r = C_g / C_c`) the total cost is bounded by
//!
//! ```text
//! C_total <= C_c m d(x_0, S)² (α ε)⁻¹ (1 + rT) / Σ_{t<T} h(t).
//! ```
//!
//! The optimal `T*` minimizes `(1 + rT) / Σ_{t<T} h(t)`; closed forms exist
//! for geometric and power-law decay.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::regression::fit_line;

const INV_E: f64 = 0.367_879_441_171_442_33;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayModel {
    /// `h(t) = β^t`, `0 < β < 1`.
    Geometric { beta: f64 },
    /// `h(t) = (1 + a t)^(-β)`, `a > 0`, `β > 1`.
    PowerLaw { a: f64, beta: f64 },
}

impl DecayModel {
    pub fn geometric(beta: f64) -> Result<Self> {
        check_open_unit(beta, "beta")?;
        Ok(DecayModel::Geometric { beta })
    }

    pub fn power_law(a: f64, beta: f64) -> Result<Self> {
        check_positive(a, "a")?;
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::Domain {
                what: "beta (power law needs β > 1)",
                value: beta,
            });
        }
        Ok(DecayModel::PowerLaw { a, beta })
    }

    /// Decay of a quadratic-like loss `x^(2l)`: `a = 2l - 2`,
    /// `β = (2l - 1)/(2l - 2)`. Needs `l >= 2`.
    pub fn for_loss_power(l: u32) -> Result<Self> {
        if l < 2 {
            return Err(Error::invalid("power-law decay needs a loss power of at least 2"));
        }
        let l = l as f64;
        DecayModel::power_law(2.0 * l - 2.0, (2.0 * l - 1.0) / (2.0 * l - 2.0))
    }

    pub fn h(&self, t: f64) -> f64 {
        match *self {
            DecayModel::Geometric { beta } => libm::pow(beta, t),
            DecayModel::PowerLaw { a, beta } => libm::pow(1.0 + a * t, -beta),
        }
    }

    /// `∫_0^T h(s) ds`.
    pub fn integral(&self, t: f64) -> f64 {
        match *self {
            DecayModel::Geometric { beta } => (1.0 - libm::pow(beta, t)) / -libm::log(beta),
            DecayModel::PowerLaw { a, beta } => {
                (1.0 - libm::pow(1.0 + a * t, 1.0 - beta)) / (a * (beta - 1.0))
            }
        }
    }

    /// `(∫_0^T h, 1 + ∫_0^{T-1} h)`, which bracket `Σ_{t<T} h(t)` for any
    /// decreasing `h`.
    pub fn partial_sum_bracket(&self, steps: u64) -> Result<(f64, f64)> {
        check_steps(steps)?;
        let t = steps as f64;
        Ok((self.integral(t), 1.0 + self.integral(t - 1.0)))
    }
}

fn check_steps(steps: u64) -> Result<()> {
    if steps == 0 {
        return Err(Error::invalid("local step count T must be at least 1"));
    }
    Ok(())
}

fn check_positive(v: f64, what: &'static str) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain { what, value: v });
    }
    Ok(())
}

fn check_open_unit(v: f64, what: &'static str) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Domain { what, value: v });
    }
    Ok(())
}

/// `Σ_{t=0}^{T-1} h(t)`: closed form for geometric decay, direct summation
/// for power laws.
pub fn partial_sum_h(model: &DecayModel, steps: u64) -> Result<f64> {
    check_steps(steps)?;
    Ok(match *model {
        DecayModel::Geometric { beta } => {
            (1.0 - libm::pow(beta, steps as f64)) / (1.0 - beta)
        }
        DecayModel::PowerLaw { .. } => (0..steps).map(|t| model.h(t as f64)).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    /// `C_c`, per node per round.
    pub comm_cost: f64,
    /// `C_g`, per local step.
    pub grad_cost: f64,
    pub nodes: usize,
    /// `α = min_i α_i`
    pub alpha: f64,
    /// `d(x_0, S)²`
    pub d0_sq: f64,
    /// Target for `‖∇f‖²`.
    pub epsilon: f64,
}

impl CostModel {
    pub fn new(
        comm_cost: f64,
        grad_cost: f64,
        nodes: usize,
        alpha: f64,
        d0_sq: f64,
        epsilon: f64,
    ) -> Result<Self> {
        check_positive(comm_cost, "comm_cost")?;
        check_positive(grad_cost, "grad_cost")?;
        check_positive(alpha, "alpha")?;
        check_positive(d0_sq, "d0_sq")?;
        check_positive(epsilon, "epsilon")?;
        if nodes == 0 {
            return Err(Error::invalid("cost model needs at least one node"));
        }
        Ok(CostModel {
            comm_cost,
            grad_cost,
            nodes,
            alpha,
            d0_sq,
            epsilon,
        })
    }

    /// Unit communication cost with the given ratio `r`.
    pub fn from_ratio(
        ratio: f64,
        nodes: usize,
        alpha: f64,
        d0_sq: f64,
        epsilon: f64,
    ) -> Result<Self> {
        CostModel::new(1.0, ratio, nodes, alpha, d0_sq, epsilon)
    }

    /// `r = C_g / C_c`
    pub fn ratio(&self) -> f64 {
        self.grad_cost / self.comm_cost
    }
}

/// `d0² / (α ε Σ_{t<T} h(t))`.
pub fn n_star_bound(cost: &CostModel, model: &DecayModel, steps: u64) -> Result<f64> {
    let s = partial_sum_h(model, steps)?;
    Ok(cost.d0_sq / (cost.alpha * cost.epsilon * s))
}

/// `C_c m d0² (αε)⁻¹ (1 + rT) / Σ_{t<T} h(t)`.
pub fn total_cost_bound(cost: &CostModel, model: &DecayModel, steps: u64) -> Result<f64> {
    let s = partial_sum_h(model, steps)?;
    let scale = cost.comm_cost * cost.nodes as f64 * cost.d0_sq / (cost.alpha * cost.epsilon);
    Ok(scale * (1.0 + cost.ratio() * steps as f64) / s)
}

/// Integer `T` (floor or ceil of `t_star`, at least 1) with the smaller
/// total cost bound.
pub fn round_t_star(cost: &CostModel, model: &DecayModel, t_star: f64) -> Result<u64> {
    check_positive(t_star, "T*")?;
    let lo = (libm::floor(t_star) as u64).max(1);
    let hi = (libm::ceil(t_star) as u64).max(1);
    if lo == hi {
        return Ok(lo);
    }
    let (c_lo, c_hi) = (
        total_cost_bound(cost, model, lo)?,
        total_cost_bound(cost, model, hi)?,
    );
    Ok(if c_hi < c_lo { hi } else { lo })
}

/// `(T, total_cost_bound(T))` for each `T`.
pub fn cost_curve(cost: &CostModel, model: &DecayModel, steps: &[u64]) -> Result<Vec<(u64, f64)>> {
    steps
        .iter()
        .map(|&t| Ok((t, total_cost_bound(cost, model, t)?)))
        .collect()
}

/// Lower real branch `W₋₁` of the Lambert W function: the unique `w <= -1`
/// with `w e^w = x` for `x ∈ [-1/e, 0)`.
///
/// Solved as `w + ln(-w) = ln(-x)` by Newton steps kept inside a bisection
/// bracket, seeded by the branch-point series near `-1/e` and by
/// `ln(-x) - ln(-ln(-x))` elsewhere.
pub fn lambert_w_minus(x: f64) -> Result<f64> {
    // -1/e itself is not exactly representable; allow one ulp of slack.
    let branch = -INV_E;
    if !(x < 0.0) || x < branch - 2.0 * f64::EPSILON * INV_E {
        return Err(Error::Domain {
            what: "Lambert W⁻ argument (needs -1/e <= x < 0)",
            value: x,
        });
    }
    let q = 1.0 + core::f64::consts::E * x;
    if q <= 0.0 {
        return Ok(-1.0);
    }
    let target = libm::log(-x);
    let g = |w: f64| w + libm::log(-w) - target;

    // g is increasing on w < -1 with g(-1) >= 0.
    let mut hi = -1.0;
    let mut lo = 2.0 * target - 2.0;
    while g(lo) > 0.0 {
        lo *= 2.0;
    }

    let mut w = if q < 0.25 {
        let p = -libm::sqrt(2.0 * q);
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        target - libm::log(-target)
    };
    if !(w > lo && w < hi) {
        w = 0.5 * (lo + hi);
    }

    for _ in 0..200 {
        let gw = g(w);
        if gw == 0.0 {
            break;
        }
        if gw > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let slope = 1.0 + 1.0 / w;
        let mut next = w - gw / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 2.0 * f64::EPSILON * w.abs() {
            w = next;
            break;
        }
        w = next;
    }
    Ok(w)
}

/// `(1 + rT) / (1 - β^T)`, the `T`-dependent factor of the cost bound under
/// geometric decay.
pub fn linear_cost_factor(beta: f64, r: f64, t: f64) -> f64 {
    (1.0 + r * t) / (1.0 - libm::pow(beta, t))
}

/// `(1 + rT) / (1 - (1 + aT)^(1-β))`, the factor under power-law decay.
pub fn sublinear_cost_factor(a: f64, beta: f64, r: f64, t: f64) -> f64 {
    (1.0 + r * t) / (1.0 - libm::pow(1.0 + a * t, 1.0 - beta))
}

/// Numerator of `d/dT (1 + rT)/(1 - β^T)`:
/// `r(1 - β^T) + (1 + rT) β^T ln β`.
pub fn linear_stationarity(beta: f64, r: f64, t: f64) -> f64 {
    let bt = libm::pow(beta, t);
    r * (1.0 - bt) + (1.0 + r * t) * bt * libm::log(beta)
}

/// Golden-section minimizer of a unimodal function on `(0, ∞)`. The bracket
/// starts at `(0, 1]` and is grown geometrically until the function turns
/// upward.
pub fn minimize_unimodal<F: Fn(f64) -> f64>(f: F) -> Result<f64> {
    let mut hi = 1.0;
    // grow until f(hi) >= f(hi/2) so the minimum is below hi
    let mut grown = 0;
    while f(hi) < f(0.5 * hi) {
        hi *= 2.0;
        grown += 1;
        if grown > 1100 {
            return Err(Error::NumericFailure("cost factor has no minimum"));
        }
    }
    let mut a = 0.0f64.max(hi * 1e-300);
    let mut b = hi;
    let ratio = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..400 {
        if (b - a) <= 1e-12 * b.abs().max(1e-12) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    Ok(0.5 * (a + b))
}

/// Below this `β^(1/r)` the closed form loses all precision and the
/// minimizer is found numerically.
pub const CLOSED_FORM_UNDERFLOW: f64 = 1e-300;

/// Optimal local step count under geometric decay,
/// `T* = [1 + W⁻(-e⁻¹ β^(1/r))] / ln β - 1/r`.
pub fn t_star_linear(beta: f64, r: f64) -> Result<f64> {
    check_open_unit(beta, "beta")?;
    check_positive(r, "r")?;
    let scaled = libm::exp(libm::log(beta) / r);
    if scaled < CLOSED_FORM_UNDERFLOW {
        return t_star_linear_numeric(beta, r);
    }
    let w = lambert_w_minus(-INV_E * scaled)?;
    Ok((1.0 + w) / libm::log(beta) - 1.0 / r)
}

/// Minimizer of `(1 + rT)/(1 - β^T)` by golden-section search.
pub fn t_star_linear_numeric(beta: f64, r: f64) -> Result<f64> {
    check_open_unit(beta, "beta")?;
    check_positive(r, "r")?;
    minimize_unimodal(|t| linear_cost_factor(beta, r, t))
}

/// `ln(1 + ln(1/β)/r)`, the small-`r` expression that accompanies the
/// closed form. It does not track the exact minimizer in scale (at
/// β = 0.9, r = 0.01 it gives ≈ 2.4 against T* ≈ 25.2) and is reported for
/// diagnostics only.
pub fn t_star_linear_asymptotic(beta: f64, r: f64) -> Result<f64> {
    check_open_unit(beta, "beta")?;
    check_positive(r, "r")?;
    Ok(libm::log(1.0 + libm::log(1.0 / beta) / r))
}

/// `r((1 + aT)^β - 1) - a(β + βrT - 1)`, whose positive root is the optimal
/// `T` under power-law decay.
pub fn sublinear_stationarity(a: f64, beta: f64, r: f64, t: f64) -> f64 {
    r * (libm::pow(1.0 + a * t, beta) - 1.0) - a * (beta + beta * r * t - 1.0)
}

/// Upper end of the bracket search for the sub-linear root.
pub const SUBLINEAR_BRACKET_CAP: f64 = 1e15;

/// Unique positive root of [`sublinear_stationarity`], by bisection.
///
/// Errors if no sign change is found below [`SUBLINEAR_BRACKET_CAP`] or if
/// a scan of the bracket shows more than one sign change.
pub fn t_star_sublinear(a: f64, beta: f64, r: f64) -> Result<f64> {
    check_positive(a, "a")?;
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::Domain {
            what: "beta (power law needs β > 1)",
            value: beta,
        });
    }
    check_positive(r, "r")?;
    let f = |t: f64| sublinear_stationarity(a, beta, r, t);
    // f(0) = -a(β - 1) < 0
    let mut hi = 1.0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        if hi > SUBLINEAR_BRACKET_CAP {
            return Err(Error::NumericFailure("no sign change in sub-linear stationarity bracket"));
        }
    }
    let samples = 256;
    let mut changes = 0;
    let mut prev = f(0.0) > 0.0;
    for k in 1..=samples {
        let t = hi * k as f64 / samples as f64;
        let now = f(t) > 0.0;
        if now != prev {
            changes += 1;
        }
        prev = now;
    }
    if changes != 1 {
        return Err(Error::NumericFailure("stationarity equation has several sign changes"));
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // pick the endpoint with the smaller residual
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

/// Minimizer of `(1 + rT)/(1 - (1 + aT)^(1-β))` by golden-section search.
pub fn t_star_sublinear_numeric(a: f64, beta: f64, r: f64) -> Result<f64> {
    DecayModel::power_law(a, beta)?;
    check_positive(r, "r")?;
    minimize_unimodal(|t| sublinear_cost_factor(a, beta, r, t))
}

/// `(1/a)([a(β - 1)/r]^(1/β) - 1)`, the small-`r` leading term.
pub fn t_star_sublinear_asymptotic(a: f64, beta: f64, r: f64) -> Result<f64> {
    DecayModel::power_law(a, beta)?;
    check_positive(r, "r")?;
    Ok((libm::pow(a * (beta - 1.0) / r, 1.0 / beta) - 1.0) / a)
}

/// Result of fitting both decay families to a local trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayModelFit {
    /// `β` from the slope of `ln y` against `t`.
    pub geometric: DecayModel,
    pub geometric_residual: f64,
    /// `a` from a grid search refined by golden section, `β` from the slope
    /// of `ln y` against `ln(1 + a t)`. `β` may come out `<= 1`.
    pub power_law: DecayModel,
    pub power_law_residual: f64,
    /// Residual of `ln y` against `t` over the second half of the samples.
    pub geometric_tail_residual: f64,
    /// Residual of `ln y` against `ln t` over the second half.
    pub power_law_tail_residual: f64,
}

impl DecayModelFit {
    /// The family whose two-parameter tail fit has the smaller residual.
    ///
    /// The full power-law fit is not used for this: with `a -> 0` and
    /// `aβ` fixed it approaches any geometric decay, so its residual is
    /// never worse than the geometric one.
    pub fn preferred(&self) -> DecayModel {
        if self.geometric_tail_residual <= self.power_law_tail_residual {
            self.geometric
        } else {
            self.power_law
        }
    }

    pub fn is_geometric(&self) -> bool {
        matches!(self.preferred(), DecayModel::Geometric { .. })
    }
}

pub const MIN_TRAJECTORY: usize = 10;
const POWER_LAW_A_MIN: f64 = 1e-3;
const POWER_LAW_A_MAX: f64 = 1e3;
const POWER_LAW_GRID: usize = 121;

/// Fits `h` to squared gradient norms `y_t`, `t = 0, 1, ...`.
pub fn fit_decay_model(trajectory: &[f64]) -> Result<DecayModelFit> {
    if trajectory.len() < MIN_TRAJECTORY {
        return Err(Error::invalid(alloc::format!(
            "decay model fit needs at least {MIN_TRAJECTORY} samples, got {}",
            trajectory.len()
        )));
    }
    let mut log_y = Vec::with_capacity(trajectory.len());
    for &y in trajectory {
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Domain {
                what: "trajectory sample",
                value: y,
            });
        }
        log_y.push(libm::log(y));
    }
    let ts: Vec<f64> = (0..trajectory.len()).map(|t| t as f64).collect();
    let geo = fit_line(&ts, &log_y)?;
    if !(geo.slope < 0.0) {
        return Err(Error::invalid("trajectory is not decaying"));
    }

    let power_fit = |log_a: f64| {
        let a = libm::exp(log_a);
        let xs: Vec<f64> = ts.iter().map(|t| libm::log1p(a * t)).collect();
        fit_line(&xs, &log_y).expect("distinct abscissae for t >= 0")
    };
    let (lo, hi) = (libm::log(POWER_LAW_A_MIN), libm::log(POWER_LAW_A_MAX));
    let step = (hi - lo) / (POWER_LAW_GRID - 1) as f64;
    let mut best = 0;
    let mut best_res = f64::INFINITY;
    for k in 0..POWER_LAW_GRID {
        let res = power_fit(lo + step * k as f64).rms_residual;
        if res < best_res {
            best_res = res;
            best = k;
        }
    }
    // refine inside the neighbouring grid cells
    let mut a_lo = lo + step * best.saturating_sub(1) as f64;
    let mut a_hi = lo + step * (best + 1).min(POWER_LAW_GRID - 1) as f64;
    let ratio = 0.5 * (libm::sqrt(5.0) - 1.0);
    for _ in 0..80 {
        let c = a_hi - ratio * (a_hi - a_lo);
        let d = a_lo + ratio * (a_hi - a_lo);
        if power_fit(c).rms_residual < power_fit(d).rms_residual {
            a_hi = d;
        } else {
            a_lo = c;
        }
    }
    let log_a = 0.5 * (a_lo + a_hi);
    let pl = power_fit(log_a);

    let half = trajectory.len() / 2;
    let tail_t = &ts[half..];
    let tail_log_t: Vec<f64> = tail_t.iter().map(|&t| libm::log(t)).collect();
    let geo_tail = fit_line(tail_t, &log_y[half..])?;
    let pl_tail = fit_line(&tail_log_t, &log_y[half..])?;

    Ok(DecayModelFit {
        geometric: DecayModel::Geometric {
            beta: libm::exp(geo.slope),
        },
        geometric_residual: geo.rms_residual,
        power_law: DecayModel::PowerLaw {
            a: libm::exp(log_a),
            beta: -pl.slope,
        },
        power_law_residual: pl.rms_residual,
        geometric_tail_residual: geo_tail.rms_residual,
        power_law_tail_residual: pl_tail.rms_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn geometric_partial_sums() {
        let m = DecayModel::geometric(0.5).unwrap();
        assert_eq!(partial_sum_h(&m, 3).unwrap(), 1.75);
        assert_eq!(partial_sum_h(&DecayModel::geometric(0.37).unwrap(), 1).unwrap(), 1.0);
        assert!(partial_sum_h(&m, 0).is_err());
    }

    #[test]
    fn power_law_partial_sum() {
        let m = DecayModel::power_law(2.0, 1.5).unwrap();
        let want = 1.0 + libm::pow(3.0, -1.5);
        assert!((partial_sum_h(&m, 2).unwrap() - want).abs() < 1e-15);
        assert!((want - 1.19245).abs() < 1e-5);
    }

    #[test]
    fn loss_power_constants() {
        assert_eq!(
            DecayModel::for_loss_power(2).unwrap(),
            DecayModel::PowerLaw { a: 2.0, beta: 1.5 }
        );
        assert!(DecayModel::for_loss_power(1).is_err());
    }

    #[test]
    fn model_domains() {
        assert!(DecayModel::geometric(1.0).is_err());
        assert!(DecayModel::geometric(0.0).is_err());
        assert!(DecayModel::power_law(0.0, 2.0).is_err());
        assert!(DecayModel::power_law(1.0, 1.0).is_err());
    }

    fn cost(alpha: f64, eps: f64) -> CostModel {
        CostModel::from_ratio(0.5, 1, alpha, 1.0, eps).unwrap()
    }

    #[test]
    fn n_star_examples() {
        let c = cost(0.1, 0.01);
        let any = DecayModel::power_law(3.0, 2.0).unwrap();
        assert!((n_star_bound(&c, &any, 1).unwrap() - 1000.0).abs() < 1e-9);
        let geo = DecayModel::geometric(0.5).unwrap();
        assert!((n_star_bound(&c, &geo, 3).unwrap() - 1000.0 / 1.75).abs() < 1e-9);
    }

    #[test]
    fn total_cost_examples() {
        let c = CostModel::new(1.0, 0.01, 2, 0.5, 4.0, 0.1).unwrap();
        let geo = DecayModel::geometric(0.9).unwrap();
        let s = (1.0 - libm::pow(0.9, 10.0)) / 0.1;
        let want = 2.0 * 4.0 * 20.0 * 1.1 / s;
        assert!((total_cost_bound(&c, &geo, 10).unwrap() - want).abs() < 1e-9);
        assert!((want - 27.02).abs() < 0.01);

        let c = CostModel::from_ratio(0.3, 1, 1.0, 1.0, 1.0).unwrap();
        assert!((total_cost_bound(&c, &geo, 1).unwrap() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn cost_model_validation() {
        assert!(CostModel::new(0.0, 1.0, 1, 1.0, 1.0, 1.0).is_err());
        assert!(CostModel::new(1.0, 1.0, 0, 1.0, 1.0, 1.0).is_err());
        assert!(CostModel::new(1.0, 1.0, 1, 1.0, 1.0, -1.0).is_err());
        let c = CostModel::new(4.0, 1.0, 1, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.ratio(), 0.25);
    }

    #[test]
    fn lambert_special_points() {
        assert_eq!(lambert_w_minus(-INV_E).unwrap(), -1.0);
        let x = -2.0 * libm::exp(-2.0);
        assert!((lambert_w_minus(x).unwrap() + 2.0).abs() < 1e-12);
        // bisection reference value
        assert!((lambert_w_minus(-0.1).unwrap() + 3.577_152_063_957_297).abs() < 1e-12);
    }

    #[test]
    fn lambert_domain() {
        assert!(lambert_w_minus(0.0).is_err());
        assert!(lambert_w_minus(0.5).is_err());
        assert!(lambert_w_minus(-0.4).is_err());
        assert!(lambert_w_minus(f64::NAN).is_err());
    }

    #[test]
    fn t_star_spot_values() {
        let t = t_star_linear(0.9, 0.01).unwrap();
        assert!((t - 25.174_805_74).abs() < 1e-6, "{t}");
        assert!(linear_stationarity(0.9, 0.01, t).abs() / 0.01 < 1e-8);
        let t = t_star_linear(0.5, 0.1).unwrap();
        assert!((t - 3.358_915_925).abs() < 1e-6, "{t}");
        let t = t_star_sublinear(2.0, 1.5, 0.01).unwrap();
        assert!((t - 12.976_464_44).abs() < 1e-6, "{t}");
        assert!(sublinear_stationarity(2.0, 1.5, 0.01, t).abs() < 1e-10);
        let asym = t_star_sublinear_asymptotic(2.0, 1.5, 0.01).unwrap();
        assert!((asym - 10.272_173_45).abs() < 1e-6);
        assert!(t > asym);
    }

    #[test]
    fn t_star_underflow_falls_back() {
        // β^(1/r) = 0.5^(1e4) underflows
        let t = t_star_linear(0.5, 1e-4).unwrap();
        let numeric = t_star_linear_numeric(0.5, 1e-4).unwrap();
        assert_eq!(t, numeric);
        assert!(linear_stationarity(0.5, 1e-4, t).abs() < 1e-10);
    }

    #[test]
    fn rounding_picks_cheaper_neighbour() {
        let c = CostModel::from_ratio(0.01, 1, 1.0, 1.0, 1.0).unwrap();
        let geo = DecayModel::geometric(0.9).unwrap();
        let t = round_t_star(&c, &geo, 25.17).unwrap();
        let c25 = total_cost_bound(&c, &geo, 25).unwrap();
        let c26 = total_cost_bound(&c, &geo, 26).unwrap();
        assert_eq!(t, if c26 < c25 { 26 } else { 25 });
        assert_eq!(round_t_star(&c, &geo, 0.3).unwrap(), 1);
    }

    #[test]
    fn fit_exact_geometric() {
        let y: Vec<f64> = (0..40).map(|t| libm::pow(0.8, t as f64)).collect();
        let fit = fit_decay_model(&y).unwrap();
        assert!(fit.is_geometric());
        match fit.preferred() {
            DecayModel::Geometric { beta } => assert!((beta - 0.8).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fit_exact_power_law() {
        let y: Vec<f64> = (0..200).map(|t| libm::pow(1.0 + 2.0 * t as f64, -1.5)).collect();
        let fit = fit_decay_model(&y).unwrap();
        assert!(!fit.is_geometric());
        match fit.preferred() {
            DecayModel::PowerLaw { a, beta } => {
                assert!((a - 2.0).abs() < 0.1, "a = {a}");
                assert!((beta - 1.5).abs() < 0.075, "beta = {beta}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fit_rejects_bad_samples() {
        assert!(fit_decay_model(&[1.0; 5]).is_err());
        assert!(fit_decay_model(&[1.0; 12]).is_err());
        let mut y = vec![1.0; 12];
        y[3] = -1.0;
        assert!(fit_decay_model(&y).is_err());
    }

    #[test]
    fn bracket_contains_sum() {
        let m = DecayModel::power_law(2.0, 1.5).unwrap();
        for t in [1, 2, 5, 50] {
            let (lo, hi) = m.partial_sum_bracket(t).unwrap();
            let s = partial_sum_h(&m, t).unwrap();
            assert!(lo <= s && s <= hi, "T = {t}: {lo} {s} {hi}");
        }
    }
}
