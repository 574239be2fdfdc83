//! Local loss oracles.
//!
//! An [`Objective`] is one node's loss `f_i`. Oracles are immutable once
//! built and may be evaluated from several workers at the same time.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{AffineSubspace, OptimalSet, RANK_TOLERANCE};
use crate::linalg::{self, Matrix};

pub trait Objective: Send + Sync {
    fn dimension(&self) -> usize;

    /// Loss at `x`. Callers guarantee `x.len() == self.dimension()`.
    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇f(x)` into `out`. Same length contract as [`Objective::value`].
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);

    /// Lipschitz constant of the gradient (exact or an upper bound).
    fn smoothness(&self) -> f64;

    fn optimal_set(&self) -> Option<&OptimalSet> {
        None
    }

    /// `μ` with `‖∇f(x)‖ >= μ d(x, S)`, when known.
    fn rsc_modulus(&self) -> Option<f64> {
        None
    }
}

fn check_dim<O: Objective + ?Sized>(oracle: &O, x: &[f64]) -> Result<()> {
    if x.len() != oracle.dimension() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dimension(),
            found: x.len(),
        });
    }
    Ok(())
}

pub fn evaluate<O: Objective + ?Sized>(oracle: &O, x: &[f64]) -> Result<f64> {
    check_dim(oracle, x)?;
    Ok(oracle.value(x))
}

pub fn gradient<O: Objective + ?Sized>(oracle: &O, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(oracle, x)?;
    let mut g = vec![0.0; x.len()];
    oracle.gradient_into(x, &mut g);
    Ok(g)
}

pub fn smoothness_estimate<O: Objective + ?Sized>(oracle: &O) -> f64 {
    oracle.smoothness()
}

/// Highest supported loss exponent `l`.
pub const MAX_POWER: u32 = 4;

/// Ball on which the smoothness bound of a non-quadratic least-squares loss
/// is valid.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessRegion {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// `f(x) = 1/(2N) Σ_r (a_r·x - b_r)^(2l)`.
///
/// For `l = 1` the smoothness constant is exactly `λ_max(AᵀA)/N`. For
/// `l > 1` the Hessian `l(2l-1)/N Σ r^(2l-2) a_r a_rᵀ` is unbounded, so the
/// reported constant is the bound `l(2l-1)/N · R^(2l-2) · λ_max(AᵀA)` with
/// `R` the largest residual magnitude on a [`SmoothnessRegion`]. Without an
/// explicit region the unit ball around the origin is used.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    design: Matrix,
    targets: Vec<f64>,
    power: u32,
    lambda_max: f64,
    lambda_min_nonzero: Option<f64>,
    region: Option<SmoothnessRegion>,
    smoothness: f64,
    optimal_set: Option<OptimalSet>,
}

impl LeastSquares {
    pub fn new(design: Matrix, targets: Vec<f64>, power: u32) -> Result<Self> {
        if design.rows() == 0 {
            return Err(Error::invalid("least-squares problem needs at least one row"));
        }
        if design.rows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: design.rows(),
                found: targets.len(),
            });
        }
        if !(1..=MAX_POWER).contains(&power) {
            return Err(Error::invalid(alloc::format!(
                "loss power must be in 1..={MAX_POWER}, got {power}"
            )));
        }
        // AAᵀ and AᵀA share their nonzero spectrum; use the smaller one.
        let gram = if design.rows() <= design.cols() {
            design.gram_rows()
        } else {
            design.gram_cols()
        };
        let eig = linalg::symmetric_eigen(&gram)?;
        let lambda_max = eig.largest().max(0.0);
        let lambda_min_nonzero = eig.smallest_above(RANK_TOLERANCE);
        let optimal_set = AffineSubspace::from_constraints(&design, &targets)
            .ok()
            .map(OptimalSet::Affine);
        let mut ls = LeastSquares {
            design,
            targets,
            power,
            lambda_max,
            lambda_min_nonzero,
            region: None,
            smoothness: 0.0,
            optimal_set,
        };
        ls.smoothness = ls.compute_smoothness();
        Ok(ls)
    }

    /// Sets the ball on which the `l > 1` smoothness bound must hold.
    pub fn with_smoothness_region(mut self, center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.len() != self.design.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.design.cols(),
                found: center.len(),
            });
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Domain {
                what: "region radius",
                value: radius,
            });
        }
        self.region = Some(SmoothnessRegion { center, radius });
        self.smoothness = self.compute_smoothness();
        Ok(self)
    }

    fn compute_smoothness(&self) -> f64 {
        let n = self.rows() as f64;
        let l = self.power;
        if l == 1 {
            return self.lambda_max / n;
        }
        let d = self.design.cols();
        let origin;
        let (center, radius) = match &self.region {
            Some(r) => (r.center.as_slice(), r.radius),
            None => {
                origin = vec![0.0; d];
                (origin.as_slice(), 1.0)
            }
        };
        let max_residual = self
            .design
            .row_iter()
            .zip(&self.targets)
            .map(|(row, b)| (linalg::dot(row, center) - b).abs() + linalg::norm(row) * radius)
            .fold(0.0_f64, f64::max);
        let lf = l as f64;
        lf * (2.0 * lf - 1.0) / n * libm::pow(max_residual, 2.0 * lf - 2.0) * self.lambda_max
    }

    pub fn rows(&self) -> usize {
        self.design.rows()
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn region(&self) -> Option<&SmoothnessRegion> {
        self.region.as_ref()
    }

    /// Solution set `{x : A x = b}` when the system is consistent.
    pub fn solution_set(&self) -> Option<&AffineSubspace> {
        match &self.optimal_set {
            Some(OptimalSet::Affine(s)) => Some(s),
            _ => None,
        }
    }

    /// `σ⁺_min(AᵀA)/N`, the restricted strong convexity modulus of the
    /// quadratic loss.
    pub fn rsc_modulus_estimate(&self) -> Result<f64> {
        if self.power != 1 {
            return Err(Error::invalid(
                "restricted strong convexity modulus is only defined for the quadratic loss",
            ));
        }
        if self.optimal_set.is_none() {
            return Err(Error::invalid("system is inconsistent; optimal set is not a solution set"));
        }
        self.lambda_min_nonzero
            .map(|s| s / self.rows() as f64)
            .ok_or(Error::ZeroMatrix)
    }

    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.design
            .row_iter()
            .zip(&self.targets)
            .map(|(row, b)| linalg::dot(row, x) - b)
            .collect()
    }
}

fn int_pow(x: f64, n: i32) -> f64 {
    (0..n).fold(1.0, |acc, _| acc * x)
}

impl Objective for LeastSquares {
    fn dimension(&self) -> usize {
        self.design.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let two_l = 2 * self.power as i32;
        let sum: f64 = self.residuals(x).iter().map(|&r| int_pow(r, two_l)).sum();
        sum / (2.0 * self.rows() as f64)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let l = self.power as i32;
        let scale = l as f64 / self.rows() as f64;
        out.iter_mut().for_each(|g| *g = 0.0);
        for (row, r) in self.design.row_iter().zip(self.residuals(x)) {
            let w = scale * int_pow(r, 2 * l - 1);
            if w != 0.0 {
                linalg::axpy(w, row, out);
            }
        }
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn optimal_set(&self) -> Option<&OptimalSet> {
        self.optimal_set.as_ref()
    }

    fn rsc_modulus(&self) -> Option<f64> {
        self.rsc_modulus_estimate().ok()
    }
}

/// Which half of the two-node synthetic problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeckNode {
    /// `f_1(x, y) = max(√(x² + (y-1)²) - 1, 0)²`, optimal on the unit disk at (0, 1).
    Disk,
    /// `f_2(x, y) = max(y, 0)²`, optimal on the lower half-plane.
    HalfPlane,
}

/// Two convex C¹ losses on R² whose optimal sets touch only at the origin.
///
/// Both are squared distances to a convex set, whose gradients
/// `2(x - P(x))` are 2-Lipschitz, so the smoothness constant is exactly 2.
#[derive(Debug, Clone)]
pub struct Beck {
    node: BeckNode,
    set: OptimalSet,
}

impl Beck {
    pub fn new(node: BeckNode) -> Self {
        let set = match node {
            BeckNode::Disk => OptimalSet::Ball {
                center: vec![0.0, 1.0],
                radius: 1.0,
            },
            BeckNode::HalfPlane => OptimalSet::HalfSpace {
                normal: vec![0.0, 1.0],
                offset: 0.0,
            },
        };
        Beck { node, set }
    }

    /// Node index 1 or 2.
    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            1 => Ok(Beck::new(BeckNode::Disk)),
            2 => Ok(Beck::new(BeckNode::HalfPlane)),
            _ => Err(Error::invalid(alloc::format!(
                "synthetic problem has nodes 1 and 2, got {index}"
            ))),
        }
    }

    pub fn node(&self) -> BeckNode {
        self.node
    }

    /// The pair `[f_1, f_2]`.
    pub fn pair() -> [Beck; 2] {
        [Beck::new(BeckNode::Disk), Beck::new(BeckNode::HalfPlane)]
    }

    /// The common optimal set, the single point (0, 0).
    pub fn intersection() -> AffineSubspace {
        AffineSubspace::point(vec![0.0, 0.0])
    }
}

impl Objective for Beck {
    fn dimension(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        let gap = match self.node {
            BeckNode::Disk => libm::hypot(x[0], x[1] - 1.0) - 1.0,
            BeckNode::HalfPlane => x[1],
        };
        let gap = gap.max(0.0);
        gap * gap
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self.node {
            BeckNode::Disk => {
                let (u, v) = (x[0], x[1] - 1.0);
                let r = libm::hypot(u, v);
                // zero on the closed disk, including its center
                if r <= 1.0 {
                    out[0] = 0.0;
                    out[1] = 0.0;
                } else {
                    let s = 2.0 * (r - 1.0) / r;
                    out[0] = s * u;
                    out[1] = s * v;
                }
            }
            BeckNode::HalfPlane => {
                out[0] = 0.0;
                out[1] = 2.0 * x[1].max(0.0);
            }
        }
    }

    fn smoothness(&self) -> f64 {
        2.0
    }

    fn optimal_set(&self) -> Option<&OptimalSet> {
        Some(&self.set)
    }
}
