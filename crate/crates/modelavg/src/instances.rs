//! Random problem generators: consistent multi-node quadratics with a planted
//! common optimum, and affine subspace collections through a shared point.

use modelavg_core::geometry::{AffineSubspace, SubspaceCollection};
use modelavg_core::linalg::{self, Matrix};
use modelavg_core::simulator::Problem;
use modelavg_core::{LeastSquares, Objective, OptimalSet, Result};
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for v in m.row_mut(i) {
            *v = rng.sample(StandardNormal);
        }
    }
    m
}

fn gaussian_vector<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// `m` quadratic least-squares nodes sharing the zero-loss point `planted`.
#[derive(Debug, Clone)]
pub struct QuadraticInstance {
    pub nodes: Vec<LeastSquares>,
    pub planted: Vec<f64>,
    pub start: Vec<f64>,
}

impl QuadraticInstance {
    /// Each node gets between 1 and `max(1, d/2)` Gaussian rows; targets
    /// are `A_i x_planted`. The start point is Gaussian.
    pub fn random<R: Rng>(rng: &mut R, nodes: usize, dim: usize) -> Result<Self> {
        let planted = gaussian_vector(rng, dim);
        let max_rows = (dim / 2).max(1);
        let mut out = Vec::with_capacity(nodes);
        for _ in 0..nodes {
            let rows = rng.gen_range(1..=max_rows);
            let a = gaussian_matrix(rng, rows, dim);
            let b = a.mul_vec(&planted);
            out.push(LeastSquares::new(a, b, 1)?);
        }
        let start = gaussian_vector(rng, dim);
        Ok(QuadraticInstance {
            nodes: out,
            planted,
            start,
        })
    }

    pub fn dim(&self) -> usize {
        self.planted.len()
    }

    /// Node solution sets re-anchored at the planted point.
    pub fn collection(&self) -> Result<SubspaceCollection> {
        let members = self
            .nodes
            .iter()
            .map(|n| match n.solution_set() {
                Some(s) => s.with_anchor(self.planted.clone()),
                None => Ok(AffineSubspace::full(self.dim())),
            })
            .collect::<Result<Vec<_>>>()?;
        SubspaceCollection::new(members, self.planted.clone())
    }

    /// The nodes as a simulator problem whose solution set is the
    /// intersection of the node solution sets.
    pub fn problem(&self) -> Result<Problem> {
        let set = self.collection()?.intersection();
        let nodes: Vec<Box<dyn Objective>> = self
            .nodes
            .iter()
            .map(|n| Box::new(n.clone()) as Box<dyn Objective>)
            .collect();
        Problem::new(nodes)?.with_solution_set(OptimalSet::Affine(set))
    }
}

/// `m` affine subspaces of `R^d` through a common Gaussian point, each with
/// a random orthonormal normal basis of codimension `0..=d` (the first
/// member has codimension at least 1).
pub fn random_collection<R: Rng>(
    rng: &mut R,
    members: usize,
    dim: usize,
) -> Result<SubspaceCollection> {
    let common = gaussian_vector(rng, dim);
    let subspaces = (0..members)
        .map(|i| {
            let k = rng.gen_range(usize::from(i == 0)..=dim);
            random_subspace_through(rng, &common, k)
        })
        .collect::<Result<Vec<_>>>()?;
    SubspaceCollection::new(subspaces, common)
}

/// `m` copies of one random subspace of codimension `1..=d`.
pub fn identical_collection<R: Rng>(
    rng: &mut R,
    members: usize,
    dim: usize,
) -> Result<SubspaceCollection> {
    let common = gaussian_vector(rng, dim);
    let k = rng.gen_range(1..=dim);
    let s = random_subspace_through(rng, &common, k)?;
    SubspaceCollection::new(vec![s; members], common)
}

fn random_subspace_through<R: Rng>(
    rng: &mut R,
    point: &[f64],
    codim: usize,
) -> Result<AffineSubspace> {
    let d = point.len();
    // Gaussian rows are independent with probability one; retry otherwise.
    loop {
        let basis = linalg::orthonormalize_rows(&gaussian_matrix(rng, codim, d), 1e-8);
        if basis.rows() == codim {
            let basis = if codim == 0 { Matrix::zeros(0, d) } else { basis };
            return AffineSubspace::new(point.to_vec(), basis);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planted_point_is_optimal_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = QuadraticInstance::random(&mut rng, 3, 8).unwrap();
        for node in &inst.nodes {
            assert!(node.value(&inst.planted) < 1e-20);
        }
        let p = inst.problem().unwrap();
        assert!(p.solution_set().unwrap().distance(&inst.planted).unwrap() < 1e-9);
    }

    #[test]
    fn collections_share_the_common_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let c = random_collection(&mut rng, 4, 6).unwrap();
            assert!(c.separation_constant().unwrap() >= 1.0 - 1e-12);
            let c = identical_collection(&mut rng, 3, 5).unwrap();
            assert!((c.separation_constant().unwrap() - 1.0).abs() < 1e-9);
        }
    }
}
