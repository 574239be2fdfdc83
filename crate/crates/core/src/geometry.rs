//! Affine subspaces, projections and the separation constant of a
//! collection of affine subspaces with a common point.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SymmetricEigen};

/// Relative rank tolerance used when deciding which eigenvalues are zero.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Largest matrix dimension handed to the dense eigen-solver by the public
/// spectral operations.
pub const EIGEN_SIZE_CAP: usize = 200;

const ORTHONORMAL_TOLERANCE: f64 = 1e-10;

/// `{x : A (x - anchor) = 0}` where the rows of `A` are an orthonormal basis
/// of the orthogonal complement of the direction space.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSubspace {
    anchor: Vec<f64>,
    normal_basis: Matrix,
}

impl AffineSubspace {
    /// Rejects bases whose rows are not orthonormal to 1e-10.
    pub fn new(anchor: Vec<f64>, normal_basis: Matrix) -> Result<Self> {
        if normal_basis.rows() > 0 && normal_basis.cols() != anchor.len() {
            return Err(Error::DimensionMismatch {
                expected: anchor.len(),
                found: normal_basis.cols(),
            });
        }
        let g = normal_basis.gram_rows();
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (g[(i, j)] - want).abs() > ORTHONORMAL_TOLERANCE {
                    return Err(Error::invalid("normal basis rows are not orthonormal"));
                }
            }
        }
        let normal_basis = if normal_basis.rows() == 0 {
            Matrix::zeros(0, anchor.len())
        } else {
            normal_basis
        };
        Ok(AffineSubspace {
            anchor,
            normal_basis,
        })
    }

    /// The whole space `R^d`.
    pub fn full(dim: usize) -> Self {
        AffineSubspace {
            anchor: alloc::vec![0.0; dim],
            normal_basis: Matrix::zeros(0, dim),
        }
    }

    /// The single point `p`.
    pub fn point(p: Vec<f64>) -> Self {
        let d = p.len();
        AffineSubspace {
            anchor: p,
            normal_basis: Matrix::identity(d),
        }
    }

    /// Solution set of the consistent system `A x = b`, anchored at its
    /// minimum-norm solution.
    pub fn from_constraints(a: &Matrix, b: &[f64]) -> Result<Self> {
        if a.rows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                found: b.len(),
            });
        }
        let basis = linalg::orthonormalize_rows(a, 1e-12);
        let d = a.cols();
        if basis.rows() == 0 {
            let residual = linalg::norm(b);
            if residual > 0.0 {
                return Err(Error::Inconsistent { residual });
            }
            return Ok(AffineSubspace::full(d));
        }
        // x = Qᵀ y with (A Qᵀ) y = b, solved through the normal equations of
        // the small k x k system.
        let aq = a.mul(&basis.transpose())?;
        let normal = aq.gram_cols();
        let rhs = aq.tr_mul_vec(b);
        let eig = linalg::symmetric_eigen(&normal)?;
        let keep = eig.range_indices(1e-14);
        let mut y = alloc::vec![0.0; basis.rows()];
        for k in keep {
            let v = eig.vectors.row(k);
            let c = linalg::dot(v, &rhs) / eig.values[k];
            linalg::axpy(c, v, &mut y);
        }
        let anchor = basis.tr_mul_vec(&y);
        let ax = a.mul_vec(&anchor);
        let residual = linalg::distance(&ax, b);
        let scale = 1.0 + linalg::norm(b);
        if residual > 1e-8 * scale {
            return Err(Error::Inconsistent { residual });
        }
        Ok(AffineSubspace {
            anchor,
            normal_basis: basis,
        })
    }

    /// Same direction space, moved to pass through `anchor`.
    pub fn with_anchor(&self, anchor: Vec<f64>) -> Result<Self> {
        self.check_dim(&anchor)?;
        Ok(AffineSubspace {
            anchor,
            normal_basis: self.normal_basis.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn codimension(&self) -> usize {
        self.normal_basis.rows()
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn normal_basis(&self) -> &Matrix {
        &self.normal_basis
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Coordinates of `x - anchor` in the normal basis.
    fn normal_coords(&self, x: &[f64]) -> Vec<f64> {
        let offset = linalg::sub(x, &self.anchor);
        self.normal_basis.mul_vec(&offset)
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let coords = self.normal_coords(x);
        let mut p = x.to_vec();
        for (row, c) in self.normal_basis.row_iter().zip(&coords) {
            linalg::axpy(-c, row, &mut p);
        }
        Ok(p)
    }

    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(linalg::norm(&self.normal_coords(x)))
    }

    /// Component of `v` lying in the direction space.
    pub fn direction_component(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v)?;
        let mut out = v.to_vec();
        for row in self.normal_basis.row_iter() {
            let c = linalg::dot(row, v);
            linalg::axpy(-c, row, &mut out);
        }
        Ok(out)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        Ok(self.distance(x)? <= tol)
    }

    /// `Aᵀ A`, the orthogonal projector onto the normal space.
    pub fn normal_projector(&self) -> Matrix {
        self.normal_basis.gram_cols()
    }
}

/// Closed-form optimal sets understood by the simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimalSet {
    Affine(AffineSubspace),
    /// Closed Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x : normal · x <= offset}` with a unit normal.
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

impl OptimalSet {
    pub fn dim(&self) -> usize {
        match self {
            OptimalSet::Affine(s) => s.dim(),
            OptimalSet::Ball { center, .. } => center.len(),
            OptimalSet::HalfSpace { normal, .. } => normal.len(),
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        match self {
            OptimalSet::Affine(s) => s.project(x),
            OptimalSet::Ball { center, radius } => {
                let r = linalg::distance(x, center);
                if r <= *radius {
                    return Ok(x.to_vec());
                }
                let s = radius / r;
                Ok(center
                    .iter()
                    .zip(x)
                    .map(|(c, xi)| c + s * (xi - c))
                    .collect())
            }
            OptimalSet::HalfSpace { normal, offset } => {
                let excess = linalg::dot(normal, x) - offset;
                let mut p = x.to_vec();
                if excess > 0.0 {
                    linalg::axpy(-excess, normal, &mut p);
                }
                Ok(p)
            }
        }
    }

    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        match self {
            OptimalSet::Affine(s) => s.distance(x),
            OptimalSet::Ball { center, radius } => {
                if x.len() != center.len() {
                    return Err(Error::DimensionMismatch {
                        expected: center.len(),
                        found: x.len(),
                    });
                }
                Ok((linalg::distance(x, center) - radius).max(0.0))
            }
            OptimalSet::HalfSpace { normal, offset } => {
                if x.len() != normal.len() {
                    return Err(Error::DimensionMismatch {
                        expected: normal.len(),
                        found: x.len(),
                    });
                }
                Ok((linalg::dot(normal, x) - offset).max(0.0))
            }
        }
    }
}

/// Affine subspaces sharing a known common point, together with the averaged
/// normal-space projector `Q = (1/m) Σ A_iᵀ A_i`.
#[derive(Debug, Clone)]
pub struct SubspaceCollection {
    members: Vec<AffineSubspace>,
    common_point: Vec<f64>,
    q: Matrix,
    q_eigen: SymmetricEigen,
}

impl SubspaceCollection {
    /// `common_point` must lie in every member to 1e-9. The dimension is
    /// capped at [`EIGEN_SIZE_CAP`].
    pub fn new(members: Vec<AffineSubspace>, common_point: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("subspace collection needs at least one member"));
        }
        let d = common_point.len();
        if d > EIGEN_SIZE_CAP {
            return Err(Error::SizeCap {
                dim: d,
                cap: EIGEN_SIZE_CAP,
            });
        }
        let mut q = Matrix::zeros(d, d);
        for s in &members {
            if s.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: s.dim(),
                });
            }
            let dist = s.distance(&common_point)?;
            if dist > 1e-9 {
                return Err(Error::invalid(alloc::format!(
                    "common point is {dist:e} away from a member"
                )));
            }
            q.add_assign(&s.normal_projector())?;
        }
        q.scale(1.0 / members.len() as f64);
        let q_eigen = linalg::symmetric_eigen(&q)?;
        Ok(SubspaceCollection {
            members,
            common_point,
            q,
            q_eigen,
        })
    }

    pub fn members(&self) -> &[AffineSubspace] {
        &self.members
    }

    pub fn common_point(&self) -> &[f64] {
        &self.common_point
    }

    pub fn q_matrix(&self) -> &Matrix {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.common_point.len()
    }

    /// Range of `Q` as rows of an orthonormal matrix; its orthogonal
    /// complement is the direction space of the intersection.
    fn range_basis(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.q_eigen
            .range_indices(RANK_TOLERANCE)
            .into_iter()
            .map(move |k| self.q_eigen.vectors.row(k))
    }

    /// The intersection as an affine subspace.
    pub fn intersection(&self) -> AffineSubspace {
        let rows: Vec<Vec<f64>> = self.range_basis().map(|r| r.to_vec()).collect();
        let basis = if rows.is_empty() {
            Matrix::zeros(0, self.dim())
        } else {
            Matrix::from_rows(&rows).expect("eigenvectors share width")
        };
        AffineSubspace {
            anchor: self.common_point.clone(),
            normal_basis: basis,
        }
    }

    /// Projection onto the intersection, `p + (I - Q†Q)(x - p)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let offset = linalg::sub(x, &self.common_point);
        let mut out = x.to_vec();
        for v in self.range_basis() {
            let c = linalg::dot(v, &offset);
            linalg::axpy(-c, v, &mut out);
        }
        Ok(out)
    }

    /// Distance to the intersection, `‖Q†Q (x - p)‖`.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let offset = linalg::sub(x, &self.common_point);
        let sq: f64 = self
            .range_basis()
            .map(|v| {
                let c = linalg::dot(v, &offset);
                c * c
            })
            .sum();
        Ok(libm::sqrt(sq))
    }

    /// `(1/m) Σ d(x, S_i)`.
    pub fn mean_member_distance(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for s in &self.members {
            total += s.distance(x)?;
        }
        Ok(total / self.members.len() as f64)
    }

    /// `c = 1 / σ⁺_min(Q)`, the constant in
    /// `d(x, S) <= (c/m) Σ d(x, S_i)`.
    ///
    /// When every member is the whole space `Q = 0` and any positive `c`
    /// works; that case is reported as [`Error::DegenerateCollection`].
    pub fn separation_constant(&self) -> Result<f64> {
        match self.q_eigen.smallest_above(RANK_TOLERANCE) {
            Some(sigma) => Ok((1.0 / sigma).max(1.0)),
            None => Err(Error::DegenerateCollection),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Smallest eigenvalue of a symmetric PSD matrix above
/// `rank_tolerance * λ_max`. Singular values and eigenvalues coincide for
/// PSD input.
pub fn smallest_nonzero_singular_value(m: &Matrix, rank_tolerance: f64) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::invalid("expected a square matrix"));
    }
    if m.rows() > EIGEN_SIZE_CAP {
        return Err(Error::SizeCap {
            dim: m.rows(),
            cap: EIGEN_SIZE_CAP,
        });
    }
    if m.asymmetry() > 1e-12 * m.max_abs().max(1.0) {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    let eig = linalg::symmetric_eigen(m)?;
    eig.smallest_above(rank_tolerance).ok_or(Error::ZeroMatrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line(dir: [f64; 2]) -> AffineSubspace {
        // normal is dir rotated by 90 degrees
        let n = libm::sqrt(dir[0] * dir[0] + dir[1] * dir[1]);
        let normal = Matrix::from_rows(&[[-dir[1] / n, dir[0] / n]]).unwrap();
        AffineSubspace::new(vec![0.0, 0.0], normal).unwrap()
    }

    #[test]
    fn project_onto_x_axis() {
        let s = line([1.0, 0.0]);
        assert_eq!(s.project(&[3.0, 4.0]).unwrap(), vec![3.0, 0.0]);
        assert_eq!(s.distance(&[3.0, 4.0]).unwrap(), 4.0);
        assert_eq!(s.project(&[-2.5, 0.0]).unwrap(), vec![-2.5, 0.0]);
    }

    #[test]
    fn project_onto_diagonal() {
        let s = line([1.0, 1.0]);
        let p = s.project(&[2.0, 0.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        assert!((s.distance(&[2.0, 0.0]).unwrap() - core::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = line([1.0, 0.0]);
        assert!(matches!(
            s.project(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn non_orthonormal_basis_is_rejected() {
        let basis = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        assert!(AffineSubspace::new(vec![0.0, 0.0], basis).is_err());
    }

    #[test]
    fn collection_of_axes_meets_at_origin() {
        let c = SubspaceCollection::new(vec![line([1.0, 0.0]), line([0.0, 1.0])], vec![0.0, 0.0])
            .unwrap();
        assert!((c.distance(&[1.0, 1.0]).unwrap() - core::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((c.separation_constant().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_members_have_unit_separation() {
        let c = SubspaceCollection::new(vec![line([1.0, 0.0]), line([1.0, 0.0])], vec![0.0, 0.0])
            .unwrap();
        assert!((c.separation_constant().unwrap() - 1.0).abs() < 1e-12);
        let single = SubspaceCollection::new(vec![line([3.0, 1.0])], vec![0.0, 0.0]).unwrap();
        assert!((single.separation_constant().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn whole_space_collection_is_degenerate() {
        let c = SubspaceCollection::new(
            vec![AffineSubspace::full(3), AffineSubspace::full(3)],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        assert_eq!(c.separation_constant(), Err(Error::DegenerateCollection));
        assert_eq!(c.distance(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn common_point_must_be_shared() {
        let off = line([1.0, 0.0]).with_anchor(vec![0.0, 1.0]).unwrap();
        assert!(SubspaceCollection::new(vec![line([1.0, 0.0]), off], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn smallest_nonzero_singular_values() {
        let m = Matrix::diagonal(&[0.0, 0.5, 2.0]);
        assert_eq!(smallest_nonzero_singular_value(&m, 1e-9).unwrap(), 0.5);
        assert_eq!(
            smallest_nonzero_singular_value(&Matrix::identity(4), 1e-9).unwrap(),
            1.0
        );
        assert_eq!(
            smallest_nonzero_singular_value(&Matrix::zeros(3, 3), 1e-9),
            Err(Error::ZeroMatrix)
        );
        // Q for {x-axis, y = x}: (1/2)(diag(0,1) + [[.5,-.5],[-.5,.5]])
        let q = Matrix::from_rows(&[[0.25, -0.25], [-0.25, 0.75]]).unwrap();
        let want = (2.0 - core::f64::consts::SQRT_2) / 4.0;
        assert!((smallest_nonzero_singular_value(&q, 1e-9).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn size_cap_is_enforced() {
        let big = Matrix::identity(EIGEN_SIZE_CAP + 1);
        assert!(matches!(
            smallest_nonzero_singular_value(&big, 1e-9),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn constraint_solution_set() {
        let a = Matrix::from_rows(&[[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]).unwrap();
        let s = AffineSubspace::from_constraints(&a, &[2.0, 3.0]).unwrap();
        assert_eq!(s.codimension(), 2);
        let ax = a.mul_vec(s.anchor());
        assert!((ax[0] - 2.0).abs() < 1e-12 && (ax[1] - 3.0).abs() < 1e-12);
        // (1, 1, 2) solves the system, so it is on the set
        assert!(s.distance(&[1.0, 1.0, 2.0]).unwrap() < 1e-12);
        let bad = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(
            AffineSubspace::from_constraints(&bad, &[1.0, 2.0]),
            Err(Error::Inconsistent { .. })
        ));
    }

    #[test]
    fn ball_and_half_space() {
        let ball = OptimalSet::Ball {
            center: vec![0.0, 1.0],
            radius: 1.0,
        };
        assert_eq!(ball.distance(&[0.0, 3.0]).unwrap(), 1.0);
        assert_eq!(ball.project(&[0.0, 3.0]).unwrap(), vec![0.0, 2.0]);
        let half = OptimalSet::HalfSpace {
            normal: vec![0.0, 1.0],
            offset: 0.0,
        };
        assert_eq!(half.distance(&[5.0, -2.0]).unwrap(), 0.0);
        assert_eq!(half.project(&[5.0, 2.0]).unwrap(), vec![5.0, 0.0]);
    }
}
