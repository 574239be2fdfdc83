use modelavg_core::geometry::{AffineSubspace, SubspaceCollection};
use modelavg_core::linalg::{self, Matrix};
use modelavg_core::objectives::{evaluate, gradient};
use modelavg_core::tradeoff::{
    self, lambert_w_minus, n_star_bound, partial_sum_h, CostModel, DecayModel,
};
use modelavg_core::{Beck, BeckNode, LeastSquares, Objective};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn point(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-r..r)).collect()
}

/// Least squares with power `l` whose smoothness region covers the sampling
/// box `[-2, 2]^d`.
fn least_squares(seed: u64, power: u32) -> LeastSquares {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..8);
    let n = rng.gen_range(1..d);
    let a = gaussian(&mut rng, n, d);
    let planted = point(&mut rng, d, 1.0);
    let b = a.mul_vec(&planted);
    let ls = LeastSquares::new(a, b, power).unwrap();
    ls.with_smoothness_region(vec![0.0; d], 2.0 * (d as f64).sqrt())
        .unwrap()
}

fn oracles(seed: u64) -> Vec<Box<dyn Objective>> {
    let mut v: Vec<Box<dyn Objective>> = vec![
        Box::new(Beck::new(BeckNode::Disk)),
        Box::new(Beck::new(BeckNode::HalfPlane)),
    ];
    for l in 1..=4 {
        v.push(Box::new(least_squares(seed, l)));
    }
    v
}

fn central_difference(f: &dyn Objective, x: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let up = f.value(&y);
        y[i] = x[i] - h;
        let down = f.value(&y);
        y[i] = x[i];
        out[i] = (up - down) / (2.0 * h);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for f in oracles(seed) {
            let x = point(&mut rng, f.dimension(), 2.0);
            let g = gradient(f.as_ref(), &x).unwrap();
            let fd = central_difference(f.as_ref(), &x, 1e-6);
            let err = linalg::distance(&g, &fd);
            prop_assert!(err <= 1e-4 * linalg::norm(&g).max(1.0), "err {err:e} at {x:?}");
        }
    }

    #[test]
    fn gradients_are_lipschitz(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
        for f in oracles(seed) {
            let d = f.dimension();
            let (x, y) = (point(&mut rng, d, 2.0), point(&mut rng, d, 2.0));
            let gx = gradient(f.as_ref(), &x).unwrap();
            let gy = gradient(f.as_ref(), &y).unwrap();
            let lhs = linalg::distance(&gx, &gy);
            let rhs = f.smoothness() * linalg::distance(&x, &y);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn midpoint_convexity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x22);
        for f in oracles(seed) {
            let d = f.dimension();
            let (x, y) = (point(&mut rng, d, 2.0), point(&mut rng, d, 2.0));
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let lhs = evaluate(f.as_ref(), &mid).unwrap();
            let rhs = 0.5 * (f.value(&x) + f.value(&y));
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn solutions_have_zero_loss(seed in any::<u64>(), power in 1u32..=4) {
        let ls = least_squares(seed, power);
        let s = ls.solution_set().unwrap().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = s.project(&point(&mut rng, ls.dimension(), 3.0)).unwrap();
        prop_assert!(ls.value(&x) <= 1e-24);
        prop_assert!(linalg::norm(&gradient(&ls, &x).unwrap()) <= 1e-12);
    }

    #[test]
    fn restricted_strong_convexity(seed in any::<u64>()) {
        let ls = least_squares(seed, 1);
        let mu = ls.rsc_modulus().unwrap();
        let s = ls.solution_set().unwrap().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x33);
        let x = point(&mut rng, ls.dimension(), 3.0);
        let g = linalg::norm(&gradient(&ls, &x).unwrap());
        prop_assert!(g >= mu * s.distance(&x).unwrap() * (1.0 - 1e-9));
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.gen_range(1..10);
        let k = rng.gen_range(0..=d);
        let basis = linalg::orthonormalize_rows(&gaussian(&mut rng, k, d), 1e-8);
        let basis = if basis.rows() == 0 { Matrix::zeros(0, d) } else { basis };
        let s = AffineSubspace::new(point(&mut rng, d, 1.0), basis).unwrap();
        let x = point(&mut rng, d, 5.0);
        let p = s.project(&x).unwrap();
        let pp = s.project(&p).unwrap();
        prop_assert!(linalg::distance(&p, &pp) <= 1e-10);
        prop_assert!(s.distance(&p).unwrap() <= 1e-10);
        let offset = linalg::sub(&x, &p);
        prop_assert!(linalg::norm(&s.direction_component(&offset).unwrap()) <= 1e-10);
        prop_assert!((s.distance(&x).unwrap() - linalg::norm(&offset)).abs() <= 1e-10);
    }

    #[test]
    fn single_member_collection_projects_like_the_member(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.gen_range(1..8);
        let k = rng.gen_range(1..=d);
        let basis = linalg::orthonormalize_rows(&gaussian(&mut rng, k, d), 1e-8);
        prop_assume!(basis.rows() == k);
        let s = AffineSubspace::new(point(&mut rng, d, 1.0), basis).unwrap();
        let c = SubspaceCollection::new(vec![s.clone()], s.anchor().to_vec()).unwrap();
        let x = point(&mut rng, d, 4.0);
        prop_assert!(linalg::distance(&c.project(&x).unwrap(), &s.project(&x).unwrap()) <= 1e-9);
        prop_assert!((c.separation_constant().unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn lambert_round_trip(log_mag in -23.0f64..-1.0) {
        let x = -libm::exp(log_mag).min(1.0 / core::f64::consts::E);
        let w = lambert_w_minus(x).unwrap();
        prop_assert!(w <= -1.0);
        prop_assert!((w * libm::exp(w) - x).abs() <= 1e-12 * x.abs());
    }

    #[test]
    fn partial_sums_and_round_bounds_are_monotone(beta in 0.01f64..0.999, a in 0.01f64..10.0, p in 1.01f64..4.0, t in 1u64..200) {
        let cost = CostModel::from_ratio(0.1, 2, 0.3, 1.5, 1e-3).unwrap();
        for model in [DecayModel::geometric(beta).unwrap(), DecayModel::power_law(a, p).unwrap()] {
            prop_assert!(partial_sum_h(&model, t + 1).unwrap() >= partial_sum_h(&model, t).unwrap());
            prop_assert!(n_star_bound(&cost, &model, t + 1).unwrap() <= n_star_bound(&cost, &model, t).unwrap());
        }
    }

    #[test]
    fn integral_bracket(a in 0.01f64..10.0, p in 1.01f64..4.0, t in 1u64..500) {
        let model = DecayModel::power_law(a, p).unwrap();
        let (lo, hi) = model.partial_sum_bracket(t).unwrap();
        let s = partial_sum_h(&model, t).unwrap();
        prop_assert!(lo <= s * (1.0 + 1e-12) && s <= hi * (1.0 + 1e-12), "{lo} {s} {hi}");
    }

    #[test]
    fn costlier_local_steps_mean_fewer(beta in 0.05f64..0.995) {
        let ts: Vec<f64> = [0.001, 0.01, 0.1]
            .iter()
            .map(|&r| tradeoff::t_star_linear(beta, r).unwrap())
            .collect();
        prop_assert!(ts[1] <= ts[0] && ts[2] <= ts[1], "{ts:?}");
    }
}

#[test]
fn decay_fit_prefers_geometric_for_quadratic_local_descent() {
    use modelavg_core::simulator::{local_descent, LocalUpdatePolicy, StepRule};
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (n, d) = (6, 12);
    let a = gaussian(&mut rng, n, d);
    let b = a.mul_vec(&point(&mut rng, d, 1.0));
    let ls = LeastSquares::new(a, b, 1).unwrap();
    let policy = LocalUpdatePolicy::with_default_step(StepRule::Fixed(60), &ls);
    let out = local_descent(&ls, &point(&mut rng, d, 2.0), &policy).unwrap();
    let fit = tradeoff::fit_decay_model(&out.grad_sq).unwrap();
    assert!(fit.is_geometric(), "{fit:?}");
}
