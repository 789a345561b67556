use aftstab::solvers::{
    cross_validate, enet_fit, fit, fit_path, lambda_grid, lambda_max, lasso_fit, ridge_fit, Family,
    PenaltySpec, SolverOptions,
};
use aftstab::swls::WeightedDesign;
use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn design(x: DMatrix<f64>, y: DVector<f64>) -> WeightedDesign {
    WeightedDesign::from_adjusted(x, y).unwrap()
}

fn random_design(seed: u64, n: usize, p: usize) -> WeightedDesign {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let truth = DVector::from_fn(p, |j, _| if j < 3 { 2.0 } else { 0.0 });
    let noise = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
    let y = &x * truth + noise;
    design(x, y)
}

/// `argmin` of a scalar objective over `[-5, 5]` at step `1e-4`.
fn scalar_grid_min(f: impl Fn(f64) -> f64) -> f64 {
    (0..=100_000)
        .map(|k| -5.0 + k as f64 * 1e-4)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap()
}

fn unit_problem() -> WeightedDesign {
    design(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 2.0))
}

#[test]
fn scalar_examples_match_grid_search() {
    let d = unit_problem();
    let opts = SolverOptions::default();
    let obj = |l1: f64, l2: f64| move |b: f64| 0.5 * (2.0 - b).powi(2) + l1 * b.abs() + l2 * b * b;

    let lasso = lasso_fit(&d, 0.5, &opts).unwrap().coefficients[0];
    assert_abs_diff_eq!(lasso, 1.5, epsilon = 1e-9);
    assert_abs_diff_eq!(lasso, scalar_grid_min(obj(0.5, 0.0)), epsilon = 1e-4);

    let ridge = ridge_fit(&d, 0.5).unwrap()[0];
    assert_abs_diff_eq!(ridge, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(ridge, scalar_grid_min(obj(0.0, 0.5)), epsilon = 1e-4);

    let enet = enet_fit(&d, 0.5, 0.5, &opts).unwrap().coefficients[0];
    assert_abs_diff_eq!(enet, 0.75, epsilon = 1e-9);
    assert_abs_diff_eq!(enet, scalar_grid_min(obj(0.5, 0.5)), epsilon = 1e-4);
}

#[test]
fn lambda_max_is_the_zero_threshold() {
    // Orthonormal columns with Xᵀy = (2, -3).
    let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let d = design(x, DVector::from_vec(vec![2.0, -3.0]));
    assert_eq!(lambda_max(&d).unwrap(), 3.0);
    let opts = SolverOptions::default();
    assert!(lasso_fit(&d, 3.0, &opts).unwrap().coefficients.iter().all(|&b| b == 0.0));
    assert!(lasso_fit(&d, 2.9, &opts).unwrap().coefficients.iter().any(|&b| b != 0.0));
    assert!(lasso_fit(&d, 1e6, &opts).unwrap().coefficients.iter().all(|&b| b == 0.0));
}

#[test]
fn unpenalized_lasso_is_least_squares() {
    let d = random_design(1, 30, 4);
    let ols = (d.x().transpose() * d.x()).lu().solve(&(d.x().transpose() * d.y())).unwrap();
    let lasso = lasso_fit(&d, 0.0, &SolverOptions::default()).unwrap();
    assert!(lasso.converged);
    assert!((lasso.coefficients - ols).amax() <= 1e-6);
}

#[test]
fn ridge_shrinks_as_the_penalty_grows() {
    let d = random_design(2, 25, 5);
    let norms: Vec<f64> = [0.1, 1.0, 10.0]
        .iter()
        .map(|&l| ridge_fit(&d, l).unwrap().norm())
        .collect();
    assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
}

#[test]
fn path_matches_cold_starts_and_starts_at_zero() {
    let d = random_design(3, 40, 8);
    let grid = lambda_grid(&d, 30, 0.01).unwrap();
    let opts = SolverOptions::default();
    for template in [PenaltySpec::lasso(0.0).unwrap(), PenaltySpec::elastic_net(0.0, 0.2).unwrap()] {
        let path = fit_path(&d, &grid, &template, &opts).unwrap();
        if template.family == Family::Lasso {
            assert!(path.coefficients_at(0).iter().all(|&b| b == 0.0));
        }
        for (k, &lambda) in grid.iter().enumerate() {
            let penalty = template.at(lambda);
            let cold = fit(&d, &penalty, &opts, None).unwrap();
            let warm = path.coefficients_at(k);
            assert!((&cold.coefficients - &warm).amax() <= 1e-6, "k = {k}");
            assert!(penalty.kkt_residual(&d, &warm) <= 1e-5);
        }
    }
}

#[test]
fn cross_validation_is_deterministic_and_picks_the_minimum() {
    let d = random_design(4, 60, 10);
    let grid = lambda_grid(&d, 20, 0.01).unwrap();
    let template = PenaltySpec::lasso(0.0).unwrap();
    let opts = SolverOptions::default();
    let a = cross_validate(&d, &grid, &template, 5, 11, &opts).unwrap();
    let b = cross_validate(&d, &grid, &template, 5, 11, &opts).unwrap();
    assert_eq!(a, b);
    let min = a.mean_errors.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(a.mean_errors[a.index], min);
    assert_eq!(a.lambda, grid[a.index]);

    let single = cross_validate(&d, &grid[3..4], &template, 5, 11, &opts).unwrap();
    assert_eq!(single.lambda, grid[3]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coordinate_descent_satisfies_kkt(
        seed in any::<u64>(),
        n in 5usize..30,
        p in 1usize..10,
        frac in 0.0f64..1.0,
        l2 in prop_oneof![Just(0.0), 0.01f64..3.0],
    ) {
        let d = random_design(seed, n, p);
        let lmax = lambda_max(&d).unwrap();
        let penalty = PenaltySpec::new(
            if l2 == 0.0 { Family::Lasso } else { Family::ElasticNet },
            frac * lmax,
            l2,
        ).unwrap();
        let res = fit(&d, &penalty, &SolverOptions::default(), None).unwrap();
        prop_assume!(res.converged);
        let g = d.x().transpose() * (d.y() - d.x() * &res.coefficients) - &res.coefficients * (2.0 * l2);
        for j in 0..p {
            let b = res.coefficients[j];
            if b == 0.0 {
                prop_assert!(g[j].abs() <= penalty.lambda1 + 1e-5);
            } else {
                prop_assert!((g[j] - penalty.lambda1 * b.signum()).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn sweeps_never_increase_the_objective(seed in any::<u64>(), frac in 0.0f64..0.5, l2 in 0.0f64..1.0) {
        let d = random_design(seed, 20, 6);
        let penalty = PenaltySpec::elastic_net(frac * lambda_max(&d).unwrap(), l2).unwrap();
        let opts = SolverOptions { track_objective: true, ..Default::default() };
        let res = fit(&d, &penalty, &opts, None).unwrap();
        for w in res.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn elastic_net_reduces_to_lasso_and_ridge(seed in any::<u64>(), frac in 0.01f64..1.0, l2 in 0.01f64..5.0) {
        let d = random_design(seed, 25, 5);
        let opts = SolverOptions::default();
        let l1 = frac * lambda_max(&d).unwrap();
        let lasso = lasso_fit(&d, l1, &opts).unwrap().coefficients;
        let enet = enet_fit(&d, l1, 0.0, &opts).unwrap().coefficients;
        prop_assert!((lasso - enet).amax() <= 1e-8);
        let ridge = ridge_fit(&d, l2).unwrap();
        let enet = enet_fit(&d, 0.0, l2, &opts).unwrap().coefficients;
        prop_assert!((ridge - enet).amax() <= 1e-8);
    }
}
