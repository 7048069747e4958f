use amp_core::lasso::{lasso_objective, solve_lasso, verify_kkt, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use amp_core::signal_model::{generate_instance, OperatorKind, PriorDistribution};

mod common;
use common::{dense_rows, proximal_gradient_oracle};

#[test]
fn objective_matches_independent_solver() {
    let prior = PriorDistribution::sparse(0.2, 1.0).unwrap();
    for seed in 0..4 {
        let inst = generate_instance(&prior, 0.5, 50, 0.01, OperatorKind::DenseGaussian, seed).unwrap();
        for lambda in [0.02, 0.1, 0.5] {
            let sol = solve_lasso(&inst, lambda, DEFAULT_TOL, DEFAULT_MAX_SWEEPS).unwrap();
            assert!(sol.kkt_residual <= DEFAULT_TOL);
            assert_eq!(sol.kkt_residual, verify_kkt(&inst, &sol.x_hat, lambda));
            let oracle = proximal_gradient_oracle(&dense_rows(&inst), &inst.y, lambda);
            let (a, b) = (lasso_objective(&inst, &sol.x_hat, lambda), lasso_objective(&inst, &oracle, lambda));
            assert!((a - b).abs() <= 1e-6 * b, "seed {seed}, lambda {lambda}: {a} vs {b}");
        }
    }
}

#[test]
fn partial_fourier_design_also_certifies() {
    let prior = PriorDistribution::generalized_gaussian(1.0, 1.0).unwrap();
    let inst = generate_instance(&prior, 0.5, 256, 0.05, OperatorKind::PartialFourier, 4).unwrap();
    let sol = solve_lasso(&inst, 0.3, DEFAULT_TOL, DEFAULT_MAX_SWEEPS).unwrap();
    assert!(verify_kkt(&inst, &sol.x_hat, 0.3) <= DEFAULT_TOL);
}
