//! Cross-checks of every numerical kernel against independent oracles:
//! elimination-based solves, exhaustive enumerations, and hand-built
//! linearized systems.

mod common;

use certiqp::boxqp::{init_iterate, newton_direction, solve, BoxQp, SolverParams};
use certiqp::certificate::iteration_count;
use certiqp::flops::FlopCounter;
use certiqp::linalg::{cholesky, matmul, matvec, norm_inf, solve_spd, DenseMatrix};
use certiqp::penalty::{
    build_boxqp, precompute, recover_solution, solve_soft_qp, ConstraintKind, PenaltyVector,
    QpInstance,
};
use rand::Rng;

#[test]
fn cholesky_solve_matches_elimination_over_a_corpus() {
    let mut rng = common::rng(0x11);
    for trial in 0..150 {
        let n = rng.gen_range(1..=40);
        let a = common::random_spd(&mut rng, n, 0.3);
        let rhs = common::random_vec(&mut rng, n, 2.0);
        let mut counter = FlopCounter::new();
        let factor = cholesky(&a, &mut counter).expect("SPD by construction");
        let x = solve_spd(&factor, &rhs, &mut counter).unwrap();
        let reference = common::solve_linear(&a, &rhs).expect("nonsingular");
        let scale = 1.0 + reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = common::max_abs_diff(&x, &reference);
        assert!(
            err / scale < 1e-8,
            "trial {trial}: dim {n}, error {err:.3e}"
        );
    }
}

#[test]
fn products_match_naive_loops() {
    let mut rng = common::rng(0x12);
    for _ in 0..30 {
        let (r, k, c) = (
            rng.gen_range(1..=12),
            rng.gen_range(1..=12),
            rng.gen_range(1..=12),
        );
        let a = common::random_matrix(&mut rng, r, k, 3.0);
        let b = common::random_matrix(&mut rng, k, c, 3.0);
        let x = common::random_vec(&mut rng, k, 3.0);
        let mut counter = FlopCounter::new();
        let ab = matmul(&a, &b, &mut counter).unwrap();
        let ax = matvec(&a, &x, &mut counter).unwrap();
        let ab_ref = common::naive_matmul(&a, &b);
        let ax_ref = common::naive_matvec(&a, &x);
        assert!(common::max_abs_diff(ab.as_slice(), ab_ref.as_slice()) < 1e-10);
        assert!(common::max_abs_diff(&ax, &ax_ref) < 1e-10);
    }
}

/// The solver's search direction must solve the full linearized system of
/// the scaled problem (stationarity, the two bound couplings, and the two
/// target-centering equations), assembled and solved here independently.
#[test]
fn newton_direction_solves_the_full_linearized_system() {
    let mut rng = common::rng(0x13);
    for trial in 0..40 {
        let n = rng.gen_range(1..=6);
        let hessian = common::random_spd(&mut rng, n, 0.4);
        let mut linear = common::random_vec(&mut rng, n, 2.0);
        linear[0] += 0.5; // keep ‖h‖∞ away from zero
        let qp = BoxQp::new(hessian.clone(), linear.clone()).unwrap();
        let params = SolverParams::new(n, 1e-6).unwrap();
        let mut counter = FlopCounter::new();

        // Half the cases run from the solver's own starting point, half
        // from synthetic strictly feasible iterates that still satisfy the
        // stationarity equation (this is a feasible-path method).
        let mut it = init_iterate(&qp, &params, &mut counter);
        if trial % 2 == 1 {
            let hnorm = norm_inf(&linear, &mut FlopCounter::new());
            let scaled_h: Vec<f64> = linear.iter().map(|v| v / hnorm).collect();
            let z = common::random_vec(&mut rng, n, 0.7);
            let residual = {
                // w = 2λ(H̃z + h̃)
                let mut w = vec![0.0; n];
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += hessian.get(i, j) / hnorm * z[j];
                    }
                    w[i] = 2.0 * params.lambda * (acc + scaled_h[i]);
                }
                w
            };
            for i in 0..n {
                it.z[i] = z[i];
                it.phi[i] = 1.0 - z[i];
                it.psi[i] = 1.0 + z[i];
                it.gamma[i] = 0.5 + residual[i].max(0.0) - residual[i].min(0.0) + rng.gen_range(0.0..1.0);
                it.theta[i] = it.gamma[i] + residual[i];
            }
            it.tau = rng.gen_range(0.3..1.2);
        }

        let direction = newton_direction(&qp, &it, &params, &mut counter).unwrap();

        // Assemble the 5n-dimensional linearized system with naive
        // arithmetic and solve it by elimination.
        let hnorm = norm_inf(&linear, &mut FlopCounter::new());
        let dim = 5 * n;
        let mut system = DenseMatrix::zeros(dim, dim);
        let mut rhs = vec![0.0; dim];
        // Block order: Δz, Δγ, Δθ, Δφ, Δψ.
        for i in 0..n {
            // Stationarity: 2λH̃·Δz + Δγ − Δθ = 0 (residual is zero on
            // the feasible path).
            for j in 0..n {
                system.set(i, j, 2.0 * params.lambda * hessian.get(i, j) / hnorm);
            }
            system.set(i, n + i, 1.0);
            system.set(i, 2 * n + i, -1.0);
            // Bound couplings: Δz + Δφ = 0 and −Δz + Δψ = 0.
            system.set(n + i, i, 1.0);
            system.set(n + i, 3 * n + i, 1.0);
            system.set(2 * n + i, i, -1.0);
            system.set(2 * n + i, 4 * n + i, 1.0);
            // Centering: φΔγ + γΔφ = 2(τ√(γφ) − γφ), same for (θ, ψ).
            system.set(3 * n + i, n + i, it.phi[i]);
            system.set(3 * n + i, 3 * n + i, it.gamma[i]);
            rhs[3 * n + i] =
                2.0 * (it.tau * (it.gamma[i] * it.phi[i]).sqrt() - it.gamma[i] * it.phi[i]);
            system.set(4 * n + i, 2 * n + i, it.psi[i]);
            system.set(4 * n + i, 4 * n + i, it.theta[i]);
            rhs[4 * n + i] =
                2.0 * (it.tau * (it.theta[i] * it.psi[i]).sqrt() - it.theta[i] * it.psi[i]);
        }
        let reference = common::solve_linear(&system, &rhs).expect("linearized system regular");
        for (block, got) in [
            (&direction.dz, 0),
            (&direction.dgamma, n),
            (&direction.dtheta, 2 * n),
            (&direction.dphi, 3 * n),
            (&direction.dpsi, 4 * n),
        ]
        .map(|(v, off)| (v.clone(), off))
        {
            let err = common::max_abs_diff(&block, &reference[got..got + n]);
            assert!(err < 1e-8, "trial {trial}: block at {got} off by {err:.3e}");
        }
    }
}

/// The a-priori iteration counts against a table computed independently
/// with 50-digit arithmetic.
#[test]
fn iteration_counts_match_the_high_precision_table() {
    let table: [(usize, f64, u64); 20] = [
        (1, 1e-6, 30),
        (2, 1e-6, 42),
        (3, 1e-6, 51),
        (4, 1e-6, 60),
        (5, 1e-6, 67),
        (6, 1e-6, 74),
        (8, 1e-6, 86),
        (10, 1e-6, 96),
        (20, 1e-6, 139),
        (30, 1e-6, 173),
        (40, 1e-6, 202),
        (100, 1e-6, 333),
        (1000, 1e-6, 1163),
        (2, 1e-3, 24),
        (5, 1e-3, 39),
        (30, 1e-3, 107),
        (30, 1e-4, 129),
        (30, 1e-9, 240),
        (10, 1e-2, 44),
        (50, 1e-8, 285),
    ];
    for (n, epsilon, expected) in table {
        assert_eq!(
            iteration_count(n, epsilon).unwrap(),
            expected,
            "n = {n}, epsilon = {epsilon}"
        );
    }
}

#[test]
fn box_solver_matches_the_enumeration_oracle() {
    let mut rng = common::rng(0x15);
    for trial in 0..30 {
        let n = rng.gen_range(1..=5);
        let hessian = common::random_spd(&mut rng, n, 1.0);
        let linear = common::random_vec(&mut rng, n, 3.0);
        if norm_inf(&linear, &mut FlopCounter::new()) < 1e-3 {
            continue;
        }
        let qp = BoxQp::new(hessian.clone(), linear.clone()).unwrap();
        let params = SolverParams::new(n, 1e-12).unwrap();
        let result = solve(&qp, &params).unwrap();
        let reference = common::boxqp_enumeration_oracle(&hessian, &linear);
        let err = common::max_abs_diff(&result.z, &reference);
        assert!(err < 1e-5, "trial {trial}: n {n}, error {err:.3e}");
    }
}

/// The transform's cached matrices and per-step vectors against direct
/// elimination-based evaluation of their defining formulas.
#[test]
fn transform_matches_elimination_formulas() {
    let mut rng = common::rng(0x16);
    for trial in 0..40 {
        let m = rng.gen_range(1..=5);
        let n = rng.gen_range(0..=6);
        let n_x = rng.gen_range(1..=3);
        let q = common::random_spd(&mut rng, m, 0.5);
        let f = common::random_matrix(&mut rng, m, n_x, 2.0);
        let g = common::random_matrix(&mut rng, n, m, 2.0);
        let b = common::random_vec(&mut rng, n, 2.0);
        let s = common::random_matrix(&mut rng, n, n_x, 2.0);
        let x = common::random_vec(&mut rng, n_x, 2.0);
        let rho_values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..10.0)).collect();
        let qp = QpInstance::new(q.clone(), f.clone(), g.clone(), b.clone(), s.clone(), x.clone())
            .unwrap();
        let rho = PenaltyVector::new(rho_values.clone(), vec![ConstraintKind::Soft; n]).unwrap();

        let mut counter = FlopCounter::new();
        let cache = precompute(&qp, &rho, &mut counter).unwrap();
        let build = build_boxqp(&qp, &rho, &cache, &mut counter).unwrap();

        // Reference: columns of Q⁻¹Gᵀ by elimination, then the formula
        // chain M, H, r, h.
        let mut m_ref = DenseMatrix::zeros(n, n);
        let qinv_gt: Vec<Vec<f64>> = (0..n)
            .map(|i| common::solve_linear(&q, g.row(i)).expect("Q SPD"))
            .collect();
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += g.get(i, k) * qinv_gt[j][k];
                }
                m_ref.set(i, j, acc);
            }
        }
        let fx = common::naive_matvec(&f, &x);
        let sx = common::naive_matvec(&s, &x);
        let qinv_fx = common::solve_linear(&q, &fx).unwrap();
        let mut r_ref = common::naive_matvec(&g, &qinv_fx);
        for i in 0..n {
            r_ref[i] += b[i] + sx[i];
        }
        let m_rho = common::naive_matvec(&m_ref, &rho_values);
        let mut h_ref = vec![0.0; n];
        let mut h_mat_ref = DenseMatrix::zeros(n, n);
        for i in 0..n {
            h_ref[i] = rho_values[i] * (m_rho[i] + 2.0 * r_ref[i]);
            for j in 0..n {
                h_mat_ref.set(i, j, rho_values[i] * m_ref.get(i, j) * rho_values[j]);
            }
        }
        assert!(
            common::max_abs_diff(cache.m_matrix().as_slice(), m_ref.as_slice()) < 1e-8,
            "trial {trial}: kernel mismatch"
        );
        assert!(
            common::max_abs_diff(cache.hessian().as_slice(), h_mat_ref.as_slice()) < 1e-8
        );
        assert!(common::max_abs_diff(&build.residual, &r_ref) < 1e-9);
        assert!(common::max_abs_diff(build.boxqp.linear(), &h_ref) < 1e-7);

        // Recovery formulas at a random box point.
        let z = common::random_vec(&mut rng, n, 1.0);
        let recovered = recover_solution(&qp, &rho, &z, &cache, &mut counter).unwrap();
        let zhat: Vec<f64> = (0..n).map(|i| rho_values[i] * (z[i] + 1.0) / 2.0).collect();
        let mut fx_plus = fx.clone();
        for j in 0..m {
            for i in 0..n {
                fx_plus[j] += g.get(i, j) * zhat[i];
            }
        }
        let y_ref: Vec<f64> = common::solve_linear(&q, &fx_plus)
            .unwrap()
            .into_iter()
            .map(|v| -v)
            .collect();
        assert!(common::max_abs_diff(&recovered.multipliers, &zhat) < 1e-12);
        assert!(common::max_abs_diff(&recovered.y, &y_ref) < 1e-8);
        let gy = common::naive_matvec(&g, &recovered.y);
        for i in 0..n {
            let w_ref = (gy[i] - b[i] - sx[i]).max(0.0);
            assert!((recovered.violations[i] - w_ref).abs() < 1e-10);
        }
    }
}

/// End-to-end: the soft solve's recovered point must beat or match any
/// nearby perturbation on the penalized objective (local optimality), and
/// must match the hard-QP enumeration oracle when the penalties dominate
/// the true multipliers.
#[test]
fn soft_solve_is_penalized_optimal_and_exactly_recovers() {
    let mut rng = common::rng(0x17);
    let mut checked = 0;
    while checked < 12 {
        let m = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=4);
        let q = common::random_spd(&mut rng, m, 1.0);
        let f = common::random_vec(&mut rng, m, 2.0);
        let g = common::random_matrix(&mut rng, n, m, 2.0);
        let anchor = common::random_vec(&mut rng, m, 1.0);
        let g_anchor = common::naive_matvec(&g, &anchor);
        let b: Vec<f64> = (0..n)
            .map(|i| g_anchor[i] + rng.gen_range(0.0..0.3))
            .collect();
        let hard = match common::hard_qp_enumeration_oracle(&q, &f, &g, &b) {
            Some(solution) => solution,
            None => continue,
        };
        let rho_scalar = 2.0
            * hard
                .multipliers
                .iter()
                .fold(0.0f64, |acc, v| acc.max(v.abs()))
            + 1.0;

        let f_mat =
            DenseMatrix::from_rows(&f.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
        let s = DenseMatrix::zeros(n, 1);
        let qp = QpInstance::new(q.clone(), f_mat, g.clone(), b.clone(), s, vec![1.0]).unwrap();
        let rho = PenaltyVector::uniform(rho_scalar, vec![ConstraintKind::Soft; n]).unwrap();
        let result = solve_soft_qp(&qp, &rho, 1e-10).unwrap();

        let err = common::max_abs_diff(&result.y, &hard.y);
        assert!(
            err < 1e-4,
            "exact recovery failed: error {err:.3e} with rho {rho_scalar:.3}"
        );

        // Local optimality of the penalized objective at the recovered y.
        let rho_vec = vec![rho_scalar; n];
        let base = common::penalized_objective(&q, &f, &g, &b, &rho_vec, &result.y);
        for _ in 0..20 {
            let mut perturbed = result.y.clone();
            for value in perturbed.iter_mut() {
                *value += rng.gen_range(-1e-3..1e-3);
            }
            let other = common::penalized_objective(&q, &f, &g, &b, &rho_vec, &perturbed);
            assert!(other >= base - 1e-7, "penalized objective not minimal");
        }
        checked += 1;
    }
}
