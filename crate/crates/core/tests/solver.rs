use covert_uav_core::cvxsolver::{check_kkt, solve, QuadConstraint, QuadraticProgram, SolverSettings, SolverStatus};

#[test]
fn linear_program_on_a_box() {
    // min x0 + 2 x1 over [1, 3] x [-2, 4]
    let p = QuadraticProgram {
        c: vec![1.0, 2.0],
        constraints: vec![
            QuadConstraint::affine(vec![0], vec![-1.0], 1.0),
            QuadConstraint::affine(vec![0], vec![1.0], -3.0),
            QuadConstraint::affine(vec![1], vec![-1.0], -2.0),
            QuadConstraint::affine(vec![1], vec![1.0], -4.0),
        ],
    };
    let r = solve(&p, &[2.0, 0.0], &SolverSettings::default());
    assert_eq!(r.status, SolverStatus::Optimal);
    assert!((r.objective - (-3.0)).abs() <= 1e-7);
    assert!((r.variables[0] - 1.0).abs() <= 1e-6 && (r.variables[1] + 2.0).abs() <= 1e-6);
}

#[test]
fn linear_objective_over_a_disc() {
    // min -x0 - x1 s.t. x0² + x1² ≤ 2, optimum (1, 1)
    let p = QuadraticProgram {
        c: vec![-1.0, -1.0],
        constraints: vec![QuadConstraint { vars: vec![0, 1], q: vec![2.0, 0.0, 0.0, 2.0], a: vec![0.0, 0.0], b: -2.0 }],
    };
    let r = solve(&p, &[0.0, 0.0], &SolverSettings::default());
    assert_eq!(r.status, SolverStatus::Optimal);
    assert!((r.objective + 2.0).abs() <= 1e-7);
    let k = check_kkt(&p, &r.variables, None);
    assert!(k.primal <= 1e-9 && k.stationarity <= 1e-5, "{k:?}");
}

#[test]
fn infeasible_program_is_reported() {
    let p = QuadraticProgram {
        c: vec![1.0],
        constraints: vec![
            QuadConstraint::affine(vec![0], vec![1.0], 1.0),
            QuadConstraint::affine(vec![0], vec![-1.0], 1.0),
        ],
    };
    let r = solve(&p, &[0.0], &SolverSettings::default());
    assert_eq!(r.status, SolverStatus::Infeasible);
}
