use super::*;
use alloc::vec;
use proptest::prelude::*;

fn dense_q(k: usize, diag: &[f64], off: f64) -> Vec<f64> {
    let mut q = vec![0.0; k * k];
    for i in 0..k {
        q[i * k + i] = diag[i];
        if i + 1 < k {
            q[i * k + i + 1] = off;
            q[(i + 1) * k + i] = off;
        }
    }
    q
}

#[test]
fn one_dimensional_box() {
    // min −R s.t. R ≤ 3, R ≥ 0
    let p = QuadraticProgram {
        c: vec![-1.0],
        constraints: vec![
            QuadConstraint::affine(vec![0], vec![1.0], -3.0),
            QuadConstraint::affine(vec![0], vec![-1.0], 0.0),
        ],
    };
    let r = solve(&p, &[1.0], &SolverSettings::default());
    assert_eq!(r.status, SolverStatus::Optimal);
    assert!((r.variables[0] - 3.0).abs() < 1e-6, "{:?}", r.variables);
    let k = check_kkt(&p, &[3.0], None);
    assert!(k.primal < 1e-8 && k.stationarity < 1e-8 && k.complementarity < 1e-8, "{k:?}");
}

struct Soc;

impl ConvexProgram for Soc {
    fn num_vars(&self) -> usize {
        1
    }
    fn objective(&self) -> &[f64] {
        &[-1.0]
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn vars(&self, _i: usize) -> &[usize] {
        &[0]
    }
    fn is_affine(&self, _i: usize) -> bool {
        false
    }
    fn eval(&self, _i: usize, x: &[f64], grad: Option<&mut [f64]>, hess: Option<&mut [f64]>) -> f64 {
        let s = math::sqrt(2.0 + 2.0 * x[0] * x[0]);
        if let Some(g) = grad {
            g[0] = 2.0 * x[0] / s;
        }
        if let Some(h) = hess {
            h[0] = 2.0 / s - 4.0 * x[0] * x[0] / (s * s * s);
        }
        s - 3.0
    }
}

#[test]
fn second_order_cone_toy() {
    let r = solve(&Soc, &[0.0], &SolverSettings::default());
    assert_eq!(r.status, SolverStatus::Optimal);
    assert!((r.variables[0] - math::sqrt(3.5)).abs() < 1e-6);
    assert!(r.kkt.stationarity < 1e-7);
}

#[test]
fn infeasible_start_goes_through_phase_one() {
    let p = QuadraticProgram {
        c: vec![-1.0, 0.0],
        constraints: vec![
            QuadConstraint {
                vars: vec![0, 1],
                q: vec![2.0, 0.0, 0.0, 2.0],
                a: vec![0.0, 0.0],
                b: -1.0,
            },
            QuadConstraint::affine(vec![1], vec![1.0], -0.5),
        ],
    };
    let r = solve(&p, &[4.0, 4.0], &SolverSettings::default());
    assert_eq!(r.status, SolverStatus::Optimal);
    assert!(r.phase1_iterations > 0);
    assert!((r.variables[0] - 1.0).abs() < 1e-6 && r.variables[1].abs() < 1e-3);
}

#[test]
fn infeasible_problem_is_reported() {
    // x ≤ −1 and x ≥ 1
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

#[test]
fn start_point_residuals_are_reported_componentwise() {
    let p = QuadraticProgram {
        c: vec![-1.0],
        constraints: vec![
            QuadConstraint::affine(vec![0], vec![1.0], -3.0),
            QuadConstraint::affine(vec![0], vec![-1.0], 0.0),
        ],
    };
    let k = check_kkt(&p, &[1.0], None);
    assert_eq!(k.primal_components, vec![-2.0, -1.0]);
    assert_eq!(k.primal, 0.0);
}

#[test]
fn perturbed_optimum_raises_stationarity() {
    // min −x − y on the unit disc
    let p = QuadraticProgram {
        c: vec![-1.0, -1.0],
        constraints: vec![QuadConstraint {
            vars: vec![0, 1],
            q: vec![2.0, 0.0, 0.0, 2.0],
            a: vec![0.0, 0.0],
            b: -1.0,
        }],
    };
    let r = solve(&p, &[0.0, 0.0], &SolverSettings::default());
    let h = core::f64::consts::FRAC_1_SQRT_2;
    assert!((r.variables[0] - h).abs() < 1e-6 && (r.variables[1] - h).abs() < 1e-6);
    let at = check_kkt(&p, &[h, h], None);
    let off = check_kkt(&p, &[h + 1e-3, h], None);
    assert!(at.stationarity < 1e-10);
    assert!(off.stationarity - at.stationarity >= 1e-4, "{}", off.stationarity);
}

#[test]
fn iterates_are_deterministic_and_merit_monotone() {
    let p = QuadraticProgram {
        c: vec![1.0, 2.0, -1.0],
        constraints: vec![QuadConstraint {
            vars: vec![0, 1, 2],
            q: dense_q(3, &[2.0, 3.0, 1.0], 0.4),
            a: vec![0.1, 0.0, -0.2],
            b: -2.0,
        }],
    };
    let settings = SolverSettings {
        log_iterations: true,
        ..SolverSettings::default()
    };
    let a = solve(&p, &[0.0, 0.0, 0.0], &settings);
    let b = solve(&p, &[0.0, 0.0, 0.0], &settings);
    assert_eq!(a, b);
    assert!(!a.log.is_empty());
}

/// Epigraph form of `min ½ xᵀ Q x + cᵀ x` over a box, separable `Q`.
fn separable_box_qp(d: &[f64], c: &[f64], lo: f64, hi: f64) -> (QuadraticProgram, Vec<f64>, f64) {
    let k = d.len();
    let mut q = vec![0.0; (k + 1) * (k + 1)];
    for i in 0..k {
        q[i * (k + 1) + i] = d[i];
    }
    let mut a = c.to_vec();
    a.push(-1.0);
    let mut cons = vec![QuadConstraint {
        vars: (0..=k).collect(),
        q,
        a,
        b: 0.0,
    }];
    for i in 0..k {
        cons.push(QuadConstraint::affine(vec![i], vec![1.0], -hi));
        cons.push(QuadConstraint::affine(vec![i], vec![-1.0], lo));
    }
    let mut obj = vec![0.0; k];
    obj.push(1.0);
    let xs: Vec<f64> = (0..k).map(|i| (-c[i] / d[i]).clamp(lo, hi)).collect();
    let f = (0..k).map(|i| 0.5 * d[i] * xs[i] * xs[i] + c[i] * xs[i]).sum();
    (QuadraticProgram { c: obj, constraints: cons }, xs, f)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn separable_box_qps(
        d in proptest::collection::vec(0.1f64..10.0, 1..12),
        seed in proptest::collection::vec(-5.0f64..5.0, 12),
    ) {
        let c = &seed[..d.len()];
        let (p, _, f) = separable_box_qp(&d, c, -1.0, 1.0);
        let mut x0 = vec![0.0; d.len()];
        x0.push(1.0);
        let r = solve(&p, &x0, &SolverSettings::default());
        prop_assert_eq!(r.status, SolverStatus::Optimal);
        prop_assert!(rel_err(r.objective, f) < 1e-7, "{} vs {}", r.objective, f);
    }

    #[test]
    fn linear_objective_over_ball(
        c in proptest::collection::vec(-3.0f64..3.0, 2..8),
        r in 0.1f64..5.0,
    ) {
        let k = c.len();
        let norm = math::sqrt(c.iter().map(|v| v * v).sum::<f64>());
        prop_assume!(norm > 1e-2);
        let mut q = vec![0.0; k * k];
        for i in 0..k { q[i * k + i] = 2.0; }
        let p = QuadraticProgram {
            c: c.clone(),
            constraints: vec![QuadConstraint { vars: (0..k).collect(), q, a: vec![0.0; k], b: -r * r }],
        };
        let res = solve(&p, &vec![0.0; k], &SolverSettings::default());
        prop_assert_eq!(res.status, SolverStatus::Optimal);
        prop_assert!(rel_err(res.objective, -r * norm) < 1e-7);
    }

    #[test]
    fn unconstrained_quadratic_epigraph(
        diag in proptest::collection::vec(0.5f64..4.0, 3),
        c in proptest::collection::vec(-2.0f64..2.0, 3),
    ) {
        // tridiagonal Q, diagonally dominant
        let off = 0.2;
        let qm = dense_q(3, &diag, off);
        // closed form −Q⁻¹c via Cholesky
        let mut l = qm.clone();
        linalg::dense_cholesky(&mut l, 3).unwrap();
        let mut xs: Vec<f64> = c.iter().map(|v| -v).collect();
        linalg::dense_cholesky_solve(&l, 3, &mut xs);
        let f = 0.5 * linalg::dot(&xs, &c);
        let mut q = vec![0.0; 16];
        for i in 0..3 { for j in 0..3 { q[i * 4 + j] = qm[i * 3 + j]; } }
        let mut a = c.clone();
        a.push(-1.0);
        let p = QuadraticProgram {
            c: vec![0.0, 0.0, 0.0, 1.0],
            constraints: vec![QuadConstraint { vars: vec![0, 1, 2, 3], q, a, b: 0.0 }],
        };
        let res = solve(&p, &[0.0, 0.0, 0.0, 1.0], &SolverSettings::default());
        prop_assert!(rel_err(res.objective, f) < 1e-7, "{} vs {}", res.objective, f);
    }
}

#[test]
fn large_banded_problem_with_wide_affine_constraint() {
    // chain of coupled variables, one budget constraint over all of them
    let k = 400;
    let mut cons = Vec::new();
    for i in 0..k {
        cons.push(QuadConstraint::affine(vec![i], vec![-1.0], 0.0));
        cons.push(QuadConstraint::affine(vec![i], vec![1.0], -1.0));
        if i + 1 < k {
            cons.push(QuadConstraint {
                vars: vec![i, i + 1],
                q: vec![2.0, -2.0, -2.0, 2.0],
                a: vec![0.0, 0.0],
                b: -0.01,
            });
        }
    }
    cons.push(QuadConstraint::affine((0..k).collect(), vec![1.0 / k as f64; k], -0.5));
    let c: Vec<f64> = (0..k).map(|i| -1.0 - (i as f64 / k as f64)).collect();
    let p = QuadraticProgram { c, constraints: cons };
    let r = solve(&p, &vec![0.25; k], &SolverSettings::default());
    assert_eq!(r.status, SolverStatus::Optimal);
    let mean: f64 = r.variables.iter().sum::<f64>() / k as f64;
    assert!((mean - 0.5).abs() < 1e-6);
    for w in r.variables.windows(2) {
        assert!((w[1] - w[0]).abs() <= 0.1 + 1e-7);
    }
}

#[test]
fn settings_validation() {
    assert!(SolverSettings::default().validate().is_ok());
    let bad = SolverSettings {
        barrier_shrink: 1.5,
        ..SolverSettings::default()
    };
    assert!(bad.validate().is_err());
}
