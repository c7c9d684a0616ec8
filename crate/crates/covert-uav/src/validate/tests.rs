use super::*;
use covert_uav_core::scenario::ScenarioParams;
use proptest::prelude::*;

fn cfg() -> ScenarioConfig {
    ScenarioConfig::reference(300.0).unwrap()
}

fn mc(n: usize, seed: u64) -> McSettings {
    McSettings {
        num_samples: n,
        rng_seed: seed,
        ..McSettings::default()
    }
}

/// Rate Bob gets when his location estimate is exact.
fn error_free_rate(q: Vec2, p_w: f64, c: &ScenarioConfig) -> f64 {
    let p = c.params();
    (p_w * p.gamma0 / (q.dist_sq(p.bob_est) + p.altitude_m * p.altitude_m)).ln_1p() / std::f64::consts::LN_2
}

#[test]
fn wilson_matches_reference_intervals() {
    // statsmodels proportion_confint(method="wilson")
    let z95 = 1.959963984540054;
    let a = wilson(0, 100, z95);
    assert_eq!(a.lower, 0.0);
    assert!((a.upper - 0.03699349820698569).abs() < 1e-12);
    let b = wilson(7, 1000, 2.5758293035489004);
    assert!((b.lower - 0.0027411771547325055).abs() < 1e-12);
    assert!((b.upper - 0.01775771144002663).abs() < 1e-12);
    assert!((McSettings::default().z() - 2.5758293035489004).abs() < 1e-9);
}

#[test]
fn settings_reject_small_sample_counts() {
    assert!(mc(999, 1).validate().is_err());
    assert!(mc(1000, 1).validate().is_ok());
}

#[test]
fn vanishing_rate_never_fails() {
    let c = cfg();
    let q = Vec2::new(0.0, 0.0);
    assert_eq!(outage_count(q, 0.1, 1e-300, &c, &mc(10_000, 3), 0), 0);
    assert_eq!(outage_count(q, 0.1, 0.0, &c, &mc(10_000, 3), 0), 0);
}

#[test]
fn outage_at_the_error_free_rate_matches_the_cdf() {
    let c = cfg();
    let p = c.params();
    let q = Vec2::new(-60.0, 320.0);
    let r = error_free_rate(q, 0.05, &c);
    let s = mc(200_000, 11);
    let k = outage_count(q, 0.05, r, &c, &s, 5);
    let lam_b = q.dist_sq(p.bob_est) / p.var_bob_m2;
    let exact = 1.0 - nc_chi2_cdf(lam_b, lam_b);
    let w = wilson(k, 200_000, s.z());
    assert!(w.lower <= exact && exact <= w.upper, "{w:?} vs {exact}");
    let a = analytic_outage(q, 0.05, r, p.bob_est, p.var_bob_m2, p.altitude_m, p.gamma0);
    assert!((a - exact).abs() < 1e-9);
}

#[test]
fn wilson_intervals_cover_the_analytic_outage() {
    let c = cfg();
    let p = c.params().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let trials = 200;
    let mut covered = 0;
    for t in 0..trials {
        let q = p.bob_est + Vec2::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0));
        let pw = rng.random_range(0.001..0.4);
        // target outage between 1% and 30%
        let frac = rng.random_range(0.7..0.999);
        let r = frac * error_free_rate(q, pw, &c);
        let s = mc(4000, 1000 + t);
        let k = outage_count(q, pw, r, &c, &s, t as usize);
        let exact = analytic_outage(q, pw, r, p.bob_est, p.var_bob_m2, p.altitude_m, p.gamma0);
        let w = wilson(k, 4000, s.z());
        if w.lower <= exact && exact <= w.upper {
            covered += 1;
        }
    }
    assert!(covered as f64 >= 0.97 * trials as f64, "{covered}/{trials}");
}

#[test]
fn zero_power_is_perfectly_covert() {
    let c = cfg();
    let w = willie_estimate(c.params().willie_est, 0.0, &c, &mc(5000, 1), 0);
    assert_eq!(w.mean, 1.0);
    assert_eq!(w.std_error, 0.0);
}

#[test]
fn monte_carlo_mean_matches_quadrature() {
    let c = cfg();
    let p = c.params();
    let model = DetectionModel::from_config(&c);
    let s = McSettings {
        grid_fraction: 0.0,
        ..mc(100_000, 5)
    };
    for (i, &lam) in [10.0, 300.0, 1600.0, 5000.0].iter().enumerate() {
        for (j, &pw) in [1e-4, 0.01, 0.1, 0.4].iter().enumerate() {
            let q = p.willie_est + Vec2::new((lam * p.var_willie_m2).sqrt(), 0.0);
            let w = willie_estimate(q, pw, &c, &s, 4 * i + j);
            let quad = xi_bar_quadrature(lam, pw, &model);
            assert!(
                (w.mean - quad).abs() <= 3.0 * w.std_error + 1e-12,
                "λ={lam} P={pw}: {} ± {} vs {quad}",
                w.mean,
                w.std_error
            );
        }
    }
}

#[test]
fn sampled_noise_detector_matches_the_error_rates() {
    let model = DetectionModel::from_config(&cfg());
    for e_w in [0.0, 2e-15, 8e-15] {
        let (p_opt, xi) = min_total_error(e_w, &model);
        for p_th in [p_opt, 0.9 * p_opt, 1.2 * p_opt] {
            let n = 200_000;
            let emp = empirical_detection_error(e_w, p_th, &model, n, 9);
            let want = total_error(p_th, e_w, &model);
            assert!((emp - want).abs() < 5.0 * (2.0 / n as f64).sqrt(), "{e_w} {p_th}: {emp} vs {want}");
        }
        assert!((total_error(p_opt, e_w, &model) - xi).abs() < 1e-12);
    }
}

#[test]
fn grid_cross_check_is_consistent() {
    let c = cfg();
    let q = c.params().willie_est + Vec2::new(60.0, 0.0);
    let s = McSettings {
        grid_fraction: 0.05,
        ..mc(4000, 2)
    };
    let w = willie_estimate(q, 0.1, &c, &s, 0);
    assert_eq!(w.grid_checked, 200);
    assert_eq!(w.grid_violations, 0);
    assert!(w.grid_excess <= 1e-12, "{}", w.grid_excess);
}

#[test]
fn reports_are_reproducible() {
    let mut p = ScenarioParams::reference(6.0);
    p.q_init = Vec2::new(-120.0, 300.0);
    p.q_final = Vec2::new(-96.0, 300.0);
    let c = ScenarioConfig::new(p).unwrap();
    let t = Trajectory {
        waypoints: (1..=6).map(|k| Vec2::new(-120.0 + 4.0 * k as f64, 300.0)).collect(),
    };
    let pw = PowerSchedule { powers: vec![2e-5; 6] };
    let r = RateSchedule { rates: vec![1e-4; 6] };
    let a = validate_schedule(&t, &pw, &r, &c, &mc(5000, 42)).unwrap();
    let b = validate_schedule(&t, &pw, &r, &c, &mc(5000, 42)).unwrap();
    assert_eq!(a, b);
    let d = validate_schedule(&t, &pw, &r, &c, &mc(5000, 43)).unwrap();
    assert_ne!(a.slots[0].xi, d.slots[0].xi);
    assert!(matches!(
        validate_schedule(&t, &pw, &RateSchedule { rates: vec![1e-4; 5] }, &c, &mc(5000, 42)),
        Err(Error::Mismatch(_))
    ));
}

#[test]
fn silent_schedule_passes_and_loud_one_fails_covertness() {
    let mut p = ScenarioParams::reference(4.0);
    p.q_init = p.willie_est + Vec2::new(-8.0, 0.0);
    p.q_final = p.willie_est + Vec2::new(8.0, 0.0);
    let c = ScenarioConfig::new(p.clone()).unwrap();
    let t = Trajectory {
        waypoints: (1..=4).map(|k| p.q_init + Vec2::new(4.0 * k as f64, 0.0)).collect(),
    };
    let rates = RateSchedule { rates: vec![R_MIN; 4] };
    let rep = validate_schedule(&t, &PowerSchedule { powers: vec![0.0; 4] }, &rates, &c, &mc(2000, 1)).unwrap();
    assert!(rep.pass, "{:?}", rep.criteria);
    assert!(rep.slots.iter().all(|s| s.silent && s.xi.estimate == 1.0 && s.outage.estimate == 1.0));

    let mut powers = vec![0.0; 4];
    powers[2] = 0.4;
    let rep = validate_schedule(&t, &PowerSchedule { powers }, &rates, &c, &mc(2000, 1)).unwrap();
    assert!(!rep.pass);
    assert_eq!(rep.failing_covertness_slots, vec![2]);
}

#[test]
fn gaussian_approximation_distance() {
    let ks0 = ks_gaussian_approx(0.0, 20_001);
    // exponential against N(2, 4): the Gaussian mass below zero dominates
    assert!((ks0 - normal_cdf(-1.0, 0.0, 1.0)).abs() < 1e-6, "{ks0}");
    assert!(ks_gaussian_approx(100.0, 20_001) < 0.02);
    assert!(ks_gaussian_approx(1600.0, 20_001) < 0.005);
}

#[test]
fn bound_chain_on_a_small_grid() {
    let model = DetectionModel::from_config(&cfg());
    let audit = bound_audit(&model, &[10.0, 1600.0, 5000.0], &[0.0, 1e-3, 0.1, 0.4]);
    assert_eq!(audit.points.len(), 12);
    for a in audit.points.iter().filter(|a| a.power_w == 0.0) {
        assert_eq!((a.expected_g, a.bound_simplified, a.xi_bar, a.xi_check), (0.0, 0.0, 1.0, 1.0));
    }
    let a = audit.points.iter().find(|a| a.lambda == 1600.0 && a.power_w == 0.1).unwrap();
    assert!(a.xi_bar - a.xi_check >= 0.0, "{a:?}");
    assert_eq!(audit.violations_of(CHECK_XI), 0);
    assert_eq!(audit.violations_of(CHECK_GENERIC_EQ), 0);
    assert_eq!(audit.violations_of(CHECK_ORDER), 0);
}

#[test]
fn log_grid_endpoints() {
    let g = log_grid(10.0, 5000.0, 20);
    assert_eq!(g.len(), 20);
    assert!((g[0] - 10.0).abs() < 1e-12 && (g[19] - 5000.0).abs() < 1e-9);
    assert!(g.windows(2).all(|w| w[1] > w[0]));
}

proptest! {
    #[test]
    fn grid_never_beats_the_closed_form(e in 0.0f64..2e-13) {
        let model = DetectionModel::from_config(&cfg());
        let (grid, res) = threshold_grid_min(e, &model, 1000);
        let xi = min_total_error(e, &model).1;
        prop_assert!(grid >= xi - 1e-12);
        prop_assert!(grid - xi <= res + 1e-12);
    }

    #[test]
    fn simplified_bound_dominates_the_gaussian_form(lam in 0.0f64..1e5, p in 1e-6f64..1.0) {
        let model = DetectionModel::from_config(&cfg());
        prop_assert!(expected_g_mad_bound(lam, p, &model) <= g_upper(lam, p, &model) * (1.0 + 1e-12));
        // the algebraic reason: √(λ+1)/(λ+2) ≤ 1/√(λ+1)
        prop_assert!((lam + 1.0).sqrt() / (lam + 2.0) <= 1.0 / (lam + 1.0).sqrt());
    }
}
