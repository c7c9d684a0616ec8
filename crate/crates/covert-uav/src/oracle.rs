//! Reference numerics: noncentral chi-square CDF, the analytic outage
//! probability and quadratures of the warden's averaged error rate.

use covert_uav_core::detection::{min_total_error, nc_chi2_pdf, DetectionModel};
use covert_uav_core::Vec2;
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, ln_gamma};

/// Truncation target for the Poisson-mixture tails.
const SERIES_TAIL: f64 = 1e-13;
const QUAD_TOL: f64 = 1e-14;

/// CDF of the two-dof noncentral chi-square,
/// `Σ_k Pois(k; λ/2) · P(k + 1, x/2)` with `P` the regularized lower gamma.
///
/// Summed outward from the Poisson mode with the gamma terms carried by
/// recurrence; both tails are cut once their remaining mass is below 1e-13.
pub fn nc_chi2_cdf(x: f64, lam: f64) -> f64 {
    if x <= 0.0 || x.is_nan() {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let y = 0.5 * x;
    if lam <= 0.0 {
        return -(-y).exp_m1();
    }
    let m = 0.5 * lam;
    let ln_m = m.ln();
    let ln_y = y.ln();
    let k0 = m.floor();
    let w0 = (-m + k0 * ln_m - ln_gamma(k0 + 1.0)).exp();
    let f0 = gamma_lr(k0 + 1.0, y);
    // t_k = y^{k+1} e^{-y} / (k+1)!, the step F_k - F_{k+1}
    let t0 = ((k0 + 1.0) * ln_y - y - ln_gamma(k0 + 2.0)).exp();

    let mut sum = w0 * f0;
    let (mut k, mut w, mut f, mut t) = (k0, w0, f0, t0);
    loop {
        f = (f - t).max(0.0);
        t *= y / (k + 2.0);
        w *= m / (k + 1.0);
        k += 1.0;
        sum += w * f;
        let ratio = m / (k + 1.0);
        if w / (1.0 - ratio) < SERIES_TAIL || f == 0.0 && t == 0.0 {
            break;
        }
    }
    let (mut k, mut w, mut f, mut t) = (k0, w0, f0, t0);
    while k >= 1.0 {
        t *= (k + 1.0) / y;
        f = (f + t).min(1.0);
        w *= k / m;
        k -= 1.0;
        sum += w * f;
        let ratio = k / m;
        if w / (1.0 - ratio) < SERIES_TAIL {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

/// Exact probability that Bob's rate falls below `rate_bps_hz`.
///
/// The squared UAV-to-Bob distance over `ε_b²` is noncentral chi-square
/// with `λ_b = ‖q − q̂_b‖² / ε_b²`, so the outage is its upper tail beyond
/// the distance at which the rate equals the target.
pub fn analytic_outage(q: Vec2, power_w: f64, rate_bps_hz: f64, bob_est: Vec2, var_bob: f64, altitude: f64, gamma0: f64) -> f64 {
    if rate_bps_hz <= 0.0 {
        return 0.0;
    }
    let d2 = power_w * gamma0 / (rate_bps_hz * std::f64::consts::LN_2).exp_m1() - altitude * altitude;
    if d2 <= 0.0 {
        return 1.0;
    }
    let lam_b = q.dist_sq(bob_est) / var_bob;
    1.0 - nc_chi2_cdf(d2 / var_bob, lam_b)
}

/// Breakpoints splitting `[0, ∞)` into segments where the distance density
/// is smooth and non-negligible: the mean ± multiples of the deviation.
fn segments(lam: f64, extra: &[f64]) -> Vec<f64> {
    let mu = lam + 2.0;
    let sd = (4.0 * lam + 4.0).sqrt();
    let mut pts = vec![0.0];
    for k in -40..=40 {
        let x = mu + 2.0 * k as f64 * sd;
        if x > 0.0 {
            pts.push(x);
        }
    }
    pts.extend(extra.iter().copied().filter(|&x| x > 0.0 && x < mu + 80.0 * sd));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn integrate_density(lam: f64, extra: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let pts = segments(lam, extra);
    pts.windows(2)
        .map(|w| quadrature::double_exponential::integrate(|x| f(x) * nc_chi2_pdf(x, lam), w[0], w[1], QUAD_TOL).integral)
        .sum()
}

/// Power the warden receives when the normalized distance statistic is `x`.
fn received_at(x: f64, p: f64, model: &DetectionModel) -> f64 {
    p * model.beta0 / (model.var_willie * x + model.altitude * model.altitude)
}

/// Statistic value beyond which the warden's minimum error is positive.
fn kink(p: f64, model: &DetectionModel) -> f64 {
    let gap = (model.rho - 1.0 / model.rho) * model.noise_nominal;
    (p * model.beta0 / gap - model.altitude * model.altitude) / model.var_willie
}

/// `ξ̄* = E_X[ξ*(X)]` by quadrature against the noncentral chi-square density.
pub fn xi_bar_quadrature(lam: f64, p: f64, model: &DetectionModel) -> f64 {
    if p == 0.0 {
        return 1.0;
    }
    integrate_density(lam, &[kink(p, model)], |x| min_total_error(received_at(x, p, model), model).1)
}

/// `E[g(X)]` with `g(x) = ln(1 + ϱ E_w(x) / σ̌²)`, by quadrature.
pub fn expected_g_quadrature(lam: f64, p: f64, model: &DetectionModel) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    integrate_density(lam, &[], |x| (model.rho * received_at(x, p, model) / model.noise_nominal).ln_1p())
}

/// Smallest total error over `points` thresholds evenly spread on
/// `[σ̌²/ϱ, ϱσ̌² + e_w]`, together with the grid's resolution: an upper
/// bound on how far the grid minimum can sit above the true minimum.
pub fn threshold_grid_min(e_w: f64, model: &DetectionModel, points: usize) -> (f64, f64) {
    use covert_uav_core::detection::total_error;
    let s = model.noise_nominal;
    let lo = s / model.rho;
    let hi = model.rho * s + e_w;
    let step = (hi - lo) / (points - 1) as f64;
    let best = (0..points)
        .map(|i| total_error(lo + i as f64 * step, e_w, model))
        .fold(f64::INFINITY, f64::min);
    // both error terms have slope at most 1/(2 ln ϱ · σ̌²/ϱ) on the grid
    let resolution = step / (2.0 * model.rho.ln() * lo);
    (best, resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use covert_uav_core::scenario::ScenarioConfig;

    fn model() -> DetectionModel {
        DetectionModel::from_config(&ScenarioConfig::reference(300.0).unwrap())
    }

    #[test]
    fn central_case_is_exponential() {
        for x in [0.01, 0.5, 2.0, 9.0] {
            assert!((nc_chi2_cdf(x, 0.0) - (1.0 - (-x / 2.0f64).exp())).abs() < 1e-15);
        }
        // tiny noncentrality agrees with the central law to first order
        assert!((nc_chi2_cdf(2.0, 1e-9) - (1.0 - (-1.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn cdf_matches_integrated_density() {
        for lam in [0.5, 7.0, 100.0, 1600.0] {
            let mu = lam + 2.0;
            let sd = (4.0 * lam + 4.0_f64).sqrt();
            for z in [-2.0, -0.5, 0.0, 1.0, 3.0] {
                let x = (mu + z * sd).max(0.1);
                let mut pts = segments(lam, &[x]);
                pts.retain(|&p| p <= x);
                let num: f64 = pts
                    .windows(2)
                    .map(|w| quadrature::double_exponential::integrate(|t| nc_chi2_pdf(t, lam), w[0], w[1], 1e-14).integral)
                    .sum();
                let cdf = nc_chi2_cdf(x, lam);
                assert!((num - cdf).abs() < 1e-10, "λ={lam} x={x}: {num} vs {cdf}");
            }
        }
    }

    #[test]
    fn cdf_known_values() {
        // values from an independent implementation (scipy.stats.ncx2)
        for (x, lam, want) in [(3.0, 2.0, 0.4879456833162039), (10.0, 5.0, 0.7686915506598637), (150.0, 100.0, 0.9861774398794423)] {
            let got = nc_chi2_cdf(x, lam);
            assert!((got - want).abs() < 1e-11, "F({x}; {lam}) = {got}, want {want}");
        }
    }

    #[test]
    fn cdf_is_monotone_and_bounded() {
        let mut prev = 0.0;
        for i in 0..400 {
            let f = nc_chi2_cdf(i as f64 * 10.0, 1600.0);
            assert!((0.0..=1.0).contains(&f) && f >= prev - 1e-15);
            prev = f;
        }
        assert!((prev - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outage_at_the_error_free_rate() {
        let (h, g0, var) = (100.0, 1e-4 / 1e-14, 25.0);
        let bob = Vec2::new(-100.0, 300.0);
        let q = Vec2::new(-80.0, 300.0);
        let p = 0.05;
        let r0 = (p * g0 / (q.dist_sq(bob) + h * h)).ln_1p() / std::f64::consts::LN_2;
        let lam = q.dist_sq(bob) / var;
        let want = 1.0 - nc_chi2_cdf(lam, lam);
        let got = analytic_outage(q, p, r0, bob, var, h, g0);
        assert!((got - want).abs() < 1e-9, "{got} {want}");
        assert!(got > 0.4 && got < 0.6);
        assert_eq!(analytic_outage(q, p, 0.0, bob, var, h, g0), 0.0);
        assert_eq!(analytic_outage(q, 0.0, 0.1, bob, var, h, g0), 1.0);
    }

    #[test]
    fn zero_power_quadratures() {
        let m = model();
        assert_eq!(xi_bar_quadrature(100.0, 0.0, &m), 1.0);
        assert_eq!(expected_g_quadrature(100.0, 0.0, &m), 0.0);
    }

    #[test]
    fn weak_signal_quadratures_agree() {
        // below the kink ξ* = 1 − g / (2 ln ϱ) for every distance
        let m = model();
        let p = 1e-7;
        assert!(kink(p, &m) < 0.0);
        let xi = xi_bar_quadrature(1600.0, p, &m);
        let eg = expected_g_quadrature(1600.0, p, &m);
        assert!(xi < 1.0 && eg > 0.0);
        assert!(((1.0 - xi) * 2.0 * m.rho.ln() - eg).abs() < 1e-10 * eg, "{xi} {eg}");
    }

    #[test]
    fn grid_minimum_brackets_the_closed_form() {
        let m = model();
        for e_w in [0.0, 1e-15, 1e-14, 5e-14, 1e-12] {
            let (grid, res) = threshold_grid_min(e_w, &m, 20_001);
            let (_, xi) = min_total_error(e_w, &m);
            assert!(grid >= xi - 1e-12 && grid - xi <= res + 1e-12, "{e_w}: {grid} {xi} {res}");
        }
    }
}
