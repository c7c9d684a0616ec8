//! Warden detection analytics.
//!
//! Willie runs a radiometer with threshold `P_th` against noise whose power
//! is log-uniform on `[σ̌²/ϱ, ϱσ̌²]`. From the UAV's side Willie's position is
//! Gaussian around its estimate, so the normalized squared distance
//! `X = ‖q − q̂_w − e_w‖² / ε_w²` is noncentral chi-square with two degrees of
//! freedom and noncentrality `λ = ‖q − q̂_w‖² / ε_w²`.

use crate::math::{self, Vec2};
use crate::scenario::{channel_gain, ScenarioConfig};

/// Parameters of the warden's detector as seen by the planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionModel {
    /// Noise-uncertainty spread ϱ ≥ 1.
    pub rho: f64,
    /// Nominal noise power σ̌², W.
    pub noise_nominal: f64,
    pub beta0: f64,
    /// ε_w², m².
    pub var_willie: f64,
    pub altitude: f64,
    /// `β1 = β0 ϱ / (ε_w² σ̌²)`.
    pub beta1: f64,
}

impl DetectionModel {
    pub fn new(rho: f64, noise_nominal: f64, beta0: f64, var_willie: f64, altitude: f64) -> Self {
        DetectionModel {
            rho,
            noise_nominal,
            beta0,
            var_willie,
            altitude,
            beta1: beta0 * rho / (var_willie * noise_nominal),
        }
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        let p = cfg.params();
        Self::new(
            p.noise_uncertainty,
            p.noise_nominal_w,
            p.beta0,
            p.var_willie_m2,
            p.altitude_m,
        )
    }

    /// `H² / ε_w²`.
    #[inline]
    pub fn h2_over_var(&self) -> f64 {
        self.altitude * self.altitude / self.var_willie
    }

    #[inline]
    fn two_ln_rho(&self) -> f64 {
        2.0 * math::ln(self.rho)
    }

    #[inline]
    fn degenerate(&self) -> bool {
        self.rho <= 1.0
    }
}

/// Power received by a warden at `q_willie`, `P · β0 / (‖q − q_w‖² + H²)`.
pub fn received_power(p: f64, q_uav: Vec2, q_willie: Vec2, model: &DetectionModel) -> f64 {
    p * channel_gain(q_uav, q_willie, model.altitude, model.beta0)
}

/// `Pr{σ_w² ≥ P_th}` under the log-uniform noise law.
pub fn false_alarm(p_th: f64, model: &DetectionModel) -> f64 {
    let s = model.noise_nominal;
    if model.degenerate() {
        return if p_th <= s { 1.0 } else { 0.0 };
    }
    let lo = s / model.rho;
    let hi = model.rho * s;
    if p_th < lo {
        1.0
    } else if p_th > hi {
        0.0
    } else {
        math::ln(hi / p_th) / model.two_ln_rho()
    }
}

/// `Pr{E_w + σ_w² ≤ P_th}`.
pub fn miss_detection(p_th: f64, e_w: f64, model: &DetectionModel) -> f64 {
    let s = model.noise_nominal;
    if model.degenerate() {
        return if p_th >= e_w + s { 1.0 } else { 0.0 };
    }
    if p_th < e_w + s / model.rho {
        0.0
    } else if p_th > e_w + model.rho * s {
        1.0
    } else {
        math::ln(model.rho * (p_th - e_w) / s) / model.two_ln_rho()
    }
}

/// Total error `P_F + P_M` at threshold `p_th`.
pub fn total_error(p_th: f64, e_w: f64, model: &DetectionModel) -> f64 {
    false_alarm(p_th, model) + miss_detection(p_th, e_w, model)
}

/// Optimal threshold and the resulting minimum total error rate.
///
/// Returns `(ϱσ̌², 0)` once the received power makes the two noise
/// intervals disjoint. With ϱ = 1 the warden detects any `e_w > 0`
/// perfectly, and `e_w = 0` leaves it guessing (`ξ* = 1`).
pub fn min_total_error(e_w: f64, model: &DetectionModel) -> (f64, f64) {
    let s = model.noise_nominal;
    if model.degenerate() {
        return if e_w > 0.0 {
            (s + 0.5 * e_w, 0.0)
        } else {
            (0.5 * s, 1.0)
        };
    }
    let p_th = e_w + s / model.rho;
    let hi = model.rho * s;
    if p_th >= hi {
        return (hi, 0.0);
    }
    if e_w <= 0.0 {
        return (p_th, 1.0);
    }
    (p_th, f64::min(math::ln(hi / p_th) / model.two_ln_rho(), 1.0))
}

/// Noncentral chi-square law of the normalized distance statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncentralChi2 {
    pub dof: u32,
    pub lambda: f64,
}

impl NoncentralChi2 {
    /// The two-degree-of-freedom case used throughout this crate.
    pub fn planar(lambda: f64) -> Self {
        NoncentralChi2 { dof: 2, lambda }
    }

    pub fn mean(&self) -> f64 {
        self.dof as f64 + self.lambda
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.dof as f64 + 4.0 * self.lambda
    }

    /// Density; only defined for `dof == 2`.
    pub fn pdf(&self, x: f64) -> f64 {
        assert_eq!(self.dof, 2, "density implemented for two degrees of freedom");
        nc_chi2_pdf(x, self.lambda)
    }
}

/// Moment-matched Gaussian `(k + λ, 2k + 4λ)`.
pub fn gaussian_approx(nc: NoncentralChi2) -> (f64, f64) {
    (nc.mean(), nc.variance())
}

/// Density of the two-dof noncentral chi-square,
/// `½ e^{−(x+λ)/2} Σ_k (λ/4)^k x^k / (k!)²`.
///
/// The series is summed in log space outward from its largest term until
/// terms drop below `1e-17` of the partial sum on both sides, which keeps
/// the result accurate for `λ x` up to ~1e10.
pub fn nc_chi2_pdf(x: f64, lam: f64) -> f64 {
    if x < 0.0 || !x.is_finite() {
        return 0.0;
    }
    let base = -0.5 * (x + lam);
    let z = 0.25 * lam * x;
    if z == 0.0 {
        return 0.5 * math::exp(base);
    }
    let ln_z = math::ln(z);
    let log_term = |k: f64| k * ln_z - 2.0 * math::ln_gamma(k + 1.0);
    let k_star = math::floor(math::sqrt(z));
    let peak = log_term(k_star);
    // ratio t_{k+1}/t_k = z/(k+1)^2, walk with the ratio to avoid repeated lgamma
    let mut sum = 1.0;
    let mut t = 1.0;
    let mut k = k_star;
    loop {
        t *= z / ((k + 1.0) * (k + 1.0));
        k += 1.0;
        sum += t;
        if t < 1e-17 * sum {
            break;
        }
    }
    let mut t = 1.0;
    let mut k = k_star;
    while k >= 1.0 {
        t *= (k * k) / z;
        k -= 1.0;
        sum += t;
        if t < 1e-17 * sum {
            break;
        }
    }
    0.5 * math::exp(base + peak + math::ln(sum))
}

/// `λ = ‖q − q̂_w‖² / ε_w²`.
#[inline]
pub fn lambda_of(q_uav: Vec2, willie_est: Vec2, var_willie: f64) -> f64 {
    q_uav.dist_sq(willie_est) / var_willie
}

/// `g(x) = ln(1 + β1 P / (x + H²/ε_w²))`; convex and decreasing in `x`.
#[inline]
pub fn g_of(x: f64, p: f64, model: &DetectionModel) -> f64 {
    math::ln_1p(model.beta1 * p / (x + model.h2_over_var()))
}

/// Convex-function bound from the mean absolute deviation, with the upper end
/// of the support sent to infinity:
/// `E f(x) ≤ f(μ) + θ/2 · (slope_inf + (f(a) − f(μ)) / (μ − a))`.
pub fn mad_convex_bound(f_mu: f64, f_a: f64, mu: f64, a: f64, theta: f64, slope_inf: f64) -> f64 {
    f_mu + 0.5 * theta * (slope_inf + (f_a - f_mu) / (mu - a))
}

/// Bound on `E[g(X)]` before the large-λ simplification: the Gaussian
/// approximation plugged into [`mad_convex_bound`] on `[0, ∞)`.
pub fn expected_g_mad_bound(lam: f64, p: f64, model: &DetectionModel) -> f64 {
    let mu = lam + 2.0;
    let theta = math::sqrt(2.0 / core::f64::consts::PI) * 2.0 * math::sqrt(lam + 1.0);
    mad_convex_bound(g_of(mu, p, model), g_of(0.0, p, model), mu, 0.0, theta, 0.0)
}

/// Simplified upper bound `g^u(λ, P)` on `E[g(X)]`.
pub fn g_upper(lam: f64, p: f64, model: &DetectionModel) -> f64 {
    let at_mean = g_of(lam + 2.0, p, model);
    let at_zero = math::ln_1p(model.beta1 * model.var_willie * p / (model.altitude * model.altitude));
    at_mean + math::sqrt(2.0 / core::f64::consts::PI) / math::sqrt(lam + 1.0) * (at_zero - at_mean)
}

/// Lower bound `ξ̌* = 1 − g^u / (2 ln ϱ)` on the averaged minimum error rate.
///
/// Not clamped: the optimizer uses it algebraically and it can leave `[0, 1]`.
/// Use [`clamp_probability`] for reporting.
pub fn xi_lower_bound(lam: f64, p: f64, model: &DetectionModel) -> f64 {
    let gu = g_upper(lam, p, model);
    if gu == 0.0 {
        return 1.0;
    }
    if model.degenerate() {
        return f64::NEG_INFINITY;
    }
    1.0 - gu / model.two_ln_rho()
}

pub fn clamp_probability(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}
