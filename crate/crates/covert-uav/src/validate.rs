//! Monte Carlo validation of planned schedules.
//!
//! Every slot draws its own ChaCha8 stream: the generator is seeded with
//! `seed_from_u64(rng_seed)` and the stream number is `4 · slot + kind`
//! (`kind` 0 for Bob's location error, 1 for Willie's). Slots whose position,
//! power and rate are bit-identical share the estimate of the first of them.

use std::collections::HashMap;

use covert_uav_core::detection::{
    expected_g_mad_bound, g_of, g_upper, mad_convex_bound, min_total_error, received_power, total_error,
    xi_lower_bound, DetectionModel,
};
use covert_uav_core::math::pairwise_sum;
use covert_uav_core::sca::Plan;
use covert_uav_core::scenario::{PowerSchedule, RateSchedule, ScenarioConfig, Trajectory, R_MIN};
use covert_uav_core::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::oracle::{analytic_outage, expected_g_quadrature, nc_chi2_cdf, normal_cdf, threshold_grid_min, xi_bar_quadrature};
use crate::{Error, Result};

const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McSettings {
    pub num_samples: usize,
    pub rng_seed: u64,
    /// Two-sided confidence level of the reported intervals.
    pub confidence: f64,
    /// Share of warden samples also minimized over a threshold grid.
    pub grid_fraction: f64,
    pub grid_points: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            num_samples: 1_000_000,
            rng_seed: 20_240_601,
            confidence: 0.99,
            grid_fraction: 0.01,
            grid_points: 1000,
        }
    }
}

impl McSettings {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples < 1000 {
            return Err(Error::key("mc-samples", "at least 1000", self.num_samples.to_string()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::key("confidence", "a probability in (0, 1)", self.confidence.to_string()));
        }
        if !(0.0..=1.0).contains(&self.grid_fraction) || self.grid_points < 2 {
            return Err(Error::key("grid", "a fraction in [0, 1] and at least 2 points", "out of range"));
        }
        Ok(())
    }

    /// Two-sided normal quantile for [`confidence`](Self::confidence).
    pub fn z(&self) -> f64 {
        Normal::standard().inverse_cdf(0.5 + 0.5 * self.confidence)
    }

    fn rng(&self, slot: usize, kind: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.rng_seed);
        r.set_stream(4 * slot as u64 + kind);
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> Interval {
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    Interval {
        estimate: p,
        lower: if k == 0 { 0.0 } else { (centre - half).max(0.0) },
        upper: if k == n { 1.0 } else { (centre + half).min(1.0) },
    }
}

fn gaussian2(rng: &mut ChaCha8Rng, sd: f64) -> Vec2 {
    Vec2::new(sd * rng.sample::<f64, _>(StandardNormal), sd * rng.sample::<f64, _>(StandardNormal))
}

/// Count of Bob location errors that push the rate below `rate`, out of
/// `mc.num_samples`.
pub fn outage_count(q: Vec2, power_w: f64, rate: f64, cfg: &ScenarioConfig, mc: &McSettings, slot: usize) -> u64 {
    let p = cfg.params();
    let n = mc.num_samples;
    if rate <= 0.0 {
        return 0;
    }
    let target = (rate * std::f64::consts::LN_2).exp_m1();
    let snr0 = power_w * p.gamma0;
    let h2 = p.altitude_m * p.altitude_m;
    let sd = p.var_bob_m2.sqrt();
    let mut rng = mc.rng(slot, 0);
    let mut k = 0;
    for _ in 0..n {
        let e = gaussian2(&mut rng, sd);
        let d2 = (q - p.bob_est - e).norm_sq();
        if snr0 / (d2 + h2) < target {
            k += 1;
        }
    }
    k
}

/// Per-slot estimate of the warden's averaged minimum total error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WillieEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Samples also minimized over the threshold grid.
    pub grid_checked: usize,
    /// Grid minima below the closed form by more than 1e-12.
    pub grid_violations: usize,
    /// Largest `grid − closed form` minus the grid's resolution (≤ 0 when the
    /// grid is consistent).
    pub grid_excess: f64,
}

pub fn willie_estimate(q: Vec2, power_w: f64, cfg: &ScenarioConfig, mc: &McSettings, slot: usize) -> WillieEstimate {
    let p = cfg.params();
    let model = DetectionModel::from_config(cfg);
    let n = mc.num_samples;
    let stride = if mc.grid_fraction > 0.0 {
        ((1.0 / mc.grid_fraction).round() as usize).max(1)
    } else {
        usize::MAX
    };
    let sd = p.var_willie_m2.sqrt();
    let mut rng = mc.rng(slot, 1);
    let mut sums = Vec::with_capacity(n / CHUNK + 1);
    let mut sq = Vec::with_capacity(n / CHUNK + 1);
    let (mut s, mut s2) = (0.0, 0.0);
    let (mut checked, mut violations, mut excess) = (0, 0, f64::NEG_INFINITY);
    for i in 0..n {
        let w = p.willie_est + gaussian2(&mut rng, sd);
        let e_w = received_power(power_w, q, w, &model);
        let xi = min_total_error(e_w, &model).1;
        s += xi;
        s2 += xi * xi;
        if i % stride == 0 {
            let (grid, res) = threshold_grid_min(e_w, &model, mc.grid_points);
            checked += 1;
            if grid < xi - 1e-12 {
                violations += 1;
            }
            excess = f64::max(excess, grid - xi - res);
        }
        if (i + 1) % CHUNK == 0 {
            sums.push(s);
            sq.push(s2);
            s = 0.0;
            s2 = 0.0;
        }
    }
    sums.push(s);
    sq.push(s2);
    let nf = n as f64;
    let mean = pairwise_sum(&sums) / nf;
    let var = (pairwise_sum(&sq) / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    WillieEstimate {
        mean,
        std_error: (var / nf).sqrt(),
        grid_checked: checked,
        grid_violations: violations,
        grid_excess: if checked > 0 { excess } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotValidation {
    pub slot: usize,
    /// Zero power at the minimum rate: nothing is sent, so the outage
    /// criterion does not apply.
    pub silent: bool,
    pub outage: Interval,
    pub outage_analytic: f64,
    pub outage_pass: bool,
    /// Mean with a normal-approximation interval at the report's confidence.
    pub xi: Interval,
    pub xi_std_error: f64,
    pub xi_lower_analytic: f64,
    pub xi_pass: bool,
    pub grid_checked: usize,
    pub grid_violations: usize,
    pub grid_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub num_slots: usize,
    pub mc: McSettings,
    pub rho_b: f64,
    pub rho_w: f64,
    pub slots: Vec<SlotValidation>,
    pub failing_outage_slots: Vec<usize>,
    pub failing_covertness_slots: Vec<usize>,
    pub criteria: Vec<Criterion>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn max_outage_upper(&self) -> f64 {
        self.slots
            .iter()
            .filter(|s| !s.silent)
            .map(|s| s.outage.upper)
            .fold(0.0, f64::max)
    }

    pub fn max_outage(&self) -> f64 {
        self.slots
            .iter()
            .filter(|s| !s.silent)
            .map(|s| s.outage.estimate)
            .fold(0.0, f64::max)
    }

    /// Smallest `ξ̄*` lower confidence limit minus `1 − ρ_w`.
    pub fn min_xi_margin(&self) -> f64 {
        self.slots
            .iter()
            .map(|s| s.xi.lower - (1.0 - self.rho_w))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct SlotKey([u64; 4]);

fn slot_key(q: Vec2, p: f64, r: f64) -> SlotKey {
    SlotKey([q.x.to_bits(), q.y.to_bits(), p.to_bits(), r.to_bits()])
}

/// Validates a schedule against both chance constraints.
///
/// Outage passes when the Wilson upper limit is at most `ρ_b` in every
/// transmitting slot; covertness passes when the lower limit of `ξ̄*` is at
/// least `1 − ρ_w` in every slot.
pub fn validate_schedule(
    traj: &Trajectory,
    power: &PowerSchedule,
    rates: &RateSchedule,
    cfg: &ScenarioConfig,
    mc: &McSettings,
) -> Result<ValidationReport> {
    mc.validate()?;
    let n = cfg.num_slots();
    for (what, len) in [
        ("trajectory", traj.waypoints.len()),
        ("power schedule", power.powers.len()),
        ("rate schedule", rates.rates.len()),
    ] {
        if len != n {
            return Err(Error::Mismatch(format!("{what} has {len} slots but the scenario has {n}")));
        }
    }
    let p = cfg.params();
    let model = DetectionModel::from_config(cfg);
    let z = mc.z();

    let mut first: HashMap<SlotKey, usize> = HashMap::new();
    let mut unique = Vec::new();
    let owner: Vec<usize> = (0..n)
        .map(|i| {
            let key = slot_key(traj.waypoints[i], power.powers[i], rates.rates[i]);
            *first.entry(key).or_insert_with(|| {
                unique.push(i);
                unique.len() - 1
            })
        })
        .collect();
    let estimates: Vec<(u64, WillieEstimate)> = unique
        .par_iter()
        .map(|&i| {
            let q = traj.waypoints[i];
            (
                outage_count(q, power.powers[i], rates.rates[i], cfg, mc, i),
                willie_estimate(q, power.powers[i], cfg, mc, i),
            )
        })
        .collect();

    let slots: Vec<SlotValidation> = (0..n)
        .map(|i| {
            let (k, w) = estimates[owner[i]];
            let (q, pw, r) = (traj.waypoints[i], power.powers[i], rates.rates[i]);
            let silent = pw == 0.0 && r <= R_MIN;
            let outage = wilson(k, mc.num_samples as u64, z);
            let lam = q.dist_sq(p.willie_est) / p.var_willie_m2;
            let xi = Interval {
                estimate: w.mean,
                lower: w.mean - z * w.std_error,
                upper: w.mean + z * w.std_error,
            };
            SlotValidation {
                slot: i,
                silent,
                outage,
                outage_analytic: analytic_outage(q, pw, r, p.bob_est, p.var_bob_m2, p.altitude_m, p.gamma0),
                outage_pass: silent || outage.upper <= p.rho_b,
                xi,
                xi_std_error: w.std_error,
                xi_lower_analytic: xi_lower_bound(lam, pw, &model),
                xi_pass: xi.lower >= 1.0 - p.rho_w,
                grid_checked: w.grid_checked,
                grid_violations: w.grid_violations,
                grid_excess: w.grid_excess,
            }
        })
        .collect();

    let failing_outage_slots: Vec<usize> = slots.iter().filter(|s| !s.outage_pass).map(|s| s.slot).collect();
    let failing_covertness_slots: Vec<usize> = slots.iter().filter(|s| !s.xi_pass).map(|s| s.slot).collect();
    let grid_bad: usize = slots.iter().map(|s| s.grid_violations).sum();
    let grid_excess = slots.iter().map(|s| s.grid_excess).fold(f64::NEG_INFINITY, f64::max);
    let mut report = ValidationReport {
        num_slots: n,
        mc: *mc,
        rho_b: p.rho_b,
        rho_w: p.rho_w,
        slots,
        criteria: Vec::new(),
        pass: false,
        failing_outage_slots,
        failing_covertness_slots,
    };
    report.criteria = vec![
        Criterion {
            name: "outage".into(),
            pass: report.failing_outage_slots.is_empty(),
            detail: format!(
                "max Wilson upper limit {:.6} vs rho_b {}; failing slots {:?}",
                report.max_outage_upper(),
                p.rho_b,
                report.failing_outage_slots
            ),
        },
        Criterion {
            name: "covertness".into(),
            pass: report.failing_covertness_slots.is_empty(),
            detail: format!(
                "min lower limit of mean xi minus (1 - rho_w): {:.3e}; failing slots {:?}",
                report.min_xi_margin(),
                report.failing_covertness_slots
            ),
        },
        Criterion {
            name: "threshold_grid".into(),
            pass: grid_bad == 0 && grid_excess <= 1e-12,
            detail: format!("{grid_bad} grid minima below the closed form; worst excess over resolution {grid_excess:.3e}"),
        },
    ];
    report.pass = report.criteria.iter().all(|c| c.pass);
    Ok(report)
}

pub fn validate_plan(plan: &Plan, cfg: &ScenarioConfig, mc: &McSettings) -> Result<ValidationReport> {
    validate_schedule(&plan.trajectory, &plan.power, &plan.rates, cfg, mc)
}

/// Monte Carlo total error of the radiometer at a fixed threshold, drawing
/// the noise power from its log-uniform law under each hypothesis.
pub fn empirical_detection_error(e_w: f64, p_th: f64, model: &DetectionModel, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = || model.noise_nominal * model.rho.powf(rng.random_range(-1.0..=1.0));
    let false_alarms = (0..n).filter(|_| noise() >= p_th).count();
    let misses = (0..n).filter(|_| e_w + noise() <= p_th).count();
    (false_alarms + misses) as f64 / n as f64
}

/// Sup-distance between the noncentral chi-square(2, λ) CDF and its
/// moment-matched Gaussian `N(λ + 2, 4λ + 4)` over `points` abscissae on
/// `[max(0, μ − 12σ), μ + 12σ]`. Below zero the chi-square CDF vanishes, so
/// the Gaussian mass there is part of the distance.
pub fn ks_gaussian_approx(lam: f64, points: usize) -> f64 {
    let mu = lam + 2.0;
    let sd = (4.0 * lam + 4.0).sqrt();
    let lo = (mu - 12.0 * sd).max(0.0);
    let hi = mu + 12.0 * sd;
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + i as f64 * step).collect();
    let mut d = grid
        .par_iter()
        .map(|&x| (nc_chi2_cdf(x, lam) - normal_cdf(x, mu, sd)).abs())
        .reduce(|| 0.0, f64::max);
    if lo == 0.0 {
        d = d.max(normal_cdf(0.0, mu, sd));
    }
    d
}

/// One `(λ, P)` point of the bound audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditPoint {
    pub lambda: f64,
    pub power_w: f64,
    /// `E[g(X)]` by quadrature.
    pub expected_g: f64,
    /// MAD bound in its generic form with the Gaussian moments.
    pub bound_generic: f64,
    /// The same bound as implemented by the planner's detection module.
    pub bound_gaussian: f64,
    /// The simplified `g^u` the planner optimizes against.
    pub bound_simplified: f64,
    /// `ξ̄*` by quadrature.
    pub xi_bar: f64,
    /// `ξ̌*`.
    pub xi_check: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub lambda: f64,
    pub power_w: f64,
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundAudit {
    pub points: Vec<AuditPoint>,
    pub violations: Vec<AuditViolation>,
}

impl BoundAudit {
    pub fn violations_of(&self, check: &str) -> usize {
        self.violations.iter().filter(|v| v.check == check).count()
    }
}

pub const CHECK_XI: &str = "xi_bar >= xi_check";
pub const CHECK_EG_GENERIC: &str = "E[g] <= generic bound";
pub const CHECK_GENERIC_EQ: &str = "generic bound == gaussian bound";
pub const CHECK_ORDER: &str = "gaussian bound <= simplified bound";
pub const CHECK_EG_SIMPLIFIED: &str = "E[g] <= simplified bound";

/// Audits the averaged-error bound chain over a `(λ, P)` grid. Violations
/// are listed, not asserted.
pub fn bound_audit(model: &DetectionModel, lambdas: &[f64], powers: &[f64]) -> BoundAudit {
    let pts: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| powers.iter().map(move |&p| (l, p))).collect();
    let points: Vec<AuditPoint> = pts
        .par_iter()
        .map(|&(lam, p)| {
            let mu = lam + 2.0;
            let theta = 2.0 * (2.0 / std::f64::consts::PI).sqrt() * (lam + 1.0).sqrt();
            AuditPoint {
                lambda: lam,
                power_w: p,
                expected_g: expected_g_quadrature(lam, p, model),
                bound_generic: mad_convex_bound(g_of(mu, p, model), g_of(0.0, p, model), mu, 0.0, theta, 0.0),
                bound_gaussian: expected_g_mad_bound(lam, p, model),
                bound_simplified: g_upper(lam, p, model),
                xi_bar: xi_bar_quadrature(lam, p, model),
                xi_check: xi_lower_bound(lam, p, model),
            }
        })
        .collect();
    let mut violations = Vec::new();
    for a in &points {
        let tol = 1e-12 * a.bound_simplified.abs().max(1e-300) + 1e-15;
        let mut check = |name: &str, ok: bool, lhs: f64, rhs: f64| {
            if !ok {
                violations.push(AuditViolation {
                    lambda: a.lambda,
                    power_w: a.power_w,
                    check: name.into(),
                    lhs,
                    rhs,
                });
            }
        };
        check(CHECK_XI, a.xi_bar >= a.xi_check - 1e-12, a.xi_bar, a.xi_check);
        check(CHECK_EG_GENERIC, a.expected_g <= a.bound_generic + tol, a.expected_g, a.bound_generic);
        check(
            CHECK_GENERIC_EQ,
            (a.bound_generic - a.bound_gaussian).abs() <= tol,
            a.bound_generic,
            a.bound_gaussian,
        );
        check(CHECK_ORDER, a.bound_gaussian <= a.bound_simplified + tol, a.bound_gaussian, a.bound_simplified);
        check(CHECK_EG_SIMPLIFIED, a.expected_g <= a.bound_simplified + tol, a.expected_g, a.bound_simplified);
    }
    BoundAudit { points, violations }
}

/// `n` points evenly spaced in log10 between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Check of the closed-form optimal threshold against grid minimization at
/// received powers `e_w`: returns the largest `|grid − closed form|` and the
/// largest grid resolution.
pub fn threshold_oracle(e_ws: &[f64], model: &DetectionModel, points: usize) -> (f64, f64) {
    e_ws.iter().fold((0.0, 0.0), |(d, r), &e| {
        let (grid, res) = threshold_grid_min(e, model, points);
        let (p_th, xi) = min_total_error(e, model);
        debug_assert!((total_error(p_th, e, model) - xi).abs() < 1e-12);
        (f64::max(d, (grid - xi).abs()), f64::max(r, res))
    })
}

#[cfg(test)]
mod tests;
