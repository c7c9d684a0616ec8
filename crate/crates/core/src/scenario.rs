//! Problem data: geometry, slotting, channel model and the mobility / power
//! feasibility predicates.
//!
//! Every quantity is stored in linear SI units (W, m, s). Decibel
//! conversions exist only for configuration and reporting.

use alloc::vec::Vec;

use crate::math::{self, Vec2};
use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Lower bound on every per-slot rate, bits/s/Hz. Keeps `2^R - 1` away from 0.
pub const R_MIN: f64 = 1e-6;

/// Relative feasibility tolerance used by all margin checks.
pub const FEAS_TOL: f64 = 1e-6;

/// `10^(x/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    math::powf(10.0, db / 10.0)
}

/// `10 log10(x)`.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * math::log10(x)
}

/// dBm to Watts (1 mW reference).
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w * 1e3)
}

/// Line-of-sight power gain `β0 / (‖q_uav − q_ground‖² + H²)`.
#[inline]
pub fn channel_gain(q_uav: Vec2, q_ground: Vec2, altitude: f64, beta0: f64) -> f64 {
    beta0 / (q_uav.dist_sq(q_ground) + altitude * altitude)
}

/// Raw scenario parameters as read from configuration.
///
/// Validate with [`ScenarioConfig::new`] before use.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScenarioParams {
    pub flight_period_s: f64,
    pub slot_duration_s: f64,
    pub altitude_m: f64,
    pub v_max_mps: f64,
    pub q_init: Vec2,
    pub q_final: Vec2,
    /// Estimated receiver location.
    pub bob_est: Vec2,
    /// Estimated warden location.
    pub willie_est: Vec2,
    /// Per-axis variance of the receiver location error, m².
    pub var_bob_m2: f64,
    /// Per-axis variance of the warden location error, m².
    pub var_willie_m2: f64,
    /// Channel power gain at 1 m.
    pub beta0: f64,
    /// `β0 / σ_b²`, linear.
    pub gamma0: f64,
    pub p_avg_max_w: f64,
    pub p_peak_max_w: f64,
    /// Warden's nominal noise power σ̌², W.
    pub noise_nominal_w: f64,
    /// Warden noise-uncertainty spread ϱ ≥ 1 (linear).
    pub noise_uncertainty: f64,
    /// Maximum outage probability at the receiver.
    pub rho_b: f64,
    /// Covertness level: the averaged warden error must stay above `1 − rho_w`.
    pub rho_w: f64,
    /// Stopping tolerance on the change of the average rate between SCA iterations.
    pub sca_tolerance: f64,
}

impl ScenarioParams {
    /// Reference study: 20 dBm average power with a 4× (linear) peak,
    /// ε² = 25 m² for both ground nodes, 100 m altitude, 5 m/s, β0 = −60 dB,
    /// γ0 = 80 dB, 1 s slots, ϱ = 3 dB, σ̌² = −120 dBm, ρ_b = ρ_w = 0.05.
    pub fn reference(flight_period_s: f64) -> Self {
        let p_avg = dbm_to_watts(20.0);
        ScenarioParams {
            flight_period_s,
            slot_duration_s: 1.0,
            altitude_m: 100.0,
            v_max_mps: 5.0,
            q_init: Vec2::new(-500.0, 100.0),
            q_final: Vec2::new(500.0, 100.0),
            bob_est: Vec2::new(-100.0, 300.0),
            willie_est: Vec2::new(100.0, 300.0),
            var_bob_m2: 25.0,
            var_willie_m2: 25.0,
            beta0: db_to_linear(-60.0),
            gamma0: db_to_linear(80.0),
            p_avg_max_w: p_avg,
            p_peak_max_w: 4.0 * p_avg,
            noise_nominal_w: dbm_to_watts(-120.0),
            noise_uncertainty: db_to_linear(3.0),
            rho_b: 0.05,
            rho_w: 0.05,
            sca_tolerance: 1e-4,
        }
    }
}

fn invalid(field: &'static str, reason: &str) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

/// Validated scenario with derived slot count `N` and per-slot reach `L`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize))]
pub struct ScenarioConfig {
    params: ScenarioParams,
    num_slots: usize,
    max_step_m: f64,
}

impl ScenarioConfig {
    pub fn new(params: ScenarioParams) -> Result<Self> {
        let p = &params;
        let positive = |v: f64, f: &'static str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(f, "must be finite and > 0"))
            }
        };
        positive(p.flight_period_s, "flight_period")?;
        positive(p.slot_duration_s, "slot_duration")?;
        positive(p.altitude_m, "altitude")?;
        positive(p.v_max_mps, "v_max")?;
        positive(p.var_bob_m2, "var_bob")?;
        positive(p.var_willie_m2, "var_willie")?;
        positive(p.beta0, "beta0")?;
        positive(p.gamma0, "gamma0")?;
        positive(p.noise_nominal_w, "noise_nominal")?;
        positive(p.sca_tolerance, "sca_tolerance")?;
        for (v, f) in [(p.p_avg_max_w, "p_avg_max"), (p.p_peak_max_w, "p_peak_max")] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(f, "must be finite and >= 0"));
            }
        }
        if !(p.noise_uncertainty.is_finite() && p.noise_uncertainty >= 1.0) {
            return Err(invalid("noise_uncertainty", "must be >= 1 (linear)"));
        }
        for (v, f) in [(p.rho_b, "rho_b"), (p.rho_w, "rho_w")] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(f, "must lie in (0, 1)"));
            }
        }
        for (v, f) in [
            (p.q_init, "q_init"),
            (p.q_final, "q_final"),
            (p.bob_est, "bob_est"),
            (p.willie_est, "willie_est"),
        ] {
            if !v.is_finite() {
                return Err(invalid(f, "must be finite"));
            }
        }

        let ratio = p.flight_period_s / p.slot_duration_s;
        let n = math::round(ratio);
        if n < 1.0 || math::abs(n * p.slot_duration_s - p.flight_period_s) > 1e-9 * p.flight_period_s {
            return Err(invalid(
                "slot_duration",
                "flight period must be a positive integer multiple of the slot duration",
            ));
        }
        let num_slots = n as usize;
        let max_step_m = p.v_max_mps * p.slot_duration_s;
        let distance = p.q_init.dist(p.q_final);
        let reach = num_slots as f64 * max_step_m;
        if distance > reach * (1.0 + FEAS_TOL) {
            return Err(Error::Unreachable {
                distance_m: distance,
                reach_m: reach,
            });
        }
        Ok(ScenarioConfig {
            params,
            num_slots,
            max_step_m,
        })
    }

    pub fn reference(flight_period_s: f64) -> Result<Self> {
        Self::new(ScenarioParams::reference(flight_period_s))
    }

    #[inline]
    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    /// Number of slots `N = T / δ_t`.
    #[inline]
    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    /// Per-slot reach `L = v_max · δ_t`, meters.
    #[inline]
    pub fn max_step(&self) -> f64 {
        self.max_step_m
    }

    /// True when the start-to-final distance uses up the whole flight budget,
    /// so the straight line is the only feasible trajectory.
    pub fn trajectory_is_rigid(&self) -> bool {
        let reach = self.num_slots as f64 * self.max_step_m;
        reach - self.params.q_init.dist(self.params.q_final) <= FEAS_TOL * reach
    }
}

/// Per-slot UAV horizontal positions `q_a[1..=N]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Trajectory {
    pub waypoints: Vec<Vec2>,
}

/// Per-slot transmit powers, W.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PowerSchedule {
    pub powers: Vec<f64>,
}

impl PowerSchedule {
    pub fn mean(&self) -> f64 {
        if self.powers.is_empty() {
            0.0
        } else {
            math::pairwise_sum(&self.powers) / self.powers.len() as f64
        }
    }
}

/// Per-slot target rates, bits/s/Hz.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RateSchedule {
    pub rates: Vec<f64>,
}

impl RateSchedule {
    /// Average rate over the slots.
    pub fn mean(&self) -> f64 {
        if self.rates.is_empty() {
            0.0
        } else {
            math::pairwise_sum(&self.rates) / self.rates.len() as f64
        }
    }
}

/// Mobility margins; each is `≥ 0` when satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityMargins {
    /// `L − ‖q[1] − q_init‖`.
    pub initial: f64,
    /// `L − ‖q[n+1] − q[n]‖` for consecutive waypoints.
    pub steps: Vec<f64>,
    /// `−‖q[N] − q_final‖` (equality constraint, best value 0).
    pub terminal: f64,
}

impl MobilityMargins {
    pub fn worst(&self) -> f64 {
        self.steps
            .iter()
            .copied()
            .fold(self.initial.min(self.terminal), f64::min)
    }

    /// Feasible when every margin is `≥ −tol · L`.
    pub fn is_feasible(&self, max_step: f64, tol: f64) -> bool {
        self.worst() >= -tol * max_step
    }
}

pub fn check_mobility(traj: &Trajectory, cfg: &ScenarioConfig) -> Result<MobilityMargins> {
    let n = cfg.num_slots();
    if traj.waypoints.len() != n {
        return Err(Error::LengthMismatch {
            what: "trajectory",
            expected: n,
            actual: traj.waypoints.len(),
        });
    }
    let l = cfg.max_step();
    let w = &traj.waypoints;
    let p = cfg.params();
    Ok(MobilityMargins {
        initial: l - w[0].dist(p.q_init),
        steps: w.windows(2).map(|s| l - s[1].dist(s[0])).collect(),
        terminal: -w[n - 1].dist(p.q_final),
    })
}

/// Power margins; `≥ 0` when satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMargins {
    /// `P̄_max − mean(P)`.
    pub average: f64,
    /// `P_peak − P[n]`, or `P[n]` itself when negative.
    pub slots: Vec<f64>,
}

impl PowerMargins {
    pub fn is_feasible(&self, cfg: &ScenarioConfig, tol: f64) -> bool {
        let p = cfg.params();
        self.average >= -tol * p.p_avg_max_w.max(f64::MIN_POSITIVE)
            && self
                .slots
                .iter()
                .all(|&m| m >= -tol * p.p_peak_max_w.max(f64::MIN_POSITIVE))
    }
}

pub fn check_power(power: &PowerSchedule, cfg: &ScenarioConfig) -> Result<PowerMargins> {
    let n = cfg.num_slots();
    if power.powers.len() != n {
        return Err(Error::LengthMismatch {
            what: "power schedule",
            expected: n,
            actual: power.powers.len(),
        });
    }
    let p = cfg.params();
    Ok(PowerMargins {
        average: p.p_avg_max_w - power.mean(),
        slots: power
            .powers
            .iter()
            .map(|&x| if x < 0.0 { x } else { p.p_peak_max_w - x })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn small_cfg(n_slots: usize) -> ScenarioConfig {
        let mut p = ScenarioParams::reference(n_slots as f64);
        p.q_init = Vec2::new(0.0, 0.0);
        p.q_final = Vec2::new(0.0, 0.0);
        ScenarioConfig::new(p).unwrap()
    }

    #[test]
    fn gain_at_reference_distance_is_beta0_normalized() {
        let q = Vec2::new(3.0, -4.0);
        assert_eq!(channel_gain(q, q, 1.0, 1.0), 1.0);
    }

    #[test]
    fn gain_direct_substitution() {
        let g = channel_gain(Vec2::new(100.0, 0.0), Vec2::ZERO, 100.0, 1e-6);
        assert!((g - 5e-11).abs() < 1e-24);
        let bob = Vec2::new(-100.0, 300.0);
        let g = channel_gain(bob, bob, 100.0, db_to_linear(-60.0));
        assert!((g / 1e-10 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decibel_reference_values() {
        assert!((dbm_to_watts(20.0) - 0.1).abs() < 1e-15);
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((db_to_linear(3.0) - 1.995_262_314_968_88).abs() < 1e-12);
    }

    #[test]
    fn reference_scenario_derives_slots_and_reach() {
        let cfg = ScenarioConfig::reference(300.0).unwrap();
        assert_eq!(cfg.num_slots(), 300);
        assert_eq!(cfg.max_step(), 5.0);
        assert!(!cfg.trajectory_is_rigid());
        assert!(ScenarioConfig::reference(200.0).unwrap().trajectory_is_rigid());
        // linear 4x, not +4 dB
        assert!((cfg.params().p_peak_max_w - 0.4).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_unreachable_endpoints() {
        let err = ScenarioConfig::reference(199.0).unwrap_err();
        assert!(matches!(err, Error::Unreachable { .. }));
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        let mut p = ScenarioParams::reference(300.0);
        p.noise_uncertainty = 0.5;
        assert!(ScenarioConfig::new(p).is_err());
        let mut p = ScenarioParams::reference(300.0);
        p.rho_w = 1.0;
        assert!(ScenarioConfig::new(p).is_err());
        let mut p = ScenarioParams::reference(300.0);
        p.slot_duration_s = 0.7;
        assert!(ScenarioConfig::new(p).is_err());
    }

    #[test]
    fn stationary_trajectory_has_full_margins() {
        let cfg = small_cfg(5);
        let traj = Trajectory {
            waypoints: vec![Vec2::ZERO; 5],
        };
        let m = check_mobility(&traj, &cfg).unwrap();
        assert_eq!(m.initial, 5.0);
        assert!(m.steps.iter().all(|&s| s == 5.0));
        assert_eq!(m.terminal, 0.0);
        assert!(m.is_feasible(cfg.max_step(), FEAS_TOL));
    }

    #[test]
    fn straight_line_at_max_speed_is_on_the_boundary() {
        let cfg = ScenarioConfig::reference(200.0).unwrap();
        let p = cfg.params();
        let traj = Trajectory {
            waypoints: (1..=200)
                .map(|n| p.q_init.lerp(p.q_final, n as f64 / 200.0))
                .collect(),
        };
        let m = check_mobility(&traj, &cfg).unwrap();
        assert!(m.steps.iter().all(|&s| s.abs() < 1e-9));
        assert!(m.initial.abs() < 1e-9);
    }

    #[test]
    fn long_step_is_reported_as_violation() {
        let cfg = small_cfg(3);
        let traj = Trajectory {
            waypoints: vec![Vec2::ZERO, Vec2::new(7.5, 0.0), Vec2::ZERO],
        };
        let m = check_mobility(&traj, &cfg).unwrap();
        assert!((m.steps[0] + 2.5).abs() < 1e-12);
        assert!(!m.is_feasible(cfg.max_step(), FEAS_TOL));
        let short = Trajectory {
            waypoints: vec![Vec2::ZERO; 2],
        };
        assert!(check_mobility(&short, &cfg).is_err());
    }

    #[test]
    fn power_margins() {
        let cfg = small_cfg(4);
        let zero = PowerSchedule { powers: vec![0.0; 4] };
        let m = check_power(&zero, &cfg).unwrap();
        assert!((m.average - 0.1).abs() < 1e-15);
        assert!(m.slots.iter().all(|&s| (s - 0.4).abs() < 1e-15));

        let flat = PowerSchedule { powers: vec![0.1; 4] };
        assert!(check_power(&flat, &cfg).unwrap().average.abs() < 1e-15);

        let burst = PowerSchedule {
            powers: vec![0.4, 0.0, 0.0, 0.0],
        };
        let m = check_power(&burst, &cfg).unwrap();
        assert!(m.is_feasible(&cfg, FEAS_TOL));
        let over = PowerSchedule {
            powers: vec![0.41, 0.0, 0.0, 0.0],
        };
        assert!(!check_power(&over, &cfg).unwrap().is_feasible(&cfg, FEAS_TOL));
    }

    proptest! {
        #[test]
        fn gain_decreases_with_horizontal_distance(
            dx in -1e3f64..1e3, dy in -1e3f64..1e3, k in 1.001f64..10.0, h in 1.0f64..500.0
        ) {
            let near = Vec2::new(dx, dy);
            prop_assume!(near.norm() > 1e-3);
            let far = near * k;
            prop_assert!(channel_gain(far, Vec2::ZERO, h, 1e-6) < channel_gain(near, Vec2::ZERO, h, 1e-6));
            prop_assert!(channel_gain(far, Vec2::ZERO, h, 1e-6) > 0.0);
        }

        #[test]
        fn decibel_round_trip(x in -200.0f64..200.0) {
            let back = linear_to_db(db_to_linear(x));
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
            let w = dbm_to_watts(x);
            prop_assert!(((watts_to_dbm(w) - x)).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
