//! Convex restriction of the planning problem around an expansion point.
//!
//! The outage chance constraint is replaced by its Bernstein-type
//! deterministic form (residuals A–C) and the covertness constraint by three
//! slack-variable residuals (D–F). The non-convex pieces are swapped for the
//! first-order surrogates `g1`–`g5`, each tangent at the expansion point and
//! conservative everywhere, so any point feasible for the subproblem is
//! feasible for the original constraints.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};
use core::fmt::Write;

use crate::cvxsolver::ConvexProgram;
use crate::detection::{self, DetectionModel};
use crate::math::{self, Vec2};
use crate::scenario::{
    check_mobility, check_power, MobilityMargins, PowerMargins, PowerSchedule, RateSchedule, ScenarioConfig,
    Trajectory, FEAS_TOL, R_MIN,
};
use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Lower bound on the covertness slack `u1`.
pub const U1_MIN: f64 = 1e-10;
const U1_TILDE_MIN: f64 = 1e-12;

/// Position variables are expressed in units of this many meters.
pub const POSITION_UNIT_M: f64 = 100.0;

/// Relative inflation applied to the outage slacks for a strict interior.
pub const SLACK_INFLATION: f64 = 1e-6;

/// Point around which the surrogates are built.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ExpansionPoint {
    pub traj: Trajectory,
    pub power: PowerSchedule,
    pub rates: RateSchedule,
    /// `ũ1[n] > 0`.
    pub u1: Vec<f64>,
}

impl ExpansionPoint {
    pub fn num_slots(&self) -> usize {
        self.traj.waypoints.len()
    }

    pub fn slot(&self, n: usize) -> SlotPoint {
        SlotPoint {
            q: self.traj.waypoints[n],
            p: self.power.powers[n],
            r: self.rates.rates[n],
            u1: self.u1[n],
        }
    }
}

/// Slack variables of the outage (`y1`, `z1`) and covertness (`u1`, `u2`)
/// reformulations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SlackVars {
    pub y1: Vec<f64>,
    pub z1: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl SlackVars {
    /// Slacks at their tightest values for `pt`: `y1 = ε_b²`, `z1` equal to
    /// the SOC norm, both inflated by [`SLACK_INFLATION`]; `u1 = ũ1`;
    /// `u2 = λ̃ + 1` shrunk by the same relative amount.
    pub fn tight(pt: &ExpansionPoint, cfg: &ScenarioConfig) -> Self {
        let c = Consts::new(cfg);
        let n = pt.num_slots();
        let mut s = SlackVars {
            y1: Vec::with_capacity(n),
            z1: Vec::with_capacity(n),
            u1: Vec::with_capacity(n),
            u2: Vec::with_capacity(n),
        };
        for i in 0..n {
            let q = pt.traj.waypoints[i];
            s.y1.push(c.eps_b2 * (1.0 + SLACK_INFLATION));
            s.z1.push(c.soc_norm(q) * (1.0 + SLACK_INFLATION));
            s.u1.push(pt.u1[i].max(2.0 * U1_MIN));
            s.u2.push((c.lambda(q) + 1.0) * (1.0 - SLACK_INFLATION));
        }
        s
    }
}

/// Expansion point together with the slack values of a subproblem solution.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Iterate {
    pub point: ExpansionPoint,
    pub slacks: SlackVars,
}

/// Expansion values of one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotPoint {
    pub q: Vec2,
    pub p: f64,
    pub r: f64,
    pub u1: f64,
}

/// All decision variables of one slot, physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotVars {
    pub q: Vec2,
    pub p: f64,
    pub r: f64,
    pub y1: f64,
    pub z1: f64,
    pub u1: f64,
    pub u2: f64,
}

/// Scenario constants used by the residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Consts {
    pub bob: Vec2,
    pub willie: Vec2,
    pub eps_b2: f64,
    pub eps_w2: f64,
    pub h2: f64,
    pub gamma0: f64,
    /// `√(−2 ln ρ_b)`.
    pub bti_a: f64,
    /// `−ln ρ_b`.
    pub neg_ln_rho_b: f64,
    pub model: DetectionModel,
    /// `√(2π) ln ϱ ρ_w`.
    pub cw: f64,
    pub rho_w: f64,
}

impl Consts {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let p = cfg.params();
        let model = DetectionModel::from_config(cfg);
        Consts {
            bob: p.bob_est,
            willie: p.willie_est,
            eps_b2: p.var_bob_m2,
            eps_w2: p.var_willie_m2,
            h2: p.altitude_m * p.altitude_m,
            gamma0: p.gamma0,
            bti_a: math::sqrt(-2.0 * math::ln(p.rho_b)),
            neg_ln_rho_b: -math::ln(p.rho_b),
            model,
            cw: math::sqrt(2.0 * PI) * math::ln(p.noise_uncertainty) * p.rho_w,
            rho_w: p.rho_w,
        }
    }

    #[inline]
    pub fn lambda(&self, q: Vec2) -> f64 {
        detection::lambda_of(q, self.willie, self.eps_w2)
    }

    /// `√(2ε_b⁴ + 2ε_b²‖q − q̂_b‖²)`.
    #[inline]
    pub fn soc_norm(&self, q: Vec2) -> f64 {
        math::sqrt(2.0 * self.eps_b2 * (self.eps_b2 + q.dist_sq(self.bob)))
    }

    /// Outage constraint left-hand side with the slacks at their minimal
    /// values: `2ε_b² + √(−2 ln ρ_b)·norm − ln ρ_b·ε_b² + ‖q − q̂_b‖² + H²`.
    pub fn outage_budget(&self, q: Vec2) -> f64 {
        2.0 * self.eps_b2 + self.bti_a * self.soc_norm(q) + self.neg_ln_rho_b * self.eps_b2 + q.dist_sq(self.bob) + self.h2
    }

    #[inline]
    fn hw(&self) -> f64 {
        self.model.h2_over_var()
    }

    #[inline]
    fn kappa(&self) -> f64 {
        self.model.beta1 * self.eps_w2 / self.h2
    }
}

// ---------------------------------------------------------------------------
// Surrogates

/// Concave lower bound on `γ0 P / (2^R − 1)`, tangent at `(p_t, r_t)`.
pub fn g1(p: f64, r: f64, p_t: f64, r_t: f64, gamma0: f64) -> f64 {
    let (c0, c1, c2) = g1_coeffs(p_t, r_t, gamma0);
    c0 - c1 * (1.0 / p - 1.0 / p_t) - c2 * (math::exp2(r) - math::exp2(r_t))
}

/// `(∂g1/∂P, ∂g1/∂R)`.
pub fn g1_grad(p: f64, r: f64, p_t: f64, r_t: f64, gamma0: f64) -> (f64, f64) {
    let (_, c1, c2) = g1_coeffs(p_t, r_t, gamma0);
    (c1 / (p * p), -c2 * LN_2 * math::exp2(r))
}

fn g1_coeffs(p_t: f64, r_t: f64, gamma0: f64) -> (f64, f64, f64) {
    let d = math::exp_m1(r_t.max(R_MIN) * LN_2);
    let c0 = gamma0 * p_t / d;
    (c0, c0 * p_t, c0 / d)
}

/// Convex upper bound on `√((λ(q) + 1) u1)`, tangent at `(q_t, u1_t)`.
pub fn g2(q: Vec2, u1: f64, q_t: Vec2, u1_t: f64, willie: Vec2, var_w: f64) -> f64 {
    let (k, cu, cl, lam_t) = g2_coeffs(q_t, u1_t, willie, var_w);
    k + cu * (u1 - u1_t.max(U1_TILDE_MIN)) + cl * (detection::lambda_of(q, willie, var_w) - lam_t)
}

/// `(∇_q g2, ∂g2/∂u1)`.
pub fn g2_grad(q: Vec2, _u1: f64, q_t: Vec2, u1_t: f64, willie: Vec2, var_w: f64) -> (Vec2, f64) {
    let (_, cu, cl, _) = g2_coeffs(q_t, u1_t, willie, var_w);
    ((q - willie) * (2.0 * cl / var_w), cu)
}

fn g2_coeffs(q_t: Vec2, u1_t: f64, willie: Vec2, var_w: f64) -> (f64, f64, f64, f64) {
    let u = u1_t.max(U1_TILDE_MIN);
    let lam_t = detection::lambda_of(q_t, willie, var_w);
    let x = lam_t + 1.0;
    (math::sqrt(x * u), 0.5 * math::sqrt(x / u), 0.5 * math::sqrt(u / x), lam_t)
}

/// Tangent line of `ln(1 + β1 ε_w² P / H²)` at `p_t` (an upper bound).
pub fn g3(p: f64, p_t: f64, model: &DetectionModel) -> f64 {
    let kappa = model.beta1 / model.h2_over_var();
    math::ln_1p(kappa * p_t) + kappa * (p - p_t) / (1.0 + kappa * p_t)
}

/// `∂g3/∂P`, constant in `P`.
pub fn g3_slope(p_t: f64, model: &DetectionModel) -> f64 {
    let kappa = model.beta1 / model.h2_over_var();
    kappa / (1.0 + kappa * p_t)
}

/// Upper bound on `ln(λ(q) + 2 + H²/ε_w² + β1 P)`, tangent at `(q_t, p_t)`.
pub fn g4(q: Vec2, p: f64, q_t: Vec2, p_t: f64, willie: Vec2, model: &DetectionModel) -> f64 {
    let lam_t = detection::lambda_of(q_t, willie, model.var_willie);
    let big = lam_t + 2.0 + model.h2_over_var() + model.beta1 * p_t;
    let lam = detection::lambda_of(q, willie, model.var_willie);
    math::ln(big) + ((lam - lam_t) + model.beta1 * (p - p_t)) / big
}

/// `(∇_q g4, ∂g4/∂P)`.
pub fn g4_grad(q: Vec2, _p: f64, q_t: Vec2, p_t: f64, willie: Vec2, model: &DetectionModel) -> (Vec2, f64) {
    let lam_t = detection::lambda_of(q_t, willie, model.var_willie);
    let big = lam_t + 2.0 + model.h2_over_var() + model.beta1 * p_t;
    ((q - willie) * (2.0 / (model.var_willie * big)), model.beta1 / big)
}

/// Tangent plane of `λ(q)` at `q_t` (a lower bound).
pub fn g5(q: Vec2, q_t: Vec2, willie: Vec2, var_w: f64) -> f64 {
    let d = q_t - willie;
    (2.0 / var_w) * d.dot(q - q_t) + d.norm_sq() / var_w
}

pub fn g5_grad(q_t: Vec2, willie: Vec2, var_w: f64) -> Vec2 {
    (q_t - willie) * (2.0 / var_w)
}

// ---------------------------------------------------------------------------
// Slot residuals (all `≤ 0` when satisfied)

/// Outage residuals `[A, B, C]` of one slot.
pub fn bti_outage_residuals(v: &SlotVars, e: &SlotPoint, c: &Consts) -> [f64; 3] {
    let a = 2.0 * c.eps_b2 + c.bti_a * v.z1 + c.neg_ln_rho_b * v.y1 + v.q.dist_sq(c.bob) + c.h2
        - g1(v.p, v.r, e.p, e.r, c.gamma0);
    let b = c.soc_norm(v.q) - v.z1;
    [a, b, c.eps_b2 - v.y1]
}

/// Covertness residuals `[D, E, F]` of one slot.
pub fn covertness_residuals(v: &SlotVars, e: &SlotPoint, c: &Consts) -> [f64; 3] {
    let m = &c.model;
    let d = math::sqrt(PI / 2.0) * g2(v.q, v.u1, e.q, e.u1, c.willie, c.eps_w2) - math::sqrt(v.u1)
        + g3(v.p, e.p, m)
        - c.cw * math::sqrt(v.u2);
    let ee = g4(v.q, v.p, e.q, e.p, c.willie, m) - math::ln(v.u2 + 1.0 + c.hw()) - math::sqrt(v.u1);
    let f = v.u2 - g5(v.q, e.q, c.willie, c.eps_w2) - 1.0;
    [d, ee, f]
}

// ---------------------------------------------------------------------------
// Exact feasibility of the deterministic (pre-surrogate) problem

/// Margins of the deterministic problem with exact outage and covertness
/// terms. Every margin is `≥ 0` when satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub mobility: MobilityMargins,
    pub power: PowerMargins,
    /// `(γ0 P / (2^R − 1) − budget) / budget` per slot.
    pub outage: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Lower bound `ξ̌*[n]` on the averaged warden error.
    pub xi_lower: Vec<f64>,
    /// `ξ̌*[n] − (1 − ρ_w)`.
    pub covertness: Vec<f64>,
}

fn worst(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

impl FeasibilityReport {
    pub fn worst_outage(&self) -> f64 {
        worst(&self.outage)
    }

    pub fn worst_covertness(&self) -> f64 {
        worst(&self.covertness)
    }

    /// First violated family, if any, at relative tolerance `tol`.
    pub fn violated_family(&self, cfg: &ScenarioConfig, tol: f64) -> Option<(&'static str, f64)> {
        if !self.mobility.is_feasible(cfg.max_step(), tol) {
            return Some(("mobility", self.mobility.worst()));
        }
        if !self.power.is_feasible(cfg, tol) {
            return Some(("power", self.power.average.min(worst(&self.power.slots))));
        }
        if self.worst_outage() < -tol {
            return Some(("outage", self.worst_outage()));
        }
        if self.worst_covertness() < -tol {
            return Some(("covertness", self.worst_covertness()));
        }
        None
    }

    pub fn is_feasible(&self, cfg: &ScenarioConfig, tol: f64) -> bool {
        self.violated_family(cfg, tol).is_none()
    }
}

pub fn check_feasibility(
    traj: &Trajectory,
    power: &PowerSchedule,
    rates: &RateSchedule,
    cfg: &ScenarioConfig,
) -> Result<FeasibilityReport> {
    let n = cfg.num_slots();
    if rates.rates.len() != n {
        return Err(Error::LengthMismatch {
            what: "rate schedule",
            expected: n,
            actual: rates.rates.len(),
        });
    }
    let mobility = check_mobility(traj, cfg)?;
    let pm = check_power(power, cfg)?;
    let c = Consts::new(cfg);
    let mut outage = Vec::with_capacity(n);
    let mut lambda = Vec::with_capacity(n);
    let mut xi_lower = Vec::with_capacity(n);
    let mut covertness = Vec::with_capacity(n);
    for i in 0..n {
        let q = traj.waypoints[i];
        let p = power.powers[i];
        let r = rates.rates[i];
        let budget = c.outage_budget(q);
        let snr_budget = if r <= 0.0 {
            f64::INFINITY
        } else {
            c.gamma0 * p / math::exp_m1(r * LN_2)
        };
        outage.push((snr_budget - budget) / budget);
        let lam = c.lambda(q);
        let xi = detection::xi_lower_bound(lam, p.max(0.0), &c.model);
        lambda.push(lam);
        xi_lower.push(xi);
        covertness.push(xi - (1.0 - c.rho_w));
    }
    Ok(FeasibilityReport {
        mobility,
        power: pm,
        outage,
        lambda,
        xi_lower,
        covertness,
    })
}

// ---------------------------------------------------------------------------
// Subproblem

/// Per-slot variable slots, in layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Qx = 0,
    Qy = 1,
    P = 2,
    R = 3,
    Y1 = 4,
    Z1 = 5,
    U1 = 6,
    U2 = 7,
}

pub const SLOT_BLOCK: usize = 8;

const FIELD_NAMES: [&str; SLOT_BLOCK] = ["qx", "qy", "P", "R", "y1", "z1", "u1", "u2"];

/// A subproblem variable is either free (stored scaled: physical value
/// `= x[index] · scale`) or fixed to a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalVar {
    Free { index: usize, scale: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    slots: Vec<[LocalVar; SLOT_BLOCK]>,
    num_free: usize,
}

impl Layout {
    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn num_free(&self) -> usize {
        self.num_free
    }

    pub fn get(&self, slot: usize, f: Field) -> LocalVar {
        self.slots[slot][f as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Mobility,
    AveragePower,
    PeakPower,
    Outage,
    Covertness,
    Bounds,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Mobility => "mobility",
            Family::AveragePower => "average_power",
            Family::PeakPower => "peak_power",
            Family::Outage => "outage",
            Family::Covertness => "covertness",
            Family::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    OutageA {
        bob: Vec2,
        base: f64,
        a: f64,
        nlr: f64,
        c0: f64,
        c1: f64,
        c2: f64,
        inv_p_t: f64,
        two_r_t: f64,
    },
    OutageB {
        bob: Vec2,
        two_eps2: f64,
        two_eps4: f64,
    },
    CovertD {
        willie: Vec2,
        inv_var: f64,
        k2: f64,
        g2_const: f64,
        g2_u: f64,
        g2_l: f64,
        g3_const: f64,
        g3_slope: f64,
        cw: f64,
    },
    CovertE {
        willie: Vec2,
        inv_var: f64,
        ln_big: f64,
        inv_big: f64,
        lam_t: f64,
        beta1: f64,
        p_t: f64,
        shift: f64,
    },
    CovertF {
        grad: Vec2,
        q_t: Vec2,
        lam_t: f64,
    },
    MobilityInitial {
        origin: Vec2,
        inv_l2: f64,
    },
    MobilityStep {
        inv_l2: f64,
    },
    Upper(f64),
    Lower(f64),
    AveragePower {
        inv_n: f64,
        cap: f64,
    },
}

impl Kind {
    fn is_affine(&self) -> bool {
        matches!(
            self,
            Kind::CovertF { .. } | Kind::Upper(_) | Kind::Lower(_) | Kind::AveragePower { .. }
        )
    }

    fn label(&self) -> &'static str {
        match self {
            Kind::OutageA { .. } => "outage_A",
            Kind::OutageB { .. } => "outage_B",
            Kind::CovertD { .. } => "covert_D",
            Kind::CovertE { .. } => "covert_E",
            Kind::CovertF { .. } => "covert_F",
            Kind::MobilityInitial { .. } => "mobility_initial",
            Kind::MobilityStep { .. } => "mobility_step",
            Kind::Upper(_) => "upper",
            Kind::Lower(_) => "lower",
            Kind::AveragePower { .. } => "average_power",
        }
    }

    /// Value, gradient and row-major Hessian in physical local coordinates.
    fn eval(&self, v: &[f64], mut g: Option<&mut [f64]>, mut h: Option<&mut [f64]>) -> f64 {
        let k = v.len();
        macro_rules! set_g {
            ($i:expr, $val:expr) => {
                if let Some(g) = g.as_deref_mut() {
                    g[$i] = $val;
                }
            };
        }
        macro_rules! set_h {
            ($i:expr, $j:expr, $val:expr) => {
                if let Some(h) = h.as_deref_mut() {
                    h[$i * k + $j] = $val;
                }
            };
        }
        match *self {
            Kind::OutageA {
                bob,
                base,
                a,
                nlr,
                c0,
                c1,
                c2,
                inv_p_t,
                two_r_t,
            } => {
                // [qx, qy, P, R, y1, z1]
                let (dx, dy, p, r, y1, z1) = (v[0] - bob.x, v[1] - bob.y, v[2], v[3], v[4], v[5]);
                if !(p > 0.0) {
                    return f64::INFINITY;
                }
                let e = math::exp2(r);
                let val = base + a * z1 + nlr * y1 + dx * dx + dy * dy - c0 + c1 * (1.0 / p - inv_p_t) + c2 * (e - two_r_t);
                set_g!(0, 2.0 * dx);
                set_g!(1, 2.0 * dy);
                set_g!(2, -c1 / (p * p));
                set_g!(3, c2 * LN_2 * e);
                set_g!(4, nlr);
                set_g!(5, a);
                set_h!(0, 0, 2.0);
                set_h!(1, 1, 2.0);
                set_h!(2, 2, 2.0 * c1 / (p * p * p));
                set_h!(3, 3, c2 * LN_2 * LN_2 * e);
                val
            }
            Kind::OutageB { bob, two_eps2, two_eps4 } => {
                // [qx, qy, z1]
                let (dx, dy) = (v[0] - bob.x, v[1] - bob.y);
                let s = math::sqrt(two_eps4 + two_eps2 * (dx * dx + dy * dy));
                set_g!(0, two_eps2 * dx / s);
                set_g!(1, two_eps2 * dy / s);
                set_g!(2, -1.0);
                let s3 = s * s * s;
                set_h!(0, 0, two_eps2 / s - two_eps2 * two_eps2 * dx * dx / s3);
                set_h!(1, 1, two_eps2 / s - two_eps2 * two_eps2 * dy * dy / s3);
                set_h!(0, 1, -two_eps2 * two_eps2 * dx * dy / s3);
                set_h!(1, 0, -two_eps2 * two_eps2 * dx * dy / s3);
                s - v[2]
            }
            Kind::CovertD {
                willie,
                inv_var,
                k2,
                g2_const,
                g2_u,
                g2_l,
                g3_const,
                g3_slope,
                cw,
            } => {
                // [qx, qy, P, u1, u2]
                let (dx, dy, p, u1, u2) = (v[0] - willie.x, v[1] - willie.y, v[2], v[3], v[4]);
                if !(u1 > 0.0) || !(u2 > 0.0) {
                    return f64::INFINITY;
                }
                let lam = (dx * dx + dy * dy) * inv_var;
                let su1 = math::sqrt(u1);
                let su2 = math::sqrt(u2);
                let val = k2 * (g2_const + g2_u * u1 + g2_l * lam) - su1 + g3_const + g3_slope * p - cw * su2;
                let cq = 2.0 * k2 * g2_l * inv_var;
                set_g!(0, cq * dx);
                set_g!(1, cq * dy);
                set_g!(2, g3_slope);
                set_g!(3, k2 * g2_u - 0.5 / su1);
                set_g!(4, -0.5 * cw / su2);
                set_h!(0, 0, cq);
                set_h!(1, 1, cq);
                set_h!(3, 3, 0.25 / (u1 * su1));
                set_h!(4, 4, 0.25 * cw / (u2 * su2));
                val
            }
            Kind::CovertE {
                willie,
                inv_var,
                ln_big,
                inv_big,
                lam_t,
                beta1,
                p_t,
                shift,
            } => {
                // [qx, qy, P, u1, u2]
                let (dx, dy, p, u1, u2) = (v[0] - willie.x, v[1] - willie.y, v[2], v[3], v[4]);
                if !(u1 > 0.0) || !(u2 + shift > 0.0) {
                    return f64::INFINITY;
                }
                let lam = (dx * dx + dy * dy) * inv_var;
                let su1 = math::sqrt(u1);
                let w = u2 + shift;
                let val = ln_big + ((lam - lam_t) + beta1 * (p - p_t)) * inv_big - math::ln(w) - su1;
                let cq = 2.0 * inv_var * inv_big;
                set_g!(0, cq * dx);
                set_g!(1, cq * dy);
                set_g!(2, beta1 * inv_big);
                set_g!(3, -0.5 / su1);
                set_g!(4, -1.0 / w);
                set_h!(0, 0, cq);
                set_h!(1, 1, cq);
                set_h!(3, 3, 0.25 / (u1 * su1));
                set_h!(4, 4, 1.0 / (w * w));
                val
            }
            Kind::CovertF { grad, q_t, lam_t } => {
                // [qx, qy, u2]
                set_g!(0, -grad.x);
                set_g!(1, -grad.y);
                set_g!(2, 1.0);
                v[2] - (grad.x * (v[0] - q_t.x) + grad.y * (v[1] - q_t.y) + lam_t) - 1.0
            }
            Kind::MobilityInitial { origin, inv_l2 } => {
                let (dx, dy) = (v[0] - origin.x, v[1] - origin.y);
                set_g!(0, 2.0 * dx * inv_l2);
                set_g!(1, 2.0 * dy * inv_l2);
                set_h!(0, 0, 2.0 * inv_l2);
                set_h!(1, 1, 2.0 * inv_l2);
                (dx * dx + dy * dy) * inv_l2 - 1.0
            }
            Kind::MobilityStep { inv_l2 } => {
                // [ax, ay, bx, by]
                let (dx, dy) = (v[2] - v[0], v[3] - v[1]);
                set_g!(0, -2.0 * dx * inv_l2);
                set_g!(1, -2.0 * dy * inv_l2);
                set_g!(2, 2.0 * dx * inv_l2);
                set_g!(3, 2.0 * dy * inv_l2);
                for (i, j, s) in [(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0), (0, 2, -1.0), (2, 0, -1.0), (1, 3, -1.0), (3, 1, -1.0)] {
                    set_h!(i, j, 2.0 * s * inv_l2);
                }
                (dx * dx + dy * dy) * inv_l2 - 1.0
            }
            Kind::Upper(b) => {
                set_g!(0, 1.0);
                v[0] - b
            }
            Kind::Lower(b) => {
                set_g!(0, -1.0);
                b - v[0]
            }
            Kind::AveragePower { inv_n, cap } => {
                if let Some(g) = g.as_deref_mut() {
                    for gi in g.iter_mut() {
                        *gi = inv_n;
                    }
                }
                math::pairwise_sum(v) * inv_n - cap
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct SubConstraint {
    family: Family,
    slot: usize,
    kind: Kind,
    locals: Vec<LocalVar>,
    free: Vec<usize>,
    free_pos: Vec<usize>,
    free_scale: Vec<f64>,
    scale: f64,
}

impl SubConstraint {
    fn new(family: Family, slot: usize, kind: Kind, locals: Vec<LocalVar>, scale: f64) -> Self {
        let mut free = Vec::new();
        let mut free_pos = Vec::new();
        let mut free_scale = Vec::new();
        for (pos, l) in locals.iter().enumerate() {
            if let LocalVar::Free { index, scale } = *l {
                free.push(index);
                free_pos.push(pos);
                free_scale.push(scale);
            }
        }
        SubConstraint {
            family,
            slot,
            kind,
            locals,
            free,
            free_pos,
            free_scale,
            scale,
        }
    }

    fn physical(&self, x_free: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let mut it = x_free.iter();
        for l in &self.locals {
            out.push(match *l {
                LocalVar::Free { scale, .. } => it.next().copied().unwrap_or(f64::NAN) * scale,
                LocalVar::Fixed(v) => v,
            });
        }
    }

    /// Value at the global scaled vector `x`.
    fn value_at(&self, x: &[f64]) -> f64 {
        let local: Vec<f64> = self.free.iter().map(|&j| x[j]).collect();
        let mut phys = Vec::new();
        self.physical(&local, &mut phys);
        self.kind.eval(&phys, None, None)
    }
}

/// Counts of assembled constraints per family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConstraintCount {
    pub mobility: usize,
    /// The terminal equality, realized by fixing `q[N]`.
    pub terminal: usize,
    pub average_power: usize,
    pub peak_power: usize,
    pub outage: usize,
    pub covertness: usize,
    pub bounds: usize,
    /// Constraints with no free variable, checked at assembly and dropped.
    pub dropped: usize,
}

impl ConstraintCount {
    pub fn total(&self) -> usize {
        self.mobility + self.terminal + self.average_power + self.peak_power + self.outage + self.covertness + self.bounds
    }
}

/// Convex restricted subproblem around an expansion point.
///
/// Variables are slot-major blocks `[qx, qy, P, R, y1, z1, u1, u2]`;
/// the last slot's position is fixed to the terminal point, and all
/// positions are fixed when the trajectory is not optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSubproblem {
    layout: Layout,
    objective: Vec<f64>,
    constraints: Vec<SubConstraint>,
    expansion: ExpansionPoint,
    count: ConstraintCount,
}

fn check_lengths(pt: &ExpansionPoint, n: usize) -> Result<()> {
    for (what, len) in [
        ("trajectory", pt.traj.waypoints.len()),
        ("power schedule", pt.power.powers.len()),
        ("rate schedule", pt.rates.rates.len()),
        ("u1", pt.u1.len()),
    ] {
        if len != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                actual: len,
            });
        }
    }
    Ok(())
}

/// Builds the restricted subproblem at `pt`.
///
/// Fails if `pt` violates the exact constraints by more than [`FEAS_TOL`]
/// (naming the family) or some `ũ1[n] ≤ 0`.
pub fn assemble_subproblem(pt: &ExpansionPoint, cfg: &ScenarioConfig, optimize_trajectory: bool) -> Result<ConvexSubproblem> {
    let n = cfg.num_slots();
    check_lengths(pt, n)?;
    if let Some(i) = pt.u1.iter().position(|&u| !(u > 0.0) || !u.is_finite()) {
        return Err(Error::InfeasibleExpansionPoint {
            family: "u1",
            margin: pt.u1[i],
        });
    }
    if pt.power.powers.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InfeasibleExpansionPoint {
            family: "power",
            margin: worst(&pt.power.powers),
        });
    }
    let report = check_feasibility(&pt.traj, &pt.power, &pt.rates, cfg)?;
    if let Some((family, margin)) = report.violated_family(cfg, FEAS_TOL) {
        return Err(Error::InfeasibleExpansionPoint { family, margin });
    }

    let p = cfg.params();
    let c = Consts::new(cfg);
    let fix_all = !optimize_trajectory || cfg.trajectory_is_rigid();
    let p_unit = if p.p_avg_max_w > 0.0 { p.p_avg_max_w } else { p.p_peak_max_w.max(1.0) };
    let mut slots = Vec::with_capacity(n);
    let mut next = 0;
    for i in 0..n {
        let mut block = [LocalVar::Fixed(0.0); SLOT_BLOCK];
        for (f, slot) in block.iter_mut().enumerate() {
            let is_q = f < 2;
            if is_q && (fix_all || i == n - 1) {
                let q = if i == n - 1 { p.q_final } else { pt.traj.waypoints[i] };
                *slot = LocalVar::Fixed(if f == 0 { q.x } else { q.y });
            } else {
                let scale = match f {
                    0 | 1 => POSITION_UNIT_M,
                    2 => p_unit,
                    _ => 1.0,
                };
                *slot = LocalVar::Free { index: next, scale };
                next += 1;
            }
        }
        slots.push(block);
    }
    let layout = Layout { slots, num_free: next };

    let mut objective = vec![0.0; next];
    for i in 0..n {
        if let LocalVar::Free { index, scale } = layout.get(i, Field::R) {
            objective[index] = -scale / n as f64;
        }
    }

    let mut cons: Vec<SubConstraint> = Vec::new();
    let mut count = ConstraintCount {
        terminal: 1,
        ..ConstraintCount::default()
    };
    let lv = |i: usize, f: Field| layout.get(i, f);
    let l2 = cfg.max_step() * cfg.max_step();
    let hw = c.hw();
    let kappa = c.kappa();
    for i in 0..n {
        let e = pt.slot(i);
        let q = [lv(i, Field::Qx), lv(i, Field::Qy)];
        // mobility
        let (kind, mut locals) = if i == 0 {
            (
                Kind::MobilityInitial {
                    origin: p.q_init,
                    inv_l2: 1.0 / l2,
                },
                Vec::new(),
            )
        } else {
            (
                Kind::MobilityStep { inv_l2: 1.0 / l2 },
                vec![lv(i - 1, Field::Qx), lv(i - 1, Field::Qy)],
            )
        };
        locals.extend_from_slice(&q);
        cons.push(SubConstraint::new(Family::Mobility, i, kind, locals, 1.0));

        // outage A, B, C
        let (c0, c1, c2) = g1_coeffs(e.p, e.r, c.gamma0);
        cons.push(SubConstraint::new(
            Family::Outage,
            i,
            Kind::OutageA {
                bob: c.bob,
                base: 2.0 * c.eps_b2 + c.h2,
                a: c.bti_a,
                nlr: c.neg_ln_rho_b,
                c0,
                c1,
                c2,
                inv_p_t: 1.0 / e.p,
                two_r_t: math::exp2(e.r),
            },
            vec![q[0], q[1], lv(i, Field::P), lv(i, Field::R), lv(i, Field::Y1), lv(i, Field::Z1)],
            c.outage_budget(e.q),
        ));
        cons.push(SubConstraint::new(
            Family::Outage,
            i,
            Kind::OutageB {
                bob: c.bob,
                two_eps2: 2.0 * c.eps_b2,
                two_eps4: 2.0 * c.eps_b2 * c.eps_b2,
            },
            vec![q[0], q[1], lv(i, Field::Z1)],
            c.soc_norm(e.q),
        ));
        cons.push(SubConstraint::new(
            Family::Outage,
            i,
            Kind::Lower(c.eps_b2),
            vec![lv(i, Field::Y1)],
            c.eps_b2,
        ));

        // covertness D, E, F
        let (g2k, g2u, g2l, lam_t) = g2_coeffs(e.q, e.u1, c.willie, c.eps_w2);
        let u_t = e.u1.max(U1_TILDE_MIN);
        let slope3 = kappa / (1.0 + kappa * e.p);
        let cov_locals = vec![q[0], q[1], lv(i, Field::P), lv(i, Field::U1), lv(i, Field::U2)];
        let d_scale = c.cw * math::sqrt(lam_t + 1.0);
        cons.push(SubConstraint::new(
            Family::Covertness,
            i,
            Kind::CovertD {
                willie: c.willie,
                inv_var: 1.0 / c.eps_w2,
                k2: math::sqrt(PI / 2.0),
                g2_const: g2k - g2u * u_t - g2l * lam_t,
                g2_u: g2u,
                g2_l: g2l,
                g3_const: math::ln_1p(kappa * e.p) - slope3 * e.p,
                g3_slope: slope3,
                cw: c.cw,
            },
            cov_locals.clone(),
            d_scale,
        ));
        let big = lam_t + 2.0 + hw + c.model.beta1 * e.p;
        cons.push(SubConstraint::new(
            Family::Covertness,
            i,
            Kind::CovertE {
                willie: c.willie,
                inv_var: 1.0 / c.eps_w2,
                ln_big: math::ln(big),
                inv_big: 1.0 / big,
                lam_t,
                beta1: c.model.beta1,
                p_t: e.p,
                shift: 1.0 + hw,
            },
            cov_locals,
            1.0,
        ));
        cons.push(SubConstraint::new(
            Family::Covertness,
            i,
            Kind::CovertF {
                grad: g5_grad(e.q, c.willie, c.eps_w2),
                q_t: e.q,
                lam_t,
            },
            vec![q[0], q[1], lv(i, Field::U2)],
            lam_t + 1.0,
        ));

        // peak power and variable bounds
        cons.push(SubConstraint::new(
            Family::PeakPower,
            i,
            Kind::Upper(p.p_peak_max_w),
            vec![lv(i, Field::P)],
            p.p_peak_max_w.max(p_unit),
        ));
        let bounds = [
            (Field::P, 0.0, p_unit),
            (Field::R, R_MIN, 1.0),
            (Field::U1, U1_MIN, 1e-3),
            (Field::U2, 0.0, lam_t + 1.0),
        ];
        for (f, b, s) in bounds {
            cons.push(SubConstraint::new(Family::Bounds, i, Kind::Lower(b), vec![lv(i, f)], s));
        }
    }
    cons.push(SubConstraint::new(
        Family::AveragePower,
        0,
        Kind::AveragePower {
            inv_n: 1.0 / n as f64,
            cap: p.p_avg_max_w,
        },
        (0..n).map(|i| lv(i, Field::P)).collect(),
        p_unit,
    ));

    let mut kept = Vec::with_capacity(cons.len());
    for sc in cons {
        if sc.free.is_empty() {
            let v = sc.kind.eval(
                &sc.locals
                    .iter()
                    .map(|l| match *l {
                        LocalVar::Fixed(v) => v,
                        LocalVar::Free { .. } => unreachable!(),
                    })
                    .collect::<Vec<_>>(),
                None,
                None,
            );
            if v > FEAS_TOL * sc.scale {
                return Err(Error::InfeasibleExpansionPoint {
                    family: sc.family.name(),
                    margin: -v,
                });
            }
            count.dropped += 1;
            continue;
        }
        match sc.family {
            Family::Mobility => count.mobility += 1,
            Family::AveragePower => count.average_power += 1,
            Family::PeakPower => count.peak_power += 1,
            Family::Outage => count.outage += 1,
            Family::Covertness => count.covertness += 1,
            Family::Bounds => count.bounds += 1,
        }
        kept.push(sc);
    }

    Ok(ConvexSubproblem {
        layout,
        objective,
        constraints: kept,
        expansion: pt.clone(),
        count,
    })
}

impl ConvexSubproblem {
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn expansion(&self) -> &ExpansionPoint {
        &self.expansion
    }

    pub fn constraint_count(&self) -> ConstraintCount {
        self.count
    }

    fn read(&self, x: &[f64], slot: usize, f: Field) -> f64 {
        match self.layout.get(slot, f) {
            LocalVar::Free { index, scale } => x[index] * scale,
            LocalVar::Fixed(v) => v,
        }
    }

    /// Scaled variable vector of `it`.
    pub fn pack(&self, it: &Iterate) -> Vec<f64> {
        let mut x = vec![0.0; self.layout.num_free];
        for i in 0..self.layout.num_slots() {
            let q = it.point.traj.waypoints[i];
            let vals = [
                q.x,
                q.y,
                it.point.power.powers[i],
                it.point.rates.rates[i],
                it.slacks.y1[i],
                it.slacks.z1[i],
                it.slacks.u1[i],
                it.slacks.u2[i],
            ];
            for (f, &v) in vals.iter().enumerate() {
                if let LocalVar::Free { index, scale } = self.layout.slots[i][f] {
                    x[index] = v / scale;
                }
            }
        }
        x
    }

    /// [`pack`](Self::pack) after moving `y1`, `z1` and `u2` strictly inside
    /// residuals C, B and F where they sit on or outside the boundary.
    pub fn interior_start(&self, it: &Iterate, cfg: &ScenarioConfig) -> Vec<f64> {
        let c = Consts::new(cfg);
        let mut it = it.clone();
        for i in 0..self.layout.num_slots() {
            let q = it.point.traj.waypoints[i];
            let s = &mut it.slacks;
            // only slacks that are not strictly inside move
            if !(s.y1[i] > c.eps_b2) {
                s.y1[i] = c.eps_b2 * (1.0 + SLACK_INFLATION);
            }
            let norm = c.soc_norm(q);
            if !(s.z1[i] > norm) {
                s.z1[i] = norm * (1.0 + SLACK_INFLATION);
            }
            if !(s.u1[i] > U1_MIN) {
                s.u1[i] = 2.0 * U1_MIN;
            }
            let lam1 = c.lambda(q) + 1.0;
            if !(s.u2[i] < lam1) {
                s.u2[i] = lam1 * (1.0 - SLACK_INFLATION);
            }
        }
        self.pack(&it)
    }

    /// Physical iterate of a scaled solution vector. The new expansion
    /// point takes `ũ1 = u1`.
    pub fn unpack(&self, x: &[f64]) -> Iterate {
        let n = self.layout.num_slots();
        let mut waypoints = Vec::with_capacity(n);
        let mut powers = Vec::with_capacity(n);
        let mut rates = Vec::with_capacity(n);
        let mut s = SlackVars {
            y1: Vec::with_capacity(n),
            z1: Vec::with_capacity(n),
            u1: Vec::with_capacity(n),
            u2: Vec::with_capacity(n),
        };
        for i in 0..n {
            waypoints.push(Vec2::new(self.read(x, i, Field::Qx), self.read(x, i, Field::Qy)));
            powers.push(self.read(x, i, Field::P));
            rates.push(self.read(x, i, Field::R));
            s.y1.push(self.read(x, i, Field::Y1));
            s.z1.push(self.read(x, i, Field::Z1));
            s.u1.push(self.read(x, i, Field::U1));
            s.u2.push(self.read(x, i, Field::U2));
        }
        Iterate {
            point: ExpansionPoint {
                traj: Trajectory { waypoints },
                power: PowerSchedule { powers },
                rates: RateSchedule { rates },
                u1: s.u1.clone(),
            },
            slacks: s,
        }
    }

    /// `(family, slot, label, value)` for every kept constraint at `x`.
    pub fn residuals(&self, x: &[f64]) -> Vec<(Family, usize, &'static str, f64)> {
        self.constraints
            .iter()
            .map(|sc| (sc.family, sc.slot, sc.kind.label(), sc.value_at(x)))
            .collect()
    }

    /// Plain-text listing of the layout, constraints and expansion point.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        let n = self.layout.num_slots();
        let _ = writeln!(out, "# subproblem: {} slots, {} free variables, {} constraints", n, self.layout.num_free, self.constraints.len());
        let _ = writeln!(out, "[layout]");
        for i in 0..n {
            let _ = write!(out, "slot {i}:");
            for (f, l) in self.layout.slots[i].iter().enumerate() {
                match *l {
                    LocalVar::Free { index, scale } => {
                        let _ = write!(out, " {}=x{}*{}", FIELD_NAMES[f], index, scale);
                    }
                    LocalVar::Fixed(v) => {
                        let _ = write!(out, " {}={}", FIELD_NAMES[f], v);
                    }
                }
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out, "[constraints]");
        for (k, sc) in self.constraints.iter().enumerate() {
            let _ = writeln!(
                out,
                "{k} {} {}[{}] vars={:?} scale={}",
                sc.family.name(),
                sc.kind.label(),
                sc.slot,
                sc.free,
                sc.scale
            );
        }
        let _ = writeln!(out, "[expansion]");
        for i in 0..n {
            let e = self.expansion.slot(i);
            let _ = writeln!(out, "slot {i}: q=({}, {}) P={} R={} u1={}", e.q.x, e.q.y, e.p, e.r, e.u1);
        }
        out
    }
}

impl ConvexProgram for ConvexSubproblem {
    fn num_vars(&self) -> usize {
        self.layout.num_free
    }

    fn objective(&self) -> &[f64] {
        &self.objective
    }

    fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    fn vars(&self, i: usize) -> &[usize] {
        &self.constraints[i].free
    }

    fn is_affine(&self, i: usize) -> bool {
        self.constraints[i].kind.is_affine()
    }

    fn scale(&self, i: usize) -> f64 {
        self.constraints[i].scale
    }

    fn eval(&self, i: usize, x: &[f64], grad: Option<&mut [f64]>, hess: Option<&mut [f64]>) -> f64 {
        let sc = &self.constraints[i];
        let mut phys = Vec::with_capacity(sc.locals.len());
        sc.physical(x, &mut phys);
        let k = phys.len();
        let want_g = grad.is_some();
        let want_h = hess.is_some() && !sc.kind.is_affine();
        let mut g = if want_g { vec![0.0; k] } else { Vec::new() };
        let mut h = if want_h { vec![0.0; k * k] } else { Vec::new() };
        let v = sc.kind.eval(
            &phys,
            if want_g { Some(&mut g) } else { None },
            if want_h { Some(&mut h) } else { None },
        );
        if let Some(out) = grad {
            for (a, (&pos, &s)) in sc.free_pos.iter().zip(&sc.free_scale).enumerate() {
                out[a] = g[pos] * s;
            }
        }
        if let (Some(out), true) = (hess, want_h) {
            let kf = sc.free.len();
            for a in 0..kf {
                for b in 0..kf {
                    out[a * kf + b] = h[sc.free_pos[a] * k + sc.free_pos[b]] * sc.free_scale[a] * sc.free_scale[b];
                }
            }
        }
        v
    }
}
