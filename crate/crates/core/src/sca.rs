//! Successive convex approximation planner.
//!
//! Starting from the line-segment trajectory with covert-safe powers, each
//! iteration solves the convex restriction built around the previous
//! solution. The restriction is tangent at its expansion point, so iterates
//! stay feasible and the average rate never decreases.

use alloc::vec::Vec;

use crate::convexify::{
    assemble_subproblem, check_feasibility, covertness_residuals, Consts, ExpansionPoint, FeasibilityReport, Iterate,
    SlackVars, SlotPoint, SlotVars, SLACK_INFLATION,
};
use crate::cvxsolver::{self, IterLog, SolverSettings, SolverStatus};
use crate::detection;
use crate::math::{self, Vec2};
use crate::scenario::{PowerSchedule, RateSchedule, ScenarioConfig, Trajectory, FEAS_TOL, R_MIN};
use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Smallest power the initializer assigns to a slot, W.
pub const POWER_FLOOR_W: f64 = 1e-8;

/// Margin by which the initial covertness residual is kept below zero.
const INIT_COVERT_MARGIN: f64 = 1e-7;
/// Relative back-off of the initial rate from the outage boundary.
const INIT_RATE_BACKOFF: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Scheme {
    /// Joint trajectory and power.
    Jtp,
    /// Power only, trajectory fixed at the line-segment path.
    Stp,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Jtp => "JTP",
            Scheme::Stp => "STP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaSettings {
    pub solver: SolverSettings,
    pub max_outer: usize,
    /// Stopping tolerance on `|R̄^i − R̄^{i−1}|`; `None` uses the scenario's.
    pub tolerance: Option<f64>,
    /// Keep every expansion point in the trace.
    pub keep_expansions: bool,
}

impl Default for ScaSettings {
    fn default() -> Self {
        ScaSettings {
            solver: SolverSettings::default(),
            max_outer: 100,
            tolerance: None,
            keep_expansions: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// The subproblem solver reported infeasibility; the last iterate is kept.
    SolverFailure,
    /// A solution failed the exact feasibility re-check; the last good iterate is kept.
    FeasibilityLost,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IterationRecord {
    pub objective_bps_hz: f64,
    pub solver_status: SolverStatus,
    pub newton_iterations: usize,
    pub phase1_iterations: usize,
    pub gap: f64,
    pub feasible: bool,
    pub worst_outage_margin: f64,
    pub worst_xi_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScaTrace {
    /// `R̄^i`, starting with the initial point.
    pub objective_bps_hz: Vec<f64>,
    pub records: Vec<IterationRecord>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub expansions: Vec<ExpansionPoint>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub solver_logs: Vec<Vec<IterLog>>,
    pub stop: StopReason,
    pub subproblem_solves: usize,
}

impl ScaTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// Planned trajectory, powers and rates with per-slot diagnostics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Plan {
    pub scheme: Scheme,
    pub trajectory: Trajectory,
    pub power: PowerSchedule,
    pub rates: RateSchedule,
    pub slacks: SlackVars,
    pub actr_bps_hz: f64,
    pub lambda: Vec<f64>,
    pub xi_lower: Vec<f64>,
    /// Relative outage margin per slot (`≥ 0` when satisfied).
    pub outage_margin: Vec<f64>,
    /// Covertness residuals `[D, E, F]` at the plan's own expansion, showing
    /// how close the slack definitions are to holding with equality.
    pub covert_residuals: Vec<[f64; 3]>,
    pub feasible: bool,
}

impl Plan {
    pub fn from_iterate(it: &Iterate, cfg: &ScenarioConfig, scheme: Scheme) -> Result<Plan> {
        let p = &it.point;
        let rep = check_feasibility(&p.traj, &p.power, &p.rates, cfg)?;
        let c = Consts::new(cfg);
        let covert_residuals = (0..p.num_slots())
            .map(|i| {
                let e = p.slot(i);
                let v = SlotVars {
                    q: e.q,
                    p: e.p,
                    r: e.r,
                    y1: it.slacks.y1[i],
                    z1: it.slacks.z1[i],
                    u1: it.slacks.u1[i],
                    u2: it.slacks.u2[i],
                };
                covertness_residuals(&v, &e, &c)
            })
            .collect();
        Ok(Plan {
            scheme,
            trajectory: p.traj.clone(),
            power: p.power.clone(),
            rates: p.rates.clone(),
            slacks: it.slacks.clone(),
            actr_bps_hz: p.rates.mean(),
            feasible: rep.is_feasible(cfg, FEAS_TOL),
            lambda: rep.lambda,
            xi_lower: rep.xi_lower,
            outage_margin: rep.outage,
            covert_residuals,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.trajectory.waypoints.len()
    }

    pub fn iterate(&self) -> Iterate {
        Iterate {
            point: ExpansionPoint {
                traj: self.trajectory.clone(),
                power: self.power.clone(),
                rates: self.rates.clone(),
                u1: self.slacks.u1.clone(),
            },
            slacks: self.slacks.clone(),
        }
    }

    pub fn feasibility(&self, cfg: &ScenarioConfig) -> Result<FeasibilityReport> {
        check_feasibility(&self.trajectory, &self.power, &self.rates, cfg)
    }
}

fn whole_steps(d: f64, l: f64) -> usize {
    if d <= 1e-12 * l {
        0
    } else {
        math::ceil(d / l - 1e-9) as usize
    }
}

/// Points at arc lengths `k · total/count`, `k = 1..=count`, along a
/// polyline; the last point is the final vertex exactly.
fn sample_polyline(vertices: &[Vec2], count: usize) -> Vec<Vec2> {
    let seg: Vec<f64> = vertices.windows(2).map(|w| w[0].dist(w[1])).collect();
    let total: f64 = seg.iter().sum();
    let last = *vertices.last().expect("non-empty polyline");
    let mut out = Vec::with_capacity(count);
    for k in 1..=count {
        if k == count || total == 0.0 {
            out.push(last);
            continue;
        }
        let mut s = total * k as f64 / count as f64;
        let mut placed = false;
        for (i, &len) in seg.iter().enumerate() {
            if s <= len && len > 0.0 {
                out.push(vertices[i].lerp(vertices[i + 1], s / len));
                placed = true;
                break;
            }
            s -= len;
        }
        if !placed {
            out.push(last);
        }
    }
    out
}

/// Max-speed leg to the receiver estimate, hover, max-speed leg to the
/// terminal point; or a turn at the midway point that exhausts the flight
/// budget when there is no time to reach the receiver.
pub fn line_segment_trajectory(cfg: &ScenarioConfig) -> Result<Trajectory> {
    let p = cfg.params();
    let n = cfg.num_slots();
    let l = cfg.max_step();
    let (q0, qf, b) = (p.q_init, p.q_final, p.bob_est);
    let reach = n as f64 * l;
    if q0.dist(qf) > reach * (1.0 + FEAS_TOL) {
        return Err(Error::Unreachable {
            distance_m: q0.dist(qf),
            reach_m: reach,
        });
    }
    let d1 = q0.dist(b);
    let d2 = b.dist(qf);
    let m1 = whole_steps(d1, l);
    let m2 = whole_steps(d2, l);
    if m1 + m2 <= n {
        let mut w = Vec::with_capacity(n);
        for k in 1..=m1 {
            w.push(q0.lerp(b, (k as f64 * l / d1).min(1.0)));
        }
        for _ in 0..(n - m1 - m2) {
            w.push(b);
        }
        for k in 1..=m2 {
            w.push(b.lerp(qf, (k as f64 * l / d2).min(1.0)));
        }
        if let Some(last) = w.last_mut() {
            *last = qf;
        }
        return Ok(Trajectory { waypoints: w });
    }
    let vertices = if d1 + d2 <= reach || d1 == 0.0 {
        [q0, b, qf]
    } else {
        let dvec = qf - q0;
        let u = (b - q0) * (1.0 / d1);
        let s = ((reach * reach - dvec.norm_sq()) / (2.0 * (reach - u.dot(dvec)))).max(0.0);
        [q0, q0 + u * s, qf]
    };
    Ok(Trajectory {
        waypoints: sample_polyline(&vertices, n),
    })
}

/// `ln(1 + β1 P / (λ + 2 + H²/ε_w²))`, the initial covertness slack.
pub fn initial_u1(q: Vec2, p: f64, c: &Consts) -> f64 {
    let lam = c.lambda(q);
    math::ln_1p(c.model.beta1 * p / (lam + 2.0 + c.model.h2_over_var()))
}

fn initial_covert_residual(q: Vec2, p: f64, c: &Consts) -> f64 {
    let u1 = initial_u1(q, p, c);
    let e = SlotPoint { q, p, r: 1.0, u1 };
    let v = SlotVars {
        q,
        p,
        r: 1.0,
        y1: c.eps_b2,
        z1: 0.0,
        u1,
        u2: (c.lambda(q) + 1.0) * (1.0 - SLACK_INFLATION),
    };
    covertness_residuals(&v, &e, c)[0]
}

/// Largest rate meeting the outage residual A with the slacks at their
/// inflated floors.
fn initial_rate(q: Vec2, p: f64, c: &Consts) -> f64 {
    let budget = 2.0 * c.eps_b2
        + c.bti_a * c.soc_norm(q) * (1.0 + SLACK_INFLATION)
        + c.neg_ln_rho_b * c.eps_b2 * (1.0 + SLACK_INFLATION)
        + q.dist_sq(c.bob)
        + c.h2;
    math::log2(1.0 + c.gamma0 * p / budget * (1.0 - INIT_RATE_BACKOFF)).max(R_MIN)
}

/// Initial expansion point on the line-segment trajectory.
///
/// The power is the largest uniform value in `[floor, min(P̄, P_peak))` for
/// which the covertness residual D (with `ũ1` from the initial-slack
/// formula) holds in every slot; that also implies `ξ̌*[n] ≥ 1 − ρ_w`.
/// Slots that cannot meet it even at the floor get the floor power and
/// `R_min`; if such a slot still violates `ξ̌* ≥ 1 − ρ_w` the scenario is
/// reported infeasible.
pub fn initial_point(cfg: &ScenarioConfig) -> Result<ExpansionPoint> {
    let traj = line_segment_trajectory(cfg)?;
    let p = cfg.params();
    let c = Consts::new(cfg);
    let cap = p.p_avg_max_w.min(p.p_peak_max_w) * (1.0 - FEAS_TOL);
    if !(cap > POWER_FLOOR_W) {
        return Err(Error::InvalidParameter {
            field: "p_avg_max",
            reason: "power budget below the initializer floor".into(),
        });
    }
    let ok = |q: Vec2, pw: f64| initial_covert_residual(q, pw, &c) <= -INIT_COVERT_MARGIN;
    let mut floor_slots = Vec::new();
    let mut uniform = cap;
    for (i, &q) in traj.waypoints.iter().enumerate() {
        if !ok(q, POWER_FLOOR_W) {
            floor_slots.push(i);
            continue;
        }
        if ok(q, uniform) {
            continue;
        }
        let (mut lo, mut hi) = (math::ln(POWER_FLOOR_W), math::ln(uniform));
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if ok(q, math::exp(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        uniform = math::exp(lo);
    }
    let mut powers = alloc::vec![uniform; traj.waypoints.len()];
    let mut rates: Vec<f64> = traj.waypoints.iter().map(|&q| initial_rate(q, uniform, &c)).collect();
    for &i in &floor_slots {
        powers[i] = POWER_FLOOR_W;
        rates[i] = R_MIN;
        let lam = c.lambda(traj.waypoints[i]);
        if detection::xi_lower_bound(lam, POWER_FLOOR_W, &c.model) < 1.0 - p.rho_w {
            return Err(Error::CovertnessInfeasible { slot: i });
        }
    }
    let u1 = traj
        .waypoints
        .iter()
        .zip(&powers)
        .map(|(&q, &pw)| initial_u1(q, pw, &c))
        .collect();
    Ok(ExpansionPoint {
        traj,
        power: PowerSchedule { powers },
        rates: RateSchedule { rates },
        u1,
    })
}

/// [`initial_point`] with slacks at their tight values.
pub fn initial_iterate(cfg: &ScenarioConfig) -> Result<Iterate> {
    let point = initial_point(cfg)?;
    let slacks = SlackVars::tight(&point, cfg);
    Ok(Iterate { point, slacks })
}

pub fn run_jtp(cfg: &ScenarioConfig, settings: &ScaSettings) -> Result<(Plan, ScaTrace)> {
    run_scheme(cfg, Scheme::Jtp, settings)
}

pub fn run_stp(cfg: &ScenarioConfig, settings: &ScaSettings) -> Result<(Plan, ScaTrace)> {
    run_scheme(cfg, Scheme::Stp, settings)
}

pub fn run_scheme(cfg: &ScenarioConfig, scheme: Scheme, settings: &ScaSettings) -> Result<(Plan, ScaTrace)> {
    run_from(cfg, scheme, initial_iterate(cfg)?, settings)
}

/// Restarts the loop from a previous plan (its slacks included).
pub fn resume(cfg: &ScenarioConfig, plan: &Plan, settings: &ScaSettings) -> Result<(Plan, ScaTrace)> {
    run_from(cfg, plan.scheme, plan.iterate(), settings)
}

/// The SCA loop from an arbitrary feasible iterate.
pub fn run_from(cfg: &ScenarioConfig, scheme: Scheme, start: Iterate, settings: &ScaSettings) -> Result<(Plan, ScaTrace)> {
    let tol = settings.tolerance.unwrap_or(cfg.params().sca_tolerance);
    let optimize = scheme == Scheme::Jtp;
    let mut cur = start;
    let mut obj = cur.point.rates.mean();
    let mut trace = ScaTrace {
        objective_bps_hz: alloc::vec![obj],
        records: Vec::new(),
        expansions: Vec::new(),
        solver_logs: Vec::new(),
        stop: StopReason::MaxIterations,
        subproblem_solves: 0,
    };
    if settings.keep_expansions {
        trace.expansions.push(cur.point.clone());
    }
    for i in 0..settings.max_outer {
        let sub = match assemble_subproblem(&cur.point, cfg, optimize) {
            Ok(s) => s,
            Err(e) if i == 0 => return Err(e),
            Err(_) => {
                trace.stop = StopReason::FeasibilityLost;
                break;
            }
        };
        let x0 = sub.interior_start(&cur, cfg);
        let res = cvxsolver::solve(&sub, &x0, &settings.solver);
        trace.subproblem_solves += 1;
        if settings.solver.log_iterations {
            trace.solver_logs.push(res.log.clone());
        }
        if res.status == SolverStatus::Infeasible {
            trace.stop = StopReason::SolverFailure;
            break;
        }
        let next = sub.unpack(&res.variables);
        let rep = check_feasibility(&next.point.traj, &next.point.power, &next.point.rates, cfg)?;
        let feasible = rep.is_feasible(cfg, FEAS_TOL);
        let new_obj = next.point.rates.mean();
        trace.records.push(IterationRecord {
            objective_bps_hz: new_obj,
            solver_status: res.status,
            newton_iterations: res.iterations,
            phase1_iterations: res.phase1_iterations,
            gap: res.gap,
            feasible,
            worst_outage_margin: rep.worst_outage(),
            worst_xi_margin: rep.worst_covertness(),
        });
        if !feasible {
            trace.stop = StopReason::FeasibilityLost;
            break;
        }
        trace.objective_bps_hz.push(new_obj);
        if settings.keep_expansions {
            trace.expansions.push(next.point.clone());
        }
        cur = next;
        if math::abs(new_obj - obj) <= tol {
            trace.stop = StopReason::Converged;
            break;
        }
        obj = new_obj;
    }
    let plan = Plan::from_iterate(&cur, cfg, scheme)?;
    Ok((plan, trace))
}
