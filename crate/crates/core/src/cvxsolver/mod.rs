//! Primal log-barrier interior-point solver for smooth convex programs
//!
//! ```text
//! minimize cᵀx   subject to   c_i(x) ≤ 0,  i = 1..m
//! ```
//!
//! where each `c_i` is convex, twice differentiable on its domain and
//! depends on a small subset of the variables. Centering uses damped Newton
//! steps with a feasibility-preserving backtracking line search; the barrier
//! weight grows geometrically until the duality-gap bound `m / t` falls below
//! the tolerance. A phase-I problem restores strict feasibility when the
//! start point is not strictly interior.

pub mod linalg;

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use linalg::{Border, NewtonSystem};

/// A convex program in the form accepted by [`solve`].
///
/// Constraint `i` reads the variables listed by [`vars`](Self::vars), in that
/// order; gradients and Hessians are with respect to those local variables.
pub trait ConvexProgram {
    fn num_vars(&self) -> usize;

    /// Linear objective coefficients, length `num_vars`.
    fn objective(&self) -> &[f64];

    fn num_constraints(&self) -> usize;

    fn vars(&self, i: usize) -> &[usize];

    /// Affine constraints have zero Hessian; the solver never asks for it.
    fn is_affine(&self, i: usize) -> bool;

    /// Natural magnitude of constraint `i`, used to normalize reports and
    /// the phase-I problem.
    fn scale(&self, _i: usize) -> f64 {
        1.0
    }

    /// Value of `c_i` at the local point `x`, optionally filling the local
    /// gradient and the row-major local Hessian (both pre-zeroed, Hessian
    /// `k × k` for `k = vars(i).len()`).
    ///
    /// Outside the domain the value must be `+∞` or NaN.
    fn eval(&self, i: usize, x: &[f64], grad: Option<&mut [f64]>, hess: Option<&mut [f64]>) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Target on the duality-gap bound, relative to `max(1, |objective|)`.
    pub kkt_tol: f64,
    /// Cap on Newton iterations per centering stage.
    pub max_iters: usize,
    /// Initial barrier parameter `μ = 1/t`; `None` picks it from the start point.
    pub barrier_mu_init: Option<f64>,
    /// Factor applied to `μ` between centering stages.
    pub barrier_shrink: f64,
    /// Armijo sufficient-decrease fraction.
    pub ls_alpha: f64,
    /// Backtracking factor.
    pub ls_beta: f64,
    /// Centering stops once half the squared Newton decrement drops below this.
    pub newton_tol: f64,
    /// Record an [`IterLog`] entry per Newton step.
    pub log_iterations: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            kkt_tol: 1e-7,
            max_iters: 200,
            barrier_mu_init: None,
            barrier_shrink: 0.1,
            ls_alpha: 0.25,
            ls_beta: 0.5,
            newton_tol: 1e-9,
            log_iterations: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.kkt_tol > 0.0) {
            return Err("kkt_tol must be > 0");
        }
        if !(self.barrier_shrink > 0.0 && self.barrier_shrink < 1.0) {
            return Err("barrier_shrink must lie in (0, 1)");
        }
        if !(self.ls_alpha > 0.0 && self.ls_alpha < 0.5) || !(self.ls_beta > 0.0 && self.ls_beta < 1.0) {
            return Err("line-search parameters out of range");
        }
        if self.max_iters == 0 {
            return Err("max_iters must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SolverStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

/// First-order optimality measures.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Largest normalized violation `max(0, c_i / scale_i)`.
    pub primal: f64,
    /// Normalized constraint values `c_i / scale_i`.
    pub primal_components: Vec<f64>,
    /// `‖c + Σ μ_i ∇c_i‖∞ / max(1, ‖c‖∞)`.
    pub stationarity: f64,
    /// `max_i μ_i |c_i|`.
    pub complementarity: f64,
    /// Multipliers used.
    pub multipliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterLog {
    pub phase1: bool,
    pub stage: usize,
    pub iter: usize,
    pub t: f64,
    pub objective: f64,
    pub step: f64,
    pub decrement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub variables: Vec<f64>,
    pub objective: f64,
    pub status: SolverStatus,
    pub kkt: KktReport,
    /// Newton iterations over all stages (phase I included).
    pub iterations: usize,
    pub phase1_iterations: usize,
    /// Duality-gap bound `m / t` at exit.
    pub gap: f64,
    pub log: Vec<IterLog>,
}

struct Info {
    vars: Vec<Vec<usize>>,
    affine: Vec<bool>,
    /// Handled as low-rank updates instead of inside the band.
    wide: Vec<bool>,
    bw: usize,
    scale: Vec<f64>,
}

/// Constraints spanning more variables than this go through Woodbury
/// (they must be affine) unless the problem is small enough to go dense.
const BAND_LIMIT: usize = 48;
/// Below this many variables the Newton matrix is stored densely.
const DENSE_MAX: usize = 160;

fn analyze<P: ConvexProgram + ?Sized>(p: &P, extra: usize) -> Info {
    let n = p.num_vars();
    let m = p.num_constraints();
    let mut vars = Vec::with_capacity(m);
    let mut affine = Vec::with_capacity(m);
    let mut wide = Vec::with_capacity(m);
    let mut scale = Vec::with_capacity(m);
    let dense = n + extra <= DENSE_MAX;
    let mut bw = 0;
    for i in 0..m {
        let v = p.vars(i).to_vec();
        let lo = v.iter().copied().min().unwrap_or(0);
        let hi = v.iter().copied().max().unwrap_or(0);
        let span = hi - lo;
        let aff = p.is_affine(i);
        let w = !dense && span > BAND_LIMIT && aff;
        if !w {
            bw = bw.max(span);
        }
        vars.push(v);
        affine.push(aff);
        wide.push(w);
        let s = p.scale(i);
        scale.push(if s > 0.0 && s.is_finite() { s } else { 1.0 });
    }
    if dense {
        bw = n.saturating_sub(1);
    }
    Info {
        vars,
        affine,
        wide,
        bw,
        scale,
    }
}

/// Barrier evaluator; `phase1` appends the variable `s` at index `n` and
/// replaces each constraint by `c_i / scale_i − s ≤ 0` plus `−1 − s ≤ 0`.
struct Barrier<'a, P: ConvexProgram + ?Sized> {
    p: &'a P,
    info: &'a Info,
    phase1: bool,
    n: usize,
}

impl<'a, P: ConvexProgram + ?Sized> Barrier<'a, P> {
    fn m(&self) -> usize {
        self.p.num_constraints() + self.phase1 as usize
    }

    fn obj_dir(&self) -> Vec<f64> {
        if self.phase1 {
            let mut c = vec![0.0; self.n + 1];
            c[self.n] = 1.0;
            c
        } else {
            self.p.objective().to_vec()
        }
    }

    fn local(&self, i: usize, x: &[f64], buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.info.vars[i].iter().map(|&j| x[j]));
    }

    /// Barrier-form constraint values; `None` if any is not strictly negative.
    fn values(&self, x: &[f64]) -> Option<Vec<f64>> {
        let m0 = self.p.num_constraints();
        let mut out = Vec::with_capacity(self.m());
        let mut buf = Vec::new();
        for i in 0..m0 {
            self.local(i, x, &mut buf);
            let mut v = self.p.eval(i, &buf, None, None);
            if self.phase1 {
                v = v / self.info.scale[i] - x[self.n];
            }
            if !(v < 0.0) {
                return None;
            }
            out.push(v);
        }
        if self.phase1 {
            let v = -1.0 - x[self.n];
            if !(v < 0.0) {
                return None;
            }
            out.push(v);
        }
        Some(out)
    }

    /// Gradient `t c − Σ ∇c_i / c_i` and Newton matrix at `x`.
    fn assemble(&self, x: &[f64], vals: &[f64], t: f64) -> (Vec<f64>, NewtonSystem) {
        let n = self.n;
        let dense = n + self.phase1 as usize <= DENSE_MAX;
        let dim = if dense && self.phase1 { n + 1 } else { n };
        let mut grad = vec![0.0; n + self.phase1 as usize];
        let c = self.obj_dir();
        for j in 0..grad.len() {
            grad[j] = t * c[j];
        }
        let mut sys = NewtonSystem::new(dim, if dense { dim.saturating_sub(1) } else { self.info.bw });
        let mut border_col = vec![0.0; if self.phase1 && !dense { n } else { 0 }];
        let mut border_diag = 0.0;
        let mut buf = Vec::new();
        let mut g = Vec::new();
        let mut h = Vec::new();
        let m0 = self.p.num_constraints();
        for i in 0..m0 {
            let vars = &self.info.vars[i];
            let k = vars.len();
            self.local(i, x, &mut buf);
            g.clear();
            g.resize(k, 0.0);
            let affine = self.info.affine[i];
            if !affine {
                h.clear();
                h.resize(k * k, 0.0);
            }
            self.p.eval(i, &buf, Some(&mut g), if affine { None } else { Some(&mut h) });
            let (cs, sig) = if self.phase1 {
                (1.0 / self.info.scale[i], -1.0)
            } else {
                (1.0, 0.0)
            };
            let v = vals[i];
            let inv = -1.0 / v; // > 0
            let inv2 = inv * inv;
            for (a, &j) in vars.iter().enumerate() {
                grad[j] += inv * cs * g[a];
            }
            if self.phase1 {
                grad[n] += inv * sig;
            }
            if self.info.wide[i] {
                let mut col = vec![0.0; n];
                for (a, &j) in vars.iter().enumerate() {
                    col[j] += cs * g[a];
                }
                if self.phase1 {
                    // rank-one term couples with s: handled below through the border
                    for (a, &j) in vars.iter().enumerate() {
                        border_col[j] += inv2 * cs * g[a] * sig;
                    }
                    border_diag += inv2;
                }
                sys.updates.push((col, inv2));
                continue;
            }
            for (a, &ja) in vars.iter().enumerate() {
                for (b, &jb) in vars.iter().enumerate().take(a + 1) {
                    let mut v2 = inv2 * cs * cs * g[a] * g[b];
                    if !affine {
                        v2 += inv * cs * h[a * k + b];
                    }
                    if v2 != 0.0 {
                        sys.band.add(ja, jb, v2);
                    }
                }
            }
            if self.phase1 {
                if dense {
                    for (a, &j) in vars.iter().enumerate() {
                        sys.band.add(n, j, inv2 * cs * g[a] * sig);
                    }
                    sys.band.add(n, n, inv2);
                } else {
                    for (a, &j) in vars.iter().enumerate() {
                        border_col[j] += inv2 * cs * g[a] * sig;
                    }
                    border_diag += inv2;
                }
            }
        }
        if self.phase1 {
            let v = vals[m0];
            let inv = -1.0 / v;
            grad[n] += inv * -1.0;
            if dense {
                sys.band.add(n, n, inv * inv);
            } else {
                border_diag += inv * inv;
                sys.border = Some(Border {
                    col: border_col,
                    diag: border_diag,
                });
            }
        }
        (grad, sys)
    }

    fn solve_newton(&self, sys: &NewtonSystem, grad: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        if sys.border.is_some() {
            let (mut dx, ds) = sys.solve(&rhs[..n], rhs[n]).ok()?;
            dx.push(ds);
            Some(dx)
        } else {
            sys.solve(&rhs, 0.0).ok().map(|(x, _)| x)
        }
    }
}

/// A step this short with the decrement below [`STALL_DECREMENT`] means the
/// line search is fighting round-off in nearly active constraints.
const STALL_STEP: f64 = 1e-3;
const STALL_DECREMENT: f64 = 1e-6;

struct StageOutcome {
    iters: usize,
    hit_cap: bool,
}

/// Centers `x` for barrier weight `t`. `stop_early` ends the stage as soon
/// as it returns true on an accepted iterate.
fn center<P: ConvexProgram + ?Sized>(
    b: &Barrier<'_, P>,
    x: &mut Vec<f64>,
    t: f64,
    stage: usize,
    settings: &SolverSettings,
    log: &mut Vec<IterLog>,
    stop_early: &dyn Fn(&[f64]) -> bool,
) -> StageOutcome {
    let c = b.obj_dir();
    let mut vals = b.values(x).expect("centering requires a strictly feasible point");
    let mut iters = 0;
    loop {
        if iters >= settings.max_iters {
            return StageOutcome { iters, hit_cap: true };
        }
        let (grad, sys) = b.assemble(x, &vals, t);
        let Some(dx) = b.solve_newton(&sys, &grad) else {
            return StageOutcome { iters, hit_cap: false };
        };
        let slope = linalg::dot(&grad, &dx);
        let dec2 = -slope;
        if !(dec2 > 0.0) || 0.5 * dec2 <= settings.newton_tol {
            return StageOutcome { iters, hit_cap: false };
        }
        let cdx = linalg::dot(&c, &dx);
        let mut alpha = 1.0;
        let mut trial = x.clone();
        let accepted = loop {
            for j in 0..x.len() {
                trial[j] = x[j] + alpha * dx[j];
            }
            if let Some(tv) = b.values(&trial) {
                // barrier change computed from ratios to avoid cancellation
                let mut dphi = alpha * t * cdx;
                for (a, bv) in tv.iter().zip(&vals) {
                    dphi -= math::ln(a / bv);
                }
                if dphi <= settings.ls_alpha * alpha * slope {
                    break Some(tv);
                }
            }
            alpha *= settings.ls_beta;
            if alpha < 1e-14 {
                break None;
            }
        };
        let Some(tv) = accepted else {
            return StageOutcome { iters, hit_cap: false };
        };
        core::mem::swap(x, &mut trial);
        vals = tv;
        iters += 1;
        if settings.log_iterations {
            log.push(IterLog {
                phase1: b.phase1,
                stage,
                iter: iters,
                t,
                objective: linalg::dot(&c, x),
                step: alpha,
                decrement: dec2,
            });
        }
        if stop_early(x) || (alpha < STALL_STEP && 0.5 * dec2 <= STALL_DECREMENT) {
            return StageOutcome { iters, hit_cap: false };
        }
    }
}

fn initial_t<P: ConvexProgram + ?Sized>(b: &Barrier<'_, P>, x: &[f64], vals: &[f64]) -> f64 {
    // least-squares fit of t c ≈ −∇(barrier) in the Hessian metric
    let (g_b, sys) = b.assemble(x, vals, 0.0);
    let c = b.obj_dir();
    let hc = match b.solve_newton(&sys, &c.iter().map(|v| -v).collect::<Vec<_>>()) {
        Some(v) => v,
        None => return 1.0,
    };
    let num = -linalg::dot(&g_b, &hc);
    let den = linalg::dot(&c, &hc);
    let t = num / den;
    if t.is_finite() && t > 0.0 {
        t.clamp(1e-6, 1e8)
    } else {
        1.0
    }
}

fn max_normalized_violation<P: ConvexProgram + ?Sized>(p: &P, x: &[f64]) -> Vec<f64> {
    let mut buf = Vec::new();
    (0..p.num_constraints())
        .map(|i| {
            buf.clear();
            buf.extend(p.vars(i).iter().map(|&j| x[j]));
            let s = p.scale(i);
            let s = if s > 0.0 && s.is_finite() { s } else { 1.0 };
            p.eval(i, &buf, None, None) / s
        })
        .collect()
}

/// Runs phase I from `x0`; returns a strictly feasible point or `None`.
fn phase1<P: ConvexProgram + ?Sized>(
    p: &P,
    x0: &[f64],
    settings: &SolverSettings,
    log: &mut Vec<IterLog>,
    iters: &mut usize,
) -> Option<Vec<f64>> {
    let n = p.num_vars();
    let info = analyze(p, 1);
    let b = Barrier {
        p,
        info: &info,
        phase1: true,
        n,
    };
    let viol = max_normalized_violation(p, x0);
    let worst = viol.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !worst.is_finite() {
        return None;
    }
    let mut x = x0.to_vec();
    x.push(worst + 0.1 * worst.abs().max(1.0));
    let vals = b.values(&x)?;
    let mut t = initial_t(&b, &x, &vals);
    let m = b.m() as f64;
    let strict = |z: &[f64]| z[n] < -1e-9 && max_normalized_violation(p, &z[..n]).iter().all(|&v| v < 0.0);
    for stage in 0..60 {
        let out = center(&b, &mut x, t, stage, settings, log, &strict);
        *iters += out.iters;
        if strict(&x) {
            x.truncate(n);
            return Some(x);
        }
        // optimum of the phase-I problem is provably nonnegative
        if x[n] - m / t >= 0.0 || m / t < 1e-12 {
            return None;
        }
        t /= settings.barrier_shrink;
    }
    None
}

/// Solves `p` from `start`.
///
/// The start need not be strictly feasible; phase I runs otherwise. When the
/// start is feasible within tolerance and the barrier path ends at a worse
/// objective (possible only through round-off), the start is returned.
pub fn solve<P: ConvexProgram + ?Sized>(p: &P, start: &[f64], settings: &SolverSettings) -> SolverResult {
    assert_eq!(start.len(), p.num_vars());
    let n = p.num_vars();
    let info = analyze(p, 0);
    let b = Barrier {
        p,
        info: &info,
        phase1: false,
        n,
    };
    let mut log = Vec::new();
    let mut iterations = 0;
    let c = p.objective();
    let start_obj = linalg::dot(c, start);
    let start_viol = max_normalized_violation(p, start);
    let start_ok = start_viol.iter().all(|&v| v <= settings.kkt_tol);

    let mut x = start.to_vec();
    let mut phase1_iterations = 0;
    if b.values(&x).is_none() {
        match phase1(p, start, settings, &mut log, &mut phase1_iterations) {
            Some(z) => x = z,
            None => {
                let kkt = check_kkt(p, start, None);
                return SolverResult {
                    variables: start.to_vec(),
                    objective: start_obj,
                    status: SolverStatus::Infeasible,
                    kkt,
                    iterations: phase1_iterations,
                    phase1_iterations,
                    gap: f64::INFINITY,
                    log,
                };
            }
        }
    }
    iterations += phase1_iterations;

    let m = b.m() as f64;
    let vals = b.values(&x).expect("strictly feasible");
    let mut t = match settings.barrier_mu_init {
        Some(mu) if mu > 0.0 => 1.0 / mu,
        _ => initial_t(&b, &x, &vals),
    };
    let mut status = SolverStatus::Optimal;
    let mut stage = 0;
    loop {
        let out = center(&b, &mut x, t, stage, settings, &mut log, &|_| false);
        iterations += out.iters;
        if out.hit_cap {
            status = SolverStatus::MaxIters;
            break;
        }
        let obj = linalg::dot(c, &x);
        if m / t <= settings.kkt_tol * obj.abs().max(1.0) {
            break;
        }
        t /= settings.barrier_shrink;
        stage += 1;
        if stage > 200 {
            status = SolverStatus::MaxIters;
            break;
        }
    }

    let vals = b.values(&x).expect("iterates stay strictly feasible");
    let mult: Vec<f64> = vals.iter().map(|v| 1.0 / (t * -v)).collect();
    let mut objective = linalg::dot(c, &x);
    if start_ok && objective > start_obj {
        x = start.to_vec();
        objective = start_obj;
    }
    let kkt = check_kkt(p, &x, Some(&mult));
    SolverResult {
        variables: x,
        objective,
        status,
        kkt,
        iterations,
        phase1_iterations,
        gap: m / t,
        log,
    }
}

/// Measures primal feasibility, stationarity and complementarity at `x`.
///
/// Without multipliers, they are estimated by least squares on the
/// constraints whose normalized value is within `1e-6` of active, then
/// clipped at zero.
pub fn check_kkt<P: ConvexProgram + ?Sized>(p: &P, x: &[f64], multipliers: Option<&[f64]>) -> KktReport {
    let n = p.num_vars();
    let m = p.num_constraints();
    let c = p.objective();
    let mut vals = Vec::with_capacity(m);
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut buf = Vec::new();
    for i in 0..m {
        let vars = p.vars(i);
        buf.clear();
        buf.extend(vars.iter().map(|&j| x[j]));
        let mut g = vec![0.0; vars.len()];
        vals.push(p.eval(i, &buf, Some(&mut g), None));
        grads.push(g);
    }
    let scale = |i: usize| {
        let s = p.scale(i);
        if s > 0.0 && s.is_finite() {
            s
        } else {
            1.0
        }
    };
    let comps: Vec<f64> = (0..m).map(|i| vals[i] / scale(i)).collect();
    let primal = comps.iter().copied().fold(0.0, f64::max);

    let mu: Vec<f64> = match multipliers {
        Some(mu) => mu.to_vec(),
        None => {
            let active: Vec<usize> = (0..m).filter(|&i| comps[i] >= -1e-6).collect();
            let k = active.len();
            let mut mu = vec![0.0; m];
            if k > 0 {
                let dense_grad = |i: usize| {
                    let mut d = vec![0.0; n];
                    for (a, &j) in p.vars(i).iter().enumerate() {
                        d[j] += grads[i][a];
                    }
                    d
                };
                let cols: Vec<Vec<f64>> = active.iter().map(|&i| dense_grad(i)).collect();
                let mut gram = vec![0.0; k * k];
                let mut rhs = vec![0.0; k];
                for a in 0..k {
                    for bb in 0..k {
                        gram[a * k + bb] = linalg::dot(&cols[a], &cols[bb]);
                    }
                    rhs[a] = -linalg::dot(&cols[a], c);
                }
                let tr = (0..k).map(|a| gram[a * k + a]).fold(0.0, f64::max).max(1e-300);
                for a in 0..k {
                    gram[a * k + a] += 1e-14 * tr;
                }
                if linalg::dense_cholesky(&mut gram, k).is_ok() {
                    linalg::dense_cholesky_solve(&gram, k, &mut rhs);
                    for (a, &i) in active.iter().enumerate() {
                        mu[i] = rhs[a].max(0.0);
                    }
                }
            }
            mu
        }
    };
    let mut r = c.to_vec();
    for i in 0..m {
        if mu[i] != 0.0 {
            for (a, &j) in p.vars(i).iter().enumerate() {
                r[j] += mu[i] * grads[i][a];
            }
        }
    }
    let cnorm = c.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let stationarity = r.iter().fold(0.0f64, |a, v| a.max(v.abs())) / cnorm;
    let complementarity = (0..m).map(|i| (mu[i] * vals[i]).abs()).fold(0.0, f64::max);
    KktReport {
        primal,
        primal_components: comps,
        stationarity,
        complementarity,
        multipliers: mu,
    }
}

/// Convex program with constraints `½ xᵀ Q_i x + a_iᵀ x + b_i ≤ 0`.
///
/// Useful for tests and as a minimal example of [`ConvexProgram`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub c: Vec<f64>,
    pub constraints: Vec<QuadConstraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadConstraint {
    pub vars: Vec<usize>,
    /// Row-major local `k × k` PSD matrix, or empty for affine.
    pub q: Vec<f64>,
    pub a: Vec<f64>,
    pub b: f64,
}

impl QuadConstraint {
    pub fn affine(vars: Vec<usize>, a: Vec<f64>, b: f64) -> Self {
        QuadConstraint { vars, q: Vec::new(), a, b }
    }
}

impl ConvexProgram for QuadraticProgram {
    fn num_vars(&self) -> usize {
        self.c.len()
    }
    fn objective(&self) -> &[f64] {
        &self.c
    }
    fn num_constraints(&self) -> usize {
        self.constraints.len()
    }
    fn vars(&self, i: usize) -> &[usize] {
        &self.constraints[i].vars
    }
    fn is_affine(&self, i: usize) -> bool {
        self.constraints[i].q.is_empty()
    }
    fn eval(&self, i: usize, x: &[f64], grad: Option<&mut [f64]>, hess: Option<&mut [f64]>) -> f64 {
        let qc = &self.constraints[i];
        let k = qc.vars.len();
        let mut v = qc.b + linalg::dot(&qc.a, x);
        let mut qx = vec![0.0; k];
        if !qc.q.is_empty() {
            for r in 0..k {
                qx[r] = linalg::dot(&qc.q[r * k..(r + 1) * k], x);
            }
            v += 0.5 * linalg::dot(&qx, x);
        }
        if let Some(g) = grad {
            for r in 0..k {
                g[r] = qc.a[r] + qx[r];
            }
        }
        if let Some(h) = hess {
            h[..qc.q.len()].copy_from_slice(&qc.q);
        }
        v
    }
}

#[cfg(test)]
mod tests;
