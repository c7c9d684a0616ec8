//! Single runs and parameter sweeps.

use covert_uav_core::sca::{run_scheme, Plan, ScaTrace, Scheme, StopReason};
use rayon::prelude::*;

use crate::config::{RunConfig, SweepSpec};
use crate::report::SweepRow;
use crate::validate::{validate_plan, McSettings, ValidationReport};
use crate::Result;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub plan: Plan,
    pub trace: ScaTrace,
    pub validation: Option<ValidationReport>,
}

impl RunOutput {
    /// Feasible plan that stopped on the objective tolerance.
    pub fn is_optimal(&self) -> bool {
        self.plan.feasible && self.trace.stop == StopReason::Converged
    }

    /// Smallest `ξ̌* − (1 − ρ_w)` over slots.
    pub fn min_xi_margin(&self, rho_w: f64) -> f64 {
        self.plan
            .xi_lower
            .iter()
            .map(|x| x - (1.0 - rho_w))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::Converged => "converged",
        StopReason::MaxIterations => "max_iterations",
        StopReason::SolverFailure => "solver_failure",
        StopReason::FeasibilityLost => "feasibility_lost",
    }
}

pub fn run(cfg: &RunConfig, scheme: Scheme, mc: Option<&McSettings>) -> Result<RunOutput> {
    let scenario = cfg.scenario()?;
    let (plan, trace) = run_scheme(&scenario, scheme, &cfg.sca)?;
    let validation = mc.map(|m| validate_plan(&plan, &scenario, m)).transpose()?;
    Ok(RunOutput {
        plan,
        trace,
        validation,
    })
}

/// One sweep cell with its plan when the run succeeded.
#[derive(Debug, Clone)]
pub struct Cell {
    pub row: SweepRow,
    pub output: Option<RunOutput>,
}

/// Runs every `(value, scheme)` cell in parallel. Rows come back ordered by
/// value, then by scheme as listed. Cell `i` validates with seed
/// `rng_seed + i`.
pub fn run_sweep(spec: &SweepSpec, mc: &McSettings) -> Vec<Cell> {
    let cells: Vec<(usize, Scheme)> = (0..spec.values.len())
        .flat_map(|i| spec.schemes.iter().map(move |&s| (i, s)))
        .collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(k, &(i, scheme))| {
            let cfg = RunConfig {
                params: spec.params_at(i),
                sca: spec.base.sca.clone(),
            };
            let cell_mc = McSettings {
                rng_seed: mc.rng_seed.wrapping_add(k as u64),
                ..*mc
            };
            let row = |o: Option<&RunOutput>, status: String| SweepRow {
                param: spec.param.name().into(),
                value: spec.values[i],
                scheme: scheme.name().into(),
                actr_bps_hz: o.map(|o| o.plan.actr_bps_hz),
                iters: o.map(|o| o.trace.iterations()),
                feasible: o.is_some_and(|o| o.plan.feasible),
                min_xi_margin: o.map(|o| o.min_xi_margin(cfg.params.rho_w)),
                max_outage_mc: o.and_then(|o| o.validation.as_ref()).map(|v| v.max_outage()),
                status,
            };
            match run(&cfg, scheme, spec.mc_validate.then_some(&cell_mc)) {
                Ok(o) => {
                    let mut status = stop_name(o.trace.stop).to_string();
                    if !o.plan.feasible {
                        status = format!("{status}; plan infeasible");
                    }
                    if let Some(v) = &o.validation {
                        if !v.pass {
                            status = format!("{status}; validation failed");
                        }
                    }
                    Cell {
                        row: row(Some(&o), status),
                        output: Some(o),
                    }
                }
                Err(e) => Cell {
                    row: row(None, format!("error: {e}")),
                    output: None,
                },
            }
        })
        .collect()
}
