//! Output files.
//!
//! * `plan.json`: [`PlanFile`], one entry per slot with position, power,
//!   rate, slacks and diagnostics.
//! * `trace.csv`: one row per SCA iterate, row 0 being the initial point.
//! * `sweep.csv`: one [`SweepRow`] per (value, scheme) cell.
//! * `validation.json`: a [`ValidationReport`](crate::validate::ValidationReport).
//!
//! Floats are written shortest-roundtrip after rounding to 12 significant
//! digits.

use std::path::Path;

use covert_uav_core::convexify::{ExpansionPoint, Iterate, SlackVars};
use covert_uav_core::sca::{Plan, ScaTrace, Scheme, StopReason};
use covert_uav_core::scenario::{PowerSchedule, RateSchedule, ScenarioConfig, Trajectory};
use covert_uav_core::Vec2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

pub fn format_float(x: f64) -> String {
    let r = round12(x);
    if r.is_finite() {
        format!("{r}")
    } else {
        format!("{r:?}")
    }
}

fn round_value(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round12).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_value),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub power_w: f64,
    pub rate_bps_hz: f64,
    /// Noncentrality of the warden distance statistic.
    pub lambda: f64,
    /// `ξ̌*`, the planner's lower bound on the warden's averaged error.
    pub xi_lower: f64,
    pub outage_margin: f64,
    pub y1: f64,
    pub z1: f64,
    pub u1: f64,
    pub u2: f64,
    pub covert_residuals: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaSummary {
    pub iterations: usize,
    pub stop: StopReason,
}

/// Schema of `plan.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub scheme: Scheme,
    pub num_slots: usize,
    pub actr_bps_hz: f64,
    pub feasible: bool,
    pub slots: Vec<SlotRecord>,
    pub sca: Option<ScaSummary>,
}

impl PlanFile {
    pub fn new(plan: &Plan, trace: Option<&ScaTrace>) -> Self {
        let s = &plan.slacks;
        let slots = (0..plan.num_slots())
            .map(|i| {
                let q = plan.trajectory.waypoints[i];
                SlotRecord {
                    slot: i,
                    x_m: q.x,
                    y_m: q.y,
                    power_w: plan.power.powers[i],
                    rate_bps_hz: plan.rates.rates[i],
                    lambda: plan.lambda[i],
                    xi_lower: plan.xi_lower[i],
                    outage_margin: plan.outage_margin[i],
                    y1: s.y1[i],
                    z1: s.z1[i],
                    u1: s.u1[i],
                    u2: s.u2[i],
                    covert_residuals: plan.covert_residuals[i],
                }
            })
            .collect();
        PlanFile {
            scheme: plan.scheme,
            num_slots: plan.num_slots(),
            actr_bps_hz: plan.actr_bps_hz,
            feasible: plan.feasible,
            slots,
            sca: trace.map(|t| ScaSummary {
                iterations: t.iterations(),
                stop: t.stop,
            }),
        }
    }
}

/// Fields of `plan.json` needed to rebuild a plan; diagnostics are
/// recomputed, so hand edits to the schedule are picked up consistently.
#[derive(Debug, Deserialize)]
struct PlanInput {
    scheme: Scheme,
    slots: Vec<SlotInput>,
}

#[derive(Debug, Deserialize)]
struct SlotInput {
    x_m: f64,
    y_m: f64,
    power_w: f64,
    rate_bps_hz: f64,
    y1: f64,
    z1: f64,
    u1: f64,
    u2: f64,
}

pub fn parse_plan(text: &str, origin: &Path, cfg: &ScenarioConfig) -> Result<Plan> {
    let input: PlanInput = serde_json::from_str(text).map_err(|e| Error::Syntax {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    let n = cfg.num_slots();
    if input.slots.len() != n {
        return Err(Error::Mismatch(format!(
            "{} has {} slots but the scenario has N = {n}",
            origin.display(),
            input.slots.len()
        )));
    }
    let col = |f: fn(&SlotInput) -> f64| input.slots.iter().map(f).collect::<Vec<f64>>();
    let slacks = SlackVars {
        y1: col(|s| s.y1),
        z1: col(|s| s.z1),
        u1: col(|s| s.u1),
        u2: col(|s| s.u2),
    };
    let it = Iterate {
        point: ExpansionPoint {
            traj: Trajectory {
                waypoints: input.slots.iter().map(|s| Vec2::new(s.x_m, s.y_m)).collect(),
            },
            power: PowerSchedule { powers: col(|s| s.power_w) },
            rates: RateSchedule {
                rates: col(|s| s.rate_bps_hz),
            },
            u1: slacks.u1.clone(),
        },
        slacks,
    };
    Ok(Plan::from_iterate(&it, cfg, input.scheme)?)
}

pub fn read_plan(path: &Path, cfg: &ScenarioConfig) -> Result<Plan> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_plan(&text, path, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub actr_bps_hz: f64,
    pub solver_status: String,
    pub newton_iterations: usize,
    pub phase1_iterations: usize,
    pub gap: f64,
    pub feasible: bool,
    pub worst_outage_margin: f64,
    pub worst_xi_margin: f64,
}

pub fn trace_rows(trace: &ScaTrace) -> Vec<TraceRow> {
    let start = TraceRow {
        iteration: 0,
        actr_bps_hz: trace.objective_bps_hz[0],
        solver_status: "initial".into(),
        newton_iterations: 0,
        phase1_iterations: 0,
        gap: 0.0,
        feasible: true,
        worst_outage_margin: f64::NAN,
        worst_xi_margin: f64::NAN,
    };
    std::iter::once(start)
        .chain(trace.records.iter().enumerate().map(|(i, r)| TraceRow {
            iteration: i + 1,
            actr_bps_hz: r.objective_bps_hz,
            solver_status: format!("{:?}", r.solver_status),
            newton_iterations: r.newton_iterations,
            phase1_iterations: r.phase1_iterations,
            gap: r.gap,
            feasible: r.feasible,
            worst_outage_margin: r.worst_outage_margin,
            worst_xi_margin: r.worst_xi_margin,
        }))
        .collect()
}

/// One cell of `sweep.csv`. Empty fields mark values a failed cell could not
/// produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub scheme: String,
    pub actr_bps_hz: Option<f64>,
    pub iters: Option<usize>,
    pub feasible: bool,
    /// Smallest `ξ̌* − (1 − ρ_w)` over slots.
    pub min_xi_margin: Option<f64>,
    /// Largest Monte Carlo outage over transmitting slots.
    pub max_outage_mc: Option<f64>,
    pub status: String,
}

trait CsvRow {
    fn fields(&self) -> Vec<String>;
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

impl CsvRow for TraceRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.iteration.to_string(),
            format_float(self.actr_bps_hz),
            self.solver_status.clone(),
            self.newton_iterations.to_string(),
            self.phase1_iterations.to_string(),
            format_float(self.gap),
            self.feasible.to_string(),
            opt(Some(self.worst_outage_margin).filter(|x| x.is_finite())),
            opt(Some(self.worst_xi_margin).filter(|x| x.is_finite())),
        ]
    }
}

impl CsvRow for SweepRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.param.clone(),
            format_float(self.value),
            self.scheme.clone(),
            opt(self.actr_bps_hz),
            self.iters.map(|i| i.to_string()).unwrap_or_default(),
            self.feasible.to_string(),
            opt(self.min_xi_margin),
            opt(self.max_outage_mc),
            self.status.clone(),
        ]
    }
}

pub const TRACE_COLUMNS: [&str; 9] = [
    "iteration",
    "actr_bps_hz",
    "solver_status",
    "newton_iterations",
    "phase1_iterations",
    "gap",
    "feasible",
    "worst_outage_margin",
    "worst_xi_margin",
];

pub const SWEEP_COLUMNS: [&str; 9] = [
    "param",
    "value",
    "scheme",
    "actr_bps_hz",
    "iters",
    "feasible",
    "min_xi_margin",
    "max_outage_mc",
    "status",
];

fn csv_string<R: CsvRow>(header: &[&str], rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Mismatch(format!("csv: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.fields()).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Mismatch(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn trace_csv(trace: &ScaTrace) -> Result<String> {
    csv_string(&TRACE_COLUMNS, &trace_rows(trace))
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    csv_string(&SWEEP_COLUMNS, rows)
}

/// Reads `sweep.csv` back.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .collect::<std::result::Result<Vec<SweepRow>, _>>()
        .map_err(|e| Error::Syntax {
            path: "sweep.csv".into(),
            message: e.to_string(),
        })
}
