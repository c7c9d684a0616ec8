//! Experiment runner.
//!
//! Exit codes: 0 success, 1 IO / parse / plan-scenario mismatch, 2 infeasible
//! scenario or a failed validation criterion.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use covert_uav::config::{load_config, load_sweep, RunConfig};
use covert_uav::experiment::{run, run_sweep, stop_name};
use covert_uav::report::{read_plan, sweep_csv, trace_csv, write_json, write_text, PlanFile};
use covert_uav::validate::{validate_plan, McSettings};
use covert_uav::{Error, Result};
use covert_uav_core::convexify::assemble_subproblem;
use covert_uav_core::sca::{initial_point, Scheme};

#[derive(Parser)]
#[command(name = "covert-uav", version, about = "Covert UAV trajectory and power planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario and write plan.json and trace.csv.
    Run {
        /// Scenario file; the reference study when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = SchemeArg::Jtp)]
        scheme: SchemeArg,
        /// Also validate the plan by Monte Carlo and write validation.json.
        #[arg(long)]
        validate: bool,
        #[command(flatten)]
        mc: McArgs,
        /// Write the first convex subproblem to subproblem.txt.
        #[arg(long)]
        dump_subproblem: bool,
        /// Print interior-point iterations to stderr.
        #[arg(long)]
        log_iterations: bool,
    },
    /// Run every (value, scheme) cell of a sweep file and write sweep.csv.
    Sweep {
        #[arg(long)]
        sweep: PathBuf,
        /// Base scenario; the sweep file's own sections override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Monte Carlo check of a saved plan; writes validation.json.
    Validate {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        mc: McArgs,
    },
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Share of warden samples cross-checked against a threshold grid.
    #[arg(long)]
    grid_fraction: Option<f64>,
}

impl McArgs {
    fn settings(&self) -> Result<McSettings> {
        let d = McSettings::default();
        let s = McSettings {
            rng_seed: self.seed.unwrap_or(d.rng_seed),
            num_samples: self.mc_samples.unwrap_or(d.num_samples),
            grid_fraction: self.grid_fraction.unwrap_or(d.grid_fraction),
            ..d
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Jtp,
    Stp,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Jtp => Scheme::Jtp,
            SchemeArg::Stp => Scheme::Stp,
        }
    }
}

fn config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), load_config)
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })
}

fn cmd_run(
    config_path: Option<&Path>,
    out: &Path,
    scheme: Scheme,
    mc: Option<McSettings>,
    dump: bool,
    log: bool,
) -> Result<ExitCode> {
    let mut cfg = config(config_path)?;
    cfg.sca.solver.log_iterations = log;
    create_dir(out)?;
    if dump {
        let scenario = cfg.scenario()?;
        let sub = assemble_subproblem(&initial_point(&scenario)?, &scenario, scheme == Scheme::Jtp)?;
        write_text(&out.join("subproblem.txt"), &sub.debug_dump())?;
    }
    let o = run(&cfg, scheme, mc.as_ref())?;
    if log {
        for (i, logs) in o.trace.solver_logs.iter().enumerate() {
            for l in logs {
                eprintln!(
                    "sca {:>3} {} stage {:>2} iter {:>3} t {:.3e} obj {:.9e} step {:.3e} decrement {:.3e}",
                    i + 1,
                    if l.phase1 { "phase1" } else { "main  " },
                    l.stage,
                    l.iter,
                    l.t,
                    l.objective,
                    l.step,
                    l.decrement
                );
            }
        }
    }
    write_json(&out.join("plan.json"), &PlanFile::new(&o.plan, Some(&o.trace)))?;
    write_text(&out.join("trace.csv"), &trace_csv(&o.trace)?)?;
    println!(
        "{}: ACTR {:.6} bps/Hz after {} iterations ({}), {}",
        scheme.name(),
        o.plan.actr_bps_hz,
        o.trace.iterations(),
        stop_name(o.trace.stop),
        if o.plan.feasible { "feasible" } else { "INFEASIBLE" }
    );
    let mut ok = o.plan.feasible;
    if let Some(v) = &o.validation {
        write_json(&out.join("validation.json"), v)?;
        for c in &v.criteria {
            println!("validation {}: {} ({})", c.name, if c.pass { "pass" } else { "FAIL" }, c.detail);
        }
        ok &= v.pass;
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_sweep(sweep: &Path, config_path: Option<&Path>, out: &Path, mc: McSettings) -> Result<ExitCode> {
    let spec = load_sweep(sweep, config(config_path)?)?;
    create_dir(out)?;
    let cells = run_sweep(&spec, &mc);
    let rows: Vec<_> = cells.into_iter().map(|c| c.row).collect();
    write_text(&out.join("sweep.csv"), &sweep_csv(&rows)?)?;
    for r in &rows {
        println!(
            "{}={} {}: {} ({})",
            r.param,
            r.value,
            r.scheme,
            r.actr_bps_hz.map_or("-".into(), |a| format!("{a:.6}")),
            r.status
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(plan: &Path, config_path: Option<&Path>, out: &Path, mc: McSettings) -> Result<ExitCode> {
    let cfg = config(config_path)?;
    let scenario = cfg.scenario()?;
    let plan = read_plan(plan, &scenario)?;
    let rep = validate_plan(&plan, &scenario, &mc)?;
    create_dir(out)?;
    write_json(&out.join("validation.json"), &rep)?;
    for c in &rep.criteria {
        println!("{}: {} ({})", c.name, if c.pass { "pass" } else { "FAIL" }, c.detail);
    }
    Ok(if rep.pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            out,
            scheme,
            validate,
            mc,
            dump_subproblem,
            log_iterations,
        } => mc.settings().and_then(|m| {
            cmd_run(
                config.as_deref(),
                out,
                (*scheme).into(),
                validate.then_some(m),
                *dump_subproblem,
                *log_iterations,
            )
        }),
        Command::Sweep { sweep, config, out, mc } => mc.settings().and_then(|m| cmd_sweep(sweep, config.as_deref(), out, m)),
        Command::Validate { plan, config, out, mc } => {
            mc.settings().and_then(|m| cmd_validate(plan, config.as_deref(), out, m))
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_infeasible_scenario() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
