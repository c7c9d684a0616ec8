//! TOML scenario and sweep files.
//!
//! ```toml
//! [scenario]
//! flight_period = "300 s"
//! p_avg_max = "20 dBm"
//! p_peak_max = "4x"          # multiple of p_avg_max
//! noise_uncertainty = "3 dB"
//! willie_est = ["100 m", "300 m"]
//!
//! [sca]
//! max_outer = 100
//! ```
//!
//! Every scenario key is optional and defaults to the reference study.

use std::path::Path;

use covert_uav_core::sca::{ScaSettings, Scheme};
use covert_uav_core::scenario::{db_to_linear, ScenarioConfig, ScenarioParams};
use serde::{Deserialize, Serialize};

use crate::units::{self, Kind};
use crate::{Error, Result};

/// Parsed run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ScenarioParams,
    pub sca: ScaSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ScenarioParams::reference(300.0),
            sca: ScaSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        Ok(ScenarioConfig::new(self.params.clone())?)
    }
}

fn read(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.parse::<toml::Table>().map_err(|e| Error::Syntax {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&read(path)?)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let t = text.parse::<toml::Table>().map_err(|e| Error::Syntax {
        path: "<string>".into(),
        message: e.to_string(),
    })?;
    parse_config(&t)
}

fn parse_config(t: &toml::Table) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (k, v) in t {
        match k.as_str() {
            "scenario" => apply_scenario(&mut cfg.params, table(k, v)?, "scenario")?,
            "sca" => apply_sca(&mut cfg.sca, table(k, v)?)?,
            // sweep-only keys are read by `parse_sweep`
            "param" | "values" | "schemes" | "mc_validate" => {}
            _ => return Err(Error::key(k.as_str(), "one of [scenario], [sca]", "unknown section")),
        }
    }
    Ok(cfg)
}

fn table<'a>(key: &str, v: &'a toml::Value) -> Result<&'a toml::Table> {
    v.as_table().ok_or_else(|| Error::key(key, "a table", format!("found {}", v.type_str())))
}

fn apply_scenario(p: &mut ScenarioParams, t: &toml::Table, section: &str) -> Result<()> {
    let mut peak_ratio = None;
    for (k, v) in t {
        let key = format!("{section}.{k}");
        let q = |kind| units::quantity(&key, v, kind);
        match k.as_str() {
            "flight_period" => p.flight_period_s = q(Kind::Time)?,
            "slot_duration" => p.slot_duration_s = q(Kind::Time)?,
            "altitude" => p.altitude_m = q(Kind::Length)?,
            "v_max" => p.v_max_mps = q(Kind::Speed)?,
            "q_init" => p.q_init = units::position(&key, v)?,
            "q_final" => p.q_final = units::position(&key, v)?,
            "bob_est" => p.bob_est = units::position(&key, v)?,
            "willie_est" => p.willie_est = units::position(&key, v)?,
            "var_bob" => p.var_bob_m2 = q(Kind::Area)?,
            "var_willie" => p.var_willie_m2 = q(Kind::Area)?,
            "beta0" => p.beta0 = q(Kind::Gain)?,
            "gamma0" => p.gamma0 = q(Kind::Gain)?,
            "p_avg_max" => p.p_avg_max_w = q(Kind::Power)?,
            "p_peak_max" => match v.as_str().and_then(|s| s.trim().strip_suffix('x')) {
                Some(r) => {
                    peak_ratio = Some(r.trim().parse::<f64>().map_err(|_| {
                        Error::key(&key, "a power, or \"<k>x\" for k times p_avg_max", format!("cannot read {v}"))
                    })?)
                }
                None => p.p_peak_max_w = q(Kind::Power)?,
            },
            "noise_nominal" => p.noise_nominal_w = q(Kind::Power)?,
            "noise_uncertainty" => p.noise_uncertainty = q(Kind::Gain)?,
            "rho_b" => p.rho_b = q(Kind::Plain)?,
            "rho_w" => p.rho_w = q(Kind::Plain)?,
            "sca_tolerance" => p.sca_tolerance = q(Kind::Plain)?,
            _ => return Err(Error::key(key, "a scenario parameter name", "unknown key")),
        }
    }
    if let Some(r) = peak_ratio {
        p.p_peak_max_w = r * p.p_avg_max_w;
    }
    Ok(())
}

fn count(key: &str, v: &toml::Value) -> Result<usize> {
    v.as_integer()
        .filter(|&i| i >= 0)
        .map(|i| i as usize)
        .ok_or_else(|| Error::key(key, "a nonnegative integer", format!("found {v}")))
}

fn apply_sca(s: &mut ScaSettings, t: &toml::Table) -> Result<()> {
    for (k, v) in t {
        let key = format!("sca.{k}");
        let q = || units::quantity(&key, v, Kind::Plain);
        match k.as_str() {
            "max_outer" => s.max_outer = count(&key, v)?,
            "tolerance" => s.tolerance = Some(q()?),
            "kkt_tol" => s.solver.kkt_tol = q()?,
            "max_newton" => s.solver.max_iters = count(&key, v)?,
            "barrier_shrink" => s.solver.barrier_shrink = q()?,
            _ => return Err(Error::key(key, "one of max_outer, tolerance, kkt_tol, max_newton, barrier_shrink", "unknown key")),
        }
    }
    s.solver
        .validate()
        .map_err(|e| Error::key("sca", "valid solver settings", e.to_string()))?;
    Ok(())
}

/// Scenario parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    /// Flight period `T`.
    #[serde(rename = "T")]
    FlightPeriod,
    #[serde(rename = "rho_w")]
    RhoW,
    #[serde(rename = "rho_b")]
    RhoB,
    /// `ε_b²`.
    #[serde(rename = "eps_b2")]
    VarBob,
    /// `ε_w²`.
    #[serde(rename = "eps_w2")]
    VarWillie,
    /// Warden noise uncertainty `ϱ` in dB.
    #[serde(rename = "rho_db")]
    NoiseUncertaintyDb,
    /// Average power cap; the peak cap keeps its ratio to it.
    #[serde(rename = "p_avg")]
    PAvg,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [
        SweepParam::FlightPeriod,
        SweepParam::RhoW,
        SweepParam::RhoB,
        SweepParam::VarBob,
        SweepParam::VarWillie,
        SweepParam::NoiseUncertaintyDb,
        SweepParam::PAvg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::FlightPeriod => "T",
            SweepParam::RhoW => "rho_w",
            SweepParam::RhoB => "rho_b",
            SweepParam::VarBob => "eps_b2",
            SweepParam::VarWillie => "eps_w2",
            SweepParam::NoiseUncertaintyDb => "rho_db",
            SweepParam::PAvg => "p_avg",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    fn kind(self) -> Kind {
        match self {
            SweepParam::FlightPeriod => Kind::Time,
            SweepParam::VarBob | SweepParam::VarWillie => Kind::Area,
            SweepParam::PAvg => Kind::Power,
            _ => Kind::Plain,
        }
    }

    pub fn apply(self, p: &mut ScenarioParams, v: f64) {
        match self {
            SweepParam::FlightPeriod => p.flight_period_s = v,
            SweepParam::RhoW => p.rho_w = v,
            SweepParam::RhoB => p.rho_b = v,
            SweepParam::VarBob => p.var_bob_m2 = v,
            SweepParam::VarWillie => p.var_willie_m2 = v,
            SweepParam::NoiseUncertaintyDb => p.noise_uncertainty = db_to_linear(v),
            SweepParam::PAvg => {
                let ratio = if p.p_avg_max_w > 0.0 { p.p_peak_max_w / p.p_avg_max_w } else { 1.0 };
                p.p_avg_max_w = v;
                p.p_peak_max_w = ratio * v;
            }
        }
    }
}

/// One-parameter sweep over a base configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub mc_validate: bool,
    pub base: RunConfig,
}

impl SweepSpec {
    /// Scenario of the cell at `values[i]`.
    pub fn params_at(&self, i: usize) -> ScenarioParams {
        let mut p = self.base.params.clone();
        self.param.apply(&mut p, self.values[i]);
        p
    }
}

/// Reads a sweep file. Its `[scenario]` / `[sca]` sections override `base`.
pub fn load_sweep(path: &Path, base: RunConfig) -> Result<SweepSpec> {
    parse_sweep(&read(path)?, base)
}

pub fn parse_sweep_str(text: &str, base: RunConfig) -> Result<SweepSpec> {
    let t = text.parse::<toml::Table>().map_err(|e| Error::Syntax {
        path: "<string>".into(),
        message: e.to_string(),
    })?;
    parse_sweep(&t, base)
}

fn parse_sweep(t: &toml::Table, mut base: RunConfig) -> Result<SweepSpec> {
    const PARAMS: &str = "one of T, rho_w, rho_b, eps_b2, eps_w2, rho_db, p_avg";
    for (k, v) in t {
        match k.as_str() {
            "scenario" => apply_scenario(&mut base.params, table(k, v)?, "scenario")?,
            "sca" => apply_sca(&mut base.sca, table(k, v)?)?,
            "param" | "values" | "schemes" | "mc_validate" => {}
            _ => return Err(Error::key(k.as_str(), "param, values, schemes, mc_validate, [scenario], [sca]", "unknown key")),
        }
    }
    let name = t
        .get("param")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::key("param", PARAMS, "missing"))?;
    let param = SweepParam::from_name(name).ok_or_else(|| Error::key("param", PARAMS, format!("unknown parameter {name:?}")))?;
    let raw = t
        .get("values")
        .and_then(|v| v.as_array())
        .filter(|a| !a.is_empty())
        .ok_or_else(|| Error::key("values", "a non-empty array", "missing"))?;
    let values = raw
        .iter()
        .enumerate()
        .map(|(i, v)| units::quantity(&format!("values[{i}]"), v, param.kind()))
        .collect::<Result<Vec<f64>>>()?;
    let schemes = match t.get("schemes") {
        None => vec![Scheme::Jtp, Scheme::Stp],
        Some(v) => {
            let a = v.as_array().ok_or_else(|| Error::key("schemes", "an array of \"jtp\" / \"stp\"", "not an array"))?;
            let mut out = Vec::new();
            for s in a {
                out.push(match s.as_str().map(str::to_ascii_lowercase).as_deref() {
                    Some("jtp") => Scheme::Jtp,
                    Some("stp") => Scheme::Stp,
                    _ => return Err(Error::key("schemes", "an array of \"jtp\" / \"stp\"", format!("found {s}"))),
                });
            }
            out
        }
    };
    let mc_validate = match t.get("mc_validate") {
        None => false,
        Some(v) => v.as_bool().ok_or_else(|| Error::key("mc_validate", "true or false", format!("found {v}")))?,
    };
    let spec = SweepSpec {
        param,
        values,
        schemes,
        mc_validate,
        base,
    };
    for (i, &v) in spec.values.iter().enumerate() {
        if let Err(e @ covert_uav_core::Error::InvalidParameter { .. }) = ScenarioConfig::new(spec.params_at(i)) {
            return Err(Error::key(format!("values[{i}]"), "a value within the scenario invariants", format!("{v}: {e}")));
        }
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_reference_study() {
        let c = parse_config_str("").unwrap();
        assert_eq!(c.params, ScenarioParams::reference(300.0));
        assert_eq!(c.scenario().unwrap().num_slots(), 300);
    }

    #[test]
    fn unit_strings_and_peak_ratio() {
        let c = parse_config_str(
            r#"
            [scenario]
            flight_period = "200 s"
            p_avg_max = "20 dBm"
            p_peak_max = "4x"
            noise_uncertainty = "1 dB"
            var_bob = "100 m^2"
            q_init = ["-0.5 km", 100]
            [sca]
            max_outer = 7
            "#,
        )
        .unwrap();
        let p = &c.params;
        assert_eq!(p.flight_period_s, 200.0);
        assert!((p.p_peak_max_w - 0.4).abs() < 1e-15);
        assert!((p.noise_uncertainty - 1.2589254117941673).abs() < 1e-12);
        assert_eq!(p.var_bob_m2, 100.0);
        assert_eq!(p.q_init, covert_uav_core::Vec2::new(-500.0, 100.0));
        assert_eq!(c.sca.max_outer, 7);
    }

    #[test]
    fn bad_keys_are_reported() {
        let e = parse_config_str("[scenario]\naltitude = \"3 parsecs\"").unwrap_err().to_string();
        assert!(e.contains("scenario.altitude") && e.contains("meters"), "{e}");
        let e = parse_config_str("[scenario]\nspeed = 3").unwrap_err().to_string();
        assert!(e.contains("scenario.speed") && e.contains("unknown"), "{e}");
        let e = parse_config_str("[oops]").unwrap_err().to_string();
        assert!(e.contains("oops"), "{e}");
        assert!(matches!(parse_config_str("[scenario"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn sweep_file() {
        let s = parse_sweep_str(
            "param = \"T\"\nvalues = [200, \"210 s\", 250, 300]\nschemes = [\"JTP\", \"stp\"]\n",
            RunConfig::default(),
        )
        .unwrap();
        assert_eq!(s.param, SweepParam::FlightPeriod);
        assert_eq!(s.values, vec![200.0, 210.0, 250.0, 300.0]);
        assert_eq!(s.schemes, vec![Scheme::Jtp, Scheme::Stp]);
        assert!(!s.mc_validate);
        assert_eq!(s.params_at(1).flight_period_s, 210.0);

        let s = parse_sweep_str("param = \"p_avg\"\nvalues = [\"23 dBm\"]", RunConfig::default()).unwrap();
        let p = s.params_at(0);
        assert!((p.p_peak_max_w / p.p_avg_max_w - 4.0).abs() < 1e-12);

        let s = parse_sweep_str("param = \"rho_db\"\nvalues = [1, 3]", RunConfig::default()).unwrap();
        assert!((s.params_at(1).noise_uncertainty - db_to_linear(3.0)).abs() < 1e-15);
    }

    #[test]
    fn sweep_rejects_unknown_parameter_and_bad_values() {
        let e = parse_sweep_str("param = \"H\"\nvalues = [1]", RunConfig::default()).unwrap_err().to_string();
        assert!(e.contains("param") && e.contains("rho_w"), "{e}");
        let e = parse_sweep_str("param = \"rho_w\"\nvalues = [1.5]", RunConfig::default()).unwrap_err().to_string();
        assert!(e.contains("values[0]"), "{e}");
        assert!(parse_sweep_str("param = \"T\"", RunConfig::default()).is_err());
    }
}
