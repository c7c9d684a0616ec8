//! Quantities with unit suffixes, e.g. `"20 dBm"`, `"5 m/s"`, `"-60 dB"`.
//!
//! Bare numbers are taken in the SI (or linear) base unit.

use covert_uav_core::scenario::{db_to_linear, dbm_to_watts};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Time,
    Length,
    Speed,
    Area,
    Power,
    /// Linear ratio, or decibels with `dB`.
    Gain,
    /// Dimensionless, no suffix allowed.
    Plain,
}

impl Kind {
    pub fn expected(self) -> &'static str {
        match self {
            Kind::Time => "a time: number of seconds or \"<x> s|ms|min|h\"",
            Kind::Length => "a length: number of meters or \"<x> m|km\"",
            Kind::Speed => "a speed: number in m/s or \"<x> m/s|km/h\"",
            Kind::Area => "an area: number in m^2 or \"<x> m^2\"",
            Kind::Power => "a power: number of watts or \"<x> W|mW|dBm|dBW\"",
            Kind::Gain => "a ratio: linear number or \"<x> dB\"",
            Kind::Plain => "a plain number",
        }
    }
}

/// Splits `"20 dBm"` / `"20dBm"` into the number and the unit.
fn split(s: &str) -> Option<(f64, &str)> {
    let s = s.trim();
    let end = s
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && s[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let v: f64 = s[..end].parse().ok()?;
    Some((v, s[end..].trim()))
}

fn convert(v: f64, unit: &str, kind: Kind) -> Option<f64> {
    let u = unit;
    let out = match kind {
        Kind::Time => match u {
            "" | "s" => v,
            "ms" => v * 1e-3,
            "min" => v * 60.0,
            "h" => v * 3600.0,
            _ => return None,
        },
        Kind::Length => match u {
            "" | "m" => v,
            "km" => v * 1e3,
            _ => return None,
        },
        Kind::Speed => match u {
            "" | "m/s" => v,
            "km/h" => v / 3.6,
            _ => return None,
        },
        Kind::Area => match u {
            "" | "m^2" | "m2" | "m²" => v,
            _ => return None,
        },
        Kind::Power => match u {
            "" | "W" => v,
            "mW" => v * 1e-3,
            "dBm" => dbm_to_watts(v),
            "dBW" => db_to_linear(v),
            _ => return None,
        },
        Kind::Gain => match u {
            "" => v,
            "dB" => db_to_linear(v),
            _ => return None,
        },
        Kind::Plain => match u {
            "" => v,
            _ => return None,
        },
    };
    Some(out)
}

/// Reads `value` at `key` as a quantity of `kind`, in base units.
pub fn quantity(key: &str, value: &toml::Value, kind: Kind) -> Result<f64> {
    let v = match value {
        toml::Value::Integer(i) => *i as f64,
        toml::Value::Float(f) => *f,
        toml::Value::String(s) => {
            let (x, unit) =
                split(s).ok_or_else(|| Error::key(key, kind.expected(), format!("cannot read {s:?} as a number")))?;
            convert(x, unit, kind).ok_or_else(|| Error::key(key, kind.expected(), format!("unknown unit {unit:?}")))?
        }
        other => return Err(Error::key(key, kind.expected(), format!("found {}", other.type_str()))),
    };
    if !v.is_finite() {
        return Err(Error::key(key, kind.expected(), "value is not finite"));
    }
    Ok(v)
}

/// Reads a two-element array of lengths.
pub fn position(key: &str, value: &toml::Value) -> Result<covert_uav_core::Vec2> {
    const EXPECTED: &str = "a position: [x, y] in meters (numbers or \"<x> m\")";
    match value.as_array() {
        Some(a) if a.len() == 2 => Ok(covert_uav_core::Vec2::new(
            quantity(key, &a[0], Kind::Length)?,
            quantity(key, &a[1], Kind::Length)?,
        )),
        _ => Err(Error::key(key, EXPECTED, "need a two-element array")),
    }
}
