//! Unit-suffixed quantities: `"100 fs"`, `"5 pi"`, `"1/1ns"`, `"2.5 GHz"`.
//!
//! Frequencies given in Hz-based units are ordinary frequencies and are
//! converted to angular frequency (× 2π). Decay rates are plain 1/s.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Angle,
    Time,
    TimeSquared,
    Rate,
    AngularFrequency,
}

impl Dimension {
    fn units(&self) -> &'static str {
        match self {
            Dimension::Angle => "pi, rad",
            Dimension::Time => "s, ms, us, ns, ps, fs",
            Dimension::TimeSquared => "s^2, ps^2, fs^2",
            Dimension::Rate => "/s, /ns, /ps, or 1/<time> such as 1/1ns",
            Dimension::AngularFrequency => "Hz, kHz, MHz, GHz, THz, rad/s, rad/ps",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum UnitError {
    #[error("missing unit in {0:?} (expected one of: {1})")]
    MissingUnit(String, &'static str),
    #[error("unknown unit {unit:?} in {text:?} (expected one of: {expected})")]
    UnknownUnit { text: String, unit: String, expected: &'static str },
    #[error("cannot parse number in {0:?}")]
    BadNumber(String),
}

fn time_scale(unit: &str) -> Option<f64> {
    Some(match unit {
        "s" => 1.0,
        "ms" => 1e-3,
        "us" | "µs" => 1e-6,
        "ns" => 1e-9,
        "ps" => 1e-12,
        "fs" => 1e-15,
        _ => return None,
    })
}

/// Reciprocal of [`time_scale`], kept exact so that `1/1ns` is exactly 1e9.
fn per_second(unit: &str) -> Option<f64> {
    Some(match unit {
        "s" => 1.0,
        "ms" => 1e3,
        "us" | "µs" => 1e6,
        "ns" => 1e9,
        "ps" => 1e12,
        "fs" => 1e15,
        _ => return None,
    })
}

/// Splits `"12.5e3 GHz"` / `"12.5GHz"` into number and unit.
fn split(text: &str) -> Result<(f64, &str), UnitError> {
    let t = text.trim();
    let end = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || ((c == '-' || c == '+') && (i == 0 || matches!(t.as_bytes()[i - 1], b'e' | b'E')))
                || ((c == 'e' || c == 'E')
                    && i > 0
                    && t[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map_or(t.len(), |(i, _)| i);
    let number: f64 = t[..end].parse().map_err(|_| UnitError::BadNumber(text.to_string()))?;
    Ok((number, t[end..].trim()))
}

/// Parses a quantity into SI (rad, s, s², 1/s, rad/s).
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    let t = text.trim();
    if dim == Dimension::Rate {
        if let Some(rest) = t.strip_prefix("1/") {
            let (n, unit) = split(rest)?;
            if unit.is_empty() {
                return Err(UnitError::MissingUnit(text.to_string(), dim.units()));
            }
            let inv = per_second(unit).ok_or_else(|| UnitError::UnknownUnit {
                text: text.to_string(),
                unit: unit.to_string(),
                expected: dim.units(),
            })?;
            return Ok(inv / n);
        }
    }
    let (x, unit) = split(t)?;
    if unit.is_empty() {
        return Err(UnitError::MissingUnit(text.to_string(), dim.units()));
    }
    let unknown =
        || UnitError::UnknownUnit { text: text.to_string(), unit: unit.to_string(), expected: dim.units() };
    let scale = match dim {
        Dimension::Angle => match unit {
            "pi" => PI,
            "rad" => 1.0,
            _ => return Err(unknown()),
        },
        Dimension::Time => time_scale(unit).ok_or_else(unknown)?,
        Dimension::TimeSquared => {
            let base = unit.strip_suffix("^2").ok_or_else(unknown)?;
            time_scale(base).ok_or_else(unknown)?.powi(2)
        }
        Dimension::Rate => {
            let base = unit.strip_prefix("1/").or_else(|| unit.strip_prefix('/')).ok_or_else(unknown)?;
            per_second(base).ok_or_else(unknown)?
        }
        Dimension::AngularFrequency => match unit {
            "Hz" => 2.0 * PI,
            "kHz" => 2.0 * PI * 1e3,
            "MHz" => 2.0 * PI * 1e6,
            "GHz" => 2.0 * PI * 1e9,
            "THz" => 2.0 * PI * 1e12,
            "rad/s" => 1.0,
            "rad/ps" => 1e12,
            "rad/fs" => 1e15,
            _ => return Err(unknown()),
        },
    };
    Ok(x * scale)
}
