//! Experiment configuration files (TOML).
//!
//! Absolute quantities are strings with explicit units; normalized ones
//! (`alpha_norm` = α/τ0², `delta_norm` = δ/Γ0, `delta_over_gamma` = δ/γ) are
//! bare numbers. Giving both forms of one quantity is an error.

use std::path::PathBuf;

use qpulse_core::emission::Apodization;
use qpulse_core::propagator::Tolerances;
use qpulse_core::pulseshape::{gamma0, GridSpec, Protocol, PulseSpec};
use qpulse_core::quantum::EmitterParams;
use qpulse_core::sweeps::{Axis, AxisName, Normalization};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Value;

use crate::units::{parse_quantity, Dimension};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Pulse,
    Evolve,
    Sweep,
    Spectrum,
}

impl RunKind {
    fn parse(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "pulse" => RunKind::Pulse,
            "evolve" => RunKind::Evolve,
            "sweep" => RunKind::Sweep,
            "spectrum" => RunKind::Spectrum,
            _ => {
                return Err(CliError::Config(format!(
                    "run: unknown value {s:?} (valid: pulse, evolve, sweep, spectrum)"
                )))
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format {s:?} (valid: csv, json)")),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    run: Option<String>,
    pulse: RawPulse,
    emitter: Option<RawEmitter>,
    numerics: Option<RawNumerics>,
    sweep: Option<RawSweep>,
    spectrum: Option<RawSpectrum>,
    output: Option<RawOutput>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPulse {
    protocol: Option<String>,
    theta: Option<Value>,
    tau0: Option<Value>,
    alpha: Option<Value>,
    alpha_norm: Option<f64>,
    delta: Option<Value>,
    delta_norm: Option<f64>,
    delta_over_gamma: Option<f64>,
    carrier_offset: Option<Value>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEmitter {
    detuning0: Option<Value>,
    gamma: Option<Value>,
    gamma_ph: Option<Value>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    n_samples: Option<usize>,
    span_factor: Option<f64>,
    rtol: Option<f64>,
    atol: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    closed_system: Option<bool>,
    workers: Option<usize>,
    axis: Vec<RawAxis>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    name: String,
    min: f64,
    max: f64,
    count: usize,
    normalization: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    freq_min: Value,
    freq_max: Value,
    freq_count: usize,
    t_min: Value,
    t_max: Value,
    t_count: usize,
    tau_max: Option<Value>,
    apodization_width: Option<Value>,
    fit_time: Option<Value>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    format: Option<String>,
    plot: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSettings {
    pub closed_system: bool,
    pub workers: Option<usize>,
    pub axes: Vec<Axis>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumSettings {
    /// Angular frequency offsets from ω₀, rad/s.
    pub omega_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `None` selects the default truncation.
    pub tau_max: Option<f64>,
    pub apodization: Apodization,
    /// Emission time of the fitted slice; `None` means the last one.
    pub fit_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
    pub format: Format,
    pub plot: bool,
}

/// A fully resolved experiment, all quantities in SI.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub run: Option<RunKind>,
    pub protocol: Protocol,
    pub pulse: PulseSpec,
    pub emitter: EmitterParams,
    pub grid: GridSpec,
    pub tolerances: Tolerances,
    pub sweep: Option<SweepSettings>,
    pub spectrum: Option<SpectrumSettings>,
    pub output: OutputSettings,
}

fn cfg_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn quantity(field: &str, v: &Value, dim: Dimension) -> Result<f64, CliError> {
    match v {
        Value::String(s) => parse_quantity(s, dim).map_err(|e| cfg_err(field, e)),
        Value::Integer(_) | Value::Float(_) => {
            Err(cfg_err(field, format!("missing unit in {v} (write it as a string such as \"{v} <unit>\")")))
        }
        _ => Err(cfg_err(field, format!("expected a quantity string, got {v}"))),
    }
}

fn opt_quantity(field: &str, v: &Option<Value>, dim: Dimension) -> Result<Option<f64>, CliError> {
    v.as_ref().map(|v| quantity(field, v, dim)).transpose()
}

fn linspace(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![min],
        _ => (0..count)
            .map(|k| if k + 1 == count { max } else { min + (max - min) * k as f64 / (count - 1) as f64 })
            .collect(),
    }
}

fn parse_protocol(p: Option<&str>) -> Result<Protocol, CliError> {
    match p {
        Some("rabi") => Ok(Protocol::Rabi),
        Some("arp") => Ok(Protocol::Arp),
        Some("narp") => Ok(Protocol::Narp),
        other => Err(cfg_err(
            "pulse.protocol",
            format!(
                "{} (valid values: rabi, arp, narp)",
                match other {
                    None => "missing".to_string(),
                    Some("") => "empty".to_string(),
                    Some(s) => format!("unknown value {s:?}"),
                }
            ),
        )),
    }
}

fn parse_axis(raw: &RawAxis) -> Result<Axis, CliError> {
    let name = match raw.name.as_str() {
        "theta" => AxisName::Theta,
        "alpha" => AxisName::Alpha,
        "delta" => AxisName::Delta,
        s => {
            return Err(cfg_err(
                "sweep.axis.name",
                format!("unknown axis {s:?} (valid: theta, alpha, delta)"),
            ))
        }
    };
    let normalization = match raw.normalization.as_deref() {
        None => match name {
            AxisName::Theta => Normalization::ThetaInPi,
            AxisName::Alpha => Normalization::AlphaOverTau0Sq,
            AxisName::Delta => Normalization::DeltaOverGamma0,
        },
        Some("absolute") => Normalization::Absolute,
        Some("theta_in_pi") => Normalization::ThetaInPi,
        Some("alpha_over_tau0_sq") => Normalization::AlphaOverTau0Sq,
        Some("delta_over_Gamma0") | Some("delta_over_gamma0") => Normalization::DeltaOverGamma0,
        Some(s) => {
            return Err(cfg_err(
                "sweep.axis.normalization",
                format!(
                "unknown value {s:?} (valid: absolute, theta_in_pi, alpha_over_tau0_sq, delta_over_Gamma0)"
            ),
            ))
        }
    };
    Ok(Axis::new(name, raw.min, raw.max, raw.count, normalization))
}

/// Parses and resolves a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
    let p = &raw.pulse;
    let protocol = parse_protocol(p.protocol.as_deref())?;

    let theta = quantity(
        "pulse.theta",
        p.theta.as_ref().ok_or_else(|| cfg_err("pulse.theta", "missing"))?,
        Dimension::Angle,
    )?;
    let tau0 = quantity(
        "pulse.tau0",
        p.tau0.as_ref().ok_or_else(|| cfg_err("pulse.tau0", "missing"))?,
        Dimension::Time,
    )?;
    if tau0.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(cfg_err("pulse.tau0", "must be positive"));
    }

    let alpha = match (opt_quantity("pulse.alpha", &p.alpha, Dimension::TimeSquared)?, p.alpha_norm) {
        (Some(_), Some(_)) => {
            return Err(cfg_err("pulse.alpha", "contradictory: both alpha and alpha_norm given"))
        }
        (Some(a), None) => a,
        (None, Some(n)) => n * tau0 * tau0,
        (None, None) => 0.0,
    };

    let e = raw.emitter.unwrap_or_default();
    let detuning0 =
        opt_quantity("emitter.detuning0", &e.detuning0, Dimension::AngularFrequency)?.unwrap_or(0.0);
    let gamma = opt_quantity("emitter.gamma", &e.gamma, Dimension::Rate)?.unwrap_or(0.0);
    let gamma_ph = opt_quantity("emitter.gamma_ph", &e.gamma_ph, Dimension::Rate)?.unwrap_or(0.0);
    let emitter = EmitterParams::new(detuning0, gamma, gamma_ph).map_err(|e| cfg_err("emitter", e))?;

    let delta_abs = opt_quantity("pulse.delta", &p.delta, Dimension::AngularFrequency)?;
    let given = [delta_abs.is_some(), p.delta_norm.is_some(), p.delta_over_gamma.is_some()];
    if given.iter().filter(|&&g| g).count() > 1 {
        return Err(cfg_err(
            "pulse.delta",
            "contradictory: give only one of delta, delta_norm, delta_over_gamma",
        ));
    }
    let delta = if let Some(d) = delta_abs {
        d
    } else if let Some(n) = p.delta_norm {
        n * gamma0(tau0)
    } else if let Some(n) = p.delta_over_gamma {
        if gamma.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(cfg_err("pulse.delta_over_gamma", "needs emitter.gamma > 0"));
        }
        n * gamma
    } else {
        0.0
    };
    let carrier_offset =
        opt_quantity("pulse.carrier_offset", &p.carrier_offset, Dimension::AngularFrequency)?.unwrap_or(0.0);
    let pulse = PulseSpec { theta, tau0, alpha, delta_notch: delta, carrier_offset };
    pulse.validate().map_err(|e| cfg_err("pulse", e))?;

    let n = raw.numerics.unwrap_or_default();
    let grid = GridSpec {
        n_samples: n.n_samples.unwrap_or(GridSpec::default().n_samples),
        span_factor: n.span_factor.unwrap_or(GridSpec::default().span_factor),
    };
    let defaults = Tolerances::default();
    let tolerances = Tolerances::new(n.rtol.unwrap_or(defaults.rtol), n.atol.unwrap_or(defaults.atol))
        .map_err(|e| cfg_err("numerics", e))?;

    let sweep = match raw.sweep {
        None => None,
        Some(s) => {
            let axes = s.axis.iter().map(parse_axis).collect::<Result<Vec<_>, _>>()?;
            if s.workers == Some(0) {
                return Err(cfg_err("sweep.workers", "must be positive"));
            }
            Some(SweepSettings { closed_system: s.closed_system.unwrap_or(true), workers: s.workers, axes })
        }
    };

    // A swept chirp or notch frees that field from the protocol check.
    let swept = |name| sweep.as_ref().is_some_and(|s| s.axes.iter().any(|a| a.name == name));
    let chirp_ok = swept(AxisName::Alpha)
        || match protocol {
            Protocol::Rabi => alpha == 0.0,
            Protocol::Arp => alpha != 0.0,
            Protocol::Narp => true,
        };
    let notch_ok = swept(AxisName::Delta)
        || match protocol {
            Protocol::Rabi | Protocol::Arp => delta == 0.0,
            Protocol::Narp => delta > 0.0,
        };
    if !(chirp_ok && notch_ok) {
        return Err(cfg_err(
            "pulse.protocol",
            format!(
                "contradictory: protocol {protocol} but alpha = {alpha:e} s^2, delta = {delta:e} rad/s \
                 (rabi: no chirp, no notch; arp: chirp, no notch; narp: notch)"
            ),
        ));
    }

    let spectrum = match raw.spectrum {
        None => None,
        Some(s) => {
            let f0 = quantity("spectrum.freq_min", &s.freq_min, Dimension::AngularFrequency)?;
            let f1 = quantity("spectrum.freq_max", &s.freq_max, Dimension::AngularFrequency)?;
            let t0 = quantity("spectrum.t_min", &s.t_min, Dimension::Time)?;
            let t1 = quantity("spectrum.t_max", &s.t_max, Dimension::Time)?;
            if s.freq_count == 0 || s.t_count == 0 || f1 < f0 || t1 < t0 {
                return Err(cfg_err("spectrum", "grids need positive counts and max >= min"));
            }
            let tau_max = match &s.tau_max {
                Some(Value::String(v)) if v == "auto" => None,
                other => opt_quantity("spectrum.tau_max", other, Dimension::Time)?,
            };
            let apodization =
                match opt_quantity("spectrum.apodization_width", &s.apodization_width, Dimension::Time)? {
                    None => Apodization::None,
                    Some(width) => Apodization::Gaussian { width },
                };
            Some(SpectrumSettings {
                omega_grid: linspace(f0, f1, s.freq_count),
                t_grid: linspace(t0, t1, s.t_count),
                tau_max,
                apodization,
                fit_time: opt_quantity("spectrum.fit_time", &s.fit_time, Dimension::Time)?,
            })
        }
    };

    let o = raw.output.unwrap_or_default();
    let format = match o.format.as_deref() {
        None => Format::Csv,
        Some(f) => f.parse().map_err(|e| cfg_err("output.format", e))?,
    };
    let run = raw.run.as_deref().map(RunKind::parse).transpose()?;
    Ok(ExperimentConfig {
        name: raw.name.unwrap_or_else(|| "experiment".into()),
        run,
        protocol,
        pulse,
        emitter,
        grid,
        tolerances,
        sweep,
        spectrum,
        output: OutputSettings { dir: o.dir, format, plot: o.plot.unwrap_or(false) },
    })
}

impl ExperimentConfig {
    /// SHA-256 of the resolved configuration, output settings excluded.
    pub fn hash(&self) -> String {
        let experiment = (
            &self.name,
            &self.run,
            &self.protocol,
            &self.pulse,
            &self.emitter,
            &self.grid,
            &self.tolerances,
            &self.sweep,
            &self.spectrum,
        );
        let json = serde_json::to_string(&experiment).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Key quantities in both absolute and normalized form.
    pub fn echo(&self) -> Vec<(String, String)> {
        let p = &self.pulse;
        let mut out = vec![
            ("protocol".into(), self.protocol.to_string()),
            ("theta".into(), format!("{:?} rad = {:?} pi", p.theta, p.theta / std::f64::consts::PI)),
            ("tau0".into(), format!("{:?} s", p.tau0)),
            ("alpha".into(), format!("{:?} s^2 = {:?} tau0^2", p.alpha, p.alpha_norm())),
        ];
        let mut delta = format!("{:?} rad/s = {:?} Gamma0", p.delta_notch, p.delta_norm());
        if self.emitter.gamma > 0.0 {
            delta.push_str(&format!(" = {:?} gamma", p.delta_notch / self.emitter.gamma));
        }
        out.push(("delta".into(), delta));
        out.push(("carrier_offset".into(), format!("{:?} rad/s", p.carrier_offset)));
        out.push((
            "emitter".into(),
            format!(
                "detuning0 = {:?} rad/s, gamma = {:?} 1/s, gamma_ph = {:?} 1/s",
                self.emitter.detuning0, self.emitter.gamma, self.emitter.gamma_ph
            ),
        ));
        out.push((
            "grid".into(),
            format!("n_samples = {:?}, span_factor = {:?}", self.grid.n_samples, self.grid.span_factor),
        ));
        out.push((
            "tolerances".into(),
            format!("rtol = {:?}, atol = {:?}", self.tolerances.rtol, self.tolerances.atol),
        ));
        out
    }
}
