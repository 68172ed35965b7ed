//! The four run types, each producing tables (and optionally plots) from a
//! resolved configuration.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use qpulse_core::emission::{
    default_tau_max, emission_onset, fit_lorentzian, spectrogram_with, LorentzianFit, Spectrogram,
};
use qpulse_core::propagator::{evolve_with, integration_window, Propagator};
use qpulse_core::pulseshape::{build_spectrum, synthesize_envelope};
use qpulse_core::quantum::DensityMatrix;
use qpulse_core::sweeps::{run_sweep_with_progress, AxisName, Normalization, SweepPlan, SweepResult};

use crate::config::{ExperimentConfig, Format, RunKind};
use crate::output::{write_table, Cell, Table};
use crate::plot::{heatmap, lines, Labels};
use crate::{CliError, Result};

/// A named table plus an optional SVG rendering of it.
pub struct Artifact {
    pub stem: String,
    pub table: Table,
    pub plot: Option<String>,
}

pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// Human-readable result lines for stdout.
    pub summary: Vec<String>,
}

fn provenance(cfg: &ExperimentConfig, run: &str) -> Vec<(String, String)> {
    let mut p = vec![
        ("run".to_string(), run.to_string()),
        ("name".to_string(), cfg.name.clone()),
        ("config_hash".to_string(), cfg.hash()),
        ("core_version".to_string(), qpulse_core::VERSION.to_string()),
    ];
    p.extend(cfg.echo());
    p.push(("config".to_string(), serde_json::to_string(cfg).expect("config serializes")));
    p
}

pub fn run(cfg: &ExperimentConfig, kind: RunKind, workers: usize) -> Result<RunOutput> {
    info!("running {} ({kind:?}), config hash {}", cfg.name, cfg.hash());
    match kind {
        RunKind::Pulse => pulse(cfg),
        RunKind::Evolve => evolve(cfg),
        RunKind::Sweep => sweep(cfg, workers),
        RunKind::Spectrum => spectrum(cfg),
    }
}

pub fn pulse(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let spectrum = build_spectrum(&cfg.pulse, cfg.grid)?;
    let envelope = synthesize_envelope(&spectrum)?;
    let prov = provenance(cfg, "pulse");

    let (lo, hi) = integration_window(&envelope).unwrap_or((0, envelope.len() - 1));
    let mut env = Table::new(&["t_ps", "re_omega_per_ps", "im_omega_per_ps", "abs_omega_per_ps"])
        .with_provenance(prov.clone());
    for k in lo..=hi {
        let z = envelope.omega_values[k] * 1e-12;
        env.push(vec![(envelope.t_grid[k] * 1e12).into(), z.re.into(), z.im.into(), z.norm().into()]);
    }

    let floor = 1e-8 * spectrum.peak_magnitude();
    let first = spectrum.values.iter().position(|z| z.norm() > floor).unwrap_or(0);
    let last = spectrum.values.iter().rposition(|z| z.norm() > floor).unwrap_or(spectrum.len() - 1);
    let mut spec = Table::new(&["freq_offset_THz", "re_amplitude", "im_amplitude", "abs_amplitude"])
        .with_provenance(prov);
    for k in first..=last {
        let z = spectrum.values[k];
        spec.push(vec![
            (spectrum.omega_grid[k] / (2.0 * PI) * 1e-12).into(),
            z.re.into(),
            z.im.into(),
            z.norm().into(),
        ]);
    }

    let plot_env = cfg.output.plot.then(|| {
        lines(
            &env.column("t_ps").unwrap(),
            &[("|Ω| (1/ps)", env.column("abs_omega_per_ps").unwrap())],
            &Labels { title: &format!("{}: envelope", cfg.name), x: "t (ps)", y: "|Ω(t)| (1/ps)" },
        )
    });
    let plot_spec = cfg.output.plot.then(|| {
        lines(
            &spec.column("freq_offset_THz").unwrap(),
            &[("|Ω̃|", spec.column("abs_amplitude").unwrap())],
            &Labels {
                title: &format!("{}: spectrum", cfg.name), x: "(ω − ω_L)/2π (THz)", y: "|Ω̃(ω)|"
            },
        )
    });
    let summary = vec![
        format!("temporal area: {} pi", envelope.area() / PI),
        format!("peak |Omega|: {:e} rad/s", envelope.peak_magnitude()),
        format!("intensity FWHM: {:e} s", envelope.intensity_fwhm()),
    ];
    Ok(RunOutput {
        artifacts: vec![
            Artifact { stem: format!("{}_envelope", cfg.name), table: env, plot: plot_env },
            Artifact { stem: format!("{}_spectrum", cfg.name), table: spec, plot: plot_spec },
        ],
        summary,
    })
}

pub fn evolve(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let envelope = synthesize_envelope(&build_spectrum(&cfg.pulse, cfg.grid)?)?;
    let prop = Propagator::new(&envelope, cfg.emitter, cfg.tolerances)?;
    let traj = evolve_with(&prop, &DensityMatrix::ground())?;
    let mut prov = provenance(cfg, "evolve");
    prov.push((
        "steps".into(),
        format!(
            "accepted = {}, rejected = {}, rhs_evals = {}",
            traj.stats.accepted, traj.stats.rejected, traj.stats.rhs_evals
        ),
    ));
    let mut table = Table::new(&["t_ps", "rho_ee", "re_rho_eg", "im_rho_eg"]).with_provenance(prov);
    for (t, s) in traj.t_grid.iter().zip(&traj.states) {
        let eg = s.rho_eg();
        table.push(vec![(t * 1e12).into(), s.rho_ee().into(), eg.re.into(), eg.im.into()]);
    }
    let plot = cfg.output.plot.then(|| {
        lines(
            &table.column("t_ps").unwrap(),
            &[("ρ_ee", table.column("rho_ee").unwrap())],
            &Labels {
                title: &format!("{}: {} Θ = {:.3}π", cfg.name, cfg.protocol, cfg.pulse.theta / PI),
                x: "t (ps)",
                y: "ρ_ee",
            },
        )
    });
    let summary = vec![format!("final rho_ee: {}", traj.final_state().rho_ee())];
    Ok(RunOutput { artifacts: vec![Artifact { stem: cfg.name.clone(), table, plot }], summary })
}

/// Column label for an axis in its normalization.
pub fn axis_label(name: AxisName, norm: Normalization) -> &'static str {
    match (name, norm) {
        (AxisName::Theta, Normalization::ThetaInPi) => "theta_over_pi",
        (AxisName::Alpha, Normalization::AlphaOverTau0Sq) => "alpha_over_tau0_sq",
        (AxisName::Delta, Normalization::DeltaOverGamma0) => "delta_over_Gamma0",
        (AxisName::Theta, _) => "theta_rad",
        (AxisName::Alpha, _) => "alpha_s2",
        (AxisName::Delta, _) => "delta_rad_per_s",
    }
}

fn plot_label(name: AxisName, norm: Normalization) -> &'static str {
    match (name, norm) {
        (AxisName::Theta, Normalization::ThetaInPi) => "Θ/π",
        (AxisName::Alpha, Normalization::AlphaOverTau0Sq) => "α/τ0²",
        (AxisName::Delta, Normalization::DeltaOverGamma0) => "δ/Γ0",
        (AxisName::Theta, _) => "Θ (rad)",
        (AxisName::Alpha, _) => "α (s²)",
        (AxisName::Delta, _) => "δ (rad/s)",
    }
}

pub fn sweep_plan(cfg: &ExperimentConfig) -> Result<SweepPlan> {
    let s = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("sweep run needs a [sweep] section".into()))?;
    let plan = SweepPlan {
        axes: s.axes.clone(),
        baseline: cfg.pulse,
        params: cfg.emitter,
        closed_system: s.closed_system,
        grid: cfg.grid,
        tolerances: cfg.tolerances,
    };
    plan.validate()?;
    Ok(plan)
}

/// Long-form table: one row per cell, first axis slowest.
pub fn sweep_table(result: &SweepResult, provenance: Vec<(String, String)>) -> Table {
    let mut cols: Vec<&str> = result.axes.iter().map(|a| axis_label(a.name, a.normalization)).collect();
    cols.extend(["rho_ee", "converged"]);
    let mut table = Table::new(&cols).with_provenance(provenance);
    for (i, x) in result.grids[0].iter().enumerate() {
        for j in 0..result.rho_ee[i].len() {
            let mut row: Vec<Cell> = vec![(*x).into()];
            if let Some(g) = result.grids.get(1) {
                row.push(g[j].into());
            }
            row.push(result.rho_ee[i][j].into());
            row.push(result.converged[i][j].into());
            table.push(row);
        }
    }
    table
}

pub fn sweep(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    let plan = sweep_plan(cfg)?;
    let result = run_sweep_with_progress(&plan, workers, |done, total| info!("sweep rows {done}/{total}"))?;
    for (i, j, msg) in &result.failures {
        warn!("cell ({i}, {j}) failed: {msg}");
    }
    let mut prov = provenance(cfg, "sweep");
    prov.push(("sweep_provenance".into(), serde_json::to_string(&result.provenance).expect("serializes")));
    let table = sweep_table(&result, prov);
    let labels: Vec<&str> = result.axes.iter().map(|a| plot_label(a.name, a.normalization)).collect();
    let title = format!("{}: final ρ_ee", cfg.name);
    let plot = cfg.output.plot.then(|| match labels.len() {
        1 => lines(
            &result.grids[0],
            &[("ρ_ee", result.column(0))],
            &Labels { title: &title, x: labels[0], y: "ρ_ee" },
        ),
        _ => heatmap(
            &result.grids[0],
            &result.grids[1],
            &result.rho_ee,
            &Labels { title: &title, x: labels[0], y: labels[1] },
        ),
    });
    let (n0, n1) = result.shape();
    let summary =
        vec![format!("cells: {} ({n0} x {n1})", n0 * n1), format!("failed cells: {}", result.failures.len())];
    if !result.failures.is_empty() {
        let (i, j, msg) = &result.failures[0];
        return Err(CliError::Numerical(format!(
            "{} sweep cells failed; first at ({i}, {j}): {msg}",
            result.failures.len()
        )));
    }
    Ok(RunOutput { artifacts: vec![Artifact { stem: cfg.name.clone(), table, plot }], summary })
}

/// Spectrogram plus its post-pulse line fit.
pub struct SpectrumRun {
    pub spectrogram: Spectrogram,
    pub fit: LorentzianFit,
    pub fit_time: f64,
    pub onset: Option<f64>,
    pub final_rho_ee: f64,
}

pub fn compute_spectrum(cfg: &ExperimentConfig) -> Result<SpectrumRun> {
    let s = cfg
        .spectrum
        .as_ref()
        .ok_or_else(|| CliError::Config("spectrum run needs a [spectrum] section".into()))?;
    let envelope = synthesize_envelope(&build_spectrum(&cfg.pulse, cfg.grid)?)?;
    let prop = Propagator::new(&envelope, cfg.emitter, cfg.tolerances)?;
    let tau_max = match s.tau_max.or_else(|| default_tau_max(&cfg.emitter)) {
        Some(t) => t,
        None => {
            return Err(CliError::Config("spectrum: tau_max = \"auto\" needs gamma/2 + gamma_ph > 0".into()))
        }
    };
    let rho0 = DensityMatrix::ground();
    let spectrogram = spectrogram_with(&prop, &rho0, &s.omega_grid, &s.t_grid, tau_max, s.apodization)?;
    if spectrogram.meta.clipped > 0 {
        warn!(
            "clipped {} negative samples (most negative {:e})",
            spectrogram.meta.clipped, spectrogram.meta.min_normalized
        );
    }
    let i = match s.fit_time {
        None => s.t_grid.len() - 1,
        Some(t) => {
            s.t_grid.iter().enumerate().min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs())).unwrap().0
        }
    };
    let fit = fit_lorentzian(&s.omega_grid, &spectrogram.values[i])?;
    if fit.model_mismatch() {
        warn!("Lorentzian model mismatch: residual {:e}", fit.residual_norm);
    }
    let onset = match emission_onset(&spectrogram) {
        Ok(t) => Some(t),
        Err(e) => {
            warn!("{e}");
            None
        }
    };
    let end = *prop.window_times().last().unwrap();
    let final_rho_ee = qpulse_core::emission::state_at(&prop, &rho0, end)?.ee.re;
    Ok(SpectrumRun { spectrogram, fit, fit_time: s.t_grid[i], onset, final_rho_ee })
}

pub fn spectrum(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let r = compute_spectrum(cfg)?;
    let sg = &r.spectrogram;
    let mut prov = provenance(cfg, "spectrum");
    prov.push(("spectrogram".into(), serde_json::to_string(&sg.meta).expect("serializes")));
    let to_ghz = |w: f64| w / (2.0 * PI) * 1e-9;
    let mut table = Table::new(&["omega_offset_GHz", "t_ps", "intensity"]).with_provenance(prov.clone());
    for (i, t) in sg.t_grid.iter().enumerate() {
        for (j, w) in sg.omega_grid.iter().enumerate() {
            table.push(vec![to_ghz(*w).into(), (t * 1e12).into(), sg.values[i][j].into()]);
        }
    }
    let mut cols = vec![
        "fit_t_ps",
        "center_GHz",
        "fwhm_MHz",
        "amplitude",
        "residual_norm",
        "model_mismatch",
        "final_rho_ee",
    ];
    if r.onset.is_some() {
        cols.push("onset_ps");
    }
    let mut fit = Table::new(&cols).with_provenance(prov);
    let mut row: Vec<Cell> = vec![
        (r.fit_time * 1e12).into(),
        to_ghz(r.fit.center).into(),
        (r.fit.fwhm / (2.0 * PI) * 1e-6).into(),
        r.fit.amplitude.into(),
        r.fit.residual_norm.into(),
        r.fit.model_mismatch().into(),
        r.final_rho_ee.into(),
    ];
    if let Some(t) = r.onset {
        row.push((t * 1e12).into());
    }
    fit.push(row);

    let plot = cfg.output.plot.then(|| {
        let t_ps: Vec<f64> = sg.t_grid.iter().map(|t| t * 1e12).collect();
        let ghz: Vec<f64> = sg.omega_grid.iter().map(|w| to_ghz(*w)).collect();
        heatmap(
            &t_ps,
            &ghz,
            &sg.values,
            &Labels { title: &format!("{}: S(ω, t)", cfg.name), x: "t (ps)", y: "(ω − ω₀)/2π (GHz)" },
        )
    });
    let mut summary = vec![
        format!(
            "fit at t = {} ps: center {} GHz, FWHM {} MHz, residual {:e}",
            r.fit_time * 1e12,
            to_ghz(r.fit.center),
            r.fit.fwhm / (2.0 * PI) * 1e-6,
            r.fit.residual_norm
        ),
        format!("final rho_ee: {}", r.final_rho_ee),
    ];
    summary.push(match r.onset {
        Some(t) => format!("emission onset: {} ps", t * 1e12),
        None => "emission onset: none".into(),
    });
    Ok(RunOutput {
        artifacts: vec![
            Artifact { stem: cfg.name.clone(), table, plot },
            Artifact { stem: format!("{}_fit", cfg.name), table: fit, plot: None },
        ],
        summary,
    })
}

/// Writes every artifact (and its plot when present) into `dir`.
pub fn write_outputs(dir: &Path, format: Format, out: &RunOutput) -> Result<Vec<PathBuf>> {
    let mut paths = vec![];
    for a in &out.artifacts {
        paths.push(write_table(dir, &a.stem, &a.table, format)?);
        if let Some(svg) = &a.plot {
            let p = dir.join(format!("{}.svg", a.stem));
            fs::write(&p, svg).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            paths.push(p);
        }
    }
    Ok(paths)
}
