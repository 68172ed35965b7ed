//! Parallel maps of the final excited-state population over one or two of
//! (Θ, α, δ).

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::propagator::{final_population_with, Propagator, Tolerances};
use crate::pulseshape::{gamma0, pulse_envelope, GridSpec, PulseSpec};
use crate::quantum::{DensityMatrix, EmitterParams};
use crate::{Error, Result, VERSION};

/// Populations may overshoot [0, 1] by this much before a cell is flagged.
pub const POPULATION_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    Theta,
    Alpha,
    Delta,
}

impl AxisName {
    pub fn as_str(&self) -> &'static str {
        match self {
            AxisName::Theta => "theta",
            AxisName::Alpha => "alpha",
            AxisName::Delta => "delta",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Absolute,
    ThetaInPi,
    AlphaOverTau0Sq,
    DeltaOverGamma0,
}

impl Normalization {
    fn fits(&self, axis: AxisName) -> bool {
        matches!(
            (self, axis),
            (Normalization::Absolute, _)
                | (Normalization::ThetaInPi, AxisName::Theta)
                | (Normalization::AlphaOverTau0Sq, AxisName::Alpha)
                | (Normalization::DeltaOverGamma0, AxisName::Delta)
        )
    }

    /// Absolute value (rad, s², rad/s) of a normalized coordinate.
    pub fn to_absolute(&self, v: f64, tau0: f64) -> f64 {
        match self {
            Normalization::Absolute => v,
            Normalization::ThetaInPi => v * std::f64::consts::PI,
            Normalization::AlphaOverTau0Sq => v * tau0 * tau0,
            Normalization::DeltaOverGamma0 => v * gamma0(tau0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: AxisName,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub normalization: Normalization,
}

impl Axis {
    pub fn new(name: AxisName, min: f64, max: f64, count: usize, normalization: Normalization) -> Self {
        Self { name, min, max, count, normalization }
    }

    /// Grid points in the axis' own normalization.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| if k + 1 == self.count { self.max } else { self.min + k as f64 * step })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let name = self.name.as_str();
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::InvalidPlan(format!("axis {name}: non-finite bounds")));
        }
        if self.count == 0 {
            return Err(Error::InvalidPlan(format!("axis {name}: count must be positive")));
        }
        if self.count == 1 && self.min != self.max {
            return Err(Error::InvalidPlan(format!("axis {name}: a single point needs min == max")));
        }
        if self.max < self.min {
            return Err(Error::InvalidPlan(format!("axis {name}: max < min")));
        }
        if !self.normalization.fits(self.name) {
            return Err(Error::InvalidPlan(format!(
                "axis {name}: normalization {:?} does not apply",
                self.normalization
            )));
        }
        if matches!(self.name, AxisName::Theta | AxisName::Delta) && self.min < 0.0 {
            return Err(Error::InvalidPlan(format!("axis {name}: must be non-negative")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    /// One or two axes; the second (if any) varies fastest.
    pub axes: Vec<Axis>,
    pub baseline: PulseSpec,
    pub params: EmitterParams,
    pub closed_system: bool,
    pub grid: GridSpec,
    pub tolerances: Tolerances,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::InvalidPlan(format!("need 1 or 2 axes, got {}", self.axes.len())));
        }
        if self.axes.len() == 2 && self.axes[0].name == self.axes[1].name {
            return Err(Error::InvalidPlan("axes must be distinct".into()));
        }
        for a in &self.axes {
            a.validate()?;
        }
        self.baseline.validate()?;
        self.params.validate()?;
        self.tolerances.validate()?;
        Ok(())
    }

    /// Emitter parameters actually used for every cell.
    pub fn effective_params(&self) -> EmitterParams {
        if self.closed_system {
            self.params.without_dissipation()
        } else {
            self.params
        }
    }

    /// Pulse for the cell at the given normalized axis coordinates.
    pub fn cell_spec(&self, coords: &[f64]) -> PulseSpec {
        let mut spec = self.baseline;
        for (axis, &v) in self.axes.iter().zip(coords) {
            let x = axis.normalization.to_absolute(v, spec.tau0);
            match axis.name {
                AxisName::Theta => spec.theta = x,
                AxisName::Alpha => spec.alpha = x,
                AxisName::Delta => spec.delta_notch = x,
            }
        }
        spec
    }

    fn shape(&self) -> (usize, usize) {
        (self.axes[0].count, self.axes.get(1).map_or(1, |a| a.count))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub baseline: PulseSpec,
    pub params: EmitterParams,
    pub closed_system: bool,
    pub grid: GridSpec,
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axes: Vec<Axis>,
    /// Axis grids in each axis' normalization.
    pub grids: Vec<Vec<f64>>,
    /// `rho_ee[i][j]`: `i` indexes the first axis, `j` the second (a single
    /// column for 1-D sweeps). Failed cells hold NaN.
    pub rho_ee: Vec<Vec<f64>>,
    pub converged: Vec<Vec<bool>>,
    /// Error text for failed cells, as `(i, j, message)`.
    pub failures: Vec<(usize, usize, String)>,
    pub provenance: Provenance,
}

impl SweepResult {
    pub fn shape(&self) -> (usize, usize) {
        (self.rho_ee.len(), self.rho_ee.first().map_or(0, Vec::len))
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().flatten().all(|&c| c)
    }

    /// Values along the first axis at fixed second-axis index `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rho_ee.iter().map(|row| row[j]).collect()
    }
}

fn cell(plan: &SweepPlan, params: &EmitterParams, coords: &[f64]) -> Result<f64> {
    let spec = plan.cell_spec(coords);
    let env = pulse_envelope(&spec, plan.grid)?;
    let prop = Propagator::new(&env, *params, plan.tolerances)?;
    let p = final_population_with(&prop, &DensityMatrix::ground())?;
    if !(-POPULATION_SLACK..=1.0 + POPULATION_SLACK).contains(&p) {
        return Err(Error::InvariantViolation { t: f64::NAN, what: format!("rho_ee = {p}") });
    }
    Ok(p)
}

/// Runs the plan on `workers` threads.
pub fn run_sweep(plan: &SweepPlan, workers: usize) -> Result<SweepResult> {
    run_sweep_with_progress(plan, workers, |_, _| {})
}

/// As [`run_sweep`], calling `progress(rows_done, rows_total)` after each
/// row along the first axis completes.
pub fn run_sweep_with_progress<F>(plan: &SweepPlan, workers: usize, progress: F) -> Result<SweepResult>
where
    F: Fn(usize, usize) + Sync,
{
    plan.validate()?;
    if workers == 0 {
        return Err(Error::InvalidPlan("workers must be positive".into()));
    }
    let grids: Vec<Vec<f64>> = plan.axes.iter().map(Axis::values).collect();
    let (n0, n1) = plan.shape();
    let params = plan.effective_params();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidPlan(format!("thread pool: {e}")))?;
    let done = AtomicUsize::new(0);
    // Cells within a row run in order; rows are independent, so the result
    // does not depend on scheduling.
    let rows: Vec<Vec<Result<f64>>> = pool.install(|| {
        (0..n0)
            .into_par_iter()
            .map(|i| {
                let row = (0..n1)
                    .map(|j| {
                        let mut coords = vec![grids[0][i]];
                        if let Some(g) = grids.get(1) {
                            coords.push(g[j]);
                        }
                        cell(plan, &params, &coords)
                    })
                    .collect();
                let k = done.fetch_add(1, Ordering::SeqCst) + 1;
                progress(k, n0);
                row
            })
            .collect()
    });

    let mut rho_ee = Vec::with_capacity(n0);
    let mut converged = Vec::with_capacity(n0);
    let mut failures = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        let mut vals = Vec::with_capacity(n1);
        let mut flags = Vec::with_capacity(n1);
        for (j, r) in row.into_iter().enumerate() {
            match r {
                Ok(p) => {
                    vals.push(p);
                    flags.push(true);
                }
                Err(e) => {
                    log::warn!("sweep cell ({i}, {j}) failed: {e}");
                    failures.push((i, j, e.to_string()));
                    vals.push(f64::NAN);
                    flags.push(false);
                }
            }
        }
        rho_ee.push(vals);
        converged.push(flags);
    }
    Ok(SweepResult {
        axes: plan.axes.clone(),
        grids,
        rho_ee,
        converged,
        failures,
        provenance: Provenance {
            version: VERSION.to_string(),
            baseline: plan.baseline,
            params,
            closed_system: plan.closed_system,
            grid: plan.grid,
            tolerances: plan.tolerances,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::final_population;
    use std::f64::consts::PI;

    const TAU0: f64 = 100e-15;

    fn plan(axes: Vec<Axis>) -> SweepPlan {
        SweepPlan {
            axes,
            baseline: PulseSpec::transform_limited(PI, TAU0),
            params: EmitterParams::closed(),
            closed_system: true,
            grid: GridSpec { n_samples: 1 << 12, span_factor: 16.0 },
            tolerances: Tolerances::default(),
        }
    }

    #[test]
    fn axis_values_hit_both_ends() {
        let a = Axis::new(AxisName::Theta, 0.0, 6.0, 41, Normalization::ThetaInPi);
        let v = a.values();
        assert_eq!(v.len(), 41);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[40], 6.0);
        assert!((v[20] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn plan_validation() {
        let th = Axis::new(AxisName::Theta, 0.0, 2.0, 3, Normalization::ThetaInPi);
        assert!(plan(vec![th, th]).validate().is_err());
        assert!(plan(vec![]).validate().is_err());
        let bad = Axis::new(AxisName::Theta, 0.0, 1.0, 3, Normalization::DeltaOverGamma0);
        assert!(plan(vec![bad]).validate().is_err());
        let single = Axis::new(AxisName::Theta, 0.0, 1.0, 1, Normalization::ThetaInPi);
        assert!(plan(vec![single]).validate().is_err());
        assert!(run_sweep(&plan(vec![th]), 0).is_err());
    }

    #[test]
    fn single_cell_equals_direct_call() {
        let th = Axis::new(AxisName::Theta, 2.5, 2.5, 1, Normalization::ThetaInPi);
        let al = Axis::new(AxisName::Alpha, 0.8, 0.8, 1, Normalization::AlphaOverTau0Sq);
        let p = plan(vec![th, al]);
        let r = run_sweep(&p, 1).unwrap();
        let spec = PulseSpec::transform_limited(2.5 * PI, TAU0).with_chirp(0.8 * TAU0 * TAU0);
        let env = pulse_envelope(&spec, p.grid).unwrap();
        let want =
            final_population(&env, &EmitterParams::closed(), &DensityMatrix::ground(), 1e-9, 1e-12).unwrap();
        assert_eq!(r.rho_ee[0][0], want);
    }

    #[test]
    fn progress_reports_every_row() {
        let th = Axis::new(AxisName::Theta, 0.0, 1.0, 4, Normalization::ThetaInPi);
        let seen = std::sync::Mutex::new(Vec::new());
        run_sweep_with_progress(&plan(vec![th]), 2, |k, n| seen.lock().unwrap().push((k, n))).unwrap();
        let mut seen = seen.into_inner().unwrap();
        seen.sort();
        assert_eq!(seen, vec![(1, 4), (2, 4), (3, 4), (4, 4)]);
    }

    #[test]
    fn failed_cells_are_flagged_not_fatal() {
        let mut p = plan(vec![Axis::new(AxisName::Theta, 0.0, 1.0, 2, Normalization::ThetaInPi)]);
        // Too coarse a grid for a long chirp: the envelope does not fit.
        p.baseline.alpha = 200.0 * TAU0 * TAU0;
        let r = run_sweep(&p, 1).unwrap();
        assert!(!r.all_converged());
        assert!(r.rho_ee[1][0].is_nan());
        assert!(!r.failures.is_empty());
    }
}
