//! Master-equation integration over a sampled drive.
//!
//! Inside the integration window the drive is a natural cubic spline (real
//! and imaginary parts separately) through the envelope samples, and the
//! Lindblad equation is stepped with an adaptive Dormand-Prince 5(4) pair.
//! Steps never straddle a sample, so the drive is a single cubic within every
//! step and every sample time is hit exactly. Outside the window the drive is
//! treated as zero and the exact free evolution is used.

use serde::{Deserialize, Serialize};

use crate::pulseshape::{SampledEnvelope, WINDOW_FLOOR};
use crate::quantum::{
    check_state, free_evolution, lindblad_rhs, DensityMatrix, DriveSample, EmitterParams, Operator,
    STATE_TOLERANCE,
};
use crate::{Error, Result, C64};

/// Window padding, in units of the chirped pulse duration.
pub const WINDOW_PADDING: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12 }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Result<Self> {
        let t = Self { rtol, atol };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1e-12..=1e-3).contains(&self.rtol) {
            return Err(Error::InvalidTolerance(format!(
                "rtol must lie in [1e-12, 1e-3], got {}",
                self.rtol
            )));
        }
        if !(self.atol > 0.0 && self.atol.is_finite()) {
            return Err(Error::InvalidTolerance(format!("atol must be > 0, got {}", self.atol)));
        }
        Ok(())
    }

    /// Slack allowed on stored states before the run is declared broken.
    pub fn invariant_slack(&self) -> f64 {
        STATE_TOLERANCE.max(10.0 * self.rtol)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
}

impl StepStats {
    fn merge(&mut self, other: StepStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.rhs_evals += other.rhs_evals;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t_grid: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub tolerances: Tolerances,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn rho_ee(&self) -> Vec<f64> {
        self.states.iter().map(DensityMatrix::rho_ee).collect()
    }
}

/// Sample-index range `[first, last]` over which the drive is integrated
/// numerically, or `None` if the envelope is identically zero.
pub fn integration_window(envelope: &SampledEnvelope) -> Option<(usize, usize)> {
    let peak = envelope.peak_magnitude();
    if peak == 0.0 || envelope.len() < 2 {
        return None;
    }
    let floor = WINDOW_FLOOR * peak;
    let first = envelope.omega_values.iter().position(|z| z.norm() > floor)?;
    let last = envelope.omega_values.iter().rposition(|z| z.norm() > floor)?;
    let pad = (WINDOW_PADDING * envelope.nominal_duration / envelope.dt).ceil() as usize;
    let lo = first.saturating_sub(pad);
    let hi = (last + pad).min(envelope.len() - 1);
    (hi > lo).then_some((lo, hi))
}

/// Natural cubic spline through uniformly spaced complex samples.
#[derive(Clone, Debug)]
struct DriveSpline {
    t0: f64,
    h: f64,
    y: Vec<C64>,
    m: Vec<C64>,
}

impl DriveSpline {
    fn new(t0: f64, h: f64, y: Vec<C64>) -> Self {
        let n = y.len();
        let mut m = vec![C64::new(0.0, 0.0); n];
        if n > 2 {
            // Thomas algorithm for m[i-1] + 4 m[i] + m[i+1] = 6 Δ²y / h²,
            // m[0] = m[n-1] = 0.
            let k = n - 2;
            let mut c = vec![0.0; k];
            let mut d = vec![C64::new(0.0, 0.0); k];
            let s = 6.0 / (h * h);
            for i in 0..k {
                let rhs = (y[i] - 2.0 * y[i + 1] + y[i + 2]) * s;
                if i == 0 {
                    c[i] = 0.25;
                    d[i] = rhs * 0.25;
                } else {
                    let denom = 4.0 - c[i - 1];
                    c[i] = 1.0 / denom;
                    d[i] = (rhs - d[i - 1]) / denom;
                }
            }
            m[k] = d[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = d[i] - m[i + 2] * c[i];
            }
        }
        Self { t0, h, y, m }
    }

    /// Cubic on interval `i` evaluated at local offset `s = t − t_i`.
    #[inline]
    fn eval_in(&self, i: usize, s: f64) -> C64 {
        let h = self.h;
        let b = s / h;
        let a = 1.0 - b;
        let h2 = h * h / 6.0;
        self.y[i] * a
            + self.y[i + 1] * b
            + (self.m[i] * (a * a * a - a) + self.m[i + 1] * (b * b * b - b)) * h2
    }

    fn eval(&self, t: f64) -> C64 {
        let x = (t - self.t0) / self.h;
        if x < 0.0 || x > (self.y.len() - 1) as f64 {
            return C64::new(0.0, 0.0);
        }
        let i = (x.floor() as usize).min(self.y.len() - 2);
        self.eval_in(i, t - (self.t0 + i as f64 * self.h))
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn error_norm(err: &Operator, y0: &Operator, y1: &Operator, tol: &Tolerances) -> f64 {
    let e = err.entries();
    let a = y0.entries();
    let b = y1.entries();
    let mut acc = 0.0;
    for k in 0..4 {
        let sre = tol.atol + tol.rtol * a[k].re.abs().max(b[k].re.abs());
        let sim = tol.atol + tol.rtol * a[k].im.abs().max(b[k].im.abs());
        acc += (e[k].re / sre).powi(2) + (e[k].im / sim).powi(2);
    }
    (acc / 8.0).sqrt()
}

/// Pushes operators forward under the Liouvillian of a fixed envelope. The
/// map is linear, so it serves both ρ and the regression operator σ₋ρ.
#[derive(Clone, Debug)]
pub struct Propagator {
    params: EmitterParams,
    tol: Tolerances,
    grid_start: f64,
    grid_end: f64,
    dt: f64,
    /// Window as sample indices into the envelope grid.
    window: Option<(usize, usize)>,
    spline: Option<DriveSpline>,
    t_grid: Vec<f64>,
}

impl Propagator {
    pub fn new(envelope: &SampledEnvelope, params: EmitterParams, tol: Tolerances) -> Result<Self> {
        Self::with_window(envelope, params, tol, integration_window(envelope))
    }

    /// Uses an explicit integration window. Samples outside it are ignored.
    pub fn with_window(
        envelope: &SampledEnvelope,
        params: EmitterParams,
        tol: Tolerances,
        window: Option<(usize, usize)>,
    ) -> Result<Self> {
        params.validate()?;
        tol.validate()?;
        if envelope.len() < 2 || envelope.t_grid.len() != envelope.len() {
            return Err(Error::InvalidGrid("envelope needs at least two samples".into()));
        }
        if let Some((lo, hi)) = window {
            if lo >= hi || hi >= envelope.len() {
                return Err(Error::InvalidGrid(format!("bad window [{lo}, {hi}]")));
            }
        }
        let spline = window.map(|(lo, hi)| {
            DriveSpline::new(envelope.t_grid[lo], envelope.dt, envelope.omega_values[lo..=hi].to_vec())
        });
        Ok(Self {
            params,
            tol,
            grid_start: envelope.t_grid[0],
            grid_end: *envelope.t_grid.last().unwrap(),
            dt: envelope.dt,
            window,
            spline,
            t_grid: envelope.t_grid.clone(),
        })
    }

    pub fn params(&self) -> &EmitterParams {
        &self.params
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Start and end of the envelope grid.
    pub fn grid_span(&self) -> (f64, f64) {
        (self.grid_start, self.grid_end)
    }

    /// Envelope sample spacing, s.
    pub fn grid_step(&self) -> f64 {
        self.dt
    }

    /// Numerical integration window in seconds.
    pub fn window_span(&self) -> Option<(f64, f64)> {
        self.window.map(|(lo, hi)| (self.t_grid[lo], self.t_grid[hi]))
    }

    /// Sample times inside the numerical window.
    pub fn window_times(&self) -> &[f64] {
        match self.window {
            Some((lo, hi)) => &self.t_grid[lo..=hi],
            None => &self.t_grid[..],
        }
    }

    /// Interpolated drive at `t` (zero outside the window).
    pub fn drive(&self, t: f64) -> C64 {
        self.spline.as_ref().map_or(C64::new(0.0, 0.0), |s| s.eval(t))
    }

    /// Pushes `op` from `t_from` to `t_to` (`t_to ≥ t_from`) under the
    /// Liouvillian.
    pub fn advance(&self, op: Operator, t_from: f64, t_to: f64) -> Result<(Operator, StepStats)> {
        if !(t_to >= t_from) {
            return Err(Error::InvalidGrid(format!(
                "cannot propagate backwards from {t_from:e} to {t_to:e}"
            )));
        }
        let mut stats = StepStats::default();
        let Some((ws, we)) = self.window_span() else {
            return Ok((free_evolution(&op, t_to - t_from, &self.params), stats));
        };
        let mut y = op;
        let mut t = t_from;
        if t < ws {
            let stop = t_to.min(ws);
            y = free_evolution(&y, stop - t, &self.params);
            t = stop;
        }
        if t < t_to && t < we {
            let stop = t_to.min(we);
            let (y1, s) = self.integrate(y, t, stop)?;
            stats.merge(s);
            y = y1;
            t = stop;
        }
        if t < t_to {
            y = free_evolution(&y, t_to - t, &self.params);
        }
        Ok((y, stats))
    }

    /// Adaptive integration across the window, sample interval by sample
    /// interval.
    fn integrate(&self, y0: Operator, t_from: f64, t_to: f64) -> Result<(Operator, StepStats)> {
        let spline = self.spline.as_ref().expect("window implies spline");
        let nk = spline.y.len();
        let mut stats = StepStats::default();
        let mut y = y0;
        let mut t = t_from;
        let mut h = 0.1 * self.dt;
        let det = self.params.detuning0;
        while t < t_to {
            // Small offset so that t sitting on a knot selects the interval
            // that starts there.
            let x = ((t - spline.t0) / spline.h + 1e-9).floor().max(0.0) as usize;
            let i = x.min(nk - 2);
            let t_i = spline.t0 + i as f64 * spline.h;
            // The last interval absorbs any rounding mismatch between the
            // knot arithmetic and the envelope's own time grid.
            let seg_end = if i + 2 >= nk { t_to } else { (t_i + spline.h).min(t_to) };
            let rhs = |tt: f64, op: &Operator| {
                let drive = DriveSample::new(spline.eval_in(i, tt - t_i), det);
                lindblad_rhs(op, drive, &self.params)
            };
            let (y1, h_next, s) = self.integrate_segment(&rhs, y, t, seg_end, h)?;
            stats.merge(s);
            y = y1;
            h = h_next;
            t = seg_end;
        }
        Ok((y, stats))
    }

    fn integrate_segment<F>(
        &self,
        f: &F,
        y0: Operator,
        t0: f64,
        t1: f64,
        h0: f64,
    ) -> Result<(Operator, f64, StepStats)>
    where
        F: Fn(f64, &Operator) -> Operator,
    {
        let mut stats = StepStats::default();
        let mut y = y0;
        let mut t = t0;
        let mut h = h0.min(t1 - t0);
        let mut h_carry = h0;
        let min_h = 1e-12 * self.dt;
        let mut k1 = f(t, &y);
        stats.rhs_evals += 1;
        while t < t1 {
            let last = t + h >= t1;
            if last {
                h = t1 - t;
            }
            let k2 = f(t + C2 * h, &(y + k1 * (A21 * h)));
            let k3 = f(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h));
            let k4 = f(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
            let k5 = f(t + C5 * h, &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
            let k6 = f(t + h, &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h));
            let y_new = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
            let k7 = f(t + h, &y_new);
            stats.rhs_evals += 6;
            let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
            let en = error_norm(&err, &y, &y_new, &self.tol);
            if !en.is_finite() {
                return Err(Error::InvariantViolation { t, what: "non-finite step".into() });
            }
            let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            if en <= 1.0 {
                stats.accepted += 1;
                t = if last { t1 } else { t + h };
                y = y_new;
                k1 = k7;
                // A step truncated to hit t1 says little about the next one.
                h_carry = if last { h_carry.max(h * factor) } else { h * factor };
                h = h_carry;
            } else {
                stats.rejected += 1;
                h *= factor.min(1.0);
                h_carry = h;
                if h < min_h {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        Ok((y, h_carry, stats))
    }
}

/// Integrates from `rho0` (the state at the first envelope sample) across the
/// integration window and returns the states at every sample inside it.
pub fn evolve(
    envelope: &SampledEnvelope,
    params: &EmitterParams,
    rho0: &DensityMatrix,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory> {
    let tol = Tolerances::new(rtol, atol)?;
    let prop = Propagator::new(envelope, *params, tol)?;
    evolve_with(&prop, rho0)
}

/// [`evolve`] with a prepared propagator.
pub fn evolve_with(prop: &Propagator, rho0: &DensityMatrix) -> Result<Trajectory> {
    let tol = *prop.tolerances();
    check_state(rho0.as_operator(), STATE_TOLERANCE)?;
    let slack = tol.invariant_slack();
    let times = prop.window_times().to_vec();
    let (start, _) = prop.grid_span();
    let (mut op, mut stats) = prop.advance(*rho0.as_operator(), start, times[0])?;
    let mut states = Vec::with_capacity(times.len());
    let check = |op: &Operator, t: f64| {
        check_state(op, slack).map_err(|e| Error::InvariantViolation { t, what: e.to_string() })
    };
    check(&op, times[0])?;
    states.push(DensityMatrix::from_operator_unchecked(op));
    for w in times.windows(2) {
        let (next, s) = prop.advance(op, w[0], w[1])?;
        stats.merge(s);
        check(&next, w[1])?;
        states.push(DensityMatrix::from_operator_unchecked(next));
        op = next;
    }
    Ok(Trajectory { t_grid: times, states, tolerances: tol, stats })
}

/// ρ_ee at the end of the integration window.
pub fn final_population(
    envelope: &SampledEnvelope,
    params: &EmitterParams,
    rho0: &DensityMatrix,
    rtol: f64,
    atol: f64,
) -> Result<f64> {
    let tol = Tolerances::new(rtol, atol)?;
    let prop = Propagator::new(envelope, *params, tol)?;
    final_population_with(&prop, rho0)
}

/// Final population without storing the trajectory.
pub fn final_population_with(prop: &Propagator, rho0: &DensityMatrix) -> Result<f64> {
    check_state(rho0.as_operator(), STATE_TOLERANCE)?;
    let times = prop.window_times();
    let (start, _) = prop.grid_span();
    let end = *times.last().unwrap();
    let (op, _) = prop.advance(*rho0.as_operator(), start, end)?;
    check_state(&op, prop.tolerances().invariant_slack())
        .map_err(|e| Error::InvariantViolation { t: end, what: e.to_string() })?;
    Ok(op.ee.re)
}
