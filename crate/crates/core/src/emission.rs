//! Two-time emission correlations and time-resolved spectra.
//!
//! `g1(t, τ) = tr[σ₊ M(τ)]` with `M(0) = σ₋ρ(t)` pushed forward under the
//! same Liouvillian as ρ (quantum regression). [`Propagator::advance`]
//! integrates numerically inside the pulse window and switches to the exact
//! free evolution outside it, so τ can run out to nanoseconds at no cost.
//!
//! The spectrogram kernel is oriented so that a free emitter line sits at
//! zero on the frequency axis (offsets are measured from ω₀):
//! `S(ν, t) = γ · Re ∫₀^τmax e^{i(ν + Δ₀)τ} g1(t, τ) a(τ) dτ`, evaluated as a
//! trapezoid on a uniform τ grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::propagator::{Propagator, Tolerances};
use crate::pulseshape::SampledEnvelope;
use crate::quantum::{check_state, DensityMatrix, EmitterParams, Operator, STATE_TOLERANCE};
use crate::{Error, Result, C64};

/// Relative residual above which a Lorentzian fit is flagged as the wrong
/// model.
pub const FIT_MISMATCH_THRESHOLD: f64 = 1e-2;

/// Onset threshold as a fraction of the final resonant intensity.
pub const ONSET_FRACTION: f64 = 0.1;

/// Decay lengths covered by the default τ truncation.
pub const DEFAULT_TAU_DECAYS: f64 = 10.0;

/// Optional window on the correlation before the transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Apodization {
    #[default]
    None,
    /// Kernel multiplied by `exp(−τ²/2w²)`.
    Gaussian { width: f64 },
}

impl Apodization {
    fn weight(&self, tau: f64) -> f64 {
        match *self {
            Apodization::None => 1.0,
            Apodization::Gaussian { width } => (-0.5 * (tau / width).powi(2)).exp(),
        }
    }

    /// Angular FWHM of the Gaussian the window convolves the line with.
    pub fn resolution_fwhm(&self) -> Option<f64> {
        match *self {
            Apodization::None => None,
            Apodization::Gaussian { width } => Some(2.0 * (2.0 * std::f64::consts::LN_2).sqrt() / width),
        }
    }
}

/// Default τ truncation `10 / (γ/2 + γ_ph)`.
pub fn default_tau_max(params: &EmitterParams) -> Option<f64> {
    let rate = params.coherence_decay_rate();
    (rate > 0.0).then(|| DEFAULT_TAU_DECAYS / rate)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramMeta {
    pub tau_max: f64,
    /// Trapezoid step near τ = 0.
    pub tau_step: f64,
    pub apodization: Apodization,
    /// Extra Gaussian broadening (angular FWHM) from the apodization.
    pub resolution_fwhm: Option<f64>,
    /// Largest raw value before normalization.
    pub raw_max: f64,
    /// Most negative normalized value before clipping.
    pub min_normalized: f64,
    pub clipped: usize,
}

/// `values[i][j]` is the intensity at `t_grid[i]`, `omega_grid[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    /// Angular frequency offset from ω₀, rad/s.
    pub omega_grid: Vec<f64>,
    /// Emission start times, s.
    pub t_grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub meta: SpectrogramMeta,
}

impl Spectrogram {
    /// Index of the frequency sample closest to ω₀.
    pub fn resonance_index(&self) -> usize {
        nearest(&self.omega_grid, 0.0)
    }

    /// Intensity along `t` at the frequency sample closest to ω₀.
    pub fn resonant_slice(&self) -> Vec<f64> {
        let j = self.resonance_index();
        self.values.iter().map(|row| row[j]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    /// rad/s.
    pub center: f64,
    /// Angular FWHM, rad/s.
    pub fwhm: f64,
    pub amplitude: f64,
    /// ‖residual‖ / ‖data‖.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl LorentzianFit {
    pub fn model(&self, omega: f64) -> f64 {
        lorentzian(self.amplitude, self.center, self.fwhm, omega)
    }

    pub fn model_mismatch(&self) -> bool {
        self.residual_norm > FIT_MISMATCH_THRESHOLD
    }
}

fn lorentzian(a: f64, c: f64, w: f64, x: f64) -> f64 {
    let hw2 = 0.25 * w * w;
    a * hw2 / ((x - c).powi(2) + hw2)
}

fn nearest(grid: &[f64], x: f64) -> usize {
    grid.iter().enumerate().min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs())).map_or(0, |(i, _)| i)
}

/// ρ at time `t`, starting from `rho0` at the first envelope sample.
pub fn state_at(prop: &Propagator, rho0: &DensityMatrix, t: f64) -> Result<Operator> {
    let (start, end) = prop.grid_span();
    if !(t >= start && t <= end) {
        return Err(Error::OutsideWindow { t, start, end });
    }
    check_state(rho0.as_operator(), STATE_TOLERANCE)?;
    let (op, _) = prop.advance(*rho0.as_operator(), start, t)?;
    check_state(&op, prop.tolerances().invariant_slack())
        .map_err(|e| Error::InvariantViolation { t, what: e.to_string() })?;
    Ok(op)
}

fn check_tau_grid(tau_grid: &[f64]) -> Result<()> {
    let Some(&first) = tau_grid.first() else {
        return Err(Error::InvalidGrid("empty tau grid".into()));
    };
    if first != 0.0 {
        return Err(Error::InvalidGrid(format!("tau grid must start at 0, got {first:e}")));
    }
    if tau_grid.len() > 1 {
        let step = tau_grid[1];
        if !(step > 0.0) {
            return Err(Error::InvalidGrid("tau grid must increase".into()));
        }
        for (k, &tau) in tau_grid.iter().enumerate() {
            if (tau - k as f64 * step).abs() > 1e-9 * step.max(tau) {
                return Err(Error::InvalidGrid(format!("tau grid not uniform at index {k}")));
            }
        }
    }
    Ok(())
}

/// First-order correlation `⟨σ₊(t+τ)σ₋(t)⟩` on a uniform `tau_grid`
/// starting at zero.
pub fn g1(
    envelope: &SampledEnvelope,
    params: &EmitterParams,
    rho0: &DensityMatrix,
    t: f64,
    tau_grid: &[f64],
) -> Result<Vec<C64>> {
    let prop = Propagator::new(envelope, *params, Tolerances::default())?;
    g1_with(&prop, rho0, t, tau_grid)
}

/// [`g1`] with a prepared propagator.
pub fn g1_with(prop: &Propagator, rho0: &DensityMatrix, t: f64, tau_grid: &[f64]) -> Result<Vec<C64>> {
    check_tau_grid(tau_grid)?;
    let rho = state_at(prop, rho0, t)?;
    let mut m = Operator::sigma_minus().matmul(&rho);
    let mut out = Vec::with_capacity(tau_grid.len());
    out.push(m.ge);
    for w in tau_grid.windows(2) {
        m = prop.advance(m, t + w[0], t + w[1])?.0;
        out.push(m.ge);
    }
    Ok(out)
}

/// `e^z − 1` without cancellation for small |z|.
fn cexpm1(z: C64) -> C64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    C64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

/// `Σ_{j=0}^{n} z^j` for `z = e^{q}`.
fn geometric(q: C64, n: usize) -> C64 {
    let denom = -cexpm1(q);
    if denom.norm() < 1e-300 {
        return C64::new((n + 1) as f64, 0.0);
    }
    -cexpm1(q * (n + 1) as f64) / denom
}

/// Time-resolved spectrum with the default integration tolerances.
#[allow(clippy::too_many_arguments)]
pub fn spectrogram(
    envelope: &SampledEnvelope,
    params: &EmitterParams,
    rho0: &DensityMatrix,
    omega_grid: &[f64],
    t_grid: &[f64],
    tau_max: f64,
    apodization: Apodization,
) -> Result<Spectrogram> {
    let prop = Propagator::new(envelope, *params, Tolerances::default())?;
    spectrogram_with(&prop, rho0, omega_grid, t_grid, tau_max, apodization)
}

/// [`spectrogram`] with a prepared propagator.
pub fn spectrogram_with(
    prop: &Propagator,
    rho0: &DensityMatrix,
    omega_grid: &[f64],
    t_grid: &[f64],
    tau_max: f64,
    apodization: Apodization,
) -> Result<Spectrogram> {
    let params = *prop.params();
    if omega_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::InvalidGrid("empty frequency or time grid".into()));
    }
    if omega_grid.iter().chain(t_grid).any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid("non-finite grid value".into()));
    }
    if let Apodization::Gaussian { width } = apodization {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidGrid(format!("apodization width must be positive, got {width:e}")));
        }
    }
    let decay = params.coherence_decay_rate();
    if apodization == Apodization::None {
        let required = if decay > 0.0 { DEFAULT_TAU_DECAYS / decay } else { f64::INFINITY };
        if !(tau_max >= required * (1.0 - 1e-12)) {
            return Err(Error::TauMaxTooSmall { tau_max, required });
        }
    } else if !(tau_max > 0.0 && tau_max.is_finite()) {
        return Err(Error::TauMaxTooSmall { tau_max, required: 0.0 });
    }

    let h = prop.grid_step();
    let n_total = (tau_max / h).round().max(1.0) as usize;
    let rows: Vec<Result<Vec<f64>>> = t_grid
        .par_iter()
        .map(|&t| spectrum_row(prop, rho0, omega_grid, t, h, n_total, apodization))
        .collect();
    let mut raw = Vec::with_capacity(rows.len());
    for r in rows {
        raw.push(r?);
    }

    let raw_max = raw.iter().flatten().fold(0.0_f64, |m, &v| m.max(v));
    let scale = if raw_max > 0.0 { 1.0 / raw_max } else { 0.0 };
    let mut min_normalized = 0.0_f64;
    let mut clipped = 0;
    let values: Vec<Vec<f64>> = raw
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|v| {
                    let x = v * scale;
                    if x < 0.0 {
                        min_normalized = min_normalized.min(x);
                        clipped += 1;
                        0.0
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect();
    if min_normalized < -1e-9 {
        log::warn!(
            "spectrogram: clipped {clipped} negative values, most negative {min_normalized:.3e} of max"
        );
    } else if clipped > 0 {
        log::debug!("spectrogram: clipped {clipped} round-off negatives");
    }
    Ok(Spectrogram {
        omega_grid: omega_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        values,
        meta: SpectrogramMeta {
            tau_max: n_total as f64 * h,
            tau_step: h,
            apodization,
            resolution_fwhm: apodization.resolution_fwhm(),
            raw_max,
            min_normalized,
            clipped,
        },
    })
}

/// One emission time: numeric g1 until the pulse window closes, closed-form
/// free decay afterwards.
fn spectrum_row(
    prop: &Propagator,
    rho0: &DensityMatrix,
    omega_grid: &[f64],
    t: f64,
    h: f64,
    n_total: usize,
    apod: Apodization,
) -> Result<Vec<f64>> {
    let params = *prop.params();
    let rho = state_at(prop, rho0, t)?;
    let m0 = Operator::sigma_minus().matmul(&rho);
    let window_end = prop.window_span().map_or(t, |(_, we)| we);
    let n_num = if window_end > t { (((window_end - t) / h).ceil() as usize).min(n_total) } else { 0 };

    // Numeric part: samples k = 0..=n_num.
    let mut g = Vec::with_capacity(n_num + 1);
    let mut m = m0;
    g.push(m.ge);
    for k in 0..n_num {
        m = prop.advance(m, t + k as f64 * h, t + (k + 1) as f64 * h)?.0;
        g.push(m.ge);
    }
    let g_b = g[n_num];
    let tau_b = n_num as f64 * h;
    let tail_len = n_total - n_num;
    let free = C64::new(-params.coherence_decay_rate(), -params.detuning0);
    let weight = |k: usize| if k == 0 || k == n_total { 0.5 } else { 1.0 };

    // Apodized tails are summed explicitly on a coarser step where the
    // integrand is smooth; they die off within a few window widths.
    let tail_plan = match apod {
        Apodization::None => None,
        Apodization::Gaussian { width } => {
            let nu_max = omega_grid.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
            let decay = params.coherence_decay_rate();
            // ≤ 0.02 rad of kernel phase or decay per coarse step.
            let mut coarse = width / 50.0;
            if decay > 0.0 {
                coarse = coarse.min(0.02 / decay);
            }
            if nu_max > 0.0 {
                coarse = coarse.min(0.02 / nu_max);
            }
            let stride = ((coarse / h).floor() as usize).max(1);
            let reach = ((12.0 * width / h).ceil() as usize).min(tail_len);
            Some((stride, reach))
        }
    };

    let mut row = Vec::with_capacity(omega_grid.len());
    for &nu in omega_grid {
        let rot = nu + params.detuning0;
        let mut acc = C64::new(0.0, 0.0);
        for (k, gk) in g.iter().enumerate().take(n_num) {
            let tau = k as f64 * h;
            let phase = C64::new(0.0, rot * tau).exp();
            acc += phase * gk * (weight(k) * apod.weight(tau));
        }
        let f_b = C64::new(0.0, rot * tau_b).exp() * g_b;
        match tail_plan {
            None => {
                if tail_len == 0 {
                    acc += f_b * weight(n_num);
                } else {
                    // Σ_{j=0}^{J} w_j f_b z^j with z = e^{(iν − Γ)h}.
                    let q = (free + C64::new(0.0, rot)) * h;
                    let mut s = geometric(q, tail_len);
                    if n_num == 0 {
                        s -= 0.5;
                    }
                    s -= 0.5 * (q * tail_len as f64).exp();
                    acc += f_b * s;
                }
            }
            Some((stride, reach)) => {
                if reach == 0 {
                    acc += f_b * weight(n_num);
                } else {
                    // Interval trapezoid on nodes 0, stride, 2·stride, …, reach
                    // (units of h); the junction sample already carries 1/2.
                    let q = free + C64::new(0.0, rot);
                    let node = |j: usize| (q * (j as f64 * h)).exp() * apod.weight(tau_b + j as f64 * h);
                    let mut sum = C64::new(0.0, 0.0);
                    let mut j0 = 0;
                    let mut f0 = node(0);
                    while j0 < reach {
                        let j1 = (j0 + stride).min(reach);
                        let f1 = node(j1);
                        sum += (f0 + f1) * (0.5 * (j1 - j0) as f64);
                        j0 = j1;
                        f0 = f1;
                    }
                    if n_num > 0 {
                        sum += 0.5 * apod.weight(tau_b);
                    }
                    acc += f_b * sum;
                }
            }
        }
        row.push(params.gamma * acc.re * h);
    }
    Ok(row)
}

/// First emission time at which the resonant slice exceeds
/// [`ONSET_FRACTION`] of its value at the last time sample.
pub fn emission_onset(spec: &Spectrogram) -> Result<f64> {
    let slice = spec.resonant_slice();
    let Some(&last) = slice.last() else {
        return Err(Error::NoOnset);
    };
    if !(last > 0.0) {
        return Err(Error::NoOnset);
    }
    let threshold = ONSET_FRACTION * last;
    slice.iter().position(|&v| v > threshold).map(|i| spec.t_grid[i]).ok_or(Error::NoOnset)
}

/// Levenberg–Marquardt fit of `A (Γ/2)² / ((ω − ω_c)² + (Γ/2)²)`.
pub fn fit_lorentzian(omega: &[f64], values: &[f64]) -> Result<LorentzianFit> {
    if omega.len() != values.len() {
        return Err(Error::FitFailed("frequency and value lengths differ".into()));
    }
    if omega.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::FitFailed("non-finite input".into()));
    }
    let (ip, &peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::FitFailed("empty slice".into()))?;
    if !(peak > 0.0) {
        return Err(Error::FitFailed("no positive peak".into()));
    }
    let half = 0.5 * peak;
    let above = values.iter().filter(|&&v| v >= half).count();
    if above < 10 {
        return Err(Error::FitFailed(format!("only {above} samples above half maximum (need 10)")));
    }
    // Half-maximum crossings by linear interpolation.
    let cross = |range: Box<dyn Iterator<Item = usize>>| -> Option<f64> {
        let mut prev = ip;
        for i in range {
            if values[i] < half {
                let (x0, y0, x1, y1) = (omega[prev], values[prev], omega[i], values[i]);
                return Some(x0 + (half - y0) * (x1 - x0) / (y1 - y0));
            }
            prev = i;
        }
        None
    };
    let lo = cross(Box::new((0..ip).rev()));
    let hi = cross(Box::new(ip + 1..values.len()));
    let (c0, w0) = match (lo, hi) {
        (Some(a), Some(b)) => (0.5 * (a + b), b - a),
        (Some(a), None) => (omega[ip], 2.0 * (omega[ip] - a)),
        (None, Some(b)) => (omega[ip], 2.0 * (b - omega[ip])),
        (None, None) => return Err(Error::FitFailed("peak has no half-maximum crossing".into())),
    };
    if !(w0 > 0.0) {
        return Err(Error::FitFailed("degenerate initial width".into()));
    }

    // Dimensionless coordinates keep the normal equations well scaled.
    let x: Vec<f64> = omega.iter().map(|&w| (w - c0) / w0).collect();
    let y: Vec<f64> = values.iter().map(|&v| v / peak).collect();
    let data_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();

    let residuals = |p: &[f64; 3]| -> Vec<f64> {
        x.iter().zip(&y).map(|(&xi, &yi)| lorentzian(p[0], p[1], p[2], xi) - yi).collect()
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut p = [1.0, 0.0, 1.0];
    let mut r = residuals(&p);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    const MAX_ITER: usize = 500;
    let mut converged = false;
    while iterations < MAX_ITER {
        iterations += 1;
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&xi, &ri) in x.iter().zip(&r) {
            let (a, ce, w) = (p[0], p[1], p[2]);
            let hw2 = 0.25 * w * w;
            let d = (xi - ce).powi(2) + hw2;
            let f = hw2 / d;
            let j = [f, a * hw2 * 2.0 * (xi - ce) / (d * d), a * 0.5 * w * (xi - ce).powi(2) / (d * d)];
            for m in 0..3 {
                jtr[m] += j[m] * ri;
                for n in 0..3 {
                    jtj[m][n] += j[m] * j[n];
                }
            }
        }
        let mut improved = false;
        for _ in 0..50 {
            let mut a = jtj;
            for (m, row) in a.iter_mut().enumerate() {
                row[m] += lambda * jtj[m][m].max(1e-300);
            }
            let Some(step) = solve3(a, [-jtr[0], -jtr[1], -jtr[2]]) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            if trial[2] <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            let rt = residuals(&trial);
            let ct = cost(&rt);
            if ct <= c {
                let small = step.iter().zip(&trial).all(|(s, t)| s.abs() <= 1e-14 * t.abs().max(1e-3));
                let flat = c - ct <= 1e-30 + 1e-15 * c;
                p = trial;
                r = rt;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if small || flat {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !improved {
            // No downhill step at any damping means we sit at a minimum.
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailed(format!("no convergence after {MAX_ITER} iterations")));
    }
    let fit = LorentzianFit {
        center: c0 + p[1] * w0,
        fwhm: p[2].abs() * w0,
        amplitude: p[0] * peak,
        residual_norm: c.sqrt() / data_norm,
        iterations,
    };
    if !(fit.fwhm > 0.0 && fit.fwhm.is_finite() && fit.center.is_finite()) {
        return Err(Error::FitFailed("fit produced a degenerate line".into()));
    }
    Ok(fit)
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][k] = b[row];
        }
        *o = det(&m) / d;
    }
    Some(out)
}
