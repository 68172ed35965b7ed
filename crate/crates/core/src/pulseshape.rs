//! Pulse spectra and time-domain Rabi envelopes.
//!
//! Fourier convention: `Ω(t) = (1/2π) ∫ Ω̃(ω) e^{−i(ω−ω_L)t} dω`, so that a
//! field `E₀(t) cos(ω_L t + φ(t))` has envelope `|Ω| e^{−iφ}` and a positive
//! spectral chirp `α` produces an up-sweep of the instantaneous frequency
//! `ω_L + φ̇`. The instantaneous detuning is `Δ(t) = (ω₀ − ω_L) − φ̇(t)`.

use std::f64::consts::{LN_2, PI};

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Envelope edges must be below this fraction of the peak magnitude.
pub const WINDOW_FLOOR: f64 = 1e-8;
/// Phase-derived quantities are only reported above this fraction of the peak.
pub const PHASE_FLOOR: f64 = 1e-6;

/// Spectral intensity FWHM (angular) of a transform-limited Gaussian with
/// temporal intensity FWHM `tau0`.
pub fn gamma0(tau0: f64) -> f64 {
    4.0 * LN_2 / tau0
}

/// Gaussian amplitude width T with `|Ω_TL(t)| ∝ exp(−t²/2T²)`.
pub fn gaussian_width(tau0: f64) -> f64 {
    tau0 / (4.0 * LN_2).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Rabi,
    Arp,
    Narp,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Rabi => "rabi",
            Protocol::Arp => "arp",
            Protocol::Narp => "narp",
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Declarative pulse description.
///
/// `theta` is the area of the underlying transform-limited Gaussian. The
/// chirp and notch masks are applied afterwards and change the realized
/// temporal area.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Pulse area, rad.
    pub theta: f64,
    /// Transform-limited temporal intensity FWHM, s.
    pub tau0: f64,
    /// Spectral chirp coefficient, s².
    pub alpha: f64,
    /// Gaussian notch standard width δ, rad/s. Zero disables the notch.
    pub delta_notch: f64,
    /// ω_L − ω₀, rad/s.
    pub carrier_offset: f64,
}

impl PulseSpec {
    pub fn transform_limited(theta: f64, tau0: f64) -> Self {
        Self { theta, tau0, alpha: 0.0, delta_notch: 0.0, carrier_offset: 0.0 }
    }

    pub fn with_chirp(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn with_notch(self, delta_notch: f64) -> Self {
        Self { delta_notch, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.theta, self.tau0, self.alpha, self.delta_notch, self.carrier_offset];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPulse("non-finite field".into()));
        }
        if self.tau0 <= 0.0 {
            return Err(Error::InvalidPulse(format!("tau0 must be > 0, got {}", self.tau0)));
        }
        if self.theta < 0.0 {
            return Err(Error::InvalidPulse(format!("theta must be >= 0, got {}", self.theta)));
        }
        if self.delta_notch < 0.0 {
            return Err(Error::InvalidPulse(format!("delta_notch must be >= 0, got {}", self.delta_notch)));
        }
        Ok(())
    }

    pub fn protocol(&self) -> Protocol {
        if self.delta_notch > 0.0 {
            Protocol::Narp
        } else if self.alpha != 0.0 {
            Protocol::Arp
        } else {
            Protocol::Rabi
        }
    }

    pub fn gamma0(&self) -> f64 {
        gamma0(self.tau0)
    }

    /// α / τ0².
    pub fn alpha_norm(&self) -> f64 {
        self.alpha / (self.tau0 * self.tau0)
    }

    /// δ / Γ0.
    pub fn delta_norm(&self) -> f64 {
        self.delta_notch / self.gamma0()
    }

    /// Intensity FWHM of the chirped, un-notched pulse.
    pub fn chirped_duration(&self) -> f64 {
        let t2 = gaussian_width(self.tau0).powi(2);
        self.tau0 * (1.0 + (self.alpha / t2).powi(2)).sqrt()
    }
}

/// Frequency-grid settings for spectrum construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_samples: usize,
    /// Grid span in units of Γ0.
    pub span_factor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_samples: 1 << 14, span_factor: 16.0 }
    }
}

/// Complex pulse spectrum on a uniform grid centred on ω_L.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralAmplitude {
    /// ω − ω_L, rad/s. Index `n/2` is exactly zero.
    pub omega_grid: Vec<f64>,
    /// Ω̃(ω), rad/s per rad/s.
    pub values: Vec<C64>,
    pub d_omega: f64,
    pub carrier_offset: f64,
    /// Intensity FWHM of the chirped, un-notched pulse; carried into the
    /// envelope for integration-window padding.
    pub nominal_duration: f64,
}

impl SpectralAmplitude {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the grid point nearest ω₀.
    pub fn resonance_index(&self) -> usize {
        let target = -self.carrier_offset;
        let k = (target / self.d_omega).round() as isize + (self.len() / 2) as isize;
        k.clamp(0, self.len() as isize - 1) as usize
    }

    pub fn peak_magnitude(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// (1/2π) Σ |Ω̃|² Δω.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.d_omega / (2.0 * PI)
    }
}

/// Complex Rabi frequency sampled on a uniform time grid centred on the
/// pulse peak.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledEnvelope {
    pub t_grid: Vec<f64>,
    pub omega_values: Vec<C64>,
    pub carrier_offset: f64,
    pub dt: f64,
    pub nominal_duration: f64,
}

impl SampledEnvelope {
    pub fn len(&self) -> usize {
        self.omega_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_values.is_empty()
    }

    pub fn peak_magnitude(&self) -> f64 {
        self.omega_values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// ∫|Ω(t)| dt (trapezoid).
    pub fn area(&self) -> f64 {
        trapezoid(self.omega_values.iter().map(|z| z.norm()), self.dt)
    }

    /// ∫Ω(t) dt (rectangle sum, exact DFT counterpart of Ω̃ at ω_L).
    pub fn complex_integral(&self) -> C64 {
        self.omega_values.iter().sum::<C64>() * self.dt
    }

    /// Σ |Ω|² dt.
    pub fn energy(&self) -> f64 {
        self.omega_values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dt
    }

    /// Intensity FWHM. The half-maximum crossings of the outermost samples
    /// above half maximum are located on a quadratic through ln|Ω|² at three
    /// neighbouring samples (exact for Gaussian pulses).
    pub fn intensity_fwhm(&self) -> f64 {
        let inten: Vec<f64> = self.omega_values.iter().map(|z| z.norm_sqr()).collect();
        let n = inten.len();
        let peak = inten.iter().cloned().fold(0.0, f64::max);
        if !(peak > 0.0) || n < 3 {
            return 0.0;
        }
        let target = (0.5 * peak).ln();
        let first = inten.iter().position(|&v| v >= 0.5 * peak).unwrap_or(0);
        let last = inten.iter().rposition(|&v| v >= 0.5 * peak).unwrap_or(0);
        // Crossing inside [t_a, t_a+1], using samples c-1, c, c+1.
        let cross = |a: usize, c: usize| {
            let c = c.clamp(1, n - 2);
            let y = |k: usize| inten[k].max(f64::MIN_POSITIVE).ln();
            let (y0, y1, y2) = (y(c - 1), y(c), y(c + 1));
            let (b1, b2) = (0.5 * (y2 - y0), 0.5 * (y2 - 2.0 * y1 + y0));
            let q = |x: f64| y1 + b1 * x + b2 * x * x - target;
            // x in units of dt relative to sample c.
            let (mut lo, mut hi) = (a as f64 - c as f64, a as f64 + 1.0 - c as f64);
            let (mut qlo, qhi) = (q(lo), q(hi));
            if qlo * qhi > 0.0 {
                let (ya, yb) = (inten[a], inten[a + 1]);
                return self.t_grid[a] + (0.5 * peak - ya) * self.dt / (yb - ya);
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let qm = q(mid);
                if qm * qlo > 0.0 {
                    lo = mid;
                    qlo = qm;
                } else {
                    hi = mid;
                }
            }
            self.t_grid[c] + 0.5 * (lo + hi) * self.dt
        };
        let left = if first > 0 { cross(first - 1, first) } else { self.t_grid[0] };
        let right = if last + 1 < n { cross(last, last) } else { self.t_grid[last] };
        right - left
    }

    /// Forward DFT back to the spectral grid, same normalization as
    /// [`build_spectrum`].
    pub fn spectrum(&self) -> SpectralAmplitude {
        let n = self.len();
        let d_omega = 2.0 * PI / (n as f64 * self.dt);
        let mut buf: Vec<C64> =
            self.omega_values.iter().enumerate().map(|(j, &z)| if j % 2 == 0 { z } else { -z }).collect();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        let values = buf
            .into_iter()
            .enumerate()
            .map(|(k, z)| if k % 2 == 0 { z * self.dt } else { -z * self.dt })
            .collect();
        SpectralAmplitude {
            omega_grid: centered_grid(n, d_omega),
            values,
            d_omega,
            carrier_offset: self.carrier_offset,
            nominal_duration: self.nominal_duration,
        }
    }
}

fn trapezoid(values: impl Iterator<Item = f64>, dx: f64) -> f64 {
    let mut sum = 0.0;
    let mut first = None;
    let mut last = 0.0;
    for v in values {
        if first.is_none() {
            first = Some(v);
        }
        sum += v;
        last = v;
    }
    (sum - 0.5 * (first.unwrap_or(0.0) + last)) * dx
}

fn centered_grid(n: usize, step: f64) -> Vec<f64> {
    (0..n).map(|k| (k as f64 - (n / 2) as f64) * step).collect()
}

/// Notch amplitude mask `1 − exp(−(ω−ω₀)²/2δ²)` at ω − ω_L = `offset`.
fn notch_mask(offset: f64, spec: &PulseSpec) -> f64 {
    if spec.delta_notch == 0.0 {
        return 1.0;
    }
    let x = offset + spec.carrier_offset;
    // 1 − e^{−u} via exp_m1 keeps the notch floor exact near ω₀.
    -(-(x * x) / (2.0 * spec.delta_notch * spec.delta_notch)).exp_m1()
}

/// Gaussian spectrum × notch mask × quadratic phase.
pub fn build_spectrum(spec: &PulseSpec, grid: GridSpec) -> Result<SpectralAmplitude> {
    spec.validate()?;
    let n = grid.n_samples;
    if n < 1024 || !n.is_power_of_two() {
        return Err(Error::BadSampleCount(n));
    }
    if !(grid.span_factor >= 8.0) || !grid.span_factor.is_finite() {
        return Err(Error::SpanTooSmall(format!("span_factor must be >= 8, got {}", grid.span_factor)));
    }
    let g0 = spec.gamma0();
    let span = grid.span_factor * g0;
    let d_omega = span / n as f64;
    let width = gaussian_width(spec.tau0);
    // |Ω̃|² ∝ exp(−T²ω²); fraction outside ±W is erfc(TW) ≤ e^{−x²}/(x√π).
    let x = width * 0.5 * span;
    let outside = (-x * x).exp() / (x * PI.sqrt());
    if outside > 1e-8 {
        return Err(Error::SpanTooSmall(format!(
            "grid retains less than 1 - 1e-8 of the spectral energy (tail bound {outside:.2e})"
        )));
    }

    let omega_grid = centered_grid(n, d_omega);
    let values = omega_grid
        .iter()
        .map(|&w| {
            let gauss = spec.theta * (-0.5 * width * width * w * w).exp();
            let amp = gauss * notch_mask(w, spec);
            let phase = 0.5 * spec.alpha * w * w;
            C64::from_polar(amp, phase)
        })
        .collect();
    Ok(SpectralAmplitude {
        omega_grid,
        values,
        d_omega,
        carrier_offset: spec.carrier_offset,
        nominal_duration: spec.chirped_duration(),
    })
}

/// Inverse DFT with continuous-transform scaling; the grid centre (index
/// `n/2`) is t = 0.
pub fn synthesize_envelope(spectrum: &SpectralAmplitude) -> Result<SampledEnvelope> {
    let n = spectrum.len();
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::BadSampleCount(n));
    }
    let dt = 2.0 * PI / (n as f64 * spectrum.d_omega);
    // With centred grids on both sides, e^{−iω_k t_j} = (−1)^{j+k} e^{−2πi kj/n}.
    let mut buf: Vec<C64> =
        spectrum.values.iter().enumerate().map(|(k, &z)| if k % 2 == 0 { z } else { -z }).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = spectrum.d_omega / (2.0 * PI);
    let omega_values: Vec<C64> =
        buf.into_iter().enumerate().map(|(j, z)| if j % 2 == 0 { z * scale } else { -z * scale }).collect();

    let env = SampledEnvelope {
        t_grid: centered_grid(n, dt),
        omega_values,
        carrier_offset: spectrum.carrier_offset,
        dt,
        nominal_duration: spectrum.nominal_duration,
    };
    let peak = env.peak_magnitude();
    if peak > 0.0 {
        let edge = env.omega_values[0].norm().max(env.omega_values[n - 1].norm()) / peak;
        if edge >= WINDOW_FLOOR {
            return Err(Error::WindowTooShort { edge });
        }
    }
    Ok(env)
}

/// [`build_spectrum`] followed by [`synthesize_envelope`].
pub fn pulse_envelope(spec: &PulseSpec, grid: GridSpec) -> Result<SampledEnvelope> {
    synthesize_envelope(&build_spectrum(spec, grid)?)
}

/// Closed-form chirped Gaussian for un-notched pulses:
/// `Ω(t) = Θ / √(2π(T² − iα)) · exp(−t² / 2(T² − iα))`.
pub fn analytic_chirped_envelope(spec: &PulseSpec, t: f64) -> Result<C64> {
    spec.validate()?;
    if spec.delta_notch != 0.0 {
        return Err(Error::InvalidPulse("closed form only exists for pulses without a notch".into()));
    }
    let t2 = gaussian_width(spec.tau0).powi(2);
    let q = C64::new(t2, -spec.alpha);
    let prefactor = spec.theta / (2.0 * PI * q).sqrt();
    Ok(prefactor * (-(t * t) / (2.0 * q)).exp())
}

/// Unwraps a phase series in place, removing 2π jumps between consecutive
/// entries that are `Some`.
pub fn unwrap_phase(phase: &mut [Option<f64>]) {
    let mut prev: Option<f64> = None;
    for v in phase.iter_mut().flatten() {
        if let Some(q) = prev {
            let mut d = *v - q;
            d -= 2.0 * PI * (d / (2.0 * PI)).round();
            *v = q + d;
        }
        prev = Some(*v);
    }
}

/// d(arg Ω)/dt by central differences of the unwrapped phase, restricted to
/// samples above [`PHASE_FLOOR`] × peak with both neighbours also above it.
pub fn phase_rate(envelope: &SampledEnvelope) -> Result<Vec<Option<f64>>> {
    let peak = envelope.peak_magnitude();
    let floor = PHASE_FLOOR * peak;
    let mut phase: Vec<Option<f64>> =
        envelope.omega_values.iter().map(|z| (peak > 0.0 && z.norm() > floor).then(|| z.arg())).collect();
    if phase.iter().all(Option::is_none) {
        return Err(Error::EnvelopeBelowFloor);
    }
    unwrap_phase(&mut phase);
    let n = phase.len();
    let mut rate = vec![None; n];
    for j in 1..n.saturating_sub(1) {
        if let (Some(a), Some(_), Some(b)) = (phase[j - 1], phase[j], phase[j + 1]) {
            rate[j] = Some((b - a) / (2.0 * envelope.dt));
        }
    }
    Ok(rate)
}

/// Δ(t) = (ω₀ − ω_L) − φ̇(t) with φ = −arg Ω; `None` below the floor.
pub fn instantaneous_detuning(envelope: &SampledEnvelope) -> Result<Vec<Option<f64>>> {
    let static_detuning = -envelope.carrier_offset;
    Ok(phase_rate(envelope)?.into_iter().map(|r| r.map(|r| static_detuning + r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU0: f64 = 100e-15;

    fn small_grid() -> GridSpec {
        GridSpec { n_samples: 1 << 12, span_factor: 16.0 }
    }

    #[test]
    fn rejects_bad_sample_counts() {
        let spec = PulseSpec::transform_limited(PI, TAU0);
        for n in [512, 1000, 3000] {
            let g = GridSpec { n_samples: n, span_factor: 16.0 };
            assert_eq!(build_spectrum(&spec, g), Err(Error::BadSampleCount(n)));
        }
    }

    #[test]
    fn rejects_small_span() {
        let spec = PulseSpec::transform_limited(PI, TAU0);
        let g = GridSpec { n_samples: 1 << 12, span_factor: 4.0 };
        assert!(matches!(build_spectrum(&spec, g), Err(Error::SpanTooSmall(_))));
    }

    #[test]
    fn rejects_invalid_specs() {
        let g = small_grid();
        assert!(build_spectrum(&PulseSpec::transform_limited(PI, 0.0), g).is_err());
        assert!(build_spectrum(&PulseSpec::transform_limited(-1.0, TAU0), g).is_err());
        let neg_notch = PulseSpec::transform_limited(PI, TAU0).with_notch(-1.0);
        assert!(build_spectrum(&neg_notch, g).is_err());
    }

    #[test]
    fn protocol_classification() {
        let base = PulseSpec::transform_limited(PI, TAU0);
        assert_eq!(base.protocol(), Protocol::Rabi);
        assert_eq!(base.with_chirp(1e-27).protocol(), Protocol::Arp);
        assert_eq!(base.with_chirp(1e-27).with_notch(1e12).protocol(), Protocol::Narp);
        assert_eq!(base.with_notch(1e12).protocol(), Protocol::Narp);
    }

    #[test]
    fn tl_spectrum_is_real_gaussian_peaked_at_carrier() {
        let s = build_spectrum(&PulseSpec::transform_limited(PI, TAU0), small_grid()).unwrap();
        let mid = s.len() / 2;
        assert_eq!(s.omega_grid[mid], 0.0);
        assert!(s.values.iter().all(|z| z.im == 0.0));
        assert_eq!(s.values[mid], C64::new(PI, 0.0));
        let peak_idx = (0..s.len()).max_by(|&a, &b| s.values[a].re.total_cmp(&s.values[b].re));
        assert_eq!(peak_idx, Some(mid));
    }

    #[test]
    fn notch_is_exactly_zero_at_resonance() {
        let spec = PulseSpec::transform_limited(5.0 * PI, TAU0)
            .with_chirp(2.4 * TAU0 * TAU0)
            .with_notch(0.25 * gamma0(TAU0));
        let s = build_spectrum(&spec, small_grid()).unwrap();
        assert_eq!(s.values[s.resonance_index()], C64::new(0.0, 0.0));
    }

    #[test]
    fn chirp_preserves_spectral_magnitude() {
        let tl = PulseSpec::transform_limited(5.0 * PI, TAU0);
        let chirped = tl.with_chirp(0.8 * TAU0 * TAU0);
        let a = build_spectrum(&tl, small_grid()).unwrap();
        let b = build_spectrum(&chirped, small_grid()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x.norm() - y.norm()).abs() <= 1e-15 * x.norm().max(1.0));
        }
    }

    #[test]
    fn unwrap_removes_jumps() {
        let mut p = vec![Some(3.0), Some(-3.0), None, Some(-2.9), Some(3.1)];
        unwrap_phase(&mut p);
        let v: Vec<f64> = p.iter().flatten().cloned().collect();
        for w in v.windows(2) {
            assert!((w[1] - w[0]).abs() < PI);
        }
    }

    #[test]
    fn analytic_requires_no_notch() {
        let spec = PulseSpec::transform_limited(PI, TAU0).with_notch(1e12);
        assert!(analytic_chirped_envelope(&spec, 0.0).is_err());
    }

    #[test]
    fn zero_envelope_has_no_detuning() {
        let env = pulse_envelope(&PulseSpec::transform_limited(0.0, TAU0), small_grid()).unwrap();
        assert_eq!(instantaneous_detuning(&env), Err(Error::EnvelopeBelowFloor));
    }

    #[test]
    fn round_trip_spectrum() {
        let spec = PulseSpec::transform_limited(3.0, TAU0).with_chirp(0.5 * TAU0 * TAU0);
        let s = build_spectrum(&spec, small_grid()).unwrap();
        let back = synthesize_envelope(&s).unwrap().spectrum();
        let peak = s.peak_magnitude();
        for (a, b) in s.values.iter().zip(&back.values) {
            assert!((a - b).norm() < 1e-12 * peak);
        }
    }
}
