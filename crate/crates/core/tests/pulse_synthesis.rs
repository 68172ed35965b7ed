use std::f64::consts::PI;

use proptest::prelude::*;
use qpulse_core::pulseshape::*;
use qpulse_core::C64;

const TAU0: f64 = 100e-15;

fn grid() -> GridSpec {
    GridSpec::default()
}

/// Energy in both domains, each by a plain Riemann sum.
fn energies(spec: &PulseSpec) -> (f64, f64) {
    let s = build_spectrum(spec, grid()).unwrap();
    let env = synthesize_envelope(&s).unwrap();
    let e_t: f64 = env.omega_values.iter().map(|z| z.norm_sqr()).sum::<f64>() * env.dt;
    let e_w: f64 = s.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * s.d_omega / (2.0 * PI);
    (e_t, e_w)
}

#[test]
fn tl_peak_and_area_by_quadrature() {
    let theta = 3.0 * PI;
    let spec = PulseSpec::transform_limited(theta, TAU0);
    // Intensity FWHM τ0 means |Ω| ∝ exp(−2 ln2 t²/τ0²); normalize to area Θ.
    let c = 2.0 * 2f64.ln() / (TAU0 * TAU0);
    let h = TAU0 / 2000.0;
    let area: f64 = (-20000..=20000).map(|k| (-c * (k as f64 * h).powi(2)).exp()).sum::<f64>() * h;
    let peak = theta / area;
    let z = analytic_chirped_envelope(&spec, 0.0).unwrap();
    assert!((z.norm() / peak - 1.0).abs() < 1e-10);
    assert!(z.im.abs() < 1e-12 * peak);

    let env = pulse_envelope(&spec, grid()).unwrap();
    assert!((env.area() / theta - 1.0).abs() < 1e-6);
    assert!((env.peak_magnitude() / peak - 1.0).abs() < 1e-6);
}

#[test]
fn tl_intensity_fwhm() {
    let env = pulse_envelope(&PulseSpec::transform_limited(PI, TAU0), grid()).unwrap();
    assert!((env.intensity_fwhm() / TAU0 - 1.0).abs() < 1e-3);
}

#[test]
fn chirped_fwhm_follows_closed_form() {
    for &a in &[0.4, 0.8, 2.4, 5.0, 10.0] {
        let spec = PulseSpec::transform_limited(PI, TAU0).with_chirp(a * TAU0 * TAU0);
        let env = pulse_envelope(&spec, grid()).unwrap();
        let want = TAU0 * (1.0 + (4.0 * 2f64.ln() * a).powi(2)).sqrt();
        assert!((env.intensity_fwhm() / want - 1.0).abs() < 5e-3, "alpha/tau0^2 = {a}");
    }
}

#[test]
fn fft_matches_closed_form_chirped_gaussian() {
    let spec = PulseSpec::transform_limited(5.0 * PI, TAU0).with_chirp(0.8 * TAU0 * TAU0);
    let env = pulse_envelope(&spec, grid()).unwrap();
    let peak = env.peak_magnitude();
    for (t, z) in env.t_grid.iter().zip(&env.omega_values) {
        let want = analytic_chirped_envelope(&spec, *t).unwrap();
        if want.norm() > 1e-3 * peak {
            assert!((z - want).norm() < 1e-4 * want.norm(), "t = {t:e}");
        }
    }
}

#[test]
fn notched_pulse_is_difference_of_two_chirped_gaussians() {
    // Θ·e^{−T²w²/2}·e^{−w²/2δ²} is the Gaussian spectrum of width
    // T'² = T² + 1/δ² at the same spectral peak, so the notched pulse is the
    // plain chirped pulse minus that one.
    let (alpha, delta) = (2.4 * TAU0 * TAU0, 0.25 * gamma0(TAU0));
    let theta = 5.0 * PI;
    let spec = PulseSpec::transform_limited(theta, TAU0).with_chirp(alpha).with_notch(delta);
    let env = pulse_envelope(&spec, grid()).unwrap();
    let t2 = TAU0 * TAU0 / (4.0 * 2f64.ln());
    let chirped = |w2: f64, t: f64| {
        let q = C64::new(w2, -alpha);
        theta / (2.0 * PI * q).sqrt() * (-(t * t) / (2.0 * q)).exp()
    };
    let peak = env.peak_magnitude();
    for (t, z) in env.t_grid.iter().zip(&env.omega_values) {
        let want = chirped(t2, *t) - chirped(t2 + 1.0 / (delta * delta), *t);
        assert!((z - want).norm() < 1e-9 * peak, "t = {t:e}");
    }
}

#[test]
fn phase_mask_keeps_complex_area() {
    let tl = pulse_envelope(&PulseSpec::transform_limited(2.0 * PI, TAU0), grid()).unwrap();
    for &a in &[0.8, 3.0] {
        let spec = PulseSpec::transform_limited(2.0 * PI, TAU0).with_chirp(a * TAU0 * TAU0);
        let env = pulse_envelope(&spec, grid()).unwrap();
        let s = build_spectrum(&spec, grid()).unwrap();
        let at_carrier = s.values[s.omega_grid.iter().position(|&w| w == 0.0).unwrap()];
        assert!((env.complex_integral() - at_carrier).norm() < 1e-9 * at_carrier.norm());
        assert!((env.complex_integral() - tl.complex_integral()).norm() < 1e-9 * tl.area());
        // |∫Ω| ≤ ∫|Ω| once the pulse is chirped.
        assert!(env.area() >= env.complex_integral().norm());
    }
}

#[test]
fn detuning_slope_of_chirped_pulse() {
    let alpha = 0.8 * TAU0 * TAU0;
    let spec = PulseSpec::transform_limited(PI, TAU0).with_chirp(alpha);
    let env = pulse_envelope(&spec, grid()).unwrap();
    let t4 = (TAU0 * TAU0 / (4.0 * 2f64.ln())).powi(2);
    let slope = -alpha / (t4 + alpha * alpha);
    let det = instantaneous_detuning(&env).unwrap();
    let mut checked = 0;
    for (t, d) in env.t_grid.iter().zip(&det) {
        if let Some(d) = d {
            if t.abs() < 2.0 * TAU0 {
                assert!((d - slope * t).abs() < 1e-4 * slope.abs() * TAU0, "t = {t:e}");
                checked += 1;
            }
        }
    }
    assert!(checked > 10);
}

#[test]
fn narp_detuning_is_not_monotone() {
    let spec = PulseSpec::transform_limited(5.0 * PI, TAU0)
        .with_chirp(2.4 * TAU0 * TAU0)
        .with_notch(0.25 * gamma0(TAU0));
    let env = pulse_envelope(&spec, grid()).unwrap();
    let det: Vec<f64> = instantaneous_detuning(&env).unwrap().into_iter().flatten().collect();
    let rising = det.windows(2).filter(|w| w[1] > w[0]).count();
    let falling = det.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(rising > 0 && falling > 0);
}

#[test]
fn huge_chirp_flattens_the_peak() {
    let mut last = f64::INFINITY;
    for &a in &[1.0, 10.0, 100.0, 1e4] {
        let spec = PulseSpec::transform_limited(PI, TAU0).with_chirp(a * TAU0 * TAU0);
        let p = analytic_chirped_envelope(&spec, 0.0).unwrap().norm();
        assert!(p < last);
        last = p;
    }
    assert!(last < 1e-2 * PulseSpec::transform_limited(PI, TAU0).theta / TAU0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_holds(theta in 0.1f64..20.0, a in -6.0f64..6.0, d in prop_oneof![Just(0.0), 0.05f64..0.5]) {
        let spec = PulseSpec::transform_limited(theta * PI, TAU0)
            .with_chirp(a * TAU0 * TAU0)
            .with_notch(d * gamma0(TAU0));
        let (e_t, e_w) = energies(&spec);
        prop_assert!((e_t / e_w - 1.0).abs() < 1e-10);
    }

    #[test]
    fn notch_survives_the_round_trip(a in -6.0f64..6.0, d in 0.01f64..0.5) {
        let spec = PulseSpec::transform_limited(5.0 * PI, TAU0)
            .with_chirp(a * TAU0 * TAU0)
            .with_notch(d * gamma0(TAU0));
        let env = pulse_envelope(&spec, grid()).unwrap();
        let back = env.spectrum();
        let peak = back.peak_magnitude();
        prop_assert!(back.values[back.resonance_index()].norm() < 1e-12 * peak);
    }
}
