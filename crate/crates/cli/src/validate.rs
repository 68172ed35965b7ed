//! The invariant suite behind the `validate` subcommand.

use std::f64::consts::PI;

use qpulse_core::propagator::{evolve, Tolerances};
use qpulse_core::pulseshape::{build_spectrum, pulse_envelope, synthesize_envelope, GridSpec, PulseSpec};
use qpulse_core::quantum::{lindblad_rhs, DensityMatrix, DriveSample, EmitterParams};
use qpulse_core::sweeps::{run_sweep, Axis, AxisName, Normalization, SweepPlan};
use qpulse_core::C64;

const TAU0: f64 = 100e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn failed(name: &'static str, e: impl std::fmt::Display) -> Check {
    check(name, false, format!("error: {e}"))
}

fn specs() -> [(&'static str, PulseSpec); 3] {
    let g0 = qpulse_core::pulseshape::gamma0(TAU0);
    [
        ("rabi", PulseSpec::transform_limited(5.0 * PI, TAU0)),
        ("arp", PulseSpec::transform_limited(5.0 * PI, TAU0).with_chirp(0.8 * TAU0 * TAU0)),
        (
            "narp",
            PulseSpec::transform_limited(5.0 * PI, TAU0).with_chirp(2.4 * TAU0 * TAU0).with_notch(0.25 * g0),
        ),
    ]
}

fn parseval() -> Check {
    let name = "parseval";
    let mut worst: f64 = 0.0;
    for (_, spec) in specs() {
        let spectrum = match build_spectrum(&spec, GridSpec::default()) {
            Ok(s) => s,
            Err(e) => return failed(name, e),
        };
        let env = match synthesize_envelope(&spectrum) {
            Ok(e) => e,
            Err(e) => return failed(name, e),
        };
        worst = worst.max((env.energy() - spectrum.energy()).abs() / spectrum.energy());
    }
    check(name, worst < 1e-10, format!("max relative energy mismatch {worst:.3e} (limit 1e-10)"))
}

fn notch_zero() -> Check {
    let name = "notch_zero";
    let spec = specs()[2].1;
    match build_spectrum(&spec, GridSpec::default()) {
        Ok(s) => {
            let r = s.values[s.resonance_index()].norm() / s.peak_magnitude();
            check(name, r < 1e-12, format!("|amplitude at resonance| / peak = {r:.3e} (limit 1e-12)"))
        }
        Err(e) => failed(name, e),
    }
}

fn open_state_hygiene() -> Check {
    let name = "trace_hermiticity_positivity";
    let params = match EmitterParams::new(0.0, 1e12, 5e11) {
        Ok(p) => p,
        Err(e) => return failed(name, e),
    };
    let tol = Tolerances::default();
    let (mut trace, mut herm, mut eig_lo, mut eig_hi) = (0.0f64, 0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for (_, spec) in specs() {
        let traj = match pulse_envelope(&spec, GridSpec::default())
            .and_then(|env| evolve(&env, &params, &DensityMatrix::ground(), tol.rtol, tol.atol))
        {
            Ok(t) => t,
            Err(e) => return failed(name, e),
        };
        for s in &traj.states {
            trace = trace.max((s.trace() - 1.0).abs());
            herm = herm.max(s.as_operator().hermiticity_defect());
            let [a, b] = s.eigenvalues();
            eig_lo = eig_lo.min(a.min(b));
            eig_hi = eig_hi.max(a.max(b));
        }
    }
    let passed = trace < 10.0 * tol.atol && herm < 1e-12 && eig_lo >= -1e-9 && eig_hi <= 1.0 + 1e-9;
    check(
        name,
        passed,
        format!("trace drift {trace:.3e}, hermiticity defect {herm:.3e}, eigenvalues in [{eig_lo:.3e}, {eig_hi:.12}]"),
    )
}

fn purity() -> Check {
    let name = "closed_purity";
    let tol = Tolerances::default();
    let mut worst: f64 = 0.0;
    for (_, spec) in specs() {
        let traj = match pulse_envelope(&spec, GridSpec::default()).and_then(|env| {
            evolve(&env, &EmitterParams::closed(), &DensityMatrix::ground(), tol.rtol, tol.atol)
        }) {
            Ok(t) => t,
            Err(e) => return failed(name, e),
        };
        worst = traj.states.iter().map(|s| (s.purity() - 1.0).abs()).fold(worst, f64::max);
    }
    let limit = 10.0 * tol.rtol;
    check(name, worst < limit, format!("max |tr(rho^2) - 1| = {worst:.3e} (limit {limit:.0e})"))
}

fn rhs_invariants() -> Check {
    let name = "rhs_trace_hermiticity";
    let params = EmitterParams::new(3e12, 1e12, 2e11).expect("valid parameters");
    let mut worst: f64 = 0.0;
    for k in 0..64 {
        let x = k as f64;
        let theta = 0.37 * x;
        let phi = 1.3 * x;
        let (a, b) = ((theta / 2.0).cos(), C64::from_polar((theta / 2.0).sin(), phi));
        let rho = match DensityMatrix::pure(C64::new(a, 0.0), b) {
            Ok(r) => r,
            Err(e) => return failed(name, e),
        };
        let drive =
            DriveSample::new(C64::from_polar(1e13 * (0.1 * x).sin().abs(), 0.7 * x), 2e12 * (0.2 * x).cos());
        let d = lindblad_rhs(rho.as_operator(), drive, &params);
        let scale = 1e13;
        worst = worst.max(d.trace().norm() / scale).max(d.hermiticity_defect() / scale);
    }
    check(name, worst < 1e-14, format!("max |tr| and Hermiticity defect of drho/dt, relative: {worst:.3e}"))
}

fn determinism(workers: usize) -> Check {
    let name = "determinism";
    let plan = SweepPlan {
        axes: vec![
            Axis::new(AxisName::Theta, 0.5, 6.0, 6, Normalization::ThetaInPi),
            Axis::new(AxisName::Alpha, -2.0, 2.0, 5, Normalization::AlphaOverTau0Sq),
        ],
        baseline: PulseSpec::transform_limited(PI, TAU0),
        params: EmitterParams::closed(),
        closed_system: true,
        grid: GridSpec { n_samples: 4096, span_factor: 16.0 },
        tolerances: Tolerances::default(),
    };
    let others = workers.max(2);
    match (run_sweep(&plan, 1), run_sweep(&plan, others)) {
        (Ok(a), Ok(b)) => {
            let same = a
                .rho_ee
                .iter()
                .flatten()
                .zip(b.rho_ee.iter().flatten())
                .all(|(x, y)| x.to_bits() == y.to_bits());
            check(
                name,
                same && a == b,
                format!("6x5 sweep on 1 and {others} workers bitwise identical: {same}"),
            )
        }
        (Err(e), _) | (_, Err(e)) => failed(name, e),
    }
}

/// Runs every check; `workers` sets the thread count compared against one.
pub fn run_suite(workers: usize) -> Vec<Check> {
    vec![parseval(), notch_zero(), open_state_hygiene(), purity(), rhs_invariants(), determinism(workers)]
}
