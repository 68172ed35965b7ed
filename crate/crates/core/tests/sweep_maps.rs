use std::f64::consts::PI;
use std::path::PathBuf;

use qpulse_core::propagator::Tolerances;
use qpulse_core::pulseshape::{GridSpec, PulseSpec};
use qpulse_core::quantum::EmitterParams;
use qpulse_core::sweeps::*;

const TAU0: f64 = 100e-15;

fn plan(axes: Vec<Axis>, baseline: PulseSpec) -> SweepPlan {
    SweepPlan {
        axes,
        baseline,
        params: EmitterParams::new(0.0, 1e9, 1e8).unwrap(),
        closed_system: true,
        grid: GridSpec::default(),
        tolerances: Tolerances::default(),
    }
}

fn theta_axis(max_pi: f64, count: usize) -> Axis {
    Axis::new(AxisName::Theta, 0.0, max_pi, count, Normalization::ThetaInPi)
}

#[test]
fn workers_do_not_change_results() {
    let p = plan(
        vec![theta_axis(6.0, 7), Axis::new(AxisName::Alpha, -3.0, 3.0, 5, Normalization::AlphaOverTau0Sq)],
        PulseSpec::transform_limited(PI, TAU0),
    );
    let a = run_sweep(&p, 1).unwrap();
    let b = run_sweep(&p, 4).unwrap();
    assert_eq!(a, b);
    assert!(a.all_converged());
    // Closed flag strips the emitter rates from what was actually run.
    assert!(a.provenance.params.is_closed());
}

#[test]
fn zero_notch_row_matches_chirp_map_column() {
    let base = PulseSpec::transform_limited(PI, TAU0).with_chirp(5.0 * TAU0 * TAU0);
    let by_delta = run_sweep(
        &plan(
            vec![theta_axis(8.0, 9), Axis::new(AxisName::Delta, 0.0, 0.2, 3, Normalization::DeltaOverGamma0)],
            base,
        ),
        2,
    )
    .unwrap();
    let by_alpha = run_sweep(
        &plan(
            vec![theta_axis(8.0, 9), Axis::new(AxisName::Alpha, 3.0, 5.0, 3, Normalization::AlphaOverTau0Sq)],
            base,
        ),
        2,
    )
    .unwrap();
    for (x, y) in by_delta.column(0).iter().zip(by_alpha.column(2)) {
        assert!((x - y).abs() < 1e-9);
    }
}

/// Sign changes of the discrete gradient, ignoring steps below `eps`.
fn gradient_sign_changes(x: &[f64], eps: f64) -> usize {
    let signs: Vec<f64> =
        x.windows(2).map(|w| w[1] - w[0]).filter(|d| d.abs() > eps).map(f64::signum).collect();
    signs.windows(2).filter(|s| s[0] != s[1]).count()
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/notch_area_fringes.txt")
}

#[test]
fn notch_area_map_shows_fringes_and_matches_golden() {
    let p = plan(
        vec![theta_axis(20.0, 41), Axis::new(AxisName::Delta, 0.1, 0.3, 3, Normalization::DeltaOverGamma0)],
        PulseSpec::transform_limited(PI, TAU0).with_chirp(5.0 * TAU0 * TAU0),
    );
    let r = run_sweep(&p, 2).unwrap();
    assert!(r.all_converged());
    // Off the plateau the population oscillates with area.
    let fringes: usize = (0..3)
        .map(|j| {
            let col = r.column(j);
            let end = col.iter().rposition(|&v| v < 0.98).map_or(0, |k| k + 1);
            gradient_sign_changes(&col[..end], 1e-6)
        })
        .sum();
    assert!(fringes > 0);

    let mut text = String::new();
    for (i, th) in r.grids[0].iter().enumerate() {
        for (j, d) in r.grids[1].iter().enumerate() {
            text.push_str(&format!("{th} {d} {:e}\n", r.rho_ee[i][j]));
        }
    }
    let path = golden_path();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let golden = std::fs::read_to_string(&path).expect("golden file missing; rerun with UPDATE_GOLDEN=1");
    let mut n = 0;
    for (got, want) in text.lines().zip(golden.lines()) {
        let g: Vec<f64> = got.split_whitespace().map(|v| v.parse().unwrap()).collect();
        let w: Vec<f64> = want.split_whitespace().map(|v| v.parse().unwrap()).collect();
        assert_eq!(g[..2], w[..2]);
        assert!((g[2] - w[2]).abs() < 1e-7, "{got} vs {want}");
        n += 1;
    }
    assert_eq!(n, 41 * 3);
}
