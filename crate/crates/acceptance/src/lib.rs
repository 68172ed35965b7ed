//! Series diagnostics shared by the acceptance checks.

/// Direction changes of a series, ignoring wiggles smaller than `hyst`.
pub fn turning_points(x: &[f64], hyst: f64) -> (usize, i8) {
    let (mut n, mut dir, mut anchor) = (0, 0i8, x[0]);
    for &v in &x[1..] {
        let d = if v > anchor + hyst {
            1
        } else if v < anchor - hyst {
            -1
        } else {
            0
        };
        if d != 0 {
            if dir != 0 && d != dir {
                n += 1;
            }
            if d != dir || (d > 0 && v > anchor) || (d < 0 && v < anchor) {
                anchor = v;
            }
            dir = d;
        } else if (dir > 0 && v > anchor) || (dir < 0 && v < anchor) {
            anchor = v;
        }
    }
    (n, dir)
}

pub fn moving_average(x: &[f64], half: usize) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(half), (i + half).min(x.len() - 1));
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// First grid value with ρ_ee ≥ 0.98, or +∞.
pub fn threshold(grid: &[f64], rho: &[f64]) -> f64 {
    grid.iter().zip(rho).find(|(_, &r)| r >= 0.98).map_or(f64::INFINITY, |(g, _)| *g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_turns_and_final_direction() {
        let x: Vec<f64> = (0..500).map(|k| (k as f64 * 0.05).sin().powi(2)).collect();
        // sin² over 25 rad: peaks and troughs every π/2.
        let (n, _) = turning_points(&x, 1e-3);
        assert_eq!(n, (25.0 / std::f64::consts::FRAC_PI_2) as usize);
        assert_eq!(turning_points(&[0.0, 0.0005, 0.0, 0.0005], 1e-3), (0, 0));
        assert_eq!(turning_points(&[0.0, 1.0, 2.0], 1e-3), (0, 1));
    }

    #[test]
    fn moving_average_keeps_lines() {
        let x: Vec<f64> = (0..20).map(|k| 2.0 * k as f64).collect();
        let y = moving_average(&x, 3);
        assert_eq!(&y[3..17], &x[3..17]);
        assert_eq!(moving_average(&[1.0, 3.0], 5), vec![2.0, 2.0]);
    }

    #[test]
    fn threshold_is_first_crossing_or_infinite() {
        let g = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(threshold(&g, &[0.1, 0.99, 0.5, 0.99]), 1.0);
        assert_eq!(threshold(&g, &[0.1, 0.2, 0.3, 0.97]), f64::INFINITY);
    }
}
