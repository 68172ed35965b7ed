//! Minimal SVG rendering: heatmaps for maps and spectrograms, line plots for
//! trajectories.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 90.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub struct Labels<'a> {
    pub title: &'a str,
    pub x: &'a str,
    pub y: &'a str,
}

/// Viridis-like ramp through five anchors.
fn colour(v: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    if !v.is_finite() {
        return "#ff00ff".into();
    }
    let x = v.clamp(0.0, 1.0) * 4.0;
    let k = (x.floor() as usize).min(3);
    let f = x - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn header(s: &mut String, labels: &Labels) {
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        xml(labels.title)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        HEIGHT - 15.0,
        xml(labels.x)
    )
    .unwrap();
    let cy = TOP + (HEIGHT - TOP - BOTTOM) / 2.0;
    writeln!(
        s,
        r#"<text x="20" y="{cy}" text-anchor="middle" transform="rotate(-90 20 {cy})">{}</text>"#,
        xml(labels.y)
    )
    .unwrap();
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn ticks(s: &mut String, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) {
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#)
        .unwrap();
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let x = LEFT + f * pw;
        let y = TOP + ph - f * ph;
        writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + ph + 18.0,
            tick(x0 + f * (x1 - x0))
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            tick(y0 + f * (y1 - y0))
        )
        .unwrap();
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Heatmap of `z[i][j]` over `x[i]`, `y[j]`, scaled to the data range.
pub fn heatmap(x: &[f64], y: &[f64], z: &[Vec<f64>], labels: &Labels) -> String {
    let mut s = String::new();
    header(&mut s, labels);
    let (xr, yr) = (range(x), range(y));
    let flat: Vec<f64> = z.iter().flatten().copied().collect();
    let (z0, z1) = range(&flat);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let (nx, ny) = (x.len().max(1) as f64, y.len().max(1) as f64);
    let (cw, ch) = (pw / nx, ph / ny);
    for (i, row) in z.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                LEFT + i as f64 * cw,
                TOP + ph - (j + 1) as f64 * ch,
                cw + 0.3,
                ch + 0.3,
                colour((v - z0) / (z1 - z0))
            )
            .unwrap();
        }
    }
    ticks(&mut s, xr, yr);
    let bx = WIDTH - RIGHT + 20.0;
    for k in 0..50 {
        let f = k as f64 / 49.0;
        writeln!(
            s,
            r#"<rect x="{bx}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            TOP + ph * (1.0 - f) - ph / 50.0,
            ph / 50.0 + 0.3,
            colour(f)
        )
        .unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx + 20.0, TOP + 10.0, tick(z1)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx + 20.0, TOP + ph, tick(z0)).unwrap();
    s.push_str("</svg>\n");
    s
}

/// Line plot of one or more named series over a shared abscissa.
pub fn lines(x: &[f64], series: &[(&str, Vec<f64>)], labels: &Labels) -> String {
    const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let mut s = String::new();
    header(&mut s, labels);
    let xr = range(x);
    let all: Vec<f64> = series.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let yr = range(&all);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    for (k, (name, ys)) in series.iter().enumerate() {
        let pts: Vec<String> = x
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(&xv, &yv)| {
                format!(
                    "{:.2},{:.2}",
                    LEFT + (xv - xr.0) / (xr.1 - xr.0) * pw,
                    TOP + ph - (yv - yr.0) / (yr.1 - yr.0) * ph
                )
            })
            .collect();
        let c = PALETTE[k % PALETTE.len()];
        writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, pts.join(" "))
            .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{c}">{}</text>"#,
            WIDTH - RIGHT + 8.0,
            TOP + 14.0 * (k + 1) as f64,
            xml(name)
        )
        .unwrap();
    }
    ticks(&mut s, xr, yr);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let z = vec![vec![0.0, 0.5], vec![1.0, f64::NAN], vec![0.2, 0.3]];
        let svg = heatmap(&[0.0, 1.0, 2.0], &[0.0, 1.0], &z, &Labels { title: "t", x: "Θ/π", y: "α/τ0²" });
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("#ff00ff").count(), 1);
    }

    #[test]
    fn colour_ends() {
        assert_eq!(colour(0.0), "#440154");
        assert_eq!(colour(1.0), "#fde725");
    }
}
