//! Minimal stacked line plots.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 110.0;
const MARGIN_LEFT: f64 = 150.0;
const MARGIN_RIGHT: f64 = 20.0;
const GAP: f64 = 18.0;

/// One panel per series, each scaled to its own range, sharing the x axis.
pub fn stacked_plot(title: &str, notes: &[String], x: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let height = GAP * 2.0 + series.len() as f64 * (PANEL_HEIGHT + GAP);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    )
    .unwrap();
    for note in notes {
        writeln!(s, "<!-- {} -->", note.replace("--", "- -")).unwrap();
    }
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="10" y="20" font-family="sans-serif" font-size="14">{}</text>"#, escape(title)).unwrap();
    let (x_lo, x_hi) = range(x);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    for (k, (name, ys)) in series.iter().enumerate() {
        let top = GAP * 2.0 + k as f64 * (PANEL_HEIGHT + GAP);
        let (y_lo, y_hi) = range(ys);
        writeln!(
            s,
            r##"<rect x="{MARGIN_LEFT}" y="{top:.2}" width="{plot_w:.2}" height="{PANEL_HEIGHT}" fill="none" stroke="#bbb"/>"##
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="8" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            top + PANEL_HEIGHT / 2.0,
            escape(name)
        )
        .unwrap();
        for (v, dy) in [(y_hi, 10.0), (y_lo, PANEL_HEIGHT - 2.0)] {
            writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="9" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 4.0,
                top + dy,
                format_tick(v)
            )
            .unwrap();
        }
        let points: Vec<String> = x
            .iter()
            .zip(ys)
            .map(|(&xv, &yv)| {
                let px = MARGIN_LEFT + (xv - x_lo) / (x_hi - x_lo) * plot_w;
                let py = top + PANEL_HEIGHT - (yv - y_lo) / (y_hi - y_lo) * PANEL_HEIGHT;
                format!("{px:.2},{py:.2}")
            })
            .collect();
        writeln!(
            s,
            r##"<polyline fill="none" stroke="#1f4e9c" stroke-width="1.2" points="{}"/>"##,
            points.join(" ")
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Finite data range, widened when flat.
fn range(v: &[f64]) -> (f64, f64) {
    let (lo, hi) = v
        .iter()
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        return (lo - 1.0, hi + 1.0);
    }
    (lo, hi)
}

fn format_tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_series() {
        let x = vec![0.0, 1.0, 2.0];
        let series = vec![("a".to_string(), vec![0.0, 1.0, 0.5]), ("b<c".to_string(), vec![2.0; 3])];
        let svg = stacked_plot("t", &["seed 3".into()], &x, &series);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("<!-- seed 3 -->"));
        assert!(svg.contains("b&lt;c"));
        assert!(!svg.contains("NaN"));
        assert_eq!(svg, stacked_plot("t", &["seed 3".into()], &x, &series));
    }

    #[test]
    fn degenerate_ranges() {
        assert_eq!(range(&[]), (0.0, 1.0));
        assert_eq!(range(&[3.0, 3.0]), (2.0, 4.0));
        assert_eq!(range(&[f64::NAN, 1.0, 2.0]), (1.0, 2.0));
    }
}
