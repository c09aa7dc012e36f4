use std::fmt::Write as _;

use crate::ppo::LogRow;

/// Across-seed summary of one scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1); zero for a single value.
    pub std: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                n,
                mean: f64::NAN,
                std: f64::NAN,
                median: f64::NAN,
                q25: f64::NAN,
                q75: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Summary {
            n,
            mean,
            std,
            median: quantile(&sorted, 0.5),
            q25: quantile(&sorted, 0.25),
            q75: quantile(&sorted, 0.75),
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

/// Linear interpolation between closest ranks on sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub const SUMMARY_HEADER: &str = "metric,n,mean,std,median,q25,q75,iqr";

pub fn summary_line(metric: &str, s: &Summary) -> String {
    format!(
        "{metric},{},{},{},{},{},{},{}",
        s.n,
        fmt(s.mean),
        fmt(s.std),
        fmt(s.median),
        fmt(s.q25),
        fmt(s.q75),
        fmt(s.iqr())
    )
}

pub(crate) fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        x.to_string()
    }
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let (l, r, t, b) = (MARGIN, W - 16.0, 32.0, H - MARGIN);
    let _ = writeln!(out, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" stroke="black" fill="none"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(y_label)
    );
    for (v, anchor, px, py) in [
        (x.0, "start", l, b + 16.0),
        (x.1, "end", r, b + 16.0),
        (y.0, "end", l - 4.0, b),
        (y.1, "end", l - 4.0, t + 4.0),
    ] {
        let _ = writeln!(out, r#"<text x="{px}" y="{py}" text-anchor="{anchor}">{}</text>"#, tick(v));
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn project(v: f64, range: (f64, f64), lo_px: f64, hi_px: f64) -> f64 {
    lo_px + (v - range.0) / (range.1 - range.0) * (hi_px - lo_px)
}

/// Line chart with one polyline per series and a legend.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let x = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let y = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, x, y);
    for (k, s) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(px, py)| {
                format!(
                    "{:.2},{:.2}",
                    project(px, x, MARGIN, W - 16.0),
                    project(py, y, H - MARGIN, 32.0)
                )
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = 44.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{colour}"/><text x="{}" y="{}">{}</text>"#,
            MARGIN + 10.0,
            ly - 9.0,
            MARGIN + 24.0,
            ly,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Bar chart of labelled values with optional error bars.
pub fn bar_chart_svg(title: &str, x_label: &str, y_label: &str, bars: &[(String, f64, f64)]) -> String {
    let y = bounds(
        bars.iter()
            .flat_map(|b| [b.1 - b.2, b.1 + b.2])
            .chain(std::iter::once(0.0)),
    );
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, (0.0, bars.len() as f64), y);
    let slot = (W - 16.0 - MARGIN) / bars.len().max(1) as f64;
    let zero = project(0.0, y, H - MARGIN, 32.0);
    for (k, (label, value, err)) in bars.iter().enumerate() {
        let cx = MARGIN + slot * (k as f64 + 0.5);
        let top = project(*value, y, H - MARGIN, 32.0);
        let (y0, h) = if top < zero { (top, zero - top) } else { (zero, top - zero) };
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{y0:.2}" width="{:.2}" height="{h:.2}" fill="{}"/>"#,
            cx - slot * 0.3,
            slot * 0.6,
            PALETTE[0]
        );
        if err.is_finite() && *err > 0.0 {
            let e0 = project(value - err, y, H - MARGIN, 32.0);
            let e1 = project(value + err, y, H - MARGIN, 32.0);
            let _ = writeln!(out, r#"<path d="M{cx:.2} {e0:.2} L{cx:.2} {e1:.2}" stroke="black"/>"#);
        }
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{}" text-anchor="middle">{}</text>"#,
            H - MARGIN + 30.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Mean training task return against environment steps, one line per seed.
pub fn learning_curve_svg(title: &str, runs: &[(u64, &[LogRow])]) -> String {
    let series: Vec<Series> = runs
        .iter()
        .map(|(seed, log)| Series {
            name: format!("seed {seed}"),
            points: log.iter().map(|r| (r.env_steps as f64, r.mean_task_return)).collect(),
        })
        .collect();
    line_chart_svg(title, "environment steps", "mean task return", &series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_matches_hand_values() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!(s.mean, 3.0);
        assert!((s.std - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!((s.q25, s.median, s.q75), (2.0, 3.0, 4.0));
        assert_eq!(s.iqr(), 2.0);
        let one = Summary::of(&[7.0]);
        assert_eq!((one.std, one.median, one.q25), (0.0, 7.0, 7.0));
        assert!(Summary::of(&[]).mean.is_nan());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = line_chart_svg(
            "a < b",
            "x",
            "y",
            &[Series {
                name: "s".into(),
                points: vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)],
            }],
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert!(!svg.contains("NaN"));
        let bars = bar_chart_svg("t", "x", "y", &[("0.1".into(), 2.0, 0.5), ("0.5".into(), -1.0, 0.0)]);
        assert_eq!(bars.matches("<rect").count(), 3);
    }
}
