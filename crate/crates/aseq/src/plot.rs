//! Minimal SVG line charts for speed and distance curves.

use std::fmt::Write as _;

use aseq_core::episode::Trace;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Renders series on shared axes. The x range is `[0, x_max]`; the y range
/// starts at zero and is rounded up to a whole tick.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, x_max: f64, series: &[Series]) -> String {
    let y_top = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .filter(|y| y.is_finite())
        .fold(1.0_f64, f64::max);
    let y_step = nice_step(y_top / 5.0);
    let y_max = (y_top / y_step).ceil() * y_step;
    let x_step = nice_step(x_max / 6.0);
    let sx = |x: f64| LEFT + x / x_max * (W - LEFT - RIGHT);
    let sy = |y: f64| H - BOTTOM - y / y_max * (H - TOP - BOTTOM);

    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="20" font-size="14" text-anchor="middle" font-family="sans-serif">{}</text>"#, W / 2.0, escape(title)).unwrap();

    let mut x = 0.0;
    while x <= x_max + 1e-9 {
        let px = sx(x);
        writeln!(out, r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, H - BOTTOM).unwrap();
        writeln!(out, r#"<text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle" font-family="sans-serif">{}</text>"#, H - BOTTOM + 16.0, tick(x)).unwrap();
        x += x_step;
    }
    let mut y = 0.0;
    while y <= y_max + 1e-9 {
        let py = sy(y);
        writeln!(out, r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e0e0e0"/>"##, W - RIGHT).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end" font-family="sans-serif">{}</text>"#, LEFT - 6.0, py + 4.0, tick(y)).unwrap();
        y += y_step;
    }
    writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, W - LEFT - RIGHT, H - TOP - BOTTOM).unwrap();
    writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" font-family="sans-serif">{}</text>"#, (LEFT + W - RIGHT) / 2.0, H - 12.0, escape(x_label)).unwrap();
    writeln!(out, r#"<text x="16" y="{:.2}" font-size="12" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 16 {:.2})">{}</text>"#, (TOP + H - BOTTOM) / 2.0, (TOP + H - BOTTOM) / 2.0, escape(y_label)).unwrap();

    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0 <= x_max + 1e-9 && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y.min(y_max))))
            .collect();
        if !pts.is_empty() {
            writeln!(out, r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#, s.color, pts.join(" ")).unwrap();
        }
        let ly = TOP + 16.0 + 16.0 * i as f64;
        writeln!(out, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/>"#, W - RIGHT - 110.0, W - RIGHT - 90.0, s.color).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif">{}</text>"#, W - RIGHT - 85.0, ly + 4.0, escape(s.label)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn nice_step(raw: f64) -> f64 {
    let raw = raw.max(1e-9);
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn tick(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Time axis shown by default, s.
pub const SPEED_AXIS: f64 = 6.0;

fn axis_end(trace: &Trace) -> f64 {
    let end = trace.rows.last().map_or(0.0, |r| r.t);
    if end <= SPEED_AXIS {
        SPEED_AXIS
    } else {
        end.ceil()
    }
}

/// Ego speed over time. The axis spans the first six seconds, or the whole
/// run when it lasts longer.
pub fn speed_svg(title: &str, trace: &Trace) -> String {
    let points = trace.rows.iter().map(|r| (r.t, r.ego.speed())).collect();
    line_chart(
        title,
        "time (s)",
        "ego speed (m/s)",
        axis_end(trace),
        &[Series {
            label: "ego",
            color: "#1f77b4",
            points,
        }],
    )
}

/// Inter-vehicle distance over time while both vehicles are on the road.
pub fn distance_svg(title: &str, trace: &Trace) -> String {
    let points = trace.rows.iter().filter(|r| r.dist.is_finite()).map(|r| (r.t, r.dist)).collect();
    line_chart(
        title,
        "time (s)",
        "distance (m)",
        axis_end(trace),
        &[Series {
            label: "distance",
            color: "#d62728",
            points,
        }],
    )
}
