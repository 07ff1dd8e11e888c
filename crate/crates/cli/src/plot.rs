//! Static SVG plots: MSE against rounds and localization trails.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
/// Points kept per decade of the x axis when thinning long curves.
const POINTS_PER_DECADE: f64 = 200.0;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub fn color(k: usize) -> &'static str {
    COLORS[k % COLORS.len()]
}

/// One named curve of `(x, y)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let t = if self.x1 > self.x0 { (x - self.x0) / (self.x1 - self.x0) } else { 0.5 };
        MARGIN_LEFT + t * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let t = if self.y1 > self.y0 { (y - self.y0) / (self.y1 - self.y0) } else { 0.5 };
        HEIGHT - MARGIN_BOTTOM - t * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        (WIDTH - MARGIN_RIGHT + MARGIN_LEFT) / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes_box(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    );
}

fn decade_ticks(lo: f64, hi: f64) -> Vec<i32> {
    let step = (((hi - lo) / 8.0).ceil() as i32).max(1);
    let first = lo.ceil() as i32;
    let last = hi.floor() as i32;
    (first..=last).filter(|k| (k - first) % step == 0).collect()
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    while t <= hi + 1e-9 * span {
        ticks.push(if t.abs() < 1e-9 * span { 0.0 } else { t });
        t += step;
    }
    ticks
}

fn legend(out: &mut String, entries: &[(String, String)]) {
    let x = WIDTH - MARGIN_RIGHT + 15.0;
    for (k, (name, color)) in entries.iter().enumerate() {
        let y = MARGIN_TOP + 15.0 + 20.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/>"#,
            x + 25.0
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 32.0, y + 4.0, escape(name));
    }
}

/// Keeps the first and last point and at most one point per log-x bin.
fn thin_log(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut kept: Vec<(f64, f64)> = Vec::new();
    let mut last_bin = i64::MIN;
    for (k, &(x, y)) in points.iter().enumerate() {
        let bin = (x.log10() * POINTS_PER_DECADE).floor() as i64;
        if bin != last_bin || k + 1 == points.len() {
            if bin == last_bin {
                kept.pop();
            }
            kept.push((x, y));
            last_bin = bin;
        }
    }
    kept
}

/// Log-log plot of MSE against rounds, one polyline per series. Points with
/// non-positive or non-finite coordinates are dropped.
pub fn mse_svg(series: &[Series], title: &str) -> String {
    let cleaned: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            let valid: Vec<(f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
                .collect();
            thin_log(&valid).into_iter().map(|(x, y)| (x.log10(), y.log10())).collect()
        })
        .collect();
    let all = cleaned.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, -1.0, 0.0);
    }
    let frame = Frame {
        x0: 0f64.min(x0.floor()),
        x1: x1.ceil().max(1.0),
        y0: y0.floor(),
        y1: y1.ceil().max(y0.floor() + 1.0),
    };

    let mut out = String::new();
    header(&mut out, title);
    axes_box(&mut out);
    for k in decade_ticks(frame.x0, frame.x1) {
        let x = frame.px(k as f64);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
            HEIGHT - MARGIN_BOTTOM,
            HEIGHT - MARGIN_BOTTOM + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{k}</text>"#,
            HEIGHT - MARGIN_BOTTOM + 18.0
        );
    }
    for k in decade_ticks(frame.y0, frame.y1) {
        let y = frame.py(k as f64);
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{MARGIN_LEFT}" y2="{y:.1}" stroke="black"/>"#,
            MARGIN_LEFT - 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{k}</text>"#,
            MARGIN_LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">rounds (log scale)</text>"#,
        (WIDTH - MARGIN_RIGHT + MARGIN_LEFT) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">mean square error (log scale)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let mut entries = Vec::new();
    for (k, (s, pts)) in series.iter().zip(&cleaned).enumerate() {
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            color(k),
            coords.join(" ")
        );
        entries.push((s.name.clone(), color(k).to_string()));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// Estimate history of every free agent for one solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Trails {
    pub name: String,
    /// `paths[i]` is the sequence of estimates of free agent `i`.
    pub paths: Vec<Vec<Vec<f64>>>,
}

fn plus(out: &mut String, x: f64, y: f64, color: &str) {
    let _ = writeln!(
        out,
        r#"<path d="M{:.2},{y:.2}H{:.2}M{x:.2},{:.2}V{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
        x - 4.0,
        x + 4.0,
        y - 4.0,
        y + 4.0
    );
}

fn star(out: &mut String, x: f64, y: f64, color: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="16" fill="{color}">*</text>"#,
        y + 6.0
    );
}

fn ring(out: &mut String, x: f64, y: f64) {
    let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="none" stroke="black"/>"#);
}

/// Trails of estimates projected on the first two coordinates. Each trail
/// starts at a '+' and ends at a '*'; true positions are rings and anchors
/// filled squares. The view is fitted to the true positions with a margin,
/// so far-off early estimates are clipped.
pub fn trails_svg(truth: &[Vec<f64>], anchors: &[Vec<f64>], trails: &[Trails], title: &str) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in truth.iter().chain(anchors) {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = 0.1 * (x1 - x0).max(y1 - y0).max(1e-6);
    let frame = Frame {
        x0: x0 - pad,
        x1: x1 + pad,
        y0: y0 - pad,
        y1: y1 + pad,
    };
    let clip = |x: f64, y: f64| (x.clamp(frame.x0, frame.x1), y.clamp(frame.y0, frame.y1));

    let mut out = String::new();
    header(&mut out, title);
    axes_box(&mut out);
    for t in linear_ticks(frame.x0, frame.x1) {
        let x = frame.px(t);
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{t:.2}</text>"#,
            HEIGHT - MARGIN_BOTTOM + 18.0
        );
    }
    for t in linear_ticks(frame.y0, frame.y1) {
        let y = frame.py(t);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t:.2}</text>"#,
            MARGIN_LEFT - 8.0,
            y + 4.0
        );
    }
    for p in truth {
        ring(&mut out, frame.px(p[0]), frame.py(p[1]));
    }
    for p in anchors {
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="black"/>"#,
            frame.px(p[0]) - 4.0,
            frame.py(p[1]) - 4.0
        );
    }
    let mut entries = Vec::new();
    for (k, trail) in trails.iter().enumerate() {
        let c = color(k);
        for path in &trail.paths {
            let (Some(first), Some(last)) = (path.first(), path.last()) else {
                continue;
            };
            let coords: Vec<String> = path
                .iter()
                .map(|p| {
                    let (x, y) = clip(p[0], p[1]);
                    format!("{:.2},{:.2}", frame.px(x), frame.py(y))
                })
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{c}" stroke-width="0.8" points="{}"/>"#,
                coords.join(" ")
            );
            let (sx, sy) = clip(first[0], first[1]);
            plus(&mut out, frame.px(sx), frame.py(sy), c);
            let (ex, ey) = clip(last[0], last[1]);
            star(&mut out, frame.px(ex), frame.py(ey), c);
        }
        entries.push((trail.name.clone(), c.to_string()));
    }
    legend(&mut out, &entries);
    let base = MARGIN_TOP + 25.0 + 20.0 * entries.len() as f64;
    let x = WIDTH - MARGIN_RIGHT + 27.0;
    plus(&mut out, x, base, "black");
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">start</text>"#, x + 20.0, base + 4.0);
    star(&mut out, x, base + 20.0, "black");
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">estimate</text>"#, x + 20.0, base + 24.0);
    ring(&mut out, x, base + 40.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">true position</text>"#, x + 20.0, base + 44.0);
    let _ = writeln!(
        out,
        r#"<rect x="{:.1}" y="{:.1}" width="8" height="8" fill="black"/>"#,
        x - 4.0,
        base + 56.0
    );
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">anchor</text>"#, x + 20.0, base + 64.0);
    out.push_str("</svg>\n");
    out
}
