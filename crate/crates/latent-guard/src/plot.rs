//! Static SVG scatter of reconstruction error against latent distance.

use std::fmt::Write as _;

use crate::scores::ScoreRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const MARGIN: f64 = 0.05;
const TICKS: usize = 5;

/// Closed axis interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    /// Data extent widened by 5% of its span on both sides. A zero span
    /// widens by 5% of the magnitude instead, or by 0.05 at zero.
    pub fn padded(values: impl IntoIterator<Item = f64>) -> Self {
        let (lo, hi) = values
            .into_iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo > hi {
            return Self { min: 0.0, max: 1.0 };
        }
        let span = hi - lo;
        let pad = if span > 0.0 {
            span * MARGIN
        } else if lo != 0.0 {
            lo.abs() * MARGIN
        } else {
            MARGIN
        };
        Self {
            min: lo - pad,
            max: hi + pad,
        }
    }

    fn fraction(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }
}

fn px_x(r: &Range, v: f64) -> f64 {
    LEFT + r.fraction(v) * (WIDTH - LEFT - RIGHT)
}

fn px_y(r: &Range, v: f64) -> f64 {
    HEIGHT - BOTTOM - r.fraction(v) * (HEIGHT - TOP - BOTTOM)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the scatter; inliers are blue circles and OOD samples red crosses.
pub fn render_svg(rows: &[ScoreRow], title: &str) -> String {
    let xr = Range::padded(rows.iter().map(|r| r.re));
    let yr = Range::padded(rows.iter().map(|r| r.ld));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<g id="axes" data-x-min="{}" data-x-max="{}" data-y-min="{}" data-y-max="{}" stroke="black" fill="none">"#,
        xr.min, xr.max, yr.min, yr.max
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}"/>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
    s.push_str("</g>\n<g id=\"ticks\" fill=\"black\">\n");
    for i in 0..=TICKS {
        let t = i as f64 / TICKS as f64;
        let xv = xr.min + t * (xr.max - xr.min);
        let yv = yr.min + t * (yr.max - yr.min);
        let (x, y) = (px_x(&xr, xv), px_y(&yr, yv));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{b2}" stroke="black"/><text x="{x:.2}" y="{ty}" text-anchor="middle">{xv:.3e}</text>"#,
            b = HEIGHT - BOTTOM,
            b2 = HEIGHT - BOTTOM + 4.0,
            ty = HEIGHT - BOTTOM + 16.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{l2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{yv:.3}</text>"#,
            l2 = LEFT - 4.0,
            tx = LEFT - 6.0,
            ty = y + 4.0
        );
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">reconstruction error</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">latent distance</text>"#,
        y = TOP + (HEIGHT - TOP - BOTTOM) / 2.0
    );

    s.push_str("<g id=\"ood\" stroke=\"#d62728\" stroke-width=\"1\" opacity=\"0.6\">\n");
    for r in rows.iter().filter(|r| !r.true_is_inlier) {
        let (x, y) = (px_x(&xr, r.re), px_y(&yr, r.ld));
        let _ = writeln!(s, r#"<path d="M{:.2} {:.2}l5 5m0 -5l-5 5"/>"#, x - 2.5, y - 2.5);
    }
    s.push_str("</g>\n<g id=\"inlier\" fill=\"#1f77b4\" opacity=\"0.6\">\n");
    for r in rows.iter().filter(|r| r.true_is_inlier) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#,
            px_x(&xr, r.re),
            px_y(&yr, r.ld)
        );
    }
    s.push_str("</g>\n");
    let lx = WIDTH - RIGHT - 90.0;
    let _ = writeln!(
        s,
        r##"<g id="legend"><circle cx="{lx}" cy="{a}" r="3" fill="#1f77b4"/><text x="{tx}" y="{ta}">inlier</text><path d="M{px} {pa}l6 6m0 -6l-6 6" stroke="#d62728"/><text x="{tx}" y="{tb}">OOD</text></g>"##,
        a = TOP + 12.0,
        tx = lx + 8.0,
        ta = TOP + 16.0,
        px = lx - 3.0,
        pa = TOP + 25.0,
        tb = TOP + 32.0
    );
    s.push_str("</svg>\n");
    s
}
