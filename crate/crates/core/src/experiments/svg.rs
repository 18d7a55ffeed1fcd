//! Minimal deterministic SVG rendering of risk curves.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::risk::RiskCurve;

pub const TRUE_STOP_COLOR: &str = "#2ca02c";
pub const EST_STOP_COLOR: &str = "#9467bd";
const CURVE_COLOR: &str = "#1f77b4";
const MC_COLOR: &str = "#d62728";

const PANEL_W: f64 = 280.0;
const PANEL_H: f64 = 210.0;
const MARGIN: f64 = 36.0;

/// One plot: a curve with optional stop markers.
#[derive(Debug, Clone)]
pub struct Panel<'a> {
    pub title: String,
    pub curve: &'a RiskCurve,
    pub true_k: Option<usize>,
    pub est_k: Option<f64>,
    /// Draw Monte-Carlo points when the curve has them.
    pub show_mc: bool,
}

impl<'a> Panel<'a> {
    /// Polyline only.
    pub fn bare(title: impl Into<String>, curve: &'a RiskCurve) -> Self {
        Panel {
            title: title.into(),
            curve,
            true_k: None,
            est_k: None,
            show_mc: false,
        }
    }
}

fn xmap(k: f64, k_hi: f64, x0: f64, width: f64) -> f64 {
    let span = (1.0 + k_hi).ln().max(f64::MIN_POSITIVE);
    x0 + width * (1.0 + k.max(0.0)).ln() / span
}

fn render_panel(out: &mut String, panel: &Panel, ox: f64, oy: f64) {
    let c = panel.curve;
    let (x0, y0) = (ox + MARGIN, oy + MARGIN * 0.8);
    let (w, h) = (PANEL_W - 1.5 * MARGIN, PANEL_H - 1.8 * MARGIN);
    let k_hi = c.ks.iter().copied().max().unwrap_or(1).max(1) as f64;

    let mut lo = c.analytic.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = c.analytic.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if panel.show_mc {
        for m in c.mc.iter().flatten() {
            lo = lo.min(m.mean - m.stderr);
            hi = hi.max(m.mean + m.stderr);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        let pad = 0.5 * hi.abs().max(1e-12);
        lo -= pad;
        hi += pad;
    }
    let ymap = |v: f64| y0 + h * (hi - v) / (hi - lo);

    let _ = writeln!(
        out,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#444" stroke-width="0.8"/>"##
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
        x0 + w / 2.0,
        oy + MARGIN * 0.55,
        escape(&panel.title)
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="9" text-anchor="middle">iteration (log1p scale, max {})</text>"##,
        x0 + w / 2.0,
        y0 + h + 14.0,
        k_hi as usize
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="8" text-anchor="end">{:.3e}</text>"##,
        x0 - 2.0,
        y0 + 8.0,
        hi
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="8" text-anchor="end">{:.3e}</text>"##,
        x0 - 2.0,
        y0 + h,
        lo
    );

    // thin the polyline to about one point per half pixel
    let mut pts = String::new();
    let mut last_px = f64::NEG_INFINITY;
    let n = c.len();
    for i in 0..n {
        let px = xmap(c.ks[i] as f64, k_hi, x0, w);
        if px - last_px >= 0.5 || i + 1 == n {
            let _ = write!(pts, "{:.2},{:.2} ", px, ymap(c.analytic[i]));
            last_px = px;
        }
    }
    let _ = writeln!(
        out,
        r##"<polyline fill="none" stroke="{CURVE_COLOR}" stroke-width="1.4" points="{}"/>"##,
        pts.trim_end()
    );

    if panel.show_mc {
        for (i, m) in c.mc.iter().enumerate() {
            if let Some(m) = m {
                let px = xmap(c.ks[i] as f64, k_hi, x0, w);
                let _ = writeln!(
                    out,
                    r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{MC_COLOR}" stroke-width="0.8"/>"##,
                    ymap(m.mean - m.stderr),
                    ymap(m.mean + m.stderr)
                );
                let _ = writeln!(
                    out,
                    r##"<circle cx="{px:.2}" cy="{:.2}" r="1.6" fill="{MC_COLOR}"/>"##,
                    ymap(m.mean)
                );
            }
        }
    }

    let mut marker = |k: f64, color: &str| {
        let px = xmap(k.min(k_hi), k_hi, x0, w);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.2" stroke-dasharray="4,2"/>"##,
            y0 + h
        );
    };
    if let Some(k) = panel.true_k {
        marker(k as f64, TRUE_STOP_COLOR);
    }
    if let Some(k) = panel.est_k.filter(|k| k.is_finite()) {
        marker(k, EST_STOP_COLOR);
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders rows of panels into one SVG document.
pub fn render_svg(rows: &[Vec<Panel>]) -> String {
    let ncols = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
    let (width, height) = (PANEL_W * ncols as f64, PANEL_H * rows.len().max(1) as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"##
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="white"/>"##);
    for (r, row) in rows.iter().enumerate() {
        for (c, panel) in row.iter().enumerate() {
            render_panel(&mut out, panel, c as f64 * PANEL_W, r as f64 * PANEL_H);
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn plot_svg(rows: &[Vec<Panel>], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, render_svg(rows)).map_err(|e| Error::io(path, e))
}
