//! Minimal SVG plots written as plain markup: axes, polylines and markers.

use std::fmt::Write;

use crate::propagate::FieldRecord;
use crate::scenarios::{ScanReport, SweepResult};

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Frame {
        let range = |v: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = v
                .filter(|x| x.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo <= 0.0 {
                (lo - 0.5, hi + 0.5)
            } else {
                let m = 0.05 * (hi - lo);
                (lo - m, hi + m)
            }
        };
        Frame {
            x: range(&mut xs.clone()),
            y: range(&mut ys.clone()),
        }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }
}

fn open(s: &mut String, title: &str, frame: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let (x0, y0, x1, y1) = (PAD, H - PAD, W - PAD, PAD);
    let _ = writeln!(
        s,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = frame.x.0 + f * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + f * (frame.y.1 - frame.y.0);
        let (tx, ty) = (frame.px(xv), frame.py(yv));
        let _ = writeln!(s, r#"<line x1="{tx:.1}" y1="{y0}" x2="{tx:.1}" y2="{}" stroke="black"/>"#, y0 + 4.0);
        let _ = writeln!(s, r#"<text x="{tx:.1}" y="{}" text-anchor="middle">{}</text>"#, y0 + 18.0, tick(xv));
        let _ = writeln!(s, r#"<line x1="{}" y1="{ty:.1}" x2="{x0}" y2="{ty:.1}" stroke="black"/>"#, x0 - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 6.0, ty + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(s: &mut String, frame: &Frame, pts: impl Iterator<Item = (f64, f64)>, color: &str) {
    let pts: Vec<String> = pts
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
        pts.join(" ")
    );
}

fn markers(s: &mut String, frame: &Frame, pts: impl Iterator<Item = (f64, f64)>, color: &str) {
    for (x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
            frame.px(x),
            frame.py(y)
        );
    }
}

fn legend(s: &mut String, entries: &[(&str, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = PAD + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            W - PAD - 120.0,
            y - 9.0,
            W - PAD - 106.0,
            y,
            escape(label)
        );
    }
}

/// Input and output intensity against time.
pub fn trace_plot(rec: &FieldRecord, title: &str) -> String {
    let i_in: Vec<f64> = rec.omega_in.iter().map(|x| x.norm_sqr()).collect();
    let i_out: Vec<f64> = rec.omega_out.iter().map(|x| x.norm_sqr()).collect();
    let frame = Frame::fit(rec.t_grid.iter().copied(), i_in.iter().chain(&i_out).copied());
    let mut s = String::new();
    open(&mut s, title, &frame, "t (us)", "|Omega|^2 ((rad/us)^2)");
    // decimate long traces to keep files small
    let stride = (rec.t_grid.len() / 2000).max(1);
    let pick = |v: &[f64]| {
        rec.t_grid
            .iter()
            .zip(v)
            .step_by(stride)
            .map(|(&t, &y)| (t, y))
            .collect::<Vec<_>>()
    };
    polyline(&mut s, &frame, pick(&i_in).into_iter(), "#888888");
    polyline(&mut s, &frame, pick(&i_out).into_iter(), "#c0392b");
    legend(&mut s, &[("input", "#888888"), ("output", "#c0392b")]);
    s.push_str("</svg>\n");
    s
}

/// Echo efficiency against τ_g with the fitted exponential.
pub fn sweep_plot(result: &SweepResult) -> String {
    let pts: Vec<(f64, f64)> = result.rows.iter().map(|r| (r.tau_g_us, r.echo_efficiency)).collect();
    let curve: Vec<(f64, f64)> = match &result.fit {
        Some(f) => {
            let (lo, hi) = pts
                .iter()
                .filter(|p| p.0.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
            if lo.is_finite() {
                (0..=100)
                    .map(|i| {
                        let t = lo + (hi - lo) * i as f64 / 100.0;
                        (t, f.a * (f.b * (t - f.c)).exp())
                    })
                    .collect()
            } else {
                Vec::new()
            }
        }
        None => Vec::new(),
    };
    let frame = Frame::fit(
        pts.iter().chain(&curve).map(|p| p.0),
        pts.iter().chain(&curve).map(|p| p.1),
    );
    let mut s = String::new();
    open(&mut s, "echo efficiency vs group delay", &frame, "tau_g (us)", "echo efficiency");
    polyline(&mut s, &frame, curve.into_iter(), "#2c7fb8");
    markers(&mut s, &frame, pts.into_iter(), "#c0392b");
    legend(&mut s, &[("sweep", "#c0392b"), ("A exp[B(tau-C)]", "#2c7fb8")]);
    s.push_str("</svg>\n");
    s
}

/// Echo efficiency and hole-centre ground population against T_H, each
/// normalized to its own maximum.
pub fn scan_plot(result: &SweepResult, scan: &ScanReport) -> String {
    let t: Vec<f64> = result.rows.iter().map(|r| r.t_h_us).collect();
    let norm = |v: Vec<f64>| {
        let m = v.iter().cloned().fold(0.0, f64::max);
        v.into_iter().map(|x| if m > 0.0 { x / m } else { x }).collect::<Vec<_>>()
    };
    let eff = norm(result.rows.iter().map(|r| r.echo_efficiency).collect());
    let ng = norm(scan.n_g_center.clone());
    let frame = Frame::fit(t.iter().copied(), eff.iter().chain(&ng).copied());
    let mut s = String::new();
    open(&mut s, "H-duration scan", &frame, "T_H (us)", "normalized");
    let zip = |v: &[f64]| t.iter().copied().zip(v.to_vec()).collect::<Vec<_>>();
    polyline(&mut s, &frame, zip(&eff).into_iter(), "#c0392b");
    markers(&mut s, &frame, zip(&eff).into_iter(), "#c0392b");
    polyline(&mut s, &frame, zip(&ng).into_iter(), "#2c7fb8");
    legend(&mut s, &[("echo E1", "#c0392b"), ("n_g(hole centre)", "#2c7fb8")]);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::FitResult;
    use crate::scenarios::SweepRow;

    #[test]
    fn sweep_plot_is_well_formed() {
        let rows = (0..4)
            .map(|i| SweepRow {
                t_h_us: 10.0,
                hole_depth: 0.2 * i as f64,
                tau_g_us: 0.5 + i as f64,
                v_g_km_s: 1.0,
                eta: 1.0,
                echo_efficiency: 0.01 * (1.0 + i as f64),
            })
            .collect();
        let r = SweepResult {
            rows,
            fit: Some(FitResult { a: 0.01, b: 0.3, c: 0.5, r_squared: 0.99 }),
        };
        let s = sweep_plot(&r);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 4);
        assert_eq!(s.matches("<polyline").count(), 1);
        assert!(!s.contains("NaN"));
    }
}
