//! Self-contained SVG line plots of experiment CSVs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{LabError, LabResult};
use crate::report::atomic_write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `log|y|` against `t`, with least-squares decay lines on both sides of
    /// the peak.
    Profile,
    /// `L_I` against `|I|`.
    LyapunovScale,
    /// `L_I` against `E`.
    LyapunovEnergy,
    /// Deviation measure against `|I|`.
    LdtTrend,
}

impl PlotKind {
    /// `(x, y)` columns the CSV must declare.
    pub fn columns(self) -> (&'static str, &'static str) {
        match self {
            PlotKind::Profile => ("t", "log_abs_y"),
            PlotKind::LyapunovScale => ("interval_len", "value"),
            PlotKind::LyapunovEnergy => ("energy", "value"),
            PlotKind::LdtTrend => ("interval_len", "ldt_measure"),
        }
    }

    fn title(self) -> &'static str {
        match self {
            PlotKind::Profile => "eigenfunction profile",
            PlotKind::LyapunovScale => "finite-scale Lyapunov exponent",
            PlotKind::LyapunovEnergy => "Lyapunov exponent against energy",
            PlotKind::LdtTrend => "large-deviation measure",
        }
    }
}

fn read_columns(path: &Path, want: &[&str]) -> LabResult<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| LabError::Csv { path: path.into(), message: e.to_string() })?;
    let headers = rdr.headers().map_err(|e| LabError::Csv { path: path.into(), message: e.to_string() })?.clone();
    let idx: Vec<usize> = want
        .iter()
        .map(|w| {
            headers
                .iter()
                .position(|h| h.trim() == *w)
                .ok_or_else(|| LabError::MissingColumn { path: path.into(), column: w.to_string() })
        })
        .collect::<LabResult<_>>()?;
    let mut cols = vec![Vec::new(); want.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| LabError::Csv { path: path.into(), message: e.to_string() })?;
        for (c, &i) in cols.iter_mut().zip(&idx) {
            let field = rec.get(i).unwrap_or("").trim();
            c.push(field.parse().unwrap_or(f64::NAN));
        }
    }
    Ok(cols)
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Least-squares line through `(x, y)`.
fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Decay fits to the left and right of the peak over points within 30
/// e-folds of it, as `(x0, x1, slope, intercept)`.
fn profile_fits(x: &[f64], y: &[f64]) -> Vec<(f64, f64, f64, f64)> {
    let Some((peak, &top)) = y.iter().enumerate().filter(|(_, v)| v.is_finite()).max_by(|a, b| a.1.total_cmp(b.1))
    else {
        return Vec::new();
    };
    let mut fits = Vec::new();
    for side in [0..peak + 1, peak..x.len()] {
        let pts: Vec<(f64, f64)> =
            side.map(|i| (x[i], y[i])).filter(|&(_, v)| v.is_finite() && v >= top - 30.0).collect();
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        if let Some((s, c)) = fit_line(&xs, &ys) {
            fits.push((xs[0], xs[xs.len() - 1], s, c));
        }
    }
    fits
}

/// Renders the SVG text for `kind` from `x`, `y`.
pub fn render_svg(kind: PlotKind, x: &[f64], y: &[f64]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const ML: f64 = 64.0;
    const MR: f64 = 20.0;
    const MT: f64 = 36.0;
    const MB: f64 = 48.0;
    let finite: Vec<(f64, f64)> = x.iter().zip(y).map(|(&a, &b)| (a, b)).filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = finite.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), p| (a.min(p.0), b.max(p.0), c.min(p.1), d.max(p.1)),
    );
    if finite.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    let px = |v: f64| ML + (v - x0) / (x1 - x0) * (W - ML - MR);
    let py = |v: f64| H - MB - (v - y0) / (y1 - y0) * (H - MT - MB);
    let (xl, yl) = kind.columns();
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, W / 2.0, kind.title());
    let _ = writeln!(
        s,
        r#"<g stroke="black" fill="none"><line x1="{ML}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{ML}" y1="{MT}" x2="{ML}" y2="{b}"/></g>"#,
        b = H - MB,
        r = W - MR
    );
    s.push_str(r#"<g font-family="sans-serif" font-size="11">"#);
    s.push('\n');
    for t in nice_ticks(x0, x1) {
        let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="black"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4}</text>"#, px(t), H - MB, H - MB + 4.0, H - MB + 16.0, fmt_tick(t));
    }
    for t in nice_ticks(y0, y1) {
        let _ = writeln!(s, r##"<line x1="{1}" y1="{0:.2}" x2="{2}" y2="{0:.2}" stroke="#ddd"/><text x="{3}" y="{4:.2}" text-anchor="end">{5}</text>"##, py(t), ML, W - MR, ML - 6.0, py(t) + 4.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xl}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{yl}</text>"#, H / 2.0);
    s.push_str("</g>\n");
    // polyline segments broken at non-finite points
    let mut seg = Vec::new();
    let flush = |seg: &mut Vec<(f64, f64)>, s: &mut String| {
        if !seg.is_empty() {
            let pts: Vec<String> = seg.iter().map(|&(a, b)| format!("{:.2},{:.2}", px(a), py(b))).collect();
            let _ = writeln!(s, r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{}"/>"##, pts.join(" "));
            if seg.len() == 1 || kind != PlotKind::Profile {
                for &(a, b) in seg.iter() {
                    let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f5fa8"/>"##, px(a), py(b));
                }
            }
            seg.clear();
        }
    };
    for (&a, &b) in x.iter().zip(y) {
        if a.is_finite() && b.is_finite() {
            seg.push((a, b));
        } else {
            flush(&mut seg, &mut s);
        }
    }
    flush(&mut seg, &mut s);
    if kind == PlotKind::Profile {
        for (a, b, slope, c) in profile_fits(x, y) {
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c0392b" stroke-dasharray="6 4" stroke-width="1.5"/>"##,
                px(a),
                py(slope * a + c),
                px(b),
                py(slope * b + c)
            );
            let mid = 0.5 * (a + b);
            let _ = writeln!(
                s,
                r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" fill="#c0392b">slope {:.4}</text>"##,
                px(mid),
                (py(slope * mid + c) - 8.0).max(MT),
                slope
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<csv stem>.svg` next to `csv_path`.
pub fn emit_plot(csv_path: &Path, kind: PlotKind) -> LabResult<PathBuf> {
    let (xc, yc) = kind.columns();
    let cols = read_columns(csv_path, &[xc, yc])?;
    let svg = render_svg(kind, &cols[0], &cols[1]);
    let out = csv_path.with_extension("svg");
    atomic_write(&out, svg.as_bytes())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(-0.3, 2.7);
        assert!(t.len() >= 3 && t[0] >= -0.3 && *t.last().unwrap() <= 2.7);
    }

    #[test]
    fn profile_fit_recovers_slopes() {
        let x: Vec<f64> = (0..201).map(|i| -10.0 + 0.1 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|t| -1.5 * t.abs()).collect();
        let fits = profile_fits(&x, &y);
        assert_eq!(fits.len(), 2);
        assert!((fits[0].2 - 1.5).abs() < 1e-9 && (fits[1].2 + 1.5).abs() < 1e-9);
    }
}
