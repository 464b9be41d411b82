//! Minimal SVG diagnostics: log-log line plots, scatter plots and histograms.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD_L: f64 = 70.0;
const PAD_R: f64 = 20.0;
const PAD_T: f64 = 40.0;
const PAD_B: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Frame {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for v in it.filter(|v| v.is_finite()) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-300 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        PAD_L + (x - self.x0) / (self.x1 - self.x0) * (W - PAD_L - PAD_R)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD_B - (y - self.y0) / (self.y1 - self.y0) * (H - PAD_T - PAD_B)
    }
}

fn open(out: &mut String, title: &str, xlabel: &str, ylabel: &str, f: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let (l, r, t, b) = (PAD_L, W - PAD_R, PAD_T, H - PAD_B);
    let _ = writeln!(out, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" stroke="black" fill="none"/>"#);
    for (v, x) in [(f.x0, l), (f.x1, r)] {
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle">{v:.3}</text>"#, b + 16.0);
    }
    for (v, y) in [(f.y0, b), (f.y1, t)] {
        let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end">{v:.3}</text>"#, l - 6.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 10.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(ylabel)
    );
}

/// Points `(log x, log y)` with an optional fitted line `y = slope x + intercept`
/// drawn in log coordinates. The title should carry the slope.
pub fn loglog(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)], fit: Option<(f64, f64)>) -> String {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let f = Frame::fit(logs.iter().map(|p| p.0), logs.iter().map(|p| p.1));
    let mut out = String::new();
    open(&mut out, title, xlabel, ylabel, &f);
    if let Some((s, c)) = fit {
        let (a, b) = (f.x0, f.x1);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c33" stroke-dasharray="4 3"/>"##,
            f.px(a),
            f.py(s * a + c),
            f.px(b),
            f.py(s * b + c)
        );
    }
    let path: Vec<String> = logs.iter().map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y))).collect();
    if !path.is_empty() {
        let _ = writeln!(out, r##"<polyline points="{}" stroke="#236" fill="none"/>"##, path.join(" "));
    }
    for (x, y) in &logs {
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#236"/>"##, f.px(*x), f.py(*y));
    }
    out.push_str("</svg>\n");
    out
}

pub fn scatter(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)]) -> String {
    let f = Frame::fit(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
    let mut out = String::new();
    open(&mut out, title, xlabel, ylabel, &f);
    for (x, y) in points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#236"/>"##, f.px(*x), f.py(*y));
    }
    out.push_str("</svg>\n");
    out
}

/// Bars over consecutive `edges`; `counts.len() == edges.len() - 1`.
pub fn histogram(title: &str, xlabel: &str, edges: &[f64], counts: &[usize]) -> String {
    let top = counts.iter().copied().max().unwrap_or(0) as f64;
    let f = Frame {
        x0: edges.first().copied().unwrap_or(0.0),
        x1: edges.last().copied().unwrap_or(1.0).max(edges.first().copied().unwrap_or(0.0) + 1e-12),
        y0: 0.0,
        y1: top.max(1.0),
    };
    let mut out = String::new();
    open(&mut out, title, xlabel, "count", &f);
    for (i, c) in counts.iter().enumerate() {
        let (a, b) = (f.px(edges[i]), f.px(edges[i + 1]));
        let y = f.py(*c as f64);
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#6a8" stroke="white"/>"##,
            a,
            y,
            (b - a).max(0.0),
            (H - PAD_B - y).max(0.0)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Equal-width bins over the finite values.
pub fn bin(values: &[f64], bins: usize) -> (Vec<f64>, Vec<usize>) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let bins = bins.max(1);
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if finite.is_empty() {
        return (vec![0.0, 1.0], vec![0]);
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0; bins];
    for v in finite {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    (edges, counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_documents_are_closed() {
        let pts = [(1.0, 1.0), (0.5, 0.25), (0.25, 0.0625)];
        for svg in [
            loglog("slope 2", "log R", "log osc", &pts, Some((2.0, 0.0))),
            scatter("s", "x", "y", &pts),
            histogram("h", "q", &[0.0, 1.0, 2.0], &[3, 1]),
        ] {
            assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        }
    }

    #[test]
    fn binning_counts_everything() {
        let (edges, counts) = bin(&[0.0, 0.1, 0.5, 1.0, f64::NAN], 4);
        assert_eq!(edges.len(), 5);
        assert_eq!(counts.iter().sum::<usize>(), 4);
    }

    #[test]
    fn title_is_escaped() {
        assert!(scatter("a<b", "x", "y", &[]).contains("a&lt;b"));
    }
}
