//! Early-detection curves from `curve.tsv` files, rendered as plain SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Context};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// (delay_hours, accuracy), ordered by delay.
    pub points: Vec<(f64, f64)>,
}

/// Aggregate rows of one or more curve tables, one series per
/// `variant/model` pair.
pub fn parse_curves(tables: &[(String, String)]) -> anyhow::Result<Vec<Series>> {
    let mut by_label: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (name, text) in tables {
        let mut lines = text.lines();
        let header = lines.next().with_context(|| format!("{name}: empty curve table"))?;
        let cols: Vec<&str> = header.split('\t').collect();
        let col = |c: &str| {
            cols.iter()
                .position(|h| *h == c)
                .with_context(|| format!("{name}: missing column {c}"))
        };
        let (iv, im, ifold, idel, iacc) = (
            col("variant")?,
            col("model")?,
            col("fold")?,
            col("delay_hours")?,
            col("accuracy")?,
        );
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != cols.len() {
                bail!("{name}:{}: expected {} fields, found {}", n + 2, cols.len(), f.len());
            }
            if f[ifold] != "aggregate" {
                continue;
            }
            let delay: f64 = f[idel].parse().with_context(|| format!("{name}:{}: delay", n + 2))?;
            let acc: f64 = f[iacc].parse().with_context(|| format!("{name}:{}: accuracy", n + 2))?;
            by_label
                .entry(format!("{}/{}", f[iv], f[im]))
                .or_default()
                .push((delay, acc));
        }
    }
    if by_label.is_empty() {
        bail!("no aggregate rows found");
    }
    Ok(by_label
        .into_iter()
        .map(|(label, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label, points }
        })
        .collect())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Accuracy against delay; the x axis is log-scaled (`log1p`) because
/// schedules are dense near zero.
pub fn render_svg(series: &[Series]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 60.0, 170.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let max_x = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let sx = |x: f64| left + pw * x.ln_1p() / max_x.ln_1p();
    let sy = |y: f64| top + ph * (1.0 - y.clamp(0.0, 1.0));

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for i in 0..=5 {
        let y = i as f64 / 5.0;
        let py = sy(y);
        let _ = writeln!(
            out,
            r##"<line x1="{left}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{y:.1}</text>"##,
            left + pw,
            left - 6.0,
            py + 4.0
        );
    }
    let mut ticks = vec![0.0, 1.0, 6.0, 24.0, 72.0];
    ticks.retain(|t| *t <= max_x);
    for t in ticks {
        let px = sx(t);
        let _ = writeln!(
            out,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#,
            top + ph + 16.0
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">delay (hours)</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">accuracy</text>"#,
        top + ph / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 14.0 + 16.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One line per series: first and last accuracy, and the earliest delay
/// within 0.01 of the final accuracy.
pub fn summary(series: &[Series]) -> String {
    let mut out = String::from("series\tfirst_delay\tfirst_acc\tlast_delay\tlast_acc\tsettles_at\n");
    for s in series {
        let (Some(first), Some(last)) = (s.points.first(), s.points.last()) else {
            continue;
        };
        let settle = s
            .points
            .iter()
            .find(|p| (p.1 - last.1).abs() <= 0.01)
            .map_or(last.0, |p| p.0);
        let _ = writeln!(
            out,
            "{}\t{}\t{:.4}\t{}\t{:.4}\t{}",
            s.label, first.0, first.1, last.0, last.1, settle
        );
    }
    out
}
