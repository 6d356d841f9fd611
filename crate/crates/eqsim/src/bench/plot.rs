//! Minimal SVG line charts of benchmark tables.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::Table;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Which columns to draw.
#[derive(Debug, Clone)]
pub struct ChartSpec<'a> {
    pub x: &'a str,
    pub y: &'a str,
    /// Columns whose joined values name a series.
    pub series: Vec<&'a str>,
    pub title: String,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders one polyline per series. Non-numeric x values are placed at
/// their order of first appearance and used as tick labels.
pub fn line_chart(table: &Table, spec: &ChartSpec<'_>) -> Result<String, String> {
    let col = |name: &str| table.column(name).ok_or_else(|| format!("no column {name}"));
    let (xi, yi) = (col(spec.x)?, col(spec.y)?);
    let si = spec.series.iter().map(|s| col(s)).collect::<Result<Vec<_>, _>>()?;

    let numeric_x = table.rows.iter().all(|r| r[xi].parse::<f64>().is_ok());
    let mut categories: Vec<String> = Vec::new();
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &table.rows {
        let x = if numeric_x {
            r[xi].parse().unwrap()
        } else {
            match categories.iter().position(|c| *c == r[xi]) {
                Some(i) => i as f64,
                None => {
                    categories.push(r[xi].clone());
                    (categories.len() - 1) as f64
                }
            }
        };
        let y: f64 = r[yi].parse().map_err(|_| format!("non-numeric {} value {}", spec.y, r[yi]))?;
        let key = si.iter().map(|&i| r[i].as_str()).collect::<Vec<_>>().join(" ");
        series.entry(key).or_default().push((x, y));
    }
    let pts = series.values().flatten();
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let y0 = 0.0f64.min(y1);
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&spec.title));
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(s, r#"<path d="M{l} {t}V{b}H{r}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let v = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, l - 4.0, py(v) + 4.0, short(v));
    }
    if numeric_x {
        for i in 0..=4 {
            let v = x0 + (x1 - x0) * i as f64 / 4.0;
            let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(v), b + 16.0, short(v));
        }
    } else {
        for (i, c) in categories.iter().enumerate() {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(i as f64), b + 16.0, escape(c));
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(spec.x));
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#, H / 2.0, H / 2.0, escape(spec.y));
    for (k, (name, mut p)) in series.into_iter().enumerate() {
        p.sort_by(|a, b| a.0.total_cmp(&b.0));
        let color = COLORS[k % COLORS.len()];
        let d: Vec<String> = p.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.join(" "));
        for &(x, y) in &p {
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{color}"/>"#, px(x), py(y));
        }
        if !name.is_empty() {
            let ly = t + 14.0 * k as f64;
            let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, r + 4.0 - 120.0, escape(&name));
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn short(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_one_polyline_per_series() {
        let mut t = Table::new(&["n", "mode", "s"]);
        for (n, m, s) in [("2", "a", "1.0"), ("4", "a", "0.5"), ("2", "b", "2.0"), ("4", "b", "1.5")] {
            t.push(vec![n.into(), m.into(), s.into()]);
        }
        let spec = ChartSpec { x: "n", y: "s", series: vec!["mode"], title: "t".into() };
        let svg = line_chart(&t, &spec).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg"));
        let bad = ChartSpec { x: "missing", ..spec };
        assert!(line_chart(&t, &bad).is_err());
    }
}
