//! Static SVG 1.1 plots rendered from the plot-data CSVs.
//!
//! Rendering reads nothing but the CSV text, so regenerating a plot from its
//! CSV reproduces the file byte for byte.

use std::fmt::Write as _;

use anyhow::{anyhow, Context, Result};
use rgax::stats::pearson;

const WIDTH: f64 = 640.0;
const MARGIN: f64 = 64.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("plot data lacks column `{name}`"))
    }

    fn num(&self, row: usize, col: usize) -> Result<Option<f64>> {
        let cell = &self.rows[row][col];
        if cell.is_empty() {
            return Ok(None);
        }
        cell.parse().map(Some).with_context(|| format!("bad number `{cell}`"))
    }
}

/// Padded `[lo, hi]` covering `values`.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..=4).map(|k| lo + (hi - lo) * k as f64 / 4.0).collect()
}

/// Classical against residualized metric with the identity line and Pearson R.
pub fn scatter_svg(csv_text: &str) -> Result<String> {
    let t = Table::parse(csv_text)?;
    let (ci, ri, ai) = (t.col("classical")?, t.col("residualized")?, t.col("actor_id")?);
    let mut pts = Vec::with_capacity(t.rows.len());
    for i in 0..t.rows.len() {
        let c = t.num(i, ci)?.ok_or_else(|| anyhow!("empty classical value"))?;
        let r = t.num(i, ri)?.ok_or_else(|| anyhow!("empty residualized value"))?;
        pts.push((c, r, t.rows[i][ai].clone()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|(c, r, _)| (*c, *r)).unzip();
    let r_text = match pearson(&xs, &ys) {
        Some(r) => format!("R = {r:.3}"),
        None => "R = n/a".into(),
    };
    // one shared range keeps the identity line at 45 degrees
    let (lo, hi) = range(xs.iter().chain(&ys).copied());
    let span = WIDTH - 2.0 * MARGIN;
    let sx = |v: f64| MARGIN + (v - lo) / (hi - lo) * span;
    let sy = |v: f64| WIDTH - MARGIN - (v - lo) / (hi - lo) * span;

    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{WIDTH}" viewBox="0 0 {WIDTH} {WIDTH}" font-family="sans-serif" font-size="11">"#
    )?;
    writeln!(s, r#"<rect width="{WIDTH}" height="{WIDTH}" fill="white"/>"#)?;
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="none" stroke="black"/>"#
    )?;
    for v in ticks(lo, hi) {
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.2}</text>"#, sx(v), WIDTH - MARGIN + 16.0)?;
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#, MARGIN - 6.0, sy(v) + 4.0)?;
    }
    writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-dasharray="4 3"/>"#,
        sx(lo),
        sy(lo),
        sx(hi),
        sy(hi)
    )?;
    for (c, r, actor) in &pts {
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue" fill-opacity="0.7"><title>{}</title></circle>"#,
            sx(*c),
            sy(*r),
            escape(actor)
        )?;
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">classical</text>"#, WIDTH / 2.0, WIDTH - 20.0)?;
    writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">residualized</text>"#,
        WIDTH / 2.0,
        WIDTH / 2.0
    )?;
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="14">{r_text}</text>"#, MARGIN + 8.0, MARGIN + 20.0)?;
    s.push_str("</svg>\n");
    Ok(s)
}

/// Estimates with interval bars, one row per actor in rank order.
/// An empty bound is drawn to the plot edge.
pub fn interval_svg(csv_text: &str) -> Result<String> {
    let t = Table::parse(csv_text)?;
    let (ai, ei, li, ui) = (t.col("actor_id")?, t.col("estimate")?, t.col("lower")?, t.col("upper")?);
    let mut rows = Vec::with_capacity(t.rows.len());
    for i in 0..t.rows.len() {
        let e = t.num(i, ei)?.ok_or_else(|| anyhow!("empty estimate"))?;
        rows.push((t.rows[i][ai].clone(), e, t.num(i, li)?, t.num(i, ui)?));
    }
    let (lo, hi) = range(
        rows.iter()
            .flat_map(|(_, e, l, u)| [Some(*e), *l, *u, Some(0.0)])
            .flatten(),
    );
    let left = 160.0;
    let step = 14.0;
    let height = 2.0 * MARGIN + step * rows.len().max(1) as f64;
    let span = WIDTH - left - MARGIN;
    let sx = |v: f64| left + (v - lo) / (hi - lo) * span;
    let y = |k: usize| MARGIN + step * (k as f64 + 0.5);

    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="10">"#
    )?;
    writeln!(s, r#"<rect width="{WIDTH}" height="{height}" fill="white"/>"#)?;
    writeln!(
        s,
        r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="grey" stroke-dasharray="4 3"/>"#,
        sx(0.0),
        MARGIN,
        height - MARGIN
    )?;
    for v in ticks(lo, hi) {
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.2}</text>"#, sx(v), height - MARGIN + 16.0)?;
    }
    for (k, (actor, e, l, u)) in rows.iter().enumerate() {
        let (x1, x2) = (l.map_or(left, sx), u.map_or(left + span, sx));
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, left - 8.0, y(k) + 3.5, escape(actor))?;
        writeln!(s, r#"<line x1="{x1:.2}" y1="{0:.2}" x2="{x2:.2}" y2="{0:.2}" stroke="black"/>"#, y(k))?;
        writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="firebrick"/>"#, sx(*e), y(k))?;
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">residualized metric with confidence interval</text>"#,
        left + span / 2.0,
        height - 16.0
    )?;
    s.push_str("</svg>\n");
    Ok(s)
}
