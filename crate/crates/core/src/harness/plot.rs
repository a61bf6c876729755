//! Ratio-versus-degree plots from a sweep CSV.
//!
//! Each (tetrahedron, kind) series gets a tab-separated table and a small
//! standalone SVG with the maximum and median ratio per degree.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::sweep::{read_csv_file, SweepRecord};
use crate::error::Result;
use crate::problems::ProblemKind;

/// Per-degree statistics of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub p: usize,
    pub max: f64,
    pub median: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub tet_id: String,
    pub kind: ProblemKind,
    pub points: Vec<SeriesPoint>,
}

impl Series {
    pub fn file_stem(&self) -> String {
        let id: String = self
            .tet_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
            .collect();
        format!("{id}_{}", self.kind)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Groups finite ratios by series and degree.
pub fn series(records: &[SweepRecord]) -> Vec<Series> {
    let mut groups: Vec<(String, ProblemKind, Vec<(usize, Vec<f64>)>)> = Vec::new();
    for r in records.iter().filter(|r| r.ratio.is_finite()) {
        let g = match groups.iter().position(|g| g.0 == r.tet_id && g.1 == r.problem_kind) {
            Some(i) => i,
            None => {
                groups.push((r.tet_id.clone(), r.problem_kind, Vec::new()));
                groups.len() - 1
            }
        };
        let by_p = &mut groups[g].2;
        match by_p.iter_mut().find(|(p, _)| *p == r.p) {
            Some((_, v)) => v.push(r.ratio),
            None => by_p.push((r.p, vec![r.ratio])),
        }
    }
    groups
        .into_iter()
        .map(|(tet_id, kind, mut by_p)| {
            by_p.sort_by_key(|(p, _)| *p);
            let points = by_p
                .into_iter()
                .map(|(p, mut v)| SeriesPoint {
                    p,
                    max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    median: median(&mut v),
                    count: v.len(),
                })
                .collect();
            Series { tet_id, kind, points }
        })
        .collect()
}

pub fn series_tsv(s: &Series) -> String {
    let mut out = String::from("p\tmax_ratio\tmedian_ratio\tcount\n");
    for pt in &s.points {
        let _ = writeln!(out, "{}\t{:.16e}\t{:.16e}\t{}", pt.p, pt.max, pt.median, pt.count);
    }
    out
}

pub fn series_svg(s: &Series) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const LEFT: f64 = 64.0;
    const RIGHT: f64 = 16.0;
    const TOP: f64 = 32.0;
    const BOTTOM: f64 = 44.0;

    let p_lo = s.points.first().map_or(0, |q| q.p) as f64;
    let p_hi = s.points.last().map_or(1, |q| q.p) as f64;
    let p_span = (p_hi - p_lo).max(1.0);
    let y_hi = s.points.iter().map(|q| q.max).fold(1.0, f64::max);
    // ratios are at least one, so the axis starts there
    let y_lo = 1.0_f64.min(s.points.iter().map(|q| q.median).fold(f64::INFINITY, f64::min));
    let y_span = if y_hi - y_lo < 1e-3 { 1e-3 } else { (y_hi - y_lo) * 1.1 };
    let x = |p: f64| LEFT + (p - p_lo) / p_span * (W - LEFT - RIGHT);
    let y = |v: f64| H - BOTTOM - (v - y_lo) / y_span * (H - TOP - BOTTOM);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{} / {}</text>"#,
        W / 2.0,
        s.tet_id,
        s.kind
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT},{TOP} V{} H{}" fill="none" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT
    );
    for pt in &s.points {
        let px = x(pt.p as f64);
        let _ = writeln!(
            svg,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 14.0,
            pt.p
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">p</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 8.0
    );
    for i in 0..=4 {
        let v = y_lo + y_span * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.4}</text>"#,
            LEFT - 4.0,
            y(v) + 4.0
        );
    }
    for (label, color, dy, pick) in [
        ("max", "#c0392b", 0.0, (|q: &SeriesPoint| q.max) as fn(&SeriesPoint) -> f64),
        ("median", "#2471a3", 14.0, |q: &SeriesPoint| q.median),
    ] {
        let path: Vec<String> = s
            .points
            .iter()
            .map(|q| format!("{:.1},{:.1}", x(q.p as f64), y(pick(q))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for q in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                x(q.p as f64),
                y(pick(q))
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{label}</text>"#,
            W - RIGHT - 60.0,
            TOP + 10.0 + dy
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `<stem>.tsv` and `<stem>.svg` for every series and returns the
/// written paths. An empty CSV writes nothing.
pub fn emit_plots(csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let records = read_csv_file(csv)?;
    plot_records(&records, out_dir)
}

pub fn plot_records(records: &[SweepRecord], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let all = series(records);
    if all.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for s in &all {
        let stem = s.file_stem();
        let tsv = out_dir.join(format!("{stem}.tsv"));
        std::fs::write(&tsv, series_tsv(s))?;
        let svg = out_dir.join(format!("{stem}.svg"));
        std::fs::write(&svg, series_svg(s))?;
        written.push(tsv);
        written.push(svg);
    }
    Ok(written)
}
