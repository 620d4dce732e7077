//! Sweep tables as CSV and as an SVG line chart of PSNR against training
//! fraction.

use std::fmt::Write as _;
use std::path::Path;

use super::sweep::{SweepRow, SweepTable, Variant};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "variant,depth,fraction,psnr,ssim,seed,epochs";

pub fn table_csv(t: &SweepTable) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in t.rows() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.variant, r.depth, r.fraction, r.psnr, r.ssim, r.seed, r.epochs
        )
        .expect("writing to a String");
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn emit_table_csv(t: &SweepTable, path: impl AsRef<Path>) -> Result<()> {
    if t.is_empty() {
        return Err(Error::contract("emit_table_csv", "empty table"));
    }
    write_file(path.as_ref(), &table_csv(t))
}

/// Inverse of [`table_csv`]. Subset hashes are not stored and read back as 0;
/// rows with a NaN PSNR are marked as failed.
pub fn parse_table_csv(text: &str) -> Result<SweepTable> {
    let mut lines = text.lines();
    let mut offset = 0;
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => offset += h.len() + 1,
        _ => {
            return Err(Error::Parse {
                offset: 0,
                msg: format!("expected header {CSV_HEADER:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        let bad = |msg: String| Error::Parse { offset, msg };
        if line.trim().is_empty() {
            offset += line.len() + 1;
            continue;
        }
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 7 {
            return Err(bad(format!("expected 7 fields, found {}", f.len())));
        }
        let num = |k: usize| {
            f[k].parse::<f64>()
                .map_err(|_| bad(format!("bad number {:?}", f[k])))
        };
        let int = |k: usize| {
            f[k].parse::<u64>()
                .map_err(|_| bad(format!("bad integer {:?}", f[k])))
        };
        let psnr = num(3)?;
        rows.push(SweepRow {
            variant: f[0].parse().map_err(|e: Error| bad(e.to_string()))?,
            depth: int(1)? as usize,
            fraction: num(2)?,
            psnr,
            ssim: num(4)?,
            seed: int(5)?,
            epochs: int(6)? as usize,
            subset_hash: 0,
            error: psnr.is_nan().then(|| "failed".to_string()),
        });
        offset += line.len() + 1;
    }
    SweepTable::new(rows)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 470.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 360.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn percent_label(fraction: f64) -> String {
    let s = format!("{:.2}", fraction * 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s}%")
}

/// Mean PSNR against training fraction (log axis), one polyline per
/// (variant, depth). Baselines are dashed.
pub fn plot_svg(t: &SweepTable) -> String {
    let mut fractions: Vec<f64> = t.rows().iter().map(|r| r.fraction).collect();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    let mut series: Vec<(usize, Variant)> = t.rows().iter().map(|r| (r.depth, r.variant)).collect();
    series.sort_unstable();
    series.dedup();
    let mut depths: Vec<usize> = series.iter().map(|s| s.0).collect();
    depths.dedup();

    let finite: Vec<f64> = t
        .rows()
        .iter()
        .map(|r| r.psnr)
        .filter(|p| p.is_finite())
        .collect();
    let (mut lo, mut hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| {
            (a.min(p), b.max(p))
        });
    if finite.is_empty() {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.08).max(0.25);
    let (lo, hi) = (lo - pad, hi + pad);

    let (lx0, lx1) = (
        fractions.first().map_or(0.0, |f| f.log10()),
        fractions.last().map_or(0.0, |f| f.log10()),
    );
    let x_of = |f: f64| {
        if lx1 > lx0 {
            LEFT + (f.log10() - lx0) / (lx1 - lx0) * (RIGHT - LEFT)
        } else {
            (LEFT + RIGHT) / 2.0
        }
    };
    let y_of = |p: f64| BOTTOM - (p - lo) / (hi - lo) * (BOTTOM - TOP);

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        w,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        w,
        r#"<path d="M{LEFT} {TOP} V{BOTTOM} H{RIGHT}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for &f in &fractions {
        let x = x_of(f);
        let _ = writeln!(
            w,
            r#"<line x1="{x:.2}" y1="{BOTTOM}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            BOTTOM + 5.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            BOTTOM + 20.0,
            percent_label(f)
        );
    }
    for k in 0..=4 {
        let p = lo + (hi - lo) * k as f64 / 4.0;
        let y = y_of(p);
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#,
            LEFT - 5.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{p:.2}</text>"#,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Training data (%)</text>"#,
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        w,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">PSNR (dB)</text>"#,
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0
    );

    for (k, &(depth, variant)) in series.iter().enumerate() {
        let color = PALETTE[depths.iter().position(|&d| d == depth).unwrap_or(0) % PALETTE.len()];
        let dash = match variant {
            Variant::Baseline => r#" stroke-dasharray="6 4""#,
            Variant::Nip => "",
        };
        let mut pts: Vec<&SweepRow> = t
            .rows()
            .iter()
            .filter(|r| r.depth == depth && r.variant == variant && r.psnr.is_finite())
            .collect();
        pts.sort_by(|a, b| a.fraction.total_cmp(&b.fraction));
        let points: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.2},{:.2}", x_of(r.fraction), y_of(r.psnr)))
            .collect();
        let _ = writeln!(
            w,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            points.join(" ")
        );
        for r in &pts {
            let _ = writeln!(
                w,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                x_of(r.fraction),
                y_of(r.psnr)
            );
        }
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
            RIGHT + 20.0,
            RIGHT + 50.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}">{variant} N={depth}</text>"#,
            RIGHT + 56.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot_svg(t: &SweepTable, path: impl AsRef<Path>) -> Result<()> {
    if t.is_empty() {
        return Err(Error::contract("emit_plot_svg", "empty table"));
    }
    write_file(path.as_ref(), &plot_svg(t))
}
