//! Standalone SVG gap chart: one panel per family, instances on the x-axis
//! sorted by `oracle_gap`, with one polyline for `oracle_gap` and one for
//! `dnn_gap`.

use std::fmt::Write as _;

use crate::bench::BoundReport;
use crate::error::{Error, Result};
use crate::formulations::Family;

const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 260.0;
const MARGIN: f64 = 50.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str, class: &str) {
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    writeln!(
        out,
        r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
        coords.join(" ")
    )
    .unwrap();
}

pub fn render_svg(rows: &[BoundReport]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Parameter("no rows to plot".into()));
    }
    let mut families: Vec<Family> = rows.iter().map(|r| r.family).collect();
    families.sort();
    families.dedup();
    let width = PANEL_W + 2.0 * MARGIN;
    let height = families.len() as f64 * (PANEL_H + 2.0 * MARGIN) + MARGIN;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    for (k, fam) in families.iter().enumerate() {
        let mut sel: Vec<&BoundReport> = rows.iter().filter(|r| r.family == *fam).collect();
        sel.sort_by(|a, b| {
            let ka = a.oracle_gap.unwrap_or(f64::INFINITY);
            let kb = b.oracle_gap.unwrap_or(f64::INFINITY);
            ka.total_cmp(&kb).then(a.id.cmp(&b.id))
        });
        let oy = k as f64 * (PANEL_H + 2.0 * MARGIN) + MARGIN;
        let gaps = sel.iter().flat_map(|r| [r.oracle_gap, r.dnn_gap]).flatten();
        let (lo, hi) = gaps.fold((0.0f64, 0.0f64), |(l, h), g| (l.min(g), h.max(g)));
        let hi = if hi - lo < 1e-12 { lo + 1.0 } else { hi };
        let span = (sel.len().max(2) - 1) as f64;
        let x = |i: usize| MARGIN + PANEL_W * i as f64 / span;
        let y = |g: f64| oy + PANEL_H * (1.0 - (g - lo) / (hi - lo));
        writeln!(s, r#"<g class="panel" id="panel-{fam}">"#).unwrap();
        writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{oy}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{MARGIN}" y="{:.1}">{} instances ({}), sorted by oracle gap</text>"#,
            oy - 8.0,
            esc(&fam.to_string()),
            sel.len()
        )
        .unwrap();
        for (v, label) in [(lo, format!("{lo:.2e}")), (hi, format!("{hi:.2e}"))] {
            writeln!(s, r#"<text x="2" y="{:.1}">{label}</text>"#, y(v) + 4.0).unwrap();
        }
        let series = |f: fn(&BoundReport) -> Option<f64>| -> Vec<(f64, f64)> {
            sel.iter()
                .enumerate()
                .filter_map(|(i, r)| f(r).map(|g| (x(i), y(g))))
                .collect()
        };
        polyline(&mut s, &series(|r| r.oracle_gap), "#1f77b4", "oracle_gap");
        polyline(&mut s, &series(|r| r.dnn_gap), "#d62728", "dnn_gap");
        let ly = oy + PANEL_H + 20.0;
        writeln!(
            s,
            r##"<text x="{MARGIN}" y="{ly}" fill="#1f77b4">oracle gap</text><text x="{:.1}" y="{ly}" fill="#d62728">DNN gap (best of D1B, D2B)</text>"##,
            MARGIN + 100.0
        )
        .unwrap();
        writeln!(s, "</g>").unwrap();
    }
    // runs are never killed, so slow ones stay in the data and are only flagged
    let capped = rows.iter().filter(|r| r.soft_cap_hit).count();
    writeln!(
        s,
        r#"<text class="footnote" x="{MARGIN}" y="{:.1}">{capped} of {} instances exceeded the soft time cap; they are included above.</text>"#,
        height - MARGIN / 2.0,
        rows.len()
    )
    .unwrap();
    writeln!(s, "</svg>").unwrap();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::ModelRecord;

    fn row(family: Family, i: usize, gap: f64) -> BoundReport {
        BoundReport {
            id: format!("{family}-{i}"),
            family,
            n: 6,
            rho0: 3,
            rho: 2,
            seed: i as u64,
            status: "ok".into(),
            d1b: ModelRecord::default(),
            d2b: ModelRecord::default(),
            d1a: ModelRecord::default(),
            d2a: ModelRecord::default(),
            oracle: Some(0.1),
            oracle_seconds: None,
            upper: Some(0.1),
            dnn_gap: Some(gap),
            oracle_gap: Some(0.0),
            soft_cap_hit: false,
        }
    }

    #[test]
    fn two_families_give_two_panels_with_two_series_each() {
        let rows: Vec<BoundReport> = (0..4)
            .map(|i| row(Family::Psd, i, 1e-4 * i as f64))
            .chain((0..3).map(|i| row(Family::Cop, i, 0.01 * i as f64)))
            .collect();
        let svg = render_svg(&rows).unwrap();
        assert_eq!(svg.matches(r#"class="panel""#).count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(render_svg(&[]).is_err());
        assert!(svg.contains("0 of 7 instances exceeded the soft time cap"));
    }

    #[test]
    fn single_row_and_missing_gaps_render() {
        let mut r = row(Family::Spn, 0, 0.0);
        r.oracle_gap = None;
        let svg = render_svg(&[r]).unwrap();
        assert!(!svg.contains("NaN"));
    }
}
