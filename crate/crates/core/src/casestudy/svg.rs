//! Self-contained SVG charts rendered from case-study tables. Output depends
//! only on the table contents; coordinates are printed with two decimals.

use std::fmt::Write;

use super::{CaseError, Table};

const PALETTE: [&str; 12] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac", "#1b9e77", "#7570b3",
];
const PLOT_H: f64 = 240.0;
const TOP: f64 = 40.0;
const LEFT: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String, width: f64) {
    let base = TOP + PLOT_H;
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{base:.2}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.2}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>"#,
        width - 10.0
    );
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let y = base - v * PLOT_H;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{v:.2}</text>"#,
            LEFT - 4.0,
            y + 3.0
        );
    }
}

fn header(s: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn legend(s: &mut String, x: f64, names: &[String]) {
    for (i, n) in names.iter().enumerate() {
        let y = TOP + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{}"/>"#,
            y,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
            x + 14.0,
            y + 9.0,
            escape(n)
        );
    }
}

/// Grouped bars with values in [0, 1]. Each bar is `(series index, value)`;
/// the series index picks the color.
pub fn bar_chart(title: &str, series: &[String], groups: &[(String, Vec<(usize, f64)>)]) -> String {
    let bar = 10.0;
    let gap = 14.0;
    let widest = groups.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let group_w = bar * widest as f64 + gap;
    let plot_w = group_w * groups.len() as f64;
    let width = LEFT + plot_w + 140.0;
    let height = TOP + PLOT_H + 110.0;
    let mut s = String::new();
    header(&mut s, width, height, title);
    axes(&mut s, LEFT + plot_w + 10.0);
    let base = TOP + PLOT_H;
    for (g, (label, vals)) in groups.iter().enumerate() {
        let x0 = LEFT + gap / 2.0 + group_w * g as f64;
        for (i, &(k, v)) in vals.iter().enumerate() {
            let h = v.clamp(0.0, 1.0) * PLOT_H;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{bar:.2}" height="{h:.2}" fill="{}"/>"#,
                x0 + bar * i as f64,
                base - h,
                PALETTE[k % PALETTE.len()]
            );
        }
        let cx = x0 + bar * vals.len() as f64 / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" font-size="9" text-anchor="end" transform="rotate(-45 {cx:.2} {:.2})">{}</text>"#,
            base + 12.0,
            base + 12.0,
            escape(label)
        );
    }
    legend(&mut s, LEFT + plot_w + 20.0, series);
    s.push_str("</svg>\n");
    s
}

/// One polyline per series over evenly spaced x labels.
pub fn line_chart(title: &str, xs: &[String], series: &[(String, Vec<(usize, f64)>)]) -> String {
    let step = 50.0;
    let plot_w = step * xs.len().saturating_sub(1).max(1) as f64;
    let width = LEFT + plot_w + 160.0;
    let height = TOP + PLOT_H + 50.0;
    let mut s = String::new();
    header(&mut s, width, height, title);
    axes(&mut s, LEFT + plot_w + 20.0);
    let base = TOP + PLOT_H;
    for (i, x) in xs.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
            LEFT + 10.0 + step * i as f64,
            base + 14.0,
            escape(x)
        );
    }
    for (k, (_, ys)) in series.iter().enumerate() {
        let pts: Vec<String> = ys
            .iter()
            .enumerate()
            .map(|(i, &(_, y))| {
                format!(
                    "{:.2},{:.2}",
                    LEFT + 10.0 + step * i as f64,
                    base - y.clamp(0.0, 1.0) * PLOT_H
                )
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            PALETTE[k % PALETTE.len()]
        );
    }
    let names: Vec<String> = series.iter().map(|(n, _)| n.clone()).collect();
    legend(&mut s, LEFT + plot_w + 30.0, &names);
    s.push_str("</svg>\n");
    s
}

type Groups = Vec<(String, Vec<(usize, f64)>)>;

/// Groups rows by `key` columns (first-appearance order) and collects
/// `(series index, value)` per row.
fn grouped(t: &Table, key: &[&str], series: &str, value: &str) -> Result<(Vec<String>, Groups), CaseError> {
    let keys: Vec<usize> = key.iter().map(|k| t.column(k)).collect::<Result<_, _>>()?;
    let sc = t.column(series)?;
    let vals = t.floats(value)?;
    let mut names: Vec<String> = Vec::new();
    let mut groups: Groups = Vec::new();
    for (r, v) in t.rows.iter().zip(vals) {
        let label = keys.iter().map(|&k| r[k].as_str()).collect::<Vec<_>>().join(" ");
        let k = match names.iter().position(|n| *n == r[sc]) {
            Some(k) => k,
            None => {
                names.push(r[sc].clone());
                names.len() - 1
            }
        };
        match groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, g)) => g.push((k, v)),
            None => groups.push((label, vec![(k, v)])),
        }
    }
    Ok((names, groups))
}

/// Chart for case study `id` from its CSV table.
pub fn render(id: u32, t: &Table) -> Result<String, CaseError> {
    match id {
        1 => {
            let (names, groups) = grouped(t, &["kernel", "tds"], "variant", "norm_edp")?;
            Ok(bar_chart("Normalized EDP: native vs TTGT", &names, &groups))
        }
        2 => {
            let mut t = t.clone();
            let (r, c) = (t.column("rows")?, t.column("cols")?);
            t.header.push("aspect".into());
            for row in &mut t.rows {
                let a = format!("{}x{}", row[r], row[c]);
                row.push(a);
            }
            let (names, groups) = grouped(&t, &["class", "layer"], "aspect", "norm_edp")?;
            Ok(bar_chart("Normalized EDP by PE-array aspect ratio", &names, &groups))
        }
        3 => {
            let (xs, groups) = grouped(t, &["layer"], "fill_bw_gbps", "norm_edp")?;
            Ok(line_chart("Normalized EDP vs fill bandwidth (GB/s)", &xs, &groups))
        }
        other => Err(CaseError::UnknownCase(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_deterministic() {
        let t = Table::from_csv("layer,fill_bw_gbps,norm_edp\nA,1,1\nA,2,0.5\nB,1,1\nB,2,0.9\n")
            .unwrap();
        let a = render(3, &t).unwrap();
        assert_eq!(a, render(3, &t).unwrap());
        assert_eq!(a.matches("<polyline").count(), 2);
        assert!(a.starts_with("<svg"));
    }

    #[test]
    fn bars_per_series() {
        let t = Table::from_csv(
            "kernel,tds,variant,norm_edp\nk,16,native,1\nk,16,ttgt,0.5\n",
        )
        .unwrap();
        let s = render(1, &t).unwrap();
        assert_eq!(s.matches("<rect").count(), 2 + 1 + 2);
    }
}
