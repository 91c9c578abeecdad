//! SVG renderings: SHAP beeswarm summaries and ablation AUC bars.
//! Output bytes depend only on the inputs.

use std::fmt::Write as _;

use crate::audit::AblationRow;
use crate::cohort::FeatureSet;
use crate::learners::ModelKind;
use crate::shap::{ShapMatrix, ShapSummary};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Blue at 0, red at 1.
fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let (r0, g0, b0) = (0x1e as f64, 0x88 as f64, 0xe5 as f64);
    let (r1, g1, b1) = (0xff as f64, 0x0d as f64, 0x57 as f64);
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(r0, r1), mix(g0, g1), mix(b0, b1))
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
}

/// Beeswarm of the `max_features` most important features: one row per
/// feature in importance order, one point per instance placed by its
/// attribution and colored by the feature's value (blue low, red high).
pub fn beeswarm_svg(matrix: &ShapMatrix, summary: &ShapSummary, max_features: usize) -> String {
    let features: Vec<&str> = summary.top(max_features);
    let (left, right, top, row_h) = (200.0, 40.0, 50.0, 30.0);
    let plot_w = 520.0;
    let width = left + plot_w + right;
    let height = top + row_h * features.len() as f64 + 50.0;
    let extent = matrix.attributions.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let extent = if extent > 0.0 { extent } else { 1.0 };
    let x_of = |v: f64| left + plot_w * (0.5 + 0.5 * v / extent);

    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">SHAP summary</text>"#, width / 2.0);
    let axis_y = top + row_h * features.len() as f64;
    let _ = writeln!(
        out,
        r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#999" stroke-dasharray="3,3"/>"##,
        x_of(0.0),
        top - 10.0,
        axis_y
    );
    for (row, name) in features.iter().enumerate() {
        let Some(p) = matrix.feature_names.iter().position(|n| n == name) else { continue };
        let cy = top + row_h * (row as f64 + 0.5);
        let values = matrix.feature_values.column(p);
        let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let _ = writeln!(out, r#"<g class="feature" data-feature="{}">"#, escape(name));
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end" dominant-baseline="middle">{}</text>"#, left - 10.0, cy, escape(name));
        for (i, v) in matrix.attributions.column(p).iter().enumerate() {
            // low-discrepancy vertical jitter
            let jitter = ((i as f64 * 0.618_033_988_75).fract() - 0.5) * row_h * 0.7;
            let t = if hi > lo { (values[i] - lo) / (hi - lo) } else { 0.5 };
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.8"/>"#,
                x_of(*v),
                cy + jitter,
                ramp(t)
            );
        }
        let _ = writeln!(out, "</g>");
    }
    let _ = writeln!(out, r##"<line x1="{left}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="#333"/>"##, left + plot_w);
    for k in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let x = x_of(k * extent);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle" font-size="10">{:.3}</text>"#, axis_y + 14.0, k * extent);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">attribution (score units)</text>"#, left + plot_w / 2.0, axis_y + 34.0);
    out.push_str("</svg>\n");
    out
}

/// Grouped bars of test AUC: one group per classifier, one bar per feature set.
pub fn auc_bars_svg(rows: &[AblationRow]) -> String {
    let mut kinds: Vec<ModelKind> = rows.iter().map(|r| r.classifier).collect();
    kinds.sort();
    kinds.dedup();
    let mut sets: Vec<FeatureSet> = rows.iter().map(|r| r.feature_set).collect();
    sets.sort();
    sets.dedup();
    let colors = ["#4c72b0", "#dd8452", "#55a868"];
    let (left, top, plot_h, bar_w, gap) = (60.0, 50.0, 300.0, 28.0, 30.0);
    let group_w = bar_w * sets.len() as f64 + gap;
    let width = left + group_w * kinds.len() as f64 + 140.0;
    let height = top + plot_h + 60.0;
    let y_of = |auc: f64| top + plot_h * (1.0 - auc.clamp(0.0, 1.0));

    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">Test AUC by feature set</text>"#, width / 2.0);
    for k in 0..=10 {
        let v = k as f64 / 10.0;
        let y = y_of(v);
        let _ = writeln!(out, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#eee"/>"##, width - 140.0);
        let _ = writeln!(out, r#"<text x="{}" y="{y:.2}" text-anchor="end" dominant-baseline="middle" font-size="10">{v:.1}</text>"#, left - 6.0);
    }
    for (g, kind) in kinds.iter().enumerate() {
        let x0 = left + gap / 2.0 + group_w * g as f64;
        let _ = writeln!(out, r#"<g class="classifier" data-classifier="{kind}">"#);
        for (s, set) in sets.iter().enumerate() {
            if let Some(r) = rows.iter().find(|r| r.classifier == *kind && r.feature_set == *set) {
                let x = x0 + bar_w * s as f64;
                let y = y_of(r.test_auc);
                let _ = writeln!(
                    out,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{kind} {set}: {:.4}</title></rect>"#,
                    bar_w - 2.0,
                    top + plot_h - y,
                    colors[s % colors.len()],
                    r.test_auc
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{kind}</text>"#,
            x0 + bar_w * sets.len() as f64 / 2.0,
            top + plot_h + 18.0
        );
        let _ = writeln!(out, "</g>");
    }
    for (s, set) in sets.iter().enumerate() {
        let y = top + 20.0 * s as f64;
        let x = width - 120.0;
        let _ = writeln!(out, r#"<rect x="{x}" y="{y}" width="12" height="12" fill="{}"/>"#, colors[s % colors.len()]);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{set}</text>"#, x + 18.0, y + 10.0);
    }
    out.push_str("</svg>\n");
    out
}
