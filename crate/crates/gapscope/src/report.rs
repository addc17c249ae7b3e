// SPDX-License-Identifier: MIT OR Apache-2.0

//! Plot-ready CSV matrices with JSON sidecars.

use std::fmt::Write as _;

use gapscope_core::metrics::{BenchmarkReport, Heatmap};
use serde::Serialize;

/// Rows are layers, columns are positions or heads; empty cells had no
/// resolvable pair.
pub fn heatmap_csv(row_labels: &[String], hm: &Heatmap) -> String {
    let mut s = String::from("layer");
    for c in &hm.columns {
        s.push(',');
        s.push_str(&csv_field(c));
    }
    s.push('\n');
    for (r, label) in row_labels.iter().enumerate() {
        s.push_str(&csv_field(label));
        for c in 0..hm.columns.len() {
            s.push(',');
            if let Some(v) = hm.get(r, c) {
                write!(s, "{v:.9}").unwrap();
            }
        }
        s.push('\n');
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatmapSidecar<'a> {
    pub rows: &'a [String],
    pub columns: &'a [String],
    pub count: &'a [Vec<usize>],
    pub skipped: &'a [Vec<usize>],
    pub mean: &'a [Vec<Option<f64>>],
    pub meta: serde_json::Value,
}

pub fn heatmap_sidecar<'a>(rows: &'a [String], hm: &'a Heatmap, meta: serde_json::Value) -> HeatmapSidecar<'a> {
    HeatmapSidecar { rows, columns: &hm.columns, count: &hm.count, skipped: &hm.skipped, mean: &hm.mean, meta }
}

/// One row per (alpha, category), overall first.
pub fn steering_csv(rows: &[(f64, BenchmarkReport)]) -> String {
    let mut s = String::from("alpha,category,correct,total,accuracy,filtered\n");
    for (alpha, rep) in rows {
        let mut line = |cat: &str, sc: &gapscope_core::metrics::CategoryScore| {
            let acc = sc.accuracy().map(|a| format!("{a:.6}")).unwrap_or_default();
            writeln!(s, "{alpha},{},{},{},{acc},{}", csv_field(cat), sc.correct, sc.total, sc.filtered).unwrap();
        };
        line("overall", &rep.overall);
        for (cat, sc) in &rep.per_category {
            line(cat, sc);
        }
    }
    s
}
