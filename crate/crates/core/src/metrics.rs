//! Distances between population vectors and report tables.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Total variation distance `1/2 sum |p_k - q_k|` over the union of keys;
/// a key missing from one side counts as zero there.
pub fn total_variation<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, &pv) in p {
        sum += (pv - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, &qv) in q {
        if !p.contains_key(k) {
            sum += qv.abs();
        }
    }
    0.5 * sum
}

/// Total variation distance of two vectors over the same index set.
pub fn total_variation_aligned(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "aligned vectors differ in length");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// One row of a [`ConvergenceTrace`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub sweep: usize,
    pub tv: f64,
    /// Active set size at the end of the sweep.
    pub active: usize,
    pub elapsed: Duration,
}

/// Per-sweep convergence record of a mitigation run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    entries: Vec<TraceEntry>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry; sweep indices must be strictly increasing.
    pub fn push(&mut self, entry: TraceEntry) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if entry.sweep <= last.sweep {
                return Err(Error::contract(format!(
                    "trace sweep {} does not follow {}",
                    entry.sweep, last.sweep
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn tv_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.tv).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_tv(&self) -> Option<f64> {
        self.entries.last().map(|e| e.tv)
    }
}

/// Column layout of rendered tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableStyle {
    /// Comma-separated with a plain header row.
    Csv,
    /// Whitespace-separated with a `#`-prefixed header, as read by gnuplot.
    Gnuplot,
}

/// Renders a header and rows of pre-formatted cells.
pub fn render_table(header: &[&str], rows: &[Vec<String>], style: TableStyle) -> String {
    let mut out = String::new();
    match style {
        TableStyle::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for r in rows {
                out.push_str(&r.join(","));
                out.push('\n');
            }
        }
        TableStyle::Gnuplot => {
            out.push_str("# ");
            out.push_str(&header.join(" "));
            out.push('\n');
            for r in rows {
                out.push_str(&r.join(" "));
                out.push('\n');
            }
        }
    }
    out
}

/// Trace table with columns `sweep, tv, active, elapsed_s`.
pub fn render_trace(trace: &ConvergenceTrace, style: TableStyle) -> String {
    let rows: Vec<Vec<String>> = trace
        .entries()
        .iter()
        .map(|e| {
            vec![
                e.sweep.to_string(),
                format!("{:e}", e.tv),
                e.active.to_string(),
                format!("{:.6}", e.elapsed.as_secs_f64()),
            ]
        })
        .collect();
    render_table(&["sweep", "tv", "active", "elapsed_s"], &rows, style)
}
