//! Per-iteration run records and their CSV/JSON forms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::operators::KktResidual;

pub const TRACE_CSV_HEADER: &str =
    "iter,dist_to_ref,stationarity,primal,complementarity,consensus,link,step_norm,wall_nanos";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Number of completed iterations.
    pub iter: usize,
    /// `‖x^k − x̄‖`, present only when a reference was supplied.
    pub dist_to_ref: Option<f64>,
    pub kkt: KktResidual,
    pub step_norm: f64,
    /// Elapsed time since the run started; zero unless timing is enabled.
    pub wall_nanos: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: String,
    /// `‖x⁰ − x̄‖` when a reference was supplied.
    pub initial_dist_to_ref: Option<f64>,
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

/// Seventeen significant digits, enough to round-trip any binary64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl RunTrace {
    pub fn new(method: &str, initial_dist_to_ref: Option<f64>) -> Self {
        Self {
            method: method.to_string(),
            initial_dist_to_ref,
            rows: Vec::new(),
            converged: false,
        }
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iter)
    }

    pub fn final_kkt(&self) -> Option<KktResidual> {
        self.rows.last().map(|r| r.kkt)
    }

    /// `‖x^k − x̄‖ / ‖x⁰ − x̄‖` for every recorded row, preceded by the
    /// initial value 1.
    pub fn normalized_errors(&self) -> Option<Vec<f64>> {
        let d0 = self.initial_dist_to_ref?;
        let scale = if d0 > 0.0 { 1.0 / d0 } else { 1.0 };
        let mut out = Vec::with_capacity(self.rows.len() + 1);
        out.push(if d0 > 0.0 { 1.0 } else { 0.0 });
        for r in &self.rows {
            out.push(r.dist_to_ref? * scale);
        }
        Some(out)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(TRACE_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let dist = r.dist_to_ref.map(format_float).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.iter,
                dist,
                format_float(r.kkt.stationarity),
                format_float(r.kkt.primal),
                format_float(r.kkt.complementarity),
                format_float(r.kkt.consensus),
                format_float(r.kkt.link),
                format_float(r.step_norm),
                r.wall_nanos
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
