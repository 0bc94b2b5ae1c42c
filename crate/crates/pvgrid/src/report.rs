//! Deterministic tabular output: aligned text tables for the terminal and
//! CSV files for downstream tooling. All numbers are rendered through
//! fixed-precision formatting so re-exporting the same data produces
//! byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::harmonics::HarmonicReport;
use crate::power_flow::{PowerFlowSolution, PowerQuantities};
use crate::rl::EpisodeTrace;
use crate::stability::NosePoint;

/// One row of a load-flow table: a bus injection or a metered branch end.
#[derive(Debug, Clone)]
pub struct FlowRow {
    pub id: String,
    pub p_mw: f64,
    pub q_mvar: f64,
    pub current_a: f64,
    pub power_factor: Option<f64>,
}

impl FlowRow {
    pub fn from_quantities(id: &str, q: &PowerQuantities) -> Self {
        Self {
            id: id.to_string(),
            p_mw: q.p_mw,
            q_mvar: q.q_mvar,
            current_a: q.current_a,
            power_factor: q.power_factor,
        }
    }
}

fn pf_percent(pf: Option<f64>) -> String {
    match pf {
        Some(value) => format!("{:.1}", value * 100.0),
        None => "no flow".to_string(),
    }
}

/// Bus-injection rows for every bus, in case-file order.
pub fn solution_rows(solution: &PowerFlowSolution) -> Vec<FlowRow> {
    solution
        .bus_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let q = crate::power_flow::power_quantities(
                solution.p_injection_mw[i],
                solution.q_injection_mvar[i],
                solution.nominal_kv[i],
            );
            FlowRow::from_quantities(id, &q)
        })
        .collect()
}

pub const FLOW_CSV_HEADER: &str = "id,mw,mvar,amp,pf_percent";

pub fn flow_csv(rows: &[FlowRow]) -> String {
    let mut out = String::from(FLOW_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let pf = match row.power_factor {
            Some(value) => format!("{:.1}", value * 100.0),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{:.3},{:.3},{:.1},{}",
            row.id, row.p_mw, row.q_mvar, row.current_a, pf
        );
    }
    out
}

/// Aligned five-column table: ID, MW, Mvar, Amp, %PF.
pub fn flow_table(rows: &[FlowRow]) -> String {
    let mut cells: Vec<[String; 5]> = vec![[
        "ID".into(),
        "MW".into(),
        "Mvar".into(),
        "Amp".into(),
        "%PF".into(),
    ]];
    for row in rows {
        cells.push([
            row.id.clone(),
            format!("{:.3}", row.p_mw),
            format!("{:.3}", row.q_mvar),
            format!("{:.1}", row.current_a),
            pf_percent(row.power_factor),
        ]);
    }
    let mut widths = [0usize; 5];
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &cells {
        let mut line = String::new();
        let _ = write!(line, "{:<width$}", row[0], width = widths[0]);
        for i in 1..5 {
            let _ = write!(line, "  {:>width$}", row[i], width = widths[i]);
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub const HARMONICS_CSV_HEADER: &str = "bus,order,v_h_percent,thd_percent";

pub fn harmonics_csv(report: Option<&HarmonicReport>) -> String {
    let mut out = String::from(HARMONICS_CSV_HEADER);
    out.push('\n');
    if let Some(report) = report {
        for bus in &report.buses {
            for (order, v) in &bus.components_percent {
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{:.6}",
                    bus.bus, order, v, bus.thd_percent
                );
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ComplianceRow {
    pub parameter: String,
    pub requirement: String,
    pub achieved: String,
    pub pass: bool,
}

pub const COMPLIANCE_CSV_HEADER: &str = "parameter,requirement,achieved,verdict";

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn compliance_csv(rows: &[ComplianceRow]) -> String {
    let mut out = String::from(COMPLIANCE_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_quote(&row.parameter),
            csv_quote(&row.requirement),
            csv_quote(&row.achieved),
            if row.pass { "pass" } else { "FAIL" }
        );
    }
    out
}

pub const NOSE_CURVE_CSV_HEADER: &str = "scale,voltage_pu";

pub fn nose_curve_csv(points: &[NosePoint]) -> String {
    let mut out = String::from(NOSE_CURVE_CSV_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{:.6},{:.6}", p.scale, p.voltage_pu);
    }
    out
}

pub const TRACE_CSV_HEADER: &str = "step,voltage_pu,action_mvar,reward";

pub fn trace_csv(trace: &EpisodeTrace) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for s in &trace.steps {
        let _ = writeln!(
            out,
            "{},{:.6},{:.1},{:.6}",
            s.step, s.voltage_pu, s.action_mvar, s.reward
        );
    }
    out
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}
