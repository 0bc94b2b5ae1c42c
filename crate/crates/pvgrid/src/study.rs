//! Staged integration study: load flow, power-factor compensation,
//! harmonic screening with filter insertion, stability margins, and the
//! compliance summary, exported as a deterministic report set.
//!
//! The pipeline is strictly forward: each stage's network derives from the
//! previous stage's, and no stage revisits an earlier decision. Power
//! factor is corrected before harmonics are screened; the filters'
//! fundamental-frequency reactive contribution is picked up by a final
//! confirmatory load flow rather than by re-running the sizing step.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compensation::{apply_svc, required_compensation};
use crate::error::{Error, Result};
use crate::harmonics::{
    design_single_tuned_filter, harmonic_scan, ieee519_check, BusThdVerdict, FilterDesign,
    HarmonicReport, ThdLimits,
};
use crate::network::{
    build_network, BusKind, MeterEnd, Monitor, Network, NetworkSpec, ShuntKind,
};
use crate::power_flow::{
    bus_power_quantities, power_quantities, solve_load_flow, PowerFlowSolution, PowerQuantities,
    SolverOptions,
};
use crate::report::{
    compliance_csv, flow_csv, flow_table, harmonics_csv, write_text, ComplianceRow, FlowRow,
};
use crate::stability::{loading_margin, MarginOptions, StabilityMargin};

/// Extra power-factor margin the sizing loop aims above the threshold, so
/// the exit check is met strictly rather than asymptotically from below.
const SIZING_HEADROOM: f64 = 5e-4;

/// Everything the pipeline needs beyond the case itself. Readable from a
/// JSON policy file; command-line flags override individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyPolicy {
    /// Minimum acceptable power-factor magnitude at every monitored meter.
    pub pf_threshold: f64,
    /// Voltage-class THD limits the screening is judged against.
    pub thd_limits: ThdLimits,
    /// Harmonic orders to scan. Empty means the union of the case's
    /// declared source orders, or 5/7/11/13 when none are declared.
    pub orders: Vec<u32>,
    /// Size-and-recheck passes allowed before compensation is declared
    /// infeasible.
    pub max_svc_passes: usize,
    /// Fixed compensator setting applied instead of sizing, for
    /// comparison runs against externally chosen ratings.
    pub q_override_mvar: Option<f64>,
    /// Switch in the case's planned filter slots when screening fails.
    pub use_filters: bool,
    pub solver: SolverOptions,
    pub margin_step: f64,
    pub margin_refine_tolerance: f64,
    pub margin_max_scale: f64,
    /// Compliance gate on reserve capacity, (collapse multiplier - 1) x 100.
    pub reserve_requirement_percent: f64,
    /// Compliance gate on the monitored bus voltage, percent of nominal.
    pub voltage_index_requirement_percent: f64,
}

impl Default for StudyPolicy {
    fn default() -> Self {
        Self {
            pf_threshold: 0.95,
            thd_limits: ThdLimits::default(),
            orders: Vec::new(),
            max_svc_passes: 10,
            q_override_mvar: None,
            use_filters: true,
            solver: SolverOptions::default(),
            margin_step: 0.01,
            margin_refine_tolerance: 1e-4,
            margin_max_scale: 10.0,
            reserve_requirement_percent: 95.0,
            voltage_index_requirement_percent: 95.0,
        }
    }
}

impl StudyPolicy {
    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::CaseFile(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// One monitored reading. Meters read the power delivered into the
/// monitored bus (the receiving convention): branch meters the flow off
/// the named branch end, bus meters the negated net injection. A bus
/// exporting through its meter therefore shows negative megawatts.
#[derive(Debug, Clone)]
pub struct MeterReading {
    pub label: String,
    pub bus: String,
    pub quantities: PowerQuantities,
    /// Power factor is negative (leading) with magnitude below the policy
    /// threshold: more reactive power is injected locally than the
    /// operating point can absorb.
    pub overcompensated: bool,
}

/// The network, solution, meters, and screening results after one stage.
#[derive(Debug, Clone)]
pub struct StageSnapshot {
    pub name: String,
    /// Declarative form of the stage network; re-solving it reproduces
    /// `solution` exactly.
    pub network: NetworkSpec,
    pub solution: PowerFlowSolution,
    pub meters: Vec<MeterReading>,
    pub harmonics: Option<HarmonicReport>,
    pub thd_verdicts: Vec<BusThdVerdict>,
}

/// A filter slot switched in by the pipeline, with its physical design.
#[derive(Debug, Clone)]
pub struct FilterAction {
    pub id: String,
    pub bus: String,
    pub order: u32,
    pub q_mvar: f64,
    pub design: FilterDesign,
}

#[derive(Debug, Clone, Default)]
pub struct StudyActions {
    pub svc_bus: Option<String>,
    /// Final compensator setting, megavars (cumulative across passes).
    pub svc_q_mvar: f64,
    pub svc_passes: usize,
    pub filters_on: Vec<FilterAction>,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub policy: StudyPolicy,
    pub scanned_orders: Vec<u32>,
    pub stages: Vec<StageSnapshot>,
    pub actions: StudyActions,
    pub margin: Option<StabilityMargin>,
    pub compliance: Vec<ComplianceRow>,
    /// Human-readable description of every gate that did not pass; empty
    /// exactly when `overall_pass`.
    pub failed_checks: Vec<String>,
    pub overall_pass: bool,
}

impl StudyReport {
    pub fn stage(&self, name: &str) -> Option<&StageSnapshot> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn final_stage(&self) -> &StageSnapshot {
        self.stages.last().expect("a study has at least the base stage")
    }
}

fn stage_err(stage: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::StageFailed {
        stage,
        source: Box::new(e),
    }
}

/// The case's monitor list, or every non-slack bus as a plain injection
/// meter when the case declares none.
fn monitors(network: &Network) -> Vec<Monitor> {
    if let Some(defaults) = &network.study_defaults {
        if !defaults.monitored.is_empty() {
            return defaults.monitored.clone();
        }
    }
    network
        .buses
        .iter()
        .filter(|b| b.kind != BusKind::Slack)
        .map(|b| Monitor {
            bus: b.id.clone(),
            branch: None,
            end: None,
        })
        .collect()
}

fn read_meter(
    network: &Network,
    solution: &PowerFlowSolution,
    monitor: &Monitor,
    pf_threshold: f64,
) -> Result<MeterReading> {
    let bus_pos = solution.bus_position(&monitor.bus)?;
    let (label, quantities) = match &monitor.branch {
        Some(branch_id) => {
            let branch = network
                .branches
                .iter()
                .find(|b| &b.id == branch_id)
                .ok_or_else(|| Error::InvalidInput {
                    what: "monitor",
                    detail: format!("branch `{branch_id}` is not in the case"),
                })?;
            let end = match monitor.end {
                Some(end) => end,
                None if branch.from_bus == monitor.bus => MeterEnd::From,
                None if branch.to_bus == monitor.bus => MeterEnd::To,
                None => {
                    return Err(Error::InvalidInput {
                        what: "monitor",
                        detail: format!(
                            "bus `{}` is not an endpoint of branch `{branch_id}`",
                            monitor.bus
                        ),
                    })
                }
            };
            let flow = solution
                .branch_flows
                .iter()
                .find(|f| &f.branch_id == branch_id)
                .ok_or_else(|| Error::InvalidInput {
                    what: "monitor",
                    detail: format!("branch `{branch_id}` is not in the solution"),
                })?;
            // End flows are metered into the branch; the meter reads what
            // the branch delivers into the bus.
            let (p, q) = match end {
                MeterEnd::From => (-flow.p_from_mw, -flow.q_from_mvar),
                MeterEnd::To => (-flow.p_to_mw, -flow.q_to_mvar),
            };
            let kv = solution.nominal_kv[bus_pos];
            (
                format!("{} ({branch_id})", monitor.bus),
                power_quantities(p, q, kv),
            )
        }
        None => {
            // Net injection is generation minus load; negate so a bus meter
            // reads what the network delivers into the bus, the same
            // receiving convention as a branch meter.
            let net = bus_power_quantities(solution, &monitor.bus)?;
            let kv = solution.nominal_kv[bus_pos];
            (
                monitor.bus.clone(),
                power_quantities(-net.p_mw, -net.q_mvar, kv),
            )
        }
    };
    let overcompensated = match quantities.power_factor {
        Some(pf) => pf < 0.0 && pf.abs() + 1e-9 < pf_threshold,
        None => false,
    };
    Ok(MeterReading {
        label,
        bus: monitor.bus.clone(),
        quantities,
        overcompensated,
    })
}

fn read_meters(
    network: &Network,
    solution: &PowerFlowSolution,
    pf_threshold: f64,
) -> Result<Vec<MeterReading>> {
    monitors(network)
        .iter()
        .map(|m| read_meter(network, solution, m, pf_threshold))
        .collect()
}

/// Reads the meter the case declares for `bus`, falling back to a net
/// delivery reading when it declares none. Both conventions read power
/// delivered into the bus.
pub fn meter_for_bus(
    network: &Network,
    solution: &PowerFlowSolution,
    bus: &str,
    pf_threshold: f64,
) -> Result<MeterReading> {
    let monitor = monitors(network)
        .into_iter()
        .find(|m| m.bus == bus)
        .unwrap_or_else(|| Monitor {
            bus: bus.to_string(),
            branch: None,
            end: None,
        });
    read_meter(network, solution, &monitor, pf_threshold)
}

/// The meter with the lowest power-factor magnitude below the threshold.
fn worst_below<'a>(meters: &'a [MeterReading], threshold: f64) -> Option<&'a MeterReading> {
    meters
        .iter()
        .filter_map(|m| m.quantities.power_factor.map(|pf| (m, pf.abs())))
        .filter(|(_, mag)| *mag + 1e-9 < threshold)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(m, _)| m)
}

fn resolve_orders(network: &Network, policy: &StudyPolicy) -> Vec<u32> {
    if !policy.orders.is_empty() {
        let set: BTreeSet<u32> = policy.orders.iter().copied().collect();
        return set.into_iter().collect();
    }
    let set: BTreeSet<u32> = network
        .harmonic_sources
        .iter()
        .flat_map(|s| s.spectrum.iter().map(|l| l.order))
        .collect();
    if set.is_empty() {
        vec![5, 7, 11, 13]
    } else {
        set.into_iter().collect()
    }
}

fn configured_compensation_bus(network: &Network) -> Result<String> {
    network
        .study_defaults
        .as_ref()
        .and_then(|d| d.compensation_bus.clone())
        .ok_or(Error::InvalidInput {
            what: "study defaults",
            detail: "the case names no compensation bus, but compensation is required".into(),
        })
}

/// Rating of the compensator slot at `bus`, if the case declares one.
fn svc_rating_at(network: &Network, bus: &str) -> Option<f64> {
    network.shunts.iter().find_map(|s| match s.kind {
        ShuntKind::Svc { q_limit_mvar, .. } if s.bus == bus => Some(q_limit_mvar),
        _ => None,
    })
}

/// Reactive setting of an already in-service compensator at `bus`, so
/// sizing accumulates on top of it instead of silently replacing it.
fn in_service_svc_q(network: &Network, bus: &str) -> f64 {
    network
        .shunts
        .iter()
        .find_map(|s| match s.kind {
            ShuntKind::Svc { q_mvar, .. } if s.bus == bus && s.in_service => Some(q_mvar),
            _ => None,
        })
        .unwrap_or(0.0)
}

fn snapshot(
    name: &'static str,
    network: &Network,
    orders: &[u32],
    policy: &StudyPolicy,
) -> Result<StageSnapshot> {
    let solution = solve_load_flow(network, &policy.solver).map_err(stage_err(name))?;
    let meters = read_meters(network, &solution, policy.pf_threshold)?;
    let harmonics = harmonic_scan(network, &solution, orders).map_err(stage_err(name))?;
    let thd_verdicts = ieee519_check(&harmonics, &policy.thd_limits);
    Ok(StageSnapshot {
        name: name.to_string(),
        network: network.to_spec(),
        solution,
        meters,
        harmonics: Some(harmonics),
        thd_verdicts,
    })
}

/// Runs the full pipeline on a case and assembles the report.
///
/// Stage order is fixed: the base solve, compensation when a monitored
/// power factor is out of band (or an override is given), filter insertion
/// when THD screening fails, then stability margins on whatever network
/// the earlier stages produced. A completed study either passes every
/// enabled check or names each failure in `failed_checks`.
pub fn run_study(network: &Network, policy: &StudyPolicy) -> Result<StudyReport> {
    let orders = resolve_orders(network, policy);
    let mut stages = vec![snapshot("base", network, &orders, policy)?];
    let mut actions = StudyActions::default();
    let mut net = network.clone();

    let triggered = worst_below(&stages[0].meters, policy.pf_threshold).is_some();
    if policy.q_override_mvar.is_some() || triggered {
        let bus = configured_compensation_bus(&net)?;
        let rating = svc_rating_at(&net, &bus);
        if let Some(q) = policy.q_override_mvar {
            net = apply_svc(&net, &bus, q, rating.unwrap_or(q.abs()))?;
            actions.svc_bus = Some(bus);
            actions.svc_q_mvar = q;
            actions.svc_passes = 1;
            stages.push(snapshot("after_svc", &net, &orders, policy)?);
        } else {
            let target = (policy.pf_threshold + SIZING_HEADROOM).min(1.0);
            let mut q_total = in_service_svc_q(&net, &bus);
            let mut meters = stages[0].meters.clone();
            let mut current = net.clone();
            let mut passes = 0usize;
            loop {
                let Some(worst) = worst_below(&meters, policy.pf_threshold) else {
                    break;
                };
                passes += 1;
                if passes > policy.max_svc_passes {
                    return Err(Error::CompensationInfeasible {
                        bus,
                        detail: format!(
                            "power factor {:.4} at {} is still below {:.4} after {} sizing passes",
                            worst.quantities.power_factor.unwrap_or(0.0).abs(),
                            worst.label,
                            policy.pf_threshold,
                            policy.max_svc_passes,
                        ),
                    });
                }
                let pf = worst.quantities.power_factor.unwrap_or(0.0).abs();
                let extra =
                    required_compensation(worst.quantities.p_mw.abs(), pf, target).map_err(
                        |e| Error::CompensationInfeasible {
                            bus: bus.clone(),
                            detail: e.to_string(),
                        },
                    )?;
                // A leading meter (reactive export) needs absorption, not
                // more injection.
                let direction = if worst.quantities.q_mvar >= 0.0 { 1.0 } else { -1.0 };
                q_total += direction * extra;
                if let Some(r) = rating {
                    if q_total.abs() > r.abs() + 1e-9 {
                        return Err(Error::CompensationInfeasible {
                            bus,
                            detail: format!(
                                "{q_total:.1} Mvar needed, device rating is {r:.1} Mvar"
                            ),
                        });
                    }
                }
                current = apply_svc(&net, &bus, q_total, rating.unwrap_or(f64::INFINITY))?;
                let sol = solve_load_flow(&current, &policy.solver)
                    .map_err(stage_err("after_svc"))?;
                meters = read_meters(&current, &sol, policy.pf_threshold)?;
            }
            if passes > 0 {
                net = current;
                actions.svc_bus = Some(bus);
                actions.svc_q_mvar = q_total;
                actions.svc_passes = passes;
                stages.push(snapshot("after_svc", &net, &orders, policy)?);
            }
        }
    }

    let screened = stages.last().expect("base stage exists");
    let thd_fails = screened.thd_verdicts.iter().any(|v| !v.pass);
    if thd_fails && policy.use_filters {
        let mut spec = net.to_spec();
        let mut switched = Vec::new();
        for shunt in &mut spec.shunts {
            if shunt.in_service {
                continue;
            }
            if let ShuntKind::SingleTunedFilter {
                order, q_mvar, ..
            } = shunt.kind
            {
                shunt.in_service = true;
                let kv = net.buses[net.bus_index(&shunt.bus)?].nominal_voltage_kv;
                let v_ln = kv * 1e3 / 3f64.sqrt();
                let design = design_single_tuned_filter(
                    q_mvar.abs() * 1e6 / 3.0,
                    v_ln,
                    net.base_frequency_hz,
                    order,
                )?;
                switched.push(FilterAction {
                    id: shunt.id.clone(),
                    bus: shunt.bus.clone(),
                    order,
                    q_mvar,
                    design,
                });
            }
        }
        if !switched.is_empty() {
            net = build_network(&spec)?;
            actions.filters_on = switched;
            stages.push(snapshot("after_filters", &net, &orders, policy)?);
        }
    }

    let margin = loading_margin(
        &net,
        &MarginOptions {
            step: policy.margin_step,
            refine_tolerance: policy.margin_refine_tolerance,
            max_scale: policy.margin_max_scale,
            monitored_bus: None,
            solver: policy.solver.clone(),
        },
    )
    .map_err(stage_err("margins"))?;

    let (compliance, failed_checks) = assess(&stages, &margin, policy);
    let overall_pass = failed_checks.is_empty();
    Ok(StudyReport {
        policy: policy.clone(),
        scanned_orders: orders,
        stages,
        actions,
        margin: Some(margin),
        compliance,
        failed_checks,
        overall_pass,
    })
}

fn assess(
    stages: &[StageSnapshot],
    margin: &StabilityMargin,
    policy: &StudyPolicy,
) -> (Vec<ComplianceRow>, Vec<String>) {
    let last = stages.last().expect("base stage exists");
    let mut rows = Vec::new();
    let mut failed = Vec::new();

    let thd_pass = last.thd_verdicts.iter().all(|v| v.pass);
    let thd_achieved = match &last.harmonics {
        Some(_) if !last.thd_verdicts.is_empty() => {
            let mut worst: Vec<&BusThdVerdict> = last.thd_verdicts.iter().collect();
            worst.sort_by(|a, b| b.thd_percent.total_cmp(&a.thd_percent));
            worst
                .iter()
                .take(2)
                .map(|v| format!("{:.2}% ({})", v.thd_percent, v.bus))
                .collect::<Vec<_>>()
                .join(", ")
        }
        _ => "not screened".to_string(),
    };
    rows.push(ComplianceRow {
        parameter: "Voltage THD".into(),
        requirement: "within IEEE 519 voltage-class limits".into(),
        achieved: thd_achieved,
        pass: thd_pass,
    });

    let pf_pass = last.meters.iter().all(|m| match m.quantities.power_factor {
        Some(pf) => pf.abs() + 1e-9 >= policy.pf_threshold,
        None => true,
    });
    let pf_achieved = if last.meters.is_empty() {
        "no monitored meters".to_string()
    } else {
        last.meters
            .iter()
            .map(|m| match m.quantities.power_factor {
                Some(pf) => format!("{:.1}% ({})", pf * 100.0, m.label),
                None => format!("no flow ({})", m.label),
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    rows.push(ComplianceRow {
        parameter: "Power Factor (PF)".into(),
        requirement: format!(">= {:.0}% leading/lagging", policy.pf_threshold * 100.0),
        achieved: pf_achieved,
        pass: pf_pass,
    });

    let v_index = margin.v_operating_pu * 100.0;
    rows.push(ComplianceRow {
        parameter: "Voltage Stability (% Index)".into(),
        requirement: format!(
            ">= {:.0}% of nominal voltage",
            policy.voltage_index_requirement_percent
        ),
        achieved: format!("{:.1}% ({})", v_index, margin.monitored_bus),
        pass: v_index + 1e-9 >= policy.voltage_index_requirement_percent,
    });

    let reserve = margin.reserve_capacity_percent;
    let reserve_pass =
        margin.capped || reserve + 1e-9 >= policy.reserve_requirement_percent;
    rows.push(ComplianceRow {
        parameter: "Voltage %B (Reserve Margin)".into(),
        requirement: format!(">= {:.0}% reserve capacity", policy.reserve_requirement_percent),
        achieved: if margin.capped {
            format!("> {:.2}% (scan ceiling, {})", reserve, margin.monitored_bus)
        } else {
            format!("{:.2}% ({})", reserve, margin.monitored_bus)
        },
        pass: reserve_pass,
    });

    for row in &rows {
        if !row.pass {
            failed.push(format!(
                "{}: achieved {}, requires {}",
                row.parameter, row.achieved, row.requirement
            ));
        }
    }
    for meter in &last.meters {
        if meter.overcompensated {
            failed.push(format!(
                "overcompensated at {}: power factor {:.1}% is leading with magnitude below {:.0}%",
                meter.label,
                meter.quantities.power_factor.unwrap_or(0.0) * 100.0,
                policy.pf_threshold * 100.0,
            ));
        }
    }
    (rows, failed)
}

fn meter_rows(meters: &[MeterReading]) -> Vec<FlowRow> {
    meters
        .iter()
        .map(|m| FlowRow::from_quantities(&m.label, &m.quantities))
        .collect()
}

/// Renders the whole report as one human-readable page.
pub fn summary_text(report: &StudyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Grid integration study");
    let _ = writeln!(out, "======================");
    for stage in &report.stages {
        let _ = writeln!(out);
        let _ = writeln!(out, "Stage: {}", stage.name);
        let _ = writeln!(out, "{}", "-".repeat(7 + stage.name.len()));
        let rows = meter_rows(&stage.meters);
        if rows.is_empty() {
            let _ = writeln!(out, "(no monitored meters)");
        } else {
            out.push_str(&flow_table(&rows));
        }
        if !stage.thd_verdicts.is_empty() {
            let _ = writeln!(out, "THD by bus:");
            for v in &stage.thd_verdicts {
                let _ = writeln!(
                    out,
                    "  {:<12} {:>7.2}%  (limit {:.1}%)  {}",
                    v.bus,
                    v.thd_percent,
                    v.limit_percent,
                    if v.pass { "pass" } else { "FAIL" }
                );
            }
        }
        for meter in &stage.meters {
            if meter.overcompensated {
                let _ = writeln!(out, "flag: overcompensated at {}", meter.label);
            }
        }
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "Actions");
    let _ = writeln!(out, "-------");
    match &report.actions.svc_bus {
        Some(bus) => {
            let _ = writeln!(
                out,
                "SVC at {bus}: {:.1} Mvar ({} sizing pass{})",
                report.actions.svc_q_mvar,
                report.actions.svc_passes,
                if report.actions.svc_passes == 1 { "" } else { "es" }
            );
        }
        None => {
            let _ = writeln!(out, "no compensation applied");
        }
    }
    if report.actions.filters_on.is_empty() {
        let _ = writeln!(out, "no filters switched in");
    } else {
        for f in &report.actions.filters_on {
            let _ = writeln!(
                out,
                "filter {} at {}: order {}, {:.0} Mvar, C={:.2} uF/phase, L={:.3} mH/phase",
                f.id,
                f.bus,
                f.order,
                f.q_mvar,
                f.design.capacitance_f * 1e6,
                f.design.inductance_h * 1e3,
            );
        }
    }

    if let Some(margin) = &report.margin {
        let _ = writeln!(out);
        let _ = writeln!(out, "Stability margins (monitored bus: {})", margin.monitored_bus);
        let _ = writeln!(out, "------------------");
        let _ = writeln!(out, "collapse load multiplier: {:.4}{}", margin.collapse_scale,
            if margin.capped { " (scan ceiling)" } else { "" });
        let _ = writeln!(out, "loading margin: {:.2}% of collapse loading", margin.loading_margin_percent);
        let _ = writeln!(out, "reserve capacity: {:.2}% of base loading", margin.reserve_capacity_percent);
        let _ = writeln!(
            out,
            "stable-voltage index: {:.2}% (operating {:.4} pu, nose {:.4} pu)",
            margin.literal_percent_b, margin.v_operating_pu, margin.v_stable_pu
        );
        let _ = writeln!(
            out,
            "note: the stable-voltage index and the reserve reading use different normalizations and are not comparable; both are reported."
        );
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "Compliance");
    let _ = writeln!(out, "----------");
    for row in &report.compliance {
        let _ = writeln!(
            out,
            "{:<28} {:<38} {:<44} {}",
            row.parameter,
            row.requirement,
            row.achieved,
            if row.pass { "pass" } else { "FAIL" }
        );
    }

    let _ = writeln!(out);
    if report.failed_checks.is_empty() {
        let _ = writeln!(out, "All checks passed.");
    } else {
        let _ = writeln!(out, "Failed checks:");
        for check in &report.failed_checks {
            let _ = writeln!(out, "  - {check}");
        }
    }
    out
}

/// Writes the report set into `dir`: one load-flow and one harmonics CSV
/// per stage, the compliance table, and the text summary. Re-exporting the
/// same report is byte-identical.
pub fn export_report(report: &StudyReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for stage in &report.stages {
        let path = dir.join(format!("loadflow_{}.csv", stage.name));
        write_text(&path, &flow_csv(&meter_rows(&stage.meters)))?;
        written.push(path);
        let path = dir.join(format!("harmonics_{}.csv", stage.name));
        write_text(&path, &harmonics_csv(stage.harmonics.as_ref()))?;
        written.push(path);
    }
    let path = dir.join("compliance.csv");
    write_text(&path, &compliance_csv(&report.compliance))?;
    written.push(path);
    let path = dir.join("summary.txt");
    write_text(&path, &summary_text(report))?;
    written.push(path);
    Ok(written)
}
