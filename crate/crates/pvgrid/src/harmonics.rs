//! Harmonic penetration analysis, THD, filter design, and IEEE 519 checks.
//!
//! Each harmonic order is an independent linear solve `Y(h) V(h) = I(h)`
//! over the admittance matrix at that order. The slack bus models an ideal
//! fundamental source, so at harmonic orders it is a short circuit: its row
//! and column are grounded and the reduced system is solved for the
//! remaining buses. Source injections are current spectra expressed as a
//! percentage of each source's fundamental current, which is derived from
//! its MVA and the solved fundamental voltage at its bus.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{HarmonicSource, Network};
use crate::power_flow::PowerFlowSolution;

/// Harmonic voltages at one bus, as percentages of its fundamental voltage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusHarmonics {
    pub bus: String,
    pub nominal_kv: f64,
    pub fundamental_pu: f64,
    /// Order -> harmonic voltage in percent of the fundamental.
    pub components_percent: BTreeMap<u32, f64>,
    pub thd_percent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarmonicReport {
    pub orders: Vec<u32>,
    pub buses: Vec<BusHarmonics>,
}

impl HarmonicReport {
    pub fn bus(&self, id: &str) -> Result<&BusHarmonics> {
        self.buses
            .iter()
            .find(|b| b.bus == id)
            .ok_or_else(|| Error::UnknownBus(id.to_string()))
    }

    pub fn thd_at(&self, id: &str) -> Result<f64> {
        Ok(self.bus(id)?.thd_percent)
    }
}

/// Total harmonic distortion in percent: RMS of the components over the
/// fundamental.
pub fn thd(fundamental: f64, components: &[f64]) -> Result<f64> {
    if fundamental <= 0.0 {
        return Err(Error::InvalidInput {
            what: "fundamental voltage",
            detail: format!("{fundamental} is not positive"),
        });
    }
    let sum_sq: f64 = components.iter().map(|c| c * c).sum();
    Ok(sum_sq.sqrt() / fundamental * 100.0)
}

/// Runs the per-order scan with the network's own declared sources.
pub fn harmonic_scan(
    network: &Network,
    fundamental: &PowerFlowSolution,
    orders: &[u32],
) -> Result<HarmonicReport> {
    harmonic_scan_with_sources(network, fundamental, &network.harmonic_sources, orders)
}

/// Runs the per-order scan with an explicit source list.
pub fn harmonic_scan_with_sources(
    network: &Network,
    fundamental: &PowerFlowSolution,
    sources: &[HarmonicSource],
    orders: &[u32],
) -> Result<HarmonicReport> {
    let mut orders: Vec<u32> = orders.to_vec();
    orders.sort_unstable();
    orders.dedup();
    if let Some(&bad) = orders.iter().find(|&&h| h < 2) {
        return Err(Error::InvalidHarmonicOrder(bad));
    }

    let n = network.bus_count();
    let slack = network.slack_index();
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();

    // Fundamental current phasor magnitude per source, per-unit.
    let mut injections: Vec<(usize, f64, &HarmonicSource)> = Vec::new();
    for src in sources {
        let i = network.bus_index(&src.bus)?;
        let v1 = fundamental.v_magnitude_pu[fundamental.bus_position(&src.bus)?];
        injections.push((i, network.mva_to_pu(src.fundamental_mva) / v1, src));
    }

    let mut per_bus_components: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); n];
    for &h in &orders {
        let y = network.admittance_matrix(h);
        let mut y_red = DMatrix::from_element(n - 1, n - 1, Complex64::ZERO);
        for (r, &i) in keep.iter().enumerate() {
            for (c, &j) in keep.iter().enumerate() {
                y_red[(r, c)] = y[(i, j)];
            }
        }
        let mut current = DVector::from_element(n - 1, Complex64::ZERO);
        for (bus, i1, src) in &injections {
            for line in &src.spectrum {
                if line.order == h {
                    let phasor = Complex64::from_polar(
                        i1 * line.magnitude_percent / 100.0,
                        line.phase_deg.to_radians(),
                    );
                    if let Some(r) = keep.iter().position(|&k| k == *bus) {
                        current[r] += phasor;
                    }
                }
            }
        }
        let lu = y_red.lu();
        // A resonant (singular) Y(h) does not always fail the solve: it can
        // instead produce astronomically large voltages from a pivot at
        // rounding-noise level. Measure pivots against the admittance scale
        // of the unreduced matrix, which survives resonant cancellation.
        let y_scale = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let degenerate = (0..n - 1).any(|i| lu.u()[(i, i)].norm() <= y_scale * 1e-10);
        if degenerate {
            return Err(Error::SingularHarmonicNetwork { order: h });
        }
        let v_red = lu
            .solve(&current)
            .filter(|v| v.iter().all(|x| x.re.is_finite() && x.im.is_finite()))
            .ok_or(Error::SingularHarmonicNetwork { order: h })?;
        for (r, &i) in keep.iter().enumerate() {
            let v1 = fundamental.v_magnitude_pu[i];
            per_bus_components[i].insert(h, v_red[r].norm() / v1 * 100.0);
        }
        per_bus_components[slack].insert(h, 0.0);
    }

    let buses = network
        .buses
        .iter()
        .enumerate()
        .map(|(i, bus)| {
            let components = per_bus_components[i].clone();
            let sum_sq: f64 = components.values().map(|p| p * p).sum();
            BusHarmonics {
                bus: bus.id.clone(),
                nominal_kv: bus.nominal_voltage_kv,
                fundamental_pu: fundamental.v_magnitude_pu[i],
                components_percent: components,
                thd_percent: sum_sq.sqrt(),
            }
        })
        .collect();

    Ok(HarmonicReport { orders, buses })
}

/// A designed single-tuned shunt filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterDesign {
    pub target_order: u32,
    pub reactive_power_per_phase_var: f64,
    pub line_to_neutral_voltage_v: f64,
    pub fundamental_hz: f64,
    pub capacitance_f: f64,
    pub inductance_h: f64,
    pub tuned_frequency_hz: f64,
}

impl FilterDesign {
    /// Resonant frequency recomputed from the stored L and C.
    pub fn resonant_frequency_hz(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * (self.inductance_h * self.capacitance_f).sqrt())
    }
}

/// Sizes the capacitor from per-phase reactive power at line-to-neutral
/// voltage and fundamental frequency, then picks the inductor so the branch
/// resonates at `target_order` times the fundamental.
pub fn design_single_tuned_filter(
    q_per_phase_var: f64,
    v_line_neutral_v: f64,
    fundamental_hz: f64,
    target_order: u32,
) -> Result<FilterDesign> {
    for (value, what) in [
        (q_per_phase_var, "per-phase reactive power"),
        (v_line_neutral_v, "line-to-neutral voltage"),
        (fundamental_hz, "fundamental frequency"),
    ] {
        if value <= 0.0 {
            return Err(Error::InvalidInput {
                what,
                detail: format!("{value} is not positive"),
            });
        }
    }
    if target_order < 2 {
        return Err(Error::InvalidHarmonicOrder(target_order));
    }
    let w1 = 2.0 * std::f64::consts::PI * fundamental_hz;
    let capacitance_f = q_per_phase_var / (w1 * v_line_neutral_v * v_line_neutral_v);
    let tuned_frequency_hz = target_order as f64 * fundamental_hz;
    let wt = 2.0 * std::f64::consts::PI * tuned_frequency_hz;
    let inductance_h = 1.0 / (wt * wt * capacitance_f);
    Ok(FilterDesign {
        target_order,
        reactive_power_per_phase_var: q_per_phase_var,
        line_to_neutral_voltage_v: v_line_neutral_v,
        fundamental_hz,
        capacitance_f,
        inductance_h,
        tuned_frequency_hz,
    })
}

/// Voltage-class THD limits, highest class last. Defaults follow IEEE
/// 519-2014 Table 1, including the 1.5% bound for grids above 161 kV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThdLimits {
    /// `(upper bound of the class in kV, THD limit in percent)`; a bus is
    /// checked against the first row whose bound is not exceeded.
    pub classes: Vec<(f64, f64)>,
    /// Limit for voltages above every listed bound.
    pub top_class_percent: f64,
}

impl Default for ThdLimits {
    fn default() -> Self {
        Self {
            classes: vec![(1.0, 8.0), (69.0, 5.0), (161.0, 2.5)],
            top_class_percent: 1.5,
        }
    }
}

impl ThdLimits {
    pub fn limit_for_kv(&self, kv: f64) -> f64 {
        for &(bound, limit) in &self.classes {
            if kv <= bound {
                return limit;
            }
        }
        self.top_class_percent
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusThdVerdict {
    pub bus: String,
    pub nominal_kv: f64,
    pub thd_percent: f64,
    pub limit_percent: f64,
    pub pass: bool,
}

/// Checks every bus in the report against its voltage-class THD limit.
pub fn ieee519_check(report: &HarmonicReport, limits: &ThdLimits) -> Vec<BusThdVerdict> {
    report
        .buses
        .iter()
        .map(|b| {
            let limit = limits.limit_for_kv(b.nominal_kv);
            BusThdVerdict {
                bus: b.bus.clone(),
                nominal_kv: b.nominal_kv,
                thd_percent: b.thd_percent,
                limit_percent: limit,
                pass: b.thd_percent <= limit,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, NetworkSpec};
    use crate::power_flow::{solve_load_flow, SolverOptions};

    #[test]
    fn thd_of_three_four_five_magnitudes() {
        assert!((thd(1.0, &[0.03, 0.04]).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn thd_edge_cases() {
        assert_eq!(thd(1.0, &[]).unwrap(), 0.0);
        assert!((thd(1.0, &[0.0040]).unwrap() - 0.40).abs() < 1e-12);
        assert!(thd(0.0, &[0.1]).is_err());
    }

    #[test]
    fn thd_matches_time_domain_residual_rms() {
        // Synthesize the waveform, remove the fundamental, compare RMS
        // ratios. Orthogonality over a full period makes this exact.
        let fundamental = 0.97;
        let components = [(5u32, 0.12), (7u32, 0.065), (11u32, 0.031)];
        let analytic = thd(fundamental, &[0.12, 0.065, 0.031]).unwrap();
        let samples = 1 << 14;
        let mut residual_sq = 0.0;
        for k in 0..samples {
            let t = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
            let mut residual = 0.0;
            for (h, a) in components {
                residual += a * (h as f64 * t).sin();
            }
            residual_sq += residual * residual;
        }
        let residual_rms = (residual_sq / samples as f64).sqrt();
        let fundamental_rms = fundamental / 2.0_f64.sqrt();
        let oracle = residual_rms / fundamental_rms * 100.0;
        assert!(
            (analytic - oracle).abs() / oracle < 1e-9,
            "analytic {analytic} oracle {oracle}"
        );
    }

    fn source_case(mag5_percent: f64, x_pu: f64) -> NetworkSpec {
        serde_json::from_str(&format!(
            r#"{{
            "base_mva": 100.0,
            "base_frequency_hz": 50.0,
            "buses": [
                {{"id": "grid", "kind": "slack", "nominal_voltage_kv": 33.0}},
                {{"id": "pcc", "kind": "pq", "nominal_voltage_kv": 33.0}}
            ],
            "branches": [
                {{"id": "tie", "from_bus": "grid", "to_bus": "pcc", "kind": "line",
                 "series_resistance_pu": 0.0, "series_reactance_pu": {x_pu}}}
            ],
            "harmonic_sources": [
                {{"id": "inv", "bus": "pcc", "fundamental_mva": 100.0,
                 "spectrum": [{{"order": 5, "magnitude_percent": {mag5_percent}}}]}}
            ]
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn no_sources_means_no_distortion() {
        let mut spec = source_case(10.0, 0.1);
        spec.harmonic_sources.clear();
        let net = build_network(&spec).unwrap();
        let sol = solve_load_flow(&net, &SolverOptions::default()).unwrap();
        let report = harmonic_scan(&net, &sol, &[5, 7, 11, 13]).unwrap();
        for bus in &report.buses {
            assert_eq!(bus.thd_percent, 0.0);
        }
    }

    #[test]
    fn single_source_behind_a_reactance() {
        // No load: V1 = 1.0, I1 = 1.0 pu, I5 = 0.1 pu through j0.1*5.
        let net = build_network(&source_case(10.0, 0.1)).unwrap();
        let sol = solve_load_flow(&net, &SolverOptions::default()).unwrap();
        let report = harmonic_scan(&net, &sol, &[5]).unwrap();
        let pcc = report.bus("pcc").unwrap();
        let expected = 0.1 * 0.5 * 100.0;
        assert!((pcc.components_percent[&5] - expected).abs() < 1e-9);
        assert!((pcc.thd_percent - expected).abs() < 1e-9);
        assert_eq!(report.bus("grid").unwrap().thd_percent, 0.0);
    }

    #[test]
    fn scan_is_linear_in_source_magnitude() {
        let net1 = build_network(&source_case(7.0, 0.08)).unwrap();
        let net2 = build_network(&source_case(14.0, 0.08)).unwrap();
        let sol = solve_load_flow(&net1, &SolverOptions::default()).unwrap();
        let r1 = harmonic_scan(&net1, &sol, &[5]).unwrap();
        let r2 = harmonic_scan(&net2, &sol, &[5]).unwrap();
        let a = r1.bus("pcc").unwrap();
        let b = r2.bus("pcc").unwrap();
        assert!((b.components_percent[&5] - 2.0 * a.components_percent[&5]).abs() < 1e-9);
        assert!((b.thd_percent - 2.0 * a.thd_percent).abs() < 1e-9);
    }

    #[test]
    fn inserting_a_tuned_filter_reduces_its_order() {
        let mut spec = source_case(10.0, 0.1);
        spec.shunts = serde_json::from_str(
            r#"[{"id": "f5", "bus": "pcc", "kind": "single_tuned_filter",
                 "order": 5, "q_mvar": 20.0}]"#,
        )
        .unwrap();
        let bare = build_network(&source_case(10.0, 0.1)).unwrap();
        let filtered = build_network(&spec).unwrap();
        let sol_bare = solve_load_flow(&bare, &SolverOptions::default()).unwrap();
        let sol_filt = solve_load_flow(&filtered, &SolverOptions::default()).unwrap();
        let before = harmonic_scan(&bare, &sol_bare, &[5]).unwrap();
        let after = harmonic_scan(&filtered, &sol_filt, &[5]).unwrap();
        let v5_before = before.bus("pcc").unwrap().components_percent[&5];
        let v5_after = after.bus("pcc").unwrap().components_percent[&5];
        assert!(
            v5_after < v5_before,
            "filter failed to reduce: {v5_after} vs {v5_before}"
        );
    }

    #[test]
    fn exact_parallel_resonance_is_reported() {
        // Line charging against the series reactance resonates exactly at
        // h^2 = 2/(x b): x = 0.08, b = 1.0 puts it on order 5.
        let mut spec = source_case(10.0, 0.08);
        spec.branches[0].shunt_susceptance_pu = 1.0;
        let net = build_network(&spec).unwrap();
        let sol = solve_load_flow(&net, &SolverOptions::default()).unwrap();
        match harmonic_scan(&net, &sol, &[5]) {
            Err(Error::SingularHarmonicNetwork { order: 5 }) => {}
            other => panic!("expected resonance error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_sub_second_orders() {
        let net = build_network(&source_case(10.0, 0.1)).unwrap();
        let sol = solve_load_flow(&net, &SolverOptions::default()).unwrap();
        assert!(matches!(
            harmonic_scan(&net, &sol, &[1, 5]),
            Err(Error::InvalidHarmonicOrder(1))
        ));
    }

    #[test]
    fn filter_design_reproduces_published_capacitance() {
        // A 14.6 Mvar, 33 kV bank: Q per phase across line-to-neutral.
        let v_ln = 33_000.0 / 3.0_f64.sqrt();
        let q_phase = 42.74e-6 * (2.0 * std::f64::consts::PI * 50.0) * v_ln * v_ln;
        let design = design_single_tuned_filter(q_phase, v_ln, 50.0, 5).unwrap();
        assert!((design.capacitance_f - 42.74e-6).abs() / 42.74e-6 < 1e-9);
        // Tuned to 250 Hz the inductor lands near 9.48 mH.
        assert!((design.inductance_h - 9.48e-3).abs() / 9.48e-3 < 1e-3);
        assert!((design.tuned_frequency_hz - 250.0).abs() < 1e-12);
    }

    #[test]
    fn filter_design_round_trips_through_the_resonance_formula() {
        for order in [2u32, 3, 5, 7, 11, 13] {
            let design =
                design_single_tuned_filter(5e6, 19_052.6, 50.0, order).unwrap();
            let f = design.resonant_frequency_hz();
            let target = order as f64 * 50.0;
            assert!((f - target).abs() / target < 1e-9);
        }
    }

    #[test]
    fn unit_lc_resonates_at_one_over_two_pi() {
        let design = FilterDesign {
            target_order: 2,
            reactive_power_per_phase_var: 1.0,
            line_to_neutral_voltage_v: 1.0,
            fundamental_hz: 1.0,
            capacitance_f: 1.0,
            inductance_h: 1.0,
            tuned_frequency_hz: 0.0,
        };
        let expected = 1.0 / (2.0 * std::f64::consts::PI);
        assert!((design.resonant_frequency_hz() - expected).abs() < 1e-15);
    }

    #[test]
    fn filter_design_rejects_bad_inputs() {
        assert!(design_single_tuned_filter(0.0, 1.0, 50.0, 5).is_err());
        assert!(design_single_tuned_filter(1.0, -2.0, 50.0, 5).is_err());
        assert!(design_single_tuned_filter(1.0, 1.0, 50.0, 1).is_err());
    }

    #[test]
    fn voltage_class_limits_follow_the_standard_table() {
        let limits = ThdLimits::default();
        assert_eq!(limits.limit_for_kv(0.4), 8.0);
        assert_eq!(limits.limit_for_kv(33.0), 5.0);
        assert_eq!(limits.limit_for_kv(132.0), 2.5);
        assert_eq!(limits.limit_for_kv(400.0), 1.5);
    }

    #[test]
    fn compliance_verdicts_per_bus() {
        let report = HarmonicReport {
            orders: vec![5],
            buses: vec![
                BusHarmonics {
                    bus: "swgr".into(),
                    nominal_kv: 400.0,
                    fundamental_pu: 1.0,
                    components_percent: BTreeMap::from([(5, 1.32)]),
                    thd_percent: 1.32,
                },
                BusHarmonics {
                    bus: "lb".into(),
                    nominal_kv: 400.0,
                    fundamental_pu: 1.0,
                    components_percent: BTreeMap::from([(5, 0.40)]),
                    thd_percent: 0.40,
                },
                BusHarmonics {
                    bus: "raw".into(),
                    nominal_kv: 400.0,
                    fundamental_pu: 1.0,
                    components_percent: BTreeMap::from([(5, 19.48)]),
                    thd_percent: 19.48,
                },
            ],
        };
        let verdicts = ieee519_check(&report, &ThdLimits::default());
        assert!(verdicts[0].pass);
        assert!(verdicts[1].pass);
        assert!(!verdicts[2].pass);
    }
}
