//! Voltage-stability margins.
//!
//! Two quantities with very different meanings are computed side by side.
//! `literal_percent_b` is the verbatim ratio `(V_stable - V_operating) /
//! V_stable x 100`: for a healthy system whose operating voltage sits near
//! the stable voltage it is close to zero. The loading margin instead
//! scales every load by a factor lambda until the load flow collapses and
//! expresses the headroom two ways: `(lambda_c - 1)/lambda_c x 100`
//! (fraction of the collapse loading held in reserve) and
//! `(lambda_c - 1) x 100` (extra load capacity over the base case, the
//! "reserve margin" reading under which values like 98% describe a healthy
//! system). Published %B figures near 98% cannot come from the literal
//! formula at a sane operating point; both numbers are reported so the
//! discrepancy stays visible instead of being silently resolved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BusKind, Network};
use crate::power_flow::{solve_load_flow, PowerFlowSolution, SolverOptions};

/// One sample of the nose curve: monitored-bus voltage at a load scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NosePoint {
    pub scale: f64,
    pub voltage_pu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityMargin {
    pub monitored_bus: String,
    /// Monitored-bus voltage at the last stable loading (the nose tip).
    pub v_stable_pu: f64,
    /// Monitored-bus voltage at the base operating point.
    pub v_operating_pu: f64,
    /// Verbatim (V_stable - V_operating)/V_stable x 100.
    pub literal_percent_b: f64,
    /// (lambda_c - 1)/lambda_c x 100.
    pub loading_margin_percent: f64,
    /// (lambda_c - 1) x 100, the reserve-capacity reading.
    pub reserve_capacity_percent: f64,
    /// lambda_c, the load multiplier at collapse.
    pub collapse_scale: f64,
    /// True when the scan hit `max_scale` without collapsing; the margin
    /// fields are then lower bounds.
    pub capped: bool,
    pub nose_curve: Vec<NosePoint>,
}

#[derive(Debug, Clone)]
pub struct MarginOptions {
    /// Upward step in the load multiplier.
    pub step: f64,
    /// Final bracket width on the multiplier.
    pub refine_tolerance: f64,
    /// Scan ceiling for effectively unbounded cases.
    pub max_scale: f64,
    /// Bus whose voltage traces the nose curve; defaults to the lowest-
    /// voltage non-slack bus of the base solution.
    pub monitored_bus: Option<String>,
    pub solver: SolverOptions,
}

impl Default for MarginOptions {
    fn default() -> Self {
        Self {
            step: 0.01,
            refine_tolerance: 1e-4,
            max_scale: 100.0,
            monitored_bus: None,
            solver: SolverOptions::default(),
        }
    }
}

/// Verbatim stability index: relative distance of the operating voltage
/// from the stable voltage.
pub fn literal_percent_b(v_stable: f64, v_operating: f64) -> Result<f64> {
    if v_stable <= 0.0 {
        return Err(Error::InvalidInput {
            what: "stable voltage",
            detail: format!("{v_stable} is not positive"),
        });
    }
    Ok((v_stable - v_operating) / v_stable * 100.0)
}

/// Copy of the network with every load scaled by `scale` at constant power
/// factor.
pub fn scale_loads(network: &Network, scale: f64) -> Result<Network> {
    let mut spec = network.to_spec();
    for load in &mut spec.loads {
        load.p_mw *= scale;
        load.q_mvar *= scale;
    }
    crate::network::build_network(&spec)
}

/// Solves the network with loads scaled by `scale`, warm-starting from a
/// previous solution when one is given and falling back to a flat start.
pub fn solve_scaled(
    network: &Network,
    scale: f64,
    warm: Option<&PowerFlowSolution>,
    solver: &SolverOptions,
) -> Result<PowerFlowSolution> {
    let mut scaled = scale_loads(network, scale)?;
    if let Some(prev) = warm {
        for bus in &mut scaled.buses {
            let i = prev.bus_position(&bus.id)?;
            bus.initial_magnitude_pu = prev.v_magnitude_pu[i];
            bus.initial_angle_rad = prev.v_angle_rad[i];
        }
        let warm_options = SolverOptions {
            flat_start: false,
            ..solver.clone()
        };
        if let Ok(solution) = solve_load_flow(&scaled, &warm_options) {
            return Ok(solution);
        }
    }
    solve_load_flow(&scaled, solver)
}

/// Steps the load multiplier upward until the load flow collapses, then
/// bisects the bracket down to `refine_tolerance`.
pub fn loading_margin(network: &Network, options: &MarginOptions) -> Result<StabilityMargin> {
    if options.step <= 0.0 || options.refine_tolerance <= 0.0 {
        return Err(Error::InvalidInput {
            what: "margin options",
            detail: "step and refine_tolerance must be positive".to_string(),
        });
    }
    let base = solve_load_flow(network, &options.solver)?;
    let monitored = match &options.monitored_bus {
        Some(id) => {
            base.bus_position(id)?;
            id.clone()
        }
        None => weakest_bus(network, &base),
    };
    let v_operating = base.voltage_pu(&monitored)?;

    let mut nose_curve = vec![NosePoint {
        scale: 1.0,
        voltage_pu: v_operating,
    }];
    let mut feasible_scale = 1.0;
    let mut feasible_solution = base;
    let mut bracket = None;
    let mut scale = 1.0;
    while scale < options.max_scale {
        scale = (scale + options.step).min(options.max_scale);
        match solve_scaled(network, scale, Some(&feasible_solution), &options.solver) {
            Ok(solution) => {
                nose_curve.push(NosePoint {
                    scale,
                    voltage_pu: solution.voltage_pu(&monitored)?,
                });
                feasible_scale = scale;
                feasible_solution = solution;
            }
            Err(Error::Diverged { .. }) | Err(Error::SingularJacobian { .. }) => {
                bracket = Some(scale);
                break;
            }
            Err(other) => return Err(other),
        }
    }

    let capped = bracket.is_none();
    if let Some(mut infeasible_scale) = bracket {
        while infeasible_scale - feasible_scale > options.refine_tolerance {
            let mid = 0.5 * (feasible_scale + infeasible_scale);
            match solve_scaled(network, mid, Some(&feasible_solution), &options.solver) {
                Ok(solution) => {
                    nose_curve.push(NosePoint {
                        scale: mid,
                        voltage_pu: solution.voltage_pu(&monitored)?,
                    });
                    feasible_scale = mid;
                    feasible_solution = solution;
                }
                Err(Error::Diverged { .. }) | Err(Error::SingularJacobian { .. }) => {
                    infeasible_scale = mid;
                }
                Err(other) => return Err(other),
            }
        }
    }

    nose_curve.sort_by(|a, b| a.scale.total_cmp(&b.scale));
    let collapse_scale = feasible_scale;
    let v_stable = feasible_solution.voltage_pu(&monitored)?;
    Ok(StabilityMargin {
        monitored_bus: monitored,
        v_stable_pu: v_stable,
        v_operating_pu: v_operating,
        literal_percent_b: literal_percent_b(v_stable, v_operating)?,
        loading_margin_percent: (collapse_scale - 1.0) / collapse_scale * 100.0,
        reserve_capacity_percent: (collapse_scale - 1.0) * 100.0,
        collapse_scale,
        capped,
        nose_curve,
    })
}

fn weakest_bus(network: &Network, base: &PowerFlowSolution) -> String {
    // Load buses only: a generator-held terminal can sag on reactive limits
    // without saying anything about load-side collapse. Networks with no PQ
    // bus fall back to any non-slack bus.
    let candidates = |pq_only: bool| {
        let mut best: Option<(f64, &str)> = None;
        for (i, bus) in network.buses.iter().enumerate() {
            if bus.kind == BusKind::Slack || (pq_only && bus.kind != BusKind::Pq) {
                continue;
            }
            let v = base.v_magnitude_pu[i];
            let better = match best {
                None => true,
                Some((bv, bid)) => v < bv || (v == bv && bus.id.as_str() < bid),
            };
            if better {
                best = Some((v, &bus.id));
            }
        }
        best.map(|(_, id)| id.to_string())
    };
    candidates(true)
        .or_else(|| candidates(false))
        .unwrap_or_else(|| network.buses[network.slack_index()].id.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, NetworkSpec};
    use proptest::prelude::*;

    #[test]
    fn literal_formula_direct_substitution() {
        assert_eq!(literal_percent_b(1.0, 1.0).unwrap(), 0.0);
        assert!((literal_percent_b(1.0, 0.96).unwrap() - 4.0).abs() < 1e-12);
        // Only an implausible operating voltage reaches the published 98%+.
        assert!((literal_percent_b(1.0, 0.0154).unwrap() - 98.46).abs() < 1e-9);
        assert!(literal_percent_b(0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn literal_formula_is_scale_invariant(
            v_stable in 0.1..2.0f64,
            v_operating in 0.0..2.0f64,
            c in 0.1..10.0f64,
        ) {
            let a = literal_percent_b(v_stable, v_operating).unwrap();
            let b = literal_percent_b(c * v_stable, c * v_operating).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    fn two_bus(p_mw: f64, q_mvar: f64) -> Network {
        let spec: NetworkSpec = serde_json::from_str(&format!(
            r#"{{
            "base_mva": 100.0,
            "base_frequency_hz": 50.0,
            "buses": [
                {{"id": "source", "kind": "slack", "nominal_voltage_kv": 220.0}},
                {{"id": "load", "kind": "pq", "nominal_voltage_kv": 220.0}}
            ],
            "branches": [
                {{"id": "tie", "from_bus": "source", "to_bus": "load", "kind": "line",
                 "series_resistance_pu": 0.0, "series_reactance_pu": 0.1}}
            ],
            "loads": [
                {{"id": "l", "bus": "load", "p_mw": {p_mw}, "q_mvar": {q_mvar}}}
            ]
        }}"#
        ))
        .unwrap();
        build_network(&spec).unwrap()
    }

    /// Maximum constant-power-factor transfer over a pure reactance from a
    /// 1.0 pu source: P_max = (sqrt(1 + t^2) - t) / (2X), t = Q/P.
    fn analytic_collapse_scale(p_pu: f64, q_pu: f64, x: f64) -> f64 {
        let t = q_pu / p_pu;
        ((1.0 + t * t).sqrt() - t) / (2.0 * x) / p_pu
    }

    #[test]
    fn two_bus_margin_matches_maximum_power_transfer() {
        let net = two_bus(100.0, 0.0);
        let margin = loading_margin(&net, &MarginOptions::default()).unwrap();
        let expected = analytic_collapse_scale(1.0, 0.0, 0.1);
        assert!(
            (margin.collapse_scale - expected).abs() / expected < 1e-3,
            "collapse at {} vs analytic {expected}",
            margin.collapse_scale
        );
        assert!(!margin.capped);
        assert!((margin.loading_margin_percent - 80.0).abs() < 0.1);
        assert!((margin.reserve_capacity_percent - 400.0).abs() < 0.5);
    }

    #[test]
    fn reactive_load_pulls_the_nose_in() {
        let net = two_bus(100.0, 75.0);
        let margin = loading_margin(&net, &MarginOptions::default()).unwrap();
        let expected = analytic_collapse_scale(1.0, 0.75, 0.1);
        assert!((expected - 2.5).abs() < 1e-12);
        assert!((margin.collapse_scale - expected).abs() / expected < 1e-3);
    }

    #[test]
    fn halving_load_doubles_the_collapse_scale() {
        let full = loading_margin(&two_bus(100.0, 0.0), &MarginOptions::default()).unwrap();
        let half = loading_margin(&two_bus(50.0, 0.0), &MarginOptions::default()).unwrap();
        assert!(half.collapse_scale >= full.collapse_scale);
        let ratio = half.collapse_scale / full.collapse_scale;
        assert!((ratio - 2.0).abs() < 1e-2, "ratio {ratio}");
    }

    #[test]
    fn bracket_endpoints_behave_as_reported() {
        let net = two_bus(100.0, 0.0);
        let options = MarginOptions::default();
        let margin = loading_margin(&net, &options).unwrap();
        let nose = margin.nose_curve.last().unwrap();
        assert!((nose.scale - margin.collapse_scale).abs() < 1e-12);
        let warm = solve_scaled(&net, margin.collapse_scale, None, &options.solver).unwrap();
        assert!(solve_scaled(
            &net,
            margin.collapse_scale - options.refine_tolerance,
            Some(&warm),
            &options.solver
        )
        .is_ok());
        assert!(solve_scaled(
            &net,
            margin.collapse_scale + options.refine_tolerance,
            Some(&warm),
            &options.solver
        )
        .is_err());
    }

    #[test]
    fn nose_curve_is_monotone_in_scale_and_voltage_sags() {
        let net = two_bus(100.0, 20.0);
        let margin = loading_margin(&net, &MarginOptions::default()).unwrap();
        for pair in margin.nose_curve.windows(2) {
            assert!(pair[1].scale > pair[0].scale);
        }
        let first = margin.nose_curve.first().unwrap().voltage_pu;
        let last = margin.nose_curve.last().unwrap().voltage_pu;
        assert!(last < first, "voltage should sag toward the nose");
        // The upper branch of the nose curve stays above the collapse
        // voltage bound 1/sqrt(2) for a purely reactive line at unity pf.
        assert!(margin.v_stable_pu < margin.v_operating_pu);
    }

    #[test]
    fn unloaded_network_caps_out() {
        let net = two_bus(0.0, 0.0);
        let options = MarginOptions {
            max_scale: 3.0,
            ..Default::default()
        };
        let margin = loading_margin(&net, &options).unwrap();
        assert!(margin.capped);
        assert!((margin.collapse_scale - 3.0).abs() < 1e-9);
    }

    #[test]
    fn literal_index_is_near_zero_for_healthy_margins() {
        // The verbatim formula and the reserve reading disagree wildly on
        // the same healthy case; both are carried in the result.
        let net = two_bus(100.0, 0.0);
        let margin = loading_margin(&net, &MarginOptions::default()).unwrap();
        assert!(margin.literal_percent_b < 50.0);
        assert!(margin.reserve_capacity_percent > 95.0);
    }
}
