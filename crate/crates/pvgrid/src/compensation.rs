//! Reactive compensation sizing and SVC placement.
//!
//! Sizing follows the power-triangle identity `Q_c = P (tan th1 - tan th2)`:
//! the reactive power that must be injected so a load drawing `P` at the
//! actual power factor appears at the target power factor. Placement is a
//! pure network-to-network transformation so staged studies can keep every
//! intermediate operating point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Network, ShuntDevice, ShuntKind, SvcMode};

/// A sizing decision for one bus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompensationPlan {
    pub bus: String,
    pub load_active_power_mw: f64,
    /// Power-triangle angle at the actual power factor, radians.
    pub angle_before_rad: f64,
    /// Power-triangle angle at the target power factor, radians.
    pub angle_after_rad: f64,
    pub required_q_mvar: f64,
}

impl CompensationPlan {
    pub fn new(bus: &str, p_mw: f64, pf_actual: f64, pf_target: f64) -> Result<Self> {
        let required_q_mvar = required_compensation(p_mw, pf_actual, pf_target)?;
        Ok(Self {
            bus: bus.to_string(),
            load_active_power_mw: p_mw,
            angle_before_rad: pf_actual.acos(),
            angle_after_rad: pf_target.acos(),
            required_q_mvar,
        })
    }
}

fn check_pf(value: f64, what: &'static str) -> Result<f64> {
    if value > 0.0 && value <= 1.0 {
        Ok(value)
    } else {
        Err(Error::InvalidInput {
            what,
            detail: format!("{value} is outside (0, 1]"),
        })
    }
}

/// Reactive power needed to move `p_mw` drawn at `pf_actual` to `pf_target`.
/// Positive when the target is higher than the actual power factor.
pub fn required_compensation(p_mw: f64, pf_actual: f64, pf_target: f64) -> Result<f64> {
    if p_mw <= 0.0 {
        return Err(Error::InvalidInput {
            what: "active power",
            detail: format!("{p_mw} MW is not positive"),
        });
    }
    let a = check_pf(pf_actual, "actual power factor")?;
    let t = check_pf(pf_target, "target power factor")?;
    Ok(p_mw * (a.acos().tan() - t.acos().tan()))
}

/// Returns a copy of the network with a fixed-Q SVC of `q_mvar` at `bus`.
///
/// When the bus already hosts an SVC slot the slot is retuned and switched
/// in service (its own rating is enforced in addition to `q_limit_mvar`);
/// otherwise a new device is appended. The input network is untouched.
pub fn apply_svc(
    network: &Network,
    bus: &str,
    q_mvar: f64,
    q_limit_mvar: f64,
) -> Result<Network> {
    network.bus_index(bus)?;
    if q_mvar.abs() > q_limit_mvar.abs() + 1e-9 {
        return Err(Error::SvcLimitExceeded {
            bus: bus.to_string(),
            requested_mvar: q_mvar,
            limit_mvar: q_limit_mvar,
        });
    }
    let mut spec = network.to_spec();
    let slot = spec.shunts.iter_mut().find(
        |s| s.bus == bus && matches!(s.kind, ShuntKind::Svc { .. }),
    );
    match slot {
        Some(device) => {
            if let ShuntKind::Svc {
                q_mvar: q,
                q_limit_mvar: rating,
                ..
            } = &mut device.kind
            {
                if q_mvar.abs() > rating.abs() + 1e-9 {
                    return Err(Error::SvcLimitExceeded {
                        bus: bus.to_string(),
                        requested_mvar: q_mvar,
                        limit_mvar: *rating,
                    });
                }
                *q = q_mvar;
            }
            device.in_service = true;
        }
        None => spec.shunts.push(ShuntDevice {
            id: format!("svc_{bus}"),
            bus: bus.to_string(),
            kind: ShuntKind::Svc {
                q_mvar,
                q_limit_mvar,
                mode: SvcMode::FixedQ,
            },
            in_service: true,
        }),
    }
    crate::network::build_network(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, NetworkSpec};
    use crate::power_flow::{solve_load_flow, SolverOptions};
    use proptest::prelude::*;

    #[test]
    fn unity_target_from_three_four_five() {
        let q = required_compensation(100.0, 0.8, 1.0).unwrap();
        assert!((q - 75.0).abs() < 1e-12);
    }

    #[test]
    fn equal_power_factors_need_nothing() {
        let q = required_compensation(250.0, 0.93, 0.93).unwrap();
        assert!(q.abs() < 1e-12);
    }

    #[test]
    fn published_svc_sizing_reproduces() {
        // The quoted angle term 0.3673 corresponds to moving this actual
        // power factor up to 0.95.
        let target: f64 = 0.95;
        let pf_actual = (0.3673 + target.acos().tan()).atan().cos();
        let q = required_compensation(17_774.68, pf_actual, target).unwrap();
        assert!((q - 6_528.6).abs() < 0.1, "got {q}");
        // The published figure rounds to 6500; the discrepancy is under 0.5%.
        assert!((q - 6_500.0).abs() / 6_500.0 < 0.005);
    }

    #[test]
    fn plan_reaches_target_exactly_in_closed_form() {
        // Load at (P, P tan th1); subtracting Q_c leaves the target angle.
        for (pf_a, pf_t) in [(0.82, 0.95), (0.7, 0.9), (0.99, 1.0), (0.5, 0.6)] {
            let p = 180.0;
            let q_load = p * f64::acos(pf_a).tan();
            let q_c = required_compensation(p, pf_a, pf_t).unwrap();
            let pf_after = p / p.hypot(q_load - q_c);
            assert!(
                (pf_after - pf_t).abs() < 1e-9,
                "pf_after {pf_after} target {pf_t}"
            );
        }
    }

    #[test]
    fn rejects_out_of_range_power_factors() {
        assert!(required_compensation(10.0, 0.0, 0.9).is_err());
        assert!(required_compensation(10.0, 1.2, 0.9).is_err());
        assert!(required_compensation(10.0, 0.9, -0.5).is_err());
        assert!(required_compensation(-10.0, 0.9, 0.95).is_err());
    }

    proptest! {
        #[test]
        fn swapping_power_factors_flips_the_sign(
            p in 1.0..1e4f64,
            pf_a in 0.05..1.0f64,
            pf_t in 0.05..1.0f64,
        ) {
            let forward = required_compensation(p, pf_a, pf_t).unwrap();
            let backward = required_compensation(p, pf_t, pf_a).unwrap();
            let scale = forward.abs().max(1.0);
            prop_assert!((forward + backward).abs() < 1e-9 * scale);
        }
    }

    fn svc_case() -> NetworkSpec {
        serde_json::from_str(
            r#"{
            "base_mva": 100.0,
            "base_frequency_hz": 50.0,
            "buses": [
                {"id": "grid", "kind": "slack", "nominal_voltage_kv": 132.0},
                {"id": "station", "kind": "pq", "nominal_voltage_kv": 132.0}
            ],
            "branches": [
                {"id": "tie", "from_bus": "grid", "to_bus": "station", "kind": "line",
                 "series_resistance_pu": 0.005, "series_reactance_pu": 0.05}
            ],
            "loads": [
                {"id": "l", "bus": "station", "p_mw": 90.0, "q_mvar": 60.0}
            ],
            "shunts": [
                {"id": "svc1", "bus": "station", "kind": "svc",
                 "q_mvar": 0.0, "q_limit_mvar": 50.0, "in_service": false}
            ]
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn zero_injection_changes_nothing() {
        let base = build_network(&svc_case()).unwrap();
        let with_null = apply_svc(&base, "station", 0.0, 50.0).unwrap();
        let a = solve_load_flow(&base, &SolverOptions::default()).unwrap();
        let b = solve_load_flow(&with_null, &SolverOptions::default()).unwrap();
        for i in 0..a.v_magnitude_pu.len() {
            assert_eq!(a.v_magnitude_pu[i].to_bits(), b.v_magnitude_pu[i].to_bits());
        }
    }

    #[test]
    fn injection_raises_the_bus_voltage() {
        let base = build_network(&svc_case()).unwrap();
        let boosted = apply_svc(&base, "station", 40.0, 50.0).unwrap();
        let a = solve_load_flow(&base, &SolverOptions::default()).unwrap();
        let b = solve_load_flow(&boosted, &SolverOptions::default()).unwrap();
        assert!(b.voltage_pu("station").unwrap() > a.voltage_pu("station").unwrap());
    }

    #[test]
    fn retunes_the_existing_slot_rather_than_stacking() {
        let base = build_network(&svc_case()).unwrap();
        let applied = apply_svc(&base, "station", 30.0, 50.0).unwrap();
        assert_eq!(applied.shunts.len(), 1);
        assert!(applied.shunts[0].in_service);
        match applied.shunts[0].kind {
            ShuntKind::Svc { q_mvar, .. } => assert!((q_mvar - 30.0).abs() < 1e-12),
            _ => panic!("expected the SVC slot"),
        }
    }

    #[test]
    fn creates_a_device_when_no_slot_exists() {
        let base = build_network(&svc_case()).unwrap();
        let applied = apply_svc(&base, "grid", 10.0, 20.0).unwrap();
        assert_eq!(applied.shunts.len(), 2);
        assert!(applied.shunts.iter().any(|s| s.id == "svc_grid"));
    }

    #[test]
    fn rejects_injection_beyond_the_limit() {
        let base = build_network(&svc_case()).unwrap();
        match apply_svc(&base, "station", 80.0, 100.0) {
            // The slot's own 50 Mvar rating binds before the argument limit.
            Err(Error::SvcLimitExceeded { limit_mvar, .. }) => {
                assert!((limit_mvar - 50.0).abs() < 1e-12)
            }
            other => panic!("expected limit error, got {other:?}"),
        }
        assert!(apply_svc(&base, "station", 80.0, 60.0).is_err());
    }

    #[test]
    fn application_is_repeatable_and_leaves_the_input_alone() {
        let base = build_network(&svc_case()).unwrap();
        let first = apply_svc(&base, "station", 25.0, 50.0).unwrap();
        let second = apply_svc(&base, "station", 25.0, 50.0).unwrap();
        assert_eq!(
            serde_json::to_string(&first.to_spec()).unwrap(),
            serde_json::to_string(&second.to_spec()).unwrap()
        );
        // The source network still has the slot switched out.
        assert!(!base.shunts[0].in_service);
    }
}
