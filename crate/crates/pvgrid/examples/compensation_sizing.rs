//! Power-triangle compensation sizing, and what overcompensation does.
//!
//! `Q_c = P (tan th1 - tan th2)` gives the reactive injection that lifts a
//! load drawing `P` at one power factor to another. The second half places
//! an SVC on a small network twice: once sized to the 0.95 target, once
//! deliberately oversized, to show the sign flip a fixed too-large setting
//! produces at the metering point.

use pvgrid::compensation::{apply_svc, required_compensation, CompensationPlan};
use pvgrid::network::{load_case_str, MeterEnd, Network};
use pvgrid::power_flow::{
    branch_power_quantities, power_quantities, solve_load_flow, PowerQuantities, SolverOptions,
};

const CASE: &str = r#"{
    "base_mva": 100.0,
    "base_frequency_hz": 50.0,
    "buses": [
        {"id": "grid", "kind": "slack", "nominal_voltage_kv": 132.0},
        {"id": "station", "kind": "pq", "nominal_voltage_kv": 132.0}
    ],
    "branches": [
        {"id": "tie", "from_bus": "grid", "to_bus": "station", "kind": "line",
         "series_resistance_pu": 0.004, "series_reactance_pu": 0.04}
    ],
    "loads": [
        {"id": "works", "bus": "station", "p_mw": 95.0, "q_mvar": 48.0}
    ]
}"#;

fn main() -> pvgrid::error::Result<()> {
    // The classic 3-4-5 triangle: 100 MW at 0.8 lagging carries 75 Mvar;
    // all of it must go to reach unity.
    let q_unity = required_compensation(100.0, 0.8, 1.0)?;
    println!("100 MW at 0.8 -> unity: inject {q_unity:.1} Mvar");

    // A plan for a gigawatt-scale bus. The angle spread here is the one a
    // 17.8 GW connection needs a ~6.5 GVar compensator for: the tangent
    // difference is 0.3673, i.e. roughly 0.82 lifted to 0.95.
    let target: f64 = 0.95;
    let pf_actual = (0.3673 + target.acos().tan()).atan().cos();
    let plan = CompensationPlan::new("switchgear", 17_774.68, pf_actual, target)?;
    println!(
        "{:.2} MW from {:.4} to {:.2}: inject {:.1} Mvar (angle {:.4} -> {:.4} rad)",
        plan.load_active_power_mw,
        plan.angle_before_rad.cos(),
        plan.angle_after_rad.cos(),
        plan.required_q_mvar,
        plan.angle_before_rad,
        plan.angle_after_rad
    );

    // Against a real network. Meter the tie at its receiving end and flip
    // the sign so the reading is what the line delivers into the station.
    let network = load_case_str(CASE)?;
    let options = SolverOptions::default();
    let meter = |net: &Network| -> pvgrid::error::Result<PowerQuantities> {
        let solution = solve_load_flow(net, &options)?;
        let raw = branch_power_quantities(&solution, "tie", MeterEnd::To)?;
        Ok(power_quantities(-raw.p_mw, -raw.q_mvar, 132.0))
    };

    let before = meter(&network)?;
    let pf0 = before.power_factor.unwrap();
    println!(
        "\nstation meter before compensation: {:.1} MW, {:.1} Mvar, PF {pf0:.4}",
        before.p_mw, before.q_mvar
    );

    let sized = required_compensation(before.p_mw, pf0, 0.95)?;
    let after = meter(&apply_svc(&network, "station", sized, 500.0)?)?;
    println!(
        "sized SVC {sized:.1} Mvar: meter {:.1} Mvar, PF {:.4}",
        after.q_mvar,
        after.power_factor.unwrap()
    );

    // A fixed too-large setting: the bus now exports reactive power, the
    // meter reads a leading (negative-signed) power factor, and once the
    // magnitude drops below the 0.95 target the study flags the bus.
    let over = meter(&apply_svc(&network, "station", 90.0, 500.0)?)?;
    let pf = over.power_factor.unwrap();
    let flagged = pf < 0.0 && pf.abs() + 1e-9 < 0.95;
    println!(
        "fixed 90.0 Mvar SVC: meter {:.1} Mvar, PF {pf:.4}{}",
        over.q_mvar,
        if flagged { " (flagged overcompensated)" } else { "" }
    );
    Ok(())
}
