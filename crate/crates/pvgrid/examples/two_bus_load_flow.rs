//! Newton-Raphson load flow on the smallest case with a closed-form answer.
//!
//! A single load behind one reactance has a quadratic voltage equation, so
//! the solver's result can be printed next to the exact solution. The same
//! case doubles as a demonstration of the convergence trace and of what the
//! branch flows and losses look like.

use pvgrid::network::load_case_str;
use pvgrid::power_flow::{bus_power_quantities, solve_load_flow, SolverOptions};
use pvgrid::report::{flow_table, solution_rows};

/// 100 MW + j60 Mvar drawn over j0.1 pu on a 100 MVA base.
const CASE: &str = r#"{
    "base_mva": 100.0,
    "base_frequency_hz": 50.0,
    "buses": [
        {"id": "source", "kind": "slack", "nominal_voltage_kv": 400.0},
        {"id": "load", "kind": "pq", "nominal_voltage_kv": 400.0}
    ],
    "branches": [
        {"id": "tie", "from_bus": "source", "to_bus": "load", "kind": "line",
         "series_resistance_pu": 0.0, "series_reactance_pu": 0.1}
    ],
    "loads": [
        {"id": "plant_load", "bus": "load", "p_mw": 100.0, "q_mvar": 60.0}
    ]
}"#;

/// Exact solution of `V^2 = (1 - q x / V^2 ...)`: with the slack at 1.0 pu
/// and a load p + jq behind a lossless reactance x, the squared magnitude
/// solves u^2 + (2 q x - 1) u + x^2 (p^2 + q^2) = 0 (higher root is the
/// stable operating point) and the angle follows from the P transfer.
fn analytic(p_pu: f64, q_pu: f64, x: f64) -> (f64, f64) {
    let b = 2.0 * q_pu * x - 1.0;
    let c = x * x * (p_pu * p_pu + q_pu * q_pu);
    let u = (-b + (b * b - 4.0 * c).sqrt()) / 2.0;
    let v = u.sqrt();
    (v, -(p_pu * x / v).asin())
}

fn main() -> pvgrid::error::Result<()> {
    let network = load_case_str(CASE)?;
    let solution = solve_load_flow(&network, &SolverOptions::default())?;

    let (v_exact, a_exact) = analytic(1.0, 0.6, 0.1);
    let i = solution.bus_position("load")?;
    let v = solution.v_magnitude_pu[i];
    let a = solution.v_angle_rad[i];

    println!("converged in {} iterations", solution.iterations);
    println!();
    println!("load-bus voltage      solver        analytic      difference");
    println!(
        "magnitude (pu)    {v:>12.9} {v_exact:>13.9} {:>13.3e}",
        v - v_exact
    );
    println!(
        "angle (rad)       {a:>12.9} {a_exact:>13.9} {:>13.3e}",
        a - a_exact
    );

    println!("\nbus summary:");
    println!("{}", flow_table(&solution_rows(&solution)));

    let slack = bus_power_quantities(&solution, "source")?;
    println!(
        "slack injection: {:.3} MW, {:.3} Mvar (the load plus {:.3} MW of losses)",
        slack.p_mw,
        slack.q_mvar,
        solution.total_losses_mw()
    );
    Ok(())
}
