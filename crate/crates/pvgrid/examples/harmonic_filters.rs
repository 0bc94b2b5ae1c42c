//! Harmonic penetration scan and single-tuned filter design.
//!
//! Loads the bundled reference case, scans voltage distortion with the
//! planned filter bank out of service, designs one of the filters from its
//! electrical ratings, then switches the whole bank in and scans again to
//! show the distortion collapsing inside the IEEE 519 limits.

use pvgrid::harmonics::{
    design_single_tuned_filter, harmonic_scan, ieee519_check, HarmonicReport, ThdLimits,
};
use pvgrid::network::{build_network, NetworkSpec, ShuntKind};
use pvgrid::power_flow::{solve_load_flow, SolverOptions};

const CASE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/reference_case.json");
const ORDERS: [u32; 4] = [5, 7, 11, 13];

fn print_scan(report: &HarmonicReport, limits: &ThdLimits) {
    println!("  bus       kV      THD%   h5%    h7%    h11%   h13%   verdict");
    for verdict in ieee519_check(report, limits) {
        let bus = report.bus(&verdict.bus).unwrap();
        print!(
            "  {:<8} {:>6.1} {:>7.2}",
            verdict.bus, verdict.nominal_kv, verdict.thd_percent
        );
        for h in ORDERS {
            print!(" {:>6.2}", bus.components_percent.get(&h).copied().unwrap_or(0.0));
        }
        println!(
            "   {} (limit {:.1}%)",
            if verdict.pass { "pass" } else { "FAIL" },
            verdict.limit_percent
        );
    }
}

fn main() -> pvgrid::error::Result<()> {
    let spec = NetworkSpec::from_path(CASE)?;
    let limits = ThdLimits::default();

    let bare = build_network(&spec)?;
    let solution = solve_load_flow(&bare, &SolverOptions::default())?;
    println!("filters out of service:");
    print_scan(&harmonic_scan(&bare, &solution, &ORDERS)?, &limits);

    // One of the planned load-bus filters, designed from its ratings: the
    // case stores Mvar three-phase at the bus nominal voltage; the design
    // routine wants per-phase vars at line-to-neutral volts.
    let (q_mvar, order, kv) = (2200.0, 11, 400.0);
    let v_ln = kv * 1e3 / 3.0_f64.sqrt();
    let design = design_single_tuned_filter(q_mvar / 3.0 * 1e6, v_ln, 50.0, order)?;
    println!(
        "\n{} Mvar filter tuned to order {}: C = {:.2} uF, L = {:.3} mH per phase, \
         resonant at {:.0} Hz",
        q_mvar,
        order,
        design.capacitance_f * 1e6,
        design.inductance_h * 1e3,
        design.resonant_frequency_hz()
    );

    // Switch the planned bank in and look again. The filters also inject
    // fundamental-frequency reactive power, so the load flow is re-run.
    let mut filtered_spec = spec;
    for shunt in &mut filtered_spec.shunts {
        if matches!(shunt.kind, ShuntKind::SingleTunedFilter { .. }) {
            shunt.in_service = true;
        }
    }
    let filtered = build_network(&filtered_spec)?;
    let solution = solve_load_flow(&filtered, &SolverOptions::default())?;
    println!("\nplanned bank (3 load bus + 5 switchgear) in service:");
    print_scan(&harmonic_scan(&filtered, &solution, &ORDERS)?, &limits);
    Ok(())
}
