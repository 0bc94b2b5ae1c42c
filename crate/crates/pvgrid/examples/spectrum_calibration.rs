//! How the fitted harmonic sources in the bundled reference case were made.
//!
//! The switchgear and load-bus injections in `cases/reference_case.json`
//! stand in for distortion that is observed rather than modeled: background
//! distortion arriving over the grid tie and the rectifier-heavy industrial
//! load. Their spectra are therefore calibration artifacts. Given per-order
//! voltage-distortion targets at those two buses (the plant inverter
//! spectrum stays fixed at its vendor-typical values), the harmonic network
//! equations pin the two source currents exactly: impose the target voltage
//! phasors, solve the remaining node equations for the free bus voltages,
//! and read the required injections off the targeted rows.
//!
//! The example prints the fitted spectrum blocks (what the case file
//! carries), then re-runs the toolkit's own scan with and without the
//! filter bank to show the targets are met and what the filters leave.

use nalgebra::DMatrix;
use num_complex::Complex64;
use pvgrid::error::{Error, Result};
use pvgrid::harmonics::harmonic_scan;
use pvgrid::network::{build_network, Network, NetworkSpec, ShuntKind, SpectrumLine};
use pvgrid::power_flow::{solve_load_flow, PowerFlowSolution, SolverOptions};

const CASE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/reference_case.json");

/// Voltage-distortion targets in percent of the fundamental, per order.
/// Together they give 19.3% THD at the switchgear and 9.1% at the load
/// bus, the uncompensated distortion levels the case is calibrated to.
const SWGR_TARGETS: [(u32, f64); 4] = [(5, 4.05), (7, 4.65), (11, 18.05), (13, 2.8)];
const LOAD_TARGETS: [(u32, f64); 4] = [(5, 6.5), (7, 5.5), (11, 3.0), (13, 1.4)];

const FITTED: [(&str, &str); 2] = [
    ("system_background", "swgr"),
    ("industrial_rectifiers", "loadbus"),
];

fn main() -> Result<()> {
    let spec = NetworkSpec::from_path(CASE)?;
    let net = build_network(&spec)?;
    let sol = solve_load_flow(&net, &SolverOptions::default())?;

    let mut fitted_spec = spec.clone();
    for ((source_id, bus), targets) in FITTED.iter().zip([&SWGR_TARGETS, &LOAD_TARGETS]) {
        let lines = fit_source(&net, &sol, &spec, bus, targets)?;
        println!("\"{source_id}\" at {bus}:");
        println!("{}", serde_json::to_string_pretty(&lines)?);
        fitted_spec
            .harmonic_sources
            .iter_mut()
            .find(|s| s.id == *source_id)
            .ok_or(Error::InvalidInput {
                what: "fitted source",
                detail: format!("{source_id} not declared in the case"),
            })?
            .spectrum = lines;
    }

    println!("\nScan with the fitted sources, filters out of service:");
    let bare = build_network(&fitted_spec)?;
    let bare_sol = solve_load_flow(&bare, &SolverOptions::default())?;
    print_scan(&bare, &bare_sol)?;

    let mut filtered_spec = fitted_spec;
    for shunt in &mut filtered_spec.shunts {
        if matches!(shunt.kind, ShuntKind::SingleTunedFilter { .. }) {
            shunt.in_service = true;
        }
    }
    println!("\nSame sources with the 3+5 filter bank in service:");
    let filtered = build_network(&filtered_spec)?;
    let filtered_sol = solve_load_flow(&filtered, &SolverOptions::default())?;
    print_scan(&filtered, &filtered_sol)?;
    Ok(())
}

/// Currents at `bus` that reproduce `targets` there while the other fitted
/// bus and every declared source keep their own balance. Works on the
/// unreduced harmonic admittance matrix with the slack grounded: the two
/// targeted voltages are imposed, the free-bus node equations are solved,
/// and the targeted rows then yield the necessary injection.
fn fit_source(
    net: &Network,
    sol: &PowerFlowSolution,
    spec: &NetworkSpec,
    bus: &str,
    targets: &[(u32, f64)],
) -> Result<Vec<SpectrumLine>> {
    let slack = net.slack_index();
    let targeted: Vec<usize> = FITTED
        .iter()
        .map(|(_, b)| net.bus_index(b))
        .collect::<Result<_>>()?;
    let free: Vec<usize> = (0..net.bus_count())
        .filter(|i| *i != slack && !targeted.contains(i))
        .collect();
    let this = net.bus_index(bus)?;

    let fitted_mva = spec
        .harmonic_sources
        .iter()
        .find(|s| s.bus == bus && FITTED.iter().any(|(id, _)| *id == s.id))
        .map(|s| s.fundamental_mva)
        .ok_or(Error::InvalidInput {
            what: "fitted source",
            detail: format!("no fitted source declared at {bus}"),
        })?;
    let i1 = net.mva_to_pu(fitted_mva) / sol.voltage_pu(bus)?;

    let mut lines = Vec::new();
    for &(order, _) in targets {
        let y = net.admittance_matrix(order);

        // Fixed injections from the declared (non-fitted) sources.
        let mut injection = vec![Complex64::ZERO; net.bus_count()];
        for src in &spec.harmonic_sources {
            if FITTED.iter().any(|(id, _)| *id == src.id) {
                continue;
            }
            let scale = net.mva_to_pu(src.fundamental_mva) / sol.voltage_pu(&src.bus)?;
            for line in &src.spectrum {
                if line.order == order {
                    injection[net.bus_index(&src.bus)?] += Complex64::from_polar(
                        scale * line.magnitude_percent / 100.0,
                        line.phase_deg.to_radians(),
                    );
                }
            }
        }

        // Target phasor phases: take the phase the network would produce
        // for quadrature-lagging seed currents, so the fitted injections
        // come out near a natural operating point instead of fighting the
        // plant source.
        let keep: Vec<usize> = (0..net.bus_count()).filter(|i| *i != slack).collect();
        let mut y_keep = DMatrix::from_element(keep.len(), keep.len(), Complex64::ZERO);
        for (r, &i) in keep.iter().enumerate() {
            for (c, &j) in keep.iter().enumerate() {
                y_keep[(r, c)] = y[(i, j)];
            }
        }
        let mut seed = nalgebra::DVector::from_element(keep.len(), Complex64::ZERO);
        for (k, &i) in keep.iter().enumerate() {
            seed[k] = injection[i];
            if targeted.contains(&i) {
                seed[k] += Complex64::new(0.0, -1.0);
            }
        }
        let natural = y_keep
            .clone()
            .lu()
            .solve(&seed)
            .ok_or(Error::SingularHarmonicNetwork { order })?;
        let phase_of = |i: usize| natural[keep.iter().position(|&k| k == i).unwrap()].arg();

        // Imposed voltages at both targeted buses (percent of their own
        // fundamental), free-bus voltages from their node equations.
        let v_target: Vec<Complex64> = targeted
            .iter()
            .enumerate()
            .map(|(t, &i)| {
                let pct = [&SWGR_TARGETS, &LOAD_TARGETS][t]
                    .iter()
                    .find(|(o, _)| *o == order)
                    .map(|(_, p)| *p)
                    .unwrap_or(0.0);
                Ok(Complex64::from_polar(
                    pct / 100.0 * sol.v_magnitude_pu[i],
                    phase_of(i),
                ))
            })
            .collect::<Result<_>>()?;

        let mut y_ff = DMatrix::from_element(free.len(), free.len(), Complex64::ZERO);
        let mut rhs = nalgebra::DVector::from_element(free.len(), Complex64::ZERO);
        for (r, &i) in free.iter().enumerate() {
            rhs[r] = injection[i];
            for (c, &j) in free.iter().enumerate() {
                y_ff[(r, c)] = y[(i, j)];
            }
            for (t, &j) in targeted.iter().enumerate() {
                rhs[r] -= y[(i, j)] * v_target[t];
            }
        }
        let v_free = y_ff
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularHarmonicNetwork { order })?;

        let mut required = Complex64::ZERO;
        for (t, &j) in targeted.iter().enumerate() {
            required += y[(this, j)] * v_target[t];
        }
        for (c, &j) in free.iter().enumerate() {
            required += y[(this, j)] * v_free[c];
        }
        required -= injection[this];

        lines.push(SpectrumLine {
            order,
            magnitude_percent: required.norm() / i1 * 100.0,
            phase_deg: required.arg().to_degrees(),
        });
    }
    Ok(lines)
}

fn print_scan(net: &Network, sol: &PowerFlowSolution) -> Result<()> {
    let report = harmonic_scan(net, sol, &[5, 7, 11, 13])?;
    for bus in &report.buses {
        let comps: Vec<String> = bus
            .components_percent
            .iter()
            .map(|(h, v)| format!("h{h} {v:.2}%"))
            .collect();
        println!(
            "  {:<8} THD {:6.2}%   {}",
            bus.bus,
            bus.thd_percent,
            comps.join("  ")
        );
    }
    Ok(())
}
