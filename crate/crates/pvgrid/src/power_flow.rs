//! Newton-Raphson AC load flow in polar form.
//!
//! The solver iterates the full Jacobian (H, N, M, L blocks) on power
//! mismatches in per-unit, with generator reactive limits enforced by
//! PV-to-PQ switching in an outer loop: after the inner Newton iteration
//! converges, any voltage-controlled bus whose generators would exceed a
//! reactive limit is clamped to that limit and re-solved as a load bus;
//! a clamped bus is released again if its voltage recovers past the
//! setpoint in the relieving direction.
//!
//! Results are bus-order canonical: buses are processed sorted by id, so
//! two case files describing the same network in different declaration
//! orders produce bit-identical per-bus results.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BusKind, MeterEnd, Network};
use crate::sizing::line_current;

/// Apparent-power floor below which a power factor is reported as
/// undefined rather than a number (1 W on an MVA scale).
pub const NO_FLOW_MVA: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence threshold on the largest power mismatch, per-unit.
    pub tolerance_pu: f64,
    /// Inner Newton iteration budget (cumulative across PV/PQ switching
    /// passes).
    pub max_iterations: usize,
    /// Start from 1.0 pu magnitude and zero angle instead of the bus
    /// initial values.
    pub flat_start: bool,
    /// Enforce generator reactive limits by PV-to-PQ switching.
    pub enforce_q_limits: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance_pu: 1e-8,
            max_iterations: 50,
            flat_start: true,
            enforce_q_limits: true,
        }
    }
}

/// Power flow through one branch, metered at both ends (positive into the
/// branch). Currents are amps at each end's nominal voltage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchFlow {
    pub branch_id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub p_from_mw: f64,
    pub q_from_mvar: f64,
    pub p_to_mw: f64,
    pub q_to_mvar: f64,
    pub current_from_a: f64,
    pub current_to_a: f64,
}

impl BranchFlow {
    /// Active power dissipated in the branch (both ends metered into it).
    pub fn loss_mw(&self) -> f64 {
        self.p_from_mw + self.p_to_mw
    }
}

/// A solved operating point. Vectors are indexed like the network's bus
/// list; `bus_ids` carries the mapping for consumers without the network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    pub base_mva: f64,
    pub bus_ids: Vec<String>,
    pub nominal_kv: Vec<f64>,
    pub v_magnitude_pu: Vec<f64>,
    pub v_angle_rad: Vec<f64>,
    /// Net injection per bus (generation minus load minus shunt draw).
    pub p_injection_mw: Vec<f64>,
    pub q_injection_mvar: Vec<f64>,
    pub branch_flows: Vec<BranchFlow>,
    /// Reactive output attributed to each generator.
    pub generator_q_mvar: Vec<(String, f64)>,
    /// Generators held at a reactive limit in the final solution.
    pub clamped_generators: Vec<String>,
    pub iterations: usize,
    pub max_mismatch_pu: f64,
}

impl PowerFlowSolution {
    pub fn bus_position(&self, id: &str) -> Result<usize> {
        self.bus_ids
            .iter()
            .position(|b| b == id)
            .ok_or_else(|| Error::UnknownBus(id.to_string()))
    }

    pub fn voltage_pu(&self, id: &str) -> Result<f64> {
        Ok(self.v_magnitude_pu[self.bus_position(id)?])
    }

    pub fn total_losses_mw(&self) -> f64 {
        self.branch_flows.iter().map(BranchFlow::loss_mw).sum()
    }
}

/// Apparent power, power factor, and current derived from a P/Q pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerQuantities {
    pub p_mw: f64,
    pub q_mvar: f64,
    pub s_mva: f64,
    /// `None` marks no flow. The sign is negative when the reactive flow
    /// direction opposes the active flow direction (a leading power factor
    /// under export).
    pub power_factor: Option<f64>,
    pub current_a: f64,
}

/// Signed power factor of a P/Q pair under the leading/lagging convention
/// above; `None` below the no-flow floor.
pub fn power_factor(p_mw: f64, q_mvar: f64) -> Option<f64> {
    let s = p_mw.hypot(q_mvar);
    if s < NO_FLOW_MVA {
        return None;
    }
    let sign = if p_mw * q_mvar < 0.0 { -1.0 } else { 1.0 };
    Some(sign * p_mw.abs() / s)
}

/// Derives apparent power, signed power factor, and line current (at
/// `voltage_kv`) from a metered P/Q pair.
pub fn power_quantities(p_mw: f64, q_mvar: f64, voltage_kv: f64) -> PowerQuantities {
    let s_mva = p_mw.hypot(q_mvar);
    PowerQuantities {
        p_mw,
        q_mvar,
        s_mva,
        power_factor: power_factor(p_mw, q_mvar),
        current_a: line_current(s_mva, voltage_kv),
    }
}

/// Net-injection quantities at a bus, with current at the bus nominal
/// voltage.
pub fn bus_power_quantities(solution: &PowerFlowSolution, bus: &str) -> Result<PowerQuantities> {
    let i = solution.bus_position(bus)?;
    Ok(power_quantities(
        solution.p_injection_mw[i],
        solution.q_injection_mvar[i],
        solution.nominal_kv[i],
    ))
}

/// Branch-flow quantities metered at one end of a branch.
pub fn branch_power_quantities(
    solution: &PowerFlowSolution,
    branch: &str,
    end: MeterEnd,
) -> Result<PowerQuantities> {
    let flow = solution
        .branch_flows
        .iter()
        .find(|f| f.branch_id == branch)
        .ok_or_else(|| Error::InvalidInput {
            what: "branch id",
            detail: format!("`{branch}` is not in the solution"),
        })?;
    let (p, q, bus) = match end {
        MeterEnd::From => (flow.p_from_mw, flow.q_from_mvar, &flow.from_bus),
        MeterEnd::To => (flow.p_to_mw, flow.q_to_mvar, &flow.to_bus),
    };
    let i = solution.bus_position(bus)?;
    Ok(power_quantities(p, q, solution.nominal_kv[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SolveKind {
    Slack,
    Pv,
    Pq,
}

/// Aggregate generator data at one bus.
struct PvBus {
    bus: usize,
    setpoint: f64,
    q_min_pu: f64,
    q_max_pu: f64,
    /// `Some(limit)` when clamped to a reactive limit and solved as PQ.
    clamped_at: Option<f64>,
}

/// Solves the AC load flow. Distinct failures: [`Error::Diverged`] when the
/// iteration budget runs out or voltages leave the solvable region, and
/// [`Error::SingularJacobian`] when the linearized system loses rank (the
/// operating point is at a collapse boundary).
pub fn solve_load_flow(network: &Network, options: &SolverOptions) -> Result<PowerFlowSolution> {
    let n = network.bus_count();

    // Canonical processing order: buses sorted by id. All per-bus arrays
    // inside the solver live in this order and are mapped back at the end.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| network.buses[a].id.cmp(&network.buses[b].id));
    let mut canon_of = vec![0usize; n];
    for (c, &i) in order.iter().enumerate() {
        canon_of[i] = c;
    }

    let y_file = network.admittance_matrix(1);
    let mut y = DMatrix::from_element(n, n, Complex64::ZERO);
    for ci in 0..n {
        for cj in 0..n {
            y[(ci, cj)] = y_file[(order[ci], order[cj])];
        }
    }

    // Scheduled injections (pu), canonical order.
    let sched_file = network.scheduled_injection_pu();
    let svc_file = network.svc_injection_pu();
    let mut p_sched = vec![0.0; n];
    let mut q_sched = vec![0.0; n];
    for i in 0..n {
        p_sched[canon_of[i]] = sched_file[i].re;
        q_sched[canon_of[i]] = sched_file[i].im + svc_file[i];
    }

    let mut kind = vec![SolveKind::Pq; n];
    let mut setpoint = vec![1.0; n];
    for (i, bus) in network.buses.iter().enumerate() {
        kind[canon_of[i]] = match bus.kind {
            BusKind::Slack => SolveKind::Slack,
            BusKind::Pv => SolveKind::Pv,
            BusKind::Pq => SolveKind::Pq,
        };
    }

    let mut pv_buses: Vec<PvBus> = Vec::new();
    {
        // Group generators by canonical bus index, deterministic order.
        let mut per_bus: Vec<(usize, f64, f64, f64)> = Vec::new();
        for gen in &network.generators {
            let file_idx = network.bus_index(&gen.bus)?;
            if network.buses[file_idx].kind != BusKind::Pv {
                continue;
            }
            let c = canon_of[file_idx];
            match per_bus.iter_mut().find(|e| e.0 == c) {
                Some(e) => {
                    if (e.1 - gen.voltage_setpoint_pu).abs() > 1e-9 {
                        return Err(Error::InvalidValue {
                            kind: "generator",
                            id: gen.id.clone(),
                            field: "voltage_setpoint_pu",
                            value: gen.voltage_setpoint_pu,
                        });
                    }
                    e.2 += network.mva_to_pu(gen.q_min_mvar);
                    e.3 += network.mva_to_pu(gen.q_max_mvar);
                }
                None => per_bus.push((
                    c,
                    gen.voltage_setpoint_pu,
                    network.mva_to_pu(gen.q_min_mvar),
                    network.mva_to_pu(gen.q_max_mvar),
                )),
            }
        }
        per_bus.sort_by_key(|e| e.0);
        for (c, v, q_min, q_max) in per_bus {
            setpoint[c] = v;
            pv_buses.push(PvBus {
                bus: c,
                setpoint: v,
                q_min_pu: q_min,
                q_max_pu: q_max,
                clamped_at: None,
            });
        }
    }
    for c in 0..n {
        if kind[c] == SolveKind::Pv && !pv_buses.iter().any(|p| p.bus == c) {
            return Err(Error::InvalidInput {
                what: "bus kind",
                detail: format!(
                    "bus `{}` is voltage-controlled but has no generator",
                    network.buses[order[c]].id
                ),
            });
        }
    }

    // State.
    let mut vm = vec![1.0; n];
    let mut va = vec![0.0; n];
    for (i, bus) in network.buses.iter().enumerate() {
        let c = canon_of[i];
        if options.flat_start {
            vm[c] = 1.0;
            va[c] = 0.0;
        } else {
            vm[c] = bus.initial_magnitude_pu;
            va[c] = bus.initial_angle_rad;
        }
        if bus.kind == BusKind::Slack {
            vm[c] = bus.initial_magnitude_pu;
            va[c] = bus.initial_angle_rad;
        }
    }
    for pv in &pv_buses {
        vm[pv.bus] = pv.setpoint;
    }

    let mut iterations = 0usize;
    let mut max_mismatch = f64::INFINITY;

    // Outer loop: Newton to convergence, then adjust PV/PQ clamps.
    let switch_pass_limit = 4 + 2 * pv_buses.len();
    for _pass in 0..switch_pass_limit {
        max_mismatch = newton_inner(
            &y,
            &kind,
            &p_sched,
            &q_sched,
            &mut vm,
            &mut va,
            &mut iterations,
            options,
        )?;

        if !options.enforce_q_limits {
            break;
        }

        let (p_calc, q_calc) = calculated_injections(&y, &vm, &va);
        let mut changed = false;
        for pv in &mut pv_buses {
            let c = pv.bus;
            match pv.clamped_at {
                None => {
                    // Reactive power the generators must produce to hold the
                    // setpoint: calculated net injection plus local load.
                    let q_gen = q_calc[c] - q_sched[c];
                    if q_gen > pv.q_max_pu + 1e-9 {
                        pv.clamped_at = Some(pv.q_max_pu);
                        kind[c] = SolveKind::Pq;
                        q_sched[c] += pv.q_max_pu;
                        changed = true;
                    } else if q_gen < pv.q_min_pu - 1e-9 {
                        pv.clamped_at = Some(pv.q_min_pu);
                        kind[c] = SolveKind::Pq;
                        q_sched[c] += pv.q_min_pu;
                        changed = true;
                    }
                }
                Some(limit) => {
                    // Release if the voltage has recovered past the setpoint
                    // in the direction the clamp was fighting.
                    let release = (limit == pv.q_max_pu && vm[c] > pv.setpoint + 1e-9)
                        || (limit == pv.q_min_pu && vm[c] < pv.setpoint - 1e-9);
                    if release {
                        pv.clamped_at = None;
                        kind[c] = SolveKind::Pv;
                        q_sched[c] -= limit;
                        vm[c] = pv.setpoint;
                        changed = true;
                    }
                }
            }
        }
        let _ = p_calc;
        if !changed {
            break;
        }
    }

    // Final injections and per-bus results, mapped back to file order.
    let (p_calc, q_calc) = calculated_injections(&y, &vm, &va);
    let mut v_magnitude_pu = vec![0.0; n];
    let mut v_angle_rad = vec![0.0; n];
    let mut p_injection_mw = vec![0.0; n];
    let mut q_injection_mvar = vec![0.0; n];
    for i in 0..n {
        let c = canon_of[i];
        v_magnitude_pu[i] = vm[c];
        v_angle_rad[i] = va[c];
        p_injection_mw[i] = network.pu_to_mva(p_calc[c]);
        q_injection_mvar[i] = network.pu_to_mva(q_calc[c]);
    }

    // Attribute reactive output to generators at controlled buses.
    let mut generator_q_mvar = Vec::new();
    let mut clamped_generators = Vec::new();
    for gen in &network.generators {
        let file_idx = network.bus_index(&gen.bus)?;
        if network.buses[file_idx].kind != BusKind::Pv {
            continue;
        }
        let c = canon_of[file_idx];
        let pv = pv_buses.iter().find(|p| p.bus == c).expect("pv bus known");
        let q_sched_other = {
            // Scheduled Q at this bus excluding any clamped generator term.
            let base = sched_file[file_idx].im + svc_file[file_idx];
            base
        };
        let q_gen_total = q_calc[c] - q_sched_other;
        let range: f64 = network
            .generators
            .iter()
            .filter(|g| g.bus == gen.bus)
            .map(|g| g.q_max_mvar - g.q_min_mvar)
            .sum();
        let share = if range > 0.0 {
            (gen.q_max_mvar - gen.q_min_mvar) / range
        } else {
            1.0 / network.generators.iter().filter(|g| g.bus == gen.bus).count() as f64
        };
        generator_q_mvar.push((gen.id.clone(), network.pu_to_mva(q_gen_total) * share));
        if pv.clamped_at.is_some() {
            clamped_generators.push(gen.id.clone());
        }
    }

    let branch_flows = branch_flows(network, &v_magnitude_pu, &v_angle_rad);

    Ok(PowerFlowSolution {
        base_mva: network.base_mva,
        bus_ids: network.buses.iter().map(|b| b.id.clone()).collect(),
        nominal_kv: network.buses.iter().map(|b| b.nominal_voltage_kv).collect(),
        v_magnitude_pu,
        v_angle_rad,
        p_injection_mw,
        q_injection_mvar,
        branch_flows,
        generator_q_mvar,
        clamped_generators,
        iterations,
        max_mismatch_pu: max_mismatch,
    })
}

/// One Newton campaign with fixed bus kinds. Returns the final mismatch.
#[allow(clippy::too_many_arguments)]
fn newton_inner(
    y: &DMatrix<Complex64>,
    kind: &[SolveKind],
    p_sched: &[f64],
    q_sched: &[f64],
    vm: &mut [f64],
    va: &mut [f64],
    iterations: &mut usize,
    options: &SolverOptions,
) -> Result<f64> {
    let n = vm.len();
    let ang: Vec<usize> = (0..n).filter(|&i| kind[i] != SolveKind::Slack).collect();
    let mag: Vec<usize> = (0..n).filter(|&i| kind[i] == SolveKind::Pq).collect();
    let na = ang.len();
    let nm = mag.len();
    let unknowns = na + nm;

    loop {
        let (p_calc, q_calc) = calculated_injections(y, vm, va);
        let mut mismatch = DVector::zeros(unknowns);
        let mut max_abs: f64 = 0.0;
        for (k, &i) in ang.iter().enumerate() {
            let dp = p_sched[i] - p_calc[i];
            mismatch[k] = dp;
            max_abs = max_abs.max(dp.abs());
        }
        for (k, &i) in mag.iter().enumerate() {
            let dq = q_sched[i] - q_calc[i];
            mismatch[na + k] = dq;
            max_abs = max_abs.max(dq.abs());
        }

        if max_abs < options.tolerance_pu {
            return Ok(max_abs);
        }
        if *iterations >= options.max_iterations {
            return Err(Error::Diverged {
                iterations: *iterations,
                mismatch: max_abs,
            });
        }
        if !max_abs.is_finite() {
            return Err(Error::Diverged {
                iterations: *iterations,
                mismatch: max_abs,
            });
        }

        let mut jac = DMatrix::zeros(unknowns, unknowns);
        for (row, &i) in ang.iter().enumerate() {
            for (col, &j) in ang.iter().enumerate() {
                jac[(row, col)] = dp_dtheta(y, vm, va, &p_calc, &q_calc, i, j);
            }
            for (col, &j) in mag.iter().enumerate() {
                jac[(row, na + col)] = dp_dv(y, vm, va, &p_calc, i, j);
            }
        }
        for (row, &i) in mag.iter().enumerate() {
            for (col, &j) in ang.iter().enumerate() {
                jac[(na + row, col)] = dq_dtheta(y, vm, va, &p_calc, i, j);
            }
            for (col, &j) in mag.iter().enumerate() {
                jac[(na + row, na + col)] = dq_dv(y, vm, va, &q_calc, i, j);
            }
        }

        let lu = jac.lu();
        let step = lu.solve(&mismatch).ok_or(Error::SingularJacobian {
            iteration: *iterations,
        })?;
        if !step.iter().all(|x| x.is_finite()) {
            return Err(Error::SingularJacobian {
                iteration: *iterations,
            });
        }

        for (k, &i) in ang.iter().enumerate() {
            va[i] += step[k];
        }
        for (k, &i) in mag.iter().enumerate() {
            vm[i] += step[na + k];
            if vm[i] <= 0.0 || !vm[i].is_finite() {
                return Err(Error::Diverged {
                    iterations: *iterations + 1,
                    mismatch: max_abs,
                });
            }
        }
        *iterations += 1;
    }
}

/// P and Q injections implied by the voltage state, per-unit.
fn calculated_injections(
    y: &DMatrix<Complex64>,
    vm: &[f64],
    va: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = vm.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let mut sp = 0.0;
        let mut sq = 0.0;
        for j in 0..n {
            let g = y[(i, j)].re;
            let b = y[(i, j)].im;
            let th = va[i] - va[j];
            let (sin, cos) = th.sin_cos();
            sp += vm[j] * (g * cos + b * sin);
            sq += vm[j] * (g * sin - b * cos);
        }
        p[i] = vm[i] * sp;
        q[i] = vm[i] * sq;
    }
    (p, q)
}

fn dp_dtheta(
    y: &DMatrix<Complex64>,
    vm: &[f64],
    va: &[f64],
    p: &[f64],
    q: &[f64],
    i: usize,
    j: usize,
) -> f64 {
    let _ = p;
    if i == j {
        -q[i] - y[(i, i)].im * vm[i] * vm[i]
    } else {
        let th = va[i] - va[j];
        let (sin, cos) = th.sin_cos();
        vm[i] * vm[j] * (y[(i, j)].re * sin - y[(i, j)].im * cos)
    }
}

fn dp_dv(
    y: &DMatrix<Complex64>,
    vm: &[f64],
    va: &[f64],
    p: &[f64],
    i: usize,
    j: usize,
) -> f64 {
    if i == j {
        p[i] / vm[i] + y[(i, i)].re * vm[i]
    } else {
        let th = va[i] - va[j];
        let (sin, cos) = th.sin_cos();
        vm[i] * (y[(i, j)].re * cos + y[(i, j)].im * sin)
    }
}

fn dq_dtheta(
    y: &DMatrix<Complex64>,
    vm: &[f64],
    va: &[f64],
    p: &[f64],
    i: usize,
    j: usize,
) -> f64 {
    if i == j {
        p[i] - y[(i, i)].re * vm[i] * vm[i]
    } else {
        let th = va[i] - va[j];
        let (sin, cos) = th.sin_cos();
        -vm[i] * vm[j] * (y[(i, j)].re * cos + y[(i, j)].im * sin)
    }
}

fn dq_dv(
    y: &DMatrix<Complex64>,
    vm: &[f64],
    va: &[f64],
    q: &[f64],
    i: usize,
    j: usize,
) -> f64 {
    if i == j {
        q[i] / vm[i] - y[(i, i)].im * vm[i]
    } else {
        let th = va[i] - va[j];
        let (sin, cos) = th.sin_cos();
        vm[i] * (y[(i, j)].re * sin - y[(i, j)].im * cos)
    }
}

/// Branch flows from a solved voltage profile (file bus order).
fn branch_flows(network: &Network, vm: &[f64], va: &[f64]) -> Vec<BranchFlow> {
    let mut flows = Vec::with_capacity(network.branches.len());
    for br in &network.branches {
        let f = network.bus_index(&br.from_bus).expect("validated");
        let t = network.bus_index(&br.to_bus).expect("validated");
        let vf = Complex64::from_polar(vm[f], va[f]);
        let vt = Complex64::from_polar(vm[t], va[t]);
        let ys = Complex64::new(br.series_resistance_pu, br.series_reactance_pu).inv();
        let ysh = Complex64::new(0.0, br.shunt_susceptance_pu / 2.0);
        let tap = br.tap_ratio;
        let i_f = vf * (ys / (tap * tap) + ysh) - vt * (ys / tap);
        let i_t = vt * (ys + ysh) - vf * (ys / tap);
        let s_f = vf * i_f.conj();
        let s_t = vt * i_t.conj();
        let s_f_mva = s_f * network.base_mva;
        let s_t_mva = s_t * network.base_mva;
        flows.push(BranchFlow {
            branch_id: br.id.clone(),
            from_bus: br.from_bus.clone(),
            to_bus: br.to_bus.clone(),
            p_from_mw: s_f_mva.re,
            q_from_mvar: s_f_mva.im,
            p_to_mw: s_t_mva.re,
            q_to_mvar: s_t_mva.im,
            current_from_a: line_current(s_f_mva.norm(), network.buses[f].nominal_voltage_kv),
            current_to_a: line_current(s_t_mva.norm(), network.buses[t].nominal_voltage_kv),
        });
    }
    flows
}
