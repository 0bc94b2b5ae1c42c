//! Network model, case-file schema, and admittance-matrix assembly.
//!
//! A case is declared in JSON (see [`NetworkSpec`]) in SI-ish engineering
//! units: bus voltages in kV, loads and generation in MW/Mvar, branch
//! impedances already in per-unit on the case's MVA base. [`build_network`]
//! validates the declaration (unique ids, resolvable references, exactly one
//! slack, connected graph, sane values) and produces a [`Network`] ready for
//! the solvers.
//!
//! The admittance matrix can be assembled at the fundamental or at an
//! integer harmonic order `h`: series reactances and inductive shunts scale
//! with `h`, capacitive shunts scale with `1/h` in impedance terms (their
//! susceptance grows with `h`). Loads appear in the harmonic matrix as
//! parallel R-L admittances (a common damping model; configurable to be
//! ignored instead), but never in the fundamental matrix, where they are
//! power constraints for the load-flow solver rather than impedances.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a bus participates in the load flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    /// Angle and voltage reference; absorbs the power mismatch.
    Slack,
    /// Voltage-controlled bus: fixed P and |V| while reactive limits allow.
    Pv,
    /// Load bus: fixed P and Q.
    Pq,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub kind: BusKind,
    pub nominal_voltage_kv: f64,
    /// Starting magnitude when the solver is not flat-starting.
    #[serde(default = "default_one")]
    pub initial_magnitude_pu: f64,
    /// Starting angle when the solver is not flat-starting.
    #[serde(default)]
    pub initial_angle_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    Line,
    Transformer,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub kind: BranchKind,
    pub series_resistance_pu: f64,
    pub series_reactance_pu: f64,
    /// Total line-charging susceptance, split half to each terminal.
    /// Positive is capacitive. Negative values model shunt reactors.
    #[serde(default)]
    pub shunt_susceptance_pu: f64,
    /// Off-nominal turns ratio on the `from` side; 1.0 for nominal.
    #[serde(default = "default_one")]
    pub tap_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadSpec {
    pub id: String,
    pub bus: String,
    pub p_mw: f64,
    pub q_mvar: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub id: String,
    pub bus: String,
    pub p_mw: f64,
    pub voltage_setpoint_pu: f64,
    pub q_min_mvar: f64,
    pub q_max_mvar: f64,
}

/// Static var compensator operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvcMode {
    /// Constant reactive injection regardless of voltage.
    FixedQ,
    /// Constant susceptance: injection scales with the voltage squared.
    Susceptance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShuntKind {
    Svc {
        q_mvar: f64,
        q_limit_mvar: f64,
        #[serde(default = "default_svc_mode")]
        mode: SvcMode,
    },
    /// Series R-L-C branch to ground tuned to one harmonic order. `q_mvar`
    /// is the capacitor bank's three-phase rating at nominal voltage and
    /// fundamental frequency; element values follow from it.
    SingleTunedFilter {
        order: u32,
        q_mvar: f64,
        #[serde(default = "default_quality_factor")]
        quality_factor: f64,
    },
}

fn default_svc_mode() -> SvcMode {
    SvcMode::FixedQ
}

fn default_quality_factor() -> f64 {
    50.0
}

fn default_one() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShuntDevice {
    pub id: String,
    pub bus: String,
    #[serde(flatten)]
    pub kind: ShuntKind,
    /// Out-of-service devices are planned slots the study may switch in.
    #[serde(default = "default_true")]
    pub in_service: bool,
}

/// One line of a harmonic current spectrum, as a percentage of the source's
/// fundamental current.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumLine {
    pub order: u32,
    pub magnitude_percent: f64,
    #[serde(default)]
    pub phase_deg: f64,
}

/// A harmonic current injector attached to a bus. The spectrum is declared
/// data (typically fitted to measurements or vendor curves), not something
/// the toolkit derives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarmonicSource {
    pub id: String,
    pub bus: String,
    /// Fundamental-frequency apparent power of the device the percentages
    /// refer to.
    pub fundamental_mva: f64,
    pub spectrum: Vec<SpectrumLine>,
}

/// Replicates the sub-block hanging off one bus into `count` identical
/// parallel copies (bus, its branches, and everything attached to it), the
/// way a PV plant repeats one inverter-plus-transformer unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Expansion {
    pub bus: String,
    pub count: u32,
}

/// How a monitored quantity is metered for reporting and compliance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Monitor {
    pub bus: String,
    /// Meter on this branch's flow instead of the bus net injection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
    /// Which end of the metered branch; defaults to the end at `bus`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<MeterEnd>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeterEnd {
    From,
    To,
}

/// Per-case defaults the study pipeline uses when no policy overrides them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StudyDefaults {
    #[serde(default)]
    pub monitored: Vec<Monitor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compensation_bus: Option<String>,
}

/// Declarative case file. This is exactly the JSON schema; see
/// `cases/reference_case.json` for a worked example.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub base_mva: f64,
    pub base_frequency_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    #[serde(default)]
    pub loads: Vec<LoadSpec>,
    #[serde(default)]
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub shunts: Vec<ShuntDevice>,
    #[serde(default)]
    pub harmonic_sources: Vec<HarmonicSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<Expansion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study_defaults: Option<StudyDefaults>,
}

impl NetworkSpec {
    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::CaseFile(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Load-damping model used when assembling harmonic-order admittance
/// matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmonicLoadModel {
    /// Load as a parallel R-L: conductance from P, inductive susceptance
    /// from Q scaled down with order. Provides resistive damping.
    #[default]
    ParallelRl,
    /// Loads ignored at harmonic orders (no damping; conservative).
    Open,
}

/// A validated network. Construct via [`build_network`]; the field layout
/// mirrors the spec file with ids resolved to indices.
#[derive(Debug, Clone)]
pub struct Network {
    pub base_mva: f64,
    pub base_frequency_hz: f64,
    pub description: Option<String>,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub loads: Vec<LoadSpec>,
    pub generators: Vec<GeneratorSpec>,
    pub shunts: Vec<ShuntDevice>,
    pub harmonic_sources: Vec<HarmonicSource>,
    pub study_defaults: Option<StudyDefaults>,
    pub harmonic_load_model: HarmonicLoadModel,
    index_of: HashMap<String, usize>,
}

/// Validates a declarative spec and builds the working model, applying the
/// sub-block expansion if one is declared.
pub fn build_network(spec: &NetworkSpec) -> Result<Network> {
    let spec = match &spec.expansion {
        Some(exp) => expand_subblock(spec, exp)?,
        None => spec.clone(),
    };

    if !(spec.base_mva > 0.0) {
        return Err(Error::InvalidInput {
            what: "base_mva",
            detail: format!("must be positive, got {}", spec.base_mva),
        });
    }
    if !(spec.base_frequency_hz > 0.0) {
        return Err(Error::InvalidInput {
            what: "base_frequency_hz",
            detail: format!("must be positive, got {}", spec.base_frequency_hz),
        });
    }

    let mut index_of = HashMap::new();
    for (i, bus) in spec.buses.iter().enumerate() {
        if index_of.insert(bus.id.clone(), i).is_some() {
            return Err(Error::DuplicateId {
                kind: "bus",
                id: bus.id.clone(),
            });
        }
        if !(bus.nominal_voltage_kv > 0.0) {
            return Err(Error::InvalidBusValue {
                id: bus.id.clone(),
                field: "nominal_voltage_kv",
                value: bus.nominal_voltage_kv,
            });
        }
        if !(bus.initial_magnitude_pu > 0.0) {
            return Err(Error::InvalidBusValue {
                id: bus.id.clone(),
                field: "initial_magnitude_pu",
                value: bus.initial_magnitude_pu,
            });
        }
    }

    let mut slack: Option<&Bus> = None;
    for bus in &spec.buses {
        if bus.kind == BusKind::Slack {
            if let Some(first) = slack {
                return Err(Error::MultipleSlackBuses {
                    first: first.id.clone(),
                    second: bus.id.clone(),
                });
            }
            slack = Some(bus);
        }
    }
    let slack = slack.ok_or(Error::NoSlackBus)?;

    let mut seen = HashSet::new();
    for br in &spec.branches {
        if !seen.insert(br.id.clone()) {
            return Err(Error::DuplicateId {
                kind: "branch",
                id: br.id.clone(),
            });
        }
        for bus in [&br.from_bus, &br.to_bus] {
            if !index_of.contains_key(bus) {
                return Err(Error::DanglingBusReference {
                    kind: "branch",
                    id: br.id.clone(),
                    bus: bus.clone(),
                });
            }
        }
        if br.series_resistance_pu == 0.0 && br.series_reactance_pu == 0.0 {
            return Err(Error::ZeroImpedanceBranch { id: br.id.clone() });
        }
        if !(br.tap_ratio > 0.0) {
            return Err(Error::InvalidValue {
                kind: "branch",
                id: br.id.clone(),
                field: "tap_ratio",
                value: br.tap_ratio,
            });
        }
    }

    let mut seen = HashSet::new();
    for load in &spec.loads {
        if !seen.insert(load.id.clone()) {
            return Err(Error::DuplicateId {
                kind: "load",
                id: load.id.clone(),
            });
        }
        if !index_of.contains_key(&load.bus) {
            return Err(Error::DanglingBusReference {
                kind: "load",
                id: load.id.clone(),
                bus: load.bus.clone(),
            });
        }
    }

    let mut seen = HashSet::new();
    for gen in &spec.generators {
        if !seen.insert(gen.id.clone()) {
            return Err(Error::DuplicateId {
                kind: "generator",
                id: gen.id.clone(),
            });
        }
        if !index_of.contains_key(&gen.bus) {
            return Err(Error::DanglingBusReference {
                kind: "generator",
                id: gen.id.clone(),
                bus: gen.bus.clone(),
            });
        }
        if gen.q_min_mvar > gen.q_max_mvar {
            return Err(Error::InvalidValue {
                kind: "generator",
                id: gen.id.clone(),
                field: "q_min_mvar",
                value: gen.q_min_mvar,
            });
        }
        if !(gen.voltage_setpoint_pu > 0.0) {
            return Err(Error::InvalidValue {
                kind: "generator",
                id: gen.id.clone(),
                field: "voltage_setpoint_pu",
                value: gen.voltage_setpoint_pu,
            });
        }
    }

    let mut seen = HashSet::new();
    for sh in &spec.shunts {
        if !seen.insert(sh.id.clone()) {
            return Err(Error::DuplicateId {
                kind: "shunt",
                id: sh.id.clone(),
            });
        }
        if !index_of.contains_key(&sh.bus) {
            return Err(Error::DanglingBusReference {
                kind: "shunt",
                id: sh.id.clone(),
                bus: sh.bus.clone(),
            });
        }
        match &sh.kind {
            ShuntKind::Svc { q_limit_mvar, q_mvar, .. } => {
                if !(*q_limit_mvar >= 0.0) {
                    return Err(Error::InvalidValue {
                        kind: "shunt",
                        id: sh.id.clone(),
                        field: "q_limit_mvar",
                        value: *q_limit_mvar,
                    });
                }
                if q_mvar.abs() > *q_limit_mvar {
                    return Err(Error::SvcLimitExceeded {
                        bus: sh.bus.clone(),
                        requested_mvar: *q_mvar,
                        limit_mvar: *q_limit_mvar,
                    });
                }
            }
            ShuntKind::SingleTunedFilter { order, q_mvar, quality_factor } => {
                if *order < 2 {
                    return Err(Error::InvalidHarmonicOrder(*order));
                }
                if !(*q_mvar > 0.0) {
                    return Err(Error::InvalidValue {
                        kind: "shunt",
                        id: sh.id.clone(),
                        field: "q_mvar",
                        value: *q_mvar,
                    });
                }
                if !(*quality_factor > 0.0) {
                    return Err(Error::InvalidValue {
                        kind: "shunt",
                        id: sh.id.clone(),
                        field: "quality_factor",
                        value: *quality_factor,
                    });
                }
            }
        }
    }

    let mut seen = HashSet::new();
    for src in &spec.harmonic_sources {
        if !seen.insert(src.id.clone()) {
            return Err(Error::DuplicateId {
                kind: "harmonic_source",
                id: src.id.clone(),
            });
        }
        if !index_of.contains_key(&src.bus) {
            return Err(Error::DanglingBusReference {
                kind: "harmonic_source",
                id: src.id.clone(),
                bus: src.bus.clone(),
            });
        }
        for line in &src.spectrum {
            if line.order < 2 {
                return Err(Error::InvalidHarmonicOrder(line.order));
            }
        }
    }

    // Connectivity: every bus must reach the slack over the branch graph.
    let n = spec.buses.len();
    let mut adjacency = vec![Vec::new(); n];
    for br in &spec.branches {
        let f = index_of[&br.from_bus];
        let t = index_of[&br.to_bus];
        adjacency[f].push(t);
        adjacency[t].push(f);
    }
    let mut reached = vec![false; n];
    let mut stack = vec![index_of[&slack.id]];
    while let Some(i) = stack.pop() {
        if reached[i] {
            continue;
        }
        reached[i] = true;
        stack.extend(adjacency[i].iter().copied());
    }
    if let Some(i) = reached.iter().position(|r| !r) {
        return Err(Error::DisconnectedBus {
            bus: spec.buses[i].id.clone(),
        });
    }

    Ok(Network {
        base_mva: spec.base_mva,
        base_frequency_hz: spec.base_frequency_hz,
        description: spec.description,
        buses: spec.buses,
        branches: spec.branches,
        loads: spec.loads,
        generators: spec.generators,
        shunts: spec.shunts,
        harmonic_sources: spec.harmonic_sources,
        study_defaults: spec.study_defaults,
        harmonic_load_model: HarmonicLoadModel::default(),
        index_of,
    })
}

fn expand_subblock(spec: &NetworkSpec, exp: &Expansion) -> Result<NetworkSpec> {
    if exp.count == 0 {
        return Err(Error::InvalidInput {
            what: "expansion",
            detail: "count must be at least 1".into(),
        });
    }
    if !spec.buses.iter().any(|b| b.id == exp.bus) {
        return Err(Error::UnknownBus(exp.bus.clone()));
    }
    let mut out = spec.clone();
    out.expansion = None;
    if exp.count == 1 {
        return Ok(out);
    }
    let n = exp.count as f64;
    let suffixed = |id: &str, i: u32| format!("{id}_{i}");

    out.buses.retain(|b| b.id != exp.bus);
    out.branches.retain(|b| b.from_bus != exp.bus && b.to_bus != exp.bus);
    out.loads.retain(|l| l.bus != exp.bus);
    out.generators.retain(|g| g.bus != exp.bus);
    out.shunts.retain(|s| s.bus != exp.bus);
    out.harmonic_sources.retain(|s| s.bus != exp.bus);

    for i in 1..=exp.count {
        for bus in spec.buses.iter().filter(|b| b.id == exp.bus) {
            let mut b = bus.clone();
            b.id = suffixed(&b.id, i);
            out.buses.push(b);
        }
        for br in spec
            .branches
            .iter()
            .filter(|b| b.from_bus == exp.bus || b.to_bus == exp.bus)
        {
            let mut b = br.clone();
            b.id = suffixed(&b.id, i);
            if b.from_bus == exp.bus {
                b.from_bus = suffixed(&exp.bus, i);
            }
            if b.to_bus == exp.bus {
                b.to_bus = suffixed(&exp.bus, i);
            }
            // N identical units in parallel: each carries N times the
            // aggregate impedance and a 1/N share of charging.
            b.series_resistance_pu *= n;
            b.series_reactance_pu *= n;
            b.shunt_susceptance_pu /= n;
            out.branches.push(b);
        }
        for load in spec.loads.iter().filter(|l| l.bus == exp.bus) {
            let mut l = load.clone();
            l.id = suffixed(&l.id, i);
            l.bus = suffixed(&exp.bus, i);
            l.p_mw /= n;
            l.q_mvar /= n;
            out.loads.push(l);
        }
        for gen in spec.generators.iter().filter(|g| g.bus == exp.bus) {
            let mut g = gen.clone();
            g.id = suffixed(&g.id, i);
            g.bus = suffixed(&exp.bus, i);
            g.p_mw /= n;
            g.q_min_mvar /= n;
            g.q_max_mvar /= n;
            out.generators.push(g);
        }
        for sh in spec.shunts.iter().filter(|s| s.bus == exp.bus) {
            let mut s = sh.clone();
            s.id = suffixed(&s.id, i);
            s.bus = suffixed(&exp.bus, i);
            match &mut s.kind {
                ShuntKind::Svc { q_mvar, q_limit_mvar, .. } => {
                    *q_mvar /= n;
                    *q_limit_mvar /= n;
                }
                ShuntKind::SingleTunedFilter { q_mvar, .. } => {
                    *q_mvar /= n;
                }
            }
            out.shunts.push(s);
        }
        for src in spec.harmonic_sources.iter().filter(|s| s.bus == exp.bus) {
            let mut s = src.clone();
            s.id = suffixed(&s.id, i);
            s.bus = suffixed(&exp.bus, i);
            s.fundamental_mva /= n;
            out.harmonic_sources.push(s);
        }
    }
    Ok(out)
}

impl Network {
    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: &str) -> Result<usize> {
        self.index_of
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownBus(id.to_string()))
    }

    pub fn bus(&self, id: &str) -> Result<&Bus> {
        Ok(&self.buses[self.bus_index(id)?])
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated network has a slack bus")
    }

    pub fn mva_to_pu(&self, mva: f64) -> f64 {
        mva / self.base_mva
    }

    pub fn pu_to_mva(&self, pu: f64) -> f64 {
        pu * self.base_mva
    }

    /// Net scheduled injection at each bus in per-unit: generation minus
    /// load, excluding SVC devices (the solver layers those on separately).
    pub fn scheduled_injection_pu(&self) -> Vec<Complex64> {
        let mut s = vec![Complex64::ZERO; self.bus_count()];
        for gen in &self.generators {
            let i = self.index_of[&gen.bus];
            s[i].re += self.mva_to_pu(gen.p_mw);
        }
        for load in &self.loads {
            let i = self.index_of[&load.bus];
            s[i].re -= self.mva_to_pu(load.p_mw);
            s[i].im -= self.mva_to_pu(load.q_mvar);
        }
        s
    }

    /// Serializes back to the declarative form. Building the result yields
    /// an equivalent network (expansion, if any was applied, stays applied).
    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            base_mva: self.base_mva,
            base_frequency_hz: self.base_frequency_hz,
            description: self.description.clone(),
            buses: self.buses.clone(),
            branches: self.branches.clone(),
            loads: self.loads.clone(),
            generators: self.generators.clone(),
            shunts: self.shunts.clone(),
            harmonic_sources: self.harmonic_sources.clone(),
            expansion: None,
            study_defaults: self.study_defaults.clone(),
        }
    }

    /// Filter element reactances in per-unit at fundamental frequency:
    /// `(r_pu, x_l_pu, x_c_pu)`. The capacitor rating is taken at the bus
    /// nominal voltage (1.0 pu).
    pub fn filter_elements_pu(&self, order: u32, q_mvar: f64, quality_factor: f64) -> (f64, f64, f64) {
        let q_pu = self.mva_to_pu(q_mvar);
        let x_c = 1.0 / q_pu;
        let h = order as f64;
        let x_l = x_c / (h * h);
        let r = x_l * h / quality_factor;
        (r, x_l, x_c)
    }

    /// Nodal admittance matrix at integer harmonic order `h` (1 = the
    /// fundamental). Series reactance scales with `h`; capacitive shunt
    /// susceptance scales with `h`, inductive with `1/h`. At the
    /// fundamental, loads and fixed-Q SVCs are excluded (they are power
    /// constraints); at harmonic orders, loads enter per the configured
    /// [`HarmonicLoadModel`] and in-service filters enter at every order.
    pub fn admittance_matrix(&self, harmonic_order: u32) -> DMatrix<Complex64> {
        assert!(harmonic_order >= 1, "harmonic order must be at least 1");
        let h = harmonic_order as f64;
        let n = self.bus_count();
        let mut y = DMatrix::from_element(n, n, Complex64::ZERO);

        for br in &self.branches {
            let f = self.index_of[&br.from_bus];
            let t = self.index_of[&br.to_bus];
            let z = Complex64::new(br.series_resistance_pu, br.series_reactance_pu * h);
            let ys = z.inv();
            let tap = br.tap_ratio;
            y[(f, f)] += ys / (tap * tap);
            y[(f, t)] -= ys / tap;
            y[(t, f)] -= ys / tap;
            y[(t, t)] += ys;
            let b_half = scaled_shunt_susceptance(br.shunt_susceptance_pu / 2.0, h);
            y[(f, f)] += Complex64::new(0.0, b_half);
            y[(t, t)] += Complex64::new(0.0, b_half);
        }

        for sh in self.shunts.iter().filter(|s| s.in_service) {
            let i = self.index_of[&sh.bus];
            match &sh.kind {
                ShuntKind::Svc { q_mvar, mode, .. } => {
                    // Fixed-Q SVCs are injections, not impedances, and a
                    // converter-based compensator contributes no passive
                    // path at harmonic orders.
                    if *mode == SvcMode::Susceptance && harmonic_order == 1 {
                        y[(i, i)] += Complex64::new(0.0, self.mva_to_pu(*q_mvar));
                    }
                }
                ShuntKind::SingleTunedFilter { order, q_mvar, quality_factor } => {
                    let (r, x_l, x_c) = self.filter_elements_pu(*order, *q_mvar, *quality_factor);
                    let z = Complex64::new(r, x_l * h - x_c / h);
                    y[(i, i)] += z.inv();
                }
            }
        }

        if harmonic_order > 1 && self.harmonic_load_model == HarmonicLoadModel::ParallelRl {
            for load in &self.loads {
                let i = self.index_of[&load.bus];
                let g = self.mva_to_pu(load.p_mw);
                let b = scaled_shunt_susceptance(-self.mva_to_pu(load.q_mvar), h);
                y[(i, i)] += Complex64::new(g, b);
            }
        }

        y
    }

    /// Sum of fixed-Q SVC injections at each bus, in per-unit.
    pub fn svc_injection_pu(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.bus_count()];
        for sh in self.shunts.iter().filter(|s| s.in_service) {
            if let ShuntKind::Svc { q_mvar, mode: SvcMode::FixedQ, .. } = &sh.kind {
                q[self.index_of[&sh.bus]] += self.mva_to_pu(*q_mvar);
            }
        }
        q
    }
}

/// Susceptance scaling with harmonic order: capacitive (positive) grows
/// with `h`, inductive (negative) shrinks.
fn scaled_shunt_susceptance(b_fundamental: f64, h: f64) -> f64 {
    if b_fundamental >= 0.0 {
        b_fundamental * h
    } else {
        b_fundamental / h
    }
}

/// Convenience: parse and build in one step.
pub fn load_case<P: AsRef<Path>>(path: P) -> Result<Network> {
    build_network(&NetworkSpec::from_path(path)?)
}

/// Same, from in-memory JSON.
pub fn load_case_str(text: &str) -> Result<Network> {
    let spec: NetworkSpec = serde_json::from_str(text)?;
    build_network(&spec)
}

/// A deterministic map of bus id to index, for report ordering.
pub fn ordered_bus_ids(network: &Network) -> BTreeMap<String, usize> {
    network
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id.clone(), i))
        .collect()
}
