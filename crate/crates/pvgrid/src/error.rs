//! Crate-wide error type.
//!
//! Build errors (bad case files) and solve errors (numerical failure) are
//! deliberately separate variants: a caller retrying with relaxed solver
//! options wants to distinguish "this network can never solve" from "this
//! operating point diverged".

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("{kind} `{id}` references unknown bus `{bus}`")]
    DanglingBusReference {
        kind: &'static str,
        id: String,
        bus: String,
    },

    #[error("branch `{id}` has zero series impedance")]
    ZeroImpedanceBranch { id: String },

    #[error("network has no slack bus")]
    NoSlackBus,

    #[error("network has more than one slack bus (`{first}` and `{second}`)")]
    MultipleSlackBuses { first: String, second: String },

    #[error("network is not a connected graph: bus `{bus}` is unreachable from the slack")]
    DisconnectedBus { bus: String },

    #[error("bus `{id}` has invalid {field}: {value}")]
    InvalidBusValue {
        id: String,
        field: &'static str,
        value: f64,
    },

    #[error("{kind} `{id}` has invalid {field}: {value}")]
    InvalidValue {
        kind: &'static str,
        id: String,
        field: &'static str,
        value: f64,
    },

    #[error("unknown bus `{0}`")]
    UnknownBus(String),

    #[error("load flow diverged: mismatch {mismatch:.3e} pu after {iterations} iterations")]
    Diverged { iterations: usize, mismatch: f64 },

    #[error("singular Jacobian at iteration {iteration}; the operating point is at or beyond the solvable boundary")]
    SingularJacobian { iteration: usize },

    #[error("requested SVC injection {requested_mvar:.1} Mvar exceeds the {limit_mvar:.1} Mvar device limit at bus `{bus}`")]
    SvcLimitExceeded {
        bus: String,
        requested_mvar: f64,
        limit_mvar: f64,
    },

    #[error("bus `{bus}` has no SVC to retune")]
    NoSvcAtBus { bus: String },

    #[error("compensation infeasible at bus `{bus}`: {detail}")]
    CompensationInfeasible { bus: String, detail: String },

    #[error("study stage `{stage}` failed: {source}")]
    StageFailed {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("harmonic order {0} is not valid here; orders start at 2")]
    InvalidHarmonicOrder(u32),

    #[error("harmonic network is singular at order {order}: the case is resonant there")]
    SingularHarmonicNetwork { order: u32 },

    #[error("invalid {what}: {detail}")]
    InvalidInput { what: &'static str, detail: String },

    #[error("case file error: {0}")]
    CaseFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
