//! Grid-integration study toolkit for utility-scale photovoltaic plants.
//!
//! `pvgrid` models the point of common coupling between a large PV plant and
//! a transmission grid, and automates the study sequence a connection
//! engineer walks through by hand: solve the fundamental-frequency load flow,
//! size reactive compensation if the power factor is poor, sweep harmonic
//! penetration against IEEE 519 voltage-distortion limits, insert tuned
//! filter banks where needed, and measure how far the operating point sits
//! from voltage collapse. A small tabular Q-learning trainer produces an SVC
//! dispatch policy for the same bus the static study compensates.
//!
//! # Where to start
//!
//! The `examples/` directory is the primary interface of this crate; each
//! example is a runnable walkthrough of one capability:
//!
//! * `two_bus_load_flow` — Newton-Raphson solve of a case with a closed-form
//!   solution, printed next to the analytic values.
//! * `plant_sizing` — array/inverter/transformer sizing chain for a 1 GW
//!   plant from panel ratings up to the grid transformer.
//! * `compensation_sizing` — reactive power needed to lift a bus to a target
//!   power factor, and what overcompensation looks like.
//! * `harmonic_filters` — harmonic penetration scan, single-tuned filter
//!   design, and the scan repeated with filters in service.
//! * `voltage_stability` — nose-curve tracing and the reserve-margin numbers
//!   the study reports.
//! * `svc_training` — train the Q-learning SVC agent and replay a voltage-dip
//!   episode with the greedy policy.
//! * `full_study` — the end-to-end pipeline on the bundled reference case.
//! * `spectrum_calibration` — how the fitted harmonic-source spectrum in the
//!   bundled case file was produced.
//!
//! Run one with `cargo run -p pvgrid --example <name>`.
//!
//! The same capabilities are exposed as subcommands of the thin `pvgrid`
//! binary (`pvgrid study case.json`, `pvgrid loadflow`, `pvgrid sizing`, ...)
//! for scripted use; the binary only parses arguments and calls into this
//! library.
//!
//! # Crate layout
//!
//! * [`network`] — bus/branch/load/generator/shunt model, the JSON case-file
//!   schema, per-unit conversion, and admittance-matrix assembly (fundamental
//!   and harmonic orders).
//! * [`sizing`] — PV plant sizing arithmetic.
//! * [`power_flow`] — Newton-Raphson AC load flow in polar form with PV/PQ
//!   switching on generator reactive limits.
//! * [`compensation`] — shunt compensation sizing and SVC placement.
//! * [`harmonics`] — harmonic penetration scans, total harmonic distortion,
//!   single-tuned filter design, IEEE 519 voltage-distortion checks.
//! * [`stability`] — voltage reserve margins and loading-margin search.
//! * [`rl`] — the SVC voltage-control environment and Q-learning trainer.
//! * [`study`] — the staged study pipeline and its report artifacts.
//!
//! All electrical quantities are kept in per-unit on the case's MVA base
//! internally; file formats and printed reports use MW, Mvar, amps and kV.

pub mod compensation;
pub mod error;
pub mod harmonics;
pub mod network;
pub mod power_flow;
pub mod report;
pub mod rl;
pub mod sizing;
pub mod stability;
pub mod study;

pub use error::Error;
