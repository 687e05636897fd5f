//! Deterministic simulator and benchmark harness for silent-watch energy
//! management under SOC spoofing.
//!
//! The crate wires a reduced-order battery/DC-bus plant, a two-path
//! soft-shed supervisor, a window-gated SOC spoofing adversary and a
//! residual detector with fallback shedding into one fixed-step engine, then
//! scores each run with five mission metrics. [`analysis`] builds the bias,
//! depth and joint sweeps on top; [`regress`] keeps golden baselines.

pub mod adversary;
pub mod analysis;
pub mod config;
pub mod detector;
pub mod engine;
pub mod error;
pub mod io;
pub mod metrics;
pub mod plant;
pub mod regress;
pub mod supervisor;

pub use config::{
    default_params, reference_scenarios, AttackSpec, BenchmarkParams, CaseKind, ScenarioCase,
    Variant,
};
pub use engine::{run, run_pair_parity, simulate, Trace};
pub use error::{Error, Result};
pub use metrics::{compute_all, MissionMetrics};
