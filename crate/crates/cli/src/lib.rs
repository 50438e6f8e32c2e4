//! Experiment harness: configuration, risk sweeps, synthetic neural-mapping
//! training runs, and report emission (CSV/JSON/SVG).

pub mod config;
pub mod lemmas;
pub mod report;
pub mod sweep;
pub mod synthetic;
