//! Command-line plumbing: config files, sweeps, figure presets, output tables
//! and the self-check suite.

pub mod config;
pub mod emit;
pub mod presets;
pub mod sweep;
pub mod validate;

pub use config::{load_scenario, load_sweep, parse_scenario, parse_sweep};
pub use emit::{emit, to_csv, to_json, Format};
pub use presets::{preset, PRESET_NAMES};
pub use sweep::{psi_scenario, run_sweep, solve_row, Algorithm, ElementSplit, ResultRow, SweepAxis, SweepSpec};
pub use validate::{run_validation, CheckOutcome};
