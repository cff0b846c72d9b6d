//! Declarative scenario files, their execution and the emitted artifacts.
//!
//! A scenario is a TOML document with the sections `model`, `initial`,
//! `integrator`, `relays` (optional), `outputs`, and any number of
//! `[[attack]]` and `[[fault]]` tables. See the files under `scenarios/`
//! for complete examples.

mod config;
mod run;
mod sweep;

pub use config::{parse_scenario, serialize_scenario, InitialCondition, Issue, Outputs, Scenario, ScenarioError};
pub use run::{
    analytic_overlay, execute, header_comment, initial_state, omega_theta_portrait_csv, phase_portrait_csv, run,
    run_analytic, trip_log_csv, write_atomic, MachineOverlay, RunError, RunOutcome, RunReport, RunSummary,
    TOOL_VERSION,
};
pub use sweep::{sweep, sweep_csv, with_parameter, SweepPoint};

use std::path::Path;

/// Reads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Parse {
        line: None,
        message: format!("{}: {e}", path.display()),
    })?;
    parse_scenario(&text)
}
