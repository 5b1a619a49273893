//! Scenario files, the per-slot simulation loop and result files.

pub mod config;
pub mod harness;
pub mod output;

pub use config::{
    dbm_to_watts, load_config, save_config, Beamforming, FilterKind, Role, Scenario, ScenarioConfig, VehicleConfig,
    VehicleSpec, SCHEMA_VERSION,
};
pub use harness::{run_simulation, DesignRecord, LinkMetrics, RunResult, SlotRecord, SlotStatus, VehicleRecord};
pub use output::{
    read_designs, render_csv, summarize, write_outputs, RunArtifacts, CSV_COLUMNS, CSV_FILE, DESIGN_FILE,
    SUMMARY_FILE,
};
