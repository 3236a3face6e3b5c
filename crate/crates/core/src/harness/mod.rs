//! Scenario configuration, presets, parameter sweeps and result files.

mod config;
mod report;
mod sweep;

pub use config::{preset, preset_with_pt, ChannelModel, MacroCell, SweepParameter, SweepSpec, SystemConfig, PRESETS};
pub use report::{write_csv, write_json, SweepOutput, CSV_HEADER};
pub use sweep::{run_sweep, ResultRow};
