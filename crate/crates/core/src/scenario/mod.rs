//! Configuration files, scenario orchestration and CSV output.
//!
//! A scenario is a TOML file describing the room, the sources and any of
//! the optional `[grid]`, `[detection]`, `[truncation]` and `[validation]`
//! sections. Each command-line subcommand maps to one function here that
//! turns the parsed configuration into one or more [`Table`]s.

mod config;
mod run;
mod table;
mod truncation;
mod validate;

pub use config::{
    AdiCheck, AvgOver, AxisName, DetectionSpec, FdmCheck, GridSpec, LineSpec, NamedSampler, OutputSpec, Overrides,
    ScenarioConfig, SourceEvent, SurrogateChoice, SweepSpec, TruncationSpec, ValidationSpec,
};
pub use run::{
    breath_table, header, pmd_table, point_table, run_scenario, sample_cases, sample_table, spectrum_table, PointField,
    SampleCase,
};
pub use table::{Cell, Table};
pub use truncation::{truncation_study, truncation_tables, TruncationStudy};
pub use validate::{adi_check, fdm_check_1d, residuals, validate_tables, OracleRow, ResidualRow, ValidationReport};
