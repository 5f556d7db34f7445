//! Scenario-driven experiment runs: configuration, CSV and metadata
//! output, and curve comparison.

mod compare;
mod config;
mod csv_io;
mod run;

pub use compare::{compare, compare_rows, CompareReport, PointReport, Rule, Tolerance};
pub use config::{
    parse_csi, parse_dimming, parse_snr_grid, snr_range, BoundGain, ExperimentConfig, MobilitySpec,
    Modes, Overrides, ResolvedUsers, Scenario, Sweep, UserSpec, TABLE_GAINS,
};
pub use csv_io::{
    curve_rows, format_f64, read_curve_file, read_rows, write_curve_file, write_rows, CurveRow,
    HEADER,
};
pub use run::{
    analytic_families, compute, compute_with, default_out_dir, mc_family, oracle_family, run,
    trial_config, variants, version_string, Family, Metadata, RunDiagnostics, RunOutput, RunStatus,
    Setup, UnreliablePoint, Variant, METADATA_FILE, OUT_DIR_ENV,
};

/// Scenario names with one-line descriptions.
pub fn list_scenarios() -> Vec<(Scenario, &'static str)> {
    Scenario::ALL
        .iter()
        .map(|&s| (s, s.description()))
        .collect()
}
