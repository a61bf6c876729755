//! Batch experiments: configuration, sweeps, plots and property suites.

pub mod checks;
pub mod config;
pub mod plot;
pub mod shapes;
pub mod sweep;

pub use checks::{run_suite, CheckResult, Suite, SuiteOptions};
pub use config::{FaceSubsetSelector, SweepConfig, TetSpec};
pub use plot::emit_plots;
pub use shapes::shape_family;
pub use sweep::{read_csv_file, run_sweep, write_csv_file, SweepOutcome, SweepRecord};
