//! Batch front end: pattern ingestion, the bundled target suite, experiment
//! runs and their artifacts, gradient audits and timing benchmarks.

pub mod benchmark;
pub mod experiment;
pub mod gradcheck;
pub mod pattern;
pub mod pgm;
pub mod suite;

pub use benchmark::{benchmark, forward_timing, method_grid, BenchmarkResult, ForwardTiming, MethodRow};
pub use experiment::{
    run_experiment, simulate, ExperimentOutcome, ExperimentSpec, PatternSource, SimulationOutcome, SummaryRow,
};
pub use gradcheck::{gradcheck, GradcheckReport, GradcheckSpec};
pub use pattern::{ingest_pattern, PatternFile, Rect};
pub use suite::{suite, suite_target, synthetic_instance, SyntheticInstance, SUITE_NAMES};
