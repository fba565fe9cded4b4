//! Benchmark harness: seeded workload generation, experiment drivers and
//! CSV emission for the engine's plan-mode trade-offs at desk scale.

pub mod experiments;
pub mod rows;
pub mod workload;

use thiserror::Error;

pub use experiments::{
    capacity_probe, compare_plan_modes, run_experiment, scaling_suite, selectivity_ground_truth,
    selectivity_record_count, sweep_selectivity, sweep_subgroup_size, ProbeSummary, EXPERIMENTS,
};
pub use rows::{median_wall_ms, min_wall_ms, write_csv, write_csv_file, ExperimentRow, CSV_HEADER};
pub use workload::{standard_channel_ddl, standard_generator, WorkloadSpec, US_STATE_POPULATION};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error(transparent)]
    Dsl(#[from] bad_core::dsl::DslError),
    #[error(transparent)]
    Subs(#[from] bad_core::subs::SubsError),
    #[error(transparent)]
    Ingest(#[from] bad_core::ingest::IngestError),
    #[error(transparent)]
    Engine(#[from] bad_core::engine::EngineError),
}
