//! Study pipeline: agenda expansion, durable experiment storage, experiment
//! execution, and analysis of stored results into tables and charts.

pub mod agenda;
pub mod analyze;
pub mod plot;
pub mod range;
pub mod run;
pub mod store;

pub use agenda::{
    all_scopers, composite_id, expand_agenda, Agenda, AgendaConfig, AgendaError, ExperimentSpec,
    InfraSpec,
};
pub use analyze::{
    analyze, write_analysis, AnalysisOptions, AnalysisReport, AnalyzeError, BinStats, MetricsRow,
    ScoperStats,
};
pub use plot::{grouped_bar_chart, BarGroup};
pub use range::{RangeError, ValueRange};
pub use run::{
    run_agenda, run_experiment, run_single, strip_volatile, Environment, ExperimentResult,
    MalfunctionRecord, Progress, RunError, RunSummary, ScoperEntry, ScoperMetrics, ScoperOutcome,
    SolveOutcome,
};
pub use store::{Store, StoreError, FORMAT_VERSION};

#[cfg(test)]
pub(crate) mod testkit {
    use super::agenda::AgendaConfig;
    use super::range::ValueRange;

    /// Smallest agenda that still runs end to end: one 4-train
    /// infrastructure, one schedule, two malfunctions.
    pub fn tiny_config() -> AgendaConfig {
        AgendaConfig {
            agenda_id: "tiny".to_string(),
            flatland_seed_value: ValueRange::point(2),
            max_num_cities: ValueRange::point(3),
            number_of_agents: ValueRange::point(4),
            schedule_id: ValueRange::point(0),
            earliest_malfunction: 3,
            malfunction_duration: 12,
            malfunction_train_id: ValueRange::new(0, 2, 2),
            ..AgendaConfig::desk_default()
        }
    }
}
