//! Experiment agendas: a four-level hierarchy (infrastructure, schedule,
//! malfunction, solver run) expanded from integer parameter ranges into a
//! flat, deterministic list of experiments with stable composite ids.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{InfraParams, SpeedDistribution, TrainId};
use crate::pipeline::range::{RangeError, ValueRange};
use crate::resched::{CostWeights, ScoperKind};

#[derive(Debug, Error)]
pub enum AgendaError {
    #[error(transparent)]
    Range(#[from] RangeError),
    #[error("agenda `{agenda_id}` expands to no experiments")]
    EmptyAgenda { agenda_id: String },
}

/// Everything needed to reproduce a full study: generation parameters for
/// each hierarchy level plus the global solve and scoping configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgendaConfig {
    pub agenda_id: String,
    pub width: u32,
    pub height: u32,
    pub flatland_seed_value: ValueRange,
    pub max_num_cities: ValueRange,
    pub grid_mode: bool,
    pub max_rail_between_cities: u32,
    pub max_rail_in_city: u32,
    pub number_of_agents: ValueRange,
    pub speed_data: Vec<(u32, f64)>,
    pub schedule_id: ValueRange,
    pub earliest_malfunction: i64,
    pub malfunction_duration: i64,
    pub malfunction_train_id: ValueRange,
    pub number_of_shortest_paths_per_train: usize,
    pub max_window_size_from_earliest: i64,
    pub weight_route_change: i64,
    pub weight_lateness_seconds: i64,
    pub solver_runs: ValueRange,
    pub solver_budget: u64,
    pub scopers: Vec<ScoperKind>,
    pub random_samples: usize,
    pub heuristic_route_restricted: bool,
    pub master_seed: u64,
}

impl AgendaConfig {
    /// Small agenda sized so a full run plus analysis finishes on a laptop
    /// in well under a minute while exercising every scoper.
    pub fn desk_default() -> Self {
        AgendaConfig {
            agenda_id: "desk".to_string(),
            width: 40,
            height: 40,
            flatland_seed_value: ValueRange::point(190),
            max_num_cities: ValueRange::new(4, 7, 3),
            grid_mode: false,
            max_rail_between_cities: 1,
            max_rail_in_city: 2,
            number_of_agents: ValueRange::new(8, 14, 2),
            speed_data: vec![(1, 0.25), (2, 0.25), (3, 0.25), (4, 0.25)],
            schedule_id: ValueRange::new(0, 2, 2),
            earliest_malfunction: 30,
            malfunction_duration: 15,
            malfunction_train_id: ValueRange::new(0, 12, 4),
            number_of_shortest_paths_per_train: 10,
            max_window_size_from_earliest: 60,
            weight_route_change: 30,
            weight_lateness_seconds: 1,
            solver_runs: ValueRange::new(0, 1, 1),
            solver_budget: 500_000,
            scopers: all_scopers(),
            random_samples: 5,
            heuristic_route_restricted: false,
            master_seed: 814,
        }
    }

    /// Full-size agenda matching the published study layout: 12
    /// infrastructures, 4 schedules each, one malfunction per train.
    pub fn paper_default() -> Self {
        AgendaConfig {
            agenda_id: "paper".to_string(),
            width: 100,
            height: 100,
            flatland_seed_value: ValueRange::point(190),
            max_num_cities: ValueRange::new(8, 15, 3),
            grid_mode: false,
            max_rail_between_cities: 1,
            max_rail_in_city: 2,
            number_of_agents: ValueRange::new(50, 98, 4),
            speed_data: vec![(1, 0.25), (2, 0.25), (3, 0.25), (4, 0.25)],
            schedule_id: ValueRange::new(0, 4, 4),
            earliest_malfunction: 30,
            malfunction_duration: 50,
            malfunction_train_id: ValueRange::new(0, 86, 86),
            number_of_shortest_paths_per_train: 10,
            max_window_size_from_earliest: 60,
            weight_route_change: 30,
            weight_lateness_seconds: 1,
            solver_runs: ValueRange::new(0, 1, 1),
            solver_budget: 500_000,
            scopers: all_scopers(),
            random_samples: 5,
            heuristic_route_restricted: false,
            master_seed: 814,
        }
    }

    pub fn weights(&self) -> CostWeights {
        CostWeights {
            lateness_weight: self.weight_lateness_seconds,
            deviation_penalty: self.weight_route_change,
        }
    }
}

pub fn all_scopers() -> Vec<ScoperKind> {
    vec![
        ScoperKind::OnlineUnrestricted,
        ScoperKind::UpperBound,
        ScoperKind::MaxSpeedup,
        ScoperKind::Baseline,
        ScoperKind::Heuristic,
        ScoperKind::Random,
    ]
}

/// One infrastructure to generate: its position in the agenda plus the
/// exact generator inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfraSpec {
    pub infra_idx: usize,
    pub seed: u64,
    pub params: InfraParams,
}

/// One experiment to run, addressing one leaf of the hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub composite_id: String,
    pub infra_idx: usize,
    pub schedule_idx: usize,
    pub malfunction_train: TrainId,
    pub run_idx: usize,
}

/// A fully expanded agenda. Expansion is a pure function of the config, so
/// re-expanding always reproduces the same specs in the same order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agenda {
    pub config: AgendaConfig,
    pub infras: Vec<InfraSpec>,
    pub schedule_count: usize,
    pub experiments: Vec<ExperimentSpec>,
}

pub fn composite_id(
    infra_idx: usize,
    schedule_idx: usize,
    malfunction_train: TrainId,
    run_idx: usize,
) -> String {
    format!("i{infra_idx}_s{schedule_idx}_m{}_r{run_idx}", malfunction_train.0)
}

pub fn expand_agenda(config: &AgendaConfig) -> Result<Agenda, AgendaError> {
    let seeds = config.flatland_seed_value.expand()?;
    let cities = config.max_num_cities.expand()?;
    let agents = config.number_of_agents.expand()?;
    let schedule_count = config.schedule_id.expand()?.len();
    let malfunction_ids = dedup_keep_order(config.malfunction_train_id.expand()?);
    let run_count = config.solver_runs.expand()?.len();

    let mut infras = Vec::new();
    for &seed in &seeds {
        for &num_cities in &cities {
            for &num_agents in &agents {
                infras.push(InfraSpec {
                    infra_idx: infras.len(),
                    seed: seed as u64,
                    params: InfraParams {
                        width: config.width,
                        height: config.height,
                        max_num_cities: num_cities as u32,
                        grid_mode: config.grid_mode,
                        max_rails_between_cities: config.max_rail_between_cities,
                        max_rails_in_city: config.max_rail_in_city,
                        num_agents: num_agents as u32,
                        speeds: SpeedDistribution(config.speed_data.clone()),
                    },
                });
            }
        }
    }

    let mut experiments = Vec::new();
    for infra in &infras {
        let train_count = infra.params.num_agents as i64;
        for schedule_idx in 0..schedule_count {
            for &m in malfunction_ids.iter().filter(|&&m| m >= 0 && m < train_count) {
                for run_idx in 0..run_count {
                    let train = TrainId(m as u32);
                    experiments.push(ExperimentSpec {
                        composite_id: composite_id(infra.infra_idx, schedule_idx, train, run_idx),
                        infra_idx: infra.infra_idx,
                        schedule_idx,
                        malfunction_train: train,
                        run_idx,
                    });
                }
            }
        }
    }

    if experiments.is_empty() {
        return Err(AgendaError::EmptyAgenda {
            agenda_id: config.agenda_id.clone(),
        });
    }

    Ok(Agenda {
        config: config.clone(),
        infras,
        schedule_count,
        experiments,
    })
}

fn dedup_keep_order(values: Vec<i64>) -> Vec<i64> {
    let mut seen = std::collections::BTreeSet::new();
    values.into_iter().filter(|v| seen.insert(*v)).collect()
}
