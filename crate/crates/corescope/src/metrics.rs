//! Evaluation quantities: speed-up factors, core-problem extraction,
//! prediction quality, additional lateness, and difficulty binning.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::grid::{TrainId, Waypoint};
use crate::schedule::Schedule;
use crate::solver::Solution;

/// Wall-clock resolution floor; timings below this are clamped before
/// ratios are formed.
pub const MIN_MEASURED_SECONDS: f64 = 0.001;

pub const DIFFICULTY_BIN_COUNT: usize = 10;

/// Default difficulty range in seconds for full-size experiments.
pub const DEFAULT_DIFFICULTY_RANGE: (f64, f64) = (20.0, 200.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionQuality {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub f1: f64,
    /// True when prediction and core are both empty, which leaves the score
    /// undefined; reported as 1.0 by convention.
    pub vacuous: bool,
}

/// The difference between the schedule and a re-scheduling solution: which
/// trains changed, and which (train, waypoint, entry) nodes appear in
/// exactly one of the two.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreProblem {
    pub changed_trains: Vec<TrainId>,
    pub changed_nodes: Vec<(TrainId, Waypoint, i64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditionalLateness {
    pub value: i64,
    /// False when either solve stopped on budget before proving optimality,
    /// in which case the value may be negative or misleading.
    pub proven: bool,
}

/// Ratio of full solve time to restricted solve time, both clamped to the
/// measurement resolution.
pub fn speedup(t_full_seconds: f64, t_restricted_seconds: f64) -> f64 {
    t_full_seconds.max(MIN_MEASURED_SECONDS) / t_restricted_seconds.max(MIN_MEASURED_SECONDS)
}

pub fn core_problem(schedule: &Schedule, solution: &Solution) -> CoreProblem {
    let mut changed_trains = Vec::new();
    let mut changed_nodes = Vec::new();
    for run in &solution.runs {
        let Some(sched) = schedule.run(run.train) else {
            changed_trains.push(run.train);
            continue;
        };
        let sched_pairs: BTreeSet<(Waypoint, i64)> = sched
            .waypoints
            .iter()
            .copied()
            .zip(sched.entries.iter().copied())
            .collect();
        let new_pairs: BTreeSet<(Waypoint, i64)> = run
            .waypoints
            .iter()
            .copied()
            .zip(run.entries.iter().copied())
            .collect();
        let diff: Vec<(TrainId, Waypoint, i64)> = sched_pairs
            .symmetric_difference(&new_pairs)
            .map(|&(wp, t)| (run.train, wp, t))
            .collect();
        if !diff.is_empty() {
            changed_trains.push(run.train);
            changed_nodes.extend(diff);
        }
    }
    changed_trains.sort();
    changed_nodes.sort();
    CoreProblem {
        changed_trains,
        changed_nodes,
    }
}

pub fn prediction_quality(predicted: &[TrainId], core: &[TrainId]) -> PredictionQuality {
    let predicted: BTreeSet<TrainId> = predicted.iter().copied().collect();
    let core: BTreeSet<TrainId> = core.iter().copied().collect();
    let true_positives = predicted.intersection(&core).count();
    let false_positives = predicted.difference(&core).count();
    let false_negatives = core.difference(&predicted).count();
    let vacuous = true_positives == 0 && false_positives == 0 && false_negatives == 0;
    let f1 = if vacuous {
        1.0
    } else {
        2.0 * true_positives as f64
            / (2.0 * true_positives as f64 + false_positives as f64 + false_negatives as f64)
    };
    PredictionQuality {
        true_positives,
        false_positives,
        false_negatives,
        f1,
        vacuous,
    }
}

pub fn additional_lateness(
    scoper_cost: i64,
    optimal_cost: i64,
    scoper_proved: bool,
    optimal_proved: bool,
) -> AdditionalLateness {
    AdditionalLateness {
        value: scoper_cost - optimal_cost,
        proven: scoper_proved && optimal_proved,
    }
}

/// Index of the equidistant difficulty bin holding `t_seconds`; times
/// outside the range land in the first or last bin.
pub fn difficulty_bin(t_seconds: f64, range: (f64, f64)) -> usize {
    bin_index(t_seconds, range, DIFFICULTY_BIN_COUNT)
}

/// Generalization of [`difficulty_bin`] to any equidistant bin count.
pub fn bin_index(t_seconds: f64, range: (f64, f64), bins: usize) -> usize {
    let (lo, hi) = range;
    if hi <= lo || bins <= 1 {
        return 0;
    }
    let frac = (t_seconds - lo) / (hi - lo);
    let raw = (frac * bins as f64).floor();
    (raw.max(0.0) as usize).min(bins - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cell, Heading};
    use crate::schedule::TrainRun;
    use crate::solver::SolveStats;
    use proptest::prelude::*;

    fn ids(raw: &[u32]) -> Vec<TrainId> {
        raw.iter().map(|&i| TrainId(i)).collect()
    }

    #[test]
    fn test_f1_overprediction_fixture() {
        let q = prediction_quality(&ids(&[0, 1, 2, 3]), &ids(&[0, 1]));
        assert_eq!(q.true_positives, 2);
        assert_eq!(q.false_positives, 2);
        assert_eq!(q.false_negatives, 0);
        assert!((q.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!(!q.vacuous);
    }

    #[test]
    fn test_f1_exact_prediction_is_one() {
        let q = prediction_quality(&ids(&[3, 5]), &ids(&[5, 3]));
        assert_eq!(q.f1, 1.0);
        assert!(!q.vacuous);
    }

    #[test]
    fn test_f1_disjoint_prediction_is_zero() {
        let q = prediction_quality(&ids(&[0]), &ids(&[1]));
        assert_eq!(q.f1, 0.0);
    }

    #[test]
    fn test_f1_empty_sets_vacuously_perfect() {
        let q = prediction_quality(&[], &[]);
        assert_eq!(q.f1, 1.0);
        assert!(q.vacuous);
    }

    proptest! {
        #[test]
        fn test_f1_bounded_and_rewards_correct_additions(
            predicted in proptest::collection::btree_set(0u32..20, 0..10),
            core in proptest::collection::btree_set(0u32..20, 0..10),
        ) {
            let predicted: Vec<TrainId> = predicted.into_iter().map(TrainId).collect();
            let core: Vec<TrainId> = core.into_iter().map(TrainId).collect();
            let q = prediction_quality(&predicted, &core);
            prop_assert!((0.0..=1.0).contains(&q.f1));
            if let Some(missing) = core.iter().find(|id| !predicted.contains(id)) {
                let mut grown = predicted.clone();
                grown.push(*missing);
                let better = prediction_quality(&grown, &core);
                prop_assert!(better.f1 >= q.f1);
            }
        }
    }

    #[test]
    fn test_speedup_examples() {
        assert_eq!(speedup(100.0, 50.0), 2.0);
        assert_eq!(speedup(7.5, 7.5), 1.0);
        assert_eq!(speedup(200.0, 20.0), 10.0);
    }

    #[test]
    fn test_speedup_clamps_zero_durations() {
        assert_eq!(speedup(1.0, 0.0), 1000.0);
        assert_eq!(speedup(0.0, 0.0), 1.0);
    }

    #[test]
    fn test_speedup_is_transitive_as_ratio() {
        let (a, b, c) = (8.0, 2.0, 0.5);
        assert!((speedup(a, b) * speedup(b, c) - speedup(a, c)).abs() < 1e-12);
    }

    fn run_of(id: u32, start: i64) -> TrainRun {
        TrainRun {
            train: TrainId(id),
            waypoints: (0..3)
                .map(|i| Waypoint::new(Cell { row: 0, col: i }, Heading::East))
                .collect(),
            entries: (0..3).map(|i| start + i as i64).collect(),
        }
    }

    fn solution_of(runs: Vec<TrainRun>) -> Solution {
        Solution {
            runs,
            cost: 0,
            stats: SolveStats {
                nodes_expanded: 0,
                incumbent_trace: vec![(0, 0)],
                proved_optimal: true,
                wall_seconds: 0.0,
            },
        }
    }

    fn schedule_of(runs: Vec<TrainRun>) -> Schedule {
        Schedule {
            version: 1,
            infra_id: 0,
            schedule_id: 0,
            seed: 0,
            horizon: 50,
            runs,
        }
    }

    #[test]
    fn test_core_problem_empty_when_solution_matches_schedule() {
        let schedule = schedule_of(vec![run_of(0, 0), run_of(1, 5)]);
        let solution = solution_of(vec![run_of(0, 0), run_of(1, 5)]);
        let core = core_problem(&schedule, &solution);
        assert!(core.changed_trains.is_empty());
        assert!(core.changed_nodes.is_empty());
    }

    #[test]
    fn test_core_problem_collects_shifted_train_nodes() {
        let schedule = schedule_of(vec![run_of(0, 0), run_of(1, 5)]);
        let solution = solution_of(vec![run_of(0, 0), run_of(1, 7)]);
        let core = core_problem(&schedule, &solution);
        assert_eq!(core.changed_trains, ids(&[1]));
        assert_eq!(core.changed_nodes.len(), 6);
        assert!(core.changed_nodes.iter().all(|&(t, _, _)| t == TrainId(1)));
    }

    #[test]
    fn test_additional_lateness_flags_unproven_solves() {
        let a = additional_lateness(42, 30, true, true);
        assert_eq!(a.value, 12);
        assert!(a.proven);
        let b = additional_lateness(25, 30, true, false);
        assert_eq!(b.value, -5);
        assert!(!b.proven);
    }

    #[test]
    fn test_difficulty_bins_are_equidistant_and_clamped() {
        let range = DEFAULT_DIFFICULTY_RANGE;
        assert_eq!(difficulty_bin(20.0, range), 0);
        assert_eq!(difficulty_bin(37.9, range), 0);
        assert_eq!(difficulty_bin(38.0, range), 1);
        assert_eq!(difficulty_bin(110.0, range), 5);
        assert_eq!(difficulty_bin(199.9, range), 9);
        assert_eq!(difficulty_bin(200.0, range), 9);
        assert_eq!(difficulty_bin(5.0, range), 0);
        assert_eq!(difficulty_bin(1e6, range), 9);
    }
}
