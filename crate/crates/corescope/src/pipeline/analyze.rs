//! Result analysis: flattens stored experiment results into one row per
//! solver invocation, aggregates speed-up, lateness and prediction quality
//! per scoper and per difficulty bin, and renders the tables and charts.
//! Analysis only reads the store; its outputs land in the run's analysis
//! directory.

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::metrics::bin_index;
use crate::pipeline::agenda::all_scopers;
use crate::pipeline::plot::{grouped_bar_chart, BarGroup};
use crate::pipeline::run::{ExperimentResult, ScoperEntry, SolveOutcome};
use crate::pipeline::store::{Store, StoreError};
use crate::resched::ScoperKind;

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("no results stored for agenda `{agenda_id}`")]
    NoResults { agenda_id: String },
    #[error("failed to write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    pub bins: usize,
    /// Only analyze experiments whose unrestricted solve took this many
    /// seconds (inclusive bounds); `None` keeps everything.
    pub time_range: Option<(f64, f64)>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            bins: crate::metrics::DIFFICULTY_BIN_COUNT,
            time_range: None,
        }
    }
}

/// One row per solver invocation, the flat export behind every figure.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub composite_id: String,
    pub infra_idx: usize,
    pub schedule_idx: usize,
    pub malfunction_train: u32,
    pub scoper: ScoperKind,
    pub sample_seed: Option<u64>,
    pub status: String,
    pub cost: Option<i64>,
    pub nodes_expanded: Option<u64>,
    pub proved_optimal: Option<bool>,
    pub wall_seconds: Option<f64>,
    pub unrestricted_seconds: Option<f64>,
    pub in_time_range: bool,
    pub difficulty_bin: Option<usize>,
    pub speedup: Option<f64>,
    pub additional_lateness: Option<i64>,
    pub lateness_proven: Option<bool>,
    pub lateness_penalized: bool,
    pub predicted_count: usize,
    pub core_count: Option<usize>,
    pub true_positives: Option<usize>,
    pub false_positives: Option<usize>,
    pub false_negatives: Option<usize>,
    pub f1: Option<f64>,
    pub f1_vacuous: Option<bool>,
    pub contains_reference: Option<bool>,
}

/// Aggregates for one scoper over the analyzed instances. Random samples
/// are collapsed to their per-instance mean before aggregation, matching
/// the usual "random average" treatment.
#[derive(Debug, Clone, Serialize)]
pub struct ScoperStats {
    pub scoper: ScoperKind,
    pub instances: usize,
    pub samples: usize,
    pub solved_samples: usize,
    pub infeasible_samples: usize,
    pub budget_exhausted_samples: usize,
    pub skipped_samples: usize,
    pub error_samples: usize,
    pub mean_speedup: Option<f64>,
    pub median_speedup: Option<f64>,
    pub median_nodes_expanded: Option<f64>,
    pub mean_additional_lateness: Option<f64>,
    pub median_additional_lateness: Option<f64>,
    pub penalized_instances: usize,
    pub mean_f1: Option<f64>,
    pub mean_false_positives: Option<f64>,
    pub mean_false_negatives: Option<f64>,
    /// Fraction of instances on which this scoper missed at least one
    /// actually-changed train.
    pub false_negative_instance_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BinScoperStats {
    pub scoper: ScoperKind,
    pub instances: usize,
    pub mean_speedup: Option<f64>,
    pub median_speedup: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BinStats {
    pub bin: usize,
    pub lo_seconds: f64,
    pub hi_seconds: f64,
    pub experiments: usize,
    pub scopers: Vec<BinScoperStats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub agenda_id: String,
    pub loaded: usize,
    pub inapplicable: usize,
    pub errored: usize,
    pub unsolved_reference: usize,
    pub analyzed: usize,
    pub bins: usize,
    pub time_range: (f64, f64),
    pub bin_stats: Vec<BinStats>,
    pub scoper_stats: Vec<ScoperStats>,
    pub rows: Vec<MetricsRow>,
    /// Instances where some scoper measured a higher speed-up than the
    /// upper bound scoper; expected to stay empty.
    pub dominance_violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    pub fn scoper(&self, kind: ScoperKind) -> Option<&ScoperStats> {
        self.scoper_stats.iter().find(|s| s.scoper == kind)
    }

    pub fn hardest_populated_bin(&self) -> Option<&BinStats> {
        self.bin_stats.iter().rev().find(|b| b.experiments > 0)
    }
}

struct InstanceView<'a> {
    result: &'a ExperimentResult,
    unrestricted_seconds: f64,
    bin: usize,
}

#[derive(Default, Clone)]
struct Collapsed {
    speedup: Option<f64>,
    nodes: Option<f64>,
    lateness: Option<f64>,
    penalized: bool,
    f1: Option<f64>,
    false_positives: Option<f64>,
    false_negatives: Option<f64>,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metric values are finite"));
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

fn collapse(entry: &ScoperEntry) -> Collapsed {
    let mut speedups = Vec::new();
    let mut nodes = Vec::new();
    let mut lateness = Vec::new();
    let mut f1 = Vec::new();
    let mut fps = Vec::new();
    let mut fns = Vec::new();
    let mut penalized = false;
    for sample in &entry.samples {
        if let Some(s) = sample.metrics.speedup {
            speedups.push(s);
        }
        if let SolveOutcome::Solved { nodes_expanded, .. } = &sample.outcome {
            nodes.push(*nodes_expanded as f64);
        }
        if let Some(l) = sample.metrics.additional_lateness {
            if l.proven || sample.metrics.lateness_penalized {
                lateness.push(l.value as f64);
            }
        }
        penalized |= sample.metrics.lateness_penalized;
        if let Some(p) = sample.metrics.prediction {
            f1.push(p.f1);
            fps.push(p.false_positives as f64);
            fns.push(p.false_negatives as f64);
        }
    }
    Collapsed {
        speedup: mean(&speedups),
        nodes: mean(&nodes),
        lateness: mean(&lateness),
        penalized,
        f1: mean(&f1),
        false_positives: mean(&fps),
        false_negatives: mean(&fns),
    }
}

fn unrestricted_solve_seconds(result: &ExperimentResult) -> Option<f64> {
    let entry = result.entry(ScoperKind::OnlineUnrestricted)?;
    let sample = entry.samples.first()?;
    match &sample.outcome {
        SolveOutcome::Solved { wall_seconds, .. } => Some(*wall_seconds),
        _ => None,
    }
}

pub fn analyze(
    store: &Store,
    agenda_id: &str,
    options: &AnalysisOptions,
) -> Result<AnalysisReport, AnalyzeError> {
    let paths = store.list_result_paths(agenda_id)?;
    if paths.is_empty() {
        return Err(AnalyzeError::NoResults {
            agenda_id: agenda_id.to_string(),
        });
    }
    let mut results = Vec::with_capacity(paths.len());
    for path in &paths {
        results.push(store.read_json::<ExperimentResult>(path)?);
    }

    let mut warnings = Vec::new();
    let loaded = results.len();
    let inapplicable = results.iter().filter(|r| r.malfunction.is_none()).count();
    let errored = results.iter().filter(|r| r.error.is_some()).count();
    let with_reference: Vec<(&ExperimentResult, f64)> = results
        .iter()
        .filter(|r| r.malfunction.is_some() && r.error.is_none())
        .filter_map(|r| unrestricted_solve_seconds(r).map(|t| (r, t)))
        .collect();
    let unsolved_reference = loaded - inapplicable - errored - with_reference.len();

    let analyzed_pairs: Vec<(&ExperimentResult, f64)> = match options.time_range {
        Some((lo, hi)) => with_reference
            .iter()
            .copied()
            .filter(|&(_, t)| t >= lo && t <= hi)
            .collect(),
        None => with_reference.clone(),
    };
    if analyzed_pairs.is_empty() {
        warnings.push(format!(
            "no experiments remain after the time filter (EmptyAfterFilter); \
             {} had a solved unrestricted reference",
            with_reference.len()
        ));
    }

    let time_range = match options.time_range {
        Some(range) => range,
        None => {
            let lo = analyzed_pairs.iter().map(|&(_, t)| t).fold(f64::INFINITY, f64::min);
            let hi = analyzed_pairs
                .iter()
                .map(|&(_, t)| t)
                .fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() && hi.is_finite() {
                (lo, hi)
            } else {
                (0.0, 0.0)
            }
        }
    };
    let bins = if time_range.1 <= time_range.0 {
        1
    } else {
        options.bins.max(1)
    };

    let instances: Vec<InstanceView<'_>> = analyzed_pairs
        .iter()
        .map(|&(result, t)| InstanceView {
            result,
            unrestricted_seconds: t,
            bin: bin_index(t, time_range, bins),
        })
        .collect();

    let scoper_order: Vec<ScoperKind> = all_scopers();
    let mut rows = Vec::new();
    for view in &instances {
        for entry in &view.result.scopers {
            for sample in &entry.samples {
                let (status, cost, nodes, proved, wall) = match &sample.outcome {
                    SolveOutcome::Solved {
                        cost,
                        nodes_expanded,
                        proved_optimal,
                        wall_seconds,
                        ..
                    } => (
                        "solved",
                        Some(*cost),
                        Some(*nodes_expanded),
                        Some(*proved_optimal),
                        Some(*wall_seconds),
                    ),
                    SolveOutcome::Infeasible {
                        penalty_cost,
                        wall_seconds,
                    } => (
                        "infeasible",
                        Some(*penalty_cost),
                        None,
                        None,
                        Some(*wall_seconds),
                    ),
                    SolveOutcome::BudgetExhausted { wall_seconds, .. } => {
                        ("budget-exhausted", None, None, None, Some(*wall_seconds))
                    }
                    SolveOutcome::Skipped { .. } => ("skipped", None, None, None, None),
                    SolveOutcome::Error { .. } => ("error", None, None, None, None),
                };
                rows.push(MetricsRow {
                    composite_id: view.result.composite_id.clone(),
                    infra_idx: view.result.infra_idx,
                    schedule_idx: view.result.schedule_idx,
                    malfunction_train: view.result.malfunction_train.0,
                    scoper: entry.scoper,
                    sample_seed: sample.sample_seed,
                    status: status.to_string(),
                    cost,
                    nodes_expanded: nodes,
                    proved_optimal: proved,
                    wall_seconds: wall,
                    unrestricted_seconds: Some(view.unrestricted_seconds),
                    in_time_range: true,
                    difficulty_bin: Some(view.bin),
                    speedup: sample.metrics.speedup,
                    additional_lateness: sample.metrics.additional_lateness.map(|l| l.value),
                    lateness_proven: sample.metrics.additional_lateness.map(|l| l.proven),
                    lateness_penalized: sample.metrics.lateness_penalized,
                    predicted_count: sample.directive.predicted_changed.len(),
                    core_count: view
                        .result
                        .core_problem
                        .as_ref()
                        .map(|c| c.changed_trains.len()),
                    true_positives: sample.metrics.prediction.map(|p| p.true_positives),
                    false_positives: sample.metrics.prediction.map(|p| p.false_positives),
                    false_negatives: sample.metrics.prediction.map(|p| p.false_negatives),
                    f1: sample.metrics.prediction.map(|p| p.f1),
                    f1_vacuous: sample.metrics.prediction.map(|p| p.vacuous),
                    contains_reference: sample.metrics.contains_reference,
                });
            }
        }
    }

    let mut scoper_stats = Vec::new();
    for &kind in &scoper_order {
        let collapsed: Vec<Collapsed> = instances
            .iter()
            .filter_map(|v| v.result.entry(kind))
            .map(collapse)
            .collect();
        if collapsed.is_empty() && !instances.is_empty() {
            continue;
        }
        let entries: Vec<&ScoperEntry> = instances
            .iter()
            .filter_map(|v| v.result.entry(kind))
            .collect();
        let count_status = |pred: fn(&SolveOutcome) -> bool| {
            entries
                .iter()
                .flat_map(|e| &e.samples)
                .filter(|s| pred(&s.outcome))
                .count()
        };
        let speedups: Vec<f64> = collapsed.iter().filter_map(|c| c.speedup).collect();
        let nodes: Vec<f64> = collapsed.iter().filter_map(|c| c.nodes).collect();
        let lateness: Vec<f64> = collapsed.iter().filter_map(|c| c.lateness).collect();
        let f1: Vec<f64> = collapsed.iter().filter_map(|c| c.f1).collect();
        let fps: Vec<f64> = collapsed.iter().filter_map(|c| c.false_positives).collect();
        let fns: Vec<f64> = collapsed.iter().filter_map(|c| c.false_negatives).collect();
        let with_prediction = collapsed.iter().filter(|c| c.f1.is_some()).count();
        scoper_stats.push(ScoperStats {
            scoper: kind,
            instances: collapsed.len(),
            samples: entries.iter().map(|e| e.samples.len()).sum(),
            solved_samples: count_status(|o| matches!(o, SolveOutcome::Solved { .. })),
            infeasible_samples: count_status(|o| matches!(o, SolveOutcome::Infeasible { .. })),
            budget_exhausted_samples: count_status(|o| {
                matches!(o, SolveOutcome::BudgetExhausted { .. })
            }),
            skipped_samples: count_status(|o| matches!(o, SolveOutcome::Skipped { .. })),
            error_samples: count_status(|o| matches!(o, SolveOutcome::Error { .. })),
            mean_speedup: mean(&speedups),
            median_speedup: median(&speedups),
            median_nodes_expanded: median(&nodes),
            mean_additional_lateness: mean(&lateness),
            median_additional_lateness: median(&lateness),
            penalized_instances: collapsed.iter().filter(|c| c.penalized).count(),
            mean_f1: mean(&f1),
            mean_false_positives: mean(&fps),
            mean_false_negatives: mean(&fns),
            false_negative_instance_rate: if with_prediction == 0 {
                None
            } else {
                Some(
                    collapsed
                        .iter()
                        .filter(|c| c.false_negatives.is_some_and(|v| v > 0.0))
                        .count() as f64
                        / with_prediction as f64,
                )
            },
        });
    }

    let mut bin_stats = Vec::new();
    let width = (time_range.1 - time_range.0) / bins as f64;
    for bin in 0..bins {
        let members: Vec<&InstanceView<'_>> =
            instances.iter().filter(|v| v.bin == bin).collect();
        let mut scopers = Vec::new();
        for &kind in &scoper_order {
            let speedups: Vec<f64> = members
                .iter()
                .filter_map(|v| v.result.entry(kind))
                .filter_map(|e| collapse(e).speedup)
                .collect();
            scopers.push(BinScoperStats {
                scoper: kind,
                instances: speedups.len(),
                mean_speedup: mean(&speedups),
                median_speedup: median(&speedups),
            });
        }
        bin_stats.push(BinStats {
            bin,
            lo_seconds: time_range.0 + bin as f64 * width,
            hi_seconds: if bin + 1 == bins {
                time_range.1
            } else {
                time_range.0 + (bin + 1) as f64 * width
            },
            experiments: members.len(),
            scopers,
        });
    }

    let mut dominance_violations = Vec::new();
    for view in &instances {
        let Some(upper) = view
            .result
            .entry(ScoperKind::UpperBound)
            .and_then(|e| collapse(e).speedup)
        else {
            continue;
        };
        for entry in &view.result.scopers {
            if entry.scoper == ScoperKind::UpperBound {
                continue;
            }
            if let Some(other) = collapse(entry).speedup {
                if other > upper + 1e-9 {
                    dominance_violations.push(format!(
                        "{}: {} {:.3} > upper-bound {:.3}",
                        view.result.composite_id, entry.scoper, other, upper
                    ));
                }
            }
        }
    }

    Ok(AnalysisReport {
        agenda_id: agenda_id.to_string(),
        loaded,
        inapplicable,
        errored,
        unsolved_reference,
        analyzed: instances.len(),
        bins,
        time_range,
        bin_stats,
        scoper_stats,
        rows,
        dominance_violations,
        warnings,
    })
}

/// Writes the report's tables (CSV) and charts (SVG) plus the full report
/// JSON into the agenda's analysis directory, returning the written paths.
pub fn write_analysis(store: &Store, report: &AnalysisReport) -> Result<Vec<PathBuf>, AnalyzeError> {
    let dir = store.analysis_dir(&report.agenda_id);
    std::fs::create_dir_all(&dir).map_err(|e| AnalyzeError::Output {
        path: dir.clone(),
        message: e.to_string(),
    })?;
    let mut written = Vec::new();

    let metrics_path = dir.join("metrics.csv");
    let mut writer = csv::Writer::from_path(&metrics_path).map_err(|e| AnalyzeError::Output {
        path: metrics_path.clone(),
        message: e.to_string(),
    })?;
    for row in &report.rows {
        writer.serialize(row).map_err(|e| AnalyzeError::Output {
            path: metrics_path.clone(),
            message: e.to_string(),
        })?;
    }
    writer.flush().map_err(|e| AnalyzeError::Output {
        path: metrics_path.clone(),
        message: e.to_string(),
    })?;
    written.push(metrics_path);

    let write_csv = |name: &str, header: &[&str], rows: Vec<Vec<String>>| {
        let path = dir.join(name);
        let mut writer = csv::Writer::from_path(&path).map_err(|e| AnalyzeError::Output {
            path: path.clone(),
            message: e.to_string(),
        })?;
        writer.write_record(header).map_err(|e| AnalyzeError::Output {
            path: path.clone(),
            message: e.to_string(),
        })?;
        for row in rows {
            writer.write_record(&row).map_err(|e| AnalyzeError::Output {
                path: path.clone(),
                message: e.to_string(),
            })?;
        }
        writer.flush().map_err(|e| AnalyzeError::Output {
            path: path.clone(),
            message: e.to_string(),
        })?;
        Ok::<PathBuf, AnalyzeError>(path)
    };

    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();

    let mut speedup_rows = Vec::new();
    for bin in &report.bin_stats {
        for s in &bin.scopers {
            speedup_rows.push(vec![
                bin.bin.to_string(),
                format!("{:.6}", bin.lo_seconds),
                format!("{:.6}", bin.hi_seconds),
                s.scoper.to_string(),
                s.instances.to_string(),
                opt(s.mean_speedup),
                opt(s.median_speedup),
            ]);
        }
    }
    written.push(write_csv(
        "speedup_by_bin.csv",
        &["bin", "lo_seconds", "hi_seconds", "scoper", "instances", "mean_speedup", "median_speedup"],
        speedup_rows,
    )?);

    let lateness_rows = report
        .scoper_stats
        .iter()
        .map(|s| {
            vec![
                s.scoper.to_string(),
                s.instances.to_string(),
                opt(s.mean_additional_lateness),
                opt(s.median_additional_lateness),
                s.penalized_instances.to_string(),
            ]
        })
        .collect();
    written.push(write_csv(
        "lateness_by_scoper.csv",
        &["scoper", "instances", "mean_additional_lateness", "median_additional_lateness", "penalized_instances"],
        lateness_rows,
    )?);

    let prediction_rows = report
        .scoper_stats
        .iter()
        .map(|s| {
            vec![
                s.scoper.to_string(),
                s.instances.to_string(),
                opt(s.mean_f1),
                opt(s.mean_false_positives),
                opt(s.mean_false_negatives),
                opt(s.false_negative_instance_rate),
            ]
        })
        .collect();
    written.push(write_csv(
        "prediction_by_scoper.csv",
        &["scoper", "instances", "mean_f1", "mean_false_positives", "mean_false_negatives", "false_negative_instance_rate"],
        prediction_rows,
    )?);

    let histogram_rows = report
        .bin_stats
        .iter()
        .map(|b| {
            vec![
                b.bin.to_string(),
                format!("{:.6}", b.lo_seconds),
                format!("{:.6}", b.hi_seconds),
                b.experiments.to_string(),
            ]
        })
        .collect();
    written.push(write_csv(
        "difficulty_histogram.csv",
        &["bin", "lo_seconds", "hi_seconds", "experiments"],
        histogram_rows,
    )?);

    let series: Vec<String> = report
        .scoper_stats
        .iter()
        .map(|s| s.scoper.to_string())
        .collect();
    let write_svg = |name: &str, content: String| {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| AnalyzeError::Output {
            path: path.clone(),
            message: e.to_string(),
        })?;
        Ok::<PathBuf, AnalyzeError>(path)
    };

    let speedup_groups: Vec<BarGroup> = report
        .bin_stats
        .iter()
        .map(|bin| BarGroup {
            label: format!("[{:.1}s, {:.1}s)", bin.lo_seconds, bin.hi_seconds),
            values: report
                .scoper_stats
                .iter()
                .map(|s| {
                    bin.scopers
                        .iter()
                        .find(|bs| bs.scoper == s.scoper)
                        .and_then(|bs| bs.median_speedup)
                })
                .collect(),
        })
        .collect();
    written.push(write_svg(
        "speedup_by_bin.svg",
        grouped_bar_chart(
            "Median speed-up by difficulty bin",
            "speed-up factor",
            &series,
            &speedup_groups,
        ),
    )?);

    let lateness_groups: Vec<BarGroup> = report
        .scoper_stats
        .iter()
        .map(|s| BarGroup {
            label: s.scoper.to_string(),
            values: vec![s.mean_additional_lateness],
        })
        .collect();
    written.push(write_svg(
        "lateness_by_scoper.svg",
        grouped_bar_chart(
            "Mean additional lateness by scoper",
            "additional lateness",
            &["mean additional lateness".to_string()],
            &lateness_groups,
        ),
    )?);

    let histogram_groups: Vec<BarGroup> = report
        .bin_stats
        .iter()
        .map(|b| BarGroup {
            label: format!("[{:.1}s, {:.1}s)", b.lo_seconds, b.hi_seconds),
            values: vec![Some(b.experiments as f64)],
        })
        .collect();
    written.push(write_svg(
        "difficulty_histogram.svg",
        grouped_bar_chart(
            "Experiments per difficulty bin",
            "experiments",
            &["experiments".to_string()],
            &histogram_groups,
        ),
    )?);

    let f1_groups: Vec<BarGroup> = report
        .scoper_stats
        .iter()
        .map(|s| BarGroup {
            label: s.scoper.to_string(),
            values: vec![s.mean_f1],
        })
        .collect();
    written.push(write_svg(
        "prediction_quality.svg",
        grouped_bar_chart(
            "Mean F1 of predicted change sets",
            "F1",
            &["mean F1".to_string()],
            &f1_groups,
        ),
    )?);

    let report_path = dir.join("report.json");
    let text = serde_json::to_vec_pretty(report).map_err(|e| AnalyzeError::Output {
        path: report_path.clone(),
        message: e.to_string(),
    })?;
    std::fs::write(&report_path, text).map_err(|e| AnalyzeError::Output {
        path: report_path.clone(),
        message: e.to_string(),
    })?;
    written.push(report_path);

    Ok(written)
}
