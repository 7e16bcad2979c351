// SPDX-License-Identifier: Apache-2.0

//! Run reports, balance metrics and benchmark sweeps.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::bdm::{compute_bdm, BlockDistributionMatrix};
use crate::engine::{JobConfig, TaskMetrics};
use crate::error::{Error, Result};
use crate::matching::{MatchDecision, MatcherConfig};
use crate::model::Dataset;
use crate::strategy::blocksplit::blocksplit_plan;
use crate::strategy::{run_matching, Comparison, MatchRun, Retain, StrategyKind};

/// `max / mean` of the loads; 1.0 when every load is zero.
pub fn imbalance(loads: &[u64]) -> Result<f64> {
    if loads.is_empty() {
        return Err(Error::InvalidArgument("imbalance of no loads".into()));
    }
    let total: u64 = loads.iter().sum();
    if total == 0 {
        return Ok(1.0);
    }
    let max = *loads.iter().max().expect("non-empty") as f64;
    Ok(max * loads.len() as f64 / total as f64)
}

/// List scheduling in the given order: each task starts on the worker that
/// frees up first (lowest index on ties). Returns the last finish time.
pub fn simulated_makespan(costs: &[f64], workers: usize) -> f64 {
    assert!(workers >= 1, "simulated_makespan needs at least one worker");
    let mut finish = vec![0.0f64; workers.min(costs.len().max(1))];
    for &cost in costs {
        let (w, _) = finish
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &t)| if t < best.1 { (i, t) } else { best });
        finish[w] += cost;
    }
    finish.into_iter().fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub m: usize,
    pub r: usize,
    pub worker_count: usize,
    /// Simulated nodes executing the reduce tasks; defaults to `r`.
    pub nodes: usize,
    pub matcher: MatcherConfig,
}

impl RunConfig {
    pub fn new(m: usize, r: usize, worker_count: usize, matcher: MatcherConfig) -> Self {
        Self {
            m,
            r,
            worker_count,
            nodes: r,
            matcher,
        }
    }

    fn job(&self) -> Result<JobConfig> {
        if self.nodes == 0 {
            return Err(Error::InvalidArgument("nodes must be at least 1".into()));
        }
        JobConfig::new(self.m, self.r, self.worker_count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub strategy: StrategyKind,
    pub config: RunConfig,
    pub entity_count: u64,
    pub block_count: usize,
    pub total_pairs: u64,
    pub per_task: Vec<TaskMetrics>,
    pub total_comparisons: u64,
    pub matches: u64,
    pub imbalance: f64,
    pub shuffled_records: u64,
    pub replication_factor: f64,
    pub simulated_makespan: f64,
    /// Keys of blocks BlockSplit could not split below the average workload.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub oversized_blocks: Vec<String>,
    /// Only filled in when timing is requested, so reports stay
    /// reproducible by default.
    pub wall_time_ms: Option<u64>,
}

impl RunReport {
    pub fn comparisons(&self) -> Vec<u64> {
        self.per_task.iter().map(|t| t.comparisons_done).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Builds the report of a finished match job.
pub fn summarize(
    run: &MatchRun,
    bdm: &BlockDistributionMatrix,
    config: &RunConfig,
) -> Result<RunReport> {
    let comparisons = run.comparisons_per_task();
    let costs: Vec<f64> = run.metrics.iter().map(|t| t.cost_units).collect();
    let oversized_blocks = match run.strategy {
        StrategyKind::BlockSplit => blocksplit_plan(bdm, config.m, config.r)?
            .oversized_blocks
            .into_iter()
            .map(|b| bdm.keys[b].clone())
            .collect(),
        _ => Vec::new(),
    };
    let replication_factor = if bdm.entity_total == 0 {
        0.0
    } else {
        run.shuffled_records as f64 / bdm.entity_total as f64
    };
    Ok(RunReport {
        strategy: run.strategy,
        config: config.clone(),
        entity_count: bdm.entity_total,
        block_count: bdm.block_count(),
        total_pairs: bdm.total_pairs,
        per_task: run.metrics.clone(),
        total_comparisons: run.total_comparisons(),
        matches: run
            .decisions
            .iter()
            .flatten()
            .filter(|d| d.is_match)
            .count() as u64,
        imbalance: imbalance(&comparisons)?,
        shuffled_records: run.shuffled_records,
        replication_factor,
        simulated_makespan: simulated_makespan(&costs, config.nodes),
        oversized_blocks,
        wall_time_ms: None,
    })
}

/// Options for [`run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub retain: Retain,
    pub timing: bool,
}

/// Analysis job, then the match job of `strategy`.
pub fn run(
    dataset: &Dataset,
    strategy: StrategyKind,
    config: &RunConfig,
    options: RunOptions,
) -> Result<(RunReport, Vec<Vec<MatchDecision>>)> {
    let started = Instant::now();
    let job = config.job()?;
    let bdm = Arc::new(compute_bdm(dataset, &job)?);
    let comparison = Comparison::new(config.matcher, options.retain);
    let outcome = run_matching(dataset, &bdm, strategy, &comparison, &job)?;
    let mut report = summarize(&outcome, &bdm, config)?;
    if options.timing {
        report.wall_time_ms = Some(started.elapsed().as_millis() as u64);
    }
    Ok((report, outcome.decisions))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub strategy: StrategyKind,
    pub r: usize,
    pub imbalance: f64,
    pub replication: f64,
    pub makespan: f64,
    pub speedup: f64,
}

pub const BENCH_HEADER: [&str; 6] = ["strategy", "r", "imbalance", "replication", "makespan", "speedup"];

/// Runs every `(strategy, r)` combination on the same dataset. Simulated
/// nodes equal `r`, or `fixed_nodes` when given. Speedup is relative to the
/// same strategy at `r = 1`.
pub fn bench_sweep(
    dataset: &Dataset,
    strategies: &[StrategyKind],
    rs: &[usize],
    base: &RunConfig,
    fixed_nodes: Option<usize>,
) -> Result<Vec<BenchRow>> {
    if rs.is_empty() || rs.contains(&0) {
        return Err(Error::InvalidArgument("r values must be positive and non-empty".into()));
    }
    let options = RunOptions {
        retain: Retain::Nothing,
        timing: false,
    };
    let config_for = |r: usize| RunConfig {
        r,
        nodes: fixed_nodes.unwrap_or(r),
        ..base.clone()
    };
    let mut rows = Vec::new();
    for &strategy in strategies {
        let baseline = run(dataset, strategy, &config_for(1), options)?.0.simulated_makespan;
        for &r in rs {
            let (report, _) = run(dataset, strategy, &config_for(r), options)?;
            let speedup = if report.simulated_makespan == 0.0 {
                1.0
            } else {
                baseline / report.simulated_makespan
            };
            rows.push(BenchRow {
                strategy,
                r,
                imbalance: report.imbalance,
                replication: report.replication_factor,
                makespan: report.simulated_makespan,
                speedup,
            });
        }
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    writer.write_record(BENCH_HEADER).map_err(io)?;
    for row in rows {
        writer
            .write_record([
                row.strategy.to_string(),
                row.r.to_string(),
                format!("{:.6}", row.imbalance),
                format!("{:.6}", row.replication),
                format!("{}", row.makespan),
                format!("{:.6}", row.speedup),
            ])
            .map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GenSpec, Layout};

    #[test]
    fn imbalance_examples() {
        assert_eq!(imbalance(&[4, 4]).unwrap(), 1.0);
        assert_eq!(imbalance(&[8, 0]).unwrap(), 2.0);
        assert!((imbalance(&[3, 3, 4]).unwrap() - 1.2).abs() < 1e-12);
        assert_eq!(imbalance(&[0, 0, 0]).unwrap(), 1.0);
        assert!(imbalance(&[]).is_err());
    }

    #[test]
    fn makespan_examples() {
        assert_eq!(simulated_makespan(&[4.0, 4.0], 2), 4.0);
        assert_eq!(simulated_makespan(&[4.0, 1.0, 1.0, 1.0, 1.0], 2), 4.0);
        assert_eq!(simulated_makespan(&[5.0, 4.0, 3.0, 3.0], 2), 8.0);
        assert_eq!(simulated_makespan(&[5.0, 4.0, 3.0, 3.0], 8), 5.0);
        assert_eq!(simulated_makespan(&[5.0, 4.0, 3.0, 3.0], 1), 15.0);
        assert_eq!(simulated_makespan(&[], 3), 0.0);
    }

    fn small() -> Dataset {
        generate(&GenSpec {
            n: 600,
            distinct_keys: 40,
            zipf_s: 1.0,
            m: 3,
            seed: 4,
            attr_len: 10,
            layout: Layout::RoundRobin,
        })
        .unwrap()
    }

    #[test]
    fn report_fields_are_consistent() {
        let ds = small();
        for strategy in StrategyKind::ALL {
            let config = RunConfig::new(3, 5, 2, MatcherConfig::default());
            let (report, decisions) = run(&ds, strategy, &config, RunOptions::default()).unwrap();
            assert_eq!(report.total_comparisons, report.comparisons().iter().sum::<u64>());
            assert_eq!(report.total_comparisons, report.total_pairs);
            assert!(report.imbalance >= 1.0);
            assert_eq!(report.matches, decisions.iter().flatten().count() as u64);
            assert!(report.matches > 0);
            assert!(report.wall_time_ms.is_none());
        }
        let config = RunConfig::new(3, 5, 2, MatcherConfig::null());
        let (basic, _) = run(&ds, StrategyKind::Basic, &config, RunOptions::default()).unwrap();
        assert_eq!(basic.replication_factor, 1.0);

        // singletons are never shipped, every other entity at least once
        let bdm = crate::bdm::compute_bdm(&ds, &crate::engine::JobConfig::new(3, 5, 2).unwrap()).unwrap();
        let paired: u64 = bdm.sizes.iter().filter(|&&n| n >= 2).sum();
        for strategy in [StrategyKind::BlockSplit, StrategyKind::PairRange] {
            let (report, _) = run(&ds, strategy, &config, RunOptions::default()).unwrap();
            assert!(report.shuffled_records >= paired, "{strategy}");
        }
    }

    #[test]
    fn report_json_is_reproducible() {
        let ds = small();
        let json = |w: usize| {
            let config = RunConfig::new(3, 4, w, MatcherConfig::default());
            let (mut report, _) = run(&ds, StrategyKind::PairRange, &config, RunOptions::default()).unwrap();
            report.config.worker_count = 0;
            report.to_json().unwrap()
        };
        assert_eq!(json(1), json(1));
        assert_eq!(json(1), json(4));
    }

    #[test]
    fn timing_is_opt_in() {
        let ds = small();
        let config = RunConfig::new(3, 2, 1, MatcherConfig::null());
        let options = RunOptions {
            timing: true,
            ..RunOptions::default()
        };
        assert!(run(&ds, StrategyKind::Basic, &config, options).unwrap().0.wall_time_ms.is_some());
    }

    #[test]
    fn sweep_with_single_r_has_unit_speedup() {
        let ds = small();
        let base = RunConfig::new(3, 1, 2, MatcherConfig::null());
        let rows = bench_sweep(&ds, &StrategyKind::ALL, &[1], &base, None).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.speedup == 1.0));
        let mut csv = Vec::new();
        write_bench_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("strategy,r,imbalance,replication,makespan,speedup\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn uniform_basic_sweep() {
        // frozen from seed 21: uniform keys keep the baseline close to balanced
        let ds = generate(&GenSpec {
            n: 4000,
            distinct_keys: 400,
            zipf_s: 0.0,
            m: 4,
            seed: 21,
            attr_len: 8,
            layout: Layout::RoundRobin,
        })
        .unwrap();
        let base = RunConfig::new(4, 1, 2, MatcherConfig::null());
        let rows = bench_sweep(&ds, &[StrategyKind::Basic], &[1, 2, 4], &base, None).unwrap();
        let got: Vec<f64> = rows.iter().map(|r| r.imbalance).collect();
        let frozen = [1.0, 1.0463582775502047, 1.1601558597262465];
        for (g, f) in got.iter().zip(frozen) {
            assert!((g - f).abs() < 1e-12, "{got:?}");
        }
        assert!(got.iter().all(|&i| i < 1.25));
    }
}
