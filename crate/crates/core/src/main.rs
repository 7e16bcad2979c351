// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use er_balance::report::{bench_sweep, run, write_bench_csv, RunConfig, RunOptions};
use er_balance::strategy::blocksplit::blocksplit_plan;
use er_balance::strategy::pairrange::compute_ranges;
use er_balance::{
    compute_bdm, generate, hash_partition, load_csv, Dataset, Error, GenSpec, JobConfig, Layout,
    MatcherConfig, MatcherKind, Result, Retain, StrategyKind,
};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "er-balance", version, about = "Load-balanced entity resolution on an in-process MapReduce engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Load-balancing strategy: basic, blocksplit or pairrange.
    #[arg(long, global = true, default_value = "pairrange")]
    strategy: StrategyKind,

    /// Number of input (map) partitions.
    #[arg(long, global = true, default_value_t = 4)]
    m: usize,

    /// Number of reduce tasks.
    #[arg(long, global = true, default_value_t = 8)]
    r: usize,

    /// Worker threads of the engine.
    #[arg(long, global = true, default_value_t = 4)]
    workers: usize,

    /// Simulated nodes for the makespan; defaults to r.
    #[arg(long, global = true)]
    nodes: Option<usize>,

    /// Seed of the data generator.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Matcher: jaccard or null.
    #[arg(long, global = true, default_value = "jaccard")]
    matcher: MatcherKind,

    /// Similarity threshold for a match.
    #[arg(long, global = true, default_value_t = er_balance::matching::DEFAULT_THRESHOLD)]
    threshold: f64,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Read entities from this CSV file instead of generating them.
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Blocking-key column of the input CSV.
    #[arg(long, global = true, default_value = "key")]
    key_column: String,

    /// Attribute (0-based, key column excluded) compared by the matcher.
    #[arg(long, global = true, default_value_t = 0)]
    attribute: usize,

    /// Generated entity count.
    #[arg(long, global = true, default_value_t = 20_000)]
    n: usize,

    /// Generated distinct blocking keys.
    #[arg(long, global = true, default_value_t = 1_000)]
    keys: usize,

    /// Zipf exponent of the generated key distribution (0 = uniform).
    #[arg(long, global = true, default_value_t = 1.0)]
    zipf: f64,

    /// Length of the generated name attribute.
    #[arg(long, global = true, default_value_t = 12)]
    attr_len: usize,

    /// Generated partition layout: round-robin or clustered.
    #[arg(long, global = true, default_value = "round-robin")]
    layout: Layout,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a skewed dataset as CSV.
    Gen,
    /// Compute the block distribution matrix (JSON).
    Analyze,
    /// Emit the strategy's plan (JSON).
    Plan,
    /// Run one strategy and emit its report (JSON).
    Run {
        /// Record wall-clock time in the report.
        #[arg(long)]
        timing: bool,
    },
    /// Sweep strategies and reduce-task counts (CSV).
    Bench {
        /// Comma-separated reduce-task counts.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        rs: Vec<usize>,
        /// Comma-separated strategies.
        #[arg(long, value_delimiter = ',', default_value = "basic,blocksplit,pairrange")]
        strategies: Vec<StrategyKind>,
    },
}

impl Cli {
    fn dataset(&self) -> Result<Dataset> {
        match &self.data.input {
            Some(path) => load_csv(path, &self.data.key_column, self.m),
            None => generate(&GenSpec {
                n: self.data.n,
                distinct_keys: self.data.keys,
                zipf_s: self.data.zipf,
                m: self.m,
                seed: self.seed,
                attr_len: self.data.attr_len,
                layout: self.data.layout,
            }),
        }
    }

    fn run_config(&self, r: usize) -> RunConfig {
        let matcher = MatcherConfig {
            kind: self.matcher,
            attribute: self.data.attribute,
            threshold: self.threshold,
        };
        let mut config = RunConfig::new(self.m, r, self.workers, matcher);
        if let Some(nodes) = self.nodes {
            config.nodes = nodes;
        }
        config
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Serialize)]
struct BasicPlan {
    r: usize,
    blocks: Vec<BasicAssignment>,
    per_reduce_load: Vec<u64>,
}

#[derive(Serialize)]
struct BasicAssignment {
    key: String,
    pair_count: u64,
    assigned_reduce: usize,
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    if !(0.0..=1.0).contains(&cli.threshold) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie in [0, 1], got {}",
            cli.threshold
        )));
    }
    let job = JobConfig::new(cli.m, cli.r, cli.workers)?;
    if cli.nodes == Some(0) {
        return Err(Error::InvalidArgument("nodes must be at least 1".into()));
    }
    let dataset = cli.dataset()?;
    let mut out = cli.output()?;
    match &cli.command {
        Command::Gen => er_balance::datagen::write_csv_to(&dataset, &mut out)?,
        Command::Analyze => write_json(&mut out, &compute_bdm(&dataset, &job)?)?,
        Command::Plan => {
            let bdm = compute_bdm(&dataset, &job)?;
            match cli.strategy {
                StrategyKind::Basic => {
                    let mut per_reduce_load = vec![0u64; cli.r];
                    let blocks = bdm
                        .keys
                        .iter()
                        .zip(&bdm.pair_counts)
                        .map(|(key, &pair_count)| {
                            let assigned_reduce = hash_partition(key.as_bytes(), cli.r);
                            per_reduce_load[assigned_reduce] += pair_count;
                            BasicAssignment {
                                key: key.clone(),
                                pair_count,
                                assigned_reduce,
                            }
                        })
                        .collect();
                    let plan = BasicPlan {
                        r: cli.r,
                        blocks,
                        per_reduce_load,
                    };
                    write_json(&mut out, &plan)?
                }
                StrategyKind::BlockSplit => write_json(&mut out, &blocksplit_plan(&bdm, cli.m, cli.r)?)?,
                StrategyKind::PairRange => write_json(&mut out, &compute_ranges(bdm.total_pairs, cli.r))?,
            }
        }
        Command::Run { timing } => {
            let options = RunOptions {
                retain: Retain::Matches,
                timing: *timing,
            };
            let (report, _) = run(&dataset, cli.strategy, &cli.run_config(cli.r), options)?;
            write_json(&mut out, &report)?;
        }
        Command::Bench { rs, strategies } => {
            let rows = bench_sweep(&dataset, strategies, rs, &cli.run_config(1), cli.nodes)?;
            write_bench_csv(&rows, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
