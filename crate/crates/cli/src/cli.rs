use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "autossl", version, about = "Search pretext-task weights for graph encoders by pseudo-homophily")]
pub struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search task weights with the evolutionary or differentiable searcher.
    Search {
        #[command(flatten)]
        common: Common,
        /// es or ds.
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        population: Option<usize>,
        /// Parallel ES candidate evaluations (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Train with one task (or all tasks at weight 1 with `equal`).
    Single {
        #[command(flatten)]
        common: Common,
        /// Task name, or `equal`.
        task: String,
    },
    /// Sweep a weight grid over two tasks, all others at zero.
    Grid2 {
        #[command(flatten)]
        common: Common,
        task_a: String,
        task_b: String,
        /// Grid points per axis, spanning [0, 1].
        #[arg(long, default_value_t = 5)]
        steps: usize,
    },
    /// Check the mutual-information bound exhaustively on small graphs.
    TheoryCheck {
        #[command(flatten)]
        common: Common,
        /// `cycle:N`, `path:N`, `complete:N`, `sbm:N:P_IN:P_OUT:SEED`,
        /// `dir:PATH` or `default`; repeatable.
        #[arg(long = "graph-spec")]
        graph_specs: Vec<String>,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Generate a stochastic block model graph directory.
    SbmGen {
        #[command(flatten)]
        common: Common,
        /// Comma-separated block sizes.
        #[arg(long, value_delimiter = ',')]
        blocks: Vec<usize>,
        #[arg(long)]
        p_in: Option<f64>,
        #[arg(long)]
        p_out: Option<f64>,
        /// Standard deviation of the feature noise.
        #[arg(long)]
        noise: Option<f64>,
        /// Extra pure-noise feature columns.
        #[arg(long)]
        noise_dims: Option<usize>,
    },
    /// Report graph statistics and, given embeddings, clustering and probe scores.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Embeddings in the features.csv layout.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
}

/// Options shared by every command. Shorthand flags are applied after the
/// config file and before `--set`.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config field, e.g. `--set es.population=4`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Graph directory (edges.tsv, features.csv, labels.txt).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Comma-separated task list.
    #[arg(long, value_delimiter = ',')]
    pub tasks: Vec<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Leave wall-clock columns empty so reruns are byte-identical.
    #[arg(long)]
    pub no_timings: bool,
}

impl Common {
    /// Shorthand flags as `key=value` overrides, followed by `--set` items.
    pub fn overrides(&self, extra: &[(&str, Option<String>)]) -> Vec<String> {
        let mut out = Vec::new();
        let json_str = |s: &str| serde_json::Value::String(s.to_string()).to_string();
        if let Some(s) = self.seed {
            out.push(format!("seed={s}"));
        }
        if let Some(p) = &self.out {
            out.push(format!("out={}", json_str(&p.to_string_lossy())));
        }
        if let Some(p) = &self.graph {
            out.push(format!("graph.path={}", json_str(&p.to_string_lossy())));
        }
        if !self.tasks.is_empty() {
            out.push(format!("tasks={}", serde_json::to_string(&self.tasks).expect("strings serialize")));
        }
        if let Some(e) = self.epochs {
            out.push(format!("train.epochs={e}"));
        }
        if let Some(h) = self.hidden {
            out.push(format!("train.encoder.hidden={h}"));
        }
        if self.no_timings {
            out.push("timings=false".into());
        }
        for (key, value) in extra {
            if let Some(v) = value {
                out.push(format!("{key}={v}"));
            }
        }
        out.extend(self.set.iter().cloned());
        out
    }
}
