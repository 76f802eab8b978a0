//! Command implementations. Each one is a pure function of its config and
//! seed, apart from wall-clock fields.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use autossl::cluster::pseudo_homophily;
use autossl::ds::run_ds;
use autossl::encoder::{encode, EncoderState, Embeddings};
use autossl::es::{evaluate_candidate, run_es};
use autossl::eval::{cluster_eval, logistic_probe, Split};
use autossl::graph::{homophily, load_graph_with_report, read_matrix, save_graph, sbm_generate, write_matrix, Graph, SbmSpec};
use autossl::numeric::DenseMatrix;
use autossl::tasks::{TaskKind, TaskSet, TaskWeights};
use autossl::theory::{complete_entry, cycle_entry, default_corpus, path_entry, sbm_entry, verify_theorem, CorpusEntry};
use autossl::train::{derive_seed, init_models, step_rng, train_step};
use serde_json::{json, Map, Value};

use crate::cli::{Cli, Command};
use crate::config::{Algo, RunConfig};
use crate::trajectory::{TrajectoryRow, TrajectoryWriter, TRAJECTORY_FILE};
use crate::ConfigError;

pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const THEORY_FILE: &str = "theory.json";
pub const EVAL_FILE: &str = "eval.json";

const TASK_STREAM: u64 = 4;
const EVAL_STREAM: u64 = 3;

pub fn dispatch(cli: &Cli) -> Result<()> {
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match &cli.command {
        Command::Search {
            common,
            algo,
            rounds,
            population,
            workers,
        } => {
            let algo = algo.as_deref().map(|a| Value::String(a.to_string()).to_string());
            let cfg = RunConfig::load(
                common.config.as_deref(),
                &common.overrides(&[
                    ("algo", algo),
                    ("es.rounds", rounds.map(|v| v.to_string())),
                    ("es.population", population.map(|v| v.to_string())),
                    ("es.workers", workers.map(|v| v.to_string())),
                ]),
            )?;
            cmd_search(&cfg).map(|_| ())
        }
        Command::Single { common, task } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.overrides(&[]))?;
            cmd_single(&cfg, task).map(|_| ())
        }
        Command::Grid2 {
            common,
            task_a,
            task_b,
            steps,
        } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.overrides(&[]))?;
            cmd_grid2(&cfg, task_a, task_b, *steps).map(|_| ())
        }
        Command::TheoryCheck {
            common,
            graph_specs,
            tolerance,
        } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.overrides(&[]))?;
            let report = cmd_theory_check(&cfg, graph_specs, *tolerance)?;
            print_json(&report)?;
            check_theory_report(&report)
        }
        Command::SbmGen {
            common,
            blocks,
            p_in,
            p_out,
            noise,
            noise_dims,
        } => {
            let mut cfg = RunConfig::load(common.config.as_deref(), &common.overrides(&[]))?;
            if !blocks.is_empty() || p_in.is_some() || p_out.is_some() || noise.is_some() || noise_dims.is_some() {
                let base = cfg.graph.sbm.clone().unwrap_or(SbmSpec {
                    block_sizes: vec![100, 100, 100],
                    p_in: 0.1,
                    p_out: 0.01,
                    feature_noise: 0.0,
                    noise_dims: 0,
                });
                cfg.graph.sbm = Some(SbmSpec {
                    block_sizes: if blocks.is_empty() { base.block_sizes } else { blocks.clone() },
                    p_in: p_in.unwrap_or(base.p_in),
                    p_out: p_out.unwrap_or(base.p_out),
                    feature_noise: noise.unwrap_or(base.feature_noise),
                    noise_dims: noise_dims.unwrap_or(base.noise_dims),
                });
            }
            let stats = cmd_sbm_gen(&cfg)?;
            print_json(&stats)?;
            Ok(())
        }
        Command::Eval { common, embeddings } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.overrides(&[]))?;
            let report = cmd_eval(&cfg, embeddings.as_deref())?;
            print_json(&report)
        }
    }
}

/// Pretty JSON on stdout; a closed pipe is not an error.
fn print_json(value: &Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(value)?) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

/// Training seed shared by `search es`, `single` and `grid2`, so equal
/// weights give equal encoders across commands.
pub fn training_seed(seed: u64) -> u64 {
    derive_seed(seed, 1, 0)
}

fn prepare(cfg: &RunConfig) -> Result<(u64, PathBuf, Graph, Vec<TaskKind>, TaskSet)> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?.to_path_buf();
    let kinds = cfg.task_kinds()?;
    cfg.validate_graph()?;
    let graph = cfg.load_graph()?;
    let tasks = TaskSet::prepare(&graph, &kinds, &cfg.task_settings, derive_seed(seed, TASK_STREAM, 0))?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok((seed, out, graph, kinds, tasks))
}

/// NMI against the labels (k = number of classes) and probe accuracy on a
/// random split; `None` when the graph has no labels.
pub fn label_scores(graph: &Graph, emb: &DenseMatrix, cfg: &RunConfig, seed: u64) -> Result<(Option<f64>, Option<f64>)> {
    let Some(labels) = graph.labels() else {
        return Ok((None, None));
    };
    let eval_seed = derive_seed(seed, EVAL_STREAM, 0);
    let k = graph.num_classes().min(emb.rows());
    let nmi = cluster_eval(emb, labels, k, eval_seed)?;
    let split = Split::random(graph.num_nodes(), cfg.eval.train_frac, cfg.eval.val_frac, eval_seed)?;
    let acc = match logistic_probe(emb, labels, &split, &cfg.eval.probe) {
        Ok(acc) => Some(acc),
        Err(autossl::Error::Evaluation(msg)) => {
            log::warn!("probe skipped: {msg}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    Ok((Some(nmi), acc))
}

fn graph_summary(graph: &Graph) -> Value {
    json!({
        "nodes": graph.num_nodes(),
        "edges": graph.num_edges(),
        "max_degree": graph.max_degree(),
        "feature_dim": graph.feature_dim(),
        "classes": graph.labels().map(|_| graph.num_classes()),
        "homophily": graph.labels().and_then(|l| homophily(graph, l).ok()),
    })
}

fn weight_map(kinds: &[TaskKind], weights: &[f64]) -> Value {
    let map: Map<String, Value> = kinds
        .iter()
        .zip(weights)
        .map(|(k, w)| (k.name().to_string(), json!(w)))
        .collect();
    Value::Object(map)
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_state(out: &Path, encoder: &EncoderState, emb: &Embeddings) -> Result<()> {
    let mut file = BufWriter::new(File::create(out.join(CHECKPOINT_FILE))?);
    encoder.write_checkpoint(&mut file)?;
    file.flush()?;
    write_matrix(&emb.values, out.join(EMBEDDINGS_FILE))?;
    Ok(())
}

fn timings(cfg: &RunConfig, value: Value) -> Value {
    if cfg.timings {
        value
    } else {
        Value::Null
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs the configured searcher; returns the summary document.
pub fn cmd_search(cfg: &RunConfig) -> Result<Value> {
    let start = Instant::now();
    let (seed, out, graph, kinds, tasks) = prepare(cfg)?;
    let mut writer = TrajectoryWriter::create(&out.join(TRAJECTORY_FILE), &kinds, cfg.timings)?;
    let mut summary = match cfg.algo {
        Algo::Es => search_es(cfg, seed, &out, &graph, &kinds, &tasks, &mut writer)?,
        Algo::Ds => search_ds(cfg, seed, &out, &graph, &kinds, &tasks, &mut writer)?,
    };
    summary["graph"] = graph_summary(&graph);
    summary["seed"] = json!(seed);
    if cfg.timings {
        summary["timings"]["total_ms"] = json!(ms_since(start));
    }
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

fn search_es(
    cfg: &RunConfig,
    seed: u64,
    out: &Path,
    graph: &Graph,
    kinds: &[TaskKind],
    tasks: &TaskSet,
    writer: &mut TrajectoryWriter,
) -> Result<Value> {
    let es = cfg.es_config();
    let mut train_ms = 0.0;
    let mut eval_ms = 0.0;
    let result = run_es(graph, tasks, &es, seed, |index, cand, best| {
        train_ms += cand.train_ms;
        eval_ms += cand.eval_ms;
        let (nmi, acc) = match (&cand.trained, cfg.eval.per_row) {
            (Some(t), true) => label_scores(graph, &t.embeddings.values, cfg, seed).map_err(to_core)?,
            _ => (None, None),
        };
        writer
            .write(&TrajectoryRow {
                iter: index + 1,
                lambda: cand.weights.as_slice().to_vec(),
                objective: cand.fitness,
                pseudo_homophily: Some(best),
                nmi,
                acc,
                ms: cand.train_ms + cand.eval_ms,
            })
            .map_err(to_core)
    })?;
    let (nmi, acc) = match &result.best {
        Some(best) => {
            write_state(out, &best.encoder, &best.embeddings)?;
            label_scores(graph, &best.embeddings.values, cfg, seed)?
        }
        None => (None, None),
    };
    let evaluations = result.evaluations.max(1) as f64;
    Ok(json!({
        "command": "search",
        "algo": "es",
        "tasks": kinds.iter().map(|k| k.name()).collect::<Vec<_>>(),
        "best_weights": weight_map(kinds, result.best_weights.as_slice()),
        "best_pseudo_homophily": result.best_fitness,
        "initial_mean_pseudo_homophily": result.generations.first().map(|g| g.mean_fitness),
        "nmi": nmi,
        "acc": acc,
        "evaluations": result.evaluations,
        "generations": result.generations,
        "timings": timings(cfg, json!({
            "train_ms": train_ms,
            "eval_ms": eval_ms,
            "per_candidate_ms": (train_ms + eval_ms) / evaluations,
        })),
    }))
}

fn search_ds(
    cfg: &RunConfig,
    seed: u64,
    out: &Path,
    graph: &Graph,
    kinds: &[TaskKind],
    tasks: &TaskSet,
    writer: &mut TrajectoryWriter,
) -> Result<Value> {
    let ds = cfg.ds_config();
    let mut step_ms = 0.0;
    let mut eval_ms = 0.0;
    let result = run_ds(graph, tasks, &ds, seed, |record, emb| {
        step_ms += record.step_ms;
        eval_ms += record.eval_ms;
        let (nmi, acc) = match (emb, cfg.eval.per_row) {
            (Some(e), true) => label_scores(graph, &e.values, cfg, seed).map_err(to_core)?,
            _ => (None, None),
        };
        writer
            .write(&TrajectoryRow {
                iter: record.iteration,
                lambda: record.weights.clone(),
                objective: record.homophily_loss,
                pseudo_homophily: record.pseudo_homophily,
                nmi,
                acc,
                ms: record.step_ms + record.eval_ms,
            })
            .map_err(to_core)
    })?;
    let cp = &result.checkpoint;
    write_state(out, &cp.encoder, &cp.embeddings)?;
    let (nmi, acc) = label_scores(graph, &cp.embeddings.values, cfg, seed)?;
    let iterations = result.records.len().max(1) as f64;
    Ok(json!({
        "command": "search",
        "algo": "ds",
        "tasks": kinds.iter().map(|k| k.name()).collect::<Vec<_>>(),
        "best_weights": weight_map(kinds, cp.weights.as_slice()),
        "best_pseudo_homophily": cp.pseudo_homophily,
        "first_pseudo_homophily": result.records.first().and_then(|r| r.pseudo_homophily),
        "checkpoint_iteration": cp.iteration,
        "final_weights": weight_map(kinds, result.final_weights.as_slice()),
        "nmi": nmi,
        "acc": acc,
        "iterations": result.records.len(),
        "timings": timings(cfg, json!({
            "step_ms": step_ms,
            "eval_ms": eval_ms,
            "per_step_ms": step_ms / iterations,
        })),
    }))
}

/// Carries a CLI-side failure through a library callback.
fn to_core(e: anyhow::Error) -> autossl::Error {
    match e.downcast::<autossl::Error>() {
        Ok(inner) => inner,
        Err(other) => autossl::Error::Evaluation(format!("{other:#}")),
    }
}

/// One-hot weights for `task`, or all ones for `equal`.
pub fn fixed_weights(kinds: &[TaskKind], task: &str) -> Result<TaskWeights> {
    if task.eq_ignore_ascii_case("equal") {
        return Ok(TaskWeights::uniform(kinds.len(), 1.0)?);
    }
    let kind: TaskKind = task.parse()?;
    let pos = kinds
        .iter()
        .position(|k| *k == kind)
        .ok_or_else(|| ConfigError(format!("task {kind} is not in the configured task list")))?;
    let mut w = vec![0.0; kinds.len()];
    w[pos] = 1.0;
    Ok(TaskWeights::new(w)?)
}

/// Trains with fixed weights; returns the summary document.
pub fn cmd_single(cfg: &RunConfig, task: &str) -> Result<Value> {
    let start = Instant::now();
    let kinds = cfg.task_kinds()?;
    let weights = fixed_weights(&kinds, task)?;
    let (seed, out, graph, kinds, tasks) = prepare(cfg)?;
    if cfg.train.epochs == 0 {
        bail!(ConfigError("train.epochs must be positive".into()));
    }
    if cfg.eval.interval == 0 {
        bail!(ConfigError("eval.interval must be positive".into()));
    }
    let train_seed = training_seed(seed);
    let mut writer = TrajectoryWriter::create(&out.join(TRAJECTORY_FILE), &kinds, cfg.timings)?;
    let (mut encoder, mut heads) = init_models(&graph, &tasks, &cfg.train.encoder, train_seed)?;
    let total = cfg.train.epochs;
    let mut train_ms = 0.0;
    let mut eval_ms = 0.0;
    let mut last = None;
    for epoch in 0..total {
        let t0 = Instant::now();
        let (_, out_loss) = train_step(&graph, &tasks, &weights, &mut encoder, &mut heads, &step_rng(train_seed, epoch as u64), false)?;
        let step = ms_since(t0);
        train_ms += step;
        let it = epoch + 1;
        let t1 = Instant::now();
        let (ph, nmi, acc) = if it == 1 || it % cfg.eval.interval == 0 || it == total {
            let emb = encode(&graph, &encoder)?;
            let ph = pseudo_homophily(&graph, &emb.values, cfg.clusters, train_seed, &cfg.kmeans)?;
            let (nmi, acc) = if cfg.eval.per_row {
                label_scores(&graph, &emb.values, cfg, seed)?
            } else {
                (None, None)
            };
            if it == total {
                last = Some((emb, ph));
            }
            (Some(ph), nmi, acc)
        } else {
            (None, None, None)
        };
        let ev = ms_since(t1);
        eval_ms += ev;
        writer.write(&TrajectoryRow {
            iter: it,
            lambda: weights.as_slice().to_vec(),
            objective: out_loss.loss,
            pseudo_homophily: ph,
            nmi,
            acc,
            ms: step + ev,
        })?;
    }
    let (emb, ph) = last.expect("the last epoch is always measured");
    write_state(&out, &encoder, &emb)?;
    let (nmi, acc) = label_scores(&graph, &emb.values, cfg, seed)?;
    let mut summary = json!({
        "command": "single",
        "task": task,
        "seed": seed,
        "graph": graph_summary(&graph),
        "weights": weight_map(&kinds, weights.as_slice()),
        "pseudo_homophily": ph,
        "nmi": nmi,
        "acc": acc,
        "timings": timings(cfg, json!({"train_ms": train_ms, "eval_ms": eval_ms})),
    });
    if cfg.timings {
        summary["timings"]["total_ms"] = json!(ms_since(start));
    }
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// One grid cell of a two-task sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub pseudo_homophily: f64,
    pub nmi: Option<f64>,
    pub ms: f64,
}

/// Trains every `(λ_a, λ_b)` on an evenly spaced `steps × steps` grid and
/// writes `heatmap.csv`; cells are ordered with `λ_a` outermost.
pub fn cmd_grid2(cfg: &RunConfig, task_a: &str, task_b: &str, steps: usize) -> Result<Vec<GridCell>> {
    let kinds = cfg.task_kinds()?;
    let (a, b): (TaskKind, TaskKind) = (task_a.parse()?, task_b.parse()?);
    if a == b {
        bail!(ConfigError(format!("grid2 needs two distinct tasks, got {a} twice")));
    }
    if steps < 2 {
        bail!(ConfigError(format!("grid2 needs at least 2 steps per axis, got {steps}")));
    }
    let pa = fixed_weights(&kinds, task_a)?.as_slice().iter().position(|&w| w == 1.0).expect("one-hot");
    let pb = fixed_weights(&kinds, task_b)?.as_slice().iter().position(|&w| w == 1.0).expect("one-hot");
    let (seed, out, graph, _, tasks) = prepare(cfg)?;
    let train_seed = training_seed(seed);
    let es = cfg.es_config();
    let path = out.join(HEATMAP_FILE);
    let mut file = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(
        file,
        "lambda_{},lambda_{},pseudo_homophily,nmi,ms",
        a.name().to_lowercase(),
        b.name().to_lowercase()
    )?;
    let mut cells = Vec::with_capacity(steps * steps);
    for i in 0..steps {
        for j in 0..steps {
            let t0 = Instant::now();
            let (la, lb) = (i as f64 / (steps - 1) as f64, j as f64 / (steps - 1) as f64);
            let mut w = vec![0.0; kinds.len()];
            w[pa] = la;
            w[pb] = lb;
            let (ph, trained) = evaluate_candidate(&graph, &tasks, &TaskWeights::new(w)?, &es, train_seed)?;
            let (nmi, _) = match graph.labels() {
                Some(labels) => {
                    let k = graph.num_classes().min(graph.num_nodes());
                    let nmi = cluster_eval(&trained.embeddings.values, labels, k, derive_seed(seed, EVAL_STREAM, 0))?;
                    (Some(nmi), ())
                }
                None => (None, ()),
            };
            let cell = GridCell {
                lambda_a: la,
                lambda_b: lb,
                pseudo_homophily: ph,
                nmi,
                ms: ms_since(t0),
            };
            let ms = if cfg.timings { format!("{:.3}", cell.ms) } else { String::new() };
            let nmi = cell.nmi.map(|v| v.to_string()).unwrap_or_default();
            writeln!(file, "{la},{lb},{ph},{nmi},{ms}")?;
            file.flush()?;
            log::info!("cell ({la}, {lb}): pseudo-homophily {ph:.4}");
            cells.push(cell);
        }
    }
    Ok(cells)
}

/// Parses a theory corpus spec; `default` expands to the built-in corpus.
pub fn corpus_from_spec(spec: &str) -> Result<Vec<CorpusEntry>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let int = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| ConfigError(format!("graph spec '{spec}': '{s}' is not a node count")).into())
    };
    let float = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| ConfigError(format!("graph spec '{spec}': '{s}' is not a probability")).into())
    };
    let entry = match parts.as_slice() {
        ["default"] => return Ok(default_corpus()?),
        ["cycle", n] => cycle_entry(int(n)?)?,
        ["path", n] => path_entry(int(n)?)?,
        ["complete", n] => complete_entry(int(n)?)?,
        ["sbm", n, p_in, p_out, s] => sbm_entry(int(n)?, float(p_in)?, float(p_out)?, int(s)? as u64)?,
        ["dir", ..] => {
            let dir = PathBuf::from(&spec[4..]);
            let (graph, _) = load_graph_with_report(&dir)?;
            let labels = graph
                .labels()
                .ok_or_else(|| ConfigError(format!("{}: theory-check needs labels.txt", dir.display())))?
                .to_vec();
            CorpusEntry {
                name: dir.display().to_string(),
                graph,
                labels,
            }
        }
        _ => bail!(ConfigError(format!(
            "unrecognised graph spec '{spec}' (cycle:N, path:N, complete:N, sbm:N:P_IN:P_OUT:SEED, dir:PATH, default)"
        ))),
    };
    Ok(vec![entry])
}

/// Verifies the bound on every requested graph; the default corpus when
/// none is given. Writes `theory.json` when an output directory is set.
pub fn cmd_theory_check(cfg: &RunConfig, specs: &[String], tolerance: f64) -> Result<Value> {
    let start = Instant::now();
    let specs: Vec<String> = if specs.is_empty() { vec!["default".into()] } else { specs.to_vec() };
    let mut entries = Vec::new();
    for spec in &specs {
        entries.extend(corpus_from_spec(spec)?);
    }
    let mut reports = Vec::new();
    for e in &entries {
        let r = verify_theorem(&e.graph, &e.labels, tolerance).with_context(|| format!("graph {}", e.name))?;
        reports.push(json!({
            "graph": e.name,
            "N": r.num_nodes,
            "edges": r.num_edges,
            "max_degree": r.max_degree,
            "h_B": r.h_b,
            "num_labelings": r.num_labelings,
            "checked": r.checked,
            "excluded": r.excluded,
            "out_of_domain": r.out_of_domain,
            "violations": r.violations,
            "min_gap": r.min_gap,
            "monotone": r.monotone,
        }));
    }
    let total_violations: usize = reports.iter().map(|r| r["violations"].as_u64().unwrap_or(0) as usize).sum();
    let report = json!({
        "graphs": reports,
        "total_violations": total_violations,
        "all_monotone": reports.iter().all(|r| r["monotone"] == json!(true)),
        "timings": timings(cfg, json!({"total_ms": ms_since(start)})),
    });
    if let Some(out) = &cfg.out {
        fs::create_dir_all(out)?;
        write_json(&out.join(THEORY_FILE), &report)?;
    }
    Ok(report)
}

pub fn check_theory_report(report: &Value) -> Result<()> {
    let violations = report["total_violations"].as_u64().unwrap_or(0);
    if violations > 0 {
        bail!("{violations} labelings exceed the mutual-information bound");
    }
    if report["all_monotone"] != json!(true) {
        bail!("the bound is not decreasing in the homophily gap");
    }
    Ok(())
}

/// Generates `graph.sbm` into the output directory.
pub fn cmd_sbm_gen(cfg: &RunConfig) -> Result<Value> {
    let spec = cfg
        .graph
        .sbm
        .as_ref()
        .ok_or_else(|| ConfigError("sbm-gen needs graph.sbm or --blocks/--p-in/--p-out".into()))?;
    let seed = match cfg.graph.sbm_seed {
        Some(s) => s,
        None => cfg.seed()?,
    };
    let out = cfg.out_dir()?;
    let graph = sbm_generate(spec, seed)?;
    save_graph(&graph, out).with_context(|| format!("writing graph to {}", out.display()))?;
    Ok(graph_summary(&graph))
}

/// Graph statistics plus, for given embeddings, pseudo-homophily, NMI and
/// probe accuracy.
pub fn cmd_eval(cfg: &RunConfig, embeddings: Option<&Path>) -> Result<Value> {
    let dir = cfg
        .graph
        .path
        .as_ref()
        .ok_or_else(|| ConfigError("eval needs a graph directory (--graph)".into()))?;
    cfg.validate_graph()?;
    let (graph, load) = load_graph_with_report(dir).with_context(|| format!("loading {}", dir.display()))?;
    let mut report = graph_summary(&graph);
    report["dropped_self_loops"] = json!(load.cleanup.self_loops);
    report["edge_lines"] = json!(load.edge_lines);
    report["repeated_edge_entries"] = json!(load.cleanup.repeated);
    if let Some(path) = embeddings {
        let seed = cfg.seed()?;
        let emb = read_matrix(path).with_context(|| format!("loading embeddings {}", path.display()))?;
        if emb.rows() != graph.num_nodes() {
            bail!(ConfigError(format!(
                "{} has {} rows for a graph with {} nodes",
                path.display(),
                emb.rows(),
                graph.num_nodes()
            )));
        }
        let ph = pseudo_homophily(&graph, &emb, cfg.clusters, derive_seed(seed, EVAL_STREAM, 0), &cfg.kmeans)?;
        let (nmi, acc) = label_scores(&graph, &emb, cfg, seed)?;
        report["pseudo_homophily"] = json!(ph);
        report["nmi"] = json!(nmi);
        report["acc"] = json!(acc);
    }
    if let Some(out) = &cfg.out {
        fs::create_dir_all(out)?;
        write_json(&out.join(EVAL_FILE), &report)?;
    }
    Ok(report)
}
