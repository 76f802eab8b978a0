use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("autossl-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn autossl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autossl")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = autossl(args);
    assert!(
        out.status.success(),
        "autossl {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn make_graph(dir: &Path) -> String {
    let g = dir.join("graph");
    let path = g.to_str().unwrap().to_string();
    ok(&["sbm-gen", "--seed", "3", "--out", &path, "--blocks", "20,20", "--p-in", "0.3", "--p-out", "0.03", "--noise", "0.5"]);
    path
}

const FAST: [&str; 10] = [
    "--seed",
    "3",
    "--epochs",
    "6",
    "--hidden",
    "4",
    "--set",
    "task_settings.pairsim_pairs=100",
    "--set",
    "task_settings.pairdis_pairs=100",
];

fn run_in(out: &Path, graph: &str, args: &[&str]) -> Output {
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--graph", graph, "--out", out.to_str().unwrap(), "--no-timings"]);
    full.extend(FAST);
    ok(&full)
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let dir = scratch("rerun");
    let graph = make_graph(&dir);
    let cases: [(&str, &[&str]); 3] = [
        ("es", &["search", "--algo", "es", "--rounds", "1", "--population", "2"]),
        ("ds", &["search", "--algo", "ds"]),
        ("single", &["single", "clu"]),
    ];
    for (name, args) in cases {
        let a = dir.join(format!("{name}-a"));
        let b = dir.join(format!("{name}-b"));
        run_in(&a, &graph, args);
        run_in(&b, &graph, args);
        for file in ["trajectory.csv", "summary.json", "checkpoint.bin", "embeddings.csv"] {
            assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{name} {file}");
        }
    }
}

#[test]
fn es_writes_one_row_per_candidate() {
    let dir = scratch("es");
    let graph = make_graph(&dir);
    let out = dir.join("run");
    run_in(&out, &graph, &["search", "--algo", "es", "--rounds", "2", "--population", "3"]);
    let table = rows(&out.join("trajectory.csv"));
    assert_eq!(
        table[0].join(","),
        "iter,lambda_clu,lambda_par,lambda_pairsim,lambda_pairdis,lambda_dgi,objective,pseudo_homophily,nmi,acc,ms"
    );
    assert_eq!(table.len(), 1 + 6);
    let best: Vec<f64> = table[1..].iter().map(|r| r[7].parse().unwrap()).collect();
    assert!(best.windows(2).all(|w| w[1] >= w[0]));
    assert!(table[1..].iter().all(|r| r[10].is_empty()));
    let s = summary(&out);
    assert_eq!(s["evaluations"], 6);
    assert_eq!(s["best_weights"].as_object().unwrap().len(), 5);
}

#[test]
fn ds_weights_stay_in_the_unit_box() {
    let dir = scratch("ds");
    let graph = make_graph(&dir);
    let out = dir.join("run");
    run_in(&out, &graph, &["search", "--algo", "ds", "--set", "eval.interval=2"]);
    let table = rows(&out.join("trajectory.csv"));
    assert_eq!(table.len(), 1 + 6);
    for row in &table[1..] {
        for cell in &row[1..6] {
            let w: f64 = cell.parse().unwrap();
            assert!((0.0..=1.0).contains(&w));
        }
    }
    // measured at iteration 1, every second iteration, and the last
    let measured: Vec<&str> = table[1..].iter().filter(|r| !r[7].is_empty()).map(|r| r[0].as_str()).collect();
    assert_eq!(measured, ["1", "2", "4", "6"]);
}

#[test]
fn single_task_rows_carry_one_hot_weights() {
    let dir = scratch("single");
    let graph = make_graph(&dir);
    let out = dir.join("run");
    run_in(&out, &graph, &["single", "dgi"]);
    for row in &rows(&out.join("trajectory.csv"))[1..] {
        assert_eq!(row[1..6].join(","), "0,0,0,0,1");
    }
}

#[test]
fn grid_corner_matches_the_single_task_run() {
    let dir = scratch("grid");
    let graph = make_graph(&dir);
    let grid = dir.join("grid");
    run_in(&grid, &graph, &["grid2", "clu", "dgi", "--steps", "2"]);
    let table = rows(&grid.join("heatmap.csv"));
    assert_eq!(table[0].join(","), "lambda_clu,lambda_dgi,pseudo_homophily,nmi,ms");
    assert_eq!(table.len(), 1 + 4);
    let corner = table[1..].iter().find(|r| r[0] == "1" && r[1] == "0").unwrap();

    let single = dir.join("single");
    run_in(&single, &graph, &["single", "clu"]);
    let last = rows(&single.join("trajectory.csv")).pop().unwrap();
    assert_eq!(corner[2], last[7]);
    let s = summary(&single);
    assert_eq!(corner[2].parse::<f64>().unwrap(), s["pseudo_homophily"].as_f64().unwrap());
    assert_eq!(corner[3].parse::<f64>().unwrap(), s["nmi"].as_f64().unwrap());
}

#[test]
fn unknown_task_is_a_config_error() {
    let dir = scratch("unknown");
    let graph = make_graph(&dir);
    let out = autossl(&["single", "metis", "--graph", &graph, "--out", dir.join("x").to_str().unwrap(), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = autossl(&["search", "--graph", &graph, "--seed", "1", "--tasks", "clu,bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = scratch("config");
    let graph = make_graph(&dir);
    let file = dir.join("run.json");
    std::fs::write(&file, r#"{"seed": 1, "es": {"populaton": 4}}"#).unwrap();
    let out = autossl(&["search", "--graph", &graph, "--config", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("populaton"));

    let out = autossl(&["search", "--graph", &graph, "--seed", "1", "--set", "es.population=\"many\""]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&file, "{\"seed\": 1,\n \"es\": }").unwrap();
    let out = autossl(&["search", "--graph", &graph, "--config", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));
}

#[test]
fn missing_seed_is_rejected() {
    let dir = scratch("seed");
    let graph = make_graph(&dir);
    let out = autossl(&["search", "--graph", &graph]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn theory_check_reports_no_violations() {
    let dir = scratch("theory");
    let out = ok(&[
        "theory-check",
        "--graph-spec",
        "cycle:8",
        "--graph-spec",
        "path:6",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["total_violations"], 0);
    assert_eq!(report["graphs"].as_array().unwrap().len(), 2);
    assert!(dir.join("theory.json").is_file());

    let odd = autossl(&["theory-check", "--graph-spec", "cycle:9"]);
    assert_eq!(odd.status.code(), Some(2));
}

#[test]
fn generated_graph_round_trips_through_eval() {
    let dir = scratch("eval");
    let graph = make_graph(&dir);
    let out = ok(&["eval", "--graph", &graph]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["nodes"], 40);
    assert_eq!(report["feature_dim"], 2);
    assert_eq!(report["classes"], 2);
    assert_eq!(report["dropped_self_loops"], 0);

    let run = dir.join("run");
    run_in(&run, &graph, &["single", "equal"]);
    let emb = run.join("embeddings.csv");
    let out = ok(&["eval", "--graph", &graph, "--seed", "3", "--embeddings", emb.to_str().unwrap()]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ph = report["pseudo_homophily"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&ph));
    assert!(report["nmi"].as_f64().unwrap() >= 0.0);
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(autossl(&["--help"]).status.code(), Some(0));
    assert_eq!(autossl(&["no-such-command"]).status.code(), Some(2));
}
