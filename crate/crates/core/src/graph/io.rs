//! Plain-text graph directories: `edges.tsv`, `features.csv`, optional
//! `labels.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EdgeCleanup, Graph};
use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.txt";

/// What the loader discarded while reading a graph directory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub edge_lines: usize,
    pub cleanup: EdgeCleanup,
}

pub fn load_graph(dir: impl AsRef<Path>) -> Result<Graph> {
    load_graph_with_report(dir).map(|(g, _)| g)
}

pub fn load_graph_with_report(dir: impl AsRef<Path>) -> Result<(Graph, LoadReport)> {
    let dir = dir.as_ref();
    let features = parse_matrix(&read(dir, FEATURES_FILE)?, FEATURES_FILE)?;
    let labels_path = dir.join(LABELS_FILE);
    let labels = if labels_path.exists() {
        Some(parse_labels(&read(dir, LABELS_FILE)?)?)
    } else {
        None
    };
    let n = labels.as_ref().map_or(features.rows(), Vec::len);
    if features.rows() != n {
        return Err(Error::Shape(format!(
            "{FEATURES_FILE} has {} rows but {LABELS_FILE} has {n} entries",
            features.rows()
        )));
    }
    let edges = parse_edges(&read(dir, EDGES_FILE)?, n)?;
    let edge_lines = edges.len();
    let (graph, cleanup) = Graph::build(n, edges, features, labels)?;
    if cleanup.self_loops > 0 {
        log::warn!("{}: dropped {} self-loops", dir.display(), cleanup.self_loops);
    }
    if cleanup.repeated > 0 {
        log::info!(
            "{}: merged {} repeated or reverse edge entries into {} undirected edges",
            dir.display(),
            cleanup.repeated,
            graph.num_edges()
        );
    }
    Ok((graph, LoadReport { edge_lines, cleanup }))
}

/// Writes a graph in the directory format read by [`load_graph`].
pub fn save_graph(graph: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut edges = String::new();
    for &(u, v) in graph.edges() {
        writeln!(edges, "{u}\t{v}").unwrap();
    }
    fs::write(dir.join(EDGES_FILE), edges)?;
    write_matrix(graph.features(), dir.join(FEATURES_FILE))?;
    if let Some(labels) = graph.labels() {
        let mut out = String::new();
        for l in labels {
            writeln!(out, "{l}").unwrap();
        }
        fs::write(dir.join(LABELS_FILE), out)?;
    }
    Ok(())
}

/// Reads a matrix in the `features.csv` layout: one comma-separated row per
/// line.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Ingestion {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    parse_matrix(&text, &name)
}

/// Writes a matrix in the `features.csv` layout with round-trip precision.
pub fn write_matrix(matrix: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for row in matrix.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|source| Error::Ingestion { path, source })
}

fn malformed(file: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_edges(text: &str, n: usize) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(malformed(EDGES_FILE, i + 1, "expected two node indices"));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| malformed(EDGES_FILE, i + 1, format!("'{s}' is not a node index")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u >= n || v >= n {
            return Err(malformed(
                EDGES_FILE,
                i + 1,
                format!("edge ({u},{v}) out of range for {n} nodes"),
            ));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn parse_matrix(text: &str, file: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| {
                let c = c.trim();
                c.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| malformed(file, i + 1, format!("'{c}' is not a finite number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(malformed(
                    file,
                    i + 1,
                    format!("{} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}

fn parse_labels(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| malformed(LABELS_FILE, i + 1, format!("'{}' is not a class id", l.trim())))
        })
        .collect()
}
