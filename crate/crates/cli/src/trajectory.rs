//! Row-per-iteration CSV log of a search, flushed after every row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use autossl::tasks::TaskKind;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";

/// One trajectory row. `objective` is the candidate fitness for ES, the
/// homophily loss for DS and the training loss for fixed-weight runs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub iter: usize,
    pub lambda: Vec<f64>,
    pub objective: f64,
    pub pseudo_homophily: Option<f64>,
    pub nmi: Option<f64>,
    pub acc: Option<f64>,
    pub ms: f64,
}

pub fn header(tasks: &[TaskKind]) -> String {
    let mut cols = vec!["iter".to_string()];
    cols.extend(tasks.iter().map(|t| format!("lambda_{}", t.name().to_lowercase())));
    cols.extend(["objective", "pseudo_homophily", "nmi", "acc", "ms"].map(String::from));
    cols.join(",")
}

pub struct TrajectoryWriter {
    out: BufWriter<File>,
    width: usize,
    last_iter: Option<usize>,
    timings: bool,
}

impl TrajectoryWriter {
    pub fn create(path: &Path, tasks: &[TaskKind], timings: bool) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", header(tasks))?;
        out.flush()?;
        Ok(Self {
            out,
            width: tasks.len(),
            last_iter: None,
            timings,
        })
    }

    /// Appends and flushes one row. Iterations must increase strictly and
    /// every weight must lie in `[0, 1]`.
    pub fn write(&mut self, row: &TrajectoryRow) -> Result<()> {
        if row.lambda.len() != self.width {
            bail!("trajectory row has {} weights, expected {}", row.lambda.len(), self.width);
        }
        if self.last_iter.is_some_and(|last| row.iter <= last) {
            bail!("trajectory iterations must increase (got {} after {:?})", row.iter, self.last_iter);
        }
        if let Some(bad) = row.lambda.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            bail!("task weight {bad} outside [0, 1] at iteration {}", row.iter);
        }
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut cells = vec![row.iter.to_string()];
        cells.extend(row.lambda.iter().map(f64::to_string));
        cells.push(row.objective.to_string());
        cells.push(opt(row.pseudo_homophily));
        cells.push(opt(row.nmi));
        cells.push(opt(row.acc));
        cells.push(if self.timings { format!("{:.3}", row.ms) } else { String::new() });
        writeln!(self.out, "{}", cells.join(","))?;
        self.out.flush()?;
        self.last_iter = Some(row.iter);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iter: usize, lambda: Vec<f64>) -> TrajectoryRow {
        TrajectoryRow {
            iter,
            lambda,
            objective: 0.25,
            pseudo_homophily: None,
            nmi: Some(0.5),
            acc: None,
            ms: 1.23456,
        }
    }

    #[test]
    fn header_is_stable() {
        assert_eq!(
            header(&TaskKind::ALL),
            "iter,lambda_clu,lambda_par,lambda_pairsim,lambda_pairdis,lambda_dgi,objective,pseudo_homophily,nmi,acc,ms"
        );
    }

    #[test]
    fn rows_are_written_and_checked() {
        let dir = std::env::temp_dir().join(format!("autossl-traj-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(TRAJECTORY_FILE);
        let mut w = TrajectoryWriter::create(&path, &[TaskKind::Dgi, TaskKind::Clu], true).unwrap();
        w.write(&row(1, vec![1.0, 0.0])).unwrap();
        // flushed before the writer is dropped
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().nth(1), Some("1,1,0,0.25,,0.5,,1.235"));
        assert!(w.write(&row(1, vec![1.0, 0.0])).is_err());
        assert!(w.write(&row(2, vec![1.5, 0.0])).is_err());
        assert!(w.write(&row(3, vec![1.0])).is_err());
        w.write(&row(4, vec![0.5, 0.5])).unwrap();
    }
}
