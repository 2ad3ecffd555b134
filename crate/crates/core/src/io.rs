//! CSV and TOML output files.
//!
//! Trajectory CSV: `t, x_0..x_{n-1}, u_0..u_{m-1}, h`, one row per fine-trace
//! point; `u` is the input held over the period containing the row (the last
//! input repeats on the final row, and is empty for a zero-length run).
//!
//! Diagnostics CSV: `t, h, status, sample, p_star, ball_radius, u_*,
//! margin_0..margin_3, gronwall_term`, one row per sampling instant. Fields a
//! controller does not produce are written as `NaN` (or empty for `sample`).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::barrier::BarrierSpec;
use crate::dataset::fmt_num as num;
use crate::error::{Error, Result};
use crate::sim::{safety_monitor, ClosedLoopRun, StepRecord};

pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..n).map(|i| format!("x_{i}")));
    h.extend((0..m).map(|i| format!("u_{i}")));
    h.push("h".into());
    h
}

pub fn write_trajectory_csv<W: Write>(run: &ClosedLoopRun, m: usize, barrier: &BarrierSpec, out: W) -> Result<()> {
    let traj = &run.trajectory;
    let n = traj.states.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(n, m))?;
    for (i, (t, x)) in traj.fine_trace.iter().enumerate() {
        let mut row = vec![num(*t)];
        row.extend(x.iter().map(|v| num(*v)));
        match traj.input_at_row(i, run.substeps) {
            Some(u) => row.extend(u.iter().map(|v| num(*v))),
            None => row.extend(std::iter::repeat(String::new()).take(m)),
        }
        row.push(num(barrier.h(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn diagnostics_header(m: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "h", "status", "sample", "p_star", "ball_radius"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..m).map(|i| format!("u_{i}")));
    h.extend((0..4).map(|i| format!("margin_{i}")));
    h.push("gronwall_term".into());
    h
}

pub fn write_diagnostics_csv<W: Write>(steps: &[StepRecord], m: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(diagnostics_header(m))?;
    for s in steps {
        let d = &s.diagnostics;
        let mut row = vec![
            num(s.t),
            num(s.h),
            d.status.as_str().to_string(),
            d.sample.map_or(String::new(), |i| i.to_string()),
            num(d.p_star),
            num(d.ball_radius),
        ];
        row.extend(s.u.iter().map(|v| num(*v)));
        row.extend(d.margins.iter().map(|v| num(*v)));
        row.push(num(d.gronwall_term));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A trajectory CSV read back for comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub h: Vec<f64>,
}

impl TrajectoryTable {
    pub fn state_dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<TrajectoryTable> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let t_col = col("t").ok_or_else(|| Error::Parse("trajectory CSV has no 't' column".into()))?;
    let h_col = col("h").ok_or_else(|| Error::Parse("trajectory CSV has no 'h' column".into()))?;
    let x_cols: Vec<usize> = (0..).map_while(|i| col(&format!("x_{i}"))).collect();
    if x_cols.is_empty() {
        return Err(Error::Parse("trajectory CSV has no state columns".into()));
    }
    let parse = |rec: &csv::StringRecord, c: usize, line: usize| -> Result<f64> {
        rec.get(c)
            .unwrap_or("")
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("row {line}, column {}: {e}", &header[c])))
    };
    let mut table = TrajectoryTable {
        t: Vec::new(),
        x: Vec::new(),
        h: Vec::new(),
    };
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        table.t.push(parse(&rec, t_col, line)?);
        table.h.push(parse(&rec, h_col, line)?);
        table.x.push(x_cols.iter().map(|&c| parse(&rec, c, line)).collect::<Result<_>>()?);
    }
    if table.t.is_empty() {
        return Err(Error::Parse("trajectory CSV has no rows".into()));
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub controller: String,
    pub steps: usize,
    pub horizon_steps: usize,
    pub min_h: f64,
    pub safe: bool,
    pub first_violation_t: Option<f64>,
    pub mean_boundary_distance: f64,
    pub min_boundary_distance: f64,
    pub certified_steps: usize,
    pub fallback_steps: usize,
    pub box_exit_t: Option<f64>,
    pub halted: Option<String>,
}

impl RunSummary {
    pub fn new(controller: &str, run: &ClosedLoopRun, horizon_steps: usize, barrier: &BarrierSpec) -> Self {
        use crate::controller::StepStatus;
        let report = safety_monitor(&run.trajectory, barrier);
        let count = |s: StepStatus| run.steps.iter().filter(|r| r.diagnostics.status == s).count();
        Self {
            controller: controller.into(),
            steps: run.steps.len(),
            horizon_steps,
            min_h: report.min_h,
            safe: report.first_violation.is_none(),
            first_violation_t: report.first_violation.map(|(_, t)| t),
            mean_boundary_distance: report.mean_boundary_distance,
            min_boundary_distance: report.min_boundary_distance,
            certified_steps: count(StepStatus::Certified),
            fallback_steps: count(StepStatus::Fallback),
            box_exit_t: run.trajectory.box_exit,
            halted: run.halted.as_ref().map(|h| format!("step {}: {}", h.step, h.reason)),
        }
    }
}

/// Recorded in every output directory. Deliberately has no timestamp so that
/// reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&Path>, dataset: Option<&Path>, out: &Path, seed: u64) -> Self {
        Self {
            command: command.into(),
            config: config.map(Path::to_path_buf),
            dataset: dataset.map(Path::to_path_buf),
            out: out.to_path_buf(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

pub fn write_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_state_and_h_columns() {
        let text = "t,x_0,x_1,u_0,h\n0,0.5,0.75,1,0.75\n0.01,0.4,0.7,,0.84\n";
        let t = read_trajectory_csv(text.as_bytes()).unwrap();
        assert_eq!(t.t, vec![0.0, 0.01]);
        assert_eq!(t.x[1], vec![0.4, 0.7]);
        assert_eq!(t.h, vec![0.75, 0.84]);
        assert_eq!(t.state_dim(), 2);
    }

    #[test]
    fn empty_trajectory_is_a_parse_error() {
        assert!(matches!(read_trajectory_csv("t,x_0,u_0,h\n".as_bytes()), Err(Error::Parse(_))));
        assert!(read_trajectory_csv("".as_bytes()).is_err());
    }

    #[test]
    fn headers() {
        assert_eq!(trajectory_header(2, 1).join(","), "t,x_0,x_1,u_0,h");
        assert_eq!(
            diagnostics_header(1).join(","),
            "t,h,status,sample,p_star,ball_radius,u_0,margin_0,margin_1,margin_2,margin_3,gronwall_term"
        );
    }
}
