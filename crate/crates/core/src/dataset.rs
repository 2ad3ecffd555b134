//! Recorded side-information triples `(x_start, u_held, x_end)` and their index.

use std::io::{Read, Write};

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;

use crate::barrier::BarrierSpec;
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::model::SynthesisConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleTriple {
    pub x_start: Vec<f64>,
    pub u_held: Vec<f64>,
    pub x_end: Vec<f64>,
    pub t_start: f64,
    pub t_end: f64,
}

impl SampleTriple {
    pub fn new(x_start: Vec<f64>, u_held: Vec<f64>, x_end: Vec<f64>, t_start: f64, t_end: f64) -> Result<Self> {
        check_dim("x_end", x_start.len(), x_end.len())?;
        if !(t_end > t_start) {
            return Err(Error::NonPositiveDuration { t_start, t_end });
        }
        Ok(Self {
            x_start,
            u_held,
            x_end,
            t_start,
            t_end,
        })
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Non-empty collection of triples with a Euclidean nearest-neighbour index over `x_start`.
pub struct SampleSet {
    triples: Vec<SampleTriple>,
    index: KdTree<f64, usize, Vec<f64>>,
}

impl std::fmt::Debug for SampleSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SampleSet")
            .field("len", &self.triples.len())
            .finish()
    }
}

impl SampleSet {
    pub fn new(triples: Vec<SampleTriple>) -> Result<Self> {
        let first = triples.first().ok_or(Error::EmptyDataset)?;
        let (n, m) = (first.x_start.len(), first.u_held.len());
        let mut index = KdTree::with_capacity(n, 64);
        for (i, t) in triples.iter().enumerate() {
            check_dim("sample x_start", n, t.x_start.len())?;
            check_dim("sample x_end", n, t.x_end.len())?;
            check_dim("sample u_held", m, t.u_held.len())?;
            if t.x_start.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidValue {
                    what: "sample",
                    reason: format!("triple {i} has a non-finite start state"),
                });
            }
            index
                .add(t.x_start.clone(), i)
                .map_err(|e| Error::InvalidValue {
                    what: "sample",
                    reason: format!("triple {i}: {e:?}"),
                })?;
        }
        Ok(Self { triples, index })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[SampleTriple] {
        &self.triples
    }

    pub fn get(&self, i: usize) -> &SampleTriple {
        &self.triples[i]
    }

    pub fn state_dim(&self) -> usize {
        self.triples[0].x_start.len()
    }

    pub fn input_dim(&self) -> usize {
        self.triples[0].u_held.len()
    }

    /// Indices of the `k` triples whose `x_start` is Euclidean-closest to `x`,
    /// nearest first; equal distances are ordered by index.
    pub fn k_nearest(&self, x: &[f64], k: usize) -> Vec<usize> {
        let k = k.min(self.len()).max(1);
        let mut hits: Vec<(f64, usize)> = self
            .index
            .nearest(x, k, &squared_euclidean)
            .unwrap_or_default()
            .into_iter()
            .map(|(d, i)| (d, *i))
            .collect();
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        hits.into_iter().map(|(_, i)| i).collect()
    }

    /// Index of the Euclidean-nearest triple (smallest index among exact ties).
    pub fn nearest(&self, x: &[f64]) -> usize {
        // Pull a few extra so that exact ties beyond the first hit are seen.
        let cands = self.k_nearest(x, 8);
        let d0 = linalg::dist(x, &self.triples[cands[0]].x_start);
        cands
            .into_iter()
            .filter(|&i| linalg::dist(x, &self.triples[i].x_start) <= d0)
            .min()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleDefect {
    UnsafeStart,
    InputOutsideBox,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetReport {
    pub valid: usize,
    pub flagged: Vec<(usize, SampleDefect)>,
}

/// Flags triples with `h(x_start) < 0` or `u_held ∉ U`.
pub fn validate_dataset(samples: &[SampleTriple], barrier: &BarrierSpec, cfg: &SynthesisConfig) -> DatasetReport {
    let mut report = DatasetReport::default();
    for (i, t) in samples.iter().enumerate() {
        let mut ok = true;
        if barrier.h(&t.x_start) < 0.0 {
            report.flagged.push((i, SampleDefect::UnsafeStart));
            ok = false;
        }
        if !cfg.input_box.contains(&t.u_held) {
            report.flagged.push((i, SampleDefect::InputOutsideBox));
            ok = false;
        }
        if ok {
            report.valid += 1;
        }
    }
    report
}

/// Header `t_start,t_end,x_start_0..,u_held_0..,x_end_0..`.
pub fn dataset_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t_start".to_string(), "t_end".to_string()];
    h.extend((0..n).map(|i| format!("x_start_{i}")));
    h.extend((0..m).map(|i| format!("u_held_{i}")));
    h.extend((0..n).map(|i| format!("x_end_{i}")));
    h
}

/// Shortest round-trip form, with an exponent for very small or large magnitudes.
pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_dataset_csv<W: Write>(triples: &[SampleTriple], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let (n, m) = triples
        .first()
        .map_or((0, 0), |t| (t.x_start.len(), t.u_held.len()));
    w.write_record(dataset_header(n, m))?;
    for t in triples {
        let mut row = vec![fmt_num(t.t_start), fmt_num(t.t_end)];
        row.extend(t.x_start.iter().map(|v| fmt_num(*v)));
        row.extend(t.u_held.iter().map(|v| fmt_num(*v)));
        row.extend(t.x_end.iter().map(|v| fmt_num(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Vec<SampleTriple>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let count = |prefix: &str| headers.iter().filter(|h| h.starts_with(prefix)).count();
    let (n, m) = (count("x_start_"), count("u_held_"));
    let expected = dataset_header(n, m);
    if n == 0 || headers.iter().collect::<Vec<_>>() != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Parse(format!(
            "dataset header must be {}",
            expected.join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("dataset row {}: {e}", line + 1)))?;
        out.push(SampleTriple::new(
            vals[2..2 + n].to_vec(),
            vals[2 + n..2 + n + m].to_vec(),
            vals[2 + n + m..].to_vec(),
            vals[0],
            vals[1],
        )?);
    }
    Ok(out)
}
