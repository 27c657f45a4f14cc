//! On-disk formats: JSON sequence files and the results CSV.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::star::{NodeId, Request, RequestSequence};

/// `{"n": .., "initial_center": .., "requests": [[u, v], ..], "meta": {..}}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    pub n: usize,
    pub initial_center: usize,
    pub requests: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub meta: Map<String, Value>,
}

impl SequenceFile {
    pub fn from_sequence(seq: &RequestSequence) -> Self {
        SequenceFile {
            n: seq.n,
            initial_center: seq.initial_center.0,
            requests: seq.requests.iter().map(|r| [r.u.0, r.v.0]).collect(),
            meta: Map::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    /// Validates node ids and self-loops.
    pub fn to_sequence(&self) -> Result<RequestSequence> {
        let requests = self.requests.iter().map(|&[u, v]| Request::new(u, v)).collect();
        RequestSequence::new(self.n, NodeId(self.initial_center), requests)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: SequenceFile = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        file.to_sequence()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("sequence file serializes");
        s.push('\n');
        s
    }
}

pub const RESULTS_HEADER: [&str; 11] = [
    "seq_id",
    "policy",
    "seed",
    "cost_mean",
    "cost_stderr",
    "opt_cost",
    "off_cost",
    "ratio_vs_opt",
    "ratio_vs_off",
    "blocks",
    "violations",
];

/// One line of the results CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultsRow {
    pub seq_id: String,
    pub policy: String,
    pub seed: Option<u64>,
    pub cost_mean: f64,
    pub cost_stderr: f64,
    pub opt_cost: Option<u64>,
    pub off_cost: Option<u64>,
    pub ratio_vs_opt: Option<f64>,
    pub ratio_vs_off: Option<f64>,
    /// Block decomposition in compact `εxγ;..` form.
    pub blocks: String,
    pub violations: usize,
}

fn float_string(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn opt_string<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultsRow {
    /// `f64` fields use Rust's shortest round-trip formatting, NaN is left
    /// empty, and a ratio over a zero optimum is written as `undefined`.
    pub fn record(&self) -> [String; 11] {
        let ratio_opt = match (self.ratio_vs_opt, self.opt_cost) {
            (None, Some(0)) => "undefined".to_string(),
            (r, _) => opt_string(r),
        };
        let ratio_off = match (self.ratio_vs_off, self.off_cost) {
            (None, Some(0)) => "undefined".to_string(),
            (r, _) => opt_string(r),
        };
        [
            self.seq_id.clone(),
            self.policy.clone(),
            opt_string(self.seed),
            float_string(self.cost_mean),
            float_string(self.cost_stderr),
            opt_string(self.opt_cost),
            opt_string(self.off_cost),
            ratio_opt,
            ratio_off,
            self.blocks.clone(),
            self.violations.to_string(),
        ]
    }
}

pub fn write_results<W: Write>(out: W, rows: &[ResultsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::Malformed(format!("csv: {e}"));
    w.write_record(RESULTS_HEADER).map_err(io_err)?;
    for row in rows {
        w.write_record(row.record()).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Malformed(format!("csv: {e}")))?;
    Ok(())
}

pub fn results_to_string(rows: &[ResultsRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_results(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Malformed(e.to_string()))
}
