//! Study reports: per-size metric tables, verdicts and provenance.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::field::csv_err;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Comparison {
    fn holds(self, observed: f64, threshold: f64) -> bool {
        match self {
            Comparison::AtMost => observed <= threshold,
            Comparison::Below => observed < threshold,
            Comparison::AtLeast => observed >= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::AtMost => "<=",
            Comparison::Below => "<",
            Comparison::AtLeast => ">=",
        }
    }
}

/// One pass/fail line tied to an acceptance criterion id such as `AC4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    pub check: String,
    pub observed: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn compare(
        criterion: &str,
        check: impl Into<String>,
        observed: f64,
        cmp: Comparison,
        threshold: f64,
    ) -> Self {
        Verdict {
            criterion: criterion.into(),
            check: check.into(),
            observed,
            comparison: cmp,
            threshold,
            pass: cmp.holds(observed, threshold),
        }
    }

    /// A yes/no check, recorded as observed 1 or 0 against threshold 1.
    pub fn flag(criterion: &str, check: impl Into<String>, ok: bool) -> Self {
        Verdict {
            criterion: criterion.into(),
            check: check.into(),
            observed: if ok { 1.0 } else { 0.0 },
            comparison: Comparison::AtLeast,
            threshold: 1.0,
            pass: ok,
        }
    }
}

/// Rows keyed by lattice size.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl MetricTable {
    pub fn new(columns: &[&str]) -> Self {
        MetricTable {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .expect("known column");
        self.rows.iter().map(|r| r[i]).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            out.serialize(r).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub code_version: String,
}

impl Provenance {
    pub fn new(config_json: &str, seed: u64) -> Self {
        let digest = Sha256::digest(config_json.as_bytes());
        Provenance {
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema: u32,
    pub study: String,
    pub provenance: Provenance,
    pub metrics: MetricTable,
    /// Scalars that are not per-size, e.g. calibrated constants.
    pub values: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
}

impl StudyReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Verdicts grouped by criterion id.
    pub fn by_criterion(&self) -> BTreeMap<String, Vec<&Verdict>> {
        let mut out: BTreeMap<String, Vec<&Verdict>> = BTreeMap::new();
        for v in &self.verdicts {
            out.entry(v.criterion.clone()).or_default().push(v);
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
