//! Trial records, aggregates, and on-disk emission.
//!
//! `trials.csv` holds one row per trial with a fixed header; floats are
//! written with 17 significant digits so parsing them back is bit-exact,
//! which is what makes the stored aggregates recomputable on load.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("summary.json: {0}")]
    Summary(String),

    #[error("aggregate mismatch on load: {0}")]
    AggregateMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A three-valued audit verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    True,
    False,
    /// Statement not in force for this configuration; excluded from
    /// frequency tallies.
    NotApplicable,
}

impl Tri {
    fn as_str(self) -> &'static str {
        match self {
            Tri::True => "true",
            Tri::False => "false",
            Tri::NotApplicable => "na",
        }
    }

    fn parse(s: &str) -> Option<Option<Tri>> {
        match s {
            "" => Some(None),
            "true" => Some(Some(Tri::True)),
            "false" => Some(Some(Tri::False)),
            "na" => Some(Some(Tri::NotApplicable)),
            _ => None,
        }
    }
}

/// One trial's metrics. Fields a suite did not compute stay `None` and
/// serialize as empty cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialRow {
    pub suite: String,
    pub schedule_index: usize,
    pub trial_index: usize,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// Machine-readable reason when the (n, m, k) triple was skipped or a
    /// trial failed; empty otherwise.
    pub skip_reason: String,
    pub disagreement_active: Option<f64>,
    pub disagreement_passive: Option<f64>,
    pub excess_risk_active: Option<f64>,
    pub boundary_mass_bound: Option<f64>,
    pub easy_mass: Option<f64>,
    pub containment_lemma1: Option<Tri>,
    pub containment_lemma9: Option<Tri>,
    pub bv_event_rate: Option<f64>,
    pub nl_event_rate: Option<f64>,
    pub labels_used: Option<u64>,
}

pub const CSV_HEADER: &str = "suite,schedule_index,trial_index,seed,n,m,k,skip_reason,\
disagreement_active,disagreement_passive,excess_risk_active,boundary_mass_bound,easy_mass,\
containment_lemma1,containment_lemma9,bv_event_rate,nl_event_rate,labels_used";

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn fmt_tri(v: Option<Tri>) -> &'static str {
    v.map(Tri::as_str).unwrap_or("")
}

pub fn rows_to_csv(rows: &[TrialRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 160 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.suite,
            r.schedule_index,
            r.trial_index,
            r.seed,
            r.n,
            r.m,
            r.k,
            r.skip_reason,
            fmt_opt(r.disagreement_active),
            fmt_opt(r.disagreement_passive),
            fmt_opt(r.excess_risk_active),
            fmt_opt(r.boundary_mass_bound),
            fmt_opt(r.easy_mass),
            fmt_tri(r.containment_lemma1),
            fmt_tri(r.containment_lemma9),
            fmt_opt(r.bv_event_rate),
            fmt_opt(r.nl_event_rate),
            r.labels_used.map(|v| v.to_string()).unwrap_or_default(),
        );
    }
    out
}

fn parse_opt_f64(field: &str, line: usize, key: &str) -> Result<Option<f64>, RecordError> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|_| RecordError::Csv {
        line,
        message: format!("bad float {field:?} in {key}"),
    })
}

/// Parse `trials.csv` back into rows.
pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialRow>, RecordError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, other)) => {
            return Err(RecordError::Csv {
                line: 1,
                message: format!("unexpected header {other:?}"),
            })
        }
        None => {
            return Err(RecordError::Csv {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 18 {
            return Err(RecordError::Csv {
                line: line_no,
                message: format!("expected 18 fields, got {}", fields.len()),
            });
        }
        let uint = |i: usize, key: &str| -> Result<u64, RecordError> {
            fields[i].parse().map_err(|_| RecordError::Csv {
                line: line_no,
                message: format!("bad integer {:?} in {key}", fields[i]),
            })
        };
        let tri = |i: usize, key: &str| -> Result<Option<Tri>, RecordError> {
            Tri::parse(fields[i]).ok_or_else(|| RecordError::Csv {
                line: line_no,
                message: format!("bad verdict {:?} in {key}", fields[i]),
            })
        };
        rows.push(TrialRow {
            suite: fields[0].to_string(),
            schedule_index: uint(1, "schedule_index")? as usize,
            trial_index: uint(2, "trial_index")? as usize,
            seed: uint(3, "seed")?,
            n: uint(4, "n")? as usize,
            m: uint(5, "m")? as usize,
            k: uint(6, "k")? as usize,
            skip_reason: fields[7].to_string(),
            disagreement_active: parse_opt_f64(fields[8], line_no, "disagreement_active")?,
            disagreement_passive: parse_opt_f64(fields[9], line_no, "disagreement_passive")?,
            excess_risk_active: parse_opt_f64(fields[10], line_no, "excess_risk_active")?,
            boundary_mass_bound: parse_opt_f64(fields[11], line_no, "boundary_mass_bound")?,
            easy_mass: parse_opt_f64(fields[12], line_no, "easy_mass")?,
            containment_lemma1: tri(13, "containment_lemma1")?,
            containment_lemma9: tri(14, "containment_lemma9")?,
            bv_event_rate: parse_opt_f64(fields[15], line_no, "bv_event_rate")?,
            nl_event_rate: parse_opt_f64(fields[16], line_no, "nl_event_rate")?,
            labels_used: if fields[17].is_empty() {
                None
            } else {
                Some(uint(17, "labels_used")?)
            },
        });
    }
    Ok(rows)
}

/// Per-(suite, schedule, metric) summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub suite: String,
    pub schedule_index: usize,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

const NUMERIC_METRICS: &[&str] = &[
    "disagreement_active",
    "disagreement_passive",
    "excess_risk_active",
    "boundary_mass_bound",
    "easy_mass",
    "bv_event_rate",
    "nl_event_rate",
    "labels_used",
    "containment_lemma1_holds",
    "containment_lemma9_holds",
];

fn metric_value(row: &TrialRow, metric: &str) -> Option<f64> {
    match metric {
        "disagreement_active" => row.disagreement_active,
        "disagreement_passive" => row.disagreement_passive,
        "excess_risk_active" => row.excess_risk_active,
        "boundary_mass_bound" => row.boundary_mass_bound,
        "easy_mass" => row.easy_mass,
        "bv_event_rate" => row.bv_event_rate,
        "nl_event_rate" => row.nl_event_rate,
        "labels_used" => row.labels_used.map(|v| v as f64),
        "containment_lemma1_holds" => match row.containment_lemma1 {
            Some(Tri::True) => Some(1.0),
            Some(Tri::False) => Some(0.0),
            _ => None,
        },
        "containment_lemma9_holds" => match row.containment_lemma9 {
            Some(Tri::True) => Some(1.0),
            Some(Tri::False) => Some(0.0),
            _ => None,
        },
        _ => None,
    }
}

/// Aggregate rows deterministically (fold order fixed by row order).
pub fn aggregate_rows(rows: &[TrialRow]) -> Vec<MetricAggregate> {
    let mut groups: Vec<(String, usize)> = rows
        .iter()
        .map(|r| (r.suite.clone(), r.schedule_index))
        .collect();
    groups.sort();
    groups.dedup();
    let mut out = Vec::new();
    for (suite, schedule_index) in groups {
        for metric in NUMERIC_METRICS {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.suite == suite && r.schedule_index == schedule_index)
                .filter_map(|r| metric_value(r, metric))
                .collect();
            if values.is_empty() {
                continue;
            }
            let count = values.len();
            let mean = values.iter().sum::<f64>() / count as f64;
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let median = if count % 2 == 1 {
                sorted[count / 2]
            } else {
                (sorted[count / 2 - 1] + sorted[count / 2]) / 2.0
            };
            let var = if count > 1 {
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64
            } else {
                0.0
            };
            let half = 1.96 * (var / count as f64).sqrt();
            out.push(MetricAggregate {
                suite: suite.clone(),
                schedule_index,
                metric: metric.to_string(),
                count,
                mean,
                median,
                ci_low: mean - half,
                ci_high: mean + half,
            });
        }
    }
    out
}

/// FNV-1a over bytes; used to fingerprint the config text.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Run provenance: enough to reproduce or reject a results directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceBlock {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub threads: usize,
    pub timestamp_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SummaryDoc {
    aggregates: Vec<MetricAggregate>,
}

/// Per-trial rows plus aggregates plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsBundle {
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<MetricAggregate>,
    pub provenance: ProvenanceBlock,
}

impl ResultsBundle {
    pub fn from_rows(rows: Vec<TrialRow>, provenance: ProvenanceBlock) -> Self {
        let aggregates = aggregate_rows(&rows);
        ResultsBundle {
            rows,
            aggregates,
            provenance,
        }
    }

    /// Write `trials.csv`, `summary.json` and `provenance.json`.
    pub fn emit(&self, dir: &Path) -> Result<(), RecordError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("trials.csv"), rows_to_csv(&self.rows))?;
        let summary = SummaryDoc {
            aggregates: self.aggregates.clone(),
        };
        let summary_json = serde_json::to_string_pretty(&summary)
            .map_err(|e| RecordError::Summary(e.to_string()))?;
        fs::write(dir.join("summary.json"), summary_json)?;
        let prov_json = serde_json::to_string_pretty(&self.provenance)
            .map_err(|e| RecordError::Summary(e.to_string()))?;
        fs::write(dir.join("provenance.json"), prov_json)?;
        Ok(())
    }

    /// Load a results directory, recomputing the aggregates from the
    /// per-trial rows and rejecting the bundle if they do not match the
    /// stored ones bit for bit.
    pub fn load(dir: &Path) -> Result<Self, RecordError> {
        let rows = parse_trials_csv(&fs::read_to_string(dir.join("trials.csv"))?)?;
        let summary: SummaryDoc =
            serde_json::from_str(&fs::read_to_string(dir.join("summary.json"))?)
                .map_err(|e| RecordError::Summary(e.to_string()))?;
        let provenance: ProvenanceBlock =
            serde_json::from_str(&fs::read_to_string(dir.join("provenance.json"))?)
                .map_err(|e| RecordError::Summary(e.to_string()))?;
        let recomputed = aggregate_rows(&rows);
        if recomputed != summary.aggregates {
            return Err(RecordError::AggregateMismatch(format!(
                "stored {} aggregates, recomputed {}",
                summary.aggregates.len(),
                recomputed.len()
            )));
        }
        Ok(ResultsBundle {
            rows,
            aggregates: recomputed,
            provenance,
        })
    }
}

/// Parse a summary document (the aggregates array) from JSON text.
pub fn parse_summary_json(text: &str) -> Result<Vec<MetricAggregate>, RecordError> {
    let doc: SummaryDoc =
        serde_json::from_str(text).map_err(|e| RecordError::Summary(e.to_string()))?;
    Ok(doc.aggregates)
}
