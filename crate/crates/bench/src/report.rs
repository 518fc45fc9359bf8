//! Summary tables as CSV or JSON, one record per `(method, α, β, metric)`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiment::{Metric, Summary};

pub const CSV_HEADER: &str = "dataset,method,alpha,beta,metric,mean,std,trials";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub dataset: String,
    pub method: String,
    pub alpha: f64,
    pub beta: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

/// `x` with six significant digits in the style of C's `%g`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let fixed = format!("{x:.*}", (5 - exp) as usize);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn round6(x: f64) -> f64 {
    sig6(x).parse().expect("sig6 output parses")
}

/// Expands summaries into records, numbers already rounded to six
/// significant digits so that every format carries the same values.
pub fn records(dataset: &str, summaries: &[Summary]) -> Vec<ReportRecord> {
    summaries
        .iter()
        .flat_map(|s| {
            Metric::ALL.into_iter().map(move |m| ReportRecord {
                dataset: dataset.to_string(),
                method: s.method.name().to_string(),
                alpha: round6(s.alpha),
                beta: round6(s.beta),
                metric: m.name().to_string(),
                mean: round6(m.of(&s.mean)),
                std: round6(m.of(&s.std)),
                trials: s.trials,
            })
        })
        .collect()
}

pub fn render(records: &[ReportRecord], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
            for r in records {
                let trials = r.trials.to_string();
                let (alpha, beta, mean, std) = (sig6(r.alpha), sig6(r.beta), sig6(r.mean), sig6(r.std));
                w.write_record([&r.dataset, &r.method, &alpha, &beta, &r.metric, &mean, &std, &trials])
                    .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
        }
        Format::Json => {
            let mut out = serde_json::to_string_pretty(records).expect("records serialize");
            out.push('\n');
            out
        }
    }
}

pub fn emit_report(records: &[ReportRecord], format: Format, path: impl AsRef<Path>) -> Result<()> {
    if records.is_empty() {
        return Err(HarnessError::Input("nothing to report".into()));
    }
    let path = path.as_ref();
    fs::write(path, render(records, format)).map_err(|e| HarnessError::io(path, e))
}

pub fn parse_csv_report(text: &str) -> Result<Vec<ReportRecord>> {
    if text.lines().next() != Some(CSV_HEADER) {
        return Err(HarnessError::Parse { line: 1, message: "missing report header".into() });
    }
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| {
            r.map_err(|e: csv::Error| HarnessError::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_csv_report(path: impl AsRef<Path>) -> Result<Vec<ReportRecord>> {
    let path = path.as_ref();
    parse_csv_report(&fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?)
}

pub fn read_json_report(path: impl AsRef<Path>) -> Result<Vec<ReportRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}
