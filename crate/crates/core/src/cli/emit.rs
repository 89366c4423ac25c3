//! CSV and JSON emission of experiment reports.
//!
//! CSV floats use 17 significant digits and the `+inf` / `-inf` / `nan`
//! sentinels; JSON uses shortest round-trip floats and the same sentinels.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{
    ClosedFormReport, CounterexampleReport, LowRankReport, McReport, ProxCheckReport,
    StopCondAudit, SweepEntry,
};
use crate::extreal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    match extreal::label(x) {
        Some(l) => l.to_string(),
        None => format!("{x:.16e}"),
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    extreal::parse_label(s).or_else(|| s.parse().ok())
}

/// A report with a flat tabular view. The JSON view is the serde structure.
pub trait Report: Serialize {
    fn csv_header(&self) -> Vec<&'static str>;
    fn csv_rows(&self) -> Vec<Vec<String>>;
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `report` to `path`, or to stdout when `path` is `-`.
pub fn emit_report<R: Report>(report: &R, path: &Path, format: Format) -> Result<()> {
    if path == Path::new("-") {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        write_report(report, &mut lock, format).map_err(|e| match e {
            Error::Io { source, .. } => io_err(path)(source),
            other => other,
        })?;
        return lock.flush().map_err(io_err(path));
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_report(report, &mut w, format).map_err(|e| match e {
        Error::Io { source, .. } => io_err(path)(source),
        other => other,
    })?;
    w.flush().map_err(io_err(path))
}

pub fn write_report<R: Report, W: Write>(report: &R, w: &mut W, format: Format) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *w, report)
                .map_err(|e| Error::Serialize(e.to_string()))?;
            writeln!(w).map_err(io_err(Path::new("-")))
        }
        Format::Csv => {
            let mut cw = csv::Writer::from_writer(w);
            cw.write_record(report.csv_header())
                .map_err(|e| Error::Serialize(e.to_string()))?;
            for row in report.csv_rows() {
                cw.write_record(&row).map_err(|e| Error::Serialize(e.to_string()))?;
            }
            cw.flush().map_err(io_err(Path::new("-")))
        }
    }
}

pub fn to_string<R: Report>(report: &R, format: Format) -> Result<String> {
    let mut buf = Vec::new();
    write_report(report, &mut buf, format)?;
    String::from_utf8(buf).map_err(|e| Error::Serialize(e.to_string()))
}

fn b(v: bool) -> String {
    v.to_string()
}

impl Report for McReport {
    fn csv_header(&self) -> Vec<&'static str> {
        vec![
            "n",
            "replicate",
            "theta_hat",
            "theta_init",
            "theta_ose",
            "ose_deviation",
            "init_deviation",
            "locally_convex",
            "scaling_mismatch",
        ]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.records
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.replicate.to_string(),
                    fmt_f64(r.theta_hat),
                    fmt_f64(r.theta_init),
                    fmt_f64(r.theta_ose),
                    fmt_f64(r.ose_deviation),
                    fmt_f64(r.init_deviation),
                    b(r.locally_convex),
                    fmt_f64(r.scaling_mismatch),
                ]
            })
            .collect()
    }
}

/// Closed-form value plus Monte Carlo runs at one or more sample sizes.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct CounterexampleBatch {
    pub closed_form: ClosedFormReport,
    pub runs: Vec<CounterexampleReport>,
}

impl Report for CounterexampleBatch {
    fn csv_header(&self) -> Vec<&'static str> {
        vec![
            "mode",
            "n",
            "replicate",
            "scaled_error_1",
            "scaled_error_2",
            "exceeds",
            "alpha",
        ]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.runs
            .iter()
            .flat_map(|run| {
                let mode = serde_json::to_value(run.mode)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                run.records.iter().map(move |r| {
                    vec![
                        mode.clone(),
                        run.n.to_string(),
                        r.replicate.to_string(),
                        fmt_f64(r.scaled_error_1),
                        fmt_f64(r.scaled_error_2),
                        b(r.exceeds),
                        fmt_f64(r.alpha),
                    ]
                })
            })
            .collect()
    }
}

/// Outcome of a penalty sweep.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct LowRankBatch {
    pub node_count: usize,
    #[serde(with = "crate::extreal")]
    pub lambda_zero_solution: f64,
    pub entries: Vec<SweepEntry>,
}

impl LowRankBatch {
    pub fn reports(&self) -> impl Iterator<Item = &LowRankReport> {
        self.entries.iter().filter_map(|e| e.report.as_ref())
    }
}

impl Report for LowRankBatch {
    fn csv_header(&self) -> Vec<&'static str> {
        vec![
            "lambda",
            "iteration",
            "objective",
            "final_rank",
            "stopping_threshold",
            "error",
        ]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for e in &self.entries {
            match &e.report {
                Some(r) => {
                    for (k, v) in r.objective_trajectory.iter().enumerate() {
                        rows.push(vec![
                            fmt_f64(e.lambda),
                            k.to_string(),
                            fmt_f64(*v),
                            r.final_rank.to_string(),
                            fmt_f64(r.stopping_threshold),
                            String::new(),
                        ]);
                    }
                }
                None => rows.push(vec![
                    fmt_f64(e.lambda),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.error.clone().unwrap_or_default(),
                ]),
            }
        }
        rows
    }
}

impl Report for StopCondAudit {
    fn csv_header(&self) -> Vec<&'static str> {
        vec![
            "instance",
            "dim",
            "m",
            "big_m",
            "l",
            "step",
            "distance",
            "kappa_min",
            "kappa_max",
            "holds",
            "holds_with_kappa_max",
            "margin",
        ]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.records
            .iter()
            .map(|r| {
                vec![
                    r.instance.to_string(),
                    r.dim.to_string(),
                    fmt_f64(r.m),
                    fmt_f64(r.big_m),
                    fmt_f64(r.l),
                    fmt_f64(r.step),
                    fmt_f64(r.distance),
                    fmt_f64(r.kappa_min),
                    fmt_f64(r.kappa_max),
                    b(r.holds),
                    b(r.holds_with_kappa_max),
                    fmt_f64(r.margin),
                ]
            })
            .collect()
    }
}

impl Report for ProxCheckReport {
    fn csv_header(&self) -> Vec<&'static str> {
        vec!["kind", "trial", "lhs", "rhs", "ok"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.records
            .iter()
            .map(|r| {
                let kind = serde_json::to_value(r.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                vec![
                    kind,
                    r.trial.to_string(),
                    fmt_f64(r.lhs),
                    fmt_f64(r.rhs),
                    b(r.ok),
                ]
            })
            .collect()
    }
}
