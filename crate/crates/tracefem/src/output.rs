//! `results.csv` and `results.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use tracefem_core::study::{LevelOutcome, StudyRecord};

use crate::config::RunConfig;
use crate::CliError;

pub const CSV_HEADER: [&str; 13] = [
    "level",
    "h",
    "ndof_u",
    "ndof_lambda",
    "err_energy",
    "err_M",
    "err_L2",
    "err_L2_tan",
    "err_H1",
    "eoc_energy",
    "eoc_M",
    "iters",
    "seconds",
];

pub const SCHEMA_VERSION: u32 = 1;

fn sci(v: f64) -> String {
    format!("{v:.9e}")
}

fn opt(v: Option<f64>, f: fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn order(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "NaN".into()
    }
}

/// Writes rows as the levels finish.
pub struct CsvSink {
    w: csv::Writer<BufWriter<File>>,
    deterministic: bool,
}

impl CsvSink {
    pub fn create(path: &Path, deterministic: bool) -> Result<Self, CliError> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(CSV_HEADER)?;
        w.flush()?;
        Ok(CsvSink { w, deterministic })
    }

    pub fn push(&mut self, r: &StudyRecord) -> Result<(), CliError> {
        let seconds = if self.deterministic { 0.0 } else { r.seconds };
        self.w.write_record([
            r.level.to_string(),
            format!("{}", r.h),
            (3 * r.ndof_u).to_string(),
            r.ndof_lambda.to_string(),
            sci(r.errors.energy),
            opt(r.errors.m, sci),
            sci(r.errors.l2),
            sci(r.errors.l2_tan),
            sci(r.errors.h1),
            opt(r.eoc_energy, order),
            opt(r.eoc_m, order),
            r.solve.iterations.to_string(),
            format!("{seconds:.3}"),
        ])?;
        self.w.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct JsonErrors {
    energy: f64,
    energy_terms: JsonTerms,
    m: Option<f64>,
    l2: f64,
    l2_tan: f64,
    h1: f64,
}

#[derive(Serialize)]
struct JsonTerms {
    a: f64,
    s: f64,
    k: f64,
}

#[derive(Serialize)]
struct JsonSolve {
    iterations: usize,
    relative_residual: f64,
    converged: bool,
    seconds: f64,
    pinned: usize,
}

#[derive(Serialize)]
struct JsonRecord {
    level: u32,
    h: f64,
    ndof_u: usize,
    ndof_lambda: usize,
    errors: JsonErrors,
    eoc_energy: Option<f64>,
    eoc_m: Option<f64>,
    solve: JsonSolve,
    seconds: f64,
}

#[derive(Serialize)]
struct JsonFailure {
    level: u32,
    stage: &'static str,
    error: String,
}

#[derive(Serialize)]
struct JsonResults<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    records: Vec<JsonRecord>,
    failures: Vec<JsonFailure>,
}

pub fn write_json(path: &Path, config: &RunConfig, outcomes: &[LevelOutcome], deterministic: bool) -> Result<(), CliError> {
    let t = |s: f64| if deterministic { 0.0 } else { s };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            LevelOutcome::Done(r) => records.push(JsonRecord {
                level: r.level,
                h: r.h,
                ndof_u: 3 * r.ndof_u,
                ndof_lambda: r.ndof_lambda,
                errors: JsonErrors {
                    energy: r.errors.energy,
                    energy_terms: JsonTerms { a: r.errors.terms[0], s: r.errors.terms[1], k: r.errors.terms[2] },
                    m: r.errors.m,
                    l2: r.errors.l2,
                    l2_tan: r.errors.l2_tan,
                    h1: r.errors.h1,
                },
                eoc_energy: r.eoc_energy,
                eoc_m: r.eoc_m,
                solve: JsonSolve {
                    iterations: r.solve.iterations,
                    relative_residual: r.solve.relative_residual,
                    converged: r.solve.converged,
                    seconds: t(r.solve.seconds),
                    pinned: r.solve.pinned,
                },
                seconds: t(r.seconds),
            }),
            LevelOutcome::Failed(f) => failures.push(JsonFailure { level: f.level, stage: f.stage.name(), error: f.error.to_string() }),
        }
    }
    let doc = JsonResults { schema_version: SCHEMA_VERSION, config, records, failures };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
