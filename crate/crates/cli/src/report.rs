//! Report rows and their CSV / JSON serialisation.

use std::path::Path;

use lcl_core::{Theorem, VerificationReport};
use serde::Serialize;

use crate::CliError;

/// Bumped whenever a CSV column or JSON field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 8] = [
    "case_id",
    "test_function",
    "theorem",
    "ratio",
    "lower_const",
    "upper_const",
    "functional",
    "pass",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Rows that carry data but no verdict of their own.
    NoVerdict,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub case_id: String,
    pub test_function: String,
    pub theorem: String,
    /// `verify`, `necessity`, `sharpness`, `dilation` or `summary`.
    pub kind: String,
    pub ratio: f64,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub lower_const: Option<f64>,
    pub upper_const: Option<f64>,
    pub functional: Option<f64>,
    pub err_budget: Option<f64>,
    pub lhs_rel_err: Option<f64>,
    pub rhs_rel_err: Option<f64>,
    pub normalized: Option<bool>,
    pub sharpness_target: Option<f64>,
    pub extrapolated_limit: Option<f64>,
    pub status: Status,
    pub notes: Vec<String>,
    pub error: Option<String>,
}

impl Row {
    pub fn new(case_id: &str, test_function: &str, theorem: Theorem) -> Self {
        Self {
            case_id: case_id.to_string(),
            test_function: test_function.to_string(),
            theorem: theorem.name().to_string(),
            kind: "verify".into(),
            ratio: f64::NAN,
            lhs: None,
            rhs: None,
            lower_const: None,
            upper_const: None,
            functional: None,
            err_budget: None,
            lhs_rel_err: None,
            rhs_rel_err: None,
            normalized: None,
            sharpness_target: None,
            extrapolated_limit: None,
            status: Status::NoVerdict,
            notes: Vec::new(),
            error: None,
        }
    }

    pub fn fill(&mut self, r: &VerificationReport) {
        self.ratio = r.ratio;
        self.lhs = Some(r.lhs);
        self.rhs = Some(r.rhs);
        self.lower_const = r.lower_const;
        self.upper_const = Some(r.upper_const);
        self.functional = r.functional_value;
        self.err_budget = Some(r.err_budget);
        self.lhs_rel_err = Some(r.lhs_rel_err);
        self.rhs_rel_err = Some(r.rhs_rel_err);
        self.normalized = Some(r.normalized);
        self.sharpness_target = r.sharpness_target;
        self.status = if r.pass { Status::Pass } else { Status::Fail };
        self.notes = r.notes.clone();
    }

    pub fn error(&mut self, msg: String) {
        self.status = Status::Error;
        self.error = Some(msg);
    }

    fn csv_record(&self) -> [String; 8] {
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        let pass = match self.status {
            Status::Pass => "true",
            Status::Fail => "false",
            Status::NoVerdict | Status::Error => "",
        };
        [
            self.case_id.clone(),
            self.test_function.clone(),
            self.theorem.clone(),
            if self.ratio.is_nan() { String::new() } else { fmt_f64(self.ratio) },
            opt(self.lower_const),
            opt(self.upper_const),
            opt(self.functional),
            pass.to_string(),
        ]
    }
}

fn fmt_f64(x: f64) -> String {
    // Shortest representation that round-trips.
    format!("{x:?}")
}

#[derive(Clone, Debug, Serialize)]
pub struct Totals {
    pub rows: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub totals: Totals,
    pub rows: Vec<Row>,
}

impl Report {
    pub fn new(command: &str, seed: u64, rows: Vec<Row>) -> Self {
        let count = |s: Status| rows.iter().filter(|r| r.status == s).count();
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            seed,
            totals: Totals {
                rows: rows.len(),
                passed: count(Status::Pass),
                failed: count(Status::Fail),
                errors: count(Status::Error),
            },
            rows,
        }
    }

    /// 0 when every verdict holds, 2 on a violated inequality, 1 when a
    /// case could not be evaluated.
    pub fn exit_code(&self) -> i32 {
        if self.totals.errors > 0 {
            1
        } else if self.totals.failed > 0 {
            2
        } else {
            0
        }
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let out = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(CSV_HEADER).map_err(out)?;
        for r in &self.rows {
            w.write_record(r.csv_record()).map_err(out)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        for (name, body) in [("report.csv", self.to_csv()?), ("report.json", self.to_json()? + "\n")] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| CliError::Io(path, e))?;
        }
        Ok(())
    }
}
