//! Batch driver for the inequality verifiers: reads JSON case files, runs
//! every (case, test function) pair and writes `report.csv` and
//! `report.json` to the output directory.

pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use lcl_core::inequalities::verify;
use lcl_core::sharpness::{classic_sharpness_sweep, dilation_blowup, sharpness_sweep, DEFAULT_LAMBDAS};
use lcl_core::{Error, InequalityCase, Theorem};
use rayon::prelude::*;

pub use config::{load_cases, CaseSpec, LoadedCase, Overrides};
pub use report::{Report, Row, Status, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, std::io::Error),
    #[error("{file}: {path}: {message}")]
    Config { file: String, path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("writing reports: {0}")]
    Output(String),
}

impl CliError {
    pub(crate) fn config(file: &Path, path: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Config {
            file: file.display().to_string(),
            path: if path.is_empty() { "(root)".to_string() } else { path.to_string() },
            message: msg.to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunManifest {
    pub cases: Vec<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub rel_tol: Option<f64>,
    pub mc_samples: Option<usize>,
    pub jobs: usize,
}

impl RunManifest {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            rel_tol: self.rel_tol,
            mc_samples: self.mc_samples,
        }
    }

    /// All cases from all files, ordered by id.
    fn load(&self) -> Result<Vec<LoadedCase>, CliError> {
        if self.jobs == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        let mut all = Vec::new();
        for path in &self.cases {
            all.extend(load_cases(path)?);
        }
        all.sort_by(|a, b| a.id.cmp(&b.id));
        for w in all.windows(2) {
            if w[0].id == w[1].id {
                return Err(CliError::config(&w[1].source, &w[1].id, "duplicate case id"));
            }
        }
        Ok(all)
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

/// Parameters a sweep can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Parameter {
    Epsilon,
    A,
    B,
    P,
    Q,
    Delta,
    Lambda,
}

impl Parameter {
    pub fn name(&self) -> &'static str {
        match self {
            Parameter::Epsilon => "epsilon",
            Parameter::A => "a",
            Parameter::B => "b",
            Parameter::P => "p",
            Parameter::Q => "q",
            Parameter::Delta => "delta",
            Parameter::Lambda => "lambda",
        }
    }
}

fn evaluate(case_id: &str, case: &InequalityCase) -> Row {
    let mut row = Row::new(case_id, case.f.id(), case.theorem);
    match verify(case) {
        Ok(r) => row.fill(&r),
        Err(Error::Unbalanced { lhs, rhs }) => {
            // No finite constant exists; report the dilation test instead.
            match dilation_blowup(case, &DEFAULT_LAMBDAS) {
                Ok(b) => {
                    row.kind = "necessity".into();
                    row.ratio = b.points.iter().map(|p| p.ratio).fold(f64::NEG_INFINITY, f64::max);
                    row.functional = Some(b.slope);
                    row.status = if b.slope_ok { Status::Pass } else { Status::Fail };
                    row.notes.push(format!(
                        "p(a+1) = {lhs} differs from q(b+1) = {rhs}: no finite constant; \
                         dilation slope {:.6} (forced {:.6})",
                        b.slope, b.expected_slope
                    ));
                }
                Err(e) => row.error(format!("dilation test: {e}")),
            }
        }
        Err(e) => row.error(e.to_string()),
    }
    row
}

fn run_case(case: &LoadedCase, o: &Overrides) -> Result<Vec<Row>, CliError> {
    let built = case.build(o)?;
    Ok(built.iter().map(|c| evaluate(&case.id, c)).collect())
}

/// Runs every case and writes the reports.
pub fn run(manifest: &RunManifest) -> Result<Report, CliError> {
    let cases = manifest.load()?;
    let o = manifest.overrides();
    let rows = manifest.pool()?.install(|| {
        cases
            .par_iter()
            .map(|c| run_case(c, &o))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let report = Report::new("run", manifest.seed, rows.into_iter().flatten().collect());
    report.write(&manifest.out)?;
    Ok(report)
}

fn with_parameter(case: &LoadedCase, param: Parameter, value: f64) -> LoadedCase {
    let mut c = case.clone();
    match param {
        Parameter::Epsilon => c.spec.epsilon = value,
        Parameter::A => c.spec.a = value,
        Parameter::B => c.spec.b = value,
        Parameter::P => c.spec.p = value,
        Parameter::Q => c.spec.q = value,
        Parameter::Delta | Parameter::Lambda => {}
    }
    c.id = format!("{}[{}={value}]", case.id, param.name());
    c
}

fn summary(case_id: &str, theorem: Theorem, param: Parameter, rows: &[Row], values: &[f64]) -> Row {
    let mut s = Row::new(&format!("{case_id}[summary]"), "", theorem);
    s.kind = "summary".into();
    let best = rows
        .iter()
        .zip(values)
        .filter(|(r, _)| r.ratio.is_finite())
        .max_by(|x, y| x.0.ratio.total_cmp(&y.0.ratio));
    if let Some((r, v)) = best {
        s.ratio = r.ratio;
        s.test_function = format!("argmax {}={v}", param.name());
    }
    s.status = if rows.iter().any(|r| r.status == Status::Error) {
        Status::Error
    } else if rows.iter().any(|r| r.status == Status::Fail) {
        Status::Fail
    } else {
        Status::Pass
    };
    s
}

fn sweep_case(case: &LoadedCase, param: Parameter, values: &[f64], o: &Overrides) -> Result<Vec<Row>, CliError> {
    let theorem = case.theorem()?;
    match param {
        Parameter::Delta => delta_rows(case, theorem, values, o),
        Parameter::Lambda => lambda_rows(case, theorem, values, o),
        _ => {
            let mut rows = Vec::new();
            let mut keyed = Vec::new();
            for v in values {
                for r in run_case(&with_parameter(case, param, *v), o)? {
                    keyed.push(*v);
                    rows.push(r);
                }
            }
            let s = summary(&case.id, theorem, param, &rows, &keyed);
            rows.push(s);
            Ok(rows)
        }
    }
}

fn delta_rows(case: &LoadedCase, theorem: Theorem, values: &[f64], o: &Overrides) -> Result<Vec<Row>, CliError> {
    let built = case.build(o)?;
    let base = &built[0];
    let report = match theorem {
        Theorem::ConjugatePowerLCL => sharpness_sweep(base, values),
        Theorem::Levin2_1D | Theorem::Knopp => classic_sharpness_sweep(base.a, base.eps, values, &base.cfg),
        other => {
            return Err(CliError::config(
                &case.source,
                &format!("{}.theorem", case.id),
                format!("a delta sweep needs ConjugatePowerLCL or Levin2_1D, got {}", other.name()),
            ))
        }
    };
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            let mut row = Row::new(&format!("{}[delta]", case.id), "", theorem);
            row.error(e.to_string());
            return Ok(vec![row]);
        }
    };
    let mut rows = Vec::new();
    for (i, d) in report.delta_grid.iter().enumerate() {
        let family = match theorem {
            Theorem::ConjugatePowerLCL => format!("sharpness_delta({}, {}, {}, {d})", base.b, base.eps, base.p),
            _ => format!("classic_delta({}, {}, {d})", base.a, base.eps),
        };
        let mut row = Row::new(&format!("{}[delta={d}]", case.id), &family, theorem);
        row.kind = "sharpness".into();
        row.ratio = report.ratios[i];
        row.lhs = Some(report.lhs[i]);
        row.rhs = Some(report.rhs[i]);
        row.err_budget = Some(report.errs[i]);
        row.upper_const = Some(report.upper_const);
        if theorem == Theorem::ConjugatePowerLCL {
            row.lower_const = Some(report.upper_const * (-1.0 / base.p).exp());
        }
        row.sharpness_target = Some(report.target);
        row.status = if report.ratios[i] <= report.upper_const * (1.0 + report.errs[i]) {
            Status::Pass
        } else {
            Status::Fail
        };
        rows.push(row);
    }
    let mut s = summary(&case.id, theorem, Parameter::Delta, &rows, &report.delta_grid);
    s.upper_const = Some(report.upper_const);
    s.sharpness_target = Some(report.target);
    s.extrapolated_limit = Some(report.extrapolated_limit);
    s.notes.push(format!(
        "extrapolated limit {} vs target {} (relative gap {:.3e})",
        report.extrapolated_limit, report.target, report.rel_gap
    ));
    rows.push(s);
    Ok(rows)
}

fn lambda_rows(case: &LoadedCase, theorem: Theorem, values: &[f64], o: &Overrides) -> Result<Vec<Row>, CliError> {
    let built = case.build(o)?;
    let mut rows = Vec::new();
    for base in &built {
        let fid = base.f.id().to_string();
        let report = match dilation_blowup(base, values) {
            Ok(r) => r,
            Err(e) => {
                let mut row = Row::new(&format!("{}[lambda]", case.id), &fid, theorem);
                row.error(e.to_string());
                rows.push(row);
                continue;
            }
        };
        for p in &report.points {
            let mut row = Row::new(&format!("{}[lambda={}]", case.id, p.lambda), &fid, theorem);
            row.kind = "dilation".into();
            row.ratio = p.ratio;
            row.lhs = Some(p.lhs);
            row.rhs = Some(p.rhs);
            row.status = Status::NoVerdict;
            rows.push(row);
        }
        let lambdas: Vec<f64> = report.points.iter().map(|p| p.lambda).collect();
        let n = report.points.len();
        let mut s = summary(&case.id, theorem, Parameter::Lambda, &rows[rows.len() - n..], &lambdas);
        s.test_function = format!("{fid}; {}", s.test_function);
        s.functional = Some(report.slope);
        s.status = if report.slope_ok { Status::Pass } else { Status::Fail };
        s.notes.push(format!(
            "slope {:.6}, forced by homogeneity {:.6}{}",
            report.slope,
            report.expected_slope,
            if report.dropped.is_empty() {
                String::new()
            } else {
                format!("; dropped lambda {:?}", report.dropped)
            }
        ));
        rows.push(s);
    }
    Ok(rows)
}

/// Expands each case over `values` of one parameter and writes the reports.
pub fn sweep(manifest: &RunManifest, param: Parameter, values: &[f64]) -> Result<Report, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("a sweep needs at least one value".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Usage(format!("sweep value {v} is not finite")));
    }
    let cases = manifest.load()?;
    let o = manifest.overrides();
    let rows = manifest.pool()?.install(|| {
        cases
            .par_iter()
            .map(|c| sweep_case(c, param, values, &o))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let report = Report::new(&format!("sweep {}", param.name()), manifest.seed, rows.into_iter().flatten().collect());
    report.write(&manifest.out)?;
    Ok(report)
}
