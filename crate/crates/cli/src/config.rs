//! Case files: one JSON object, or an array of them.

use std::path::{Path, PathBuf};

use lcl_core::{GroupLaw, GroupSpec, InequalityCase, NormKind, QuadratureConfig, QuasiNorm, Space, TestFunction, Theorem, Weight};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    #[serde(default)]
    pub id: Option<String>,
    pub theorem: String,
    #[serde(default = "one")]
    pub p: f64,
    #[serde(default = "one")]
    pub q: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default)]
    pub group: Option<GroupConfig>,
    #[serde(default)]
    pub norm: Option<NormConfig>,
    #[serde(default)]
    pub weights: Option<WeightsConfig>,
    pub test_function: TestFunctions,
    #[serde(default)]
    pub quadrature: Option<QuadratureConfig>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    /// `abelian`, `heisenberg` or `half_line`.
    pub law: String,
    #[serde(default)]
    pub dilation_exponents: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    pub norm_kind: NormKind,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    #[serde(default)]
    pub u: Option<String>,
    #[serde(default)]
    pub v: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum TestFunctions {
    One(String),
    Many(Vec<String>),
}

impl TestFunctions {
    pub fn ids(&self) -> Vec<String> {
        match self {
            TestFunctions::One(s) => vec![s.clone()],
            TestFunctions::Many(v) => v.clone(),
        }
    }
}

/// A parsed case with its resolved id and source location.
#[derive(Clone, Debug)]
pub struct LoadedCase {
    pub id: String,
    pub source: PathBuf,
    pub spec: CaseSpec,
}

pub fn load_cases(path: &Path) -> Result<Vec<LoadedCase>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::config(path, "", e))?;
    let specs: Vec<CaseSpec> = if value.is_array() {
        serde_path_to_error::deserialize(value).map_err(|e| CliError::config(path, &e.path().to_string(), e.inner()))?
    } else {
        let one: CaseSpec = serde_path_to_error::deserialize(value)
            .map_err(|e| CliError::config(path, &e.path().to_string(), e.inner()))?;
        vec![one]
    };
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("case").to_string();
    let n = specs.len();
    Ok(specs
        .into_iter()
        .enumerate()
        .map(|(i, spec)| LoadedCase {
            id: spec.id.clone().unwrap_or_else(|| if n == 1 { stem.clone() } else { format!("{stem}#{i}") }),
            source: path.to_path_buf(),
            spec,
        })
        .collect())
}

/// Tolerance overrides and the global seed from the command line.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: u64,
    pub rel_tol: Option<f64>,
    pub mc_samples: Option<usize>,
}

impl LoadedCase {
    fn err(&self, field: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::config(&self.source, &format!("{}.{field}", self.id), msg)
    }

    pub fn space(&self) -> Result<Space, CliError> {
        let Some(g) = &self.spec.group else {
            return Ok(Space::HalfLine);
        };
        let law = match g.law.to_ascii_lowercase().as_str() {
            "half_line" | "halfline" => {
                if self.spec.norm.is_some() {
                    return Err(self.err("norm", "the half-line takes no norm"));
                }
                return Ok(Space::HalfLine);
            }
            "abelian" => GroupLaw::Abelian,
            "heisenberg" => GroupLaw::Heisenberg,
            other => return Err(self.err("group.law", format!("unknown group law `{other}`"))),
        };
        let group = GroupSpec::from_law(law, g.dilation_exponents.clone())
            .map_err(|e| self.err("group.dilation_exponents", e))?;
        let kind = match &self.spec.norm {
            Some(n) => n.norm_kind,
            None if law == GroupLaw::Heisenberg => NormKind::Koranyi,
            None if group.dilation_exponents().iter().all(|v| *v == 1.0) => NormKind::EuclideanHomogeneous,
            None => NormKind::AnisotropicLp,
        };
        let norm = QuasiNorm::new(group, kind).map_err(|e| self.err("norm.norm_kind", e))?;
        Ok(Space::group(norm))
    }

    pub fn theorem(&self) -> Result<Theorem, CliError> {
        Theorem::parse(&self.spec.theorem).map_err(|e| self.err("theorem", e))
    }

    pub fn quadrature(&self, o: &Overrides) -> Result<QuadratureConfig, CliError> {
        let mut cfg = self.spec.quadrature.unwrap_or_default();
        if let Some(t) = o.rel_tol {
            cfg.rel_tol = t;
        }
        if let Some(n) = o.mc_samples {
            cfg.mc_samples = n;
        }
        // Every case gets its own stream, so results do not depend on
        // which cases run alongside it.
        cfg.seed = o.seed;
        let cfg = cfg.with_stream(&self.id);
        cfg.validate().map_err(|e| self.err("quadrature", e))?;
        Ok(cfg)
    }

    fn weights(&self, theorem: Theorem) -> Result<(Weight, Weight), CliError> {
        let default = (Weight::BallPower(self.spec.a), Weight::BallPower(self.spec.b));
        let Some(w) = &self.spec.weights else {
            return Ok(default);
        };
        let custom = matches!(
            theorem,
            Theorem::GeneralLCL | Theorem::ConjugateGeneralLCL | Theorem::HardyTwoWeight
        );
        if !custom {
            return Err(self.err(
                "weights",
                format!("{} uses the power weights given by `a` and `b`", theorem.name()),
            ));
        }
        let parse = |field: &str, s: &Option<String>, fallback: Weight| match s {
            Some(s) => Weight::parse(s).map_err(|e| self.err(field, e)),
            None => Ok(fallback),
        };
        Ok((parse("weights.u", &w.u, default.0)?, parse("weights.v", &w.v, default.1)?))
    }

    /// One inequality case per test function, validated.
    pub fn build(&self, o: &Overrides) -> Result<Vec<InequalityCase>, CliError> {
        let theorem = self.theorem()?;
        let space = self.space()?;
        let cfg = self.quadrature(o)?;
        let (u, v) = self.weights(theorem)?;
        let ids = self.spec.test_function.ids();
        ids.iter()
            .enumerate()
            .map(|(i, id)| {
                let f = TestFunction::parse(id, &space).map_err(|e| self.err(&format!("test_function[{i}]"), e))?;
                let case = InequalityCase {
                    theorem,
                    p: self.spec.p,
                    q: self.spec.q,
                    a: self.spec.a,
                    b: self.spec.b,
                    eps: self.spec.epsilon,
                    space: space.clone(),
                    u: u.clone(),
                    v: v.clone(),
                    f,
                    cfg,
                };
                case.validate().map_err(|e| self.err(validation_field(&e.to_string()), e))?;
                Ok(case)
            })
            .collect()
    }
}

/// The field named by a validation message, for the error path.
fn validation_field(msg: &str) -> &'static str {
    if msg.contains("`p`") && msg.contains("`q`") {
        "p/q"
    } else if msg.contains("`p`") {
        "p"
    } else if msg.contains("`q`") {
        "q"
    } else if msg.contains("`epsilon`") {
        "epsilon"
    } else if msg.contains("`group`") {
        "group"
    } else if msg.contains("`a`") {
        "a"
    } else if msg.contains("`b`") {
        "b"
    } else {
        "theorem"
    }
}
