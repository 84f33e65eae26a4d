//! Run configuration: a single JSON document, optionally overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::exp_prod::LogRule;
use crate::operator::SpdOperator;
use crate::stepping::TimeScheme;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub(crate) fn bad(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    Lap1d {
        n: usize,
    },
    Lap2d {
        nx: usize,
        ny: usize,
    },
    Diag {
        values: Vec<f64>,
    },
    /// Dense symmetric matrix: a line holding `K`, then `K * K` numbers.
    File {
        path: PathBuf,
        delta: f64,
        lambda_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RaLog,
    RaJacobi,
    RaKappa,
    EsLaguerre,
    EsGraded,
    EsOde,
    EpRichter,
    CauchyRa,
    CauchyKappa,
    CauchyEs,
    CauchyEs2,
    CauchyEp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::RaLog => "ra-log",
            Method::RaJacobi => "ra-jacobi",
            Method::RaKappa => "ra-kappa",
            Method::EsLaguerre => "es-laguerre",
            Method::EsGraded => "es-graded",
            Method::EsOde => "es-ode",
            Method::EpRichter => "ep-richter",
            Method::CauchyRa => "cauchy-ra",
            Method::CauchyKappa => "cauchy-kappa",
            Method::CauchyEs => "cauchy-es",
            Method::CauchyEs2 => "cauchy-es2",
            Method::CauchyEp => "cauchy-ep",
        }
    }

    /// `method_params` keys accepted by this method.
    pub fn allowed_params(self) -> &'static [&'static str] {
        match self {
            Method::RaLog => &["step", "eps0"],
            Method::RaJacobi => &["mu", "eps0"],
            Method::RaKappa => &["kappa", "eps0"],
            Method::EsLaguerre => &[],
            Method::EsGraded => &["t_max"],
            Method::EsOde => &["tau", "scheme"],
            Method::EpRichter => &["tau", "rule", "scheme"],
            Method::CauchyRa => &["terminal", "t_first", "tol"],
            Method::CauchyKappa => &["kappa"],
            Method::CauchyEs => &["terminal", "grading", "shifted", "tol"],
            Method::CauchyEs2 => &["terminal", "grading", "tol"],
            Method::CauchyEp => &["scheme"],
        }
    }

    pub fn is_cauchy(self) -> bool {
        matches!(
            self,
            Method::CauchyRa
                | Method::CauchyKappa
                | Method::CauchyEs
                | Method::CauchyEs2
                | Method::CauchyEp
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_first: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifted: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<TimeScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<LogRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhsConfig {
    Ones,
    Random { seed: u64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckId {
    /// Euclidean estimate with the absolute error.
    #[serde(rename = "estimate-11")]
    Estimate11,
    /// Same in the `A^alpha` norm.
    #[serde(rename = "estimate-11-energy")]
    Estimate11Energy,
    #[serde(rename = "estimate-13")]
    Estimate13,
    #[serde(rename = "estimate-14")]
    Estimate14,
    /// Composite bound of the method's inexact pipeline.
    Theorem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

fn default_samples() -> usize {
    crate::error_analysis::DEFAULT_SAMPLES
}

fn default_rhs() -> RhsConfig {
    RhsConfig::Ones
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub operator: OperatorConfig,
    pub alpha: f64,
    pub method: Method,
    pub m_list: Vec<usize>,
    #[serde(default)]
    pub method_params: Map<String, Value>,
    #[serde(default = "default_rhs")]
    pub rhs: RhsConfig,
    #[serde(default)]
    pub checks: Vec<CheckId>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Log-spaced samples per scalar scan.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Fill `runtime_ms`; off by default so output is byte-reproducible.
    #[serde(default)]
    pub timing: bool,
}

/// Command-line overrides; each present flag replaces the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<Method>,
    pub alpha: Option<f64>,
    pub m_list: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        Self::from_json_str(&text).map_err(|source| ConfigError::Json {
            path: path.into(),
            source,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.method {
            self.method = m;
        }
        if let Some(a) = o.alpha {
            self.alpha = a;
        }
        if let Some(l) = &o.m_list {
            self.m_list = l.clone();
        }
        if let Some(p) = &o.out {
            self.output.path = Some(p.clone());
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
    }

    /// Field-level validation; returns the typed method parameters.
    pub fn validate(&self) -> Result<MethodParams, ConfigError> {
        let alpha_ok = match self.method {
            Method::EpRichter | Method::EsGraded => self.alpha > 0.0 && self.alpha <= 1.0,
            _ => self.alpha > 0.0 && self.alpha < 1.0,
        };
        if !alpha_ok {
            return Err(bad(
                "alpha",
                format!("{} is out of range for {}", self.alpha, self.method.name()),
            ));
        }
        if self.m_list.is_empty() {
            return Err(bad("m_list", "must not be empty"));
        }
        if self.m_list.contains(&0) {
            return Err(bad("m_list", "entries must be positive"));
        }
        if !self.m_list.windows(2).all(|p| p[0] < p[1]) {
            return Err(bad("m_list", "must be strictly ascending"));
        }
        if self.method == Method::RaLog && self.m_list.iter().any(|m| m % 2 == 0) {
            return Err(bad("m_list", "ra-log needs odd node counts"));
        }
        if self.samples < 2 {
            return Err(bad("samples", "need at least 2"));
        }
        let allowed = self.method.allowed_params();
        for key in self.method_params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(bad(
                    format!("method_params.{key}"),
                    format!(
                        "not accepted by {} (allowed: {})",
                        self.method.name(),
                        allowed.join(", ")
                    ),
                ));
            }
        }
        let params: MethodParams =
            serde_json::from_value(Value::Object(self.method_params.clone()))
                .map_err(|e| bad("method_params", e.to_string()))?;
        let positive = [
            ("kappa", params.kappa),
            ("mu", params.mu),
            ("t_max", params.t_max),
            ("tau", params.tau),
            ("step", params.step),
            ("terminal", params.terminal),
            ("t_first", params.t_first),
            ("tol", params.tol),
            ("grading", params.grading),
        ];
        for (name, v) in positive {
            if let Some(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(bad(format!("method_params.{name}"), "must be positive"));
                }
            }
        }
        if let Some(k) = params.kappa {
            if k <= 1.0 {
                return Err(bad("method_params.kappa", "must exceed 1"));
            }
        }
        if let Some(e) = params.eps0 {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(bad("method_params.eps0", "must be nonnegative"));
            }
        }
        if let Some(g) = params.grading {
            if g < 1.0 {
                return Err(bad("method_params.grading", "must be at least 1"));
            }
        }
        if self.checks.contains(&CheckId::Theorem) && self.method.is_cauchy() {
            return Err(bad(
                "checks",
                format!("theorem check has no budget for {}", self.method.name()),
            ));
        }
        match &self.operator {
            OperatorConfig::Lap1d { n } if *n == 0 => {
                return Err(bad("operator.n", "must be positive"))
            }
            OperatorConfig::Lap2d { nx, ny } if *nx == 0 || *ny == 0 => {
                return Err(bad("operator", "nx and ny must be positive"))
            }
            OperatorConfig::Diag { values } if values.is_empty() => {
                return Err(bad("operator.values", "must not be empty"))
            }
            OperatorConfig::File {
                delta, lambda_max, ..
            } if !(*delta > 0.0 && lambda_max >= delta) => {
                return Err(bad("operator", "need 0 < delta <= lambda_max"))
            }
            _ => {}
        }
        Ok(params)
    }
}

fn read_numbers(path: &Path, field: &str) -> Result<Vec<f64>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.into(),
        source,
    })?;
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| bad(field, format!("{t:?}: {e}")))
        })
        .collect()
}

pub fn build_operator(cfg: &OperatorConfig) -> Result<SpdOperator, ConfigError> {
    let op = match cfg {
        OperatorConfig::Lap1d { n } => SpdOperator::laplacian_1d(*n),
        OperatorConfig::Lap2d { nx, ny } => SpdOperator::laplacian_2d(*nx, *ny),
        OperatorConfig::Diag { values } => SpdOperator::diagonal(values.clone()),
        OperatorConfig::File {
            path,
            delta,
            lambda_max,
        } => {
            let nums = read_numbers(path, "operator.path")?;
            let k = nums
                .first()
                .copied()
                .ok_or_else(|| bad("operator.path", "empty file"))?;
            if !(k >= 1.0 && k.fract() == 0.0) {
                return Err(bad("operator.path", "header must be the dimension K"));
            }
            let k = k as usize;
            if nums.len() != 1 + k * k {
                return Err(bad(
                    "operator.path",
                    format!("expected {} entries, found {}", k * k, nums.len() - 1),
                ));
            }
            let m = nalgebra::DMatrix::from_row_slice(k, k, &nums[1..]);
            SpdOperator::dense(m, *delta, *lambda_max)
        }
    };
    op.map_err(|e| bad("operator", e.to_string()))
}

pub fn build_rhs(cfg: &RhsConfig, dim: usize) -> Result<Vec<f64>, ConfigError> {
    match cfg {
        RhsConfig::Ones => Ok(vec![1.0; dim]),
        RhsConfig::Random { seed } => Ok(crate::rng::Lcg::new(*seed).vector(dim)),
        RhsConfig::File { path } => {
            let v = read_numbers(path, "rhs.path")?;
            if v.len() != dim {
                return Err(bad(
                    "rhs.path",
                    format!("expected {dim} entries, found {}", v.len()),
                ));
            }
            Ok(v)
        }
    }
}

/// Oracle dimension cap, overridable through `FRACSOLVE_ORACLE_CAP`.
pub fn oracle_cap() -> Result<usize, ConfigError> {
    match std::env::var("FRACSOLVE_ORACLE_CAP") {
        Ok(v) => v.trim().parse().map_err(|_| {
            bad(
                "FRACSOLVE_ORACLE_CAP",
                format!("{v:?} is not a nonnegative integer"),
            )
        }),
        Err(_) => Ok(crate::operator::DEFAULT_ORACLE_CAP),
    }
}
