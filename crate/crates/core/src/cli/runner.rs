//! Sweep execution: one row per `m`, failures isolated per row.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{
    bad, build_operator, build_rhs, oracle_cap, CheckId, ConfigError, Method, MethodParams,
    RunConfig,
};
use crate::cauchy::{
    cauchy_ep_solve_with, cauchy_es_solve, cauchy_kappa_solve, cauchy_rational_solve,
    cauchy_second_order_solve, es_default_terminal, rational_default_terminal,
    second_order_default_terminal, TimeGrid,
};
use crate::error::{Error, Result};
use crate::error_analysis::{
    check_estimate_11, check_estimates_13_14, check_theorem, scan_log_error, scan_scalar_error,
    BoundCheckReport, TheoremId, TheoremRun,
};
use crate::exp_prod::{apply_ep_sequence_with, ep_scalar_eval, richter_log_coeffs, EpApproximant};
use crate::linalg::{norm, sub};
use crate::operator::{
    oracle_apply_function, oracle_apply_map, spectral_oracle_capped, Eigenpairs, SpdOperator,
};
use crate::stepping::TimeScheme;
use crate::sum_approx::{
    apply_es_exact, apply_es_via_ode_with, apply_rational, es_from_graded, es_from_laguerre,
    rational_from_gauss_jacobi, rational_from_kappa, rational_from_log_trapezoid,
    ShiftedSumApproximant,
};

/// Outcome column of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Satisfied,
    Violated,
    /// The method itself failed for this `m`.
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Satisfied => "true",
            Status::Violated => "false",
            Status::Failed => "failed",
        }
    }
}

impl Serialize for Status {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Status::Satisfied => s.serialize_bool(true),
            Status::Violated => s.serialize_bool(false),
            Status::Failed => s.serialize_str("failed"),
        }
    }
}

impl<'de> Deserialize<'de> for Status {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            B(bool),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::B(true) => Ok(Status::Satisfied),
            Raw::B(false) => Ok(Status::Violated),
            Raw::S(s) if s == "failed" => Ok(Status::Failed),
            Raw::S(s) => Err(serde::de::Error::custom(format!("unknown status {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub alpha: f64,
    pub m: usize,
    pub eps_abs: Option<f64>,
    pub eps_rel: Option<f64>,
    pub err_l2: Option<f64>,
    pub bound_rhs: Option<f64>,
    pub satisfied: Option<Status>,
    pub runtime_ms: Option<f64>,
}

/// Parameters after defaults, echoed in the config sidecar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub dim: usize,
    pub delta: f64,
    pub lambda_max: f64,
    pub oracle: bool,
    pub params: MethodParams,
    /// Per-row messages for failed rows, in `m` order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<ResultRow>,
    pub resolved: Resolved,
    /// Every row computed and every requested check satisfied.
    pub all_pass: bool,
}

struct Context<'a> {
    cfg: &'a RunConfig,
    params: MethodParams,
    op: SpdOperator,
    phi: Vec<f64>,
    eig: Option<Eigenpairs>,
}

fn fill_defaults(
    method: Method,
    alpha: f64,
    delta: f64,
    lambda_max: f64,
    p: &MethodParams,
) -> Result<MethodParams> {
    let mut r = p.clone();
    let tol = p.tol.unwrap_or(1e-8);
    match method {
        Method::RaLog => r.eps0 = Some(p.eps0.unwrap_or(0.0)),
        Method::RaJacobi => {
            r.mu = Some(p.mu.unwrap_or((delta * lambda_max).sqrt()));
            r.eps0 = Some(p.eps0.unwrap_or(0.0));
        }
        Method::RaKappa => {
            r.kappa = Some(p.kappa.unwrap_or(2.0));
            r.eps0 = Some(p.eps0.unwrap_or(0.0));
        }
        Method::EsLaguerre => {}
        Method::EsGraded => {
            r.t_max = Some(
                p.t_max
                    .map_or_else(|| es_default_terminal(alpha.min(0.999), delta, 1e-8), Ok)?,
            )
        }
        Method::EsOde => r.scheme = Some(p.scheme.unwrap_or_default()),
        Method::EpRichter => {
            r.tau = Some(p.tau.unwrap_or(1.0 / 64.0));
            r.rule = Some(p.rule.unwrap_or_default());
            r.scheme = Some(p.scheme.unwrap_or_default());
        }
        Method::CauchyRa => {
            r.tol = Some(tol);
            r.terminal = Some(
                p.terminal
                    .map_or_else(|| rational_default_terminal(alpha, tol), Ok)?,
            );
            r.t_first = Some(p.t_first.unwrap_or(1e-2 * delta.powf(1.0 - alpha)));
        }
        Method::CauchyKappa => r.kappa = Some(p.kappa.unwrap_or(2.0)),
        Method::CauchyEs => {
            r.tol = Some(tol);
            r.terminal = Some(
                p.terminal
                    .map_or_else(|| es_default_terminal(alpha, delta, tol), Ok)?,
            );
            r.grading = Some(p.grading.unwrap_or(2.0 / alpha));
            r.shifted = Some(p.shifted.unwrap_or(false));
        }
        Method::CauchyEs2 => {
            r.tol = Some(tol);
            r.terminal = Some(
                p.terminal
                    .map_or_else(|| second_order_default_terminal(alpha, delta, tol), Ok)?,
            );
            r.grading = Some(p.grading.unwrap_or(2.0));
        }
        Method::CauchyEp => r.scheme = Some(p.scheme.unwrap_or_default()),
    }
    Ok(r)
}

/// Node spacing for the log-trapezoid rule when `step` is not given:
/// balances discretization `exp(-2 pi^2 / h)` against truncation
/// `exp(-min(alpha, 1-alpha) K h)` with `K = (m-1)/2` nodes per side.
pub fn auto_log_step(alpha: f64, m: usize) -> f64 {
    let k = ((m.saturating_sub(1)) / 2).max(1) as f64;
    std::f64::consts::PI * (2.0 / (alpha.min(1.0 - alpha) * k)).sqrt()
}

enum Built {
    Sum(ShiftedSumApproximant),
    Ep(EpApproximant),
    Cauchy,
}

/// The method's scalar map `lambda -> r(lambda)`.
fn scalar_map<'a>(
    ctx: &'a Context<'a>,
    built: &'a Built,
    m: usize,
) -> Box<dyn Fn(f64) -> Result<f64> + Sync + 'a> {
    match built {
        Built::Sum(s) => Box::new(move |l| Ok(s.scalar_eval(l))),
        Built::Ep(e) => Box::new(move |l| ep_scalar_eval(e, l)),
        Built::Cauchy => Box::new(move |l| {
            // keep the configured lower bound so shifted schemes see the same shift
            let delta = ctx.op.spectral_lower();
            let op =
                SpdOperator::dense(DMatrix::from_element(1, 1, l), delta.min(l), delta.max(l))?;
            Ok(cauchy_run(ctx, &op, &[1.0], m)?[0])
        }),
    }
}

fn grid(ctx: &Context, m: usize) -> Result<TimeGrid> {
    let p = &ctx.params;
    let t = p.terminal.unwrap_or(1.0);
    match ctx.cfg.method {
        Method::CauchyRa => {
            let first = p.t_first.expect("default filled").min(t / m as f64);
            TimeGrid::geometric_first(first, t, m)
        }
        Method::CauchyEs | Method::CauchyEs2 => {
            TimeGrid::graded(t, m, p.grading.expect("default filled"))
        }
        _ => TimeGrid::uniform(1.0, m),
    }
}

/// Cauchy scheme on an arbitrary operator; the spectral bound is taken
/// from the configured operator so scalar runs share the coefficients.
fn cauchy_run(ctx: &Context, op: &SpdOperator, phi: &[f64], m: usize) -> Result<Vec<f64>> {
    let p = &ctx.params;
    let a = ctx.cfg.alpha;
    let g = grid(ctx, m)?;
    let delta = ctx.op.spectral_lower();
    let r = match ctx.cfg.method {
        Method::CauchyRa => cauchy_rational_solve(op, phi, a, &g)?,
        Method::CauchyKappa => {
            cauchy_kappa_solve(op, phi, a, p.kappa.expect("default filled"), &g)?
        }
        Method::CauchyEs => cauchy_es_solve(op, phi, a, &g, p.shifted == Some(true))?,
        Method::CauchyEs2 => cauchy_second_order_solve(op, phi, a, &g)?,
        Method::CauchyEp => {
            cauchy_ep_solve_with(op, phi, a, delta, &g, p.scheme.unwrap_or_default())?
        }
        _ => unreachable!("not a Cauchy method"),
    };
    Ok(r.solution)
}

struct Evaluated {
    eps_abs: f64,
    eps_rel: f64,
    err_l2: Option<f64>,
    checks: Vec<BoundCheckReport>,
}

fn evaluate(ctx: &Context, m: usize) -> Result<Evaluated> {
    let cfg = ctx.cfg;
    let p = &ctx.params;
    let a = cfg.alpha;
    let op = &ctx.op;
    let phi = &ctx.phi;
    let delta = op.spectral_lower();
    let interval = (delta, op.spectral_upper());

    let (built, solution, run): (Built, Vec<f64>, Option<TheoremRun>) = match cfg.method {
        Method::RaLog | Method::RaJacobi | Method::RaKappa => {
            let appr = match cfg.method {
                Method::RaLog => rational_from_log_trapezoid(
                    a,
                    m,
                    p.step.unwrap_or_else(|| auto_log_step(a, m)),
                )?,
                Method::RaJacobi => {
                    rational_from_gauss_jacobi(a, m, p.mu.expect("default filled"))?
                }
                _ => rational_from_kappa(a, m, p.kappa.expect("default filled"))?,
            };
            let rep = apply_rational(&appr, op, phi, p.eps0.unwrap_or(0.0))?;
            (
                Built::Sum(appr),
                rep.solution.clone(),
                Some(rep.theorem_run()),
            )
        }
        Method::EsLaguerre | Method::EsGraded => {
            let appr = if cfg.method == Method::EsLaguerre {
                es_from_laguerre(a, m, delta)?
            } else {
                es_from_graded(a, m, p.t_max.expect("default filled"))?
            };
            let (solution, run) = match &ctx.eig {
                Some(eig) => {
                    let u = apply_es_exact(&appr, eig, phi)?;
                    let run = TheoremRun {
                        solution: u.clone(),
                        alpha: a,
                        delta,
                        eps: None,
                        eps1: None,
                        eps0: Some(0.0),
                    };
                    (u, Some(run))
                }
                None => {
                    let horizon = appr.terms.iter().map(|t| t.b).fold(0.0, f64::max);
                    let rep = apply_es_via_ode_with(
                        &appr,
                        op,
                        phi,
                        horizon / 1024.0,
                        TimeScheme::CrankNicolson,
                    )?;
                    (rep.solution.clone(), Some(rep.theorem_run()))
                }
            };
            (Built::Sum(appr), solution, run)
        }
        Method::EsOde => {
            let appr = es_from_laguerre(a, m, delta)?;
            let horizon = appr.terms.iter().map(|t| t.b).fold(0.0, f64::max);
            let tau = p.tau.unwrap_or(horizon / 1024.0);
            let rep = apply_es_via_ode_with(&appr, op, phi, tau, p.scheme.unwrap_or_default())?;
            (
                Built::Sum(appr),
                rep.solution.clone(),
                Some(rep.theorem_run()),
            )
        }
        Method::EpRichter => {
            let appr = richter_log_coeffs(a, delta, m, p.rule.unwrap_or_default())?;
            let rep = apply_ep_sequence_with(
                &appr,
                op,
                phi,
                p.tau.expect("default filled"),
                p.scheme.unwrap_or_default(),
            )?;
            (
                Built::Ep(appr),
                rep.solution.clone(),
                Some(rep.theorem_run()),
            )
        }
        _ => (Built::Cauchy, cauchy_run(ctx, op, phi, m)?, None),
    };

    let map = scalar_map(ctx, &built, m);
    let eigenvalues = ctx
        .eig
        .as_ref()
        .map(|e| e.values.as_slice())
        .or(op.known_eigenvalues());
    let est = scan_scalar_error(&map, a, interval, eigenvalues, cfg.samples)?;
    let eps1 = match &built {
        Built::Ep(e) => Some(scan_log_error(
            |l| e.log_eval(l),
            a,
            interval,
            eigenvalues,
            cfg.samples,
        )?),
        _ => None,
    };

    let Some(eig) = &ctx.eig else {
        return Ok(Evaluated {
            eps_abs: est.eps_abs,
            eps_rel: est.eps_rel,
            err_l2: None,
            checks: Vec::new(),
        });
    };
    let exact = oracle_apply_function(eig, -a, phi)?;
    let err_l2 = norm(&sub(&solution, &exact));

    let mut checks = Vec::with_capacity(cfg.checks.len());
    let spectral = if cfg.checks.iter().any(|c| *c != CheckId::Theorem) {
        Some(oracle_apply_map(eig, phi, &map)?)
    } else {
        None
    };
    for c in &cfg.checks {
        let rep = match c {
            CheckId::Estimate11 => check_estimate_11(
                spectral.as_ref().expect("computed"),
                eig,
                phi,
                a,
                est.eps_abs,
                0.0,
            )?,
            CheckId::Estimate11Energy => check_estimate_11(
                spectral.as_ref().expect("computed"),
                eig,
                phi,
                a,
                est.eps_abs,
                a,
            )?,
            CheckId::Estimate13 => {
                check_estimates_13_14(
                    spectral.as_ref().expect("computed"),
                    eig,
                    phi,
                    a,
                    est.eps_rel,
                )?
                .0
            }
            CheckId::Estimate14 => {
                check_estimates_13_14(
                    spectral.as_ref().expect("computed"),
                    eig,
                    phi,
                    a,
                    est.eps_rel,
                )?
                .1
            }
            CheckId::Theorem => {
                let mut run = run.clone().ok_or(Error::MissingBudget("theorem run"))?;
                let id = match cfg.method {
                    Method::EpRichter => {
                        run.eps1 = eps1;
                        TheoremId::ExpProduct
                    }
                    Method::EsLaguerre | Method::EsGraded | Method::EsOde => {
                        run.eps = Some(est.eps_abs);
                        TheoremId::ExpSum
                    }
                    _ => {
                        run.eps = Some(est.eps_abs);
                        TheoremId::Rational
                    }
                };
                check_theorem(id, &run, eig, phi)?
            }
        };
        checks.push(rep);
    }
    Ok(Evaluated {
        eps_abs: est.eps_abs,
        eps_rel: est.eps_rel,
        err_l2: Some(err_l2),
        checks,
    })
}

/// Validate, build the operator and right-hand side, sweep `m_list`.
pub fn run(cfg: &RunConfig) -> std::result::Result<RunOutcome, ConfigError> {
    let params = cfg.validate()?;
    let op = build_operator(&cfg.operator)?;
    let phi = build_rhs(&cfg.rhs, op.dim())?;
    let cap = oracle_cap()?;
    let eig = if op.dim() <= cap {
        Some(spectral_oracle_capped(&op, cap).map_err(|e| bad("operator", e.to_string()))?)
    } else {
        None
    };
    if eig.is_none() && !cfg.checks.is_empty() {
        return Err(bad(
            "checks",
            format!(
                "need the spectral oracle, but dimension {} exceeds the cap {cap}",
                op.dim()
            ),
        ));
    }
    let (delta, lambda_max) = (op.spectral_lower(), op.spectral_upper());
    let params = fill_defaults(cfg.method, cfg.alpha, delta, lambda_max, &params)
        .map_err(|e| bad("method_params", e.to_string()))?;
    let ctx = Context {
        cfg,
        params,
        op,
        phi,
        eig,
    };

    let results: Vec<(ResultRow, Option<String>)> = cfg
        .m_list
        .par_iter()
        .map(|&m| {
            let start = Instant::now();
            let res = evaluate(&ctx, m);
            let ms = cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
            let mut row = ResultRow {
                method: cfg.method.name().into(),
                alpha: cfg.alpha,
                m,
                eps_abs: None,
                eps_rel: None,
                err_l2: None,
                bound_rhs: None,
                satisfied: None,
                runtime_ms: ms,
            };
            match res {
                Ok(ev) => {
                    row.eps_abs = Some(ev.eps_abs);
                    row.eps_rel = Some(ev.eps_rel);
                    row.err_l2 = ev.err_l2;
                    row.bound_rhs = ev.checks.first().map(|c| c.rhs);
                    if !ev.checks.is_empty() {
                        row.satisfied = Some(if ev.checks.iter().all(|c| c.satisfied) {
                            Status::Satisfied
                        } else {
                            Status::Violated
                        });
                    }
                    (row, None)
                }
                Err(e) => {
                    row.satisfied = Some(Status::Failed);
                    (row, Some(format!("m={m}: {e}")))
                }
            }
        })
        .collect();

    let all_pass = results
        .iter()
        .all(|(r, _)| !matches!(r.satisfied, Some(Status::Failed) | Some(Status::Violated)));
    let failures = results.iter().filter_map(|(_, f)| f.clone()).collect();
    Ok(RunOutcome {
        rows: results.into_iter().map(|(r, _)| r).collect(),
        resolved: Resolved {
            dim: ctx.op.dim(),
            delta,
            lambda_max,
            oracle: ctx.eig.is_some(),
            params: ctx.params.clone(),
            failures,
        },
        all_pass,
    })
}

/// Coefficients of the approximant a method uses at size `m`, as JSON.
/// Cauchy methods report the sum their scheme is equivalent to, where one exists.
pub fn coefficients(
    cfg: &RunConfig,
    m: usize,
) -> std::result::Result<serde_json::Value, ConfigError> {
    let params = cfg.validate()?;
    let op = build_operator(&cfg.operator)?;
    let (delta, lambda_max) = (op.spectral_lower(), op.spectral_upper());
    let p = fill_defaults(cfg.method, cfg.alpha, delta, lambda_max, &params)
        .map_err(|e| bad("method_params", e.to_string()))?;
    let a = cfg.alpha;
    let fail = |e: Error| bad("method", e.to_string());
    let value = match cfg.method {
        Method::RaLog => serde_json::to_value(
            rational_from_log_trapezoid(a, m, p.step.unwrap_or_else(|| auto_log_step(a, m)))
                .map_err(fail)?,
        ),
        Method::RaJacobi => serde_json::to_value(
            rational_from_gauss_jacobi(a, m, p.mu.expect("default filled")).map_err(fail)?,
        ),
        Method::RaKappa => serde_json::to_value(
            rational_from_kappa(a, m, p.kappa.expect("default filled")).map_err(fail)?,
        ),
        Method::EsLaguerre | Method::EsOde => {
            serde_json::to_value(es_from_laguerre(a, m, delta).map_err(fail)?)
        }
        Method::EsGraded => serde_json::to_value(
            es_from_graded(a, m, p.t_max.expect("default filled")).map_err(fail)?,
        ),
        Method::EpRichter => serde_json::to_value(
            richter_log_coeffs(a, delta, m, p.rule.unwrap_or_default()).map_err(fail)?,
        ),
        Method::CauchyRa => {
            let t = p.terminal.expect("default filled");
            let g = TimeGrid::geometric_first(
                p.t_first.expect("default filled").min(t / m as f64),
                t,
                m,
            )
            .map_err(fail)?;
            serde_json::to_value(crate::cauchy::rational_identification(a, &g).map_err(fail)?)
        }
        Method::CauchyEs => {
            let g = TimeGrid::graded(
                p.terminal.expect("default filled"),
                m,
                p.grading.expect("default filled"),
            )
            .map_err(fail)?;
            serde_json::to_value(crate::cauchy::es_identification(a, &g).map_err(fail)?)
        }
        other => {
            return Err(bad(
                "method",
                format!("{} has no sum representation", other.name()),
            ))
        }
    };
    Ok(value.expect("plain data serializes"))
}
