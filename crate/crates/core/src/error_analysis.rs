//! Sampled scalar error scans and the norm inequalities they imply.
//!
//! The sup errors are sampled, not certified: log-spaced points on
//! `[delta, lambda_max]`, both endpoints and any supplied eigenvalues.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exp_prod::ep_error_budget;
use crate::linalg::{norm, sub};
use crate::operator::{d_norm, oracle_apply_function, Eigenpairs};

/// Relative slack applied to every inequality check.
pub const CHECK_SLACK: f64 = 1e-10;

/// Default number of log-spaced samples per scan.
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarErrorEstimate {
    /// sup |r(lambda) - lambda^{-alpha}|
    pub eps_abs: f64,
    /// sup |r(lambda) - lambda^{-alpha}| lambda^{alpha}
    pub eps_rel: f64,
    /// sup |s(lambda) - alpha log(lambda)| for log-type approximants
    pub eps_log: Option<f64>,
    pub interval: (f64, f64),
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckContext {
    /// `||u~ - u||_D <= eps ||phi||_D` with `D = A^power`.
    Estimate11 {
        power: f64,
    },
    /// `||u~ - u||_{A^alpha} <= eps_rel ||phi||_{A^-alpha}`.
    Estimate13,
    /// `||u~ - u|| <= eps_rel ||phi||_{A^-2alpha}`.
    Estimate14,
    Theorem {
        id: TheoremId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub context: CheckContext,
}

impl BoundCheckReport {
    pub fn new(lhs: f64, rhs: f64, context: CheckContext) -> Self {
        Self {
            lhs,
            rhs,
            satisfied: lhs <= rhs * (1.0 + CHECK_SLACK),
            context,
        }
    }
}

/// Sample set: `n_samples` log-spaced points, both endpoints, and `extra`.
pub fn sample_points(interval: (f64, f64), extra: Option<&[f64]>, n_samples: usize) -> Vec<f64> {
    let (lo, hi) = interval;
    let mut pts = Vec::with_capacity(n_samples + 2 + extra.map_or(0, <[f64]>::len));
    pts.push(lo);
    if hi > lo {
        let (llo, lhi) = (lo.ln(), hi.ln());
        let last = (n_samples - 1) as f64;
        pts.extend((1..n_samples - 1).map(|j| (llo + (lhi - llo) * j as f64 / last).exp()));
        pts.push(hi);
    }
    if let Some(e) = extra {
        pts.extend_from_slice(e);
    }
    pts
}

fn check_interval(interval: (f64, f64), n_samples: usize) -> Result<()> {
    if !(interval.0 > 0.0 && interval.1 >= interval.0) {
        return Err(invalid("interval", "need 0 < delta <= lambda_max"));
    }
    if n_samples < 2 {
        return Err(invalid("n_samples", "need at least 2 samples"));
    }
    Ok(())
}

fn wrap(lambda: f64, e: Error) -> Error {
    match e {
        Error::Evaluation { .. } => e,
        other => Error::Evaluation {
            lambda,
            reason: other.to_string(),
        },
    }
}

/// Sampled sup of the absolute and relative error of `r` against `lambda^{-alpha}`.
pub fn scan_scalar_error<F>(
    evaluator: F,
    alpha: f64,
    interval: (f64, f64),
    eigenvalues: Option<&[f64]>,
    n_samples: usize,
) -> Result<ScalarErrorEstimate>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    check_interval(interval, n_samples)?;
    let pts = sample_points(interval, eigenvalues, n_samples);
    let errs: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|&lam| {
            let r = evaluator(lam).map_err(|e| wrap(lam, e))?;
            if !r.is_finite() {
                return Err(Error::Evaluation {
                    lambda: lam,
                    reason: format!("non-finite value {r}"),
                });
            }
            let exact = lam.powf(-alpha);
            let abs = (r - exact).abs();
            Ok((abs, abs / exact))
        })
        .collect::<Result<_>>()?;
    let (eps_abs, eps_rel) = errs
        .iter()
        .fold((0.0f64, 0.0f64), |(a, r), e| (a.max(e.0), r.max(e.1)));
    Ok(ScalarErrorEstimate {
        eps_abs,
        eps_rel,
        eps_log: None,
        interval,
        samples: pts.len(),
    })
}

/// Sampled sup of `|s(lambda) - alpha log(lambda)|`.
pub fn scan_log_error<F>(
    log_evaluator: F,
    alpha: f64,
    interval: (f64, f64),
    eigenvalues: Option<&[f64]>,
    n_samples: usize,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    check_interval(interval, n_samples)?;
    let pts = sample_points(interval, eigenvalues, n_samples);
    let errs: Vec<f64> = pts
        .par_iter()
        .map(|&lam| {
            let s = log_evaluator(lam).map_err(|e| wrap(lam, e))?;
            Ok((s - alpha * lam.ln()).abs())
        })
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// Absolute-error propagation: `||u~ - u*||_D <= eps_abs ||phi||_D`, `D = A^norm_power`.
pub fn check_estimate_11(
    approx: &[f64],
    eig: &Eigenpairs,
    phi: &[f64],
    alpha: f64,
    eps_abs: f64,
    norm_power: f64,
) -> Result<BoundCheckReport> {
    let exact = oracle_apply_function(eig, -alpha, phi)?;
    let lhs = d_norm(eig, norm_power, &sub(approx, &exact))?;
    let rhs = eps_abs * d_norm(eig, norm_power, phi)?;
    Ok(BoundCheckReport::new(
        lhs,
        rhs,
        CheckContext::Estimate11 { power: norm_power },
    ))
}

/// Relative-error propagation in the `A^alpha` and Euclidean norms from `eps_rel`.
pub fn check_estimates_13_14(
    approx: &[f64],
    eig: &Eigenpairs,
    phi: &[f64],
    alpha: f64,
    eps_rel: f64,
) -> Result<(BoundCheckReport, BoundCheckReport)> {
    let exact = oracle_apply_function(eig, -alpha, phi)?;
    let diff = sub(approx, &exact);
    let r13 = BoundCheckReport::new(
        d_norm(eig, alpha, &diff)?,
        eps_rel * d_norm(eig, -alpha, phi)?,
        CheckContext::Estimate13,
    );
    let r14 = BoundCheckReport::new(
        norm(&diff),
        eps_rel * d_norm(eig, -2.0 * alpha, phi)?,
        CheckContext::Estimate14,
    );
    Ok((r13, r14))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    /// Rational approximant with inexact shifted solves.
    Rational,
    /// Exponential sum evaluated through an approximate evolution problem.
    ExpSum,
    /// Exponential product evaluated through an approximate evolution problem.
    ExpProduct,
}

/// Artifacts of a completed (possibly inexact) run.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremRun {
    pub solution: Vec<f64>,
    pub alpha: f64,
    pub delta: f64,
    /// Absolute scalar error (rational and exponential sums).
    pub eps: Option<f64>,
    /// Log error of the exponent (exponential products).
    pub eps1: Option<f64>,
    /// Inner-solve or time-integration budget.
    pub eps0: Option<f64>,
}

/// Right-hand side of the composite bound for the absolute-error families:
/// `(eps + eps0 (delta^{-alpha} + eps)) ||phi||`.
pub fn absolute_budget(eps: f64, eps0: f64, delta: f64, alpha: f64, phi_norm: f64) -> f64 {
    (eps + eps0 * (delta.powf(-alpha) + eps)) * phi_norm
}

/// Compare the measured error of a run with the bound of the selected theorem.
pub fn check_theorem(
    id: TheoremId,
    run: &TheoremRun,
    eig: &Eigenpairs,
    phi: &[f64],
) -> Result<BoundCheckReport> {
    let eps0 = run.eps0.ok_or(Error::MissingBudget("eps0"))?;
    let exact = oracle_apply_function(eig, -run.alpha, phi)?;
    let lhs = norm(&sub(&run.solution, &exact));
    let rhs = match id {
        TheoremId::Rational | TheoremId::ExpSum => {
            let eps = run.eps.ok_or(Error::MissingBudget("eps"))?;
            absolute_budget(eps, eps0, run.delta, run.alpha, norm(phi))
        }
        TheoremId::ExpProduct => {
            let eps1 = run.eps1.ok_or(Error::MissingBudget("eps1"))?;
            let f_minus2 = d_norm(eig, -2.0 * run.alpha, phi)?;
            ep_error_budget(eps1, eps0, (norm(phi), f_minus2))
        }
    };
    Ok(BoundCheckReport::new(
        lhs,
        rhs,
        CheckContext::Theorem { id },
    ))
}
