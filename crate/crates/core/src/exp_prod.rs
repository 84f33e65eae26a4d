//! Exponential-product approximants `exp(-s(A))`, where
//! `s(lambda) = a0 + sum_i (a_i + b_i lambda) / (c_i + d_i lambda)` is a
//! quadrature of the integral representation of `alpha log(lambda)` about
//! `delta`.
//!
//! Application integrates `(c_i I + d_i A) w' + (a_i I + b_i A) w = 0` over
//! one unit of time per term, chaining end states. The terms commute, so the
//! result is `exp(-s(A)) phi` up to time-stepping error.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::error_analysis::{
    scan_log_error, scan_scalar_error, ScalarErrorEstimate, DEFAULT_SAMPLES,
};
use crate::linalg::{norm, scaled, sub};
use crate::operator::{check_alpha_unit, AffineFactor, SpdOperator};
use crate::quadrature::{gauss_legendre, midpoint_unit, QuadratureRule};
use crate::stepping::{affine_step, check_tau, TimeScheme};
use crate::sum_approx::{Budget, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogRule {
    #[default]
    GaussLegendre,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpTerm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpApproximant {
    pub alpha: f64,
    pub delta: f64,
    pub a0: f64,
    pub terms: Vec<EpTerm>,
}

/// Quadrature of `alpha log(lambda) = alpha log(delta) + alpha int_0^1
/// (lambda - delta) / (theta (lambda - delta) + delta) d theta`.
pub fn richter_log_coeffs(
    alpha: f64,
    delta: f64,
    m: usize,
    rule: LogRule,
) -> Result<EpApproximant> {
    check_alpha_unit(alpha)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", "must be positive"));
    }
    if m == 0 {
        return Err(invalid("m", "need at least one node"));
    }
    let q: QuadratureRule = match rule {
        LogRule::GaussLegendre => gauss_legendre(m)?.to_unit_interval(),
        LogRule::Midpoint => midpoint_unit(m)?,
    };
    let terms = q
        .nodes
        .iter()
        .zip(&q.weights)
        .map(|(&th, &w)| {
            let b = alpha * w;
            // written as -(b * delta) so that a + b * delta vanishes exactly
            EpTerm {
                a: -(b * delta),
                b,
                c: delta * (1.0 - th),
                d: th,
            }
        })
        .collect();
    Ok(EpApproximant {
        alpha,
        delta,
        a0: alpha * delta.ln(),
        terms,
    })
}

impl EpApproximant {
    /// `s(lambda)`; fails where a denominator `c_i + d_i lambda` is not positive.
    pub fn log_eval(&self, lambda: f64) -> Result<f64> {
        let mut s = self.a0;
        for (i, t) in self.terms.iter().enumerate() {
            let den = t.c + t.d * lambda;
            if !(den > 0.0) {
                return Err(Error::InvalidApproximant(format!(
                    "term {i}: c + d lambda = {den:e} at lambda = {lambda}"
                )));
            }
            s += (t.a + t.b * lambda) / den;
        }
        Ok(s)
    }

    /// Operator-level positivity at the ends of `[delta, lambda_max]`; the
    /// expressions are affine in `lambda`, so the endpoints suffice.
    pub fn check_positivity(&self, lambda_max: f64) -> Result<()> {
        for (i, t) in self.terms.iter().enumerate() {
            for lam in [self.delta, lambda_max] {
                let num = t.a + t.b * lam;
                let den = t.c + t.d * lam;
                if !(den > 0.0) || num < -1e-12 * (t.a.abs() + t.b.abs() * lam) {
                    return Err(Error::InvalidApproximant(format!(
                        "term {i} at lambda = {lam}: numerator {num:e}, denominator {den:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// `exp(-s(lambda))`
pub fn ep_scalar_eval(appr: &EpApproximant, lambda: f64) -> Result<f64> {
    Ok((-appr.log_eval(lambda)?).exp())
}

/// Sampled errors: `eps_log` is `sup |s - alpha log|`, the others refer to
/// `exp(-s)` against `lambda^{-alpha}`.
pub fn ep_error_estimate(
    appr: &EpApproximant,
    interval: (f64, f64),
    eigenvalues: Option<&[f64]>,
    n_samples: usize,
) -> Result<ScalarErrorEstimate> {
    let mut est = scan_scalar_error(
        |l| ep_scalar_eval(appr, l),
        appr.alpha,
        interval,
        eigenvalues,
        n_samples,
    )?;
    est.eps_log = Some(scan_log_error(
        |l| appr.log_eval(l),
        appr.alpha,
        interval,
        eigenvalues,
        n_samples,
    )?);
    Ok(est)
}

/// `eps0 ||phi|| + (e^{eps1} - 1) ||phi||_{A^{-2 alpha}}`
pub fn ep_error_budget(eps1: f64, eps0: f64, phi_norms: (f64, f64)) -> f64 {
    eps0 * phi_norms.0 + eps1.exp_m1() * phi_norms.1
}

/// State of the single evolution equation with piecewise constant
/// coefficients on `(0, m]`; segment `i` (1-based) is active on `(i-1, i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub w: Vec<f64>,
    pub t: f64,
    pub segment: usize,
}

fn steps_per_segment(tau: f64) -> Result<usize> {
    check_tau(tau)?;
    if tau > 1.0 {
        return Err(invalid("tau", "must not exceed 1"));
    }
    let n = (1.0 / tau).round();
    if (n * tau - 1.0).abs() > 1e-12 {
        return Err(invalid(
            "tau",
            format!("1/tau = {} is not an integer", 1.0 / tau),
        ));
    }
    Ok(n as usize)
}

/// Factored left operator and right coefficients of one segment.
struct SegmentKernel {
    lhs: AffineFactor,
    pr: f64,
    qr: f64,
}

fn segment_kernel(
    op: &SpdOperator,
    t: &EpTerm,
    tau: f64,
    sigma: f64,
    segment: usize,
) -> Result<SegmentKernel> {
    let lhs = op
        .factor_affine(t.c + sigma * tau * t.a, t.d + sigma * tau * t.b)
        .map_err(|e| Error::StepSolve {
            segment,
            step: 0,
            reason: e.to_string(),
        })?;
    Ok(SegmentKernel {
        lhs,
        pr: t.c - (1.0 - sigma) * tau * t.a,
        qr: t.d - (1.0 - sigma) * tau * t.b,
    })
}

fn check_inputs(appr: &EpApproximant, op: &SpdOperator, phi: &[f64]) -> Result<()> {
    if appr.terms.is_empty() {
        return Err(Error::InvalidApproximant("no terms".into()));
    }
    if phi.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: phi.len(),
        });
    }
    appr.check_positivity(op.spectral_upper())
}

/// Term-by-term chain: `w_1(0) = e^{-a0} phi`, `w_{i+1}(0) = w_i(1)`.
fn run_sequence(
    appr: &EpApproximant,
    op: &SpdOperator,
    phi: &[f64],
    tau: f64,
    scheme: TimeScheme,
) -> Result<Vec<f64>> {
    let n_steps = steps_per_segment(tau)?;
    let sigma = scheme.sigma();
    let mut scratch = vec![0.0; op.dim()];
    let mut w = scaled((-appr.a0).exp(), phi);
    for (i, t) in appr.terms.iter().enumerate() {
        let k = segment_kernel(op, t, tau, sigma, i + 1)?;
        for _ in 0..n_steps {
            w = affine_step(op, &k.lhs, k.pr, k.qr, &w, &mut scratch);
        }
    }
    Ok(w)
}

/// One equation on `(0, m]` with coefficients switching at integer times.
fn run_piecewise(
    appr: &EpApproximant,
    op: &SpdOperator,
    phi: &[f64],
    tau: f64,
    scheme: TimeScheme,
) -> Result<Vec<f64>> {
    let n_steps = steps_per_segment(tau)?;
    let sigma = scheme.sigma();
    let total = n_steps * appr.len();
    let mut scratch = vec![0.0; op.dim()];
    let mut state = EvolutionState {
        w: scaled((-appr.a0).exp(), phi),
        t: 0.0,
        segment: 1,
    };
    let mut kernel: Option<SegmentKernel> = None;
    for step in 0..total {
        let segment = step / n_steps + 1;
        if kernel.is_none() || segment != state.segment {
            state.segment = segment;
            kernel = Some(segment_kernel(
                op,
                &appr.terms[segment - 1],
                tau,
                sigma,
                segment,
            )?);
        }
        let k = kernel.as_ref().expect("kernel set above");
        state.w = affine_step(op, &k.lhs, k.pr, k.qr, &state.w, &mut scratch);
        state.t = (step + 1) as f64 * tau;
    }
    Ok(state.w)
}

fn report(
    appr: &EpApproximant,
    op: &SpdOperator,
    phi: &[f64],
    tau: f64,
    scheme: TimeScheme,
    solution: Vec<f64>,
    fine: Vec<f64>,
) -> Result<SolveReport> {
    let pn = norm(phi);
    let eps0 = if pn > 0.0 {
        scheme.richardson_factor() * norm(&sub(&solution, &fine)) / pn
    } else {
        0.0
    };
    let interval = (op.spectral_lower(), op.spectral_upper());
    let eps1 = scan_log_error(
        |l| appr.log_eval(l),
        appr.alpha,
        interval,
        op.known_eigenvalues(),
        DEFAULT_SAMPLES,
    )?;
    Ok(SolveReport {
        solution,
        budget: Budget::LogRelative {
            eps1,
            eps0,
            alpha: appr.alpha,
            delta: op.spectral_lower(),
        },
        work: vec![steps_per_segment(tau)?; appr.len()],
    })
}

/// Sequence of evolution problems, Crank-Nicolson.
pub fn apply_ep_sequence(
    appr: &EpApproximant,
    op: &SpdOperator,
    phi: &[f64],
    tau: f64,
) -> Result<SolveReport> {
    apply_ep_sequence_with(appr, op, phi, tau, TimeScheme::CrankNicolson)
}

/// As [`apply_ep_sequence`]; `eps0` is the Richardson estimate from a run at `tau / 2`.
pub fn apply_ep_sequence_with(
    appr: &EpApproximant,
    op: &SpdOperator,
    phi: &[f64],
    tau: f64,
    scheme: TimeScheme,
) -> Result<SolveReport> {
    check_inputs(appr, op, phi)?;
    let coarse = run_sequence(appr, op, phi, tau, scheme)?;
    let fine = run_sequence(appr, op, phi, 0.5 * tau, scheme)?;
    report(appr, op, phi, tau, scheme, coarse, fine)
}

/// Single piecewise-coefficient evolution problem, Crank-Nicolson.
pub fn apply_ep_piecewise(
    appr: &EpApproximant,
    op: &SpdOperator,
    phi: &[f64],
    tau: f64,
) -> Result<SolveReport> {
    apply_ep_piecewise_with(appr, op, phi, tau, TimeScheme::CrankNicolson)
}

pub fn apply_ep_piecewise_with(
    appr: &EpApproximant,
    op: &SpdOperator,
    phi: &[f64],
    tau: f64,
    scheme: TimeScheme,
) -> Result<SolveReport> {
    check_inputs(appr, op, phi)?;
    let coarse = run_piecewise(appr, op, phi, tau, scheme)?;
    let fine = run_piecewise(appr, op, phi, 0.5 * tau, scheme)?;
    report(appr, op, phi, tau, scheme, coarse, fine)
}
