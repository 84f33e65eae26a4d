//! Rational and exponential-sum approximants of `lambda^{-alpha}` and their
//! application to an operator.
//!
//! Rational terms read `a (b I + c A)^{-1}` (`c = 1` unless the term comes
//! from the kappa representation). Exponential terms read
//! `a exp(-b (A - delta I))`; for `delta > 0` the stored `a` already carries
//! the factor `exp(-b delta)`, so no `exp(delta * theta)` is ever formed.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::error_analysis::{
    absolute_budget, scan_scalar_error, ScalarErrorEstimate, TheoremRun, DEFAULT_SAMPLES,
};
use crate::linalg::{axpy, norm, sub};
use crate::operator::{check_alpha, check_alpha_unit, oracle_apply_map, Eigenpairs, SpdOperator};
use crate::quadrature::{
    gauss_jacobi, gauss_laguerre_generalized, gauss_legendre, graded_midpoint, log_trapezoid,
};
use crate::solver::{make_scaled_tolerance_schedule, solve_scaled_shifted};
use crate::stepping::{check_tau, increment_step, TimeScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumKind {
    Rational,
    ExpSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub a: f64,
    pub b: f64,
    /// Operator scale; `None` means 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl Term {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b, c: None }
    }

    pub fn scale(&self) -> f64 {
        self.c.unwrap_or(1.0)
    }
}

/// Which representation and quadrature produced a coefficient set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub representation: String,
    pub quadrature: String,
    pub m: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Provenance {
    fn new(representation: &str, quadrature: &str, m: usize, params: &[(&str, f64)]) -> Self {
        Self {
            representation: representation.into(),
            quadrature: quadrature.into(),
            m,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedSumApproximant {
    pub kind: SumKind,
    pub alpha: f64,
    #[serde(rename = "delta")]
    pub shift_delta: f64,
    pub provenance: Provenance,
    pub terms: Vec<Term>,
}

impl ShiftedSumApproximant {
    pub fn new(
        kind: SumKind,
        alpha: f64,
        shift_delta: f64,
        provenance: Provenance,
        terms: Vec<Term>,
    ) -> Result<Self> {
        let s = Self {
            kind,
            alpha,
            shift_delta,
            provenance,
            terms,
        };
        s.validate()?;
        Ok(s)
    }

    /// Positivity of all coefficients; needed again after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::InvalidApproximant("no terms".into()));
        }
        if !(self.shift_delta >= 0.0) {
            return Err(Error::InvalidApproximant("negative shift".into()));
        }
        if self.kind == SumKind::ExpSum && self.terms.iter().any(|t| t.c.is_some()) {
            return Err(Error::InvalidApproximant("scaled exponential term".into()));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if !(t.a > 0.0 && t.a.is_finite() && t.b >= 0.0 && t.b.is_finite() && t.scale() > 0.0) {
                return Err(Error::InvalidApproximant(format!(
                    "term {i}: a={} b={} c={}",
                    t.a,
                    t.b,
                    t.scale()
                )));
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

    /// The scalar map `r(lambda)`.
    pub fn scalar_eval(&self, lambda: f64) -> f64 {
        match self.kind {
            SumKind::Rational => self
                .terms
                .iter()
                .map(|t| t.a / (t.b + t.scale() * lambda))
                .sum(),
            SumKind::ExpSum => self
                .terms
                .iter()
                .map(|t| t.a * (-t.b * (lambda - self.shift_delta)).exp())
                .sum(),
        }
    }

    /// Sampled sup errors of `r` against `lambda^{-alpha}` on `interval`.
    pub fn error_estimate(
        &self,
        interval: (f64, f64),
        eigenvalues: Option<&[f64]>,
        n_samples: usize,
    ) -> Result<ScalarErrorEstimate> {
        scan_scalar_error(
            |l| Ok(self.scalar_eval(l)),
            self.alpha,
            interval,
            eigenvalues,
            n_samples,
        )
    }
}

fn check_alpha_open(alpha: f64) -> Result<()> {
    check_alpha(alpha)
}

/// Trapezoid rule in `eta = log(theta)` applied to the resolvent integral.
pub fn rational_from_log_trapezoid(
    alpha: f64,
    m: usize,
    step: f64,
) -> Result<ShiftedSumApproximant> {
    check_alpha_open(alpha)?;
    let rule = log_trapezoid(m, step)?;
    let c = (alpha * std::f64::consts::PI).sin() / std::f64::consts::PI;
    let terms = rule
        .nodes
        .iter()
        .map(|&eta| Term::new(c * step * ((1.0 - alpha) * eta).exp(), eta.exp()))
        .collect();
    ShiftedSumApproximant::new(
        SumKind::Rational,
        alpha,
        0.0,
        Provenance::new("balakrishnan-log", "trapezoid", m, &[("step", step)]),
        terms,
    )
}

/// Gauss-Jacobi rule after `theta = mu (1 - eta) / (1 + eta)`.
pub fn rational_from_gauss_jacobi(alpha: f64, m: usize, mu: f64) -> Result<ShiftedSumApproximant> {
    check_alpha_open(alpha)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("mu", "must be positive"));
    }
    let rule = gauss_jacobi(m, alpha)?;
    let pi = std::f64::consts::PI;
    let c = 2.0 * mu.powf(1.0 - alpha) * (pi * alpha).sin() / pi;
    let terms = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&eta, &w)| Term::new(c * w / (1.0 + eta), mu * (1.0 - eta) / (1.0 + eta)))
        .collect();
    ShiftedSumApproximant::new(
        SumKind::Rational,
        alpha,
        0.0,
        Provenance::new("balakrishnan-mobius", "gauss-jacobi", m, &[("mu", mu)]),
        terms,
    )
}

/// Gauss-Legendre on the finite kappa representation; terms keep the
/// operator scale `c_i = (1 - eta_i)^{kappa / alpha}` unnormalized.
pub fn rational_from_kappa(alpha: f64, m: usize, kappa: f64) -> Result<ShiftedSumApproximant> {
    check_alpha_open(alpha)?;
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(invalid("kappa", "must exceed 1"));
    }
    let rule = gauss_legendre(m)?.to_unit_interval();
    let pi = std::f64::consts::PI;
    let c0 = (pi * alpha).sin() / ((1.0 - alpha) * pi);
    let slope = kappa * (1.0 - alpha) / alpha - 1.0;
    let terms = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&eta, &w)| Term {
            a: c0 * w * (1.0 - eta).powf(kappa - 1.0) * (1.0 + slope * eta),
            b: eta.powf(1.0 / (1.0 - alpha)),
            c: Some((1.0 - eta).powf(kappa / alpha)),
        })
        .collect();
    ShiftedSumApproximant::new(
        SumKind::Rational,
        alpha,
        0.0,
        Provenance::new("kappa", "gauss-legendre", m, &[("kappa", kappa)]),
        terms,
    )
}

/// Shifted exponential sum from generalized Gauss-Laguerre; stored weight
/// `w_i / Gamma(alpha)` with the rule for `theta^{alpha-1} e^{-delta theta}`.
pub fn es_from_laguerre(alpha: f64, m: usize, delta: f64) -> Result<ShiftedSumApproximant> {
    check_alpha_open(alpha)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", "must be positive"));
    }
    let rule = gauss_laguerre_generalized(m, alpha, delta)?;
    let g = gamma(alpha);
    let terms = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&th, &w)| Term::new(w / g, th))
        .collect();
    ShiftedSumApproximant::new(
        SumKind::ExpSum,
        alpha,
        delta,
        Provenance::new("gamma-shifted", "gauss-laguerre", m, &[("delta", delta)]),
        terms,
    )
}

/// Unshifted exponential sum from the graded midpoint rule on `(0, t_max)`.
/// `alpha = 1` is accepted (a plain midpoint rule for `1/lambda`).
pub fn es_from_graded(alpha: f64, m: usize, t_max: f64) -> Result<ShiftedSumApproximant> {
    check_alpha_unit(alpha)?;
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(invalid("t_max", "must be positive"));
    }
    let rule = graded_midpoint(m, alpha, t_max)?;
    let g = gamma(alpha);
    let terms = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&th, &w)| Term::new(w * th.powf(alpha - 1.0) / g, th))
        .collect();
    ShiftedSumApproximant::new(
        SumKind::ExpSum,
        alpha,
        0.0,
        Provenance::new("gamma", "graded-midpoint", m, &[("t_max", t_max)]),
        terms,
    )
}

/// Error budget carried by a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Budget {
    /// `(eps + eps0 (delta^{-alpha} + eps)) ||phi||`
    Absolute {
        eps: f64,
        eps0: f64,
        alpha: f64,
        delta: f64,
    },
    /// `eps0 ||phi|| + (e^{eps1} - 1) ||phi||_{A^{-2 alpha}}`
    LogRelative {
        eps1: f64,
        eps0: f64,
        alpha: f64,
        delta: f64,
    },
}

impl Budget {
    /// Bound on `||u~ - u||`, available without the oracle for absolute budgets.
    pub fn absolute_bound(&self, phi_norm: f64) -> Option<f64> {
        match *self {
            Budget::Absolute {
                eps,
                eps0,
                alpha,
                delta,
            } => Some(absolute_budget(eps, eps0, delta, alpha, phi_norm)),
            Budget::LogRelative { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub budget: Budget,
    /// CG iterations per term, or time steps per term / segment.
    pub work: Vec<usize>,
}

impl SolveReport {
    pub fn theorem_run(&self) -> TheoremRun {
        match self.budget {
            Budget::Absolute {
                eps,
                eps0,
                alpha,
                delta,
            } => TheoremRun {
                solution: self.solution.clone(),
                alpha,
                delta,
                eps: Some(eps),
                eps1: None,
                eps0: Some(eps0),
            },
            Budget::LogRelative {
                eps1,
                eps0,
                alpha,
                delta,
            } => TheoremRun {
                solution: self.solution.clone(),
                alpha,
                delta,
                eps: None,
                eps1: Some(eps1),
                eps0: Some(eps0),
            },
        }
    }
}

fn check_rhs(op: &SpdOperator, phi: &[f64]) -> Result<()> {
    if phi.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: phi.len(),
        });
    }
    Ok(())
}

fn operator_interval(op: &SpdOperator) -> (f64, f64) {
    (op.spectral_lower(), op.spectral_upper())
}

/// Sum `sum_i a_i w_i` in term order.
fn ordered_sum(terms: &[Term], parts: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut u = vec![0.0; n];
    for (t, w) in terms.iter().zip(parts) {
        axpy(t.a, w, &mut u);
    }
    u
}

/// Shifted solves for every term; `eps0 = 0` uses direct factorizations,
/// otherwise CG to the scaled schedule `eps_i = eps0 / (b_i + c_i delta)`.
pub(crate) fn rational_parts(
    terms: &[Term],
    op: &SpdOperator,
    phi: &[f64],
    eps0: f64,
) -> Result<Vec<(Vec<f64>, usize)>> {
    let delta = op.spectral_lower();
    let tols = if eps0 > 0.0 {
        let shifts: Vec<f64> = terms.iter().map(|t| t.b).collect();
        let scales: Vec<f64> = terms.iter().map(Term::scale).collect();
        Some(make_scaled_tolerance_schedule(eps0, delta, &shifts, Some(&scales))?.per_shift)
    } else {
        None
    };
    terms
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let res = match &tols {
                None => op.solve_affine(t.b, t.scale(), phi).map(|w| (w, 0)),
                Some(tol) => solve_scaled_shifted(op, t.b, t.scale(), phi, tol[i])
                    .map(|r| (r.solution, r.iterations)),
            };
            res.map_err(|e| Error::TermSolve {
                term: i,
                shift: t.b,
                source: Box::new(e),
            })
        })
        .collect()
}

/// `u~ = sum_i a_i (b_i I + c_i A)^{-1} phi`; the report carries the
/// composite budget with the sampled `eps` on the operator's interval.
pub fn apply_rational(
    appr: &ShiftedSumApproximant,
    op: &SpdOperator,
    phi: &[f64],
    eps0: f64,
) -> Result<SolveReport> {
    if appr.kind != SumKind::Rational {
        return Err(Error::InvalidApproximant(
            "expected a rational approximant".into(),
        ));
    }
    if !(eps0 >= 0.0 && eps0.is_finite()) {
        return Err(invalid("eps0", "must be nonnegative"));
    }
    check_rhs(op, phi)?;
    let parts = rational_parts(&appr.terms, op, phi, eps0)?;
    let (ws, work): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let solution = ordered_sum(&appr.terms, &ws, op.dim());
    let est = appr.error_estimate(
        operator_interval(op),
        op.known_eigenvalues(),
        DEFAULT_SAMPLES,
    )?;
    Ok(SolveReport {
        solution,
        budget: Budget::Absolute {
            eps: est.eps_abs,
            eps0,
            alpha: appr.alpha,
            delta: op.spectral_lower(),
        },
        work,
    })
}

/// Exact spectral evaluation of any sum approximant.
pub fn apply_es_exact(
    appr: &ShiftedSumApproximant,
    eig: &Eigenpairs,
    phi: &[f64],
) -> Result<Vec<f64>> {
    oracle_apply_map(eig, phi, |l| Ok(appr.scalar_eval(l)))
}

/// Samples `w(b_i)` of `dw/dt + (A - delta I) w = 0`, `w(0) = phi`; gaps
/// between consecutive distinct nodes get `ceil(gap / tau) * refine` equal
/// substeps, so every node is hit exactly.
fn es_samples(
    appr: &ShiftedSumApproximant,
    op: &SpdOperator,
    phi: &[f64],
    tau: f64,
    refine: usize,
    scheme: TimeScheme,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let n = op.dim();
    let shift = appr.shift_delta;
    let sigma = scheme.sigma();
    let mut order: Vec<usize> = (0..appr.len()).collect();
    order.sort_by(|&i, &j| appr.terms[i].b.total_cmp(&appr.terms[j].b));

    let mut samples = vec![Vec::new(); appr.len()];
    let mut w = phi.to_vec();
    let mut scratch = vec![0.0; n];
    let mut t = 0.0;
    let mut steps = 0;
    for &i in &order {
        let target = appr.terms[i].b;
        let gap = target - t;
        if gap > 0.0 {
            let k = (gap / tau).ceil().max(1.0) as usize * refine;
            let h = gap / k as f64;
            // increment form (I + sigma h G)(w+ - w) = -h G w, G = A - s I,
            // so a zero generator leaves w unchanged bit for bit
            let lhs = op
                .factor_affine(1.0 - sigma * h * shift, sigma * h)
                .map_err(|e| Error::StepSolve {
                    segment: i,
                    step: steps,
                    reason: e.to_string(),
                })?;
            for _ in 0..k {
                increment_step(op, &lhs, h, shift, &mut w, &mut scratch);
            }
            steps += k;
            t = target;
        }
        samples[i] = w.clone();
    }
    Ok((samples, steps))
}

/// Exponential sum through the evolution equation with Crank-Nicolson.
pub fn apply_es_via_ode(
    appr: &ShiftedSumApproximant,
    op: &SpdOperator,
    phi: &[f64],
    tau: f64,
) -> Result<SolveReport> {
    apply_es_via_ode_with(appr, op, phi, tau, TimeScheme::CrankNicolson)
}

/// As [`apply_es_via_ode`] with a chosen scheme. `eps0` is the Richardson
/// estimate `max_i f ||w_tau(b_i) - w_{tau/2}(b_i)|| / ||phi||` from a
/// companion run with every gap's substep count doubled.
pub fn apply_es_via_ode_with(
    appr: &ShiftedSumApproximant,
    op: &SpdOperator,
    phi: &[f64],
    tau: f64,
    scheme: TimeScheme,
) -> Result<SolveReport> {
    if appr.kind != SumKind::ExpSum {
        return Err(Error::InvalidApproximant(
            "expected an exponential sum".into(),
        ));
    }
    check_tau(tau)?;
    check_rhs(op, phi)?;
    let horizon = appr.terms.iter().map(|t| t.b).fold(0.0, f64::max);
    if horizon > 0.0 && tau > 0.5 * horizon {
        return Err(invalid(
            "tau",
            format!("step {tau} exceeds half the horizon {horizon}"),
        ));
    }
    let (coarse, steps) = es_samples(appr, op, phi, tau, 1, scheme)?;
    let eps0 = if horizon > 0.0 {
        let (fine, _) = es_samples(appr, op, phi, tau, 2, scheme)?;
        let pn = norm(phi);
        let d = coarse
            .iter()
            .zip(&fine)
            .map(|(c, f)| norm(&sub(c, f)))
            .fold(0.0, f64::max);
        if pn > 0.0 {
            scheme.richardson_factor() * d / pn
        } else {
            0.0
        }
    } else {
        0.0
    };
    let solution = ordered_sum(&appr.terms, &coarse, op.dim());
    let est = appr.error_estimate(
        operator_interval(op),
        op.known_eigenvalues(),
        DEFAULT_SAMPLES,
    )?;
    Ok(SolveReport {
        solution,
        budget: Budget::Absolute {
            eps: est.eps_abs,
            eps0,
            alpha: appr.alpha,
            delta: op.spectral_lower(),
        },
        work: vec![steps],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_analysis::{check_estimate_11, check_theorem, TheoremId};
    use crate::operator::{oracle_apply_function, spectral_oracle};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn lap3_interval() -> (f64, f64) {
        let op = SpdOperator::laplacian_1d(3).unwrap();
        (op.spectral_lower(), op.spectral_upper())
    }

    #[test]
    fn log_trapezoid_single_term() {
        let alpha = 0.3;
        let r = rational_from_log_trapezoid(alpha, 1, 0.7).unwrap();
        assert_eq!(r.len(), 1);
        assert_relative_eq!(
            r.terms[0].a,
            (alpha * PI).sin() / PI * 0.7,
            max_relative = 1e-15
        );
        assert_eq!(r.terms[0].b, 1.0);
    }

    #[test]
    fn log_trapezoid_accuracy() {
        // Nodes cover theta in [e^-16, e^16]; the truncated upper tail
        // sin(pi a)/pi * int_T^inf theta^{-a}/(theta + lambda) ~ 2e-4 against
        // lambda^{-1/2} = 1e-2 at lambda = 1e4 caps the relative error near
        // 2e-2. Reference value from an independent NumPy scan.
        let r = rational_from_log_trapezoid(0.5, 129, 0.25).unwrap();
        let est = r.error_estimate((1.0, 1e4), None, DEFAULT_SAMPLES).unwrap();
        assert_relative_eq!(est.eps_rel, 0.020044657276209986, max_relative = 1e-6);
        assert!(r.terms.iter().all(|t| t.a > 0.0 && t.b > 0.0));
    }

    #[test]
    fn gauss_jacobi_one_point_chebyshev() {
        // eta = 0, w = pi: a = 2 sin(pi/2)/pi * pi = 2, b = 1; r(1) = 1 exactly
        let r = rational_from_gauss_jacobi(0.5, 1, 1.0).unwrap();
        assert!(r.terms[0].b == 1.0 || (r.terms[0].b - 1.0).abs() < 1e-15);
        assert_relative_eq!(r.terms[0].a, 2.0, max_relative = 1e-14);
        assert_relative_eq!(r.scalar_eval(1.0), 1.0, max_relative = 1e-14);
        assert!(rational_from_gauss_jacobi(0.5, 4, 0.0).is_err());
    }

    #[test]
    fn gauss_jacobi_accurate_at_mu() {
        let mu: f64 = 7.0;
        let mut prev = f64::INFINITY;
        for m in [2, 4, 8, 16] {
            let r = rational_from_gauss_jacobi(0.5, m, mu).unwrap();
            let e = (r.scalar_eval(mu) * mu.sqrt() - 1.0).abs();
            assert!(e <= prev + 1e-15);
            prev = e;
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn kappa_accuracy_on_laplacian_interval() {
        let r = rational_from_kappa(0.5, 32, 2.0).unwrap();
        assert!(r
            .terms
            .iter()
            .all(|t| t.scale() > 0.0 && t.b >= 0.0 && t.a > 0.0));
        let est = r
            .error_estimate(lap3_interval(), None, DEFAULT_SAMPLES)
            .unwrap();
        assert!(est.eps_rel < 1e-6, "{}", est.eps_rel);
        assert!(rational_from_kappa(0.5, 4, 1.0).is_err());
    }

    #[test]
    fn laguerre_es_exact_at_delta() {
        let r = es_from_laguerre(0.5, 1, 1.0).unwrap();
        assert_relative_eq!(r.terms[0].a, 1.0, max_relative = 1e-14);
        assert_relative_eq!(r.terms[0].b, 0.5, max_relative = 1e-14);
        assert_relative_eq!(r.scalar_eval(1.0), 1.0, max_relative = 1e-14);
        for m in [1, 3, 8, 16] {
            for &(alpha, delta) in &[(0.25, 3.0), (0.5, 9.8), (0.75, 0.5)] {
                let r = es_from_laguerre(alpha, m, delta).unwrap();
                assert_relative_eq!(
                    r.scalar_eval(delta),
                    delta.powf(-alpha),
                    max_relative = 1e-12
                );
            }
        }
        // Far from delta the smallest node ~ 0.02 cannot resolve
        // exp(-theta (lambda - 1)); the relative sup is large (NumPy: 0.90125)
        // while the absolute sup stays near 0.091.
        let r = es_from_laguerre(0.5, 16, 1.0).unwrap();
        let est = r
            .error_estimate((1.0, 100.0), None, DEFAULT_SAMPLES)
            .unwrap();
        assert_relative_eq!(est.eps_rel, 0.901249129528332, max_relative = 1e-6);
        assert_relative_eq!(est.eps_abs, 0.09103534897032736, max_relative = 1e-6);
        let est = r.error_estimate((1.0, 2.0), None, DEFAULT_SAMPLES).unwrap();
        assert!(est.eps_rel < 1e-2, "{}", est.eps_rel);
        assert!(es_from_laguerre(0.5, 4, 0.0).is_err());
    }

    #[test]
    fn graded_es() {
        let r = es_from_graded(1.0, 1, 3.0).unwrap();
        assert_relative_eq!(r.terms[0].a, 3.0, max_relative = 1e-15);
        assert_relative_eq!(r.terms[0].b, 1.5, max_relative = 1e-15);
        assert_relative_eq!(
            r.scalar_eval(2.0),
            3.0 * (-3.0f64).exp(),
            max_relative = 1e-14
        );
        let r = es_from_graded(0.5, 64, 40.0).unwrap();
        let est = r
            .error_estimate((1.0, 100.0), None, DEFAULT_SAMPLES)
            .unwrap();
        assert!(est.eps_abs < 1e-2, "{}", est.eps_abs);
        let total: f64 = r.terms.iter().map(|t| t.a).sum();
        for l in [1e-3, 1.0, 50.0] {
            assert!(r.scalar_eval(l) <= total);
        }
        assert!(es_from_graded(0.5, 4, 0.0).is_err());
    }

    #[test]
    fn scalar_eval_trivial() {
        let p = Provenance::new("test", "none", 1, &[]);
        let r = ShiftedSumApproximant::new(
            SumKind::Rational,
            0.5,
            0.0,
            p.clone(),
            vec![Term::new(1.0, 0.0)],
        )
        .unwrap();
        assert_eq!(r.scalar_eval(2.0), 0.5);
        let e = ShiftedSumApproximant::new(
            SumKind::ExpSum,
            0.5,
            0.0,
            p.clone(),
            vec![Term::new(1.0, 0.0)],
        )
        .unwrap();
        assert_eq!(e.scalar_eval(123.0), 1.0);
        assert!(ShiftedSumApproximant::new(
            SumKind::Rational,
            0.5,
            0.0,
            p.clone(),
            vec![Term::new(-1.0, 0.0)]
        )
        .is_err());
        assert!(ShiftedSumApproximant::new(SumKind::Rational, 0.5, 0.0, p, vec![]).is_err());
    }

    #[test]
    fn apply_rational_single_inverse() {
        let op = SpdOperator::diagonal(vec![4.0]).unwrap();
        let p = Provenance::new("test", "none", 1, &[]);
        let r =
            ShiftedSumApproximant::new(SumKind::Rational, 0.5, 0.0, p, vec![Term::new(1.0, 0.0)])
                .unwrap();
        let rep = apply_rational(&r, &op, &[8.0], 0.0).unwrap();
        assert_eq!(rep.solution, vec![2.0]);
    }

    #[test]
    fn diagonal_equivalence() {
        let vals = vec![1.0, 2.5, 7.0, 30.0];
        let op = SpdOperator::diagonal(vals.clone()).unwrap();
        let appr = [
            rational_from_gauss_jacobi(0.4, 8, 5.0).unwrap(),
            rational_from_kappa(0.4, 8, 2.0).unwrap(),
            rational_from_log_trapezoid(0.4, 31, 0.5).unwrap(),
        ];
        let phi = vec![1.0; 4];
        for r in &appr {
            let u = apply_rational(r, &op, &phi, 0.0).unwrap().solution;
            for (ui, l) in u.iter().zip(&vals) {
                assert_relative_eq!(*ui, r.scalar_eval(*l), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn estimate_11_gauss_jacobi_on_lap3() {
        let lap = SpdOperator::laplacian_1d(3).unwrap();
        let op = SpdOperator::diagonal(lap.known_eigenvalues().unwrap().to_vec()).unwrap();
        let eig = spectral_oracle(&op).unwrap();
        let r =
            rational_from_gauss_jacobi(0.5, 32, (op.spectral_lower() * op.spectral_upper()).sqrt())
                .unwrap();
        let phi = [1.0, -2.0, 0.5];
        let rep = apply_rational(&r, &op, &phi, 0.0).unwrap();
        let Budget::Absolute { eps, .. } = rep.budget else {
            panic!()
        };
        let chk = check_estimate_11(&rep.solution, &eig, &phi, 0.5, eps, 0.0).unwrap();
        assert!(chk.satisfied, "{chk:?}");
        let rep = apply_rational(&r, &op, &phi, 1e-4).unwrap();
        let chk = check_theorem(TheoremId::Rational, &rep.theorem_run(), &eig, &phi).unwrap();
        assert!(chk.satisfied, "{chk:?}");
    }

    #[test]
    fn theorem_1_on_laplacian() {
        let op = SpdOperator::laplacian_1d(15).unwrap();
        let eig = spectral_oracle(&op).unwrap();
        let mu = (op.spectral_lower() * op.spectral_upper()).sqrt();
        let r = rational_from_gauss_jacobi(0.5, 32, mu).unwrap();
        let phi = crate::rng::Lcg::new(3).vector(15);
        let rep = apply_rational(&r, &op, &phi, 1e-4).unwrap();
        assert!(rep.work.iter().all(|&k| k > 0));
        let chk = check_theorem(TheoremId::Rational, &rep.theorem_run(), &eig, &phi).unwrap();
        assert!(chk.satisfied, "{chk:?}");
    }

    #[test]
    fn parallel_sum_is_reproducible() {
        let op = SpdOperator::laplacian_2d(6, 5).unwrap();
        let r = rational_from_kappa(0.6, 24, 2.0).unwrap();
        let phi = crate::rng::Lcg::new(11).vector(30);
        let a = apply_rational(&r, &op, &phi, 1e-6).unwrap().solution;
        let b = apply_rational(&r, &op, &phi, 1e-6).unwrap().solution;
        assert_eq!(a, b);
    }

    #[test]
    fn es_exact_cases() {
        let op = SpdOperator::diagonal(vec![4.0]).unwrap();
        let eig = spectral_oracle(&op).unwrap();
        let p = Provenance::new("test", "none", 1, &[]);
        let one =
            ShiftedSumApproximant::new(SumKind::ExpSum, 0.5, 0.0, p, vec![Term::new(1.0, 0.0)])
                .unwrap();
        assert_eq!(apply_es_exact(&one, &eig, &[3.0]).unwrap(), vec![3.0]);
        let r = es_from_laguerre(0.5, 1, 4.0).unwrap();
        let u = apply_es_exact(&r, &eig, &[3.0]).unwrap();
        assert_relative_eq!(u[0], 1.5, max_relative = 1e-14);

        let lap = SpdOperator::laplacian_1d(15).unwrap();
        let eig = spectral_oracle(&lap).unwrap();
        let phi = vec![1.0; 15];
        let exact = oracle_apply_function(&eig, -0.5, &phi).unwrap();
        let err = |m| {
            let r = es_from_laguerre(0.5, m, lap.spectral_lower()).unwrap();
            norm(&sub(&apply_es_exact(&r, &eig, &phi).unwrap(), &exact))
        };
        assert!(err(32) < err(16));
    }

    #[test]
    fn es_ode_trivial_cases() {
        let p = Provenance::new("test", "none", 1, &[]);
        let op = SpdOperator::laplacian_1d(5).unwrap();
        let one =
            ShiftedSumApproximant::new(SumKind::ExpSum, 0.5, 0.0, p, vec![Term::new(2.0, 0.0)])
                .unwrap();
        let phi = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let rep = apply_es_via_ode(&one, &op, &phi, 0.1).unwrap();
        assert_eq!(rep.solution, vec![2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(rep.work, vec![0]);

        // zero generator: w(t) = phi
        let op = SpdOperator::diagonal(vec![4.0]).unwrap();
        let r = es_from_laguerre(0.5, 6, 4.0).unwrap();
        let rep = apply_es_via_ode(&r, &op, &[3.0], 0.01).unwrap();
        let total: f64 = r.terms.iter().map(|t| t.a).sum();
        assert_relative_eq!(rep.solution[0], 3.0 * total, max_relative = 1e-13);
        let Budget::Absolute { eps0, .. } = rep.budget else {
            panic!()
        };
        assert_eq!(eps0, 0.0);

        let horizon = r.terms.iter().map(|t| t.b).fold(0.0, f64::max);
        assert!(apply_es_via_ode(&r, &op, &[3.0], horizon).is_err());
    }

    #[test]
    fn es_ode_second_order_and_theorem_2() {
        let op = SpdOperator::laplacian_1d(15).unwrap();
        let eig = spectral_oracle(&op).unwrap();
        let r = es_from_laguerre(0.5, 8, op.spectral_lower()).unwrap();
        let phi = vec![1.0; 15];
        let exact = apply_es_exact(&r, &eig, &phi).unwrap();
        let mut errs = Vec::new();
        for tau in [2e-3, 1e-3, 5e-4] {
            let rep = apply_es_via_ode(&r, &op, &phi, tau).unwrap();
            errs.push(norm(&sub(&rep.solution, &exact)));
            let chk = check_theorem(TheoremId::ExpSum, &rep.theorem_run(), &eig, &phi).unwrap();
            assert!(chk.satisfied, "{chk:?}");
        }
        for p in errs.windows(2) {
            let ratio = p[0] / p[1];
            assert!((3.5..=4.5).contains(&ratio), "{errs:?}");
        }
    }

    #[test]
    fn json_shape() {
        let r = rational_from_kappa(0.5, 2, 2.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for k in ["kind", "alpha", "delta", "provenance", "terms"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert!(v["terms"][0].get("c").is_some());
        let j = rational_from_gauss_jacobi(0.5, 2, 1.0).unwrap();
        let v = serde_json::to_value(&j).unwrap();
        assert!(v["terms"][0].get("c").is_none());
        let back: ShiftedSumApproximant = serde_json::from_value(v).unwrap();
        assert_eq!(back, j);
    }

    proptest! {
        #[test]
        fn constructed_maps_are_monotone(alpha in 0.05f64..0.95, m in 1usize..12, which in 0usize..5) {
            let r = match which {
                0 => rational_from_log_trapezoid(alpha, 2 * m + 1, 0.4).unwrap(),
                1 => rational_from_gauss_jacobi(alpha, m, 3.0).unwrap(),
                2 => rational_from_kappa(alpha, m, 2.0).unwrap(),
                3 => es_from_laguerre(alpha, m, 2.0).unwrap(),
                _ => es_from_graded(alpha, m, 20.0).unwrap(),
            };
            let mut prev = f64::INFINITY;
            for j in 0..1000 {
                let l = 10f64.powf(-2.0 + 6.0 * j as f64 / 999.0);
                let v = r.scalar_eval(l);
                prop_assert!(v > 0.0 || (r.kind == SumKind::ExpSum && v >= 0.0));
                if r.kind == SumKind::Rational {
                    prop_assert!(v < prev);
                } else {
                    prop_assert!(v <= prev);
                }
                prev = v;
            }
        }
    }
}
