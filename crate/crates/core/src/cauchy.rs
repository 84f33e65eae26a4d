//! `A^{-alpha} phi` as the terminal value of an evolution problem.
//!
//! Each solver steps one reformulation with a two-level scheme whose
//! coefficients are frozen at the midpoint `t_{n+1/2}` of every interval:
//!
//! * rational: `(t^{1/(1-alpha)} I + A) v' = sin(pi alpha) / ((1-alpha) pi) phi`, `u = v(inf)`
//! * kappa: `(t^{1/(1-alpha)} I + (1-t)^{kappa/alpha} A) v' = g(t) phi`, `u = v(1)`
//! * exponential sum: `w' + (A - s I) w = 0`, `Gamma(alpha) t^{1-alpha} v' = e^{-s t} w`
//! * second order: `v'' + t^{(1-alpha)/alpha} A v' / alpha = 0`, `v'(0) = phi / (alpha Gamma(alpha))`
//! * exponential product: `(t (A - delta) + delta) v' + alpha (A - delta) v = 0`,
//!   `v(0) = delta^{-alpha} phi`, `u = v(1)`

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, norm, scaled, sub};
use crate::operator::{check_alpha, SpdOperator};
use crate::stepping::{affine_step, increment_step, TimeScheme};
use crate::sum_approx::{Provenance, ShiftedSumApproximant, SumKind, Term};

/// Strictly increasing nodes starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return Err(invalid("grid", "need at least two nodes starting at 0"));
        }
        if !nodes.windows(2).all(|p| p[0] < p[1]) || !nodes.iter().all(|t| t.is_finite()) {
            return Err(invalid(
                "grid",
                "nodes must be finite and strictly increasing",
            ));
        }
        Ok(Self { nodes })
    }

    pub fn uniform(terminal: f64, steps: usize) -> Result<Self> {
        check_grid_args(terminal, steps)?;
        let h = terminal / steps as f64;
        let mut nodes: Vec<f64> = (0..steps).map(|n| n as f64 * h).collect();
        nodes.push(terminal);
        Self::from_nodes(nodes)
    }

    /// Steps `h_0 r^k` growing away from 0.
    pub fn geometric(terminal: f64, steps: usize, ratio: f64) -> Result<Self> {
        check_grid_args(terminal, steps)?;
        if !(ratio >= 1.0 && ratio.is_finite()) {
            return Err(invalid("ratio", "must be at least 1"));
        }
        if ratio == 1.0 {
            return Self::uniform(terminal, steps);
        }
        let h0 = terminal * (ratio - 1.0) / (ratio.powi(steps as i32) - 1.0);
        let mut nodes = Vec::with_capacity(steps + 1);
        nodes.push(0.0);
        let mut t = 0.0;
        let mut h = h0;
        for _ in 0..steps - 1 {
            t += h;
            nodes.push(t);
            h *= ratio;
        }
        nodes.push(terminal);
        Self::from_nodes(nodes)
    }

    /// Geometric grid whose first step is `t_first`; the ratio is found by bisection.
    pub fn geometric_first(t_first: f64, terminal: f64, steps: usize) -> Result<Self> {
        check_grid_args(terminal, steps)?;
        if !(t_first > 0.0 && t_first * steps as f64 <= terminal) {
            return Err(invalid("t_first", "need 0 < t_first <= terminal / steps"));
        }
        let target = terminal / t_first;
        // (r^M - 1) / (r - 1) = target, increasing in r
        let sum = |r: f64| (0..steps).map(|k| r.powi(k as i32)).sum::<f64>();
        let (mut lo, mut hi) = (1.0, 2.0);
        while sum(hi) < target {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sum(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self::geometric(terminal, steps, 0.5 * (lo + hi))
    }

    /// `t_n = T (n / M)^power`.
    pub fn graded(terminal: f64, steps: usize, power: f64) -> Result<Self> {
        check_grid_args(terminal, steps)?;
        if !(power >= 1.0 && power.is_finite()) {
            return Err(invalid("power", "must be at least 1"));
        }
        let mut nodes: Vec<f64> = (0..steps)
            .map(|n| terminal * (n as f64 / steps as f64).powf(power))
            .collect();
        nodes.push(terminal);
        Self::from_nodes(nodes)
    }

    /// Bisect every interval.
    pub fn refine(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for p in self.nodes.windows(2) {
            nodes.push(p[0]);
            nodes.push(0.5 * (p[0] + p[1]));
        }
        nodes.push(self.terminal());
        Self { nodes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn terminal(&self) -> f64 {
        *self.nodes.last().expect("grid has nodes")
    }

    /// `(t_n, t_{n+1}, t_{n+1/2})` per interval.
    fn intervals(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.nodes
            .windows(2)
            .map(|p| (p[0], p[1], 0.5 * (p[0] + p[1])))
    }
}

fn check_grid_args(terminal: f64, steps: usize) -> Result<()> {
    if !(terminal > 0.0 && terminal.is_finite()) {
        return Err(invalid("terminal", "must be positive"));
    }
    if steps == 0 {
        return Err(invalid("steps", "need at least one step"));
    }
    Ok(())
}

fn check_unit_grid(grid: &TimeGrid) -> Result<()> {
    if grid.terminal() != 1.0 {
        return Err(invalid("grid", "terminal time must be 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyRunReport {
    pub solution: Vec<f64>,
    pub steps: usize,
    pub scheme: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub richardson_order: Option<f64>,
}

fn check_inputs(op: &SpdOperator, phi: &[f64], alpha: f64) -> Result<()> {
    check_alpha(alpha)?;
    if alpha >= 1.0 {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    if phi.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: phi.len(),
        });
    }
    Ok(())
}

fn step_err(step: usize, e: Error) -> Error {
    Error::StepSolve {
        segment: 0,
        step,
        reason: e.to_string(),
    }
}

fn report(solution: Vec<f64>, grid: &TimeGrid, scheme: &str) -> CauchyRunReport {
    CauchyRunReport {
        solution,
        steps: grid.steps(),
        scheme: scheme.into(),
        richardson_order: None,
    }
}

fn rational_constant(alpha: f64) -> f64 {
    let pi = std::f64::consts::PI;
    (alpha * pi).sin() / ((1.0 - alpha) * pi)
}

/// Terminal time with `int_T^inf` of the rational integrand below `tol`
/// for every `lambda > 0`: `c T^{1-p} / (p - 1) = tol`, `p = 1/(1-alpha)`.
pub fn rational_default_terminal(alpha: f64, tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let p = 1.0 / (1.0 - alpha);
    Ok((tol * (p - 1.0) / rational_constant(alpha)).powf(1.0 / (1.0 - p)))
}

/// Rational coefficients equivalent to the desingularized rational scheme.
pub fn rational_identification(alpha: f64, grid: &TimeGrid) -> Result<ShiftedSumApproximant> {
    let c = rational_constant(alpha);
    let p = 1.0 / (1.0 - alpha);
    let terms = grid
        .intervals()
        .map(|(t0, t1, th)| Term::new(c * (t1 - t0), th.powf(p)))
        .collect();
    ShiftedSumApproximant::new(
        SumKind::Rational,
        alpha,
        0.0,
        Provenance {
            representation: "cauchy-rational".into(),
            quadrature: "midpoint".into(),
            m: grid.steps(),
            params: [("terminal".to_string(), grid.terminal())]
                .into_iter()
                .collect(),
        },
        terms,
    )
}

/// `(t_{n+1/2}^{1/(1-alpha)} I + A)(v_{n+1} - v_n) / tau_n = c phi`, `v_0 = 0`.
pub fn cauchy_rational_solve(
    op: &SpdOperator,
    phi: &[f64],
    alpha: f64,
    grid: &TimeGrid,
) -> Result<CauchyRunReport> {
    check_inputs(op, phi, alpha)?;
    let c = rational_constant(alpha);
    let p = 1.0 / (1.0 - alpha);
    let mut v = vec![0.0; op.dim()];
    for (n, (t0, t1, th)) in grid.intervals().enumerate() {
        let w = op
            .solve_affine(th.powf(p), 1.0, phi)
            .map_err(|e| step_err(n, e))?;
        axpy(c * (t1 - t0), &w, &mut v);
    }
    Ok(report(v, grid, "rational-midpoint"))
}

/// Kappa equation on `(0, 1)` with midpoint-frozen coefficients.
pub fn cauchy_kappa_solve(
    op: &SpdOperator,
    phi: &[f64],
    alpha: f64,
    kappa: f64,
    grid: &TimeGrid,
) -> Result<CauchyRunReport> {
    check_inputs(op, phi, alpha)?;
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(invalid("kappa", "must exceed 1"));
    }
    check_unit_grid(grid)?;
    let c0 = rational_constant(alpha);
    let slope = kappa * (1.0 - alpha) / alpha - 1.0;
    let mut v = vec![0.0; op.dim()];
    for (n, (t0, t1, th)) in grid.intervals().enumerate() {
        let g = c0 * (1.0 - th).powf(kappa - 1.0) * (1.0 + slope * th);
        let w = op
            .solve_affine(
                th.powf(1.0 / (1.0 - alpha)),
                (1.0 - th).powf(kappa / alpha),
                phi,
            )
            .map_err(|e| step_err(n, e))?;
        axpy((t1 - t0) * g, &w, &mut v);
    }
    Ok(report(v, grid, "kappa-midpoint"))
}

/// Terminal time with `delta^{-alpha} Q(alpha, delta T) <= tol`, the
/// tail of the gamma integral at the bottom of the spectrum.
pub fn es_default_terminal(alpha: f64, delta: f64, tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(delta > 0.0 && tol > 0.0) {
        return Err(invalid("delta", "delta and tol must be positive"));
    }
    let tail = |t: f64| delta.powf(-alpha) * gamma_ur(alpha, delta * t);
    let mut t = 1.0 / delta;
    while tail(t) > tol {
        t *= 1.25;
    }
    Ok(t)
}

/// Exponential-sum coefficients equivalent to the `v`-update of
/// [`cauchy_es_solve`] with exact `w` at the half nodes.
pub fn es_identification(alpha: f64, grid: &TimeGrid) -> Result<ShiftedSumApproximant> {
    let g = gamma(alpha);
    let terms = grid
        .intervals()
        .map(|(t0, t1, th)| Term::new(th.powf(alpha - 1.0) * (t1 - t0) / g, th))
        .collect();
    ShiftedSumApproximant::new(
        SumKind::ExpSum,
        alpha,
        0.0,
        Provenance {
            representation: "cauchy-es".into(),
            quadrature: "rectangle".into(),
            m: grid.steps(),
            params: [("terminal".to_string(), grid.terminal())]
                .into_iter()
                .collect(),
        },
        terms,
    )
}

/// ES system: Crank-Nicolson for `w`, rectangle rule for `v` with half-node
/// values of `w` averaged from the adjacent nodes. With `shifted`, `A` is
/// replaced by `A - delta I` and the weight gains `e^{-delta t}`.
pub fn cauchy_es_solve(
    op: &SpdOperator,
    phi: &[f64],
    alpha: f64,
    grid: &TimeGrid,
    shifted: bool,
) -> Result<CauchyRunReport> {
    check_inputs(op, phi, alpha)?;
    let s = if shifted { op.spectral_lower() } else { 0.0 };
    let g = gamma(alpha);
    let n = op.dim();
    let mut v = vec![0.0; n];
    let mut w = phi.to_vec();
    let mut scratch = vec![0.0; n];
    for (k, (t0, t1, th)) in grid.intervals().enumerate() {
        let h = t1 - t0;
        let lhs = op
            .factor_affine(1.0 - 0.5 * h * s, 0.5 * h)
            .map_err(|e| step_err(k, e))?;
        let prev = w.clone();
        increment_step(op, &lhs, h, s, &mut w, &mut scratch);
        let coef = h * th.powf(alpha - 1.0) * (-s * th).exp() / g;
        for ((vi, a), b) in v.iter_mut().zip(&prev).zip(&w) {
            *vi += coef * 0.5 * (a + b);
        }
    }
    let name = if shifted { "es-shifted-cn" } else { "es-cn" };
    Ok(report(v, grid, name))
}

/// `T` with `int_T^inf` of the second-order integrand below `tol` at `delta`;
/// the substitution `theta = t^{1/alpha}` maps it onto the gamma tail.
pub fn second_order_default_terminal(alpha: f64, delta: f64, tol: f64) -> Result<f64> {
    Ok(es_default_terminal(alpha, delta, tol)?.powf(alpha))
}

fn second_order_run(
    op: &SpdOperator,
    phi: &[f64],
    alpha: f64,
    grid: &TimeGrid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = op.dim();
    let beta = (1.0 - alpha) / alpha;
    let mut p = scaled(1.0 / (alpha * gamma(alpha)), phi);
    let mut v = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for (k, (t0, t1, th)) in grid.intervals().enumerate() {
        let h = t1 - t0;
        let q = 0.5 * h * th.powf(beta) / alpha;
        let lhs = op.factor_affine(1.0, q).map_err(|e| step_err(k, e))?;
        let next = affine_step(op, &lhs, 1.0, -q, &p, &mut scratch);
        for ((vi, a), b) in v.iter_mut().zip(&p).zip(&next) {
            *vi += 0.5 * h * (a + b);
        }
        p = next;
    }
    Ok((v, p))
}

/// Second-order equation as the system `p' + t^{(1-alpha)/alpha} A p / alpha = 0`
/// (Crank-Nicolson), `v' = p` (trapezoid).
pub fn cauchy_second_order_solve(
    op: &SpdOperator,
    phi: &[f64],
    alpha: f64,
    grid: &TimeGrid,
) -> Result<CauchyRunReport> {
    check_inputs(op, phi, alpha)?;
    let (v, _) = second_order_run(op, phi, alpha, grid)?;
    Ok(report(v, grid, "second-order-cn"))
}

/// Exponential-product evolution on `(0, 1)`, weight 1/2.
pub fn cauchy_ep_solve(
    op: &SpdOperator,
    phi: &[f64],
    alpha: f64,
    delta: f64,
    grid: &TimeGrid,
) -> Result<CauchyRunReport> {
    cauchy_ep_solve_with(op, phi, alpha, delta, grid, TimeScheme::CrankNicolson)
}

/// Increment form `(C + sigma tau alpha B)(v+ - v) = -tau alpha B v` with
/// `B = A - delta I`, `C = t_{n+1/2} B + delta I`, so `B v = 0` leaves `v`
/// untouched bit for bit.
pub fn cauchy_ep_solve_with(
    op: &SpdOperator,
    phi: &[f64],
    alpha: f64,
    delta: f64,
    grid: &TimeGrid,
    scheme: TimeScheme,
) -> Result<CauchyRunReport> {
    check_inputs(op, phi, alpha)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", "must be positive"));
    }
    check_unit_grid(grid)?;
    let sigma = scheme.sigma();
    let n = op.dim();
    let mut v = scaled(delta.powf(-alpha), phi);
    let mut av = vec![0.0; n];
    for (k, (t0, t1, th)) in grid.intervals().enumerate() {
        let tau = t1 - t0;
        let q = th + sigma * tau * alpha;
        let lhs = op
            .factor_affine(delta - q * delta, q)
            .map_err(|e| step_err(k, e))?;
        op.apply_into(&v, &mut av);
        let rhs: Vec<f64> = av
            .iter()
            .zip(&v)
            .map(|(a, x)| -tau * alpha * (a - delta * x))
            .collect();
        let dv = lhs.solve(&rhs);
        for (x, d) in v.iter_mut().zip(&dv) {
            *x += d;
        }
    }
    Ok(report(v, grid, scheme.name()))
}

/// `log2(||coarse - mid|| / ||mid - fine||)`, `+inf` if `mid == fine`.
pub fn richardson_order(coarse: &[f64], mid: &[f64], fine: &[f64]) -> f64 {
    let den = norm(&sub(mid, fine));
    if den == 0.0 {
        return f64::INFINITY;
    }
    (norm(&sub(coarse, mid)) / den).log2()
}

/// Run `solve` on `grid` and two bisections of it; the finest report
/// carries the observed order.
pub fn with_richardson_order(
    grid: &TimeGrid,
    solve: impl Fn(&TimeGrid) -> Result<CauchyRunReport>,
) -> Result<CauchyRunReport> {
    let g1 = grid.refine();
    let g2 = g1.refine();
    let c = solve(grid)?;
    let m = solve(&g1)?;
    let mut f = solve(&g2)?;
    f.richardson_order = Some(richardson_order(&c.solution, &m.solution, &f.solution));
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{oracle_apply_function, spectral_oracle};
    use crate::sum_approx::{apply_es_exact, apply_rational};
    use approx::assert_relative_eq;

    fn scalar(l: f64) -> SpdOperator {
        SpdOperator::diagonal(vec![l]).unwrap()
    }

    #[test]
    fn grids() {
        let g = TimeGrid::uniform(2.0, 4).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        let g = TimeGrid::geometric(10.0, 20, 1.05).unwrap();
        assert_eq!(g.terminal(), 10.0);
        assert_eq!(g.steps(), 20);
        let g = TimeGrid::geometric_first(1e-3, 1e6, 300).unwrap();
        assert_relative_eq!(g.nodes()[1], 1e-3, max_relative = 1e-9);
        let g = TimeGrid::graded(1.0, 8, 3.0).unwrap().refine();
        assert_eq!(g.steps(), 16);
        assert!(TimeGrid::from_nodes(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::from_nodes(vec![0.5, 1.0]).is_err());
    }

    #[test]
    fn zero_data_gives_zero() {
        let op = SpdOperator::laplacian_1d(4).unwrap();
        let z = vec![0.0; 4];
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        assert_eq!(cauchy_rational_solve(&op, &z, 0.5, &g).unwrap().solution, z);
        assert_eq!(
            cauchy_kappa_solve(&op, &z, 0.5, 2.0, &g).unwrap().solution,
            z
        );
        assert_eq!(
            cauchy_second_order_solve(&op, &z, 0.5, &g)
                .unwrap()
                .solution,
            z
        );
        assert_eq!(cauchy_es_solve(&op, &z, 0.5, &g, true).unwrap().solution, z);
    }

    #[test]
    fn rational_matches_apply_rational_bitwise() {
        let op = SpdOperator::laplacian_1d(9).unwrap();
        let phi = crate::rng::Lcg::new(1).vector(9);
        let g = TimeGrid::geometric_first(1e-2, 1e4, 200).unwrap();
        let a = cauchy_rational_solve(&op, &phi, 0.4, &g).unwrap();
        let appr = rational_identification(0.4, &g).unwrap();
        let b = apply_rational(&appr, &op, &phi, 0.0).unwrap();
        assert_eq!(a.solution, b.solution);
    }

    #[test]
    fn rational_scalar_converges() {
        let alpha = 0.5;
        let tmax = 1e6;
        let g = TimeGrid::geometric_first(1e-3, tmax, 2000).unwrap();
        let v = cauchy_rational_solve(&scalar(1.0), &[1.0], alpha, &g)
            .unwrap()
            .solution[0];
        // tail int_T^inf c / (t^2 + 1) dt <= c / T
        let tail = rational_constant(alpha) / tmax;
        assert!((v - 1.0).abs() < tail + 1e-5, "{v}");
        let t = rational_default_terminal(alpha, 1e-8).unwrap();
        assert_relative_eq!(rational_constant(alpha) / t, 1e-8, max_relative = 1e-12);
    }

    #[test]
    fn kappa_scalar() {
        let alpha = 0.5;
        let op = scalar(2.0);
        let run = |m| {
            cauchy_kappa_solve(&op, &[1.0], alpha, 2.0, &TimeGrid::uniform(1.0, m).unwrap())
                .unwrap()
                .solution[0]
        };
        let reference = run(1 << 16);
        assert!((reference - 2f64.powf(-alpha)).abs() < 1e-9);
        let (c, m, f) = (run(512), run(1024), run(2048));
        let order = richardson_order(&[c], &[m], &[f]);
        assert!(order >= 0.9, "{order}");
        assert!((c - reference).abs() < 1e-5);
        // t = 1: the operator coefficient is exactly the identity
        assert_eq!(1f64.powf(1.0 / (1.0 - alpha)), 1.0);
        assert_eq!((1.0f64 - 1.0).powf(2.0 / alpha), 0.0);
    }

    #[test]
    fn es_zero_generator() {
        let delta: f64 = 3.0;
        let op = scalar(delta);
        let mut prev = f64::INFINITY;
        for m in [64, 128, 256] {
            let g = TimeGrid::graded(20.0, m, 4.0).unwrap();
            let v = cauchy_es_solve(&op, &[1.0], 0.5, &g, true)
                .unwrap()
                .solution[0];
            let e = (v - delta.powf(-0.5)).abs();
            assert!(e < prev);
            prev = e;
        }
        assert!(prev < 1e-3, "{prev}");
    }

    #[test]
    fn es_update_matches_coefficients() {
        // zero generator so w is exact at half nodes
        let op = scalar(2.0);
        let g = TimeGrid::graded(5.0, 50, 3.0).unwrap();
        let run = cauchy_es_solve(&op, &[1.0], 0.5, &g, true)
            .unwrap()
            .solution[0];
        let appr = es_identification(0.5, &g).unwrap();
        let via_terms: f64 = appr.terms.iter().map(|t| t.a * (-2.0 * t.b).exp()).sum();
        assert_relative_eq!(run, via_terms, max_relative = 1e-13);
        let eig = spectral_oracle(&op).unwrap();
        assert_relative_eq!(
            apply_es_exact(&appr, &eig, &[1.0]).unwrap()[0],
            via_terms,
            max_relative = 1e-13
        );
    }

    #[test]
    fn es_converges_on_laplacian() {
        let op = SpdOperator::laplacian_1d(15).unwrap();
        let eig = spectral_oracle(&op).unwrap();
        let phi = vec![1.0; 15];
        let exact = oracle_apply_function(&eig, -0.5, &phi).unwrap();
        for shifted in [false, true] {
            let mut prev = f64::INFINITY;
            for (t, m) in [(10.0, 128), (20.0, 256), (40.0, 512)] {
                let g = TimeGrid::graded(t, m, 4.0).unwrap();
                let u = cauchy_es_solve(&op, &phi, 0.5, &g, shifted)
                    .unwrap()
                    .solution;
                let e = norm(&sub(&u, &exact));
                assert!(e < prev, "shifted={shifted} {e} {prev}");
                prev = e;
            }
        }
    }

    #[test]
    fn second_order_p_trajectory_and_limit() {
        let alpha = 0.5;
        let lam = 1.5;
        let g = TimeGrid::uniform(1.0, 4000).unwrap();
        let (_, p) = second_order_run(&scalar(lam), &[1.0], alpha, &g).unwrap();
        let closed = (-(1f64).powf(1.0 / alpha) * lam).exp() / (alpha * gamma(alpha));
        assert!((p[0] - closed).abs() < 1e-6, "{} {closed}", p[0]);

        let g = TimeGrid::uniform(20.0, 2048).unwrap();
        let v = cauchy_second_order_solve(&scalar(1.0), &[1.0], alpha, &g)
            .unwrap()
            .solution[0];
        assert!((v - 1.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn ep_exact_at_delta_and_scalar_order() {
        let delta = 2.5;
        let g = TimeGrid::uniform(1.0, 7).unwrap();
        let v = cauchy_ep_solve(&scalar(delta), &[3.0], 0.5, delta, &g)
            .unwrap()
            .solution;
        assert_eq!(v, vec![3.0 * delta.powf(-0.5)]);

        let op = scalar(10.0);
        let rep = with_richardson_order(&TimeGrid::uniform(1.0, 64).unwrap(), |g| {
            cauchy_ep_solve(&op, &[1.0], 0.5, 1.0, g)
        })
        .unwrap();
        let order = rep.richardson_order.unwrap();
        assert!((1.8..=2.2).contains(&order), "{order}");
        assert!((rep.solution[0] - 10f64.powf(-0.5)).abs() < 1e-5);

        let rep = with_richardson_order(&TimeGrid::uniform(1.0, 64).unwrap(), |g| {
            cauchy_ep_solve_with(&op, &[1.0], 0.5, 1.0, g, TimeScheme::ImplicitEuler)
        })
        .unwrap();
        let order = rep.richardson_order.unwrap();
        assert!((0.9..=1.1).contains(&order), "{order}");
    }

    #[test]
    fn ep_laplacian_accuracy() {
        let op = SpdOperator::laplacian_1d(15).unwrap();
        let eig = spectral_oracle(&op).unwrap();
        let phi = vec![1.0; 15];
        let g = TimeGrid::uniform(1.0, 256).unwrap();
        for alpha in [0.25, 0.5, 0.75] {
            let exact = oracle_apply_function(&eig, -alpha, &phi).unwrap();
            let u = cauchy_ep_solve(&op, &phi, alpha, op.spectral_lower(), &g)
                .unwrap()
                .solution;
            let rel = norm(&sub(&u, &exact)) / norm(&exact);
            assert!(rel < 1e-3, "alpha={alpha} rel={rel}");
        }
    }

    #[test]
    fn richardson_marker_values() {
        let e = 1e-3;
        assert_relative_eq!(
            richardson_order(&[4.0 * e], &[2.0 * e], &[e]),
            1.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            richardson_order(&[16.0 * e], &[4.0 * e], &[e]),
            2.0,
            max_relative = 1e-12
        );
        assert_eq!(richardson_order(&[1.0], &[2.0], &[2.0]), f64::INFINITY);
    }

    #[test]
    fn default_terminals() {
        let t = es_default_terminal(0.5, 2.0, 1e-8).unwrap();
        assert!(2f64.powf(-0.5) * gamma_ur(0.5, 2.0 * t) <= 1e-8);
        let t2 = second_order_default_terminal(0.5, 2.0, 1e-8).unwrap();
        assert_relative_eq!(t2, t.sqrt(), max_relative = 1e-15);
    }
}
