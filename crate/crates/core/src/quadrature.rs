//! Quadrature rules feeding the approximant constructors.
//!
//! Gaussian rules come from the symmetric Jacobi matrix of the three-term
//! recurrence (Golub-Welsch). Nodes are polished by one Newton step on the
//! orthonormal polynomial and weights are taken from the Christoffel
//! function `1 / sum_k p_k(x)^2`, which keeps tiny Laguerre weights accurate
//! in the relative sense.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Result};
use crate::linalg::tridiagonal_eigen_first_row;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    Interval {
        a: f64,
        b: f64,
    },
    HalfLine,
    /// Real line truncated to `[-half_width, half_width]`.
    RealLineTruncated {
        half_width: f64,
    },
}

impl Domain {
    fn contains(&self, x: f64) -> bool {
        match *self {
            Domain::Interval { a, b } => x > a && x < b,
            Domain::HalfLine => x > 0.0 && x.is_finite(),
            Domain::RealLineTruncated { half_width } => x.abs() <= half_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub domain: Domain,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }

    /// Affine map of a rule on `(-1, 1)` to `(0, 1)`.
    pub fn to_unit_interval(&self) -> QuadratureRule {
        QuadratureRule {
            nodes: self.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            weights: self.weights.iter().map(|w| 0.5 * w).collect(),
            domain: Domain::Interval { a: 0.0, b: 1.0 },
        }
    }

    /// Positive weights, strictly increasing nodes inside the domain.
    pub fn is_well_formed(&self) -> bool {
        self.nodes.len() == self.weights.len()
            && self.weights.iter().all(|w| *w > 0.0)
            && self.nodes.windows(2).all(|p| p[0] < p[1])
            && self.nodes.iter().all(|x| self.domain.contains(*x))
    }
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    Ok(())
}

/// Gaussian rule for the measure whose monic recurrence is
/// `p_{k+1} = (x - a_k) p_k - b_k p_{k-1}`; `coeffs(k)` returns `(a_k, b_k)`
/// for `k = 0..=m` with `b_0` the zeroth moment.
fn gauss_from_recurrence(
    m: usize,
    coeffs: impl Fn(usize) -> (f64, f64),
    domain: Domain,
) -> Result<QuadratureRule> {
    let rec: Vec<(f64, f64)> = (0..=m).map(&coeffs).collect();
    let diag: Vec<f64> = rec[..m].iter().map(|c| c.0).collect();
    let off: Vec<f64> = rec[1..m].iter().map(|c| c.1.sqrt()).collect();
    let mu0 = rec[0].1;
    let pairs = tridiagonal_eigen_first_row(&diag, &off)?;

    // orthonormal values p_0..p_m and p_m' at x
    let eval = |x: f64| {
        let mut prev = 0.0;
        let mut cur = 1.0 / mu0.sqrt();
        let mut dprev = 0.0;
        let mut dcur = 0.0;
        let mut sumsq = cur * cur;
        for k in 0..m {
            let sb_next = rec[k + 1].1.sqrt();
            let sb = if k == 0 { 0.0 } else { rec[k].1.sqrt() };
            let next = ((x - rec[k].0) * cur - sb * prev) / sb_next;
            let dnext = (cur + (x - rec[k].0) * dcur - sb * dprev) / sb_next;
            prev = cur;
            cur = next;
            dprev = dcur;
            dcur = dnext;
            if k + 1 < m {
                sumsq += cur * cur;
            }
        }
        (cur, dcur, sumsq)
    };

    let eig_nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for (i, &x0) in eig_nodes.iter().enumerate() {
        let gap = {
            let l = if i > 0 {
                x0 - eig_nodes[i - 1]
            } else {
                f64::INFINITY
            };
            let r = if i + 1 < m {
                eig_nodes[i + 1] - x0
            } else {
                f64::INFINITY
            };
            l.min(r).min(x0.abs().max(1.0))
        };
        let (p, dp, _) = eval(x0);
        let dx = p / dp;
        let x = if dx.is_finite() && dx.abs() < 1e-6 * gap {
            x0 - dx
        } else {
            x0
        };
        let (_, _, sumsq) = eval(x);
        nodes.push(x);
        weights.push(1.0 / sumsq);
    }
    let rule = QuadratureRule {
        nodes,
        weights,
        domain,
    };
    if !rule.is_well_formed() {
        return Err(invalid(
            "m",
            format!("rule with {m} nodes is not well formed"),
        ));
    }
    Ok(rule)
}

/// Gauss-Legendre rule on `(-1, 1)`.
pub fn gauss_legendre(m: usize) -> Result<QuadratureRule> {
    check_m(m)?;
    gauss_from_recurrence(
        m,
        |k| {
            if k == 0 {
                (0.0, 2.0)
            } else {
                let k = k as f64;
                (0.0, k * k / (4.0 * k * k - 1.0))
            }
        },
        Domain::Interval { a: -1.0, b: 1.0 },
    )
}

/// Gauss-Jacobi rule for the weight `(1 - x)^a (1 + x)^b` on `(-1, 1)`.
pub fn gauss_jacobi_general(m: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    check_m(m)?;
    if !(a > -1.0) {
        return Err(invalid("a", "Jacobi exponent must exceed -1"));
    }
    if !(b > -1.0) {
        return Err(invalid("b", "Jacobi exponent must exceed -1"));
    }
    let ab = a + b;
    let mu0 = 2f64.powf(ab + 1.0) * gamma(a + 1.0) * gamma(b + 1.0) / gamma(ab + 2.0);
    gauss_from_recurrence(
        m,
        |k| {
            let kf = k as f64;
            let diag = if k == 0 {
                (b - a) / (ab + 2.0)
            } else {
                (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
            };
            let off = match k {
                0 => mu0,
                // the general formula is 0/0 when a + b = -1
                1 => 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab)),
                _ => {
                    let s = 2.0 * kf + ab;
                    4.0 * kf * (kf + a) * (kf + b) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
                }
            };
            (diag, off)
        },
        Domain::Interval { a: -1.0, b: 1.0 },
    )
}

/// Gauss-Jacobi rule for the weight `(1 - x)^{-alpha} (1 + x)^{alpha - 1}`.
pub fn gauss_jacobi(m: usize, alpha: f64) -> Result<QuadratureRule> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("{alpha} is outside (0, 1)")));
    }
    gauss_jacobi_general(m, -alpha, alpha - 1.0)
}

/// Gaussian rule for `theta^{alpha-1} exp(-delta theta)` on `(0, inf)`.
pub fn gauss_laguerre_generalized(m: usize, alpha: f64, delta: f64) -> Result<QuadratureRule> {
    check_m(m)?;
    if !(alpha > 0.0) {
        return Err(invalid("alpha", "must be positive"));
    }
    if !(delta > 0.0) {
        return Err(invalid("delta", "must be positive"));
    }
    let g = alpha - 1.0;
    let base = gauss_from_recurrence(
        m,
        |k| {
            let kf = k as f64;
            let off = if k == 0 { gamma(alpha) } else { kf * (kf + g) };
            (2.0 * kf + g + 1.0, off)
        },
        Domain::HalfLine,
    )?;
    let wscale = delta.powf(-alpha);
    Ok(QuadratureRule {
        nodes: base.nodes.iter().map(|x| x / delta).collect(),
        weights: base.weights.iter().map(|w| w * wscale).collect(),
        domain: Domain::HalfLine,
    })
}

/// Equispaced trapezoid nodes `j * step`, `|j| <= (m-1)/2`, unit weights times `step`.
pub fn log_trapezoid(m: usize, step: f64) -> Result<QuadratureRule> {
    check_m(m)?;
    if m % 2 == 0 {
        return Err(invalid(
            "m",
            format!("{m} is even; symmetric truncation needs odd m"),
        ));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step", "must be positive"));
    }
    let half = (m as i64 - 1) / 2;
    Ok(QuadratureRule {
        nodes: (-half..=half).map(|j| j as f64 * step).collect(),
        weights: vec![step; m],
        domain: Domain::RealLineTruncated {
            half_width: half as f64 * step,
        },
    })
}

/// Graded rule on `(0, t_max)` with cell edges `t_max (i/m)^{1/alpha}`.
///
/// Each node is the image of its cell's midpoint in the graded variable,
/// `t_max ((i - 1/2)/m)^{1/alpha}`; each weight is the cell width.
pub fn graded_midpoint(m: usize, alpha: f64, t_max: f64) -> Result<QuadratureRule> {
    check_m(m)?;
    if !(alpha > 0.0) {
        return Err(invalid("alpha", "grading exponent 1/alpha needs alpha > 0"));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(invalid("t_max", "must be positive"));
    }
    let p = 1.0 / alpha;
    let mf = m as f64;
    let edge = |i: usize| t_max * (i as f64 / mf).powf(p);
    Ok(QuadratureRule {
        nodes: (1..=m)
            .map(|i| t_max * ((i as f64 - 0.5) / mf).powf(p))
            .collect(),
        weights: (1..=m).map(|i| edge(i) - edge(i - 1)).collect(),
        domain: Domain::Interval { a: 0.0, b: t_max },
    })
}

/// Midpoint rule on `(0, 1)`.
pub fn midpoint_unit(m: usize) -> Result<QuadratureRule> {
    check_m(m)?;
    let h = 1.0 / m as f64;
    Ok(QuadratureRule {
        nodes: (0..m).map(|i| (i as f64 + 0.5) * h).collect(),
        weights: vec![h; m],
        domain: Domain::Interval { a: 0.0, b: 1.0 },
    })
}
