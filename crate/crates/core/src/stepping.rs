//! Two-level weighted time stepping shared by the evolution-based solvers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::operator::{AffineFactor, SpdOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    /// Weight 1/2, second order.
    #[default]
    CrankNicolson,
    /// Weight 1, first order, L-stable.
    ImplicitEuler,
}

impl TimeScheme {
    pub fn sigma(self) -> f64 {
        match self {
            TimeScheme::CrankNicolson => 0.5,
            TimeScheme::ImplicitEuler => 1.0,
        }
    }

    pub fn order(self) -> u32 {
        match self {
            TimeScheme::CrankNicolson => 2,
            TimeScheme::ImplicitEuler => 1,
        }
    }

    /// Richardson factor turning `||w_h - w_{h/2}||` into an estimate of the
    /// error of `w_h`: `2^p / (2^p - 1)`.
    pub fn richardson_factor(self) -> f64 {
        let q = f64::from(1u32 << self.order());
        q / (q - 1.0)
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeScheme::CrankNicolson => "crank-nicolson",
            TimeScheme::ImplicitEuler => "implicit-euler",
        }
    }
}

/// One step of `(pl I + ql A) w+ = (pr I + qr A) w` with `pl I + ql A`
/// already factored.
pub(crate) fn affine_step(
    op: &SpdOperator,
    lhs: &AffineFactor,
    pr: f64,
    qr: f64,
    w: &[f64],
    scratch: &mut [f64],
) -> Vec<f64> {
    op.apply_into(w, scratch);
    let rhs: Vec<f64> = w
        .iter()
        .zip(scratch.iter())
        .map(|(wi, ai)| pr * wi + qr * ai)
        .collect();
    lhs.solve(&rhs)
}

/// `w <- w + (p I + q A)^{-1} (-h (A w - s w))`, the increment form of a
/// weighted step for `w' + (A - s I) w = 0`.
pub(crate) fn increment_step(
    op: &SpdOperator,
    lhs: &AffineFactor,
    h: f64,
    s: f64,
    w: &mut [f64],
    scratch: &mut [f64],
) {
    op.apply_into(w, scratch);
    let rhs: Vec<f64> = scratch
        .iter()
        .zip(w.iter())
        .map(|(a, x)| -h * (a - s * x))
        .collect();
    for (x, d) in w.iter_mut().zip(lhs.solve(&rhs)) {
        *x += d;
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid("tau", "must be positive and finite"));
    }
    Ok(())
}
