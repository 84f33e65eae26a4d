//! SPD operators, model Laplacians and the dense spectral oracle.
//!
//! Every operator carries an enclosing spectral interval `[delta, lambda_max]`.
//! Model problems take it from closed-form spectra; user-supplied matrices
//! must provide it.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, BandCholesky};

/// Default dimension cap for the dense oracle.
pub const DEFAULT_ORACLE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureTag {
    Tridiagonal,
    Pentadiagonal2d,
    Dense,
    Diagonal,
}

#[derive(Debug, Clone)]
enum Storage {
    Tridiagonal {
        diag: Vec<f64>,
        off: Vec<f64>,
    },
    Laplacian2d {
        nx: usize,
        ny: usize,
        cx: f64,
        cy: f64,
    },
    Dense(DMatrix<f64>),
    Diagonal(Vec<f64>),
}

/// Symmetric positive definite operator with an enclosing spectral interval.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct SpdOperator {
    dim: usize,
    lower: f64,
    upper: f64,
    storage: Storage,
    spectrum: Option<Vec<f64>>,
}

fn laplacian_1d_eigenvalues(n: usize) -> Vec<f64> {
    let h = 1.0 / (n as f64 + 1.0);
    (1..=n)
        .map(|k| 4.0 / (h * h) * (k as f64 * PI * h / 2.0).sin().powi(2))
        .collect()
}

impl SpdOperator {
    /// `(1/h^2) tridiag(-1, 2, -1)` on `n_interior` points, `h = 1/(n_interior+1)`.
    pub fn laplacian_1d(n_interior: usize) -> Result<Self> {
        if n_interior == 0 {
            return Err(invalid("n_interior", "must be at least 1"));
        }
        let h = 1.0 / (n_interior as f64 + 1.0);
        let c = 1.0 / (h * h);
        let spectrum = laplacian_1d_eigenvalues(n_interior);
        Ok(Self {
            dim: n_interior,
            lower: spectrum[0],
            upper: spectrum[n_interior - 1],
            storage: Storage::Tridiagonal {
                diag: vec![2.0 * c; n_interior],
                off: vec![-c; n_interior - 1],
            },
            spectrum: Some(spectrum),
        })
    }

    /// Five-point Dirichlet Laplacian on the unit square with `nx * ny`
    /// interior points, ordered `x` fastest.
    pub fn laplacian_2d(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 {
            return Err(invalid("nx", "must be at least 1"));
        }
        if ny == 0 {
            return Err(invalid("ny", "must be at least 1"));
        }
        let hx = 1.0 / (nx as f64 + 1.0);
        let hy = 1.0 / (ny as f64 + 1.0);
        let ex = laplacian_1d_eigenvalues(nx);
        let ey = laplacian_1d_eigenvalues(ny);
        let mut spectrum: Vec<f64> = ey
            .iter()
            .flat_map(|ly| ex.iter().map(move |lx| lx + ly))
            .collect();
        spectrum.sort_by(f64::total_cmp);
        Ok(Self {
            dim: nx * ny,
            lower: ex[0] + ey[0],
            upper: ex[nx - 1] + ey[ny - 1],
            storage: Storage::Laplacian2d {
                nx,
                ny,
                cx: 1.0 / (hx * hx),
                cy: 1.0 / (hy * hy),
            },
            spectrum: Some(spectrum),
        })
    }

    /// Diagonal operator; its spectral interval is `[min, max]` of the entries.
    pub fn diagonal(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("values", "must be nonempty"));
        }
        if let Some((i, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::NonpositiveEigenvalue { index: i, value: v });
        }
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(0.0, f64::max);
        let mut spectrum = values.clone();
        spectrum.sort_by(f64::total_cmp);
        Ok(Self {
            dim: values.len(),
            lower,
            upper,
            storage: Storage::Diagonal(values),
            spectrum: Some(spectrum),
        })
    }

    /// Dense symmetric matrix with caller-supplied spectral bounds.
    pub fn dense(matrix: DMatrix<f64>, lower: f64, upper: f64) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(invalid("matrix", "must be square and nonempty"));
        }
        if !(lower > 0.0) {
            return Err(invalid("spectral_lower", "must be positive"));
        }
        if !(upper >= lower) {
            return Err(invalid("spectral_upper", "must be at least spectral_lower"));
        }
        let scale = matrix.amax();
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                    return Err(invalid("matrix", format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            dim: n,
            lower,
            upper,
            storage: Storage::Dense(matrix),
            spectrum: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spectral_lower(&self) -> f64 {
        self.lower
    }

    pub fn spectral_upper(&self) -> f64 {
        self.upper
    }

    pub fn structure(&self) -> StructureTag {
        match self.storage {
            Storage::Tridiagonal { .. } => StructureTag::Tridiagonal,
            Storage::Laplacian2d { .. } => StructureTag::Pentadiagonal2d,
            Storage::Dense(_) => StructureTag::Dense,
            Storage::Diagonal(_) => StructureTag::Diagonal,
        }
    }

    /// Closed-form spectrum (ascending) when the operator is a model problem.
    pub fn known_eigenvalues(&self) -> Option<&[f64]> {
        self.spectrum.as_deref()
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `y = A x`. Panics if `x` has the wrong length.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim, "operand length");
        assert_eq!(y.len(), self.dim, "output length");
        match &self.storage {
            Storage::Tridiagonal { diag, off } => {
                let n = self.dim;
                for i in 0..n {
                    let mut s = diag[i] * x[i];
                    if i > 0 {
                        s += off[i - 1] * x[i - 1];
                    }
                    if i + 1 < n {
                        s += off[i] * x[i + 1];
                    }
                    y[i] = s;
                }
            }
            Storage::Laplacian2d { nx, ny, cx, cy } => {
                let (nx, ny) = (*nx, *ny);
                for j in 0..ny {
                    for i in 0..nx {
                        let k = j * nx + i;
                        let mut s = (2.0 * cx + 2.0 * cy) * x[k];
                        if i > 0 {
                            s -= cx * x[k - 1];
                        }
                        if i + 1 < nx {
                            s -= cx * x[k + 1];
                        }
                        if j > 0 {
                            s -= cy * x[k - nx];
                        }
                        if j + 1 < ny {
                            s -= cy * x[k + nx];
                        }
                        y[k] = s;
                    }
                }
            }
            Storage::Dense(m) => {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = (0..self.dim).map(|j| m[(i, j)] * x[j]).sum();
                }
            }
            Storage::Diagonal(d) => {
                for ((yi, xi), di) in y.iter_mut().zip(x).zip(d) {
                    *yi = di * xi;
                }
            }
        }
    }

    /// Matrix entry `(i, j)` of `A` (dense view, used for assembly).
    fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Tridiagonal { diag, off } => {
                if i == j {
                    diag[i]
                } else if i.abs_diff(j) == 1 {
                    off[i.min(j)]
                } else {
                    0.0
                }
            }
            Storage::Laplacian2d { nx, cx, cy, .. } => {
                let nx = *nx;
                if i == j {
                    2.0 * cx + 2.0 * cy
                } else if i.abs_diff(j) == 1 && i / nx == j / nx {
                    -cx
                } else if i.abs_diff(j) == nx {
                    -cy
                } else {
                    0.0
                }
            }
            Storage::Dense(m) => m[(i, j)],
            Storage::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    0.0
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j))
    }

    /// Factor `p I + q A` for repeated direct solves. Fails if the
    /// combination is not positive definite.
    pub fn factor_affine(&self, p: f64, q: f64) -> Result<AffineFactor> {
        let n = self.dim;
        match &self.storage {
            Storage::Diagonal(d) => {
                let piv: Vec<f64> = d.iter().map(|di| p + q * di).collect();
                if let Some(v) = piv.iter().find(|v| !(**v > 0.0)) {
                    return Err(Error::NotPositiveDefinite(format!("diagonal pivot {v:e}")));
                }
                Ok(AffineFactor::Diagonal(piv))
            }
            Storage::Tridiagonal { .. } | Storage::Laplacian2d { .. } => {
                let bw = match &self.storage {
                    Storage::Laplacian2d { nx, .. } => *nx,
                    _ => 1,
                };
                let chol = BandCholesky::factor(n, bw, |i, j| {
                    let a = q * self.entry(i, j);
                    if i == j {
                        p + a
                    } else {
                        a
                    }
                })?;
                Ok(AffineFactor::Band(chol))
            }
            Storage::Dense(m) => {
                let mut b = m * q;
                for i in 0..n {
                    b[(i, i)] += p;
                }
                let chol = b
                    .cholesky()
                    .ok_or_else(|| Error::NotPositiveDefinite("dense Cholesky failed".into()))?;
                Ok(AffineFactor::Dense(chol))
            }
        }
    }

    /// Direct solve of `(p I + q A) x = rhs`.
    pub fn solve_affine(&self, p: f64, q: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(rhs)?;
        Ok(self.factor_affine(p, q)?.solve(rhs))
    }
}

/// Reusable factorization of `p I + q A`.
#[derive(Debug, Clone)]
pub enum AffineFactor {
    Diagonal(Vec<f64>),
    Band(BandCholesky),
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
}

impl AffineFactor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            AffineFactor::Diagonal(piv) => rhs.iter().zip(piv).map(|(r, p)| r / p).collect(),
            AffineFactor::Band(c) => c.solve(rhs),
            AffineFactor::Dense(c) => {
                let b = nalgebra::DVector::from_column_slice(rhs);
                c.solve(&b).as_slice().to_vec()
            }
        }
    }
}

/// Ascending eigenvalues with an orthonormal eigenbasis stored column-wise.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigenpairs {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Expansion coefficients `<v, psi_k>`.
    pub fn coefficients(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok((0..self.dim())
            .map(|k| dot(self.vectors.column(k).as_slice(), v))
            .collect())
    }

    /// `sum_k c_k psi_k`
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (k, ck) in coeffs.iter().enumerate() {
            let col = self.vectors.column(k);
            for (o, p) in out.iter_mut().zip(col.iter()) {
                *o += ck * p;
            }
        }
        out
    }

    fn check_positive(&self) -> Result<()> {
        match self.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            Some((index, &value)) => Err(Error::NonpositiveEigenvalue { index, value }),
            None => Ok(()),
        }
    }
}

/// Full dense eigendecomposition, refusing dimensions above [`DEFAULT_ORACLE_CAP`].
pub fn spectral_oracle(op: &SpdOperator) -> Result<Eigenpairs> {
    spectral_oracle_capped(op, DEFAULT_ORACLE_CAP)
}

pub fn spectral_oracle_capped(op: &SpdOperator, cap: usize) -> Result<Eigenpairs> {
    let n = op.dim();
    if n > cap {
        return Err(Error::OracleCapExceeded { dim: n, cap });
    }
    if let Storage::Diagonal(d) = &op.storage {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let values = order.iter().map(|&i| d[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |i, k| if i == order[k] { 1.0 } else { 0.0 });
        return Ok(Eigenpairs { values, vectors });
    }
    let eig = SymmetricEigen::new(op.to_dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    Ok(Eigenpairs { values, vectors })
}

/// `sum_k f(lambda_k) <v, psi_k> psi_k` for an arbitrary scalar map.
pub fn oracle_apply_map(
    eig: &Eigenpairs,
    v: &[f64],
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut c = eig.coefficients(v)?;
    for (ck, &lam) in c.iter_mut().zip(&eig.values) {
        *ck *= f(lam)?;
    }
    Ok(eig.synthesize(&c))
}

/// `A^{alpha_signed} v` through the eigenbasis.
pub fn oracle_apply_function(eig: &Eigenpairs, alpha_signed: f64, v: &[f64]) -> Result<Vec<f64>> {
    eig.check_positive()?;
    oracle_apply_map(eig, v, |lam| Ok(lam.powf(alpha_signed)))
}

/// `(sum_k lambda_k^power <v, psi_k>^2)^{1/2}`, the norm induced by `D = A^power`.
pub fn d_norm(eig: &Eigenpairs, power: f64, v: &[f64]) -> Result<f64> {
    eig.check_positive()?;
    let c = eig.coefficients(v)?;
    Ok(c.iter()
        .zip(&eig.values)
        .map(|(ck, lam)| lam.powf(power) * ck * ck)
        .sum::<f64>()
        .sqrt())
}

/// Exponent `alpha` of `A^alpha` together with the shift `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracPowerSpec {
    pub alpha: f64,
    pub delta: f64,
}

impl FracPowerSpec {
    pub fn new(alpha: f64, delta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(delta > 0.0) {
            return Err(invalid("delta", "must be positive"));
        }
        Ok(Self { alpha, delta })
    }

    /// Bind to an operator: `delta` becomes its spectral lower bound.
    pub fn for_operator(alpha: f64, op: &SpdOperator) -> Result<Self> {
        Self::new(alpha, op.spectral_lower())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("{alpha} is outside (0, 1)")));
    }
    Ok(())
}

/// As [`check_alpha`] but admitting `alpha = 1`.
pub(crate) fn check_alpha_unit(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("alpha", format!("{alpha} is outside (0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use crate::rng::Lcg;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model_operators() -> Vec<SpdOperator> {
        vec![
            SpdOperator::laplacian_1d(1).unwrap(),
            SpdOperator::laplacian_1d(15).unwrap(),
            SpdOperator::laplacian_2d(3, 4).unwrap(),
            SpdOperator::laplacian_2d(7, 7).unwrap(),
            SpdOperator::diagonal(vec![3.0, 1.0, 7.5]).unwrap(),
        ]
    }

    #[test]
    fn laplacian_1d_single_point() {
        let op = SpdOperator::laplacian_1d(1).unwrap();
        assert_eq!(op.apply(&[1.0]), vec![8.0]);
        assert_relative_eq!(op.spectral_lower(), 8.0, max_relative = 1e-15);
        assert_eq!(op.spectral_upper(), op.spectral_lower());
    }

    #[test]
    fn laplacian_1d_three_points() {
        let op = SpdOperator::laplacian_1d(3).unwrap();
        let s2 = 2f64.sqrt();
        let ev = op.known_eigenvalues().unwrap();
        assert_relative_eq!(ev[0], 16.0 * (2.0 - s2), max_relative = 1e-14);
        assert_relative_eq!(ev[1], 32.0, max_relative = 1e-14);
        assert_relative_eq!(ev[2], 16.0 * (2.0 + s2), max_relative = 1e-14);
        let eig = spectral_oracle(&op).unwrap();
        for (a, b) in eig.values.iter().zip(ev) {
            assert_relative_eq!(a, b, max_relative = 1e-13);
        }
    }

    #[test]
    fn laplacian_1d_lower_bound_approaches_pi_squared() {
        let op = SpdOperator::laplacian_1d(63).unwrap();
        let pi2 = PI * PI;
        assert!((op.spectral_lower() - pi2).abs() / pi2 < 1e-3);
    }

    #[test]
    fn rejects_empty_grids() {
        assert!(SpdOperator::laplacian_1d(0).is_err());
        assert!(SpdOperator::laplacian_2d(0, 3).is_err());
        assert!(SpdOperator::laplacian_2d(3, 0).is_err());
    }

    #[test]
    fn laplacian_2d_tensor_sum_spectrum() {
        let op = SpdOperator::laplacian_2d(1, 1).unwrap();
        assert_eq!(op.apply(&[1.0]), vec![16.0]);

        let op = SpdOperator::laplacian_2d(3, 1).unwrap();
        let one_d = SpdOperator::laplacian_1d(3).unwrap();
        let eig = spectral_oracle(&op).unwrap();
        for (a, b) in eig.values.iter().zip(one_d.known_eigenvalues().unwrap()) {
            assert_relative_eq!(*a, b + 8.0, max_relative = 1e-13);
        }

        let op = SpdOperator::laplacian_2d(7, 7).unwrap();
        let h = 1.0 / 8.0;
        let expect = 2.0 * 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert_relative_eq!(op.spectral_lower(), expect, max_relative = 1e-14);
        let eig = spectral_oracle(&op).unwrap();
        assert_relative_eq!(eig.values[0], expect, max_relative = 1e-12);
    }

    #[test]
    fn oracle_diagonal_is_standard_basis() {
        let op = SpdOperator::diagonal(vec![1.0, 4.0, 9.0]).unwrap();
        let eig = spectral_oracle(&op).unwrap();
        assert_eq!(eig.values, vec![1.0, 4.0, 9.0]);
        assert_eq!(eig.vectors, DMatrix::identity(3, 3));
    }

    #[test]
    fn oracle_reconstructs_random_spd() {
        let mut g = Lcg::new(11);
        let b = DMatrix::from_fn(10, 10, |_, _| g.next_signed());
        let a = &b * b.transpose() + DMatrix::identity(10, 10);
        let upper = a.norm();
        let op = SpdOperator::dense(a.clone(), 1.0, upper).unwrap();
        let eig = spectral_oracle(&op).unwrap();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig.values.clone()));
        let rec = &eig.vectors * lam * eig.vectors.transpose();
        assert!((rec - a).amax() <= 1e-10);
    }

    #[test]
    fn oracle_refuses_above_cap() {
        let op = SpdOperator::laplacian_1d(20).unwrap();
        assert!(matches!(
            spectral_oracle_capped(&op, 10),
            Err(Error::OracleCapExceeded { dim: 20, cap: 10 })
        ));
    }

    #[test]
    fn eigenpair_invariants_hold() {
        for op in model_operators() {
            let eig = spectral_oracle(&op).unwrap();
            let n = op.dim();
            for k in 0..n {
                if k > 0 {
                    assert!(eig.values[k - 1] <= eig.values[k]);
                }
                let psi = eig.vectors.column(k).as_slice().to_vec();
                let apsi = op.apply(&psi);
                let res: Vec<f64> = apsi
                    .iter()
                    .zip(&psi)
                    .map(|(a, p)| a - eig.values[k] * p)
                    .collect();
                assert!(norm(&res) <= 1e-10 * eig.values[k]);
                for j in 0..n {
                    let ip = dot(eig.vectors.column(j).as_slice(), &psi);
                    let e = if j == k { 1.0 } else { 0.0 };
                    assert!((ip - e).abs() <= 1e-12);
                }
                let lo = op.spectral_lower() * (1.0 - 1e-10);
                let hi = op.spectral_upper() * (1.0 + 1e-10);
                assert!(eig.values[k] >= lo && eig.values[k] <= hi);
            }
        }
    }

    #[test]
    fn oracle_alpha_one_reproduces_apply() {
        let mut g = Lcg::new(3);
        for op in model_operators() {
            let eig = spectral_oracle(&op).unwrap();
            for _ in 0..20 {
                let v = g.vector(op.dim());
                let a = op.apply(&v);
                let b = oracle_apply_function(&eig, 1.0, &v).unwrap();
                assert!(norm(&crate::linalg::sub(&a, &b)) <= 1e-10 * norm(&a));
            }
        }
    }

    #[test]
    fn oracle_apply_function_examples() {
        let eig = spectral_oracle(&SpdOperator::diagonal(vec![4.0]).unwrap()).unwrap();
        assert_eq!(
            oracle_apply_function(&eig, -0.5, &[1.0]).unwrap(),
            vec![0.5]
        );

        let op = SpdOperator::laplacian_1d(5).unwrap();
        let eig = spectral_oracle(&op).unwrap();
        let v = Lcg::new(1).vector(5);
        let w = oracle_apply_function(&eig, 0.0, &v).unwrap();
        for (a, b) in v.iter().zip(w) {
            assert!((a - b).abs() < 1e-14);
        }

        let eig = spectral_oracle(&SpdOperator::diagonal(vec![2.0, 5.0]).unwrap()).unwrap();
        assert_eq!(
            oracle_apply_function(&eig, -1.0, &[1.0, 1.0]).unwrap(),
            vec![0.5, 0.2]
        );
    }

    #[test]
    fn rejects_nonpositive_eigenvalues() {
        let eig = Eigenpairs {
            values: vec![-1.0, 2.0],
            vectors: DMatrix::identity(2, 2),
        };
        assert!(matches!(
            oracle_apply_function(&eig, -0.5, &[1.0, 1.0]),
            Err(Error::NonpositiveEigenvalue { index: 0, .. })
        ));
        assert!(d_norm(&eig, 0.0, &[1.0, 1.0]).is_err());
        assert!(SpdOperator::diagonal(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn d_norm_examples() {
        let eig = spectral_oracle(&SpdOperator::diagonal(vec![1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(d_norm(&eig, 0.0, &[3.0, 4.0]).unwrap(), 5.0);
        let eig = spectral_oracle(&SpdOperator::diagonal(vec![4.0]).unwrap()).unwrap();
        assert_relative_eq!(
            d_norm(&eig, 0.5, &[1.0]).unwrap(),
            2f64.sqrt(),
            max_relative = 1e-15
        );
        let eig = spectral_oracle(&SpdOperator::diagonal(vec![1.0, 16.0]).unwrap()).unwrap();
        assert_relative_eq!(
            d_norm(&eig, -1.0, &[1.0, 1.0]).unwrap(),
            (1.0f64 + 1.0 / 16.0).sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn a_priori_estimates_hold_for_oracle_solutions() {
        let mut g = Lcg::new(5);
        for op in model_operators() {
            let eig = spectral_oracle(&op).unwrap();
            for alpha in [0.25, 0.5, 0.75] {
                let delta_f = op.spectral_lower().powf(alpha);
                let phi = g.vector(op.dim());
                let u = oracle_apply_function(&eig, -alpha, &phi).unwrap();
                let pn = norm(&phi);
                assert!(
                    d_norm(&eig, alpha, &u).unwrap() <= delta_f.powf(-0.5) * pn * (1.0 + 1e-10)
                );
                assert!(norm(&u) <= pn / delta_f * (1.0 + 1e-10));
            }
        }
    }

    #[test]
    fn affine_solves_agree_across_storage() {
        let op = SpdOperator::laplacian_2d(4, 3).unwrap();
        let dense =
            SpdOperator::dense(op.to_dense(), op.spectral_lower(), op.spectral_upper()).unwrap();
        let rhs = Lcg::new(9).vector(12);
        let x1 = op.solve_affine(2.0, 0.5, &rhs).unwrap();
        let x2 = dense.solve_affine(2.0, 0.5, &rhs).unwrap();
        let ax: Vec<f64> = op
            .apply(&x1)
            .iter()
            .zip(&x1)
            .map(|(a, x)| 0.5 * a + 2.0 * x)
            .collect();
        assert!(norm(&crate::linalg::sub(&ax, &rhs)) < 1e-12 * norm(&rhs));
        assert!(norm(&crate::linalg::sub(&x1, &x2)) < 1e-12 * norm(&x1));
    }

    #[test]
    fn frac_power_spec_validation() {
        assert!(FracPowerSpec::new(0.0, 1.0).is_err());
        assert!(FracPowerSpec::new(1.0, 1.0).is_err());
        assert!(FracPowerSpec::new(0.5, 0.0).is_err());
        let op = SpdOperator::laplacian_1d(3).unwrap();
        let s = FracPowerSpec::for_operator(0.3, &op).unwrap();
        assert_eq!(s.delta, op.spectral_lower());
    }

    proptest! {
        #[test]
        fn model_operators_are_symmetric_and_definite(seed in 0u64..1000, idx in 0usize..4) {
            let op = &model_operators()[idx];
            let mut g = Lcg::new(seed);
            let v = g.vector(op.dim());
            let w = g.vector(op.dim());
            let lhs = dot(&op.apply(&v), &w);
            let rhs = dot(&v, &op.apply(&w));
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1e-300));
            let nv = norm(&v);
            let unit: Vec<f64> = v.iter().map(|x| x / nv).collect();
            prop_assert!(dot(&op.apply(&unit), &unit) >= op.spectral_lower() * (1.0 - 1e-10));
        }

        #[test]
        fn parseval(seed in 0u64..1000) {
            let op = SpdOperator::laplacian_2d(3, 3).unwrap();
            let eig = spectral_oracle(&op).unwrap();
            let v = Lcg::new(seed).vector(9);
            let a = d_norm(&eig, 0.0, &v).unwrap();
            prop_assert!((a - norm(&v)).abs() <= 1e-12 * norm(&v));
        }
    }
}
