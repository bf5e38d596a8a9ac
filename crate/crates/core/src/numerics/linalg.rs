//! Dense Hermitian / symmetric kernels on top of `nalgebra`.
//!
//! All tolerances are relative to the Frobenius norm of the input so the same
//! code works for ohm-scale impedance matrices and 1e-12-scale channel gains.

use nalgebra::{Cholesky, ComplexField, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{domain, numerical, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type CVector = DVector<Complex64>;

/// Relative asymmetry accepted (and removed) by the Hermitian kernels.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Negative eigenvalues down to `-PSD_CLAMP_TOL * ||A||` are treated as rounding noise.
pub const PSD_CLAMP_TOL: f64 = 1e-9;

/// Eigen-decomposition `A = Q diag(values) Q^H` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigenPair<T: ComplexField<RealField = f64>> {
    /// Eigenvalues in descending order.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors, column `j` pairs with `values[j]`.
    pub vectors: DMatrix<T>,
}

impl<T: ComplexField<RealField = f64>> EigenPair<T> {
    /// `Q diag(g(values)) Q^H`.
    pub fn recompose(&self, g: impl Fn(f64) -> f64) -> DMatrix<T> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = T::from_real(g(self.values[j]));
            for v in scaled.column_mut(j).iter_mut() {
                *v = v.clone() * s.clone();
            }
        }
        scaled * self.vectors.adjoint()
    }
}

pub fn frobenius<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    a.iter().map(|v| v.clone().modulus_squared()).sum::<f64>().sqrt()
}

fn require_square<T>(a: &DMatrix<T>, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(domain(format!(
            "{what}: expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

/// Checks `||A - A^H|| <= HERMITIAN_TOL * ||A||` and returns `(A + A^H) / 2`.
pub fn symmetrize<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    require_square(a, "symmetrize")?;
    let adj = a.adjoint();
    let norm = frobenius(a);
    let skew = frobenius(&(a - &adj));
    if skew > HERMITIAN_TOL * norm {
        return Err(domain(format!(
            "matrix is not Hermitian: ||A - A^H|| = {skew:.3e} exceeds {:.1e} * ||A|| = {:.3e}",
            HERMITIAN_TOL,
            HERMITIAN_TOL * norm
        )));
    }
    Ok((a + adj).scale(0.5))
}

/// Eigen-decomposition of a Hermitian (or real symmetric) matrix, values descending.
pub fn hermitian_eig<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<EigenPair<T>> {
    let sym = symmetrize(a)?;
    let n = sym.nrows();
    if n == 0 {
        return Ok(EigenPair {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenPair { values, vectors })
}

/// Principal square root of a Hermitian PSD matrix.
///
/// Eigenvalues in `[-PSD_CLAMP_TOL * ||A||, 0)` are clamped to zero; anything
/// more negative is rejected.
pub fn psd_sqrt<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let eig = hermitian_eig(a)?;
    let floor = -PSD_CLAMP_TOL * frobenius(a);
    if let Some(min) = eig.values.iter().copied().reduce(f64::min) {
        if min < floor {
            return Err(numerical(format!(
                "matrix is not positive semi-definite: eigenvalue {min:.3e} below {floor:.3e}"
            )));
        }
    }
    Ok(eig.recompose(|v| v.max(0.0).sqrt()))
}

/// Largest root of `|A - t B| = 0` for real symmetric `A` and symmetric PD `B`,
/// together with a maximizing vector.
///
/// Reduces to a standard problem through `B = L L^T` and `L^-1 A L^-T`.
pub fn generalized_eig_max(a: &RMatrix, b: &RMatrix) -> Result<(f64, DVector<f64>)> {
    let n = require_square(a, "generalized_eig_max")?;
    if require_square(b, "generalized_eig_max")? != n {
        return Err(domain("generalized_eig_max: A and B differ in size"));
    }
    if n == 0 {
        return Err(domain("generalized_eig_max: empty matrices"));
    }
    let a = symmetrize(a)?;
    let b = symmetrize(b)?;
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| numerical("generalized_eig_max: B is not positive definite"))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| numerical("generalized_eig_max: Cholesky factor is singular"))?;
    let c = &l_inv * a * l_inv.transpose();
    let eig = hermitian_eig(&c)?;
    let y = eig.vectors.column(0).into_owned();
    // x = L^-T y
    let x = l_inv.transpose() * y;
    Ok((eig.values[0], x))
}

/// Solves `A X = B` through LU, naming the factor on failure.
pub fn solve(a: &CMatrix, b: &CMatrix, what: &str) -> Result<CMatrix> {
    require_square(a, what)?;
    a.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
        .ok_or_else(|| numerical(format!("{what} is singular")))
}

pub fn inverse(a: &CMatrix, what: &str) -> Result<CMatrix> {
    let n = require_square(a, what)?;
    solve(a, &CMatrix::identity(n, n), what)
}

/// Cholesky factor of a Hermitian positive definite matrix.
///
/// The complex square root never fails, so definiteness is checked on the
/// diagonal of the factor rather than trusted to the factorisation.
pub fn hermitian_cholesky(a: &CMatrix, what: &str) -> Result<Cholesky<Complex64, Dyn>> {
    let sym = symmetrize(a)?;
    let chol = sym
        .cholesky()
        .ok_or_else(|| numerical(format!("{what} is not positive definite")))?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    if !ok {
        return Err(numerical(format!("{what} is not positive definite")));
    }
    Ok(chol)
}

/// `log2 |A|` of a Hermitian positive definite matrix via Cholesky.
pub fn hermitian_log2_det(a: &CMatrix) -> Result<f64> {
    let chol = hermitian_cholesky(a, "log-determinant argument")?;
    let l = chol.l_dirty();
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.log2()).sum::<f64>())
}
