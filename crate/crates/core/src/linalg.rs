//! Dense linear-algebra kernel shared by the finite-dimensional modules.
//!
//! Thin, validated wrappers around `nalgebra` decompositions. Every function
//! is pure; eigenvalues come back in lexicographic `(Re, Im)` order so that
//! downstream tables are deterministic.

use nalgebra::{Cholesky, DMatrix, DVector, Schur, SymmetricEigen};

pub use nalgebra::Complex;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative cutoff below which an eigenvalue of a PSD matrix counts as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of a square matrix, sorted by `(Re, Im)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex<f64>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Smallest real part (the spectral abscissa of `-A`).
    pub fn min_real(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.im.abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn check_finite(a: &Matrix, what: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn check_square(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() == a.ncols() && a.nrows() > 0 {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square and non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// Eigenvalues of a general real square matrix via the real Schur form.
pub fn eigenvalues(a: &Matrix) -> Result<Spectrum> {
    check_square(a, "eigenvalue input")?;
    check_finite(a, "eigenvalue input")?;
    let schur = Schur::try_new(a.clone(), SCHUR_EPS, SCHUR_MAX_ITER).ok_or(
        Error::NoConvergence {
            iterations: SCHUR_MAX_ITER,
        },
    )?;
    let mut eigenvalues: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(Spectrum { eigenvalues })
}

/// Symmetric eigendecomposition with eigenvalues ascending and matching
/// eigenvector columns.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_square(a, "symmetric eigen input")?;
    check_finite(a, "symmetric eigen input")?;
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, SCHUR_EPS, SCHUR_MAX_ITER).ok_or(
        Error::NoConvergence {
            iterations: SCHUR_MAX_ITER,
        },
    )?;
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn sym_min_eigenvalue(a: &Matrix) -> Result<f64> {
    Ok(symmetric_eigen(a)?.0[0])
}

/// Singular values in descending order.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    check_finite(a, "singular value input")?;
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Spectral norm `sigma_max(a)`.
pub fn operator_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Ratio of extreme singular values; infinite for singular input.
pub fn condition_number(a: &Matrix) -> Result<f64> {
    let s = singular_values(a)?;
    let max = s[0];
    let min = *s.last().unwrap();
    if min == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(max / min)
}

pub fn asymmetry(a: &Matrix) -> f64 {
    (a - a.transpose()).abs().max()
}

/// Orthogonal projector onto the kernel of a symmetric PSD matrix.
///
/// Eigenvalues with magnitude below `tol * max(1, |A|_2)` are treated as zero.
pub fn kernel_projection(a: &Matrix, tol: f64) -> Result<Matrix> {
    check_square(a, "kernel projection input")?;
    check_finite(a, "kernel projection input")?;
    let (values, vectors) = symmetric_eigen(a)?;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let cutoff = tol * scale;
    let asym = asymmetry(a);
    if asym > cutoff.max(1e-12) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    if values[0] < -cutoff {
        return Err(Error::NotPsd {
            min_eigenvalue: values[0],
        });
    }
    let n = a.nrows();
    let mut pi = Matrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        if lambda.abs() <= cutoff {
            let v = vectors.column(k);
            pi += v * v.transpose();
        }
    }
    Ok(pi)
}

/// Orthonormal basis (as columns) of the range of an orthogonal projector.
pub fn projector_range_basis(pi: &Matrix) -> Result<Matrix> {
    let (values, vectors) = symmetric_eigen(pi)?;
    let cols: Vec<usize> = (0..values.len()).filter(|&k| values[k] > 0.5).collect();
    let n = pi.nrows();
    Ok(Matrix::from_fn(n, cols.len(), |r, c| vectors[(r, cols[c])]))
}

/// `exp(A)` by scaling and squaring with Pade approximation.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    check_square(a, "exponential input")?;
    check_finite(a, "exponential input")?;
    let e = a.exp();
    check_finite(&e, "matrix exponential")?;
    Ok(e)
}

/// Solution of `dphi/dt = -A phi` at time `t`.
pub fn propagate_linear(a: &Matrix, phi0: &Vector, t: f64) -> Result<Vector> {
    check_square(a, "propagator")?;
    if a.nrows() != phi0.len() {
        return Err(Error::Dimension(format!(
            "propagator is {}x{} but state has length {}",
            a.nrows(),
            a.ncols(),
            phi0.len()
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("time must be nonnegative, got {t}")));
    }
    Ok(expm(&(a * -t))? * phi0)
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    check_square(a, "SPD input")?;
    check_finite(a, "SPD input")?;
    let sym = (a + a.transpose()) * 0.5;
    let chol = Cholesky::new(sym).ok_or(Error::NotPositiveDefinite("Cholesky factorization failed"))?;
    Ok(chol.inverse())
}

/// Solve `A X = B` by partial-pivot LU.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_square(a, "linear system")?;
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension("right-hand side rows differ from system".into()));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::NotPositiveDefinite("singular linear system"))
}

/// Place four blocks into one matrix.
pub fn block2x2(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Result<Matrix> {
    let (n, m) = (a.nrows(), d.ncols());
    if a.ncols() != n
        || d.nrows() != m
        || b.nrows() != n
        || b.ncols() != m
        || c.nrows() != m
        || c.ncols() != n
    {
        return Err(Error::Dimension("inconsistent block shapes".into()));
    }
    let mut out = Matrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((0, n), (n, m)).copy_from(b);
    out.view_mut((n, 0), (m, n)).copy_from(c);
    out.view_mut((n, n), (m, m)).copy_from(d);
    Ok(out)
}

pub fn block_diag(a: &Matrix, d: &Matrix) -> Result<Matrix> {
    block2x2(
        a,
        &Matrix::zeros(a.nrows(), d.ncols()),
        &Matrix::zeros(d.nrows(), a.ncols()),
        d,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spectrum() {
        let s = eigenvalues(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(s.len(), 3);
        for z in &s.eigenvalues {
            assert!((z.re - 1.0).abs() < 1e-14 && z.im.abs() < 1e-14);
        }
    }

    #[test]
    fn rotation_generator_spectrum() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let s = eigenvalues(&a).unwrap();
        assert!(s.eigenvalues[0].re.abs() < 1e-14);
        assert!((s.eigenvalues[0].im + 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1].im - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_square_is_rejected() {
        let err = eigenvalues(&Matrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn simple_singular_values() {
        assert_eq!(singular_values(&Matrix::identity(2, 2)).unwrap(), vec![1.0, 1.0]);
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 10.0]));
        let s = singular_values(&d).unwrap();
        assert!((s[0] - 10.0).abs() < 1e-14 && (s[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_projection_cases() {
        let z = kernel_projection(&Matrix::zeros(3, 3), DEFAULT_RANK_TOL).unwrap();
        assert!((z - Matrix::identity(3, 3)).abs().max() < 1e-14);
        let i = kernel_projection(&Matrix::identity(3, 3), DEFAULT_RANK_TOL).unwrap();
        assert!(i.abs().max() < 1e-14);
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.0]));
        let p = kernel_projection(&d, DEFAULT_RANK_TOL).unwrap();
        let expect = Matrix::from_diagonal(&Vector::from_vec(vec![0.0, 1.0]));
        assert!((p - expect).abs().max() < 1e-14);
    }

    #[test]
    fn kernel_projection_contract_violations() {
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            kernel_projection(&asym, DEFAULT_RANK_TOL),
            Err(Error::NotSymmetric { .. })
        ));
        let neg = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -0.5]));
        assert!(matches!(
            kernel_projection(&neg, DEFAULT_RANK_TOL),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn propagate_trivial_cases() {
        let phi0 = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let same = propagate_linear(&Matrix::zeros(3, 3), &phi0, 7.0).unwrap();
        assert!((same - &phi0).norm() < 1e-14);
        let a = Matrix::identity(3, 3) * 0.7;
        let out = propagate_linear(&a, &phi0, 2.0).unwrap();
        assert!((out - &phi0 * (-1.4f64).exp()).norm() < 1e-13);
        assert!(propagate_linear(&a, &Vector::zeros(2), 1.0).is_err());
    }

    #[test]
    fn spd_inverse_rejects_indefinite() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.0]));
        assert!(spd_inverse(&a).is_err());
    }
}
