//! Dense symmetric linear algebra used by every certificate: cyclic Jacobi
//! eigendecomposition, pseudoinverses, matrix square roots, and the global
//! sign-test tolerance.
//!
//! The matrices in this crate are small (a few hundred rows at most), so a
//! deterministic Jacobi sweep is preferred over blocked algorithms: given the
//! same input bytes it produces the same output bytes on every run, which the
//! reproducibility contract of the CLI relies on.

use nalgebra::{DMatrix, DVector};

/// Base relative tolerance for eigenvalue sign tests.
pub const TOL_BASE: f64 = 1e-9;

/// Relative truncation threshold for pseudoinverses.
pub const PINV_TRUNCATION: f64 = 1e-12;

/// Scale-aware tolerance: `base * (1 + scale)` where `scale` is a spectral
/// magnitude of the matrix under test.
pub fn tol_for(base: f64, scale: f64) -> f64 {
    base * (1.0 + scale.abs())
}

/// Replaces a computed symmetric matrix by `(X + X^T)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(m.nrows(), m.ncols(), "symmetrize needs a square matrix");
    let mut out = m.clone();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors, column `i` pairs with `values[i]`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn lambda_min(&self) -> f64 {
        self.values[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Spectral norm (largest |eigenvalue|).
    pub fn spectral_norm(&self) -> f64 {
        self.lambda_min().abs().max(self.lambda_max().abs())
    }

    /// Eigenvector of the smallest eigenvalue.
    pub fn min_vector(&self) -> DVector<f64> {
        self.vectors.column(0).into_owned()
    }
}

/// Cyclic Jacobi eigendecomposition. The input is symmetrized first; the
/// iteration is deterministic given the input.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "sym_eigen needs a square matrix");
    let mut a = symmetrize(m);
    let mut v = DMatrix::<f64>::identity(n, n);
    if n <= 1 {
        return sorted(a.diagonal(), v);
    }

    // Off-diagonal Frobenius norm squared.
    let off2 = |a: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        s
    };
    let scale = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);
    let stop = (f64::EPSILON * scale) * (f64::EPSILON * scale) * (n * n) as f64;

    for _sweep in 0..60 {
        if off2(&a) <= stop {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::EPSILON * scale * 1e-3 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                // Stable tangent of the rotation angle.
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    sorted(a.diagonal(), v)
}

fn sorted(values: DVector<f64>, vectors: DMatrix<f64>) -> SymEigen {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut vals = DVector::zeros(n);
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vals[col] = values[i];
        vecs.set_column(col, &vectors.column(i));
    }
    SymEigen {
        values: vals,
        vectors: vecs,
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).lambda_min()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).lambda_max()
}

/// Spectral norm of a symmetric matrix.
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).spectral_norm()
}

/// Spectral norm of a general rectangular matrix, via `lambda_max(A^T A)`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    lambda_max(&symmetrize(&gram)).max(0.0).sqrt()
}

/// Applies `f` to the eigenvalues of a symmetric matrix and reassembles.
fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    let scale = eig.spectral_norm();
    let n = m.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = f(eig.values[i], scale);
    }
    symmetrize(&(&eig.vectors * d * eig.vectors.transpose()))
}

/// Pseudoinverse of a symmetric matrix (eigenvalues below
/// `PINV_TRUNCATION * sigma_max` are truncated to zero).
pub fn sym_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, |lambda, scale| {
        if lambda.abs() > PINV_TRUNCATION * scale {
            1.0 / lambda
        } else {
            0.0
        }
    })
}

/// Square root of a positive semidefinite matrix; small negative eigenvalues
/// from rounding are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, |lambda, _| lambda.max(0.0).sqrt())
}

/// Pseudo inverse square root of a positive semidefinite matrix.
pub fn psd_inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, |lambda, scale| {
        if lambda > PINV_TRUNCATION * scale {
            1.0 / lambda.sqrt()
        } else {
            0.0
        }
    })
}

/// Moore-Penrose pseudoinverse of a rectangular matrix (SVD-based, singular
/// values below `PINV_TRUNCATION * sigma_max` truncated).
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    svd.pseudo_inverse(PINV_TRUNCATION * smax.max(f64::MIN_POSITIVE))
        .expect("svd pseudo_inverse")
}

/// Singular values of a rectangular matrix, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Smallest singular value (0 for empty matrices).
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    if sv.len() < m.nrows().min(m.ncols()) || sv.is_empty() {
        0.0
    } else {
        sv[sv.len() - 1]
    }
}

/// Full row rank test with the relative threshold `sigma_min > 1e-8 * sigma_max`.
pub fn full_row_rank(m: &DMatrix<f64>) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    if m.ncols() < m.nrows() {
        return false;
    }
    let sv = singular_values(m);
    if sv.len() < m.nrows() {
        return false;
    }
    let smax = sv[0];
    sv[m.nrows() - 1] > 1e-8 * smax.max(f64::MIN_POSITIVE)
}

/// `lambda_max(P)/lambda_min(P)` for symmetric positive definite `P`.
pub fn condition_number_spd(p: &DMatrix<f64>) -> f64 {
    let eig = sym_eigen(p);
    eig.lambda_max() / eig.lambda_min()
}
