//! Small dense linear algebra helpers.
//!
//! Every system in this crate is tiny (at most a dozen rows, decision
//! dimension <= 5), so the routines here favor robustness over speed:
//! symmetric eigendecomposition by cyclic Jacobi, pseudoinverse-based
//! least squares, and a plain Cholesky solve for Newton steps.

use crate::scalar::Scalar;

pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<F: Scalar>(a: &[F]) -> F {
    dot(a, a).sqrt()
}

pub fn sub<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn scale<F: Scalar>(a: &[F], s: F) -> Vec<F> {
    a.iter().map(|&x| x * s).collect()
}

/// `a + s * b`
pub fn add_scaled<F: Scalar>(a: &[F], s: F, b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

pub fn dist<F: Scalar>(a: &[F], b: &[F]) -> F {
    norm(&sub(a, b))
}

/// Rows-of-`mat` times `v`.
pub fn mat_vec<F: Scalar>(mat: &[Vec<F>], v: &[F]) -> Vec<F> {
    mat.iter().map(|row| dot(row, v)).collect()
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with `eigenvectors[k]` the unit
/// eigenvector for `eigenvalues[k]`.
pub fn sym_eig<F: Scalar>(a: &[Vec<F>]) -> (Vec<F>, Vec<Vec<F>>) {
    let n = a.len();
    let mut m: Vec<Vec<F>> = a.to_vec();
    let mut v: Vec<Vec<F>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { F::one() } else { F::zero() }).collect())
        .collect();
    let tol = F::epsilon() * F::c(16.0);
    for _sweep in 0..64 {
        let mut off = F::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + m[i][j] * m[i][j];
            }
        }
        let scale: F = (0..n).map(|i| m[i][i] * m[i][i]).sum::<F>() + off + F::min_positive_value();
        if off <= tol * tol * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() <= F::min_positive_value() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (F::c(2.0) * m[p][q]);
                let t = {
                    let s = if theta >= F::zero() { F::one() } else { -F::one() };
                    s / (theta.abs() + (theta * theta + F::one()).sqrt())
                };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigvals: Vec<F> = (0..n).map(|i| m[i][i]).collect();
    let eigvecs: Vec<Vec<F>> = (0..n).map(|k| (0..n).map(|i| v[i][k]).collect()).collect();
    (eigvals, eigvecs)
}

/// Minimum-norm solution of `G x = rhs` for symmetric positive semidefinite
/// `G`, via eigendecomposition with a relative rank cutoff.
///
/// Returns the solution and the numerical rank.
pub fn psd_pinv_solve<F: Scalar>(g: &[Vec<F>], rhs: &[F], rel_tol: F) -> (Vec<F>, usize) {
    let n = g.len();
    let (vals, vecs) = sym_eig(g);
    let max_abs = vals.iter().fold(F::zero(), |acc, &x| acc.max(x.abs()));
    let cutoff = rel_tol * max_abs.max(F::min_positive_value());
    let mut x = vec![F::zero(); n];
    let mut rank = 0;
    for (lam, vec) in vals.iter().zip(&vecs) {
        if lam.abs() > cutoff {
            rank += 1;
            let coef = dot(vec, rhs) / *lam;
            for (xi, &vi) in x.iter_mut().zip(vec) {
                *xi = *xi + coef * vi;
            }
        }
    }
    (x, rank)
}

/// Minimum-norm least-squares solution of `M x ~= rhs`, where `M` is given
/// by columns. Returns `(x, residual_norm)`.
pub fn least_squares_cols<F: Scalar>(cols: &[Vec<F>], rhs: &[F], rel_tol: F) -> (Vec<F>, F) {
    let k = cols.len();
    let mut gram = vec![vec![F::zero(); k]; k];
    for i in 0..k {
        for j in 0..k {
            gram[i][j] = dot(&cols[i], &cols[j]);
        }
    }
    let mtb: Vec<F> = cols.iter().map(|c| dot(c, rhs)).collect();
    let (x, _) = psd_pinv_solve(&gram, &mtb, rel_tol);
    let mut fit = vec![F::zero(); rhs.len()];
    for (xi, c) in x.iter().zip(cols) {
        fit = add_scaled(&fit, *xi, c);
    }
    (x, dist(&fit, rhs))
}

/// Cholesky solve of `A x = b` for symmetric positive definite `A`.
///
/// Returns `None` when a pivot falls below `pivot_tol` times the largest
/// diagonal entry (singular to working precision).
pub fn spd_solve<F: Scalar>(a: &[Vec<F>], b: &[F], pivot_tol: F) -> Option<Vec<F>> {
    let n = a.len();
    let diag_max = (0..n).fold(F::min_positive_value(), |acc, i| acc.max(a[i][i].abs()));
    let mut l = vec![vec![F::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if s <= pivot_tol * diag_max {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // forward then backward substitution
    let mut y = vec![F::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![F::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s = s - l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}
