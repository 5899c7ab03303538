//! Small dense linear algebra kernels.
//!
//! The systems solved here are modest (a few hundred unknowns), so plain
//! textbook factorizations in f64 are sufficient and keep the crate free of
//! external BLAS/LAPACK linkage.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Returns the lower-triangular factor L with A = L·Lᵀ. Fails with
/// `RankDeficient` when a pivot falls below `rel_threshold` times the largest
/// diagonal entry of A; the failure is reported, never absorbed by silent
/// regularization.
pub fn cholesky(a: ArrayView2<f64>, rel_threshold: f64) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let diag_max = (0..n).map(|i| a[[i, i]].abs()).fold(0.0_f64, f64::max);
    let floor = rel_threshold * diag_max.max(f64::MIN_POSITIVE);
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > floor) {
            return Err(Error::RankDeficient(format!(
                "pivot {d:.3e} at column {j} below threshold {floor:.3e}"
            )));
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Ok(l)
}

/// Solve A·X = B for symmetric positive-definite A via Cholesky.
///
/// B holds one right-hand side per column.
pub fn spd_solve(a: ArrayView2<f64>, b: ArrayView2<f64>, rel_threshold: f64) -> Result<Array2<f64>> {
    let l = cholesky(a, rel_threshold)?;
    let n = l.nrows();
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} rows, matrix is {n}x{n}",
            b.nrows()
        )));
    }
    let mut x = b.to_owned();
    // Forward substitution L·Z = B, then back substitution Lᵀ·X = Z.
    for col in 0..x.ncols() {
        for i in 0..n {
            let mut s = x[[i, col]];
            for k in 0..i {
                s -= l[[i, k]] * x[[k, col]];
            }
            x[[i, col]] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = x[[i, col]];
            for k in (i + 1)..n {
                s -= l[[k, i]] * x[[k, col]];
            }
            x[[i, col]] = s / l[[i, i]];
        }
    }
    Ok(x)
}

/// Solve A·X = B by LU factorization with partial pivoting.
pub fn lu_solve(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "lu_solve needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} rows, matrix is {n}x{n}",
            b.nrows()
        )));
    }
    let mut lu = a.to_owned();
    let mut x = b.to_owned();
    for k in 0..n {
        let mut p = k;
        let mut best = lu[[k, k]].abs();
        for i in (k + 1)..n {
            let v = lu[[i, k]].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(Error::RankDeficient(format!("zero pivot at column {k}")));
        }
        if p != k {
            for j in 0..n {
                lu.swap([k, j], [p, j]);
            }
            for j in 0..x.ncols() {
                x.swap([k, j], [p, j]);
            }
        }
        let pivot = lu[[k, k]];
        for i in (k + 1)..n {
            let factor = lu[[i, k]] / pivot;
            lu[[i, k]] = factor;
            for j in (k + 1)..n {
                lu[[i, j]] -= factor * lu[[k, j]];
            }
            for j in 0..x.ncols() {
                x[[i, j]] -= factor * x[[k, j]];
            }
        }
    }
    for col in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut s = x[[i, col]];
            for k in (i + 1)..n {
                s -= lu[[i, k]] * x[[k, col]];
            }
            x[[i, col]] = s / lu[[i, i]];
        }
    }
    Ok(x)
}

/// Inverse of a square matrix via LU.
pub fn invert(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    lu_solve(a, Array2::eye(a.nrows()).view())
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns (eigenvalues, eigenvectors) sorted by descending eigenvalue;
/// eigenvectors are the columns of the returned matrix.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "symmetric_eigen needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut m = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let off = |m: &Array2<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += m[[i, j]] * m[[i, j]];
            }
        }
        s
    };
    let scale = (0..n).map(|i| m[[i, i]].abs()).fold(0.0_f64, f64::max).max(1e-300);
    for _sweep in 0..100 {
        if off(&m) <= (1e-30 * scale * scale).max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut eigenvectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[[k, dst]] = v[[k, src]];
        }
    }
    Ok((eigenvalues, eigenvectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn cholesky_reproduces_matrix() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let l = cholesky(a.view(), 1e-12).unwrap();
        let back = l.dot(&l.t());
        for (x, y) in a.iter().zip(back.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn cholesky_reports_rank_deficiency() {
        // Second row is a multiple of the first.
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(
            cholesky(a.view(), 1e-12),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn spd_solve_matches_known_solution() {
        // x chosen first, b = A·x computed independently.
        let a = array![[6.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 5.0]];
        let x_true = array![[1.0], [-2.0], [0.5]];
        let b = a.dot(&x_true);
        let x = spd_solve(a.view(), b.view(), 1e-12).unwrap();
        for (got, want) in x.iter().zip(x_true.iter()) {
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn lu_inverse_roundtrip_random() {
        let mut rng = crate::seeds::rng(11, &[0]);
        let n = 24;
        let mut a = Array2::<f64>::zeros((n, n));
        for v in a.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        for i in 0..n {
            a[[i, i]] += 4.0; // keep it comfortably invertible
        }
        let inv = invert(a.view()).unwrap();
        let eye = a.dot(&inv);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((eye[[i, j]] - want).abs() < 1e-10, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn jacobi_matches_hand_eigenvalues() {
        // Eigenvalues of [[2,1],[1,2]] are 3 and 1.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = symmetric_eigen(a.view()).unwrap();
        assert_relative_eq!(vals[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(vals[1], 1.0, max_relative = 1e-12);
        // A·v = λ·v for each column.
        for k in 0..2 {
            let v = vecs.column(k);
            let av = a.dot(&v);
            for i in 0..2 {
                assert_relative_eq!(av[i], vals[k] * v[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_vectors_orthonormal_random() {
        let mut rng = crate::seeds::rng(5, &[1]);
        let n = 16;
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        let (_, vecs) = symmetric_eigen(a.view()).unwrap();
        let gram = vecs.t().dot(&vecs);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-10);
            }
        }
    }
}
