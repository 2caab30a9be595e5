//! Small dense linear-algebra helpers; symmetric eigenproblems go through `faer`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Signature of a symmetric matrix relative to a zero threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    // sequential kernels keep results independent of the thread count
    faer::set_global_parallelism(faer::Par::Seq);
    faer::Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev = to_faer(m)
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("symmetric eigenvalue iteration converges");
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Spectral decomposition with eigenvalues sorted ascending (eigenvectors as columns).
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = to_faer(m)
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigen iteration converges");
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut idx: Vec<usize> = (0..m.nrows()).collect();
    idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = idx.iter().map(|&i| s[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), idx.len(), |r, c| u[(r, idx[c])]);
    (values, vectors)
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_spectral_norm(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Cheap upper bound of the spectral norm (max absolute row sum).
pub fn row_sum_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of a symmetric positive-definite matrix, failing when it is not definite.
pub fn spd_inverse(m: &DMatrix<f64>, q: &[f64]) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::MetricNotPositiveDefinite { q: q.to_vec() })
}

/// Inertia of a symmetric matrix via an `LDLᵀ` factorization with
/// Bunch–Kaufman pivoting. Pivots of magnitude `≤ zero_tol` count as zero.
///
/// With `zero_tol = 0` the counts are exact up to round-off by Sylvester's
/// law of inertia. Counting eigenvalues below `-s` is done by factoring
/// `A + s·I`.
pub fn inertia(a: &DMatrix<f64>, zero_tol: f64) -> Inertia {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "inertia needs a square matrix");
    let mut m = a.clone();
    let alpha = (1.0 + 17f64.sqrt()) / 8.0;
    let mut res = Inertia { negative: 0, zero: 0, positive: 0 };
    let classify = |v: f64, res: &mut Inertia| {
        if v.abs() <= zero_tol {
            res.zero += 1;
        } else if v < 0.0 {
            res.negative += 1;
        } else {
            res.positive += 1;
        }
    };
    let swap = |m: &mut DMatrix<f64>, i: usize, j: usize| {
        if i != j {
            m.swap_rows(i, j);
            m.swap_columns(i, j);
        }
    };

    let mut k = 0;
    while k < n {
        let mut lambda = 0.0;
        let mut r = k;
        for i in (k + 1)..n {
            if m[(i, k)].abs() > lambda {
                lambda = m[(i, k)].abs();
                r = i;
            }
        }
        let akk = m[(k, k)].abs();
        if lambda == 0.0 {
            classify(m[(k, k)], &mut res);
            k += 1;
            continue;
        }
        let two_by_two;
        if akk >= alpha * lambda {
            two_by_two = false;
        } else {
            let mut sigma = 0.0_f64;
            for j in k..n {
                if j != r {
                    sigma = sigma.max(m[(r, j)].abs());
                }
            }
            if akk * sigma >= alpha * lambda * lambda {
                two_by_two = false;
            } else if m[(r, r)].abs() >= alpha * sigma {
                swap(&mut m, k, r);
                two_by_two = false;
            } else {
                swap(&mut m, k + 1, r);
                two_by_two = true;
            }
        }

        if !two_by_two {
            let d = m[(k, k)];
            classify(d, &mut res);
            if d.abs() > 0.0 {
                for i in (k + 1)..n {
                    let l = m[(i, k)] / d;
                    if l != 0.0 {
                        for j in (k + 1)..n {
                            let v = m[(k, j)];
                            m[(i, j)] -= l * v;
                        }
                    }
                }
            }
            k += 1;
        } else {
            let (e11, e12, e22) = (m[(k, k)], m[(k, k + 1)], m[(k + 1, k + 1)]);
            let det = e11 * e22 - e12 * e12;
            // a 2×2 Bunch–Kaufman pivot is always indefinite in exact arithmetic
            let tr = e11 + e22;
            let disc = ((e11 - e22) * (e11 - e22) + 4.0 * e12 * e12).sqrt();
            classify(0.5 * (tr - disc), &mut res);
            classify(0.5 * (tr + disc), &mut res);
            let (i11, i12, i22) = (e22 / det, -e12 / det, e11 / det);
            for i in (k + 2)..n {
                let c1 = m[(i, k)];
                let c2 = m[(i, k + 1)];
                let w1 = c1 * i11 + c2 * i12;
                let w2 = c1 * i12 + c2 * i22;
                for j in (k + 2)..n {
                    let v1 = m[(k, j)];
                    let v2 = m[(k + 1, j)];
                    m[(i, j)] -= w1 * v1 + w2 * v2;
                }
            }
            k += 2;
        }
    }
    res
}

/// Solves the symmetric circulant tridiagonal system with constant diagonal
/// `a` and off-diagonal `b` (including the wrap-around corners).
///
/// Requires `|a| > 2|b|` and `rhs.len() ≥ 3`.
pub fn solve_circulant_tridiagonal(a: f64, b: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    assert!(n >= 3);
    let gamma = -a;
    let mut diag = vec![a; n];
    diag[0] = a - gamma;
    diag[n - 1] = a - b * b / gamma;
    let y = thomas(&diag, b, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = b;
    let z = thomas(&diag, b, &u);
    let vy = y[0] + b / gamma * y[n - 1];
    let vz = z[0] + b / gamma * z[n - 1];
    let f = vy / (1.0 + vz);
    y.iter().zip(&z).map(|(yi, zi)| yi - f * zi).collect()
}

fn thomas(diag: &[f64], off: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = off / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off * c[i - 1];
        c[i] = off / m;
        d[i] = (rhs[i] - off * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
