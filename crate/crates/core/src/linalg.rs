//! Small dense linear algebra: cyclic Jacobi eigensolvers (real symmetric
//! and complex Hermitian), Cholesky factorization, and matrix helpers.
//! Matrices are row-major `Vec`s; dimensions here are single digits, so
//! simplicity beats blocking.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Sweep cap for the Jacobi iterations. Convergence is quadratic; random
/// 8x8 inputs settle in 4-6 sweeps.
const MAX_SWEEPS: usize = 64;

const OFF_DIAG_TOL: f64 = 1e-14;

/// Eigen-decomposition of a real symmetric matrix. `vectors` is row-major
/// with eigenvectors in columns, ordered to match `values`.
#[derive(Debug, Clone)]
pub(crate) struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

/// Cyclic Jacobi on a real symmetric matrix, eigenvalues sorted descending.
pub(crate) fn jacobi_symmetric(a: &[f64], k: usize) -> Result<SymEigen> {
    if a.len() != k * k {
        return Err(Error::DimensionMismatch {
            expected: k * k,
            got: a.len(),
        });
    }
    let mut m = a.to_vec();
    let mut v = identity(k);
    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..k {
            for q in (p + 1)..k {
                off += m[p * k + q].abs();
            }
        }
        if off <= OFF_DIAG_TOL * scale {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                let apq = m[p * k + q];
                if apq.abs() <= OFF_DIAG_TOL * scale * 1e-3 {
                    continue;
                }
                let theta = (m[q * k + q] - m[p * k + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate_sym(&mut m, k, p, q, c, s);
                for r in 0..k {
                    let vp = v[r * k + p];
                    let vq = v[r * k + q];
                    v[r * k + p] = c * vp - s * vq;
                    v[r * k + q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut values: Vec<f64> = (0..k).map(|i| m[i * k + i]).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());
    values = order.iter().map(|&i| values[i]).collect();
    let mut vectors = vec![0.0; k * k];
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..k {
            vectors[r * k + new_col] = v[r * k + old_col];
        }
    }
    Ok(SymEigen { values, vectors })
}

fn rotate_sym(m: &mut [f64], k: usize, p: usize, q: usize, c: f64, s: f64) {
    let app = m[p * k + p];
    let aqq = m[q * k + q];
    let apq = m[p * k + q];
    m[p * k + p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
    m[q * k + q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
    m[p * k + q] = 0.0;
    m[q * k + p] = 0.0;
    for r in 0..k {
        if r == p || r == q {
            continue;
        }
        let arp = m[r * k + p];
        let arq = m[r * k + q];
        m[r * k + p] = c * arp - s * arq;
        m[p * k + r] = m[r * k + p];
        m[r * k + q] = s * arp + c * arq;
        m[q * k + r] = m[r * k + q];
    }
}

/// Cyclic Jacobi on a complex Hermitian matrix. Returns (eigenvalues
/// descending, unitary eigenvector matrix, columns matching values).
pub(crate) fn jacobi_hermitian(a: &[Complex64], k: usize) -> Result<(Vec<f64>, Vec<Complex64>)> {
    if a.len() != k * k {
        return Err(Error::DimensionMismatch {
            expected: k * k,
            got: a.len(),
        });
    }
    let mut m = a.to_vec();
    let mut v = identity_c(k);
    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.norm())).max(1.0);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..k {
            for q in (p + 1)..k {
                off += m[p * k + q].norm();
            }
        }
        if off <= OFF_DIAG_TOL * scale {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                let apq = m[p * k + q];
                let b = apq.norm();
                if b <= OFF_DIAG_TOL * scale * 1e-3 {
                    continue;
                }
                // phase alpha with a_pq = b * alpha; rotation zeroes (p, q)
                let alpha = apq / b;
                let app = m[p * k + p].re;
                let aqq = m[q * k + q].re;
                let theta = (aqq - app) / (2.0 * b);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J = I except J[pp]=c, J[pq]=s*alpha, J[qp]=-s*conj(alpha), J[qq]=c
                apply_hermitian_rotation(&mut m, k, p, q, c, s, alpha);
                for r in 0..k {
                    let vp = v[r * k + p];
                    let vq = v[r * k + q];
                    v[r * k + p] = c * vp - s * alpha.conj() * vq;
                    v[r * k + q] = s * alpha * vp + c * vq;
                }
            }
        }
    }

    let mut values: Vec<f64> = (0..k).map(|i| m[i * k + i].re).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());
    values = order.iter().map(|&i| values[i]).collect();
    let mut vectors = vec![Complex64::new(0.0, 0.0); k * k];
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..k {
            vectors[r * k + new_col] = v[r * k + old_col];
        }
    }
    Ok((values, vectors))
}

fn apply_hermitian_rotation(
    m: &mut [Complex64],
    k: usize,
    p: usize,
    q: usize,
    c: f64,
    s: f64,
    alpha: Complex64,
) {
    // m <- J^H m J with the sparse unitary J described at the call site
    let mut jm = m.to_vec();
    for col in 0..k {
        let mp = m[p * k + col];
        let mq = m[q * k + col];
        jm[p * k + col] = c * mp - s * alpha * mq;
        jm[q * k + col] = s * alpha.conj() * mp + c * mq;
    }
    for row in 0..k {
        let mp = jm[row * k + p];
        let mq = jm[row * k + q];
        m[row * k + p] = c * mp - s * alpha.conj() * mq;
        m[row * k + q] = s * alpha * mp + c * mq;
        for col in 0..k {
            if col != p && col != q {
                m[row * k + col] = jm[row * k + col];
            }
        }
    }
    // pin the pivot to exactly zero and keep the diagonal real
    m[p * k + q] = Complex64::new(0.0, 0.0);
    m[q * k + p] = Complex64::new(0.0, 0.0);
    m[p * k + p] = Complex64::new(m[p * k + p].re, 0.0);
    m[q * k + q] = Complex64::new(m[q * k + q].re, 0.0);
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub(crate) fn cholesky(a: &[f64], k: usize) -> Result<Vec<f64>> {
    if a.len() != k * k {
        return Err(Error::DimensionMismatch {
            expected: k * k,
            got: a.len(),
        });
    }
    let scale = (0..k).fold(0.0f64, |acc, i| acc.max(a[i * k + i].abs())).max(1.0);
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut sum = a[i * k + j];
            for t in 0..j {
                sum -= l[i * k + t] * l[j * k + t];
            }
            if i == j {
                if sum <= 1e-12 * scale {
                    return Err(Error::NotPositiveSemiDefinite {
                        min_eigenvalue: sum,
                    });
                }
                l[i * k + i] = sum.sqrt();
            } else {
                l[i * k + j] = sum / l[j * k + j];
            }
        }
    }
    Ok(l)
}

/// Solves A x = b given the lower Cholesky factor of A.
pub(crate) fn cholesky_solve(l: &[f64], k: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; k];
    for i in 0..k {
        let mut s = b[i];
        for j in 0..i {
            s -= l[i * k + j] * y[j];
        }
        y[i] = s / l[i * k + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = y[i];
        for j in (i + 1)..k {
            s -= l[j * k + i] * x[j];
        }
        x[i] = s / l[i * k + i];
    }
    x
}

/// Solves A x = b by Gaussian elimination with partial pivoting. `a` is
/// consumed row-major.
pub(crate) fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, k: usize) -> Result<Vec<f64>> {
    if a.len() != k * k || b.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k * k,
            got: a.len(),
        });
    }
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&i, &j| a[i * k + col].abs().partial_cmp(&a[j * k + col].abs()).unwrap())
            .unwrap();
        if a[pivot_row * k + col].abs() < 1e-300 {
            return Err(Error::Degenerate("singular linear system".into()));
        }
        if pivot_row != col {
            for c in 0..k {
                a.swap(col * k + c, pivot_row * k + c);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * k + col];
        for row in (col + 1)..k {
            let factor = a[row * k + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..k {
                a[row * k + c] -= factor * a[col * k + c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let mut s = b[row];
        for c in (row + 1)..k {
            s -= a[row * k + c] * x[c];
        }
        x[row] = s / a[row * k + row];
    }
    Ok(x)
}

pub(crate) fn identity(k: usize) -> Vec<f64> {
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        m[i * k + i] = 1.0;
    }
    m
}

pub(crate) fn identity_c(k: usize) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); k * k];
    for i in 0..k {
        m[i * k + i] = Complex64::new(1.0, 0.0);
    }
    m
}

pub(crate) fn matmul_c(a: &[Complex64], b: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for t in 0..k {
            let ait = a[i * k + t];
            if ait.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..k {
                out[i * k + j] += ait * b[t * k + j];
            }
        }
    }
    out
}

pub(crate) fn conj_transpose(a: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for j in 0..k {
            out[j * k + i] = a[i * k + j].conj();
        }
    }
    out
}

pub(crate) fn to_complex(a: &[f64]) -> Vec<Complex64> {
    a.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(e: &SymEigen, k: usize) -> Vec<f64> {
        // V diag(values) V^T
        let mut out = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                let mut s = 0.0;
                for t in 0..k {
                    s += e.vectors[i * k + t] * e.values[t] * e.vectors[j * k + t];
                }
                out[i * k + j] = s;
            }
        }
        out
    }

    #[test]
    fn jacobi_2x2_known() {
        let a = vec![1.0, 0.2, 0.2, 1.0];
        let e = jacobi_symmetric(&a, 2).unwrap();
        assert!((e.values[0] - 1.2).abs() < 1e-14);
        assert!((e.values[1] - 0.8).abs() < 1e-14);
        let r = reconstruct(&e, 2);
        for (x, y) in r.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn jacobi_random_reconstruction() {
        // deterministic pseudo-random symmetric matrix
        let k = 6;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut a = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i {
                let v = next();
                a[i * k + j] = v;
                a[j * k + i] = v;
            }
        }
        let e = jacobi_symmetric(&a, k).unwrap();
        let r = reconstruct(&e, k);
        for (x, y) in r.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12, "reconstruction off: {x} vs {y}");
        }
        // orthonormality
        for c1 in 0..k {
            for c2 in 0..k {
                let dot: f64 = (0..k).map(|r| e.vectors[r * k + c1] * e.vectors[r * k + c2]).sum();
                let want = if c1 == c2 { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_jacobi_diagonalizes() {
        let k = 3;
        // Hermitian with nonzero imaginary parts
        let a = vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(0.3, 0.4),
            Complex64::new(-0.1, 0.2),
            Complex64::new(0.3, -0.4),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, -0.6),
            Complex64::new(-0.1, -0.2),
            Complex64::new(0.5, 0.6),
            Complex64::new(3.0, 0.0),
        ];
        let (vals, vecs) = jacobi_hermitian(&a, k).unwrap();
        // reconstruct V diag V^H
        let vh = conj_transpose(&vecs, k);
        let mut d = vec![Complex64::new(0.0, 0.0); k * k];
        for i in 0..k {
            d[i * k + i] = Complex64::new(vals[i], 0.0);
        }
        let r = matmul_c(&matmul_c(&vecs, &d, k), &vh, k);
        for (x, y) in r.iter().zip(a.iter()) {
            assert!((x - y).norm() < 1e-12, "hermitian reconstruction: {x} vs {y}");
        }
        // unitarity
        let vhv = matmul_c(&vh, &vecs, k);
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vhv[i * k + j] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_round_trip() {
        let a = vec![4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let l = cholesky(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for t in 0..3 {
                    s += l[i * 3 + t] * l[j * 3 + t];
                }
                assert!((s - a[i * 3 + j]).abs() < 1e-12);
            }
        }
        let x = cholesky_solve(&l, 3, &[1.0, 2.0, 3.0]);
        // check A x = b
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((s - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = vec![1.0, 2.0, 2.0, 1.0];
        assert!(matches!(
            cholesky(&a, 2),
            Err(Error::NotPositiveSemiDefinite { .. })
        ));
    }
}
