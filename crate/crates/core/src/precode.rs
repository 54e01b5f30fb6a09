//! Correlation-matrix decomposition and precoder construction with a
//! verifiable decorrelation contract.
//!
//! A correlation matrix factors as C = U Sc U^T (symmetric eigensystem) and
//! further as C = U F Sh F^H U^T with F the unitary DFT and Sh = F^H Sc F,
//! the delay-profile form of the eigenvalue spectrum. The precoder
//! P = U F diag(w) Vp^H decorrelates the channel when Vp is chosen to
//! diagonalize the Hermitian matrix diag(w) Sh diag(w); with that rotation
//! (the default here) the transformed covariance P^H C P is diagonal for
//! any power allocation. An identity (or any user-supplied unitary) Vp is
//! accepted for the bare factored form, but it does not decorrelate.

use crate::error::{Error, Result};
use crate::linalg::{
    conj_transpose, jacobi_hermitian, jacobi_symmetric, matmul_c, to_complex,
};
use crate::link::CorrelationMatrix;
use num_complex::Complex64;
use std::f64::consts::TAU;

// ---------------------------------------------------------------------------
// Decomposition
// ---------------------------------------------------------------------------

/// Eigensystem of a correlation matrix together with its Fourier-conjugated
/// (delay-profile) form.
#[derive(Debug, Clone)]
pub struct Decomposition {
    dim: usize,
    /// Orthonormal eigenvectors in columns, row-major, eigenvalue order.
    u: Vec<f64>,
    /// Eigenvalues, descending, clamped at zero.
    sigma_c: Vec<f64>,
    /// Unitary DFT matrix, entry (p, q) = exp(-2 pi i p q / k) / sqrt(k).
    f: Vec<Complex64>,
    /// F^H diag(sigma_c) F.
    sigma_h: Vec<Complex64>,
}

impl Decomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvectors(&self) -> &[f64] {
        &self.u
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.sigma_c
    }

    pub fn fourier(&self) -> &[Complex64] {
        &self.f
    }

    pub fn delay_profile(&self) -> &[Complex64] {
        &self.sigma_h
    }

    /// U diag(sigma_c) U^T, for reconstruction checks.
    pub fn reconstruct_eigen(&self) -> Vec<f64> {
        let k = self.dim;
        let mut out = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                let mut s = 0.0;
                for t in 0..k {
                    s += self.u[i * k + t] * self.sigma_c[t] * self.u[j * k + t];
                }
                out[i * k + j] = s;
            }
        }
        out
    }

    /// U F Sh F^H U^T, the chained factorization, for reconstruction checks.
    pub fn reconstruct_fourier(&self) -> Vec<Complex64> {
        let k = self.dim;
        let uc = to_complex(&self.u);
        let fh = conj_transpose(&self.f, k);
        let uh = conj_transpose(&uc, k);
        let inner = matmul_c(&matmul_c(&self.f, &self.sigma_h, k), &fh, k);
        matmul_c(&matmul_c(&uc, &inner, k), &uh, k)
    }
}

fn dft_matrix(k: usize) -> Vec<Complex64> {
    let scale = 1.0 / (k as f64).sqrt();
    let mut f = vec![Complex64::new(0.0, 0.0); k * k];
    for p in 0..k {
        for q in 0..k {
            let phase = -TAU * (p * q) as f64 / k as f64;
            f[p * k + q] = Complex64::from_polar(scale, phase);
        }
    }
    f
}

/// Symmetric eigendecomposition of the correlation matrix with eigenvalues
/// sorted descending, plus the Fourier-conjugated spectrum.
pub fn decompose_correlation(c: &CorrelationMatrix) -> Result<Decomposition> {
    let k = c.dim();
    let eigen = jacobi_symmetric(c.entries(), k)?;
    if let Some(&min) = eigen.values.last() {
        if min < -1e-10 {
            return Err(Error::NotPositiveSemiDefinite {
                min_eigenvalue: min,
            });
        }
    }
    let sigma_c: Vec<f64> = eigen.values.iter().map(|&v| v.max(0.0)).collect();
    let f = dft_matrix(k);
    let fh = conj_transpose(&f, k);
    let mut diag = vec![Complex64::new(0.0, 0.0); k * k];
    for i in 0..k {
        diag[i * k + i] = Complex64::new(sigma_c[i], 0.0);
    }
    let sigma_h = matmul_c(&matmul_c(&fh, &diag, k), &f, k);
    Ok(Decomposition {
        dim: k,
        u: eigen.vectors,
        sigma_c,
        f,
        sigma_h,
    })
}

// ---------------------------------------------------------------------------
// Precoder
// ---------------------------------------------------------------------------

/// How the per-stream allocation enters the diagonal factor: literally, or
/// through its square root (so the allocation reads as power rather than
/// amplitude).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerWeighting {
    Literal,
    Sqrt,
}

/// A k x k precoding matrix.
#[derive(Debug, Clone)]
pub struct Precoder {
    dim: usize,
    matrix: Vec<Complex64>,
}

impl Precoder {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major k x k matrix.
    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    /// P^H C P: the covariance seen after precoding.
    pub fn transformed_covariance(&self, c: &CorrelationMatrix) -> Result<Vec<Complex64>> {
        let k = self.dim;
        if c.dim() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: c.dim(),
            });
        }
        let cc = to_complex(c.entries());
        let ph = conj_transpose(&self.matrix, k);
        Ok(matmul_c(&matmul_c(&ph, &cc, k), &self.matrix, k))
    }

    /// Largest off-diagonal magnitude of P^H C P.
    pub fn decorrelation_residual(&self, c: &CorrelationMatrix) -> Result<f64> {
        let k = self.dim;
        let cov = self.transformed_covariance(c)?;
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    worst = worst.max(cov[i * k + j].norm());
                }
            }
        }
        Ok(worst)
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn diag_c(values: &[f64]) -> Vec<Complex64> {
    let k = values.len();
    let mut d = vec![Complex64::new(0.0, 0.0); k * k];
    for i in 0..k {
        d[i * k + i] = Complex64::new(values[i], 0.0);
    }
    d
}

fn weights(pt: &[f64], weighting: PowerWeighting) -> Result<Vec<f64>> {
    if let Some(bad) = pt.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::domain(format!(
            "per-stream allocation must be >= 0, got {bad}"
        )));
    }
    Ok(match weighting {
        PowerWeighting::Literal => pt.to_vec(),
        PowerWeighting::Sqrt => pt.iter().map(|p| p.sqrt()).collect(),
    })
}

/// The rotation that diagonalizes diag(w) Sh diag(w): applied as Vp, it
/// makes P^H C P diagonal for any allocation.
pub fn decorrelating_rotation(d: &Decomposition, pt: &[f64], weighting: PowerWeighting) -> Result<Vec<Complex64>> {
    let k = d.dim();
    if pt.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: pt.len(),
        });
    }
    let w = weights(pt, weighting)?;
    let dw = diag_c(&w);
    let m = matmul_c(&matmul_c(&dw, &d.sigma_h, k), &dw, k);
    let (_vals, vecs) = jacobi_hermitian(&m, k)?;
    // Vp = W^H so that Vp^H = W and W^H M W is diagonal
    Ok(conj_transpose(&vecs, k))
}

/// Builds P = U F diag(w) Vp^H with the decorrelating rotation as Vp: the
/// transformed covariance P^H C P of the decomposed matrix is diagonal for
/// any allocation `pt`. Uses the literal weighting.
pub fn build_precoder(d: &Decomposition, pt: &[f64]) -> Result<Precoder> {
    let vp = decorrelating_rotation(d, pt, PowerWeighting::Literal)?;
    build_precoder_with_rotation(d, pt, &vp, PowerWeighting::Literal)
}

/// Builds P = U F diag(w) Vp^H with an explicit unitary Vp (checked to
/// 1e-10). Vp = identity gives the bare factored form, which does not
/// decorrelate; see [`decorrelating_rotation`].
pub fn build_precoder_with_rotation(
    d: &Decomposition,
    pt: &[f64],
    v_p: &[Complex64],
    weighting: PowerWeighting,
) -> Result<Precoder> {
    let k = d.dim();
    if pt.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: pt.len(),
        });
    }
    if v_p.len() != k * k {
        return Err(Error::DimensionMismatch {
            expected: k * k,
            got: v_p.len(),
        });
    }
    let vvh = matmul_c(v_p, &conj_transpose(v_p, k), k);
    for i in 0..k {
        for j in 0..k {
            let want = if i == j { 1.0 } else { 0.0 };
            if (vvh[i * k + j] - want).norm() > 1e-10 {
                return Err(Error::domain("rotation matrix must be unitary to 1e-10"));
            }
        }
    }
    let w = weights(pt, weighting)?;
    let uc = to_complex(d.eigenvectors());
    let vph = conj_transpose(v_p, k);
    let p = matmul_c(
        &matmul_c(&matmul_c(&uc, d.fourier(), k), &diag_c(&w), k),
        &vph,
        k,
    );
    Ok(Precoder { dim: k, matrix: p })
}

// ===========================================================================
// Tests
// ===========================================================================
