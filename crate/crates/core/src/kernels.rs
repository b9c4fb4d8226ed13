//! Squared-exponential correlation across successive signals and the spectral
//! form of the per-gate posterior mean.
//!
//! `H(m, m') = exp(−(m − m')² / ℓ²) + δ·[m = m']`. For a symmetric positive
//! definite matrix the SVD and the eigendecomposition coincide, so the basis is
//! obtained from a symmetric eigensolver applied to `H`, and the eigenvalues of
//! `H⁻¹` are the reciprocals `r_i = 1/λ_i`. `H⁻¹` is never formed.
//!
//! With `H⁻¹ = V·diag(r)·Vᵀ`, the minimizer of
//! `‖y − s‖²/(2σ²) + sᵀH⁻¹s/(2ε²)` is `V·diag(ε²/(r_i·σ² + ε²))·Vᵀy`.

use std::io::Read;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io_util::write_atomic;

pub const DEFAULT_LENGTHSCALE: f64 = 30.0;
pub const DEFAULT_JITTER: f64 = 1e-8;

const BASIS_MAGIC: &[u8; 4] = b"SSEB";

#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub lengthscale: f64,
    pub jitter: f64,
    pub matrix: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn build_h(m: usize, lengthscale: f64, jitter: f64) -> Result<CorrelationMatrix> {
    if m == 0 {
        return Err(Error::InvalidArgument("correlation matrix size must be >= 1".into()));
    }
    if !(lengthscale.is_finite() && lengthscale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lengthscale must be > 0, got {lengthscale}"
        )));
    }
    if !(jitter.is_finite() && jitter >= 0.0) {
        return Err(Error::InvalidArgument(format!("jitter must be >= 0, got {jitter}")));
    }
    let l2 = lengthscale * lengthscale;
    let matrix = DMatrix::from_fn(m, m, |i, j| {
        let d = i as f64 - j as f64;
        (-d * d / l2).exp() + if i == j { jitter } else { 0.0 }
    });
    if matrix.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite {
            size: m,
            lengthscale,
            jitter,
        });
    }
    Ok(CorrelationMatrix {
        lengthscale,
        jitter,
        matrix,
    })
}

/// Orthonormal eigenvectors `V` (as columns) and eigenvalues `r` of `H⁻¹`,
/// sorted by decreasing `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBasis {
    pub lengthscale: f64,
    pub jitter: f64,
    vectors: DMatrix<f64>,
    inverse_eigenvalues: Vec<f64>,
}

pub fn decompose(h: &CorrelationMatrix) -> Result<CovarianceBasis> {
    let m = h.size();
    let eig = h.matrix.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalues of H"));
    }
    let max_eig = eig.eigenvalues.max();
    if max_eig <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            size: m,
            lengthscale: h.lengthscale,
            jitter: h.jitter,
        });
    }
    // Directions already swamped by jitter: keep r_i bounded.
    let floor = if h.jitter > 0.0 {
        h.jitter / 10.0
    } else {
        max_eig * f64::EPSILON * m as f64
    };
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vectors = DMatrix::zeros(m, m);
    let mut inverse_eigenvalues = Vec::with_capacity(m);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
        inverse_eigenvalues.push(1.0 / eig.eigenvalues[src].max(floor));
    }
    Ok(CovarianceBasis {
        lengthscale: h.lengthscale,
        jitter: h.jitter,
        vectors,
        inverse_eigenvalues,
    })
}

impl CovarianceBasis {
    pub fn build(m: usize, lengthscale: f64, jitter: f64) -> Result<Self> {
        decompose(&build_h(m, lengthscale, jitter)?)
    }

    pub fn size(&self) -> usize {
        self.inverse_eigenvalues.len()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn inverse_eigenvalues(&self) -> &[f64] {
        &self.inverse_eigenvalues
    }

    /// Vᵀ·y
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let y = DVector::from_column_slice(y);
        self.vectors.tr_mul(&y).as_slice().to_vec()
    }

    /// V·c
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(coeffs);
        (&self.vectors * c).as_slice().to_vec()
    }

    /// V·diag(r)·Vᵀ, for verification only.
    pub fn inverse_matrix(&self) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (i, r) in self.inverse_eigenvalues.iter().enumerate() {
            scaled.column_mut(i).scale_mut(*r);
        }
        scaled * self.vectors.transpose()
    }

    pub fn cache_file_name(m: usize, lengthscale: f64, jitter: f64) -> String {
        format!(
            "basis_m{m}_l{:016x}_d{:016x}.bin",
            lengthscale.to_bits(),
            jitter.to_bits()
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = self.size();
        let mut out = Vec::with_capacity(24 + 8 * (m + m * m));
        out.extend_from_slice(BASIS_MAGIC);
        out.extend_from_slice(&(m as u32).to_le_bytes());
        out.extend_from_slice(&self.lengthscale.to_le_bytes());
        out.extend_from_slice(&self.jitter.to_le_bytes());
        for r in &self.inverse_eigenvalues {
            out.extend_from_slice(&r.to_le_bytes());
        }
        for v in self.vectors.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 24 || &bytes[..4] != BASIS_MAGIC {
            return Err("missing SSEB header".into());
        }
        let m = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let lengthscale = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let jitter = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        if bytes.len() != 24 + 8 * (m + m * m) {
            return Err(format!("payload does not match size {m}"));
        }
        let mut vals = bytes[24..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let inverse_eigenvalues: Vec<f64> = vals.by_ref().take(m).collect();
        let vectors = DMatrix::from_iterator(m, m, vals);
        Ok(Self {
            lengthscale,
            jitter,
            vectors,
            inverse_eigenvalues,
        })
    }

    /// Loads `(m, ℓ, δ)` from `dir` if cached there, otherwise builds and stores it.
    pub fn load_or_build(dir: &Path, m: usize, lengthscale: f64, jitter: f64) -> Result<Self> {
        let path: PathBuf = dir.join(Self::cache_file_name(m, lengthscale, jitter));
        if let Ok(mut f) = std::fs::File::open(&path) {
            let mut bytes = Vec::new();
            f.read_to_end(&mut bytes).map_err(|e| Error::io(&path, e))?;
            let basis = Self::from_bytes(&bytes).map_err(|r| Error::format(&path, r))?;
            if basis.size() == m && basis.lengthscale == lengthscale && basis.jitter == jitter {
                return Ok(basis);
            }
        }
        let basis = Self::build(m, lengthscale, jitter)?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let bytes = basis.to_bytes();
        write_atomic(&path, |w| w.write_all(&bytes))?;
        Ok(basis)
    }
}

/// Per-direction gain ε²/(r·σ² + ε²), always in (0, 1) for positive inputs.
#[inline]
pub fn shrinkage(r: f64, sigma2: f64, eps2: f64) -> f64 {
    eps2 / (r * sigma2 + eps2)
}

/// Posterior mean of one gate's signal evolution from its cached projection
/// `vty = Vᵀ·y`.
pub fn posterior_mean_fast(y: &[f64], sigma2: f64, eps2: f64, basis: &CovarianceBasis, vty: &[f64]) -> Vec<f64> {
    debug_assert_eq!(y.len(), vty.len());
    let filtered: Vec<f64> = vty
        .iter()
        .zip(basis.inverse_eigenvalues())
        .map(|(c, r)| c * shrinkage(*r, sigma2, eps2))
        .collect();
    basis.synthesize(&filtered)
}

/// sᵀ·H⁻¹·s = Σ r_i·(Vᵀs)_i²
pub fn prior_quadratic_form(s: &[f64], basis: &CovarianceBasis) -> f64 {
    spectral_quadratic_form(&basis.project(s), basis)
}

pub fn spectral_quadratic_form(coeffs: &[f64], basis: &CovarianceBasis) -> f64 {
    coeffs
        .iter()
        .zip(basis.inverse_eigenvalues())
        .map(|(c, r)| r * c * c)
        .sum()
}

/// The same posterior mean through a dense solve, `ε²H·(ε²H + σ²I)⁻¹·y`.
pub fn posterior_mean_dense(y: &[f64], sigma2: f64, eps2: f64, h: &CorrelationMatrix) -> Result<Vec<f64>> {
    let m = h.size();
    let system = &h.matrix * eps2 + DMatrix::identity(m, m) * sigma2;
    let chol = system.cholesky().ok_or(Error::NotPositiveDefinite {
        size: m,
        lengthscale: h.lengthscale,
        jitter: h.jitter,
    })?;
    let z = chol.solve(&DVector::from_column_slice(y));
    Ok((&h.matrix * z * eps2).as_slice().to_vec())
}
