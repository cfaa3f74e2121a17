//! Dense complex Hermitian linear algebra.
//!
//! Inputs are symmetrized `(H + H*)/2` on construction so downstream
//! eigensolvers see exact symmetry; a deviation beyond [`tol::TOL_HERMITIAN`]
//! (relative to entry scale) is rejected instead of silently averaged away.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::tol;
use crate::{C64, CMat};

/// Finite-dimensional complex self-adjoint matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    mat: CMat,
}

impl HermitianMatrix {
    /// Builds from an arbitrary square complex matrix. Fails if `m` deviates
    /// from self-adjointness by more than `TOL_HERMITIAN` relative to the
    /// entry scale; otherwise stores `(m + m*)/2`.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CoreError::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let scale = 1.0 + m.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        let mut dev = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..=i {
                dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if dev > tol::TOL_HERMITIAN * scale {
            return Err(CoreError::NotHermitian { deviation: dev });
        }
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Ok(HermitianMatrix { mat: herm })
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = CMat::zeros(d, d);
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        HermitianMatrix { mat: m }
    }

    /// Zero matrix of dimension `d`.
    pub fn zeros(d: usize) -> Self {
        HermitianMatrix { mat: CMat::zeros(d, d) }
    }

    /// Identity of dimension `d`.
    pub fn identity(d: usize) -> Self {
        HermitianMatrix { mat: CMat::identity(d, d) }
    }

    /// Rank-one outer product `v v*`.
    pub fn outer(v: &crate::CVec) -> Self {
        HermitianMatrix { mat: v * v.adjoint() }
    }

    /// Row-major real and imaginary parts, for serialization.
    pub fn to_parts(&self) -> (usize, Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                re.push(self.mat[(i, j)].re);
                im.push(self.mat[(i, j)].im);
            }
        }
        (d, re, im)
    }

    /// Inverse of [`to_parts`](Self::to_parts).
    pub fn from_parts(dim: usize, re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != dim * dim || im.len() != dim * dim {
            return Err(CoreError::Invalid(format!(
                "matrix parts must have dim*dim = {} entries, got {}/{}",
                dim * dim,
                re.len(),
                im.len()
            )));
        }
        let m = CMat::from_fn(dim, dim, |i, j| C64::new(re[i * dim + j], im[i * dim + j]));
        HermitianMatrix::new(m)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    /// `self + other`. Dimension mismatch is an error.
    pub fn add(&self, other: &HermitianMatrix) -> Result<HermitianMatrix> {
        if self.dim() != other.dim() {
            return Err(CoreError::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(HermitianMatrix { mat: &self.mat + &other.mat })
    }

    /// `self * s` for real `s` (self-adjointness is preserved).
    pub fn scale(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix { mat: &self.mat * C64::new(s, 0.0) }
    }

    /// `U self U*` for an arbitrary (typically unitary) `u`.
    pub fn conjugate_by(&self, u: &CMat) -> HermitianMatrix {
        HermitianMatrix { mat: u * &self.mat * u.adjoint() }
    }

    /// Eigenvalues sorted ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> =
            self.mat.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
        ev
    }

    /// Eigenvalues (ascending) with matching orthonormal eigenvectors as
    /// columns.
    pub fn eigen_pairs(&self) -> (Vec<f64>, CMat) {
        let se = self.mat.clone().symmetric_eigen();
        let d = self.dim();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).expect("finite")
        });
        let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let mut vecs = CMat::zeros(d, d);
        for (dst, &src) in order.iter().enumerate() {
            vecs.set_column(dst, &se.eigenvectors.column(src));
        }
        (vals, vecs)
    }

    /// Largest magnitude of an eigenvalue (spectral norm of a self-adjoint
    /// matrix).
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0f64, |a, &l| a.max(l.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    /// Smallest eigenvalue is at least `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.eigenvalues().first().map_or(true, |&l| l >= -tol)
    }
}

/// `B - A >= -tol * I` in the semidefinite order.
pub fn psd_order_leq(a: &HermitianMatrix, b: &HermitianMatrix, tol: f64) -> Result<bool> {
    let diff = b.add(&a.scale(-1.0))?;
    Ok(diff.is_psd(tol))
}

/// Positive semidefinite matrix. Eigenvalues in `(-TOL_PSD, 0)` are clamped
/// to zero on construction; anything lower is rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdMatrix {
    base: HermitianMatrix,
}

impl PsdMatrix {
    pub fn new(base: HermitianMatrix) -> Result<Self> {
        let (vals, vecs) = base.eigen_pairs();
        let min = vals.first().copied().unwrap_or(0.0);
        if min < -tol::TOL_PSD {
            return Err(CoreError::NotPsd { min_eigenvalue: min });
        }
        if min >= 0.0 {
            return Ok(PsdMatrix { base });
        }
        // Rebuild with negative-within-tolerance eigenvalues clamped to 0.
        let d = base.dim();
        let mut m = CMat::zeros(d, d);
        for (k, &l) in vals.iter().enumerate() {
            if l > 0.0 {
                let col = vecs.column(k);
                m += (col * col.adjoint()) * C64::new(l, 0.0);
            }
        }
        Ok(PsdMatrix { base: HermitianMatrix { mat: m } })
    }

    /// Rank-one `v v*`.
    pub fn rank_one(v: &crate::CVec) -> Self {
        PsdMatrix { base: HermitianMatrix::outer(v) }
    }

    pub fn zeros(d: usize) -> Self {
        PsdMatrix { base: HermitianMatrix::zeros(d) }
    }

    pub fn identity(d: usize) -> Self {
        PsdMatrix { base: HermitianMatrix::identity(d) }
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn trace(&self) -> f64 {
        self.base.trace()
    }

    /// Nonnegative scaling (keeps positive semidefiniteness).
    pub fn scale(&self, s: f64) -> Result<PsdMatrix> {
        if s < 0.0 {
            return Err(CoreError::Invalid(format!("negative PSD scale {s}")));
        }
        Ok(PsdMatrix { base: self.base.scale(s) })
    }

    /// Eigendecomposition restricted to eigenvalues above `cutoff`, returned
    /// as (eigenvalue, eigenvector) pairs in ascending eigenvalue order.
    pub fn spectral_pieces(&self, cutoff: f64) -> Vec<(f64, crate::CVec)> {
        let (vals, vecs) = self.base.eigen_pairs();
        vals.iter()
            .enumerate()
            .filter(|(_, &l)| l > cutoff)
            .map(|(k, &l)| (l, vecs.column(k).into_owned()))
            .collect()
    }
}

/// Sum of a family of PSD matrices of equal dimension (zero matrix for an
/// empty family of explicit dimension).
pub fn psd_sum(dim: usize, mats: &[PsdMatrix]) -> Result<HermitianMatrix> {
    let mut acc = HermitianMatrix::zeros(dim);
    for m in mats {
        acc = acc.add(m.as_hermitian())?;
    }
    Ok(acc)
}

/// Ordered block-diagonal assembly of PSD blocks.
#[derive(Clone, Debug)]
pub struct BlockDiagonalPsd {
    blocks: Vec<PsdMatrix>,
}

impl BlockDiagonalPsd {
    pub fn new(blocks: Vec<PsdMatrix>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(CoreError::Invalid("block-diagonal matrix needs at least one block".into()));
        }
        Ok(BlockDiagonalPsd { blocks })
    }

    pub fn blocks(&self) -> &[PsdMatrix] {
        &self.blocks
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    /// Dense assembly in the stated block order.
    pub fn assemble(&self) -> PsdMatrix {
        let n = self.total_dim();
        let mut m = CMat::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let d = b.dim();
            m.view_mut((off, off), (d, d)).copy_from(b.as_hermitian().as_matrix());
            off += d;
        }
        PsdMatrix { base: HermitianMatrix { mat: m } }
    }
}

/// Frobenius reconstruction error `||H - Q L Q*||` of the eigensolve; the
/// contract promises `<= 1e-9 * (1 + ||H||)`.
pub fn eigen_reconstruction_error(h: &HermitianMatrix) -> f64 {
    let (vals, vecs) = h.eigen_pairs();
    let d = h.dim();
    let lambda = DMatrix::from_fn(d, d, |i, j| {
        if i == j { C64::new(vals[i], 0.0) } else { C64::new(0.0, 0.0) }
    });
    let rec = &vecs * lambda * vecs.adjoint();
    (h.as_matrix() - rec).norm()
}
