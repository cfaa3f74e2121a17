//! Mixed discriminants, mixed characteristic polynomials, and maxroot.
//!
//! The central object is
//!
//! ```text
//! mu[A_1, ..., A_m](z) = prod_i (1 - d/dz_i) det(zI + sum_i z_i A_i) | z_i = 0
//! ```
//!
//! computed two independent ways: a production path that expands mu through
//! subset sums and elementary symmetric functions of their eigenvalues, and a
//! definitional oracle that interpolates `det(zI + sum z_i A_i)` on an integer
//! lattice and applies `prod (1 - d/dz_i)` to the coefficient tensor. Tests
//! hold the two within `TOL_EQ` of each other.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::linalg::HermitianMatrix;
use crate::{C64, CMat};

/// Exact expansion walks all `2^m` subsets; beyond this many arguments the
/// caller must use a structured fast path (all rank-one) or give up.
pub const MAX_EXACT_ARGS: usize = 24;

/// Permutation expansion of the mixed discriminant is `d!`; past dimension 8
/// the definitional subset oracle is the only supported route.
pub const MAX_PERMUTATION_DIM: usize = 8;

/// Real polynomial stored by ascending-degree coefficients. Trailing exact
/// zeros are trimmed; the zero polynomial is `[0.0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

impl RealPolynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        RealPolynomial { coeffs }
    }

    pub fn one() -> Self {
        RealPolynomial { coeffs: vec![1.0] }
    }

    /// `z^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        RealPolynomial { coeffs: c }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `z^k` (zero beyond the stored degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().expect("coeffs nonempty")
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `p(z + t)` by repeated synthetic division.
    pub fn taylor_shift(&self, t: f64) -> RealPolynomial {
        let mut b = self.coeffs.clone();
        let n = b.len() - 1;
        for k in 0..n {
            for j in (k..n).rev() {
                let carry = t * b[j + 1];
                b[j] += carry;
            }
        }
        RealPolynomial::new(b)
    }

    pub fn mul(&self, other: &RealPolynomial) -> RealPolynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RealPolynomial::new(out)
    }

    /// Exact division by `z^k`: the low `k` coefficients must vanish within
    /// `tol` relative to the largest coefficient.
    pub fn div_z_pow(&self, k: usize, tol: f64) -> Result<RealPolynomial> {
        if self.coeffs.len() <= k {
            return Err(CoreError::Invalid(format!(
                "cannot divide degree-{} polynomial by z^{k}",
                self.degree()
            )));
        }
        let scale = self.coeffs.iter().fold(1.0f64, |a, &c| a.max(c.abs()));
        for (i, &c) in self.coeffs.iter().take(k).enumerate() {
            if c.abs() > tol * scale {
                return Err(CoreError::Invalid(format!(
                    "coefficient of z^{i} is {c}, not divisible by z^{k}"
                )));
            }
        }
        Ok(RealPolynomial::new(self.coeffs[k..].to_vec()))
    }

    /// Largest absolute coefficient difference, padding the shorter with 0.
    pub fn linf_distance(&self, other: &RealPolynomial) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n).fold(0.0f64, |a, k| a.max((self.coeff(k) - other.coeff(k)).abs()))
    }
}

/// Outcome of a root scan: largest real part, whether the root set is real to
/// within the tolerance, and the worst imaginary residue observed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxrootResult {
    pub value: f64,
    pub all_real: bool,
    pub max_imag_residual: f64,
}

/// True when every coefficient of the Taylor shift `q(x + t)` is nonnegative
/// up to the running rounding envelope of the Ruffini recurrence. For a
/// real-rooted monic `q` this certifies — exactly, in real arithmetic — that
/// no root exceeds `x`; conversely any polynomial passing it has no root
/// above `x`.
fn no_roots_above(q: &[f64], x: f64) -> bool {
    let n = q.len() - 1;
    let mut s: Vec<f64> = q.to_vec();
    let mut m: Vec<f64> = q.iter().map(|c| libm::fabs(*c)).collect();
    let ax = libm::fabs(x);
    for k in 0..n {
        for j in (k..n).rev() {
            s[j] += x * s[j + 1];
            m[j] += ax * m[j + 1];
        }
    }
    let guard = 4.0 * (n as f64 + 1.0) * f64::EPSILON;
    s.iter().zip(&m).all(|(&sk, &mk)| sk >= -guard * mk)
}

/// Largest root of a real-rooted polynomial.
///
/// The value is pinned by bisection on the shift certificate "all
/// coefficients of `p(x + t)` are nonnegative", which for real-rooted `p`
/// characterizes `x ≥ maxroot` exactly and stays sharp on clustered roots,
/// where companion-matrix eigenvalues smear a multiplicity-`k` root by the
/// `k`-th root of the rounding noise. Low-order coefficients at rounding
/// scale are deflated as roots at zero first. Companion eigenvalues are
/// still computed for the `all_real` diagnostic (heuristic: a tight cluster
/// can report spurious imaginary residue); for a polynomial that is not
/// real-rooted the returned value is only the certificate bound.
pub fn maxroot(p: &RealPolynomial, tol_root: f64) -> Result<MaxrootResult> {
    if p.is_zero() {
        return Err(CoreError::Invalid("maxroot of the zero polynomial".into()));
    }
    let n0 = p.degree();
    if n0 == 0 {
        return Err(CoreError::Invalid("maxroot needs degree >= 1".into()));
    }
    let lead = p.leading();
    let monic: Vec<f64> = (0..=n0).map(|k| p.coeff(k) / lead).collect();
    if monic.iter().any(|c| !c.is_finite()) {
        return Err(CoreError::Invalid("polynomial coefficients are not finite".into()));
    }
    let scale = monic.iter().fold(0.0f64, |a, &c| a.max(libm::fabs(c)));
    let mut zeros = 0usize;
    while zeros < n0 && libm::fabs(monic[zeros]) <= 1e-14 * scale {
        zeros += 1;
    }
    let q = &monic[zeros..];
    let n = q.len() - 1;
    if n == 0 {
        return Ok(MaxrootResult { value: 0.0, all_real: true, max_imag_residual: 0.0 });
    }
    if n == 1 {
        let root = -q[0];
        let value = if zeros > 0 { root.max(0.0) } else { root };
        return Ok(MaxrootResult { value, all_real: true, max_imag_residual: 0.0 });
    }
    // companion of the deflated monic part, diagnostics only
    let comp = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if j == n - 1 {
            -q[i]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let resid = comp.complex_eigenvalues().iter().fold(0.0f64, |a, e| a.max(libm::fabs(e.im)));

    // Cauchy bound: every root of the monic q has |root| < 1 + max |q_k|
    let bound = 1.0 + q[..n].iter().fold(0.0f64, |a, &c| a.max(libm::fabs(c)));
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..400 {
        if hi - lo <= 1e-13 * (1.0 + libm::fabs(hi)) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if no_roots_above(q, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let value = if zeros > 0 { hi.max(0.0) } else { hi };
    Ok(MaxrootResult { value, all_real: resid <= tol_root, max_imag_residual: resid })
}

/// Convenience: the `value` field of [`maxroot`] at the default root
/// tolerance.
pub fn maxroot_value(p: &RealPolynomial) -> Result<f64> {
    Ok(maxroot(p, crate::tol::TOL_ROOT)?.value)
}

fn check_shared_dim(mats: &[HermitianMatrix]) -> Result<usize> {
    let d = mats[0].dim();
    for m in mats {
        if m.dim() != d {
            return Err(CoreError::DimensionMismatch { expected: d, got: m.dim() });
        }
    }
    Ok(d)
}

/// Pascal-triangle table of `C(n, k)` as floats, `0 <= k <= n <= rows`.
fn binomial_table(rows: usize) -> Vec<Vec<f64>> {
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(rows + 1);
    for n in 0..=rows {
        let mut row = vec![1.0; n + 1];
        for k in 1..n {
            row[k] = t[n - 1][k - 1] + t[n - 1][k];
        }
        t.push(row);
    }
    t
}

/// Elementary symmetric functions `e_0..e_n` of the given values.
fn elementary_symmetric(vals: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; vals.len() + 1];
    e[0] = 1.0;
    for (idx, &x) in vals.iter().enumerate() {
        for j in (1..=idx + 1).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0f64, |a, k| a * k as f64)
}

/// Mixed discriminant `D(A_1, ..., A_k)` in dimension `d`, `k <= d`, with
/// identity padding `D(A_1,...,A_k) = D(A_1,...,A_k, I,...,I) / (d-k)!`.
/// Permutation expansion over assembled column matrices: the i-th column of
/// the sigma-term is the i-th column of `A_{sigma(i)}` (the convention under
/// which `D(I,I) = 2` and `D(A,..,A) = d! det A`).
pub fn mixed_discriminant(mats: &[HermitianMatrix]) -> Result<f64> {
    if mats.is_empty() {
        return Err(CoreError::Invalid("mixed discriminant of an empty list".into()));
    }
    let d = check_shared_dim(mats)?;
    let k = mats.len();
    if k > d {
        return Err(CoreError::Invalid(format!(
            "mixed discriminant takes at most d = {d} arguments, got {k}"
        )));
    }
    if d > MAX_PERMUTATION_DIM {
        return Err(CoreError::BudgetExceeded(format!(
            "permutation expansion is d! terms; dimension {d} exceeds the cap {MAX_PERMUTATION_DIM}"
        )));
    }
    let id = HermitianMatrix::identity(d);
    let padded: Vec<&HermitianMatrix> =
        mats.iter().chain(core::iter::repeat(&id).take(d - k)).collect();

    let mut total = C64::new(0.0, 0.0);
    let mut perm: Vec<usize> = (0..d).collect();
    let mut scratch = CMat::zeros(d, d);
    permute_all(&mut perm, 0, &mut |sigma| {
        for i in 0..d {
            scratch.set_column(i, &padded[sigma[i]].as_matrix().column(i));
        }
        total += scratch.determinant();
    });
    Ok(total.re / factorial(d - k))
}

fn permute_all(perm: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at == perm.len() {
        f(perm);
        return;
    }
    for i in at..perm.len() {
        perm.swap(at, i);
        permute_all(perm, at + 1, f);
        perm.swap(at, i);
    }
}

/// Definitional cross-check for [`mixed_discriminant`]: the mixed derivative
/// of `det(sum z_i A_i)` extracted by inclusion-exclusion over subset sums,
/// `D = sum_{S} (-1)^{d - |S|} det(sum_{i in S} A_i)`, with the same identity
/// padding.
pub fn mixed_discriminant_oracle(mats: &[HermitianMatrix]) -> Result<f64> {
    if mats.is_empty() {
        return Err(CoreError::Invalid("mixed discriminant of an empty list".into()));
    }
    let d = check_shared_dim(mats)?;
    let k = mats.len();
    if k > d {
        return Err(CoreError::Invalid(format!(
            "mixed discriminant takes at most d = {d} arguments, got {k}"
        )));
    }
    let id = HermitianMatrix::identity(d);
    let padded: Vec<&HermitianMatrix> =
        mats.iter().chain(core::iter::repeat(&id).take(d - k)).collect();
    let mut total = 0.0f64;
    for mask in 0u32..(1u32 << d) {
        let mut b = CMat::zeros(d, d);
        for (i, m) in padded.iter().enumerate() {
            if mask & (1 << i) != 0 {
                b += m.as_matrix();
            }
        }
        let sign = if (d - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * b.determinant().re;
    }
    Ok(total / factorial(d - k))
}

fn numerical_rank_le_one(m: &HermitianMatrix) -> bool {
    let ev = m.eigenvalues();
    let scale = ev.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    if scale == 0.0 {
        return true;
    }
    ev.iter().filter(|&&l| l.abs() > crate::tol::TOL_RANK * scale).count() <= 1
}

/// Characteristic polynomial `det(zI - H)` via eigenvalues.
pub fn char_poly(h: &HermitianMatrix) -> RealPolynomial {
    let d = h.dim();
    let e = elementary_symmetric(&h.eigenvalues());
    let mut coeffs = vec![0.0; d + 1];
    for (j, ej) in e.iter().enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[d - j] = sign * ej;
    }
    RealPolynomial { coeffs }
}

/// Mixed characteristic polynomial of a nonempty family (dimension inferred).
pub fn mcp(mats: &[HermitianMatrix]) -> Result<RealPolynomial> {
    if mats.is_empty() {
        return Err(CoreError::Invalid(
            "empty family needs an explicit dimension; use mcp_with_dim".into(),
        ));
    }
    mcp_with_dim(mats[0].dim(), mats)
}

/// Mixed characteristic polynomial in explicit dimension `d`; the empty
/// family yields `z^d`.
///
/// When every argument has rank at most one the polynomial collapses to
/// `det(zI - sum A_i)` (the determinant is then multi-affine in the z_i), so
/// families of any length are fine. Mixed-rank families walk all `2^m` subset
/// sums: for each subset the eigenvalues of `B_S = sum_{i in S} A_i` feed
///
/// ```text
/// mu(z) = sum_S (-1)^{|S|} sum_{j=|S|}^{min(m,d)} C(m-|S|, j-|S|) e_j(B_S) z^{d-j}
/// ```
///
/// and the argument count is capped at [`MAX_EXACT_ARGS`].
pub fn mcp_with_dim(dim: usize, mats: &[HermitianMatrix]) -> Result<RealPolynomial> {
    if dim == 0 {
        return Err(CoreError::Invalid("dimension must be at least 1".into()));
    }
    if !mats.is_empty() {
        let d = check_shared_dim(mats)?;
        if d != dim {
            return Err(CoreError::DimensionMismatch { expected: dim, got: d });
        }
    }
    if mats.iter().all(numerical_rank_le_one) {
        let mut sum = HermitianMatrix::zeros(dim);
        for m in mats {
            sum = sum.add(m)?;
        }
        return Ok(char_poly(&sum));
    }
    let m = mats.len();
    if m > MAX_EXACT_ARGS {
        return Err(CoreError::BudgetExceeded(format!(
            "exact expansion needs 2^{m} subset eigensolves (cap {MAX_EXACT_ARGS} arguments)"
        )));
    }
    let binom = binomial_table(m);
    let jmax = m.min(dim);
    let mut coeffs = vec![0.0; dim + 1];

    // Gray-code walk so each subset sum is one matrix add/subtract away.
    let mut b = CMat::zeros(dim, dim);
    let mut mask: u32 = 0;
    let total: u64 = 1u64 << m;
    for step in 0..total {
        if step > 0 {
            let bit = step.trailing_zeros() as usize;
            let flipped = 1u32 << bit;
            mask ^= flipped;
            if mask & flipped != 0 {
                b += mats[bit].as_matrix();
            } else {
                b -= mats[bit].as_matrix();
            }
        }
        let s = mask.count_ones() as usize;
        if s > jmax {
            continue;
        }
        let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
        if s == 0 {
            // e_j(0) vanishes for j >= 1; only the z^d term survives.
            coeffs[dim] += sign * binom[m][0];
            continue;
        }
        let e = elementary_symmetric(b.clone().symmetric_eigenvalues().as_slice());
        for j in s..=jmax {
            coeffs[dim - j] += sign * binom[m - s][j - s] * e[j];
        }
    }
    Ok(RealPolynomial { coeffs })
}

/// Independent implementation of [`mcp`] straight from the definition: sample
/// `det(zI + sum z_i A_i)` on the lattice `{0,..,d}^{m+1}`, interpolate to a
/// coefficient tensor one axis at a time, and assemble
/// `sum_{e in {0,1}^m} (-1)^{|e|} c[k, e]` as the coefficient of `z^k`.
pub fn mcp_oracle(mats: &[HermitianMatrix]) -> Result<RealPolynomial> {
    if mats.is_empty() {
        return Err(CoreError::Invalid(
            "empty family needs an explicit dimension; use mcp_oracle_with_dim".into(),
        ));
    }
    mcp_oracle_with_dim(mats[0].dim(), mats)
}

pub fn mcp_oracle_with_dim(dim: usize, mats: &[HermitianMatrix]) -> Result<RealPolynomial> {
    if dim == 0 {
        return Err(CoreError::Invalid("dimension must be at least 1".into()));
    }
    if !mats.is_empty() {
        let d = check_shared_dim(mats)?;
        if d != dim {
            return Err(CoreError::DimensionMismatch { expected: dim, got: d });
        }
    }
    let m = mats.len();
    let n = dim + 1; // interpolation nodes per axis
    let axes = m + 1;
    let total: usize = n
        .checked_pow(axes as u32)
        .ok_or_else(|| CoreError::BudgetExceeded("interpolation lattice overflows".into()))?;
    if total > 2_000_000 {
        return Err(CoreError::BudgetExceeded(format!(
            "interpolation lattice has {total} points; the oracle is for small instances"
        )));
    }

    // strides: axis 0 is z, axes 1..=m are the z_i.
    let mut stride = vec![1usize; axes];
    for a in 1..axes {
        stride[a] = stride[a - 1] * n;
    }

    let mut tensor = vec![0.0f64; total];
    let mut idx = vec![0usize; axes];
    for (flat, slot) in tensor.iter_mut().enumerate() {
        let mut rem = flat;
        for a in 0..axes {
            idx[a] = rem % n;
            rem /= n;
        }
        let mut mat = CMat::identity(dim, dim) * C64::new(idx[0] as f64, 0.0);
        for (i, a) in mats.iter().enumerate() {
            mat += a.as_matrix() * C64::new(idx[i + 1] as f64, 0.0);
        }
        *slot = mat.determinant().re;
    }

    // Inverse-Vandermonde interpolation along each axis in turn.
    let vand = DMatrix::<f64>::from_fn(n, n, |r, c| libm::pow(r as f64, c as f64));
    let lu = vand.lu();
    let mut fiber = nalgebra::DVector::<f64>::zeros(n);
    for a in 0..axes {
        for base in 0..total {
            let digit = (base / stride[a]) % n;
            if digit != 0 {
                continue;
            }
            for j in 0..n {
                fiber[j] = tensor[base + j * stride[a]];
            }
            let sol = lu.solve(&fiber).ok_or_else(|| {
                CoreError::Invalid("Vandermonde solve failed (nodes are distinct)".into())
            })?;
            for j in 0..n {
                tensor[base + j * stride[a]] = sol[j];
            }
        }
    }

    let mut coeffs = vec![0.0f64; dim + 1];
    for (k, c) in coeffs.iter_mut().enumerate() {
        for mask in 0u32..(1u32 << m) {
            let mut flat = k * stride[0];
            for i in 0..m {
                if mask & (1 << i) != 0 {
                    flat += stride[i + 1];
                }
            }
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            *c += sign * tensor[flat];
        }
    }
    Ok(RealPolynomial::new(coeffs))
}

/// Reduced polynomial `mu(z) / z^{d-m}` for `m <= d` arguments; degree `m`.
pub fn reduced_mcp(mats: &[HermitianMatrix]) -> Result<RealPolynomial> {
    if mats.is_empty() {
        return Err(CoreError::Invalid(
            "empty family needs an explicit dimension; use reduced_mcp_with_dim".into(),
        ));
    }
    reduced_mcp_with_dim(mats[0].dim(), mats)
}

pub fn reduced_mcp_with_dim(dim: usize, mats: &[HermitianMatrix]) -> Result<RealPolynomial> {
    let m = mats.len();
    if m > dim {
        return Err(CoreError::Invalid(format!(
            "reduced polynomial needs at most d = {dim} arguments, got {m}"
        )));
    }
    let full = mcp_with_dim(dim, mats)?;
    full.div_z_pow(dim - m, crate::tol::TOL_EQ)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::CVec;

    fn herm(entries: &[(f64, f64)], d: usize) -> HermitianMatrix {
        let m = CMat::from_fn(d, d, |i, j| {
            let (re, im) = entries[i * d + j];
            C64::new(re, im)
        });
        HermitianMatrix::new(m).unwrap()
    }

    fn e_ii(i: usize, d: usize) -> HermitianMatrix {
        let mut diag = alloc::vec![0.0; d];
        diag[i] = 1.0;
        HermitianMatrix::from_diagonal(&diag)
    }

    #[test]
    fn polynomial_basics() {
        let p = RealPolynomial::new(alloc::vec![1.0, -2.0, 1.0, 0.0]);
        assert_eq!(p.degree(), 2);
        assert_eq!(p.eval(3.0), 4.0);
        let q = p.taylor_shift(1.0); // (z+1-1)^2 = z^2
        assert!(q.linf_distance(&RealPolynomial::monomial(2)) <= 1e-12);
        let r = RealPolynomial::monomial(2).mul(&RealPolynomial::new(alloc::vec![-1.0, 1.0]));
        assert_eq!(r.coeffs(), &[0.0, 0.0, -1.0, 1.0]);
        assert_eq!(r.div_z_pow(2, 1e-12).unwrap().coeffs(), &[-1.0, 1.0]);
    }

    #[test]
    fn discriminant_of_single_matrix_is_trace() {
        let a = herm(&[(1.0, 0.0), (0.0, 2.0), (0.0, -2.0), (3.0, 0.0)], 2);
        assert!((mixed_discriminant(&[a.clone()]).unwrap() - 4.0).abs() <= 1e-10);
        // also in dimension 3 via padding
        let mut m = CMat::zeros(3, 3);
        m[(0, 0)] = C64::new(-2.5, 0.0);
        m[(1, 2)] = C64::new(0.0, 1.0);
        m[(2, 1)] = C64::new(0.0, -1.0);
        m[(2, 2)] = C64::new(4.0, 0.0);
        let b = HermitianMatrix::new(m).unwrap();
        assert!((mixed_discriminant(&[b]).unwrap() - 1.5).abs() <= 1e-10);
    }

    #[test]
    fn discriminant_of_identities() {
        let i2 = HermitianMatrix::identity(2);
        assert!((mixed_discriminant(&[i2.clone(), i2]).unwrap() - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn discriminant_of_repeated_matrix_is_factorial_det() {
        let a = herm(&[(2.0, 0.0), (1.0, 0.0), (1.0, 0.0), (3.0, 0.0)], 2);
        // det = 5, d! = 2
        assert!((mixed_discriminant(&[a.clone(), a]).unwrap() - 10.0).abs() <= 1e-10);
    }

    #[test]
    fn discriminant_argument_checks() {
        let i2 = HermitianMatrix::identity(2);
        let i3 = HermitianMatrix::identity(3);
        assert!(mixed_discriminant(&[i2.clone(), i3.clone()]).is_err());
        assert!(mixed_discriminant(&[i2.clone(), i2.clone(), i2]).is_err());
        let big = HermitianMatrix::identity(9);
        assert!(matches!(
            mixed_discriminant(&[big]),
            Err(CoreError::BudgetExceeded(_))
        ));
    }

    #[test]
    fn discriminant_matches_oracle_on_random_inputs() {
        let mut rng = gen::rng_from_seed(7);
        for d in 2..=4usize {
            for k in 1..=d {
                let mats: Vec<HermitianMatrix> =
                    (0..k).map(|_| gen::random_hermitian(&mut rng, d, 1.0)).collect();
                let a = mixed_discriminant(&mats).unwrap();
                let b = mixed_discriminant_oracle(&mats).unwrap();
                assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "d={d} k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn mcp_of_identity_2() {
        let p = mcp(&[HermitianMatrix::identity(2)]).unwrap();
        assert!(p.linf_distance(&RealPolynomial::new(alloc::vec![0.0, -2.0, 1.0])) <= 1e-12);
    }

    #[test]
    fn mcp_of_diagonal_units() {
        let p = mcp(&[e_ii(0, 2), e_ii(1, 2)]).unwrap();
        assert!(p.linf_distance(&RealPolynomial::new(alloc::vec![1.0, -2.0, 1.0])) <= 1e-12);
    }

    #[test]
    fn mcp_of_zeros() {
        let z = HermitianMatrix::zeros(2);
        let p = mcp(&[z.clone(), z]).unwrap();
        assert!(p.linf_distance(&RealPolynomial::monomial(2)) <= 1e-12);
    }

    #[test]
    fn mcp_of_two_identities() {
        // (1-d1)(1-d2)(z+z1+z2)^2 at 0 = z^2 - 4z + 2
        let i2 = HermitianMatrix::identity(2);
        let p = mcp(&[i2.clone(), i2]).unwrap();
        assert!(p.linf_distance(&RealPolynomial::new(alloc::vec![2.0, -4.0, 1.0])) <= 1e-12);
    }

    #[test]
    fn mcp_empty_family_is_monomial() {
        let p = mcp_with_dim(3, &[]).unwrap();
        assert!(p.linf_distance(&RealPolynomial::monomial(3)) <= 1e-12);
        assert!(mcp(&[]).is_err());
    }

    #[test]
    fn mcp_matches_oracle_on_spec_examples() {
        let cases: Vec<Vec<HermitianMatrix>> = alloc::vec![
            alloc::vec![HermitianMatrix::identity(2)],
            alloc::vec![e_ii(0, 2), e_ii(1, 2)],
            alloc::vec![HermitianMatrix::zeros(2), HermitianMatrix::zeros(2)],
        ];
        for mats in cases {
            let a = mcp(&mats).unwrap();
            let b = mcp_oracle(&mats).unwrap();
            assert!(a.linf_distance(&b) <= 1e-8, "{:?} vs {:?}", a, b);
        }
    }

    #[test]
    fn rank_one_fast_path_agrees_with_subset_expansion() {
        let mut rng = gen::rng_from_seed(11);
        // rank-one family: the char-poly fast path applies; the lattice
        // oracle knows nothing about it.
        let d = 3;
        let vs: Vec<CVec> = (0..4).map(|_| gen::random_vector(&mut rng, d)).collect();
        let mats: Vec<HermitianMatrix> = vs.iter().map(HermitianMatrix::outer).collect();
        let fast = mcp(&mats).unwrap();
        let oracle = mcp_oracle(&mats).unwrap();
        assert!(fast.linf_distance(&oracle) <= 1e-7 * (1.0 + fast.coeff(0).abs()));
    }

    #[test]
    fn reduced_mcp_examples() {
        let p = reduced_mcp(&[HermitianMatrix::identity(1)]).unwrap();
        assert!(p.linf_distance(&RealPolynomial::new(alloc::vec![-1.0, 1.0])) <= 1e-12);
        let q = reduced_mcp(&[e_ii(0, 2)]).unwrap();
        assert!(q.linf_distance(&RealPolynomial::new(alloc::vec![-1.0, 1.0])) <= 1e-12);
        let r = reduced_mcp_with_dim(3, &[]).unwrap();
        assert!(r.linf_distance(&RealPolynomial::one()) <= 1e-12);
    }

    #[test]
    fn maxroot_examples() {
        let p = RealPolynomial::new(alloc::vec![0.0, -2.0, 1.0]);
        let r = maxroot(&p, 1e-7).unwrap();
        assert!((r.value - 2.0).abs() <= 1e-9);
        assert!(r.all_real);
        let q = RealPolynomial::new(alloc::vec![1.0, -2.0, 1.0]);
        let r = maxroot(&q, 1e-7).unwrap();
        assert!((r.value - 1.0).abs() <= 1e-6);
        assert!(r.all_real);
        assert!(maxroot(&RealPolynomial::one(), 1e-7).is_err());
        assert!(maxroot(&RealPolynomial::new(alloc::vec![0.0]), 1e-7).is_err());
    }

    /// Multiplied-out cluster polynomials keep a sharp maxroot. Companion
    /// eigenvalues smear a multiplicity-5 root at `c ≈ 0.045` into a pentagon
    /// of radius ~0.02, which once tripped the greedy descent guard; the
    /// shift-certificate bisection pins it to the cluster center.
    #[test]
    fn maxroot_stays_sharp_on_clustered_roots() {
        // z^6 (z - c)^5, the conditional polynomial of a padded weaver
        // instance over five identical rank-one groups
        let c = 0.2264361412698621 / 5.0;
        let mut coeffs = alloc::vec![1.0f64];
        for _ in 0..5 {
            let mut next = alloc::vec![0.0f64; coeffs.len() + 1];
            for (k, &a) in coeffs.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= c * a;
            }
            coeffs = next;
        }
        let mut full = alloc::vec![0.0f64; 6];
        full.extend_from_slice(&coeffs);
        let p = RealPolynomial::new(full);
        let r = maxroot(&p, 1e-7).unwrap();
        assert!((r.value - c).abs() <= 1e-9, "maxroot {} vs cluster center {c}", r.value);

        // (z - 1)^3 (z + 2)^2 = z^5 + z^4 - 5z^3 - z^2 + 8z - 4: the top
        // root is the smaller-magnitude cluster
        let p2 = RealPolynomial::new(alloc::vec![-4.0, 8.0, -1.0, -5.0, 1.0, 1.0]);
        let r2 = maxroot(&p2, 1e-7).unwrap();
        assert!((r2.value - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn maxroot_of_single_matrix_mcp_is_trace() {
        let mut rng = gen::rng_from_seed(3);
        for d in 1..=4usize {
            let h = gen::random_hermitian(&mut rng, d, 1.0);
            // mu[B] = z^{d-1}(z - tr B); force a nonnegative trace so the
            // trace root dominates the zero root.
            let h = if h.trace() < 0.0 { h.scale(-1.0) } else { h };
            let p = mcp(&[h.clone()]).unwrap();
            let r = maxroot(&p, 1e-6).unwrap();
            assert!((r.value - h.trace()).abs() <= 1e-7 * (1.0 + h.trace().abs()));
        }
    }
}
