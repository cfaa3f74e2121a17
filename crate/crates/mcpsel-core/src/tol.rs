//! Central tolerance configuration.
//!
//! The polynomial and operator identities implemented here are exact in exact
//! arithmetic; floating point needs one knob per kind of comparison. Values
//! are compared against these tolerances everywhere instead of ad-hoc
//! epsilons.

/// Smallest eigenvalue a matrix may have and still count as positive
/// semidefinite; more negative values are construction errors, values in
/// `(-TOL_PSD, 0)` are clamped to zero for downstream use.
pub const TOL_PSD: f64 = 1e-9;

/// Coefficient-wise and entry-wise equality of recomputed quantities.
pub const TOL_EQ: f64 = 1e-8;

/// Root-location comparisons (maxroot monotonicity, norm bounds). Companion
/// matrix eigenvalues of clustered real-rooted polynomials are good to about
/// this much.
pub const TOL_ROOT: f64 = 1e-7;

/// Allowed deviation from exact Hermitian symmetry on construction, relative
/// to the entry scale, before an input is rejected.
pub const TOL_HERMITIAN: f64 = 1e-12;

/// Probability masses must sum to one within this.
pub const TOL_PROB: f64 = 1e-12;

/// Gram(u) + Gram(v) = I for Naimark pairs holds to this on desk-scale inputs.
pub const TOL_NAIMARK: f64 = 1e-10;

/// Spectral cutoff when realizing a vector system from a Gram matrix or when
/// completing a Bessel system to a Parseval frame: eigenvalues at or below
/// this are treated as zero rank.
pub const TOL_RANK: f64 = 1e-12;

/// Runtime-adjustable tolerance bundle. `Tolerances::default()` is the
/// configuration used by every test in this workspace; the CLI `--tol` flag
/// scales `eq` and `root` together.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub psd: f64,
    pub eq: f64,
    pub root: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { psd: TOL_PSD, eq: TOL_EQ, root: TOL_ROOT }
    }
}
