//! Exponential systems on finite unions of torus intervals.
//!
//! The Gram matrix of `{e^{2πiλx}}` in `L²(S)` has closed-form entries: the
//! Fourier coefficients of the indicator of `S`. This module assembles those
//! matrices exactly, realizes the finite window section as concrete vectors,
//! and drives the selector machinery through them: near-tight Riesz
//! sequences from one pick per consecutive frequency block, removal of a
//! separated frequency set that restores a Riesz lower bound when `S` has
//! small complement, and separated frame sampling at a certified rate.
//!
//! Everything here is a finite section. Certified spectra live on the
//! principal submatrix cut from the window `[−W, W]`; no certificate claims
//! anything about the infinite system.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::binsel::{
    derived_deviation_constant, remove_sparse_set, sparse_selector_partition,
    DoublingPointSet, SparseRemoval, SparseSelectorConfig,
};
use crate::error::{CoreError, Result};
use crate::frames::{r_eps_select, FrameSelectConfig, RieszCertificate, VectorSystem};
use crate::linalg::{HermitianMatrix, PsdMatrix};
use crate::selector::SelectOptions;
use crate::tol;
use crate::{C64, CMat, CVec};

/// Finite union of half-open intervals `[a, b) ⊂ [0, 1)`, sorted and
/// pairwise disjoint. Touching pieces are legal and kept separate.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    /// Validates `0 ≤ a < b ≤ 1` per piece and disjointness after sorting.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(CoreError::Invalid("an interval union needs at least one piece".into()));
        }
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b && b <= 1.0) {
                return Err(CoreError::Invalid(format!(
                    "[{a}, {b}) is not a subinterval of [0, 1)"
                )));
            }
        }
        intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite endpoints"));
        for w in intervals.windows(2) {
            if w[0].1 > w[1].0 {
                return Err(CoreError::Invalid(format!(
                    "[{}, {}) overlaps [{}, {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(IntervalUnion { intervals })
    }

    /// The full torus `[0, 1)`.
    pub fn full() -> Self {
        IntervalUnion { intervals: vec![(0.0, 1.0)] }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Lebesgue measure `Σ (b − a)`.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|&(a, b)| b - a).sum()
    }

    /// Complement within `[0, 1)`; empty when the pieces cover the torus.
    /// Endpoint comparisons are exact, so complementing twice returns the
    /// original union.
    pub fn complement(&self) -> IntervalUnion {
        let mut gaps = Vec::new();
        let mut cursor = 0.0f64;
        for &(a, b) in &self.intervals {
            if cursor < a {
                gaps.push((cursor, a));
            }
            cursor = b;
        }
        if cursor < 1.0 {
            gaps.push((cursor, 1.0));
        }
        IntervalUnion { intervals: gaps }
    }

    /// Half-open membership test.
    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x < b)
    }
}

/// Frequencies selected from the symmetric integer window `[−W, W]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencySet {
    window: i64,
    selected: Vec<i64>,
}

impl FrequencySet {
    /// Sorts, rejects duplicates and anything outside the window.
    pub fn new(window: i64, mut selected: Vec<i64>) -> Result<Self> {
        if window < 0 {
            return Err(CoreError::Invalid(format!("window half-width {window} is negative")));
        }
        selected.sort_unstable();
        for w in selected.windows(2) {
            if w[0] == w[1] {
                return Err(CoreError::Invalid(format!("frequency {} repeats", w[0])));
            }
        }
        if let (Some(&lo), Some(&hi)) = (selected.first(), selected.last()) {
            if lo < -window || hi > window {
                return Err(CoreError::Invalid(format!(
                    "frequencies span [{lo}, {hi}], outside the window [−{window}, {window}]"
                )));
            }
        }
        Ok(FrequencySet { window, selected })
    }

    pub fn window(&self) -> i64 {
        self.window
    }

    /// Number of integers in the window, `2W + 1`.
    pub fn window_len(&self) -> usize {
        (2 * self.window + 1) as usize
    }

    pub fn selected(&self) -> &[i64] {
        &self.selected
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Smallest distance between two selected frequencies; infinite when
    /// fewer than two are selected.
    pub fn min_gap(&self) -> f64 {
        self.selected
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest distance between consecutive selected frequencies; zero when
    /// fewer than two are selected.
    pub fn max_gap(&self) -> i64 {
        self.selected.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }
}

/// `∫_S e^{−2πikx} dx` in closed form: the measure at `k = 0`, otherwise
/// `Σ (e^{−2πikb} − e^{−2πika}) / (−2πik)` over the pieces. The cosine is
/// even and the sine odd, so `F(−k)` equals the conjugate of `F(k)` exactly.
pub fn indicator_fourier(s: &IntervalUnion, k: i64) -> C64 {
    if k == 0 {
        return C64::new(s.measure(), 0.0);
    }
    let w = -2.0 * core::f64::consts::PI * k as f64;
    let mut acc = C64::new(0.0, 0.0);
    for &(a, b) in &s.intervals {
        acc += C64::new(libm::cos(w * b) - libm::cos(w * a), libm::sin(w * b) - libm::sin(w * a));
    }
    acc / C64::new(0.0, w)
}

/// Gram matrix of `{e^{2πiλx}}_{λ ∈ freqs}` in `L²(S)`: the entry at row `µ`,
/// column `λ` is `indicator_fourier(S, λ − µ)`, so it depends on the
/// frequency difference alone and the diagonal is `|S|`. Rows and columns
/// follow the given frequency order.
pub fn exp_gram(s: &IntervalUnion, freqs: &[i64]) -> Result<HermitianMatrix> {
    if freqs.is_empty() {
        return Err(CoreError::Invalid("Gram matrix of an empty frequency set".into()));
    }
    let lo = *freqs.iter().min().expect("nonempty");
    let hi = *freqs.iter().max().expect("nonempty");
    let span = (hi - lo) as usize;
    // one evaluation per difference; conjugate symmetry of the transform
    // makes the matrix Hermitian to the bit
    let table: Vec<C64> = (-(span as i64)..=span as i64)
        .map(|d| indicator_fourier(s, d))
        .collect();
    let n = freqs.len();
    let m = CMat::from_fn(n, n, |i, j| table[(freqs[j] - freqs[i] + span as i64) as usize]);
    HermitianMatrix::new(m)
}

/// Realizes the section `{e^{2πiλx}|_S}_{λ ∈ freqs}` as concrete vectors:
/// eigendecompose the exact Gram, drop eigenvalues below `TOL_RANK`, and put
/// vector `k` at `D^{1/2} U^* e_k` in the kept eigenbasis. The realized Gram
/// reproduces the exact one to eigensolver accuracy, squared norms are the
/// diagonal `|S|`, and the frame operator is the kept eigenvalue diagonal —
/// at most the identity, the section shadow of the full-line Parseval
/// property.
pub fn realize_section(s: &IntervalUnion, freqs: &[i64]) -> Result<VectorSystem> {
    let g = exp_gram(s, freqs)?;
    let (vals, vecs) = g.eigen_pairs();
    let kept: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > tol::TOL_RANK).collect();
    if kept.is_empty() {
        return Err(CoreError::Invalid(
            "the section Gram has no spectrum above the rank tolerance".into(),
        ));
    }
    let roots: Vec<f64> = kept.iter().map(|&i| libm::sqrt(vals[i])).collect();
    let mut vectors = Vec::with_capacity(freqs.len());
    for k in 0..freqs.len() {
        let mut v = CVec::zeros(kept.len());
        for (slot, &i) in kept.iter().enumerate() {
            v[slot] = vecs[(k, i)].conj() * C64::new(roots[slot], 0.0);
        }
        vectors.push(v);
    }
    VectorSystem::new(kept.len(), vectors)
}

fn window_frequencies(window: i64) -> Vec<i64> {
    (-window..=window).collect()
}

fn validate_window(window: i64) -> Result<()> {
    if !(0..=100_000).contains(&window) {
        return Err(CoreError::Invalid(format!(
            "window half-width {window} is outside the supported range"
        )));
    }
    Ok(())
}

fn validate_tightness(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CoreError::Invalid(format!("tightness must lie in (0,1), got {epsilon}")));
    }
    Ok(())
}

fn validate_positive_measure(s: &IntervalUnion) -> Result<f64> {
    let m = s.measure();
    if !(m > 0.0) {
        return Err(CoreError::Invalid("the interval union has no mass".into()));
    }
    Ok(m)
}

fn gram_extremes(s: &IntervalUnion, freqs: &[i64]) -> Result<(f64, f64)> {
    let ev = exp_gram(s, freqs)?.eigenvalues();
    Ok((
        ev.first().copied().unwrap_or(0.0),
        ev.last().copied().unwrap_or(0.0),
    ))
}

/// One frequency from each consecutive window block, with the evidence that
/// the choice is a near-tight Riesz sequence on the section: the extremes of
/// `exp_gram(S, Λ)` against the target `(1 ± ε)|S|`, and the syndetic gap
/// bound `2r − 1` that one pick per length-`r` block forces.
#[derive(Clone, Debug)]
pub struct SyndeticSelection {
    pub set: IntervalUnion,
    pub frequencies: FrequencySet,
    pub epsilon: f64,
    /// Block-length constant: blocks have length `r = ⌈C/(|S|ε²)⌉`, and the
    /// same value feeds the unit-norm selector's group-size rule.
    pub constant: f64,
    pub r: usize,
    /// Extremes of `exp_gram(S, Λ)`.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `(1 − ε)|S|`.
    pub target_lo: f64,
    /// `(1 + ε)|S|`.
    pub target_hi: f64,
    /// Largest gap between consecutive selected frequencies; at most `2r − 1`.
    pub max_gap: i64,
    pub min_gap: f64,
    /// Certificate of the unit-norm selector on the realized window section;
    /// absent on the orthogonal shortcut for a full-measure `S`.
    pub inner: Option<RieszCertificate>,
}

/// Selects a syndetic frequency set whose exponentials form a near-tight
/// Riesz sequence on the window section of `L²(S)`.
///
/// The window `[−W, W]` is cut into consecutive blocks of length
/// `r = ⌈constant/(|S|ε²)⌉` (a trailing remainder shorter than `r` is left
/// unused), the section is realized from the exact Gram and normalized to
/// unit norms, and the unit-norm `(1 ± ε)` selector picks one frequency per
/// block. The certificate recomputes the Gram extremes of the choice from
/// `(S, Λ)` alone and fails honestly when they miss `(1 ± ε)|S|`.
///
/// The unit-norm machinery has its own group-size rule driven by `constant`
/// and the section's Bessel bound `≈ 1/|S|`; for `|S| ≥ 1/2` every
/// `constant ≥ 2` satisfies it, while thinner sets need larger blocks and
/// otherwise fail the hypothesis check.
pub fn syndetic_riesz_select(
    s: &IntervalUnion,
    epsilon: f64,
    window: i64,
    constant: f64,
    opts: &SelectOptions,
) -> Result<SyndeticSelection> {
    let measure = validate_positive_measure(s)?;
    validate_tightness(epsilon)?;
    validate_window(window)?;
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(CoreError::Invalid(format!(
            "block-length constant must be positive and finite, got {constant}"
        )));
    }
    let freqs = window_frequencies(window);
    let n = freqs.len();

    if s.complement().is_empty() {
        // full measure: the window exponentials are orthogonal and every
        // frequency can stay
        let fs = FrequencySet::new(window, freqs.clone())?;
        let (lambda_min, lambda_max) = gram_extremes(s, &freqs)?;
        let max_gap = fs.max_gap();
        let min_gap = fs.min_gap();
        return Ok(SyndeticSelection {
            set: s.clone(),
            frequencies: fs,
            epsilon,
            constant,
            r: 1,
            lambda_min,
            lambda_max,
            target_lo: (1.0 - epsilon) * measure,
            target_hi: (1.0 + epsilon) * measure,
            max_gap,
            min_gap,
            inner: None,
        });
    }

    let r = (libm::ceil(constant / (measure * epsilon * epsilon) - 1e-9) as usize).max(1);
    let k = n / r;
    if k < 2 {
        return Err(CoreError::Hypothesis(format!(
            "window [−{window}, {window}] holds only {k} full blocks of length {r}; \
             at least 2 are needed"
        )));
    }
    let blocks: Vec<Vec<usize>> = (0..k).map(|b| (b * r..(b + 1) * r).collect()).collect();

    let section = realize_section(s, &freqs)?;
    // shade the normalization a hair under unit. The section spectrum is
    // mathematically at most |S| (a compression of a projection), but for
    // sets like the half torus the top eigenvalue sits at |S| to machine
    // precision, and eigensolver noise must not push the recomputed Bessel
    // bound of the normalized system over the selector's redundancy
    // threshold 1/ε = 2. The shade is far inside the unit-norm tolerance.
    let normalized = section.scaled(1.0 / libm::sqrt(measure * (1.0 + 1e-10)));
    let mut cfg = FrameSelectConfig::default();
    cfg.reps_constant = constant;
    cfg.opts = opts.clone();
    let inner = r_eps_select(&[normalized], &blocks, epsilon, &cfg)?;

    let selected: Vec<i64> = inner.selected.iter().map(|&p| p as i64 - window).collect();
    let fs = FrequencySet::new(window, selected)?;
    let (lambda_min, lambda_max) = gram_extremes(s, fs.selected())?;
    let target_lo = (1.0 - epsilon) * measure;
    let target_hi = (1.0 + epsilon) * measure;
    if lambda_min < target_lo - tol::TOL_EQ || lambda_max > target_hi + tol::TOL_EQ {
        return Err(CoreError::Hypothesis(format!(
            "window [−{window}, {window}] is too small: section bounds \
             [{lambda_min}, {lambda_max}] miss the target [{target_lo}, {target_hi}]"
        )));
    }
    let max_gap = fs.max_gap();
    if max_gap > (2 * r - 1) as i64 {
        return Err(CoreError::Invalid(format!(
            "gap {max_gap} exceeds the syndetic bound {}; this signals a block-assembly bug",
            2 * r - 1
        )));
    }
    let min_gap = fs.min_gap();
    Ok(SyndeticSelection {
        set: s.clone(),
        frequencies: fs,
        epsilon,
        constant,
        r,
        lambda_min,
        lambda_max,
        target_lo,
        target_hi,
        max_gap,
        min_gap,
        inner: Some(inner),
    })
}

/// Exactly Parseval finite model of the window exponentials on `S`: the
/// torus is sampled on the grid `{j/n}` with `n = 2W + 1`, and frequency `k`
/// becomes the restriction of the `k`-th character to the grid points inside
/// `S`, scaled by `1/√n`. Over the whole window these vectors sum to the
/// identity on their span exactly (a full character sum over `ℤ_n`), with
/// every squared norm equal to the grid measure `m/n`.
fn grid_parseval_section(s: &IntervalUnion, window: i64) -> Result<VectorSystem> {
    let n = (2 * window + 1) as usize;
    let inside: Vec<usize> = (0..n).filter(|&j| s.contains(j as f64 / n as f64)).collect();
    if inside.is_empty() {
        return Err(CoreError::Hypothesis(format!(
            "no grid point of order {n} lands in the set; the window cannot resolve it"
        )));
    }
    let scale = 1.0 / libm::sqrt(n as f64);
    let tau = 2.0 * core::f64::consts::PI;
    let mut vectors = Vec::with_capacity(n);
    for k in -window..=window {
        let mut v = CVec::zeros(inside.len());
        for (slot, &j) in inside.iter().enumerate() {
            let angle = tau * ((k * j as i64).rem_euclid(n as i64) as f64) / n as f64;
            v[slot] = C64::new(libm::cos(angle) * scale, libm::sin(angle) * scale);
        }
        vectors.push(v);
    }
    VectorSystem::new(inside.len(), vectors)
}

/// Removal outcome: dropping the separated frequencies `Λ^c` leaves every
/// set's window section a Riesz sequence with a certified lower bound.
///
/// The machinery runs on the exactly Parseval grid model of the section,
/// whose norm deficiency `δ₀ = Σ_j (1 − m_j/n)` is the grid reading of the
/// total complement measure; the continuous Gram of the kept frequencies is
/// then recomputed per set and gated against the mechanism floor rescaled to
/// continuous units.
#[derive(Clone, Debug)]
pub struct RemovalSelection {
    pub sets: Vec<IntervalUnion>,
    pub window: i64,
    /// Separation radius, the largest integer with `2r + 1 ≤ c̃/(4δ₀)`.
    pub r: f64,
    /// Removed frequencies `Λ^c`, pairwise at least `r` apart.
    pub removed: Vec<i64>,
    /// Kept frequencies, the window with `Λ^c` deleted.
    pub kept: FrequencySet,
    /// Smallest pairwise distance within the removed set.
    pub min_gap: f64,
    /// `λ_min` of `exp_gram(S_j, kept)` per set.
    pub lambda_min: Vec<f64>,
    /// Mechanism floor `2^{−N−1}` of the grid model per set, rescaled from
    /// grid norms `m_j/n` to the continuous norms `|S_j|`.
    pub certified_lower: Vec<f64>,
    /// Closed-form value the asymptotic statement promises, rescaled the
    /// same way; recorded, certified only where it does not exceed the
    /// mechanism floor.
    pub formula_lower: Vec<f64>,
    /// Grid norm deficiency `Σ_j (1 − m_j/n)`.
    pub delta0: f64,
    pub depth: usize,
    pub grid_size: usize,
    /// Grid measures `m_j/n`.
    pub grid_measure: Vec<f64>,
    pub c_tilde: f64,
    pub inner: SparseRemoval,
}

/// Removes one separated frequency set so that the remaining window
/// exponentials form a Riesz sequence on every given set's section.
///
/// Needs every complement small enough that the radius rule
/// `2r + 1 ≤ c̃/(4δ₀)` admits `r ≥ 2`. The removal itself runs on the grid
/// model (the only finite section that is exactly Parseval, as the removal
/// mechanism requires); its floor `2^{−N−1}` is then checked against the
/// continuous Gram of the kept frequencies, so a window too coarse for its
/// set fails here instead of certifying quietly.
pub fn unit_norm_removal(
    sets: &[IntervalUnion],
    window: i64,
    c_tilde: f64,
    opts: &SelectOptions,
) -> Result<RemovalSelection> {
    if sets.is_empty() {
        return Err(CoreError::Invalid("need at least one interval union".into()));
    }
    validate_window(window)?;
    if !(c_tilde > 0.0 && c_tilde.is_finite()) {
        return Err(CoreError::Invalid(format!(
            "admissibility constant must be positive and finite, got {c_tilde}"
        )));
    }
    let measures = sets
        .iter()
        .map(validate_positive_measure)
        .collect::<Result<Vec<f64>>>()?;
    let n = (2 * window + 1) as usize;

    let systems = sets
        .iter()
        .map(|s| grid_parseval_section(s, window))
        .collect::<Result<Vec<VectorSystem>>>()?;
    let grid_measure: Vec<f64> = systems
        .iter()
        .map(|sys| sys.norms_sq().into_iter().fold(f64::INFINITY, f64::min))
        .collect();
    let delta0: f64 = grid_measure.iter().map(|&g| (1.0 - g).max(0.0)).sum();

    let r = if delta0 <= tol::TOL_EQ {
        // nothing to remove; any radius is consistent with an empty set
        1.0
    } else {
        let admissible = c_tilde / (4.0 * delta0);
        let r = libm::floor((admissible - 1.0) / 2.0);
        if r < 2.0 {
            return Err(CoreError::Hypothesis(format!(
                "complement mass {delta0:.6} admits only radius {r} under \
                 2r + 1 ≤ c̃/(4δ₀) = {admissible:.3}; the removal needs r ≥ 2"
            )));
        }
        r
    };

    let coords: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let space = DoublingPointSet::from_line_points(&coords, 3.0)?;
    // zero headroom: the separation certificate is recomputed on the
    // integer line anyway, and the shallowest admissible tree gives the
    // strongest mechanism floor 2^(−N−1)
    let cfg = SparseSelectorConfig { eta: 0, c_tilde: Some(c_tilde), opts: opts.clone() };
    let inner = remove_sparse_set(&space, &systems, r, &cfg)?;

    let removed: Vec<i64> = inner.removed.iter().map(|&i| i as i64 - window).collect();
    let kept_freqs: Vec<i64> = inner.kept.iter().map(|&i| i as i64 - window).collect();
    let kept = FrequencySet::new(window, kept_freqs)?;
    let removed_set = FrequencySet::new(window, removed.clone())?;
    let min_gap = removed_set.min_gap();
    if min_gap < r {
        return Err(CoreError::Invalid(format!(
            "removed frequencies are only {min_gap} apart, below the radius {r}; \
             this signals a separation bug"
        )));
    }

    let mut lambda_min = Vec::with_capacity(sets.len());
    let mut certified_lower = Vec::with_capacity(sets.len());
    let mut formula_lower = Vec::with_capacity(sets.len());
    for (j, s) in sets.iter().enumerate() {
        let (low, _) = gram_extremes(s, kept.selected())?;
        // rescale the grid-model floor (Gram diagonal m/n) to the continuous
        // Gram (diagonal |S|)
        let to_continuous = measures[j] / grid_measure[j];
        let floor = inner.certified_lower * to_continuous;
        if low < floor - tol::TOL_EQ {
            return Err(CoreError::Hypothesis(format!(
                "set {j}: the continuous section reaches only λ_min = {low}, below the \
                 grid-certified floor {floor}; the window is too coarse for this set"
            )));
        }
        lambda_min.push(low);
        certified_lower.push(floor);
        formula_lower.push(inner.formula_lower * to_continuous);
    }

    Ok(RemovalSelection {
        sets: sets.to_vec(),
        window,
        r,
        removed,
        kept,
        min_gap,
        lambda_min,
        certified_lower,
        formula_lower,
        delta0,
        depth: inner.depth,
        grid_size: n,
        grid_measure,
        c_tilde,
        inner,
    })
}

/// Separated frame sample: one leaf of the operator partition of the window
/// exponentials, with its deviation, separation, and Gram extremes against
/// the rate targets `(1 ± ε)·a|S|/ε² = (1 ± ε)·2^{−N}`.
#[derive(Clone, Debug)]
pub struct FrameSample {
    pub set: IntervalUnion,
    pub window: i64,
    pub epsilon: f64,
    pub c_tilde: f64,
    pub frequencies: FrequencySet,
    /// Tree depth `N`; the leaf carries a `2^{−N}` share of the window.
    pub depth: usize,
    /// Sampling rate `a = 2^{−N} ε²/|S|`.
    pub a: f64,
    /// Range the amplification `2^N` must fall in for the derived-constant
    /// envelope to certify the deviation a priori; recorded, not gated.
    pub amplification_bracket: Option<(f64, f64)>,
    /// Separation radius, the largest integer with `2r + 1 ≤ c̃ε²/|S|`.
    pub r: f64,
    pub min_gap: f64,
    /// `‖2^N Σ_{λ ∈ Λ} e_λ e_λ^* − Σ_window‖` on the realized section.
    pub deviation: f64,
    /// Extremes of `exp_gram(S, Λ)`.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `(1 − ε)·2^{−N}`.
    pub target_lo: f64,
    /// `(1 + ε)·2^{−N}`; the operator sandwich makes this side binding.
    pub target_hi: f64,
    /// Whether the section also reaches the lower target. The window
    /// section's spectral tail can sit below the infinite-model floor, so
    /// this is recorded evidence, not a gate.
    pub lower_met: bool,
}

/// Samples a separated frequency set whose exponentials carry a `2^{−N}`
/// share of the window frame operator within `ε`.
///
/// The radius comes from the ball-count rule `2r + 1 ≤ c̃ε²/|S|`; below
/// `r = 2` no separation is demanded and the whole window is the depth-zero
/// answer. Otherwise the separated partition machinery splits the window
/// into `2^N` leaves, each deviating from its share by at most `ε`, and the
/// leaf with the smallest deviation is returned. The upper Gram target
/// follows from the deviation sandwich and is enforced; the lower target is
/// a statement about the infinite model that the section reports honestly.
pub fn bounded_frame_sample(
    s: &IntervalUnion,
    epsilon: f64,
    window: i64,
    c_tilde: f64,
    opts: &SelectOptions,
) -> Result<FrameSample> {
    let measure = validate_positive_measure(s)?;
    validate_tightness(epsilon)?;
    validate_window(window)?;
    if !(c_tilde > 0.0 && c_tilde.is_finite()) {
        return Err(CoreError::Invalid(format!(
            "admissibility constant must be positive and finite, got {c_tilde}"
        )));
    }
    let admissible = c_tilde * epsilon * epsilon / measure;
    if admissible < 1.0 {
        return Err(CoreError::Hypothesis(format!(
            "even a single point exceeds the ball allowance c̃ε²/|S| = {admissible:.4}; \
             the trace condition has no window analog here"
        )));
    }
    let r = libm::floor((admissible - 1.0) / 2.0).max(0.0);
    let freqs = window_frequencies(window);

    let constant = derived_deviation_constant();
    let envelope = (
        epsilon * epsilon / (2.0 * constant * constant * measure),
        epsilon * epsilon / (constant * constant * measure),
    );

    if r < 2.0 {
        // depth zero: the window is its own leaf and the deviation vanishes
        let fs = FrequencySet::new(window, freqs.clone())?;
        let (lambda_min, lambda_max) = gram_extremes(s, &freqs)?;
        let target_lo = 1.0 - epsilon;
        let target_hi = 1.0 + epsilon;
        let min_gap = fs.min_gap();
        return Ok(FrameSample {
            set: s.clone(),
            window,
            epsilon,
            c_tilde,
            frequencies: fs,
            depth: 0,
            a: epsilon * epsilon / measure,
            amplification_bracket: Some(envelope),
            r,
            min_gap,
            deviation: 0.0,
            lambda_min,
            lambda_max,
            target_lo,
            target_hi,
            lower_met: lambda_min >= target_lo - tol::TOL_EQ,
        });
    }

    let section = realize_section(s, &freqs)?;
    let operators: Vec<PsdMatrix> =
        section.vectors().iter().map(PsdMatrix::rank_one).collect();
    let coords: Vec<f64> = (0..freqs.len()).map(|i| i as f64).collect();
    let space = DoublingPointSet::from_line_points(&coords, 3.0)?;
    // zero headroom, as in the removal: certificates are recomputed, and a
    // shallower tree keeps more frequencies per leaf
    let cfg = SparseSelectorConfig { eta: 0, c_tilde: Some(c_tilde), opts: opts.clone() };
    let partition = sparse_selector_partition(&space, &operators, epsilon, r, &cfg)?;

    let pick = (0..partition.leaves.len())
        .filter(|&v| !partition.leaves[v].is_empty())
        .min_by(|&a, &b| {
            partition.deviations[a]
                .partial_cmp(&partition.deviations[b])
                .expect("deviations are finite")
        })
        .ok_or_else(|| CoreError::Invalid("every leaf of the partition is empty".into()))?;
    let selected: Vec<i64> =
        partition.leaves[pick].iter().map(|&i| i as i64 - window).collect();
    let fs = FrequencySet::new(window, selected)?;
    let min_gap = fs.min_gap();
    if min_gap < r {
        return Err(CoreError::Invalid(format!(
            "leaf frequencies are only {min_gap} apart, below the radius {r}; \
             this signals a separation bug"
        )));
    }

    let depth = partition.depth;
    let share = libm::exp2(-(depth as f64));
    let (lambda_min, lambda_max) = gram_extremes(s, fs.selected())?;
    let target_lo = (1.0 - epsilon) * share;
    let target_hi = (1.0 + epsilon) * share;
    if lambda_max > target_hi + tol::TOL_EQ {
        return Err(CoreError::Invalid(format!(
            "leaf Gram reaches {lambda_max}, above the sandwich bound {target_hi}; \
             this signals a deviation-recomputation bug"
        )));
    }
    Ok(FrameSample {
        set: s.clone(),
        window,
        epsilon,
        c_tilde,
        frequencies: fs,
        depth,
        a: epsilon * epsilon * share / measure,
        amplification_bracket: partition.envelope_window,
        r,
        min_gap,
        deviation: partition.deviations[pick],
        lambda_min,
        lambda_max,
        target_lo,
        target_hi,
        lower_met: lambda_min >= target_lo - tol::TOL_EQ,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::gram;

    fn two_piece() -> IntervalUnion {
        IntervalUnion::new(alloc::vec![(0.1, 0.35), (0.5, 0.8)]).unwrap()
    }

    #[test]
    fn interval_union_validates_and_complements() {
        assert!(IntervalUnion::new(alloc::vec![]).is_err());
        assert!(IntervalUnion::new(alloc::vec![(0.2, 0.1)]).is_err());
        assert!(IntervalUnion::new(alloc::vec![(-0.1, 0.5)]).is_err());
        assert!(IntervalUnion::new(alloc::vec![(0.5, 1.2)]).is_err());
        assert!(IntervalUnion::new(alloc::vec![(0.0, 0.5), (0.4, 0.8)]).is_err());
        // touching pieces are disjoint
        let touching = IntervalUnion::new(alloc::vec![(0.3, 0.5), (0.0, 0.3)]).unwrap();
        assert_eq!(touching.intervals(), &[(0.0, 0.3), (0.3, 0.5)]);

        let s = two_piece();
        assert!((s.measure() - 0.55).abs() < 1e-15);
        let c = s.complement();
        assert_eq!(c.intervals(), &[(0.0, 0.1), (0.35, 0.5), (0.8, 1.0)]);
        assert_eq!(c.complement(), s);
        assert!(IntervalUnion::full().complement().is_empty());
        assert!(s.contains(0.1) && !s.contains(0.35) && !s.contains(0.05));
    }

    #[test]
    fn frequency_set_validates_and_measures_gaps() {
        assert!(FrequencySet::new(4, alloc::vec![5]).is_err());
        assert!(FrequencySet::new(4, alloc::vec![-5]).is_err());
        assert!(FrequencySet::new(4, alloc::vec![1, 1]).is_err());
        let fs = FrequencySet::new(8, alloc::vec![5, -3, 0]).unwrap();
        assert_eq!(fs.selected(), &[-3, 0, 5]);
        assert_eq!(fs.max_gap(), 5);
        assert!((fs.min_gap() - 3.0).abs() < 1e-15);
        assert_eq!(fs.window_len(), 17);
        let lone = FrequencySet::new(2, alloc::vec![1]).unwrap();
        assert!(lone.min_gap().is_infinite());
        assert_eq!(lone.max_gap(), 0);
    }

    #[test]
    fn indicator_fourier_closed_forms() {
        let full = IntervalUnion::full();
        for k in [1i64, 5, -17] {
            assert!(indicator_fourier(&full, k).norm() < 1e-12);
        }
        let s = two_piece();
        assert_eq!(indicator_fourier(&s, 0), C64::new(s.measure(), 0.0));

        // ∫_0^{1/2} e^{−2πix} dx = −i/π
        let half = IntervalUnion::new(alloc::vec![(0.0, 0.5)]).unwrap();
        let v = indicator_fourier(&half, 1);
        assert!(v.re.abs() < 1e-15);
        assert!((v.im + 1.0 / core::f64::consts::PI).abs() < 1e-15);

        // the transform of a real indicator is conjugate-even, exactly
        for k in [1i64, 2, 9, 40] {
            assert_eq!(indicator_fourier(&s, -k), indicator_fourier(&s, k).conj());
        }
    }

    // adaptive Simpson on one piece, splitting until the local estimate
    // stabilizes; used as an independent quadrature oracle
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }

    fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, 0.5 * (a + m), m);
        let right = simpson(f, m, 0.5 * (m + b), b);
        if depth == 0 || (left + right - whole).abs() < 1e-13 {
            return left + right + (left + right - whole) / 15.0;
        }
        adaptive(f, a, m, left, depth - 1) + adaptive(f, m, b, right, depth - 1)
    }

    fn quadrature_fourier(s: &IntervalUnion, k: i64) -> C64 {
        let w = -2.0 * core::f64::consts::PI * k as f64;
        let re = |x: f64| libm::cos(w * x);
        let im = |x: f64| libm::sin(w * x);
        let mut acc = C64::new(0.0, 0.0);
        for &(a, b) in s.intervals() {
            // panels no longer than a quarter period, so the oscillation
            // cannot alias the first Simpson estimate into false convergence
            let panels = (4.0 * k.unsigned_abs() as f64 * (b - a)).ceil() as usize + 1;
            for p in 0..panels {
                let pa = a + (b - a) * p as f64 / panels as f64;
                let pb = a + (b - a) * (p + 1) as f64 / panels as f64;
                let pm = 0.5 * (pa + pb);
                acc += C64::new(
                    adaptive(&re, pa, pb, simpson(&re, pa, pm, pb), 40),
                    adaptive(&im, pa, pb, simpson(&im, pa, pm, pb), 40),
                );
            }
        }
        acc
    }

    #[test]
    fn indicator_fourier_matches_adaptive_quadrature() {
        let s = two_piece();
        for k in [1i64, -3, 7, 23, 64] {
            let closed = indicator_fourier(&s, k);
            let quad = quadrature_fourier(&s, k);
            assert!(
                (closed - quad).norm() < 1e-10,
                "k = {k}: closed {closed} vs quadrature {quad}"
            );
        }
    }

    #[test]
    fn exp_gram_convention_is_pinned() {
        let half = IntervalUnion::new(alloc::vec![(0.0, 0.5)]).unwrap();
        let g = exp_gram(&half, &[0, 1]).unwrap();
        let m = g.as_matrix();
        let pi = core::f64::consts::PI;
        assert!((m[(0, 0)] - C64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((m[(1, 1)] - C64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((m[(0, 1)] - C64::new(0.0, -1.0 / pi)).norm() < 1e-15);
        assert!((m[(1, 0)] - C64::new(0.0, 1.0 / pi)).norm() < 1e-15);

        let full = IntervalUnion::full();
        let g = exp_gram(&full, &[-3, 0, 2]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g.as_matrix()[(i, j)] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }

        let s = two_piece();
        let lone = exp_gram(&s, &[7]).unwrap();
        assert!((lone.as_matrix()[(0, 0)].re - s.measure()).abs() < 1e-15);
    }

    #[test]
    fn exp_gram_entries_depend_on_differences_only() {
        let s = two_piece();
        let g = exp_gram(&s, &[-4, -1, 5]).unwrap();
        let m = g.as_matrix();
        assert_eq!(m[(0, 1)], indicator_fourier(&s, 3));
        assert_eq!(m[(1, 2)], indicator_fourier(&s, 6));
        assert_eq!(m[(0, 2)], indicator_fourier(&s, 9));
        assert_eq!(m[(2, 0)], indicator_fourier(&s, -9));
        // equispaced frequencies give literal Toeplitz structure
        let t = exp_gram(&s, &[2, 5, 8, 11]).unwrap();
        let tm = t.as_matrix();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(tm[(i, j)], tm[(i + 1, j + 1)]);
            }
        }
    }

    #[test]
    fn realized_section_reproduces_the_gram() {
        let s = two_piece();
        let freqs: Vec<i64> = (-6..=6).collect();
        let sys = realize_section(&s, &freqs).unwrap();
        let g = exp_gram(&s, &freqs).unwrap();
        let realized = gram(&sys);
        let mut dev = 0.0f64;
        for i in 0..freqs.len() {
            for j in 0..freqs.len() {
                dev = dev.max((realized.as_matrix()[(i, j)] - g.as_matrix()[(i, j)]).norm());
            }
        }
        assert!(dev < 1e-9, "realized Gram deviates by {dev}");
        for nn in sys.norms_sq() {
            assert!((nn - s.measure()).abs() < 1e-10);
        }
        // the frame operator of a section of a Parseval family stays under
        // the identity
        let top = sys.frame_operator().eigenvalues().last().copied().unwrap();
        assert!(top <= 1.0 + 1e-9);
    }

    #[test]
    fn syndetic_full_torus_keeps_the_whole_window() {
        let sel = syndetic_riesz_select(
            &IntervalUnion::full(),
            0.5,
            16,
            2.0,
            &SelectOptions::default(),
        )
        .unwrap();
        assert_eq!(sel.frequencies.len(), 33);
        assert!(sel.inner.is_none());
        assert!((sel.lambda_min - 1.0).abs() < 1e-12);
        assert!((sel.lambda_max - 1.0).abs() < 1e-12);
        assert_eq!(sel.max_gap, 1);
    }

    #[test]
    fn syndetic_half_torus_window_meets_the_targets() {
        let half = IntervalUnion::new(alloc::vec![(0.0, 0.5)]).unwrap();
        let sel =
            syndetic_riesz_select(&half, 0.5, 32, 2.0, &SelectOptions::default()).unwrap();
        assert_eq!(sel.r, 16);
        assert_eq!(sel.frequencies.len(), 4);
        assert!(sel.lambda_min >= sel.target_lo - 1e-8);
        assert!(sel.lambda_max <= sel.target_hi + 1e-8);
        assert!(sel.max_gap <= 31);
        // the certificate recomputes from (S, Λ) alone
        let (lo, hi) = gram_extremes(&half, sel.frequencies.selected()).unwrap();
        assert_eq!(lo, sel.lambda_min);
        assert_eq!(hi, sel.lambda_max);
        let inner = sel.inner.as_ref().unwrap();
        assert!((inner.achieved_lower[0] * half.measure() - sel.lambda_min).abs() < 1e-9);
        assert!((inner.achieved_upper[0] * half.measure() - sel.lambda_max).abs() < 1e-9);
    }

    #[test]
    fn syndetic_tiny_window_agrees_with_exhaustive_search() {
        let s = IntervalUnion::new(alloc::vec![(0.0, 0.6)]).unwrap();
        let (eps, w, c) = (0.9, 7i64, 2.0);
        let sel = syndetic_riesz_select(&s, eps, w, c, &SelectOptions::default()).unwrap();
        assert_eq!(sel.r, 5);
        assert_eq!(sel.frequencies.len(), 3);
        assert!(sel.lambda_min >= sel.target_lo - 1e-8);
        assert!(sel.lambda_max <= sel.target_hi + 1e-8);

        // enumerate all 5³ selectors; the returned one must match its own
        // recomputation and the best enumerated choice must meet the window,
        // confirming the existence claim independently of the weaver
        let mut best = (f64::NEG_INFINITY, 0.0f64);
        let mut ours_seen = false;
        for a in 0..5i64 {
            for b in 0..5i64 {
                for d in 0..5i64 {
                    let freqs = [a - w, 5 + b - w, 10 + d - w];
                    let (lo, hi) = gram_extremes(&s, &freqs).unwrap();
                    if lo > best.0 {
                        best = (lo, hi);
                    }
                    if freqs == sel.frequencies.selected() {
                        ours_seen = true;
                        assert_eq!(lo, sel.lambda_min);
                        assert_eq!(hi, sel.lambda_max);
                    }
                }
            }
        }
        assert!(ours_seen);
        assert!(best.0 >= sel.target_lo - 1e-8);
    }

    #[test]
    fn syndetic_window_too_small_errors() {
        let half = IntervalUnion::new(alloc::vec![(0.0, 0.5)]).unwrap();
        let err = syndetic_riesz_select(&half, 0.5, 8, 2.0, &SelectOptions::default());
        assert!(matches!(err, Err(CoreError::Hypothesis(_))));
    }

    #[test]
    fn removal_is_empty_when_the_complement_vanishes() {
        let sel = unit_norm_removal(
            &[IntervalUnion::full()],
            16,
            1.0,
            &SelectOptions::default(),
        )
        .unwrap();
        assert!(sel.removed.is_empty());
        assert_eq!(sel.kept.len(), 33);
        assert!((sel.lambda_min[0] - 1.0).abs() < 1e-9);
        assert!(sel.delta0 <= 1e-12);
    }

    #[test]
    fn removal_certifies_a_separated_set_for_a_thin_complement() {
        let s = IntervalUnion::new(alloc::vec![(0.0, 0.95)]).unwrap();
        let sel = unit_norm_removal(&[s], 128, 1.0, &SelectOptions::default()).unwrap();
        assert_eq!(sel.r, 2.0);
        assert!(!sel.removed.is_empty());
        assert!(sel.min_gap >= 2.0);
        assert!(sel.lambda_min[0] > 0.0);
        assert!(sel.certified_lower[0] > 0.0);
        assert!(sel.lambda_min[0] >= sel.certified_lower[0] - 1e-8);
        assert_eq!(sel.kept.len() + sel.removed.len(), 257);
        // grid measure of [0, 0.95) at order 257: grid points 0..=244
        assert!((sel.grid_measure[0] - 245.0 / 257.0).abs() < 1e-12);
    }

    #[test]
    fn removal_shares_one_set_across_two_unions() {
        let s1 = IntervalUnion::new(alloc::vec![(0.0, 0.98)]).unwrap();
        let s2 = IntervalUnion::new(alloc::vec![(0.02, 1.0)]).unwrap();
        let sel =
            unit_norm_removal(&[s1, s2], 128, 1.0, &SelectOptions::default()).unwrap();
        assert!(!sel.removed.is_empty());
        assert!(sel.min_gap >= sel.r);
        for j in 0..2 {
            assert!(sel.lambda_min[j] > 0.0);
            assert!(sel.lambda_min[j] >= sel.certified_lower[j] - 1e-8);
        }
    }

    #[test]
    fn removal_rejects_a_heavy_complement() {
        let s = IntervalUnion::new(alloc::vec![(0.0, 0.6)]).unwrap();
        let err = unit_norm_removal(&[s], 32, 1.0, &SelectOptions::default());
        assert!(matches!(err, Err(CoreError::Hypothesis(_))));
    }

    #[test]
    fn frame_sample_depth_zero_keeps_the_window() {
        let full = IntervalUnion::full();
        let sample =
            bounded_frame_sample(&full, 0.6, 16, 4.0, &SelectOptions::default()).unwrap();
        assert_eq!(sample.depth, 0);
        assert_eq!(sample.frequencies.len(), 33);
        assert_eq!(sample.deviation, 0.0);
        assert!((sample.a - 0.36).abs() < 1e-12);
        assert!(sample.lower_met);
        assert!((sample.lambda_min - 1.0).abs() < 1e-12);

        // a half torus at depth zero keeps the window too, but its section
        // tail honestly misses the infinite-model lower target
        let half = IntervalUnion::new(alloc::vec![(0.0, 0.5)]).unwrap();
        let sample =
            bounded_frame_sample(&half, 0.5, 16, 4.0, &SelectOptions::default()).unwrap();
        assert_eq!(sample.depth, 0);
        assert!(!sample.lower_met);
        assert!(sample.lambda_max <= sample.target_hi + 1e-8);
    }

    #[test]
    fn frame_sample_rejects_an_inadmissible_ball_allowance() {
        let half = IntervalUnion::new(alloc::vec![(0.0, 0.5)]).unwrap();
        let err = bounded_frame_sample(&half, 0.5, 16, 0.4, &SelectOptions::default());
        assert!(matches!(err, Err(CoreError::Hypothesis(_))));
    }

    #[test]
    fn frame_sample_separates_a_thin_support() {
        let s = IntervalUnion::new(alloc::vec![(0.0, 0.02)]).unwrap();
        let sample =
            bounded_frame_sample(&s, 0.6, 64, 0.5, &SelectOptions::default()).unwrap();
        assert!(sample.depth >= 1);
        assert!(sample.r >= 2.0);
        assert!(sample.min_gap >= sample.r);
        assert!(sample.deviation <= 0.6 + 1e-9);
        assert!(sample.lambda_max <= sample.target_hi + 1e-8);
        assert!(!sample.frequencies.is_empty());
    }
}
