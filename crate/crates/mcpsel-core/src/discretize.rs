//! Frame-operator sampling: turns a weighted decomposition `T = Σ aᵢ Tᵢ` of
//! trace-bounded positive operators into a uniform-weight sampling sequence
//! `π` with `‖(1/a) Σₙ T_{π(n)} − T‖ < ε` and a pinned sampling rate
//! `c₀δ/ε² < a ≤ 2c₀δ/ε²`.
//!
//! The pipeline: weights are expanded in binary ([`binary_expand`]), every
//! dyadic term `2^{−rᵢ} Tᵢ` is replicated into `2^{r−rᵢ}` copies of
//! `2^{−r} Tᵢ` at a common level `r`, and a depth-`N` selector tree
//! ([`crate::binsel::iterate_ks2`]) splits the replicated family until a
//! single leaf is kept. The window `2^N < 2^r ε² / (C²δ) ≤ 2^{N+1}` makes the
//! per-leaf envelope `C√(2^{N−r}δ)` land strictly below `ε` and pins
//! `a = 2^{r−N}` inside its bracket with `c₀ = C²`, where `C` is
//! [`crate::binsel::derived_deviation_constant`]. Leaves are compared through
//! their trace on a distinguished subspace `K`; an averaging argument
//! guarantees some leaf does not exceed the trace `γ` of `T` on `K`, and the
//! kept leaf obeys the two-sided sandwich
//! `−(4√γ·I + ε·P_{K⊥}) ⪯ (1/a)Σ − T ⪯ 4√γ·I + ε·P_{K⊥}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::binsel::{consecutive_pair_supplier, derived_deviation_constant, iterate_ks2};
use crate::error::{CoreError, Result};
use crate::linalg::{psd_order_leq, psd_sum, HermitianMatrix, PsdMatrix};
use crate::selector::SelectOptions;
use crate::{tol, C64, CMat};

/// Largest replicated-family size the selector tree will materialize.
pub const REPLICA_BUDGET: usize = 4096;
/// Largest selector-tree depth the common-level window may request.
pub const LEVEL_DEPTH_CAP: usize = 12;
/// Cap on the completion blocks a physical tree may spend. Every pair
/// selection completes `I − Σ` with rank-one blocks of trace at most `2ε`,
/// and replicated families run at `ε ≈ 2^{−r}δ`, so a depth-`N` tree costs
/// about `N·d·2^{r−1}/δ` blocks across each level.
pub const COMPLETION_BUDGET: usize = 600_000;
/// Default number of binary digits kept when expanding weights.
pub const DEFAULT_WEIGHT_BITS: u32 = 24;
/// Coarsest admissible weight precision.
pub const MIN_WEIGHT_BITS: u32 = 2;
/// Finest admissible weight precision; keeps every dyadic operation exact in
/// `f64`.
pub const MAX_WEIGHT_BITS: u32 = 40;

/// Requested accuracies are clamped below one before entering the selector
/// recursion, whose promise is vacuous past that point.
const EPS_CLAMP: f64 = 1.0 - 1.0 / 4096.0;

fn pow2i(e: i32) -> f64 {
    libm::exp2(e as f64)
}

/// Sampling-rate constant `c₀`: the square of the tree deviation constant.
/// The common-level window pins every produced rate `a` inside
/// `(c₀δ/ε², 2c₀δ/ε²]`, and `c₀δ/ε²` is approached when `2^r ε²/(C²δ)` sits
/// just above a power of two, so the bracket is tight.
pub fn derived_sampling_constant() -> f64 {
    let c = derived_deviation_constant();
    c * c
}

fn expand_with_remainder(a: f64, precision_bits: u32) -> Result<(Vec<i32>, f64)> {
    if !(precision_bits >= 1 && precision_bits <= MAX_WEIGHT_BITS) {
        return Err(CoreError::Invalid(format!(
            "precision must lie in 1..={MAX_WEIGHT_BITS} bits, got {precision_bits}"
        )));
    }
    if !a.is_finite() || a <= 0.0 {
        return Err(CoreError::Invalid(format!("weight {a} is not a positive finite number")));
    }
    if a >= pow2i(precision_bits as i32) {
        return Err(CoreError::Invalid(format!(
            "weight {a} needs an integer part wider than {precision_bits} bits"
        )));
    }
    let cutoff = pow2i(-(precision_bits as i32));
    let mut exponents = Vec::new();
    let mut remaining = a;
    while remaining >= cutoff {
        // largest power of two not exceeding the remainder; the seed from
        // log2 is corrected so floating-point rounding cannot skew it
        let mut e = libm::floor(libm::log2(remaining)) as i32;
        while pow2i(e) > remaining {
            e -= 1;
        }
        while pow2i(e + 1) <= remaining {
            e += 1;
        }
        exponents.push(-e);
        // both operands are multiples of ulp(remaining), so this is exact
        remaining -= pow2i(e);
    }
    Ok((exponents, remaining))
}

/// Greedy binary expansion `a ≈ Σ_k 2^{−r_k}` with distinct integer
/// exponents, cut off below `2^{−precision_bits}`. Returns the exponents in
/// increasing order (weights decreasing), so `Σ_k 2^{−r_k} ≤ a` and the
/// dropped tail is strictly less than `2^{−precision_bits}`. Every
/// subtraction is exact in `f64`, hence so are both inequalities.
pub fn binary_expand(a: f64, precision_bits: u32) -> Result<Vec<i32>> {
    expand_with_remainder(a, precision_bits).map(|(e, _)| e)
}

/// A subspace carried as a matrix with orthonormal columns.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: CMat,
}

impl Subspace {
    /// Wraps `basis`, requiring its columns to be orthonormal.
    pub fn new(basis: CMat) -> Result<Self> {
        if basis.nrows() == 0 {
            return Err(CoreError::Invalid("ambient dimension must be positive".into()));
        }
        let gram = basis.adjoint() * &basis;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - C64::new(want, 0.0)).norm() > tol::TOL_EQ {
                    return Err(CoreError::Hypothesis(
                        "subspace basis columns are not orthonormal".into(),
                    ));
                }
            }
        }
        Ok(Subspace { basis })
    }

    /// The zero subspace of a `dim`-dimensional space.
    pub fn zero(dim: usize) -> Self {
        Subspace { basis: CMat::zeros(dim, 0) }
    }

    /// The whole `dim`-dimensional space.
    pub fn full(dim: usize) -> Self {
        Subspace { basis: CMat::identity(dim, dim) }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projection onto the subspace.
    pub fn projector(&self) -> CMat {
        &self.basis * self.basis.adjoint()
    }

    /// Projection onto the orthogonal complement.
    pub fn co_projector(&self) -> CMat {
        CMat::identity(self.ambient_dim(), self.ambient_dim()) - self.projector()
    }

    /// `tr(P_K T P_K)`, real for Hermitian `T`.
    pub fn trace_on(&self, t: &HermitianMatrix) -> Result<f64> {
        if t.dim() != self.ambient_dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.ambient_dim(),
                got: t.dim(),
            });
        }
        Ok((self.basis.adjoint() * t.as_matrix() * &self.basis).trace().re)
    }
}

fn hermitian_part(m: CMat) -> Result<HermitianMatrix> {
    let sym = (m.adjoint() + m) * C64::new(0.5, 0.0);
    HermitianMatrix::new(sym)
}

/// Outcome of splitting a positive operator along a subspace.
#[derive(Debug, Clone)]
pub struct ProjectionSplit {
    /// `‖P_K T P_K‖`.
    pub gamma1: f64,
    /// `‖P_{K⊥} T P_{K⊥}‖`.
    pub gamma2: f64,
    /// `‖T − P_K T P_K − P_{K⊥} T P_{K⊥}‖ − √(γ₁γ₂)`; at most zero (up to
    /// rounding) for every positive `T`.
    pub max_violation: f64,
}

/// Compresses `T` to `K` and `K⊥` and reports how far the discarded
/// off-diagonal block `T − P_K T P_K − P_{K⊥} T P_{K⊥}` sits above its
/// `√(γ₁γ₂)` ceiling. Positivity of `T` forces the violation nonpositive.
pub fn projection_split_check(t: &PsdMatrix, k: &Subspace) -> Result<ProjectionSplit> {
    if t.dim() != k.ambient_dim() {
        return Err(CoreError::DimensionMismatch { expected: k.ambient_dim(), got: t.dim() });
    }
    let tm = t.as_hermitian().as_matrix();
    let p = k.projector();
    let pc = k.co_projector();
    let ptp = &p * tm * &p;
    let pctpc = &pc * tm * &pc;
    let residual = tm - &ptp - &pctpc;
    let gamma1 = hermitian_part(ptp)?.operator_norm();
    let gamma2 = hermitian_part(pctpc)?.operator_norm();
    let max_violation = hermitian_part(residual)?.operator_norm() - libm::sqrt(gamma1 * gamma2);
    Ok(ProjectionSplit { gamma1, gamma2, max_violation })
}

/// Positive operators with arbitrary positive weights and a declared trace
/// cap `tr(Tᵢ) ≤ δ`.
#[derive(Debug, Clone)]
pub struct WeightedOperatorFamily {
    operators: Vec<PsdMatrix>,
    weights: Vec<f64>,
    trace_cap: f64,
}

impl WeightedOperatorFamily {
    pub fn new(operators: Vec<PsdMatrix>, weights: Vec<f64>, trace_cap: f64) -> Result<Self> {
        if operators.is_empty() {
            return Err(CoreError::Invalid("need at least one operator".into()));
        }
        if operators.len() != weights.len() {
            return Err(CoreError::DimensionMismatch {
                expected: operators.len(),
                got: weights.len(),
            });
        }
        if !trace_cap.is_finite() || trace_cap < 0.0 {
            return Err(CoreError::Invalid(format!("trace cap {trace_cap} must be finite")));
        }
        let d = operators[0].dim();
        for t in &operators {
            if t.dim() != d {
                return Err(CoreError::DimensionMismatch { expected: d, got: t.dim() });
            }
            if t.trace() > trace_cap + tol::TOL_EQ * (1.0 + trace_cap) {
                return Err(CoreError::Hypothesis(format!(
                    "operator trace {} exceeds the declared cap {trace_cap}",
                    t.trace()
                )));
            }
        }
        for &w in &weights {
            if !w.is_finite() || w <= 0.0 {
                return Err(CoreError::Invalid(format!("weight {w} must be a positive number")));
            }
        }
        Ok(WeightedOperatorFamily { operators, weights, trace_cap })
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn operators(&self) -> &[PsdMatrix] {
        &self.operators
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn trace_cap(&self) -> f64 {
        self.trace_cap
    }

    /// `T = Σ aᵢ Tᵢ`.
    pub fn total(&self) -> Result<HermitianMatrix> {
        let scaled: Vec<PsdMatrix> = self
            .operators
            .iter()
            .zip(&self.weights)
            .map(|(t, &w)| t.scale(w))
            .collect::<Result<_>>()?;
        psd_sum(self.dim(), &scaled)
    }
}

/// Positive operators carrying dyadic weights `2^{−rᵢ}` (exponents may be
/// negative) and a declared trace cap.
#[derive(Debug, Clone)]
pub struct DyadicOperatorFamily {
    operators: Vec<PsdMatrix>,
    exponents: Vec<i32>,
    trace_cap: f64,
}

impl DyadicOperatorFamily {
    pub fn new(operators: Vec<PsdMatrix>, exponents: Vec<i32>, trace_cap: f64) -> Result<Self> {
        if operators.is_empty() {
            return Err(CoreError::Invalid("need at least one operator".into()));
        }
        if operators.len() != exponents.len() {
            return Err(CoreError::DimensionMismatch {
                expected: operators.len(),
                got: exponents.len(),
            });
        }
        if !trace_cap.is_finite() || trace_cap < 0.0 {
            return Err(CoreError::Invalid(format!("trace cap {trace_cap} must be finite")));
        }
        let d = operators[0].dim();
        for t in &operators {
            if t.dim() != d {
                return Err(CoreError::DimensionMismatch { expected: d, got: t.dim() });
            }
            if t.trace() > trace_cap + tol::TOL_EQ * (1.0 + trace_cap) {
                return Err(CoreError::Hypothesis(format!(
                    "operator trace {} exceeds the declared cap {trace_cap}",
                    t.trace()
                )));
            }
        }
        for &r in &exponents {
            if r.abs() > MAX_WEIGHT_BITS as i32 {
                return Err(CoreError::Invalid(format!(
                    "dyadic exponent {r} is outside ±{MAX_WEIGHT_BITS}"
                )));
            }
        }
        Ok(DyadicOperatorFamily { operators, exponents, trace_cap })
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn operators(&self) -> &[PsdMatrix] {
        &self.operators
    }

    pub fn exponents(&self) -> &[i32] {
        &self.exponents
    }

    pub fn trace_cap(&self) -> f64 {
        self.trace_cap
    }

    /// `T = Σ 2^{−rᵢ} Tᵢ`.
    pub fn total(&self) -> Result<HermitianMatrix> {
        let scaled: Vec<PsdMatrix> = self
            .operators
            .iter()
            .zip(&self.exponents)
            .map(|(t, &r)| t.scale(pow2i(-r)))
            .collect::<Result<_>>()?;
        psd_sum(self.dim(), &scaled)
    }
}

/// A uniform-weight sampling sequence, recorded as a multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingResult {
    /// `(operator index, multiplicity)` pairs, indices increasing, every
    /// multiplicity positive.
    pub samples: Vec<(usize, u64)>,
    /// Sampling rate: `(1/a) Σ` over the multiset approximates the total.
    pub a: f64,
    /// The bracket constant witnessing `c₀δ/ε² < a·s ≤ 2c₀δ/ε²` at the run
    /// accuracy, where `s` is the norm rescale (`1` unless the total had
    /// norm above one).
    pub c0: f64,
    /// Recomputed `‖(1/a) Σ − T‖`.
    pub deviation: f64,
    /// Selector-tree depth `N`.
    pub depth: usize,
    /// Common dyadic level `r`; the replicated family is `{2^{−r} Tᵢ}` and
    /// `a·s = 2^{r−N}`.
    pub level: i32,
    /// Accuracy actually driving the level window (after norm rescaling,
    /// clamping below one, and the dyadic truncation allowance).
    pub epsilon_run: f64,
    /// `max(1, ‖T‖)`: weights were divided by this before expansion.
    pub norm_scale: f64,
    /// Binary digits kept per weight, when an expansion happened.
    pub bits_used: Option<u32>,
}

/// A sampling result together with the subspace trace it was filtered by.
#[derive(Debug, Clone)]
pub struct ScafOutcome {
    pub sampling: SamplingResult,
    /// `γ = tr(P_K T P_K)` of the input family.
    pub gamma: f64,
}

struct LevelPlan {
    level: i32,
    depth: usize,
}

/// Smallest `r` with `2^r ε² > c₀ δ`, then the unique `N ≥ 0` with
/// `2^N < 2^r ε²/(c₀δ) ≤ 2^{N+1}` at `r = max(r_min, sup rᵢ)`.
fn plan_common_level(max_exponent: i32, delta: f64, epsilon: f64, c0: f64) -> Result<LevelPlan> {
    let q = c0 * delta / (epsilon * epsilon);
    let mut floor = libm::floor(libm::log2(q)) as i32 + 1;
    while pow2i(floor - 1) > q {
        floor -= 1;
    }
    while pow2i(floor) <= q {
        floor += 1;
    }
    let level = max_exponent.max(floor);
    let x = pow2i(level) / q;
    let mut depth: usize = 0;
    while pow2i(depth as i32 + 1) < x {
        depth += 1;
        if depth > 62 {
            return Err(CoreError::Invalid(format!(
                "level window ratio {x} is out of range"
            )));
        }
    }
    if depth > LEVEL_DEPTH_CAP {
        return Err(CoreError::BudgetExceeded(format!(
            "common level {level} needs tree depth {depth}, above the cap {LEVEL_DEPTH_CAP}; \
             coarsen the weight precision or relax epsilon"
        )));
    }
    Ok(LevelPlan { level, depth })
}

fn replica_count(level: i32, exponent: i32) -> Result<u64> {
    let shift = level - exponent;
    if !(0..63).contains(&shift) {
        return Err(CoreError::BudgetExceeded(format!(
            "replication multiplicity 2^{shift} is out of range"
        )));
    }
    Ok(1u64 << shift)
}

/// Completion blocks a physical tree spends: each level-`j` node fills
/// `I − Σ` with rank-one blocks of trace ≤ `2·2^j(2^{−r}δ)`, about
/// `d/(2^{j+1−r}δ)` blocks per node, so the `2^j` nodes of a level cost
/// `d·2^{r−1}/δ` together and the tree `depth` times that.
fn physical_chunk_cost(dim: usize, delta: f64, level: i32, depth: usize) -> f64 {
    depth as f64 * dim as f64 * pow2i(level - 1) / delta
}

/// Samples a dyadic family down to one selector-tree leaf whose trace on `K`
/// does not exceed `γ = tr(P_K T P_K)` and whose deviation obeys the
/// two-sided sandwich `±(4√γ·I + ε·P_{K⊥})`. Requires `Σ 2^{−rᵢ} Tᵢ ⪯ I`,
/// `tr(Tᵢ) ≤ δ`, `γ ≤ 1`, and `0 < ε < 1`.
///
/// Replication to the common level is kept virtual when the window asks for
/// depth zero (the "leaf" is the whole multiset and the deviation vanishes
/// identically); a positive depth materializes the replicas, so their count
/// must fit [`REPLICA_BUDGET`].
pub fn scaf_sample(
    family: &DyadicOperatorFamily,
    k: &Subspace,
    epsilon: f64,
    opts: &SelectOptions,
) -> Result<ScafOutcome> {
    let d = family.dim();
    if k.ambient_dim() != d {
        return Err(CoreError::DimensionMismatch { expected: d, got: k.ambient_dim() });
    }
    if !epsilon.is_finite() || epsilon <= 0.0 || epsilon >= 1.0 {
        return Err(CoreError::Hypothesis(format!(
            "accuracy must satisfy 0 < epsilon < 1, got {epsilon}"
        )));
    }
    let delta = family.trace_cap();
    if delta <= tol::TOL_RANK {
        return Err(CoreError::Hypothesis("trace cap must be positive".into()));
    }
    let total = family.total()?;
    if !psd_order_leq(&total, &HermitianMatrix::identity(d), opts.tol_psd)? {
        return Err(CoreError::Hypothesis(format!(
            "the dyadic operator sum must stay below the identity: largest eigenvalue {}",
            total.eigenvalues().last().copied().unwrap_or(0.0)
        )));
    }
    let gamma = k.trace_on(&total)?;
    if gamma > 1.0 + tol::TOL_EQ {
        return Err(CoreError::Hypothesis(format!(
            "trace on the subspace is {gamma}, above the admissible 1"
        )));
    }

    let c0 = derived_sampling_constant();
    let max_exponent = family.exponents().iter().copied().max().expect("family is non-empty");
    let plan = plan_common_level(max_exponent, delta, epsilon, c0)?;
    let (level, depth) = (plan.level, plan.depth);
    let counts: Vec<u64> = family
        .exponents()
        .iter()
        .map(|&r| replica_count(level, r))
        .collect::<Result<_>>()?;
    let a = pow2i(level - depth as i32);

    let leaf_counts: Vec<u64> = if depth == 0 {
        // the whole multiset is the single leaf; (1/a) Σ 2^{r−rᵢ} Tᵢ
        // reproduces the total exactly, so nothing needs materializing
        counts.clone()
    } else {
        let m: u128 = counts.iter().map(|&c| c as u128).sum();
        if m > REPLICA_BUDGET as u128 {
            return Err(CoreError::BudgetExceeded(format!(
                "replica budget: the common level {level} asks for {m} operator copies, \
                 above the cap {REPLICA_BUDGET}"
            )));
        }
        let chunk_cost = physical_chunk_cost(d, delta, level, depth);
        if chunk_cost > COMPLETION_BUDGET as f64 {
            return Err(CoreError::BudgetExceeded(format!(
                "completion budget: the depth-{depth} tree at level {level} would spend \
                 about {chunk_cost:.0} trace-capped completion blocks, above the cap \
                 {COMPLETION_BUDGET}"
            )));
        }
        let mut replicas: Vec<PsdMatrix> = Vec::with_capacity(m as usize);
        let mut origin: Vec<usize> = Vec::with_capacity(m as usize);
        for (j, t) in family.operators().iter().enumerate() {
            let scaled = t.scale(pow2i(-level))?;
            for _ in 0..counts[j] {
                replicas.push(scaled.clone());
                origin.push(j);
            }
        }
        let delta_eff = pow2i(-level) * delta;
        let mut supplier = consecutive_pair_supplier(replicas.len());
        let tree = iterate_ks2(&replicas, delta_eff, depth, &mut supplier, opts)?;

        // trace of (1/a) Σ_leaf Tᵢ on K, per leaf
        let k_traces: Vec<f64> = family
            .operators()
            .iter()
            .map(|t| k.trace_on(t.as_hermitian()))
            .collect::<Result<_>>()?;
        let scale = pow2i(depth as i32 - level);
        let deviations = tree.leaf_deviations();
        let mut best: Option<(usize, f64)> = None;
        for (b, leaf) in tree.leaves().iter().enumerate() {
            let leaf_trace: f64 = scale
                * leaf
                    .iter()
                    .filter(|&&n| n < origin.len())
                    .map(|&n| k_traces[origin[n]])
                    .sum::<f64>();
            if leaf_trace <= gamma + tol::TOL_EQ * (1.0 + gamma) {
                let dev = deviations[b];
                if best.map_or(true, |(_, cur)| dev < cur) {
                    best = Some((b, dev));
                }
            }
        }
        let (chosen, _) = best.ok_or_else(|| {
            CoreError::Invalid(
                "no leaf meets the averaged subspace-trace bound; \
                 the leaf average equals the total trace, so this cannot happen"
                    .into(),
            )
        })?;
        let mut per_entry = vec![0u64; family.len()];
        for &n in &tree.leaves()[chosen] {
            if n < origin.len() {
                per_entry[origin[n]] += 1;
            }
        }
        per_entry
    };

    let samples: Vec<(usize, u64)> =
        leaf_counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(j, &c)| (j, c)).collect();

    // recompute the deviation from the recorded multiset alone
    let mut acc = CMat::zeros(d, d);
    for &(j, c) in &samples {
        acc += family.operators()[j].as_hermitian().as_matrix() * C64::new(c as f64 / a, 0.0);
    }
    let approx = hermitian_part(acc)?;
    let diff = approx.add(&total.scale(-1.0))?;
    let deviation = diff.operator_norm();
    if deviation > epsilon + opts.tol_root {
        return Err(CoreError::Invalid(format!(
            "kept leaf deviates by {deviation}, above the promised {epsilon}"
        )));
    }

    // two-sided sandwich ±(4√γ·I + ε·P_{K⊥})
    let envelope = hermitian_part(
        CMat::identity(d, d) * C64::new(4.0 * libm::sqrt(gamma.max(0.0)), 0.0)
            + k.co_projector() * C64::new(epsilon, 0.0),
    )?;
    if !psd_order_leq(&diff, &envelope, opts.tol_psd)?
        || !psd_order_leq(&envelope.scale(-1.0), &diff, opts.tol_psd)?
    {
        return Err(CoreError::Invalid(
            "sandwich violated: the kept leaf escapes ±(4√γ·I + ε·P_K⊥)".into(),
        ));
    }

    // the window construction pins a = 2^{r−N} inside (c₀δ/ε², 2c₀δ/ε²]
    let bracket = c0 * delta / (epsilon * epsilon);
    if a <= bracket * (1.0 - tol::TOL_EQ) || a > 2.0 * bracket * (1.0 + tol::TOL_EQ) {
        return Err(CoreError::Invalid(format!(
            "sampling rate {a} escaped its bracket ({bracket}, {}]",
            2.0 * bracket
        )));
    }
    for &(j, c) in &samples {
        let norm = family.operators()[j].as_hermitian().operator_norm();
        if c as f64 * norm > a * (1.0 + epsilon) * (1.0 + tol::TOL_EQ) {
            return Err(CoreError::Invalid(format!(
                "operator {j} sampled {c} times, beyond the multiplicity bound a(1+eps)"
            )));
        }
    }

    Ok(ScafOutcome {
        sampling: SamplingResult {
            samples,
            a,
            c0,
            deviation,
            depth,
            level,
            epsilon_run: epsilon,
            norm_scale: 1.0,
            bits_used: None,
        },
        gamma,
    })
}

/// Samples a weighted family `T = Σ aᵢTᵢ` of trace-`δ` positive operators:
/// `‖(1/a) Σₙ T_{π(n)} − T‖ < ε` with `c₀δ/ε² < a·s ≤ 2c₀δ/ε²`, where
/// `s = max(1, ‖T‖)` also rescales the accuracy driving the window.
///
/// Weights are divided by `s`, expanded to at most `precision_bits` binary
/// digits, and fed through [`scaf_sample`] with the zero subspace.  When the
/// finest expansion would blow the replica budget, the precision is lowered
/// one bit at a time; each step must keep the dropped dyadic tail below a
/// quarter of the accuracy, otherwise the instance is reported as needing
/// more precision than the budget affords.
pub fn scal_sample(
    family: &WeightedOperatorFamily,
    epsilon: f64,
    precision_bits: u32,
    opts: &SelectOptions,
) -> Result<SamplingResult> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(CoreError::Hypothesis(format!(
            "accuracy must be positive, got {epsilon}"
        )));
    }
    if !(MIN_WEIGHT_BITS..=MAX_WEIGHT_BITS).contains(&precision_bits) {
        return Err(CoreError::Invalid(format!(
            "precision must lie in {MIN_WEIGHT_BITS}..={MAX_WEIGHT_BITS} bits, got {precision_bits}"
        )));
    }
    let d = family.dim();
    let total = family.total()?;
    let norm = total.operator_norm();
    let delta = family.trace_cap();
    let c0 = derived_sampling_constant();

    if delta <= tol::TOL_RANK {
        // zero traces force zero operators, so the empty sequence is exact
        if norm > tol::TOL_EQ {
            return Err(CoreError::Invalid(
                "zero trace cap with a nonzero operator sum".into(),
            ));
        }
        return Ok(SamplingResult {
            samples: Vec::new(),
            a: 1.0,
            c0,
            deviation: norm,
            depth: 0,
            level: 0,
            epsilon_run: epsilon.min(EPS_CLAMP),
            norm_scale: 1.0,
            bits_used: Some(precision_bits),
        });
    }

    let scale = if norm > 1.0 + tol::TOL_EQ { norm } else { 1.0 };
    let eps_base = (epsilon / scale).min(EPS_CLAMP);
    let op_norms: Vec<f64> =
        family.operators().iter().map(|t| t.as_hermitian().operator_norm()).collect();

    let mut bits = precision_bits;
    loop {
        let mut entry_ops: Vec<PsdMatrix> = Vec::new();
        let mut entry_exponents: Vec<i32> = Vec::new();
        let mut entry_origin: Vec<usize> = Vec::new();
        let mut truncation = 0.0;
        for (i, (&w, t)) in family.weights().iter().zip(family.operators()).enumerate() {
            let (exponents, remainder) = expand_with_remainder(w / scale, bits)?;
            truncation += remainder * op_norms[i];
            for r in exponents {
                entry_ops.push(t.clone());
                entry_exponents.push(r);
                entry_origin.push(i);
            }
        }
        if truncation > eps_base / 4.0 {
            return Err(CoreError::Invalid(format!(
                "weight precision insufficient: at {bits} bits the dropped dyadic tail \
                 contributes {truncation}, above a quarter of the accuracy {eps_base}; \
                 more bits do not fit the replica budget"
            )));
        }
        let eps_run = eps_base - truncation;

        // pre-flight the window this precision would produce
        let max_exponent =
            entry_exponents.iter().copied().max().expect("weights are positive");
        let feasible = match plan_common_level(max_exponent, delta, eps_run, c0) {
            Ok(plan) => {
                plan.depth == 0 || {
                    let m: u128 = entry_exponents
                        .iter()
                        .map(|&r| replica_count(plan.level, r).map(|c| c as u128))
                        .collect::<Result<Vec<_>>>()?
                        .iter()
                        .sum();
                    m <= REPLICA_BUDGET as u128
                        && physical_chunk_cost(d, delta, plan.level, plan.depth)
                            <= COMPLETION_BUDGET as f64
                }
            }
            Err(CoreError::BudgetExceeded(_)) => false,
            Err(e) => return Err(e),
        };
        if !feasible {
            if bits == MIN_WEIGHT_BITS {
                return Err(CoreError::BudgetExceeded(format!(
                    "no weight precision down to {MIN_WEIGHT_BITS} bits fits the replica \
                     and completion budgets at depth ≤ {LEVEL_DEPTH_CAP} for this instance"
                )));
            }
            bits -= 1;
            continue;
        }

        let dyadic = DyadicOperatorFamily::new(entry_ops, entry_exponents, delta)?;
        let outcome = scaf_sample(&dyadic, &Subspace::zero(d), eps_run, opts)?;

        let mut per_op = vec![0u64; family.len()];
        for &(entry, mult) in &outcome.sampling.samples {
            per_op[entry_origin[entry]] += mult;
        }
        let samples: Vec<(usize, u64)> =
            per_op.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i, c)).collect();

        let a_core = outcome.sampling.a;
        let a = a_core / scale;
        let mut acc = CMat::zeros(d, d);
        for &(i, c) in &samples {
            acc += family.operators()[i].as_hermitian().as_matrix()
                * C64::new(c as f64 / a, 0.0);
        }
        let approx = hermitian_part(acc)?;
        let deviation = approx.add(&total.scale(-1.0))?.operator_norm();
        if deviation > epsilon + opts.tol_root {
            return Err(CoreError::Invalid(format!(
                "sampled sum deviates by {deviation}, above the requested {epsilon}"
            )));
        }
        for &(i, c) in &samples {
            if c as f64 * op_norms[i] > a_core * (1.0 + eps_run) * (1.0 + tol::TOL_EQ) {
                return Err(CoreError::Invalid(format!(
                    "operator {i} sampled {c} times, beyond the multiplicity bound a(1+eps)"
                )));
            }
        }

        return Ok(SamplingResult {
            samples,
            a,
            c0,
            deviation,
            depth: outcome.sampling.depth,
            level: outcome.sampling.level,
            epsilon_run: eps_run,
            norm_scale: scale,
            bits_used: Some(bits),
        });
    }
}

/// A quadrature-sampled frame with certified bounds.
#[derive(Debug, Clone)]
pub struct DiscretizedFrame {
    pub sampling: SamplingResult,
    /// Smallest eigenvalue of the sampled frame operator `Σₙ ψ_{π(n)} ⊗ ψ_{π(n)}`.
    pub lower_bound: f64,
    /// Largest eigenvalue of the sampled frame operator.
    pub upper_bound: f64,
    /// Frame bounds `(A, B)` of the weighted input system.
    pub continuous_bounds: (f64, f64),
    /// The certified window `((A−ε)a, (B+ε)a)` containing both bounds.
    pub window: (f64, f64),
}

/// Discretizes a weighted (quadrature) frame `{(μᵢ, ψᵢ)}`: samples the
/// rank-one decomposition `T = Σ μᵢ ψᵢ⊗ψᵢ` via [`scal_sample`] and certifies
/// that the plain (weight-free) system of kept vectors has frame bounds
/// inside `((A−ε)a, (B+ε)a)`, where `A ≤ B` are the weighted system's bounds.
pub fn discretize_continuous_frame(
    system: &crate::frames::VectorSystem,
    weights: &[f64],
    epsilon: f64,
    precision_bits: u32,
    opts: &SelectOptions,
) -> Result<DiscretizedFrame> {
    if system.len() != weights.len() {
        return Err(CoreError::DimensionMismatch {
            expected: system.len(),
            got: weights.len(),
        });
    }
    if system.len() == 0 {
        return Err(CoreError::Invalid("need at least one quadrature node".into()));
    }
    let d = system.dim();
    let operators: Vec<PsdMatrix> =
        (0..system.len()).map(|i| PsdMatrix::rank_one(system.vector(i))).collect();
    let trace_cap =
        system.norms_sq().iter().fold(0.0f64, |acc, &n| acc.max(n));
    let family = WeightedOperatorFamily::new(operators, weights.to_vec(), trace_cap)?;
    let total = family.total()?;
    let spectrum = total.eigenvalues();
    let continuous_bounds = (spectrum[0], spectrum[spectrum.len() - 1]);

    let sampling = scal_sample(&family, epsilon, precision_bits, opts)?;

    let mut acc = CMat::zeros(d, d);
    for &(i, c) in &sampling.samples {
        acc += family.operators()[i].as_hermitian().as_matrix() * C64::new(c as f64, 0.0);
    }
    let sampled = hermitian_part(acc)?;
    let sampled_spectrum = sampled.eigenvalues();
    let lower_bound = sampled_spectrum[0];
    let upper_bound = sampled_spectrum[sampled_spectrum.len() - 1];
    let window = (
        sampling.a * (continuous_bounds.0 - epsilon),
        sampling.a * (continuous_bounds.1 + epsilon),
    );
    let slack = sampling.a * tol::TOL_EQ * (1.0 + continuous_bounds.1);
    if lower_bound < window.0 - slack || upper_bound > window.1 + slack {
        return Err(CoreError::Invalid(format!(
            "sampled frame bounds ({lower_bound}, {upper_bound}) escape the window \
             ({}, {})",
            window.0, window.1
        )));
    }

    Ok(DiscretizedFrame { sampling, lower_bound, upper_bound, continuous_bounds, window })
}
