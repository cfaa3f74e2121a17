//! Finite frame analysis: Gram matrices, Bessel and Riesz bounds, Parseval
//! completion, Naimark complements, and Riesz-sequence selectors that split
//! families of Bessel systems simultaneously.
//!
//! The selectors all work through one reduction: a lower Riesz bound for a
//! subfamily of a Bessel-1 system is the same statement as an upper Bessel
//! bound for the matching subfamily of its Naimark complement, and the
//! complement consists of rank-one operators with small trace — exactly what
//! [`block_weaver_select`] controls. Certificates carry both the formula
//! promises of that machinery and bounds recomputed from the selected
//! vectors themselves.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::linalg::{BlockDiagonalPsd, HermitianMatrix, PsdMatrix};
use crate::selector::{
    block_weaver_select, BlockSelectorInstance, PartitionCertificate, SelectOptions,
    SelectionMethod, SelectorCertificate,
};
use crate::tol;
use crate::{C64, CMat, CVec};

/// Indexed family of vectors sharing one ambient dimension.
#[derive(Clone, Debug)]
pub struct VectorSystem {
    dim: usize,
    vectors: Vec<CVec>,
}

impl VectorSystem {
    pub fn new(dim: usize, vectors: Vec<CVec>) -> Result<Self> {
        for v in &vectors {
            if v.len() != dim {
                return Err(CoreError::DimensionMismatch { expected: dim, got: v.len() });
            }
        }
        Ok(VectorSystem { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[CVec] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &CVec {
        &self.vectors[i]
    }

    pub fn norms_sq(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| v.norm_squared()).collect()
    }

    /// `d × n` matrix with the vectors as columns.
    pub fn synthesis(&self) -> CMat {
        let mut a = CMat::zeros(self.dim, self.vectors.len());
        for (i, v) in self.vectors.iter().enumerate() {
            a.set_column(i, v);
        }
        a
    }

    /// Frame operator: the sum of the rank-one operators of the vectors.
    pub fn frame_operator(&self) -> HermitianMatrix {
        let a = self.synthesis();
        let m = &a * a.adjoint();
        let sym = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        HermitianMatrix::new(sym).expect("rank-one sums are Hermitian")
    }

    pub fn subsystem(&self, indices: &[usize]) -> Result<VectorSystem> {
        let mut vectors = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.vectors.len() {
                return Err(CoreError::Invalid(format!("vector index {i} out of range")));
            }
            vectors.push(self.vectors[i].clone());
        }
        Ok(VectorSystem { dim: self.dim, vectors })
    }

    /// Every vector multiplied by the real scalar `s`.
    pub fn scaled(&self, s: f64) -> VectorSystem {
        VectorSystem {
            dim: self.dim,
            vectors: self.vectors.iter().map(|v| v * C64::new(s, 0.0)).collect(),
        }
    }
}

/// Gram matrix: entry `(i, l)` pairs vectors `i` and `l`, so the diagonal
/// holds the squared norms and the eigenvalues match those of the frame
/// operator up to `|n - d|` zeros.
pub fn gram(system: &VectorSystem) -> HermitianMatrix {
    let a = system.synthesis();
    let g = a.adjoint() * &a;
    let sym = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    HermitianMatrix::new(sym).expect("A*A is Hermitian")
}

/// Optimal spectral bounds of a finite system. `bessel` bounds the analysis
/// energy from above, the Riesz pair brackets `‖Σ c_i u_i‖²` against `Σ|c|²`;
/// for a finite system the upper Riesz bound and the Bessel bound are the
/// same largest Gram eigenvalue, and `riesz_lower > 0` exactly when the
/// vectors are linearly independent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameBounds {
    pub bessel: f64,
    pub riesz_lower: f64,
    pub riesz_upper: f64,
}

pub fn frame_bounds(system: &VectorSystem) -> Result<FrameBounds> {
    if system.is_empty() {
        return Err(CoreError::Invalid("bounds of an empty system".into()));
    }
    let eig = gram(system).eigenvalues();
    let lo = eig.first().copied().unwrap_or(0.0).max(0.0);
    let hi = eig.last().copied().unwrap_or(0.0).max(0.0);
    Ok(FrameBounds { bessel: hi, riesz_lower: lo, riesz_upper: hi })
}

/// Extends a system with Bessel bound at most 1 so the union is Parseval:
/// appends `√λ · w` over the spectral pieces `(λ, w)` of `I − S`. Parseval
/// input gains nothing; the empty system gains an orthonormal basis.
pub fn complete_to_parseval(system: &VectorSystem) -> Result<VectorSystem> {
    let s = system.frame_operator();
    let top = s.eigenvalues().last().copied().unwrap_or(0.0);
    if top > 1.0 + tol::TOL_EQ {
        return Err(CoreError::Hypothesis(format!(
            "Bessel bound {top} exceeds 1, so I - S is not positive"
        )));
    }
    let deficiency = HermitianMatrix::identity(system.dim()).add(&s.scale(-1.0))?;
    let (vals, vecs) = deficiency.eigen_pairs();
    let mut vectors = system.vectors().to_vec();
    for (k, &lambda) in vals.iter().enumerate() {
        if lambda > tol::TOL_RANK {
            vectors.push(vecs.column(k).into_owned() * C64::new(libm::sqrt(lambda), 0.0));
        }
    }
    VectorSystem::new(system.dim(), vectors)
}

/// A Parseval system together with its Naimark complement: `n` vectors in
/// dimension `n − d` whose Gram matrix is `I − Gram(original)`. In
/// particular `‖v_i‖² = 1 − ‖u_i‖²` and, for every subset `J`, the lower
/// Riesz bound of `{u_i}_J` equals one minus the Bessel bound of `{v_i}_J`.
#[derive(Clone, Debug)]
pub struct NaimarkPair {
    pub original: VectorSystem,
    pub complement: VectorSystem,
}

/// Largest deviation of `Gram(u) + Gram(v)` from the identity.
pub fn naimark_defect(pair: &NaimarkPair) -> f64 {
    let n = pair.original.len();
    let residual = gram(&pair.original)
        .add(&gram(&pair.complement))
        .and_then(|g| g.add(&HermitianMatrix::identity(n).scale(-1.0)));
    match residual {
        Ok(m) => m.operator_norm(),
        Err(_) => f64::INFINITY,
    }
}

/// Naimark complement of a Parseval system, realized through the
/// eigendecomposition of the Gram matrix: the Gram is a rank-`d` projection,
/// and conjugated rows of its kernel eigenbasis give the complement.
pub fn naimark_complement(parseval: &VectorSystem) -> Result<NaimarkPair> {
    let n = parseval.len();
    let d = parseval.dim();
    if n == 0 {
        return Err(CoreError::Invalid("complement of an empty system".into()));
    }
    let s = parseval.frame_operator();
    let dev = s.add(&HermitianMatrix::identity(d).scale(-1.0))?.operator_norm();
    if dev > tol::TOL_EQ {
        return Err(CoreError::Hypothesis(format!("system is not Parseval: ‖S − I‖ = {dev:e}")));
    }
    if n == d {
        // the Gram matrix is already the identity, so the complement lives
        // in dimension zero
        let complement = VectorSystem::new(0, vec![CVec::zeros(0); n])?;
        return Ok(NaimarkPair { original: parseval.clone(), complement });
    }
    let (vals, vecs) = gram(parseval).eigen_pairs();
    let kernel: Vec<usize> =
        (0..n).filter(|&k| vals[k] < 0.5).collect();
    if kernel.len() != n - d {
        return Err(CoreError::Invalid(format!(
            "Gram kernel has dimension {}, expected {}",
            kernel.len(),
            n - d
        )));
    }
    let mut vectors = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = CVec::zeros(n - d);
        for (slot, &k) in kernel.iter().enumerate() {
            v[slot] = vecs[(i, k)].conj();
        }
        vectors.push(v);
    }
    let complement = VectorSystem::new(n - d, vectors)?;
    Ok(NaimarkPair { original: parseval.clone(), complement })
}

/// Complement route for a non-Parseval input: complete to Parseval, take the
/// Naimark complement, and keep the complement vectors of the original
/// indices. The result `{v_i}` has `‖v_i‖² = 1 − ‖u_i‖²`, and a Bessel bound
/// `1 − δ` for `{v_i}_J` is a lower Riesz bound `δ` for `{u_i}_J`.
pub fn bessel_complement(system: &VectorSystem) -> Result<VectorSystem> {
    let completed = complete_to_parseval(system)?;
    let pair = naimark_complement(&completed)?;
    let original: Vec<usize> = (0..system.len()).collect();
    pair.complement.subsystem(&original)
}

/// Evaluates both sides of the duality on a subset: returns the lower Riesz
/// bound of the original subfamily and the Bessel bound of the complement
/// subfamily, which sum to 1 up to eigensolver noise.
pub fn riesz_bessel_duality_check(pair: &NaimarkPair, subset: &[usize]) -> Result<(f64, f64)> {
    if subset.is_empty() {
        return Err(CoreError::Invalid("duality check needs a nonempty subset".into()));
    }
    let u = pair.original.subsystem(subset)?;
    let v = pair.complement.subsystem(subset)?;
    Ok((frame_bounds(&u)?.riesz_lower, frame_bounds(&v)?.bessel))
}

/// Biorthogonal dual of a basis (`n = d`, invertible synthesis): the unique
/// system with `⟨u_i, ũ_l⟩ = δ_{il}`. Its Gram matrix is the inverse of the
/// original's, so the Riesz bounds of the full dual are the reciprocals of
/// the original's in swapped order.
pub fn dual_riesz_basis(basis: &VectorSystem) -> Result<VectorSystem> {
    let n = basis.len();
    let d = basis.dim();
    if n != d || n == 0 {
        return Err(CoreError::Invalid(format!(
            "dual basis needs n = d > 0 vectors, got {n} in dimension {d}"
        )));
    }
    let min_eig = gram(basis).eigenvalues().first().copied().unwrap_or(0.0);
    if min_eig <= tol::TOL_RANK {
        return Err(CoreError::Invalid(format!(
            "singular Gram matrix: smallest eigenvalue {min_eig:e}"
        )));
    }
    let inv = basis
        .synthesis()
        .try_inverse()
        .ok_or_else(|| CoreError::Invalid("synthesis matrix is not invertible".into()))?;
    let dual = inv.adjoint();
    let vectors = (0..n).map(|i| dual.column(i).into_owned()).collect();
    VectorSystem::new(d, vectors)
}

/// Ceiling that absorbs the rounding noise of evaluating a size rule in
/// floating point, so `72 + 1e-13` still reads as 72.
fn ceil_rule(x: f64) -> usize {
    libm::ceil(x - 1e-9) as usize
}

/// Group-size rule of the near-unit Riesz selector, driven by the total
/// norm deficiency `δ₀ = Σ_j (1 − ε_j)`: pairs suffice below `3/2 − √2`,
/// past it the size grows like `21 δ₀ / ε²` with `ε` the worst norm floor.
pub fn bl2_group_size(delta0: f64, eps_min: f64) -> usize {
    if delta0 < 1.5 - core::f64::consts::SQRT_2 {
        2
    } else {
        ceil_rule(21.0 * delta0 / (eps_min * eps_min)).max(2)
    }
}

/// Knobs of the Riesz-selector pipelines. The underlying statements assert
/// universal constants exist; here they are explicit, every certificate
/// records the values used, and promises are checked rather than assumed.
#[derive(Clone, Copy, Debug)]
pub struct FrameSelectConfig {
    /// Two-stage redundancy multiplier: the first stage keeps
    /// `⌈stage_constant/6 · T⌉` picks per group, `T` the weighted system
    /// count.
    pub stage_constant: f64,
    /// Group-size multiplier of the unit-norm `(1 ± ε)` selector.
    pub reps_constant: f64,
    /// Squared-norm threshold below which a complement system is vacuous and
    /// the trivial trace estimate replaces the selector machinery.
    pub free_cap: f64,
    /// Options passed through to the selection engine.
    pub opts: SelectOptions,
}

impl Default for FrameSelectConfig {
    fn default() -> Self {
        FrameSelectConfig {
            stage_constant: 36.0,
            reps_constant: 12.0 * (3.0 + 2.0 * core::f64::consts::SQRT_2) + 1.0,
            free_cap: 1e-9,
            opts: SelectOptions::default(),
        }
    }
}

/// Outcome of a simultaneous Riesz-sequence selection over `m` systems
/// sharing one index set. Achieved bounds are Gram eigenvalues of the
/// selected subsystems of the *original* inputs; promised bounds come from
/// the selector formulas that produced the choice.
#[derive(Clone, Debug)]
pub struct RieszCertificate {
    /// Chosen indices, one per group, ascending.
    pub selected: Vec<usize>,
    /// Per-system squared-norm floors ε_j used by the formulas.
    pub epsilons: Vec<f64>,
    /// Recomputed smallest Gram eigenvalue per system.
    pub achieved_lower: Vec<f64>,
    /// Recomputed largest Gram eigenvalue per system.
    pub achieved_upper: Vec<f64>,
    /// Formula lower bounds per system.
    pub promised_lower: Vec<f64>,
    /// Formula upper bounds per system, where the route asserts one.
    pub promised_upper: Vec<Option<f64>>,
    /// Worst ratio `promised_lower / ε` across the systems — the concrete
    /// stand-in for the universal constant of the existence statement.
    pub constant: f64,
    /// Group size the instance was validated against.
    pub r_used: usize,
    pub bound_formula: String,
    pub method: SelectionMethod,
}

/// Errors when a recomputed bound misses its promise by more than `tl`.
pub fn check_riesz_promise(cert: &RieszCertificate, tl: f64) -> Result<()> {
    for j in 0..cert.promised_lower.len() {
        if cert.achieved_lower[j] < cert.promised_lower[j] - tl {
            return Err(CoreError::Invalid(format!(
                "system {j}: achieved lower bound {} misses the promised {}",
                cert.achieved_lower[j], cert.promised_lower[j]
            )));
        }
        if let Some(up) = cert.promised_upper[j] {
            if cert.achieved_upper[j] > up + tl {
                return Err(CoreError::Invalid(format!(
                    "system {j}: achieved upper bound {} exceeds the promised {}",
                    cert.achieved_upper[j], up
                )));
            }
        }
    }
    Ok(())
}

fn validate_block_family(n: usize, blocks: &[Vec<usize>]) -> Result<()> {
    if blocks.is_empty() {
        return Err(CoreError::Invalid("no selection groups given".into()));
    }
    let mut seen = vec![false; n];
    for block in blocks {
        if block.is_empty() {
            return Err(CoreError::Invalid("a selection group is empty".into()));
        }
        for &i in block {
            if i >= n {
                return Err(CoreError::Invalid(format!("group index {i} out of range")));
            }
            if seen[i] {
                return Err(CoreError::Invalid(format!("index {i} appears in more than one group")));
            }
            seen[i] = true;
        }
    }
    Ok(())
}

fn validate_same_index_set(systems: &[VectorSystem]) -> Result<usize> {
    if systems.is_empty() {
        return Err(CoreError::Invalid("no systems given".into()));
    }
    let n = systems[0].len();
    if n == 0 {
        return Err(CoreError::Invalid("systems have no vectors".into()));
    }
    for sys in systems {
        if sys.len() != n {
            return Err(CoreError::Invalid("systems disagree on the index set".into()));
        }
    }
    Ok(n)
}

/// Runs the simultaneous block selector on the rank-one operators of the
/// given systems, one block per system, capped by `caps`.
fn rank_one_block_weaver(
    systems: &[&VectorSystem],
    caps: &[f64],
    blocks: &[Vec<usize>],
    r: usize,
    opts: &SelectOptions,
) -> Result<SelectorCertificate> {
    let n = systems[0].len();
    let mut operators = Vec::with_capacity(n);
    for i in 0..n {
        let parts: Vec<PsdMatrix> =
            systems.iter().map(|s| PsdMatrix::rank_one(s.vector(i))).collect();
        operators.push(BlockDiagonalPsd::new(parts)?);
    }
    let inst = BlockSelectorInstance::new(operators, blocks.to_vec(), caps.to_vec())?;
    block_weaver_select(&inst, r, opts)
}

fn recompute_bounds(
    systems: &[VectorSystem],
    selected: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lows = Vec::with_capacity(systems.len());
    let mut highs = Vec::with_capacity(systems.len());
    for sys in systems {
        let fb = frame_bounds(&sys.subsystem(selected)?)?;
        lows.push(fb.riesz_lower);
        highs.push(fb.riesz_upper);
    }
    Ok((lows, highs))
}

struct StageOutcome {
    selected: Vec<usize>,
    promised_lower: Vec<f64>,
    method: SelectionMethod,
}

/// Complement route shared by the single-stage selector and stage two of the
/// two-stage pipeline: complement every system, weave the complements down
/// to one pick per group with Bessel bound `cap_j + 1/r + 2√(Σ caps / r)`,
/// and convert back through `riesz_lower = 1 − bessel(complement)`. Systems
/// whose complements carry no mass are handled by the trace estimate
/// `bessel ≤ Σ_J ‖v_i‖²` instead of the engine.
fn complement_weaver_stage(
    systems: &[VectorSystem],
    blocks: &[Vec<usize>],
    r: usize,
    cfg: &FrameSelectConfig,
) -> Result<StageOutcome> {
    let m = systems.len();
    let mut complements = Vec::with_capacity(m);
    let mut caps = vec![0.0f64; m];
    for (j, sys) in systems.iter().enumerate() {
        let comp = bessel_complement(sys)?;
        caps[j] = comp.norms_sq().into_iter().fold(0.0f64, f64::max);
        complements.push(comp);
    }
    let active: Vec<usize> = (0..m).filter(|&j| caps[j] > cfg.free_cap).collect();
    let mut complement_promise: Vec<Option<f64>> = vec![None; m];
    let (selected, method) = if active.is_empty() {
        let mut picks: Vec<usize> = blocks.iter().map(|b| b[0]).collect();
        picks.sort_unstable();
        (picks, SelectionMethod::Trivial)
    } else {
        let sys_refs: Vec<&VectorSystem> = active.iter().map(|&j| &complements[j]).collect();
        let act_caps: Vec<f64> = active.iter().map(|&j| caps[j]).collect();
        let cert = rank_one_block_weaver(&sys_refs, &act_caps, blocks, r, &cfg.opts)?;
        for (slot, &j) in active.iter().enumerate() {
            complement_promise[j] = Some(cert.promised_bound[slot]);
        }
        (cert.selected, cert.method)
    };
    let k = blocks.len() as f64;
    let promised_lower: Vec<f64> = (0..m)
        .map(|j| match complement_promise[j] {
            Some(b) => 1.0 - b,
            None => 1.0 - k * caps[j],
        })
        .collect();
    Ok(StageOutcome { selected, promised_lower, method })
}

/// Two-stage pipeline for norm floors below 1/2. Stage one subdivides each
/// group into `keep` chunks and weaves the small systems directly, leaving
/// `keep` picks per group whose small-system Bessel bounds drop under
/// `2 ε_j`; renormalizing by those bounds raises every floor to at least
/// 1/2, and the complement route finishes on the kept indices. Returns the
/// outcome, the group size consumed, a formula tag, and per-system upper
/// bounds valid for equal-norm inputs.
fn two_stage_select(
    reduced: &[VectorSystem],
    eps: &[f64],
    blocks: &[Vec<usize>],
    cfg: &FrameSelectConfig,
) -> Result<(StageOutcome, usize, String, Vec<f64>)> {
    let m = reduced.len();
    let is_small: Vec<bool> = eps.iter().map(|&e| e < 0.5).collect();
    let small: Vec<usize> = (0..m).filter(|&j| is_small[j]).collect();
    let eps_small_min = small.iter().map(|&j| eps[j]).fold(f64::INFINITY, f64::min);
    let small_sum: f64 = small.iter().map(|&j| eps[j]).sum();
    let t_weight: f64 = (0..m)
        .map(|j| if is_small[j] { eps_small_min / eps[j] } else { 1.0 - eps[j] })
        .sum();
    let keep = ceil_rule(cfg.stage_constant / 6.0 * t_weight).max(2);
    let chunk = ceil_rule(6.0 * small_sum / (eps_small_min * eps_small_min));
    let needed = keep * chunk;
    for (k, block) in blocks.iter().enumerate() {
        if block.len() < needed {
            return Err(CoreError::Hypothesis(format!(
                "group {k} has {} members; the two-stage rule needs {keep}×{chunk} = {needed}",
                block.len()
            )));
        }
    }

    let mut sub_blocks = Vec::with_capacity(blocks.len() * keep);
    for block in blocks {
        for c in 0..keep {
            sub_blocks.push(block[c * chunk..(c + 1) * chunk].to_vec());
        }
    }
    let small_systems: Vec<&VectorSystem> = small.iter().map(|&j| &reduced[j]).collect();
    let small_caps: Vec<f64> = small.iter().map(|&j| eps[j]).collect();
    let stage1 = rank_one_block_weaver(&small_systems, &small_caps, &sub_blocks, chunk, &cfg.opts)?;
    let kept = stage1.selected.clone();

    // recomputed Bessel bounds of the kept small systems drive the
    // renormalization; flooring at ε_j keeps the scale factors at most 1
    let mut bessel1 = vec![1.0f64; m];
    for (slot, &j) in small.iter().enumerate() {
        bessel1[j] = stage1.achieved_norm[slot].max(eps[j]);
    }
    let mut hat_systems = Vec::with_capacity(m);
    let mut hat_eps = Vec::with_capacity(m);
    for j in 0..m {
        let restricted = reduced[j].subsystem(&kept)?;
        if is_small[j] {
            hat_systems.push(restricted.scaled(1.0 / libm::sqrt(bessel1[j])));
            hat_eps.push((eps[j] / bessel1[j]).min(1.0));
        } else {
            hat_systems.push(restricted);
            hat_eps.push(eps[j]);
        }
    }
    let hat_min = hat_eps.iter().copied().fold(f64::INFINITY, f64::min);
    let hat_delta0: f64 = hat_eps.iter().map(|e| 1.0 - e).sum();
    let r2 = bl2_group_size(hat_delta0, hat_min);
    if keep < r2 {
        return Err(CoreError::Hypothesis(format!(
            "stage one kept {keep} picks per group but stage two needs {r2}; raise the stage constant"
        )));
    }
    let pos_blocks: Vec<Vec<usize>> = blocks
        .iter()
        .map(|block| (0..kept.len()).filter(|&p| block.contains(&kept[p])).collect())
        .collect();

    let stage2 = complement_weaver_stage(&hat_systems, &pos_blocks, r2, cfg)?;
    let selected: Vec<usize> = stage2.selected.iter().map(|&p| kept[p]).collect();
    // lower bounds transfer back through the renormalization: scaling a
    // system by B^{-1/2} scales its Gram by 1/B
    let promised_lower: Vec<f64> = (0..m)
        .map(|j| stage2.promised_lower[j] * if is_small[j] { bessel1[j] } else { 1.0 })
        .collect();
    let mut upper_if_equal = vec![0.0f64; m];
    for j in 0..m {
        upper_if_equal[j] = (2.0 * eps[j]).min(1.0);
    }
    for (slot, &j) in small.iter().enumerate() {
        upper_if_equal[j] = stage1.promised_bound[slot].min(2.0 * eps[j]);
    }
    let outcome = StageOutcome { selected, promised_lower, method: stage2.method };
    let formula =
        format!("two-stage: {keep} chunks of {chunk}, then complement weaver with r = {r2}");
    Ok((outcome, needed, formula, upper_if_equal))
}

/// Simultaneous Riesz-sequence selector for systems with Bessel bound at
/// most 1 and squared norms bounded below by ε_j > 0: picks one index per
/// group so every selected subsystem is a Riesz sequence with lower bound
/// proportional to ε_j. Groups must be disjoint and at least as large as
/// the rule derived from the norm deficiencies ([`bl2_group_size`], or the
/// two-stage rule when some ε_j < 1/2). Upper bounds are promised only for
/// equal-norm systems; vectors above their system floor are first scaled
/// down to it, which cannot hurt the achieved lower bounds.
pub fn feichtinger_select(
    systems: &[VectorSystem],
    blocks: &[Vec<usize>],
    cfg: &FrameSelectConfig,
) -> Result<RieszCertificate> {
    let n = validate_same_index_set(systems)?;
    validate_block_family(n, blocks)?;

    let m = systems.len();
    let mut eps = Vec::with_capacity(m);
    let mut equal_norms = true;
    for (j, sys) in systems.iter().enumerate() {
        let b = frame_bounds(sys)?.bessel;
        if b > 1.0 + tol::TOL_EQ {
            return Err(CoreError::Hypothesis(format!("system {j} has Bessel bound {b} > 1")));
        }
        let norms = sys.norms_sq();
        let floor = norms.iter().copied().fold(f64::INFINITY, f64::min);
        if floor <= tol::TOL_RANK {
            return Err(CoreError::Hypothesis(format!(
                "system {j} has a vector of squared norm {floor:e}; the norm floor must be positive"
            )));
        }
        let top = norms.iter().copied().fold(0.0f64, f64::max);
        if top > floor + tol::TOL_EQ {
            equal_norms = false;
        }
        eps.push(floor.min(1.0));
    }

    let reduced: Vec<VectorSystem> = systems
        .iter()
        .zip(&eps)
        .map(|(sys, &e)| {
            let vectors = sys
                .vectors()
                .iter()
                .map(|v| v * C64::new(libm::sqrt(e / v.norm_squared()), 0.0))
                .collect();
            VectorSystem::new(sys.dim(), vectors).expect("dimensions unchanged")
        })
        .collect();

    let eps_min = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let delta0: f64 = eps.iter().map(|e| 1.0 - e).sum();
    let any_small = eps.iter().any(|&e| e < 0.5);

    let (outcome, r_used, formula, upper_if_equal) = if any_small {
        two_stage_select(&reduced, &eps, blocks, cfg)?
    } else {
        let r = bl2_group_size(delta0, eps_min);
        for (k, block) in blocks.iter().enumerate() {
            if block.len() < r {
                return Err(CoreError::Hypothesis(format!(
                    "group {k} has {} members; the rule needs at least {r}",
                    block.len()
                )));
            }
        }
        let out = complement_weaver_stage(&reduced, blocks, r, cfg)?;
        let upper: Vec<f64> = eps.iter().map(|&e| (2.0 * e).min(1.0)).collect();
        (out, r, format!("complement weaver with r = {r}"), upper)
    };

    let (achieved_lower, achieved_upper) = recompute_bounds(systems, &outcome.selected)?;
    let constant = (0..m)
        .map(|j| outcome.promised_lower[j] / eps[j])
        .fold(f64::INFINITY, f64::min);
    let promised_upper: Vec<Option<f64>> = (0..m)
        .map(|j| if equal_norms { Some(upper_if_equal[j]) } else { None })
        .collect();
    Ok(RieszCertificate {
        selected: outcome.selected,
        epsilons: eps,
        achieved_lower,
        achieved_upper,
        promised_lower: outcome.promised_lower,
        promised_upper,
        constant,
        r_used,
        bound_formula: formula,
        method: outcome.method,
    })
}

/// Riesz-bound tightener for unit-norm systems with arbitrary Bessel bounds
/// `B_j`: selects one index per group so every selected subsystem has Riesz
/// bounds near `(1 − ε, 1 + ε)`. Writing `ε_j = 1/B_j`, groups must be at
/// least `⌈C/ε² · (1 + Σ_{ε_j<1/2} ε_j / ε₀²) · max(1, Σ_{ε_j<1/(1+ε)} ε_j +
/// Σ_j (1 − ε_j))⌉`. Very redundant systems (`B_j > 2`) are thinned first by
/// a scaled weaver stage; then original and complement rank-ones are woven
/// together so both Riesz sides tighten at once.
pub fn r_eps_select(
    systems: &[VectorSystem],
    blocks: &[Vec<usize>],
    varepsilon: f64,
    cfg: &FrameSelectConfig,
) -> Result<RieszCertificate> {
    if !(varepsilon > 0.0 && varepsilon < 1.0) {
        return Err(CoreError::Invalid(format!("tightness must lie in (0,1), got {varepsilon}")));
    }
    let n = validate_same_index_set(systems)?;
    validate_block_family(n, blocks)?;
    let m = systems.len();
    for (j, sys) in systems.iter().enumerate() {
        for nn in sys.norms_sq() {
            if (nn - 1.0).abs() > tol::TOL_EQ {
                return Err(CoreError::Hypothesis(format!(
                    "system {j} has a squared norm {nn}; unit norms are required"
                )));
            }
        }
    }
    let bessel: Vec<f64> = systems
        .iter()
        .map(|s| frame_bounds(s).map(|b| b.bessel.max(1.0)))
        .collect::<Result<_>>()?;
    let eps: Vec<f64> = bessel.iter().map(|b| 1.0 / b).collect();
    let eps_min = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let is_small: Vec<bool> = eps.iter().map(|&e| e < 0.5).collect();
    let small: Vec<usize> = (0..m).filter(|&j| is_small[j]).collect();
    let small_sum: f64 = small.iter().map(|&j| eps[j]).sum();
    let thresh = 1.0 / (1.0 + varepsilon);

    let tail: f64 = (0..m)
        .map(|j| {
            let mut t = 1.0 - eps[j];
            if eps[j] < thresh {
                t += eps[j];
            }
            t
        })
        .sum();
    let weight =
        if small.is_empty() { 1.0 } else { 1.0 + small_sum / (eps_min * eps_min) };
    let r_rule =
        ceil_rule(cfg.reps_constant / (varepsilon * varepsilon) * weight * tail.max(1.0));
    // group size consumed by the machinery: `keep` final picks per group,
    // each drawn from a chunk sized for the redundancy-reduction stage
    let m_count: f64 = (0..m)
        .map(|j| {
            let ep = eps[j].max(0.5);
            if ep < thresh {
                1.0
            } else {
                1.0 - ep
            }
        })
        .sum::<f64>()
        .max(1.0);
    let keep =
        ceil_rule(cfg.reps_constant / (6.0 * varepsilon * varepsilon) * m_count).max(2);
    let chunk = if small.is_empty() {
        1
    } else {
        ceil_rule(6.0 * small_sum / (eps_min * eps_min))
    };
    let min_size = r_rule.max(keep * chunk);
    for (k, block) in blocks.iter().enumerate() {
        if block.len() < min_size {
            return Err(CoreError::Hypothesis(format!(
                "group {k} has {} members; the rule needs at least {min_size}",
                block.len()
            )));
        }
    }

    // stage A: only when some system is redundant past Bessel bound 2 —
    // weave the ε_j-scaled small systems down to `keep` picks per group,
    // which caps the kept small systems' Bessel bounds under 2
    let mut eps_prime: Vec<f64> = eps.iter().map(|&e| e.max(0.5)).collect();
    let (kept, pos_blocks, stage_a) = if small.is_empty() {
        ((0..n).collect::<Vec<usize>>(), blocks.to_vec(), None)
    } else {
        let mut sub_blocks = Vec::with_capacity(blocks.len() * keep);
        for block in blocks {
            for c in 0..keep {
                sub_blocks.push(block[c * chunk..(c + 1) * chunk].to_vec());
            }
        }
        let scaled: Vec<VectorSystem> =
            small.iter().map(|&j| systems[j].scaled(libm::sqrt(eps[j]))).collect();
        let refs: Vec<&VectorSystem> = scaled.iter().collect();
        let caps: Vec<f64> = small.iter().map(|&j| eps[j]).collect();
        let cert = rank_one_block_weaver(&refs, &caps, &sub_blocks, chunk, &cfg.opts)?;
        let kept = cert.selected.clone();
        let pos_blocks: Vec<Vec<usize>> = blocks
            .iter()
            .map(|block| (0..kept.len()).filter(|&p| block.contains(&kept[p])).collect())
            .collect();
        (kept, pos_blocks, Some(cert))
    };
    let _ = &stage_a;

    // stage B: weave original rank-ones (scaled to floor ε'_j) of systems
    // below the 1/(1+ε) threshold together with every system's complement,
    // so the upper and lower Riesz sides tighten at the same time
    let restricted: Vec<VectorSystem> =
        systems.iter().map(|s| s.subsystem(&kept)).collect::<Result<_>>()?;
    let scaled_restricted: Vec<VectorSystem> = (0..m)
        .map(|j| restricted[j].scaled(libm::sqrt(eps_prime[j])))
        .collect();
    let mut complements = Vec::with_capacity(m);
    let mut comp_caps = vec![0.0f64; m];
    for (j, sys) in scaled_restricted.iter().enumerate() {
        let comp = bessel_complement(sys)?;
        comp_caps[j] = comp.norms_sq().into_iter().fold(0.0f64, f64::max);
        complements.push(comp);
    }
    let mut weaver_systems: Vec<&VectorSystem> = Vec::new();
    let mut weaver_caps: Vec<f64> = Vec::new();
    let mut orig_slot: Vec<Option<usize>> = vec![None; m];
    let mut comp_slot: Vec<Option<usize>> = vec![None; m];
    for j in 0..m {
        if eps_prime[j] < thresh {
            orig_slot[j] = Some(weaver_systems.len());
            weaver_systems.push(&scaled_restricted[j]);
            weaver_caps.push(eps_prime[j]);
        }
    }
    for j in 0..m {
        if comp_caps[j] > cfg.free_cap {
            comp_slot[j] = Some(weaver_systems.len());
            weaver_systems.push(&complements[j]);
            weaver_caps.push(comp_caps[j]);
        }
    }
    let (positions, method, promise_at) = if weaver_systems.is_empty() {
        let mut picks: Vec<usize> = pos_blocks.iter().map(|b| b[0]).collect();
        picks.sort_unstable();
        (picks, SelectionMethod::Trivial, Vec::new())
    } else {
        let cert =
            rank_one_block_weaver(&weaver_systems, &weaver_caps, &pos_blocks, keep, &cfg.opts)?;
        let promises = cert.promised_bound.clone();
        (cert.selected, cert.method, promises)
    };
    let selected: Vec<usize> = positions.iter().map(|&p| kept[p]).collect();

    let k_groups = blocks.len() as f64;
    let mut promised_lower = Vec::with_capacity(m);
    let mut promised_upper = Vec::with_capacity(m);
    for j in 0..m {
        let upper_scaled = match orig_slot[j] {
            Some(s) => promise_at[s],
            None => 1.0,
        };
        let lower_scaled = match comp_slot[j] {
            Some(s) => 1.0 - promise_at[s],
            None => 1.0 - k_groups * comp_caps[j],
        };
        promised_upper.push(Some(upper_scaled / eps_prime[j]));
        promised_lower.push(lower_scaled / eps_prime[j]);
    }
    eps_prime.truncate(m);

    let (achieved_lower, achieved_upper) = recompute_bounds(systems, &selected)?;
    let constant = (0..m)
        .map(|j| promised_lower[j] / eps[j])
        .fold(f64::INFINITY, f64::min);
    Ok(RieszCertificate {
        selected,
        epsilons: eps,
        achieved_lower,
        achieved_upper,
        promised_lower,
        promised_upper,
        constant,
        r_used: min_size,
        bound_formula: format!(
            "target (1 ± {varepsilon}); weave originals under floor 1/(1+ε) with complements, r = {keep}"
        ),
        method,
    })
}

/// Splits the shared index set of systems with squared norms exactly 1/2 and
/// Bessel bound at most 1 into `r` parts so that every part of every system
/// has Bessel bound at most `(1 + ε)/2`. Needs `r ≥ ⌈18 m̂ / ε²⌉` with
/// `m̂ = max(2, s/2)` for `s` systems; each index is duplicated into `r`
/// compartment embeddings per system and the block weaver keeps one
/// compartment per index.
pub fn multi_pave_projections(
    systems: &[VectorSystem],
    varepsilon: f64,
    r: usize,
    opts: &SelectOptions,
) -> Result<PartitionCertificate> {
    if !(varepsilon > 0.0 && varepsilon < 1.0) {
        return Err(CoreError::Invalid(format!("tightness must lie in (0,1), got {varepsilon}")));
    }
    let n = validate_same_index_set(systems)?;
    for (j, sys) in systems.iter().enumerate() {
        for nn in sys.norms_sq() {
            if (nn - 0.5).abs() > tol::TOL_EQ {
                return Err(CoreError::Hypothesis(format!(
                    "system {j} has a squared norm {nn}; paving needs exactly 1/2"
                )));
            }
        }
        let b = frame_bounds(sys)?.bessel;
        if b > 1.0 + tol::TOL_EQ {
            return Err(CoreError::Hypothesis(format!("system {j} has Bessel bound {b} > 1")));
        }
    }
    let m_rule = (systems.len() as f64 / 2.0).max(2.0);
    let r_min = ceil_rule(18.0 * m_rule / (varepsilon * varepsilon));
    if r < r_min {
        return Err(CoreError::Hypothesis(format!(
            "r = {r} is below the rule 18·max(2, s/2)/ε² = {r_min}"
        )));
    }

    let mut operators = Vec::with_capacity(n * r);
    for i in 0..n {
        for k in 0..r {
            let parts: Vec<PsdMatrix> = systems
                .iter()
                .map(|sys| {
                    let d = sys.dim();
                    let mut v = CVec::zeros(r * d);
                    v.rows_mut(k * d, d).copy_from(sys.vector(i));
                    PsdMatrix::rank_one(&v)
                })
                .collect();
            operators.push(BlockDiagonalPsd::new(parts)?);
        }
    }
    let groups: Vec<Vec<usize>> = (0..n).map(|i| (i * r..(i + 1) * r).collect()).collect();
    let caps: Vec<f64> =
        systems.iter().map(|s| s.norms_sq().into_iter().fold(0.0f64, f64::max)).collect();
    let inst = BlockSelectorInstance::new(operators, groups, caps)?;
    let cert = block_weaver_select(&inst, r, opts)?;

    let mut parts = vec![Vec::new(); r];
    for (i, &sel) in cert.selected.iter().enumerate() {
        debug_assert_eq!(sel / r, i);
        parts[sel % r].push(i);
    }
    let mut achieved = Vec::with_capacity(r);
    for part in &parts {
        let mut worst = 0.0f64;
        if !part.is_empty() {
            for sys in systems {
                worst = worst.max(frame_bounds(&sys.subsystem(part)?)?.bessel);
            }
        }
        achieved.push(worst);
    }
    let promised = vec![(1.0 + varepsilon) / 2.0; r];
    Ok(PartitionCertificate {
        parts,
        achieved,
        promised,
        bound_formula: format!(
            "per part and system: 1/2 + 1/{r} + 2·sqrt(Σ caps/{r}) ≤ (1 + {varepsilon})/2"
        ),
        method: cert.method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn onb(d: usize) -> VectorSystem {
        let vectors = (0..d)
            .map(|i| {
                let mut v = CVec::zeros(d);
                v[i] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        VectorSystem::new(d, vectors).unwrap()
    }

    fn scaled_onb(d: usize, norm_sq: f64) -> VectorSystem {
        onb(d).scaled(libm::sqrt(norm_sq))
    }

    fn fourier(d: usize) -> VectorSystem {
        let s = 1.0 / libm::sqrt(d as f64);
        let vectors = (0..d)
            .map(|k| {
                CVec::from_fn(d, |j, _| {
                    let t = core::f64::consts::TAU * (j * k % d) as f64 / d as f64;
                    C64::new(libm::cos(t) * s, libm::sin(t) * s)
                })
            })
            .collect();
        VectorSystem::new(d, vectors).unwrap()
    }

    fn union(a: &VectorSystem, b: &VectorSystem) -> VectorSystem {
        assert_eq!(a.dim(), b.dim());
        let mut vectors = a.vectors().to_vec();
        vectors.extend_from_slice(b.vectors());
        VectorSystem::new(a.dim(), vectors).unwrap()
    }

    fn mercedes() -> VectorSystem {
        let s = libm::sqrt(2.0 / 3.0);
        let vectors = (0..3)
            .map(|k| {
                let t = core::f64::consts::TAU * k as f64 / 3.0;
                CVec::from_fn(2, |j, _| {
                    if j == 0 {
                        C64::new(s * libm::cos(t), 0.0)
                    } else {
                        C64::new(s * libm::sin(t), 0.0)
                    }
                })
            })
            .collect();
        VectorSystem::new(2, vectors).unwrap()
    }

    fn is_identity(m: &HermitianMatrix, tl: f64) -> bool {
        let d = m.dim();
        m.add(&HermitianMatrix::identity(d).scale(-1.0)).unwrap().operator_norm() <= tl
    }

    #[test]
    fn gram_of_orthonormal_basis_is_identity() {
        assert!(is_identity(&gram(&onb(4)), 1e-12));
    }

    #[test]
    fn gram_diagonal_holds_squared_norms() {
        let g = gram(&mercedes());
        for i in 0..3 {
            assert_relative_eq!(g.as_matrix()[(i, i)].re, 2.0 / 3.0, epsilon = 1e-12);
            for l in 0..3 {
                if i != l {
                    assert_relative_eq!(g.as_matrix()[(i, l)].re, -1.0 / 3.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn frame_bounds_of_orthonormal_basis() {
        let fb = frame_bounds(&onb(3)).unwrap();
        assert_relative_eq!(fb.bessel, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fb.riesz_lower, 1.0, epsilon = 1e-12);
        assert_eq!(fb.riesz_upper, fb.bessel);
    }

    #[test]
    fn frame_bounds_flag_dependent_vectors() {
        let e0 = onb(2).vector(0).clone();
        let sys = VectorSystem::new(2, vec![e0.clone(), e0]).unwrap();
        let fb = frame_bounds(&sys).unwrap();
        assert!(fb.riesz_lower.abs() < 1e-12);
        assert_relative_eq!(fb.bessel, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn completion_of_parseval_adds_nothing() {
        let done = complete_to_parseval(&mercedes()).unwrap();
        assert_eq!(done.len(), 3);
        assert!(is_identity(&done.frame_operator(), 1e-9));
    }

    #[test]
    fn completion_fills_partial_system() {
        let mut v = CVec::zeros(2);
        v[0] = C64::new(1.0 / libm::sqrt(2.0), 0.0);
        let sys = VectorSystem::new(2, vec![v]).unwrap();
        let done = complete_to_parseval(&sys).unwrap();
        assert_eq!(done.len(), 3);
        assert!(is_identity(&done.frame_operator(), 1e-9));
        let mut added: Vec<f64> = done.norms_sq()[1..].to_vec();
        added.sort_by(f64::total_cmp);
        assert_relative_eq!(added[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(added[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn completion_of_empty_system_is_orthonormal() {
        let sys = VectorSystem::new(2, vec![]).unwrap();
        let done = complete_to_parseval(&sys).unwrap();
        assert_eq!(done.len(), 2);
        assert!(is_identity(&done.frame_operator(), 1e-9));
        assert!(is_identity(&gram(&done), 1e-9));
    }

    #[test]
    fn completion_rejects_overfull_system() {
        let sys = scaled_onb(2, 1.21);
        assert!(matches!(complete_to_parseval(&sys), Err(CoreError::Hypothesis(_))));
    }

    #[test]
    fn naimark_of_basis_is_zero_dimensional() {
        let pair = naimark_complement(&onb(3)).unwrap();
        assert_eq!(pair.complement.dim(), 0);
        assert_eq!(pair.complement.len(), 3);
        assert!(naimark_defect(&pair) <= 1e-10);
    }

    #[test]
    fn naimark_of_mercedes_frame() {
        let pair = naimark_complement(&mercedes()).unwrap();
        assert_eq!(pair.complement.dim(), 1);
        for nn in pair.complement.norms_sq() {
            assert_relative_eq!(nn, 1.0 / 3.0, epsilon = 1e-10);
        }
        assert!(naimark_defect(&pair) <= 1e-10);
    }

    #[test]
    fn naimark_of_two_basis_union() {
        let scale = 1.0 / libm::sqrt(2.0);
        let sys = union(&onb(2), &fourier(2)).scaled(scale);
        let pair = naimark_complement(&sys).unwrap();
        assert_eq!(pair.complement.dim(), 2);
        for nn in pair.complement.norms_sq() {
            assert_relative_eq!(nn, 0.5, epsilon = 1e-10);
        }
        assert!(naimark_defect(&pair) <= 1e-10);
    }

    #[test]
    fn naimark_rejects_non_parseval_input() {
        assert!(matches!(
            naimark_complement(&scaled_onb(3, 0.5)),
            Err(CoreError::Hypothesis(_))
        ));
    }

    #[test]
    fn duality_identity_on_mercedes_pair() {
        let pair = naimark_complement(&mercedes()).unwrap();
        let (lower, comp_bessel) = riesz_bessel_duality_check(&pair, &[0, 1]).unwrap();
        assert_relative_eq!(lower, 1.0 / 3.0, epsilon = 1e-10);
        assert_relative_eq!(comp_bessel, 2.0 / 3.0, epsilon = 1e-10);
        assert_relative_eq!(lower, 1.0 - comp_bessel, epsilon = 1e-10);
    }

    #[test]
    fn bessel_complement_inverts_norms() {
        let sys = scaled_onb(3, 0.3);
        let comp = bessel_complement(&sys).unwrap();
        assert_eq!(comp.len(), 3);
        for nn in comp.norms_sq() {
            assert_relative_eq!(nn, 0.7, epsilon = 1e-9);
        }
        let j = [0usize, 1];
        let lower = frame_bounds(&sys.subsystem(&j).unwrap()).unwrap().riesz_lower;
        let upper = frame_bounds(&comp.subsystem(&j).unwrap()).unwrap().bessel;
        assert_relative_eq!(lower, 1.0 - upper, epsilon = 1e-9);
    }

    #[test]
    fn dual_of_orthonormal_basis_is_itself() {
        let dual = dual_riesz_basis(&onb(3)).unwrap();
        for (u, v) in onb(3).vectors().iter().zip(dual.vectors()) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn dual_of_diagonal_basis_inverts_scales() {
        let mut a = CVec::zeros(2);
        a[0] = C64::new(2.0, 0.0);
        let mut b = CVec::zeros(2);
        b[1] = C64::new(1.0, 0.0);
        let basis = VectorSystem::new(2, vec![a, b]).unwrap();
        let dual = dual_riesz_basis(&basis).unwrap();
        assert_relative_eq!(dual.vector(0)[0].re, 0.5, epsilon = 1e-12);
        assert_relative_eq!(dual.vector(0)[1].norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(dual.vector(1)[1].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dual_bounds_are_reciprocal() {
        let mut a = CVec::zeros(2);
        a[0] = C64::new(1.0, 0.0);
        let mut b = CVec::zeros(2);
        b[0] = C64::new(1.0, 0.0);
        b[1] = C64::new(1.0, 0.0);
        let basis = VectorSystem::new(2, vec![a, b]).unwrap();
        let fb = frame_bounds(&basis).unwrap();
        let db = frame_bounds(&dual_riesz_basis(&basis).unwrap()).unwrap();
        assert_relative_eq!(db.bessel, 1.0 / fb.riesz_lower, epsilon = 1e-9);
        assert_relative_eq!(db.riesz_lower, 1.0 / fb.bessel, epsilon = 1e-9);
        // biorthogonality
        let dual = dual_riesz_basis(&basis).unwrap();
        for i in 0..2 {
            for l in 0..2 {
                let ip: C64 = dual.vector(l).dotc(basis.vector(i));
                let want = if i == l { 1.0 } else { 0.0 };
                assert!((ip - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dual_rejects_singular_basis() {
        let e0 = onb(2).vector(0).clone();
        let sys = VectorSystem::new(2, vec![e0.clone(), e0]).unwrap();
        assert!(dual_riesz_basis(&sys).is_err());
        assert!(dual_riesz_basis(&mercedes()).is_err());
    }

    #[test]
    fn group_size_rule_branches() {
        assert_eq!(bl2_group_size(0.02, 0.99), 2);
        assert_eq!(bl2_group_size(0.08, 0.92), 2);
        // past the threshold the 21·δ₀/ε² branch takes over
        assert_eq!(bl2_group_size(0.5, 0.5), 42);
    }

    #[test]
    fn feichtinger_trivial_on_orthonormal_input() {
        let sys = onb(4);
        let cert = feichtinger_select(
            &[sys],
            &[vec![0, 1], vec![2, 3]],
            &FrameSelectConfig::default(),
        )
        .unwrap();
        assert_eq!(cert.selected, vec![0, 2]);
        assert_eq!(cert.method, SelectionMethod::Trivial);
        assert_relative_eq!(cert.achieved_lower[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(cert.promised_lower[0], 1.0, epsilon = 1e-9);
        assert!(check_riesz_promise(&cert, 1e-9).is_ok());
    }

    #[test]
    fn feichtinger_on_doubled_scaled_basis() {
        // two copies of a √½-scaled orthonormal basis: Parseval, ε = 1/2,
        // δ₀ = 1/2 forces the 21·δ₀/ε² group size of 42
        let half = scaled_onb(21, 0.5);
        let sys = union(&half, &half);
        let cert = feichtinger_select(
            &[sys],
            &[(0..42).collect()],
            &FrameSelectConfig::default(),
        )
        .unwrap();
        assert_eq!(cert.r_used, 42);
        assert_eq!(cert.selected.len(), 1);
        assert_relative_eq!(cert.achieved_lower[0], 0.5, epsilon = 1e-9);
        // the recorded promise beats the closed-form constant
        // (1 − 1/(21·δ₀) − 2/√21)·ε = 0.234…
        assert!(cert.promised_lower[0] >= 0.234);
        assert!(check_riesz_promise(&cert, 1e-9).is_ok());
    }

    #[test]
    fn feichtinger_pair_of_near_unit_systems() {
        // two Bessel-1 systems with ε = 0.99 on six indices; δ₀ = 0.02 is
        // under the pair threshold, so groups of two suffice and the
        // per-system promise is ε − 1/2 − 2√(δ₀/2) = 0.29
        let a = scaled_onb(6, 0.99);
        let b = fourier(6).scaled(libm::sqrt(0.99));
        let blocks = vec![vec![0, 1], vec![2, 3], vec![4, 5]];
        let cert =
            feichtinger_select(&[a, b], &blocks, &FrameSelectConfig::default()).unwrap();
        assert_eq!(cert.r_used, 2);
        assert_eq!(cert.selected.len(), 3);
        assert_eq!(cert.method, SelectionMethod::ExactInterlacing);
        for j in 0..2 {
            assert!(cert.promised_lower[j] >= 0.29 - 1e-12);
            assert!(cert.achieved_lower[j] >= cert.promised_lower[j] - 1e-7);
            assert_eq!(cert.promised_upper[j], Some(1.0));
        }
        assert!(cert.constant >= 0.29);
        assert!(check_riesz_promise(&cert, 1e-7).is_ok());
    }

    #[test]
    fn feichtinger_reduces_uneven_norms() {
        let mut vectors = scaled_onb(6, 0.99).vectors().to_vec();
        vectors[0] *= C64::new(libm::sqrt(0.995 / 0.99), 0.0);
        let sys = VectorSystem::new(6, vectors).unwrap();
        let blocks = vec![vec![0, 1], vec![2, 3], vec![4, 5]];
        let cert =
            feichtinger_select(&[sys], &blocks, &FrameSelectConfig::default()).unwrap();
        assert!((cert.epsilons[0] - 0.99).abs() < 1e-12);
        // upper promises are only made for equal-norm inputs
        assert_eq!(cert.promised_upper[0], None);
        assert!(cert.achieved_lower[0] >= cert.promised_lower[0] - 1e-7);
    }

    #[test]
    fn feichtinger_two_stage_below_half() {
        // ε = 0.49 < 1/2 triggers the two-stage pipeline: chunks of 13,
        // two kept picks per group with a reduced stage constant
        let sys = scaled_onb(52, 0.49);
        let cfg = FrameSelectConfig { stage_constant: 12.0, ..FrameSelectConfig::default() };
        let blocks = vec![(0..26).collect::<Vec<_>>(), (26..52).collect()];
        let cert = feichtinger_select(&[sys], &blocks, &cfg).unwrap();
        assert_eq!(cert.selected.len(), 2);
        assert_eq!(cert.r_used, 26);
        assert_relative_eq!(cert.achieved_lower[0], 0.49, epsilon = 1e-9);
        assert!(cert.achieved_lower[0] >= cert.promised_lower[0] - 1e-7);
        let up = cert.promised_upper[0].unwrap();
        assert!(up <= 2.0 * 0.49 && cert.achieved_upper[0] <= up + 1e-7);
    }

    #[test]
    fn feichtinger_hypothesis_violations() {
        // Bessel bound above 1
        assert!(matches!(
            feichtinger_select(
                &[scaled_onb(2, 1.2)],
                &[vec![0, 1]],
                &FrameSelectConfig::default()
            ),
            Err(CoreError::Hypothesis(_))
        ));
        // undersized groups for the two-stage rule
        assert!(matches!(
            feichtinger_select(
                &[scaled_onb(8, 0.49)],
                &[vec![0, 1, 2, 3]],
                &FrameSelectConfig { stage_constant: 12.0, ..FrameSelectConfig::default() }
            ),
            Err(CoreError::Hypothesis(_))
        ));
        // a zero vector has no positive norm floor
        let mut vectors = onb(2).vectors().to_vec();
        vectors[1] *= C64::new(0.0, 0.0);
        let degenerate = VectorSystem::new(2, vectors).unwrap();
        assert!(matches!(
            feichtinger_select(&[degenerate], &[vec![0, 1]], &FrameSelectConfig::default()),
            Err(CoreError::Hypothesis(_))
        ));
        // overlapping groups
        assert!(feichtinger_select(
            &[onb(3)],
            &[vec![0, 1], vec![1, 2]],
            &FrameSelectConfig::default()
        )
        .is_err());
    }

    #[test]
    fn r_eps_trivial_on_orthonormal_system() {
        // B = 1: every stage is vacuous and any singleton works
        let cert = r_eps_select(
            &[onb(96)],
            &[(0..96).collect()],
            0.9,
            &FrameSelectConfig::default(),
        )
        .unwrap();
        assert_eq!(cert.selected.len(), 1);
        assert_eq!(cert.method, SelectionMethod::Trivial);
        assert_relative_eq!(cert.achieved_lower[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(cert.achieved_upper[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(cert.promised_upper[0].unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn r_eps_tightens_redundant_union() {
        // union of two orthonormal bases: unit norms, Bessel bound 2, so the
        // redundancy-reduction stage runs before the two-sided weave
        let sys = union(&onb(72), &fourier(72));
        let blocks = vec![(0..72).collect::<Vec<_>>(), (72..144).collect()];
        let cfg = FrameSelectConfig { reps_constant: 6.0, ..FrameSelectConfig::default() };
        let eps = 0.5;
        let cert = r_eps_select(&[sys], &blocks, eps, &cfg).unwrap();
        assert_eq!(cert.selected.len(), 2);
        assert!(cert.selected[0] < 72 || cert.selected[0] >= 72); // one per group
        assert!((cert.epsilons[0] - 0.5).abs() < 1e-9);
        assert!(cert.achieved_lower[0] >= 1.0 - eps - 1e-7);
        assert!(cert.achieved_upper[0] <= 1.0 + eps + 1e-7);
        assert!(cert.promised_upper[0].is_some());
    }

    #[test]
    fn r_eps_handles_two_systems_at_once() {
        let sys1 = union(&onb(60), &fourier(60));
        let sys2 = union(&fourier(60), &onb(60));
        let blocks = vec![(0..120).collect::<Vec<_>>()];
        let cfg = FrameSelectConfig { reps_constant: 3.0, ..FrameSelectConfig::default() };
        let cert = r_eps_select(&[sys1, sys2], &blocks, 0.5, &cfg).unwrap();
        assert_eq!(cert.selected.len(), 1);
        for j in 0..2 {
            assert_relative_eq!(cert.achieved_lower[j], 1.0, epsilon = 1e-9);
            assert_relative_eq!(cert.achieved_upper[j], 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn r_eps_hypothesis_violations() {
        // non-unit norms
        assert!(matches!(
            r_eps_select(
                &[scaled_onb(4, 0.5)],
                &[vec![0, 1, 2, 3]],
                0.5,
                &FrameSelectConfig::default()
            ),
            Err(CoreError::Hypothesis(_))
        ));
        // tightness outside (0,1)
        assert!(r_eps_select(&[onb(4)], &[vec![0, 1]], 1.5, &FrameSelectConfig::default())
            .is_err());
        // groups below the size rule at the default constant
        let sys = union(&onb(4), &fourier(4));
        assert!(matches!(
            r_eps_select(
                &[sys],
                &[(0..8).collect()],
                0.5,
                &FrameSelectConfig::default()
            ),
            Err(CoreError::Hypothesis(_))
        ));
    }

    #[test]
    fn multi_pave_single_system() {
        let sys = union(&onb(2), &fourier(2)).scaled(1.0 / libm::sqrt(2.0));
        let eps = 0.995;
        let r = 37;
        let cert =
            multi_pave_projections(&[sys.clone()], eps, r, &SelectOptions::default()).unwrap();
        assert_eq!(cert.parts.len(), r);
        let mut seen = vec![false; 4];
        for (k, part) in cert.parts.iter().enumerate() {
            for &i in part {
                assert!(!seen[i]);
                seen[i] = true;
            }
            assert!(cert.achieved[k] <= (1.0 + eps) / 2.0 + 1e-9);
            if part.is_empty() {
                assert_eq!(cert.achieved[k], 0.0);
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn multi_pave_matches_enumeration() {
        // four one-dimensional systems sharing two indices: the best
        // partition separates the indices, giving per-part bound 1/2
        let one = {
            let mut v = CVec::zeros(1);
            v[0] = C64::new(1.0 / libm::sqrt(2.0), 0.0);
            VectorSystem::new(1, vec![v.clone(), v]).unwrap()
        };
        let systems = vec![one.clone(), one.clone(), one.clone(), one];
        let eps = 0.995;
        let r = 37;
        let cert = multi_pave_projections(&systems, eps, r, &SelectOptions::default()).unwrap();
        let cert_worst = cert.achieved.iter().copied().fold(0.0f64, f64::max);

        // exhaustive search over compartment assignments of the two indices
        let mut optimal = f64::INFINITY;
        for k0 in 0..r {
            for k1 in 0..r {
                let worst = if k0 == k1 { 1.0 } else { 0.5 };
                optimal = optimal.min(worst);
            }
        }
        assert_relative_eq!(cert_worst, optimal, epsilon = 1e-9);
        assert!(cert_worst <= (1.0 + eps) / 2.0 + 1e-9);
    }

    #[test]
    fn multi_pave_hypothesis_violations() {
        let sys = union(&onb(2), &fourier(2)).scaled(1.0 / libm::sqrt(2.0));
        // r below the rule
        assert!(matches!(
            multi_pave_projections(&[sys.clone()], 0.995, 36, &SelectOptions::default()),
            Err(CoreError::Hypothesis(_))
        ));
        // squared norms must be exactly 1/2
        assert!(matches!(
            multi_pave_projections(&[onb(2)], 0.995, 80, &SelectOptions::default()),
            Err(CoreError::Hypothesis(_))
        ));
    }
}
