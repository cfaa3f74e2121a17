//! Derandomized interlacing selection for finite-valued PSD random matrix
//! families, and the Weaver-type selector theorems built on it.
//!
//! The workhorse is [`greedy_interlacing_select`]: fixing the variables one
//! at a time, always picking an outcome whose conditional-expectation mixed
//! characteristic polynomial does not raise the maxroot, lands on an
//! assignment whose witness maxroot is at most the expectation maxroot. The
//! exact walk costs `2^m` per polynomial, so instances past a configurable
//! budget fall back to a deterministic mean-field greedy that minimizes the
//! conditional expected sum's operator norm; certificates always record which
//! route produced them and recompute every achieved bound from scratch.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::linalg::{psd_order_leq, psd_sum, BlockDiagonalPsd, HermitianMatrix, PsdMatrix};
use crate::mcp::{char_poly, maxroot, mcp_with_dim, RealPolynomial, MAX_EXACT_ARGS};
use crate::tol;
use crate::{C64, CMat};

/// Finitely supported random PSD matrix.
#[derive(Clone, Debug)]
pub struct FiniteRandomPsd {
    outcomes: Vec<(PsdMatrix, f64)>,
}

impl FiniteRandomPsd {
    pub fn new(outcomes: Vec<(PsdMatrix, f64)>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(CoreError::Invalid("random matrix needs at least one outcome".into()));
        }
        let d = outcomes[0].0.dim();
        let mut total = 0.0;
        for (m, p) in &outcomes {
            if m.dim() != d {
                return Err(CoreError::DimensionMismatch { expected: d, got: m.dim() });
            }
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(CoreError::Invalid(format!("outcome probability {p} outside (0,1]")));
            }
            total += p;
        }
        if (total - 1.0).abs() > tol::TOL_PROB {
            return Err(CoreError::Invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(FiniteRandomPsd { outcomes })
    }

    /// Single outcome with probability one.
    pub fn deterministic(m: PsdMatrix) -> Self {
        FiniteRandomPsd { outcomes: vec![(m, 1.0)] }
    }

    /// Uniform distribution over the given outcomes.
    pub fn uniform(mats: Vec<PsdMatrix>) -> Result<Self> {
        let k = mats.len();
        if k == 0 {
            return Err(CoreError::Invalid("uniform distribution over an empty set".into()));
        }
        let p = 1.0 / k as f64;
        FiniteRandomPsd::new(mats.into_iter().map(|m| (m, p)).collect())
    }

    pub fn outcomes(&self) -> &[(PsdMatrix, f64)] {
        &self.outcomes
    }

    pub fn support_size(&self) -> usize {
        self.outcomes.len()
    }

    pub fn dim(&self) -> usize {
        self.outcomes[0].0.dim()
    }
}

/// Probability-weighted sum of the outcomes.
pub fn expected_matrix(x: &FiniteRandomPsd) -> PsdMatrix {
    let d = x.dim();
    let mut acc = HermitianMatrix::zeros(d);
    for (m, p) in x.outcomes() {
        acc = acc.add(&m.as_hermitian().scale(*p)).expect("shared dimension");
    }
    PsdMatrix::new(acc).expect("convex combination of PSD matrices is PSD")
}

/// How an assignment was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMethod {
    /// Interlacing greedy over exact mixed characteristic polynomials; the
    /// maxroot chain is monotone by construction.
    ExactInterlacing,
    /// Norm-of-conditional-expectation greedy with one improvement sweep;
    /// used past the exact budget. Bounds are still recomputed and verified,
    /// but the interlacing guarantee is not constructive on this route.
    MeanFieldGreedy,
    /// Every admissible choice meets the promise, so the lexicographically
    /// first one is taken without running the engine.
    Trivial,
}

impl SelectionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionMethod::ExactInterlacing => "exact_interlacing",
            SelectionMethod::MeanFieldGreedy => "mean_field_greedy",
            SelectionMethod::Trivial => "trivial",
        }
    }
}

/// Assignment of one outcome per variable, with the certifying polynomial.
#[derive(Clone, Debug)]
pub struct Assignment {
    /// Chosen outcome index per variable.
    pub choices: Vec<usize>,
    /// Mixed characteristic polynomial of the fixed family (exact route) or
    /// the characteristic polynomial of the fixed sum (mean-field route).
    pub witness: RealPolynomial,
    /// Maxroot after each fixing step; non-increasing on the exact route.
    pub step_roots: Vec<f64>,
    pub method: SelectionMethod,
}

fn shared_dim(family: &[FiniteRandomPsd]) -> Result<usize> {
    if family.is_empty() {
        return Err(CoreError::Invalid("empty family has nothing to select".into()));
    }
    let d = family[0].dim();
    for x in family {
        if x.dim() != d {
            return Err(CoreError::DimensionMismatch { expected: d, got: x.dim() });
        }
    }
    Ok(d)
}

/// Derandomized interlacing selection: fix variables left to right, each time
/// choosing the outcome minimizing the maxroot of the mixed characteristic
/// polynomial with all later variables replaced by their expectations. The
/// final maxroot never exceeds the all-expectation maxroot (within
/// `tol_root`); ties break to the lowest outcome index.
pub fn greedy_interlacing_select(
    family: &[FiniteRandomPsd],
    tol_root: f64,
) -> Result<Assignment> {
    let d = shared_dim(family)?;
    let m = family.len();
    if m > MAX_EXACT_ARGS {
        return Err(CoreError::BudgetExceeded(format!(
            "{m} variables exceed the exact interlacing budget of {MAX_EXACT_ARGS}"
        )));
    }
    let mut args: Vec<HermitianMatrix> =
        family.iter().map(|x| expected_matrix(x).as_hermitian().clone()).collect();
    let mut current = maxroot(&mcp_with_dim(d, &args)?, tol_root)?.value;
    let mut choices = Vec::with_capacity(m);
    let mut step_roots = Vec::with_capacity(m);
    for i in 0..m {
        let mut best_idx = 0usize;
        let mut best_root = f64::INFINITY;
        for (o, (mat, _)) in family[i].outcomes().iter().enumerate() {
            args[i] = mat.as_hermitian().clone();
            let root = maxroot(&mcp_with_dim(d, &args)?, tol_root)?.value;
            if root < best_root {
                best_root = root;
                best_idx = o;
            }
        }
        args[i] = family[i].outcomes()[best_idx].0.as_hermitian().clone();
        // One branch always interlaces below the convex combination, so the
        // chain cannot rise. Computed roots carry the conditioning limit of
        // clustered roots — a multiplicity-k root of a degree-d polynomial
        // is determined only to eps^(1/k) ≤ eps^(1/d) from f64 coefficients
        // — so the guard allows that floor; anything past it is a bug.
        let cluster_floor =
            libm::pow(f64::EPSILON, 1.0 / d as f64) * best_root.abs().max(current.abs());
        if best_root > current + tol_root + cluster_floor {
            return Err(CoreError::Invalid(format!(
                "greedy maxroot rose from {current} to {best_root} at step {i}"
            )));
        }
        current = best_root.min(current);
        choices.push(best_idx);
        step_roots.push(best_root);
    }
    let witness = mcp_with_dim(d, &args)?;
    Ok(Assignment { choices, witness, step_roots, method: SelectionMethod::ExactInterlacing })
}

/// Brute-force minimizer of the assignment maxroot; ties break
/// lexicographically. Only for small products of support sizes.
pub fn exhaustive_select(family: &[FiniteRandomPsd], tol_root: f64) -> Result<Assignment> {
    let d = shared_dim(family)?;
    let m = family.len();
    let mut product: u64 = 1;
    for x in family {
        product = product.saturating_mul(x.support_size() as u64);
        if product > 100_000 {
            return Err(CoreError::BudgetExceeded(
                "exhaustive enumeration is capped at 1e5 assignments".into(),
            ));
        }
    }
    let mut counter = vec![0usize; m];
    let mut best: Option<(f64, Vec<usize>, RealPolynomial)> = None;
    loop {
        let args: Vec<HermitianMatrix> = counter
            .iter()
            .enumerate()
            .map(|(i, &o)| family[i].outcomes()[o].0.as_hermitian().clone())
            .collect();
        let poly = mcp_with_dim(d, &args)?;
        let root = maxroot(&poly, tol_root)?.value;
        if best.as_ref().map_or(true, |(b, _, _)| root < *b) {
            best = Some((root, counter.clone(), poly));
        }
        // mixed-radix increment, most significant variable first for
        // lexicographic tie-breaking
        let mut pos = m;
        while pos > 0 {
            pos -= 1;
            counter[pos] += 1;
            if counter[pos] < family[pos].support_size() {
                break;
            }
            counter[pos] = 0;
            if pos == 0 {
                let (root, choices, witness) = best.expect("at least one assignment");
                return Ok(Assignment {
                    choices,
                    witness,
                    step_roots: vec![root],
                    method: SelectionMethod::ExactInterlacing,
                });
            }
        }
    }
}

/// Deterministic fallback for instances past the exact budget: fix variables
/// left to right minimizing the operator norm of the conditional expected
/// sum, then run one improvement sweep on the fully fixed objective. Ties
/// break to the lowest outcome index.
pub fn mean_field_select(family: &[FiniteRandomPsd]) -> Result<Assignment> {
    let d = shared_dim(family)?;
    let m = family.len();
    let mut sum_rest = CMat::zeros(d, d);
    for x in family {
        sum_rest += expected_matrix(x).as_hermitian().as_matrix();
    }
    let mut fixed_sum = CMat::zeros(d, d);
    let mut choices = vec![0usize; m];
    let mut step_roots = Vec::with_capacity(m);
    for i in 0..m {
        sum_rest -= expected_matrix(&family[i]).as_hermitian().as_matrix();
        let mut best = f64::INFINITY;
        for (o, (mat, _)) in family[i].outcomes().iter().enumerate() {
            let cand = &fixed_sum + &sum_rest + mat.as_hermitian().as_matrix();
            let norm = HermitianMatrix::new(cand)?.operator_norm();
            if norm < best {
                best = norm;
                choices[i] = o;
            }
        }
        fixed_sum += family[i].outcomes()[choices[i]].0.as_hermitian().as_matrix();
        step_roots.push(best);
    }
    // one local-improvement sweep on the final objective
    for i in 0..m {
        let current = family[i].outcomes()[choices[i]].0.as_hermitian().as_matrix();
        let without = &fixed_sum - current;
        let mut best_norm =
            HermitianMatrix::new(fixed_sum.clone())?.operator_norm();
        let mut best_choice = choices[i];
        for (o, (mat, _)) in family[i].outcomes().iter().enumerate() {
            if o == best_choice {
                continue;
            }
            let cand = &without + mat.as_hermitian().as_matrix();
            let norm = HermitianMatrix::new(cand)?.operator_norm();
            if norm < best_norm {
                best_norm = norm;
                best_choice = o;
            }
        }
        if best_choice != choices[i] {
            fixed_sum = &without + family[i].outcomes()[best_choice].0.as_hermitian().as_matrix();
            choices[i] = best_choice;
        }
    }
    let witness = char_poly(&HermitianMatrix::new(fixed_sum)?);
    Ok(Assignment { choices, witness, step_roots, method: SelectionMethod::MeanFieldGreedy })
}

/// Mean-field greedy over uniformly weighted block-diagonal outcomes. The
/// objective — operator norm of the conditional expected sum — equals the
/// largest per-block norm, so it is evaluated block by block and the
/// eigenproblems stay at the block dimensions instead of their sum.
fn mean_field_select_block_diag(family: &[Vec<BlockDiagonalPsd>]) -> Result<Assignment> {
    if family.is_empty() {
        return Err(CoreError::Invalid("empty family has nothing to select".into()));
    }
    let dims = family[0]
        .first()
        .ok_or_else(|| CoreError::Invalid("a variable has no outcomes".into()))?
        .block_dims()
        .to_vec();
    let nb = dims.len();
    for outcomes in family {
        if outcomes.is_empty() {
            return Err(CoreError::Invalid("a variable has no outcomes".into()));
        }
        for out in outcomes {
            if out.block_dims() != &dims[..] {
                return Err(CoreError::Invalid("outcomes disagree on block dimensions".into()));
            }
        }
    }
    let zero_state = || -> Vec<CMat> { dims.iter().map(|&d| CMat::zeros(d, d)).collect() };
    let mean_of = |outcomes: &[BlockDiagonalPsd]| -> Vec<CMat> {
        let w = C64::new(1.0 / outcomes.len() as f64, 0.0);
        let mut acc = zero_state();
        for out in outcomes {
            for j in 0..nb {
                acc[j] += out.blocks()[j].as_hermitian().as_matrix() * w;
            }
        }
        acc
    };
    let max_block_norm = |mats: &[CMat]| -> Result<f64> {
        let mut worst = 0.0f64;
        for m in mats {
            worst = worst.max(HermitianMatrix::new(m.clone())?.operator_norm());
        }
        Ok(worst)
    };

    let m = family.len();
    let mut rest = zero_state();
    for outcomes in family {
        let mean = mean_of(outcomes);
        for j in 0..nb {
            rest[j] += &mean[j];
        }
    }
    let mut fixed = zero_state();
    let mut choices = vec![0usize; m];
    let mut step_roots = Vec::with_capacity(m);
    for i in 0..m {
        let mean = mean_of(&family[i]);
        for j in 0..nb {
            rest[j] -= &mean[j];
        }
        let mut best = f64::INFINITY;
        for (o, out) in family[i].iter().enumerate() {
            let cand: Vec<CMat> = (0..nb)
                .map(|j| &fixed[j] + &rest[j] + out.blocks()[j].as_hermitian().as_matrix())
                .collect();
            let norm = max_block_norm(&cand)?;
            if norm < best {
                best = norm;
                choices[i] = o;
            }
        }
        for j in 0..nb {
            fixed[j] += family[i][choices[i]].blocks()[j].as_hermitian().as_matrix();
        }
        step_roots.push(best);
    }
    // one local-improvement sweep on the final objective
    for i in 0..m {
        let current = &family[i][choices[i]];
        let without: Vec<CMat> = (0..nb)
            .map(|j| &fixed[j] - current.blocks()[j].as_hermitian().as_matrix())
            .collect();
        let mut best_norm = max_block_norm(&fixed)?;
        let mut best_choice = choices[i];
        for (o, out) in family[i].iter().enumerate() {
            if o == choices[i] {
                continue;
            }
            let cand: Vec<CMat> = (0..nb)
                .map(|j| &without[j] + out.blocks()[j].as_hermitian().as_matrix())
                .collect();
            let norm = max_block_norm(&cand)?;
            if norm < best_norm {
                best_norm = norm;
                best_choice = o;
            }
        }
        if best_choice != choices[i] {
            for j in 0..nb {
                fixed[j] = &without[j] + family[i][best_choice].blocks()[j].as_hermitian().as_matrix();
            }
            choices[i] = best_choice;
        }
    }
    let total: usize = dims.iter().sum();
    let mut full = CMat::zeros(total, total);
    let mut off = 0usize;
    for j in 0..nb {
        full.view_mut((off, off), (dims[j], dims[j])).copy_from(&fixed[j]);
        off += dims[j];
    }
    let witness = char_poly(&HermitianMatrix::new(full)?);
    Ok(Assignment { choices, witness, step_roots, method: SelectionMethod::MeanFieldGreedy })
}

/// Route selection: exact interlacing within the budget, mean-field past it.
#[derive(Clone, Copy, Debug)]
pub struct SelectOptions {
    /// Maximum variable count for the exact `2^m` route.
    pub exact_budget: usize,
    /// Maximum ambient dimension for the exact route; the subset walk costs
    /// an eigensolve per subset, so large-dimensional instances go mean-field
    /// even when the variable count is small.
    pub exact_dim_budget: usize,
    /// Root-comparison tolerance.
    pub tol_root: f64,
    /// Semidefinite-order tolerance for hypothesis checks.
    pub tol_psd: f64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            exact_budget: 14,
            exact_dim_budget: 24,
            tol_root: tol::TOL_ROOT,
            tol_psd: tol::TOL_PSD,
        }
    }
}

impl SelectOptions {
    fn exact_route(&self, args: usize, dim: usize) -> bool {
        args <= self.exact_budget.min(MAX_EXACT_ARGS) && dim <= self.exact_dim_budget
    }
}

fn select_by_budget(family: &[FiniteRandomPsd], opts: &SelectOptions) -> Result<Assignment> {
    let d = shared_dim(family)?;
    if opts.exact_route(family.len(), d) {
        greedy_interlacing_select(family, opts.tol_root)
    } else {
        mean_field_select(family)
    }
}

/// Ground family with trace cap and disjoint selection groups.
#[derive(Clone, Debug)]
pub struct SelectorInstance {
    operators: Vec<PsdMatrix>,
    blocks: Vec<Vec<usize>>,
    epsilon: f64,
}

impl SelectorInstance {
    pub fn new(operators: Vec<PsdMatrix>, blocks: Vec<Vec<usize>>, epsilon: f64) -> Result<Self> {
        if operators.is_empty() {
            return Err(CoreError::Invalid("instance needs at least one operator".into()));
        }
        let d = operators[0].dim();
        for t in &operators {
            if t.dim() != d {
                return Err(CoreError::DimensionMismatch { expected: d, got: t.dim() });
            }
        }
        if epsilon < 0.0 {
            return Err(CoreError::Invalid(format!("negative trace bound {epsilon}")));
        }
        for (i, t) in operators.iter().enumerate() {
            if t.trace() > epsilon + tol::TOL_EQ * (1.0 + epsilon) {
                return Err(CoreError::Hypothesis(format!(
                    "tr(T_{i}) = {} exceeds the trace bound {epsilon}",
                    t.trace()
                )));
            }
        }
        let mut seen = vec![false; operators.len()];
        for block in &blocks {
            for &i in block {
                if i >= operators.len() {
                    return Err(CoreError::Invalid(format!("block index {i} out of range")));
                }
                if seen[i] {
                    return Err(CoreError::Invalid(format!(
                        "index {i} appears in more than one block"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(SelectorInstance { operators, blocks, epsilon })
    }

    pub fn operators(&self) -> &[PsdMatrix] {
        &self.operators
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    fn total(&self) -> Result<HermitianMatrix> {
        psd_sum(self.dim(), &self.operators)
    }

    fn check_sum_below_identity(&self, tol_psd: f64) -> Result<()> {
        let total = self.total()?;
        if !psd_order_leq(&total, &HermitianMatrix::identity(self.dim()), tol_psd)? {
            let top = total.eigenvalues().last().copied().unwrap_or(0.0);
            return Err(CoreError::Hypothesis(format!(
                "operator sum exceeds the identity: largest eigenvalue {top}"
            )));
        }
        Ok(())
    }
}

/// Outcome of a selector run: the chosen set, recomputed bounds, and the
/// certifying polynomial.
#[derive(Clone, Debug)]
pub struct SelectorCertificate {
    /// Selected indices, one per selection group, ascending.
    pub selected: Vec<usize>,
    /// Recomputed norms; a single entry for scalar bounds, one per block for
    /// the block variant, two (equal) deviations for the two-sided variant.
    pub achieved_norm: Vec<f64>,
    /// Bound promised by the theorem, aligned with `achieved_norm`.
    pub promised_bound: Vec<f64>,
    /// Human-readable tag of the bound formula.
    pub bound_formula: String,
    /// Which engine produced the selection.
    pub method: SelectionMethod,
    /// Mixed characteristic polynomial of the selected (unscaled) family
    /// when the argument budget allows, otherwise the characteristic
    /// polynomial of the selected sum; either way its maxroot dominates the
    /// achieved norm.
    pub witness_polynomial: RealPolynomial,
}

fn check_promise(cert: &SelectorCertificate, tol_root: f64) -> Result<()> {
    for (a, p) in cert.achieved_norm.iter().zip(&cert.promised_bound) {
        if *a > *p + tol_root {
            return Err(CoreError::Invalid(format!(
                "selection missed its bound: achieved {a} > promised {p} ({})",
                cert.bound_formula
            )));
        }
    }
    Ok(())
}

fn witness_for(selected: &[PsdMatrix], dim: usize, opts: &SelectOptions) -> Result<RealPolynomial> {
    let herm: Vec<HermitianMatrix> =
        selected.iter().map(|p| p.as_hermitian().clone()).collect();
    if herm.len() <= opts.exact_budget.min(MAX_EXACT_ARGS) {
        mcp_with_dim(dim, &herm)
    } else {
        Ok(char_poly(&psd_sum(dim, selected)?))
    }
}

/// Picks one index from each group so the selected sum has small norm:
/// `‖Σ_{i∈J} T_i‖ ≤ (1/√r + √ε)²`. Groups larger than `r` are truncated to
/// their first `r` members; ground indices outside every group are never
/// selected.
pub fn weaver_ksr_select(
    inst: &SelectorInstance,
    r: usize,
    opts: &SelectOptions,
) -> Result<SelectorCertificate> {
    if r < 2 {
        return Err(CoreError::Invalid(format!("group size r must be at least 2, got {r}")));
    }
    inst.check_sum_below_identity(opts.tol_psd)?;
    if inst.blocks().is_empty() {
        return Err(CoreError::Hypothesis("no selection groups given".into()));
    }
    for (k, block) in inst.blocks().iter().enumerate() {
        if block.len() < r {
            return Err(CoreError::Hypothesis(format!(
                "group {k} has {} members, fewer than r = {r}",
                block.len()
            )));
        }
    }
    let truncated: Vec<&[usize]> = inst.blocks().iter().map(|b| &b[..r]).collect();
    let family: Vec<FiniteRandomPsd> = truncated
        .iter()
        .map(|group| {
            let outcomes: Vec<PsdMatrix> = group
                .iter()
                .map(|&i| inst.operators()[i].scale(r as f64))
                .collect::<Result<_>>()?;
            FiniteRandomPsd::uniform(outcomes)
        })
        .collect::<Result<_>>()?;
    let assignment = select_by_budget(&family, opts)?;
    let mut selected: Vec<usize> =
        truncated.iter().zip(&assignment.choices).map(|(g, &c)| g[c]).collect();
    selected.sort_unstable();

    let chosen: Vec<PsdMatrix> = selected.iter().map(|&i| inst.operators()[i].clone()).collect();
    let achieved = psd_sum(inst.dim(), &chosen)?.operator_norm();
    let root = 1.0 / libm::sqrt(r as f64) + libm::sqrt(inst.epsilon());
    let promised = root * root;
    let cert = SelectorCertificate {
        selected,
        achieved_norm: vec![achieved],
        promised_bound: vec![promised],
        bound_formula: format!("(1/sqrt({r}) + sqrt(eps))^2 with eps = {}", inst.epsilon()),
        method: assignment.method,
        witness_polynomial: witness_for(&chosen, inst.dim(), opts)?,
    };
    check_promise(&cert, opts.tol_root)?;
    Ok(cert)
}

/// Splits `I - Σ T_i` into PSD chunks of trace at most `cap`, spectrally.
fn completion_chunks(remainder: &HermitianMatrix, cap: f64) -> Result<Vec<PsdMatrix>> {
    let psd = PsdMatrix::new(remainder.clone()).map_err(|_| {
        CoreError::Hypothesis("operator sum exceeds the identity; no completion exists".into())
    })?;
    let pieces = psd.spectral_pieces(tol::TOL_RANK);
    let mut chunks = Vec::new();
    for (lambda, v) in pieces {
        if lambda <= cap {
            chunks.push(PsdMatrix::rank_one(&(v * crate::C64::new(libm::sqrt(lambda), 0.0))));
        } else {
            if cap <= 0.0 {
                return Err(CoreError::Hypothesis(
                    "trace bound 0 leaves no room for completion blocks".into(),
                ));
            }
            let copies = libm::ceil(lambda / cap) as usize;
            let scaled = v * crate::C64::new(libm::sqrt(lambda / copies as f64), 0.0);
            for _ in 0..copies {
                chunks.push(PsdMatrix::rank_one(&scaled));
            }
        }
    }
    Ok(chunks)
}

fn two_block_diag(a: &PsdMatrix, b: &PsdMatrix) -> PsdMatrix {
    BlockDiagonalPsd::new(vec![a.clone(), b.clone()])
        .expect("two blocks")
        .assemble()
}

/// Two-sided pair selector: groups must partition the ground set into pairs;
/// both the selected and the complementary sum stay within `2√ε + ε` of
/// `T/2`. Runs on the doubled space with deterministic completion blocks
/// filling `I - T`.
pub fn ks2_select(inst: &SelectorInstance, opts: &SelectOptions) -> Result<SelectorCertificate> {
    let n = inst.len();
    let mut seen = vec![false; n];
    for block in inst.blocks() {
        if block.len() != 2 {
            return Err(CoreError::Invalid(format!(
                "pair selector needs 2-element groups, got one of size {}",
                block.len()
            )));
        }
        for &i in block {
            seen[i] = true;
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(CoreError::Invalid("groups must cover every operator (pair partition)".into()));
    }
    inst.check_sum_below_identity(opts.tol_psd)?;
    let d = inst.dim();
    let total = inst.total()?;
    let remainder = HermitianMatrix::identity(d).add(&total.scale(-1.0))?;
    let fillers = if remainder.operator_norm() <= tol::TOL_RANK {
        Vec::new()
    } else {
        completion_chunks(&remainder, 2.0 * inst.epsilon())?
    };

    let mut family: Vec<FiniteRandomPsd> = Vec::with_capacity(inst.blocks().len() + fillers.len());
    for pair in inst.blocks() {
        let (i, j) = (pair[0], pair[1]);
        let ti = inst.operators()[i].scale(2.0)?;
        let tj = inst.operators()[j].scale(2.0)?;
        family.push(FiniteRandomPsd::new(vec![
            (two_block_diag(&ti, &tj), 0.5),
            (two_block_diag(&tj, &ti), 0.5),
        ])?);
    }
    for f in &fillers {
        family.push(FiniteRandomPsd::deterministic(two_block_diag(f, f)));
    }
    let assignment = select_by_budget(&family, opts)?;

    let mut selected = Vec::with_capacity(inst.blocks().len());
    for (pair, &choice) in inst.blocks().iter().zip(&assignment.choices) {
        selected.push(pair[choice]);
    }
    selected.sort_unstable();
    let chosen: Vec<PsdMatrix> = selected.iter().map(|&i| inst.operators()[i].clone()).collect();
    let half = total.scale(0.5);
    let deviation = psd_sum(d, &chosen)?.add(&half.scale(-1.0))?.operator_norm();
    // the complement deviates by the negated matrix: identical norm, listed
    // twice to match the two-sided statement
    let eps = inst.epsilon();
    let promised = 2.0 * libm::sqrt(eps) + eps;
    let cert = SelectorCertificate {
        selected,
        achieved_norm: vec![deviation, deviation],
        promised_bound: vec![promised, promised],
        bound_formula: format!("2*sqrt(eps) + eps with eps = {eps}"),
        method: assignment.method,
        witness_polynomial: assignment.witness,
    };
    check_promise(&cert, opts.tol_root)?;
    Ok(cert)
}

/// Block-structured ground family: every operator is block diagonal with the
/// same block dimensions, and each block has its own trace cap.
#[derive(Clone, Debug)]
pub struct BlockSelectorInstance {
    operators: Vec<BlockDiagonalPsd>,
    blocks: Vec<Vec<usize>>,
    block_eps: Vec<f64>,
}

impl BlockSelectorInstance {
    pub fn new(
        operators: Vec<BlockDiagonalPsd>,
        blocks: Vec<Vec<usize>>,
        block_eps: Vec<f64>,
    ) -> Result<Self> {
        if operators.is_empty() {
            return Err(CoreError::Invalid("instance needs at least one operator".into()));
        }
        let dims = operators[0].block_dims();
        if dims.len() != block_eps.len() {
            return Err(CoreError::Invalid(format!(
                "{} blocks but {} trace caps",
                dims.len(),
                block_eps.len()
            )));
        }
        for t in &operators {
            if t.block_dims() != dims {
                return Err(CoreError::Invalid("operators disagree on block dimensions".into()));
            }
        }
        for (j, &e) in block_eps.iter().enumerate() {
            if e <= 0.0 {
                return Err(CoreError::Invalid(format!("trace cap for block {j} must be positive")));
            }
            for (i, t) in operators.iter().enumerate() {
                let tr = t.blocks()[j].trace();
                if tr > e + tol::TOL_EQ * (1.0 + e) {
                    return Err(CoreError::Hypothesis(format!(
                        "tr of operator {i} block {j} is {tr}, above the cap {e}"
                    )));
                }
            }
        }
        let mut seen = vec![false; operators.len()];
        for block in &blocks {
            for &i in block {
                if i >= operators.len() {
                    return Err(CoreError::Invalid(format!("group index {i} out of range")));
                }
                if seen[i] {
                    return Err(CoreError::Invalid(format!(
                        "index {i} appears in more than one group"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(BlockSelectorInstance { operators, blocks, block_eps })
    }

    pub fn operators(&self) -> &[BlockDiagonalPsd] {
        &self.operators
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_eps(&self) -> &[f64] {
        &self.block_eps
    }

    pub fn block_count(&self) -> usize {
        self.block_eps.len()
    }
}

/// One selector, simultaneous per-block norm control:
/// `‖Σ_{i∈J} T_i^{(j)}‖ ≤ 1/r + ε_j + 2√(Σ_l ε_l / r)` for every block `j`.
///
/// The random model scales each group member by `r`; traces are then
/// equalized exactly by padding every block with identity dimensions (the
/// per-block maxroot estimate needs exactly equal traces), and the greedy
/// runs on the padded family.
pub fn block_weaver_select(
    inst: &BlockSelectorInstance,
    r: usize,
    opts: &SelectOptions,
) -> Result<SelectorCertificate> {
    if r < 2 {
        return Err(CoreError::Invalid(format!("group size r must be at least 2, got {r}")));
    }
    if inst.blocks().is_empty() {
        return Err(CoreError::Hypothesis("no selection groups given".into()));
    }
    for (k, block) in inst.blocks().iter().enumerate() {
        if block.len() < r {
            return Err(CoreError::Hypothesis(format!(
                "group {k} has {} members, fewer than r = {r}",
                block.len()
            )));
        }
    }
    let nblocks = inst.block_count();
    let dims = inst.operators()[0].block_dims();
    // per-block hypothesis: sums stay below the identity
    for j in 0..nblocks {
        let mats: Vec<PsdMatrix> = inst.operators().iter().map(|t| t.blocks()[j].clone()).collect();
        let sum = psd_sum(dims[j], &mats)?;
        if !psd_order_leq(&sum, &HermitianMatrix::identity(dims[j]), opts.tol_psd)? {
            let top = sum.eigenvalues().last().copied().unwrap_or(0.0);
            return Err(CoreError::Hypothesis(format!(
                "block {j} sum exceeds the identity: largest eigenvalue {top}"
            )));
        }
    }

    let truncated: Vec<&[usize]> = inst.blocks().iter().map(|b| &b[..r]).collect();
    let eps_hat: Vec<f64> = inst.block_eps().iter().map(|e| e * r as f64).collect();

    // identity padding sized so the padded expectations stay below I:
    // p_j >= sum over groups of the mean trace slack in block j
    let mut mean_slack = vec![0.0f64; nblocks];
    for group in &truncated {
        for &i in *group {
            for j in 0..nblocks {
                let slack = eps_hat[j] - r as f64 * inst.operators()[i].blocks()[j].trace();
                mean_slack[j] += slack.max(0.0) / r as f64;
            }
        }
    }
    let pad: Vec<usize> = mean_slack.iter().map(|s| libm::ceil(*s).max(1.0) as usize).collect();

    let family_blocks: Vec<Vec<BlockDiagonalPsd>> = truncated
        .iter()
        .map(|group| {
            group
                .iter()
                .map(|&i| {
                    let op = &inst.operators()[i];
                    let mut padded = Vec::with_capacity(2 * nblocks);
                    for j in 0..nblocks {
                        let scaled = op.blocks()[j].scale(r as f64)?;
                        let slack = (eps_hat[j] - scaled.trace()).max(0.0);
                        let xi = slack / pad[j] as f64;
                        padded.push(scaled);
                        padded.push(PsdMatrix::new(
                            HermitianMatrix::identity(pad[j]).scale(xi),
                        )?);
                    }
                    BlockDiagonalPsd::new(padded)
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let padded_dim: usize = dims.iter().sum::<usize>() + pad.iter().sum::<usize>();
    let assignment = if opts.exact_route(family_blocks.len(), padded_dim) {
        let family: Vec<FiniteRandomPsd> = family_blocks
            .iter()
            .map(|outcomes| {
                FiniteRandomPsd::uniform(outcomes.iter().map(BlockDiagonalPsd::assemble).collect())
            })
            .collect::<Result<_>>()?;
        greedy_interlacing_select(&family, opts.tol_root)?
    } else {
        mean_field_select_block_diag(&family_blocks)?
    };

    let mut selected: Vec<usize> =
        truncated.iter().zip(&assignment.choices).map(|(g, &c)| g[c]).collect();
    selected.sort_unstable();

    let eps_sum: f64 = inst.block_eps().iter().sum();
    let mut achieved = Vec::with_capacity(nblocks);
    let mut promised = Vec::with_capacity(nblocks);
    for j in 0..nblocks {
        let mats: Vec<PsdMatrix> =
            selected.iter().map(|&i| inst.operators()[i].blocks()[j].clone()).collect();
        achieved.push(psd_sum(dims[j], &mats)?.operator_norm());
        promised.push(1.0 / r as f64 + inst.block_eps()[j] + 2.0 * libm::sqrt(eps_sum / r as f64));
    }
    let chosen_full: Vec<PsdMatrix> =
        selected.iter().map(|&i| inst.operators()[i].assemble()).collect();
    let total_dim: usize = dims.iter().sum();
    let cert = SelectorCertificate {
        selected,
        achieved_norm: achieved,
        promised_bound: promised,
        bound_formula: format!(
            "1/{r} + eps_j + 2*sqrt(sum(eps)/{r}) with eps = {:?}",
            inst.block_eps()
        ),
        method: assignment.method,
        witness_polynomial: witness_for(&chosen_full, total_dim, opts)?,
    };
    check_promise(&cert, opts.tol_root)?;
    Ok(cert)
}

/// Partition of the ground family obtained by duplicating every operator
/// into `n` compartments and selecting one copy each.
#[derive(Clone, Debug)]
pub struct PartitionCertificate {
    /// `parts[k]` lists the indices assigned to part `k`; the parts are
    /// disjoint and cover the ground set.
    pub parts: Vec<Vec<usize>>,
    /// For `n = 2`: the (equal) deviations `‖Σ_{S_k} T_i − T/2‖`. For
    /// `n ≥ 3`: per-part norms `‖Σ_{S_k} T_i‖`.
    pub achieved: Vec<f64>,
    pub promised: Vec<f64>,
    pub bound_formula: String,
    pub method: SelectionMethod,
}

/// Splits a trace-capped family into `n` parts by the duplication trick: `n`
/// copies of each operator live in `n` orthogonal compartments, a selector
/// picks one copy per operator, and the compartment of the chosen copy is
/// the part. For `n = 2` the parts deviate from `T/2` by at most `2√ε + ε`;
/// for `n ≥ 3` every part's norm is at most `(1/√n + √ε)²`.
pub fn partition_from_selector(
    operators: &[PsdMatrix],
    n: usize,
    opts: &SelectOptions,
) -> Result<PartitionCertificate> {
    if operators.is_empty() {
        return Err(CoreError::Invalid("nothing to partition".into()));
    }
    if n == 0 {
        return Err(CoreError::Invalid("cannot partition into zero parts".into()));
    }
    let d = operators[0].dim();
    let count = operators.len();
    let epsilon = operators.iter().map(PsdMatrix::trace).fold(0.0f64, f64::max);
    if n == 1 {
        // no claim beyond the trivial one: the single part carries the sum
        let total = psd_sum(d, operators)?.operator_norm();
        return Ok(PartitionCertificate {
            parts: vec![(0..count).collect()],
            achieved: vec![total],
            promised: vec![total],
            bound_formula: "single part carries the whole sum".into(),
            method: SelectionMethod::ExactInterlacing,
        });
    }

    // duplicated ground set: index i*n + k is copy k of operator i
    let duplicated: Vec<PsdMatrix> = (0..count * n)
        .map(|idx| {
            let (i, k) = (idx / n, idx % n);
            let mut m = CMat::zeros(n * d, n * d);
            m.view_mut((k * d, k * d), (d, d))
                .copy_from(operators[i].as_hermitian().as_matrix());
            PsdMatrix::new(HermitianMatrix::new(m)?)
        })
        .collect::<Result<_>>()?;
    let groups: Vec<Vec<usize>> = (0..count).map(|i| (i * n..(i + 1) * n).collect()).collect();
    let inst = SelectorInstance::new(duplicated, groups, epsilon)?;

    let (cert, formula, promised_each) = if n == 2 {
        let c = ks2_select(&inst, opts)?;
        let p = c.promised_bound[0];
        (c, format!("per part: 2*sqrt(eps) + eps with eps = {epsilon}"), p)
    } else {
        let c = weaver_ksr_select(&inst, n, opts)?;
        let p = c.promised_bound[0];
        (c, format!("per part: (1/sqrt({n}) + sqrt(eps))^2 with eps = {epsilon}"), p)
    };

    let mut parts = vec![Vec::new(); n];
    for &idx in &cert.selected {
        parts[idx % n].push(idx / n);
    }
    // the two-sided pair selector covers copies (i,0)/(i,1) only; for n = 2
    // every i lands in exactly one part either way
    if n == 2 {
        let assigned: usize = parts.iter().map(Vec::len).sum();
        debug_assert_eq!(assigned, count);
    }

    let total = psd_sum(d, operators)?;
    let mut achieved = Vec::with_capacity(n);
    for part in &parts {
        let mats: Vec<PsdMatrix> = part.iter().map(|&i| operators[i].clone()).collect();
        let sum = psd_sum(d, &mats)?;
        if n == 2 {
            achieved.push(sum.add(&total.scale(-0.5))?.operator_norm());
        } else {
            achieved.push(sum.operator_norm());
        }
    }
    let out = PartitionCertificate {
        parts,
        achieved: achieved.clone(),
        promised: vec![promised_each; n],
        bound_formula: formula,
        method: cert.method,
    };
    for (a, p) in out.achieved.iter().zip(&out.promised) {
        if *a > *p + opts.tol_root {
            return Err(CoreError::Invalid(format!(
                "partition missed its bound: achieved {a} > promised {p}"
            )));
        }
    }
    Ok(out)
}
