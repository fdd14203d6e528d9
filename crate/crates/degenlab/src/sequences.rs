//! Summable sequences with certified tails, the block modulator construction
//! dividing an l1 sequence by a c0 sequence while preserving its norm up to
//! `eps*(1 - delta/2) .. eps*(1 + delta)`, and the adversarial construction
//! showing no single c0 modulator works for every unit-norm l1 sequence.

use crate::modulus::{Modulus, ModulusError};

/// Hard cap on terms summed directly when certifying a norm.
const HEAD_SUM_CAP: u64 = 4_000_000;
/// Hard cap on block-start indices materialized by the modulator.
const BLOCK_START_CAP: u64 = 2_000_000;
/// Maximum number of blocks materialized by the modulator.
const BLOCK_COUNT_CAP: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum SequenceError {
    #[error("sequence has zero l1 norm")]
    ZeroSequence,
    #[error("tail oracle cannot certify precision {requested} (achieved {achieved})")]
    TailPrecision { requested: f64, achieved: f64 },
    #[error("modulator value at index {k} is outside the materialized coverage")]
    OutOfCoverage { k: u64 },
    #[error("search limit {limit} reached before the sequence decayed below {threshold}")]
    ScanLimit { limit: u64, threshold: f64 },
    #[error("sequence is not non-increasing at index {index}: {prev} -> {next}")]
    NotMonotone { index: u64, prev: f64, next: f64 },
    #[error("term ratios do not certify a geometric tail: ratio {ratio} at index {index}")]
    RatioUncertified { index: u64, ratio: f64 },
    #[error("invalid construction: {0}")]
    Invalid(String),
    #[error(transparent)]
    Modulus(#[from] ModulusError),
}

/// A value known within a certified symmetric error bar.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Certified {
    pub value: f64,
    pub error: f64,
}

impl Certified {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
    pub fn lo(&self) -> f64 {
        self.value - self.error
    }
    pub fn hi(&self) -> f64 {
        self.value + self.error
    }
}

#[derive(Debug, Clone)]
enum SeqKind {
    /// `a_k = ratio^k`, `0 < ratio < 1`; tails are exact.
    Geometric { ratio: f64 },
    /// `a_k = k^(-exponent)`, `exponent > 1`; tails bracketed by integrals.
    PowerDecay { exponent: f64 },
    /// Explicit finite support; exact suffix sums.
    Finite { terms: Vec<f64>, suffix: Vec<f64> },
    /// Positive combination of other sequences.
    Weighted { parts: Vec<(f64, SummableSequence)> },
    /// `a_k = sigma^{-1}(theta^k)` with a ratio-certified geometric tail;
    /// requires the observed term ratios to be < 1 and non-increasing.
    ThetaInverse { sigma: Box<Modulus>, theta: f64, inv_tol: f64 },
    /// Block sequence from the adversarial construction.
    Adversarial(std::sync::Arc<AdversarialBlocks>),
}

/// A positive sequence indexed from 1 with a certified tail oracle.
#[derive(Debug, Clone)]
pub struct SummableSequence {
    kind: SeqKind,
}

impl SummableSequence {
    pub fn geometric(ratio: f64) -> Result<Self, SequenceError> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(SequenceError::Invalid(format!("geometric ratio must lie in (0,1), got {ratio}")));
        }
        Ok(Self { kind: SeqKind::Geometric { ratio } })
    }

    pub fn power_decay(exponent: f64) -> Result<Self, SequenceError> {
        if !(exponent > 1.0) {
            return Err(SequenceError::Invalid(format!(
                "power decay exponent must exceed 1 for summability, got {exponent}"
            )));
        }
        Ok(Self { kind: SeqKind::PowerDecay { exponent } })
    }

    pub fn finite(terms: Vec<f64>) -> Result<Self, SequenceError> {
        if terms.iter().any(|&t| t < 0.0 || !t.is_finite()) {
            return Err(SequenceError::Invalid("finite sequence terms must be non-negative and finite".into()));
        }
        let mut suffix = vec![0.0; terms.len() + 1];
        for i in (0..terms.len()).rev() {
            suffix[i] = suffix[i + 1] + terms[i];
        }
        Ok(Self { kind: SeqKind::Finite { terms, suffix } })
    }

    pub fn weighted(parts: Vec<(f64, SummableSequence)>) -> Result<Self, SequenceError> {
        if parts.is_empty() {
            return Err(SequenceError::Invalid("weighted sequence needs at least one part".into()));
        }
        if parts.iter().any(|(w, _)| !(*w > 0.0) || !w.is_finite()) {
            return Err(SequenceError::Invalid("weights must be positive and finite".into()));
        }
        Ok(Self { kind: SeqKind::Weighted { parts } })
    }

    /// `a_k = sigma^{-1}(theta^k)`. For a power law the sequence is exactly
    /// geometric; otherwise a geometric tail is certified from the observed
    /// term ratios, which must be below one and non-increasing over the
    /// validation window (the concavity-type behaviour every inverse law in
    /// this crate exhibits).
    pub fn theta_inverse(sigma: &Modulus, theta: f64, inv_tol: f64) -> Result<Self, SequenceError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(SequenceError::Invalid(format!("theta must lie in (0,1), got {theta}")));
        }
        let seq = Self {
            kind: SeqKind::ThetaInverse { sigma: Box::new(sigma.clone()), theta, inv_tol },
        };
        // validate the ratio certificate on the window
        let mut prev_term = seq.term(1)?;
        let mut prev_ratio = f64::INFINITY;
        for k in 2..=65u64 {
            let t = seq.term(k)?;
            if prev_term <= 0.0 {
                break; // underflow: terms identically zero from here on
            }
            let ratio = t / prev_term;
            if ratio >= 1.0 {
                return Err(SequenceError::RatioUncertified { index: k, ratio });
            }
            if ratio > prev_ratio * (1.0 + 1e-9) {
                return Err(SequenceError::RatioUncertified { index: k, ratio });
            }
            prev_ratio = ratio;
            prev_term = t;
        }
        Ok(seq)
    }

    /// Term `a_k`, `k >= 1`.
    pub fn term(&self, k: u64) -> Result<f64, SequenceError> {
        if k == 0 {
            return Err(SequenceError::Invalid("sequence indices start at 1".into()));
        }
        match &self.kind {
            SeqKind::Geometric { ratio } => Ok((k as f64 * ratio.ln()).exp()),
            SeqKind::PowerDecay { exponent } => Ok((k as f64).powf(-exponent)),
            SeqKind::Finite { terms, .. } => Ok(terms.get((k - 1) as usize).copied().unwrap_or(0.0)),
            SeqKind::Weighted { parts } => {
                let mut s = 0.0;
                for (w, p) in parts {
                    s += w * p.term(k)?;
                }
                Ok(s)
            }
            SeqKind::ThetaInverse { sigma, theta, inv_tol, .. } => {
                let y = (k as f64 * theta.ln()).exp();
                if y == 0.0 {
                    return Ok(0.0);
                }
                Ok(sigma.inverse_evaluate(y, *inv_tol)?)
            }
            SeqKind::Adversarial(blocks) => blocks.term(k),
        }
    }

    /// Certified upper bound on `sum_{k >= n} a_k`.
    pub fn tail(&self, n: u64) -> Result<f64, SequenceError> {
        self.tail_bounds(n).map(|(_, hi)| hi)
    }

    /// Certified `(lower, upper)` bounds on `sum_{k >= n} a_k`.
    pub fn tail_bounds(&self, n: u64) -> Result<(f64, f64), SequenceError> {
        if n == 0 {
            return Err(SequenceError::Invalid("sequence indices start at 1".into()));
        }
        match &self.kind {
            SeqKind::Geometric { ratio } => {
                let t = (n as f64 * ratio.ln()).exp() / (1.0 - ratio);
                Ok((t, t))
            }
            SeqKind::PowerDecay { exponent } => {
                // Euler-Maclaurin bracket for sum_{k>=n} k^-p: the remainder
                // after the B2 term is negative and dominated by the B4 term
                // for completely monotone integrands.
                let p = *exponent;
                let nf = n as f64;
                let integral = nf.powf(1.0 - p) / (p - 1.0);
                let s = integral + 0.5 * nf.powf(-p) + p * nf.powf(-p - 1.0) / 12.0;
                let b4 = p * (p + 1.0) * (p + 2.0) * nf.powf(-p - 3.0) / 720.0;
                Ok(((s - b4).max(integral), s))
            }
            SeqKind::Finite { suffix, .. } => {
                let idx = ((n - 1) as usize).min(suffix.len() - 1);
                Ok((suffix[idx], suffix[idx]))
            }
            SeqKind::Weighted { parts } => {
                let mut lo = 0.0;
                let mut hi = 0.0;
                for (w, p) in parts {
                    let (l, h) = p.tail_bounds(n)?;
                    lo += w * l;
                    hi += w * h;
                }
                Ok((lo, hi))
            }
            SeqKind::ThetaInverse { .. } => {
                let t_n = self.term(n)?;
                if t_n == 0.0 {
                    return Ok((0.0, 0.0));
                }
                let t_next = self.term(n + 1)?;
                let ratio = t_next / t_n;
                if ratio >= 1.0 {
                    return Err(SequenceError::RatioUncertified { index: n + 1, ratio });
                }
                // ratios are non-increasing, so the tail is dominated by the
                // geometric series at the local ratio
                Ok((t_n, t_n / (1.0 - ratio)))
            }
            SeqKind::Adversarial(blocks) => blocks.tail(n),
        }
    }

    /// Certified l1 norm: returns `S` with `|S - ||a||_1| <= error <= precision`.
    pub fn l1_norm(&self, precision: f64) -> Result<Certified, SequenceError> {
        if !(precision > 0.0) {
            return Err(SequenceError::Invalid("precision must be positive".into()));
        }
        let cert = self.l1_norm_best_effort()?;
        if cert.error > precision {
            return Err(SequenceError::TailPrecision { requested: precision, achieved: cert.error });
        }
        Ok(cert)
    }

    /// Certified l1 norm at the best precision reachable within the term
    /// budget.
    pub fn l1_norm_best_effort(&self) -> Result<Certified, SequenceError> {
        // exact short-cuts
        match &self.kind {
            SeqKind::Geometric { ratio } => {
                let v = ratio / (1.0 - ratio);
                return Ok(Certified { value: v, error: v * 1e-15 });
            }
            SeqKind::Finite { suffix, .. } => {
                return Ok(Certified { value: suffix[0], error: suffix[0] * 1e-15 });
            }
            SeqKind::Adversarial(blocks) => return Ok(blocks.norm()),
            _ => {}
        }
        let mut n = 64u64;
        loop {
            let (lo, hi) = self.tail_bounds(n)?;
            let width = hi - lo;
            if width <= 1e-11 * (hi + 1.0) || n >= HEAD_SUM_CAP {
                let mut head = 0.0f64;
                for k in 1..n {
                    head += self.term(k)?;
                }
                let dust = head.abs() * 1e-14 + 1e-300;
                return Ok(Certified { value: head + 0.5 * (lo + hi), error: 0.5 * width + dust });
            }
            n *= 2;
        }
    }
}

/// The c0 divider sequence: constant `1/eps` up to the second block start,
/// then halving block by block.
#[derive(Debug, Clone)]
pub struct Modulator {
    epsilon: f64,
    /// Materialized block start indices `n_1 < n_2 < ...`.
    block_starts: Vec<u64>,
    /// Values `c(k)` are certain for `k` below this bound.
    coverage: u64,
}

impl Modulator {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn block_starts(&self) -> &[u64] {
        &self.block_starts
    }

    pub fn coverage(&self) -> u64 {
        self.coverage
    }

    /// Index of the block containing `k` (0 = head, before the first start).
    pub fn block_index(&self, k: u64) -> usize {
        self.block_starts.iter().take_while(|&&s| s <= k).count()
    }

    /// `c(k)`: `1/eps` on the head and first block, halving afterwards.
    pub fn c(&self, k: u64) -> Result<f64, SequenceError> {
        if k == 0 {
            return Err(SequenceError::Invalid("sequence indices start at 1".into()));
        }
        if k >= self.coverage {
            return Err(SequenceError::OutOfCoverage { k });
        }
        let j = self.block_index(k);
        let halvings = j.saturating_sub(1) as i32;
        Ok(0.5f64.powi(halvings) / self.epsilon)
    }

    pub fn max_c(&self) -> f64 {
        1.0 / self.epsilon
    }
}

/// Result of the modulator construction with certified norm accounting.
#[derive(Debug, Clone)]
pub struct ModulatorResult {
    pub modulator: Modulator,
    pub epsilon: f64,
    pub delta: f64,
    /// Certified interval for the input norm `||a||_1`.
    pub a_norm: Certified,
    /// Certified interval containing the true `||a/c||_1`.
    pub b_norm: Certified,
    /// Theoretical bounds `[eps(1-delta/2)||a||, eps(1+delta)||a||]`.
    pub b_norm_bounds: (f64, f64),
    /// Certified upper bound on `sum_{k >= n_J} a_k / c_k` beyond the last
    /// materialized block.
    pub b_tail_beyond_blocks: f64,
}

impl ModulatorResult {
    /// Certified upper bound on `sum_{k >= n} a_k/c_k`, used by downstream
    /// tail accounting.
    pub fn b_tail_from(&self, a: &SummableSequence, n: u64) -> Result<f64, SequenceError> {
        let starts = self.modulator.block_starts();
        let last = *starts.last().unwrap();
        if n >= last {
            return Ok(self.b_tail_beyond_blocks);
        }
        let mut total = 0.0;
        // head segment [n, n_1): divisor is 1/eps there
        let n1 = starts[0];
        if n < n1 {
            let (_, from_n) = a.tail_bounds(n)?;
            let (at_n1, _) = a.tail_bounds(n1)?;
            total += self.epsilon * (from_n - at_n1).max(0.0);
        }
        // materialized blocks intersecting [n, last)
        for (idx, window) in starts.windows(2).enumerate() {
            let j = idx + 1;
            if window[1] <= n {
                continue;
            }
            let lo = window[0].max(n);
            let mult = 2f64.powi(j as i32 - 1) * self.epsilon;
            let (_, t_lo_hi) = a.tail_bounds(lo)?;
            let (t_hi_lo, _) = a.tail_bounds(window[1])?;
            total += mult * (t_lo_hi - t_hi_lo).max(0.0);
        }
        Ok(total + self.b_tail_beyond_blocks)
    }
}

fn find_block_start(
    tail_hi: &dyn Fn(u64) -> Result<f64, SequenceError>,
    threshold: f64,
    min_start: u64,
    cap: u64,
) -> Result<Option<u64>, SequenceError> {
    if tail_hi(cap)? >= threshold {
        return Ok(None);
    }
    // least n in [min_start, cap] with tail_hi(n) < threshold (monotone)
    let (mut lo, mut hi) = (min_start, cap);
    if tail_hi(lo)? < threshold {
        return Ok(Some(lo));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if tail_hi(mid)? < threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Builds the block modulator for one sequence: block starts `n_j` are the
/// least indices with `tail(n_j) < delta ||a|| / 2^(2j-1)`, and `c` halves
/// from `1/eps` block by block. The divided sequence `b = a/c` then satisfies
/// `eps(1-delta/2)||a|| <= ||b|| <= eps(1+delta)||a||`.
pub fn modulator(a: &SummableSequence, epsilon: f64, delta: f64) -> Result<ModulatorResult, SequenceError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(SequenceError::Invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SequenceError::Invalid(format!("delta must lie in (0,1), got {delta}")));
    }
    let a_norm = a.l1_norm_best_effort()?;
    if a_norm.lo() <= 0.0 {
        return Err(SequenceError::ZeroSequence);
    }
    build_modulator(std::slice::from_ref(a), a_norm, epsilon, delta).map(|mut v| v.pop().unwrap())
}

/// Compact-family variant: one modulator valid for every member, with block
/// thresholds driven by the smallest norm in the family. Returns the
/// per-member results sharing the same `Modulator`.
pub fn modulator_for_family(
    family: &[SummableSequence],
    epsilon: f64,
    delta: f64,
) -> Result<Vec<ModulatorResult>, SequenceError> {
    if family.is_empty() {
        return Err(SequenceError::Invalid("family must be non-empty".into()));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(SequenceError::Invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SequenceError::Invalid(format!("delta must lie in (0,1), got {delta}")));
    }
    // r = inf of norms over the family; certified from below
    let mut r = Certified { value: f64::INFINITY, error: 0.0 };
    for m in family {
        let n = m.l1_norm_best_effort()?;
        if n.lo() <= 0.0 {
            return Err(SequenceError::ZeroSequence);
        }
        if n.lo() < r.lo() {
            r = n;
        }
    }
    build_modulator(family, r, epsilon, delta)
}

fn build_modulator(
    members: &[SummableSequence],
    r: Certified,
    epsilon: f64,
    delta: f64,
) -> Result<Vec<ModulatorResult>, SequenceError> {
    let tail_hi = |n: u64| -> Result<f64, SequenceError> {
        let mut worst = 0.0f64;
        for m in members {
            worst = worst.max(m.tail(n)?);
        }
        Ok(worst)
    };

    let mut starts: Vec<u64> = Vec::new();
    let mut min_start = 1u64;
    let mut search_exhausted = false;
    for j in 1..=BLOCK_COUNT_CAP {
        let threshold = delta * r.lo() / 2f64.powi(2 * j as i32 - 1);
        if threshold <= 0.0 {
            break;
        }
        match find_block_start(&tail_hi, threshold, min_start, BLOCK_START_CAP)? {
            Some(n) => {
                starts.push(n);
                min_start = n + 1;
            }
            None => {
                search_exhausted = true;
                break;
            }
        }
    }
    if starts.is_empty() {
        let achieved = tail_hi(BLOCK_START_CAP)?;
        return Err(SequenceError::TailPrecision { requested: delta * r.lo() / 2.0, achieved });
    }
    let blocks_found = starts.len();
    // When the next threshold was shown unreachable within the index cap the
    // last block provably extends to the cap; otherwise the next start is
    // simply unknown and c is only certain strictly below the last start.
    let coverage = if search_exhausted { BLOCK_START_CAP } else { *starts.last().unwrap() };
    let modulator = Modulator { epsilon, block_starts: starts, coverage };

    let mut out = Vec::with_capacity(members.len());
    for m in members {
        let a_norm = m.l1_norm_best_effort()?;
        // head: direct sum of eps * a_k below n_1
        let n1 = modulator.block_starts[0];
        let mut head = 0.0f64;
        for k in 1..n1 {
            head += m.term(k)?;
        }
        let head_dust = head * 1e-14;
        // materialized blocks: 2^{j-1} eps * (tail(n_j) - tail(n_{j+1})) via
        // certified tail intervals
        let mut blocks_lo = 0.0f64;
        let mut blocks_hi = 0.0f64;
        for (idx, w) in modulator.block_starts.windows(2).enumerate() {
            let j = idx + 1;
            let mult = 2f64.powi(j as i32 - 1) * epsilon;
            let (s_lo, s_hi) = m.tail_bounds(w[0])?;
            let (e_lo, e_hi) = m.tail_bounds(w[1])?;
            blocks_lo += mult * (s_lo - e_hi).max(0.0);
            blocks_hi += mult * (s_hi - e_lo).max(0.0);
        }
        // allowance for everything at or beyond the last materialized start:
        // each remaining block j contributes under eps*delta*||a||/2^j
        let rest = epsilon * delta * a_norm.hi() * 2f64.powi(1 - blocks_found as i32);
        let b_lo = epsilon * (head - head_dust) + blocks_lo;
        let b_hi = epsilon * (head + head_dust) + blocks_hi + rest;
        let b_norm = Certified { value: 0.5 * (b_lo + b_hi), error: 0.5 * (b_hi - b_lo) };
        let bounds = (
            epsilon * (1.0 - 0.5 * delta) * a_norm.value,
            epsilon * (1.0 + delta) * a_norm.value,
        );
        out.push(ModulatorResult {
            modulator: modulator.clone(),
            epsilon,
            delta,
            a_norm,
            b_norm,
            b_norm_bounds: bounds,
            b_tail_beyond_blocks: rest,
        });
    }
    Ok(out)
}

/// A positive sequence tending to zero, fed to the adversarial construction.
/// `first_below` gives, in log-index space, the least index past which the
/// sequence stays under a threshold; without it the construction scans,
/// requiring the sampled prefix to be non-increasing.
#[derive(Clone)]
pub struct VanishingSequence {
    eval: std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `ln` of the least index `n` with `c_j < eps` for all `j >= n`.
    first_below_ln: Option<std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    scan_limit: u64,
}

impl std::fmt::Debug for VanishingSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VanishingSequence")
            .field("has_threshold_oracle", &self.first_below_ln.is_some())
            .field("scan_limit", &self.scan_limit)
            .finish()
    }
}

impl VanishingSequence {
    /// `c_j = 1/j`.
    pub fn reciprocal() -> Self {
        Self {
            eval: std::sync::Arc::new(|j| 1.0 / j),
            first_below_ln: Some(std::sync::Arc::new(|eps: f64| (-eps.ln()).max(0.0) + 1e-9)),
            scan_limit: 0,
        }
    }

    /// `c_j = ratio^j`.
    pub fn geometric(ratio: f64) -> Self {
        Self {
            eval: std::sync::Arc::new(move |j| (j * ratio.ln()).exp()),
            first_below_ln: Some(std::sync::Arc::new(move |eps: f64| {
                ((eps.ln() / ratio.ln()) + 1.0).max(1.0).ln()
            })),
            scan_limit: 0,
        }
    }

    /// `c_j = 1/ln(j+1)`; decays so slowly that the qualifying indices are
    /// astronomically large, exercising the log-index bookkeeping.
    pub fn reciprocal_log() -> Self {
        Self {
            eval: std::sync::Arc::new(|j| 1.0 / (j + 1.0).ln()),
            // need ln(j+1) > 1/eps, i.e. ln j ~ 1/eps
            first_below_ln: Some(std::sync::Arc::new(|eps: f64| 1.0 / eps + 1e-9)),
            scan_limit: 0,
        }
    }

    /// Arbitrary evaluator; thresholds found by scanning up to `scan_limit`.
    /// The scanned prefix must be non-increasing.
    pub fn from_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(eval: F, scan_limit: u64) -> Self {
        Self { eval: std::sync::Arc::new(eval), first_below_ln: None, scan_limit }
    }

    pub fn value(&self, j: f64) -> f64 {
        (self.eval)(j)
    }

    fn first_below(&self, eps: f64) -> Result<f64, SequenceError> {
        if let Some(f) = &self.first_below_ln {
            return Ok(f(eps).max(0.0));
        }
        let mut prev = f64::INFINITY;
        for j in 1..=self.scan_limit {
            let v = (self.eval)(j as f64);
            if v > prev * (1.0 + 1e-12) {
                return Err(SequenceError::NotMonotone { index: j, prev, next: v });
            }
            prev = v;
            if v < eps {
                return Ok((j as f64).ln());
            }
        }
        Err(SequenceError::ScanLimit { limit: self.scan_limit, threshold: eps })
    }
}

/// One block of the adversarial sequence, tracked in log-index space so the
/// construction survives indices far beyond `f64` (let alone `u64`) range.
#[derive(Debug, Clone)]
pub struct AdversarialBlock {
    pub k: u32,
    /// `ln n_k`.
    pub ln_start: f64,
    /// `ln n_{k+1}`.
    pub ln_end: f64,
    /// Exact block mass `2^{-(k+1)}`.
    pub mass: f64,
    /// Constant term value on the block (0.0 when it underflows).
    pub value: f64,
    /// Certified lower bound `2^{k+2}` on `sum_block a_j/c_j`.
    pub divergence_contribution: f64,
}

#[derive(Debug)]
pub struct AdversarialBlocks {
    /// `ln n_1`.
    ln_first: f64,
    head_value: f64,
    blocks: Vec<AdversarialBlock>,
}

impl AdversarialBlocks {
    fn term(&self, j: u64) -> Result<f64, SequenceError> {
        let lj = (j as f64).ln();
        if lj < self.ln_first {
            return Ok(self.head_value);
        }
        for b in &self.blocks {
            if lj < b.ln_end {
                return Ok(b.value);
            }
        }
        Err(SequenceError::OutOfCoverage { k: j })
    }

    fn tail(&self, n: u64) -> Result<(f64, f64), SequenceError> {
        // exact mass bookkeeping: head 1/2, block k carries 2^{-(k+1)},
        // everything beyond the materialized blocks carries the remaining
        // 2^{-(K+1)} by the construction rule.
        let ln_n = (n as f64).ln();
        if ln_n < self.ln_first {
            let head_remaining = self.head_value * ((self.ln_first.exp() - n as f64).max(0.0));
            let t = head_remaining + 0.5;
            return Ok((t, t));
        }
        let mut t = final_mass_after(self.blocks.len());
        for b in self.blocks.iter().rev() {
            if ln_n >= b.ln_end {
                return Ok((t, t));
            }
            if ln_n >= b.ln_start {
                // remaining entries of the block at or past n
                let inside = if b.ln_end < 36.0 {
                    b.value * ((b.ln_end.exp() - n as f64).max(0.0))
                } else {
                    b.mass // the block end is beyond any queryable index
                };
                let total = t + inside;
                return Ok((total, total));
            }
            t += b.mass;
        }
        Ok((t + 0.5, t + 0.5))
    }

    fn norm(&self) -> Certified {
        // 1/2 + sum 2^{-(k+1)} over all blocks (materialized and not) = 1
        Certified { value: 1.0, error: 1e-14 }
    }
}

fn final_mass_after(block_count: usize) -> f64 {
    // mass carried by blocks k > block_count
    0.5f64.powi(block_count as i32 + 1)
}

/// Output of the adversarial construction: a monotone unit-norm sequence
/// whose division by the given c0 sequence has partial sums past `target`.
#[derive(Debug)]
pub struct AdversarialResult {
    pub sequence: SummableSequence,
    pub blocks: Vec<AdversarialBlock>,
    /// `ln` of the index at which the certified partial sum exceeds the target.
    pub divergence_index_ln: f64,
    /// The same index as `u64` when representable.
    pub divergence_index: Option<u64>,
    /// Certified lower bound on the partial sum of `a_j/c_j` at that index.
    pub certified_partial_sum: f64,
}

/// For a c0 sequence `c`, builds a monotone `a` with `||a||_1 = 1` whose
/// division `a/c` has partial sums exceeding `target`: block `k` lives where
/// `c < 2^{-(2k+3)}` and carries mass `2^{-(k+1)}`, so it contributes at
/// least `2^{k+2}`.
pub fn adversarial_for(c: &VanishingSequence, target: f64) -> Result<AdversarialResult, SequenceError> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(SequenceError::Invalid(format!("target must be positive and finite, got {target}")));
    }
    // enough blocks to pass the target plus enough for norm bookkeeping
    let mut needed = 1u32;
    let mut acc = 0.0;
    while acc <= target {
        acc += 2f64.powi(needed as i32 + 2);
        needed += 1;
    }
    let block_count = (needed + 1).max(40);

    // Indices live in log space; integer-round the boundaries while they fit
    // in exact f64 range so small blocks have exact masses.
    const LN_EXACT: f64 = 36.0; // e^36 < 2^53
    let round_up = |ln_n: f64| -> f64 {
        if ln_n < LN_EXACT {
            ln_n.exp().ceil().ln()
        } else {
            ln_n
        }
    };
    let mut ln_starts = Vec::with_capacity(block_count as usize + 1);
    let mut prev_ln: f64 = 2f64.ln(); // n_1 >= 2 so the head is non-empty
    let mut prev_len_ln = 0.0; // ln(n_1 - 1) once k = 1 is placed
    let mut target_certified = 0.0;
    for k in 1..=block_count + 1 {
        let eps = 2f64.powi(-(2 * k as i32 + 3));
        let found = match c.first_below(eps) {
            Ok(v) => v,
            // a scan may stop early once enough complete blocks certify the
            // target (the sequence continues by the same rule)
            Err(e) => {
                if target_certified > target && ln_starts.len() >= 2 {
                    break;
                }
                return Err(e);
            }
        };
        let mut ln_n = round_up(found.max(prev_ln));
        if k > 1 {
            // enforce strictly growing block lengths so a stays monotone
            let min_next = round_up(ln_add(prev_ln, ln_add(prev_len_ln, 0.0))); // n_k + len + 1
            if ln_n < min_next {
                ln_n = min_next;
            }
            prev_len_ln = ln_sub(ln_n, prev_ln);
            target_certified += 2f64.powi(k as i32 - 1 + 2); // completed block k-1
        } else {
            prev_len_ln = ln_sub(ln_n, 0.0); // ln(n_1 - 1)
        }
        ln_starts.push(ln_n);
        prev_ln = ln_n;
    }

    let ln_first = ln_starts[0];
    let head_len_ln = ln_sub(ln_first, 0.0); // ln(n_1 - 1)
    let head_value = (-(2f64.ln()) - head_len_ln).exp();

    let complete_blocks = (ln_starts.len() - 1) as u32;
    let mut blocks = Vec::with_capacity(complete_blocks as usize);
    let mut certified = 0.0;
    let mut divergence_index_ln = f64::NAN;
    for k in 1..=complete_blocks {
        let ln_start = ln_starts[(k - 1) as usize];
        let ln_end = ln_starts[k as usize];
        let mass = 0.5f64.powi(k as i32 + 1);
        let len_ln = ln_sub(ln_end, ln_start);
        let value = (mass.ln() - len_ln).exp();
        let contribution = 2f64.powi(k as i32 + 2);
        blocks.push(AdversarialBlock {
            k,
            ln_start,
            ln_end,
            mass,
            value,
            divergence_contribution: contribution,
        });
        if divergence_index_ln.is_nan() {
            certified += contribution;
            if certified > target {
                // partial sums pass the target by the end of block k
                divergence_index_ln = ln_sub(ln_end, 0.0);
            }
        }
    }
    let divergence_index = if divergence_index_ln < 2f64.powi(53).ln() {
        Some(divergence_index_ln.exp().round() as u64)
    } else {
        None
    };
    let result_blocks = blocks.clone();
    let seq = SummableSequence {
        kind: SeqKind::Adversarial(std::sync::Arc::new(AdversarialBlocks {
            ln_first,
            head_value,
            blocks,
        })),
    };
    Ok(AdversarialResult {
        sequence: seq,
        blocks: result_blocks,
        divergence_index_ln,
        divergence_index,
        certified_partial_sum: certified,
    })
}

/// `ln(e^a + e^b + ... )` helpers for index arithmetic: `ln_add(a, b)` is
/// `ln(e^a + e^b)` with `b = 0` meaning `+1`.
fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a > b`.
fn ln_sub(a: f64, b: f64) -> f64 {
    debug_assert!(a > b);
    a + (-(b - a).exp()).ln_1p()
}
