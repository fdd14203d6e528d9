//! Monotone bisection with certified brackets.

/// Outcome of a bracketed bisection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectResult {
    /// Midpoint of the final bracket.
    pub root: f64,
    /// Half-width of the final bracket; the true root lies within
    /// `root ± error`.
    pub error: f64,
    /// Function value at `root`.
    pub residual: f64,
    pub iterations: usize,
}

/// Errors raised by the bracketing routines.
#[derive(Debug, thiserror::Error)]
pub enum BisectError {
    #[error("invalid bracket [{lo}, {hi}]: endpoints must be finite with lo < hi")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {flo}, f(hi) = {fhi}")]
    NoSignChange { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("function returned a non-finite value at {x}")]
    NonFinite { x: f64 },
}

/// Finds a root of `f` on `[lo, hi]` assuming `f(lo) <= 0 <= f(hi)` up to
/// sign flips. Runs until the bracket width drops below `tol` (absolute).
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BisectResult, BisectError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(BisectError::InvalidBracket { lo, hi });
    }
    let mut flo = f(lo);
    let fhi = f(hi);
    if !flo.is_finite() {
        return Err(BisectError::NonFinite { x: lo });
    }
    if !fhi.is_finite() {
        return Err(BisectError::NonFinite { x: hi });
    }
    if flo == 0.0 {
        return Ok(BisectResult { root: lo, error: 0.0, residual: 0.0, iterations: 0 });
    }
    if fhi == 0.0 {
        return Ok(BisectResult { root: hi, error: 0.0, residual: 0.0, iterations: 0 });
    }
    if flo.signum() == fhi.signum() {
        return Err(BisectError::NoSignChange { lo, hi, flo, fhi });
    }
    let mut n = 0;
    while hi - lo > tol && n < max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket width below float resolution
        }
        let fmid = f(mid);
        if !fmid.is_finite() {
            return Err(BisectError::NonFinite { x: mid });
        }
        if fmid == 0.0 {
            return Ok(BisectResult { root: mid, error: 0.0, residual: 0.0, iterations: n });
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
        n += 1;
    }
    let root = 0.5 * (lo + hi);
    Ok(BisectResult { root, error: 0.5 * (hi - lo), residual: f(root), iterations: n })
}

/// Left-continuous generalized inverse by bisection on a monotone predicate.
///
/// Returns an approximation of `inf { t in [lo, hi] : pred(t) }` assuming the
/// predicate is false at `lo`, true at `hi`, and monotone in between. The
/// result is the bracket midpoint, within `tol/2` of the infimum.
pub fn bisect_predicate<P: FnMut(f64) -> bool>(
    mut pred: P,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
