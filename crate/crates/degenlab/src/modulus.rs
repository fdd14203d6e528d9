//! Moduli of continuity: evaluation, generalized inversion, and certification
//! of the Dini condition `∫₀^τ ω(t)/t dt < ∞`.
//!
//! A modulus here is an increasing function on `(0, T]` vanishing at `0⁺`.
//! The Dini integral is bracketed through its geometric-sum characterization:
//! partial sums of `ω(τ·θⁿ)` give a certified lower bound, and a per-family
//! tail oracle closes the upper bound. Divergence is certified in closed form
//! where partial sums grow too slowly to reach the cap by direct summation.

use crate::bisect::bisect_predicate;

/// Smallest argument probed when bracketing a generalized inverse.
const INVERSE_FLOOR: f64 = 1e-300;

#[derive(Debug, thiserror::Error)]
pub enum ModulusError {
    #[error("argument {t} outside the domain (0, {domain_end}]")]
    Domain { t: f64, domain_end: f64 },
    #[error("evaluation at {t} produced a non-finite value")]
    NonFinite { t: f64 },
    #[error("target {y} exceeds the supremum {sup} of the modulus range")]
    OutOfRange { y: f64, sup: f64 },
    #[error("evaluator is not monotone: w({s}) = {ws} > w({t}) = {wt} beyond tolerance")]
    NotMonotone { s: f64, ws: f64, t: f64, wt: f64 },
    #[error("invalid construction: {0}")]
    Invalid(String),
    #[error("law is not normalized: sigma(1) = {value} < 1")]
    NotNormalized { value: f64 },
    #[error("sandwich C^-1*rho <= sigma <= C*rho fails at t = {witness}: sigma = {sigma}, rho = {rho}, C = {c}")]
    SandwichViolated { witness: f64, sigma: f64, rho: f64, c: f64 },
    #[error("no generalized inverse is defined for a constant modulus")]
    ConstantNotInvertible,
}

/// Functional form of a modulus of continuity.
#[derive(Debug, Clone)]
pub enum ModulusKind {
    /// `t^alpha`, `alpha > 0`.
    Power { alpha: f64 },
    /// `(1 - ln t)^(-alpha)` on `(0, 1]`; Dini exactly when `alpha > 1`.
    LogPower { alpha: f64 },
    /// Truncated generalized power series `sum_j a_j t^(g_j)` with positive
    /// coefficients and exponents; `tail_bound` bounds the dropped terms on
    /// the whole domain.
    PowerSeries { coefficients: Vec<f64>, exponents: Vec<f64>, tail_bound: f64 },
    /// Truncation of `sum_n (1/(2^n n)) (1 - ln t)^(-(1+1/n))`, a Dini
    /// modulus dominating every `(1 - ln t)^(-alpha)`.
    TildePhi { terms: usize },
    /// Constant level; stands in for a degeneracy-free (uniformly elliptic)
    /// cap and is not a genuine modulus (it does not vanish at zero).
    Constant { level: f64 },
    /// Piecewise-linear interpolation of sorted knots `(t, w)`, extended
    /// linearly to the origin below the first knot.
    Tabulated { knots: Vec<(f64, f64)> },
    /// `t -> inner(arg_factor * t)`.
    Scaled { inner: Box<Modulus>, arg_factor: f64 },
    /// `t -> factor * inner(t)`.
    VScaled { inner: Box<Modulus>, factor: f64 },
    /// `t -> t * inner(t)`.
    TimesArg { inner: Box<Modulus> },
    /// Generalized (left-continuous) inverse of `inner`.
    InverseOf { inner: Box<Modulus>, tol: f64 },
}

/// An increasing function on `(0, T]` with `w(0+) = 0`.
#[derive(Debug, Clone)]
pub struct Modulus {
    kind: ModulusKind,
    domain_end: f64,
    monotone_tol: f64,
}

impl Modulus {
    pub fn power(alpha: f64, domain_end: f64) -> Result<Self, ModulusError> {
        if !(alpha > 0.0) {
            return Err(ModulusError::Invalid(format!("power exponent must be positive, got {alpha}")));
        }
        if !(domain_end > 0.0) {
            return Err(ModulusError::Invalid(format!("domain end must be positive, got {domain_end}")));
        }
        Ok(Self { kind: ModulusKind::Power { alpha }, domain_end, monotone_tol: 0.0 })
    }

    pub fn log_power(alpha: f64, domain_end: f64) -> Result<Self, ModulusError> {
        if !(alpha > 0.0) {
            return Err(ModulusError::Invalid(format!("log-power exponent must be positive, got {alpha}")));
        }
        if !(domain_end > 0.0 && domain_end <= 1.0) {
            return Err(ModulusError::Invalid(format!(
                "log-power domain end must lie in (0, 1], got {domain_end}"
            )));
        }
        Ok(Self { kind: ModulusKind::LogPower { alpha }, domain_end, monotone_tol: 0.0 })
    }

    /// Truncated generalized power series with a caller-supplied bound on the
    /// dropped tail (valid on all of `(0, domain_end]`).
    pub fn power_series(
        coefficients: Vec<f64>,
        exponents: Vec<f64>,
        tail_bound: f64,
        domain_end: f64,
    ) -> Result<Self, ModulusError> {
        if coefficients.is_empty() || coefficients.len() != exponents.len() {
            return Err(ModulusError::Invalid(
                "power series needs matching, non-empty coefficient and exponent lists".into(),
            ));
        }
        if coefficients.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(ModulusError::Invalid("power series coefficients must be positive".into()));
        }
        if exponents.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(ModulusError::Invalid("power series exponents must be positive".into()));
        }
        if !(tail_bound >= 0.0) {
            return Err(ModulusError::Invalid("power series tail bound must be non-negative".into()));
        }
        if !(domain_end > 0.0) {
            return Err(ModulusError::Invalid("domain end must be positive".into()));
        }
        Ok(Self {
            kind: ModulusKind::PowerSeries { coefficients, exponents, tail_bound },
            domain_end,
            monotone_tol: 0.0,
        })
    }

    /// The classic series `sum_j 2^(-j) t^(1/j)` truncated to `terms` terms.
    pub fn root_series(terms: usize) -> Result<Self, ModulusError> {
        if terms == 0 {
            return Err(ModulusError::Invalid("root series needs at least one term".into()));
        }
        let coefficients: Vec<f64> = (1..=terms).map(|j| 0.5f64.powi(j as i32)).collect();
        let exponents: Vec<f64> = (1..=terms).map(|j| 1.0 / j as f64).collect();
        // On (0, 1] every dropped term is at most its coefficient.
        let tail_bound = 0.5f64.powi(terms as i32);
        Self::power_series(coefficients, exponents, tail_bound, 1.0)
    }

    /// Truncation of the log-power series whose full Dini integral over
    /// `(0, 1]` is exactly 1 (coefficient `1/(2^n n)` against the exact
    /// normalizer `n` of each log-power term).
    pub fn tilde_phi(terms: usize) -> Result<Self, ModulusError> {
        if terms == 0 {
            return Err(ModulusError::Invalid("tilde-phi needs at least one term".into()));
        }
        Ok(Self { kind: ModulusKind::TildePhi { terms }, domain_end: 1.0, monotone_tol: 0.0 })
    }

    /// Constant cap; models a uniformly elliptic (degeneracy-free) law.
    pub fn constant(level: f64) -> Result<Self, ModulusError> {
        if !(level > 0.0) || !level.is_finite() {
            return Err(ModulusError::Invalid(format!("constant level must be positive, got {level}")));
        }
        Ok(Self { kind: ModulusKind::Constant { level }, domain_end: f64::INFINITY, monotone_tol: 0.0 })
    }

    /// Tabulated modulus from `(t, w)` knots sorted by `t`; weak monotonicity
    /// is enforced up to `monotone_tol`.
    pub fn tabulated(knots: Vec<(f64, f64)>, monotone_tol: f64) -> Result<Self, ModulusError> {
        if knots.is_empty() {
            return Err(ModulusError::Invalid("tabulated modulus needs at least one knot".into()));
        }
        for &(t, w) in &knots {
            if !(t > 0.0 && t.is_finite()) || !(w > 0.0 && w.is_finite()) {
                return Err(ModulusError::Invalid(format!("tabulated knot ({t}, {w}) must be positive and finite")));
            }
        }
        for pair in knots.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(ModulusError::Invalid("tabulated abscissae must be strictly increasing".into()));
            }
            if pair[1].1 < pair[0].1 - monotone_tol {
                return Err(ModulusError::NotMonotone {
                    s: pair[0].0,
                    ws: pair[0].1,
                    t: pair[1].0,
                    wt: pair[1].1,
                });
            }
        }
        let domain_end = knots.last().unwrap().0;
        Ok(Self { kind: ModulusKind::Tabulated { knots }, domain_end, monotone_tol })
    }

    /// Parses a two-column CSV `t,w` (header line optional) into a tabulated
    /// modulus.
    pub fn tabulated_from_csv(text: &str, monotone_tol: f64) -> Result<Self, ModulusError> {
        let mut knots = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let a = parts.next().map(str::trim).unwrap_or("");
            let b = parts.next().map(str::trim).unwrap_or("");
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(t), Ok(w)) => knots.push((t, w)),
                _ if i == 0 => continue, // header
                _ => {
                    return Err(ModulusError::Invalid(format!("cannot parse CSV line {}: {line:?}", i + 1)));
                }
            }
        }
        Self::tabulated(knots, monotone_tol)
    }

    /// `t -> self(arg_factor * t)`; the domain shrinks accordingly.
    pub fn scaled_argument(&self, arg_factor: f64) -> Result<Self, ModulusError> {
        if !(arg_factor > 0.0) || !arg_factor.is_finite() {
            return Err(ModulusError::Invalid(format!("argument factor must be positive, got {arg_factor}")));
        }
        Ok(Self {
            kind: ModulusKind::Scaled { inner: Box::new(self.clone()), arg_factor },
            domain_end: self.domain_end / arg_factor,
            monotone_tol: self.monotone_tol,
        })
    }

    /// `t -> t * self(t)`.
    pub fn times_argument(&self) -> Self {
        Self {
            kind: ModulusKind::TimesArg { inner: Box::new(self.clone()) },
            domain_end: self.domain_end,
            monotone_tol: self.monotone_tol,
        }
    }

    /// `t -> factor * self(t)`.
    pub fn scaled_value(&self, factor: f64) -> Result<Self, ModulusError> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(ModulusError::Invalid(format!("value factor must be positive, got {factor}")));
        }
        Ok(Self {
            kind: ModulusKind::VScaled { inner: Box::new(self.clone()), factor },
            domain_end: self.domain_end,
            monotone_tol: self.monotone_tol,
        })
    }

    /// The generalized (left-continuous) inverse as a modulus on the range of
    /// `self`. Closed forms are used for power and log-power families.
    pub fn inverse_modulus(&self, tol: f64) -> Result<Self, ModulusError> {
        match &self.kind {
            ModulusKind::Power { alpha } => {
                let end = if self.domain_end.is_finite() {
                    self.eval(self.domain_end)?
                } else {
                    f64::INFINITY
                };
                let mut m = Modulus::power(1.0 / alpha, end)?;
                m.monotone_tol = self.monotone_tol;
                Ok(m)
            }
            ModulusKind::Constant { .. } => Err(ModulusError::ConstantNotInvertible),
            _ => {
                let end = if self.domain_end.is_finite() {
                    self.eval(self.domain_end)?
                } else {
                    f64::INFINITY
                };
                Ok(Self {
                    kind: ModulusKind::InverseOf { inner: Box::new(self.clone()), tol },
                    domain_end: end,
                    monotone_tol: self.monotone_tol,
                })
            }
        }
    }

    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    pub fn family_name(&self) -> &'static str {
        match &self.kind {
            ModulusKind::Power { .. } => "power",
            ModulusKind::LogPower { .. } => "log_power",
            ModulusKind::PowerSeries { .. } => "power_series",
            ModulusKind::TildePhi { .. } => "tilde_phi",
            ModulusKind::Constant { .. } => "constant",
            ModulusKind::Tabulated { .. } => "tabulated",
            ModulusKind::Scaled { .. }
            | ModulusKind::VScaled { .. }
            | ModulusKind::TimesArg { .. }
            | ModulusKind::InverseOf { .. } => "composed",
        }
    }

    /// Evaluates the modulus at `t in (0, domain_end]`.
    pub fn eval(&self, t: f64) -> Result<f64, ModulusError> {
        if !(t > 0.0) || !t.is_finite() || t > self.domain_end * (1.0 + 1e-12) {
            return Err(ModulusError::Domain { t, domain_end: self.domain_end });
        }
        let v = self.eval_unchecked(t);
        if !v.is_finite() || v < 0.0 {
            return Err(ModulusError::NonFinite { t });
        }
        Ok(v)
    }

    /// Evaluates at `t = exp(ln_t)`; robust when `t` itself underflows f64.
    pub fn eval_ln(&self, ln_t: f64) -> Result<f64, ModulusError> {
        if ln_t > self.domain_end.ln() + 1e-12 {
            return Err(ModulusError::Domain { t: ln_t.exp(), domain_end: self.domain_end });
        }
        let v = self.eval_ln_unchecked(ln_t);
        if !v.is_finite() || v < 0.0 {
            return Err(ModulusError::NonFinite { t: ln_t.exp() });
        }
        Ok(v)
    }

    fn eval_unchecked(&self, t: f64) -> f64 {
        match &self.kind {
            ModulusKind::Power { alpha } => t.powf(*alpha),
            ModulusKind::LogPower { alpha } => (1.0 - t.ln()).powf(-alpha),
            ModulusKind::PowerSeries { coefficients, exponents, .. } => coefficients
                .iter()
                .zip(exponents)
                .map(|(&a, &g)| a * t.powf(g))
                .sum(),
            ModulusKind::TildePhi { terms } => {
                let u = 1.0 - t.ln();
                (1..=*terms)
                    .map(|n| {
                        let a = 0.5f64.powi(n as i32) / n as f64;
                        a * u.powf(-(1.0 + 1.0 / n as f64))
                    })
                    .sum()
            }
            ModulusKind::Constant { level } => *level,
            ModulusKind::Tabulated { knots } => interp_knots(knots, t),
            ModulusKind::Scaled { inner, arg_factor } => inner.eval_unchecked(arg_factor * t),
            ModulusKind::VScaled { inner, factor } => factor * inner.eval_unchecked(t),
            ModulusKind::TimesArg { inner } => t * inner.eval_unchecked(t),
            ModulusKind::InverseOf { inner, tol } => {
                inner.inverse_evaluate(t, *tol).unwrap_or(f64::NAN)
            }
        }
    }

    fn eval_ln_unchecked(&self, ln_t: f64) -> f64 {
        match &self.kind {
            ModulusKind::Power { alpha } => (alpha * ln_t).exp(),
            ModulusKind::LogPower { alpha } => (1.0 - ln_t).powf(-alpha),
            ModulusKind::PowerSeries { coefficients, exponents, .. } => coefficients
                .iter()
                .zip(exponents)
                .map(|(&a, &g)| a * (g * ln_t).exp())
                .sum(),
            ModulusKind::TildePhi { terms } => {
                let u = 1.0 - ln_t;
                (1..=*terms)
                    .map(|n| {
                        let a = 0.5f64.powi(n as i32) / n as f64;
                        a * u.powf(-(1.0 + 1.0 / n as f64))
                    })
                    .sum()
            }
            ModulusKind::Constant { level } => *level,
            ModulusKind::Tabulated { knots } => {
                let (t0, w0) = knots[0];
                if ln_t <= t0.ln() {
                    // linear head to the origin
                    (w0 / t0) * ln_t.exp()
                } else {
                    interp_knots(knots, ln_t.exp())
                }
            }
            ModulusKind::Scaled { inner, arg_factor } => inner.eval_ln_unchecked(ln_t + arg_factor.ln()),
            ModulusKind::VScaled { inner, factor } => factor * inner.eval_ln_unchecked(ln_t),
            ModulusKind::TimesArg { inner } => ln_t.exp() * inner.eval_ln_unchecked(ln_t),
            ModulusKind::InverseOf { inner, tol } => {
                let t = ln_t.exp();
                if t > 0.0 {
                    inner.inverse_evaluate(t, *tol).unwrap_or(f64::NAN)
                } else {
                    0.0
                }
            }
        }
    }

    /// `ln w(exp(ln_t))` where a closed form exists; avoids underflow of
    /// both argument and value.
    pub(crate) fn ln_eval_ln(&self, ln_t: f64) -> Option<f64> {
        match &self.kind {
            ModulusKind::Power { alpha } => Some(alpha * ln_t),
            ModulusKind::LogPower { alpha } => Some(-alpha * (1.0 - ln_t).ln()),
            ModulusKind::Constant { level } => Some(level.ln()),
            ModulusKind::PowerSeries { coefficients, exponents, .. } => {
                // log-sum-exp over ln a_j + g_j ln_t
                let logs: Vec<f64> = coefficients
                    .iter()
                    .zip(exponents)
                    .map(|(&a, &g)| a.ln() + g * ln_t)
                    .collect();
                let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if m == f64::NEG_INFINITY {
                    return None;
                }
                Some(m + logs.iter().map(|&l| (l - m).exp()).sum::<f64>().ln())
            }
            ModulusKind::Scaled { inner, arg_factor } => inner.ln_eval_ln(ln_t + arg_factor.ln()),
            ModulusKind::VScaled { inner, factor } => inner.ln_eval_ln(ln_t).map(|l| l + factor.ln()),
            ModulusKind::TimesArg { inner } => inner.ln_eval_ln(ln_t).map(|l| l + ln_t),
            _ => {
                let v = self.eval_ln_unchecked(ln_t);
                if v.is_finite() && v > 0.0 {
                    Some(v.ln())
                } else {
                    None
                }
            }
        }
    }

    /// Generalized left-continuous inverse: `inf { t : w(t) >= y }`, accurate
    /// to `tol`. Closed forms for power and log-power families; monotone
    /// bisection otherwise. Flat segments of tabulated moduli resolve to
    /// their left endpoint.
    pub fn inverse_evaluate(&self, y: f64, tol: f64) -> Result<f64, ModulusError> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(ModulusError::Invalid(format!("inverse target must be positive and finite, got {y}")));
        }
        if !(tol > 0.0) {
            return Err(ModulusError::Invalid(format!("inverse tolerance must be positive, got {tol}")));
        }
        match &self.kind {
            ModulusKind::Power { alpha } => {
                let t = y.powf(1.0 / alpha);
                if t > self.domain_end * (1.0 + 1e-12) {
                    return Err(ModulusError::OutOfRange { y, sup: self.eval(self.domain_end)? });
                }
                Ok(t.min(self.domain_end))
            }
            ModulusKind::LogPower { alpha } => {
                let sup = self.eval(self.domain_end)?;
                if y > sup * (1.0 + 1e-12) {
                    return Err(ModulusError::OutOfRange { y, sup });
                }
                Ok((1.0 - y.powf(-1.0 / alpha)).exp().min(self.domain_end))
            }
            ModulusKind::Constant { .. } => Err(ModulusError::ConstantNotInvertible),
            ModulusKind::Scaled { inner, arg_factor } => {
                Ok(inner.inverse_evaluate(y, tol * arg_factor)? / arg_factor)
            }
            ModulusKind::VScaled { inner, factor } => inner.inverse_evaluate(y / factor, tol),
            ModulusKind::InverseOf { inner, .. } => {
                // inverse of the inverse: evaluate the original
                inner.eval(y)
            }
            ModulusKind::Tabulated { knots } => self.inverse_tabulated(knots, y),
            _ => self.inverse_by_bisection(y, tol),
        }
    }

    fn inverse_tabulated(&self, knots: &[(f64, f64)], y: f64) -> Result<f64, ModulusError> {
        let (t0, w0) = knots[0];
        if y <= w0 {
            return Ok(t0 * y / w0);
        }
        for pair in knots.windows(2) {
            let (ta, wa) = pair[0];
            let (tb, wb) = pair[1];
            if y <= wb {
                if wb == wa {
                    return Ok(ta); // flat segment: left endpoint
                }
                return Ok(ta + (tb - ta) * (y - wa) / (wb - wa));
            }
        }
        let sup = knots.last().unwrap().1;
        if y <= sup * (1.0 + 1e-12) {
            return Ok(knots.last().unwrap().0);
        }
        Err(ModulusError::OutOfRange { y, sup })
    }

    fn inverse_by_bisection(&self, y: f64, tol: f64) -> Result<f64, ModulusError> {
        // predicate w(t) >= y; an overflowing evaluation counts as "above"
        let above = |t: f64| -> Result<bool, ModulusError> {
            let v = self.eval_unchecked(t);
            if v.is_nan() {
                return Err(ModulusError::NonFinite { t });
            }
            Ok(v >= y)
        };
        // upper bracket: grow from a moderate start towards the domain end
        let mut hi = self.domain_end.min(1.0);
        let mut guard = 0;
        while !above(hi)? {
            if hi >= self.domain_end {
                return Err(ModulusError::OutOfRange { y, sup: self.eval_unchecked(self.domain_end) });
            }
            hi = (hi * 2.0).min(self.domain_end);
            guard += 1;
            if guard > 2200 {
                return Err(ModulusError::OutOfRange { y, sup: f64::INFINITY });
            }
        }
        // lower bracket: a point with w(lo) < y
        let mut lo = hi;
        loop {
            lo *= 0.5;
            if lo < INVERSE_FLOOR {
                return Ok(lo); // the infimum is indistinguishable from 0
            }
            if !above(lo)? {
                break;
            }
            hi = lo;
        }
        Ok(bisect_predicate(|t| self.eval_unchecked(t) >= y, lo, hi, tol))
    }

    /// Checks monotonicity on the given sample points (ascending order not
    /// required; points are sorted internally).
    pub fn validate_monotone(&self, samples: &[f64]) -> Result<(), ModulusError> {
        let mut pts: Vec<f64> = samples.iter().cloned().filter(|&t| t > 0.0 && t <= self.domain_end).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev: Option<(f64, f64)> = None;
        for &t in &pts {
            let w = self.eval(t)?;
            if let Some((s, ws)) = prev {
                if w < ws - self.monotone_tol {
                    return Err(ModulusError::NotMonotone { s, ws, t, wt: w });
                }
            }
            prev = Some((t, w));
        }
        Ok(())
    }

    /// Checks decay towards zero along dyadic points down to `exp(ln_floor)`
    /// (log-argument evaluation, so the points may underflow f64): the value
    /// at the floor must have shrunk to at most `shrink` times the value at
    /// the domain end, and the dyadic samples must be non-increasing going
    /// down. Vanishing itself is not finitely decidable; this is the
    /// configured-floor check.
    pub fn validate_vanishing(&self, ln_floor: f64, shrink: f64) -> Result<(), ModulusError> {
        let base = self.domain_end.min(1.0);
        let top = self.eval(base)?;
        let mut ln_t = base.ln();
        let mut last = top;
        while ln_t > ln_floor {
            ln_t += (0.5f64).ln();
            let v = self.eval_ln(ln_t)?;
            if v > last * (1.0 + self.monotone_tol + 1e-12) {
                return Err(ModulusError::NotMonotone { s: ln_t.exp(), ws: v, t: (ln_t - (0.5f64).ln()).exp(), wt: last });
            }
            last = v;
        }
        if last > shrink * top {
            return Err(ModulusError::Invalid(format!(
                "modulus does not decay towards zero: w(exp({ln_t})) = {last} > {shrink} * w({base}) = {}",
                shrink * top
            )));
        }
        Ok(())
    }

    /// Certified upper bound on the geometric-sum tail
    /// `sum_{m > n} w(tau * theta^m)`, when the family admits one.
    fn geom_tail(&self, tau: f64, theta: f64, n: u64) -> Option<f64> {
        let ln_theta = theta.ln();
        let ln_tau = tau.ln();
        match &self.kind {
            ModulusKind::Power { alpha } => {
                let q = (alpha * ln_theta).exp(); // theta^alpha < 1
                let first = (alpha * (ln_tau + (n as f64 + 1.0) * ln_theta)).exp();
                Some(first / (1.0 - q))
            }
            ModulusKind::LogPower { alpha } => {
                if *alpha <= 1.0 {
                    return None; // tail diverges
                }
                let a0 = 1.0 - ln_tau;
                let b = -ln_theta;
                if a0 <= 0.0 {
                    return None;
                }
                // sum_{m>n} (a0 + mB)^(-alpha) <= int_n^inf (a0 + xB)^(-alpha) dx
                Some((a0 + n as f64 * b).powf(1.0 - alpha) / (b * (alpha - 1.0)))
            }
            ModulusKind::PowerSeries { coefficients, exponents, .. } => {
                let mut total = 0.0;
                for (&a, &g) in coefficients.iter().zip(exponents) {
                    let q = (g * ln_theta).exp();
                    let first = a * (g * (ln_tau + (n as f64 + 1.0) * ln_theta)).exp();
                    total += first / (1.0 - q);
                }
                Some(total)
            }
            ModulusKind::TildePhi { terms } => {
                let a0 = 1.0 - ln_tau;
                let b = -ln_theta;
                if a0 <= 0.0 {
                    return None;
                }
                let mut total = 0.0;
                for k in 1..=*terms {
                    let coeff = 0.5f64.powi(k as i32) / k as f64;
                    // exponent 1 + 1/k > 1: integral tail bound
                    let alpha = 1.0 + 1.0 / k as f64;
                    total += coeff * (a0 + n as f64 * b).powf(1.0 - alpha) / (b * (alpha - 1.0));
                }
                Some(total)
            }
            ModulusKind::Constant { .. } => None,
            ModulusKind::Tabulated { knots } => {
                let (t0, w0) = knots[0];
                let ln_first = ln_tau + (n as f64 + 1.0) * ln_theta;
                if ln_first <= t0.ln() {
                    // below the first knot the modulus is linear: w(t) <= (w0/t0) t
                    Some((w0 / t0) * ln_first.exp() / (1.0 - theta))
                } else {
                    None
                }
            }
            ModulusKind::Scaled { inner, arg_factor } => inner.geom_tail(arg_factor * tau, theta, n),
            ModulusKind::VScaled { inner, factor } => {
                inner.geom_tail(tau, theta, n).map(|t| factor * t)
            }
            ModulusKind::TimesArg { inner } => {
                // t*sigma(t) <= sigma(tau) * t on (0, tau]
                let cap = inner.eval(tau).ok()?;
                Some(cap * (ln_tau + (n as f64 + 1.0) * ln_theta).exp() / (1.0 - theta))
            }
            ModulusKind::InverseOf { inner, tol } => match &inner.kind {
                // inverse of (1 - ln t)^(-alpha) is exp(1 - y^(-1/alpha));
                // along y = tau*theta^m the terms decay super-geometrically
                // with provably decreasing ratios.
                ModulusKind::LogPower { alpha } => {
                    let rho = (ln_theta / alpha).exp(); // theta^(1/alpha) < 1
                    let c_next = (-(ln_tau + (n as f64 + 1.0) * ln_theta) / alpha).exp();
                    let term_next = (1.0 - c_next).exp();
                    let ratio = (-c_next * (1.0 / rho - 1.0)).exp();
                    if ratio < 1.0 {
                        Some(term_next / (1.0 - ratio))
                    } else {
                        None
                    }
                }
                ModulusKind::Scaled { inner: inner2, arg_factor } => {
                    // (sigma(c t))^{ -1 }(y) = sigma^{-1}(y)/c: delegate and rescale
                    inner2
                        .inverse_modulus(*tol)
                        .ok()?
                        .geom_tail(tau, theta, n)
                        .map(|t| t / arg_factor)
                }
                _ => None,
            },
        }
    }

    /// Closed-form certified lower bound on `(1-theta) * sum_{n<=N} w(tau*theta^n)`
    /// exceeding `cap` for some (possibly astronomically large) `N`, when the
    /// family admits one. Works in log-index space, so `N` is never
    /// materialized.
    fn divergence_lower_bound(&self, tau: f64, theta: f64, cap: f64) -> Option<f64> {
        match &self.kind {
            ModulusKind::Constant { level } => {
                // partial sums grow linearly
                Some(cap + (1.0 - theta) * level)
            }
            ModulusKind::LogPower { alpha } => {
                let a0 = 1.0 - tau.ln();
                let b = -theta.ln();
                if a0 <= 0.0 {
                    return None;
                }
                // terms (a0 + nB)^(-alpha) decrease, so partial sums dominate
                // the integral from 1 to N.
                if (*alpha - 1.0).abs() < 1e-12 {
                    // integral = (ln(a0 + NB) - ln(a0 + B))/B, unbounded in N
                    Some(cap + (1.0 - theta) / b)
                } else if *alpha < 1.0 {
                    Some(cap + (1.0 - theta) / (b * (1.0 - alpha)))
                } else {
                    None // integral converges
                }
            }
            ModulusKind::Scaled { inner, arg_factor } => {
                inner.divergence_lower_bound(arg_factor * tau, theta, cap)
            }
            ModulusKind::VScaled { inner, factor } => {
                inner.divergence_lower_bound(tau, theta, cap / factor).map(|b| factor * b)
            }
            _ => None,
        }
    }

    /// Brackets `∫₀^tau w(t)/t dt` through geometric sums at ratio `theta`.
    ///
    /// The verdict is three-valued: `Dini` once the certified tail estimate
    /// drops below `tol`, `Divergent` once the certified lower bound exceeds
    /// `cap`, and `Inconclusive` when the term budget runs out undecided.
    pub fn dini_integral(&self, tau: f64, theta: f64, cap: f64, tol: f64) -> Result<DiniCertificate, ModulusError> {
        self.dini_integral_with_budget(tau, theta, cap, tol, 20_000_000)
    }

    pub fn dini_integral_with_budget(
        &self,
        tau: f64,
        theta: f64,
        cap: f64,
        tol: f64,
        max_terms: u64,
    ) -> Result<DiniCertificate, ModulusError> {
        if !(tau > 0.0) || tau > self.domain_end * (1.0 + 1e-12) {
            return Err(ModulusError::Domain { t: tau, domain_end: self.domain_end });
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(ModulusError::Invalid(format!("theta must lie in (0,1), got {theta}")));
        }
        if !(cap > 0.0) || !(tol > 0.0) {
            return Err(ModulusError::Invalid("cap and tol must be positive".into()));
        }

        // Closed-form divergence first: slowly diverging families never reach
        // the cap by direct summation.
        if let Some(lower) = self.divergence_lower_bound(tau, theta, cap) {
            if lower > cap {
                return Ok(DiniCertificate {
                    verdict: DiniVerdict::Divergent,
                    lower_bound: lower,
                    upper_bound: f64::INFINITY,
                    tail_estimate: f64::INFINITY,
                    theta,
                    terms_used: 0,
                    tau,
                });
            }
        }

        let omega_tau = self.eval(tau)?;
        let ln_tau = tau.ln();
        let ln_theta = theta.ln();
        let ratio = (1.0 - theta) / theta;
        let mut partial = 0.0f64;
        let mut n = 0u64;
        while n < max_terms {
            n += 1;
            let term = self.eval_ln(ln_tau + n as f64 * ln_theta)?;
            partial += term;
            let lower = (1.0 - theta) * partial;
            if lower > cap {
                return Ok(DiniCertificate {
                    verdict: DiniVerdict::Divergent,
                    lower_bound: lower,
                    upper_bound: f64::INFINITY,
                    tail_estimate: f64::INFINITY,
                    theta,
                    terms_used: n,
                    tau,
                });
            }
            if let Some(tail) = self.geom_tail(tau, theta, n) {
                let tail_estimate = ratio * tail;
                if tail_estimate < tol {
                    return Ok(DiniCertificate {
                        verdict: DiniVerdict::Dini,
                        lower_bound: lower,
                        upper_bound: ratio * (omega_tau + partial + tail),
                        tail_estimate,
                        theta,
                        terms_used: n,
                        tau,
                    });
                }
            }
        }
        let lower = (1.0 - theta) * partial;
        let upper = match self.geom_tail(tau, theta, n) {
            Some(tail) => ratio * (omega_tau + partial + tail),
            None => f64::INFINITY,
        };
        Ok(DiniCertificate {
            verdict: DiniVerdict::Inconclusive,
            lower_bound: lower,
            upper_bound: upper,
            tail_estimate: upper - ratio * (omega_tau + partial),
            theta,
            terms_used: n,
            tau,
        })
    }
}

fn interp_knots(knots: &[(f64, f64)], t: f64) -> f64 {
    let (t0, w0) = knots[0];
    if t <= t0 {
        return w0 * t / t0;
    }
    for pair in knots.windows(2) {
        let (ta, wa) = pair[0];
        let (tb, wb) = pair[1];
        if t <= tb {
            return wa + (wb - wa) * (t - ta) / (tb - ta);
        }
    }
    knots.last().unwrap().1
}

/// Verdict of a Dini certification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiniVerdict {
    Dini,
    Divergent,
    Inconclusive,
}

/// Certified bracket `[lower_bound, upper_bound]` for the Dini integral.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DiniCertificate {
    pub verdict: DiniVerdict,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Certified bound on the contribution of terms beyond `terms_used`.
    pub tail_estimate: f64,
    pub theta: f64,
    pub terms_used: u64,
    pub tau: f64,
}

/// A degeneracy law: the gradient-dependent factor of the operator.
#[derive(Debug, Clone)]
pub struct DegeneracyLaw {
    sigma: Modulus,
    normalized: bool,
}

impl DegeneracyLaw {
    /// Builds a normalized law; requires `sigma(1) >= 1`.
    pub fn normalized(sigma: Modulus) -> Result<Self, ModulusError> {
        let at_one = if sigma.domain_end() >= 1.0 {
            sigma.eval(1.0)?
        } else {
            return Err(ModulusError::Invalid("normalized law needs 1 inside the domain".into()));
        };
        if at_one < 1.0 {
            return Err(ModulusError::NotNormalized { value: at_one });
        }
        Ok(Self { sigma, normalized: true })
    }

    /// Builds a law without the normalization check.
    pub fn unnormalized(sigma: Modulus) -> Self {
        Self { sigma, normalized: false }
    }

    pub fn sigma(&self) -> &Modulus {
        &self.sigma
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `gamma(t) = t * sigma(t)`; its generalized inverse is the relevant
    /// regularity modulus.
    pub fn gamma(&self) -> Modulus {
        self.sigma.times_argument()
    }
}

/// A law accepted through the sandwich relaxation, with its constant.
#[derive(Debug, Clone)]
pub struct RescuedLaw {
    pub law: DegeneracyLaw,
    pub sandwich_constant: f64,
}

/// Accepts a raw (possibly non-monotone) degeneracy map when it is sandwiched
/// between `C^-1 rho` and `C rho` on the given grid; the monotone `rho` then
/// becomes the working law and `C` is recorded for downstream source scaling.
pub fn equivalent_law_rescue<F: Fn(f64) -> f64>(
    sigma_raw: F,
    rho: &Modulus,
    c: f64,
    grid: &[f64],
) -> Result<RescuedLaw, ModulusError> {
    if !(c >= 1.0) || !c.is_finite() {
        return Err(ModulusError::Invalid(format!("sandwich constant must be >= 1, got {c}")));
    }
    if grid.is_empty() {
        return Err(ModulusError::Invalid("rescue grid must be non-empty".into()));
    }
    for &t in grid {
        let r = rho.eval(t)?;
        let s = sigma_raw(t);
        if !s.is_finite() {
            return Err(ModulusError::NonFinite { t });
        }
        if s * c < r || s > c * r {
            return Err(ModulusError::SandwichViolated { witness: t, sigma: s, rho: r, c });
        }
    }
    Ok(RescuedLaw { law: DegeneracyLaw::unnormalized(rho.clone()), sandwich_constant: c })
}
