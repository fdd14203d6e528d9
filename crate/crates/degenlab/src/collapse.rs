//! Finite-sample analysis of families of moduli: the collapsing measure
//! `mu(Gamma) = sup { s : inf_sigma sigma(s) = 0 }`, non-collapsing
//! witnesses, and the shoring-up check `inf_n sigma_n(gamma_n) > 0`.
//!
//! Everything here is a finite estimate: a generator family is probed up to
//! a member budget, and the zero set is detected against a positive
//! threshold. Estimates are one-sided by construction (more members can only
//! raise the detected collapse).

use crate::modulus::{Modulus, ModulusError};
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum CollapseError {
    #[error("family has no members to evaluate")]
    EmptyFamily,
    #[error("grid is empty or leaves the family interval (0, {interval_end}]")]
    BadGrid { interval_end: f64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Modulus(#[from] ModulusError),
}

#[derive(Clone)]
enum FamilySource {
    Finite(Vec<Modulus>),
    Generator(Arc<dyn Fn(usize) -> Modulus + Send + Sync>),
}

/// An indexed family of moduli over a common interval `(0, T]`.
#[derive(Clone)]
pub struct ModulusFamily {
    source: FamilySource,
    interval_end: f64,
}

impl std::fmt::Debug for ModulusFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let size = match &self.source {
            FamilySource::Finite(v) => format!("{}", v.len()),
            FamilySource::Generator(_) => "generator".to_string(),
        };
        write!(f, "ModulusFamily {{ members: {size}, interval_end: {} }}", self.interval_end)
    }
}

impl ModulusFamily {
    /// Finite family; the common interval is the smallest member domain.
    pub fn finite(members: Vec<Modulus>) -> Result<Self, CollapseError> {
        if members.is_empty() {
            return Err(CollapseError::EmptyFamily);
        }
        let interval_end = members.iter().map(|m| m.domain_end()).fold(f64::INFINITY, f64::min);
        Ok(Self { source: FamilySource::Finite(members), interval_end })
    }

    /// Family generated on demand from an index (starting at 1).
    pub fn generator<F: Fn(usize) -> Modulus + Send + Sync + 'static>(gen: F, interval_end: f64) -> Self {
        Self { source: FamilySource::Generator(Arc::new(gen)), interval_end }
    }

    /// `{ t^j : 1 <= j <= count }` on `(0, 1]`.
    pub fn power_ladder(count: usize) -> Result<Self, CollapseError> {
        if count == 0 {
            return Err(CollapseError::EmptyFamily);
        }
        let members: Result<Vec<_>, _> = (1..=count).map(|j| Modulus::power(j as f64, 1.0)).collect();
        Self::finite(members?)
    }

    pub fn interval_end(&self) -> f64 {
        self.interval_end
    }

    /// Number of members for finite families.
    pub fn len(&self) -> Option<usize> {
        match &self.source {
            FamilySource::Finite(v) => Some(v.len()),
            FamilySource::Generator(_) => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self.len(), Some(0))
    }

    /// Member by 1-based index; `None` past a finite family's end.
    pub fn member(&self, index: usize) -> Option<Modulus> {
        match &self.source {
            FamilySource::Finite(v) => v.get(index - 1).cloned(),
            FamilySource::Generator(g) => Some(g(index)),
        }
    }

    /// Union of two finite families on the common (smaller) interval.
    pub fn union(&self, other: &Self) -> Result<Self, CollapseError> {
        match (&self.source, &other.source) {
            (FamilySource::Finite(a), FamilySource::Finite(b)) => {
                let mut members = a.clone();
                members.extend(b.iter().cloned());
                Self::finite(members)
            }
            _ => Err(CollapseError::Invalid("union is defined for finite families".into())),
        }
    }
}

/// Finite-budget estimate of the collapsing measure.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CollapseReport {
    /// Supremum of grid points where the evaluated infimum drops below the
    /// threshold (0 when none does). A lower estimate of the true measure.
    pub mu_estimate: f64,
    pub grid: Vec<f64>,
    pub inf_values: Vec<f64>,
    pub members_evaluated: usize,
    pub zero_threshold: f64,
}

/// Evaluates `inf sigma(s)` over the first `member_budget` members at every
/// grid point and reports the largest grid point where that infimum falls
/// under `zero_threshold`.
pub fn collapsing_measure_estimate(
    family: &ModulusFamily,
    grid: &[f64],
    member_budget: usize,
    zero_threshold: f64,
) -> Result<CollapseReport, CollapseError> {
    if member_budget == 0 {
        return Err(CollapseError::EmptyFamily);
    }
    if !(zero_threshold > 0.0) {
        return Err(CollapseError::Invalid(format!("zero threshold must be positive, got {zero_threshold}")));
    }
    if grid.is_empty() || grid.iter().any(|&s| !(s > 0.0) || s > family.interval_end * (1.0 + 1e-12)) {
        return Err(CollapseError::BadGrid { interval_end: family.interval_end });
    }
    let budget = match family.len() {
        Some(n) => member_budget.min(n),
        None => member_budget,
    };
    if budget == 0 {
        return Err(CollapseError::EmptyFamily);
    }
    let members: Vec<Modulus> = (1..=budget).map(|i| family.member(i).unwrap()).collect();
    let mut inf_values = Vec::with_capacity(grid.len());
    let mut mu = 0.0f64;
    for &s in grid {
        let mut inf = f64::INFINITY;
        for m in &members {
            inf = inf.min(m.eval(s)?);
        }
        inf_values.push(inf);
        if inf < zero_threshold && s > mu {
            mu = s;
        }
    }
    Ok(CollapseReport {
        mu_estimate: mu,
        grid: grid.to_vec(),
        inf_values,
        members_evaluated: budget,
        zero_threshold,
    })
}

/// Finite-budget version of the non-collapse witness `liminf sigma_n(a)`:
/// the infimum of the first `member_budget` members at the point `a`.
/// A value bounded away from zero under growing budgets is evidence (not
/// proof) of non-collapse at `a`.
pub fn noncollapse_witness(family: &ModulusFamily, a: f64, member_budget: usize) -> Result<f64, CollapseError> {
    if member_budget == 0 {
        return Err(CollapseError::EmptyFamily);
    }
    if !(a > 0.0) || a > family.interval_end * (1.0 + 1e-12) {
        return Err(CollapseError::BadGrid { interval_end: family.interval_end });
    }
    let budget = match family.len() {
        Some(n) => member_budget.min(n),
        None => member_budget,
    };
    if budget == 0 {
        return Err(CollapseError::EmptyFamily);
    }
    let mut inf = f64::INFINITY;
    for i in 1..=budget {
        inf = inf.min(family.member(i).unwrap().eval(a)?);
    }
    Ok(inf)
}

/// Outcome of a shoring-up check on a prefix of `(sigma_n, gamma_n)` pairs.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ShoringReport {
    pub shored_up: bool,
    /// Smallest observed `sigma_n(gamma_n)`.
    pub min_value: f64,
    /// 1-based index attaining the minimum.
    pub witness: usize,
    /// Whether the `gamma_n` decreased towards zero over the prefix.
    pub gammas_decreasing: bool,
}

/// Checks `min_{n <= prefix} sigma_n(gamma_n) >= floor` together with a
/// decreasing trend of the `gamma_n`. `sigma_at(n, t)` evaluates the n-th
/// modulus (1-based).
pub fn is_shored_up<F>(mut sigma_at: F, gammas: &[f64], floor: f64) -> Result<ShoringReport, CollapseError>
where
    F: FnMut(usize, f64) -> Result<f64, CollapseError>,
{
    if gammas.is_empty() {
        return Err(CollapseError::EmptyFamily);
    }
    if gammas.iter().any(|&g| !(g > 0.0)) {
        return Err(CollapseError::Invalid("shoring points must be positive".into()));
    }
    let mut min_value = f64::INFINITY;
    let mut witness = 1;
    for (i, &g) in gammas.iter().enumerate() {
        let v = sigma_at(i + 1, g)?;
        if v < min_value {
            min_value = v;
            witness = i + 1;
        }
    }
    let mut decreasing = true;
    for w in gammas.windows(2) {
        if w[1] > w[0] * (1.0 + 1e-12) {
            decreasing = false;
        }
    }
    if *gammas.last().unwrap() >= gammas[0] && gammas.len() > 1 {
        decreasing = false;
    }
    Ok(ShoringReport {
        shored_up: min_value >= floor && decreasing,
        min_value,
        witness,
        gammas_decreasing: decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn power_ladder_collapse_grows_with_count() {
        let grid = unit_grid(1000);
        // with a generous threshold the detected measure approaches 1
        let fam = ModulusFamily::power_ladder(200).unwrap();
        let report = collapsing_measure_estimate(&fam, &grid, 200, 0.5).unwrap();
        assert!(report.mu_estimate >= 0.99, "mu = {}", report.mu_estimate);
        // fewer members detect less
        let small = collapsing_measure_estimate(&fam, &grid, 20, 0.5).unwrap();
        assert!(small.mu_estimate <= report.mu_estimate);
    }

    #[test]
    fn finite_pair_is_noncollapsing() {
        let fam = ModulusFamily::finite(vec![
            Modulus::power(1.0, 1.0).unwrap(),
            Modulus::power(2.0, 1.0).unwrap(),
        ])
        .unwrap();
        let grid = unit_grid(1000);
        let report = collapsing_measure_estimate(&fam, &grid, 10, 1e-12).unwrap();
        assert_eq!(report.mu_estimate, 0.0);
    }

    #[test]
    fn monotone_in_budget_and_threshold() {
        let fam = ModulusFamily::power_ladder(100).unwrap();
        let grid = unit_grid(200);
        let mut last_mu = 0.0;
        for budget in [5, 20, 50, 100] {
            let r = collapsing_measure_estimate(&fam, &grid, budget, 1e-6).unwrap();
            assert!(r.mu_estimate >= last_mu, "budget {budget}");
            last_mu = r.mu_estimate;
        }
        let tight = collapsing_measure_estimate(&fam, &grid, 100, 1e-12).unwrap();
        let loose = collapsing_measure_estimate(&fam, &grid, 100, 1e-3).unwrap();
        assert!(tight.mu_estimate <= loose.mu_estimate);
    }

    #[test]
    fn union_law_on_finite_families() {
        let grid = unit_grid(500);
        let f1 = ModulusFamily::power_ladder(60).unwrap();
        let f2 = ModulusFamily::finite(vec![Modulus::power(0.5, 1.0).unwrap()]).unwrap();
        let both = f1.union(&f2).unwrap();
        let threshold = 1e-6;
        let m1 = collapsing_measure_estimate(&f1, &grid, 1000, threshold).unwrap().mu_estimate;
        let m2 = collapsing_measure_estimate(&f2, &grid, 1000, threshold).unwrap().mu_estimate;
        let mu = collapsing_measure_estimate(&both, &grid, 1000, threshold).unwrap().mu_estimate;
        assert_eq!(mu, m1.max(m2));
    }

    #[test]
    fn witness_values() {
        let fam = ModulusFamily::power_ladder(200).unwrap();
        // every member equals 1 at t = 1
        assert!((noncollapse_witness(&fam, 1.0, 200).unwrap() - 1.0).abs() < 1e-15);
        // min over j <= 50 of 0.5^j
        let w = noncollapse_witness(&fam, 0.5, 50).unwrap();
        assert!((w - 0.5f64.powi(50)).abs() < 1e-30);
    }

    #[test]
    fn uniform_dini_family_witness_stays_positive() {
        // sigma_n(t) = t^(1/2) + t/n: uniformly Dini inverses, witness at any
        // a > 0 stays bounded away from zero as the budget grows
        let fam = ModulusFamily::generator(
            |n| {
                let coeffs = vec![1.0, 1.0 / n as f64];
                let exps = vec![0.5, 1.0];
                Modulus::power_series(coeffs, exps, 0.0, 1.0).unwrap()
            },
            1.0,
        );
        let mut last = f64::INFINITY;
        for budget in [10, 100, 1000] {
            let w = noncollapse_witness(&fam, 0.25, budget).unwrap();
            assert!(w >= 0.5, "budget {budget}: {w}");
            assert!(w <= last);
            last = w;
        }
    }

    #[test]
    fn equicontinuous_inverse_family_never_collapses() {
        // sigma_n(t) = (1 + 1/n) t: the inverses t/(1 + 1/n) share the
        // Lipschitz modulus, and the witness at any a stays above a
        let fam = ModulusFamily::generator(
            |n| {
                Modulus::power(1.0, 1.0)
                    .unwrap()
                    .scaled_value(1.0 + 1.0 / n as f64)
                    .unwrap()
            },
            1.0,
        );
        for budget in [10, 200, 2000] {
            let w = noncollapse_witness(&fam, 0.3, budget).unwrap();
            assert!(w >= 0.3, "budget {budget}: {w}");
        }
        let grid = unit_grid(300);
        let r = collapsing_measure_estimate(&fam, &grid, 500, 1e-6).unwrap();
        assert_eq!(r.mu_estimate, 0.0);
    }

    #[test]
    fn shoring_detects_powers() {
        // sigma_n(t) = t^n at gamma = 1/2 collapses
        let gammas = vec![0.5; 20];
        let report = is_shored_up(
            |n, t| Ok(Modulus::power(n as f64, 1.0).unwrap().eval(t)?),
            &gammas,
            0.01,
        )
        .unwrap();
        assert!(!report.shored_up);
        assert_eq!(report.witness, 20);
        assert!((report.min_value - 0.5f64.powi(20)).abs() < 1e-20);
    }

    #[test]
    fn shoring_fails_for_slowly_sampled_root() {
        // sigma(t) = sqrt(t) at gamma_n = 1/n^2 gives sigma(gamma_n) = 1/n -> 0
        let gammas: Vec<f64> = (1..=50).map(|n| 1.0 / (n as f64 * n as f64)).collect();
        let sqrt_mod = Modulus::power(0.5, 1.0).unwrap();
        let report = is_shored_up(|_, t| Ok(sqrt_mod.eval(t)?), &gammas, 0.1).unwrap();
        assert!(!report.shored_up);
        assert!((report.min_value - 0.02).abs() < 1e-12);
    }

    #[test]
    fn shoring_passes_when_floored() {
        // sigma_n(t) = t / gamma_n evaluated at gamma_n gives exactly 1
        let gammas: Vec<f64> = (1..=30).map(|n| 1.0 / n as f64).collect();
        let gcopy = gammas.clone();
        let report = is_shored_up(|n, t| Ok(t / gcopy[n - 1]), &gammas, 1.0).unwrap();
        assert!(report.shored_up);
        assert!(report.gammas_decreasing);
    }

    #[test]
    fn empty_family_rejected() {
        assert!(ModulusFamily::finite(vec![]).is_err());
        let fam = ModulusFamily::power_ladder(3).unwrap();
        assert!(matches!(
            collapsing_measure_estimate(&fam, &[], 3, 1e-9),
            Err(CollapseError::BadGrid { .. })
        ));
    }
}
