//! Generic certified fixpoint iteration for (eventually) contractive
//! self-maps on a caller-supplied metric carrier, plus an empirical checker
//! for the preservation hypothesis of the metric coinduction rule.
//!
//! A closed nonempty property preserved by an eventually contractive map
//! holds of the map's unique fixpoint. Closedness is not machine-checkable
//! from samples; [`check_coinduction_step`] tests only nonemptiness and
//! step preservation, so an all-pass report is evidence, never a proof.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FixpointError {
    #[error("contraction constant {0} is outside [0, 1)")]
    InvalidContraction(f64),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("coinduction check requires a nonempty sample set")]
    EmptySampleSet,
}

/// A self-map on a metric carrier with a declared contraction constant.
///
/// When `power > 1` the map is only eventually contractive: the `power`-th
/// iterate is the contractive unit, with constant `contraction`. The
/// constant is declared by the caller, not estimated; see
/// [`contraction_diagnostic`] for an empirical falsifier.
pub struct ContractiveSystem<P, M, D>
where
    M: Fn(&P) -> P,
    D: Fn(&P, &P) -> f64,
{
    map: M,
    distance: D,
    contraction: f64,
    power: usize,
    _point: std::marker::PhantomData<P>,
}

impl<P, M, D> ContractiveSystem<P, M, D>
where
    M: Fn(&P) -> P,
    D: Fn(&P, &P) -> f64,
{
    pub fn new(map: M, distance: D, contraction: f64, power: usize) -> Result<Self, FixpointError> {
        if !(0.0..1.0).contains(&contraction) || !contraction.is_finite() {
            return Err(FixpointError::InvalidContraction(contraction));
        }
        Ok(Self {
            map,
            distance,
            contraction: contraction.max(0.0),
            power: power.max(1),
            _point: std::marker::PhantomData,
        })
    }

    pub fn apply(&self, p: &P) -> P {
        (self.map)(p)
    }

    /// One application of the contractive unit `map^power`.
    pub fn apply_block(&self, p: &P) -> P {
        let mut cur = (self.map)(p);
        for _ in 1..self.power {
            cur = (self.map)(&cur);
        }
        cur
    }

    pub fn distance(&self, a: &P, b: &P) -> f64 {
        (self.distance)(a, b)
    }

    pub fn contraction(&self) -> f64 {
        self.contraction
    }

    pub fn power(&self) -> usize {
        self.power
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixpointResult<P> {
    pub point: P,
    /// Number of individual map applications performed.
    pub iterations: usize,
    /// Distance between the last two block iterates.
    pub residual: f64,
    /// A-posteriori bound: residual * c / (1 - c).
    pub error_bound: f64,
}

/// Iterates `map^power` from `start` until the a-posteriori error bound
/// `residual * c / (1 - c)` and the residual itself both drop to `tol`.
///
/// For `c = 0` the first block iterate is already exact and is returned
/// immediately. Deterministic: identical inputs give identical outputs.
pub fn iterate_to_fixpoint<P, M, D>(
    sys: &ContractiveSystem<P, M, D>,
    start: &P,
    tol: f64,
    max_iter: usize,
) -> Result<FixpointResult<P>, FixpointError>
where
    P: Clone,
    M: Fn(&P) -> P,
    D: Fn(&P, &P) -> f64,
{
    assert!(tol > 0.0, "tolerance must be positive");
    let c = sys.contraction();
    let factor = c / (1.0 - c);
    let mut prev = start.clone();
    let mut iterations = 0usize;
    while iterations < max_iter {
        let next = sys.apply_block(&prev);
        iterations += sys.power();
        let residual = sys.distance(&next, &prev);
        let error_bound = residual * factor;
        let converged = if c == 0.0 {
            true
        } else {
            residual <= tol && error_bound <= tol
        };
        if converged {
            return Ok(FixpointResult {
                point: next,
                iterations,
                residual,
                error_bound,
            });
        }
        prev = next;
    }
    let residual = sys.distance(&sys.apply_block(&prev), &prev);
    Err(FixpointError::NonConvergence {
        iterations,
        residual,
    })
}

/// The Cauchy-sequence bound `c^n (1 - c^m) (1 - c)^{-1} * d1` on the
/// distance between iterates `H^{n+m}(u)` and `H^n(u)`, where `d1` is the
/// distance between `H(u)` and `u`.
pub fn cauchy_bound(c: f64, n: u32, m: u32, d1: f64) -> Result<f64, FixpointError> {
    if !(0.0..1.0).contains(&c) || !c.is_finite() {
        return Err(FixpointError::InvalidContraction(c));
    }
    assert!(m >= 1, "m must be at least 1");
    assert!(d1 >= 0.0, "d1 must be nonnegative");
    Ok(c.powi(n as i32) * (1.0 - c.powi(m as i32)) / (1.0 - c) * d1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    pub sample_index: usize,
    /// `holds[i]` is whether the predicate holds after `i + 1` applications.
    pub holds: Vec<bool>,
    /// First application index (0-based) whose image violates the predicate.
    pub first_violation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreservationReport {
    pub steps: usize,
    pub traces: Vec<SampleTrace>,
    pub all_preserved: bool,
}

/// Empirically checks the coinduction step: applies the map `steps` times
/// to every sample and records whether the predicate is preserved.
///
/// Every sample is required to satisfy the predicate up front (the rule
/// needs a nonempty property). An all-pass report supports the hypothesis
/// of the coinduction rule empirically; it never establishes closedness.
pub fn check_coinduction_step<P, M, D, F>(
    sys: &ContractiveSystem<P, M, D>,
    predicate: F,
    samples: &[P],
    steps: usize,
) -> Result<PreservationReport, FixpointError>
where
    P: Clone,
    M: Fn(&P) -> P,
    D: Fn(&P, &P) -> f64,
    F: Fn(&P) -> bool,
{
    if samples.is_empty() {
        return Err(FixpointError::EmptySampleSet);
    }
    assert!(steps >= 1, "steps must be positive");
    let mut traces = Vec::with_capacity(samples.len());
    let mut all_preserved = true;
    for (sample_index, sample) in samples.iter().enumerate() {
        assert!(
            predicate(sample),
            "sample {sample_index} does not satisfy the predicate"
        );
        let mut cur = sample.clone();
        let mut holds = Vec::with_capacity(steps);
        let mut first_violation = None;
        for step in 0..steps {
            cur = sys.apply(&cur);
            let ok = predicate(&cur);
            holds.push(ok);
            if !ok && first_violation.is_none() {
                first_violation = Some(step);
            }
        }
        if first_violation.is_some() {
            all_preserved = false;
        }
        traces.push(SampleTrace {
            sample_index,
            holds,
            first_violation,
        });
    }
    Ok(PreservationReport {
        steps,
        traces,
        all_preserved,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionDiagnostic {
    pub declared: f64,
    /// Largest observed ratio d(H^n(u), H^n(v)) / d(u, v) over sample pairs.
    pub observed: f64,
    /// False when the observation falsifies the declaration.
    pub consistent: bool,
}

/// Measures the Lipschitz ratio of the contractive unit over all sample
/// pairs. The result can falsify a declared constant, never certify one.
pub fn contraction_diagnostic<P, M, D>(
    sys: &ContractiveSystem<P, M, D>,
    samples: &[P],
) -> ContractionDiagnostic
where
    P: Clone,
    M: Fn(&P) -> P,
    D: Fn(&P, &P) -> f64,
{
    let images: Vec<P> = samples.iter().map(|p| sys.apply_block(p)).collect();
    let mut observed: f64 = 0.0;
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            let base = sys.distance(&samples[i], &samples[j]);
            if base > 0.0 {
                observed = observed.max(sys.distance(&images[i], &images[j]) / base);
            }
        }
    }
    ContractionDiagnostic {
        declared: sys.contraction(),
        observed,
        consistent: observed <= sys.contraction() + 1e-12,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halving() -> ContractiveSystem<f64, impl Fn(&f64) -> f64, impl Fn(&f64, &f64) -> f64> {
        ContractiveSystem::new(|x: &f64| x / 2.0, |a: &f64, b: &f64| (a - b).abs(), 0.5, 1)
            .unwrap()
    }

    #[test]
    fn halving_converges_to_zero() {
        let r = iterate_to_fixpoint(&halving(), &1.0, 1e-12, 1000).unwrap();
        assert!(r.point.abs() <= 1e-12);
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn newton_converges_to_sqrt2() {
        // Independent oracle: the square root from the standard library.
        let sys = ContractiveSystem::new(
            |x: &f64| (x + 2.0 / x) / 2.0,
            |a: &f64, b: &f64| (a - b).abs(),
            0.5,
            1,
        )
        .unwrap();
        let r = iterate_to_fixpoint(&sys, &1.0, 1e-12, 1000).unwrap();
        assert!((r.point - 2.0f64.sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn constant_map_needs_one_iteration() {
        let sys = ContractiveSystem::new(|_: &f64| 7.0, |a: &f64, b: &f64| (a - b).abs(), 0.0, 1)
            .unwrap();
        let r = iterate_to_fixpoint(&sys, &100.0, 1e-12, 10).unwrap();
        assert_eq!(r.point, 7.0);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn invalid_contraction_rejected() {
        match ContractiveSystem::new(|x: &f64| *x, |a: &f64, b: &f64| (a - b).abs(), 1.0, 1) {
            Err(err) => assert_eq!(err, FixpointError::InvalidContraction(1.0)),
            Ok(_) => panic!("expected InvalidContraction"),
        }
    }

    #[test]
    fn non_convergence_reported() {
        let sys = ContractiveSystem::new(
            |x: &f64| x * 0.99,
            |a: &f64, b: &f64| (a - b).abs(),
            0.99,
            1,
        )
        .unwrap();
        match iterate_to_fixpoint(&sys, &1.0, 1e-14, 5) {
            Err(FixpointError::NonConvergence { iterations, .. }) => assert_eq!(iterations, 5),
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn cauchy_bound_values() {
        assert_eq!(cauchy_bound(0.5, 0, 1, 1.0).unwrap(), 1.0);
        assert!((cauchy_bound(0.5, 3, 60, 1.0).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(cauchy_bound(0.0, 1, 1, 1.0).unwrap(), 0.0);
        assert!(cauchy_bound(1.0, 0, 1, 1.0).is_err());
    }

    #[test]
    fn coinduction_step_preserved() {
        let report =
            check_coinduction_step(&halving(), |x: &f64| *x >= 0.0, &[0.0, 1.0, 2.0], 5).unwrap();
        assert!(report.all_preserved);
    }

    #[test]
    fn coinduction_step_violation_located() {
        // 2 -> 1 (ok at application 0) -> 0.5 (violates x >= 1 at application 1)
        let report =
            check_coinduction_step(&halving(), |x: &f64| *x >= 1.0, &[2.0], 3).unwrap();
        assert!(!report.all_preserved);
        assert_eq!(report.traces[0].first_violation, Some(1));
    }

    #[test]
    fn empty_sample_set_rejected() {
        let err = check_coinduction_step(&halving(), |x: &f64| *x >= 0.0, &[], 3).unwrap_err();
        assert_eq!(err, FixpointError::EmptySampleSet);
    }

    #[test]
    fn fixpoint_unique_across_starts() {
        let sys = halving();
        let a = iterate_to_fixpoint(&sys, &10.0, 1e-10, 1000).unwrap();
        let b = iterate_to_fixpoint(&sys, &-3.0, 1e-10, 1000).unwrap();
        assert!((a.point - b.point).abs() <= 2e-10);
    }

    #[test]
    fn referentially_transparent() {
        let sys = halving();
        let a = iterate_to_fixpoint(&sys, &1.0, 1e-12, 1000).unwrap();
        let b = iterate_to_fixpoint(&sys, &1.0, 1e-12, 1000).unwrap();
        assert_eq!(a.point.to_bits(), b.point.to_bits());
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn diagnostic_falsifies_bad_declaration() {
        let sys = ContractiveSystem::new(
            |x: &f64| x * 0.9,
            |a: &f64, b: &f64| (a - b).abs(),
            0.5,
            1,
        )
        .unwrap();
        let diag = contraction_diagnostic(&sys, &[0.0, 1.0, 2.0]);
        assert!(!diag.consistent);
        assert!(diag.observed > 0.89);
    }

    #[test]
    fn eventual_contraction_uses_block() {
        // Rotation-then-shrink: a single step does not contract, the square does.
        let sys = ContractiveSystem::new(
            |p: &(f64, f64)| (-p.1 * 0.9, p.0 * 0.9),
            |a: &(f64, f64), b: &(f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt(),
            0.81,
            2,
        )
        .unwrap();
        let r = iterate_to_fixpoint(&sys, &(1.0, 1.0), 1e-10, 10_000).unwrap();
        assert!(r.point.0.abs() < 1e-9 && r.point.1.abs() < 1e-9);
        assert_eq!(r.iterations % 2, 0);
    }
}
