//! Estimators built from confidence slabs: greedy successive projection, the
//! intersection estimator and its dual, orthogonal soft thresholding, the
//! multiple-kernel estimator and the hard-threshold wavelet baseline.

use serde::{Deserialize, Serialize};

use crate::bases::{dyadic_gammas, gaussian_kernel_family, BasisFamily, FamilyDescriptor, HpCertificate, Label};
use crate::bounds::{estimate_coefficients, intervals, CoefficientEstimate, Interval, IntervalMethod, IntervalTag, UnionBound};
use crate::error::{Error, Result};
use crate::fnspace::{inner_products, project_cap, project_intersection, GramMatrix, InnerProducts, Slab, SpanElement};
use crate::sample::Sample;

/// Bandwidth count of the multiple-kernel estimator.
pub const KERNEL_LEVELS: u32 = 6;
const DUAL_TOL: f64 = 1e-10;
const DUAL_MAX_SWEEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: IntervalMethod,
    pub eps: f64,
    /// Greedy stopping threshold; `1 / (2N)` when unset.
    pub kappa_stop: Option<f64>,
    /// Greedy step budget; `50 m` when unset.
    pub max_iter: Option<usize>,
    /// Density bound for the coefficient cap.
    pub cap_c: Option<f64>,
}

impl EstimatorConfig {
    pub fn new(method: IntervalMethod, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidLevel(eps));
        }
        Ok(Self { method, eps, kappa_stop: None, max_iter: None, cap_c: None })
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidConfig(format!("kappa_stop must be positive, got {kappa}")));
        }
        self.kappa_stop = Some(kappa);
        Ok(self)
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }

    pub fn with_cap(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidConfig(format!("cap constant must be positive, got {c}")));
        }
        self.cap_c = Some(c);
        Ok(self)
    }

    pub fn kappa(&self, n: usize) -> f64 {
        self.kappa_stop.unwrap_or(0.5 / n.max(1) as f64)
    }

    pub fn iterations(&self, m: usize) -> usize {
        self.max_iter.unwrap_or(50 * m)
    }
}

/// Intervals of the multiple-kernel estimator: literal asymptotic, one member at a time.
pub fn kernel_default_method() -> IntervalMethod {
    IntervalMethod { tag: IntervalTag::Asymptotic { literal: true }, union_bound: UnionBound::Individual }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub n: usize,
    pub k: usize,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub steps: Vec<GreedyStep>,
    /// Number of projections performed.
    pub n_s: usize,
    /// Largest gain left when the loop ended.
    pub final_gain: f64,
    /// Ended on the step budget rather than on the threshold.
    pub budget_exhausted: bool,
}

/// Slabs and the intervals behind them.
#[derive(Debug, Clone)]
pub struct SlabSet {
    pub estimates: Vec<CoefficientEstimate>,
    pub intervals: Vec<Interval>,
    pub slabs: Vec<Slab>,
}

impl SlabSet {
    pub fn fallbacks(&self) -> usize {
        self.intervals.iter().filter(|iv| iv.fallback).count()
    }
}

pub fn build_slabs(
    sample: &Sample,
    family: &BasisFamily,
    cert: &HpCertificate,
    config: &EstimatorConfig,
) -> Result<SlabSet> {
    let estimates = estimate_coefficients(family, sample, config.method.needs_values())?;
    let intervals = intervals(family, cert, &estimates, &config.method, config.eps)?;
    let slabs = intervals.iter().enumerate().map(|(k, iv)| Slab::from_interval(k, iv.lo, iv.hi)).collect();
    Ok(SlabSet { estimates, intervals, slabs })
}

/// `D_k (|t_k| - rho_k)_+^2` with `t_k` the coefficient excess at `u = G gamma`.
fn gain(ip: &dyn InnerProducts, s: &Slab, u: &[f64]) -> f64 {
    let d = ip.diag(s.k);
    let t = u[s.k] / d - s.center;
    let e = (t.abs() - s.halfwidth).max(0.0);
    d * e * e
}

/// Greedy successive projection from 0: repeatedly projects onto the slab
/// whose projection moves the iterate most, until that move is `<= kappa`.
pub fn greedy_projection(
    ip: &dyn InnerProducts,
    family_id: u64,
    slabs: &[Slab],
    kappa: f64,
    max_iter: usize,
) -> Result<(SpanElement, GreedyTrace)> {
    let m = ip.dim();
    if ip.family_id() != family_id {
        return Err(Error::FamilyMismatch(family_id, ip.family_id()));
    }
    if let Some(s) = slabs.iter().find(|s| s.k >= m) {
        return Err(Error::InvalidConfig(format!("slab index {} out of range", s.k)));
    }
    let mut gamma = vec![0.0; m];
    let mut u = vec![0.0; m];
    let mut trace = GreedyTrace::default();
    loop {
        let mut best = (0.0, usize::MAX);
        for (idx, s) in slabs.iter().enumerate() {
            let g = gain(ip, s, &u);
            if g > best.0 {
                best = (g, idx);
            }
        }
        trace.final_gain = best.0;
        if best.0 <= kappa {
            break;
        }
        if trace.n_s >= max_iter {
            trace.budget_exhausted = true;
            break;
        }
        let s = &slabs[best.1];
        let t = u[s.k] / ip.diag(s.k) - s.center;
        let step = s.correction(t);
        gamma[s.k] -= step;
        ip.add_column(s.k, -step, &mut u);
        trace.steps.push(GreedyStep { n: trace.n_s, k: s.k, gain: best.0 });
        trace.n_s += 1;
    }
    Ok((SpanElement::from_parts(family_id, gamma), trace))
}

pub fn fit_greedy(
    sample: &Sample,
    family: &BasisFamily,
    cert: &HpCertificate,
    config: &EstimatorConfig,
) -> Result<(SpanElement, GreedyTrace)> {
    let set = build_slabs(sample, family, cert, config)?;
    let ip = inner_products(family)?;
    greedy_projection(
        ip.as_ref(),
        family.id(),
        &set.slabs,
        config.kappa(sample.len()),
        config.iterations(family.len()),
    )
}

pub fn fit_intersection(
    sample: &Sample,
    family: &BasisFamily,
    cert: &HpCertificate,
    config: &EstimatorConfig,
) -> Result<SpanElement> {
    let set = build_slabs(sample, family, cert, config)?;
    let ip = inner_products(family)?;
    project_intersection(ip.as_ref(), &set.slabs, &SpanElement::zero(family))
}

fn soft(x: f64, lambda: f64) -> f64 {
    x.signum() * (x.abs() - lambda).max(0.0)
}

/// Maximizes `-g' G g + 2 sum g_k c_k D_k - 2 sum |g_k| D_k rho_k` by cyclic
/// coordinate ascent. Members without a slab keep a zero coefficient.
pub fn dual_solve(slabs: &[Slab], gram: &GramMatrix) -> Result<SpanElement> {
    let m = gram.len();
    let mut owner: Vec<Option<&Slab>> = vec![None; m];
    for s in slabs {
        if s.k >= m {
            return Err(Error::InvalidConfig(format!("slab index {} out of range", s.k)));
        }
        if owner[s.k].replace(s).is_some() {
            return Err(Error::DualIllPosed(format!("two slabs on member {}", s.k)));
        }
    }
    if !gram.is_psd() {
        return Err(Error::DualIllPosed(format!(
            "Gram matrix is not positive semidefinite (smallest eigenvalue {:e})",
            gram.min_eigenvalue()
        )));
    }
    for k in 0..m {
        if owner[k].is_some() && gram.get(k, k) <= 0.0 {
            return Err(Error::DualIllPosed(format!("member {k} has zero norm")));
        }
    }
    let mut gamma = vec![0.0; m];
    let mut u = vec![0.0; m];
    for _ in 0..DUAL_MAX_SWEEPS {
        let mut largest = 0.0f64;
        for (k, s) in owner.iter().enumerate() {
            let Some(s) = s else { continue };
            let gkk = gram.get(k, k);
            let d = gkk;
            let r = s.center * d - (u[k] - gkk * gamma[k]);
            let next = soft(r, d * s.halfwidth) / gkk;
            let change = next - gamma[k];
            if change != 0.0 {
                gram.add_column(k, change, &mut u);
                gamma[k] = next;
                largest = largest.max(change.abs());
            }
        }
        if largest < DUAL_TOL {
            return Ok(SpanElement::from_parts(gram.family_id(), gamma));
        }
    }
    Err(Error::NoConvergence { cycles: DUAL_MAX_SWEEPS, violation: f64::NAN })
}

/// Value of the dual objective at `gamma`.
pub fn dual_objective(slabs: &[Slab], gram: &GramMatrix, gamma: &[f64]) -> f64 {
    let mut value = -gram.quadratic_form(gamma);
    for s in slabs {
        let d = gram.get(s.k, s.k);
        value += 2.0 * gamma[s.k] * s.center * d - 2.0 * gamma[s.k].abs() * d * s.halfwidth;
    }
    value
}

/// Projection of 0 through every slab of an orthogonal family: each
/// coefficient is its interval's point closest to 0.
pub fn soft_threshold(
    sample: &Sample,
    family: &BasisFamily,
    cert: &HpCertificate,
    config: &EstimatorConfig,
) -> Result<SpanElement> {
    if !family.is_orthogonal() {
        return Err(Error::OrthogonalityRequired);
    }
    let set = build_slabs(sample, family, cert, config)?;
    let coefficients = set.slabs.iter().map(|s| 0.0f64.clamp(s.lo(), s.hi())).collect();
    let g = SpanElement::new(family, coefficients)?;
    match config.cap_c {
        Some(c) => project_cap(family, &g, c),
        None => Ok(g),
    }
}

/// Classical keep-or-kill Haar estimator: `alpha_hat_{j,k} = 2^j P psi_{j,k}`
/// kept when `|alpha_hat| >= kappa_thr sqrt(j / N)`.
pub fn hard_threshold_baseline(sample: &Sample, family: &BasisFamily, kappa_thr: f64) -> Result<SpanElement> {
    if !matches!(family.descriptor(), FamilyDescriptor::Haar { .. }) {
        return Err(Error::InvalidConfig("hard thresholding needs a Haar family".into()));
    }
    let estimates = estimate_coefficients(family, sample, false)?;
    let n = sample.len() as f64;
    let coefficients = estimates
        .iter()
        .zip(family.labels())
        .map(|(est, label)| {
            let level = match *label {
                Label::Wavelet { level, .. } => level,
                _ => unreachable!("Haar labels"),
            };
            if level <= 0 {
                return est.alpha_hat;
            }
            let threshold = kappa_thr * (level as f64 / n).sqrt();
            if est.alpha_hat.abs() >= threshold {
                est.alpha_hat
            } else {
                0.0
            }
        })
        .collect();
    SpanElement::new(family, coefficients)
}

/// Multiple-kernel estimator: Gaussian grid with `n = N` centres and
/// bandwidths `2^(2j)`, `j = 1..=6`, plus the constant, fitted greedily.
pub fn fit_multiple_kernel(
    sample: &Sample,
    config: &EstimatorConfig,
) -> Result<(BasisFamily, SpanElement, GreedyTrace)> {
    fit_kernel_grid(sample, &dyadic_gammas(KERNEL_LEVELS), config)
}

pub fn fit_kernel_grid(
    sample: &Sample,
    gammas: &[f64],
    config: &EstimatorConfig,
) -> Result<(BasisFamily, SpanElement, GreedyTrace)> {
    if sample.is_empty() {
        return Err(Error::SampleTooSmall { needed: 1, got: 0 });
    }
    let (family, cert) = gaussian_kernel_family(sample.len(), gammas, true)?;
    let (g, trace) = fit_greedy(sample, &family, &cert, config)?;
    Ok((family, g, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub steps: usize,
    pub final_gain: f64,
    pub budget_exhausted: bool,
    pub total_gain: f64,
}

impl From<&GreedyTrace> for TraceSummary {
    fn from(t: &GreedyTrace) -> Self {
        Self {
            steps: t.n_s,
            final_gain: t.final_gain,
            budget_exhausted: t.budget_exhausted,
            total_gain: t.steps.iter().map(|s| s.gain).sum(),
        }
    }
}

/// On-disk form of a fitted estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub family: FamilyDescriptor,
    pub coefficients: Vec<f64>,
    pub config: EstimatorConfig,
    pub algorithm: String,
    pub trace: Option<TraceSummary>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::{haar_family, uniform_histogram};
    use crate::fnspace::gram;

    fn method(tag: IntervalTag) -> IntervalMethod {
        IntervalMethod::new(tag, UnionBound::AllM).unwrap()
    }

    #[test]
    fn config_defaults() {
        let c = EstimatorConfig::new(method(IntervalTag::Theorem1), 0.1).unwrap();
        assert_eq!(c.kappa(100), 0.005);
        assert_eq!(c.iterations(8), 400);
        assert!(EstimatorConfig::new(method(IntervalTag::Theorem1), 1.0).is_err());
        assert!(c.with_kappa(0.0).is_err());
    }

    #[test]
    fn slabs_containing_zero_give_zero() {
        let (f, _) = uniform_histogram(3).unwrap();
        let ip = gram(&f).unwrap();
        let slabs: Vec<Slab> = (0..3).map(|k| Slab::new(k, 0.1, 0.5)).collect();
        let (g, trace) = greedy_projection(&ip, f.id(), &slabs, 1e-12, 100).unwrap();
        assert_eq!(trace.n_s, 0);
        assert!(g.coefficients().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn greedy_tie_breaks_on_smallest_index() {
        let (f, _) = uniform_histogram(2).unwrap();
        let ip = gram(&f).unwrap();
        let slabs = vec![Slab::new(0, 1.0, 0.1), Slab::new(1, 1.0, 0.1)];
        let (_, trace) = greedy_projection(&ip, f.id(), &slabs, 1e-12, 10).unwrap();
        assert_eq!(trace.steps[0].k, 0);
        assert_eq!(trace.steps[1].k, 1);
        assert_eq!(trace.n_s, 2);
    }

    #[test]
    fn greedy_budget_is_reported() {
        let (f, _) = uniform_histogram(2).unwrap();
        let ip = gram(&f).unwrap();
        let slabs = vec![Slab::new(0, 1.0, 0.1), Slab::new(1, 1.0, 0.1)];
        let (_, trace) = greedy_projection(&ip, f.id(), &slabs, 1e-12, 1).unwrap();
        assert!(trace.budget_exhausted);
        assert_eq!(trace.n_s, 1);
    }

    #[test]
    fn dual_orthonormal_soft_threshold() {
        let (f, _) = uniform_histogram(1).unwrap();
        let g = gram(&f).unwrap();
        let sol = dual_solve(&[Slab::new(0, 0.7, 0.2)], &g).unwrap();
        assert!((sol.coefficients()[0] - 0.5).abs() < 1e-12);
        let sol = dual_solve(&[Slab::new(0, -0.1, 0.2)], &g).unwrap();
        assert_eq!(sol.coefficients()[0], 0.0);
    }

    #[test]
    fn dual_zero_centres() {
        let (f, _) = gaussian_kernel_family(3, &[8.0], false).unwrap();
        let g = gram(&f).unwrap();
        let slabs: Vec<Slab> = (0..3).map(|k| Slab::new(k, 0.0, 0.1)).collect();
        let sol = dual_solve(&slabs, &g).unwrap();
        assert!(sol.coefficients().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn dual_rejects_indefinite_gram() {
        let g = GramMatrix::from_entries(7, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        let e = dual_solve(&[Slab::new(0, 1.0, 0.1)], &g).unwrap_err();
        assert!(matches!(e, Error::DualIllPosed(_)));
    }

    #[test]
    fn soft_threshold_uniform_two_bins() {
        let (f, cert) = uniform_histogram(2).unwrap();
        let pts: Vec<f64> = (0..1024).map(|i| (i as f64 + 0.5) / 1024.0).collect();
        let s = Sample::new(pts);
        let c = EstimatorConfig::new(method(IntervalTag::Theorem1), 0.1).unwrap();
        let g = soft_threshold(&s, &f, &cert, &c).unwrap();
        let set = build_slabs(&s, &f, &cert, &c).unwrap();
        for (k, &a) in g.coefficients().iter().enumerate() {
            assert!(a > 0.0);
            assert!(set.slabs[k].contains_coefficient(1.0));
            assert!((a - (1.0 - set.slabs[k].halfwidth)).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_threshold_needs_orthogonality() {
        let (f, cert) = gaussian_kernel_family(3, &[8.0], false).unwrap();
        let c = EstimatorConfig::new(method(IntervalTag::Theorem1), 0.1).unwrap();
        let s = Sample::new(vec![0.5]);
        assert_eq!(soft_threshold(&s, &f, &cert, &c).unwrap_err(), Error::OrthogonalityRequired);
    }

    #[test]
    fn cap_on_non_orthonormal_is_rejected() {
        let (f, cert) = haar_family(1);
        let c = EstimatorConfig::new(method(IntervalTag::Theorem1), 0.1).unwrap().with_cap(2.0).unwrap();
        let s = Sample::new(vec![0.2, 0.7]);
        assert_eq!(soft_threshold(&s, &f, &cert, &c).unwrap_err(), Error::CapRequiresOrthonormal);
    }

    #[test]
    fn hard_threshold_keeps_coarse_levels() {
        let (f, _) = haar_family(3);
        let s = Sample::new(vec![0.1, 0.2, 0.6, 0.9]);
        let all = hard_threshold_baseline(&s, &f, 0.0).unwrap();
        let none = hard_threshold_baseline(&s, &f, 1e9).unwrap();
        assert_eq!(all.coefficients()[0], 1.0);
        for (k, label) in f.labels().iter().enumerate() {
            let Label::Wavelet { level, .. } = *label else { unreachable!() };
            if level <= 0 {
                assert_eq!(none.coefficients()[k], all.coefficients()[k]);
            } else {
                assert_eq!(none.coefficients()[k], 0.0);
            }
        }
        // psi_{0,0}: two points left, two right
        assert_eq!(all.coefficients()[1], 0.0);
    }

    #[test]
    fn multiple_kernel_smoke() {
        let s = Sample::new((0..16).map(|i| (i as f64 + 0.5) / 16.0).collect());
        let c = EstimatorConfig::new(kernel_default_method(), 0.1).unwrap();
        let (f, g, trace) = fit_multiple_kernel(&s, &c).unwrap();
        assert_eq!(f.len(), 6 * 16 + 1);
        assert!(!trace.budget_exhausted);
        assert!(g.coefficients().iter().all(|c| c.is_finite()));
        assert!(fit_multiple_kernel(&Sample::new(vec![]), &c).is_err());
    }

    #[test]
    fn record_round_trips_through_json() {
        let (f, _) = uniform_histogram(2).unwrap();
        let rec = EstimateRecord {
            family: f.descriptor().clone(),
            coefficients: vec![0.9, 1.1],
            config: EstimatorConfig::new(method(IntervalTag::ImprovedGrid { a: 2.0 }), 0.1).unwrap(),
            algorithm: "greedy".into(),
            trace: Some(TraceSummary { steps: 2, final_gain: 0.0, budget_exhausted: false, total_gain: 1.0 }),
        };
        let text = serde_json::to_string(&rec).unwrap();
        assert_eq!(serde_json::from_str::<EstimateRecord>(&text).unwrap(), rec);
    }
}
