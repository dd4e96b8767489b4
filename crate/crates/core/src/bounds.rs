//! Confidence intervals for the projection coefficients `alpha_bar_k`.
//!
//! Every construction turns the sample evaluations `f_k(X_i)` into an interval
//! `[lo, hi]` in coefficient units; estimators then use the interval as a slab.
//!
//! * `theorem1`: symmetric slab of halfwidth `sqrt(beta / D_k)` from the
//!   second-moment deviation bound.
//! * `improved`: log-moment (Catoni-type) bounds for bounded functions at a
//!   fixed pair of `beta`, optimized over a geometric grid in `grid`.
//! * `histogram`: closed form for indicators.
//! * `haar`: closed form for `{-1, 0, 1}`-valued wavelets.
//! * `loo`: leave-one-out bounds for data-anchored functions.
//! * `asymptotic`: first-order normal-approximation intervals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bases::{BasisFamily, FamilyDescriptor, HpCertificate, Label};
use crate::error::{Error, Result};
use crate::sample::Sample;

/// What is kept of the evaluations `f_k(X_1), ..., f_k(X_N)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleValues {
    /// Only the moments.
    Summary,
    /// Every evaluation.
    Raw(Vec<f64>),
    /// Counts of `+1`, `-1` and `0` for `{-1, 0, 1}`-valued functions.
    Ternary { plus: usize, minus: usize, zero: usize },
}

/// Empirical summaries of one family member on the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientEstimate {
    pub k: usize,
    pub n: usize,
    /// `(1/N) sum f_k(X_i)`
    pub mean: f64,
    /// `mean / D_k`
    pub alpha_hat: f64,
    /// `(1/N) sum f_k(X_i)^2`
    pub sum_sq: f64,
    /// `(1/N) sum (f_k(X_i) - mean)^2`
    pub v_hat: f64,
    pub values: SampleValues,
}

impl CoefficientEstimate {
    /// Summaries from raw evaluations; `retain` keeps them (as counts when
    /// every value is -1, 0 or 1).
    pub fn from_values(k: usize, d_k: f64, vals: &[f64], retain: bool) -> Self {
        let n = vals.len();
        let nf = n as f64;
        let mean = vals.iter().sum::<f64>() / nf;
        let sum_sq = vals.iter().map(|v| v * v).sum::<f64>() / nf;
        let v_hat = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        let values = if !retain {
            SampleValues::Summary
        } else if vals.iter().all(|&v| v == 0.0 || v == 1.0 || v == -1.0) {
            let plus = vals.iter().filter(|&&v| v == 1.0).count();
            let minus = vals.iter().filter(|&&v| v == -1.0).count();
            SampleValues::Ternary { plus, minus, zero: n - plus - minus }
        } else {
            SampleValues::Raw(vals.to_vec())
        };
        Self { k, n, mean, alpha_hat: mean / d_k, sum_sq, v_hat: v_hat.min(sum_sq), values }
    }

    /// `(1/N) sum psi(X_i)` and `(1/N) sum psi(X_i)^2` from ternary counts.
    pub fn ternary_moments(&self) -> Option<(f64, f64)> {
        match self.values {
            SampleValues::Ternary { plus, minus, .. } => {
                let n = self.n as f64;
                Some(((plus as f64 - minus as f64) / n, (plus + minus) as f64 / n))
            }
            _ => None,
        }
    }
}

/// Evaluates every member on the sample.
pub fn estimate_coefficients(
    family: &BasisFamily,
    sample: &Sample,
    retain: bool,
) -> Result<Vec<CoefficientEstimate>> {
    if sample.is_empty() {
        return Err(Error::SampleTooSmall { needed: 1, got: 0 });
    }
    let mut buf = vec![0.0; sample.len()];
    Ok((0..family.len())
        .map(|k| {
            let f = family.function(k);
            for (b, &x) in buf.iter_mut().zip(sample.points()) {
                *b = f.eval(x);
            }
            CoefficientEstimate::from_values(k, family.norms()[k], &buf, retain)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum IntervalTag {
    Theorem1,
    ImprovedGrid { a: f64 },
    HistogramClosed,
    HaarClosed { a: f64 },
    Asymptotic { literal: bool },
    LeaveOneOut { a: f64 },
}

/// Which union bound enters the `log(2m/eps)` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnionBound {
    /// Simultaneous over all `m` members.
    AllM,
    /// One member at a time (`m` replaced by 1).
    Individual,
}

impl UnionBound {
    pub fn m_effective(&self, m: usize) -> usize {
        match self {
            UnionBound::AllM => m.max(1),
            UnionBound::Individual => 1,
        }
    }
}

impl FromStr for UnionBound {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "all-m" | "all_m" => Ok(UnionBound::AllM),
            "individual" => Ok(UnionBound::Individual),
            _ => Err(Error::InvalidConfig(format!("unknown union bound {s:?}"))),
        }
    }
}

impl fmt::Display for UnionBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnionBound::AllM => "all",
            UnionBound::Individual => "individual",
        })
    }
}

pub const DEFAULT_GRID_BASE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalMethod {
    pub tag: IntervalTag,
    pub union_bound: UnionBound,
}

impl IntervalMethod {
    pub fn new(tag: IntervalTag, union_bound: UnionBound) -> Result<Self> {
        match tag {
            IntervalTag::ImprovedGrid { a }
            | IntervalTag::HaarClosed { a }
            | IntervalTag::LeaveOneOut { a }
                if !(a > 1.0 && a.is_finite()) =>
            {
                Err(Error::InvalidConfig(format!("grid base must exceed 1, got {a}")))
            }
            _ => Ok(Self { tag, union_bound }),
        }
    }

    /// Whether the method needs the individual evaluations.
    pub fn needs_values(&self) -> bool {
        matches!(
            self.tag,
            IntervalTag::ImprovedGrid { .. } | IntervalTag::HaarClosed { .. } | IntervalTag::LeaveOneOut { .. }
        )
    }

    /// Flag spelling: `theorem1`, `improved-grid[:a]`, `histogram`, `haar[:a]`,
    /// `asymptotic-literal`, `asymptotic-corrected`, `loo[:a]`.
    pub fn tag_name(&self) -> String {
        match self.tag {
            IntervalTag::Theorem1 => "theorem1".into(),
            IntervalTag::ImprovedGrid { a } => with_base("improved-grid", a),
            IntervalTag::HistogramClosed => "histogram".into(),
            IntervalTag::HaarClosed { a } => with_base("haar", a),
            IntervalTag::Asymptotic { literal: true } => "asymptotic-literal".into(),
            IntervalTag::Asymptotic { literal: false } => "asymptotic-corrected".into(),
            IntervalTag::LeaveOneOut { a } => with_base("loo", a),
        }
    }
}

fn with_base(name: &str, a: f64) -> String {
    if a == DEFAULT_GRID_BASE {
        name.into()
    } else {
        format!("{name}:{a}")
    }
}

impl FromStr for IntervalTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, base) = match s.split_once(':') {
            Some((n, b)) => {
                let a: f64 =
                    b.parse().map_err(|_| Error::InvalidConfig(format!("bad grid base in {s:?}")))?;
                (n, a)
            }
            None => (s, DEFAULT_GRID_BASE),
        };
        let tag = match name {
            "theorem1" => IntervalTag::Theorem1,
            "improved-grid" => IntervalTag::ImprovedGrid { a: base },
            "histogram" => IntervalTag::HistogramClosed,
            "haar" => IntervalTag::HaarClosed { a: base },
            "asymptotic-literal" => IntervalTag::Asymptotic { literal: true },
            "asymptotic-corrected" => IntervalTag::Asymptotic { literal: false },
            "loo" => IntervalTag::LeaveOneOut { a: base },
            _ => return Err(Error::InvalidConfig(format!("unknown interval method {s:?}"))),
        };
        IntervalMethod::new(tag, UnionBound::AllM).map(|m| m.tag)
    }
}

/// A confidence interval for one coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    /// Set when the requested construction was unavailable (empty grid,
    /// `beta` out of range, crossed edges) and the `theorem1` slab was used.
    pub fallback: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi, fallback: false }
    }

    pub fn point(v: f64) -> Self {
        Self::new(v, v)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    /// Membership with the edges pushed out by `tol`.
    pub fn contains_within(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }
}

fn check_level(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(eps))
    }
}

/// `beta(eps, k) = 4 [1 + log(2 m_eff / eps)] / N * [sum_sq / D_k + C_k]`,
/// the deviation bound on `d^2(alpha_hat_k f_k, alpha_bar_k f_k)`.
pub fn beta_theorem1(
    est: &CoefficientEstimate,
    family: &BasisFamily,
    cert: &HpCertificate,
    eps: f64,
    m_effective: usize,
) -> Result<f64> {
    check_level(eps)?;
    let d = family.norms()[est.k];
    let log_term = 1.0 + (2.0 * m_effective.max(1) as f64 / eps).ln();
    Ok(4.0 * log_term / est.n as f64 * (est.sum_sq / d + cert.big_c(est.k)))
}

/// `alpha_hat_k +- sqrt(beta / D_k)`.
pub fn theorem1_interval(
    est: &CoefficientEstimate,
    family: &BasisFamily,
    cert: &HpCertificate,
    eps: f64,
    m_effective: usize,
) -> Result<Interval> {
    let beta = beta_theorem1(est, family, cert, eps, m_effective)?;
    let rho = (beta / family.norms()[est.k]).sqrt();
    Ok(Interval::new(est.alpha_hat - rho, est.alpha_hat + rho))
}

/// Borrowed view of the evaluations, optionally leaving one observation out.
#[derive(Debug, Clone, Copy)]
enum Values<'a> {
    Raw { vals: &'a [f64], skip: Option<usize> },
    Ternary { plus: usize, minus: usize },
}

impl Values<'_> {
    /// `sum_i log(1 + s * f(X_i))`, `s` any sign. Errors when an argument is
    /// not positive.
    fn log_sum(&self, s: f64) -> Result<f64> {
        let term = |v: f64| -> Result<f64> {
            let x = s * v;
            if x <= -1.0 {
                Err(Error::InvalidBeta(s))
            } else {
                Ok(x.ln_1p())
            }
        };
        match *self {
            Values::Raw { vals, skip } => {
                let mut acc = 0.0;
                for (i, &v) in vals.iter().enumerate() {
                    if Some(i) != skip {
                        acc += term(v)?;
                    }
                }
                Ok(acc)
            }
            Values::Ternary { plus, minus } => {
                let mut acc = 0.0;
                if plus > 0 {
                    acc += plus as f64 * term(1.0)?;
                }
                if minus > 0 {
                    acc += minus as f64 * term(-1.0)?;
                }
                Ok(acc)
            }
        }
    }
}

fn values_of(est: &CoefficientEstimate) -> Result<Values<'_>> {
    match &est.values {
        SampleValues::Raw(v) => Ok(Values::Raw { vals: v, skip: None }),
        SampleValues::Ternary { plus, minus, .. } => Ok(Values::Ternary { plus: *plus, minus: *minus }),
        SampleValues::Summary => Err(Error::MissingRawValues(est.k)),
    }
}

/// Log-moment interval at fixed `beta1` (lower edge) and `beta2` (upper
/// edge) from `count` observations, confidence term `ell = log(2 m / eps)`.
fn log_moment_interval(
    vals: Values<'_>,
    count: usize,
    d: f64,
    ell: f64,
    beta1: f64,
    beta2: f64,
) -> Result<Interval> {
    let nf = count as f64;
    let plus = vals.log_sum(beta1 / nf)? / nf;
    let minus = vals.log_sum(-beta2 / nf)? / nf;
    let lo = nf * (plus - ell / nf).exp_m1() / (d * beta1);
    let hi = -nf * (minus - ell / nf).exp_m1() / (d * beta2);
    Ok(Interval::new(lo, hi))
}

fn require_bounded(cert: &HpCertificate, what: &str) -> Result<()> {
    if cert.is_bounded_functions() {
        Ok(())
    } else {
        Err(Error::MethodNotApplicable {
            method: what.into(),
            reason: "needs uniformly bounded basis functions".into(),
        })
    }
}

/// Log-moment bounds at fixed `beta1`, `beta2`, each in `(0, N / sqrt(C_k D_k))`.
pub fn alpha_bounds_improved(
    est: &CoefficientEstimate,
    family: &BasisFamily,
    cert: &HpCertificate,
    eps: f64,
    beta1: f64,
    beta2: f64,
    m_effective: usize,
) -> Result<Interval> {
    check_level(eps)?;
    require_bounded(cert, "improved")?;
    let d = family.norms()[est.k];
    let limit = est.n as f64 / (cert.big_c(est.k) * d).sqrt();
    for b in [beta1, beta2] {
        if !(b > 0.0 && b < limit) {
            return Err(Error::InvalidBeta(b));
        }
    }
    let ell = (2.0 * m_effective.max(1) as f64 / eps).ln();
    log_moment_interval(values_of(est)?, est.n, d, ell, beta1, beta2)
}

/// `{a^l : 0 <= l <= floor(log(ratio) / log a) - 1}`.
pub fn beta_grid(ratio: f64, a: f64) -> Vec<f64> {
    if !(ratio > 1.0) {
        return Vec::new();
    }
    let top = (ratio.ln() / a.ln()).floor() as i64;
    (0..top).map(|l| a.powi(l as i32)).collect()
}

/// Level after the union bound over the grid: `eps log a / log(ratio)`.
pub fn grid_level(eps: f64, a: f64, ratio: f64) -> f64 {
    eps * a.ln() / ratio.ln()
}

fn grid_optimize<F>(grid: &[f64], mut at: F) -> Result<Interval>
where
    F: FnMut(f64) -> Result<Interval>,
{
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for &b in grid {
        let iv = at(b)?;
        lo = lo.max(iv.lo);
        hi = hi.min(iv.hi);
    }
    Ok(Interval::new(lo, hi))
}

fn flagged(mut iv: Interval) -> Interval {
    iv.fallback = true;
    iv
}

/// Log-moment bounds optimized over the geometric grid of `beta`, at the
/// grid-adjusted level. Falls back to the `theorem1` slab (flagged) when
/// the grid is empty.
pub fn alpha_bounds_grid(
    est: &CoefficientEstimate,
    family: &BasisFamily,
    cert: &HpCertificate,
    eps: f64,
    a: f64,
    m_effective: usize,
) -> Result<Interval> {
    check_level(eps)?;
    require_bounded(cert, "improved-grid")?;
    let d = family.norms()[est.k];
    let ratio = est.n as f64 / (cert.big_c(est.k) * d).sqrt();
    let grid = beta_grid(ratio, a);
    if grid.is_empty() {
        return theorem1_interval(est, family, cert, eps, m_effective).map(flagged);
    }
    let eps_adj = grid_level(eps, a, ratio);
    let ell = (2.0 * m_effective.max(1) as f64 / eps_adj).ln();
    let vals = values_of(est)?;
    grid_optimize(&grid, |b| log_moment_interval(vals, est.n, d, ell, b, b))
}

/// Level used by the histogram closed form: `eps log 2 / log(N / sqrt(lambda))`.
fn histogram_level(eps: f64, lambda: f64, n: usize) -> f64 {
    eps * 2f64.ln() / (n as f64 / lambda.sqrt()).ln()
}

/// Closed-form lower confidence bound for an indicator coefficient,
/// `alpha_hat q - sqrt(2 q (1 - q) p (1 - p)) / lambda` with
/// `q = (eps' / 2m)^(1/N)`, `p = alpha_hat lambda` and the grid-adjusted
/// level `eps'`.
pub fn alpha_lower_histogram(alpha_hat: f64, lambda: f64, eps: f64, m_effective: usize, n: usize) -> f64 {
    let eps_adj = histogram_level(eps, lambda, n);
    let q = (-(2.0 * m_effective.max(1) as f64 / eps_adj).ln() / n as f64).exp();
    let p = (alpha_hat * lambda).clamp(0.0, 1.0);
    alpha_hat * q - (2.0 * q * (1.0 - q) * p * (1.0 - p)).sqrt() / lambda
}

/// Matching upper bound, from the lower bound of the complementary
/// indicator `1 - f_k`.
pub fn alpha_upper_histogram(alpha_hat: f64, lambda: f64, eps: f64, m_effective: usize, n: usize) -> f64 {
    let p = (alpha_hat * lambda).clamp(0.0, 1.0);
    let complement = alpha_lower_histogram((1.0 - p) / lambda, lambda, eps, m_effective, n);
    (1.0 - complement * lambda) / lambda
}

/// The `beta` at which the closed form is attained; `None` when the
/// empirical frequency is 0 or 1.
pub fn histogram_optimal_beta(alpha_hat: f64, lambda: f64, eps: f64, m_effective: usize, n: usize) -> Option<f64> {
    let eps_adj = histogram_level(eps, lambda, n);
    let q = (-(2.0 * m_effective.max(1) as f64 / eps_adj).ln() / n as f64).exp();
    let p = alpha_hat * lambda;
    let var = p * (1.0 - p);
    if var <= 0.0 {
        return None;
    }
    let nf = n as f64;
    Some((2.0 * nf * nf * (1.0 - q) / (q * var)).sqrt())
}

/// Histogram interval; uses the `theorem1` slab (flagged) when the optimal
/// `beta` leaves `[1, N / (2 sqrt(lambda))]`.
pub fn histogram_interval(
    est: &CoefficientEstimate,
    family: &BasisFamily,
    cert: &HpCertificate,
    eps: f64,
    m_effective: usize,
) -> Result<Interval> {
    check_level(eps)?;
    let lambda = family.norms()[est.k];
    let n = est.n;
    let ratio = n as f64 / lambda.sqrt();
    let in_range = histogram_optimal_beta(est.alpha_hat, lambda, eps, m_effective, n)
        .is_some_and(|b| (1.0..=0.5 * ratio).contains(&b));
    if ratio <= 2.0 || !in_range {
        return theorem1_interval(est, family, cert, eps, m_effective).map(flagged);
    }
    Ok(Interval::new(
        alpha_lower_histogram(est.alpha_hat, lambda, eps, m_effective, n),
        alpha_upper_histogram(est.alpha_hat, lambda, eps, m_effective, n),
    ))
}

/// `(1/N) sum log(1 - (beta/N) psi(X_i))` for a `{-1, 0, 1}`-valued function,
/// written with `P psi` and `P psi^2`:
/// `1/2 P psi^2 log(1 - beta^2/N^2) - 1/2 P psi log((1 + beta/N) / (1 - beta/N))`.
pub fn haar_log_moment(p_psi: f64, p_psi2: f64, beta: f64, n: usize) -> f64 {
    let r = beta / n as f64;
    0.5 * p_psi2 * (-r * r).ln_1p() - 0.5 * p_psi * (r.ln_1p() - (-r).ln_1p())
}

/// Haar interval at fixed `beta1`, `beta2` from the two empirical moments.
pub fn alpha_bounds_haar_at(
    est: &CoefficientEstimate,
    d: f64,
    eps: f64,
    beta1: f64,
    beta2: f64,
    m_effective: usize,
) -> Result<Interval> {
    check_level(eps)?;
    let (p1, p2) = est.ternary_moments().ok_or(Error::MethodNotApplicable {
        method: "haar".into(),
        reason: "values are not {-1, 0, 1}".into(),
    })?;
    let n = est.n;
    let nf = n as f64;
    for b in [beta1, beta2] {
        if !(b > 0.0 && b < nf) {
            return Err(Error::InvalidBeta(b));
        }
    }
    let ell = (2.0 * m_effective.max(1) as f64 / eps).ln();
    // log(1 + (beta/N) psi) is the same expression with psi -> -psi
    let plus = haar_log_moment(-p1, p2, beta1, n);
    let minus = haar_log_moment(p1, p2, beta2, n);
    let lo = nf * (plus - ell / nf).exp_m1() / (d * beta1);
    let hi = -nf * (minus - ell / nf).exp_m1() / (d * beta2);
    Ok(Interval::new(lo, hi))
}

/// Haar closed form optimized over the base-`a` grid, `beta < N`.
pub fn alpha_bounds_haar(
    est: &CoefficientEstimate,
    family: &BasisFamily,
    cert: &HpCertificate,
    eps: f64,
    a: f64,
    m_effective: usize,
) -> Result<Interval> {
    check_level(eps)?;
    let d = family.norms()[est.k];
    let ratio = est.n as f64 / (cert.big_c(est.k) * d).sqrt();
    let grid = beta_grid(ratio, a);
    if grid.is_empty() {
        return theorem1_interval(est, family, cert, eps, m_effective).map(flagged);
    }
    let eps_adj = grid_level(eps, a, ratio);
    grid_optimize(&grid, |b| alpha_bounds_haar_at(est, d, eps_adj, b, b, m_effective))
}

/// Leave-one-out interval for a data-anchored member: the `N - 1` other
/// observations, grid-optimized.
pub fn alpha_bounds_loo(
    est: &CoefficientEstimate,
    family: &BasisFamily,
    cert: &HpCertificate,
    eps: f64,
    a: f64,
    m_effective: usize,
) -> Result<Interval> {
    check_level(eps)?;
    require_bounded(cert, "loo")?;
    let k = est.k;
    let anchor = family.anchor(k).ok_or(Error::MethodNotApplicable {
        method: "loo".into(),
        reason: format!("member {k} is not anchored at an observation"),
    })?;
    if est.n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: est.n });
    }
    let vals = match &est.values {
        SampleValues::Raw(v) => Values::Raw { vals: v, skip: Some(anchor) },
        SampleValues::Ternary { .. } | SampleValues::Summary => return Err(Error::MissingRawValues(k)),
    };
    let count = est.n - 1;
    let d = family.norms()[k];
    let ratio = count as f64 / (cert.big_c(k) * d).sqrt();
    let grid = beta_grid(ratio, a);
    if grid.is_empty() {
        return theorem1_interval(est, family, cert, eps, m_effective).map(flagged);
    }
    let eps_adj = grid_level(eps, a, ratio);
    let ell = (2.0 * m_effective.max(1) as f64 / eps_adj).ln();
    grid_optimize(&grid, |b| log_moment_interval(vals, count, d, ell, b, b))
}

/// Normal-approximation interval around `alpha_hat`. `literal` uses the
/// halfwidth `sqrt(log(2m/eps) V / N)`; otherwise the first-order expansion
/// of the log-moment bound, `sqrt(2 V log(2m/eps) / N) / D_k`.
pub fn asymptotic_interval(
    est: &CoefficientEstimate,
    eps: f64,
    m_effective: usize,
    d_k: f64,
    literal: bool,
) -> Result<Interval> {
    check_level(eps)?;
    let ell = (2.0 * m_effective.max(1) as f64 / eps).ln();
    let v = est.v_hat.max(0.0);
    let nf = est.n as f64;
    let hw = if literal { (ell * v / nf).sqrt() } else { (2.0 * v * ell / nf).sqrt() / d_k };
    Ok(Interval::new(est.alpha_hat - hw, est.alpha_hat + hw))
}

fn not_applicable(method: &IntervalMethod, reason: &str) -> Error {
    Error::MethodNotApplicable { method: method.tag_name(), reason: reason.into() }
}

/// Interval for every member under `method`. Intervals whose edges cross
/// are replaced by the `theorem1` slab and flagged.
pub fn intervals(
    family: &BasisFamily,
    cert: &HpCertificate,
    estimates: &[CoefficientEstimate],
    method: &IntervalMethod,
    eps: f64,
) -> Result<Vec<Interval>> {
    check_level(eps)?;
    let m_eff = method.union_bound.m_effective(family.len());
    match method.tag {
        IntervalTag::HistogramClosed
            if !matches!(family.descriptor(), FamilyDescriptor::Histogram { .. }) =>
        {
            return Err(not_applicable(method, "needs a histogram family"));
        }
        IntervalTag::HaarClosed { .. } if !matches!(family.descriptor(), FamilyDescriptor::Haar { .. }) => {
            return Err(not_applicable(method, "needs a Haar family"));
        }
        IntervalTag::LeaveOneOut { .. } if family.anchor(0).is_none() => {
            return Err(not_applicable(method, "needs a data-anchored family"));
        }
        _ => {}
    }
    estimates
        .iter()
        .map(|est| {
            let d = family.norms()[est.k];
            let iv = match method.tag {
                IntervalTag::Theorem1 => theorem1_interval(est, family, cert, eps, m_eff)?,
                IntervalTag::ImprovedGrid { a } => alpha_bounds_grid(est, family, cert, eps, a, m_eff)?,
                IntervalTag::HistogramClosed => histogram_interval(est, family, cert, eps, m_eff)?,
                IntervalTag::HaarClosed { a } => {
                    if family.labels()[est.k] == (Label::Wavelet { level: -1, shift: 0 }) {
                        // the father coefficient of a density on [0, 1] is exactly 1
                        Interval::point(1.0)
                    } else {
                        alpha_bounds_haar(est, family, cert, eps, a, m_eff)?
                    }
                }
                IntervalTag::Asymptotic { literal } => asymptotic_interval(est, eps, m_eff, d, literal)?,
                IntervalTag::LeaveOneOut { a } => alpha_bounds_loo(est, family, cert, eps, a, m_eff)?,
            };
            if iv.lo > iv.hi || !iv.lo.is_finite() || !iv.hi.is_finite() {
                theorem1_interval(est, family, cert, eps, m_eff).map(flagged)
            } else {
                Ok(iv)
            }
        })
        .collect()
}
