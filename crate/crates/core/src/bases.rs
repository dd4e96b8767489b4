//! Finite function families: histograms, non-normalized Haar wavelets, the
//! trigonometric system and Gaussian kernels, each with its squared norms
//! `D_k` and boundedness certificate.

use std::f64::consts::{PI, SQRT_2};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::sample::Sample;

static NEXT_FAMILY_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_FAMILY_ID.fetch_add(1, Ordering::Relaxed)
}

/// Nodes used for numerical inner products of families without a closed form.
pub const GRAM_QUADRATURE_NODES: usize = (1 << 12) + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigPhase {
    Const,
    Cos,
    Sin,
}

/// A single member `f_k` of a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisFunction {
    /// Indicator of `[lo, hi)`, or of `[lo, hi]` when `closed_right`.
    Indicator { lo: f64, hi: f64, closed_right: bool },
    /// `level == -1` is the father `1_[0,1]`; otherwise `psi(2^level x - shift)`
    /// with `psi = 1_[0,1/2) - 1_[1/2,1)`, not normalized.
    Haar { level: i32, shift: u32 },
    /// `1`, `sqrt(2) cos(2 pi freq x)` or `sqrt(2) sin(2 pi freq x)` on `[0, 1]`.
    Trig { freq: u32, phase: TrigPhase },
    /// `exp(-gamma (center - x)^2)` on the whole line.
    Gaussian { center: f64, gamma: f64 },
}

impl BasisFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            BasisFunction::Indicator { lo, hi, closed_right } => {
                if x >= lo && (x < hi || (closed_right && x == hi)) {
                    1.0
                } else {
                    0.0
                }
            }
            BasisFunction::Haar { level, shift } => {
                if level < 0 {
                    return if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 };
                }
                let scale = (1u64 << level) as f64;
                let y = scale * x - shift as f64;
                let last = shift as u64 + 1 == 1u64 << level;
                if (0.0..0.5).contains(&y) {
                    1.0
                } else if (0.5..1.0).contains(&y) || (last && y == 1.0) {
                    -1.0
                } else {
                    0.0
                }
            }
            BasisFunction::Trig { freq, phase } => {
                if !(0.0..=1.0).contains(&x) {
                    return 0.0;
                }
                let w = 2.0 * PI * freq as f64 * x;
                match phase {
                    TrigPhase::Const => 1.0,
                    TrigPhase::Cos => SQRT_2 * w.cos(),
                    TrigPhase::Sin => SQRT_2 * w.sin(),
                }
            }
            BasisFunction::Gaussian { center, gamma } => {
                let d = center - x;
                (-gamma * d * d).exp()
            }
        }
    }

    /// `D = ||f||^2`.
    pub fn norm_sq(&self) -> f64 {
        match *self {
            BasisFunction::Indicator { lo, hi, .. } => hi - lo,
            BasisFunction::Haar { level, .. } => {
                if level < 0 {
                    1.0
                } else {
                    (-(level as f64)).exp2()
                }
            }
            BasisFunction::Trig { .. } => 1.0,
            BasisFunction::Gaussian { gamma, .. } => (PI / (2.0 * gamma)).sqrt(),
        }
    }

    /// `sup |f|`.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            BasisFunction::Trig { phase: TrigPhase::Cos | TrigPhase::Sin, .. } => SQRT_2,
            _ => 1.0,
        }
    }

    /// Closed support, `None` for functions living on the whole line.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            BasisFunction::Indicator { lo, hi, .. } => Some((lo, hi)),
            BasisFunction::Haar { level, shift } => {
                if level < 0 {
                    Some((0.0, 1.0))
                } else {
                    let w = (-(level as f64)).exp2();
                    Some((shift as f64 * w, (shift as f64 + 1.0) * w))
                }
            }
            BasisFunction::Trig { .. } => Some((0.0, 1.0)),
            BasisFunction::Gaussian { .. } => None,
        }
    }

    /// Points where the function jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            BasisFunction::Indicator { lo, hi, .. } => vec![lo, hi],
            BasisFunction::Haar { level, shift } => {
                if level < 0 {
                    vec![0.0, 1.0]
                } else {
                    let w = (-(level as f64)).exp2();
                    let a = shift as f64 * w;
                    vec![a, a + 0.5 * w, a + w]
                }
            }
            BasisFunction::Trig { .. } => vec![0.0, 1.0],
            BasisFunction::Gaussian { .. } => Vec::new(),
        }
    }

    /// Smallest length scale on which the function varies; used to seed
    /// quadrature panels.
    pub fn feature_scale(&self) -> f64 {
        match *self {
            BasisFunction::Indicator { lo, hi, .. } => hi - lo,
            BasisFunction::Haar { level, .. } => 0.5 * (-(level.max(0) as f64)).exp2(),
            BasisFunction::Trig { freq, .. } => 1.0 / (1.0 + 2.0 * freq as f64),
            BasisFunction::Gaussian { gamma, .. } => 1.0 / gamma.sqrt(),
        }
    }

    fn is_piecewise_constant(&self) -> bool {
        matches!(
            self,
            BasisFunction::Indicator { .. }
                | BasisFunction::Haar { .. }
                | BasisFunction::Trig { phase: TrigPhase::Const, .. }
        )
    }

    /// `<f, g>` in closed form when one exists.
    pub fn analytic_inner(&self, other: &BasisFunction) -> Option<f64> {
        use BasisFunction::*;
        match (*self, *other) {
            (Gaussian { center: u, gamma: g1 }, Gaussian { center: v, gamma: g2 }) => {
                let s = g1 + g2;
                Some((PI / s).sqrt() * (-g1 * g2 * (u - v) * (u - v) / s).exp())
            }
            (Gaussian { center, gamma }, ind @ (Indicator { .. } | Trig { phase: TrigPhase::Const, .. }))
            | (ind @ (Indicator { .. } | Trig { phase: TrigPhase::Const, .. }), Gaussian { center, gamma }) => {
                let (lo, hi) = ind.support().expect("bounded support");
                Some(gaussian_mass(center, gamma, lo, hi))
            }
            (Trig { freq: f1, phase: p1 }, Trig { freq: f2, phase: p2 }) => {
                Some(if f1 == f2 && p1 == p2 { 1.0 } else { 0.0 })
            }
            (a, b) if a.is_piecewise_constant() && b.is_piecewise_constant() => {
                Some(piecewise_constant_inner(&a, &b))
            }
            _ => None,
        }
    }
}

/// `int_lo^hi exp(-gamma (x - center)^2) dx`.
pub fn gaussian_mass(center: f64, gamma: f64, lo: f64, hi: f64) -> f64 {
    let s = gamma.sqrt();
    0.5 * (PI / gamma).sqrt() * (libm::erf(s * (hi - center)) - libm::erf(s * (lo - center)))
}

fn piecewise_constant_inner(a: &BasisFunction, b: &BasisFunction) -> f64 {
    let mut cuts = a.breakpoints();
    cuts.extend(b.breakpoints());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (w[1] - w[0]) * a.eval(mid) * b.eval(mid)
        })
        .sum()
}

/// Per-function descriptor used in reports and estimate files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Label {
    Cell { index: usize },
    Wavelet { level: i32, shift: u32 },
    Trig { freq: u32, phase: TrigPhase },
    /// Gaussian centred at grid point `i / n`, bandwidth number `j`.
    Kernel { i: usize, j: usize },
    /// Gaussian anchored at observation `anchor`, kernel number `j`.
    Anchored { anchor: usize, j: usize },
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerProductRule {
    Orthogonal,
    AnalyticGaussian,
    Quadrature,
}

/// Serializable recipe for a family, `{"type": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum FamilyDescriptor {
    Histogram { cells: Vec<(f64, f64)> },
    Haar { max_level: u32 },
    Trig { m: usize, c: f64 },
    Gaussian { n: usize, gammas: Vec<f64>, constant: bool },
    DataGaussian { gammas: Vec<f64>, n: usize },
}

/// Equispaced Gaussian grid layout, kept for fast structured inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub n: usize,
    pub gammas: Vec<f64>,
    pub constant: bool,
}

impl KernelGrid {
    pub fn center(&self, i: usize) -> f64 {
        (i + 1) as f64 / self.n as f64
    }
}

/// The finite family `(f_1, ..., f_m)`.
#[derive(Debug, Clone)]
pub struct BasisFamily {
    id: u64,
    descriptor: FamilyDescriptor,
    functions: Vec<BasisFunction>,
    labels: Vec<Label>,
    norms: Vec<f64>,
    support: (f64, f64),
    rule: InnerProductRule,
    orthonormal: bool,
    grid: Option<KernelGrid>,
}

impl BasisFamily {
    fn build(
        descriptor: FamilyDescriptor,
        functions: Vec<BasisFunction>,
        labels: Vec<Label>,
        support: (f64, f64),
        rule: InnerProductRule,
        grid: Option<KernelGrid>,
    ) -> Self {
        let norms: Vec<f64> = functions.iter().map(BasisFunction::norm_sq).collect();
        let orthonormal =
            rule == InnerProductRule::Orthogonal && norms.iter().all(|d| (d - 1.0).abs() < 1e-14);
        Self { id: fresh_id(), descriptor, functions, labels, norms, support, rule, orthonormal, grid }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn descriptor(&self) -> &FamilyDescriptor {
        &self.descriptor
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    pub fn function(&self, k: usize) -> &BasisFunction {
        &self.functions[k]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// `D_k = ||f_k||^2` for every member.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn rule(&self) -> InnerProductRule {
        self.rule
    }

    pub fn is_orthogonal(&self) -> bool {
        self.rule == InnerProductRule::Orthogonal
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn kernel_grid(&self) -> Option<&KernelGrid> {
        self.grid.as_ref()
    }

    /// Observation index a data-anchored member is built on.
    pub fn anchor(&self, k: usize) -> Option<usize> {
        match self.labels[k] {
            Label::Anchored { anchor, .. } => Some(anchor),
            _ => None,
        }
    }

    pub fn eval(&self, k: usize, x: f64) -> f64 {
        self.functions[k].eval(x)
    }

    /// `<f_i, f_k>`: closed form where available, otherwise composite Simpson
    /// over the overlap of the two supports.
    pub fn inner(&self, i: usize, k: usize) -> Result<f64> {
        let (a, b) = (&self.functions[i], &self.functions[k]);
        if let Some(v) = a.analytic_inner(b) {
            return Ok(v);
        }
        let (lo, hi) = overlap(a.support(), b.support(), self.support);
        if hi <= lo {
            return Ok(0.0);
        }
        let v = quad::composite_simpson(|x| a.eval(x) * b.eval(x), lo, hi, GRAM_QUADRATURE_NODES);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::FamilyNotSquareIntegrable(i))
        }
    }

    /// Interval outside which every member is numerically zero (below 1e-15
    /// in square), used as the integration window for distances.
    pub fn integration_window(&self) -> (f64, f64) {
        let mut lo = self.support.0;
        let mut hi = self.support.1;
        for f in &self.functions {
            if let BasisFunction::Gaussian { center, gamma } = *f {
                let pad = (17.5 / gamma).sqrt();
                lo = lo.min(center - pad);
                hi = hi.max(center + pad);
            }
        }
        (lo, hi)
    }
}

fn overlap(a: Option<(f64, f64)>, b: Option<(f64, f64)>, fallback: (f64, f64)) -> (f64, f64) {
    let (alo, ahi) = a.unwrap_or(fallback);
    let (blo, bhi) = b.unwrap_or(fallback);
    (alo.max(blo), ahi.min(bhi))
}

/// Hölder exponent `p` of the moment-domination hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exponent {
    One,
    Finite(f64),
    Infinity,
}

/// Known constants `(c, c_1, ..., c_m)` under which the family and the
/// density satisfy the moment-domination hypothesis; `C_k = c_k c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpCertificate {
    pub p: Exponent,
    pub c: f64,
    pub c_k: Vec<f64>,
}

impl HpCertificate {
    /// Uniformly bounded functions: `|f_k| <= sqrt(c_k D_k)`, `c = 1`.
    pub fn bounded_functions(c_k: Vec<f64>) -> Self {
        Self { p: Exponent::Infinity, c: 1.0, c_k }
    }

    /// Density bounded by `c`; all `c_k = 1`.
    pub fn bounded_density(c: f64, m: usize) -> Self {
        Self { p: Exponent::One, c, c_k: vec![1.0; m] }
    }

    pub fn general(p: f64, c: f64, c_k: Vec<f64>) -> Self {
        Self { p: Exponent::Finite(p), c, c_k }
    }

    /// `C_k = c_k c`.
    pub fn big_c(&self, k: usize) -> f64 {
        self.c_k[k] * self.c
    }

    pub fn big_c_all(&self) -> Vec<f64> {
        self.c_k.iter().map(|ck| ck * self.c).collect()
    }

    pub fn is_bounded_functions(&self) -> bool {
        self.p == Exponent::Infinity
    }
}

/// Indicators of the given disjoint cells. Cells are half-open `[a, b)`
/// except the right-most, which is closed.
pub fn histogram_family(partition: &[(f64, f64)]) -> Result<(BasisFamily, HpCertificate)> {
    if partition.is_empty() {
        return Err(Error::InvalidPartition("no cells".into()));
    }
    for &(a, b) in partition {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::InvalidPartition(format!("cell [{a}, {b}) has non-positive length")));
        }
    }
    let mut order: Vec<usize> = (0..partition.len()).collect();
    order.sort_by(|&i, &j| partition[i].0.total_cmp(&partition[j].0));
    for w in order.windows(2) {
        let (_, prev_hi) = partition[w[0]];
        let (next_lo, _) = partition[w[1]];
        if next_lo < prev_hi {
            return Err(Error::InvalidPartition(format!(
                "cells {:?} and {:?} overlap",
                partition[w[0]], partition[w[1]]
            )));
        }
    }
    let last = *order.last().expect("nonempty");
    let functions: Vec<BasisFunction> = partition
        .iter()
        .enumerate()
        .map(|(k, &(lo, hi))| BasisFunction::Indicator { lo, hi, closed_right: k == last })
        .collect();
    let labels = (0..partition.len()).map(|index| Label::Cell { index }).collect();
    let support = (partition[order[0]].0, partition[last].1);
    let family = BasisFamily::build(
        FamilyDescriptor::Histogram { cells: partition.to_vec() },
        functions,
        labels,
        support,
        InnerProductRule::Orthogonal,
        None,
    );
    let cert = HpCertificate::bounded_functions(family.norms().iter().map(|d| 1.0 / d).collect());
    Ok((family, cert))
}

/// `bins` equal cells on `[0, 1]`.
pub fn uniform_histogram(bins: usize) -> Result<(BasisFamily, HpCertificate)> {
    if bins == 0 {
        return Err(Error::InvalidPartition("need at least one bin".into()));
    }
    let cells: Vec<(f64, f64)> =
        (0..bins).map(|k| (k as f64 / bins as f64, (k + 1) as f64 / bins as f64)).collect();
    histogram_family(&cells)
}

/// Father wavelet plus all non-normalized Haar wavelets of levels `0..=max_level`,
/// `m = 2^(max_level + 1)`. Supports tile `[0, 1]`: `psi_{j,k}(x) = psi(2^j x - k)`.
pub fn haar_family(max_level: u32) -> (BasisFamily, HpCertificate) {
    let mut functions = vec![BasisFunction::Haar { level: -1, shift: 0 }];
    let mut labels = vec![Label::Wavelet { level: -1, shift: 0 }];
    for level in 0..=max_level as i32 {
        for shift in 0..(1u32 << level) {
            functions.push(BasisFunction::Haar { level, shift });
            labels.push(Label::Wavelet { level, shift });
        }
    }
    let family = BasisFamily::build(
        FamilyDescriptor::Haar { max_level },
        functions,
        labels,
        (0.0, 1.0),
        InnerProductRule::Orthogonal,
        None,
    );
    // sup |psi_{j,k}| = 1 and D = 2^-j, so the tight constant is c = 2^j.
    let c_k = family.functions().iter().map(|f| f.sup_abs().powi(2) / f.norm_sq()).collect();
    (family, HpCertificate::bounded_functions(c_k))
}

/// Orthonormal trigonometric system `1, sqrt2 cos 2 pi x, sqrt2 sin 2 pi x, ...`
/// truncated to `m` members, for a density bounded by `c`.
pub fn trig_family(m: usize, c: f64) -> Result<(BasisFamily, HpCertificate)> {
    if m == 0 {
        return Err(Error::InvalidConfig("trigonometric family needs m >= 1".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidConfig(format!("density bound must be positive, got {c}")));
    }
    let mut functions = Vec::with_capacity(m);
    functions.push(BasisFunction::Trig { freq: 0, phase: TrigPhase::Const });
    let mut freq = 1;
    while functions.len() < m {
        functions.push(BasisFunction::Trig { freq, phase: TrigPhase::Cos });
        if functions.len() < m {
            functions.push(BasisFunction::Trig { freq, phase: TrigPhase::Sin });
        }
        freq += 1;
    }
    let labels = functions
        .iter()
        .map(|f| match *f {
            BasisFunction::Trig { freq, phase } => Label::Trig { freq, phase },
            _ => unreachable!(),
        })
        .collect();
    let family = BasisFamily::build(
        FamilyDescriptor::Trig { m, c },
        functions,
        labels,
        (0.0, 1.0),
        InnerProductRule::Orthogonal,
        None,
    );
    Ok((family, HpCertificate::bounded_density(c, m)))
}

fn check_gammas(gammas: &[f64]) -> Result<()> {
    if gammas.is_empty() {
        return Err(Error::InvalidConfig("need at least one kernel".into()));
    }
    for &g in gammas {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidBandwidth(g));
        }
    }
    Ok(())
}

/// `H(inf)` constant of a Gaussian bump: `sup = 1 = sqrt(C D)` gives `C = 1 / D`.
fn gaussian_certificate(functions: &[BasisFunction]) -> HpCertificate {
    HpCertificate::bounded_functions(
        functions.iter().map(|f| f.sup_abs().powi(2) / f.norm_sq()).collect(),
    )
}

/// Gaussian kernels `exp(-gamma_j (i/n - x)^2)`, `i = 1..=n`, one block of `n`
/// per bandwidth, optionally followed by `1_[0,1]`.
pub fn gaussian_kernel_family(
    n: usize,
    gammas: &[f64],
    constant: bool,
) -> Result<(BasisFamily, HpCertificate)> {
    if n == 0 {
        return Err(Error::InvalidConfig("kernel grid needs n >= 1".into()));
    }
    check_gammas(gammas)?;
    let grid = KernelGrid { n, gammas: gammas.to_vec(), constant };
    let mut functions = Vec::with_capacity(n * gammas.len() + constant as usize);
    let mut labels = Vec::with_capacity(functions.capacity());
    for (j, &gamma) in gammas.iter().enumerate() {
        for i in 0..n {
            functions.push(BasisFunction::Gaussian { center: grid.center(i), gamma });
            labels.push(Label::Kernel { i: i + 1, j });
        }
    }
    if constant {
        functions.push(BasisFunction::Indicator { lo: 0.0, hi: 1.0, closed_right: true });
        labels.push(Label::Constant);
    }
    let cert = gaussian_certificate(&functions);
    let family = BasisFamily::build(
        FamilyDescriptor::Gaussian { n, gammas: gammas.to_vec(), constant },
        functions,
        labels,
        (0.0, 1.0),
        InnerProductRule::AnalyticGaussian,
        Some(grid),
    );
    Ok((family, cert))
}

/// Bandwidths `2^(2j)`, `j = 1..=h`.
pub fn dyadic_gammas(h: u32) -> Vec<f64> {
    (1..=h).map(|j| (2.0 * j as f64).exp2()).collect()
}

/// Gaussian kernels anchored at the observations, `f_{i,k} = K_k(X_i, .)`,
/// ordered `(f_{1,1}, ..., f_{1,m'}, ..., f_{N,m'})`.
pub fn data_dependent_family(
    sample: &Sample,
    gammas: &[f64],
) -> Result<(BasisFamily, HpCertificate)> {
    if sample.len() < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: sample.len() });
    }
    check_gammas(gammas)?;
    let mut functions = Vec::with_capacity(sample.len() * gammas.len());
    let mut labels = Vec::with_capacity(functions.capacity());
    for (anchor, &x) in sample.points().iter().enumerate() {
        for (j, &gamma) in gammas.iter().enumerate() {
            functions.push(BasisFunction::Gaussian { center: x, gamma });
            labels.push(Label::Anchored { anchor, j });
        }
    }
    let cert = gaussian_certificate(&functions);
    let family = BasisFamily::build(
        FamilyDescriptor::DataGaussian { gammas: gammas.to_vec(), n: sample.len() },
        functions,
        labels,
        (0.0, 1.0),
        InnerProductRule::AnalyticGaussian,
        None,
    );
    Ok((family, cert))
}

/// Rebuilds a family from its descriptor. Data-anchored families need the
/// sample they were anchored on.
pub fn from_descriptor(
    descriptor: &FamilyDescriptor,
    sample: Option<&Sample>,
) -> Result<(BasisFamily, HpCertificate)> {
    match descriptor {
        FamilyDescriptor::Histogram { cells } => histogram_family(cells),
        FamilyDescriptor::Haar { max_level } => Ok(haar_family(*max_level)),
        FamilyDescriptor::Trig { m, c } => trig_family(*m, *c),
        FamilyDescriptor::Gaussian { n, gammas, constant } => {
            gaussian_kernel_family(*n, gammas, *constant)
        }
        FamilyDescriptor::DataGaussian { gammas, .. } => {
            let s = sample.ok_or_else(|| {
                Error::InvalidConfig("data-anchored family needs the sample".into())
            })?;
            data_dependent_family(s, gammas)
        }
    }
}
