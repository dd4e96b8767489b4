//! L² geometry over the span of a finite family: Gram matrices, squared
//! distances, and projections onto confidence slabs, their intersection and
//! the coefficient cap.

use nalgebra::DMatrix;

use crate::bases::{BasisFamily, BasisFunction, InnerProductRule, KernelGrid};
use crate::error::{Error, Result};
use crate::quad;
use crate::testbed::Density;

/// L2 displacement threshold between successive cycles of the intersection projection.
pub const TOL_PROJ: f64 = 1e-12;
/// Largest constraint violation (coefficient units) accepted as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const MAX_CYCLES: usize = 10_000;

/// Access to `<f_i, f_k>` for a family, dense or structured.
pub trait InnerProducts: Send + Sync {
    fn family_id(&self) -> u64;

    fn dim(&self) -> usize;

    fn entry(&self, i: usize, k: usize) -> f64;

    fn diag(&self, k: usize) -> f64 {
        self.entry(k, k)
    }

    /// `out += scale * G[:, k]`.
    fn add_column(&self, k: usize, scale: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o += scale * self.entry(i, k);
        }
    }

    /// `G gamma`, skipping zero coefficients.
    fn apply(&self, gamma: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (k, &g) in gamma.iter().enumerate() {
            if g != 0.0 {
                self.add_column(k, g, &mut out);
            }
        }
        out
    }

    /// `<g, f_k>` for `g = sum gamma_i f_i`.
    fn row_dot(&self, k: usize, gamma: &[f64]) -> f64 {
        gamma.iter().enumerate().filter(|(_, &g)| g != 0.0).map(|(i, &g)| g * self.entry(i, k)).sum()
    }

    /// `delta^T G delta`.
    fn quadratic_form(&self, delta: &[f64]) -> f64 {
        let nz: Vec<usize> = (0..delta.len()).filter(|&i| delta[i] != 0.0).collect();
        let mut acc = 0.0;
        for (a, &i) in nz.iter().enumerate() {
            acc += delta[i] * delta[i] * self.diag(i);
            for &k in &nz[a + 1..] {
                acc += 2.0 * delta[i] * delta[k] * self.entry(i, k);
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramSource {
    Analytic,
    Quadrature,
}

/// Dense `m x m` matrix of `<f_i, f_k>`.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    family_id: u64,
    m: usize,
    entries: Vec<f64>,
    source: GramSource,
}

impl GramMatrix {
    pub fn source(&self) -> GramSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.entries[i * self.m + k]
    }

    pub fn trace(&self) -> f64 {
        (0..self.m).map(|k| self.get(k, k)).sum()
    }

    /// Smallest eigenvalue (symmetric eigendecomposition).
    pub fn min_eigenvalue(&self) -> f64 {
        let mat = DMatrix::from_row_slice(self.m, self.m, &self.entries);
        mat.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Eigenvalues no smaller than `-1e-9 * trace`.
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -1e-9 * self.trace().abs().max(f64::MIN_POSITIVE)
    }

    /// Builds a matrix directly from row-major entries; for tests and callers
    /// that already hold the inner products.
    pub fn from_entries(family_id: u64, m: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != m * m {
            return Err(Error::DimensionMismatch { expected: m * m, got: entries.len() });
        }
        Ok(Self { family_id, m, entries, source: GramSource::Analytic })
    }
}

impl InnerProducts for GramMatrix {
    fn family_id(&self) -> u64 {
        self.family_id
    }

    fn dim(&self) -> usize {
        self.m
    }

    fn entry(&self, i: usize, k: usize) -> f64 {
        self.entries[i * self.m + k]
    }

    fn add_column(&self, k: usize, scale: f64, out: &mut [f64]) {
        // symmetric: column k == row k
        let row = &self.entries[k * self.m..(k + 1) * self.m];
        for (o, &g) in out.iter_mut().zip(row) {
            *o += scale * g;
        }
    }
}

/// Gram matrix of a family. Orthogonal families get their diagonal `D_k`
/// directly; other pairs use closed forms where available and composite
/// Simpson otherwise.
pub fn gram(family: &BasisFamily) -> Result<GramMatrix> {
    let m = family.len();
    let mut entries = vec![0.0; m * m];
    let mut source = GramSource::Analytic;
    if family.rule() == InnerProductRule::Orthogonal {
        for k in 0..m {
            entries[k * m + k] = family.norms()[k];
        }
    } else {
        for i in 0..m {
            for k in i..m {
                let (a, b) = (family.function(i), family.function(k));
                if a.analytic_inner(b).is_none() {
                    source = GramSource::Quadrature;
                }
                let v = family.inner(i, k)?;
                if !v.is_finite() {
                    return Err(Error::FamilyNotSquareIntegrable(i));
                }
                entries[i * m + k] = v;
                entries[k * m + i] = v;
            }
        }
    }
    Ok(GramMatrix { family_id: family.id(), m, entries, source })
}

/// Gram entries of an equispaced multi-bandwidth Gaussian grid. Entries only
/// depend on the bandwidth pair and the grid lag, so a table of `h^2 n`
/// values replaces the dense `m^2` matrix.
#[derive(Debug, Clone)]
pub struct KernelGridGram {
    family_id: u64,
    n: usize,
    h: usize,
    constant: bool,
    /// `lags[(a * h + b) * n + lag]`
    lags: Vec<f64>,
    /// `<f_k, 1_[0,1]>` for every Gaussian member.
    with_constant: Vec<f64>,
}

impl KernelGridGram {
    pub fn new(family: &BasisFamily, grid: &KernelGrid) -> Self {
        let n = grid.n;
        let h = grid.gammas.len();
        let mut lags = vec![0.0; h * h * n];
        for (a, &ga) in grid.gammas.iter().enumerate() {
            for (b, &gb) in grid.gammas.iter().enumerate() {
                let s = ga + gb;
                let pre = (std::f64::consts::PI / s).sqrt();
                for lag in 0..n {
                    let d = lag as f64 / n as f64;
                    lags[(a * h + b) * n + lag] = pre * (-ga * gb * d * d / s).exp();
                }
            }
        }
        let with_constant = if grid.constant {
            (0..n * h)
                .map(|k| match *family.function(k) {
                    BasisFunction::Gaussian { center, gamma } => {
                        crate::bases::gaussian_mass(center, gamma, 0.0, 1.0)
                    }
                    _ => unreachable!("grid layout"),
                })
                .collect()
        } else {
            Vec::new()
        };
        Self { family_id: family.id(), n, h, constant: grid.constant, lags, with_constant }
    }

    fn split(&self, k: usize) -> Option<(usize, usize)> {
        if k < self.n * self.h {
            Some((k / self.n, k % self.n))
        } else {
            None
        }
    }
}

impl InnerProducts for KernelGridGram {
    fn family_id(&self) -> u64 {
        self.family_id
    }

    fn dim(&self) -> usize {
        self.n * self.h + self.constant as usize
    }

    fn entry(&self, i: usize, k: usize) -> f64 {
        match (self.split(i), self.split(k)) {
            (Some((a, p)), Some((b, q))) => self.lags[(a * self.h + b) * self.n + p.abs_diff(q)],
            (Some(_), None) => self.with_constant[i],
            (None, Some(_)) => self.with_constant[k],
            (None, None) => 1.0,
        }
    }

    fn add_column(&self, k: usize, scale: f64, out: &mut [f64]) {
        let n = self.n;
        match self.split(k) {
            Some((a, p)) => {
                for b in 0..self.h {
                    let table = &self.lags[(a * self.h + b) * n..(a * self.h + b + 1) * n];
                    let block = &mut out[b * n..(b + 1) * n];
                    for (q, o) in block.iter_mut().enumerate() {
                        *o += scale * table[p.abs_diff(q)];
                    }
                }
                if self.constant {
                    out[n * self.h] += scale * self.with_constant[k];
                }
            }
            None => {
                for (o, &c) in out.iter_mut().zip(&self.with_constant) {
                    *o += scale * c;
                }
                out[n * self.h] += scale;
            }
        }
    }
}

/// The cheapest exact inner-product access for a family.
pub fn inner_products(family: &BasisFamily) -> Result<Box<dyn InnerProducts>> {
    match family.kernel_grid() {
        Some(grid) => Ok(Box::new(KernelGridGram::new(family, grid))),
        None => Ok(Box::new(gram(family)?)),
    }
}

/// `g = sum_k gamma_k f_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanElement {
    family_id: u64,
    coefficients: Vec<f64>,
}

impl SpanElement {
    pub fn new(family: &BasisFamily, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != family.len() {
            return Err(Error::DimensionMismatch { expected: family.len(), got: coefficients.len() });
        }
        Ok(Self { family_id: family.id(), coefficients })
    }

    pub fn zero(family: &BasisFamily) -> Self {
        Self { family_id: family.id(), coefficients: vec![0.0; family.len()] }
    }

    pub(crate) fn from_parts(family_id: u64, coefficients: Vec<f64>) -> Self {
        Self { family_id, coefficients }
    }

    pub fn family_id(&self) -> u64 {
        self.family_id
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    pub fn eval(&self, family: &BasisFamily, x: f64) -> f64 {
        self.coefficients
            .iter()
            .zip(family.functions())
            .filter(|(&c, _)| c != 0.0)
            .map(|(&c, f)| c * f.eval(x))
            .sum()
    }

    pub fn nonzeros(&self) -> usize {
        self.coefficients.iter().filter(|&&c| c != 0.0).count()
    }
}

fn check_family(ip: &dyn InnerProducts, g: &SpanElement) -> Result<()> {
    if g.family_id != ip.family_id() {
        return Err(Error::FamilyMismatch(g.family_id, ip.family_id()));
    }
    if g.coefficients.len() != ip.dim() {
        return Err(Error::DimensionMismatch { expected: ip.dim(), got: g.coefficients.len() });
    }
    Ok(())
}

/// `d^2(g, h) = (gamma_g - gamma_h)^T G (gamma_g - gamma_h)`.
pub fn dist2(ip: &dyn InnerProducts, g: &SpanElement, h: &SpanElement) -> Result<f64> {
    check_family(ip, g)?;
    check_family(ip, h)?;
    let delta: Vec<f64> = g.coefficients.iter().zip(&h.coefficients).map(|(a, b)| a - b).collect();
    Ok(ip.quadratic_form(&delta).max(0.0))
}

/// `int (g - f)^2` over the family's integration window joined with `[0, 1]`.
pub fn dist2_to_density(family: &BasisFamily, g: &SpanElement, f: &Density) -> Result<f64> {
    if g.family_id != family.id() {
        return Err(Error::FamilyMismatch(g.family_id, family.id()));
    }
    let (wlo, whi) = family.integration_window();
    let (lo, hi) = (wlo.min(0.0), whi.max(1.0));

    let active: Vec<(f64, &BasisFunction)> = g
        .coefficients
        .iter()
        .zip(family.functions())
        .filter(|(&c, _)| c != 0.0)
        .map(|(&c, func)| (c, func))
        .collect();
    let mut breaks: Vec<f64> = f.breakpoints().to_vec();
    let mut scale = f.feature_scale();
    for (_, func) in &active {
        breaks.extend(func.breakpoints());
        scale = scale.min(func.feature_scale());
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let pieces = breaks.len().max(1);
    let panels = (((hi - lo) / scale / pieces as f64).ceil() as usize).clamp(4, 4096);

    let v = quad::Adaptive::with_tol(1e-10).min_panels(panels).integrate(
        |x| {
            let gx: f64 = active.iter().map(|(c, func)| c * func.eval(x)).sum();
            let d = gx - f.pdf(x);
            d * d
        },
        lo,
        hi,
        &breaks,
    );
    if v.is_finite() {
        Ok(v.max(0.0))
    } else {
        Err(Error::FamilyNotSquareIntegrable(0))
    }
}

/// Confidence region for the coefficient of `f_k`:
/// `{g : |<g, f_k> / D_k - center| <= halfwidth}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab {
    pub k: usize,
    pub center: f64,
    pub halfwidth: f64,
}

impl Slab {
    pub fn new(k: usize, center: f64, halfwidth: f64) -> Self {
        debug_assert!(halfwidth >= 0.0);
        Self { k, center, halfwidth: halfwidth.max(0.0) }
    }

    /// Slab spanning a confidence interval `[lo, hi]`.
    pub fn from_interval(k: usize, lo: f64, hi: f64) -> Self {
        Self::new(k, 0.5 * (lo + hi), 0.5 * (hi - lo).max(0.0))
    }

    pub fn lo(&self) -> f64 {
        self.center - self.halfwidth
    }

    pub fn hi(&self) -> f64 {
        self.center + self.halfwidth
    }

    pub fn contains_coefficient(&self, a: f64) -> bool {
        (a - self.center).abs() <= self.halfwidth
    }

    /// Signed step along `f_k` that brings a coefficient excess `t` back to
    /// the slab boundary (zero when already inside).
    pub fn correction(&self, t: f64) -> f64 {
        if t.abs() <= self.halfwidth {
            0.0
        } else {
            t - t.signum() * self.halfwidth
        }
    }
}

/// Metric projection onto one slab. Only `gamma_k` moves.
pub fn project_slab(ip: &dyn InnerProducts, g: &SpanElement, s: &Slab) -> Result<SpanElement> {
    check_family(ip, g)?;
    let d = ip.diag(s.k);
    let t = ip.row_dot(s.k, &g.coefficients) / d - s.center;
    let mut out = g.clone();
    out.coefficients[s.k] -= s.correction(t);
    Ok(out)
}

/// Applies the slab projections once each, in order (plain successive
/// projections; converges to a feasible point, not to the projection).
pub fn project_successively(
    ip: &dyn InnerProducts,
    slabs: &[Slab],
    start: &SpanElement,
) -> Result<SpanElement> {
    check_family(ip, start)?;
    let mut gamma = start.coefficients.clone();
    let mut u = ip.apply(&gamma);
    for s in slabs {
        let t = u[s.k] / ip.diag(s.k) - s.center;
        let step = s.correction(t);
        if step != 0.0 {
            gamma[s.k] -= step;
            ip.add_column(s.k, -step, &mut u);
        }
    }
    Ok(SpanElement::from_parts(start.family_id, gamma))
}

/// Outcome of the intersection projection.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionReport {
    pub cycles: usize,
    pub max_violation: f64,
}

/// Exact projection of `start` onto the intersection of the slabs by cyclic
/// slab projections with per-slab correction terms (Dykstra).
pub fn project_intersection(
    ip: &dyn InnerProducts,
    slabs: &[Slab],
    start: &SpanElement,
) -> Result<SpanElement> {
    project_intersection_with_report(ip, slabs, start).map(|(g, _)| g)
}

pub fn project_intersection_with_report(
    ip: &dyn InnerProducts,
    slabs: &[Slab],
    start: &SpanElement,
) -> Result<(SpanElement, IntersectionReport)> {
    check_family(ip, start)?;
    if slabs.is_empty() {
        return Err(Error::InvalidConfig("intersection of zero slabs".into()));
    }
    let m = ip.dim();
    if let Some(s) = slabs.iter().find(|s| s.k >= m) {
        return Err(Error::InvalidConfig(format!("slab index {} out of range", s.k)));
    }
    let mut gamma = start.coefficients.clone();
    // Each correction term is a multiple of e_k, stored as a scalar.
    let mut increments = vec![0.0; slabs.len()];
    let mut cycle_delta = vec![0.0; m];
    let mut violation = f64::INFINITY;

    for cycle in 1..=MAX_CYCLES {
        let mut u = ip.apply(&gamma);
        cycle_delta.iter_mut().for_each(|d| *d = 0.0);
        for (s, q) in slabs.iter().zip(increments.iter_mut()) {
            let d = ip.diag(s.k);
            // excess at y = x + q e_k (G_kk = D_k)
            let t = u[s.k] / d + *q - s.center;
            let step = s.correction(t);
            let change = *q - step;
            if change != 0.0 {
                gamma[s.k] += change;
                cycle_delta[s.k] += change;
                ip.add_column(s.k, change, &mut u);
            }
            *q = step;
        }
        let displacement = ip.quadratic_form(&cycle_delta).max(0.0).sqrt();
        let u = ip.apply(&gamma);
        violation = slabs
            .iter()
            .map(|s| ((u[s.k] / ip.diag(s.k) - s.center).abs() - s.halfwidth).max(0.0))
            .fold(0.0, f64::max);
        if displacement < TOL_PROJ && violation <= FEASIBILITY_TOL {
            return Ok((
                SpanElement::from_parts(start.family_id, gamma),
                IntersectionReport { cycles: cycle, max_violation: violation },
            ));
        }
    }
    if violation > FEASIBILITY_TOL {
        return Err(Error::NoConvergence { cycles: MAX_CYCLES, violation });
    }
    Ok((
        SpanElement::from_parts(start.family_id, gamma),
        IntersectionReport { cycles: MAX_CYCLES, max_violation: violation },
    ))
}

/// Projection onto `{g : <g, f_k> <= sqrt(c) for all k}` for an orthonormal
/// family: clip every coefficient from above at `sqrt(c)`.
pub fn project_cap(family: &BasisFamily, g: &SpanElement, c: f64) -> Result<SpanElement> {
    if !family.is_orthonormal() {
        return Err(Error::CapRequiresOrthonormal);
    }
    if g.family_id != family.id() {
        return Err(Error::FamilyMismatch(g.family_id, family.id()));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidConfig(format!("cap constant must be positive, got {c}")));
    }
    let cap = c.sqrt();
    let coefficients = g.coefficients.iter().map(|&x| x.min(cap)).collect();
    Ok(SpanElement::from_parts(g.family_id, coefficients))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::{gaussian_kernel_family, trig_family, uniform_histogram};
    use crate::testbed::{make_density, DensityName};

    #[test]
    fn two_bin_gram_is_diagonal() {
        let (f, _) = uniform_histogram(2).unwrap();
        let g = gram(&f).unwrap();
        assert_eq!(g.get(0, 0), 0.5);
        assert_eq!(g.get(1, 1), 0.5);
        assert_eq!(g.get(0, 1), 0.0);
    }

    #[test]
    fn trig_gram_is_identity() {
        let (f, _) = trig_family(7, 1.0).unwrap();
        let g = gram(&f).unwrap();
        for i in 0..7 {
            for k in 0..7 {
                assert_eq!(g.get(i, k), if i == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn dist2_identities() {
        let (f, _) = trig_family(4, 1.0).unwrap();
        let g = gram(&f).unwrap();
        let a = SpanElement::new(&f, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let z = SpanElement::zero(&f);
        assert_eq!(dist2(&g, &a, &a).unwrap(), 0.0);
        assert_eq!(dist2(&g, &a, &z).unwrap(), 1.0);
        let (other, _) = trig_family(4, 1.0).unwrap();
        let b = SpanElement::zero(&other);
        assert!(matches!(dist2(&g, &a, &b).unwrap_err(), Error::FamilyMismatch(..)));
    }

    #[test]
    fn dist2_to_uniform() {
        let u = make_density(DensityName::Uniform).unwrap();
        let (f, _) = uniform_histogram(4).unwrap();
        let zero = SpanElement::zero(&f);
        assert!((dist2_to_density(&f, &zero, &u).unwrap() - 1.0).abs() < 1e-12);
        let exact = SpanElement::new(&f, vec![1.0; 4]).unwrap();
        assert!(dist2_to_density(&f, &exact, &u).unwrap() < 1e-14);
    }

    #[test]
    fn slab_projection_basic_cases() {
        let (f, _) = trig_family(3, 1.0).unwrap();
        let g = gram(&f).unwrap();
        let zero = SpanElement::zero(&f);
        let s = Slab::new(1, 0.5, 0.2);
        let p = project_slab(&g, &zero, &s).unwrap();
        assert!((p.coefficients()[1] - 0.3).abs() < 1e-15);
        let inside = SpanElement::new(&f, vec![0.0, 0.6, 0.0]).unwrap();
        assert_eq!(project_slab(&g, &inside, &s).unwrap(), inside);
    }

    #[test]
    fn orthogonal_intersection_is_coordinate_clipping() {
        let (f, _) = trig_family(4, 1.0).unwrap();
        let g = gram(&f).unwrap();
        let slabs: Vec<Slab> = (0..4).map(|k| Slab::new(k, k as f64 - 1.5, 0.4)).collect();
        let start = SpanElement::new(&f, vec![0.2, -3.0, 0.0, 5.0]).unwrap();
        let (p, rep) = project_intersection_with_report(&g, &slabs, &start).unwrap();
        let expected: Vec<f64> = start
            .coefficients()
            .iter()
            .zip(&slabs)
            .map(|(&x, s)| x.clamp(s.lo(), s.hi()))
            .collect();
        for (a, b) in p.coefficients().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(rep.cycles <= 2);
    }

    #[test]
    fn feasible_start_unchanged() {
        let (f, _) = gaussian_kernel_family(3, &[16.0], false).unwrap();
        let g = gram(&f).unwrap();
        let start = SpanElement::new(&f, vec![0.1, 0.2, 0.3]).unwrap();
        let u = g.apply(start.coefficients());
        let slabs: Vec<Slab> = (0..3).map(|k| Slab::new(k, u[k] / g.diag(k), 0.1)).collect();
        let p = project_intersection(&g, &slabs, &start).unwrap();
        assert_eq!(p, start);
    }

    #[test]
    fn empty_intersection_reports_no_convergence() {
        let (f, _) = trig_family(2, 1.0).unwrap();
        let g = gram(&f).unwrap();
        let slabs = [Slab::new(0, 0.0, 0.1), Slab::new(0, 1.0, 0.1)];
        let e = project_intersection(&g, &slabs, &SpanElement::zero(&f)).unwrap_err();
        assert!(matches!(e, Error::NoConvergence { .. }));
    }

    #[test]
    fn cap_clips_from_above() {
        let (f, _) = trig_family(2, 1.0).unwrap();
        let g = SpanElement::new(&f, vec![2.0, 0.1]).unwrap();
        let p = project_cap(&f, &g, 1.0).unwrap();
        assert_eq!(p.coefficients(), &[1.0, 0.1]);
        let small = SpanElement::new(&f, vec![0.5, -3.0]).unwrap();
        assert_eq!(project_cap(&f, &small, 1.0).unwrap(), small);
        let (h, _) = uniform_histogram(2).unwrap();
        let e = project_cap(&h, &SpanElement::zero(&h), 1.0).unwrap_err();
        assert_eq!(e, Error::CapRequiresOrthonormal);
    }

    #[test]
    fn grid_gram_matches_dense() {
        let (f, _) = gaussian_kernel_family(5, &[4.0, 64.0], true).unwrap();
        let dense = gram(&f).unwrap();
        let grid = KernelGridGram::new(&f, f.kernel_grid().unwrap());
        let m = f.len();
        for i in 0..m {
            let mut col = vec![0.0; m];
            grid.add_column(i, 1.0, &mut col);
            for k in 0..m {
                assert!((grid.entry(i, k) - dense.get(i, k)).abs() < 1e-14);
                assert!((col[k] - dense.get(k, i)).abs() < 1e-14);
            }
        }
    }
}
