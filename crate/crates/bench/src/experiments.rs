use anyhow::{ensure, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use slabdens::bases::{haar_family, trig_family};
use slabdens::bounds::{estimate_coefficients, intervals, theorem1_interval, alpha_bounds_grid};
use slabdens::estimators::{
    fit_multiple_kernel, hard_threshold_baseline, kernel_default_method, soft_threshold, EstimatorConfig,
};
use slabdens::fnspace::dist2_to_density;
use slabdens::testbed::{make_density, oracle_alpha, sample_replicate};
use slabdens::{Density, DensityName, IntervalMethod, IntervalTag, Sample, SpanElement, UnionBound};

use crate::presets::BasisPreset;
use crate::report::{mean_sd, ExperimentReport, ReportRow};

/// Levels `0..=6` plus the father: 128 functions.
pub const FIGURE2_HAAR_LEVEL: u32 = 6;
pub const FIGURE2_KAPPA: f64 = 0.7;
/// Accuracy of the quadrature oracle for the true coefficients.
pub const ORACLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Figure2Config {
    pub n: usize,
    pub reps: usize,
    pub eps: f64,
    pub seed: u64,
    pub haar_level: u32,
    pub kappa_thr: f64,
}

impl Default for Figure2Config {
    fn default() -> Self {
        Self { n: 1024, reps: 20, eps: 0.1, seed: 0, haar_level: FIGURE2_HAAR_LEVEL, kappa_thr: FIGURE2_KAPPA }
    }
}

pub const FIGURE2_DENSITIES: [DensityName; 3] = [DensityName::Doppler, DensityName::HeaviSine, DensityName::Blocks];
pub const FIGURE2_ESTIMATORS: [&str; 3] = ["hard_threshold", "soft_threshold_haar", "multiple_kernel"];

fn replicate_sample(density: &Density, n: usize, seed: u64, rep: usize) -> anyhow::Result<Sample> {
    Ok(sample_replicate(density, n, seed, rep as u64)?.0)
}

/// Squared distances of the three estimators on one replicate.
fn figure2_replicate(density: &Density, cfg: &Figure2Config, rep: usize) -> [anyhow::Result<f64>; 3] {
    let sample = match replicate_sample(density, cfg.n, cfg.seed, rep) {
        Ok(s) => s,
        Err(e) => {
            let msg = e.to_string();
            return [Err(anyhow::anyhow!(msg.clone())), Err(anyhow::anyhow!(msg.clone())), Err(anyhow::anyhow!(msg))];
        }
    };
    let (haar, haar_cert) = haar_family(cfg.haar_level);
    let literal = IntervalMethod { tag: IntervalTag::Asymptotic { literal: true }, union_bound: UnionBound::Individual };
    let hard = || -> anyhow::Result<f64> {
        let g = hard_threshold_baseline(&sample, &haar, cfg.kappa_thr)?;
        Ok(dist2_to_density(&haar, &g, density)?)
    };
    let soft = || -> anyhow::Result<f64> {
        let config = EstimatorConfig::new(literal, cfg.eps)?;
        let g = soft_threshold(&sample, &haar, &haar_cert, &config)?;
        Ok(dist2_to_density(&haar, &g, density)?)
    };
    let kernel = || -> anyhow::Result<f64> {
        let config = EstimatorConfig::new(kernel_default_method(), cfg.eps)?;
        let (family, g, _) = fit_multiple_kernel(&sample, &config)?;
        Ok(dist2_to_density(&family, &g, density)?)
    };
    [hard(), soft(), kernel()]
}

/// Mean squared distance of the hard-threshold baseline, the soft-threshold
/// Haar estimator and the multiple-kernel estimator on the three test
/// densities.
pub fn run_figure2(cfg: &Figure2Config) -> anyhow::Result<ExperimentReport> {
    ensure!(cfg.n >= 2, "need N >= 2");
    ensure!(cfg.reps >= 1, "need at least one replicate");
    let mut rows = Vec::new();
    for name in FIGURE2_DENSITIES {
        let density = make_density(name)?;
        let results: Vec<[anyhow::Result<f64>; 3]> =
            (0..cfg.reps).into_par_iter().map(|rep| figure2_replicate(&density, cfg, rep)).collect();
        for (e, estimator) in FIGURE2_ESTIMATORS.iter().enumerate() {
            let ok: Vec<f64> = results.iter().filter_map(|r| r[e].as_ref().ok().copied()).collect();
            let (mean, sd) = mean_sd(&ok);
            rows.push(ReportRow {
                density: name.to_string(),
                estimator: estimator.to_string(),
                reps: cfg.reps,
                mean_d2: mean,
                sd_d2: sd,
                seed: cfg.seed,
                failures: cfg.reps - ok.len(),
                config: format!(
                    "n={} eps={} haar_level={} kappa_thr={}",
                    cfg.n, cfg.eps, cfg.haar_level, cfg.kappa_thr
                ),
            });
        }
    }
    Ok(ExperimentReport { rows, version: crate::VERSION.to_string() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub density: DensityName,
    pub basis: BasisPreset,
    pub method: IntervalMethod,
    pub eps: f64,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub density: String,
    pub basis: String,
    pub method: String,
    pub union_bound: String,
    pub eps: f64,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub covered: usize,
    pub coverage: f64,
    /// 95% Wilson score band.
    pub band_lo: f64,
    pub band_hi: f64,
    /// Interval width averaged over members and replicates.
    pub mean_width: f64,
    /// Intervals replaced by the fallback slab.
    pub fallbacks: usize,
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_band(k: usize, n: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = k as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

struct CoverageOutcome {
    covered: bool,
    width: f64,
    fallbacks: usize,
}

/// Frequency of the event that every interval contains its true coefficient.
pub fn run_coverage(cfg: &CoverageConfig) -> anyhow::Result<CoverageReport> {
    ensure!(cfg.reps >= 1, "need at least one replicate");
    let density = make_density(cfg.density)?;
    let fixed = if cfg.basis.is_data_dependent() {
        None
    } else {
        let (family, cert) = cfg.basis.build(None)?;
        let truth: Vec<f64> = (0..family.len()).map(|k| oracle_alpha(&density, &family, k)).collect();
        Some((family, cert, truth))
    };
    let outcomes: Vec<anyhow::Result<CoverageOutcome>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let sample = replicate_sample(&density, cfg.n, cfg.seed, rep)?;
            let owned;
            let (family, cert, truth) = match &fixed {
                Some((f, c, t)) => (f, c, t),
                None => {
                    let (f, c) = cfg.basis.build(Some(&sample))?;
                    let t: Vec<f64> = (0..f.len()).map(|k| oracle_alpha(&density, &f, k)).collect();
                    owned = (f, c, t);
                    (&owned.0, &owned.1, &owned.2)
                }
            };
            let ests = estimate_coefficients(family, &sample, cfg.method.needs_values())?;
            let ivs = intervals(family, cert, &ests, &cfg.method, cfg.eps)?;
            Ok(CoverageOutcome {
                covered: ivs.iter().zip(truth).all(|(iv, &a)| iv.contains_within(a, ORACLE_TOL)),
                width: ivs.iter().map(|iv| iv.width()).sum::<f64>() / ivs.len() as f64,
                fallbacks: ivs.iter().filter(|iv| iv.fallback).count(),
            })
        })
        .collect();
    let mut covered = 0;
    let mut width = 0.0;
    let mut fallbacks = 0;
    for o in outcomes {
        let o = o.context("coverage replicate")?;
        covered += o.covered as usize;
        width += o.width;
        fallbacks += o.fallbacks;
    }
    let (band_lo, band_hi) = wilson_band(covered, cfg.reps);
    Ok(CoverageReport {
        density: cfg.density.to_string(),
        basis: cfg.basis.to_string(),
        method: cfg.method.tag_name(),
        union_bound: cfg.method.union_bound.to_string(),
        eps: cfg.eps,
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        covered,
        coverage: covered as f64 / cfg.reps as f64,
        band_lo,
        band_hi,
        mean_width: width / cfg.reps as f64,
        fallbacks,
    })
}

impl CoverageReport {
    pub fn write_csv<W: std::io::Write>(reports: &[CoverageReport], w: W) -> anyhow::Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        for r in reports {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Paired width comparison of the grid-optimized and `theorem1` intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpeningReport {
    pub n: usize,
    pub reps: usize,
    /// Replicates where every grid interval is strictly narrower.
    pub narrower: usize,
    pub mean_width_theorem1: f64,
    pub mean_width_grid: f64,
}

pub fn run_sharpening(
    density: DensityName,
    basis: &BasisPreset,
    n: usize,
    eps: f64,
    reps: usize,
    seed: u64,
) -> anyhow::Result<SharpeningReport> {
    let density = make_density(density)?;
    let (family, cert) = basis.build(None)?;
    let m = family.len();
    let per_rep: Vec<anyhow::Result<(bool, f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let sample = replicate_sample(&density, n, seed, rep)?;
            let ests = estimate_coefficients(&family, &sample, true)?;
            let mut all = true;
            let (mut w1, mut w2) = (0.0, 0.0);
            for est in &ests {
                let t1 = theorem1_interval(est, &family, &cert, eps, m)?;
                let grid = alpha_bounds_grid(est, &family, &cert, eps, 2.0, m)?;
                all &= grid.width() < t1.width();
                w1 += t1.width();
                w2 += grid.width();
            }
            Ok((all, w1 / m as f64, w2 / m as f64))
        })
        .collect();
    let mut narrower = 0;
    let (mut w1, mut w2) = (0.0, 0.0);
    for r in per_rep {
        let (all, a, b) = r?;
        narrower += all as usize;
        w1 += a;
        w2 += b;
    }
    Ok(SharpeningReport {
        n,
        reps,
        narrower,
        mean_width_theorem1: w1 / reps as f64,
        mean_width_grid: w2 / reps as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateBasis {
    Trig,
    Haar,
}

impl std::str::FromStr for RateBasis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "trig" => Ok(RateBasis::Trig),
            "haar" => Ok(RateBasis::Haar),
            _ => anyhow::bail!("rate study basis must be trig or haar, got {s:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatesConfig {
    pub density: DensityName,
    pub basis: RateBasis,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub mean_d2: f64,
    pub sd_d2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudy {
    pub density: String,
    pub basis: RateBasis,
    pub reps: usize,
    pub seed: u64,
    pub points: Vec<RatePoint>,
    pub fitted_slope: f64,
}

/// Doubling sequence `n_min, 2 n_min, ...` up to `n_max`.
pub fn doubling(n_min: usize, n_max: usize) -> Vec<usize> {
    let mut ns = Vec::new();
    let mut n = n_min.max(1);
    while n <= n_max {
        ns.push(n);
        n *= 2;
    }
    ns
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Risk of the soft-threshold estimator with `m = N` (trig) or
/// `J = floor(log2 N)` (Haar) and `eps = 1/N^2`, as a function of `N`.
pub fn run_rates(cfg: &RatesConfig) -> anyhow::Result<RateStudy> {
    ensure!(cfg.ns.len() >= 4, "need at least 4 sample sizes");
    ensure!(cfg.ns.windows(2).all(|w| w[0] < w[1]), "sample sizes must increase");
    ensure!(cfg.reps >= 1, "need at least one replicate");
    let density = make_density(cfg.density)?;
    let mut points = Vec::new();
    for &n in &cfg.ns {
        let (family, cert) = match cfg.basis {
            RateBasis::Trig => trig_family(n, density.sup())?,
            RateBasis::Haar => haar_family((n as f64).log2().floor() as u32),
        };
        let eps = 1.0 / (n as f64 * n as f64);
        let method = IntervalMethod { tag: IntervalTag::Theorem1, union_bound: UnionBound::AllM };
        let mut config = EstimatorConfig::new(method, eps)?;
        if family.is_orthonormal() {
            config = config.with_cap(density.sup())?;
        }
        let risks: Vec<anyhow::Result<f64>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let sample = replicate_sample(&density, n, cfg.seed, rep)?;
                let g: SpanElement = soft_threshold(&sample, &family, &cert, &config)?;
                Ok(dist2_to_density(&family, &g, &density)?)
            })
            .collect();
        let risks = risks.into_iter().collect::<anyhow::Result<Vec<f64>>>()?;
        let (mean_d2, sd_d2) = mean_sd(&risks);
        points.push(RatePoint { n, mean_d2, sd_d2 });
    }
    let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.mean_d2.ln()).collect();
    Ok(RateStudy {
        density: cfg.density.to_string(),
        basis: cfg.basis,
        reps: cfg.reps,
        seed: cfg.seed,
        points,
        fitted_slope: ls_slope(&x, &y),
    })
}

#[derive(Serialize)]
struct RateCsvRow<'a> {
    density: &'a str,
    basis: RateBasis,
    n: usize,
    reps: usize,
    seed: u64,
    mean_d2: f64,
    sd_d2: f64,
    fitted_slope: f64,
}

impl RateStudy {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> anyhow::Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        for p in &self.points {
            out.serialize(RateCsvRow {
                density: &self.density,
                basis: self.basis,
                n: p.n,
                reps: self.reps,
                seed: self.seed,
                mean_d2: p.mean_d2,
                sd_d2: p.sd_d2,
                fitted_slope: self.fitted_slope,
            })?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_band_brackets_the_rate() {
        let (lo, hi) = wilson_band(180, 200);
        assert!(lo < 0.9 && hi > 0.9);
        assert_eq!(wilson_band(0, 10).0, 0.0);
    }

    #[test]
    fn slope_of_a_power_law() {
        let x: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1.0f64, 0.5, 0.25, 0.125].iter().map(|v| v.ln()).collect();
        assert!((ls_slope(&x, &y) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn doubling_grid() {
        assert_eq!(doubling(128, 4096), vec![128, 256, 512, 1024, 2048, 4096]);
    }
}
