//! Known test densities on `[0, 1]`, seeded samplers and oracle quantities
//! computed against the truth.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bases::BasisFamily;
use crate::error::{Error, Result};
use crate::quad;
use crate::sample::Sample;

/// Jump locations of the Blocks function.
pub const BLOCKS_T: [f64; 11] = [0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81];
/// Jump sizes of the Blocks function.
pub const BLOCKS_C: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, 4.2, -2.1, 4.3, -3.1, 2.1, -4.2];
pub const DOPPLER_V: f64 = 0.05;

const NONNEG_GRID: usize = 100_000;
const ENVELOPE_INFLATION: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityName {
    Doppler,
    HeaviSine,
    Blocks,
    Uniform,
    Cosine,
}

impl DensityName {
    pub const ALL: [DensityName; 5] = [
        DensityName::Doppler,
        DensityName::HeaviSine,
        DensityName::Blocks,
        DensityName::Uniform,
        DensityName::Cosine,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DensityName::Doppler => "doppler",
            DensityName::HeaviSine => "heavisine",
            DensityName::Blocks => "blocks",
            DensityName::Uniform => "uniform",
            DensityName::Cosine => "cosine",
        }
    }
}

impl fmt::Display for DensityName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DensityName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DensityName::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown density {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    InverseCdfPiecewise,
    Rejection,
}

fn sgn(x: f64) -> f64 {
    // sgn(0) = +1; only affects a null set.
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn raw_value(name: DensityName, t: f64) -> f64 {
    match name {
        DensityName::Doppler => {
            let v = DOPPLER_V;
            1.0 + 2.0 * (t * (1.0 - t)).sqrt() * (2.0 * PI * (1.0 + v) / (t + v)).sin()
        }
        DensityName::HeaviSine => {
            1.5 + 0.25 * (4.0 * (4.0 * PI * t).sin() - sgn(t - 0.3) - sgn(0.72 - t))
        }
        DensityName::Blocks => {
            1.05 + 0.25
                * BLOCKS_T
                    .iter()
                    .zip(BLOCKS_C.iter())
                    .filter(|(&ti, _)| t > ti)
                    .map(|(_, &ci)| ci)
                    .sum::<f64>()
        }
        DensityName::Uniform => 1.0,
        DensityName::Cosine => 1.0 + 0.5 * (2.0 * PI * t).cos(),
    }
}

/// A probability density on `[0, 1]`: `pdf = raw / Z`, zero elsewhere.
#[derive(Debug, Clone)]
pub struct Density {
    name: DensityName,
    z: f64,
    breakpoints: Vec<f64>,
    sup_pdf: f64,
    sampler: SamplerKind,
    /// `(edges, cumulative mass at each edge)` for piecewise-constant densities.
    cdf_table: Option<(Vec<f64>, Vec<f64>)>,
}

/// Builds one of the named test densities, normalized to unit mass.
pub fn make_density(name: DensityName) -> Result<Density> {
    let breakpoints: Vec<f64> = match name {
        DensityName::HeaviSine => vec![0.0, 0.3, 0.72, 1.0],
        DensityName::Blocks => {
            let mut b = vec![0.0];
            b.extend(BLOCKS_T);
            b.push(1.0);
            b
        }
        _ => vec![0.0, 1.0],
    };

    let mut min_raw = f64::INFINITY;
    let mut max_raw = f64::NEG_INFINITY;
    for i in 0..=NONNEG_GRID {
        let v = raw_value(name, i as f64 / NONNEG_GRID as f64);
        min_raw = min_raw.min(v);
        max_raw = max_raw.max(v);
    }
    if min_raw < -1e-12 {
        return Err(Error::InvalidDensity(format!("{name}: raw minimum {min_raw} is negative")));
    }

    let z = quad::Adaptive::with_tol(1e-13)
        .min_panels(64)
        .integrate(|t| raw_value(name, t), 0.0, 1.0, &breakpoints);
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::InvalidDensity(format!("{name}: normalization {z}")));
    }

    let (sampler, cdf_table) = match name {
        DensityName::Blocks | DensityName::Uniform => {
            let mut cum = vec![0.0];
            for w in breakpoints.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                let last = *cum.last().expect("nonempty");
                cum.push(last + (w[1] - w[0]) * raw_value(name, mid) / z);
            }
            (SamplerKind::InverseCdfPiecewise, Some((breakpoints.clone(), cum)))
        }
        _ => (SamplerKind::Rejection, None),
    };

    Ok(Density { name, z, breakpoints, sup_pdf: max_raw / z, sampler, cdf_table })
}

impl Density {
    pub fn name(&self) -> DensityName {
        self.name
    }

    /// Integral of the raw (unnormalized) function over `[0, 1]`.
    pub fn normalization(&self) -> f64 {
        self.z
    }

    pub fn raw(&self, t: f64) -> f64 {
        raw_value(self.name, t)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            raw_value(self.name, x) / self.z
        } else {
            0.0
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Grid maximum of the pdf (before envelope inflation).
    pub fn sup(&self) -> f64 {
        self.sup_pdf
    }

    pub fn sampler(&self) -> SamplerKind {
        self.sampler
    }

    /// Shortest length scale of the density, for seeding quadrature panels.
    pub fn feature_scale(&self) -> f64 {
        match self.name {
            // Local period of the Doppler oscillation near t = 0.
            DensityName::Doppler => 0.002,
            DensityName::HeaviSine => 0.05,
            DensityName::Cosine => 0.1,
            DensityName::Blocks | DensityName::Uniform => 1.0,
        }
    }

    /// `int f^2`.
    pub fn norm_sq(&self) -> f64 {
        self.integrate_against(|x| self.pdf(x), &[])
    }

    /// `int g f` over `[0, 1]` with extra breakpoints from `g`.
    pub fn integrate_against<G: Fn(f64) -> f64>(&self, g: G, extra_breaks: &[f64]) -> f64 {
        let mut breaks = self.breakpoints.clone();
        breaks.extend_from_slice(extra_breaks);
        let panels = ((1.0 / self.feature_scale()).ceil() as usize).clamp(8, 1024);
        quad::Adaptive::with_tol(1e-12)
            .min_panels(panels)
            .integrate(|x| g(x) * self.pdf(x), 0.0, 1.0, &breaks)
    }
}

/// Acceptance bookkeeping of one sampling run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerStats {
    pub proposals: u64,
    pub accepted: u64,
}

impl SamplerStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// The generator behind every simulated sample: ChaCha8 seeded from the
/// master seed, with the replicate index selecting the stream.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Draws `n` observations with the replicate-0 stream of `seed`.
pub fn sample(density: &Density, n: usize, seed: u64) -> Result<Sample> {
    sample_replicate(density, n, seed, 0).map(|(s, _)| s)
}

/// Draws `n` observations with the stream of replicate `replicate`.
pub fn sample_replicate(
    density: &Density,
    n: usize,
    seed: u64,
    replicate: u64,
) -> Result<(Sample, SamplerStats)> {
    if n == 0 {
        return Err(Error::SampleTooSmall { needed: 1, got: 0 });
    }
    let mut rng = replicate_rng(seed, replicate);
    let mut points = Vec::with_capacity(n);
    let mut stats = SamplerStats { proposals: 0, accepted: 0 };
    match (&density.cdf_table, density.sampler) {
        (Some((edges, cum)), SamplerKind::InverseCdfPiecewise) => {
            for _ in 0..n {
                let u: f64 = rng.gen();
                points.push(inverse_piecewise_cdf(edges, cum, u));
            }
            stats.proposals = n as u64;
            stats.accepted = n as u64;
        }
        _ => {
            let envelope = density.sup_pdf * ENVELOPE_INFLATION;
            while points.len() < n {
                let x: f64 = rng.gen();
                let y: f64 = rng.gen::<f64>() * envelope;
                stats.proposals += 1;
                if y < density.pdf(x) {
                    points.push(x);
                    stats.accepted += 1;
                }
                if stats.proposals >= 10_000 && stats.acceptance_rate() < 0.01 {
                    return Err(Error::EnvelopeError(stats.acceptance_rate()));
                }
            }
        }
    }
    Ok((Sample::with_seed(points, seed), stats))
}

fn inverse_piecewise_cdf(edges: &[f64], cum: &[f64], u: f64) -> f64 {
    let total = *cum.last().expect("nonempty table");
    let target = u * total;
    // first piece whose right cumulative mass exceeds the target
    let piece = cum[1..].partition_point(|&c| c <= target).min(edges.len() - 2);
    let mass = cum[piece + 1] - cum[piece];
    let frac = if mass > 0.0 { (target - cum[piece]) / mass } else { 0.0 };
    (edges[piece] + frac * (edges[piece + 1] - edges[piece])).clamp(0.0, 1.0)
}

/// `<f_k, f>`, the inner product of a family member with the true density.
pub fn oracle_inner(density: &Density, family: &BasisFamily, k: usize) -> f64 {
    let func = family.function(k);
    density.integrate_against(|x| func.eval(x), &func.breakpoints())
}

/// `alpha_bar_k = <f_k, f> / D_k`.
pub fn oracle_alpha(density: &Density, family: &BasisFamily, k: usize) -> f64 {
    oracle_inner(density, family, k) / family.norms()[k]
}
