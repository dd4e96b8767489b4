//! Short names for basis families on the command line.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use slabdens::bases::{
    data_dependent_family, dyadic_gammas, from_descriptor, gaussian_kernel_family, haar_family, trig_family,
    uniform_histogram,
};
use slabdens::{BasisFamily, FamilyDescriptor, HpCertificate, Sample};

/// `histogram:<bins>`, `haar:<max level>`, `trig:<m>[:<c>]`, `kernel:<n>`,
/// `data-gaussian:<gamma>[,<gamma>...]`, or a JSON family descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisPreset {
    Histogram(usize),
    Haar(u32),
    Trig { m: usize, c: f64 },
    /// Dyadic Gaussian grid with `n` centres and the constant.
    Kernel(usize),
    DataGaussian(Vec<f64>),
    Descriptor(FamilyDescriptor),
}

impl BasisPreset {
    pub fn build(&self, sample: Option<&Sample>) -> anyhow::Result<(BasisFamily, HpCertificate)> {
        Ok(match self {
            BasisPreset::Histogram(b) => uniform_histogram(*b)?,
            BasisPreset::Haar(j) => haar_family(*j),
            BasisPreset::Trig { m, c } => trig_family(*m, *c)?,
            BasisPreset::Kernel(n) => gaussian_kernel_family(*n, &dyadic_gammas(6), true)?,
            BasisPreset::DataGaussian(g) => {
                data_dependent_family(sample.ok_or_else(|| anyhow!("data-anchored basis needs a sample"))?, g)?
            }
            BasisPreset::Descriptor(d) => from_descriptor(d, sample)?,
        })
    }

    /// Whether the family depends on the sample.
    pub fn is_data_dependent(&self) -> bool {
        matches!(
            self,
            BasisPreset::DataGaussian(_) | BasisPreset::Descriptor(FamilyDescriptor::DataGaussian { .. })
        )
    }
}

impl FromStr for BasisPreset {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let d: FamilyDescriptor = serde_json::from_str(s).context("parsing basis descriptor")?;
            return Ok(BasisPreset::Descriptor(d));
        }
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let parts: Vec<&str> = if args.is_empty() { Vec::new() } else { args.split(':').collect() };
        let num = |i: usize| -> anyhow::Result<&str> {
            parts.get(i).copied().ok_or_else(|| anyhow!("basis preset {s:?} is missing an argument"))
        };
        Ok(match name {
            "histogram" | "hist" => BasisPreset::Histogram(num(0)?.parse()?),
            "haar" => BasisPreset::Haar(num(0)?.parse()?),
            "trig" => BasisPreset::Trig {
                m: num(0)?.parse()?,
                c: parts.get(1).map(|c| c.parse()).transpose()?.unwrap_or(2.0),
            },
            "kernel" => BasisPreset::Kernel(num(0)?.parse()?),
            "data-gaussian" => BasisPreset::DataGaussian(
                num(0)?.split(',').map(str::parse).collect::<Result<Vec<f64>, _>>()?,
            ),
            _ => bail!("unknown basis preset {s:?}"),
        })
    }
}

impl fmt::Display for BasisPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisPreset::Histogram(b) => write!(f, "histogram:{b}"),
            BasisPreset::Haar(j) => write!(f, "haar:{j}"),
            BasisPreset::Trig { m, c } => write!(f, "trig:{m}:{c}"),
            BasisPreset::Kernel(n) => write!(f, "kernel:{n}"),
            BasisPreset::DataGaussian(g) => {
                let g: Vec<String> = g.iter().map(f64::to_string).collect();
                write!(f, "data-gaussian:{}", g.join(","))
            }
            BasisPreset::Descriptor(d) => {
                write!(f, "{}", serde_json::to_string(d).map_err(|_| fmt::Error)?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_print() {
        for s in ["histogram:8", "haar:4", "trig:16:1.5", "kernel:32", "data-gaussian:16,64"] {
            let p: BasisPreset = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("haar".parse::<BasisPreset>().is_err());
        assert!("wavelet:3".parse::<BasisPreset>().is_err());
    }

    #[test]
    fn json_descriptor() {
        let p: BasisPreset = r#"{"type":"haar","params":{"max_level":2}}"#.parse().unwrap();
        let (f, _) = p.build(None).unwrap();
        assert_eq!(f.len(), 8);
    }
}
