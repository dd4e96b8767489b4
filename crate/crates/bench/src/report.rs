use std::io::{Read, Write};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

/// One (density, estimator) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub density: String,
    pub estimator: String,
    pub reps: usize,
    pub mean_d2: f64,
    pub sd_d2: f64,
    pub seed: u64,
    /// Replicates that errored and were left out of the mean.
    pub failures: usize,
    pub config: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub version: String,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    density: String,
    estimator: String,
    reps: usize,
    mean_d2: f64,
    sd_d2: f64,
    seed: u64,
    failures: usize,
    config: String,
    version: String,
}

impl ExperimentReport {
    pub fn row(&self, density: &str, estimator: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.density == density && r.estimator == estimator)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> anyhow::Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        for r in &self.rows {
            out.serialize(CsvRow {
                density: r.density.clone(),
                estimator: r.estimator.clone(),
                reps: r.reps,
                mean_d2: r.mean_d2,
                sd_d2: r.sd_d2,
                seed: r.seed,
                failures: r.failures,
                config: r.config.clone(),
                version: self.version.clone(),
            })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> anyhow::Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf)?)
    }

    pub fn read_csv<R: Read>(r: R) -> anyhow::Result<Self> {
        let mut rows = Vec::new();
        let mut version: Option<String> = None;
        for rec in csv::Reader::from_reader(r).deserialize::<CsvRow>() {
            let rec = rec.context("reading report row")?;
            match &version {
                None => version = Some(rec.version.clone()),
                Some(v) if *v != rec.version => bail!("mixed versions in one report"),
                _ => {}
            }
            rows.push(ReportRow {
                density: rec.density,
                estimator: rec.estimator,
                reps: rec.reps,
                mean_d2: rec.mean_d2,
                sd_d2: rec.sd_d2,
                seed: rec.seed,
                failures: rec.failures,
                config: rec.config,
            });
        }
        Ok(Self { rows, version: version.unwrap_or_else(|| crate::VERSION.to_string()) })
    }
}

/// Mean and sample standard deviation, summed in input order.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}
