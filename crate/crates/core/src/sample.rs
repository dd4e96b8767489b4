//! Observation sets and their one-value-per-line text form.

use std::io::{self, BufRead, Write};

use crate::error::{Error, Result};

/// The observations `X_1, ..., X_N` together with the seed that produced
/// them, when they were simulated.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    points: Vec<f64>,
    seed: Option<u64>,
}

impl Sample {
    pub fn new(points: Vec<f64>) -> Self {
        Self { points, seed: None }
    }

    pub fn with_seed(points: Vec<f64>, seed: u64) -> Self {
        Self { points, seed: Some(seed) }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Writes one observation per line with 17 significant digits.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        for x in &self.points {
            writeln!(out, "{:.16e}", x)?;
        }
        Ok(())
    }

    /// Reads one decimal per line; blank lines and `#` comments are skipped.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidConfig(format!("read error: {e}")))?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let v: f64 = t.parse().map_err(|_| {
                Error::InvalidConfig(format!("line {}: not a number: {t:?}", lineno + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("line {}: non-finite value", lineno + 1)));
            }
            points.push(v);
        }
        Ok(Self::new(points))
    }
}
