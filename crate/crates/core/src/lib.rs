//! Density estimation by projection onto confidence slabs.
//!
//! Each member `f_k` of a finite family gets a confidence interval for the
//! coefficient of the density's projection on `f_k`. The estimators project
//! the zero function onto the resulting slabs, one at a time or all at once.

pub mod bases;
pub mod bounds;
pub mod error;
pub mod estimators;
pub mod fnspace;
pub mod quad;
pub mod sample;
pub mod testbed;

pub use bases::{BasisFamily, FamilyDescriptor, HpCertificate};
pub use bounds::{Interval, IntervalMethod, IntervalTag, UnionBound};
pub use error::{Error, Result};
pub use estimators::{EstimatorConfig, GreedyTrace};
pub use fnspace::{Slab, SpanElement};
pub use sample::Sample;
pub use testbed::{Density, DensityName};
