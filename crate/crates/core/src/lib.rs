//! Coherence statistics of high-dimensional data matrices.
//!
//! The coherence of an `n x p` matrix is the largest absolute off-diagonal
//! entry of its sample correlation matrix. This crate computes it (and its
//! banded and known-moment variants) with a tiled kernel, normalizes it
//! against the type-I extreme-value limit and the chi-square intermediate
//! approximation, turns those laws into hypothesis tests and sparsity
//! certificates, and checks the asymptotics by reproducible Monte Carlo.

pub mod coherence;
mod error;
pub mod hypothesis;
pub mod io;
pub mod limits;
pub mod matgen;
pub mod montecarlo;
pub mod rng;
pub mod special;

pub use coherence::{CoherenceResult, StatisticKind};
pub use error::{Error, Result};
pub use hypothesis::{CalibrationMethod, Decision, TestReport};
pub use limits::{AlphaRegime, NormalizedStat, PairCountMode, RegimeParams};
pub use matgen::{DataMatrix, DistributionFamily, DistributionSpec};
pub use montecarlo::{EmpiricalSummary, SimulationPlan};
