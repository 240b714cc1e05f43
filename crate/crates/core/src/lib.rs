//! Range-renewal laboratory: exact expectations, entropies, and simulations of
//! the number of distinct values `R_n` among `n` i.i.d. draws from a discrete
//! distribution.
//!
//! - [`distributions`]: the distribution families and their counting operations.
//! - [`exact`]: certified brackets for `E R_n = Σ_x [1 - (1 - π_x)^n]` and the entropy.
//! - [`montecarlo`]: reproducible parallel simulation of `R_n` trajectories.
//! - [`diagnostics`]: speed statistics `(ln n)^(1+ε)/n · R_n` and related checks.

pub mod bracket;
pub mod diagnostics;
pub mod distributions;
pub mod exact;
pub mod log2num;
pub mod montecarlo;

pub use bracket::{Bracket, CertifiedSum};
pub use distributions::{AtomCount, Block, DistError, DistributionSpec, SpecError};
pub use log2num::{Log2Bracket, Log2Number};
