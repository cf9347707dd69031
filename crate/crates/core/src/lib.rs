//! Adaptive best-arm identification for three classic subroutines.
//!
//! Each search (a k-medoids BUILD or SWAP step, a decision-tree node split,
//! a maximum inner product query) is cast as a fixed-confidence best-arm
//! problem: arms are candidates, pulling an arm evaluates the objective on
//! one randomly sampled reference item, and candidates whose confidence
//! interval is dominated are dropped. Every adaptive solver ships next to an
//! exact brute-force solver, and all work is tallied in unit-cost counters
//! so that sample complexity can be compared without wall clocks.
//!
//! - [`bandit`]: the elimination engine shared by everything else.
//! - [`kmedoids`]: exact PAM and BanditPAM (with the FastPAM1 rewrite).
//! - [`forest`]: histogram decision trees and forests with exact and
//!   MABSplit node splitters.
//! - [`mips`]: exact and adaptive maximum inner product search, plus
//!   matching pursuit.
//! - [`data`]: dense matrices, CSV ingestion and the synthetic generators.
//! - [`bench`]: experiment records, slope fits and tradeoff sweeps.

pub mod bandit;
pub mod bench;
pub mod counter;
pub mod data;
mod error;
pub mod forest;
pub mod kmedoids;
pub mod mips;
pub mod rng;

pub use counter::SampleCounter;
pub use data::Matrix;
pub use error::{Error, Result};
