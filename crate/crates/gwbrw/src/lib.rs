//! Monte Carlo simulation and verification of branching random walks on
//! b-ary trees indexed by size-conditioned critical Galton-Watson trees.
//!
//! The crate is organized bottom-up:
//!
//! - [`tree_core`]: ordered trees, codings (height / contour / Łukasiewicz),
//!   pointed-tree windows and the right-successor map;
//! - [`gw_sampler`]: offspring distributions, exact conditioned sampling,
//!   trees with a truncated infinite spine, and the scaling sequence a_n;
//! - [`brw`]: branching random walk labels on the b-ary tree (reflected and
//!   free variants), ranges and occupation measures;
//! - [`coupling`]: the reflection coupling between free and reflected label
//!   processes and its discrepancy bounds;
//! - [`walk_estimates`]: hitting/return/Green quantities for the driving
//!   walks, and the range-density constant estimator;
//! - [`metrics`]: finite metric spaces from trees and labels, Gromov-type
//!   comparisons, and a brute-force Prokhorov distance;
//! - [`snakes`]: discrete snakes, spatial contours, Brownian limits and the
//!   cactus construction;
//! - [`experiments_cli`]: batch experiment runners behind the `gwbrw` binary;
//! - [`stats`]: shared statistical plumbing (moments, KS and chi-square
//!   tests, deterministic RNG streams).

pub mod brw;
pub mod coupling;
pub mod experiments_cli;
pub mod gw_sampler;
pub mod metrics;
pub mod snakes;
pub mod stats;
pub mod tree_core;
pub mod walk_estimates;
