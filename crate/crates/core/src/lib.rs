//! Numerical verification of entropy-power, determinant and Fisher-information
//! inequalities.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`matrix`] | SPD matrices, Cholesky log-determinants, Schur complements, Bergström / Ky Fan gaps |
//! | [`mixture`] | Gaussian mixtures with exact log-density and score, closed under sums, scalings, marginals and linear maps |
//! | [`estimators`] | Entropy, entropy power and Fisher information: closed forms for Gaussians, Monte-Carlo with error bars for mixtures, a kNN cross-oracle |
//! | [`checks`] | One gap checker per inequality or identity, producing an [`InequalityReport`] |
//! | [`runner`] | Suite configuration, instance generation, deterministic seeding, JSON/CSV reports |
//!
//! All entropies are in nats.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod error;
pub mod estimators;
pub mod matrix;
pub mod mixture;
pub mod rng;
pub mod runner;

pub use checks::{CheckConfig, InequalityReport, Verdict};
pub use error::{Error, Result};
pub use estimators::{Method, ScalarEstimate};
pub use matrix::SpdMatrix;
pub use mixture::{GaussianComponent, GaussianMixture, MarkovTriple, SampleSet};

/// `2πe`, the entropy power of a standard Gaussian in any dimension.
pub const TWO_PI_E: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::E;
