//! A finite-truncation laboratory for weak-mode (MAP) estimation in
//! Bayesian linear inverse problems with non-Gaussian priors.
//!
//! The library works with truncated coefficient sequences and three prior
//! families — Gaussian diagonal, Besov (`p`-power weighted), and a
//! Gaussian-mean hierarchy with one hyperparameter — and builds up from
//! them:
//!
//! * [`seqspace`]: coefficient vectors and Besov weight ladders;
//! * [`priors`]: prior log-densities, directional derivatives, sparse
//!   regularizers, and exact samplers;
//! * [`fomin`]: translation densities `r_h(u)` via both quadrature of the
//!   directional logarithmic derivative and exact log-density differences,
//!   plus the weak-mode inequality scan;
//! * [`posterior`]: forward operators, posterior fields, importance and
//!   random-walk samplers, conditional means, small-ball probabilities;
//! * [`solvers`]: weak-mode solvers (direct where the family allows it,
//!   proximal gradient otherwise), solution verification, refinement
//!   studies;
//! * [`bregman`]: Bregman distances and the MAP-versus-CM Bayes-cost
//!   comparison;
//! * [`cli`]: a JSON-config experiment runner with CSV/JSON reports, also
//!   exposed as the `wmap-lab` binary.
//!
//! The `examples/` directory is the guided tour: each example is a runnable
//! program exercising one capability end to end (prior sampling,
//! translation densities, solving, verification, refinement, cost
//! comparison). Randomness is seeded everywhere; set the `WMAP_LAB_THREADS`
//! environment variable to control sampling parallelism (default 1, which
//! makes runs bit-reproducible).

pub mod bregman;
pub mod cli;
pub mod error;
pub mod fomin;
pub mod posterior;
pub mod priors;
pub mod quadrature;
pub mod sample;
pub mod seqspace;
pub mod solvers;

pub use error::{Error, Result};
