//! Mean-square accuracy of randomized consensus systems that preserve the
//! average in expectation.
//!
//! The process is `x(t+1) = x(t) - L(t) x(t)` with i.i.d. random Laplacians
//! `L(t)` satisfying `1* E[L] = 0`. A scalar `gamma` with
//!
//! ```text
//! E[L* 1 1* L]  <=  gamma * E[L + L* - L* L]      (semidefinite order)
//! ```
//!
//! bounds the drift of the average at every time:
//! `E[(xbar(t) - xbar(0))^2] <= gamma / (N + gamma) * V(x(0))`.
//!
//! Modules:
//!
//! - [`graph`]: weighted digraphs, Laplacians, generators, disagreement.
//! - [`spectral`]: Jacobi eigen-decomposition, PSD tests, graph spectra.
//! - [`models`]: the AAGA / BGA / SAGA / PBGA update laws and their moments.
//! - [`certify`]: certificate checks, minimal `gamma`, closed-form `gamma`s,
//!   the deviation bound and the comparison bounds from earlier analyses.
//! - [`oracle`]: exact second-moment propagation on enumerable laws.
//! - [`montecarlo`]: seeded, order-independent simulation with CIs.
//! - [`experiments`]: the driver behind the command-line tool.

pub mod certify;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod models;
pub mod montecarlo;
pub mod oracle;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Matrix, WeightedGraph};
pub use models::{LaplacianEvent, ModelKind, MomentSet, UpdateModel};
