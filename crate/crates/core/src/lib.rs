//! Active learning for k-nearest-neighbor classification.
//!
//! The library implements a two-round labeling scheme: a first round of
//! i.i.d. draws is used to estimate the region of instance space where the
//! k-NN vote is still contentious, and the second-round label budget is
//! concentrated there by rejection sampling. Prediction is done by a
//! modified k-NN classifier that routes each query point to the sample
//! pool covering its region.
//!
//! Everything is built against synthetic distributions with closed-form
//! conditional probabilities, so the quantities the guarantees are stated
//! in (effective boundary mass, easy-region mass, disagreement with the
//! Bayes classifier) are computable and checkable.
//!
//! Module map:
//! - [`metric`]: points, metrics, tie-broken exact k-NN queries (brute
//!   force and k-d tree, bit-identical results).
//! - [`classify`]: vote statistics, the standard classifier, and the
//!   two-pool modified classifier.
//! - [`region`]: derived constants, the estimated hard region and its
//!   augmented (rejection) region.
//! - [`sampling`]: the two-round sampling algorithm with label-budget
//!   accounting.
//! - [`oracle`]: synthetic (mu, eta) families with exact distributional
//!   oracles.
//! - [`eval`]: Monte-Carlo estimators and diagnostic checkers for the
//!   guarantees.

pub mod classify;
pub mod error;
pub mod eval;
pub mod metric;
pub mod oracle;
pub mod region;
pub mod rng;
pub mod sampling;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
