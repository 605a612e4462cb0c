//! Demonstration selection for in-context learning, plus the numerical lab
//! used to study it.
//!
//! The crate has three layers:
//!
//! * [`pool`] — validated pools of embedded examples with JSONL ingestion and
//!   a compact binary format, plus keyword-occurrence embeddings for answer
//!   text.
//! * [`selection`] — the selection strategies (`rand`, `topk`, `div`,
//!   `topk-div`, `kmeans`) with deterministic tie-breaking and seedable
//!   randomness.
//! * [`theory`] — binary skill-set embeddings, the min-norm linear-regression
//!   predictor, closed-form expected losses, and Monte Carlo simulation of
//!   selection quality (loss and coverage).
//!
//! [`prompt`], [`eval`], and [`provider`] form the few-shot evaluation
//! harness: template rendering, output truncation/extraction/scoring, and a
//! pluggable completion/scoring backend (deterministic mock or HTTP).

pub mod error;
pub mod eval;
pub mod kmeans;
pub mod pool;
pub mod prompt;
pub mod provider;
pub mod rng;
pub mod selection;
pub mod similarity;
pub mod theory;

/// Scalar type used for all similarity and loss computations. Embeddings are
/// stored as `f32` (matching the on-disk format) but every score is computed
/// in double precision so tie behaviour is reproducible.
pub type Real = f64;

/// Exact rational scalar for closed-form identities that must hold without
/// rounding (e.g. the even-`l` loss identity checks).
pub type Rational = num_rational::Ratio<i64>;

pub use error::Error;
pub use pool::{ExampleRecord, Pool, Role};
pub use selection::{Method, SelectionConfig, SelectionResult, StepScore};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
