//! Post-hoc out-of-distribution detection from classifier weights.
//!
//! The core idea: the row space of a trained classifier head `W ∈ R^{D×C}`
//! spans the directions the classifier actually uses. Features of
//! in-distribution samples live mostly inside that subspace; OOD features
//! leak outside it. Decomposing `W = UΣVᵀ` once and keeping the top-m left
//! singular vectors gives a scoring rule `S(x) = ‖zUₘ‖₂` that needs no
//! training data, no fine-tuning, and O(1) work per sample.
//!
//! The crate is organized as:
//!
//! - [`tensor`]: dense row-major matrices, vectors, and a one-sided Jacobi
//!   SVD — deterministic, dependency-free f64 numerics.
//! - [`subspace`]: subspace construction and projection-norm scoring.
//! - [`baselines`]: softmax/logit scores and an exhaustive KNN detector.
//! - [`metrics`]: AUROC, FPR at fixed TPR, and report assembly.
//! - [`io`]: a small binary tensor container plus manifest and CSV text
//!   formats.
//! - [`synth`]: a seeded synthetic benchmark for end-to-end validation.
//! - [`rng`]: portable deterministic random streams for the benchmark.

pub mod baselines;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod subspace;
pub mod synth;
pub mod tensor;

pub use tensor::{svd, Matrix, SvdFactors, TensorError, Vector};
