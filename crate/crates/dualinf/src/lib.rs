//! Engine and evaluation harness for interpretable differential diagnosis
//! with chat-completion language models.
//!
//! The crate is organized around the stages of a diagnostic run:
//!
//! - [`corpus`] — loading, validating, and slicing the annotated clinical
//!   note dataset, including rare-disease subsetting.
//! - [`backend`] — uniform access to chat and embedding providers, with a
//!   deterministic scripted backend and a persistent response cache.
//! - [`protocol`] — prompt rendering and parsing of model output into
//!   structured differential predictions.
//! - [`engine`] — the bidirectional-inference control loop (forward
//!   diagnosis, backward symptom recall, examination with evidence-count
//!   filtering, iterative self-reflection) and its ablation variants.
//! - [`baselines`] — CoT, Diagnosis-CoT, SC-CoT, and Self-Contrast
//!   comparison methods.
//! - [`metrics`] — accuracy, METEOR, BERTScore, sentence similarity,
//!   agreement measures, error-type classification, and run statistics.
//! - [`cli`] — the `run` / `evaluate` / `report` pipeline stages behind the
//!   `dualinf` binary.
//!
//! Numeric kernels in [`metrics`] are generic over the scalar type via
//! `num-traits`; everything else uses the concrete [`Score`] alias.

pub mod backend;
pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod engine;
pub mod metrics;
pub mod protocol;
pub mod text;

/// Concrete scalar type used for all reported scores.
pub type Score = f64;
