//! Treat human annotations and LLM annotation samples as probability
//! distributions over emotion categories, measure how they diverge, and fit
//! post-hoc calibration maps that shrink the gap.
//!
//! The crate is organised bottom-up:
//!
//! - [`labels`] fixes the ordered category space every distribution is aligned to.
//! - [`corpus`] loads categorical (TSV) and VAD (CSV) corpora, assigns agreement
//!   tiers and draws stratified samples.
//! - [`dist`] builds distributions from annotators or LLM samples and computes entropy.
//! - [`metrics`] holds divergences, rank correlation, per-category profiles,
//!   tier breakdowns and VAD evaluation.
//! - [`transparency`] scores categories by embedding similarity and lexicon coverage.
//! - [`calibrate`] implements temperature scaling, bias correction and isotonic
//!   regression together with stratified k-fold cross-validation.
//! - [`stats`] provides the nonparametric tests, effect sizes and bootstrap CIs.
//! - [`sampler`] renders prompts, parses responses and collects samples through a
//!   pluggable chat backend into a JSON-lines store.

pub mod calibrate;
pub mod corpus;
pub mod dist;
pub mod labels;
pub mod metrics;
pub mod sampler;
pub mod seed;
pub mod special;
pub mod stats;
pub mod transparency;

pub use corpus::{AgreementTier, Annotations, TextRecord, Vad};
pub use dist::{CategoricalDistribution, SampleSelection};
pub use labels::LabelSpace;
