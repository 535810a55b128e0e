//! Short-text clustering with the Dirichlet multinomial mixture.
//!
//! Two samplers are provided:
//!
//! * **GSDMM**: collapsed Gibbs sampling from a random start with a uniform
//!   word pseudo-count `β`.
//! * **GSDMM+**: seeded ("adaptive") initialization, per-word pseudo-counts
//!   taken from each word's entropy across clusters, pruning of clusters
//!   that empty out, and a final TF-ICF agglomerative merge down to a
//!   target cluster count.
//!
//! The [`synth`] module generates corpora from the mixture itself and holds
//! brute-force reference computations used by the test suites.

// Range checks written as `!(x > 0.0)` must also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archive;
pub mod corpus;
pub mod eval;
pub mod merge;
pub mod model;
pub mod numeric;
pub mod sampler;
pub mod synth;

pub use corpus::{
    build_corpus, read_dataset, tokenize, Corpus, DatasetFormat, Document, RawDoc, TokenRules,
};
pub use eval::{evaluate, EvalReport, LabeledPartitionPair};
pub use model::{ModelState, WeightingScheme};
pub use sampler::{run, Algorithm, RunConfig, RunOutput};
