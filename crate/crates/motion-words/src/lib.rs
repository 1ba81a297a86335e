//! Motion-word tokenization and retrieval for 3-D skeleton sequences.
//!
//! The pipeline turns a skeleton sequence into a short string of discrete
//! *motion words* and searches a corpus of such strings in two stages:
//!
//! 1. [`featurize`] cuts a sequence into temporal patches of inter-joint
//!    distance features, invariant to rotation, translation and (optionally)
//!    performer scale.
//! 2. [`codebook`] learns a K-entry vocabulary over patches with EMA updates
//!    and immediate dead-code revival, and quantizes patches into words.
//! 3. [`index`] stores one l2-normalised bag-of-words histogram per sequence
//!    and shortlists query candidates by cosine similarity, tagging periodic
//!    sequences via autocorrelation.
//! 4. [`align`] re-ranks shortlisted candidates with temporal alignment
//!    metrics (TWED, LCSS, EDR, ERP, plus a diagnostic DTW and an n-gram
//!    local-context term).
//! 5. [`engine`] combines the metrics under convex weights and returns the
//!    top-k candidates; a brute-force back-end provides the accuracy ceiling.
//! 6. [`eval`] measures retrieval quality with leave-one-out / leave-K-out
//!    protocols and generates seeded synthetic corpora.
//!
//! Everything is deterministic given a seed: quantization ties break to the
//! lowest code index, rankings tie-break by id, and all randomness flows
//! through seeded ChaCha generators.

pub mod align;
pub mod codebook;
pub mod engine;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod index;
mod io;
pub mod pose;

pub use align::{AlignParams, MetricKind, MetricScore};
pub use codebook::{
    tokenize_sequence, train_codebook, Codebook, CodebookHealth, FeatureMeta, ReservoirScope,
    TokenSequence, TrainConfig,
};
pub use engine::{
    query, query_brute_force, score_pair, Backend, EngineConfig, RetrievalResult, ScoreWeights,
};
pub use error::{Error, Result};
pub use eval::{evaluate, gen_synth_corpus, gen_synth_poses, EvalConfig, EvalProtocol, EvalReport};
pub use featurize::{featurize_sequence, pairwise_distances, FeaturizerConfig, PatchFeature};
pub use index::{
    build_histogram, build_index, cosine_sim, is_periodic, shortlist, shortlist_indices,
    shortlist_size, Histogram, MotionIndex, PeriodicityConfig,
};
pub use pose::PoseSequence;
