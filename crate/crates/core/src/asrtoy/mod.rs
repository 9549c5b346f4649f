//! Desk-scale speech recognition harness: synthetic task, CTC acoustic
//! model, prefix beam search, stream corruption and error-rate scoring.

pub mod asr;
pub mod beam;
pub mod benchmark;
pub mod bundle;
pub mod corrupt;
pub mod features;
pub mod metrics;
pub mod synth;

pub use asr::{train_asr, AsrConfig, AsrModel, AsrTrainReport};
pub use beam::{ctc_prefix_beam_search, Hypothesis};
pub use benchmark::{
    evaluate_pipeline, run_benchmark, BenchmarkConfig, BenchmarkReport, BenchmarkRow, Pipeline, Representation,
};
pub use bundle::{AsrBundle, BUNDLE_VERSION};
pub use corrupt::{corrupt_stream, CorruptionCounts, CorruptionRates};
pub use features::{load_features, read_features, save_features, write_features};
pub use metrics::{evaluate, levenshtein, token_error_rate, token_error_rate_in, EditCounts, ErrorTally, EvalReport, TerEntry, TokenMode};
pub use synth::{synth_generate, Dataset, Language, Lexicon, SynthCorpus, SynthTaskSpec};
