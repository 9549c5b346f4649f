use std::path::PathBuf;

use bytevq_core::asrtoy::Representation;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "bytevq",
    version,
    about = "Byte-level residual-VQ text codec with a toy speech recognition harness",
    after_help = "Every subcommand accepts --config FILE, a JSON object whose keys are flag names.\n\
                  Precedence: command-line flag > config file > built-in default."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic two-script speech task (texts plus features).
    SynthGen(SynthGenArgs),
    /// Train the text auto-encoder and write a codec artifact.
    CodecTrain(CodecTrainArgs),
    /// Encode text lines into latent byte streams.
    CodecEncode(CodecEncodeArgs),
    /// Decode latent byte streams back into text.
    CodecDecode(CodecDecodeArgs),
    /// Learn a BPE vocabulary over UTF-8 or latent byte streams.
    BpeTrain(BpeTrainArgs),
    /// Train a CTC recognizer for one output representation.
    AsrTrain(AsrTrainArgs),
    /// Transcribe features with a trained recognizer and score them.
    AsrEval(AsrEvalArgs),
    /// Compare char, UTF-8 and latent-byte recognizers on a task.
    Benchmark(BenchmarkArgs),
    /// Apply random substitutions, deletions and insertions to byte streams.
    Corrupt(CorruptArgs),
    /// Check every auto-encoder loss gradient against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct Common {
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON file of flag defaults (keys are flag names).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct SynthGenArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output directory for train/test texts and features.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 26)]
    pub latin_chars: usize,
    #[arg(long, default_value_t = 500)]
    pub cjk_chars: usize,
    #[arg(long, default_value_t = 40)]
    pub phones: usize,
    #[arg(long, default_value_t = 0.3)]
    pub homophone_rate: f64,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    /// Standard deviation of the frame noise.
    #[arg(long, default_value_t = 0.6)]
    pub noise: f64,
    #[arg(long, default_value_t = 2000)]
    pub utterances: usize,
    #[arg(long, default_value_t = 0.5)]
    pub cjk_fraction: f64,
    #[arg(long, default_value_t = 400)]
    pub lexicon_words: usize,
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
}

/// Auto-encoder architecture and training schedule.
#[derive(Args, Debug, Clone, Serialize)]
pub struct CodecOpts {
    /// Number of residual levels N.
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    /// Codebook size M per level.
    #[arg(long, default_value_t = 256)]
    pub codebook_size: usize,
    /// Latent dimension D.
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 2)]
    pub encoder_layers: usize,
    /// Commitment weight.
    #[arg(long, default_value_t = 0.25)]
    pub beta: f64,
    #[arg(long, default_value_t = 12)]
    pub codec_epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub codec_batch_size: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub codec_lr: f64,
    /// Weight of the label reconstruction loss.
    #[arg(long, default_value_t = 1.0)]
    pub w1: f64,
    /// Weight of the acoustic-embedding reconstruction loss.
    #[arg(long, default_value_t = 1.0)]
    pub w2: f64,
    /// Weight of the CTC loss.
    #[arg(long, default_value_t = 1.0)]
    pub w3: f64,
    /// Weight of the quantization loss.
    #[arg(long, default_value_t = 0.1)]
    pub w4: f64,
    /// Warm-start codebooks with k-means.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub kmeans_init: bool,
    /// Reset codebook rows that stay unused.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub restart: bool,
    /// Acoustic encoder context frames on each side.
    #[arg(long, default_value_t = 2)]
    pub acoustic_context: usize,
    #[arg(long, default_value_t = 64)]
    pub acoustic_hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub acoustic_layers: usize,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct CodecTrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training corpus, one utterance per line.
    #[arg(long, value_name = "FILE")]
    pub text: PathBuf,
    /// Acoustic features aligned with --text; without them only the label
    /// path is trained.
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    /// Output codec artifact.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub codec: CodecOpts,
    /// Also store the acoustic encoder so training can resume.
    #[arg(long)]
    pub keep_trainer_state: bool,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct CodecEncodeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "FILE")]
    pub codec: PathBuf,
    /// Text input, one utterance per line.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Byte streams, one space-separated line per utterance.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct CodecDecodeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "FILE")]
    pub codec: PathBuf,
    /// Byte streams, one space-separated line per utterance.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Group every N consecutive bytes instead of splitting at level resets.
    #[arg(long)]
    pub positional: bool,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct BpeTrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Text corpus, one utterance per line.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Byte representation to merge over: utf8 or vq.
    #[arg(long, default_value = "utf8")]
    pub representation: Representation,
    /// Codec artifact, required for vq.
    #[arg(long, value_name = "FILE")]
    pub codec: Option<PathBuf>,
    /// Target vocabulary size including base symbols.
    #[arg(long, default_value_t = 1000)]
    pub size: usize,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

/// Recognizer architecture and training schedule.
#[derive(Args, Debug, Clone, Serialize)]
pub struct AsrOpts {
    #[arg(long, default_value_t = 12)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub hidden_layers: usize,
    /// Context frames on each side.
    #[arg(long, default_value_t = 3)]
    pub context: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 2e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub beam_width: usize,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct AsrTrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "FILE")]
    pub text: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub features: PathBuf,
    /// Output representation: char, utf8 or vq.
    #[arg(long, default_value = "utf8")]
    pub representation: Representation,
    /// Subword vocabulary size (ignored for char).
    #[arg(long, default_value_t = 1000)]
    pub size: usize,
    /// Codec artifact, required for vq.
    #[arg(long, value_name = "FILE")]
    pub codec: Option<PathBuf>,
    /// Prebuilt BPE vocabulary instead of learning one from --text.
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    #[command(flatten)]
    pub asr: AsrOpts,
    /// Output recognizer bundle.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct AsrEvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Recognizer bundle from asr-train.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Reference transcripts.
    #[arg(long, value_name = "FILE")]
    pub text: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub features: PathBuf,
    /// Write one hypothesis per line.
    #[arg(long, value_name = "FILE")]
    pub hyp_out: Option<PathBuf>,
    /// Write key=value scores.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory holding train.txt, train.feats, test.txt and test.feats.
    #[arg(long, value_name = "DIR")]
    pub data_dir: PathBuf,
    /// Directory for report.txt, report.kv and report.json.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Pretrained codec; otherwise one is trained on the training split.
    #[arg(long, value_name = "FILE", conflicts_with = "w2_sweep")]
    pub codec: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "char,utf8,vq")]
    pub representations: Vec<Representation>,
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    pub sizes: Vec<usize>,
    /// Retrain the codec for each listed acoustic-reconstruction weight.
    #[arg(long, value_delimiter = ',')]
    pub w2_sweep: Option<Vec<f64>>,
    #[command(flatten)]
    pub codec_opts: CodecOpts,
    #[command(flatten)]
    pub asr: AsrOpts,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct CorruptArgs {
    #[command(flatten)]
    pub common: Common,
    /// Byte streams, one line per utterance.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub substitution: f64,
    #[arg(long, default_value_t = 0.0)]
    pub deletion: f64,
    #[arg(long, default_value_t = 0.0)]
    pub insertion: f64,
    /// Codec artifact whose N·M ids bound substituted and inserted bytes.
    #[arg(long, value_name = "FILE", required_unless_present = "symbols")]
    pub codec: Option<PathBuf>,
    /// Explicit symbol count instead of --codec.
    #[arg(long, conflicts_with = "codec")]
    pub symbols: Option<u32>,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    /// Maximum relative error per entry.
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    /// Write the full per-entry report as JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
