//! Compare output representations (characters, UTF-8 byte BPE, learned
//! latent byte BPE) on the same acoustic task.

use std::fmt::Write as _;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use super::asr::{train_asr, AsrConfig};
use super::metrics::{token_error_rate, EvalReport};
use super::synth::{Dataset, Language};
use crate::charset::Charset;
use crate::codec::CodecArtifact;
use crate::error::{Error, Result};
use crate::subword::{
    bpe_decode, bpe_encode, bpe_train, split_at_boundary, words_with_boundary, SubwordVocab, Symbol,
};
use crate::utf8::{utf8_encode, utf8_repair_decode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Char,
    Utf8,
    Vq,
}

impl Representation {
    pub const ALL: [Representation; 3] = [Representation::Char, Representation::Utf8, Representation::Vq];

    pub fn name(&self) -> &'static str {
        match self {
            Representation::Char => "char",
            Representation::Utf8 => "utf8",
            Representation::Vq => "vq",
        }
    }
}

impl std::str::FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "char" => Ok(Representation::Char),
            "utf8" => Ok(Representation::Utf8),
            "vq" => Ok(Representation::Vq),
            _ => Err(Error::Config(format!("unknown representation {s:?} (expected char, utf8 or vq)"))),
        }
    }
}

/// Text ↔ output-token mapping for one representation.
#[derive(Debug, Clone)]
pub enum Pipeline {
    Char(Charset),
    Utf8(SubwordVocab),
    Vq { codec: CodecArtifact, vocab: SubwordVocab },
}

impl Pipeline {
    /// Build the pipeline from training transcripts. `size` is the subword
    /// vocabulary size and is ignored for characters.
    pub fn build(rep: Representation, size: usize, texts: &[String], codec: Option<&CodecArtifact>) -> Result<Self> {
        match rep {
            Representation::Char => Ok(Pipeline::Char(Charset::from_lines(texts.iter().map(String::as_str)))),
            Representation::Utf8 => {
                let corpus: Vec<Vec<Symbol>> = texts.iter().map(|t| utf8_symbols(t)).collect();
                Ok(Pipeline::Utf8(bpe_train(&corpus, 256, size)?))
            }
            Representation::Vq => {
                let codec = codec
                    .ok_or_else(|| Error::Config("the vq representation needs a trained codec".into()))?
                    .clone();
                let corpus = texts
                    .iter()
                    .enumerate()
                    .map(|(i, t)| codec.text_to_bytes_at(t, i + 1))
                    .collect::<Result<Vec<_>>>()?;
                let vocab = bpe_train(&corpus, codec.symbol_count() as u32, size)?;
                Ok(Pipeline::Vq { codec, vocab })
            }
        }
    }

    pub fn representation(&self) -> Representation {
        match self {
            Pipeline::Char(_) => Representation::Char,
            Pipeline::Utf8(_) => Representation::Utf8,
            Pipeline::Vq { .. } => Representation::Vq,
        }
    }

    /// Number of output tokens (the CTC blank excluded).
    pub fn vocab_size(&self) -> usize {
        match self {
            Pipeline::Char(c) => c.len(),
            Pipeline::Utf8(v) | Pipeline::Vq { vocab: v, .. } => v.size(),
        }
    }

    pub fn targets(&self, text: &str, line: usize) -> Result<Vec<u32>> {
        match self {
            Pipeline::Char(c) => Ok(c.encode(text, line)?.into_iter().map(|i| i as u32).collect()),
            Pipeline::Utf8(v) => bpe_encode(v, &utf8_symbols(text)),
            Pipeline::Vq { codec, vocab } => bpe_encode(vocab, &codec.text_to_bytes_at(text, line)?),
        }
    }

    /// Map output tokens back to text, repairing malformed byte sequences.
    pub fn invert(&self, tokens: &[u32]) -> Result<String> {
        match self {
            Pipeline::Char(c) => Ok(c.decode(&tokens.iter().map(|&t| t as usize).collect::<Vec<_>>())),
            Pipeline::Utf8(v) => {
                let symbols = bpe_decode(v, tokens)?;
                let words: Vec<String> = split_at_boundary(&symbols, v.boundary())
                    .into_iter()
                    .map(|w| {
                        let bytes: Vec<u8> = w.iter().map(|&s| s as u8).collect();
                        utf8_repair_decode(&bytes).text
                    })
                    .filter(|w| !w.is_empty())
                    .collect();
                Ok(words.join(" "))
            }
            Pipeline::Vq { codec, vocab } => {
                let symbols: Vec<u32> = bpe_decode(vocab, tokens)?
                    .into_iter()
                    .filter(|&s| s < vocab.boundary())
                    .collect();
                codec.bytes_to_labels(&symbols)
            }
        }
    }
}

/// UTF-8 bytes of each word, each word preceded by the boundary marker.
fn utf8_symbols(text: &str) -> Vec<Symbol> {
    words_with_boundary(text, 256, |w| utf8_encode(w).into_iter().map(Symbol::from).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub representations: Vec<Representation>,
    pub sizes: Vec<usize>,
    pub asr: AsrConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            representations: Representation::ALL.to_vec(),
            sizes: vec![1000],
            asr: AsrConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub representation: Representation,
    pub size: usize,
    pub output_vocab: usize,
    /// Mean training target length in tokens.
    pub mean_target_len: f64,
    pub skipped: usize,
    pub eval: EvalReport,
}

impl BenchmarkRow {
    pub fn ter(&self, language: Language) -> Option<f64> {
        self.eval.tally(language).ter_percent()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchmarkReport {
    /// Free-form label, for example the ablation setting.
    pub label: String,
    pub rows: Vec<BenchmarkRow>,
}

fn fmt_ter(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl BenchmarkReport {
    pub fn row(&self, rep: Representation, size: usize) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.representation == rep && r.size == size)
    }

    /// Representations down, vocabulary sizes across, each cell
    /// `latin WER / cjk CER` in percent.
    pub fn table(&self) -> String {
        let mut sizes: Vec<usize> = self.rows.iter().map(|r| r.size).collect();
        sizes.sort_unstable();
        sizes.dedup();
        let mut reps: Vec<Representation> = self.rows.iter().map(|r| r.representation).collect();
        reps.sort_unstable();
        reps.dedup();
        let mut out = String::new();
        if !self.label.is_empty() {
            let _ = writeln!(out, "# {}", self.label);
        }
        let _ = write!(out, "{:<8}", "repr");
        for s in &sizes {
            let _ = write!(out, " | {:>17}", format!("{s} (lat/cjk)"));
        }
        out.push('\n');
        for rep in reps {
            let _ = write!(out, "{:<8}", rep.name());
            for &s in &sizes {
                let cell = self.row(rep, s).map_or_else(
                    || "-".to_string(),
                    |r| format!("{} / {}", fmt_ter(r.ter(Language::Latin)), fmt_ter(r.ter(Language::Cjk))),
                );
                let _ = write!(out, " | {cell:>17}");
            }
            out.push('\n');
        }
        out
    }

    /// `repr.size.key=value` lines in row order.
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        if !self.label.is_empty() {
            let _ = writeln!(out, "label={}", self.label);
        }
        for r in &self.rows {
            let p = format!("{}.{}", r.representation.name(), r.size);
            let _ = writeln!(out, "{p}.output_vocab={}", r.output_vocab);
            let _ = writeln!(out, "{p}.mean_target_len={:.4}", r.mean_target_len);
            let _ = writeln!(out, "{p}.skipped={}", r.skipped);
            for (lang, t) in [("latin", &r.eval.latin), ("cjk", &r.eval.cjk)] {
                let _ = writeln!(out, "{p}.{lang}.ter={}", fmt_ter(t.ter_percent()));
                let _ = writeln!(out, "{p}.{lang}.sub={}", t.edits.substitutions);
                let _ = writeln!(out, "{p}.{lang}.del={}", t.edits.deletions);
                let _ = writeln!(out, "{p}.{lang}.ins={}", t.edits.insertions);
                let _ = writeln!(out, "{p}.{lang}.ref_len={}", t.reference_len);
                let _ = writeln!(out, "{p}.{lang}.utterances={}", t.utterances);
            }
        }
        out
    }
}

/// Train and score one pipeline.
pub fn evaluate_pipeline(pipeline: &Pipeline, train: &Dataset, test: &Dataset, asr: &AsrConfig) -> Result<BenchmarkRow> {
    let targets = train
        .texts
        .iter()
        .enumerate()
        .map(|(i, t)| pipeline.targets(t, i + 1))
        .collect::<Result<Vec<_>>>()?;
    let mean_target_len = targets.iter().map(Vec::len).sum::<usize>() as f64 / targets.len().max(1) as f64;
    let (model, report) = train_asr(&targets, &train.features, pipeline.vocab_size(), asr)?;
    let mut eval = EvalReport::default();
    for (text, frames) in test.texts.iter().zip(&test.features) {
        let best = model.decode(frames, asr.beam_width, 1)?;
        let hyp = pipeline.invert(best.first().map_or(&[][..], |h| &h.tokens))?;
        eval.add(&token_error_rate(text, &hyp));
    }
    Ok(BenchmarkRow {
        representation: pipeline.representation(),
        size: 0,
        output_vocab: pipeline.vocab_size(),
        mean_target_len,
        skipped: report.skipped,
        eval,
    })
}

/// One row per (representation, size). The character representation does
/// not depend on the size and is trained once, then repeated per size.
pub fn run_benchmark(
    train: &Dataset,
    test: &Dataset,
    codec: Option<&CodecArtifact>,
    config: &BenchmarkConfig,
) -> Result<BenchmarkReport> {
    if train.texts.len() != train.features.len() || test.texts.len() != test.features.len() {
        return Err(Error::Data("text and feature counts differ".into()));
    }
    if config.representations.contains(&Representation::Vq) && codec.is_none() {
        return Err(Error::Config("the vq representation needs a trained codec".into()));
    }
    let mut rows = Vec::new();
    let mut char_row: Option<BenchmarkRow> = None;
    for &rep in &config.representations {
        for &size in &config.sizes {
            let started = Instant::now();
            let mut row = match (rep, &char_row) {
                (Representation::Char, Some(r)) => r.clone(),
                _ => {
                    let pipeline = Pipeline::build(rep, size, &train.texts, codec)?;
                    evaluate_pipeline(&pipeline, train, test, &config.asr)?
                }
            };
            row.size = size;
            if rep == Representation::Char {
                char_row = Some(row.clone());
            }
            info!(
                "{} @ {size}: latin {} cjk {} ({:.1}s)",
                rep.name(),
                fmt_ter(row.ter(Language::Latin)),
                fmt_ter(row.ter(Language::Cjk)),
                started.elapsed().as_secs_f64()
            );
            rows.push(row);
        }
    }
    Ok(BenchmarkReport {
        label: String::new(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asrtoy::synth::{synth_generate, SynthTaskSpec};
    use crate::autoencoder::{train_autoencoder, ModelConfig, TrainConfig};
    use crate::codec::{corpus_hash, Provenance};
    use crate::numerics::OptimizerConfig;

    fn tiny_task() -> crate::asrtoy::synth::SynthCorpus {
        synth_generate(&SynthTaskSpec {
            latin_chars: 5,
            cjk_chars: 12,
            phones: 10,
            utterances: 60,
            lexicon_words: 20,
            feature_dim: 6,
            noise: 0.1,
            homophone_rate: 0.0,
            test_fraction: 0.2,
            ..SynthTaskSpec::default()
        })
        .unwrap()
    }

    fn codec_for(texts: &[String], charset: &Charset) -> CodecArtifact {
        let cfg = TrainConfig {
            model: ModelConfig {
                dim: 8,
                encoder_layers: 1,
                levels: 2,
                codebook_size: 8,
                ..ModelConfig::default()
            },
            optimizer: OptimizerConfig::adam(0.01),
            epochs: 30,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let (model, _) = train_autoencoder(texts, None, Some(charset.clone()), &cfg).unwrap();
        let prov = Provenance {
            seed: 0,
            corpus_hash: corpus_hash(texts),
        };
        CodecArtifact::from_model(&model, prov, false).unwrap()
    }

    #[test]
    fn pipelines_invert_their_targets() {
        let task = tiny_task();
        let codec = codec_for(&task.train.texts, &task.charset);
        for rep in Representation::ALL {
            let p = Pipeline::build(rep, 300, &task.train.texts, Some(&codec)).unwrap();
            for (i, text) in task.train.texts.iter().enumerate() {
                let t = p.targets(text, i + 1).unwrap();
                let back = p.invert(&t).unwrap();
                if rep == Representation::Vq {
                    // The learned codec is only required to be nearly lossless.
                    let e = token_error_rate(text, &back);
                    assert!(e.rate() <= 0.5, "{text:?} -> {back:?}");
                } else {
                    assert_eq!(&back, text);
                }
            }
        }
    }

    #[test]
    fn vq_without_codec_is_config_error() {
        let task = tiny_task();
        let cfg = BenchmarkConfig::default();
        assert!(matches!(run_benchmark(&task.train, &task.test, None, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn one_row_per_representation_and_size() {
        let task = tiny_task();
        let codec = codec_for(&task.train.texts, &task.charset);
        let cfg = BenchmarkConfig {
            representations: Representation::ALL.to_vec(),
            sizes: vec![280, 300],
            asr: AsrConfig {
                hidden: 16,
                hidden_layers: 1,
                epochs: 1,
                ..AsrConfig::default()
            },
        };
        let report = run_benchmark(&task.train, &task.test, Some(&codec), &cfg).unwrap();
        assert_eq!(report.rows.len(), 6);
        for rep in Representation::ALL {
            for s in [280, 300] {
                assert!(report.row(rep, s).is_some());
            }
        }
        assert_eq!(report.table().lines().count(), 4);
        assert!(report.key_values().contains("vq.300.cjk.ter="));
    }

    #[test]
    fn char_representation_learns_a_clean_task() {
        let task = synth_generate(&SynthTaskSpec {
            latin_chars: 8,
            cjk_chars: 10,
            phones: 16,
            utterances: 300,
            lexicon_words: 20,
            feature_dim: 6,
            noise: 0.0,
            homophone_rate: 0.0,
            test_fraction: 0.2,
            ..SynthTaskSpec::default()
        })
        .unwrap();
        let cfg = BenchmarkConfig {
            representations: vec![Representation::Char],
            sizes: vec![0],
            asr: AsrConfig {
                hidden: 48,
                hidden_layers: 1,
                epochs: 40,
                optimizer: OptimizerConfig::adam(5e-3),
                ..AsrConfig::default()
            },
        };
        let report = run_benchmark(&task.train, &task.test, None, &cfg).unwrap();
        let row = &report.rows[0];
        for lang in [Language::Latin, Language::Cjk] {
            assert!(row.ter(lang).unwrap() < 5.0, "{}", report.table());
        }
    }
}
