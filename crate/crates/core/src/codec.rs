//! The trained codec as a standalone product: text → latent byte stream,
//! error-tolerant stream → text, and a self-contained artifact file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::autoencoder::model::{encode_with, AcousticSettings, AutoEncoderModel, ModelConfig};
use crate::autoencoder::{LabelDecoder, LabelEncoder};
use crate::charset::Charset;
use crate::error::{Error, Result};
use crate::numerics::{axpy, DenseMatrix, ParamStore};
use crate::quantizer::RvqCodec;

pub const ARTIFACT_VERSION: &str = "bytevq-codec/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    /// SHA-256 of the training corpus, see [`corpus_hash`].
    pub corpus_hash: String,
}

/// Extra state needed to resume training; absent in decode-only artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainerState {
    pub acoustic: AcousticSettings,
    pub step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    version: String,
    levels: usize,
    codebook_size: usize,
    dim: usize,
    beta: f64,
    encoder_layers: usize,
    charset: Vec<char>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Block {
    name: String,
    shape: [usize; 2],
    values: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Body {
    header: Header,
    provenance: Provenance,
    blocks: Vec<Block>,
    trainer: Option<TrainerState>,
}

/// Self-contained codec: charset, codebooks and label encoder/decoder
/// weights. Weights are held at single precision so that a saved and
/// reloaded artifact behaves bit-identically.
#[derive(Debug, Clone)]
pub struct CodecArtifact {
    charset: Charset,
    config: ModelConfig,
    params: ParamStore,
    encoder: LabelEncoder,
    decoder: LabelDecoder,
    codec: RvqCodec,
    provenance: Provenance,
    trainer: Option<TrainerState>,
}

impl PartialEq for CodecArtifact {
    fn eq(&self, other: &Self) -> bool {
        self.charset == other.charset
            && self.config == other.config
            && self.provenance == other.provenance
            && self.trainer == other.trainer
            && self.params.snapshot() == other.params.snapshot()
    }
}

/// SHA-256 over the corpus lines joined by newlines, hex encoded.
pub fn corpus_hash<S: AsRef<str>>(lines: &[S]) -> String {
    let mut h = Sha256::new();
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            h.update(b"\n");
        }
        h.update(line.as_ref().as_bytes());
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn round_f32(m: &DenseMatrix) -> DenseMatrix {
    let mut m = m.clone();
    m.map_inplace(|x| x as f32 as f64);
    m
}

impl CodecArtifact {
    /// Capture a trained model. With `keep_trainer_state` the acoustic
    /// encoder (if any) is stored as well so training can resume.
    pub fn from_model(
        model: &AutoEncoderModel,
        provenance: Provenance,
        keep_trainer_state: bool,
    ) -> Result<Self> {
        let mut params = ParamStore::new();
        let src = model.params();
        let keep_acoustic = keep_trainer_state && model.has_acoustic();
        for id in src.ids() {
            let name = src.name(id);
            if name.starts_with("acoustic_encoder.") && !keep_acoustic {
                continue;
            }
            params.register(name, round_f32(src.value(id)))?;
        }
        let mut config = model.config().clone();
        let trainer = match (keep_acoustic, config.acoustic) {
            (true, Some(acoustic)) => Some(TrainerState {
                acoustic,
                step: src.step_count(),
            }),
            _ => None,
        };
        if trainer.is_none() {
            config.acoustic = None;
        }
        Self::assemble(model.charset().clone(), config, params, provenance, trainer)
    }

    fn assemble(
        charset: Charset,
        config: ModelConfig,
        params: ParamStore,
        provenance: Provenance,
        trainer: Option<TrainerState>,
    ) -> Result<Self> {
        let encoder = LabelEncoder::attach(&params, charset.len(), config.dim, config.encoder_layers)?;
        let decoder = LabelDecoder::attach(&params, config.dim)?;
        let codebooks = (0..config.levels)
            .map(|k| {
                let name = format!("codebook.{k}");
                params
                    .id(&name)
                    .map(|id| params.value(id).clone())
                    .ok_or_else(|| Error::Data(format!("missing parameter {name}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let codec = RvqCodec::new(codebooks, config.beta)?;
        if codec.codebook_size() != config.codebook_size || codec.dim() != config.dim {
            return Err(Error::Data("codebook shape disagrees with header".into()));
        }
        Ok(Self {
            charset,
            config,
            params,
            encoder,
            decoder,
            codec,
            provenance,
            trainer,
        })
    }

    /// Rebuild a trainable model (acoustic encoder included when the
    /// trainer block is present).
    pub fn to_model(&self) -> Result<AutoEncoderModel> {
        AutoEncoderModel::from_params(self.charset.clone(), self.config.clone(), self.params.clone())
    }

    pub fn charset(&self) -> &Charset {
        &self.charset
    }

    pub fn levels(&self) -> usize {
        self.config.levels
    }

    pub fn codebook_size(&self) -> usize {
        self.config.codebook_size
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn beta(&self) -> f64 {
        self.config.beta
    }

    /// Number of distinct stream symbols, `N·M`.
    pub fn symbol_count(&self) -> usize {
        self.config.levels * self.config.codebook_size
    }

    pub fn codec(&self) -> &RvqCodec {
        &self.codec
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn trainer_state(&self) -> Option<&TrainerState> {
        self.trainer.as_ref()
    }

    pub fn text_to_bytes(&self, text: &str) -> Result<Vec<u32>> {
        self.text_to_bytes_at(text, 1)
    }

    /// As [`text_to_bytes`](Self::text_to_bytes), reporting `line` in
    /// encode errors.
    pub fn text_to_bytes_at(&self, text: &str, line: usize) -> Result<Vec<u32>> {
        let tokens = self.charset.encode(text, line)?;
        let enc = encode_with(&self.encoder, &self.params, &self.codec, &tokens)?;
        Ok(enc.ids(self.config.codebook_size))
    }

    fn check_ids(&self, stream: &[u32]) -> Result<()> {
        let limit = self.symbol_count();
        match stream.iter().find(|&&id| id as usize >= limit) {
            Some(id) => Err(Error::Data(format!(
                "symbol id {id} out of range (stream alphabet has {limit} symbols)"
            ))),
            None => Ok(()),
        }
    }

    fn emit(&self, v: &[f64], out: &mut String) -> Result<()> {
        let idx = self.decoder.argmax(&self.params, v)?;
        out.push(self.charset.char_at(idx).expect("decoder width equals charset size"));
        Ok(())
    }

    /// Decode a possibly corrupted stream. Embeddings accumulate while the
    /// codebook level keeps rising; a non-rising level closes the current
    /// token. Each closed token becomes the decoder's most likely character.
    pub fn bytes_to_labels(&self, stream: &[u32]) -> Result<String> {
        self.check_ids(stream)?;
        let mut out = String::new();
        if stream.is_empty() {
            return Ok(out);
        }
        let m = self.config.codebook_size;
        let mut v = vec![0.0; self.config.dim];
        let mut k: Option<usize> = None;
        for &id in stream {
            let sym = crate::quantizer::LatentSymbol::from_id(id, m, self.config.levels)?;
            let e = self.codec.embedding(sym);
            let j = sym.level;
            match k {
                Some(prev) if prev >= j => {
                    self.emit(&v, &mut out)?;
                    v.copy_from_slice(e);
                }
                _ => axpy(&mut v, 1.0, e),
            }
            k = Some(j);
        }
        self.emit(&v, &mut out)?;
        Ok(out)
    }

    /// Baseline that ignores levels and cuts the stream every N symbols.
    pub fn bytes_to_labels_positional(&self, stream: &[u32]) -> Result<String> {
        self.check_ids(stream)?;
        let m = self.config.codebook_size;
        let mut out = String::new();
        for chunk in stream.chunks(self.config.levels) {
            let mut v = vec![0.0; self.config.dim];
            for &id in chunk {
                let sym = crate::quantizer::LatentSymbol::from_id(id, m, self.config.levels)?;
                axpy(&mut v, 1.0, self.codec.embedding(sym));
            }
            self.emit(&v, &mut out)?;
        }
        Ok(out)
    }

    /// Characters whose isolated encoding duplicates another character's:
    /// `|charset| - #distinct codes`.
    pub fn collision_count(&self) -> Result<usize> {
        let mut seen = std::collections::HashSet::new();
        for &c in self.charset.chars() {
            seen.insert(self.text_to_bytes(&c.to_string())?);
        }
        Ok(self.charset.len() - seen.len())
    }

    fn body(&self) -> Body {
        let blocks = self
            .params
            .ids()
            .map(|id| {
                let m = self.params.value(id);
                Block {
                    name: self.params.name(id).to_string(),
                    shape: [m.rows(), m.cols()],
                    values: m.data().iter().map(|&x| (x as f32).to_string()).collect(),
                }
            })
            .collect();
        Body {
            header: Header {
                version: ARTIFACT_VERSION.to_string(),
                levels: self.config.levels,
                codebook_size: self.config.codebook_size,
                dim: self.config.dim,
                beta: self.config.beta,
                encoder_layers: self.config.encoder_layers,
                charset: self.charset.chars().to_vec(),
            },
            provenance: self.provenance.clone(),
            blocks,
            trainer: self.trainer.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let body = serde_json::to_value(self.body()).map_err(|e| Error::Data(e.to_string()))?;
        let checksum = hex(&Sha256::digest(body.to_string().as_bytes()));
        let doc = serde_json::json!({ "body": body, "checksum": checksum });
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| Error::Integrity(format!("artifact is not a complete document: {e}")))?;
        let version = doc
            .pointer("/body/header/version")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Integrity("artifact header has no version".into()))?;
        if version != ARTIFACT_VERSION {
            return Err(Error::Version {
                found: version.to_string(),
                expected: ARTIFACT_VERSION.to_string(),
            });
        }
        let body_value = &doc["body"];
        let stored = doc["checksum"].as_str().unwrap_or_default();
        let actual = hex(&Sha256::digest(body_value.to_string().as_bytes()));
        if stored != actual {
            return Err(Error::Integrity(format!(
                "checksum mismatch: stored {stored:?}, computed {actual}"
            )));
        }
        let body: Body = serde_json::from_value(body_value.clone())
            .map_err(|e| Error::Integrity(format!("malformed artifact body: {e}")))?;
        let mut params = ParamStore::new();
        for block in &body.blocks {
            let [rows, cols] = block.shape;
            let values = block
                .values
                .iter()
                .map(|s| s.parse::<f32>().map(f64::from))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Error::Integrity(format!("block {}: {e}", block.name)))?;
            let m = DenseMatrix::from_vec(rows, cols, values)
                .map_err(|e| Error::Integrity(format!("block {}: {e}", block.name)))?;
            params.register(block.name.clone(), m)?;
        }
        let h = body.header;
        let config = ModelConfig {
            dim: h.dim,
            encoder_layers: h.encoder_layers,
            levels: h.levels,
            codebook_size: h.codebook_size,
            beta: h.beta,
            acoustic: body.trainer.as_ref().map(|t| t.acoustic),
        };
        config.validate()?;
        let charset = Charset::new(h.charset)?;
        Self::assemble(charset, config, params, body.provenance, body.trainer)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// One utterance per line, decimal ids separated by single spaces.
pub fn format_stream(stream: &[u32]) -> String {
    stream
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_stream(line: &str, line_no: usize) -> Result<Vec<u32>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<u32>().map_err(|_| {
                Error::Data(format!("line {line_no}: {tok:?} is not a symbol id"))
            })
        })
        .collect()
}
