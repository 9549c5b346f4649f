//! On-disk form of a trained recognizer: the token pipeline plus the
//! acoustic model weights, in one JSON file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::asr::{AsrConfig, AsrModel};
use super::benchmark::{Pipeline, Representation};
use crate::charset::Charset;
use crate::codec::CodecArtifact;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::subword::SubwordVocab;

pub const BUNDLE_VERSION: &str = "bytevq-asr/1";

#[derive(Serialize, Deserialize)]
struct BundleFile {
    version: String,
    representation: String,
    feature_dim: usize,
    config: AsrConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    charset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    vocab: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    codec: Option<String>,
    params: BTreeMap<String, DenseMatrix>,
}

#[derive(Debug, Clone)]
pub struct AsrBundle {
    pub pipeline: Pipeline,
    pub config: AsrConfig,
    pub model: AsrModel,
}

impl AsrBundle {
    pub fn to_json(&self) -> Result<String> {
        let (charset, vocab, codec) = match &self.pipeline {
            Pipeline::Char(c) => (Some(c.chars().iter().collect()), None, None),
            Pipeline::Utf8(v) => (None, Some(v.to_text()), None),
            Pipeline::Vq { codec, vocab } => (None, Some(vocab.to_text()), Some(codec.to_json()?)),
        };
        let file = BundleFile {
            version: BUNDLE_VERSION.into(),
            representation: self.pipeline.representation().name().into(),
            feature_dim: self.model.feature_dim(),
            config: self.config.clone(),
            charset,
            vocab,
            codec,
            params: self.model.params().snapshot(),
        };
        serde_json::to_string(&file).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: BundleFile =
            serde_json::from_str(text).map_err(|e| Error::Integrity(format!("malformed recognizer bundle: {e}")))?;
        if file.version != BUNDLE_VERSION {
            return Err(Error::Version {
                found: file.version,
                expected: BUNDLE_VERSION.into(),
            });
        }
        let missing = |what: &str| Error::Data(format!("recognizer bundle lacks its {what}"));
        let vocab = || -> Result<SubwordVocab> { SubwordVocab::from_text(file.vocab.as_deref().ok_or_else(|| missing("vocabulary"))?) };
        let pipeline = match file.representation.parse::<Representation>()? {
            Representation::Char => {
                Pipeline::Char(Charset::new(file.charset.as_deref().ok_or_else(|| missing("charset"))?.chars().collect())?)
            }
            Representation::Utf8 => Pipeline::Utf8(vocab()?),
            Representation::Vq => Pipeline::Vq {
                codec: CodecArtifact::from_json(file.codec.as_deref().ok_or_else(|| missing("codec"))?)?,
                vocab: vocab()?,
            },
        };
        let model = AsrModel::from_snapshot(file.feature_dim, pipeline.vocab_size(), &file.config, &file.params)?;
        Ok(Self {
            pipeline,
            config: file.config,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Best transcript for one utterance.
    pub fn transcribe(&self, frames: &DenseMatrix) -> Result<String> {
        let best = self.model.decode(frames, self.config.beam_width, 1)?;
        match best.first() {
            Some(h) => self.pipeline.invert(&h.tokens),
            None => Ok(String::new()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bundle(pipeline: Pipeline) -> AsrBundle {
        let config = AsrConfig {
            hidden: 6,
            hidden_layers: 1,
            context: 1,
            ..AsrConfig::default()
        };
        let model = AsrModel::new(4, pipeline.vocab_size(), &config).unwrap();
        AsrBundle { pipeline, config, model }
    }

    #[test]
    fn round_trip_preserves_decoding() {
        let texts = vec!["ab ba".to_string(), "aab".to_string()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frames = DenseMatrix::randn(12, 4, 1.0, &mut rng);
        for rep in [Representation::Char, Representation::Utf8] {
            let b = bundle(Pipeline::build(rep, 262, &texts, None).unwrap());
            let back = AsrBundle::from_json(&b.to_json().unwrap()).unwrap();
            assert_eq!(back.pipeline.representation(), rep);
            assert_eq!(back.model.params().snapshot(), b.model.params().snapshot());
            assert_eq!(back.transcribe(&frames).unwrap(), b.transcribe(&frames).unwrap());
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let b = bundle(Pipeline::Char(Charset::new(vec!['a']).unwrap()));
        let text = b.to_json().unwrap().replace(BUNDLE_VERSION, "bytevq-asr/0");
        assert!(matches!(AsrBundle::from_json(&text), Err(Error::Version { .. })));
        assert!(matches!(AsrBundle::from_json("{"), Err(Error::Integrity(_))));
    }
}
