//! Byte-level residual vector-quantized codes for multilingual speech
//! recognition: numerics, UTF-8 repair, BPE, the RVQ auto-encoder, the
//! codec that turns text into byte-like symbols and back, and a small
//! synthetic ASR harness for comparing output representations.

pub mod asrtoy;
pub mod autoencoder;
pub mod charset;
pub mod codec;
pub mod error;
pub mod numerics;
pub mod quantizer;
pub mod subword;
pub mod utf8;

pub use charset::Charset;
pub use error::{Error, Result};
pub use numerics::{DenseMatrix, OptimizerConfig, OptimizerKind, ParamId, ParamStore};
pub use quantizer::{LatentSymbol, RvqCodec};
