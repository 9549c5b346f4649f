//! Binary feature files: magic `BVQF`, then little-endian `u32` version,
//! feature dimension and utterance count, then per utterance a `u32` frame
//! count followed by the frames as `f32` values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"BVQF";
pub const FEATURE_VERSION: u32 = 1;

pub fn write_features<W: Write>(mut out: W, dim: usize, utterances: &[DenseMatrix]) -> Result<()> {
    let io = |e| Error::io("<feature stream>", e);
    let mut buf = Vec::new();
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    buf.extend_from_slice(&(utterances.len() as u32).to_le_bytes());
    for (i, u) in utterances.iter().enumerate() {
        if u.cols() != dim {
            return Err(Error::Shape(format!("utterance {i} has dim {}, expected {dim}", u.cols())));
        }
        buf.extend_from_slice(&(u.rows() as u32).to_le_bytes());
        for &x in u.data() {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(io)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Data(format!("feature file truncated while reading {what}")));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }
}

/// Returns the feature dimension and the utterances.
pub fn read_features<R: Read>(mut input: R) -> Result<(usize, Vec<DenseMatrix>)> {
    let mut data = Vec::new();
    input
        .read_to_end(&mut data)
        .map_err(|e| Error::io("<feature stream>", e))?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(4, "magic")? != FEATURE_MAGIC {
        return Err(Error::Data("not a feature file (bad magic)".into()));
    }
    let version = c.u32("version")?;
    if version != FEATURE_VERSION {
        return Err(Error::Version {
            found: version.to_string(),
            expected: FEATURE_VERSION.to_string(),
        });
    }
    let dim = c.u32("dimension")? as usize;
    let count = c.u32("utterance count")? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        let frames = c.u32("frame count")? as usize;
        let raw = c.take(frames * dim * 4, &format!("utterance {i}"))?;
        let values: Vec<f64> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
            .collect();
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data(format!("utterance {i} has non-finite features")));
        }
        out.push(DenseMatrix::from_vec(frames, dim, values)?);
    }
    if c.pos != data.len() {
        return Err(Error::Data("trailing bytes after the last utterance".into()));
    }
    Ok((dim, out))
}

pub fn save_features(path: impl AsRef<Path>, dim: usize, utterances: &[DenseMatrix]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_features(std::io::BufWriter::new(file), dim, utterances).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        e => e,
    })
}

pub fn load_features(path: impl AsRef<Path>) -> Result<(usize, Vec<DenseMatrix>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_features(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        e => e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<DenseMatrix> {
        vec![
            DenseMatrix::from_vec(2, 3, vec![0.5, -1.0, 2.25, 0.0, 1.0, -0.125]).unwrap(),
            DenseMatrix::zeros(0, 3),
        ]
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_features(&mut buf, 3, &sample()).unwrap();
        assert_eq!(&buf[..4], b"BVQF");
        assert_eq!(buf.len(), 16 + 4 + 24 + 4);
        let (dim, back) = read_features(&buf[..]).unwrap();
        assert_eq!(dim, 3);
        assert_eq!(back, sample());
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let mut buf = Vec::new();
        write_features(&mut buf, 3, &sample()).unwrap();
        assert!(matches!(read_features(&buf[..buf.len() - 2]), Err(Error::Data(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_features(&bad[..]), Err(Error::Data(_))));
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(matches!(read_features(&v2[..]), Err(Error::Version { .. })));
        assert!(write_features(Vec::new(), 2, &sample()).is_err());
    }
}
