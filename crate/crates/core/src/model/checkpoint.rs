//! Versioned binary checkpoint container.
//!
//! Layout: 8-byte magic `LINDACKP`, `u32` format version, `u64` header
//! length, a JSON header (architecture, vocabulary and its hash, raw sigma,
//! parameter table), then every parameter array as little-endian `f64` in
//! header order. All integers are little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use linda_autograd::{Matrix, ParamStore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{InterpModel, ModelConfig};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LINDACKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    pub vocab_hash: String,
    pub vocab: Vec<String>,
    /// Untransformed spread parameter; sigma = softplus(sigma_raw).
    pub sigma_raw: f64,
    pub step: u64,
    params: Vec<ParamEntry>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: InterpModel,
    pub vocab: Vocabulary,
    pub step: u64,
}

pub fn to_bytes(model: &InterpModel, vocab: &Vocabulary, step: u64) -> Result<Vec<u8>> {
    if vocab.len() != model.config().vocab_size {
        return Err(Error::Checkpoint(format!(
            "vocabulary has {} tokens but the model expects {}",
            vocab.len(),
            model.config().vocab_size
        )));
    }
    let header = CheckpointHeader {
        config: model.config().clone(),
        vocab_hash: vocab.hash(),
        vocab: vocab.tokens().to_vec(),
        sigma_raw: model.params().get(model.sigma_raw_param())[[0, 0]],
        step,
        params: model
            .params()
            .iter()
            .map(|(_, name, m)| ParamEntry {
                name: name.to_owned(),
                rows: m.nrows(),
                cols: m.ncols(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(20 + header.len() + model.params().num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, _, m) in model.params().iter() {
        for v in m.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Writes a checkpoint and returns the hex SHA-256 of the written bytes.
pub fn save(path: impl AsRef<Path>, model: &InterpModel, vocab: &Vocabulary, step: u64) -> Result<String> {
    let bytes = to_bytes(model, vocab, step)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut cur = bytes;
    let mut magic = [0u8; 8];
    let bad = |m: &str| Error::Checkpoint(m.to_owned());
    cur.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let mut u32buf = [0u8; 4];
    cur.read_exact(&mut u32buf).map_err(|_| bad("truncated version"))?;
    let version = u32::from_le_bytes(u32buf);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let mut u64buf = [0u8; 8];
    cur.read_exact(&mut u64buf).map_err(|_| bad("truncated header length"))?;
    let header_len = u64::from_le_bytes(u64buf) as usize;
    if cur.len() < header_len {
        return Err(bad("truncated header"));
    }
    let header: CheckpointHeader = serde_json::from_slice(&cur[..header_len])?;
    cur = &cur[header_len..];

    let vocab = Vocabulary::with_content(header.vocab.iter().skip(crate::corpus::NUM_SPECIAL).cloned())?;
    if vocab.tokens() != header.vocab.as_slice() {
        return Err(bad("stored vocabulary has malformed special tokens"));
    }
    if vocab.hash() != header.vocab_hash {
        return Err(Error::VocabMismatch {
            expected: header.vocab_hash,
            found: vocab.hash(),
        });
    }

    let mut store = ParamStore::new();
    for entry in &header.params {
        let n = entry.rows * entry.cols;
        if cur.len() < n * 8 {
            return Err(Error::Checkpoint(format!(
                "truncated data for parameter `{}`",
                entry.name
            )));
        }
        let data: Vec<f64> = cur[..n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        cur = &cur[n * 8..];
        let m = Matrix::from_shape_vec((entry.rows, entry.cols), data)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        store.add(entry.name.clone(), m);
    }
    if !cur.is_empty() {
        return Err(bad("trailing bytes after parameter data"));
    }
    let model = InterpModel::from_params(header.config, store)?;
    let stored_raw = model.params().get(model.sigma_raw_param())[[0, 0]];
    if stored_raw.to_bits() != header.sigma_raw.to_bits() {
        return Err(bad("header sigma_raw disagrees with parameter data"));
    }
    if vocab.len() != model.config().vocab_size {
        return Err(bad("vocabulary size disagrees with model configuration"));
    }
    Ok(Checkpoint {
        model,
        vocab,
        step: header.step,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    from_bytes(&fs::read(path)?)
}

/// Loads a checkpoint and checks it was trained with `vocab`.
pub fn load_with_vocab(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Checkpoint> {
    let ckpt = load(path)?;
    if ckpt.vocab.hash() != vocab.hash() {
        return Err(Error::VocabMismatch {
            expected: vocab.hash(),
            found: ckpt.vocab.hash(),
        });
    }
    Ok(ckpt)
}

pub fn file_hash(path: impl AsRef<Path>) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (InterpModel, Vocabulary) {
        let vocab = Vocabulary::with_content(["a", "b", "c"]).unwrap();
        let config = ModelConfig {
            vocab_size: vocab.len(),
            d_model: 4,
            n_heads: 2,
            encoder_layers: 1,
            decoder_layers: 1,
            ffn_dim: 8,
            init_sigma: 0.7,
        };
        let model = InterpModel::new(config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        (model, vocab)
    }

    #[test]
    fn round_trip_preserves_everything() {
        let (model, vocab) = setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let hash = save(&path, &model, &vocab, 42).unwrap();
        assert_eq!(hash, file_hash(&path).unwrap());
        let ck = load_with_vocab(&path, &vocab).unwrap();
        assert_eq!(ck.step, 42);
        assert_eq!(ck.vocab, vocab);
        assert_eq!(ck.model.params(), model.params());
        assert_eq!(ck.model.sigma().to_bits(), model.sigma().to_bits());
    }

    #[test]
    fn vocabulary_hash_is_validated() {
        let (model, vocab) = setup();
        let other = Vocabulary::with_content(["a", "b", "d"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save(&path, &model, &vocab, 0).unwrap();
        assert!(matches!(
            load_with_vocab(&path, &other),
            Err(Error::VocabMismatch { .. })
        ));

        // Tampering with the embedded vocabulary breaks the stored hash.
        let bytes = to_bytes(&model, &vocab, 0).unwrap();
        let pos = bytes.windows(3).position(|w| w == b"\"c\"").unwrap();
        let mut tampered = bytes.clone();
        tampered[pos + 1] = b'z';
        let r = from_bytes(&tampered);
        assert!(matches!(r, Err(Error::VocabMismatch { .. })), "{:?}", r.err());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (model, vocab) = setup();
        let bytes = to_bytes(&model, &vocab, 0).unwrap();
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(from_bytes(&wrong_magic).is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[8] = 9;
        assert!(from_bytes(&wrong_version).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
    }
}
