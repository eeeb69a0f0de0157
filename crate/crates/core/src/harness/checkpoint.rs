//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes  "HRNKCKPT"
//! version   u32      currently 1
//! meta_len  u32
//! meta      meta_len bytes of UTF-8 JSON (architecture, vocabulary
//!           tokens from id 1 on)
//! count     u32      number of parameters
//! repeated count times:
//!   name_len u32, name (UTF-8), rows u32, cols u32, trainable u8,
//!   rows*cols f64 values, row-major
//! ```

use crate::backbone::AttentionConfig;
use crate::data::{EmbeddingMatrix, RowSource, Vocabulary};
use crate::diff::{ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::model::{Model, ModelDims};
use crate::ranking::PairGenConfig;
use crate::schemes::SchemeConfig;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"HRNKCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    dims: ModelDims,
    scheme: SchemeConfig,
    attention: AttentionConfig,
    pairs: PairGenConfig,
    vocab: Vec<String>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode(model: &Model, vocab: &Vocabulary) -> Result<Vec<u8>> {
    let a = &model.arch;
    let meta = Meta {
        dims: a.dims.clone(),
        scheme: a.scheme,
        attention: a.attention,
        pairs: a.pairs,
        vocab: vocab.tokens().to_vec(),
    };
    let meta = serde_json::to_vec(&meta)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, meta.len())?;
    out.extend_from_slice(&meta);
    put_u32(&mut out, model.store.len())?;
    for (_, p) in model.store.iter() {
        put_u32(&mut out, p.name.len())?;
        out.extend_from_slice(p.name.as_bytes());
        put_u32(&mut out, p.value.rows())?;
        put_u32(&mut out, p.value.cols())?;
        out.push(p.trainable() as u8);
        for x in p.value.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

pub fn decode(bytes: &[u8]) -> Result<(Model, Vocabulary)> {
    let mut r = Reader { buf: bytes };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let meta_len = r.u32()?;
    let meta: Meta = serde_json::from_slice(r.take(meta_len)?)?;
    let count = r.u32()?;
    let mut loaded = ParamStore::new();
    for _ in 0..count {
        let name_len = r.u32()?;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|e| Error::Checkpoint(format!("parameter name: {e}")))?
            .to_string();
        let (rows, cols) = (r.u32()?, r.u32()?);
        let trainable = r.take(1)?[0] != 0;
        let raw = r.take(rows * cols * 8)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        loaded.add(name, Tensor::from_vec(rows, cols, data), trainable);
    }
    if !r.buf.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", r.buf.len())));
    }

    let mut vocab = Vocabulary::from_tokens(meta.vocab.iter().cloned());
    vocab.freeze();
    if vocab.tokens() != meta.vocab.as_slice() {
        return Err(Error::Checkpoint("vocabulary does not round-trip".into()));
    }
    let emb_id = loaded.find("embedding").ok_or_else(|| Error::Checkpoint("no embedding parameter".into()))?;
    let emb = loaded.get(emb_id);
    let placeholder = EmbeddingMatrix {
        values: Tensor::zeros(emb.value.rows(), emb.value.cols()),
        sources: vec![RowSource::Zero; emb.value.rows()],
        trainable: emb.trainable(),
    };
    let mut model = Model::new(meta.dims, meta.scheme, meta.attention, meta.pairs, placeholder, 0)?;
    model.store.load_values_from(&loaded).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok((model, vocab))
}

pub fn save(path: &Path, model: &Model, vocab: &Vocabulary) -> Result<()> {
    let bytes = encode(model, vocab)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Model, Vocabulary)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::Level;
    use crate::schemes::Scheme;
    use rand::SeedableRng;

    fn tiny_model() -> (Model, Vocabulary) {
        let vocab = Vocabulary::from_tokens(["a", "b", "c"].map(String::from));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let emb = EmbeddingMatrix::random(vocab.len(), 5, 0.3, &mut rng);
        let m = Model::new(
            ModelDims::tiny(),
            SchemeConfig::new(Scheme::Ri(Level::Pair)),
            AttentionConfig::kmax(2),
            PairGenConfig::trecqa(),
            emb,
            7,
        )
        .unwrap();
        (m, vocab)
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let (m, v) = tiny_model();
        let bytes = encode(&m, &v).unwrap();
        let (back, v2) = decode(&bytes).unwrap();
        assert_eq!(v2.tokens(), v.tokens());
        for ((_, a), (_, b)) in m.store.iter().zip(back.store.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.trainable(), b.trainable());
            assert!(a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(encode(&back, &v2).unwrap(), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (m, v) = tiny_model();
        let bytes = encode(&m, &v).unwrap();
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut newer = bytes.clone();
        newer[8] = 2;
        assert!(matches!(decode(&newer), Err(Error::Checkpoint(_))));
    }
}
