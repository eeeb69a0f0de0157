//! GloVe-style text embeddings: `token v1 … vD`, space separated.

use super::vocab::{Vocabulary, UNK};
use crate::diff::Tensor;
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::io::BufRead;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSource {
    Loaded,
    /// Out-of-vocabulary for the embedding file; starts at zero.
    Zero,
    Random,
}

#[derive(Clone, Debug)]
pub struct EmbeddingMatrix {
    pub values: Tensor,
    pub sources: Vec<RowSource>,
    pub trainable: bool,
}

impl EmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    /// Fraction of non-reserved vocabulary rows filled from the file.
    pub fn coverage(&self) -> f64 {
        let n = self.sources.len().saturating_sub(1);
        if n == 0 {
            return 0.0;
        }
        self.sources.iter().skip(1).filter(|&&s| s == RowSource::Loaded).count() as f64 / n as f64
    }

    /// Gaussian-initialised rows (used when no pretrained file is given).
    /// Row 0 stays zero.
    pub fn random(vocab_size: usize, dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, scale).expect("finite positive scale");
        let mut values = Tensor::zeros(vocab_size, dim);
        for r in 1..vocab_size {
            for x in values.row_mut(r) {
                *x = normal.sample(rng);
            }
        }
        let mut sources = vec![RowSource::Random; vocab_size];
        if vocab_size > 0 {
            sources[UNK] = RowSource::Zero;
        }
        EmbeddingMatrix { values, sources, trainable: true }
    }
}

pub fn load_embeddings(path: &Path, vocab: &Vocabulary, dim: usize) -> Result<EmbeddingMatrix> {
    let file = std::fs::File::open(path)?;
    read_embeddings(std::io::BufReader::new(file), &path.display().to_string(), vocab, dim)
}

pub(crate) fn read_embeddings(
    reader: impl BufRead,
    origin: &str,
    vocab: &Vocabulary,
    dim: usize,
) -> Result<EmbeddingMatrix> {
    let mut values = Tensor::zeros(vocab.len(), dim);
    let mut sources = vec![RowSource::Zero; vocab.len()];
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(' ').filter(|f| !f.is_empty()).collect();
        let bad = |n: usize| Error::Parse {
            path: origin.to_string(),
            line: lineno,
            msg: format!("expected {dim} values, found {n}"),
        };
        if fields.len() < dim + 1 {
            return Err(bad(fields.len().saturating_sub(1)));
        }
        let split = fields.len() - dim;
        // Tokens containing spaces exist in some releases; extra leading
        // fields are part of the token only if they are not numbers.
        if split > 1 && fields[1..split].iter().all(|f| f.parse::<f64>().is_ok()) {
            return Err(bad(fields.len() - 1));
        }
        let token = fields[..split].join(" ").to_lowercase();
        let id = vocab.get(&token);
        if id == UNK || sources[id] == RowSource::Loaded {
            // still validate the numbers
            for f in &fields[split..] {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    path: origin.to_string(),
                    line: lineno,
                    msg: format!("bad value {f:?}: {e}"),
                })?;
            }
            continue;
        }
        for (dst, f) in values.row_mut(id).iter_mut().zip(&fields[split..]) {
            *dst = f.parse::<f64>().map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: lineno,
                msg: format!("bad value {f:?}: {e}"),
            })?;
        }
        sources[id] = RowSource::Loaded;
    }
    Ok(EmbeddingMatrix { values, sources, trainable: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(["the", "cat", "zyzzyva"].map(String::from))
    }

    #[test]
    fn present_rows_loaded_absent_rows_zero() {
        let text = "the 0.1 0.2 0.3\nCat 1 2 3\ndog 4 5 6\n";
        let m = read_embeddings(text.as_bytes(), "mem", &vocab(), 3).unwrap();
        assert_eq!(m.values.row(1), &[0.1, 0.2, 0.3]);
        assert_eq!(m.values.row(2), &[1.0, 2.0, 3.0]);
        assert_eq!(m.values.row(3), &[0.0, 0.0, 0.0]);
        assert_eq!(m.sources[3], RowSource::Zero);
        assert!((m.coverage() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_dimensionality_is_an_error() {
        let short = format!("the {}\n", vec!["0.5"; 299].join(" "));
        let err = read_embeddings(format!("cat {}\n{short}", vec!["1"; 300].join(" ")).as_bytes(), "g", &vocab(), 300)
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let long = "the 1 2 3 4\n";
        assert!(read_embeddings(long.as_bytes(), "g", &vocab(), 3).is_err());
    }

    #[test]
    fn multiword_tokens_are_accepted() {
        let text = ". . . 1 2 3\nthe 1 1 1\n";
        let m = read_embeddings(text.as_bytes(), "g", &vocab(), 3).unwrap();
        assert_eq!(m.values.row(1), &[1.0, 1.0, 1.0]);
    }
}
