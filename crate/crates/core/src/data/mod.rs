//! Corpus ingestion, vocabulary, pretrained embeddings, batching and the
//! synthetic corpus generator.

mod batch;
mod corpus;
mod embeddings;
mod synth;
mod vocab;

pub use batch::{batch_accounting, make_batches, BatchAccounting};
pub use corpus::{
    load_corpus, parse_corpus, write_corpus, Candidate, CorpusRecord, CandidateRecord, LoadStats, QuestionGroup,
    Split,
};
pub use embeddings::{load_embeddings, EmbeddingMatrix, RowSource};
pub use synth::{synth_corpus, SynthCorpus};
pub use vocab::{tokenize, Vocabulary, UNK};
