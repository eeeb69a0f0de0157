//! JSON-lines corpus: one question per line,
//! `{"qid": str, "question": str, "candidates": [{"text": str, "label": 0|1}]}`.

use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub tokens: Vec<usize>,
    pub label: u8,
}

/// One question with its complete, ordered candidate list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuestionGroup {
    pub qid: String,
    pub question: Vec<usize>,
    pub candidates: Vec<Candidate>,
}

impl QuestionGroup {
    pub fn labels(&self) -> Vec<u8> {
        self.candidates.iter().map(|c| c.label).collect()
    }

    pub fn positives(&self) -> usize {
        self.candidates.iter().filter(|c| c.label > 0).count()
    }

    pub fn negatives(&self) -> usize {
        self.candidates.len() - self.positives()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub text: String,
    pub label: u8,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub qid: String,
    pub question: String,
    pub candidates: Vec<CandidateRecord>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoadStats {
    pub groups: usize,
    pub pairs: usize,
    pub dropped_no_positive: usize,
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_string(), line, msg: msg.into() }
}

/// Parses corpus text. Questions without a positive candidate are dropped
/// (in every split) and counted.
pub fn parse_corpus(
    text: &str,
    origin: &str,
    split: Split,
    vocab: &mut Vocabulary,
) -> Result<(Vec<QuestionGroup>, LoadStats)> {
    let mut groups = Vec::new();
    let mut stats = LoadStats::default();
    let mut seen = 0usize;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        let rec: CorpusRecord =
            serde_json::from_str(line).map_err(|e| parse_err(origin, lineno, format!("malformed record: {e}")))?;
        if rec.candidates.is_empty() {
            return Err(parse_err(origin, lineno, format!("question {} has no candidates", rec.qid)));
        }
        let question = vocab.encode(&rec.question);
        if question.is_empty() {
            return Err(parse_err(origin, lineno, format!("question {} is empty", rec.qid)));
        }
        let mut candidates = Vec::with_capacity(rec.candidates.len());
        for (j, c) in rec.candidates.iter().enumerate() {
            if c.label > 1 {
                return Err(parse_err(origin, lineno, format!("candidate {j}: label must be 0 or 1")));
            }
            let tokens = vocab.encode(&c.text);
            if tokens.is_empty() {
                return Err(parse_err(origin, lineno, format!("candidate {j} of {} is empty", rec.qid)));
            }
            candidates.push(Candidate { tokens, label: c.label });
        }
        let group = QuestionGroup { qid: rec.qid, question, candidates };
        if group.positives() == 0 {
            stats.dropped_no_positive += 1;
            continue;
        }
        stats.pairs += group.candidates.len();
        groups.push(group);
    }
    if seen == 0 {
        return Err(parse_err(origin, 0, format!("empty {split} corpus")));
    }
    stats.groups = groups.len();
    Ok((groups, stats))
}

pub fn load_corpus(path: &Path, split: Split, vocab: &mut Vocabulary) -> Result<(Vec<QuestionGroup>, LoadStats)> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text, &path.display().to_string(), split, vocab)
}

/// Writes groups back out in the same JSON-lines format.
pub fn write_corpus(mut out: impl Write, groups: &[QuestionGroup], vocab: &Vocabulary) -> Result<()> {
    for g in groups {
        let rec = CorpusRecord {
            qid: g.qid.clone(),
            question: vocab.decode(&g.question),
            candidates: g
                .candidates
                .iter()
                .map(|c| CandidateRecord { text: vocab.decode(&c.tokens), label: c.label })
                .collect(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
