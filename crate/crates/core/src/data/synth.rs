//! Deterministic synthetic answer-selection corpus.
//!
//! Every question is built around one topic: it mentions three of the
//! topic's keywords as a contiguous phrase. Positive answers repeat at least
//! two of those keywords next to each other; negatives repeat at most one and
//! carry a keyword phrase from another topic as a distractor. A plain
//! keyword-overlap count therefore separates positives from negatives.

use super::corpus::{CandidateRecord, CorpusRecord, QuestionGroup, Split};
use super::vocab::Vocabulary;
use crate::error::Result;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOPICS: usize = 40;
const KEYWORDS_PER_TOPIC: usize = 6;
const QUESTION_WORDS: usize = 8;
const FILLERS: usize = 40;

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub vocab: Vocabulary,
    pub train: Vec<QuestionGroup>,
    pub dev: Vec<QuestionGroup>,
    pub test: Vec<QuestionGroup>,
    pub records: [Vec<CorpusRecord>; 3],
}

impl SynthCorpus {
    pub fn split(&self, split: Split) -> &[QuestionGroup] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn split_records(&self, split: Split) -> &[CorpusRecord] {
        &self.records[split as usize]
    }
}

fn keyword(topic: usize, j: usize) -> String {
    format!("t{topic}k{j}")
}

fn fillers(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| format!("w{}", rng.gen_range(0..FILLERS))).collect()
}

/// Inserts `phrase` into `words` at a random position.
fn splice(rng: &mut ChaCha8Rng, mut words: Vec<String>, phrase: Vec<String>) -> Vec<String> {
    let at = rng.gen_range(0..=words.len());
    words.splice(at..at, phrase);
    words
}

fn question_record(rng: &mut ChaCha8Rng, qid: String) -> CorpusRecord {
    let topic = rng.gen_range(0..TOPICS);
    let mut pool: Vec<usize> = (0..KEYWORDS_PER_TOPIC).collect();
    pool.shuffle(rng);
    let asked: Vec<usize> = pool[..3].to_vec();
    let unasked: Vec<usize> = pool[3..].to_vec();

    let mut question = vec![format!("q{}", rng.gen_range(0..QUESTION_WORDS))];
    question.extend(asked.iter().map(|&j| keyword(topic, j)));
    question.push(format!("q{}", rng.gen_range(0..QUESTION_WORDS)));

    let k = rng.gen_range(1..=2);
    let t = rng.gen_range(2..=4);
    let mut candidates = Vec::with_capacity(k + t);
    for _ in 0..k {
        let shared = rng.gen_range(2..=3);
        let mut chosen = asked.clone();
        chosen.shuffle(rng);
        let mut phrase: Vec<String> = chosen[..shared].iter().map(|&j| keyword(topic, j)).collect();
        if rng.gen_bool(0.5) {
            phrase.push(keyword(topic, *unasked.choose(rng).expect("three unasked keywords")));
        }
        let n_fill = rng.gen_range(2..=4);
        let words = fillers(rng, n_fill);
        candidates.push(CandidateRecord { text: splice(rng, words, phrase).join(" "), label: 1 });
    }
    for _ in 0..t {
        let other = (topic + rng.gen_range(1..TOPICS)) % TOPICS;
        let n_fill = rng.gen_range(2..=4);
        let mut words = fillers(rng, n_fill);
        if rng.gen_bool(0.5) {
            let kw = keyword(topic, *asked.choose(rng).expect("asked keywords"));
            words = splice(rng, words, vec![kw]);
        } else if rng.gen_bool(0.5) {
            let kw = keyword(topic, *unasked.choose(rng).expect("unasked keywords"));
            words = splice(rng, words, vec![kw]);
        }
        let mut distract: Vec<usize> = (0..KEYWORDS_PER_TOPIC).collect();
        distract.shuffle(rng);
        let phrase = distract[..2].iter().map(|&j| keyword(other, j)).collect();
        candidates.push(CandidateRecord { text: splice(rng, words, phrase).join(" "), label: 0 });
    }
    candidates.shuffle(rng);
    CorpusRecord { qid, question: question.join(" "), candidates }
}

/// `n_questions` split 5:2:2 into train/dev/test (dev and test get
/// `⌊2n/9⌋` each). Identical seeds give identical corpora.
pub fn synth_corpus(n_questions: usize, seed: u64) -> Result<SynthCorpus> {
    if n_questions < 10 {
        return Err(crate::error::Error::Config(format!("synthetic corpus needs >= 10 questions, got {n_questions}")));
    }
    let held_out = n_questions * 2 / 9;
    let sizes = [n_questions - 2 * held_out, held_out, held_out];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vocab = Vocabulary::new();
    // Fix the id layout independently of generation order.
    for t in 0..TOPICS {
        for j in 0..KEYWORDS_PER_TOPIC {
            vocab.insert(&keyword(t, j));
        }
    }
    for i in 0..QUESTION_WORDS {
        vocab.insert(&format!("q{i}"));
    }
    for i in 0..FILLERS {
        vocab.insert(&format!("w{i}"));
    }

    let mut records: [Vec<CorpusRecord>; 3] = Default::default();
    let mut groups: [Vec<QuestionGroup>; 3] = Default::default();
    for (s, (&size, name)) in sizes.iter().zip(["train", "dev", "test"]).enumerate() {
        for i in 0..size {
            let rec = question_record(&mut rng, format!("{name}-{i}"));
            let text: String = serde_json::to_string(&rec)?;
            let (parsed, _) = super::corpus::parse_corpus(&text, "synthetic", Split::Train, &mut vocab)?;
            groups[s].extend(parsed);
            records[s].push(rec);
        }
    }
    let [train, dev, test] = groups;
    Ok(SynthCorpus { vocab, train, dev, test, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_corpus() {
        let a = synth_corpus(90, 0).unwrap();
        let b = synth_corpus(90, 0).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.records, b.records);
        assert_eq!((a.train.len(), a.dev.len(), a.test.len()), (50, 20, 20));
        assert_ne!(synth_corpus(90, 1).unwrap().train, a.train);
    }

    #[test]
    fn groups_have_positives_and_expected_sizes() {
        let c = synth_corpus(90, 3).unwrap();
        for g in c.train.iter().chain(&c.dev).chain(&c.test) {
            assert!((1..=2).contains(&g.positives()));
            assert!((2..=4).contains(&g.negatives()));
        }
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(synth_corpus(9, 0).is_err());
        let c = synth_corpus(10, 0).unwrap();
        assert_eq!((c.train.len(), c.dev.len(), c.test.len()), (6, 2, 2));
    }
}
