use hierank::data::{
    batch_accounting, parse_corpus, synth_corpus, tokenize, write_corpus, Candidate, QuestionGroup, Split, Vocabulary,
};
use hierank::eval::average_precision;
use std::collections::HashSet;

fn overlap_scores(group: &QuestionGroup) -> Vec<f64> {
    let q: HashSet<usize> = group.question.iter().copied().collect();
    group
        .candidates
        .iter()
        .map(|c| c.tokens.iter().collect::<HashSet<_>>().into_iter().filter(|t| q.contains(t)).count() as f64)
        .collect()
}

#[test]
fn write_then_parse_round_trips() {
    let s = synth_corpus(90, 3).unwrap();
    let mut buf = Vec::new();
    write_corpus(&mut buf, &s.train, &s.vocab).unwrap();
    let mut vocab = s.vocab.clone();
    let (back, stats) = parse_corpus(std::str::from_utf8(&buf).unwrap(), "mem", Split::Train, &mut vocab).unwrap();
    assert_eq!(back, s.train);
    assert_eq!(stats.dropped_no_positive, 0);
    assert_eq!(vocab.tokens(), s.vocab.tokens());
}

#[test]
fn synthetic_split_sizes() {
    let s = synth_corpus(90, 0).unwrap();
    assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (50, 20, 20));
    assert!(s.train.iter().all(|g| g.positives() >= 1 && g.negatives() >= 1));
}

#[test]
fn keyword_overlap_oracle_solves_the_synthetic_test_split() {
    for seed in 0..3 {
        let s = synth_corpus(90, seed).unwrap();
        let map: f64 = s
            .test
            .iter()
            .map(|g| average_precision(&overlap_scores(g), &g.labels()).unwrap())
            .sum::<f64>()
            / s.test.len() as f64;
        assert!(map >= 0.95, "seed {seed}: overlap MAP {map}");
    }
}

#[test]
fn tokenization_is_idempotent_and_case_folded() {
    for text in ["Who wrote \"Hamlet\"?", "  U.S. GDP, in 2020 -- roughly $20T!", "ÉCOLE normale", ""] {
        let once = tokenize(text);
        assert_eq!(tokenize(&once.join(" ")), once);
        assert_eq!(tokenize(&text.to_uppercase()), tokenize(&text.to_lowercase()));
    }
    let mut v = Vocabulary::new();
    assert_eq!(v.encode("The CAT"), v.encode("the cat"));
}

#[test]
fn batch_accounting_of_the_worked_example() {
    let group = |i: usize| QuestionGroup {
        qid: format!("q{i}"),
        question: vec![1, 2],
        candidates: (0..5).map(|j| Candidate { tokens: vec![3 + j], label: u8::from(j < 2) }).collect(),
    };
    let groups: Vec<QuestionGroup> = (0..10).map(group).collect();
    let refs: Vec<&QuestionGroup> = groups.iter().collect();
    let a = batch_accounting(&refs);
    assert_eq!((a.point_items, a.all_pairs_items, a.max_negative_items, a.lists), (50, 60, 20, 10));
}
