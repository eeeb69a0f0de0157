//! MAP / MRR and per-run ranking reports.

use crate::data::QuestionGroup;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Candidate indices sorted by descending score; equal scores keep their
/// original order.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // sort_by is stable
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

fn ranked_labels(scores: &[f64], labels: &[u8]) -> Result<Vec<bool>> {
    if scores.len() != labels.len() {
        return Err(Error::Data(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if !labels.iter().any(|&y| y > 0) {
        return Err(Error::NoPositive);
    }
    Ok(rank_order(scores).into_iter().map(|i| labels[i] > 0).collect())
}

/// Mean over positives of precision at the positive's rank.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let ranked = ranked_labels(scores, labels)?;
    let mut hits = 0usize;
    let mut total = 0.0;
    for (r, &rel) in ranked.iter().enumerate() {
        if rel {
            hits += 1;
            total += hits as f64 / (r + 1) as f64;
        }
    }
    Ok(total / hits as f64)
}

/// `1 / rank` of the first positive.
pub fn reciprocal_rank(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let ranked = ranked_labels(scores, labels)?;
    let first = ranked.iter().position(|&r| r).expect("at least one positive");
    Ok(1.0 / (first + 1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionReport {
    pub qid: String,
    /// Candidate indices, best first.
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub average_precision: f64,
    pub reciprocal_rank: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub scheme: String,
    pub seed: u64,
    pub epoch: usize,
    pub split: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub meta: ReportMeta,
    pub map: f64,
    pub mrr: f64,
    pub questions: usize,
    pub per_question: Vec<QuestionReport>,
}

pub fn question_report(group: &QuestionGroup, scores: Vec<f64>) -> Result<QuestionReport> {
    let labels = group.labels();
    Ok(QuestionReport {
        qid: group.qid.clone(),
        order: rank_order(&scores),
        average_precision: average_precision(&scores, &labels)?,
        reciprocal_rank: reciprocal_rank(&scores, &labels)?,
        scores,
        labels,
    })
}

/// Scores every group with `scorer` and averages AP / RR over questions.
pub fn evaluate_with(
    groups: &[QuestionGroup],
    meta: ReportMeta,
    mut scorer: impl FnMut(&QuestionGroup) -> Result<Vec<f64>>,
) -> Result<RankReport> {
    if groups.is_empty() {
        return Err(Error::Data("cannot evaluate an empty corpus".into()));
    }
    let per_question = groups
        .iter()
        .map(|g| scorer(g).and_then(|s| question_report(g, s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(meta, per_question))
}

pub fn summarize(meta: ReportMeta, per_question: Vec<QuestionReport>) -> RankReport {
    let n = per_question.len() as f64;
    let map = per_question.iter().map(|q| q.average_precision).sum::<f64>() / n;
    let mrr = per_question.iter().map(|q| q.reciprocal_rank).sum::<f64>() / n;
    RankReport { meta, map, mrr, questions: per_question.len(), per_question }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Candidate;

    #[test]
    fn average_precision_examples() {
        assert_eq!(average_precision(&[0.9, 0.5, 0.1], &[1, 0, 0]).unwrap(), 1.0);
        let ap = average_precision(&[0.9, 0.8, 0.7, 0.1], &[0, 1, 1, 0]).unwrap();
        assert!((ap - (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((ap - 0.58333).abs() < 1e-5);
        assert!(matches!(average_precision(&[0.1], &[0]), Err(Error::NoPositive)));
    }

    #[test]
    fn reciprocal_rank_examples() {
        assert_eq!(reciprocal_rank(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
        assert!((reciprocal_rank(&[0.9, 0.8, 0.7], &[0, 0, 1]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // equal scores: lower original index wins
        assert_eq!(reciprocal_rank(&[0.5, 0.5], &[1, 0]).unwrap(), 1.0);
        assert_eq!(reciprocal_rank(&[0.5, 0.5], &[0, 1]).unwrap(), 0.5);
        assert!(reciprocal_rank(&[0.5], &[0]).is_err());
    }

    fn group(labels: &[u8]) -> QuestionGroup {
        QuestionGroup {
            qid: "q".into(),
            question: vec![1],
            candidates: labels.iter().map(|&label| Candidate { tokens: vec![1], label }).collect(),
        }
    }

    #[test]
    fn corpus_means() {
        let groups = vec![group(&[0, 1]), group(&[1, 0])];
        let rep = evaluate_with(&groups, ReportMeta::default(), |_| Ok(vec![1.0, 0.0])).unwrap();
        assert_eq!(rep.map, 0.75);
        assert_eq!(rep.mrr, 0.75);
        assert_eq!(rep.questions, 2);

        let perfect = evaluate_with(&groups, ReportMeta::default(), |g| {
            Ok(g.labels().iter().map(|&y| y as f64).collect())
        })
        .unwrap();
        assert_eq!((perfect.map, perfect.mrr), (1.0, 1.0));

        let single = evaluate_with(&groups[..1], ReportMeta::default(), |_| Ok(vec![1.0, 0.0])).unwrap();
        assert_eq!(single.map, single.per_question[0].average_precision);
        assert!(evaluate_with(&[], ReportMeta::default(), |_| Ok(vec![])).is_err());
    }

    #[test]
    fn reversed_perfect_order_gives_one_over_n() {
        for n in 1..9 {
            let mut labels = vec![0u8; n];
            labels[n - 1] = 1;
            let scores: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
            let expected = 1.0 / n as f64;
            assert!((average_precision(&scores, &labels).unwrap() - expected).abs() < 1e-15);
            assert!((reciprocal_rank(&scores, &labels).unwrap() - expected).abs() < 1e-15);
        }
    }
}
