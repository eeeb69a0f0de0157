//! Level-specific prediction heads and the point, pair and list objectives.

use crate::backbone::xavier;
use crate::diff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Clamp applied to probabilities before taking the log in the point loss.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Point,
    Pair,
    List,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Point, Level::Pair, Level::List];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Point => "point",
            Level::Pair => "pair",
            Level::List => "list",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point" => Ok(Level::Point),
            "pair" => Ok(Level::Pair),
            "list" => Ok(Level::List),
            other => Err(Error::Config(format!("unknown ranking level {other:?}"))),
        }
    }
}

/// Two-layer perceptron: ReLU hidden layer, linear output.
#[derive(Clone, Debug)]
pub struct HeadParams {
    pub w_hidden: ParamId,
    pub b_hidden: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl HeadParams {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        prefix: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
    ) -> Self {
        HeadParams {
            w_hidden: store.add(format!("{prefix}.w_hidden"), xavier(rng, in_dim, hidden), true),
            b_hidden: store.add(format!("{prefix}.b_hidden"), Tensor::zeros(1, hidden), true),
            w_out: store.add(format!("{prefix}.w_out"), xavier(rng, hidden, out_dim), true),
            b_out: store.add(format!("{prefix}.b_out"), Tensor::zeros(1, out_dim), true),
            in_dim,
            out_dim,
        }
    }

    pub fn ids(&self) -> [ParamId; 4] {
        [self.w_hidden, self.b_hidden, self.w_out, self.b_out]
    }

    /// `[n × in_dim] → [n × out_dim]`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w1 = g.param(store, self.w_hidden);
        let b1 = g.param(store, self.b_hidden);
        let w2 = g.param(store, self.w_out);
        let b2 = g.param(store, self.b_out);
        let h = g.matmul(x, w1)?;
        let h = g.add_row(h, b1)?;
        let h = g.relu(h);
        let o = g.matmul(h, w2)?;
        Ok(g.add_row(o, b2)?)
    }
}

fn check_labels(n: usize, labels: &[u8]) -> Result<()> {
    if n != labels.len() {
        return Err(Error::Data(format!("{n} scores for {} labels", labels.len())));
    }
    Ok(())
}

/// Mean negative log-likelihood of the true class, `probs: [n × 2]`.
pub fn point_loss(g: &mut Graph, probs: Var, labels: &[u8]) -> Result<Var> {
    let (n, c) = g.shape(probs);
    check_labels(n, labels)?;
    if c != 2 {
        return Err(Error::Data(format!("point head must output 2 classes, got {c}")));
    }
    let index: Vec<usize> = labels.iter().enumerate().map(|(i, &y)| i * 2 + usize::from(y > 0)).collect();
    let picked = g.gather(probs, &index)?;
    let logp = g.ln_clamped(picked, LOG_EPS);
    let mean = g.mean(logp)?;
    Ok(g.scale(mean, -1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairMethod {
    AllPairs,
    MaxNegative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairGenConfig {
    pub method: PairMethod,
    pub margin: f64,
    pub sigmoid_normalize: bool,
}

impl PairGenConfig {
    pub fn wikiqa() -> Self {
        PairGenConfig { method: PairMethod::AllPairs, margin: 0.8, sigmoid_normalize: true }
    }

    pub fn trecqa() -> Self {
        PairGenConfig { method: PairMethod::MaxNegative, margin: 1.0, sigmoid_normalize: false }
    }
}

/// Current per-candidate scores of one question with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateScores {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl CandidateScores {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Self {
        debug_assert_eq!(scores.len(), labels.len());
        CandidateScores { scores, labels }
    }

    pub fn positives(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().enumerate().filter(|(_, &y)| y > 0).map(|(i, _)| i)
    }

    pub fn negatives(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().enumerate().filter(|(_, &y)| y == 0).map(|(i, _)| i)
    }

    /// Number of positive candidates.
    pub fn k(&self) -> usize {
        self.positives().count()
    }

    /// Number of negative candidates.
    pub fn t(&self) -> usize {
        self.labels.len() - self.k()
    }
}

/// (positive index, negative index) pairs. Max-negative selection reads the
/// given scores only; ties pick the lowest candidate index.
pub fn generate_pairs(scores: &CandidateScores, method: PairMethod) -> Vec<(usize, usize)> {
    match method {
        PairMethod::AllPairs => scores.positives().flat_map(|p| scores.negatives().map(move |n| (p, n))).collect(),
        PairMethod::MaxNegative => {
            let hardest = scores.negatives().fold(None, |best: Option<usize>, n| match best {
                Some(b) if scores.scores[b] >= scores.scores[n] => Some(b),
                _ => Some(n),
            });
            match hardest {
                Some(n) => scores.positives().map(|p| (p, n)).collect(),
                None => Vec::new(),
            }
        }
    }
}

/// Mean hinge `max(0, margin − (p⁺ − p⁻))` over `pairs`; `scores: [n × 1]`.
/// Returns a constant zero when there are no pairs.
pub fn pair_loss(g: &mut Graph, scores: Var, pairs: &[(usize, usize)], cfg: &PairGenConfig) -> Result<Var> {
    if pairs.is_empty() {
        return Ok(g.constant(Tensor::scalar(0.0)));
    }
    let s = if cfg.sigmoid_normalize { g.sigmoid(scores) } else { scores };
    let pos: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let neg: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let sp = g.gather(s, &pos)?;
    let sn = g.gather(s, &neg)?;
    let diff = g.sub(sp, sn)?;
    let neg_diff = g.scale(diff, -1.0);
    let slack = g.add_scalar(neg_diff, cfg.margin);
    let hinge = g.relu(slack);
    Ok(g.mean(hinge)?)
}

/// `Y / ΣY`.
pub fn normalize_labels(labels: &[u8]) -> Result<Vec<f64>> {
    let k = labels.iter().filter(|&&y| y > 0).count();
    if k == 0 {
        return Err(Error::NoPositive);
    }
    Ok(labels.iter().map(|&y| if y > 0 { 1.0 / k as f64 } else { 0.0 }).collect())
}

/// `KL(Ŷ ‖ softmax(scores)) / n` with `Ŷ` the normalised labels and
/// `0·log 0 = 0`; `scores: [n × 1]`.
pub fn list_loss(g: &mut Graph, scores: Var, labels: &[u8]) -> Result<Var> {
    let (n, c) = g.shape(scores);
    check_labels(n, labels)?;
    if c != 1 {
        return Err(Error::Data(format!("list head must output one score, got {c}")));
    }
    let target = normalize_labels(labels)?;
    let pos: Vec<usize> = (0..n).filter(|&i| labels[i] > 0).collect();
    let k = pos.len() as f64;
    let row = g.transpose(scores);
    let logp = g.row_log_softmax(row)?;
    let picked = g.gather(logp, &pos)?;
    let cross = g.sum(picked);
    // Σ Ŷ log Ŷ over the positives is −ln k.
    let entropy_term: f64 = target.iter().filter(|&&y| y > 0.0).map(|&y| y * y.ln()).sum();
    let kl = g.scale(cross, -1.0 / k);
    let kl = g.add_scalar(kl, entropy_term);
    Ok(g.scale(kl, 1.0 / n as f64))
}

fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Per-candidate ranking scores from raw head outputs of one question.
/// `objective` is the loss the head was trained with.
pub fn predict_scores(head_out: &Tensor, objective: Level) -> Vec<f64> {
    match objective {
        Level::Point => (0..head_out.rows()).map(|r| softmax(head_out.row(r))[1]).collect(),
        Level::Pair => head_out.data().to_vec(),
        Level::List => softmax(head_out.data()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval<F: FnOnce(&mut Graph) -> Var>(f: F) -> f64 {
        let mut g = Graph::new();
        let v = f(&mut g);
        g.value(v).item()
    }

    #[test]
    fn point_loss_examples() {
        let uniform = eval(|g| {
            let p = g.constant(Tensor::filled(4, 2, 0.5));
            point_loss(g, p, &[1, 0, 0, 1]).unwrap()
        });
        assert!((uniform - std::f64::consts::LN_2).abs() < 1e-15);

        let perfect = eval(|g| {
            let p = g.constant(Tensor::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]));
            point_loss(g, p, &[1, 0]).unwrap()
        });
        assert!(perfect.abs() <= 1e-12);

        let quarter = eval(|g| {
            let p = g.constant(Tensor::from_rows(&[vec![0.75, 0.25]]));
            point_loss(g, p, &[1]).unwrap()
        });
        assert!((quarter - 4f64.ln()).abs() < 1e-15);
        assert!((quarter - 1.38629).abs() < 1e-5);

        let clamped = eval(|g| {
            let p = g.constant(Tensor::from_rows(&[vec![1.0, 0.0]]));
            point_loss(g, p, &[1]).unwrap()
        });
        assert!((clamped + LOG_EPS.ln()).abs() < 1e-9);
    }

    #[test]
    fn pair_generation_counts_and_selection() {
        let cs = CandidateScores::new(vec![0.5, 0.1, 0.7, 0.9, 0.4], vec![1, 0, 1, 0, 0]);
        assert_eq!((cs.k(), cs.t()), (2, 3));
        assert_eq!(generate_pairs(&cs, PairMethod::AllPairs).len(), 6);
        // negative scores in candidate order: [0.1, 0.9, 0.4] → second negative
        assert_eq!(generate_pairs(&cs, PairMethod::MaxNegative), vec![(0, 3), (2, 3)]);

        let lone = CandidateScores::new(vec![0.3], vec![1]);
        assert!(generate_pairs(&lone, PairMethod::AllPairs).is_empty());
        assert!(generate_pairs(&lone, PairMethod::MaxNegative).is_empty());
    }

    #[test]
    fn pair_loss_examples() {
        let cfg = PairGenConfig { method: PairMethod::AllPairs, margin: 1.0, sigmoid_normalize: false };
        let run = |scores: Vec<f64>, pairs: Vec<(usize, usize)>| {
            eval(|g| {
                let n = scores.len();
                let s = g.constant(Tensor::from_vec(n, 1, scores));
                pair_loss(g, s, &pairs, &cfg).unwrap()
            })
        };
        assert!((run(vec![0.9, 0.3], vec![(0, 1)]) - 0.4).abs() < 1e-15);
        assert_eq!(run(vec![2.0, 0.5], vec![(0, 1)]), 0.0);
        assert!((run(vec![0.9, 0.3, 2.0, 0.5], vec![(0, 1), (2, 3)]) - 0.2).abs() < 1e-15);
        assert_eq!(run(vec![0.9], vec![]), 0.0);
    }

    #[test]
    fn normalize_labels_examples() {
        assert_eq!(normalize_labels(&[1, 1, 0, 0, 0]).unwrap(), vec![0.5, 0.5, 0.0, 0.0, 0.0]);
        assert_eq!(normalize_labels(&[1]).unwrap(), vec![1.0]);
        assert!(matches!(normalize_labels(&[0, 0]), Err(Error::NoPositive)));
    }

    #[test]
    fn list_loss_examples() {
        let zero = eval(|g| {
            let s = g.constant(Tensor::from_vec(2, 1, vec![0.3, 0.3]));
            list_loss(g, s, &[1, 1]).unwrap()
        });
        assert!(zero.abs() < 1e-15);
        let uniform3 = eval(|g| {
            let s = g.constant(Tensor::from_vec(3, 1, vec![0.0, 0.0, 0.0]));
            list_loss(g, s, &[1, 0, 0]).unwrap()
        });
        assert!((uniform3 - 3f64.ln() / 3.0).abs() < 1e-15);
        assert!((uniform3 - 0.36620).abs() < 1e-5);
    }

    #[test]
    fn predict_scores_examples() {
        assert_eq!(predict_scores(&Tensor::from_rows(&[vec![0.0, 0.0]]), Level::Point), vec![0.5]);
        assert_eq!(predict_scores(&Tensor::from_vec(2, 1, vec![1.0, 1.0]), Level::List), vec![0.5, 0.5]);
        assert_eq!(predict_scores(&Tensor::from_vec(2, 1, vec![3.0, -1.0]), Level::Pair), vec![3.0, -1.0]);
    }
}
