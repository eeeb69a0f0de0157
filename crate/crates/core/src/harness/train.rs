//! Training loop with dev-MAP early stopping and best-checkpoint restore.

use super::config::{Profile, RunConfig};
use crate::data::{load_corpus, load_embeddings, make_batches, synth_corpus, EmbeddingMatrix, QuestionGroup, Split, Vocabulary};
use crate::diff::{Adam, AdamConfig, Graph, ParamStore};
use crate::error::{Error, Result};
use crate::eval::{evaluate_with, RankReport, ReportMeta};
use crate::model::Model;
use crate::ranking::Level;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Tokenised splits sharing one vocabulary.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub train: Vec<QuestionGroup>,
    pub dev: Vec<QuestionGroup>,
    pub test: Vec<QuestionGroup>,
}

impl Corpus {
    pub fn split(&self, split: Split) -> &[QuestionGroup] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }
}

/// Loads the corpus named by the config, or generates the synthetic one.
pub fn load_dataset(cfg: &RunConfig) -> Result<Corpus> {
    load_dataset_with(cfg, Vocabulary::new())
}

/// Like [`load_dataset`] but encodes with `vocab`; a frozen vocabulary maps
/// unseen tokens to the unknown id.
pub fn load_dataset_with(cfg: &RunConfig, mut vocab: Vocabulary) -> Result<Corpus> {
    if cfg.profile == Profile::Synthetic && cfg.train.is_none() {
        let s = synth_corpus(cfg.synthetic_questions, cfg.synthetic_seed)?;
        let corpus = Corpus { vocab: s.vocab, train: s.train, dev: s.dev, test: s.test };
        if vocab.len() > 1 && vocab.tokens() != corpus.vocab.tokens() {
            return Err(Error::Data("synthetic vocabulary differs from the supplied one".into()));
        }
        return Ok(corpus);
    }
    let path = |p: &Option<std::path::PathBuf>, name: &str| {
        p.clone().ok_or_else(|| Error::Config(format!("no {name} corpus path")))
    };
    let (train, _) = load_corpus(&path(&cfg.train, "train")?, Split::Train, &mut vocab)?;
    let (dev, _) = load_corpus(&path(&cfg.dev, "dev")?, Split::Dev, &mut vocab)?;
    let test = match &cfg.test {
        Some(p) => load_corpus(p, Split::Test, &mut vocab)?.0,
        None => Vec::new(),
    };
    vocab.freeze();
    Ok(Corpus { vocab, train, dev, test })
}

/// Pretrained rows when an embedding file is configured, random otherwise.
pub fn initial_embeddings(cfg: &RunConfig, vocab: &Vocabulary, seed: u64) -> Result<EmbeddingMatrix> {
    let mut m = match &cfg.embeddings {
        Some(p) => load_embeddings(p, vocab, cfg.embedding_dim)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e11b);
            EmbeddingMatrix::random(vocab.len(), cfg.embedding_dim, cfg.embedding_init_scale, &mut rng)
        }
    };
    m.trainable = cfg.lr_embeddings.is_some();
    Ok(m)
}

pub fn build_model(cfg: &RunConfig, vocab: &Vocabulary, seed: u64) -> Result<Model> {
    Model::new(
        cfg.dims.clone(),
        cfg.scheme,
        cfg.attention,
        cfg.pairs,
        initial_embeddings(cfg, vocab, seed)?,
        seed,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_point: Option<f64>,
    pub loss_pair: Option<f64>,
    pub loss_list: Option<f64>,
    pub joint: f64,
    pub dev_map: f64,
    pub dev_mrr: f64,
    pub train_map: Option<f64>,
    pub wall_secs: f64,
}

impl EpochRecord {
    pub fn loss(&self, level: Level) -> Option<f64> {
        match level {
            Level::Point => self.loss_point,
            Level::Pair => self.loss_pair,
            Level::List => self.loss_list,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub scheme: String,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainTrace {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|r| r.epoch == self.best_epoch)
    }

    /// Same trace with wall-clock times zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> TrainTrace {
        let mut t = self.clone();
        for r in &mut t.epochs {
            r.wall_secs = 0.0;
        }
        t
    }

    pub fn max_train_map(&self) -> Option<f64> {
        self.epochs.iter().filter_map(|r| r.train_map).reduce(f64::max)
    }

    pub fn max_dev_map(&self) -> f64 {
        self.epochs.iter().map(|r| r.dev_map).fold(f64::NEG_INFINITY, f64::max)
    }

    /// First epoch whose dev MAP is at least `threshold`.
    pub fn epochs_to_dev_map(&self, threshold: f64) -> Option<usize> {
        self.epochs.iter().find(|r| r.dev_map >= threshold).map(|r| r.epoch)
    }

    /// First epoch whose loss at `level` is at most `threshold`.
    pub fn epochs_to_loss(&self, level: Level, threshold: f64) -> Option<usize> {
        self.epochs.iter().find(|r| r.loss(level).is_some_and(|l| l <= threshold)).map(|r| r.epoch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops once `patience` consecutive epochs fail to strictly improve.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::NEG_INFINITY, best_epoch: 0, stale: 0 }
    }

    pub fn update(&mut self, epoch: usize, value: f64) -> StopDecision {
        if value > self.best {
            self.best = value;
            self.best_epoch = epoch;
            self.stale = 0;
            StopDecision::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

pub fn evaluate_model(model: &Model, groups: &[QuestionGroup], meta: ReportMeta) -> Result<RankReport> {
    evaluate_with(groups, meta, |g| model.score_group(g))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub trace: TrainTrace,
}

fn batch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(epoch as u64)
}

/// Trains one replicate and returns the best-dev-MAP parameters.
pub fn train(cfg: &RunConfig, corpus: &Corpus, seed: u64) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.train.is_empty() || corpus.dev.is_empty() {
        return Err(Error::Data("train and dev splits must be non-empty".into()));
    }
    let mut model = build_model(cfg, &corpus.vocab, seed)?;
    let emb_cfg = AdamConfig::with_lr(cfg.lr_embeddings.unwrap_or(cfg.lr_model));
    let mut adam = Adam::new(&model.store, AdamConfig::with_lr(cfg.lr_model), emb_cfg);
    let mut stopper = EarlyStopping::new(cfg.early_stop_patience);
    let mut best: Option<ParamStore> = None;
    let scheme = cfg.scheme.scheme.to_string();
    let mut trace = TrainTrace { scheme: scheme.clone(), seed, epochs: Vec::new(), best_epoch: 0 };
    let meta = |split: &str, epoch| ReportMeta { scheme: scheme.clone(), seed, epoch, split: split.into() };

    for epoch in 1..=cfg.max_epochs {
        let start = Instant::now();
        let mut sums = [None::<f64>; 3];
        let mut joint_sum = 0.0;
        let mut seen = 0usize;
        for (b, batch) in make_batches(&corpus.train, cfg.batch_questions, batch_seed(seed, epoch)).iter().enumerate() {
            let mut g = Graph::new();
            let loss = model.batch_loss(&mut g, batch)?;
            if !loss.joint_value.is_finite() {
                return Err(Error::Diverged { epoch, batch: b + 1, loss: loss.joint_value });
            }
            model.store.zero_grads();
            g.backward(loss.joint, &mut model.store)?;
            adam.step(&mut model.store)?;
            let w = batch.len() as f64;
            joint_sum += loss.joint_value * w;
            for (s, l) in sums.iter_mut().zip(loss.levels) {
                if let Some(l) = l {
                    *s.get_or_insert(0.0) += l * w;
                }
            }
            seen += batch.len();
        }
        let n = seen as f64;
        let dev = evaluate_model(&model, &corpus.dev, meta("dev", epoch))?;
        let train_map = match cfg.track_train_map {
            true => Some(evaluate_model(&model, &corpus.train, meta("train", epoch))?.map),
            false => None,
        };
        let [loss_point, loss_pair, loss_list] = sums.map(|s| s.map(|s| s / n));
        trace.epochs.push(EpochRecord {
            epoch,
            loss_point,
            loss_pair,
            loss_list,
            joint: joint_sum / n,
            dev_map: dev.map,
            dev_mrr: dev.mrr,
            train_map,
            wall_secs: start.elapsed().as_secs_f64(),
        });
        match stopper.update(epoch, dev.map) {
            StopDecision::Improved => best = Some(model.store.clone()),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    if let Some(best) = &best {
        model.store.load_values_from(best)?;
    }
    model.store.zero_grads();
    trace.best_epoch = stopper.best_epoch();
    Ok(TrainOutcome { model, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_arithmetic() {
        let mut s = EarlyStopping::new(10);
        let mut stopped = None;
        for epoch in 1..=100 {
            let map = if epoch <= 3 { 0.5 + 0.1 * epoch as f64 } else { 0.8 };
            if s.update(epoch, map) == StopDecision::Stop {
                stopped = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped, Some(13));
        assert_eq!(s.best_epoch(), 3);
    }

    #[test]
    fn equal_value_is_not_an_improvement() {
        let mut s = EarlyStopping::new(2);
        assert_eq!(s.update(1, 0.5), StopDecision::Improved);
        assert_eq!(s.update(2, 0.5), StopDecision::Continue);
        assert_eq!(s.update(3, 0.6), StopDecision::Improved);
        assert_eq!(s.update(4, 0.1), StopDecision::Continue);
        assert_eq!(s.update(5, 0.6), StopDecision::Stop);
        assert_eq!((s.best_epoch(), s.best()), (3, 0.6));
    }
}
