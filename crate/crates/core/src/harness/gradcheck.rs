//! End-to-end finite-difference check of every scheme on a tiny network.

use crate::backbone::AttentionConfig;
use crate::data::{Candidate, EmbeddingMatrix, QuestionGroup};
use crate::diff::check::{guarded_numeric_gradients, masked_max_relative_error};
use crate::diff::{Fault, Graph, ParamId};
use crate::error::{Error, Result};
use crate::model::{Model, ModelDims};
use crate::ranking::{Level, PairGenConfig, PairMethod};
use crate::schemes::{Ablation, Scheme, SchemeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub dims: ModelDims,
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub questions: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Lower bound of the relative-error denominator.
    pub floor: f64,
    /// Largest tolerated share of kink-crossing entries.
    pub max_kinked_fraction: f64,
    pub attention: AttentionConfig,
    pub pairs: PairGenConfig,
    /// Every parameter is redrawn from `N(0, param_scale²)` before checking
    /// so that activations sit away from ReLU / max-pool kinks.
    pub param_scale: f64,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            dims: ModelDims::tiny(),
            vocab_size: 20,
            embedding_dim: 8,
            questions: 3,
            step: 1e-4,
            tolerance: 1e-3,
            floor: 1e-6,
            max_kinked_fraction: 0.02,
            attention: AttentionConfig::kmax(3),
            pairs: PairGenConfig { method: PairMethod::AllPairs, margin: 0.8, sigmoid_normalize: true },
            param_scale: 0.5,
            seed: 0,
            fault: None,
        }
    }
}

/// The six integrated schemes, then the three ablations of PRI(list).
pub fn default_cases() -> Vec<SchemeConfig> {
    let mut cases: Vec<SchemeConfig> = Scheme::INTEGRATED.iter().map(|&s| SchemeConfig::new(s)).collect();
    for a in [Ablation::NoPoint, Ablation::NoPair, Ablation::AllList] {
        cases.push(SchemeConfig::new(Scheme::Pri(Level::List)).with_ablation(a));
    }
    cases
}

pub fn case_label(cfg: &SchemeConfig) -> String {
    match cfg.ablation {
        Ablation::None => cfg.scheme.to_string(),
        a => format!("{}/{a}", cfg.scheme),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckEntry {
    pub case: String,
    pub scalars: usize,
    /// Entries whose finite-difference probes crossed a non-differentiable
    /// point (excluded from the error).
    pub kinked: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub step: f64,
    pub entries: Vec<GradCheckEntry>,
    pub passed: bool,
    pub secs: f64,
}

/// A random batch over ids `1..vocab_size`, each question with at least one
/// positive and one negative.
pub fn random_batch(rng: &mut impl Rng, questions: usize, vocab_size: usize) -> Vec<QuestionGroup> {
    fn sentence(rng: &mut impl Rng, lo: usize, hi: usize, vocab_size: usize) -> Vec<usize> {
        let n = rng.gen_range(lo..=hi);
        (0..n).map(|_| rng.gen_range(1..vocab_size)).collect()
    }
    (0..questions)
        .map(|q| {
            let n = rng.gen_range(3..=5);
            let positive = rng.gen_range(0..n);
            let candidates = (0..n)
                .map(|i| Candidate {
                    tokens: sentence(rng, 2, 6, vocab_size),
                    label: u8::from(i == positive || (i != (positive + 1) % n && rng.gen_bool(0.2))),
                })
                .collect();
            QuestionGroup { qid: format!("g{q}"), question: sentence(rng, 3, 5, vocab_size), candidates }
        })
        .collect()
}

/// Max relative error between backpropagated and central-difference
/// gradients of the batch's joint loss, over every trainable parameter.
pub fn check_scheme(cfg: &GradCheckConfig, scheme: SchemeConfig) -> Result<GradCheckEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batch = random_batch(&mut rng, cfg.questions, cfg.vocab_size);
    let refs: Vec<&QuestionGroup> = batch.iter().collect();
    let emb = EmbeddingMatrix::random(cfg.vocab_size, cfg.embedding_dim, 0.5, &mut rng);
    let mut model = Model::new(cfg.dims.clone(), scheme, cfg.attention, cfg.pairs, emb, cfg.seed)?;
    let normal = Normal::new(0.0, cfg.param_scale).map_err(|e| Error::Config(e.to_string()))?;
    for id in model.arch.param_ids() {
        for x in model.store.value_mut(id).data_mut() {
            *x = normal.sample(&mut rng);
        }
    }

    let mut g = match cfg.fault {
        Some(f) => Graph::with_fault(f),
        None => Graph::new(),
    };
    let loss = model.batch_loss(&mut g, &refs)?;
    model.store.zero_grads();
    g.backward(loss.joint, &mut model.store)?;

    let ids: Vec<ParamId> =
        model.arch.param_ids().into_iter().filter(|&id| model.store.get(id).trainable()).collect();
    let arch = model.arch.clone();
    let (numeric, smooth) = guarded_numeric_gradients(&mut model.store, &ids, cfg.step, |store| {
        let mut g = Graph::new();
        match arch.batch_loss(store, &mut g, &refs) {
            Ok(l) => (l.joint_value, g.branch_signature()),
            Err(_) => (f64::NAN, 0),
        }
    });
    let (err, kinked) = masked_max_relative_error(&model.store, &ids, &numeric, &smooth, cfg.floor);
    let scalars: usize = ids.iter().map(|&id| model.store.value(id).len()).sum();
    let passed = err < cfg.tolerance && (kinked as f64) <= cfg.max_kinked_fraction * scalars as f64;
    Ok(GradCheckEntry { case: case_label(&scheme), scalars, kinked, max_rel_error: err, passed })
}

pub fn grad_check(cfg: &GradCheckConfig, cases: &[SchemeConfig]) -> Result<GradCheckReport> {
    let start = Instant::now();
    let entries = cases.iter().map(|&s| check_scheme(cfg, s)).collect::<Result<Vec<_>>>()?;
    let passed = entries.iter().all(|e| e.passed);
    Ok(GradCheckReport { tolerance: cfg.tolerance, step: cfg.step, entries, passed, secs: start.elapsed().as_secs_f64() })
}
