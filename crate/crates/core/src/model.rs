//! The full hierarchical-ranking network: shared embedding, encoder and
//! co-attention; one aggregator and one head per active level; scheme wiring
//! between them.

use crate::backbone::{aggregate, attend_align, compare, gated_projection, AggregatorParams, AttentionConfig, EncoderParams};
use crate::data::{EmbeddingMatrix, QuestionGroup};
use crate::diff::{Graph, ParamGroup, ParamId, ParamStore, Var};
use crate::error::{Error, Result};
use crate::eval::rank_order;
use crate::ranking::{
    generate_pairs, list_loss, pair_loss, point_loss, predict_scores, CandidateScores, HeadParams, Level,
    PairGenConfig,
};
use crate::schemes::{build_features, joint_loss, FeatureLayout, MatchFeatures, SchemeConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDims {
    pub hidden: usize,
    pub channels: usize,
    pub kernel_sizes: Vec<usize>,
    pub head_hidden: usize,
}

impl ModelDims {
    /// hidden 300, 150 channels, kernels 1–5, head width 300.
    pub fn full() -> Self {
        ModelDims { hidden: 300, channels: 150, kernel_sizes: vec![1, 2, 3, 4, 5], head_hidden: 300 }
    }

    /// Small enough for exhaustive finite-difference checks.
    pub fn tiny() -> Self {
        ModelDims { hidden: 8, channels: 4, kernel_sizes: vec![1, 2], head_hidden: 8 }
    }

    /// Length of one raw level matching vector `[r^q ; r^a]`.
    pub fn match_dim(&self) -> usize {
        2 * self.channels * self.kernel_sizes.len()
    }
}

/// Parameter handles and configuration; the values live in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Architecture {
    pub dims: ModelDims,
    pub scheme: SchemeConfig,
    pub attention: AttentionConfig,
    pub pairs: PairGenConfig,
    pub embedding: ParamId,
    pub encoder: EncoderParams,
    pub aggregators: [Option<AggregatorParams>; 3],
    pub heads: [Option<HeadParams>; 3],
    layout: FeatureLayout,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub arch: Architecture,
    pub store: ParamStore,
}

/// Losses of one question.
#[derive(Clone, Copy, Debug)]
pub struct GroupLoss {
    pub joint: Var,
    pub levels: [Option<Var>; 3],
}

/// Batch-averaged losses; `joint` is the differentiable root.
#[derive(Clone, Copy, Debug)]
pub struct BatchLoss {
    pub joint: Var,
    pub joint_value: f64,
    pub levels: [Option<f64>; 3],
}

impl Model {
    pub fn new(
        dims: ModelDims,
        scheme: SchemeConfig,
        attention: AttentionConfig,
        pairs: PairGenConfig,
        embeddings: EmbeddingMatrix,
        seed: u64,
    ) -> Result<Self> {
        let layout = scheme.layout()?;
        if attention.kmax_enabled && attention.k == 0 {
            return Err(Error::Config("k-max attention needs k >= 1".into()));
        }
        if dims.kernel_sizes.is_empty() || dims.kernel_sizes.contains(&0) {
            return Err(Error::Config("kernel sizes must be non-empty and positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let emb_dim = embeddings.dim();
        let embedding = store.add_grouped("embedding", embeddings.values, embeddings.trainable, ParamGroup::Embedding);
        let encoder = EncoderParams::new(&mut store, &mut rng, emb_dim, dims.hidden);
        let active = scheme.active_levels();
        let mut aggregators: [Option<AggregatorParams>; 3] = [None, None, None];
        for l in Level::ALL.into_iter().filter(|l| active.contains(l)) {
            aggregators[l.index()] = Some(AggregatorParams::new(
                &mut store,
                &mut rng,
                &format!("{l}.aggregate"),
                dims.hidden,
                dims.channels,
                &dims.kernel_sizes,
            ));
        }
        let feature_dims = layout.dims(dims.match_dim());
        let mut heads: [Option<HeadParams>; 3] = [None, None, None];
        for l in Level::ALL {
            if let Some(in_dim) = feature_dims[l.index()] {
                let out_dim = if scheme.objective(l) == Level::Point { 2 } else { 1 };
                heads[l.index()] =
                    Some(HeadParams::new(&mut store, &mut rng, &format!("{l}.head"), in_dim, dims.head_hidden, out_dim));
            }
        }
        let arch = Architecture { dims, scheme, attention, pairs, embedding, encoder, aggregators, heads, layout };
        arch.check_ledger()?;
        Ok(Model { arch, store })
    }

    pub fn group_loss(&self, g: &mut Graph, group: &QuestionGroup) -> Result<GroupLoss> {
        self.arch.group_loss(&self.store, g, group)
    }

    pub fn batch_loss(&self, g: &mut Graph, batch: &[&QuestionGroup]) -> Result<BatchLoss> {
        self.arch.batch_loss(&self.store, g, batch)
    }

    /// Main-head ranking scores of each candidate.
    pub fn score_group(&self, group: &QuestionGroup) -> Result<Vec<f64>> {
        self.arch.score_group(&self.store, group)
    }

    pub fn rank_question(&self, group: &QuestionGroup) -> Result<Ranking> {
        let scores = self.score_group(group)?;
        Ok(Ranking { order: rank_order(&scores), scores })
    }
}

/// Candidate indices best-first with the scores they were sorted by.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
}

impl Architecture {
    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    /// Enhanced feature length consumed by each head.
    pub fn feature_dims(&self) -> [Option<usize>; 3] {
        self.layout.dims(self.dims.match_dim())
    }

    fn check_ledger(&self) -> Result<()> {
        let raw = self.dims.match_dim();
        for (l, agg) in Level::ALL.iter().zip(&self.aggregators) {
            if let Some(a) = agg {
                if a.output_dim() != raw {
                    return Err(Error::Config(format!("{l} aggregator width {} != {raw}", a.output_dim())));
                }
            }
        }
        for (l, (head, want)) in Level::ALL.iter().zip(self.heads.iter().zip(self.feature_dims())) {
            let have = head.as_ref().map(|h| h.in_dim);
            if have != want {
                return Err(Error::Config(format!("{l} head input {have:?} does not match feature ledger {want:?}")));
            }
        }
        Ok(())
    }

    /// Every parameter the network reads.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.embedding];
        ids.extend(self.encoder.ids());
        for a in self.aggregators.iter().flatten() {
            ids.extend(a.ids());
        }
        for h in self.heads.iter().flatten() {
            ids.extend(h.ids());
        }
        ids
    }

    /// Raw level features (one row per candidate) and their scheme wiring.
    pub fn features(&self, store: &ParamStore, g: &mut Graph, group: &QuestionGroup) -> Result<MatchFeatures> {
        if group.candidates.is_empty() {
            return Err(Error::Data(format!("question {} has no candidates", group.qid)));
        }
        let eq = g.embed(store, self.embedding, &group.question).map_err(|_| Error::EmptySentence)?;
        let hq = gated_projection(g, store, eq, &self.encoder)?;
        let mut rows: [Vec<Var>; 3] = Default::default();
        for cand in &group.candidates {
            let ea = g.embed(store, self.embedding, &cand.tokens).map_err(|_| Error::EmptySentence)?;
            let ha = gated_projection(g, store, ea, &self.encoder)?;
            let al = attend_align(g, hq, ha, self.attention)?;
            let cq = compare(g, al.question, hq)?;
            let ca = compare(g, al.answer, ha)?;
            for (l, agg) in Level::ALL.iter().zip(&self.aggregators) {
                if let Some(agg) = agg {
                    rows[l.index()].push(aggregate(g, store, cq, ca, agg)?);
                }
            }
        }
        let mut raw = [None, None, None];
        for l in Level::ALL {
            if !rows[l.index()].is_empty() {
                raw[l.index()] = Some(g.concat_rows(&rows[l.index()])?);
            }
        }
        build_features(g, raw, &self.scheme)
    }

    /// Raw head outputs per slot, `[n × out_dim]`.
    pub fn head_outputs(&self, store: &ParamStore, g: &mut Graph, feats: &MatchFeatures) -> Result<[Option<Var>; 3]> {
        let mut out = [None, None, None];
        for l in Level::ALL {
            if let (Some(head), Some(x)) = (&self.heads[l.index()], feats.enhanced(l)) {
                out[l.index()] = Some(head.forward(g, store, x)?);
            }
        }
        Ok(out)
    }

    pub fn group_loss(&self, store: &ParamStore, g: &mut Graph, group: &QuestionGroup) -> Result<GroupLoss> {
        let labels = group.labels();
        if !labels.iter().any(|&y| y > 0) {
            return Err(Error::NoPositive);
        }
        let feats = self.features(store, g, group)?;
        let outs = self.head_outputs(store, g, &feats)?;
        let mut levels = [None, None, None];
        for slot in Level::ALL {
            let Some(out) = outs[slot.index()] else { continue };
            let loss = match self.scheme.objective(slot) {
                Level::Point => {
                    let probs = g.row_softmax(out)?;
                    point_loss(g, probs, &labels)?
                }
                Level::Pair => {
                    // hard selection on current values, no gradient through it
                    let current = CandidateScores::new(g.value(out).data().to_vec(), labels.clone());
                    let pairs = generate_pairs(&current, self.pairs.method);
                    pair_loss(g, out, &pairs, &self.pairs)?
                }
                Level::List => list_loss(g, out, &labels)?,
            };
            levels[slot.index()] = Some(loss);
        }
        let joint = joint_loss(g, levels, &self.scheme)?;
        Ok(GroupLoss { joint, levels })
    }

    /// Mean of per-question losses over the batch.
    pub fn batch_loss(&self, store: &ParamStore, g: &mut Graph, batch: &[&QuestionGroup]) -> Result<BatchLoss> {
        if batch.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let inv = 1.0 / batch.len() as f64;
        let mut joints = Vec::with_capacity(batch.len());
        let mut levels = [None::<f64>; 3];
        for group in batch {
            let gl = self.group_loss(store, g, group)?;
            joints.push(gl.joint);
            for l in Level::ALL {
                if let Some(v) = gl.levels[l.index()] {
                    *levels[l.index()].get_or_insert(0.0) += g.value(v).item() * inv;
                }
            }
        }
        let stacked = g.concat_cols(&joints)?;
        let joint = g.mean(stacked)?;
        Ok(BatchLoss { joint, joint_value: g.value(joint).item(), levels })
    }

    pub fn score_group(&self, store: &ParamStore, group: &QuestionGroup) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let feats = self.features(store, &mut g, group)?;
        let main = self.scheme.main_level();
        let head = self.heads[main.index()].as_ref().expect("main head always exists");
        let x = feats.enhanced(main).expect("main feature always exists");
        let out = head.forward(&mut g, store, x)?;
        Ok(predict_scores(g.value(out), self.scheme.objective(main)))
    }
}
