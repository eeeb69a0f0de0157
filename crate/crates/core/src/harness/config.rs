//! Run configuration. A profile supplies every default; a TOML file and CLI
//! flags override individual keys. Unknown keys are rejected.

use crate::backbone::AttentionConfig;
use crate::error::{Error, Result};
use crate::model::ModelDims;
use crate::ranking::{PairGenConfig, PairMethod};
use crate::schemes::{Scheme, SchemeConfig};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    WikiqaLike,
    TrecqaLike,
    Synthetic,
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wikiqa-like" | "wikiqa" => Ok(Profile::WikiqaLike),
            "trecqa-like" | "trecqa" => Ok(Profile::TrecqaLike),
            "synthetic" => Ok(Profile::Synthetic),
            _ => Err(Error::Config(format!("unknown profile {s:?}"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::WikiqaLike => "wikiqa-like",
            Profile::TrecqaLike => "trecqa-like",
            Profile::Synthetic => "synthetic",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub profile: Profile,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// GloVe-format text file; without it embeddings are random.
    pub embeddings: Option<PathBuf>,
    pub embedding_dim: usize,
    /// Standard deviation of random embedding initialisation.
    pub embedding_init_scale: f64,
    pub scheme: SchemeConfig,
    pub lr_model: f64,
    /// `None` freezes the embeddings.
    pub lr_embeddings: Option<f64>,
    pub dims: ModelDims,
    pub batch_questions: usize,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub seeds: Vec<u64>,
    pub attention: AttentionConfig,
    pub pairs: PairGenConfig,
    /// Also evaluate MAP on the training split every epoch.
    pub track_train_map: bool,
    pub synthetic_questions: usize,
    pub synthetic_seed: u64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let base = RunConfig {
            profile,
            train: None,
            dev: None,
            test: None,
            embeddings: None,
            embedding_dim: 300,
            embedding_init_scale: 0.1,
            scheme: SchemeConfig::new(Scheme::Pri(crate::ranking::Level::List)),
            lr_model: 5e-4,
            lr_embeddings: Some(5e-5),
            dims: ModelDims::full(),
            batch_questions: 30,
            early_stop_patience: 10,
            max_epochs: 100,
            seeds: vec![0, 1, 2, 3, 4],
            attention: AttentionConfig::kmax(10),
            pairs: PairGenConfig::wikiqa(),
            track_train_map: false,
            synthetic_questions: 90,
            synthetic_seed: 0,
            out_dir: PathBuf::from("runs"),
        };
        match profile {
            Profile::WikiqaLike => RunConfig { scheme: SchemeConfig { lambda_point: 2.0, ..base.scheme }, ..base },
            Profile::TrecqaLike => RunConfig {
                lr_embeddings: None,
                attention: AttentionConfig::disabled(),
                pairs: PairGenConfig::trecqa(),
                ..base
            },
            Profile::Synthetic => RunConfig {
                embedding_dim: 24,
                embedding_init_scale: 1.0,
                lr_model: 1e-3,
                lr_embeddings: Some(1e-3),
                dims: ModelDims { hidden: 24, channels: 12, kernel_sizes: vec![1, 2, 3], head_hidden: 24 },
                batch_questions: 10,
                early_stop_patience: 10,
                max_epochs: 500,
                attention: AttentionConfig::disabled(),
                pairs: PairGenConfig { method: PairMethod::AllPairs, margin: 0.8, sigmoid_normalize: true },
                track_train_map: true,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.lr_model.is_nan() || self.lr_model <= 0.0 {
            return bad("lr_model must be positive");
        }
        if let Some(lr) = self.lr_embeddings {
            if lr.is_nan() || lr <= 0.0 {
                return bad("lr_embeddings must be positive (omit it to freeze embeddings)");
            }
        }
        if self.batch_questions == 0 || self.max_epochs == 0 || self.embedding_dim == 0 {
            return bad("batch_questions, max_epochs and embedding_dim must be >= 1");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.pairs.margin.is_nan() || self.pairs.margin <= 0.0 {
            return bad("margin must be positive");
        }
        if self.attention.kmax_enabled && self.attention.k == 0 {
            return bad("kmax k must be >= 1");
        }
        if self.profile != Profile::Synthetic && (self.train.is_none() || self.dev.is_none()) {
            return bad("train and dev corpus paths are required outside the synthetic profile");
        }
        Ok(())
    }

    /// Profile defaults overlaid with a TOML document.
    pub fn from_toml(text: &str, profile_override: Option<Profile>) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let profile = match (profile_override, file.profile.as_deref()) {
            (Some(p), _) => p,
            (None, Some(p)) => p.parse()?,
            (None, None) => Profile::Synthetic,
        };
        let mut cfg = RunConfig::for_profile(profile);
        file.apply(&mut cfg)?;
        Ok(cfg)
    }

    pub fn load(path: &Path, profile_override: Option<Profile>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text, profile_override)?;
        // relative corpus paths are relative to the config file
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.train, &mut cfg.dev, &mut cfg.test, &mut cfg.embeddings].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}

/// On-disk form: every key optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    profile: Option<String>,
    train: Option<PathBuf>,
    dev: Option<PathBuf>,
    test: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    embedding_dim: Option<usize>,
    embedding_init_scale: Option<f64>,
    scheme: Option<String>,
    ablation: Option<String>,
    lambda_point: Option<f64>,
    lambda_pair: Option<f64>,
    lambda_list: Option<f64>,
    detach_auxiliary: Option<bool>,
    lr_model: Option<f64>,
    lr_embeddings: Option<f64>,
    freeze_embeddings: Option<bool>,
    hidden: Option<usize>,
    channels: Option<usize>,
    kernel_sizes: Option<Vec<usize>>,
    head_hidden: Option<usize>,
    batch_questions: Option<usize>,
    early_stop_patience: Option<usize>,
    max_epochs: Option<usize>,
    seeds: Option<Vec<u64>>,
    kmax_enabled: Option<bool>,
    kmax_k: Option<usize>,
    pair_method: Option<PairMethod>,
    margin: Option<f64>,
    sigmoid_normalize: Option<bool>,
    track_train_map: Option<bool>,
    synthetic_questions: Option<usize>,
    synthetic_seed: Option<u64>,
    out_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($src:expr, $dst:expr, $($field:ident),+ $(,)?) => {
        $( if let Some(v) = $src.$field.clone() { $dst.$field = v.into(); } )+
    };
}

impl ConfigFile {
    fn apply(self, cfg: &mut RunConfig) -> Result<()> {
        overlay!(self, cfg, embedding_dim, embedding_init_scale, lr_model, batch_questions, early_stop_patience,
            max_epochs, seeds, track_train_map, synthetic_questions, synthetic_seed, out_dir);
        overlay!(self, cfg, train, dev, test, embeddings);
        if let Some(s) = &self.scheme {
            cfg.scheme.scheme = s.parse()?;
        }
        if let Some(a) = &self.ablation {
            cfg.scheme.ablation = a.parse()?;
        }
        overlay!(self, cfg.scheme, lambda_point, lambda_pair, lambda_list, detach_auxiliary);
        if let Some(lr) = self.lr_embeddings {
            cfg.lr_embeddings = Some(lr);
        }
        if self.freeze_embeddings == Some(true) {
            cfg.lr_embeddings = None;
        }
        overlay!(self, cfg.dims, hidden, channels, kernel_sizes, head_hidden);
        if let Some(v) = self.kmax_enabled {
            cfg.attention.kmax_enabled = v;
        }
        if let Some(v) = self.kmax_k {
            cfg.attention.k = v;
        }
        if let Some(v) = self.pair_method {
            cfg.pairs.method = v;
        }
        overlay!(self, cfg.pairs, margin, sigmoid_normalize);
        Ok(())
    }
}
