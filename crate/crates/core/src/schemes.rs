//! How the three level features are wired into the heads (MTL, RI, PRI and
//! single-level CA), and how the level losses are combined.
//!
//! Every enhanced feature is a concatenation of raw level features, so a
//! scheme is fully described by the ordered list of raw levels each head
//! consumes:
//!
//! ```text
//! MTL        point ← [point]            pair ← [pair]          list ← [list]
//! RI(point)  point ← [pair; list; point]
//! RI(pair)   pair  ← [point; list; pair]
//! RI(list)   list  ← [point; pair; list]  (auxiliaries unchanged)
//! PRI(list)  point ← [point]   pair ← [point; pair]   list ← [point; pair; list]
//! PRI(point) list  ← [list]    pair ← [list; pair]    point ← [list; pair; point]
//! ```

use crate::diff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::ranking::Level;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Single-level compare-aggregate baseline.
    Ca(Level),
    /// Shared bottom, independent heads; the level picks the reported head.
    Mtl(Level),
    Ri(Level),
    /// Only `Pri(Point)` and `Pri(List)` exist.
    Pri(Level),
}

impl Scheme {
    /// The six integration schemes.
    pub const INTEGRATED: [Scheme; 6] = [
        Scheme::Mtl(Level::List),
        Scheme::Ri(Level::Point),
        Scheme::Ri(Level::Pair),
        Scheme::Ri(Level::List),
        Scheme::Pri(Level::Point),
        Scheme::Pri(Level::List),
    ];

    pub fn main_level(self) -> Level {
        match self {
            Scheme::Ca(l) | Scheme::Mtl(l) | Scheme::Ri(l) | Scheme::Pri(l) => l,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, l) = match self {
            Scheme::Ca(l) => ("ca", l),
            Scheme::Mtl(l) => ("mtl", l),
            Scheme::Ri(l) => ("ri", l),
            Scheme::Pri(l) => ("pri", l),
        };
        write!(f, "{name}-{l}")
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let (kind, level) = match lower.split_once(['-', '_', '(']) {
            Some((k, l)) => (k.to_string(), l.trim_end_matches(')').parse::<Level>()?),
            None if lower == "mtl" => ("mtl".to_string(), Level::List),
            None => return Err(Error::Config(format!("unknown scheme {s:?}"))),
        };
        let scheme = match kind.as_str() {
            "ca" => Scheme::Ca(level),
            "mtl" => Scheme::Mtl(level),
            "ri" => Scheme::Ri(level),
            "pri" if level != Level::Pair => Scheme::Pri(level),
            _ => return Err(Error::Config(format!("unknown scheme {s:?}"))),
        };
        Ok(scheme)
    }
}

impl Serialize for Scheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    None,
    NoPoint,
    NoPair,
    /// Every head is trained with the list objective; topology is kept.
    AllList,
}

impl FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "none" => Ok(Ablation::None),
            "no_point" => Ok(Ablation::NoPoint),
            "no_pair" => Ok(Ablation::NoPair),
            "all_list" => Ok(Ablation::AllList),
            _ => Err(Error::Config(format!("unknown ablation {s:?}"))),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::None => "none",
            Ablation::NoPoint => "no_point",
            Ablation::NoPair => "no_pair",
            Ablation::AllList => "all_list",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub lambda_point: f64,
    pub lambda_pair: f64,
    pub lambda_list: f64,
    #[serde(default)]
    pub ablation: Ablation,
    /// Feed auxiliary features into enhanced heads without letting the main
    /// loss backpropagate into them.
    #[serde(default)]
    pub detach_auxiliary: bool,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme) -> Self {
        SchemeConfig {
            scheme,
            lambda_point: 1.0,
            lambda_pair: 1.0,
            lambda_list: 1.0,
            ablation: Ablation::None,
            detach_auxiliary: false,
        }
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablation = ablation;
        self
    }

    pub fn main_level(&self) -> Level {
        self.scheme.main_level()
    }

    pub fn lambda(&self, level: Level) -> f64 {
        match level {
            Level::Point => self.lambda_point,
            Level::Pair => self.lambda_pair,
            Level::List => self.lambda_list,
        }
    }

    fn removed(&self) -> Option<Level> {
        match self.ablation {
            Ablation::NoPoint => Some(Level::Point),
            Ablation::NoPair => Some(Level::Pair),
            Ablation::None | Ablation::AllList => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for l in Level::ALL {
            let v = self.lambda(l);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("lambda_{l} must be a non-negative number, got {v}")));
            }
        }
        if let Scheme::Pri(Level::Pair) = self.scheme {
            return Err(Error::Config("PRI exists only for the point and list levels".into()));
        }
        if self.removed() == Some(self.main_level()) {
            return Err(Error::Config(format!(
                "ablation {:?} removes the main {} level of {}",
                self.ablation,
                self.main_level(),
                self.scheme
            )));
        }
        Ok(())
    }

    /// Levels whose branch (aggregator + head) exists.
    pub fn active_levels(&self) -> Vec<Level> {
        match self.scheme {
            Scheme::Ca(l) => vec![l],
            _ => Level::ALL.into_iter().filter(|&l| Some(l) != self.removed()).collect(),
        }
    }

    /// Loss used to train the head in a given slot.
    pub fn objective(&self, slot: Level) -> Level {
        if self.ablation == Ablation::AllList {
            Level::List
        } else {
            slot
        }
    }

    pub fn layout(&self) -> Result<FeatureLayout> {
        self.validate()?;
        let active = self.active_levels();
        let keep = |ls: &[Level]| -> Vec<Level> { ls.iter().copied().filter(|l| active.contains(l)).collect() };
        let mut inputs: [Option<Vec<Level>>; 3] = [None, None, None];
        for &slot in &active {
            let input = match self.scheme {
                Scheme::Ca(_) | Scheme::Mtl(_) => vec![slot],
                Scheme::Ri(main) if slot == main => {
                    let mut v: Vec<Level> = Level::ALL.into_iter().filter(|&l| l != main).collect();
                    v.push(main);
                    keep(&v)
                }
                Scheme::Ri(_) => vec![slot],
                Scheme::Pri(main) => {
                    let chain: [Level; 3] = if main == Level::List {
                        [Level::Point, Level::Pair, Level::List]
                    } else {
                        [Level::List, Level::Pair, Level::Point]
                    };
                    let upto = chain.iter().position(|&l| l == slot).expect("level in chain");
                    keep(&chain[..=upto])
                }
            };
            inputs[slot.index()] = Some(input);
        }
        Ok(FeatureLayout { inputs })
    }
}

/// Ordered raw levels concatenated into each head's input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureLayout {
    inputs: [Option<Vec<Level>>; 3],
}

impl FeatureLayout {
    pub fn input(&self, slot: Level) -> Option<&[Level]> {
        self.inputs[slot.index()].as_deref()
    }

    /// Enhanced feature length per slot given the raw matching-vector length.
    pub fn dims(&self, raw_dim: usize) -> [Option<usize>; 3] {
        [0, 1, 2].map(|i| self.inputs[i].as_ref().map(|v| v.len() * raw_dim))
    }
}

/// Raw and enhanced matching features for the candidates of one question,
/// one row per candidate.
#[derive(Clone, Debug)]
pub struct MatchFeatures {
    pub raw: [Option<Var>; 3],
    pub enhanced: [Option<Var>; 3],
}

impl MatchFeatures {
    pub fn enhanced(&self, slot: Level) -> Option<Var> {
        self.enhanced[slot.index()]
    }
}

pub fn build_features(g: &mut Graph, raw: [Option<Var>; 3], cfg: &SchemeConfig) -> Result<MatchFeatures> {
    let layout = cfg.layout()?;
    let mut enhanced = [None, None, None];
    for slot in Level::ALL {
        let Some(levels) = layout.input(slot) else { continue };
        let mut parts = Vec::with_capacity(levels.len());
        for &l in levels {
            let v = raw[l.index()]
                .ok_or_else(|| Error::Config(format!("{} scheme needs the {l} feature", cfg.scheme)))?;
            let v = if cfg.detach_auxiliary && l != slot { g.constant(g.value(v).clone()) } else { v };
            parts.push(v);
        }
        enhanced[slot.index()] = Some(if parts.len() == 1 { parts[0] } else { g.concat_cols(&parts)? });
    }
    Ok(MatchFeatures { raw, enhanced })
}

/// `Σ λ_l · L_l` over present levels; absent (ablated) levels contribute 0.
pub fn joint_loss(g: &mut Graph, losses: [Option<Var>; 3], cfg: &SchemeConfig) -> Result<Var> {
    cfg.validate()?;
    let mut total: Option<Var> = None;
    for l in Level::ALL {
        let Some(v) = losses[l.index()] else { continue };
        let w = g.scale(v, cfg.lambda(l));
        total = Some(match total {
            Some(t) => g.add(t, w)?,
            None => w,
        });
    }
    Ok(total.unwrap_or_else(|| g.constant(Tensor::scalar(0.0))))
}

/// Plain-number form of [`joint_loss`].
pub fn joint_loss_value(losses: [Option<f64>; 3], cfg: &SchemeConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(Level::ALL.iter().filter_map(|&l| losses[l.index()].map(|v| cfg.lambda(l) * v)).sum())
}
