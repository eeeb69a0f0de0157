//! Seed replicates: train, evaluate on test, persist, average.

use super::checkpoint;
use super::config::RunConfig;
use super::curves::write_trace;
use super::train::{evaluate_model, train, Corpus, TrainOutcome, TrainTrace};
use crate::error::{Error, Result};
use crate::eval::{RankReport, ReportMeta};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub dev_map: f64,
    pub test_map: f64,
    pub test_mrr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedsReport {
    pub scheme: String,
    pub ablation: String,
    pub profile: String,
    pub seeds: Vec<SeedResult>,
    pub failures: Vec<SeedFailure>,
    /// Means over the successful seeds.
    pub mean_map: Option<f64>,
    pub mean_mrr: Option<f64>,
    /// True when at least one seed aborted.
    pub partial: bool,
}

/// One finished replicate.
#[derive(Clone, Debug)]
pub struct Replicate {
    pub outcome: TrainOutcome,
    pub test: RankReport,
}

pub fn aggregate(cfg: &RunConfig, results: &[(u64, Result<Replicate>)]) -> SeedsReport {
    let mut seeds = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        let seed = *seed;
        match r {
            Ok(rep) => seeds.push(SeedResult {
                seed,
                best_epoch: rep.outcome.trace.best_epoch,
                epochs_run: rep.outcome.trace.epochs.len(),
                dev_map: rep.outcome.trace.best().map(|b| b.dev_map).unwrap_or(f64::NAN),
                test_map: rep.test.map,
                test_mrr: rep.test.mrr,
            }),
            Err(e) => failures.push(SeedFailure { seed, error: e.to_string() }),
        }
    }
    let n = seeds.len() as f64;
    let mean = |f: fn(&SeedResult) -> f64| (!seeds.is_empty()).then(|| seeds.iter().map(f).sum::<f64>() / n);
    SeedsReport {
        scheme: cfg.scheme.scheme.to_string(),
        ablation: cfg.scheme.ablation.to_string(),
        profile: cfg.profile.to_string(),
        mean_map: mean(|s| s.test_map),
        mean_mrr: mean(|s| s.test_mrr),
        partial: !failures.is_empty(),
        seeds,
        failures,
    }
}

/// Trains one seed and scores the restored model on the test split (dev when
/// no test split is configured).
pub fn run_replicate(cfg: &RunConfig, corpus: &Corpus, seed: u64) -> Result<Replicate> {
    let outcome = train(cfg, corpus, seed)?;
    let (groups, split) = match corpus.test.is_empty() {
        true => (&corpus.dev, "dev"),
        false => (&corpus.test, "test"),
    };
    let meta = ReportMeta {
        scheme: outcome.trace.scheme.clone(),
        seed,
        epoch: outcome.trace.best_epoch,
        split: split.into(),
    };
    let test = evaluate_model(&outcome.model, groups, meta)?;
    Ok(Replicate { outcome, test })
}

/// Runs every configured seed; replicates run on separate threads with
/// isolated state.
pub fn run_seeds(cfg: &RunConfig, corpus: &Corpus) -> Vec<(u64, Result<Replicate>)> {
    std::thread::scope(|s| {
        let handles: Vec<_> =
            cfg.seeds.iter().map(|&seed| (seed, s.spawn(move || run_replicate(cfg, corpus, seed)))).collect();
        handles
            .into_iter()
            .map(|(seed, h)| {
                let r = h.join().unwrap_or_else(|_| Err(Error::Data(format!("seed {seed} panicked"))));
                (seed, r)
            })
            .collect()
    })
}

/// Writes `seed<k>/{checkpoint.bin,trace.csv,trace.json,report.json}` for
/// every successful seed and `report.json` with the aggregate.
pub fn persist(
    out_dir: &Path,
    cfg: &RunConfig,
    corpus: &Corpus,
    results: &[(u64, Result<Replicate>)],
    report: &SeedsReport,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    for (seed, r) in results {
        let Ok(rep) = r else { continue };
        let dir = out_dir.join(format!("seed{seed}"));
        std::fs::create_dir_all(&dir)?;
        checkpoint::save(&dir.join("checkpoint.bin"), &rep.outcome.model, &corpus.vocab)?;
        write_trace(&dir.join("trace.csv"), &rep.outcome.trace)?;
        write_json(&dir.join("trace.json"), &rep.outcome.trace)?;
        write_json(&dir.join("report.json"), &rep.test)?;
    }
    write_json(&out_dir.join("config.json"), cfg)?;
    write_json(&out_dir.join("report.json"), report)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn traces(results: &[(u64, Result<Replicate>)]) -> Vec<TrainTrace> {
    results.iter().filter_map(|(_, r)| r.as_ref().ok()).map(|r| r.outcome.trace.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Profile;

    fn failed(seed: u64) -> (u64, Result<Replicate>) {
        (seed, Err(Error::Data(format!("seed {seed} failed"))))
    }

    #[test]
    fn failures_mark_report_partial() {
        let cfg = RunConfig::for_profile(Profile::Synthetic);
        let r = aggregate(&cfg, &[failed(0), failed(1)]);
        assert!(r.partial);
        assert_eq!(r.mean_map, None);
        assert_eq!(r.failures.len(), 2);
        assert_eq!(r.scheme, "pri-list");
    }
}
