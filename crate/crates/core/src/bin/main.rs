//! `hierank` command-line interface.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hierank::data::Split;
use hierank::eval::ReportMeta;
use hierank::harness::{
    self, checkpoint, default_cases, emit_curves, grad_check, load_dataset, load_dataset_with, run_seeds, write_json,
    GradCheckConfig, Profile, RunConfig,
};
use hierank::schemes::{Scheme, SchemeConfig};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "hierank", version, about = "Hierarchical ranking for answer selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration; profile defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scheme such as `pri-list`, `ri-pair`, `mtl`, `ca-list`.
    #[arg(long)]
    scheme: Option<String>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// `wikiqa-like`, `trecqa-like` or `synthetic`.
    #[arg(long)]
    profile: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed, evaluate on test and write checkpoints, traces and reports.
    Train(Common),
    /// Score a split with a saved checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Compare analytic and finite-difference gradients on a tiny network.
    Gradcheck(Common),
    /// Train two schemes and write loss curves plus epochs-to-threshold summary.
    Curves {
        #[command(flatten)]
        common: Common,
        /// Comparison scheme.
        #[arg(long, default_value = "ca-list")]
        baseline: String,
        #[arg(long, default_value_t = 0.05)]
        list_threshold: f64,
        #[arg(long, default_value_t = 0.9)]
        dev_map_threshold: f64,
    },
    /// Write the synthetic corpus as JSON-lines train/dev/test files.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        questions: Option<usize>,
    },
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let profile: Option<Profile> = common.profile.as_deref().map(str::parse).transpose()?;
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path, profile).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::for_profile(profile.unwrap_or(Profile::Synthetic)),
    };
    if let Some(s) = &common.scheme {
        cfg.scheme.scheme = s.parse()?;
    }
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn train(common: &Common) -> Result<()> {
    let cfg = resolve(common)?;
    cfg.validate()?;
    let corpus = load_dataset(&cfg)?;
    eprintln!(
        "training {} ({}) on {} train / {} dev / {} test questions, seeds {:?}",
        cfg.scheme.scheme,
        cfg.profile,
        corpus.train.len(),
        corpus.dev.len(),
        corpus.test.len(),
        cfg.seeds
    );
    let results = run_seeds(&cfg, &corpus);
    let report = harness::aggregate(&cfg, &results);
    harness::persist(&cfg.out_dir, &cfg, &corpus, &results, &report)?;
    for s in &report.seeds {
        println!(
            "seed {:>3}  best epoch {:>3}/{:<3}  dev MAP {:.4}  test MAP {:.4}  MRR {:.4}",
            s.seed, s.best_epoch, s.epochs_run, s.dev_map, s.test_map, s.test_mrr
        );
    }
    for f in &report.failures {
        println!("seed {:>3}  FAILED: {}", f.seed, f.error);
    }
    if let (Some(map), Some(mrr)) = (report.mean_map, report.mean_mrr) {
        println!("mean      MAP {map:.4}  MRR {mrr:.4}{}", if report.partial { "  (partial)" } else { "" });
    }
    println!("wrote {}", cfg.out_dir.display());
    if report.seeds.is_empty() {
        bail!("every seed failed");
    }
    Ok(())
}

fn eval(common: &Common, ckpt: &Path, split: &str) -> Result<()> {
    let cfg = resolve(common)?;
    let split: Split = match split {
        "train" => Split::Train,
        "dev" => Split::Dev,
        "test" => Split::Test,
        other => bail!("unknown split {other:?}"),
    };
    let (model, vocab) = checkpoint::load(ckpt).with_context(|| format!("loading {}", ckpt.display()))?;
    let corpus = load_dataset_with(&cfg, vocab)?;
    let meta = ReportMeta {
        scheme: model.arch.scheme.scheme.to_string(),
        seed: cfg.seeds[0],
        epoch: 0,
        split: split.to_string(),
    };
    let report = harness::evaluate_model(&model, corpus.split(split), meta)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join(format!("eval_{split}.json"));
    write_json(&path, &report)?;
    println!("{split}: MAP {:.4}  MRR {:.4}  ({} questions) -> {}", report.map, report.mrr, report.questions, path.display());
    Ok(())
}

fn gradcheck(common: &Common) -> Result<()> {
    let cfg = resolve(common)?;
    let mut gc = GradCheckConfig { pairs: cfg.pairs, ..GradCheckConfig::default() };
    if let Some(seed) = common.seed {
        gc.seed = seed;
    }
    let cases = match &common.scheme {
        Some(_) => vec![cfg.scheme],
        None => default_cases(),
    };
    let report = grad_check(&gc, &cases)?;
    for e in &report.entries {
        println!(
            "{:<18} {:>6} params  {:>3} kinked  max rel err {:.3e}  {}",
            e.case,
            e.scalars,
            e.kinked,
            e.max_rel_error,
            if e.passed { "ok" } else { "FAIL" }
        );
    }
    println!("{} in {:.1}s (tolerance {:e})", if report.passed { "passed" } else { "FAILED" }, report.secs, report.tolerance);
    std::fs::create_dir_all(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join("gradcheck.json"), &report)?;
    if !report.passed {
        bail!("gradient check failed");
    }
    Ok(())
}

fn curves(common: &Common, baseline: &str, list_threshold: f64, dev_threshold: f64) -> Result<()> {
    let cfg = resolve(common)?;
    cfg.validate()?;
    let corpus = load_dataset(&cfg)?;
    let baseline: Scheme = baseline.parse()?;
    let mut traces = Vec::new();
    for scheme in [cfg.scheme.scheme, baseline] {
        let run = RunConfig { scheme: SchemeConfig { scheme, ..cfg.scheme }, ..cfg.clone() };
        run.validate()?;
        eprintln!("training {scheme} over seeds {:?}", run.seeds);
        let results = run_seeds(&run, &corpus);
        for (seed, r) in &results {
            if let Err(e) = r {
                eprintln!("{scheme} seed {seed} failed: {e}");
            }
        }
        traces.extend(harness::traces(&results));
    }
    let summary = emit_curves(&cfg.out_dir, &traces, list_threshold, dev_threshold)?;
    for r in summary.rows.iter().filter(|r| r.seed.is_none()) {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "never".into());
        println!(
            "{:<10} epochs to L_list<={list_threshold}: {:>6}  to dev MAP>={dev_threshold}: {:>6}  ({}/{} runs reached)",
            r.scheme,
            fmt(r.epochs_to_list_loss),
            fmt(r.epochs_to_dev_map),
            r.reached,
            r.runs
        );
    }
    println!("wrote {} files to {}", summary.files.len(), cfg.out_dir.display());
    Ok(())
}

fn synth(common: &Common, questions: Option<usize>) -> Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(n) = questions {
        cfg.synthetic_questions = n;
    }
    let seed = common.seed.unwrap_or(cfg.synthetic_seed);
    let corpus = hierank::data::synth_corpus(cfg.synthetic_questions, seed)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    for split in [Split::Train, Split::Dev, Split::Test] {
        let path = cfg.out_dir.join(format!("{split}.jsonl"));
        let mut text = String::new();
        for rec in corpus.split_records(split) {
            text.push_str(&serde_json::to_string(rec)?);
            text.push('\n');
        }
        std::fs::write(&path, text)?;
        println!("{} questions -> {}", corpus.split(split).len(), path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(c) => train(c),
        Command::Eval { common, checkpoint, split } => eval(common, checkpoint, split),
        Command::Gradcheck(c) => gradcheck(c),
        Command::Curves { common, baseline, list_threshold, dev_map_threshold } => {
            curves(common, baseline, *list_threshold, *dev_map_threshold)
        }
        Command::Synth { common, questions } => synth(common, *questions),
    }
}
