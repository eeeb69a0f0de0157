use hierank::data::Split;
use hierank::eval::{RankReport, ReportMeta};
use hierank::harness::{
    aggregate, checkpoint, emit_curves, evaluate_model, load_dataset, persist, run_seeds, train, write_curve, Profile,
    RunConfig, SeedsReport, TrainTrace, CURVE_HEADER,
};
use hierank::ranking::Level;
use hierank::schemes::{Ablation, Scheme, SchemeConfig};

fn quick(scheme: SchemeConfig, epochs: usize) -> RunConfig {
    RunConfig {
        scheme,
        max_epochs: epochs,
        seeds: vec![0],
        ..RunConfig::for_profile(Profile::Synthetic)
    }
}

fn meta() -> ReportMeta {
    ReportMeta { scheme: "x".into(), seed: 0, epoch: 0, split: "dev".into() }
}

#[test]
fn identical_runs_are_bit_identical() {
    let cfg = RunConfig { seeds: vec![1, 2], ..quick(SchemeConfig::new(Scheme::Pri(Level::List)), 4) };
    let corpus = load_dataset(&cfg).unwrap();
    let a = run_seeds(&cfg, &corpus);
    let b = run_seeds(&cfg, &corpus);
    for ((_, x), (_, y)) in a.iter().zip(&b) {
        let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
        assert_eq!(x.outcome.trace.without_timing(), y.outcome.trace.without_timing());
        assert_eq!(serde_json::to_string(&x.test).unwrap(), serde_json::to_string(&y.test).unwrap());
    }
    let ra = serde_json::to_string(&aggregate(&cfg, &a)).unwrap();
    let rb = serde_json::to_string(&aggregate(&cfg, &b)).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn training_respects_max_epochs_and_restores_best() {
    let cfg = RunConfig { early_stop_patience: 100, ..quick(SchemeConfig::new(Scheme::Ca(Level::List)), 3) };
    let corpus = load_dataset(&cfg).unwrap();
    let out = train(&cfg, &corpus, 0).unwrap();
    assert_eq!(out.trace.epochs.len(), 3);
    let best = out.trace.best().unwrap();
    assert_eq!(best.dev_map, out.trace.max_dev_map());
    let restored = evaluate_model(&out.model, &corpus.dev, meta()).unwrap();
    assert_eq!(restored.map.to_bits(), best.dev_map.to_bits());
}

#[test]
fn checkpoint_round_trip_keeps_dev_map() {
    let cfg = quick(SchemeConfig::new(Scheme::Ri(Level::Pair)), 2);
    let corpus = load_dataset(&cfg).unwrap();
    let out = train(&cfg, &corpus, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    checkpoint::save(&path, &out.model, &corpus.vocab).unwrap();
    let (model, vocab) = checkpoint::load(&path).unwrap();
    assert_eq!(vocab.tokens(), corpus.vocab.tokens());
    let before = evaluate_model(&out.model, corpus.split(Split::Dev), meta()).unwrap();
    let after = evaluate_model(&model, corpus.split(Split::Dev), meta()).unwrap();
    assert_eq!(before.map.to_bits(), after.map.to_bits());
    assert_eq!(before.per_question, after.per_question);
}

#[test]
fn curve_csv_shape() {
    let cfg = quick(SchemeConfig::new(Scheme::Pri(Level::List)).with_ablation(Ablation::NoPair), 5);
    let cfg = RunConfig { early_stop_patience: 100, ..cfg };
    let corpus = load_dataset(&cfg).unwrap();
    let trace = train(&cfg, &corpus, 0).unwrap().trace;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    write_curve(&path, &trace).unwrap();
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), CURVE_HEADER);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert!(r[2].is_empty());
        assert!(!r[1].is_empty() && !r[3].is_empty());
    }
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 6);
}

#[test]
fn emit_curves_writes_files_and_summary() {
    let trace = |scheme: &str, seed, losses: &[f64]| TrainTrace {
        scheme: scheme.into(),
        seed,
        best_epoch: 1,
        epochs: losses
            .iter()
            .enumerate()
            .map(|(i, &l)| hierank::harness::EpochRecord {
                epoch: i + 1,
                loss_point: None,
                loss_pair: None,
                loss_list: Some(l),
                joint: l,
                dev_map: 1.0 - l,
                dev_mrr: 1.0 - l,
                train_map: None,
                wall_secs: 0.0,
            })
            .collect(),
    };
    let traces = vec![
        trace("pri-list", 0, &[0.3, 0.05, 0.01]),
        trace("pri-list", 1, &[0.3, 0.2, 0.04]),
        trace("ca-list", 0, &[0.4, 0.3, 0.2]),
    ];
    let dir = tempfile::tempdir().unwrap();
    let s = emit_curves(dir.path(), &traces, 0.05, 0.9).unwrap();
    assert_eq!(s.files.len(), 4);
    assert!(s.files.iter().all(|f| f.exists()));
    let pri = s.mean("pri-list").unwrap();
    assert_eq!((pri.epochs_to_list_loss, pri.epochs_to_dev_map, pri.reached, pri.runs), (Some(2.5), Some(2.5), 2, 2));
    let ca = s.mean("ca-list").unwrap();
    assert_eq!((ca.epochs_to_dev_map, ca.reached), (None, 0));
}

#[test]
fn persisted_report_mean_matches_seed_files() {
    let cfg = RunConfig { seeds: vec![0, 3], ..quick(SchemeConfig::new(Scheme::Mtl(Level::List)), 2) };
    let corpus = load_dataset(&cfg).unwrap();
    let results = run_seeds(&cfg, &corpus);
    let report = aggregate(&cfg, &results);
    let dir = tempfile::tempdir().unwrap();
    persist(dir.path(), &cfg, &corpus, &results, &report).unwrap();

    let read = |p: std::path::PathBuf| std::fs::read_to_string(p).unwrap();
    let back: SeedsReport = serde_json::from_str(&read(dir.path().join("report.json"))).unwrap();
    assert_eq!(back, report);
    let maps: Vec<f64> = cfg
        .seeds
        .iter()
        .map(|s| {
            let dir = dir.path().join(format!("seed{s}"));
            assert!(dir.join("checkpoint.bin").exists() && dir.join("trace.csv").exists());
            serde_json::from_str::<RankReport>(&read(dir.join("report.json"))).unwrap().map
        })
        .collect();
    let mean = maps.iter().sum::<f64>() / maps.len() as f64;
    assert!((mean - report.mean_map.unwrap()).abs() <= 1e-12);
    let saved: RunConfig = serde_json::from_str(&read(dir.path().join("config.json"))).unwrap();
    assert_eq!(saved, cfg);
}

#[test]
fn single_seed_mean_is_that_seed() {
    let cfg = quick(SchemeConfig::new(Scheme::Ca(Level::Point)), 2);
    let corpus = load_dataset(&cfg).unwrap();
    let results = run_seeds(&cfg, &corpus);
    let report = aggregate(&cfg, &results);
    assert!(!report.partial);
    assert_eq!(report.mean_map, Some(report.seeds[0].test_map));
    assert_eq!(report.mean_mrr, Some(report.seeds[0].test_mrr));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "profile = \"synthetic\"\nscheme = \"ri-list\"\nmax_epochs = 7\ntrain = \"data/train.jsonl\"\n")
        .unwrap();
    let cfg = RunConfig::load(&path, None).unwrap();
    assert_eq!(cfg.scheme.scheme, Scheme::Ri(Level::List));
    assert_eq!(cfg.max_epochs, 7);
    assert_eq!(cfg.train.as_deref(), Some(dir.path().join("data/train.jsonl").as_path()));
    std::fs::write(&path, "learning_rate = 0.1\n").unwrap();
    assert!(RunConfig::load(&path, None).is_err());
}
