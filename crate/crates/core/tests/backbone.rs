use hierank::backbone::{attend_align, attend_align_masked, AttentionConfig};
use hierank::data::{EmbeddingMatrix, QuestionGroup};
use hierank::diff::{Fault, Graph, ParamStore, Tensor};
use hierank::harness::{check_scheme, random_batch, GradCheckConfig};
use hierank::model::{Model, ModelDims};
use hierank::ranking::{Level, PairGenConfig};
use hierank::schemes::{Scheme, SchemeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn close(a: &Tensor, b: &Tensor, tol: f64) -> bool {
    a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| (x - y).abs() <= tol)
}

fn rows(t: &Tensor, n: usize) -> Tensor {
    Tensor::from_vec(n, t.cols(), t.data()[..n * t.cols()].to_vec())
}

#[test]
fn padding_mask_matches_unpadded_alignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for cfg in [AttentionConfig::disabled(), AttentionConfig::kmax(2)] {
        let (n, m, pad, h) = (4, 3, 2, 5);
        let q = rand_tensor(&mut rng, n, h);
        let a = rand_tensor(&mut rng, m, h);
        let mut padded_a = a.data().to_vec();
        padded_a.extend((0..pad * h).map(|_| rng.gen_range(-1.0..1.0)));
        let padded_a = Tensor::from_vec(m + pad, h, padded_a);
        let mut padded_q = q.data().to_vec();
        padded_q.extend(std::iter::repeat_n(0.0, pad * h));
        let padded_q = Tensor::from_vec(n + pad, h, padded_q);

        let mut g = Graph::new();
        let (hq, ha) = (g.constant(q), g.constant(a));
        let plain = attend_align(&mut g, hq, ha, cfg).unwrap();
        let (pq, pa) = (g.constant(padded_q), g.constant(padded_a));
        let q_valid: Vec<bool> = (0..n + pad).map(|i| i < n).collect();
        let a_valid: Vec<bool> = (0..m + pad).map(|i| i < m).collect();
        let masked = attend_align_masked(&mut g, pq, pa, cfg, Some(&q_valid), Some(&a_valid)).unwrap();

        assert!(close(&rows(g.value(masked.question), n), g.value(plain.question), 1e-12));
        assert!(close(&rows(g.value(masked.answer), m), g.value(plain.answer), 1e-12));
    }
}

#[test]
fn attention_commutes_with_answer_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n, m, h) = (3, 5, 4);
    let perm = [3, 0, 4, 1, 2];
    for cfg in [AttentionConfig::disabled(), AttentionConfig::kmax(2)] {
        let q = rand_tensor(&mut rng, n, h);
        let a = rand_tensor(&mut rng, m, h);
        let mut shuffled = Tensor::zeros(m, h);
        for (i, &p) in perm.iter().enumerate() {
            shuffled.row_mut(i).copy_from_slice(a.row(p));
        }
        let mut g = Graph::new();
        let hq = g.constant(q);
        let ha = g.constant(a);
        let hs = g.constant(shuffled);
        let base = attend_align(&mut g, hq, ha, cfg).unwrap();
        let perm_al = attend_align(&mut g, hq, hs, cfg).unwrap();

        assert!(close(g.value(perm_al.question), g.value(base.question), 1e-12));
        for (i, &p) in perm.iter().enumerate() {
            let got = g.value(perm_al.answer).row(i);
            let want = g.value(base.answer).row(p);
            assert!(got.iter().zip(want).all(|(x, y)| (x - y).abs() <= 1e-12));
        }
    }
}

fn small_model(scheme: Scheme, seed: u64) -> (Model, Vec<QuestionGroup>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = random_batch(&mut rng, 2, 15);
    let emb = EmbeddingMatrix::random(15, 6, 0.5, &mut rng);
    let model = Model::new(
        ModelDims::tiny(),
        SchemeConfig::new(scheme),
        AttentionConfig::kmax(3),
        PairGenConfig::wikiqa(),
        emb,
        seed,
    )
    .unwrap();
    (model, batch)
}

fn raw_features(model: &Model, store: &ParamStore, group: &QuestionGroup) -> [Option<Tensor>; 3] {
    let mut g = Graph::new();
    let f = model.arch.features(store, &mut g, group).unwrap();
    f.raw.map(|v| v.map(|v| g.value(v).clone()))
}

fn bits(t: &Option<Tensor>) -> Vec<u64> {
    t.as_ref().unwrap().data().iter().map(|x| x.to_bits()).collect()
}

#[test]
fn level_aggregators_are_isolated() {
    let (model, batch) = small_model(Scheme::Mtl(Level::List), 1);
    let before = raw_features(&model, &model.store, &batch[0]);
    let mut store = model.store.clone();
    for id in model.arch.aggregators[Level::Point.index()].as_ref().unwrap().ids() {
        for x in store.value_mut(id).data_mut() {
            *x += 0.3;
        }
    }
    let after = raw_features(&model, &store, &batch[0]);
    assert_ne!(bits(&before[0]), bits(&after[0]));
    assert_eq!(bits(&before[1]), bits(&after[1]));
    assert_eq!(bits(&before[2]), bits(&after[2]));
}

#[test]
fn encoder_is_shared_by_every_level() {
    let (model, batch) = small_model(Scheme::Mtl(Level::List), 2);
    let before = raw_features(&model, &model.store, &batch[1]);
    let mut store = model.store.clone();
    for x in store.value_mut(model.arch.encoder.w2).data_mut() {
        *x *= 1.5;
    }
    let after = raw_features(&model, &store, &batch[1]);
    for l in 0..3 {
        assert_ne!(bits(&before[l]), bits(&after[l]), "level {l} did not move");
    }
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let cfg = GradCheckConfig::default();
    let entry = check_scheme(&cfg, SchemeConfig::new(Scheme::Pri(Level::List))).unwrap();
    assert!(entry.passed, "{entry:?}");
    assert!(entry.max_rel_error < 1e-3);
}

#[test]
fn injected_tanh_fault_is_caught() {
    let cfg = GradCheckConfig { fault: Some(Fault::TanhGradScale(1.5)), ..GradCheckConfig::default() };
    let entry = check_scheme(&cfg, SchemeConfig::new(Scheme::Pri(Level::List))).unwrap();
    assert!(!entry.passed);
    assert!(entry.max_rel_error > 1e-2, "{entry:?}");
}
