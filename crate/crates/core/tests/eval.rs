use hierank::eval::{average_precision, rank_order, reciprocal_rank};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Independent reference: enumerate positions by counting how many candidates
// outrank each one (higher score, or equal score and lower index).
fn rank_of(scores: &[f64], i: usize) -> usize {
    1 + (0..scores.len()).filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i)).count()
}

fn brute_ap(scores: &[f64], labels: &[u8]) -> f64 {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let mut total = 0.0;
    for &p in &pos {
        let r = rank_of(scores, p);
        let above = pos.iter().filter(|&&q| rank_of(scores, q) <= r).count();
        total += above as f64 / r as f64;
    }
    total / pos.len() as f64
}

fn brute_rr(scores: &[f64], labels: &[u8]) -> f64 {
    let best = (0..labels.len()).filter(|&i| labels[i] == 1).map(|i| rank_of(scores, i)).min().unwrap();
    1.0 / best as f64
}

fn instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
    let n = rng.gen_range(1..=8);
    // coarse grid so that ties occur
    let scores = (0..n).map(|_| rng.gen_range(0..6) as f64 * 0.5).collect();
    let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.35))).collect();
    labels[rng.gen_range(0..n)] = 1;
    (scores, labels)
}

#[test]
fn metrics_match_brute_force_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let (s, y) = instance(&mut rng);
        assert!((average_precision(&s, &y).unwrap() - brute_ap(&s, &y)).abs() <= 1e-12, "{s:?} {y:?}");
        assert!((reciprocal_rank(&s, &y).unwrap() - brute_rr(&s, &y)).abs() <= 1e-12, "{s:?} {y:?}");
    }
}

#[test]
fn strictly_increasing_transforms_preserve_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let (s, y) = instance(&mut rng);
        let t: Vec<f64> = s.iter().map(|x| (3.0 * x).exp() - 7.0).collect();
        assert_eq!(rank_order(&s), rank_order(&t));
        assert_eq!(average_precision(&s, &y).unwrap(), average_precision(&t, &y).unwrap());
        assert_eq!(reciprocal_rank(&s, &y).unwrap(), reciprocal_rank(&t, &y).unwrap());
    }
}

#[test]
fn single_positive_ap_equals_rr() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..500 {
        let (s, _) = instance(&mut rng);
        let mut y = vec![0u8; s.len()];
        y[rng.gen_range(0..s.len())] = 1;
        assert_eq!(average_precision(&s, &y).unwrap(), reciprocal_rank(&s, &y).unwrap());
    }
}

#[test]
fn zero_positive_question_is_an_error() {
    assert!(average_precision(&[0.1, 0.2], &[0, 0]).is_err());
    assert!(reciprocal_rank(&[0.1, 0.2], &[0, 0]).is_err());
}
