use super::corpus::QuestionGroup;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Shuffles whole question groups with `seed` and chunks them into batches
/// of `batch_size` questions (the last batch may be smaller).
pub fn make_batches(groups: &[QuestionGroup], batch_size: usize, seed: u64) -> Vec<Vec<&QuestionGroup>> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let mut order: Vec<&QuestionGroup> = groups.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.chunks(batch_size).map(<[_]>::to_vec).collect()
}

/// Training items each ranking level sees in one batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BatchAccounting {
    /// Σ (k + t)
    pub point_items: usize,
    /// Σ k·t
    pub all_pairs_items: usize,
    /// Σ k (one hardest negative per question, when it has any negative)
    pub max_negative_items: usize,
    pub lists: usize,
}

pub fn batch_accounting(batch: &[&QuestionGroup]) -> BatchAccounting {
    batch.iter().fold(BatchAccounting::default(), |mut acc, g| {
        let (k, t) = (g.positives(), g.negatives());
        acc.point_items += k + t;
        acc.all_pairs_items += k * t;
        acc.max_negative_items += if t > 0 { k } else { 0 };
        acc.lists += 1;
        acc
    })
}
