//! Central finite differences against analytic gradients.

use super::{ParamId, ParamStore, Tensor};

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

/// Central-difference gradient of `f` with respect to every entry of `ids`.
/// `f` must be a pure function of the store's values.
pub fn numeric_gradients(
    store: &mut ParamStore,
    ids: &[ParamId],
    step: f64,
    mut f: impl FnMut(&ParamStore) -> f64,
) -> Vec<Tensor> {
    ids.iter()
        .map(|&id| {
            let (r, c) = store.value(id).shape();
            let mut out = Tensor::zeros(r, c);
            for i in 0..r * c {
                let orig = store.value(id).data()[i];
                store.value_mut(id).data_mut()[i] = orig + step;
                let plus = f(store);
                store.value_mut(id).data_mut()[i] = orig - step;
                let minus = f(store);
                store.value_mut(id).data_mut()[i] = orig;
                out.data_mut()[i] = (plus - minus) / (2.0 * step);
            }
            out
        })
        .collect()
}

/// Central differences that also report, per entry, whether both probes
/// stayed on the base point's smooth piece. `f` returns the loss and the
/// graph's [`branch_signature`](super::Graph::branch_signature).
pub fn guarded_numeric_gradients(
    store: &mut ParamStore,
    ids: &[ParamId],
    step: f64,
    mut f: impl FnMut(&ParamStore) -> (f64, u64),
) -> (Vec<Tensor>, Vec<Vec<bool>>) {
    let (_, base) = f(store);
    let mut smooth = Vec::with_capacity(ids.len());
    let grads = ids
        .iter()
        .map(|&id| {
            let (r, c) = store.value(id).shape();
            let mut out = Tensor::zeros(r, c);
            let mut ok = vec![true; r * c];
            for i in 0..r * c {
                let orig = store.value(id).data()[i];
                store.value_mut(id).data_mut()[i] = orig + step;
                let (plus, sp) = f(store);
                store.value_mut(id).data_mut()[i] = orig - step;
                let (minus, sm) = f(store);
                store.value_mut(id).data_mut()[i] = orig;
                out.data_mut()[i] = (plus - minus) / (2.0 * step);
                ok[i] = sp == base && sm == base;
            }
            smooth.push(ok);
            out
        })
        .collect();
    (grads, smooth)
}

/// Like [`max_relative_error`] but ignoring entries whose mask is false.
/// Returns the error and the number of ignored entries.
pub fn masked_max_relative_error(
    store: &ParamStore,
    ids: &[ParamId],
    numeric: &[Tensor],
    keep: &[Vec<bool>],
    floor: f64,
) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for ((&id, n), keep) in ids.iter().zip(numeric).zip(keep) {
        let a = store.grad(id).expect("gradient check on a frozen parameter");
        for ((&x, &y), &k) in a.data().iter().zip(n.data()).zip(keep) {
            if k {
                worst = worst.max(relative_error(x, y, floor));
            } else {
                skipped += 1;
            }
        }
    }
    (worst, skipped)
}

/// Largest relative error between stored analytic gradients and `numeric`.
pub fn max_relative_error(store: &ParamStore, ids: &[ParamId], numeric: &[Tensor], floor: f64) -> f64 {
    let mut worst = 0.0f64;
    for (&id, n) in ids.iter().zip(numeric) {
        let a = store.grad(id).expect("gradient check on a frozen parameter");
        for (&x, &y) in a.data().iter().zip(n.data()) {
            worst = worst.max(relative_error(x, y, floor));
        }
    }
    worst
}
