use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Shuffles `dataset` under `rng_seed` and splits it into a training part of
/// `round(train_fraction * N)` items and a validation part with the rest.
pub fn split_train_validation<T: Clone>(
    dataset: &[T],
    train_fraction: f64,
    rng_seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if dataset.len() < 10 {
        return Err(Error::invalid(format!(
            "train/validation split needs at least 10 rows, got {}",
            dataset.len()
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let n_train = train_count(dataset.len(), train_fraction);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
    let train = order[..n_train]
        .iter()
        .map(|&i| dataset[i].clone())
        .collect();
    let validation = order[n_train..]
        .iter()
        .map(|&i| dataset[i].clone())
        .collect();
    Ok((train, validation))
}

pub(crate) fn train_count(n: usize, train_fraction: f64) -> usize {
    (train_fraction * n as f64).round() as usize
}
