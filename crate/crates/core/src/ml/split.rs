use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::MlError;
use crate::rng::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.25,
            seed: 0,
        }
    }
}

/// Shuffled `(train, test)` row indices with `|test| = round(fraction * n)`,
/// kept within `[1, n - 1]`.
pub fn train_test_split(n: usize, spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>), MlError> {
    if n < 2 {
        return Err(MlError::TooFewRows(n));
    }
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(MlError::InvalidFraction(spec.test_fraction));
    }
    let n_test = ((spec.test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(spec.seed, 0));
    let test = idx.split_off(n - n_test);
    Ok((idx, test))
}
