use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::metrics::Confusion;

/// Bootstrap distribution summary for F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    /// F1 on the original, unresampled data.
    pub point: f64,
    pub mean: f64,
    /// Sample standard deviation over all `R * B` resampled F1 values.
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Mean F1 of each outer repetition.
    pub rep_means: Vec<f64>,
    pub reps: usize,
    pub resamples: usize,
    pub seed: u64,
}

/// Linear-interpolation percentile (R type 7) of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.iter().all(|&x| x == xs[0]) {
        return (xs[0], 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `reps` outer repetitions, each drawing `resamples` resamples with
/// replacement from one ChaCha8 stream seeded by `seed`. Resampling is
/// stratified by label: positives and negatives are each redrawn to their
/// original counts, so no resample loses every positive and F1 stays
/// defined. The interval is the 2.5th to 97.5th percentile of the pooled
/// resampled F1 values.
pub fn bootstrap_f1(
    preds: &[bool],
    labels: &[bool],
    reps: usize,
    resamples: usize,
    seed: u64,
) -> Result<Bootstrap, EvalError> {
    let point = Confusion::tally(preds, labels)?.f1();
    if reps == 0 || resamples == 0 {
        return Err(EvalError::InvalidParameter(
            "R and B must both be at least 1".into(),
        ));
    }
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..preds.len()).partition(|&i| labels[i]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = Vec::with_capacity(reps * resamples);
    let mut rep_means = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = all.len();
        for _ in 0..resamples {
            let mut c = Confusion::default();
            for stratum in [&pos, &neg] {
                for _ in 0..stratum.len() {
                    let i = stratum[rng.random_range(0..stratum.len())];
                    c.add(preds[i], labels[i]);
                }
            }
            all.push(c.f1());
        }
        rep_means.push(mean_std(&all[start..]).0);
    }
    let (mean, std) = mean_std(&all);
    all.sort_by(f64::total_cmp);
    Ok(Bootstrap {
        point,
        mean,
        std,
        ci_low: percentile(&all, 0.025),
        ci_high: percentile(&all, 0.975),
        rep_means,
        reps,
        resamples,
        seed,
    })
}
