//! Class-proportional subsampling over the six-way label.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Label6, Sample};

pub const DEFAULT_MAX_DEVIATION: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub target_size: usize,
    pub seed: u64,
    pub max_proportion_deviation: f64,
}

impl SamplingPlan {
    pub fn new(target_size: usize, seed: u64) -> Self {
        Self {
            target_size,
            seed,
            max_proportion_deviation: DEFAULT_MAX_DEVIATION,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),
    #[error("target size {target} exceeds population {population}")]
    TargetExceedsPopulation { target: usize, population: usize },
    #[error("class {class} rounds to {expected} slot(s) but received none")]
    EmptyStratum { class: Label6, expected: usize },
    #[error("class {class} proportion moved by {deviation:.6} (bound {bound})")]
    DeviationExceeded {
        class: Label6,
        deviation: f64,
        bound: f64,
    },
}

pub fn class_counts(samples: &[Sample]) -> [usize; 6] {
    let mut counts = [0; 6];
    for s in samples {
        counts[usize::from(s.label6.code())] += 1;
    }
    counts
}

/// Largest-remainder apportionment of `target` seats; remainder ties go to
/// the lower class code.
pub fn allocate(counts: &[usize; 6], target: usize) -> [usize; 6] {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return [0; 6];
    }
    let (t, n) = (target as u128, total as u128);
    let mut quota = [0usize; 6];
    let mut rem = [0u128; 6];
    for c in 0..6 {
        let share = t * counts[c] as u128;
        quota[c] = (share / n) as usize;
        rem[c] = share % n;
    }
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
    let mut left = target - quota.iter().sum::<usize>();
    for c in order {
        if left == 0 {
            break;
        }
        if quota[c] < counts[c] {
            quota[c] += 1;
            left -= 1;
        }
    }
    quota
}

/// Draws a class-stratified subsample; the result keeps corpus order.
pub fn stratified_sample(samples: &[Sample], plan: &SamplingPlan) -> Result<Vec<Sample>, SamplingError> {
    if plan.target_size == 0 {
        return Err(SamplingError::InvalidPlan("target size must be positive".into()));
    }
    let dev = plan.max_proportion_deviation;
    if !(dev > 0.0 && dev < 1.0) {
        return Err(SamplingError::InvalidPlan(format!("max deviation {dev} outside (0, 1)")));
    }
    let population = samples.len();
    if plan.target_size > population {
        return Err(SamplingError::TargetExceedsPopulation {
            target: plan.target_size,
            population,
        });
    }

    let counts = class_counts(samples);
    let quota = allocate(&counts, plan.target_size);
    for (c, &q) in quota.iter().enumerate() {
        let expected = (plan.target_size as f64 * counts[c] as f64 / population as f64).round() as usize;
        if q == 0 && expected >= 1 {
            return Err(SamplingError::EmptyStratum {
                class: Label6::ALL[c],
                expected,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut chosen = Vec::with_capacity(plan.target_size);
    for (c, &q) in quota.iter().enumerate() {
        let members: Vec<usize> = samples
            .iter()
            .enumerate()
            .filter(|(_, s)| usize::from(s.label6.code()) == c)
            .map(|(i, _)| i)
            .collect();
        chosen.extend(
            rand::seq::index::sample(&mut rng, members.len(), q)
                .into_iter()
                .map(|k| members[k]),
        );
    }
    chosen.sort_unstable();

    let out: Vec<Sample> = chosen.into_iter().map(|i| samples[i].clone()).collect();
    let out_counts = class_counts(&out);
    for c in 0..6 {
        let deviation = (out_counts[c] as f64 / out.len() as f64
            - counts[c] as f64 / population as f64)
            .abs();
        if deviation >= dev {
            return Err(SamplingError::DeviationExceeded {
                class: Label6::ALL[c],
                deviation,
                bound: dev,
            });
        }
    }
    Ok(out)
}
