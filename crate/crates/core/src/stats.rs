//! Paired permutation test.
//!
//! Under the null the two conditions of each pair are exchangeable, so the
//! null distribution is generated by swapping each pair's labels
//! independently with probability 1/2. With `k` permuted statistics at least
//! as extreme as the observed one, `p = (k + 1) / (N + 1)`.
//!
//! Permutations are drawn in fixed batches, each from its own seeded
//! substream, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prng::SeededRng;

pub const DEFAULT_PERMUTATIONS: u64 = 50_000;
pub const BATCH: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// Permuted delta >= observed delta.
    #[default]
    Greater,
    /// |permuted delta| >= |observed delta|.
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub n_pairs: usize,
    pub n_perm: u64,
    pub delta_obs: f64,
    pub k: u64,
    pub p_value: f64,
    pub alternative: Alternative,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("no paired observations")]
    Empty,
    #[error("the number of permutations must be positive")]
    NoPermutations,
}

fn at_least(perm: f64, obs: f64, alt: Alternative) -> bool {
    // float sums over different orders may differ in the last bits
    let tol = 1e-9 * (1.0 + obs.abs());
    match alt {
        Alternative::Greater => perm >= obs - tol,
        Alternative::TwoSided => perm.abs() >= obs.abs() - tol,
    }
}

fn count_batches(n_perm: u64, seed: u64, draw: impl Fn(&mut SeededRng) -> bool + Sync) -> u64 {
    let batches = n_perm.div_ceil(BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = SeededRng::derived(seed, b);
            let size = BATCH.min(n_perm - b * BATCH);
            (0..size).filter(|_| draw(&mut rng)).count() as u64
        })
        .sum()
}

/// Test on the mean of paired differences, Δ = mean(B) − mean(A).
pub fn permutation_test(
    pairs: &[(f64, f64)],
    n_perm: u64,
    seed: u64,
    alternative: Alternative,
) -> Result<PermutationResult, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::Empty);
    }
    if n_perm == 0 {
        return Err(StatsError::NoPermutations);
    }
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| b - a).collect();
    let n = diffs.len() as f64;
    let delta_obs = diffs.iter().sum::<f64>() / n;
    let k = count_batches(n_perm, seed, |rng| {
        let mut sum = 0.0;
        let mut bits = 0u64;
        for (i, d) in diffs.iter().enumerate() {
            if i % 64 == 0 {
                bits = rng.next_u64();
            }
            sum += if bits >> (i % 64) & 1 == 1 { -d } else { *d };
        }
        at_least(sum / n, delta_obs, alternative)
    });
    Ok(finish(pairs.len(), n_perm, delta_obs, k, alternative))
}

/// Test on an arbitrary statistic of the paired sample, e.g. the
/// difference of pooled ratios. `stat` receives the pairs as (A, B).
pub fn permutation_test_by<T, F>(
    pairs: &[(T, T)],
    stat: F,
    n_perm: u64,
    seed: u64,
    alternative: Alternative,
) -> Result<PermutationResult, StatsError>
where
    T: Copy + Sync,
    F: Fn(&[(T, T)]) -> f64 + Sync,
{
    if pairs.is_empty() {
        return Err(StatsError::Empty);
    }
    if n_perm == 0 {
        return Err(StatsError::NoPermutations);
    }
    let delta_obs = stat(pairs);
    let k = count_batches(n_perm, seed, |rng| {
        let mut bits = 0u64;
        let permuted: Vec<(T, T)> = pairs
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                if i % 64 == 0 {
                    bits = rng.next_u64();
                }
                if bits >> (i % 64) & 1 == 1 {
                    (b, a)
                } else {
                    (a, b)
                }
            })
            .collect();
        at_least(stat(&permuted), delta_obs, alternative)
    });
    Ok(finish(pairs.len(), n_perm, delta_obs, k, alternative))
}

fn finish(n_pairs: usize, n_perm: u64, delta_obs: f64, k: u64, alternative: Alternative) -> PermutationResult {
    PermutationResult {
        n_pairs,
        n_perm,
        delta_obs,
        k,
        p_value: (k + 1) as f64 / (n_perm + 1) as f64,
        alternative,
    }
}

/// Exact p over all 2^n sign patterns (fraction at least as extreme).
pub fn exact_sign_flip_p(pairs: &[(f64, f64)], alternative: Alternative) -> f64 {
    assert!(pairs.len() <= 24, "exact enumeration is limited to 24 pairs");
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| b - a).collect();
    let n = diffs.len() as f64;
    let obs = diffs.iter().sum::<f64>() / n;
    let total = 1u64 << diffs.len();
    let hits = (0..total)
        .filter(|mask| {
            let s: f64 = diffs
                .iter()
                .enumerate()
                .map(|(i, d)| if mask >> i & 1 == 1 { -d } else { *d })
                .sum();
            at_least(s / n, obs, alternative)
        })
        .count();
    hits as f64 / total as f64
}

/// Per-episode (incompatible, compatible) counts for conditions A and B.
pub type CountPair = ((u64, u64), (u64, u64));

/// Difference of pooled ratios ΣI/ΣC between B and A, for pairs of
/// per-episode (incompatible, compatible) counts. NaN when a pooled
/// denominator is zero.
pub fn pooled_ratio_delta(pairs: &[CountPair]) -> f64 {
    let pool = |pick: fn(&CountPair) -> (u64, u64)| {
        let (i, c) = pairs.iter().map(pick).fold((0, 0), |(i, c), (a, b)| (i + a, c + b));
        i as f64 / c as f64
    };
    pool(|p| p.1) - pool(|p| p.0)
}
