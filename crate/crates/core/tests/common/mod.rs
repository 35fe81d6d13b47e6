//! Brute-force reference implementations used by the integration tests.
//! Nothing here calls into the engine's search, scoring or fulfillment code.

#![allow(dead_code)]

use std::collections::HashSet;

use permreg::{Dataset, Permutation};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Subsequence test by scanning the permutation left to right.
pub fn fulfills_scan(perm: &[u32], c: &[u32]) -> bool {
    let mut want = c.iter().peekable();
    for item in perm {
        if want.peek() == Some(&item) {
            want.next();
        }
    }
    want.peek().is_none()
}

/// All constraints of length 2..=max_len in breadth-first order: level 1 is
/// `(1), ..., (n)`, each level inserts every missing item at every position
/// (items ascending, then positions ascending), keeping first occurrences.
pub fn bfs_order(n: u32, max_len: usize) -> Vec<Vec<u32>> {
    let mut level: Vec<Vec<u32>> = (1..=n).map(|a| vec![a]).collect();
    let mut out = Vec::new();
    for _ in 2..=max_len.min(n as usize) {
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for parent in &level {
            for c in 1..=n {
                if parent.contains(&c) {
                    continue;
                }
                for pos in 0..=parent.len() {
                    let mut child = parent.clone();
                    child.insert(pos, c);
                    if seen.insert(child.clone()) {
                        next.push(child);
                    }
                }
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

pub fn support_scan(ds: &Dataset, c: &[u32]) -> Vec<bool> {
    ds.perms()
        .iter()
        .map(|p| fulfills_scan(p.items(), c))
        .collect()
}

/// Signed residual sum over the support, summed in row order.
pub fn signed_sum(support: &[bool], delta: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, &b) in support.iter().enumerate() {
        if b {
            s += delta[i];
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Winner {
    pub items: Vec<u32>,
    pub tau: f64,
    pub signed_sum: f64,
}

/// Scores every constraint up to `max_len`; the winner is the first in BFS
/// order whose `tau` is within `1e-12 * sum|delta|` of the maximum and above
/// that threshold.
pub fn exhaustive_best(
    ds: &Dataset,
    delta: &[f64],
    max_len: usize,
    exclude: &[Vec<u32>],
) -> Option<Winner> {
    let eps = 1e-12 * delta.iter().map(|d| d.abs()).sum::<f64>();
    let scored: Vec<Winner> = bfs_order(ds.n_items() as u32, max_len)
        .into_iter()
        .filter(|c| !exclude.contains(c))
        .map(|c| {
            let s = signed_sum(&support_scan(ds, &c), delta);
            Winner {
                items: c,
                tau: s.abs(),
                signed_sum: s,
            }
        })
        .collect();
    let top = scored.iter().map(|w| w.tau).fold(0.0f64, f64::max);
    scored
        .into_iter()
        .find(|w| w.tau > eps && w.tau >= top - eps)
}

pub fn random_perm(rng: &mut impl Rng, n: usize) -> Vec<u32> {
    let mut items: Vec<u32> = (1..=n as u32).collect();
    items.shuffle(rng);
    items
}

/// Uniform permutations with standard-normal-ish targets.
pub fn random_dataset(seed: u64, n: usize, m: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<(Vec<u32>, f64)> = (0..m)
        .map(|_| {
            let p = random_perm(&mut rng, n);
            let y: f64 = rng.random_range(-1.0..1.0) + rng.random_range(-1.0..1.0);
            (p, y)
        })
        .collect();
    Dataset::from_rows(n, &rows).unwrap()
}

pub fn random_residuals(seed: u64, m: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn perm(items: &[u32]) -> Permutation {
    Permutation::new(items.to_vec()).unwrap()
}
