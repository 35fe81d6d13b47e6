//! Constraint fulfillment and packed support vectors.

use std::fmt;

use rayon::prelude::*;

use crate::error::Result;
use crate::types::{Constraint, Dataset, Permutation};

/// Packed indicator of the dataset rows that fulfill a constraint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportVector {
    words: Vec<u64>,
    len: usize,
    count: usize,
}

impl SupportVector {
    pub fn zeros(len: usize) -> Self {
        SupportVector {
            words: vec![0; len.div_ceil(64)],
            len,
            count: 0,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut sv = SupportVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                sv.set(i);
            }
        }
        sv
    }

    #[inline]
    fn set(&mut self, i: usize) {
        let w = &mut self.words[i / 64];
        let mask = 1u64 << (i % 64);
        if *w & mask == 0 {
            *w |= mask;
            self.count += 1;
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] & (1u64 << (i % 64)) != 0
    }

    /// Number of rows covered (set or not).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of set bits.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Indices of set bits in ascending order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    pub fn is_subset_of(&self, other: &SupportVector) -> bool {
        self.len == other.len
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }
}

impl fmt::Display for SupportVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// True iff the items of `c` appear in `perm` in the same relative order.
pub fn fulfills(perm: &Permutation, c: &Constraint) -> Result<bool> {
    c.check_range(perm.len())?;
    Ok(fulfills_in_range(perm, c))
}

#[inline]
pub(crate) fn fulfills_in_range(perm: &Permutation, c: &Constraint) -> bool {
    let items = c.items();
    let mut prev = perm.position_unchecked(items[0]);
    for &a in &items[1..] {
        let p = perm.position_unchecked(a);
        if p <= prev {
            return false;
        }
        prev = p;
    }
    true
}

pub fn support_vector(dataset: &Dataset, c: &Constraint) -> Result<SupportVector> {
    c.check_range(dataset.n_items())?;
    let mut sv = SupportVector::zeros(dataset.len());
    for (i, perm) in dataset.perms().iter().enumerate() {
        if fulfills_in_range(perm, c) {
            sv.set(i);
        }
    }
    Ok(sv)
}

/// Support of `c` restricted to the rows of `within`. When `within` is the
/// support of a subsequence of `c` this equals the full support.
pub(crate) fn support_within(
    dataset: &Dataset,
    c: &Constraint,
    within: &SupportVector,
) -> SupportVector {
    let perms = dataset.perms();
    let mut sv = SupportVector::zeros(dataset.len());
    for i in within.ones() {
        if fulfills_in_range(&perms[i], c) {
            sv.set(i);
        }
    }
    sv
}

/// One support vector per constraint, in input order.
pub fn feature_matrix(dataset: &Dataset, cs: &[Constraint]) -> Result<Vec<SupportVector>> {
    cs.par_iter().map(|c| support_vector(dataset, c)).collect()
}
