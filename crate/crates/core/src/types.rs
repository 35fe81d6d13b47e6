//! Domain types shared by the engine: permutations, constraints, datasets,
//! models and hyperparameters. Item ids are 1-based throughout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A total order of the items `1..=n`. Position `k` holds the item placed
/// `k`-th.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    items: Vec<u32>,
    // positions[item - 1] = 0-based position of `item`
    positions: Vec<u32>,
}

/// Checks that `items` is a bijection on `1..=n`.
pub fn validate_permutation(items: &[u32], n: usize) -> Result<Permutation> {
    if items.len() != n {
        return Err(Error::WrongLength {
            expected: n,
            found: items.len(),
        });
    }
    let mut positions = vec![u32::MAX; n];
    for (pos, &item) in items.iter().enumerate() {
        if item == 0 || item as usize > n {
            return Err(Error::OutOfRangeItem { item, n });
        }
        let slot = &mut positions[item as usize - 1];
        if *slot != u32::MAX {
            return Err(Error::DuplicateItem { item });
        }
        *slot = pos as u32;
    }
    Ok(Permutation {
        items: items.to_vec(),
        positions,
    })
}

impl Permutation {
    pub fn new(items: Vec<u32>) -> Result<Self> {
        let n = items.len();
        validate_permutation(&items, n)
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            items: (1..=n as u32).collect(),
            positions: (0..n as u32).collect(),
        }
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// 0-based position of `item`, or `None` if it is not in `1..=n`.
    #[inline]
    pub fn position(&self, item: u32) -> Option<usize> {
        let idx = (item as usize).checked_sub(1)?;
        self.positions.get(idx).map(|&p| p as usize)
    }

    /// Position lookup for items already known to be in range.
    #[inline]
    pub(crate) fn position_unchecked(&self, item: u32) -> u32 {
        self.positions[item as usize - 1]
    }
}

impl Serialize for Permutation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.items.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let items = Vec::<u32>::deserialize(d)?;
        Permutation::new(items).map_err(serde::de::Error::custom)
    }
}

/// An ordered subset of items. A permutation fulfills it when the items
/// occur in the same relative order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Constraint(Vec<u32>);

impl Constraint {
    /// Builds a constraint, rejecting repeated items, zero ids and fewer
    /// than two items.
    pub fn new(items: Vec<u32>) -> Result<Self> {
        if items.len() < 2 {
            return Err(Error::ConstraintTooShort);
        }
        for (i, &a) in items.iter().enumerate() {
            if a == 0 {
                return Err(Error::ItemOutOfRange { item: 0, n: 0 });
            }
            if items[..i].contains(&a) {
                return Err(Error::DuplicateItem { item: a });
            }
        }
        Ok(Constraint(items))
    }

    pub fn pair(a: u32, b: u32) -> Result<Self> {
        Constraint::new(vec![a, b])
    }

    pub(crate) fn from_items_unchecked(items: Vec<u32>) -> Self {
        Constraint(items)
    }

    pub fn items(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, item: u32) -> bool {
        self.0.contains(&item)
    }

    /// Checks every item lies in `1..=n`.
    pub fn check_range(&self, n: usize) -> Result<()> {
        match self.0.iter().find(|&&a| a as usize > n) {
            Some(&item) => Err(Error::ItemOutOfRange { item, n }),
            None => Ok(()),
        }
    }

    /// True if `self` occurs as a (not necessarily contiguous) subsequence
    /// of `other`.
    pub fn is_subsequence_of(&self, other: &Constraint) -> bool {
        let mut rest = other.0.iter();
        self.0.iter().all(|a| rest.any(|b| b == a))
    }

    /// All `n(n-1)` ordered pairs, in the order they arise by inserting a
    /// second item into each single-item sequence `(1), (2), ...`: for
    /// every `a < b` in lexicographic order, `(b, a)` then `(a, b)`.
    pub fn all_pairs(n: usize) -> Vec<Constraint> {
        let n = n as u32;
        let mut out = Vec::with_capacity((n * n.saturating_sub(1)) as usize);
        for a in 1..=n {
            for b in a + 1..=n {
                out.push(Constraint(vec![b, a]));
                out.push(Constraint(vec![a, b]));
            }
        }
        out
    }
}

impl<'de> Deserialize<'de> for Constraint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let items = Vec::<u32>::deserialize(d)?;
        Constraint::new(items).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Permutations of a common item set with real-valued targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_items: usize,
    perms: Vec<Permutation>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(n_items: usize, rows: Vec<(Permutation, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut perms = Vec::with_capacity(rows.len());
        let mut targets = Vec::with_capacity(rows.len());
        for (perm, y) in rows {
            if perm.len() != n_items {
                return Err(Error::WrongLength {
                    expected: n_items,
                    found: perm.len(),
                });
            }
            if !y.is_finite() {
                return Err(Error::NonFiniteTarget(y));
            }
            perms.push(perm);
            targets.push(y);
        }
        Ok(Dataset {
            n_items,
            perms,
            targets,
        })
    }

    /// Convenience constructor from raw item lists.
    pub fn from_rows(n_items: usize, rows: &[(Vec<u32>, f64)]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|(items, y)| Ok((validate_permutation(items, n_items)?, *y)))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(n_items, rows)
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    pub fn perms(&self) -> &[Permutation] {
        &self.perms
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn rows(&self) -> impl Iterator<Item = (&Permutation, f64)> + '_ {
        self.perms.iter().zip(self.targets.iter().copied())
    }

    /// Arithmetic mean of the targets; exactly the common value when all
    /// targets are equal.
    pub fn mean_target(&self) -> f64 {
        let first = self.targets[0];
        if self.targets.iter().all(|&y| y == first) {
            return first;
        }
        self.targets.iter().sum::<f64>() / self.targets.len() as f64
    }

    /// Subset by row index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let rows = indices
            .iter()
            .map(|&i| (self.perms[i].clone(), self.targets[i]))
            .collect();
        Dataset::new(self.n_items, rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub constraint: Constraint,
    pub beta: f64,
}

/// Baseline `mu` plus weighted constraint indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub mu: f64,
    terms: Vec<Term>,
}

impl Model {
    pub fn constant(mu: f64) -> Self {
        Model {
            mu,
            terms: Vec::new(),
        }
    }

    pub fn with_terms(mu: f64, terms: Vec<Term>) -> Result<Self> {
        let mut model = Model::constant(mu);
        for t in terms {
            model.push(t.constraint, t.beta)?;
        }
        Ok(model)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, c: &Constraint) -> bool {
        self.terms.iter().any(|t| &t.constraint == c)
    }

    pub fn push(&mut self, constraint: Constraint, beta: f64) -> Result<()> {
        if self.contains(&constraint) {
            return Err(Error::DuplicateConstraint(constraint.to_string()));
        }
        self.terms.push(Term { constraint, beta });
        Ok(())
    }

    /// Highest item id referenced by any term.
    pub fn max_item(&self) -> u32 {
        self.terms
            .iter()
            .flat_map(|t| t.constraint.items().iter().copied())
            .max()
            .unwrap_or(0)
    }
}

pub const MAX_L: usize = 20;
pub const MIN_LEARNING_RATE: f64 = 1e-6;
pub const MAX_LEARNING_RATE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Constraints added per step.
    pub l: usize,
    pub learning_rate: f64,
}

impl Hyperparams {
    pub fn new(l: usize, learning_rate: f64) -> Result<Self> {
        let hp = Hyperparams { l, learning_rate };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_L).contains(&self.l) {
            return Err(Error::InvalidHyperparams(format!(
                "l must be an integer in 1..={MAX_L}, got {}",
                self.l
            )));
        }
        if !(MIN_LEARNING_RATE..=MAX_LEARNING_RATE).contains(&self.learning_rate) {
            return Err(Error::InvalidHyperparams(format!(
                "learning rate must lie in [{MIN_LEARNING_RATE}, {MAX_LEARNING_RATE}], got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}
