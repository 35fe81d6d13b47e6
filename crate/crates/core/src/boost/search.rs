//! Level-wise search over the constraint lattice with residual-mass pruning,
//! and the automatic boosting loop built on it.
//!
//! Level 2 holds every ordered pair in [`Constraint::all_pairs`] order. Level `k + 1`
//! holds the children of the level-`k` nodes that survived pruning, in order
//! of first discovery. A whole level is scored before any of its nodes is
//! expanded, so the pruning threshold seen by a node does not depend on how
//! the scoring was scheduled.
//!
//! The winner is the first constraint in enumeration order whose gradient is
//! within the tie tolerance of the maximum. A node is expanded only if its
//! upper bound is within that tolerance of the best score seen so far; the
//! bound shrinks along the lattice, so every possible winner keeps all of
//! its ancestors and therefore its enumeration rank. The result is the same
//! as scoring every constraint up to `max_len`.

use std::collections::HashSet;

use rayon::prelude::*;

use super::{
    generate_children, gradient_unchecked, upper_bound_unchecked, Residuals, ScoredConstraint,
};
use crate::error::{Error, Result};
use crate::featurize::{support_vector, support_within, SupportVector};
use crate::types::{Constraint, Dataset, Model, MAX_LEARNING_RATE, MIN_LEARNING_RATE};

struct Node {
    constraint: Constraint,
    support: SupportVector,
}

pub fn search_best_constraint(
    dataset: &Dataset,
    delta: &Residuals,
    max_len: usize,
) -> Result<ScoredConstraint> {
    search_best_constraint_excluding(dataset, delta, max_len, &HashSet::new())
}

/// Like [`search_best_constraint`], but never returns a constraint in
/// `exclude`. Excluded nodes are still expanded.
pub fn search_best_constraint_excluding(
    dataset: &Dataset,
    delta: &Residuals,
    max_len: usize,
    exclude: &HashSet<Constraint>,
) -> Result<ScoredConstraint> {
    if max_len < 2 {
        return Err(Error::InvalidHyperparams(format!(
            "max_len must be at least 2, got {max_len}"
        )));
    }
    if delta.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            left: dataset.len(),
            right: delta.len(),
        });
    }
    let n = dataset.n_items();
    let max_len = max_len.min(n);

    let mut level: Vec<Node> = Constraint::all_pairs(n)
        .into_par_iter()
        .map(|constraint| {
            let support = support_vector(dataset, &constraint).expect("pairs are in range");
            Node {
                constraint,
                support,
            }
        })
        .collect();

    let eps = delta.tie_epsilon();
    // Anything within `eps` of the running maximum may still win; `top`
    // only grows, so contenders are kept in enumeration order and filtered
    // once at the end.
    let mut top = 0.0f64;
    let mut contenders: Vec<ScoredConstraint> = Vec::new();
    let mut len = 2;

    loop {
        let grads: Vec<_> = level
            .par_iter()
            .map(|node| gradient_unchecked(&node.support, delta))
            .collect();
        for (node, g) in level.iter().zip(&grads) {
            if g.tau <= eps || g.tau < top - eps || exclude.contains(&node.constraint) {
                continue;
            }
            if g.tau > top {
                top = g.tau;
                contenders.retain(|c| c.tau >= top - eps);
            }
            contenders.push(ScoredConstraint {
                constraint: node.constraint.clone(),
                tau: g.tau,
                signed_sum: g.signed_sum,
                support: node.support.clone(),
            });
        }
        if len >= max_len {
            break;
        }

        let bounds: Vec<f64> = level
            .par_iter()
            .map(|node| upper_bound_unchecked(&node.support, delta))
            .collect();
        let mut seen = HashSet::new();
        let mut pending: Vec<(Constraint, usize)> = Vec::new();
        for (pi, (node, &bound)) in level.iter().zip(&bounds).enumerate() {
            if bound <= eps || bound < top - eps {
                continue;
            }
            for child in generate_children(n, &node.constraint)? {
                if seen.insert(child.clone()) {
                    pending.push((child, pi));
                }
            }
        }
        if pending.is_empty() {
            break;
        }
        let parents = &level;
        let next: Vec<Node> = pending
            .into_par_iter()
            .map(|(constraint, pi)| {
                let support = support_within(dataset, &constraint, &parents[pi].support);
                Node {
                    constraint,
                    support,
                }
            })
            .collect();
        level = next;
        len += 1;
    }

    contenders
        .into_iter()
        .find(|c| c.tau >= top - eps)
        .ok_or(Error::NoViableCandidate)
}

/// One automatic boosting step.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostStep {
    pub constraint: Constraint,
    pub signed_sum: f64,
    pub count: usize,
    pub beta: f64,
    /// Training sum of squared residuals after the step.
    pub sse: f64,
}

/// Fits `mu` to the target mean, then adds up to `l` constraints greedily.
pub fn fit_auto(dataset: &Dataset, l: usize, learning_rate: f64, max_len: usize) -> Result<Model> {
    fit_auto_traced(dataset, l, learning_rate, max_len).map(|(m, _)| m)
}

pub fn fit_auto_traced(
    dataset: &Dataset,
    l: usize,
    learning_rate: f64,
    max_len: usize,
) -> Result<(Model, Vec<BoostStep>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if l == 0 {
        return Err(Error::InvalidHyperparams("l must be at least 1".into()));
    }
    if !(MIN_LEARNING_RATE..=MAX_LEARNING_RATE).contains(&learning_rate) {
        return Err(Error::InvalidHyperparams(format!(
            "learning rate must lie in [{MIN_LEARNING_RATE}, {MAX_LEARNING_RATE}], got {learning_rate}"
        )));
    }
    let mut model = Model::constant(dataset.mean_target());
    let mut delta = Residuals::new(dataset.targets().iter().map(|y| y - model.mu).collect());
    let mut used = HashSet::new();
    let mut steps = Vec::with_capacity(l);

    for _ in 0..l {
        let best = match search_best_constraint_excluding(dataset, &delta, max_len, &used) {
            Ok(b) => b,
            Err(Error::NoViableCandidate) => break,
            Err(e) => return Err(e),
        };
        let count = best.support.count();
        let beta = learning_rate * best.signed_sum / count as f64;
        delta.subtract_on(&best.support, beta);
        used.insert(best.constraint.clone());
        model.push(best.constraint.clone(), beta)?;
        steps.push(BoostStep {
            constraint: best.constraint,
            signed_sum: best.signed_sum,
            count,
            beta,
            sse: delta.sse(),
        });
    }
    Ok((model, steps))
}
