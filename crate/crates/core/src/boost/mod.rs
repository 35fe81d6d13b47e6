//! Gradient boosting over constraint features.
//!
//! Candidates are scored by the absolute residual mass on their support
//! (`tau = |sum of residuals over rows that fulfill the constraint|`), the
//! Gauss-Southwell rule for binary features. Coefficients are the
//! learning-rate-scaled mean residual over the support, which is the exact
//! squared-error line search for an indicator column.

mod search;

pub use search::{
    fit_auto, fit_auto_traced, search_best_constraint, search_best_constraint_excluding, BoostStep,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::featurize::{fulfills_in_range, support_vector, SupportVector};
use crate::types::{Constraint, Dataset, Model, Permutation};

/// Gradients closer than this fraction of the total residual mass
/// `sum |delta_i|` count as tied, and gradients at or below it count as
/// zero.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Per-row residuals `y - prediction`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals(Vec<f64>);

impl Residuals {
    pub fn new(values: Vec<f64>) -> Self {
        Residuals(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Absolute tie threshold for gradients computed on these residuals.
    pub fn tie_epsilon(&self) -> f64 {
        TIE_TOLERANCE * self.0.iter().map(|d| d.abs()).sum::<f64>()
    }

    pub fn sse(&self) -> f64 {
        self.0.iter().map(|d| d * d).sum()
    }

    /// Applies a new term with coefficient `beta` on `support`.
    pub(crate) fn subtract_on(&mut self, support: &SupportVector, beta: f64) {
        for i in support.ones() {
            self.0[i] -= beta;
        }
    }
}

/// Signed and absolute gradient of one constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub signed_sum: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredConstraint {
    pub constraint: Constraint,
    pub tau: f64,
    pub signed_sum: f64,
    pub support: SupportVector,
}

fn check_lengths(z: &SupportVector, delta: &Residuals) -> Result<()> {
    if z.len() != delta.len() {
        return Err(Error::LengthMismatch {
            left: z.len(),
            right: delta.len(),
        });
    }
    Ok(())
}

fn check_model_range(model: &Model, n: usize) -> Result<()> {
    let max = model.max_item();
    if max as usize > n {
        return Err(Error::ItemOutOfRange { item: max, n });
    }
    Ok(())
}

pub fn predict(model: &Model, perm: &Permutation) -> Result<f64> {
    check_model_range(model, perm.len())?;
    Ok(predict_in_range(model, perm))
}

pub(crate) fn predict_in_range(model: &Model, perm: &Permutation) -> f64 {
    model
        .terms()
        .iter()
        .filter(|t| fulfills_in_range(perm, &t.constraint))
        .fold(model.mu, |acc, t| acc + t.beta)
}

/// Predictions for every row of `dataset`.
pub fn predict_all(model: &Model, dataset: &Dataset) -> Result<Vec<f64>> {
    check_model_range(model, dataset.n_items())?;
    Ok(dataset
        .perms()
        .iter()
        .map(|p| predict_in_range(model, p))
        .collect())
}

pub fn residuals(model: &Model, dataset: &Dataset) -> Result<Residuals> {
    let preds = predict_all(model, dataset)?;
    Ok(Residuals(
        dataset
            .targets()
            .iter()
            .zip(preds)
            .map(|(y, p)| y - p)
            .collect(),
    ))
}

pub fn gradient_score(z: &SupportVector, delta: &Residuals) -> Result<Gradient> {
    check_lengths(z, delta)?;
    Ok(gradient_unchecked(z, delta))
}

#[inline]
pub(crate) fn gradient_unchecked(z: &SupportVector, delta: &Residuals) -> Gradient {
    let signed_sum: f64 = z.ones().map(|i| delta.0[i]).sum();
    Gradient {
        signed_sum,
        tau: signed_sum.abs(),
    }
}

/// Larger of the positive and negative residual mass on the support. No
/// constraint whose support is contained in `z` can score above it.
pub fn upper_bound(z: &SupportVector, delta: &Residuals) -> Result<f64> {
    check_lengths(z, delta)?;
    Ok(upper_bound_unchecked(z, delta))
}

pub(crate) fn upper_bound_unchecked(z: &SupportVector, delta: &Residuals) -> f64 {
    let (mut pos, mut neg) = (0.0f64, 0.0f64);
    for i in z.ones() {
        let d = delta.0[i];
        if d > 0.0 {
            pos += d;
        } else {
            neg -= d;
        }
    }
    pos.max(neg)
}

pub fn fit_coefficient(z: &SupportVector, delta: &Residuals, learning_rate: f64) -> Result<f64> {
    check_lengths(z, delta)?;
    if z.count() == 0 {
        return Ok(0.0);
    }
    let g = gradient_unchecked(z, delta);
    Ok(learning_rate * g.signed_sum / z.count() as f64)
}

/// Scores every candidate against `delta`, dropping those with empty
/// support. Input order is preserved.
pub fn score_candidates(
    candidates: &[Constraint],
    dataset: &Dataset,
    delta: &Residuals,
) -> Result<Vec<ScoredConstraint>> {
    if delta.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            left: dataset.len(),
            right: delta.len(),
        });
    }
    let scored: Vec<Option<ScoredConstraint>> = candidates
        .par_iter()
        .map(|c| {
            let support = support_vector(dataset, c)?;
            if support.count() == 0 {
                return Ok(None);
            }
            let g = gradient_unchecked(&support, delta);
            Ok(Some(ScoredConstraint {
                constraint: c.clone(),
                tau: g.tau,
                signed_sum: g.signed_sum,
                support,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(scored.into_iter().flatten().collect())
}

/// The `l` candidates with the largest gradient. Each pick takes the
/// earliest remaining candidate whose `tau` is within the tie tolerance of
/// the largest remaining `tau`.
pub fn select_top_l_scored(
    candidates: &[Constraint],
    dataset: &Dataset,
    delta: &Residuals,
    l: usize,
) -> Result<Vec<ScoredConstraint>> {
    if l == 0 {
        return Err(Error::InvalidHyperparams("l must be at least 1".into()));
    }
    let mut remaining = score_candidates(candidates, dataset, delta)?;
    if remaining.is_empty() {
        return Err(Error::NoViableCandidate);
    }
    let eps = delta.tie_epsilon();
    let mut picked = Vec::with_capacity(l.min(remaining.len()));
    while picked.len() < l && !remaining.is_empty() {
        let top = remaining
            .iter()
            .map(|s| s.tau)
            .fold(f64::NEG_INFINITY, f64::max);
        let at = remaining
            .iter()
            .position(|s| s.tau >= top - eps)
            .expect("maximum is attained");
        picked.push(remaining.remove(at));
    }
    Ok(picked)
}

pub fn select_top_l(
    candidates: &[Constraint],
    dataset: &Dataset,
    delta: &Residuals,
    l: usize,
) -> Result<Vec<Constraint>> {
    Ok(select_top_l_scored(candidates, dataset, delta, l)?
        .into_iter()
        .map(|s| s.constraint)
        .collect())
}

/// Every one-item insertion into `parent`: items ascending, then insertion
/// positions ascending. Yields `(n - k)(k + 1)` children for `k = |parent|`.
pub fn generate_children(n: usize, parent: &Constraint) -> Result<Vec<Constraint>> {
    parent.check_range(n)?;
    let k = parent.len();
    if k >= n {
        return Err(Error::SaturatedConstraint);
    }
    let items = parent.items();
    let mut out = Vec::with_capacity((n - k) * (k + 1));
    for c in 1..=n as u32 {
        if parent.contains(c) {
            continue;
        }
        for pos in 0..=k {
            let mut child = Vec::with_capacity(k + 1);
            child.extend_from_slice(&items[..pos]);
            child.push(c);
            child.extend_from_slice(&items[pos..]);
            out.push(Constraint::from_items_unchecked(child));
        }
    }
    Ok(out)
}

/// Appends `new_constraints` one after another, each fitted on the residuals
/// of the model built so far.
pub fn fit_sequential(
    model: &Model,
    new_constraints: &[Constraint],
    dataset: &Dataset,
    learning_rate: f64,
) -> Result<Model> {
    for (i, c) in new_constraints.iter().enumerate() {
        if model.contains(c) || new_constraints[..i].contains(c) {
            return Err(Error::DuplicateConstraint(c.to_string()));
        }
    }
    let mut out = model.clone();
    let mut delta = residuals(model, dataset)?;
    for c in new_constraints {
        let support = support_vector(dataset, c)?;
        let beta = fit_coefficient(&support, &delta, learning_rate)?;
        delta.subtract_on(&support, beta);
        out.push(c.clone(), beta)?;
    }
    Ok(out)
}
