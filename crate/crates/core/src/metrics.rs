//! Regression metrics and the constant-mean baseline.

use serde::{Deserialize, Serialize};

use crate::boost::predict_all;
use crate::error::{Error, Result};
use crate::types::{Dataset, Model};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub mse: f64,
    /// `None` when the evaluated targets are constant.
    pub r2: Option<f64>,
    pub n: usize,
}

fn check(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Empty);
    }
    Ok(())
}

pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check(y_true, y_pred)?;
    let sum: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / y_true.len() as f64)
}

pub fn mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check(y_true, y_pred)?;
    let sum: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / y_true.len() as f64)
}

/// Coefficient of determination against the mean of `y_true`.
pub fn r2(y_true: &[f64], y_pred: &[f64]) -> Result<Option<f64>> {
    check(y_true, y_pred)?;
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Ok(None);
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(Some(1.0 - ss_res / ss_tot))
}

pub fn report(y_true: &[f64], y_pred: &[f64]) -> Result<MetricsReport> {
    Ok(MetricsReport {
        mae: mae(y_true, y_pred)?,
        mse: mse(y_true, y_pred)?,
        r2: r2(y_true, y_pred)?,
        n: y_true.len(),
    })
}

pub fn evaluate(model: &Model, dataset: &Dataset) -> Result<MetricsReport> {
    let preds = predict_all(model, dataset)?;
    report(dataset.targets(), &preds)
}

/// Always predicts the training-target mean.
pub fn naive_baseline(train: &Dataset) -> Result<Model> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Model::constant(train.mean_target()))
}
