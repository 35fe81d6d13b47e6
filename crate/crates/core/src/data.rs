//! Dataset files, seeded splits, the planted-model generator and model files.
//!
//! CSV layout: a header `pos_1,...,pos_n,target`, then one row per
//! permutation with the `n` 1-based item ids in placement order followed by
//! the target. UTF-8, LF line endings, no quoting.
//!
//! Randomness uses ChaCha8 seeded with `seed_from_u64(seed)`. Permutations
//! and split shuffles draw from stream 0, Gaussian noise from stream 1.
//! Shuffles are Fisher-Yates from the last index down, drawing
//! `j` uniformly from `0..=i`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::fulfills_in_range;
use crate::types::{validate_permutation, Constraint, Dataset, Model, Permutation, Term};

const PERM_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut lines = text
        .split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    let (_, header) = lines
        .next()
        .filter(|(_, h)| !h.is_empty())
        .ok_or_else(|| Error::Malformed("missing header".into()).at_line(1))?;
    let cols: Vec<&str> = header.split(',').collect();
    let n = cols.len().saturating_sub(1);
    let header_ok = n >= 1
        && cols[n] == "target"
        && cols[..n]
            .iter()
            .enumerate()
            .all(|(i, c)| *c == format!("pos_{}", i + 1));
    if !header_ok {
        return Err(Error::Malformed(format!("bad header {header:?}")).at_line(1));
    }

    let mut rows = Vec::new();
    let mut finished = false;
    for (lineno, line) in lines {
        if line.is_empty() {
            finished = true;
            continue;
        }
        if finished {
            return Err(Error::Malformed("blank line inside data".into()).at_line(lineno - 1));
        }
        rows.push(parse_row(line, n).map_err(|e| e.at_line(lineno))?);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(n, rows)
}

fn parse_row(line: &str, n: usize) -> Result<(Permutation, f64)> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != n + 1 {
        return Err(Error::WrongLength {
            expected: n,
            found: fields.len().saturating_sub(1),
        });
    }
    let items = fields[..n]
        .iter()
        .map(|f| {
            f.parse::<u32>()
                .map_err(|_| Error::Malformed(format!("bad item id {f:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let perm = validate_permutation(&items, n)?;
    let target: f64 = fields[n]
        .parse()
        .map_err(|_| Error::Malformed(format!("bad target {:?}", fields[n])))?;
    if !target.is_finite() {
        return Err(Error::NonFiniteTarget(target));
    }
    Ok((perm, target))
}

pub fn to_csv(dataset: &Dataset) -> String {
    let n = dataset.n_items();
    let mut out = String::new();
    for i in 1..=n {
        let _ = write!(out, "pos_{i},");
    }
    out.push_str("target\n");
    for (perm, y) in dataset.rows() {
        for item in perm.items() {
            let _ = write!(out, "{item},");
        }
        let _ = writeln!(out, "{y}");
    }
    out
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_csv(&fs::read_to_string(path)?)
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_csv(dataset))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

fn shuffle<T>(rng: &mut ChaCha8Rng, xs: &mut [T]) {
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
}

/// Seeded shuffle, then contiguous train/validation/test blocks. Rows past
/// the requested total are dropped.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    if spec.train == 0 || spec.validation == 0 || spec.test == 0 {
        return Err(Error::InvalidSpec("split sizes must be positive".into()));
    }
    let needed = spec.train + spec.validation + spec.test;
    if needed > dataset.len() {
        return Err(Error::InsufficientRows {
            needed,
            available: dataset.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(PERM_STREAM);
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    shuffle(&mut rng, &mut idx);
    let (train, rest) = idx.split_at(spec.train);
    let (validation, rest) = rest.split_at(spec.validation);
    let test = &rest[..spec.test];
    Ok(Splits {
        train: dataset.select(train)?,
        validation: dataset.select(validation)?,
        test: dataset.select(test)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTerm {
    pub constraint: Constraint,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub n_items: usize,
    pub m_rows: usize,
    pub mu0: f64,
    #[serde(default)]
    pub planted: Vec<PlantedTerm>,
    #[serde(default)]
    pub noise_sd: f64,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n_items == 0 || self.n_items > u32::MAX as usize {
            return bad(format!("n_items out of range: {}", self.n_items));
        }
        if self.m_rows == 0 {
            return bad("m_rows must be positive".into());
        }
        if !self.mu0.is_finite() {
            return bad("mu0 must be finite".into());
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad("noise_sd must be finite and non-negative".into());
        }
        for (i, t) in self.planted.iter().enumerate() {
            t.constraint
                .check_range(self.n_items)
                .map_err(|e| Error::InvalidSpec(e.to_string()))?;
            if !t.coefficient.is_finite() {
                return bad(format!("coefficient of {} is not finite", t.constraint));
            }
            if self.planted[..i]
                .iter()
                .any(|u| u.constraint == t.constraint)
            {
                return bad(format!("constraint {} planted twice", t.constraint));
            }
        }
        Ok(())
    }

    /// The planted model as a [`Model`].
    pub fn model(&self) -> Result<Model> {
        Model::with_terms(
            self.mu0,
            self.planted
                .iter()
                .map(|t| Term {
                    constraint: t.constraint.clone(),
                    beta: t.coefficient,
                })
                .collect(),
        )
    }
}

/// Uniform random permutations labelled by the planted model plus Gaussian
/// noise.
pub fn generate_planted(spec: &PlantedSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n_items;
    let mut perm_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    perm_rng.set_stream(PERM_STREAM);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(NOISE_STREAM);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::InvalidSpec(e.to_string()))?;

    let mut rows = Vec::with_capacity(spec.m_rows);
    let mut items: Vec<u32> = (1..=n as u32).collect();
    for _ in 0..spec.m_rows {
        shuffle(&mut perm_rng, &mut items);
        let perm = validate_permutation(&items, n)?;
        let mut y = spec.mu0;
        for t in &spec.planted {
            if fulfills_in_range(&perm, &t.constraint) {
                y += t.coefficient;
            }
        }
        if spec.noise_sd > 0.0 {
            y += noise.sample(&mut noise_rng);
        }
        rows.push((perm, y));
    }
    Dataset::new(n, rows)
}

pub const MODEL_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    format: u32,
    mu: f64,
    terms: Vec<ModelFileTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFileTerm {
    items: Constraint,
    beta: f64,
}

pub fn model_to_json(model: &Model) -> String {
    let file = ModelFile {
        format: MODEL_FORMAT,
        mu: model.mu,
        terms: model
            .terms()
            .iter()
            .map(|t| ModelFileTerm {
                items: t.constraint.clone(),
                beta: t.beta,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str) -> Result<Model> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Malformed(format!(
            "unsupported model format {}",
            file.format
        )));
    }
    Model::with_terms(
        file.mu,
        file.terms
            .into_iter()
            .map(|t| Term {
                constraint: t.items,
                beta: t.beta,
            })
            .collect(),
    )
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_json(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    model_from_json(&fs::read_to_string(path)?)
}
