//! Interactive refinement sessions.
//!
//! A session keeps a forest of constraint nodes. Active nodes are the terms
//! of the current model; an expanded node stays in the forest, inactive,
//! with its last coefficient, above the children that replaced it. Every
//! action appends an [`Iteration`] holding a full copy of the forest, so
//! any earlier state can be restored without replaying.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::boost::{fit_sequential, generate_children, predict_all, residuals, select_top_l};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, mae, MetricsReport};
use crate::types::{Constraint, Dataset, Hyperparams, Model, Term};

pub type NodeId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintNode {
    pub id: NodeId,
    #[serde(rename = "items")]
    pub constraint: Constraint,
    pub parent_id: Option<NodeId>,
    pub child_ids: Vec<NodeId>,
    pub active: bool,
    /// Coefficient; only counted in the model while `active`.
    pub beta: f64,
}

/// Nodes ordered by id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Forest {
    nodes: Vec<ConstraintNode>,
}

impl Forest {
    pub fn nodes(&self) -> &[ConstraintNode] {
        &self.nodes
    }

    pub fn get(&self, id: NodeId) -> Option<&ConstraintNode> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    fn get_mut(&mut self, id: NodeId) -> Option<&mut ConstraintNode> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(move |i| &mut self.nodes[i])
    }

    // ids are handed out in increasing order, so pushing keeps the sort
    fn insert(&mut self, node: ConstraintNode) {
        debug_assert!(self.nodes.last().is_none_or(|n| n.id < node.id));
        self.nodes.push(node);
    }

    pub fn contains_constraint(&self, c: &Constraint) -> bool {
        self.nodes.iter().any(|n| &n.constraint == c)
    }

    pub fn active(&self) -> impl Iterator<Item = &ConstraintNode> {
        self.nodes.iter().filter(|n| n.active)
    }

    /// All nodes below `id`, excluding `id` itself.
    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self
            .get(id)
            .map(|n| n.child_ids.clone())
            .unwrap_or_default();
        while let Some(next) = stack.pop() {
            out.push(next);
            if let Some(n) = self.get(next) {
                stack.extend(n.child_ids.iter().copied());
            }
        }
        out
    }

    /// The model formed by the active nodes, in id order.
    pub fn model(&self, mu: f64) -> Model {
        Model::with_terms(
            mu,
            self.active()
                .map(|n| Term {
                    constraint: n.constraint.clone(),
                    beta: n.beta,
                })
                .collect(),
        )
        .expect("forest holds no duplicate constraints")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Init,
    Expand { node_id: NodeId },
    Collapse { node_id: NodeId },
    Simplify,
    Restart,
    Revert { source_index: usize },
    Finalize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub index: usize,
    pub action: Action,
    pub hyperparams: Hyperparams,
    pub forest: Forest,
    pub model: Model,
    pub val_mae: f64,
}

/// One entry of the per-session action log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub timestamp_ms: u128,
    pub action: Action,
    /// Iteration appended by the action, if any.
    pub iteration: Option<usize>,
    /// Error code when the action was rejected.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Session {
    train: Dataset,
    validation: Dataset,
    test: Dataset,
    hyperparams: Hyperparams,
    history: Vec<Iteration>,
    best_index: usize,
    finalized: bool,
    test_report: Option<MetricsReport>,
    next_id: NodeId,
    log: Vec<LogRecord>,
}

impl Session {
    /// Starts a session from the `l` best pair constraints.
    pub fn create(
        train: Dataset,
        validation: Dataset,
        test: Dataset,
        hyperparams: Hyperparams,
    ) -> Result<Session> {
        if train.n_items() != validation.n_items() || train.n_items() != test.n_items() {
            return Err(Error::IncompatibleDatasets);
        }
        if train.n_items() < 2 {
            return Err(Error::InvalidSpec(
                "sessions need at least two items".into(),
            ));
        }
        hyperparams.validate()?;
        let mut session = Session {
            train,
            validation,
            test,
            hyperparams,
            history: Vec::new(),
            best_index: 0,
            finalized: false,
            test_report: None,
            next_id: 0,
            log: Vec::new(),
        };
        session.run(Action::Init, |s| s.initial_forest())?;
        Ok(session)
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn validation(&self) -> &Dataset {
        &self.validation
    }

    pub fn test(&self) -> &Dataset {
        &self.test
    }

    pub fn hyperparams(&self) -> Hyperparams {
        self.hyperparams
    }

    pub fn history(&self) -> &[Iteration] {
        &self.history
    }

    pub fn current(&self) -> &Iteration {
        self.history.last().expect("history is never empty")
    }

    pub fn best_index(&self) -> usize {
        self.best_index
    }

    pub fn best(&self) -> &Iteration {
        &self.history[self.best_index]
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn test_report(&self) -> Option<&MetricsReport> {
        self.test_report.as_ref()
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn mu(&self) -> f64 {
        self.train.mean_target()
    }

    pub fn val_mae(&self, model: &Model) -> Result<f64> {
        let preds = predict_all(model, &self.validation)?;
        mae(self.validation.targets(), &preds)
    }

    /// Deactivates an active node and attaches its `l` best children.
    pub fn expand(&mut self, node_id: NodeId) -> Result<&Iteration> {
        self.run(Action::Expand { node_id }, |s| {
            let mut forest = s.current().forest.clone();
            let n = s.train.n_items();
            let node = forest.get(node_id).ok_or(Error::UnknownNode(node_id))?;
            if !node.active {
                return Err(Error::NodeInactive(node_id));
            }
            let parent = node.constraint.clone();
            let candidates: Vec<Constraint> = generate_children(n, &parent)?
                .into_iter()
                .filter(|c| !forest.contains_constraint(c))
                .collect();
            if candidates.is_empty() {
                return Err(Error::NoViableCandidate);
            }
            forest.get_mut(node_id).expect("checked").active = false;

            let mu = s.mu();
            let base = forest.model(mu);
            let delta = residuals(&base, &s.train)?;
            let chosen = select_top_l(&candidates, &s.train, &delta, s.hyperparams.l)?;
            let fitted = fit_sequential(&base, &chosen, &s.train, s.hyperparams.learning_rate)?;
            let new_terms = &fitted.terms()[base.len()..];

            let mut child_ids = Vec::with_capacity(new_terms.len());
            for term in new_terms {
                let id = s.fresh_id();
                child_ids.push(id);
                forest.insert(ConstraintNode {
                    id,
                    constraint: term.constraint.clone(),
                    parent_id: Some(node_id),
                    child_ids: Vec::new(),
                    active: true,
                    beta: term.beta,
                });
            }
            forest
                .get_mut(node_id)
                .expect("checked")
                .child_ids
                .extend(child_ids);
            Ok(forest)
        })
    }

    /// Reactivates an inactive node with the coefficient it had when it was
    /// expanded and removes everything below it.
    pub fn collapse(&mut self, node_id: NodeId) -> Result<&Iteration> {
        self.run(Action::Collapse { node_id }, |s| {
            let mut forest = s.current().forest.clone();
            let node = forest.get(node_id).ok_or(Error::UnknownNode(node_id))?;
            if node.active {
                return Err(Error::NodeActive(node_id));
            }
            let doomed = forest.descendants(node_id);
            forest.nodes.retain(|n| !doomed.contains(&n.id));
            let node = forest.get_mut(node_id).expect("checked");
            node.child_ids.clear();
            node.active = true;
            Ok(forest)
        })
    }

    /// Keeps the `l` active nodes with the largest |beta| as new roots and
    /// refits them in that order from the baseline.
    pub fn simplify(&mut self) -> Result<&Iteration> {
        self.run(Action::Simplify, |s| {
            let forest = &s.current().forest;
            let mut keep: Vec<&ConstraintNode> = forest.active().collect();
            if keep.is_empty() {
                return Err(Error::EmptyModel);
            }
            // ids ascend, so a stable sort breaks ties by lower id
            keep.sort_by(|a, b| b.beta.abs().total_cmp(&a.beta.abs()));
            keep.truncate(s.hyperparams.l);

            let order: Vec<Constraint> = keep.iter().map(|n| n.constraint.clone()).collect();
            let fitted = fit_sequential(
                &Model::constant(s.mu()),
                &order,
                &s.train,
                s.hyperparams.learning_rate,
            )?;
            let mut roots: Vec<ConstraintNode> = keep
                .iter()
                .zip(fitted.terms())
                .map(|(n, t)| ConstraintNode {
                    id: n.id,
                    constraint: n.constraint.clone(),
                    parent_id: None,
                    child_ids: Vec::new(),
                    active: true,
                    beta: t.beta,
                })
                .collect();
            roots.sort_by_key(|n| n.id);
            Ok(Forest { nodes: roots })
        })
    }

    /// Replaces the hyperparameters and starts over from pair constraints.
    /// History is kept.
    pub fn restart(&mut self, hyperparams: Hyperparams) -> Result<&Iteration> {
        self.run(Action::Restart, |s| {
            hyperparams.validate()?;
            s.hyperparams = hyperparams;
            s.initial_forest()
        })
    }

    /// Appends a copy of `history[source_index]`, including its
    /// hyperparameters.
    pub fn revert(&mut self, source_index: usize) -> Result<&Iteration> {
        let action = Action::Revert { source_index };
        let outcome = if self.finalized {
            Err(Error::AlreadyFinalized)
        } else {
            match self.history.get(source_index) {
                None => Err(Error::IndexOutOfRange {
                    index: source_index,
                    len: self.history.len(),
                }),
                Some(src) => {
                    let mut copy = src.clone();
                    copy.index = self.history.len();
                    copy.action = action;
                    self.hyperparams = copy.hyperparams;
                    Ok(copy)
                }
            }
        };
        self.commit(action, outcome)
    }

    /// Scores the best iteration's model on the test split and locks the
    /// session.
    pub fn finalize(&mut self) -> Result<MetricsReport> {
        let outcome = if self.finalized {
            Err(Error::AlreadyFinalized)
        } else {
            evaluate(&self.best().model, &self.test)
        };
        match outcome {
            Ok(report) => {
                self.finalized = true;
                self.test_report = Some(report);
                self.record(Action::Finalize, None, None);
                Ok(report)
            }
            Err(e) => {
                self.record(Action::Finalize, None, Some(e.code()));
                Err(e)
            }
        }
    }

    pub fn export(&self) -> SessionExport<'_> {
        SessionExport {
            format: EXPORT_FORMAT,
            n_items: self.train.n_items(),
            split_sizes: [self.train.len(), self.validation.len(), self.test.len()],
            mu: self.mu(),
            hyperparams: self.hyperparams,
            history: &self.history,
            best_index: self.best_index,
            finalized: self.finalized,
            test_metrics: self.test_report,
            log: &self.log,
        }
    }

    fn fresh_id(&mut self) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn initial_forest(&mut self) -> Result<Forest> {
        let base = Model::constant(self.mu());
        let delta = residuals(&base, &self.train)?;
        let pairs = Constraint::all_pairs(self.train.n_items());
        let chosen = select_top_l(&pairs, &self.train, &delta, self.hyperparams.l)?;
        let fitted = fit_sequential(&base, &chosen, &self.train, self.hyperparams.learning_rate)?;
        let mut forest = Forest::default();
        for term in fitted.terms() {
            let id = self.fresh_id();
            forest.insert(ConstraintNode {
                id,
                constraint: term.constraint.clone(),
                parent_id: None,
                child_ids: Vec::new(),
                active: true,
                beta: term.beta,
            });
        }
        Ok(forest)
    }

    /// Runs a forest-producing step and appends its iteration. Failed steps
    /// leave the session untouched apart from the log.
    fn run<F>(&mut self, action: Action, step: F) -> Result<&Iteration>
    where
        F: FnOnce(&mut Session) -> Result<Forest>,
    {
        let outcome = if self.finalized {
            Err(Error::AlreadyFinalized)
        } else {
            let saved = (self.hyperparams, self.next_id);
            let built = step(self).and_then(|forest| {
                let model = forest.model(self.mu());
                let val_mae = self.val_mae(&model)?;
                Ok(Iteration {
                    index: self.history.len(),
                    action,
                    hyperparams: self.hyperparams,
                    forest,
                    model,
                    val_mae,
                })
            });
            if built.is_err() {
                (self.hyperparams, self.next_id) = saved;
            }
            built
        };
        self.commit(action, outcome)
    }

    fn commit(&mut self, action: Action, outcome: Result<Iteration>) -> Result<&Iteration> {
        match outcome {
            Ok(it) => {
                let index = it.index;
                if self.history.is_empty() || it.val_mae < self.history[self.best_index].val_mae {
                    self.best_index = index;
                }
                self.history.push(it);
                self.record(action, Some(index), None);
                Ok(self.current())
            }
            Err(e) => {
                self.record(action, None, Some(e.code()));
                Err(e)
            }
        }
    }

    fn record(&mut self, action: Action, iteration: Option<usize>, error: Option<&str>) {
        let timestamp_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        self.log.push(LogRecord {
            timestamp_ms,
            action,
            iteration,
            error: error.map(str::to_owned),
        });
    }
}

pub const EXPORT_FORMAT: u32 = 1;

/// Self-describing dump of a session for offline analysis.
#[derive(Debug, Serialize)]
pub struct SessionExport<'a> {
    pub format: u32,
    pub n_items: usize,
    /// train, validation, test
    pub split_sizes: [usize; 3],
    pub mu: f64,
    pub hyperparams: Hyperparams,
    pub history: &'a [Iteration],
    pub best_index: usize,
    pub finalized: bool,
    pub test_metrics: Option<MetricsReport>,
    pub log: &'a [LogRecord],
}
