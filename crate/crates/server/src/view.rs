use permreg::metrics::MetricsReport;
use permreg::session::{NodeId, Session};
use permreg::Hyperparams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeView {
    pub id: NodeId,
    pub items: Vec<u32>,
    pub parent_id: Option<NodeId>,
    pub active: bool,
    pub beta: f64,
    /// `beta` over the largest |beta| among active nodes, clamped to [-1, 1].
    pub normalized_beta: f64,
}

/// What a client sees of a session after each request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub hyperparams: Hyperparams,
    pub iteration_index: usize,
    pub nodes: Vec<NodeView>,
    pub val_mae_history: Vec<f64>,
    pub best_index: usize,
    pub finalized: bool,
    pub test_metrics: Option<MetricsReport>,
}

impl SessionView {
    pub fn of(session_id: &str, s: &Session) -> SessionView {
        let it = s.current();
        let scale = it
            .forest
            .active()
            .map(|n| n.beta.abs())
            .fold(0.0f64, f64::max);
        let nodes = it
            .forest
            .nodes()
            .iter()
            .map(|n| NodeView {
                id: n.id,
                items: n.constraint.items().to_vec(),
                parent_id: n.parent_id,
                active: n.active,
                beta: n.beta,
                normalized_beta: if scale > 0.0 {
                    (n.beta / scale).clamp(-1.0, 1.0)
                } else {
                    0.0
                },
            })
            .collect();
        SessionView {
            session_id: session_id.to_owned(),
            hyperparams: s.hyperparams(),
            iteration_index: it.index,
            nodes,
            val_mae_history: s.history().iter().map(|h| h.val_mae).collect(),
            best_index: s.best_index(),
            finalized: s.is_finalized(),
            test_metrics: s.test_report().copied(),
        }
    }
}
