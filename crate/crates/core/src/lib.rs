//! Permutation regression with transparent order-constraint models.
//!
//! A constraint such as `(2, 4)` is fulfilled by every permutation that
//! places item 2 somewhere before item 4. Models are a baseline plus a
//! weighted sum of constraint indicators, grown by gradient boosting either
//! automatically ([`boost::fit_auto`]) or interactively through a
//! [`session::Session`].

pub mod boost;
pub mod data;
pub mod error;
pub mod featurize;
pub mod metrics;
pub mod session;
pub mod types;

pub use error::{Error, Result};
pub use types::{validate_permutation, Constraint, Dataset, Hyperparams, Model, Permutation, Term};
