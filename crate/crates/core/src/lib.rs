//! Detection of pathogenic social-media users from retweet-cascade action
//! logs.
//!
//! The pipeline: ingest an action log ([`action_log`]), compute prima-facie
//! causality scores per user and time window ([`causal_metrics`]), combine
//! windows with exponential time decay into feature vectors ([`timedecay`]),
//! and train a semi-supervised Laplacian SVM on the features ([`lapsvm`]).
//! [`synth`] generates reproducible corpora with planted pathogenic users
//! and [`eval`] handles splits, F1 metrics and the unlabeled-fraction sweep.

pub mod action_log;
pub mod causal_metrics;
pub mod error;
pub mod eval;
pub mod exec;
pub mod lapsvm;
pub mod synth;
pub mod timedecay;

pub use error::{Error, Result};
