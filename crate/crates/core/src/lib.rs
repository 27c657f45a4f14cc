//! Online graph embedding on star host topologies.
//!
//! Requests are pairs of guest nodes. Serving a pair costs 1 when one of
//! its endpoints sits on the central host and 2 otherwise; replacing the
//! central node costs 1. This crate provides the cost model, the exact
//! offline optimum and its canonical form OPT*, the PivotTracking online
//! policies (deterministic and randomized), lower-bound adversaries, and
//! the harness used to measure competitive ratios.

pub mod adversary;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod io;
pub mod offline;
pub mod oracle;
pub mod policy;
pub mod star;

pub use error::{Error, Result};
pub use offline::{block_decompose, extract_phases, label_requests, opt_cost, opt_star, Label, OptSolution, Phase};
pub use policy::{OnlinePolicy, PolicyKind};
pub use star::{replay, CostLedger, NodeId, Request, RequestSequence, StarState};
