//! Glued-trees black-box traversal toolkit.
//!
//! * [`graph`] and [`oracle`]: random glued-trees instances and the
//!   query-counting black box over opaque vertex names.
//! * [`embedding`]: the random-embedding game on query trees, with exact
//!   enumeration and seeded Monte Carlo estimators.
//! * [`bounds`]: closed-form bounds on the game's winning probability and
//!   the two theorem operating points.
//! * [`harness`]: adaptive strategies run against fresh oracles.
//! * [`experiments`]: config-driven, reproducible batch runs.

pub mod bounds;
pub mod embedding;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod harness;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use graph::{CanonicalVertex, GluedTreesGraph, MemoryBudget};
pub use oracle::{Oracle, OracleResponse, VertexName};
pub use rng::Stream;
pub use stats::Estimate;
pub use tree::{make_tree, RootedTree, TreeShape};
