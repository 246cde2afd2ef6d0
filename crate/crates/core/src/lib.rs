//! Executable finite model theory on desk-scale relational structures:
//! comonadic covers for the Ehrenfeucht-Fraisse, pebbling, and modal
//! settings, fixpoint solvers for the associated model-comparison games,
//! resource-indexed logical equivalences with an independent syntactic
//! oracle, exact tree-depth/treewidth, and homomorphism-count tests.

pub mod audit;
pub mod ef;
pub mod error;
pub mod forest;
pub mod games;
pub mod homcount;
pub mod logic;
pub mod modal;
mod order_search;
pub mod params;
pub mod pebble;
pub mod structure;
pub mod suites;

pub use error::{Error, Result};
pub use structure::{ElementMap, Graph, Structure, Vocabulary};
