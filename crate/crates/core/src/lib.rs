//! Incremental enumeration of the answers of tree automaton queries on binary
//! trees, maintained under relabelings of tree nodes.

pub mod aggregates;
pub mod automaton;
pub mod balance;
pub mod circuit;
pub mod engine;
pub mod enumerate;
pub mod error;
pub mod forest;
pub mod index;
pub mod provenance;
pub mod tobool;
pub mod tree;

pub use error::{Error, Result};
