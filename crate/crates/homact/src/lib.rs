//! Constructive tools for group actions on the Random Graph.

pub mod action;
pub mod automorphism;
pub mod backend;
pub mod error;
pub mod extension;
pub mod generic;
pub mod graph;
pub mod group;
pub mod harness;
pub mod term;
pub mod witness;

pub use error::{Error, Result};
pub use group::{Elem, Group, GroupKind};
pub use term::{BaseId, Nat, SetTerm, VertexTerm};
