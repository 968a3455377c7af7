//! Multi-objective evolutionary search over recurrent cell architectures.
//!
//! Cells are block-encoded DAGs ([`arch`]) mutated by network morphisms
//! ([`morphism`]), trained with backpropagation through time ([`cell`]) and
//! ranked by nondominated sorting ([`evo`]).

pub mod arch;
pub mod cell;
pub mod evo;
pub mod morphism;
pub mod persist;
pub mod search;
pub mod tasks;
