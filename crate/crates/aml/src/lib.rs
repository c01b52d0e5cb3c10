//! Algebraic machine learning: atomized semilattice models learned by full
//! and sparse crossing.

pub mod bitset;
pub mod core;
pub mod crossing;
pub mod dual;
pub mod embed;
pub mod error;
pub mod evalstat;
pub mod sparse;
pub mod trace;

pub use crate::bitset::BitSet;
pub use crate::core::{pinning_term, Atom, Axioms, Duple, Model, ModelJson, Sign, Term, Universe};
pub use crate::error::{Error, Result};

pub type LogisticHead = evalstat::LogisticHead<f64>;
pub type LogisticHeadF32 = evalstat::LogisticHead<f32>;
