//! Exact computations on ringed finite spaces.

pub mod arith;
pub mod cohomology;
pub mod constructions;
pub mod error;
pub mod poset;
pub mod predicates;
pub mod sheaf;
pub mod space;
pub mod spec_functor;

pub use error::{Error, Result};
