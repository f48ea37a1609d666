//! Exact arithmetic back-ends.

pub mod field;
pub mod homology;
pub mod lattice;
pub mod matrix;
pub mod places;
pub mod poly;
pub mod rational;
pub mod snf;

pub use field::{Field, Scalar};
pub use homology::{CochainComplex, Coefficients, Group};
pub use matrix::{FieldMatrix, IntMatrix};
pub use places::{Multiplicity, Place, PlaceKind, PlaceList, PoleClass, PoleSet};
pub use poly::{Poly, RationalFunction};
pub use rational::RationalElem;
pub use snf::{smith_normal_form, SmithForm};
