use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unknown point `{0}`")]
    UnknownPoint(String),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("pole sets not monotone on edge {lower} <= {upper}")]
    NonMonotone { lower: String, upper: String },
    #[error("polynomial `{0}` is not irreducible")]
    Reducible(String),
    #[error("irreducibility of `{0}` cannot be verified; pass an attestation")]
    UnverifiedIrreducible(String),
    #[error("field mismatch: {0}")]
    FieldMismatch(String),
    #[error("universe mismatch: {0}")]
    UniverseMismatch(String),
    #[error("not a covering: point `{0}` is not covered")]
    NotCovering(String),
    #[error("`{0}` is not an open subset (up-set)")]
    NotOpen(String),
    #[error("differentials do not compose to zero at degree {0}")]
    NotAComplex(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid sheaf: {0}")]
    InvalidSheaf(String),
    #[error("invalid morphism: {0}")]
    InvalidMorphism(String),
    #[error("unrepresentable: {0}")]
    Unrepresentable(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("not a weak equivalence: {0}")]
    NotWeakEquivalence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
