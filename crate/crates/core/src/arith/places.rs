//! Places of k(x), pole sets, and the pole-confined subrings `R_T ⊆ k(x)`.
//!
//! A stalk ring `R_T` consists of the rational functions whose poles lie in
//! `T`. `R_{∞} = k[x]`, `R_∅ = k`, and the symbolic set `ALL` is k(x) itself.
//! Every finite place is a monic irreducible polynomial; irreducibles that
//! are not declared form the `UNLISTED` class, reachable only through `ALL`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::field::Field;
use super::poly::{Poly, RationalFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PlaceKind {
    Finite(Poly),
    Infinity,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Place {
    pub id: String,
    pub kind: PlaceKind,
}

impl Place {
    pub fn degree(&self) -> usize {
        match &self.kind {
            PlaceKind::Finite(p) => p.degree().unwrap_or(0),
            PlaceKind::Infinity => 1,
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self.kind, PlaceKind::Infinity)
    }

    pub fn poly(&self) -> Option<&Poly> {
        match &self.kind {
            PlaceKind::Finite(p) => Some(p),
            PlaceKind::Infinity => None,
        }
    }
}

/// Raw place declaration as it appears in documents.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PlaceDecl {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<String>,
    /// Accept an irreducibility claim that cannot be verified.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub attest_irreducible: bool,
}

/// The declared places of a rational universe, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlaceList {
    field: Field,
    places: Vec<Place>,
}

impl PlaceList {
    pub fn new(field: Field, places: Vec<Place>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        let mut polys = BTreeSet::new();
        let mut inf = 0;
        for p in &places {
            if !ids.insert(p.id.clone()) || p.id == "ALL" || p.id == "UNLISTED" {
                return Err(Error::Malformed(format!("duplicate or reserved place id `{}`", p.id)));
            }
            match &p.kind {
                PlaceKind::Infinity => inf += 1,
                PlaceKind::Finite(poly) => {
                    if poly.field() != field {
                        return Err(Error::FieldMismatch(format!("place `{}`", p.id)));
                    }
                    if !poly.is_monic() || poly.degree().unwrap_or(0) == 0 {
                        return Err(Error::Reducible(poly.to_string()));
                    }
                    if !polys.insert(poly.to_string()) {
                        return Err(Error::Malformed(format!("place polynomial `{poly}` declared twice")));
                    }
                }
            }
        }
        if inf != 1 {
            return Err(Error::Malformed("exactly one infinity place must be declared".into()));
        }
        Ok(PlaceList { field, places })
    }

    /// `{zero=(x), one=(x-1), inf}` over `field`.
    pub fn standard(field: Field) -> Self {
        Self::from_decls(
            field,
            &[
                PlaceDecl { id: Some("zero".into()), kind: "finite".into(), poly: Some("x".into()), attest_irreducible: false },
                PlaceDecl { id: Some("one".into()), kind: "finite".into(), poly: Some("x-1".into()), attest_irreducible: false },
                PlaceDecl { id: Some("inf".into()), kind: "infinity".into(), poly: None, attest_irreducible: false },
            ],
        )
        .expect("standard places are valid")
    }

    pub fn from_decls(field: Field, decls: &[PlaceDecl]) -> Result<Self> {
        let mut places = Vec::new();
        for d in decls {
            match d.kind.as_str() {
                "infinity" | "inf" => places.push(Place {
                    id: d.id.clone().unwrap_or_else(|| "inf".into()),
                    kind: PlaceKind::Infinity,
                }),
                "finite" => {
                    let text = d.poly.as_deref().ok_or_else(|| Error::Malformed("finite place without poly".into()))?;
                    let rf = RationalFunction::parse(field, text)?;
                    if !rf.den().is_one() {
                        return Err(Error::Malformed(format!("place `{text}` is not a polynomial")));
                    }
                    let poly = rf.num().clone();
                    if !poly.is_monic() {
                        return Err(Error::Malformed(format!("place `{text}` is not monic")));
                    }
                    match poly.is_irreducible() {
                        Some(true) => {}
                        Some(false) => return Err(Error::Reducible(text.into())),
                        None if d.attest_irreducible => {}
                        None => return Err(Error::UnverifiedIrreducible(text.into())),
                    }
                    let id = d.id.clone().unwrap_or_else(|| default_place_id(&poly));
                    places.push(Place { id, kind: PlaceKind::Finite(poly) });
                }
                other => return Err(Error::Malformed(format!("unknown place kind `{other}`"))),
            }
        }
        Self::new(field, places)
    }

    pub fn to_decls(&self) -> Vec<PlaceDecl> {
        self.places
            .iter()
            .map(|p| match &p.kind {
                PlaceKind::Infinity => PlaceDecl { id: Some(p.id.clone()), kind: "infinity".into(), poly: None, attest_irreducible: false },
                PlaceKind::Finite(poly) => PlaceDecl {
                    id: Some(p.id.clone()),
                    kind: "finite".into(),
                    poly: Some(poly.to_string()),
                    attest_irreducible: poly.is_irreducible().is_none(),
                },
            })
            .collect()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn len(&self) -> usize {
        self.places.len()
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }

    pub fn get(&self, i: usize) -> &Place {
        &self.places[i]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.places
            .iter()
            .position(|p| p.id == id)
            .ok_or_else(|| Error::UnknownPlace(id.to_string()))
    }

    pub fn infinity(&self) -> Option<usize> {
        self.places.iter().position(Place::is_infinity)
    }

    /// The place `(x)`, origin of the Laurent grading.
    pub fn origin(&self) -> Option<usize> {
        let x = Poly::x(self.field);
        self.places.iter().position(|p| p.poly() == Some(&x))
    }

    pub fn finite_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.places.len()).filter(|&i| !self.places[i].is_infinity())
    }

    /// Parses a pole set from ids, or the string `"ALL"`.
    pub fn pole_set(&self, ids: &[&str]) -> Result<PoleSet> {
        let mut s = BTreeSet::new();
        for id in ids {
            s.insert(self.index_of(id)?);
        }
        Ok(PoleSet::Finite(s))
    }

    pub fn pole_set_ids(&self, t: &PoleSet) -> Option<Vec<String>> {
        match t {
            PoleSet::All => None,
            PoleSet::Finite(s) => Some(s.iter().map(|&i| self.places[i].id.clone()).collect()),
        }
    }
}

fn default_place_id(poly: &Poly) -> String {
    let f = poly.field();
    if *poly == Poly::x(f) {
        "zero".into()
    } else if *poly == Poly::from_ints(f, &[-1, 1]) {
        "one".into()
    } else {
        poly.to_string()
    }
}

/// A set of places where poles are allowed; `All` denotes k(x).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PoleSet {
    Finite(BTreeSet<usize>),
    All,
}

impl PoleSet {
    pub fn empty() -> Self {
        PoleSet::Finite(BTreeSet::new())
    }

    pub fn of(indices: &[usize]) -> Self {
        PoleSet::Finite(indices.iter().copied().collect())
    }

    pub fn is_all(&self) -> bool {
        matches!(self, PoleSet::All)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, PoleSet::Finite(s) if s.is_empty())
    }

    pub fn contains(&self, place: usize) -> bool {
        match self {
            PoleSet::All => true,
            PoleSet::Finite(s) => s.contains(&place),
        }
    }

    pub fn contains_class(&self, class: PoleClass) -> bool {
        match class {
            PoleClass::Place(i) => self.contains(i),
            PoleClass::Unlisted => self.is_all(),
        }
    }

    pub fn is_subset(&self, other: &PoleSet) -> bool {
        match (self, other) {
            (_, PoleSet::All) => true,
            (PoleSet::All, PoleSet::Finite(_)) => false,
            (PoleSet::Finite(a), PoleSet::Finite(b)) => a.is_subset(b),
        }
    }

    pub fn union(&self, other: &PoleSet) -> PoleSet {
        match (self, other) {
            (PoleSet::All, _) | (_, PoleSet::All) => PoleSet::All,
            (PoleSet::Finite(a), PoleSet::Finite(b)) => PoleSet::Finite(a.union(b).copied().collect()),
        }
    }

    pub fn intersection(&self, other: &PoleSet) -> PoleSet {
        match (self, other) {
            (PoleSet::All, x) | (x, PoleSet::All) => x.clone(),
            (PoleSet::Finite(a), PoleSet::Finite(b)) => PoleSet::Finite(a.intersection(b).copied().collect()),
        }
    }

    /// Places of `self` missing from `other`; `None` when the difference is
    /// cofinite (`self = ALL`, `other` finite).
    pub fn difference(&self, other: &PoleSet) -> Option<BTreeSet<usize>> {
        match (self, other) {
            (_, PoleSet::All) => Some(BTreeSet::new()),
            (PoleSet::All, PoleSet::Finite(_)) => None,
            (PoleSet::Finite(a), PoleSet::Finite(b)) => Some(a.difference(b).copied().collect()),
        }
    }

    /// `localize(T, Δ) = T ∪ Δ`.
    pub fn localize(&self, delta: &PoleSet) -> PoleSet {
        self.union(delta)
    }
}

/// A class of polar basis elements of k(x): the tower at a declared place,
/// or the aggregate of all undeclared places.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PoleClass {
    Place(usize),
    Unlisted,
}

/// Finite count or countably infinite (`ω`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Multiplicity {
    Finite(u64),
    Omega,
}

impl Multiplicity {
    pub fn is_zero(&self) -> bool {
        matches!(self, Multiplicity::Finite(0))
    }

    pub fn times(&self, n: u64) -> Multiplicity {
        match self {
            _ if n == 0 => Multiplicity::Finite(0),
            Multiplicity::Finite(a) => Multiplicity::Finite(a * n),
            Multiplicity::Omega => Multiplicity::Omega,
        }
    }
}

impl std::ops::Add for Multiplicity {
    type Output = Multiplicity;
    fn add(self, rhs: Multiplicity) -> Multiplicity {
        match (self, rhs) {
            (Multiplicity::Finite(a), Multiplicity::Finite(b)) => Multiplicity::Finite(a + b),
            _ => Multiplicity::Omega,
        }
    }
}

impl fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Multiplicity::Finite(n) => write!(f, "{n}"),
            Multiplicity::Omega => write!(f, "ω"),
        }
    }
}

impl Serialize for Multiplicity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Multiplicity::Finite(n) => s.serialize_u64(*n),
            Multiplicity::Omega => s.serialize_str("omega"),
        }
    }
}

impl<'de> Deserialize<'de> for Multiplicity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(Multiplicity::Finite)
                .ok_or_else(|| serde::de::Error::custom("multiplicity must be a nonnegative integer")),
            serde_json::Value::String(s) if s == "omega" => Ok(Multiplicity::Omega),
            _ => Err(serde::de::Error::custom("expected integer or \"omega\"")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_list() {
        let pl = PlaceList::standard(Field::Rationals);
        assert_eq!(pl.len(), 3);
        assert_eq!(pl.origin(), Some(0));
        assert_eq!(pl.infinity(), Some(2));
        assert_eq!(pl.index_of("one").unwrap(), 1);
    }

    #[test]
    fn rejects_reducible_and_unverifiable() {
        let d = |p: &str, attest| PlaceDecl { id: None, kind: "finite".into(), poly: Some(p.into()), attest_irreducible: attest };
        let inf = PlaceDecl { id: None, kind: "infinity".into(), poly: None, attest_irreducible: false };
        assert!(matches!(PlaceList::from_decls(Field::Rationals, &[d("x^2-1", false)]), Err(Error::Reducible(_))));
        assert!(matches!(
            PlaceList::from_decls(Field::Rationals, &[d("x^4+1", false)]),
            Err(Error::UnverifiedIrreducible(_))
        ));
        assert!(PlaceList::from_decls(Field::Rationals, &[d("x^4+1", true), inf.clone()]).is_ok());
        assert!(PlaceList::from_decls(Field::Prime(2), &[d("x^4+x+1", false), inf.clone()]).is_ok());
        assert!(PlaceList::from_decls(Field::Prime(2), &[d("x", false)]).is_err());
    }

    #[test]
    fn pole_set_algebra() {
        let a = PoleSet::of(&[2]);
        let b = PoleSet::of(&[0]);
        assert_eq!(a.localize(&b), PoleSet::of(&[0, 2]));
        assert!(a.is_subset(&PoleSet::All));
        assert!(!PoleSet::All.is_subset(&a));
        assert_eq!(PoleSet::All.difference(&a), None);
        assert_eq!(PoleSet::All.intersection(&a), a);
    }

    #[test]
    fn omega_absorbs() {
        assert_eq!(Multiplicity::Omega + Multiplicity::Finite(3), Multiplicity::Omega);
        assert_eq!(Multiplicity::Finite(2) + Multiplicity::Finite(3), Multiplicity::Finite(5));
    }
}
