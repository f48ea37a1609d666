//! Ringed finite spaces over the two coefficient universes.
//!
//! In the rational universe every stalk is a pole ring `R_T ⊆ k(x)` and every
//! restriction is the inclusion `R_{T_p} ⊆ R_{T_q}`. In the topological
//! universe every stalk is the base ring (ℤ or a field) with identities.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::arith::field::Field;
use crate::arith::homology::Coefficients;
use crate::arith::places::{PlaceDecl, PlaceList, PoleSet};
use crate::error::{Error, Result};
use crate::poset::{FinitePoset, PointSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Universe {
    Topological(Coefficients),
    Rational(PlaceList),
}

impl Universe {
    pub fn standard_rational() -> Self {
        Universe::Rational(PlaceList::standard(Field::Rationals))
    }

    pub fn places(&self) -> Option<&PlaceList> {
        match self {
            Universe::Rational(p) => Some(p),
            Universe::Topological(_) => None,
        }
    }

    /// Field over which cohomology dimensions are computed; `None` for ℤ.
    pub fn field(&self) -> Option<Field> {
        match self {
            Universe::Rational(p) => Some(p.field()),
            Universe::Topological(Coefficients::Field(k)) => Some(*k),
            Universe::Topological(Coefficients::Integers) => None,
        }
    }

    pub fn coefficients(&self) -> Coefficients {
        match self.field() {
            Some(k) => Coefficients::Field(k),
            None => Coefficients::Integers,
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, Universe::Rational(_))
    }
}

/// `{"kind":"rational","field":"Q","places":[...]}` or
/// `{"kind":"topological","base":"Z"}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct UniverseDoc {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub places: Option<Vec<PlaceDecl>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
}

/// `"inf"`-style id list, or the string `"ALL"`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum PolesDoc {
    Ids(Vec<String>),
    Symbol(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PointDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poles: Option<PolesDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum PointEntry {
    Bare(String),
    Full(PointDoc),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SpaceDoc {
    pub universe: UniverseDoc,
    pub points: Vec<PointEntry>,
    #[serde(default)]
    pub relations: Vec<(String, String)>,
}

pub fn poles_from_doc(places: &PlaceList, doc: &PolesDoc) -> Result<PoleSet> {
    match doc {
        PolesDoc::Symbol(s) if s == "ALL" => Ok(PoleSet::All),
        PolesDoc::Symbol(s) => Err(Error::Malformed(format!("pole set `{s}`: expected a list or \"ALL\""))),
        PolesDoc::Ids(ids) => {
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            places.pole_set(&refs)
        }
    }
}

pub fn poles_to_doc(places: &PlaceList, t: &PoleSet) -> PolesDoc {
    match places.pole_set_ids(t) {
        Some(ids) => PolesDoc::Ids(ids),
        None => PolesDoc::Symbol("ALL".into()),
    }
}

/// Human name of `R_T`: `k`, `k[x]`, `k[1/x]`, `k[x,1/x]`, `k(x)`, or
/// `R{...}` otherwise.
pub fn ring_name(places: &PlaceList, t: &PoleSet) -> String {
    let inf = places.infinity();
    let zero = places.origin();
    match t {
        PoleSet::All => "k(x)".into(),
        PoleSet::Finite(s) => {
            let has = |i: Option<usize>| i.is_some_and(|i| s.contains(&i));
            let rest = s.iter().filter(|&&i| Some(i) != inf && Some(i) != zero).count();
            match (rest, has(zero), has(inf)) {
                (0, false, false) => "k".into(),
                (0, false, true) => "k[x]".into(),
                (0, true, false) => "k[1/x]".into(),
                (0, true, true) => "k[x,1/x]".into(),
                _ => format!("R{{{}}}", places.pole_set_ids(t).unwrap_or_default().join(",")),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingedFiniteSpace {
    poset: FinitePoset,
    universe: Universe,
    /// per point, rational universe only
    poles: Vec<PoleSet>,
}

impl RingedFiniteSpace {
    pub fn topological(poset: FinitePoset, coeffs: Coefficients) -> Self {
        RingedFiniteSpace { poset, universe: Universe::Topological(coeffs), poles: Vec::new() }
    }

    /// Checks monotonicity `T_p ⊆ T_q` on every Hasse edge.
    pub fn rational(poset: FinitePoset, places: PlaceList, poles: Vec<PoleSet>) -> Result<Self> {
        if poles.len() != poset.len() {
            return Err(Error::Malformed("one pole set per point required".into()));
        }
        for &(a, b) in poset.hasse() {
            if !poles[a].is_subset(&poles[b]) {
                return Err(Error::NonMonotone {
                    lower: poset.label(a).to_string(),
                    upper: poset.label(b).to_string(),
                });
            }
        }
        Ok(RingedFiniteSpace { poset, universe: Universe::Rational(places), poles })
    }

    /// One-point space with stalk `R_T`.
    pub fn rational_point(places: PlaceList, t: PoleSet) -> Self {
        Self::rational(FinitePoset::point(), places, vec![t]).expect("a point is monotone")
    }

    pub fn from_doc(doc: &SpaceDoc) -> Result<Self> {
        let entries: Vec<PointDoc> = doc
            .points
            .iter()
            .map(|e| match e {
                PointEntry::Bare(id) => PointDoc { id: id.clone(), poles: None },
                PointEntry::Full(p) => p.clone(),
            })
            .collect();
        let ids: Vec<&str> = entries.iter().map(|p| p.id.as_str()).collect();
        let rels: Vec<(&str, &str)> = doc.relations.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let poset = FinitePoset::from_relations(&ids, &rels)?;
        match doc.universe.kind.as_str() {
            "topological" => {
                let coeffs = Coefficients::parse(doc.universe.base.as_deref().unwrap_or("Z"))?;
                if let Some(p) = entries.iter().find(|p| p.poles.is_some()) {
                    return Err(Error::Malformed(format!("point `{}`: topological stalks carry no poles", p.id)));
                }
                Ok(Self::topological(poset, coeffs))
            }
            "rational" => {
                let field = Field::parse(doc.universe.field.as_deref().unwrap_or("Q"))?;
                let places = match &doc.universe.places {
                    Some(decls) => PlaceList::from_decls(field, decls)?,
                    None => PlaceList::standard(field),
                };
                let mut declared: BTreeMap<&str, PoleSet> = BTreeMap::new();
                for p in &entries {
                    let t = match &p.poles {
                        Some(d) => poles_from_doc(&places, d)?,
                        None => PoleSet::empty(),
                    };
                    declared.insert(p.id.as_str(), t);
                }
                // monotonicity over the preorder, before T0 identification
                for a in &ids {
                    for b in &ids {
                        let (i, j) = (poset.index_of(a)?, poset.index_of(b)?);
                        if poset.leq(i, j) && !declared[a].is_subset(&declared[b]) {
                            return Err(Error::NonMonotone { lower: a.to_string(), upper: b.to_string() });
                        }
                    }
                }
                let poles = poset.points().iter().map(|l| declared[l.as_str()].clone()).collect();
                Self::rational(poset, places, poles)
            }
            other => Err(Error::Malformed(format!("unknown universe kind `{other}`"))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpaceDoc = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_doc(&doc)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let doc: SpaceDoc = serde_json::from_value(v.clone()).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_doc(&doc)
    }

    pub fn to_doc(&self) -> SpaceDoc {
        let universe = match &self.universe {
            Universe::Topological(c) => {
                UniverseDoc { kind: "topological".into(), field: None, places: None, base: Some(c.to_string()) }
            }
            Universe::Rational(pl) => UniverseDoc {
                kind: "rational".into(),
                field: Some(pl.field().to_string()),
                places: Some(pl.to_decls()),
                base: None,
            },
        };
        let points = (0..self.len())
            .map(|i| match &self.universe {
                Universe::Topological(_) => PointEntry::Bare(self.poset.label(i).to_string()),
                Universe::Rational(pl) => PointEntry::Full(PointDoc {
                    id: self.poset.label(i).to_string(),
                    poles: Some(poles_to_doc(pl, &self.poles[i])),
                }),
            })
            .collect();
        SpaceDoc { universe, points, relations: self.poset.to_doc().relations }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("documents serialize")
    }

    pub fn poset(&self) -> &FinitePoset {
        &self.poset
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn places(&self) -> Option<&PlaceList> {
        self.universe.places()
    }

    pub fn len(&self) -> usize {
        self.poset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poset.is_empty()
    }

    pub fn is_rational(&self) -> bool {
        self.universe.is_rational()
    }

    pub fn require_places(&self) -> Result<&PlaceList> {
        self.places().ok_or_else(|| Error::NotApplicable("operation needs the rational universe".into()))
    }

    /// `T_p`; `∅` in the topological universe.
    pub fn poles(&self, p: usize) -> PoleSet {
        self.poles.get(p).cloned().unwrap_or_else(PoleSet::empty)
    }

    pub fn all_poles(&self) -> &[PoleSet] {
        &self.poles
    }

    /// `∩ T_p` over `set` (`ALL` for the empty set).
    pub fn common_poles(&self, set: &PointSet) -> PoleSet {
        set.iter().fold(PoleSet::All, |acc, &p| acc.intersection(&self.poles(p)))
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.poset.index_of(id)
    }

    /// Open subspace on `set`, with the embedding of indices.
    pub fn restrict(&self, set: &PointSet) -> Result<(RingedFiniteSpace, Vec<usize>)> {
        if !self.poset.is_open(set) {
            return Err(Error::NotOpen(format!("{:?}", self.poset.labels_of(set))));
        }
        Ok(self.subspace(set))
    }

    /// Subspace on any subset (used for preimages and components).
    pub fn subspace(&self, set: &PointSet) -> (RingedFiniteSpace, Vec<usize>) {
        let (poset, emb) = self.poset.subposet(set);
        let poles = if self.is_rational() { emb.iter().map(|&i| self.poles[i].clone()).collect() } else { Vec::new() };
        (RingedFiniteSpace { poset, universe: self.universe.clone(), poles }, emb)
    }

    /// Same poset and universe with replaced pole sets.
    pub fn with_poles(&self, poles: Vec<PoleSet>) -> Result<Self> {
        let places = self.require_places()?.clone();
        Self::rational(self.poset.clone(), places, poles)
    }

    pub fn same_universe(&self, other: &RingedFiniteSpace) -> Result<()> {
        if self.universe == other.universe {
            Ok(())
        } else {
            Err(Error::UniverseMismatch("spaces live in different universes or over different places".into()))
        }
    }

    pub fn stalk_name(&self, p: usize) -> String {
        match &self.universe {
            Universe::Rational(pl) => ring_name(pl, &self.poles[p]),
            Universe::Topological(c) => c.to_string(),
        }
    }
}

impl fmt::Display for RingedFiniteSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in 0..self.len() {
            writeln!(f, "{}: {}", self.poset.label(p), self.stalk_name(p))?;
        }
        for &(a, b) in self.poset.hasse() {
            writeln!(f, "{} < {}", self.poset.label(a), self.poset.label(b))?;
        }
        Ok(())
    }
}

/// A point map with canonical ring inclusions `O_{f(x)} ⊆ O_x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorphismDescriptor {
    pub source: RingedFiniteSpace,
    pub target: RingedFiniteSpace,
    pub map: Vec<usize>,
}

/// `{"source": <space>, "target": <space>, "map": {"x": "y", ...}}`.
/// Source and target may be embedded documents or strings naming files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MorphismDoc {
    pub source: Value,
    pub target: Value,
    pub map: BTreeMap<String, String>,
}

impl MorphismDescriptor {
    pub fn new(source: RingedFiniteSpace, target: RingedFiniteSpace, map: Vec<usize>) -> Result<Self> {
        source.same_universe(&target)?;
        if map.len() != source.len() || map.iter().any(|&y| y >= target.len()) {
            return Err(Error::InvalidMorphism("point map must be total".into()));
        }
        if !source.poset().is_monotone(target.poset(), &map) {
            return Err(Error::InvalidMorphism("point map is not monotone".into()));
        }
        if source.is_rational() {
            for (x, &y) in map.iter().enumerate() {
                if !target.poles(y).is_subset(&source.poles(x)) {
                    return Err(Error::InvalidMorphism(format!(
                        "stalk at `{}` does not contain the stalk at `{}`",
                        source.poset().label(x),
                        target.poset().label(y)
                    )));
                }
            }
        }
        Ok(MorphismDescriptor { source, target, map })
    }

    pub fn from_labels(
        source: RingedFiniteSpace,
        target: RingedFiniteSpace,
        labels: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut map = vec![usize::MAX; source.len()];
        for (x, y) in labels {
            map[source.index_of(x)?] = target.index_of(y)?;
        }
        if let Some(x) = map.iter().position(|&y| y == usize::MAX) {
            return Err(Error::InvalidMorphism(format!("no image for `{}`", source.poset().label(x))));
        }
        Self::new(source, target, map)
    }

    /// Parses a morphism document; string-valued endpoints go through `load`.
    pub fn from_doc(doc: &MorphismDoc, load: &dyn Fn(&str) -> Result<RingedFiniteSpace>) -> Result<Self> {
        let side = |v: &Value| match v {
            Value::String(s) => load(s),
            other => RingedFiniteSpace::from_value(other),
        };
        Self::from_labels(side(&doc.source)?, side(&doc.target)?, &doc.map)
    }

    pub fn to_doc(&self) -> MorphismDoc {
        let to_value = |s: &RingedFiniteSpace| serde_json::to_value(s.to_doc()).expect("documents serialize");
        MorphismDoc {
            source: to_value(&self.source),
            target: to_value(&self.target),
            map: self.labelled_map(),
        }
    }

    pub fn labelled_map(&self) -> BTreeMap<String, String> {
        self.map
            .iter()
            .enumerate()
            .map(|(x, &y)| (self.source.poset().label(x).to_string(), self.target.poset().label(y).to_string()))
            .collect()
    }

    pub fn identity(x: &RingedFiniteSpace) -> Self {
        MorphismDescriptor { source: x.clone(), target: x.clone(), map: (0..x.len()).collect() }
    }

    /// `X → point` with stalk `R_T`; requires `T ⊆ T_x` for all `x`.
    pub fn to_point(x: &RingedFiniteSpace, t: PoleSet) -> Result<Self> {
        let target = match x.universe() {
            Universe::Rational(pl) => RingedFiniteSpace::rational_point(pl.clone(), t),
            Universe::Topological(c) => RingedFiniteSpace::topological(FinitePoset::point(), *c),
        };
        Self::new(x.clone(), target, vec![0; x.len()])
    }

    /// Inclusion of an open subspace.
    pub fn open_inclusion(x: &RingedFiniteSpace, set: &PointSet) -> Result<Self> {
        let (sub, emb) = x.restrict(set)?;
        Self::new(sub, x.clone(), emb)
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &MorphismDescriptor) -> Result<Self> {
        if self.target != other.source {
            return Err(Error::InvalidMorphism("composition of non-composable morphisms".into()));
        }
        let map = self.map.iter().map(|&y| other.map[y]).collect();
        Self::new(self.source.clone(), other.target.clone(), map)
    }

    /// `f^{-1}(set)`.
    pub fn preimage(&self, set: &PointSet) -> PointSet {
        (0..self.source.len()).filter(|&x| set.contains(&self.map[x])).collect()
    }

    /// `f^{-1}(U_y)`.
    pub fn preimage_of_star(&self, y: usize) -> PointSet {
        self.preimage(&self.target.poset().minimal_open(y))
    }

    /// `U_x ∩ f^{-1}(U_y)`.
    pub fn u_xy(&self, x: usize, y: usize) -> PointSet {
        let ux = self.source.poset().minimal_open(x);
        let pre = self.preimage_of_star(y);
        ux.intersection(&pre).copied().collect()
    }
}

/// Ids as a set of places, for building fixtures in code.
pub fn pole_ids(places: &PlaceList, ids: &[&str]) -> PoleSet {
    places.pole_set(ids).expect("known place ids")
}
