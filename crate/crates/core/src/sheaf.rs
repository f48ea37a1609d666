//! Sheaf descriptors on ringed finite spaces.
//!
//! Four families: the structure sheaf, extension-by-zero patterns `k_V`,
//! fractional-monomial modules (sums of lines `x^a R_S ⊆ k(x)`), and abelian
//! sheaves given by finitely presented stalks and integer restriction
//! matrices on Hasse edges.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::arith::field::Field;
use crate::arith::homology::Coefficients;
use crate::arith::lattice::{contains_columns, kernel_basis, solve_integral};
use crate::arith::matrix::IntMatrix;
use crate::arith::places::{Multiplicity, PlaceList, PoleSet};
use crate::arith::snf::smith_normal_form;
use crate::error::{Error, Result};
use crate::poset::{FinitePoset, PointSet};
use crate::space::{poles_from_doc, poles_to_doc, MorphismDescriptor, PolesDoc, RingedFiniteSpace, Universe};

/// Stalk presentations `ℤ^{gens} / im(relations)` (or over a field) with a
/// restriction matrix for every comparable pair `p ≤ q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StalkData {
    pub gens: Vec<usize>,
    pub relations: Vec<IntMatrix>,
    maps: BTreeMap<(usize, usize), IntMatrix>,
}

impl StalkData {
    /// Composes Hasse-edge matrices to all pairs, checking that every
    /// matrix respects the presentations and that all paths agree.
    pub fn from_hasse(
        poset: &FinitePoset,
        gens: Vec<usize>,
        relations: Vec<IntMatrix>,
        hasse: &BTreeMap<(usize, usize), IntMatrix>,
    ) -> Result<Self> {
        let n = poset.len();
        let label = |p: usize| poset.label(p).to_string();
        for &(p, q) in poset.hasse() {
            let m = hasse
                .get(&(p, q))
                .ok_or_else(|| Error::InvalidSheaf(format!("missing restriction {} -> {}", label(p), label(q))))?;
            if m.rows() != gens[q] || m.cols() != gens[p] {
                return Err(Error::InvalidSheaf(format!("restriction {} -> {} has wrong shape", label(p), label(q))));
            }
            let img = m.mul(&relations[p]);
            if !img.is_zero() && !contains_columns(&relations[q], &img) {
                return Err(Error::InvalidSheaf(format!(
                    "restriction {} -> {} does not respect the stalk presentations",
                    label(p),
                    label(q)
                )));
            }
        }
        if let Some(k) = hasse.keys().find(|k| !poset.hasse().contains(k)) {
            return Err(Error::InvalidSheaf(format!("{} -> {} is not a Hasse edge", label(k.0), label(k.1))));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&p| poset.minimal_open(p).len());
        let mut maps = BTreeMap::new();
        for &p in &order {
            maps.insert((p, p), IntMatrix::identity(gens[p]));
            for q in poset.minimal_open(p) {
                if q == p {
                    continue;
                }
                let mut found: Option<IntMatrix> = None;
                for m in poset.covers(p).into_iter().filter(|&m| poset.leq(m, q)) {
                    let c = maps[&(m, q)].mul(&hasse[&(p, m)]);
                    match &found {
                        None => found = Some(c),
                        Some(prev) => {
                            let diff = prev.sub(&c);
                            if !diff.is_zero() && !contains_columns(&relations[q], &diff) {
                                return Err(Error::InvalidSheaf(format!(
                                    "restrictions from {} to {} depend on the path",
                                    label(p),
                                    label(q)
                                )));
                            }
                        }
                    }
                }
                maps.insert((p, q), found.expect("a cover below q exists"));
            }
        }
        Ok(StalkData { gens, relations, maps })
    }

    pub fn map(&self, p: usize, q: usize) -> &IntMatrix {
        &self.maps[&(p, q)]
    }

    pub fn is_free(&self) -> bool {
        self.relations.iter().all(|r| r.cols() == 0 || r.is_zero())
    }
}

fn free_relations(gens: &[usize]) -> Vec<IntMatrix> {
    gens.iter().map(|&g| IntMatrix::zeros(g, 0)).collect()
}

/// A line `x^exp · R_S` inside k(x).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Line {
    pub exp: i64,
    pub poles: PoleSet,
}

/// A homogeneous class of basis elements of k(x): the Laurent monomial
/// `x^d`, one polar tower at a declared place other than `x` and `∞`, or
/// the undeclared places.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Grade {
    Laurent(i64),
    Tower(usize),
    Unlisted,
}

/// Indices of the place `x` (if declared) and of `∞`, the two places
/// where Laurent monomials have poles.
#[derive(Debug, Clone, Copy)]
pub struct LaurentFrame {
    pub zero: Option<usize>,
    pub inf: usize,
}

impl LaurentFrame {
    pub fn of(places: &PlaceList) -> Self {
        LaurentFrame { zero: places.origin(), inf: places.infinity().expect("place lists declare infinity") }
    }

    fn has_zero(&self, s: &PoleSet) -> bool {
        self.zero.is_some_and(|z| s.contains(z))
    }

    fn laurent_poles(&self) -> PoleSet {
        let mut v = vec![self.inf];
        v.extend(self.zero);
        PoleSet::of(&v)
    }
}

impl Line {
    pub fn new(exp: i64, poles: PoleSet) -> Self {
        Line { exp, poles }
    }

    /// Rejects shapes outside the family; rewrites `x^a R_S` as `R_S` when
    /// `x` is a unit of `R_S`.
    pub fn normalized(self, frame: LaurentFrame) -> Result<Self> {
        let both = frame.has_zero(&self.poles) && self.poles.contains(frame.inf);
        if self.exp == 0 || both {
            return Ok(Line { exp: 0, poles: self.poles });
        }
        if frame.zero.is_none() {
            return Err(Error::InvalidSheaf("nonzero exponents need the place x to be declared".into()));
        }
        let extra = match &self.poles {
            PoleSet::All => true,
            PoleSet::Finite(s) => s.iter().any(|&i| Some(i) != frame.zero && i != frame.inf),
        };
        if extra {
            return Err(Error::InvalidSheaf(format!(
                "x^{} R_S with poles beyond x and infinity is outside the fractional-monomial family",
                self.exp
            )));
        }
        Ok(self)
    }

    /// Laurent degrees present, as inclusive bounds (`None` = unbounded).
    pub fn laurent_range(&self, frame: LaurentFrame) -> (Option<i64>, Option<i64>) {
        let lo = if frame.has_zero(&self.poles) { None } else { Some(self.exp) };
        let hi = if self.poles.contains(frame.inf) { None } else { Some(self.exp) };
        (lo, hi)
    }

    pub fn contains(&self, g: Grade, frame: LaurentFrame) -> bool {
        match g {
            Grade::Laurent(d) => {
                let (lo, hi) = self.laurent_range(frame);
                lo.is_none_or(|l| d >= l) && hi.is_none_or(|h| d <= h)
            }
            Grade::Tower(v) => self.poles.contains(v),
            Grade::Unlisted => self.poles.is_all(),
        }
    }

    pub fn is_subset(&self, other: &Line, frame: LaurentFrame) -> bool {
        let (lo, hi) = self.laurent_range(frame);
        let (olo, ohi) = other.laurent_range(frame);
        let lo_ok = match (lo, olo) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a >= b,
        };
        let hi_ok = match (hi, ohi) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a <= b,
        };
        lo_ok && hi_ok && self.poles.is_subset(&other.poles.union(&frame.laurent_poles()))
            && (!self.poles.is_all() || other.poles.is_all())
    }

    /// `(x^a R_S) ⊗ R_T = x^a R_{S ∪ T}`.
    pub fn base_change(&self, t: &PoleSet, frame: LaurentFrame) -> Result<Line> {
        Line::new(self.exp, self.poles.union(t)).normalized(frame)
    }
}

/// Which basis elements of k(x) a grade class stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Span {
    Degrees(Option<i64>, Option<i64>),
    /// polar tower at a place of the given degree
    Tower(usize),
    Unlisted,
}

impl Span {
    /// Basis elements inside the window `|d| ≤ n`, `n` per tower level.
    pub fn window_count(&self, n: usize) -> usize {
        match *self {
            Span::Degrees(lo, hi) => {
                let lo = lo.unwrap_or(i64::MIN).max(-(n as i64));
                let hi = hi.unwrap_or(i64::MAX).min(n as i64);
                if hi >= lo { (hi - lo + 1) as usize } else { 0 }
            }
            Span::Tower(deg) => n * deg,
            Span::Unlisted => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradeClass {
    pub grade: Grade,
    pub label: String,
    pub multiplicity: Multiplicity,
    pub span: Span,
}

/// Grade classes for a family of lines with the given exponents. When all
/// exponents vanish the classes are the places themselves (declared finite
/// places, undeclared places, `∞`, constants); otherwise Laurent degrees are
/// grouped into intervals.
pub fn grade_classes(places: &PlaceList, frame: LaurentFrame, exps: &[i64]) -> Vec<GradeClass> {
    let mut out = Vec::new();
    let class = |grade, label: String, multiplicity, span| GradeClass { grade, label, multiplicity, span };
    let place_styled = exps.iter().all(|&e| e == 0);
    for (i, place) in places.places().iter().enumerate() {
        if place.is_infinity() {
            continue;
        }
        let label = format!("place:{}", place.id);
        if Some(i) == frame.zero {
            if place_styled {
                out.push(class(Grade::Laurent(-1), label, Multiplicity::Omega, Span::Degrees(None, Some(-1))));
            }
        } else {
            out.push(class(Grade::Tower(i), label, Multiplicity::Omega, Span::Tower(place.degree())));
        }
    }
    out.push(class(Grade::Unlisted, "unlisted".into(), Multiplicity::Omega, Span::Unlisted));
    if place_styled {
        let inf = format!("place:{}", places.get(frame.inf).id);
        out.push(class(Grade::Laurent(1), inf, Multiplicity::Omega, Span::Degrees(Some(1), None)));
        out.push(class(Grade::Laurent(0), "constant".into(), Multiplicity::Finite(1), Span::Degrees(Some(0), Some(0))));
        return out;
    }
    for (lo, hi) in laurent_intervals(exps) {
        let (rep, label, mult) = match (lo, hi) {
            (None, None) => (0, "degrees:all".to_string(), Multiplicity::Omega),
            (None, Some(h)) => (h, format!("degrees:..{h}"), Multiplicity::Omega),
            (Some(l), None) => (l, format!("degrees:{l}.."), Multiplicity::Omega),
            (Some(l), Some(h)) if l == h => (l, format!("degree:{l}"), Multiplicity::Finite(1)),
            (Some(l), Some(h)) => (l, format!("degrees:{l}..{h}"), Multiplicity::Finite((h - l + 1) as u64)),
        };
        out.push(class(Grade::Laurent(rep), label, mult, Span::Degrees(lo, hi)));
    }
    out
}

/// Maximal integer intervals on which membership `d - a ∈ {<0, =0, >0}` is
/// constant for every `a` in `exps`.
pub fn laurent_intervals(exps: &[i64]) -> Vec<(Option<i64>, Option<i64>)> {
    let mut b: Vec<i64> = exps.to_vec();
    b.sort_unstable();
    b.dedup();
    if b.is_empty() {
        return vec![(None, None)];
    }
    let mut out = vec![(None, Some(b[0] - 1))];
    for (k, &x) in b.iter().enumerate() {
        out.push((Some(x), Some(x)));
        match b.get(k + 1) {
            Some(&y) if y > x + 1 => out.push((Some(x + 1), Some(y - 1))),
            Some(_) => {}
            None => out.push((Some(x + 1), None)),
        }
    }
    out
}

/// A sum of lines at every point with integer incidence matrices on Hasse
/// edges; entry `(j, i)` of the `p → q` matrix scales line `i` at `p` into
/// line `j` at `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FracMono {
    pub lines: Vec<Vec<Line>>,
    pub incidence: BTreeMap<(usize, usize), IntMatrix>,
}

impl FracMono {
    /// One line per point with identity incidence.
    pub fn line_bundle(poset: &FinitePoset, lines: Vec<Line>) -> Self {
        let incidence = poset.hasse().iter().map(|&e| (e, IntMatrix::identity(1))).collect();
        FracMono { lines: lines.into_iter().map(|l| vec![l]).collect(), incidence }
    }

    pub fn exps(&self) -> Vec<i64> {
        self.lines.iter().flatten().map(|l| l.exp).collect()
    }

    fn data(&self, poset: &FinitePoset) -> Result<StalkData> {
        let gens: Vec<usize> = self.lines.iter().map(Vec::len).collect();
        StalkData::from_hasse(poset, gens.clone(), free_relations(&gens), &self.incidence)
    }

    /// The restriction of the grade-`g` piece: dimensions and matrices.
    pub fn graded_piece(&self, poset: &FinitePoset, g: Grade, frame: LaurentFrame) -> Result<StalkData> {
        let full = self.data(poset)?;
        let idx: Vec<Vec<usize>> = self
            .lines
            .iter()
            .map(|ls| (0..ls.len()).filter(|&i| ls[i].contains(g, frame)).collect())
            .collect();
        let gens: Vec<usize> = idx.iter().map(Vec::len).collect();
        let mut hasse = BTreeMap::new();
        for &(p, q) in poset.hasse() {
            let m = full.map(p, q);
            let rows: Vec<Vec<BigInt>> =
                idx[q].iter().map(|&j| idx[p].iter().map(|&i| m.get(j, i).clone()).collect()).collect();
            hasse.insert((p, q), IntMatrix::from_rows(gens[p], &rows));
        }
        StalkData::from_hasse(poset, gens.clone(), free_relations(&gens), &hasse)
    }
}

/// Finitely presented stalks with integer restriction matrices on Hasse
/// edges; only in the topological universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbelianSheaf {
    pub ranks: Vec<usize>,
    pub relations: Vec<IntMatrix>,
    pub maps: BTreeMap<(usize, usize), IntMatrix>,
}

impl AbelianSheaf {
    /// Constant sheaf `ℤ^r / im(rel)` with identity restrictions.
    pub fn constant(poset: &FinitePoset, rank: usize, rel: IntMatrix) -> Self {
        AbelianSheaf {
            ranks: vec![rank; poset.len()],
            relations: vec![rel; poset.len()],
            maps: poset.hasse().iter().map(|&e| (e, IntMatrix::identity(rank))).collect(),
        }
    }

    pub fn data(&self, poset: &FinitePoset) -> Result<StalkData> {
        StalkData::from_hasse(poset, self.ranks.clone(), self.relations.clone(), &self.maps)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SheafDescriptor {
    Structure,
    Pattern(PointSet),
    FracMono(FracMono),
    Abelian(AbelianSheaf),
}

impl SheafDescriptor {
    pub fn kind(&self) -> &'static str {
        match self {
            SheafDescriptor::Structure => "structure",
            SheafDescriptor::Pattern(_) => "pattern",
            SheafDescriptor::FracMono(_) => "fracmono",
            SheafDescriptor::Abelian(_) => "abelian",
        }
    }

    /// Structure sheaf written as a fractional-monomial module.
    pub fn structure_as_fracmono(x: &RingedFiniteSpace) -> Result<FracMono> {
        let frame = LaurentFrame::of(x.require_places()?);
        let lines = (0..x.len()).map(|p| Line::new(0, x.poles(p)).normalized(frame)).collect::<Result<_>>()?;
        Ok(FracMono::line_bundle(x.poset(), lines))
    }

    pub fn validate(&self, x: &RingedFiniteSpace) -> Result<()> {
        let poset = x.poset();
        match self {
            SheafDescriptor::Structure => Ok(()),
            SheafDescriptor::Pattern(v) => {
                if v.iter().any(|&p| p >= x.len()) || !poset.is_open(v) {
                    return Err(Error::NotOpen(format!("pattern {:?}", poset.labels_of(v))));
                }
                Ok(())
            }
            SheafDescriptor::FracMono(m) => {
                let places = x.places().ok_or_else(|| {
                    Error::UniverseMismatch("fractional-monomial modules live in the rational universe".into())
                })?;
                let frame = LaurentFrame::of(places);
                if m.lines.len() != x.len() {
                    return Err(Error::InvalidSheaf("one list of lines per point required".into()));
                }
                for (p, ls) in m.lines.iter().enumerate() {
                    for l in ls {
                        if l.clone().normalized(frame)? != *l {
                            return Err(Error::InvalidSheaf(format!("line at {} is not normalized", poset.label(p))));
                        }
                        if !x.poles(p).is_subset(&l.poles) {
                            return Err(Error::InvalidSheaf(format!(
                                "line at {} is not a module over the stalk ring",
                                poset.label(p)
                            )));
                        }
                    }
                }
                let data = m.data(poset)?;
                for &(p, q) in poset.hasse() {
                    let e = data.map(p, q);
                    for j in 0..e.rows() {
                        for i in 0..e.cols() {
                            if !e.get(j, i).is_zero() && !m.lines[p][i].is_subset(&m.lines[q][j], frame) {
                                return Err(Error::InvalidSheaf(format!(
                                    "line {i} at {} is not contained in line {j} at {}",
                                    poset.label(p),
                                    poset.label(q)
                                )));
                            }
                        }
                    }
                }
                Ok(())
            }
            SheafDescriptor::Abelian(a) => {
                if x.is_rational() {
                    return Err(Error::UniverseMismatch("abelian sheaves live in the topological universe".into()));
                }
                if a.ranks.len() != x.len() || a.relations.len() != x.len() {
                    return Err(Error::InvalidSheaf("one stalk per point required".into()));
                }
                for (p, r) in a.relations.iter().enumerate() {
                    if r.rows() != a.ranks[p] {
                        return Err(Error::InvalidSheaf(format!("relations at {} have wrong length", poset.label(p))));
                    }
                }
                a.data(poset).map(|_| ())
            }
        }
    }

    /// Linear stalk data over the base ring (topological universe).
    pub fn topological_data(&self, x: &RingedFiniteSpace) -> Result<StalkData> {
        let poset = x.poset();
        match self {
            SheafDescriptor::Structure => AbelianSheaf::constant(poset, 1, IntMatrix::zeros(1, 0)).data(poset),
            SheafDescriptor::Pattern(v) => pattern_data(poset, v),
            SheafDescriptor::Abelian(a) => a.data(poset),
            SheafDescriptor::FracMono(_) => {
                Err(Error::UniverseMismatch("fractional-monomial modules need the rational universe".into()))
            }
        }
    }
}

/// `k_V`: rank one on `V`, zero elsewhere, identities inside `V`.
pub fn pattern_data(poset: &FinitePoset, v: &PointSet) -> Result<StalkData> {
    let gens: Vec<usize> = (0..poset.len()).map(|p| usize::from(v.contains(&p))).collect();
    let hasse = poset
        .hasse()
        .iter()
        .map(|&(p, q)| {
            let m = if gens[p] == 1 { IntMatrix::identity(1) } else { IntMatrix::zeros(gens[q], 0) };
            ((p, q), m)
        })
        .collect();
    StalkData::from_hasse(poset, gens.clone(), free_relations(&gens), &hasse)
}

// ---------------------------------------------------------------- documents

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct LineDoc {
    #[serde(default)]
    pub exp: i64,
    pub poles: PolesDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum LinesDoc {
    One(LineDoc),
    Sum(Vec<LineDoc>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct StalkDoc {
    pub rank: usize,
    /// relation vectors, each of length `rank`
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct EdgeMapDoc {
    pub from: String,
    pub to: String,
    /// rows index the target stalk
    pub matrix: Vec<Vec<i64>>,
}

/// `{"kind":"structure"}`, `{"kind":"pattern","up_set":[...]}`,
/// `{"kind":"fracmono","data":{...},"incidence":[...]}`,
/// `{"kind":"abelian","stalks":{...},"maps":[...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SheafDoc {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up_set: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<BTreeMap<String, LinesDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incidence: Option<Vec<EdgeMapDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stalks: Option<BTreeMap<String, StalkDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<Vec<EdgeMapDoc>>,
}

fn matrix_from_doc(rows: usize, cols: usize, m: &[Vec<i64>], what: &str) -> Result<IntMatrix> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidSheaf(format!("{what}: expected a {rows}x{cols} matrix")));
    }
    let rows: Vec<Vec<BigInt>> = m.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
    Ok(IntMatrix::from_rows(cols, &rows))
}

fn matrix_to_doc(m: &IntMatrix) -> Vec<Vec<i64>> {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| i64::try_from(v).expect("entries fit in i64")).collect())
        .collect()
}

fn edge_maps_from_doc(
    x: &RingedFiniteSpace,
    gens: &[usize],
    docs: Option<&Vec<EdgeMapDoc>>,
) -> Result<BTreeMap<(usize, usize), IntMatrix>> {
    let poset = x.poset();
    let mut maps = BTreeMap::new();
    for e in docs.into_iter().flatten() {
        let (p, q) = (x.index_of(&e.from)?, x.index_of(&e.to)?);
        if !poset.hasse().contains(&(p, q)) {
            return Err(Error::InvalidSheaf(format!("{} -> {} is not a Hasse edge", e.from, e.to)));
        }
        let what = format!("map {} -> {}", e.from, e.to);
        maps.insert((p, q), matrix_from_doc(gens[q], gens[p], &e.matrix, &what)?);
    }
    for &(p, q) in poset.hasse() {
        if let std::collections::btree_map::Entry::Vacant(slot) = maps.entry((p, q)) {
            if gens[p] != gens[q] {
                return Err(Error::InvalidSheaf(format!(
                    "no map given for {} -> {} and the ranks differ",
                    poset.label(p),
                    poset.label(q)
                )));
            }
            slot.insert(IntMatrix::identity(gens[p]));
        }
    }
    Ok(maps)
}

impl SheafDescriptor {
    pub fn from_doc(x: &RingedFiniteSpace, doc: &SheafDoc) -> Result<Self> {
        let poset = x.poset();
        let sheaf = match doc.kind.as_str() {
            "structure" => SheafDescriptor::Structure,
            "pattern" => {
                let ids = doc.up_set.as_ref().ok_or_else(|| Error::Malformed("pattern needs `up_set`".into()))?;
                SheafDescriptor::Pattern(poset.set_from_labels(ids)?)
            }
            "fracmono" => {
                let places = x.require_places()?;
                let frame = LaurentFrame::of(places);
                let data = doc.data.as_ref().ok_or_else(|| Error::Malformed("fracmono needs `data`".into()))?;
                let mut lines = vec![None; x.len()];
                for (id, entry) in data {
                    let list = match entry {
                        LinesDoc::One(l) => vec![l.clone()],
                        LinesDoc::Sum(ls) => ls.clone(),
                    };
                    let parsed = list
                        .iter()
                        .map(|l| Line::new(l.exp, poles_from_doc(places, &l.poles)?).normalized(frame))
                        .collect::<Result<Vec<_>>>()?;
                    lines[x.index_of(id)?] = Some(parsed);
                }
                let lines: Vec<Vec<Line>> = lines
                    .into_iter()
                    .enumerate()
                    .map(|(p, l)| l.ok_or_else(|| Error::InvalidSheaf(format!("no stalk for `{}`", poset.label(p)))))
                    .collect::<Result<_>>()?;
                let gens: Vec<usize> = lines.iter().map(Vec::len).collect();
                let incidence = edge_maps_from_doc(x, &gens, doc.incidence.as_ref())?;
                SheafDescriptor::FracMono(FracMono { lines, incidence })
            }
            "abelian" => {
                let stalks = doc.stalks.as_ref().ok_or_else(|| Error::Malformed("abelian needs `stalks`".into()))?;
                let mut ranks = vec![None; x.len()];
                let mut relations = vec![IntMatrix::zeros(0, 0); x.len()];
                for (id, s) in stalks {
                    let p = x.index_of(id)?;
                    if s.relations.iter().any(|r| r.len() != s.rank) {
                        return Err(Error::InvalidSheaf(format!("relations at `{id}` have wrong length")));
                    }
                    let cols: Vec<Vec<BigInt>> =
                        s.relations.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
                    ranks[p] = Some(s.rank);
                    relations[p] = IntMatrix::from_columns(s.rank, &cols);
                }
                let ranks: Vec<usize> = ranks
                    .into_iter()
                    .enumerate()
                    .map(|(p, r)| r.ok_or_else(|| Error::InvalidSheaf(format!("no stalk for `{}`", poset.label(p)))))
                    .collect::<Result<_>>()?;
                let maps = edge_maps_from_doc(x, &ranks, doc.maps.as_ref())?;
                SheafDescriptor::Abelian(AbelianSheaf { ranks, relations, maps })
            }
            other => return Err(Error::Malformed(format!("unknown sheaf kind `{other}`"))),
        };
        sheaf.validate(x)?;
        Ok(sheaf)
    }

    pub fn from_json(x: &RingedFiniteSpace, text: &str) -> Result<Self> {
        let doc: SheafDoc = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_doc(x, &doc)
    }

    pub fn to_doc(&self, x: &RingedFiniteSpace) -> SheafDoc {
        let poset = x.poset();
        let mut doc = SheafDoc {
            kind: self.kind().into(),
            up_set: None,
            data: None,
            incidence: None,
            stalks: None,
            maps: None,
        };
        let edges = |maps: &BTreeMap<(usize, usize), IntMatrix>| {
            maps.iter()
                .map(|(&(p, q), m)| EdgeMapDoc {
                    from: poset.label(p).into(),
                    to: poset.label(q).into(),
                    matrix: matrix_to_doc(m),
                })
                .collect()
        };
        match self {
            SheafDescriptor::Structure => {}
            SheafDescriptor::Pattern(v) => doc.up_set = Some(poset.labels_of(v)),
            SheafDescriptor::FracMono(m) => {
                let places = x.places().expect("fracmono sheaves live in the rational universe");
                let line_doc = |l: &Line| LineDoc { exp: l.exp, poles: poles_to_doc(places, &l.poles) };
                doc.data = Some(
                    m.lines
                        .iter()
                        .enumerate()
                        .map(|(p, ls)| {
                            let entry = if ls.len() == 1 {
                                LinesDoc::One(line_doc(&ls[0]))
                            } else {
                                LinesDoc::Sum(ls.iter().map(line_doc).collect())
                            };
                            (poset.label(p).to_string(), entry)
                        })
                        .collect(),
                );
                doc.incidence = Some(edges(&m.incidence));
            }
            SheafDescriptor::Abelian(a) => {
                doc.stalks = Some(
                    (0..x.len())
                        .map(|p| {
                            let rel = &a.relations[p];
                            let relations = (0..rel.cols())
                                .map(|j| rel.column(j).iter().map(|v| i64::try_from(v).expect("fits")).collect())
                                .collect();
                            (poset.label(p).to_string(), StalkDoc { rank: a.ranks[p], relations })
                        })
                        .collect(),
                );
                doc.maps = Some(edges(&a.maps));
            }
        }
        doc
    }

    pub fn to_value(&self, x: &RingedFiniteSpace) -> Value {
        serde_json::to_value(self.to_doc(x)).expect("documents serialize")
    }
}

// --------------------------------------------------------- quasi-coherence

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcMode {
    QuasiCoherent,
    FiniteType,
}

/// Outcome of a quasi-coherence check; `failing` names the first edge
/// (or pair, in paranoid mode) whose base-change map is not as required.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QcVerdict {
    pub holds: bool,
    pub checked: usize,
    pub failing: Option<(String, String)>,
}

pub fn is_quasi_coherent(
    x: &RingedFiniteSpace,
    f: &SheafDescriptor,
    mode: QcMode,
    paranoid: bool,
) -> Result<QcVerdict> {
    f.validate(x)?;
    let poset = x.poset();
    let pairs: Vec<(usize, usize)> = if paranoid {
        (0..x.len()).flat_map(|p| (0..x.len()).filter(move |&q| poset.lt(p, q)).map(move |q| (p, q))).collect()
    } else {
        poset.hasse().to_vec()
    };
    let check: Box<dyn Fn(usize, usize) -> Result<bool>> = match f {
        SheafDescriptor::Structure => Box::new(|_, _| Ok(true)),
        SheafDescriptor::Pattern(v) => {
            if x.is_rational() {
                return Err(Error::NotApplicable("k_V is not a module over a rational structure sheaf".into()));
            }
            Box::new(move |p, q| Ok(v.contains(&p) == v.contains(&q)))
        }
        SheafDescriptor::Abelian(a) => {
            let data = a.data(poset)?;
            let coeffs = x.universe().coefficients();
            Box::new(move |p, q| {
                let (inj, surj) = module_map_kind(&data, p, q, coeffs);
                Ok(match mode {
                    QcMode::QuasiCoherent => inj && surj,
                    QcMode::FiniteType => surj,
                })
            })
        }
        SheafDescriptor::FracMono(m) => {
            let places = x.require_places()?.clone();
            let frame = LaurentFrame::of(&places);
            let data = m.data(poset)?;
            let k = places.field();
            let m = m.clone();
            let x = x.clone();
            Box::new(move |p, q| fracmono_base_change(&x, &m, &data, p, q, frame, k, &places, mode))
        }
    };
    let mut checked = 0;
    for (p, q) in pairs {
        checked += 1;
        if !check(p, q)? {
            return Ok(QcVerdict {
                holds: false,
                checked,
                failing: Some((poset.label(p).to_string(), poset.label(q).to_string())),
            });
        }
    }
    Ok(QcVerdict { holds: true, checked, failing: None })
}

/// Injectivity and surjectivity of the map of presented modules `M_p → M_q`.
pub fn module_map_kind(data: &StalkData, p: usize, q: usize, coeffs: Coefficients) -> (bool, bool) {
    let r = data.map(p, q);
    let (a, b) = (&data.relations[p], &data.relations[q]);
    let joint = r.hcat(b);
    match coeffs {
        Coefficients::Field(k) => {
            let rank_joint = joint.to_field(k).rank();
            let surj = rank_joint == r.rows();
            // dim of the preimage of im B, against dim of im A
            let pre = r.cols() + b.to_field(k).rank() - rank_joint;
            (pre == a.to_field(k).rank(), surj)
        }
        Coefficients::Integers => {
            let s = smith_normal_form(&joint);
            let surj = s.rank() == r.rows() && s.torsion().is_empty();
            let ker = kernel_basis(&r.hcat(&b.neg()));
            let pre: Vec<Vec<BigInt>> = (0..ker.cols()).map(|j| ker.column(j)[..r.cols()].to_vec()).collect();
            let pre = IntMatrix::from_columns(r.cols(), &pre);
            let inj = pre.is_zero() || contains_columns(a, &pre);
            (inj, surj)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn fracmono_base_change(
    x: &RingedFiniteSpace,
    m: &FracMono,
    data: &StalkData,
    p: usize,
    q: usize,
    frame: LaurentFrame,
    k: Field,
    places: &PlaceList,
    mode: QcMode,
) -> Result<bool> {
    let t_q = x.poles(q);
    let changed: Vec<Line> = m.lines[p].iter().map(|l| l.base_change(&t_q, frame)).collect::<Result<_>>()?;
    let mut exps: Vec<i64> = changed.iter().map(|l| l.exp).collect();
    exps.extend(m.lines[q].iter().map(|l| l.exp));
    let e = data.map(p, q);
    for GradeClass { grade: g, .. } in grade_classes(places, frame, &exps) {
        let cols: Vec<usize> = (0..changed.len()).filter(|&i| changed[i].contains(g, frame)).collect();
        let rows: Vec<usize> = (0..m.lines[q].len()).filter(|&j| m.lines[q][j].contains(g, frame)).collect();
        let sub: Vec<Vec<BigInt>> = rows.iter().map(|&j| cols.iter().map(|&i| e.get(j, i).clone()).collect()).collect();
        let rank = IntMatrix::from_rows(cols.len(), &sub).to_field(k).rank();
        let ok = match mode {
            QcMode::QuasiCoherent => rank == rows.len() && rank == cols.len(),
            QcMode::FiniteType => rank == rows.len(),
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

// ----------------------------------------------------------------- pullback

/// `f^*F`: stalkwise base change `F_{f(x)} ⊗ O_x`.
pub fn pullback(f: &MorphismDescriptor, sheaf: &SheafDescriptor) -> Result<SheafDescriptor> {
    sheaf.validate(&f.target)?;
    let src = f.source.poset();
    let map = &f.map;
    Ok(match sheaf {
        SheafDescriptor::Structure => SheafDescriptor::Structure,
        SheafDescriptor::Pattern(v) => SheafDescriptor::Pattern(f.preimage(v)),
        SheafDescriptor::FracMono(m) => {
            let frame = LaurentFrame::of(f.source.require_places()?);
            let data = m.data(f.target.poset())?;
            let lines = (0..f.source.len())
                .map(|x| {
                    let t = f.source.poles(x);
                    m.lines[map[x]].iter().map(|l| l.base_change(&t, frame)).collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let incidence = src.hasse().iter().map(|&(a, b)| ((a, b), data.map(map[a], map[b]).clone())).collect();
            SheafDescriptor::FracMono(FracMono { lines, incidence })
        }
        SheafDescriptor::Abelian(a) => {
            let data = a.data(f.target.poset())?;
            SheafDescriptor::Abelian(AbelianSheaf {
                ranks: map.iter().map(|&y| a.ranks[y]).collect(),
                relations: map.iter().map(|&y| a.relations[y].clone()).collect(),
                maps: src.hasse().iter().map(|&(a, b)| ((a, b), data.map(map[a], map[b]).clone())).collect(),
            })
        }
    })
}

/// `~M` on `X` for a module `M` over the stalk of a one-point target.
pub fn tilde(f: &MorphismDescriptor, module: &SheafDescriptor) -> Result<SheafDescriptor> {
    if f.target.len() != 1 {
        return Err(Error::InvalidMorphism("tilde needs a one-point target".into()));
    }
    pullback(f, module)
}

/// Whether two descriptors present the same sheaf up to the normalizations
/// used here (the structure sheaf equals its fractional-monomial form).
pub fn same_sheaf(x: &RingedFiniteSpace, a: &SheafDescriptor, b: &SheafDescriptor) -> Result<bool> {
    let expand = |s: &SheafDescriptor| -> Result<SheafDescriptor> {
        Ok(match (s, x.universe()) {
            (SheafDescriptor::Structure, Universe::Rational(_)) => {
                SheafDescriptor::FracMono(SheafDescriptor::structure_as_fracmono(x)?)
            }
            (SheafDescriptor::Structure, Universe::Topological(_)) => {
                SheafDescriptor::Abelian(AbelianSheaf::constant(x.poset(), 1, IntMatrix::zeros(1, 0)))
            }
            _ => s.clone(),
        })
    };
    Ok(expand(a)? == expand(b)?)
}

// ------------------------------------------------- kernels and cokernels

/// A morphism of abelian sheaves: one integer matrix per point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbelianMorphism {
    pub source: AbelianSheaf,
    pub target: AbelianSheaf,
    pub components: Vec<IntMatrix>,
}

impl AbelianMorphism {
    pub fn new(poset: &FinitePoset, source: AbelianSheaf, target: AbelianSheaf, components: Vec<IntMatrix>) -> Result<Self> {
        let (ds, dt) = (source.data(poset)?, target.data(poset)?);
        for (p, c) in components.iter().enumerate() {
            if c.rows() != target.ranks[p] || c.cols() != source.ranks[p] {
                return Err(Error::InvalidSheaf(format!("component at {} has wrong shape", poset.label(p))));
            }
            let img = c.mul(&source.relations[p]);
            if !img.is_zero() && !contains_columns(&target.relations[p], &img) {
                return Err(Error::InvalidSheaf(format!("component at {} is not well defined", poset.label(p))));
            }
        }
        for &(p, q) in poset.hasse() {
            let diff = components[q].mul(ds.map(p, q)).sub(&dt.map(p, q).mul(&components[p]));
            if !diff.is_zero() && !contains_columns(&target.relations[q], &diff) {
                return Err(Error::InvalidSheaf(format!(
                    "components do not commute with restriction {} -> {}",
                    poset.label(p),
                    poset.label(q)
                )));
            }
        }
        Ok(AbelianMorphism { source, target, components })
    }

    /// Kernel, for free source and target stalks.
    pub fn kernel(&self, poset: &FinitePoset) -> Result<AbelianSheaf> {
        let free = |s: &AbelianSheaf| s.relations.iter().all(IntMatrix::is_zero);
        if !free(&self.source) || !free(&self.target) {
            return Err(Error::Unsupported("kernels are computed for free stalks only".into()));
        }
        let ds = self.source.data(poset)?;
        let bases: Vec<IntMatrix> = self.components.iter().map(kernel_basis).collect();
        let mut maps = BTreeMap::new();
        for &(p, q) in poset.hasse() {
            let img = ds.map(p, q).mul(&bases[p]);
            let cols: Vec<Vec<BigInt>> = (0..img.cols())
                .map(|j| solve_integral(&bases[q], &img.column(j)).expect("restriction preserves kernels"))
                .collect();
            maps.insert((p, q), IntMatrix::from_columns(bases[q].cols(), &cols));
        }
        let ranks: Vec<usize> = bases.iter().map(IntMatrix::cols).collect();
        Ok(AbelianSheaf { relations: ranks.iter().map(|&r| IntMatrix::zeros(r, 0)).collect(), ranks, maps })
    }

    /// Cokernel `N_p / (im φ_p + relations)`.
    pub fn cokernel(&self) -> AbelianSheaf {
        AbelianSheaf {
            ranks: self.target.ranks.clone(),
            relations: self
                .components
                .iter()
                .zip(&self.target.relations)
                .map(|(c, r)| c.hcat(r))
                .collect(),
            maps: self.target.maps.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::pole_ids;

    fn s1() -> RingedFiniteSpace {
        RingedFiniteSpace::topological(
            FinitePoset::from_relations(&["a", "b", "c", "d"], &[("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")])
                .unwrap(),
            Coefficients::Integers,
        )
    }

    fn p1() -> RingedFiniteSpace {
        RingedFiniteSpace::from_json(
            r#"{"universe": {"kind": "rational"},
                "points": [{"id": "p", "poles": ["inf"]}, {"id": "q", "poles": ["zero"]}, {"id": "g", "poles": ["zero", "inf"]}],
                "relations": [["p", "g"], ["q", "g"]]}"#,
        )
        .unwrap()
    }

    fn twist(x: &RingedFiniteSpace, n: i64) -> SheafDescriptor {
        SheafDescriptor::from_json(
            x,
            &format!(
                r#"{{"kind":"fracmono","data":{{"p":{{"exp":0,"poles":["inf"]}},"q":{{"exp":{n},"poles":["zero"]}},"g":{{"exp":0,"poles":["zero","inf"]}}}}}}"#
            ),
        )
        .unwrap()
    }

    #[test]
    fn locally_constant_is_quasi_coherent() {
        let x = s1();
        let f = SheafDescriptor::Abelian(AbelianSheaf::constant(x.poset(), 1, IntMatrix::zeros(1, 0)));
        assert!(is_quasi_coherent(&x, &f, QcMode::QuasiCoherent, false).unwrap().holds);
    }

    #[test]
    fn doubling_restriction() {
        let x = s1();
        let doc = r#"{"kind":"abelian","stalks":{"a":{"rank":1},"b":{"rank":1},"c":{"rank":1},"d":{"rank":1}},
            "maps":[{"from":"a","to":"c","matrix":[[2]]}]}"#;
        let f = SheafDescriptor::from_json(&x, doc).unwrap();
        let qc = is_quasi_coherent(&x, &f, QcMode::QuasiCoherent, false).unwrap();
        assert!(!qc.holds);
        assert_eq!(qc.failing, Some(("a".into(), "c".into())));
        assert!(!is_quasi_coherent(&x, &f, QcMode::FiniteType, false).unwrap().holds);
        // over F_3 the same matrix is invertible
        let x3 = RingedFiniteSpace::topological(x.poset().clone(), Coefficients::Field(Field::prime(3).unwrap()));
        assert!(is_quasi_coherent(&x3, &f, QcMode::QuasiCoherent, true).unwrap().holds);
    }

    #[test]
    fn torsion_quotients() {
        let x = s1();
        // Z -> Z/3 at a<c is surjective, not injective
        let doc = r#"{"kind":"abelian","stalks":{"a":{"rank":1},"b":{"rank":1,"relations":[[3]]},
            "c":{"rank":1,"relations":[[3]]},"d":{"rank":1,"relations":[[3]]}},"maps":[]}"#;
        let f = SheafDescriptor::from_json(&x, doc).unwrap();
        assert!(!is_quasi_coherent(&x, &f, QcMode::QuasiCoherent, false).unwrap().holds);
        assert!(is_quasi_coherent(&x, &f, QcMode::FiniteType, false).unwrap().holds);
        // Z/3 -> Z is not well defined
        let bad = r#"{"kind":"abelian","stalks":{"a":{"rank":1,"relations":[[3]]},"b":{"rank":1},
            "c":{"rank":1},"d":{"rank":1}},"maps":[]}"#;
        assert!(SheafDescriptor::from_json(&x, bad).is_err());
    }

    #[test]
    fn twists_on_the_line() {
        let x = p1();
        for n in -3..=3 {
            assert!(is_quasi_coherent(&x, &twist(&x, n), QcMode::QuasiCoherent, true).unwrap().holds);
        }
        // x^1 k[x] at p is not the base change of anything at g's scale
        let doc = r#"{"kind":"fracmono","data":{"p":{"exp":1,"poles":["inf"]},"q":{"exp":0,"poles":["zero"]},
            "g":{"exp":0,"poles":["zero","inf"]}}}"#;
        let f = SheafDescriptor::from_json(&x, doc).unwrap();
        assert!(is_quasi_coherent(&x, &f, QcMode::QuasiCoherent, false).unwrap().holds);
        let not_module = r#"{"kind":"fracmono","data":{"p":{"exp":0,"poles":[]},"q":{"exp":0,"poles":["zero"]},
            "g":{"exp":0,"poles":["zero","inf"]}}}"#;
        assert!(SheafDescriptor::from_json(&x, not_module).is_err());
    }

    #[test]
    fn non_qc_line() {
        // k[x] at p sitting inside k(x) at g: base change gives k[x], not k(x)
        let x = RingedFiniteSpace::from_json(
            r#"{"universe": {"kind": "rational"}, "points": [{"id": "p", "poles": ["inf"]}, {"id": "g", "poles": ["inf"]}],
                "relations": [["p", "g"]]}"#,
        )
        .unwrap();
        let doc = r#"{"kind":"fracmono","data":{"p":{"exp":0,"poles":["inf"]},"g":{"exp":0,"poles":"ALL"}}}"#;
        let f = SheafDescriptor::from_json(&x, doc).unwrap();
        assert!(!is_quasi_coherent(&x, &f, QcMode::QuasiCoherent, false).unwrap().holds);
    }

    #[test]
    fn pullbacks() {
        let dl = RingedFiniteSpace::from_json(
            r#"{"universe": {"kind": "rational"},
                "points": [{"id": "p", "poles": ["inf"]}, {"id": "q", "poles": ["inf"]}, {"id": "g", "poles": "ALL"}],
                "relations": [["p", "g"], ["q", "g"]]}"#,
        )
        .unwrap();
        let pl = dl.places().unwrap().clone();
        let f = MorphismDescriptor::to_point(&dl, pole_ids(&pl, &["inf"])).unwrap();
        let m = SheafDescriptor::FracMono(FracMono::line_bundle(f.target.poset(), vec![Line::new(0, pole_ids(&pl, &["inf"]))]));
        let t = tilde(&f, &m).unwrap();
        assert!(same_sheaf(&dl, &t, &SheafDescriptor::Structure).unwrap());

        let x = s1();
        let g = MorphismDescriptor::to_point(&x, PoleSet::empty()).unwrap();
        let z3 = SheafDescriptor::Abelian(AbelianSheaf::constant(g.target.poset(), 1, IntMatrix::from_i64(&[&[3]])));
        let pulled = pullback(&g, &z3).unwrap();
        assert_eq!(pulled, SheafDescriptor::Abelian(AbelianSheaf::constant(x.poset(), 1, IntMatrix::from_i64(&[&[3]]))));

        let id = MorphismDescriptor::identity(&p1());
        let tw = twist(&p1(), 2);
        assert_eq!(pullback(&id, &tw).unwrap(), tw);
    }

    #[test]
    fn kernels_and_cokernels() {
        let x = s1();
        let z2 = AbelianSheaf::constant(x.poset(), 2, IntMatrix::zeros(2, 0));
        let phi = IntMatrix::from_i64(&[&[1, 1], &[2, 2]]);
        let m = AbelianMorphism::new(x.poset(), z2.clone(), z2, vec![phi; 4]).unwrap();
        let k = SheafDescriptor::Abelian(m.kernel(x.poset()).unwrap());
        let c = SheafDescriptor::Abelian(m.cokernel());
        assert!(is_quasi_coherent(&x, &k, QcMode::QuasiCoherent, true).unwrap().holds);
        assert!(is_quasi_coherent(&x, &c, QcMode::QuasiCoherent, true).unwrap().holds);
    }

    #[test]
    fn intervals() {
        assert_eq!(laurent_intervals(&[]), vec![(None, None)]);
        assert_eq!(
            laurent_intervals(&[0, 3, 4]),
            vec![
                (None, Some(-1)),
                (Some(0), Some(0)),
                (Some(1), Some(2)),
                (Some(3), Some(3)),
                (Some(4), Some(4)),
                (Some(5), None)
            ]
        );
    }
}
