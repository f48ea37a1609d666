//! Decision procedures for schematic, semi-separated and affine spaces and
//! morphisms. Each procedure lists the obligations it checked and stops at
//! the first failing one.

use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::arith::places::{PlaceList, PoleSet};
use crate::cohomology::{base_change_failure, sheaf_cohomology};
use crate::error::Result;
use crate::poset::{FinitePoset, PointSet};
use crate::sheaf::SheafDescriptor;
use crate::space::{poles_to_doc, MorphismDescriptor, PolesDoc, RingedFiniteSpace, Universe};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    True,
    False,
    Unknown,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::True => 0,
            Verdict::False => 1,
            Verdict::Unknown => 2,
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Verdict::True => s.serialize_bool(true),
            Verdict::False => s.serialize_bool(false),
            Verdict::Unknown => s.serialize_str("unknown"),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::True => "true",
            Verdict::False => "false",
            Verdict::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Obligation {
    pub name: String,
    pub holds: bool,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateVerdict {
    pub predicate: String,
    pub verdict: Verdict,
    pub certificate: Vec<Obligation>,
    pub counterexample: Option<Obligation>,
}

impl Serialize for PredicateVerdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("PredicateVerdict", 5)?;
        st.serialize_field("predicate", &self.predicate)?;
        st.serialize_field("verdict", &self.verdict)?;
        st.serialize_field("obligations", &self.certificate.len())?;
        st.serialize_field("counterexample", &self.counterexample)?;
        st.serialize_field("certificate", &self.certificate)?;
        st.end()
    }
}

impl PredicateVerdict {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::True
    }

    pub fn render(&self) -> String {
        let mut out = format!("{}: {}\n", self.predicate, self.verdict);
        out.push_str(&format!("obligations checked: {}\n", self.certificate.len()));
        if let Some(c) = &self.counterexample {
            out.push_str(&format!("counterexample: {} ({})\n", c.name, c.evidence));
        }
        for o in &self.certificate {
            let mark = if o.holds { "ok" } else { "FAIL" };
            out.push_str(&format!("  [{mark}] {}: {}\n", o.name, o.evidence));
        }
        out
    }
}

/// Accumulates obligations in order and records the first failure.
struct Ledger {
    predicate: String,
    certificate: Vec<Obligation>,
    failed: Option<Obligation>,
}

impl Ledger {
    fn new(predicate: &str) -> Self {
        Ledger { predicate: predicate.into(), certificate: Vec::new(), failed: None }
    }

    /// Returns `false` once an obligation has failed.
    fn check(&mut self, name: String, holds: bool, evidence: String) -> bool {
        let o = Obligation { name, holds, evidence };
        if !holds && self.failed.is_none() {
            self.failed = Some(o.clone());
        }
        self.certificate.push(o);
        holds
    }

    fn ok(&self) -> bool {
        self.failed.is_none()
    }

    fn finish(self) -> PredicateVerdict {
        let verdict = if self.failed.is_some() { Verdict::False } else { Verdict::True };
        self.with(verdict)
    }

    fn with(self, verdict: Verdict) -> PredicateVerdict {
        PredicateVerdict {
            predicate: self.predicate,
            verdict,
            certificate: self.certificate,
            counterexample: if verdict == Verdict::False { self.failed } else { None },
        }
    }
}

pub(crate) fn show_poles(places: Option<&PlaceList>, t: &PoleSet) -> String {
    match places {
        Some(pl) => match poles_to_doc(pl, t) {
            PolesDoc::Ids(ids) => format!("{{{}}}", ids.join(",")),
            PolesDoc::Symbol(s) => s,
        },
        None => "-".into(),
    }
}

fn show_set(poset: &FinitePoset, set: &PointSet) -> String {
    format!("{{{}}}", poset.labels_of(set).join(","))
}

fn upper(poset: &FinitePoset, p: usize, paranoid: bool) -> Vec<usize> {
    if paranoid {
        (0..poset.len()).filter(|&q| poset.lt(p, q)).collect()
    } else {
        poset.covers(p)
    }
}

fn meet(poset: &FinitePoset, p: usize, q: usize) -> PointSet {
    poset.minimal_open(p).intersection(&poset.minimal_open(q)).copied().collect()
}

/// Base change `H^i(A) ⊗ R_L → H^i(B)` for `i` in `degrees`, as one obligation.
fn base_change(
    ledger: &mut Ledger,
    x: &RingedFiniteSpace,
    name: String,
    a: &PointSet,
    b: &PointSet,
    l: &PoleSet,
    degrees: std::ops::Range<usize>,
) -> Result<bool> {
    let places = x.places();
    let loc = show_poles(places, l);
    let evidence = match base_change_failure(x, &SheafDescriptor::Structure, a, b, l, degrees.clone())? {
        None => format!("iso in degrees {}..{} after localizing at {loc}", degrees.start, degrees.end),
        Some((class, i)) => {
            let ev = format!("class {class} degree {i} not an isomorphism after localizing at {loc}");
            return Ok(ledger.check(name, false, ev));
        }
    };
    Ok(ledger.check(name, true, evidence))
}

fn acyclic(ledger: &mut Ledger, x: &RingedFiniteSpace, name: String, open: &PointSet) -> Result<bool> {
    let report = sheaf_cohomology(x, open, &SheafDescriptor::Structure)?;
    let holds = report.is_acyclic();
    let evidence = if holds {
        "H^i = 0 for i > 0".to_string()
    } else {
        let i = (1..report.degrees.len()).find(|&i| !report.degrees[i].is_zero()).unwrap_or(1);
        format!("H^{i} = {}", report.render_degree(i, x.places()))
    };
    Ok(ledger.check(name, holds, evidence))
}

/// Base-change obligations over every ordered pair and every edge `p ⋖ p′`
/// (all `p < p′` when paranoid).
fn pair_obligations(
    ledger: &mut Ledger,
    x: &RingedFiniteSpace,
    degrees: std::ops::Range<usize>,
    paranoid: bool,
) -> Result<()> {
    let poset = x.poset();
    for p in 0..poset.len() {
        for q in 0..poset.len() {
            let a = meet(poset, p, q);
            if a.is_empty() {
                continue;
            }
            for p2 in upper(poset, p, paranoid) {
                let b = meet(poset, p2, q);
                let name = format!(
                    "U({},{}) -> U({},{})",
                    poset.label(p),
                    poset.label(q),
                    poset.label(p2),
                    poset.label(q)
                );
                if !base_change(ledger, x, name, &a, &b, &x.poles(p2), degrees.clone())? {
                    return Ok(());
                }
            }
        }
    }
    Ok(())
}

pub fn is_schematic(x: &RingedFiniteSpace, paranoid: bool) -> Result<PredicateVerdict> {
    let mut ledger = Ledger::new("schematic");
    let poset = x.poset();
    match x.universe() {
        Universe::Topological(_) => {
            for c in poset.components(&poset.all()) {
                let name = format!("component {} irreducible", show_set(poset, &c));
                let (holds, evidence) = match poset.maximum(&c) {
                    Some(m) => (true, format!("maximum {}", poset.label(m))),
                    None => {
                        let tops: Vec<&str> = poset.maxima(&c).into_iter().map(|m| poset.label(m)).collect();
                        (false, format!("maximal points {}", tops.join(",")))
                    }
                };
                if !ledger.check(name, holds, evidence) {
                    break;
                }
            }
        }
        Universe::Rational(_) => pair_obligations(&mut ledger, x, 0..poset.dim() + 1, paranoid)?,
    }
    Ok(ledger.finish())
}

/// Schematic via base change of every `H^i(U_pq)`, in either universe.
pub fn is_schematic_by_base_change(x: &RingedFiniteSpace, paranoid: bool) -> Result<PredicateVerdict> {
    let mut ledger = Ledger::new("schematic");
    pair_obligations(&mut ledger, x, 0..x.poset().dim() + 1, paranoid)?;
    Ok(ledger.finish())
}

pub fn is_semi_separated(x: &RingedFiniteSpace, paranoid: bool) -> Result<PredicateVerdict> {
    let mut ledger = Ledger::new("semi-separated");
    let poset = x.poset();
    pair_obligations(&mut ledger, x, 0..1, paranoid)?;
    if ledger.ok() {
        'outer: for p in 0..poset.len() {
            for q in p..poset.len() {
                let a = meet(poset, p, q);
                let name = format!("U({},{}) = {} acyclic", poset.label(p), poset.label(q), show_set(poset, &a));
                if !acyclic(&mut ledger, x, name, &a)? {
                    break 'outer;
                }
            }
        }
    }
    Ok(ledger.finish())
}

/// Every valid space has flat restrictions: they are localizations (rational)
/// or identities (topological).
pub fn is_finite_space(x: &RingedFiniteSpace) -> PredicateVerdict {
    let mut ledger = Ledger::new("finite");
    let poset = x.poset();
    for &(p, q) in poset.hasse() {
        let evidence = match x.places() {
            Some(pl) => format!(
                "{} -> {} is a localization",
                show_poles(Some(pl), &x.poles(p)),
                show_poles(Some(pl), &x.poles(q))
            ),
            None => "identity restriction".into(),
        };
        ledger.check(format!("{} <= {} flat", poset.label(p), poset.label(q)), true, evidence);
    }
    ledger.finish()
}

pub fn is_affine(x: &RingedFiniteSpace) -> Result<PredicateVerdict> {
    let mut ledger = Ledger::new("affine");
    let poset = x.poset();
    if poset.is_empty() {
        ledger.check("empty space".into(), true, "Spec of the zero ring".into());
        return Ok(ledger.finish());
    }
    match x.universe() {
        Universe::Topological(coeffs) => {
            let core = poset.core_reduction();
            if core.core.len() == 1 {
                ledger.check("core is a point".into(), true, format!("beat points removed: {}", core.removed.len()));
                return Ok(ledger.finish());
            }
            let h = poset.order_complex_homology(&poset.all(), *coeffs);
            let reduced_nonzero = h.iter().enumerate().any(|(i, g)| {
                if i == 0 {
                    g.rank != 1 || !g.torsion.is_empty()
                } else {
                    !g.is_zero()
                }
            });
            let shown: Vec<String> = h.iter().map(ToString::to_string).collect();
            if reduced_nonzero {
                ledger.check(
                    "reduced homology vanishes".into(),
                    false,
                    format!("order complex homology [{}]", shown.join(", ")),
                );
                Ok(ledger.finish())
            } else {
                ledger.check(
                    "core is a point".into(),
                    false,
                    format!("core has {} points but reduced homology vanishes", core.core.len()),
                );
                Ok(ledger.with(Verdict::Unknown))
            }
        }
        Universe::Rational(places) => {
            if let Some(m) = poset.minimum(&poset.all()) {
                ledger.check("minimum".into(), true, format!("X = U_{}", poset.label(m)));
                return Ok(ledger.finish());
            }
            let sch = is_schematic(x, false)?;
            let sch_ok = sch.holds();
            let ev = match &sch.counterexample {
                None => format!("{} obligations", sch.certificate.len()),
                Some(c) => format!("{}: {}", c.name, c.evidence),
            };
            if !ledger.check("schematic".into(), sch_ok, ev) {
                return Ok(ledger.finish());
            }
            if !acyclic(&mut ledger, x, "X acyclic".into(), &poset.all())? {
                return Ok(ledger.finish());
            }
            let common = x.common_poles(&poset.all());
            let shown = show_poles(Some(places), &common);
            if common.is_empty() {
                'outer: for p in 0..poset.len() {
                    for q in p..poset.len() {
                        let holds = x.poles(p).is_empty() || x.poles(q).is_empty();
                        let name = format!("O_{} (x) O_{} battery", poset.label(p), poset.label(q));
                        let ev = format!(
                            "common poles empty; stalks {} and {}",
                            x.stalk_name(p),
                            x.stalk_name(q)
                        );
                        if !ledger.check(name, holds, ev) {
                            break 'outer;
                        }
                    }
                }
            } else {
                ledger.check("tensor battery".into(), true, format!("common poles {shown}"));
            }
            Ok(ledger.finish())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphismMode {
    Schematic,
    LocallyAcyclic,
}

pub fn is_schematic_morphism(f: &MorphismDescriptor, mode: MorphismMode, paranoid: bool) -> Result<PredicateVerdict> {
    f.source.same_universe(&f.target)?;
    let name = match mode {
        MorphismMode::Schematic => "schematic morphism",
        MorphismMode::LocallyAcyclic => "locally acyclic morphism",
    };
    let mut ledger = Ledger::new(name);
    let x = &f.source;
    let xs = x.poset();
    let ys = f.target.poset();
    let degrees = 0..xs.dim() + 1;
    'outer: for a in 0..xs.len() {
        for b in 0..ys.len() {
            let u = f.u_xy(a, b);
            if u.is_empty() {
                continue;
            }
            for a2 in upper(xs, a, paranoid) {
                let v = f.u_xy(a2, b);
                let name = format!("U({},{}) -> U({},{})", xs.label(a), ys.label(b), xs.label(a2), ys.label(b));
                if !base_change(&mut ledger, x, name, &u, &v, &x.poles(a2), degrees.clone())? {
                    break 'outer;
                }
            }
            for b2 in upper(ys, b, paranoid) {
                let v = f.u_xy(a, b2);
                let name = format!("U({},{}) -> U({},{})", xs.label(a), ys.label(b), xs.label(a), ys.label(b2));
                if !base_change(&mut ledger, x, name, &u, &v, &f.target.poles(b2), degrees.clone())? {
                    break 'outer;
                }
            }
            if mode == MorphismMode::LocallyAcyclic {
                let name = format!("U({},{}) acyclic", xs.label(a), ys.label(b));
                if !acyclic(&mut ledger, x, name, &u)? {
                    break 'outer;
                }
            }
        }
    }
    Ok(ledger.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffineMode {
    Affine,
    WeakEquivalence,
}

/// Whether `H^0(f^{-1}(U_y), O) = O_y`.
fn sections_match(f: &MorphismDescriptor, y: usize) -> (bool, String) {
    let x = &f.source;
    let pre = f.preimage_of_star(y);
    let comps = x.poset().components(&pre);
    if comps.len() != 1 {
        return (false, format!("preimage has {} components", comps.len()));
    }
    match x.places() {
        Some(pl) => {
            let got = x.common_poles(&pre);
            let want = f.target.poles(y);
            let ev = format!("sections {} vs stalk {}", show_poles(Some(pl), &got), show_poles(Some(pl), &want));
            (got == want, ev)
        }
        None => (true, "connected preimage".into()),
    }
}

pub fn is_affine_morphism(f: &MorphismDescriptor, mode: AffineMode, paranoid: bool) -> Result<PredicateVerdict> {
    let name = match mode {
        AffineMode::Affine => "affine morphism",
        AffineMode::WeakEquivalence => "weak equivalence",
    };
    let mut ledger = Ledger::new(name);
    let sch = is_schematic_morphism(f, MorphismMode::Schematic, paranoid)?;
    let ev = match &sch.counterexample {
        None => format!("{} obligations", sch.certificate.len()),
        Some(c) => format!("{}: {}", c.name, c.evidence),
    };
    if !ledger.check("schematic".into(), sch.holds(), ev) {
        return Ok(ledger.finish());
    }
    let ys = f.target.poset();
    let mut unknown = false;
    for y in 0..ys.len() {
        let pre = f.preimage_of_star(y);
        let (sub, _) = f.source.restrict(&pre)?;
        let v = is_affine(&sub)?;
        let ev = match &v.counterexample {
            None => format!("{} on {}", v.verdict, show_set(f.source.poset(), &pre)),
            Some(c) => format!("{}: {}", c.name, c.evidence),
        };
        let name = format!("preimage of U_{} affine", ys.label(y));
        match v.verdict {
            Verdict::True => {
                ledger.check(name, true, ev);
            }
            Verdict::False => {
                ledger.check(name, false, ev);
                return Ok(ledger.finish());
            }
            Verdict::Unknown => {
                unknown = true;
                ledger.certificate.push(Obligation { name, holds: false, evidence: ev });
            }
        }
        if mode == AffineMode::WeakEquivalence {
            let (holds, ev) = sections_match(f, y);
            if !ledger.check(format!("f_*O = O at {}", ys.label(y)), holds, ev) {
                return Ok(ledger.finish());
            }
        }
    }
    Ok(if unknown { ledger.with(Verdict::Unknown) } else { ledger.finish() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::homology::Coefficients;
    use crate::space::pole_ids;

    fn wedge() -> FinitePoset {
        FinitePoset::from_relations(&["p", "q", "g"], &[("p", "g"), ("q", "g")]).unwrap()
    }

    fn ringed(poset: FinitePoset, poles: &[(&str, Option<&[&str]>)]) -> RingedFiniteSpace {
        let pl = PlaceList::standard(crate::arith::field::Field::Rationals);
        let mut t = vec![PoleSet::empty(); poset.len()];
        for (label, ids) in poles {
            t[poset.index_of(label).unwrap()] = match ids {
                Some(ids) => pole_ids(&pl, ids),
                None => PoleSet::All,
            };
        }
        RingedFiniteSpace::rational(poset, pl, t).unwrap()
    }

    fn dl() -> RingedFiniteSpace {
        ringed(wedge(), &[("p", Some(&["inf"])), ("q", Some(&["inf"])), ("g", None)])
    }

    fn p1() -> RingedFiniteSpace {
        ringed(wedge(), &[("p", Some(&["inf"])), ("q", Some(&["zero"])), ("g", Some(&["zero", "inf"]))])
    }

    fn s1() -> RingedFiniteSpace {
        let p = FinitePoset::from_relations(
            &["a", "b", "c", "d"],
            &[("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")],
        )
        .unwrap();
        RingedFiniteSpace::topological(p, Coefficients::Integers)
    }

    fn vee() -> RingedFiniteSpace {
        let p = FinitePoset::from_relations(&["m", "a", "b"], &[("m", "a"), ("m", "b")]).unwrap();
        RingedFiniteSpace::topological(p, Coefficients::Integers)
    }

    #[test]
    fn doubled_line() {
        let x = dl();
        assert!(is_schematic(&x, false).unwrap().holds());
        assert!(is_schematic(&x, true).unwrap().holds());
        assert!(is_semi_separated(&x, false).unwrap().holds());
        let a = is_affine(&x).unwrap();
        assert_eq!(a.verdict, Verdict::False);
        assert_eq!(a.counterexample.unwrap().name, "X acyclic");
    }

    #[test]
    fn projective_line() {
        let x = p1();
        assert!(is_schematic(&x, false).unwrap().holds());
        assert!(is_semi_separated(&x, false).unwrap().holds());
        let a = is_affine(&x).unwrap();
        assert_eq!(a.verdict, Verdict::False);
        assert!(a.counterexample.unwrap().name.contains("battery"));
    }

    #[test]
    fn topological_examples() {
        let s = s1();
        assert_eq!(is_schematic(&s, false).unwrap().verdict, Verdict::False);
        assert_eq!(is_schematic_by_base_change(&s, false).unwrap().verdict, Verdict::False);
        assert_eq!(is_semi_separated(&s, false).unwrap().verdict, Verdict::False);
        assert_eq!(is_affine(&s).unwrap().verdict, Verdict::False);
        let w = RingedFiniteSpace::topological(wedge(), Coefficients::Integers);
        assert!(is_schematic(&w, false).unwrap().holds());
        assert!(is_schematic_by_base_change(&w, false).unwrap().holds());
        assert!(is_affine(&vee()).unwrap().holds());
        assert!(!is_schematic(&vee(), false).unwrap().holds());
    }

    #[test]
    fn verdict_json_shape() {
        let v = is_schematic(&dl(), false).unwrap();
        let j = serde_json::to_value(&v).unwrap();
        assert_eq!(j["predicate"], "schematic");
        assert_eq!(j["verdict"], true);
        assert_eq!(j["obligations"], v.certificate.len());
        assert!(j["counterexample"].is_null());
    }

    #[test]
    fn morphisms() {
        let x = dl();
        let id = MorphismDescriptor::identity(&x);
        assert!(is_schematic_morphism(&id, MorphismMode::Schematic, false).unwrap().holds());
        let pt = MorphismDescriptor::to_point(&x, PoleSet::empty()).unwrap();
        assert!(is_schematic_morphism(&pt, MorphismMode::Schematic, false).unwrap().holds());
        assert_eq!(is_affine_morphism(&pt, AffineMode::Affine, false).unwrap().verdict, Verdict::False);
        let g: PointSet = [x.index_of("g").unwrap()].into_iter().collect();
        let j = MorphismDescriptor::open_inclusion(&x, &g).unwrap();
        assert!(is_schematic_morphism(&j, MorphismMode::Schematic, false).unwrap().holds());
        assert!(is_schematic_morphism(&j, MorphismMode::LocallyAcyclic, false).unwrap().holds());
        assert!(is_affine_morphism(&id, AffineMode::WeakEquivalence, false).unwrap().holds());
    }

    #[test]
    fn space_with_minimum_is_affine() {
        let chain = FinitePoset::from_relations(&["p", "g"], &[("p", "g")]).unwrap();
        let x = ringed(chain, &[("p", Some(&["inf"])), ("g", Some(&["zero", "inf"]))]);
        assert!(is_affine(&x).unwrap().holds());
        assert!(is_finite_space(&x).holds());
    }
}
