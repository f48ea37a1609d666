//! Spec of a rational ringed finite space as charts `Spec O_p` glued along
//! the restriction maps.

use serde::Serialize;

use crate::arith::places::{PlaceList, PoleSet};
use crate::error::{Error, Result};
use crate::predicates::{is_affine, is_affine_morphism, show_poles, AffineMode, PredicateVerdict, Verdict};
use crate::space::{poles_to_doc, ring_name, MorphismDescriptor, PolesDoc, RingedFiniteSpace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RingDoc {
    pub poles: PolesDoc,
    pub name: String,
}

impl RingDoc {
    fn of(places: &PlaceList, t: &PoleSet) -> Self {
        RingDoc { poles: poles_to_doc(places, t), name: ring_name(places, t) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chart {
    pub point: String,
    pub ring: RingDoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GluingClass {
    OpenImmersion,
    FlatMonoNotOpen,
}

/// The chart map `Spec O_to ← Spec O_from` for `to ≤ from`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Gluing {
    pub from: String,
    pub to: String,
    pub class: GluingClass,
    /// closed points removed by an open immersion
    pub removed: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum GlobalSections {
    Ring(RingDoc),
    Product { product: Vec<RingDoc> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AffineCollapse {
    pub ring: RingDoc,
    pub equivalent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemeDescriptor {
    pub charts: Vec<Chart>,
    pub gluings: Vec<Gluing>,
    pub is_scheme: bool,
    pub global_sections: GlobalSections,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub affine_collapse: Option<AffineCollapse>,
}

impl SchemeDescriptor {
    pub fn render(&self) -> String {
        let mut out = format!("{}\n", self.kind);
        out.push_str("charts:\n");
        for c in &self.charts {
            out.push_str(&format!("  {}: Spec {}\n", c.point, c.ring.name));
        }
        out.push_str("gluings:\n");
        for g in &self.gluings {
            let what = match (&g.class, &g.removed) {
                (GluingClass::OpenImmersion, Some(r)) if r.is_empty() => "identity".to_string(),
                (GluingClass::OpenImmersion, Some(r)) => format!("open immersion removing {}", r.join(",")),
                _ => "flat monomorphism, not open".to_string(),
            };
            out.push_str(&format!("  Spec O_{} -> Spec O_{}: {what}\n", g.from, g.to));
        }
        let sections = match &self.global_sections {
            GlobalSections::Ring(r) => r.name.clone(),
            GlobalSections::Product { product } => {
                product.iter().map(|r| r.name.as_str()).collect::<Vec<_>>().join(" x ")
            }
        };
        out.push_str(&format!("global sections: {sections}\n"));
        if let Some(a) = &self.affine_collapse {
            out.push_str(&format!("affine: Spec {}\n", a.ring.name));
        }
        out
    }
}

fn require_rational(x: &RingedFiniteSpace) -> Result<&PlaceList> {
    x.places().ok_or_else(|| Error::NotApplicable("Spec needs the rational universe".into()))
}

fn classify(places: &PlaceList, lower: &PoleSet, upper: &PoleSet) -> (GluingClass, Option<Vec<String>>) {
    match upper.difference(lower) {
        Some(d) => (GluingClass::OpenImmersion, Some(d.iter().map(|&i| places.get(i).id.clone()).collect())),
        None => (GluingClass::FlatMonoNotOpen, None),
    }
}

pub fn has_open_restrictions(x: &RingedFiniteSpace) -> Result<PredicateVerdict> {
    let places = require_rational(x)?;
    let poset = x.poset();
    let mut certificate = Vec::new();
    let mut counterexample = None;
    for &(p, q) in poset.hasse() {
        let (class, _) = classify(places, &x.poles(p), &x.poles(q));
        let holds = class == GluingClass::OpenImmersion;
        let o = crate::predicates::Obligation {
            name: format!("{} <= {} open", poset.label(p), poset.label(q)),
            holds,
            evidence: format!(
                "{} -> {}",
                show_poles(Some(places), &x.poles(p)),
                show_poles(Some(places), &x.poles(q))
            ),
        };
        certificate.push(o.clone());
        if !holds {
            counterexample = Some(o);
            break;
        }
    }
    let verdict = if counterexample.is_some() { Verdict::False } else { Verdict::True };
    Ok(PredicateVerdict { predicate: "open restrictions".into(), verdict, certificate, counterexample })
}

/// `O(X)`: one ring per connected component.
pub fn global_sections(x: &RingedFiniteSpace) -> Result<GlobalSections> {
    let places = require_rational(x)?;
    let poset = x.poset();
    let mut rings: Vec<RingDoc> =
        poset.components(&poset.all()).iter().map(|c| RingDoc::of(places, &x.common_poles(c))).collect();
    Ok(if rings.len() == 1 { GlobalSections::Ring(rings.remove(0)) } else { GlobalSections::Product { product: rings } })
}

pub fn spec_export(x: &RingedFiniteSpace) -> Result<SchemeDescriptor> {
    let places = require_rational(x)?;
    let poset = x.poset();
    let charts = (0..poset.len())
        .map(|p| Chart { point: poset.label(p).into(), ring: RingDoc::of(places, &x.poles(p)) })
        .collect();
    let mut gluings = Vec::new();
    for p in 0..poset.len() {
        for q in 0..poset.len() {
            if poset.lt(p, q) {
                let (class, removed) = classify(places, &x.poles(p), &x.poles(q));
                gluings.push(Gluing { from: poset.label(q).into(), to: poset.label(p).into(), class, removed });
            }
        }
    }
    check_cocycle(x)?;
    let is_scheme = has_open_restrictions(x)?.holds();
    let affine_collapse = if is_affine(x)?.holds() {
        Some(AffineCollapse { ring: RingDoc::of(places, &x.common_poles(&poset.all())), equivalent: true })
    } else {
        None
    };
    Ok(SchemeDescriptor {
        charts,
        gluings,
        is_scheme,
        global_sections: global_sections(x)?,
        kind: if is_scheme { "scheme" } else { "locally ringed space, not a scheme" }.into(),
        affine_collapse,
    })
}

/// Along `p < q < r`, the removed points compose.
fn check_cocycle(x: &RingedFiniteSpace) -> Result<()> {
    let poset = x.poset();
    let n = poset.len();
    for p in 0..n {
        for q in (0..n).filter(|&q| poset.lt(p, q)) {
            for r in (0..n).filter(|&r| poset.lt(q, r)) {
                let (a, b, c) = (x.poles(p), x.poles(q), x.poles(r));
                let direct = c.difference(&a);
                let composed = match (b.difference(&a), c.difference(&b)) {
                    (Some(s), Some(t)) => Some(s.union(&t).copied().collect()),
                    _ => None,
                };
                if direct.is_some() && composed.is_some() && direct != composed {
                    return Err(Error::InvalidMorphism(format!(
                        "gluings along {} < {} < {} do not compose",
                        poset.label(p),
                        poset.label(q),
                        poset.label(r)
                    )));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChartIdentification {
    pub point: String,
    pub chart: RingDoc,
    pub preimage: Vec<String>,
    pub preimage_sections: RingDoc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivalenceWitness {
    pub charts: Vec<ChartIdentification>,
    pub source: SchemeDescriptor,
    pub target: SchemeDescriptor,
    pub same_global_sections: bool,
}

/// For a weak equivalence `f: X′ → X`, identifies the glued charts over each
/// `f^{-1}(U_y)` with `Spec O_y`.
pub fn refinement_equivalence(f: &MorphismDescriptor) -> Result<EquivalenceWitness> {
    let places = require_rational(&f.target)?;
    let v = is_affine_morphism(f, AffineMode::WeakEquivalence, false)?;
    if !v.holds() {
        let why = v.counterexample.map(|c| format!("{}: {}", c.name, c.evidence)).unwrap_or_else(|| v.verdict.to_string());
        return Err(Error::NotWeakEquivalence(why));
    }
    let ys = f.target.poset();
    let mut charts = Vec::new();
    for y in 0..ys.len() {
        let pre = f.preimage_of_star(y);
        let sections = f.source.common_poles(&pre);
        let want = f.target.poles(y);
        if sections != want {
            return Err(Error::NotWeakEquivalence(format!("sections over the preimage of U_{}", ys.label(y))));
        }
        charts.push(ChartIdentification {
            point: ys.label(y).into(),
            chart: RingDoc::of(places, &want),
            preimage: f.source.poset().labels_of(&pre),
            preimage_sections: RingDoc::of(places, &sections),
        });
    }
    let source = spec_export(&f.source)?;
    let target = spec_export(&f.target)?;
    let same_global_sections = source.global_sections == target.global_sections;
    Ok(EquivalenceWitness { charts, source, target, same_global_sections })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::field::Field;
    use crate::poset::FinitePoset;
    use crate::space::pole_ids;

    fn space(points: &[&str], rel: &[(&str, &str)], poles: &[(&str, Option<&[&str]>)]) -> RingedFiniteSpace {
        let pl = PlaceList::standard(Field::Rationals);
        let poset = FinitePoset::from_relations(points, rel).unwrap();
        let mut t = vec![PoleSet::empty(); poset.len()];
        for (label, ids) in poles {
            t[poset.index_of(label).unwrap()] = ids.map_or(PoleSet::All, |ids| pole_ids(&pl, ids));
        }
        RingedFiniteSpace::rational(poset, pl, t).unwrap()
    }

    fn chain2() -> RingedFiniteSpace {
        space(&["p", "g"], &[("p", "g")], &[("p", Some(&["inf"])), ("g", Some(&["zero", "inf"]))])
    }

    fn wedge(p: Option<&[&str]>, q: Option<&[&str]>, g: Option<&[&str]>) -> RingedFiniteSpace {
        space(&["p", "q", "g"], &[("p", "g"), ("q", "g")], &[("p", p), ("q", q), ("g", g)])
    }

    #[test]
    fn chain2_collapses() {
        let d = spec_export(&chain2()).unwrap();
        assert!(d.is_scheme);
        assert_eq!(d.gluings.len(), 1);
        assert_eq!(d.gluings[0].class, GluingClass::OpenImmersion);
        assert_eq!(d.gluings[0].removed, Some(vec!["zero".to_string()]));
        assert_eq!(d.affine_collapse.unwrap().ring.name, "k[x]");
    }

    #[test]
    fn projective_line_is_a_scheme() {
        let x = wedge(Some(&["inf"]), Some(&["zero"]), Some(&["zero", "inf"]));
        assert!(has_open_restrictions(&x).unwrap().holds());
        let d = spec_export(&x).unwrap();
        assert!(d.is_scheme && d.affine_collapse.is_none());
        assert_eq!(d.global_sections, GlobalSections::Ring(RingDoc::of(x.places().unwrap(), &PoleSet::empty())));
    }

    #[test]
    fn doubled_line_is_not_a_scheme() {
        let x = wedge(Some(&["inf"]), Some(&["inf"]), None);
        let v = has_open_restrictions(&x).unwrap();
        assert_eq!(v.verdict, Verdict::False);
        let d = spec_export(&x).unwrap();
        assert!(!d.is_scheme);
        assert_eq!(d.kind, "locally ringed space, not a scheme");
        let j = serde_json::to_value(&d).unwrap();
        assert_eq!(j["is_scheme"], false);
        assert_eq!(j["global_sections"]["poles"], serde_json::json!(["inf"]));
    }

    #[test]
    fn point_of_all_and_identity_witness() {
        let pl = PlaceList::standard(Field::Rationals);
        let pt = RingedFiniteSpace::rational_point(pl, PoleSet::All);
        assert!(has_open_restrictions(&pt).unwrap().holds());
        let w = refinement_equivalence(&MorphismDescriptor::identity(&chain2())).unwrap();
        assert!(w.same_global_sections);
        assert_eq!(w.charts.len(), 2);
        let dl = wedge(Some(&["inf"]), Some(&["inf"]), None);
        let f = MorphismDescriptor::to_point(&dl, pole_ids(dl.places().unwrap(), &["inf"])).unwrap();
        assert!(matches!(refinement_equivalence(&f), Err(Error::NotWeakEquivalence(_))));
    }
}
