//! Stein factorization, fibered products, and finite models of coverings.

use std::collections::BTreeSet;

use crate::arith::places::{PlaceList, PoleSet};
use crate::error::{Error, Result};
use crate::poset::{CoveringInput, FinitePoset, PointSet};
use crate::predicates::{is_schematic, is_schematic_morphism, MorphismMode, PredicateVerdict};
use crate::space::{MorphismDescriptor, RingedFiniteSpace, Universe};

#[derive(Debug, Clone)]
pub struct SteinFactorization {
    pub middle: RingedFiniteSpace,
    pub f_prime: MorphismDescriptor,
    pub a: MorphismDescriptor,
}

/// `X → Y′ → Y` with `Y′` carrying `f_*O_X` on the points of `Y`.
pub fn stein_factorization(f: &MorphismDescriptor) -> Result<SteinFactorization> {
    for (what, v) in [
        ("morphism", is_schematic_morphism(f, MorphismMode::Schematic, false)?),
        ("source", is_schematic(&f.source, false)?),
        ("target", is_schematic(&f.target, false)?),
    ] {
        if !v.holds() {
            let why = v.counterexample.map(|c| c.name).unwrap_or_default();
            return Err(Error::NotApplicable(format!("{what} is not schematic ({why})")));
        }
    }
    let x = &f.source;
    let y = &f.target;
    let ys = y.poset();
    let mut poles = Vec::new();
    for t in 0..ys.len() {
        let pre = f.preimage_of_star(t);
        let comps = x.poset().components(&pre).len();
        if comps != 1 {
            return Err(Error::Unrepresentable(format!(
                "sections over the preimage of U_{} form a product of {comps} rings",
                ys.label(t)
            )));
        }
        poles.push(x.common_poles(&pre));
    }
    let middle = match y.universe() {
        Universe::Rational(pl) => RingedFiniteSpace::rational(ys.clone(), pl.clone(), poles)?,
        Universe::Topological(_) => y.clone(),
    };
    let f_prime = MorphismDescriptor::new(x.clone(), middle.clone(), f.map.clone())?;
    let a = MorphismDescriptor::new(middle.clone(), y.clone(), (0..ys.len()).collect())?;
    Ok(SteinFactorization { middle, f_prime, a })
}

#[derive(Debug, Clone)]
pub struct FiberedProduct {
    pub space: RingedFiniteSpace,
    /// the pair `(x, y)` behind each point of the product
    pub pairs: Vec<(usize, usize)>,
    pub p1: MorphismDescriptor,
    pub p2: MorphismDescriptor,
    pub schematic: PredicateVerdict,
    pub projections_schematic: bool,
}

/// `X ×_S Y`: pairs with `f(x) = g(y)`, componentwise order, stalks
/// `O_x ⊗_{O_s} O_y`.
pub fn fibered_product(f: &MorphismDescriptor, g: &MorphismDescriptor) -> Result<FiberedProduct> {
    if f.target != g.target {
        return Err(Error::UniverseMismatch("the two morphisms have different targets".into()));
    }
    f.source.same_universe(&g.source)?;
    let (x, y) = (&f.source, &g.source);
    let pairs: Vec<(usize, usize)> = (0..x.len())
        .flat_map(|a| (0..y.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| f.map[a] == g.map[b])
        .collect();
    let (poset, pairs) = x.poset().pair_poset(y.poset(), pairs);
    let space = match x.universe() {
        Universe::Rational(pl) => {
            let poles = pairs.iter().map(|&(a, b)| x.poles(a).union(&y.poles(b))).collect();
            RingedFiniteSpace::rational(poset, pl.clone(), poles)?
        }
        Universe::Topological(c) => RingedFiniteSpace::topological(poset, *c),
    };
    let p1 = MorphismDescriptor::new(space.clone(), x.clone(), pairs.iter().map(|p| p.0).collect())?;
    let p2 = MorphismDescriptor::new(space.clone(), y.clone(), pairs.iter().map(|p| p.1).collect())?;
    let schematic = is_schematic(&space, false)?;
    let projections_schematic = is_schematic_morphism(&p1, MorphismMode::Schematic, false)?.holds()
        && is_schematic_morphism(&p2, MorphismMode::Schematic, false)?.holds();
    Ok(FiberedProduct { space, pairs, p1, p2, schematic, projections_schematic })
}

/// Every morphism `source → target`, as point maps. Exponential; meant for
/// brute-force checks on small spaces.
pub fn all_morphisms(source: &RingedFiniteSpace, target: &RingedFiniteSpace) -> Vec<Vec<usize>> {
    let (n, m) = (source.len(), target.len());
    let mut out = Vec::new();
    let mut map = vec![0; n];
    fn go(
        i: usize,
        map: &mut Vec<usize>,
        source: &RingedFiniteSpace,
        target: &RingedFiniteSpace,
        m: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == map.len() {
            out.push(map.clone());
            return;
        }
        for t in 0..m {
            if !target.poles(t).is_subset(&source.poles(i)) {
                continue;
            }
            let sp = source.poset();
            let ok = (0..i).all(|j| {
                (!sp.leq(j, i) || target.poset().leq(map[j], t)) && (!sp.leq(i, j) || target.poset().leq(t, map[j]))
            });
            if ok {
                map[i] = t;
                go(i + 1, map, source, target, m, out);
            }
        }
    }
    if m > 0 || n == 0 {
        go(0, &mut map, source, target, m, &mut out);
    }
    out
}

/// The finite space of a covering of `S`: points are the classes
/// `s ∼ s′ ⇔ U^s = U^{s′}` and the stalk at `[s]` is `O_S(U^s)`.
#[derive(Debug, Clone)]
pub struct CoveringModel {
    pub carrier: RingedFiniteSpace,
    pub cover: Vec<PointSet>,
    pub space: RingedFiniteSpace,
    pub projection: MorphismDescriptor,
}

impl CoveringModel {
    pub fn new(carrier: &RingedFiniteSpace, cover: Vec<PointSet>) -> Result<Self> {
        let input = CoveringInput::new(carrier.poset().clone(), cover.clone())?;
        let q = input.quotient();
        let mut poles = vec![PoleSet::empty(); q.poset.len()];
        for s in 0..carrier.len() {
            let star = input.star(s);
            let comps = carrier.poset().components(&star).len();
            if comps != 1 {
                return Err(Error::Unrepresentable(format!(
                    "U^{} has {comps} components",
                    carrier.poset().label(s)
                )));
            }
            poles[q.projection[s]] = carrier.common_poles(&star);
        }
        let space = match carrier.universe() {
            Universe::Rational(pl) => RingedFiniteSpace::rational(q.poset, pl.clone(), poles)?,
            Universe::Topological(c) => RingedFiniteSpace::topological(q.poset, *c),
        };
        let projection = MorphismDescriptor::new(carrier.clone(), space.clone(), q.projection)?;
        Ok(CoveringModel { carrier: carrier.clone(), cover, space, projection })
    }

    fn star(&self, s: usize) -> PointSet {
        let mut acc = self.carrier.poset().all();
        for u in self.cover.iter().filter(|u| u.contains(&s)) {
            acc = acc.intersection(u).copied().collect();
        }
        acc
    }

    /// The morphism `X′ → X` from the model of a thinner covering, with
    /// `f ∘ π′ = π`.
    pub fn refinement_to(&self, coarse: &CoveringModel) -> Result<MorphismDescriptor> {
        if self.carrier != coarse.carrier {
            return Err(Error::InvalidMorphism("coverings of different spaces".into()));
        }
        let mut map: Vec<Option<usize>> = vec![None; self.space.len()];
        for s in 0..self.carrier.len() {
            if !self.star(s).is_subset(&coarse.star(s)) {
                return Err(Error::InvalidMorphism(format!(
                    "covering is not thinner at {}",
                    self.carrier.poset().label(s)
                )));
            }
            let (a, b) = (self.projection.map[s], coarse.projection.map[s]);
            match map[a] {
                Some(c) if c != b => {
                    return Err(Error::InvalidMorphism("refinement map is not well defined".into()))
                }
                _ => map[a] = Some(b),
            }
        }
        let map = map.into_iter().map(|m| m.expect("projections are surjective")).collect();
        MorphismDescriptor::new(self.space.clone(), coarse.space.clone(), map)
    }
}

/// A finite stand-in for the projective line: a generic point `eta` over
/// one closed point per declared place plus `other` for the remaining
/// closed points. On an open missing the closed points `F`, sections are
/// `R_F`.
pub fn projective_line_carrier(places: &PlaceList) -> Result<RingedFiniteSpace> {
    let ids: Vec<String> = (0..places.len()).map(|i| places.get(i).id.clone()).collect();
    let mut points: Vec<String> = ids.clone();
    points.push("other".into());
    points.push("eta".into());
    if ids.iter().any(|i| i == "other" || i == "eta") {
        return Err(Error::Malformed("place ids `other` and `eta` are reserved".into()));
    }
    let relations: Vec<(String, String)> = points[..points.len() - 1].iter().map(|p| (p.clone(), "eta".to_string())).collect();
    let poset = FinitePoset::from_relations(&points, &relations)?;
    let all: BTreeSet<usize> = (0..places.len()).collect();
    let mut poles = vec![PoleSet::All; poset.len()];
    for (i, id) in ids.iter().enumerate() {
        let mut t = all.clone();
        t.remove(&i);
        poles[poset.index_of(id)?] = PoleSet::Finite(t);
    }
    poles[poset.index_of("other")?] = PoleSet::Finite(all);
    RingedFiniteSpace::rational(poset, places.clone(), poles)
}

/// The open of the projective-line carrier missing the named closed points.
pub fn complement_of(carrier: &RingedFiniteSpace, removed: &[&str]) -> Result<PointSet> {
    let poset = carrier.poset();
    let gone = poset.set_from_labels(removed)?;
    Ok(poset.all().difference(&gone).copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::field::Field;
    use crate::arith::homology::Coefficients;
    use crate::predicates::{is_affine_morphism, AffineMode};
    use crate::space::pole_ids;

    fn places() -> PlaceList {
        PlaceList::standard(Field::Rationals)
    }

    fn wedge() -> FinitePoset {
        FinitePoset::from_relations(&["p", "q", "g"], &[("p", "g"), ("q", "g")]).unwrap()
    }

    fn dl() -> RingedFiniteSpace {
        let pl = places();
        let w = wedge();
        let mut t = vec![PoleSet::All; 3];
        t[w.index_of("p").unwrap()] = pole_ids(&pl, &["inf"]);
        t[w.index_of("q").unwrap()] = pole_ids(&pl, &["inf"]);
        RingedFiniteSpace::rational(w, pl, t).unwrap()
    }

    #[test]
    fn stein_of_doubled_line_to_point() {
        let x = dl();
        let f = MorphismDescriptor::to_point(&x, PoleSet::empty()).unwrap();
        let s = stein_factorization(&f).unwrap();
        assert_eq!(s.middle.poles(0), pole_ids(&places(), &["inf"]));
        assert_eq!(s.f_prime.then(&s.a).unwrap().map, f.map);
        let g: PointSet = [x.index_of("g").unwrap()].into_iter().collect();
        let (u, _) = x.restrict(&g).unwrap();
        let h = MorphismDescriptor::to_point(&u, PoleSet::empty()).unwrap();
        assert_eq!(stein_factorization(&h).unwrap().middle.poles(0), PoleSet::All);
    }

    #[test]
    fn product_of_points() {
        let pl = places();
        let pt = |ids: &[&str]| RingedFiniteSpace::rational_point(pl.clone(), pole_ids(&pl, ids));
        let s = pt(&["inf"]);
        let f = MorphismDescriptor::new(pt(&["inf", "zero"]), s.clone(), vec![0]).unwrap();
        let g = MorphismDescriptor::new(pt(&["inf", "one"]), s, vec![0]).unwrap();
        let z = fibered_product(&f, &g).unwrap();
        assert_eq!(z.space.len(), 1);
        assert_eq!(z.space.poles(0), pole_ids(&pl, &["zero", "one", "inf"]));
        assert!(z.schematic.holds());
        assert!(z.projections_schematic);
    }

    #[test]
    fn topological_wedge_square() {
        let w = RingedFiniteSpace::topological(wedge(), Coefficients::Integers);
        let f = MorphismDescriptor::to_point(&w, PoleSet::empty()).unwrap();
        let z = fibered_product(&f, &f).unwrap();
        assert_eq!(z.space.len(), 9);
        let all = z.space.poset().all();
        assert_eq!(z.space.poset().maxima(&all).len(), 1);
        assert!(z.schematic.holds());
    }

    #[test]
    fn morphism_enumeration() {
        let x = dl();
        let pt = RingedFiniteSpace::rational_point(places(), PoleSet::empty());
        assert_eq!(all_morphisms(&x, &pt).len(), 1);
        let gen = RingedFiniteSpace::rational_point(places(), PoleSet::All);
        assert_eq!(all_morphisms(&gen, &x).len(), 3);
        // k(x) does not map into k[x]
        assert!(all_morphisms(&x, &gen).is_empty());
    }

    #[test]
    fn covering_models_and_refinement() {
        let pl = places();
        let s = projective_line_carrier(&pl).unwrap();
        let coarse = vec![complement_of(&s, &["inf"]).unwrap(), complement_of(&s, &["zero"]).unwrap()];
        let m = CoveringModel::new(&s, coarse).unwrap();
        // the two charts and their overlap: the P1 fixture up to labels
        assert_eq!(m.space.len(), 3);
        let mut stalks: Vec<String> = (0..3).map(|i| m.space.stalk_name(i)).collect();
        stalks.sort();
        assert_eq!(stalks, vec!["k[1/x]", "k[x,1/x]", "k[x]"]);
        let fine = vec![
            complement_of(&s, &["inf"]).unwrap(),
            complement_of(&s, &["zero"]).unwrap(),
            complement_of(&s, &["one", "inf"]).unwrap(),
        ];
        let m2 = CoveringModel::new(&s, fine).unwrap();
        let f = m2.refinement_to(&m).unwrap();
        assert!(is_affine_morphism(&f, AffineMode::WeakEquivalence, false).unwrap().holds());
        assert!(m.refinement_to(&m2).is_err());
    }
}
