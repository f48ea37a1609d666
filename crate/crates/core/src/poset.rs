//! Finite posets as finite T0 topological spaces.
//!
//! Opens are up-sets; `U_p = { q : p ≤ q }` is the smallest open containing
//! `p`. Points are stored sorted by identifier so that every derived object
//! (chains, matrices, reports) has a reproducible order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::arith::homology::{CochainComplex, Coefficients, Group};
use crate::arith::matrix::IntMatrix;
use crate::error::{Error, Result};

pub type PointSet = BTreeSet<usize>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinitePoset {
    points: Vec<String>,
    leq: Vec<Vec<bool>>,
    hasse: Vec<(usize, usize)>,
    dim: usize,
    /// original label -> representative label, for labels merged by
    /// T0-normalization
    merged: BTreeMap<String, String>,
}

/// JSON form: `{"points": [...], "relations": [["p","g"], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PosetDoc {
    pub points: Vec<String>,
    #[serde(default)]
    pub relations: Vec<(String, String)>,
}

impl FinitePoset {
    /// Builds the preorder generated by `relations` (pairs `p ≤ q`), then
    /// identifies points with `p ≤ q ≤ p`, keeping the least label.
    pub fn from_relations<S: AsRef<str>>(points: &[S], relations: &[(S, S)]) -> Result<Self> {
        let mut labels: Vec<String> = points.iter().map(|p| p.as_ref().to_string()).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != points.len() {
            return Err(Error::Malformed("duplicate point identifiers".into()));
        }
        let n = labels.len();
        let index = |s: &str| {
            labels
                .binary_search_by(|l| l.as_str().cmp(s))
                .map_err(|_| Error::UnknownPoint(s.to_string()))
        };
        let mut rel = vec![vec![false; n]; n];
        for (i, row) in rel.iter_mut().enumerate() {
            row[i] = true;
        }
        for (a, b) in relations {
            let (i, j) = (index(a.as_ref())?, index(b.as_ref())?);
            rel[i][j] = true;
        }
        transitive_closure(&mut rel);
        Ok(Self::normalize(labels, rel))
    }

    pub fn from_doc(doc: &PosetDoc) -> Result<Self> {
        Self::from_relations(&doc.points, &doc.relations)
    }

    pub fn to_doc(&self) -> PosetDoc {
        PosetDoc {
            points: self.points.clone(),
            relations: self.hasse.iter().map(|&(a, b)| (self.points[a].clone(), self.points[b].clone())).collect(),
        }
    }

    /// Builds from an already reflexive and transitive relation.
    pub fn from_leq(labels: Vec<String>, leq: Vec<Vec<bool>>) -> Self {
        Self::normalize(labels, leq)
    }

    fn normalize(labels: Vec<String>, rel: Vec<Vec<bool>>) -> Self {
        let n = labels.len();
        // sort labels, carrying the relation along
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| labels[a].cmp(&labels[b]));
        let labels: Vec<String> = order.iter().map(|&i| labels[i].clone()).collect();
        let rel: Vec<Vec<bool>> = order.iter().map(|&i| order.iter().map(|&j| rel[i][j]).collect()).collect();

        let mut rep = vec![usize::MAX; n];
        let mut kept = Vec::new();
        for i in 0..n {
            if rep[i] != usize::MAX {
                continue;
            }
            for j in i..n {
                if rel[i][j] && rel[j][i] {
                    rep[j] = kept.len();
                }
            }
            kept.push(i);
        }
        let mut merged = BTreeMap::new();
        for i in 0..n {
            let r = kept[rep[i]];
            if r != i {
                merged.insert(labels[i].clone(), labels[r].clone());
            }
        }
        let points: Vec<String> = kept.iter().map(|&i| labels[i].clone()).collect();
        let leq: Vec<Vec<bool>> = kept.iter().map(|&i| kept.iter().map(|&j| rel[i][j]).collect()).collect();
        let m = points.len();
        let mut hasse = Vec::new();
        for a in 0..m {
            for b in 0..m {
                if a != b && leq[a][b] && !(0..m).any(|c| c != a && c != b && leq[a][c] && leq[c][b]) {
                    hasse.push((a, b));
                }
            }
        }
        let mut poset = FinitePoset { points, leq, hasse, dim: 0, merged };
        poset.dim = poset.dimension_of(&poset.all());
        poset
    }

    pub fn point() -> Self {
        Self::from_relations::<&str>(&["*"], &[]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn label(&self, i: usize) -> &str {
        &self.points[i]
    }

    /// Index of a point, resolving labels merged by T0-normalization.
    pub fn index_of(&self, id: &str) -> Result<usize> {
        let id = self.merged.get(id).map(String::as_str).unwrap_or(id);
        self.points
            .binary_search_by(|l| l.as_str().cmp(id))
            .map_err(|_| Error::UnknownPoint(id.to_string()))
    }

    pub fn merged_labels(&self) -> &BTreeMap<String, String> {
        &self.merged
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    pub fn lt(&self, a: usize, b: usize) -> bool {
        a != b && self.leq[a][b]
    }

    pub fn hasse(&self) -> &[(usize, usize)] {
        &self.hasse
    }

    /// Points covering `p`.
    pub fn covers(&self, p: usize) -> Vec<usize> {
        self.hasse.iter().filter(|e| e.0 == p).map(|e| e.1).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn all(&self) -> PointSet {
        (0..self.len()).collect()
    }

    /// `U_p`.
    pub fn minimal_open(&self, p: usize) -> PointSet {
        (0..self.len()).filter(|&q| self.leq[p][q]).collect()
    }

    pub fn minimal_open_by_id(&self, id: &str) -> Result<PointSet> {
        Ok(self.minimal_open(self.index_of(id)?))
    }

    pub fn down_set(&self, p: usize) -> PointSet {
        (0..self.len()).filter(|&q| self.leq[q][p]).collect()
    }

    pub fn is_open(&self, set: &PointSet) -> bool {
        set.iter().all(|&p| (0..self.len()).all(|q| !self.leq[p][q] || set.contains(&q)))
    }

    /// Smallest open containing `set`.
    pub fn open_hull(&self, set: &PointSet) -> PointSet {
        set.iter().flat_map(|&p| self.minimal_open(p)).collect()
    }

    pub fn labels_of(&self, set: &PointSet) -> Vec<String> {
        set.iter().map(|&i| self.points[i].clone()).collect()
    }

    pub fn set_from_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<PointSet> {
        labels.iter().map(|l| self.index_of(l.as_ref())).collect()
    }

    /// Length of the longest strict chain inside `set`, 0 for empty sets.
    pub fn dimension_of(&self, set: &PointSet) -> usize {
        let mut best: BTreeMap<usize, usize> = BTreeMap::new();
        // process in an order compatible with ≤ : by down-set size
        let mut pts: Vec<usize> = set.iter().copied().collect();
        pts.sort_by_key(|&p| self.down_set(p).len());
        let mut result = 0;
        for &p in &pts {
            let h = pts
                .iter()
                .filter(|&&q| self.lt(q, p))
                .map(|q| best[q] + 1)
                .max()
                .unwrap_or(0);
            best.insert(p, h);
            result = result.max(h);
        }
        result
    }

    /// Strictly increasing `(n+1)`-tuples inside `set`, lexicographic.
    pub fn chains(&self, set: &PointSet, n: usize) -> Vec<Chain> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(n + 1);
        self.extend_chains(set, n + 1, &mut cur, &mut out);
        out
    }

    fn extend_chains(&self, set: &PointSet, len: usize, cur: &mut Vec<usize>, out: &mut Vec<Chain>) {
        if cur.len() == len {
            out.push(Chain(cur.clone()));
            return;
        }
        for &p in set {
            if cur.last().is_none_or(|&l| self.lt(l, p)) {
                cur.push(p);
                self.extend_chains(set, len, cur, out);
                cur.pop();
            }
        }
    }

    pub fn maxima(&self, set: &PointSet) -> Vec<usize> {
        set.iter().copied().filter(|&p| !set.iter().any(|&q| self.lt(p, q))).collect()
    }

    pub fn minima(&self, set: &PointSet) -> Vec<usize> {
        set.iter().copied().filter(|&p| !set.iter().any(|&q| self.lt(q, p))).collect()
    }

    pub fn minimum(&self, set: &PointSet) -> Option<usize> {
        set.iter().copied().find(|&p| set.iter().all(|&q| self.leq(p, q)))
    }

    pub fn maximum(&self, set: &PointSet) -> Option<usize> {
        set.iter().copied().find(|&p| set.iter().all(|&q| self.leq(q, p)))
    }

    /// Connected components of `set` under comparability.
    pub fn components(&self, set: &PointSet) -> Vec<PointSet> {
        let mut seen = PointSet::new();
        let mut comps = Vec::new();
        for &s in set {
            if seen.contains(&s) {
                continue;
            }
            let mut comp = PointSet::new();
            let mut stack = vec![s];
            while let Some(p) = stack.pop() {
                if !comp.insert(p) {
                    continue;
                }
                for &q in set {
                    if !comp.contains(&q) && (self.leq(p, q) || self.leq(q, p)) {
                        stack.push(q);
                    }
                }
            }
            seen.extend(comp.iter().copied());
            comps.push(comp);
        }
        comps
    }

    /// Induced subposet on `set`, with the embedding of its indices.
    pub fn subposet(&self, set: &PointSet) -> (FinitePoset, Vec<usize>) {
        let idx: Vec<usize> = set.iter().copied().collect();
        let labels = idx.iter().map(|&i| self.points[i].clone()).collect();
        let leq = idx.iter().map(|&i| idx.iter().map(|&j| self.leq[i][j]).collect()).collect();
        (FinitePoset::from_leq(labels, leq), idx)
    }

    /// Whether `map` (indices of self → indices of target) is monotone.
    pub fn is_monotone(&self, target: &FinitePoset, map: &[usize]) -> bool {
        self.hasse.iter().all(|&(a, b)| target.leq(map[a], map[b]))
    }

    /// Cartesian product with componentwise order; points labelled `(x,y)`.
    pub fn product(&self, other: &FinitePoset) -> (FinitePoset, Vec<(usize, usize)>) {
        let pairs: Vec<(usize, usize)> =
            (0..self.len()).flat_map(|a| (0..other.len()).map(move |b| (a, b))).collect();
        self.pair_poset(other, pairs)
    }

    /// Sub-product on the given pairs (used for fibered products).
    pub fn pair_poset(&self, other: &FinitePoset, pairs: Vec<(usize, usize)>) -> (FinitePoset, Vec<(usize, usize)>) {
        let labels: Vec<String> =
            pairs.iter().map(|&(a, b)| format!("({},{})", self.points[a], other.points[b])).collect();
        let leq = pairs
            .iter()
            .map(|&(a, b)| pairs.iter().map(|&(c, d)| self.leq(a, c) && other.leq(b, d)).collect())
            .collect();
        let poset = FinitePoset::from_leq(labels.clone(), leq);
        let mut ordered = vec![(0, 0); pairs.len()];
        for (k, pair) in pairs.into_iter().enumerate() {
            ordered[poset.index_of(&labels[k]).unwrap()] = pair;
        }
        (poset, ordered)
    }

    /// Removes beat points in lexicographic order until none remain.
    pub fn core_reduction(&self) -> CoreReduction {
        let mut remaining = self.all();
        let mut removed = Vec::new();
        'outer: loop {
            for &p in &remaining {
                let above: PointSet = remaining.iter().copied().filter(|&q| self.lt(p, q)).collect();
                let below: PointSet = remaining.iter().copied().filter(|&q| self.lt(q, p)).collect();
                let up_beat = !above.is_empty() && self.minimum(&above).is_some();
                let down_beat = !below.is_empty() && self.maximum(&below).is_some();
                if up_beat || down_beat {
                    removed.push(self.points[p].clone());
                    remaining.remove(&p);
                    continue 'outer;
                }
            }
            break;
        }
        let (core, _) = self.subposet(&remaining);
        CoreReduction { core, removed }
    }

    /// `(point count, sorted Hasse degree sequence)`, an isomorphism invariant.
    pub fn profile(&self) -> (usize, Vec<usize>) {
        let mut deg = vec![0; self.len()];
        for &(a, b) in &self.hasse {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg.sort_unstable();
        (self.len(), deg)
    }

    /// Simplicial homology of the order complex of `set` (chains as
    /// simplices, the usual alternating boundary).
    pub fn order_complex_homology(&self, set: &PointSet, coeffs: Coefficients) -> Vec<Group> {
        let d = self.dimension_of(set);
        if set.is_empty() {
            return Vec::new();
        }
        let simplices: Vec<Vec<Chain>> = (0..=d).map(|n| self.chains(set, n)).collect();
        // cohomology of the dual complex has the same ranks; for torsion we
        // transpose boundaries into coboundaries, which shifts torsion up a
        // degree, so compute homology directly on the boundary matrices
        let mut boundaries = Vec::new();
        for n in 1..=d {
            let rows = &simplices[n - 1];
            let index: BTreeMap<&Chain, usize> = rows.iter().enumerate().map(|(i, c)| (c, i)).collect();
            let mut m = IntMatrix::zeros(rows.len(), simplices[n].len());
            for (j, s) in simplices[n].iter().enumerate() {
                for i in 0..=n {
                    let face = s.omit(i);
                    let sign = if i % 2 == 0 { 1 } else { -1 };
                    m.add_to(index[&face], j, &sign.into());
                }
            }
            boundaries.push(m);
        }
        // reverse to present as a cochain complex C_d → … → C_0
        let dims: Vec<usize> = simplices.iter().rev().map(Vec::len).collect();
        let diffs: Vec<IntMatrix> = boundaries.into_iter().rev().collect();
        let complex = CochainComplex::free(dims, diffs).expect("boundary of boundary vanishes");
        let mut groups = complex.cohomology(coeffs);
        groups.reverse();
        groups
    }
}

fn transitive_closure(rel: &mut [Vec<bool>]) {
    let n = rel.len();
    for k in 0..n {
        for i in 0..n {
            if rel[i][k] {
                for j in 0..n {
                    if rel[k][j] {
                        rel[i][j] = true;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Chain(pub Vec<usize>);

impl Chain {
    /// `n` for a chain `x_0 < … < x_n`.
    pub fn length(&self) -> usize {
        self.0.len() - 1
    }

    pub fn top(&self) -> usize {
        *self.0.last().expect("chains are nonempty")
    }

    pub fn points(&self) -> &[usize] {
        &self.0
    }

    pub fn omit(&self, i: usize) -> Chain {
        let mut v = self.0.clone();
        v.remove(i);
        Chain(v)
    }

    pub fn truncate_top(&self) -> Chain {
        Chain(self.0[..self.0.len() - 1].to_vec())
    }
}

#[derive(Debug, Clone)]
pub struct CoreReduction {
    pub core: FinitePoset,
    pub removed: Vec<String>,
}

/// A finite set (or poset) together with a finite open covering.
#[derive(Debug, Clone)]
pub struct CoveringInput {
    carrier: FinitePoset,
    cover: Vec<PointSet>,
}

impl CoveringInput {
    pub fn new(carrier: FinitePoset, cover: Vec<PointSet>) -> Result<Self> {
        for u in &cover {
            if !carrier.is_open(u) {
                return Err(Error::NotOpen(format!("{:?}", carrier.labels_of(u))));
            }
        }
        for p in 0..carrier.len() {
            if !cover.iter().any(|u| u.contains(&p)) {
                return Err(Error::NotCovering(carrier.label(p).to_string()));
            }
        }
        Ok(CoveringInput { carrier, cover })
    }

    pub fn carrier(&self) -> &FinitePoset {
        &self.carrier
    }

    pub fn cover(&self) -> &[PointSet] {
        &self.cover
    }

    /// `U^s`: intersection of the cover members containing `s`.
    pub fn star(&self, s: usize) -> PointSet {
        let mut acc = self.carrier.all();
        for u in self.cover.iter().filter(|u| u.contains(&s)) {
            acc = acc.intersection(u).copied().collect();
        }
        acc
    }

    /// Indices of cover members containing `s`.
    pub fn members_containing(&self, s: usize) -> Vec<usize> {
        (0..self.cover.len()).filter(|&i| self.cover[i].contains(&s)).collect()
    }

    /// The T0 quotient `[s] ≤ [s']` iff `U^s ⊇ U^{s'}`, with the projection.
    pub fn quotient(&self) -> CoveringQuotient {
        let n = self.carrier.len();
        let stars: Vec<PointSet> = (0..n).map(|s| self.star(s)).collect();
        let mut reps: Vec<usize> = Vec::new();
        let mut class_of = vec![0; n];
        for s in 0..n {
            match reps.iter().position(|&r| stars[r] == stars[s]) {
                Some(c) => class_of[s] = c,
                None => {
                    class_of[s] = reps.len();
                    reps.push(s);
                }
            }
        }
        let labels: Vec<String> = reps.iter().map(|&r| self.carrier.label(r).to_string()).collect();
        let leq = reps
            .iter()
            .map(|&a| reps.iter().map(|&b| stars[b].is_subset(&stars[a])).collect())
            .collect();
        let poset = FinitePoset::from_leq(labels.clone(), leq);
        let remap: Vec<usize> = labels.iter().map(|l| poset.index_of(l).unwrap()).collect();
        let projection = class_of.iter().map(|&c| remap[c]).collect();
        CoveringQuotient { poset, projection }
    }
}

#[derive(Debug, Clone)]
pub struct CoveringQuotient {
    pub poset: FinitePoset,
    /// carrier index -> quotient index
    pub projection: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wedge() -> FinitePoset {
        FinitePoset::from_relations(&["p", "q", "g"], &[("p", "g"), ("q", "g")]).unwrap()
    }

    fn s1() -> FinitePoset {
        FinitePoset::from_relations(&["a", "b", "c", "d"], &[("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")]).unwrap()
    }

    #[test]
    fn minimal_opens() {
        let chain = FinitePoset::from_relations(&["p", "g"], &[("p", "g")]).unwrap();
        assert_eq!(chain.labels_of(&chain.minimal_open_by_id("p").unwrap()), vec!["g", "p"]);
        let w = wedge();
        assert_eq!(w.labels_of(&w.minimal_open_by_id("g").unwrap()), vec!["g"]);
        let s = s1();
        assert_eq!(s.labels_of(&s.minimal_open_by_id("a").unwrap()), vec!["a", "c", "d"]);
        assert!(matches!(s.minimal_open_by_id("z"), Err(Error::UnknownPoint(_))));
    }

    #[test]
    fn chain_enumeration() {
        let w = wedge();
        let label = |c: &Chain| c.0.iter().map(|&i| w.label(i)).collect::<Vec<_>>().join("<");
        let c1: Vec<String> = w.chains(&w.all(), 1).iter().map(label).collect();
        assert_eq!(c1, vec!["p<g", "q<g"]);
        assert!(w.chains(&w.all(), 2).is_empty());
        let s = s1();
        let c1: Vec<String> = s
            .chains(&s.all(), 1)
            .iter()
            .map(|c| c.0.iter().map(|&i| s.label(i)).collect::<Vec<_>>().join("<"))
            .collect();
        assert_eq!(c1, vec!["a<c", "a<d", "b<c", "b<d"]);
    }

    #[test]
    fn preorders_are_normalized() {
        let p = FinitePoset::from_relations(&["b", "a", "c"], &[("a", "b"), ("b", "a"), ("a", "c")]).unwrap();
        assert_eq!(p.points(), &["a".to_string(), "c".to_string()]);
        assert_eq!(p.index_of("b").unwrap(), p.index_of("a").unwrap());
        assert_eq!(p.hasse(), &[(0, 1)]);
    }

    #[test]
    fn products() {
        let chain = FinitePoset::from_relations(&["p", "g"], &[("p", "g")]).unwrap();
        let (sq, _) = chain.product(&chain);
        assert_eq!(sq.len(), 4);
        assert_eq!(sq.minima(&sq.all()), vec![sq.index_of("(p,p)").unwrap()]);
        let (ww, _) = wedge().product(&wedge());
        assert_eq!(ww.len(), 9);
        assert_eq!(ww.maxima(&ww.all()).len(), 1);
        assert_eq!(ww.minima(&ww.all()).len(), 4);
        let (ps, _) = FinitePoset::point().product(&s1());
        assert_eq!(ps.profile(), s1().profile());
    }

    #[test]
    fn covering_quotient_example() {
        let carrier = FinitePoset::from_relations::<&str>(&["1", "2", "3"], &[]).unwrap();
        let u1 = carrier.set_from_labels(&["1", "2"]).unwrap();
        let u2 = carrier.set_from_labels(&["2", "3"]).unwrap();
        let q = CoveringInput::new(carrier.clone(), vec![u1, u2]).unwrap().quotient();
        assert_eq!(q.poset.len(), 3);
        let (one, two, three) = (q.projection[0], q.projection[1], q.projection[2]);
        assert!(q.poset.lt(one, two) && q.poset.lt(three, two));
        assert!(!q.poset.leq(one, three) && !q.poset.leq(three, one));

        let whole = CoveringInput::new(carrier.clone(), vec![carrier.all()]).unwrap().quotient();
        assert_eq!(whole.poset.len(), 1);

        let bad = CoveringInput::new(carrier.clone(), vec![carrier.set_from_labels(&["1"]).unwrap()]);
        assert!(matches!(bad, Err(Error::NotCovering(_))));
    }

    #[test]
    fn cores() {
        let vee = FinitePoset::from_relations(&["m", "a", "b"], &[("m", "a"), ("m", "b")]).unwrap();
        assert_eq!(vee.core_reduction().core.len(), 1);
        assert_eq!(s1().core_reduction().core, s1());
        assert_eq!(FinitePoset::point().core_reduction().core.len(), 1);
    }

    #[test]
    fn circle_homology() {
        let s = s1();
        let h = s.order_complex_homology(&s.all(), Coefficients::Integers);
        assert_eq!(h, vec![Group::free(1), Group::free(1)]);
    }
}
