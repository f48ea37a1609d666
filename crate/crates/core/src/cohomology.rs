//! The standard resolution `C^n F(U) = ∏_{x_0<…<x_n in U} F_{x_n}` and the
//! cohomology reports built from it.
//!
//! In the rational universe every restriction is an inclusion inside k(x),
//! so the complex splits over homogeneous classes of basis elements. Each
//! class contributes a constant-coefficient complex computed once and
//! reported with the number of basis elements it stands for.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::arith::field::Field;
use crate::arith::homology::{CochainComplex, Coefficients, Group};
use crate::arith::lattice::{contains_columns, image_basis, kernel_basis};
use crate::arith::matrix::{FieldMatrix, IntMatrix};
use crate::arith::places::{Multiplicity, PlaceList, PoleSet};
use crate::error::{Error, Result};
use crate::poset::{Chain, FinitePoset, PointSet};
use crate::sheaf::{
    grade_classes, pattern_data, AbelianSheaf, FracMono, Grade, GradeClass, LaurentFrame, Line, SheafDescriptor,
    StalkData,
};
use crate::space::{ring_name, MorphismDescriptor, RingedFiniteSpace, Universe};

#[derive(Debug, Clone)]
pub struct StandardComplex {
    pub open: PointSet,
    pub chains: Vec<Vec<Chain>>,
    /// per degree, starting coordinate of each chain's block
    pub offsets: Vec<Vec<usize>>,
    pub complex: CochainComplex,
}

impl StandardComplex {
    /// Materializes the complex on `open`; fails if `d∘d ≠ 0`.
    pub fn build(poset: &FinitePoset, open: &PointSet, data: &StalkData) -> Result<Self> {
        let top = if open.is_empty() { None } else { Some(poset.dimension_of(open)) };
        let chains: Vec<Vec<Chain>> = match top {
            None => Vec::new(),
            Some(d) => (0..=d).map(|n| poset.chains(open, n)).collect(),
        };
        let mut offsets = Vec::new();
        let mut dims = Vec::new();
        let mut relations = Vec::new();
        for cs in &chains {
            let mut off = Vec::with_capacity(cs.len());
            let mut total = 0;
            for c in cs {
                off.push(total);
                total += data.gens[c.top()];
            }
            offsets.push(off);
            dims.push(total);
            relations.push(IntMatrix::block_diag(
                &cs.iter().map(|c| data.relations[c.top()].clone()).collect::<Vec<_>>(),
            ));
        }
        let mut diffs = Vec::new();
        for n in 0..chains.len().saturating_sub(1) {
            let index: BTreeMap<&Chain, usize> = chains[n].iter().enumerate().map(|(i, c)| (c, i)).collect();
            let mut d = IntMatrix::zeros(dims[n + 1], dims[n]);
            for (s, sigma) in chains[n + 1].iter().enumerate() {
                let row = offsets[n + 1][s];
                let top = sigma.top();
                for i in 0..=n {
                    let tau = sigma.omit(i);
                    let col = offsets[n][index[&tau]];
                    let sign = BigInt::from(if i % 2 == 0 { 1 } else { -1 });
                    for k in 0..data.gens[top] {
                        d.add_to(row + k, col + k, &sign);
                    }
                }
                let tau = sigma.truncate_top();
                let col = offsets[n][index[&tau]];
                let r = data.map(tau.top(), top);
                let sign = BigInt::from(if (n + 1) % 2 == 0 { 1 } else { -1 });
                for a in 0..r.rows() {
                    for b in 0..r.cols() {
                        if !r.get(a, b).is_zero() {
                            d.add_to(row + a, col + b, &(&sign * r.get(a, b)));
                        }
                    }
                }
            }
            diffs.push(d);
        }
        let complex = if dims.is_empty() {
            CochainComplex::free(Vec::new(), Vec::new())?
        } else {
            CochainComplex::presented(dims, relations, diffs)?
        };
        Ok(StandardComplex { open: open.clone(), chains, offsets, complex })
    }

    pub fn dims(&self) -> &[usize] {
        &self.complex.dims
    }

    pub fn top_degree(&self) -> Option<usize> {
        self.chains.len().checked_sub(1)
    }

    pub fn cohomology(&self, coeffs: Coefficients) -> Vec<Group> {
        self.complex.cohomology(coeffs)
    }

    /// Restriction of `C^n` on `self.open` to `C^n` on the smaller open of
    /// `sub`; both complexes must carry the same stalks on `sub.open`.
    pub fn restriction_to(&self, sub: &StandardComplex, n: usize, data: &StalkData) -> IntMatrix {
        let rows = sub.complex.dims.get(n).copied().unwrap_or(0);
        let cols = self.complex.dims.get(n).copied().unwrap_or(0);
        let mut m = IntMatrix::zeros(rows, cols);
        if rows == 0 {
            return m;
        }
        let index: BTreeMap<&Chain, usize> = self.chains[n].iter().enumerate().map(|(i, c)| (c, i)).collect();
        for (s, c) in sub.chains[n].iter().enumerate() {
            let col = self.offsets[n][index[c]];
            let row = sub.offsets[n][s];
            for k in 0..data.gens[c.top()] {
                m.set(row + k, col + k, BigInt::from(1));
            }
        }
        m
    }

    fn diff(&self, i: isize) -> IntMatrix {
        let dims = &self.complex.dims;
        let n = dims.len() as isize;
        if n == 0 {
            return IntMatrix::zeros(0, 0);
        }
        if i < 0 {
            IntMatrix::zeros(dims[0], 0)
        } else if i + 1 >= n {
            IntMatrix::zeros(0, dims.get(i as usize).copied().unwrap_or(0))
        } else {
            self.complex.diffs[i as usize].clone()
        }
    }

    fn relations(&self, i: usize) -> IntMatrix {
        self.complex.relations.get(i).cloned().unwrap_or_else(|| IntMatrix::zeros(self.dim(i), 0))
    }

    fn dim(&self, i: usize) -> usize {
        self.complex.dims.get(i).copied().unwrap_or(0)
    }
}

/// Whether the map `H^i(A) → H^i(B)` induced by restricting cochains from
/// `a` to `b` is an isomorphism.
pub fn restriction_is_iso(
    a: &StandardComplex,
    b: &StandardComplex,
    data_b: &StalkData,
    i: usize,
    coeffs: Coefficients,
) -> bool {
    let r = a.restriction_to(b, i, data_b);
    let (za, bda) = cycles_and_boundaries(a, i);
    let (zb, bdb) = cycles_and_boundaries(b, i);
    let rz = r.mul(&za);
    match coeffs {
        Coefficients::Field(k) => {
            let rank = |m: &IntMatrix| m.to_field(k).rank();
            let ha = rank(&za) - rank(&bda);
            let hb = rank(&zb) - rank(&bdb);
            ha == hb && rank(&rz.hcat(&bdb)) == rank(&zb)
        }
        Coefficients::Integers => {
            let surj = contains_columns(&rz.hcat(&bdb), &zb);
            let ker = kernel_basis(&rz.hcat(&bdb.neg()));
            let coeff: Vec<Vec<BigInt>> = (0..ker.cols()).map(|j| ker.column(j)[..za.cols()].to_vec()).collect();
            let killed = za.mul(&IntMatrix::from_columns(za.cols(), &coeff));
            let inj = killed.is_zero() || contains_columns(&bda, &killed);
            surj && inj
        }
    }
}

/// Lattice bases of cycles `{v : dv ∈ relations}` and of boundaries plus
/// relations, in degree `i`.
fn cycles_and_boundaries(c: &StandardComplex, i: usize) -> (IntMatrix, IntMatrix) {
    let n = c.dim(i);
    let d = c.diff(i as isize);
    let rel_next = if d.rows() > 0 { c.relations(i + 1) } else { IntMatrix::zeros(0, 0) };
    let joint = d.hcat(&rel_next.neg());
    let ker = kernel_basis(&joint);
    let proj: Vec<Vec<BigInt>> = (0..ker.cols()).map(|j| ker.column(j)[..n].to_vec()).collect();
    let cycles = image_basis(&IntMatrix::from_columns(n, &proj));
    let bd = c.diff(i as isize - 1).hcat(&c.relations(i));
    (cycles, bd)
}

// ------------------------------------------------------------------ reports

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub pattern: String,
    pub dim: usize,
    pub multiplicity: Multiplicity,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub torsion: Vec<BigInt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub degree: usize,
    pub pieces: Vec<Piece>,
}

impl DegreeReport {
    /// `Σ dim · multiplicity`.
    pub fn total(&self) -> Multiplicity {
        self.pieces.iter().fold(Multiplicity::Finite(0), |acc, p| acc + p.multiplicity.times(p.dim as u64))
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.dim == 0 && p.torsion.is_empty())
    }

    pub fn piece(&self, pattern: &str) -> Option<&Piece> {
        self.pieces.iter().find(|p| p.pattern == pattern)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologyReport {
    pub open: Vec<String>,
    pub sheaf: String,
    pub degrees: Vec<DegreeReport>,
}

impl CohomologyReport {
    pub fn degree(&self, i: usize) -> Option<&DegreeReport> {
        self.degrees.get(i)
    }

    /// Total size of `H^i`, zero above the top degree.
    pub fn total(&self, i: usize) -> Multiplicity {
        self.degrees.get(i).map_or(Multiplicity::Finite(0), DegreeReport::total)
    }

    pub fn is_acyclic(&self) -> bool {
        self.degrees.iter().skip(1).all(DegreeReport::is_zero)
    }

    /// Renders `H^i` with ring names where the pieces match a pole ring or
    /// a quotient `k(x)/R_T`.
    pub fn render_degree(&self, i: usize, places: Option<&PlaceList>) -> String {
        let Some(deg) = self.degrees.get(i) else { return "0".into() };
        if deg.is_zero() {
            return "0".into();
        }
        if let [p] = deg.pieces.as_slice() {
            if places.is_none() || p.pattern == "sheaf" || p.pattern == "pattern" && !p.torsion.is_empty() {
                return Group { rank: p.dim, torsion: p.torsion.clone() }.to_string();
            }
        }
        if let Some(pl) = places {
            if let Some(name) = ring_like_name(deg, pl) {
                return name;
            }
        }
        match deg.total() {
            Multiplicity::Finite(1) => "k".into(),
            Multiplicity::Finite(n) => format!("k^{n}"),
            Multiplicity::Omega => deg
                .pieces
                .iter()
                .map(|p| format!("{}x{}({})", p.dim, p.pattern, p.multiplicity))
                .collect::<Vec<_>>()
                .join(" + "),
        }
    }

    pub fn render(&self, places: Option<&PlaceList>) -> String {
        let mut out = String::new();
        for d in &self.degrees {
            out.push_str(&format!("H^{} = {}\n", d.degree, self.render_degree(d.degree, places)));
            for p in &d.pieces {
                let torsion = if p.torsion.is_empty() {
                    String::new()
                } else {
                    format!(" torsion {:?}", p.torsion.iter().map(ToString::to_string).collect::<Vec<_>>())
                };
                out.push_str(&format!("  {}: dim {} x {}{}\n", p.pattern, p.dim, p.multiplicity, torsion));
            }
        }
        out
    }
}

/// `R_T` or `k(x)/R_T` when every piece has dimension one and the pieces
/// are exactly the classes of such a module.
fn ring_like_name(deg: &DegreeReport, places: &PlaceList) -> Option<String> {
    if deg.pieces.iter().any(|p| p.dim != 1 || !p.torsion.is_empty()) {
        return None;
    }
    let names: Vec<&str> = deg.pieces.iter().map(|p| p.pattern.as_str()).collect();
    let mut listed = Vec::new();
    for n in &names {
        match *n {
            "constant" | "unlisted" => {}
            other => listed.push(places.index_of(other.strip_prefix("place:")?).ok()?),
        }
    }
    let has = |s: &str| names.contains(&s);
    let declared: Vec<usize> = (0..places.len()).collect();
    if has("constant") {
        let t = if has("unlisted") {
            if listed.len() != declared.len() {
                return None;
            }
            PoleSet::All
        } else {
            PoleSet::of(&listed)
        };
        Some(ring_name(places, &t))
    } else if has("unlisted") {
        let missing: Vec<usize> = declared.into_iter().filter(|i| !listed.contains(i)).collect();
        Some(format!("k(x)/{}", ring_name(places, &PoleSet::of(&missing))))
    } else {
        None
    }
}

impl fmt::Display for CohomologyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(None))
    }
}

// ------------------------------------------------------------ graded pieces

/// The fractional-monomial form of a rational sheaf, base changed by `L`
/// at every point when given.
pub fn graded_module(x: &RingedFiniteSpace, sheaf: &SheafDescriptor, localize: Option<&PoleSet>) -> Result<FracMono> {
    let places = x.require_places()?;
    let frame = LaurentFrame::of(places);
    let module = match sheaf {
        SheafDescriptor::Structure => SheafDescriptor::structure_as_fracmono(x)?,
        SheafDescriptor::FracMono(m) => m.clone(),
        _ => return Err(Error::Unsupported(format!("{} sheaves are not graded modules", sheaf.kind()))),
    };
    Ok(match localize {
        None => module,
        Some(l) => FracMono {
            lines: module
                .lines
                .iter()
                .map(|ls| ls.iter().map(|line| line.base_change(l, frame)).collect::<Result<Vec<Line>>>())
                .collect::<Result<_>>()?,
            incidence: module.incidence.clone(),
        },
    })
}

fn field_of(x: &RingedFiniteSpace) -> Field {
    x.universe().field().unwrap_or(Field::Rationals)
}

/// `H^i(U, k_V)` over the space's field (ℚ for integral spaces).
pub fn pattern_cohomology(x: &RingedFiniteSpace, open: &PointSet, v: &PointSet) -> Result<Vec<usize>> {
    let poset = x.poset();
    if !poset.is_open(open) {
        return Err(Error::NotOpen(format!("{:?}", poset.labels_of(open))));
    }
    if !v.is_subset(open) || !open.iter().all(|&p| !v.contains(&p) || poset.minimal_open(p).iter().all(|q| v.contains(q))) {
        return Err(Error::NotOpen(format!("pattern {:?}", poset.labels_of(v))));
    }
    let data = pattern_data(poset, v)?;
    let c = StandardComplex::build(poset, open, &data)?;
    Ok(c.cohomology(Coefficients::Field(field_of(x))).iter().map(|g| g.rank).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Window(usize),
}

pub const DEFAULT_WINDOW: usize = 20;

/// Exact cohomology report of `F` on the open `U`.
pub fn sheaf_cohomology(x: &RingedFiniteSpace, open: &PointSet, sheaf: &SheafDescriptor) -> Result<CohomologyReport> {
    sheaf.validate(x)?;
    let poset = x.poset();
    if !poset.is_open(open) {
        return Err(Error::NotOpen(format!("{:?}", poset.labels_of(open))));
    }
    let top = if open.is_empty() { 0 } else { poset.dimension_of(open) + 1 };
    let mut degrees: Vec<DegreeReport> = (0..top).map(|degree| DegreeReport { degree, pieces: Vec::new() }).collect();
    let mut push = |groups: &[Group], label: &str, mult: Multiplicity| {
        for (i, g) in groups.iter().enumerate() {
            if !g.is_zero() {
                degrees[i].pieces.push(Piece {
                    pattern: label.to_string(),
                    dim: g.rank,
                    multiplicity: mult,
                    torsion: g.torsion.clone(),
                });
            }
        }
    };
    match (x.universe(), sheaf) {
        (Universe::Rational(places), SheafDescriptor::Structure | SheafDescriptor::FracMono(_)) => {
            let module = graded_module(x, sheaf, None)?;
            let frame = LaurentFrame::of(places);
            let k = Coefficients::Field(places.field());
            for class in grade_classes(places, frame, &module.exps()) {
                let data = module.graded_piece(poset, class.grade, frame)?;
                let c = StandardComplex::build(poset, open, &data)?;
                push(&c.cohomology(k), &class.label, class.multiplicity);
            }
        }
        (Universe::Rational(places), SheafDescriptor::Pattern(v)) => {
            let c = StandardComplex::build(poset, open, &pattern_data(poset, v)?)?;
            push(&c.cohomology(Coefficients::Field(places.field())), "pattern", Multiplicity::Finite(1));
        }
        (Universe::Rational(_), SheafDescriptor::Abelian(_)) => {
            return Err(Error::UniverseMismatch("abelian sheaves live in the topological universe".into()))
        }
        (Universe::Topological(coeffs), _) => {
            let data = sheaf.topological_data(x)?;
            let c = StandardComplex::build(poset, open, &data)?;
            let label = match sheaf {
                SheafDescriptor::Structure => "constant",
                SheafDescriptor::Pattern(_) => "pattern",
                _ => "sheaf",
            };
            push(&c.cohomology(*coeffs), label, Multiplicity::Finite(1));
        }
    }
    Ok(CohomologyReport { open: poset.labels_of(open), sheaf: sheaf.kind().into(), degrees })
}

// ------------------------------------------------------------- window mode

/// A basis element of k(x) kept in a finite window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum WindowElem {
    Laurent(i64),
    Tower(usize, usize),
    Unlisted(usize),
}

impl WindowElem {
    fn grade(&self) -> Grade {
        match *self {
            WindowElem::Laurent(d) => Grade::Laurent(d),
            WindowElem::Tower(v, _) => Grade::Tower(v),
            WindowElem::Unlisted(_) => Grade::Unlisted,
        }
    }
}

fn window_basis(places: &PlaceList, frame: LaurentFrame, n: usize) -> Vec<WindowElem> {
    let n_i = n as i64;
    let low = if frame.zero.is_some() { -n_i } else { 0 };
    let mut out: Vec<WindowElem> = (low..=n_i).map(WindowElem::Laurent).collect();
    for i in places.finite_indices() {
        if Some(i) != frame.zero {
            out.extend((0..n * places.get(i).degree()).map(|k| WindowElem::Tower(i, k)));
        }
    }
    out.extend((0..n).map(WindowElem::Unlisted));
    out
}

/// Dimensions of `H^i(U, F)` after truncating every polar tower to `n`
/// elements per level, computed on the undecomposed complex.
pub fn window_dims(x: &RingedFiniteSpace, open: &PointSet, sheaf: &SheafDescriptor, n: usize) -> Result<Vec<usize>> {
    sheaf.validate(x)?;
    let poset = x.poset();
    let places = match x.universe() {
        Universe::Rational(pl) if !matches!(sheaf, SheafDescriptor::Pattern(_)) => pl,
        _ => {
            let report = sheaf_cohomology(x, open, sheaf)?;
            return Ok(report.degrees.iter().map(|d| d.pieces.iter().map(|p| p.dim).sum()).collect());
        }
    };
    let frame = LaurentFrame::of(places);
    let module = graded_module(x, sheaf, None)?;
    let basis = window_basis(places, frame, n);
    let elems: Vec<Vec<(usize, WindowElem)>> = module
        .lines
        .iter()
        .map(|ls| {
            ls.iter()
                .enumerate()
                .flat_map(|(i, l)| basis.iter().filter(|e| l.contains(e.grade(), frame)).map(move |&e| (i, e)))
                .collect()
        })
        .collect();
    let gens: Vec<usize> = elems.iter().map(Vec::len).collect();
    let full = StalkData::from_hasse(
        poset,
        module.lines.iter().map(Vec::len).collect(),
        module.lines.iter().map(|l| IntMatrix::zeros(l.len(), 0)).collect(),
        &module.incidence,
    )?;
    let mut hasse = BTreeMap::new();
    for &(p, q) in poset.hasse() {
        let e = full.map(p, q);
        let pos: BTreeMap<(usize, WindowElem), usize> = elems[q].iter().enumerate().map(|(r, &k)| (k, r)).collect();
        let mut m = IntMatrix::zeros(gens[q], gens[p]);
        for (col, &(i, el)) in elems[p].iter().enumerate() {
            for j in 0..e.rows() {
                if !e.get(j, i).is_zero() {
                    let row = pos[&(j, el)];
                    m.set(row, col, e.get(j, i).clone());
                }
            }
        }
        hasse.insert((p, q), m);
    }
    let data = StalkData::from_hasse(poset, gens.clone(), gens.iter().map(|&g| IntMatrix::zeros(g, 0)).collect(), &hasse)?;
    let c = StandardComplex::build(poset, open, &data)?;
    Ok(c.cohomology(Coefficients::Field(places.field())).iter().map(|g| g.rank).collect())
}

/// What the exact report predicts for a window of size `n`.
pub fn window_prediction(x: &RingedFiniteSpace, report: &CohomologyReport, sheaf: &SheafDescriptor, n: usize) -> Result<Vec<usize>> {
    let Universe::Rational(places) = x.universe() else {
        return Ok(report.degrees.iter().map(|d| d.pieces.iter().map(|p| p.dim).sum()).collect());
    };
    if matches!(sheaf, SheafDescriptor::Pattern(_)) {
        return Ok(report.degrees.iter().map(|d| d.pieces.iter().map(|p| p.dim).sum()).collect());
    }
    let module = graded_module(x, sheaf, None)?;
    let classes: BTreeMap<String, GradeClass> = grade_classes(places, LaurentFrame::of(places), &module.exps())
        .into_iter()
        .map(|c| (c.label.clone(), c))
        .collect();
    Ok(report
        .degrees
        .iter()
        .map(|d| d.pieces.iter().map(|p| p.dim * classes[&p.pattern].span.window_count(n)).sum())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowReport {
    pub window: usize,
    pub dims: Vec<usize>,
    pub predicted: Vec<usize>,
    /// growth per window step was constant over three consecutive steps
    pub stabilized: bool,
}

impl WindowReport {
    pub fn agrees(&self) -> bool {
        self.dims == self.predicted
    }
}

pub fn window_cohomology(x: &RingedFiniteSpace, open: &PointSet, sheaf: &SheafDescriptor, n: usize) -> Result<WindowReport> {
    let report = sheaf_cohomology(x, open, sheaf)?;
    let runs: Vec<Vec<usize>> = (n..n + 4).map(|m| window_dims(x, open, sheaf, m)).collect::<Result<_>>()?;
    let steps: Vec<Vec<i64>> = runs
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| *a as i64 - *b as i64).collect())
        .collect();
    let stabilized = steps.windows(2).all(|w| w[0] == w[1]);
    Ok(WindowReport {
        window: n,
        predicted: window_prediction(x, &report, sheaf, n)?,
        dims: runs.into_iter().next().expect("four runs"),
        stabilized,
    })
}

// --------------------------------------------------------- direct images

/// Report of `H^i(f^{-1}(U_y), F)` at every target point, with a verdict
/// on quasi-coherence of `R^i f_* F` from the base-change maps along the
/// Hasse edges of the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirectImage {
    pub degree: usize,
    pub stalks: Vec<(String, Option<DegreeReport>)>,
    pub quasi_coherent: Option<bool>,
}

pub fn higher_direct_image(f: &MorphismDescriptor, sheaf: &SheafDescriptor, i: usize) -> Result<DirectImage> {
    let x = &f.source;
    let y = &f.target;
    let mut stalks = Vec::new();
    for t in 0..y.len() {
        let pre = f.preimage_of_star(t);
        let report = sheaf_cohomology(x, &pre, sheaf)?;
        stalks.push((y.poset().label(t).to_string(), report.degrees.get(i).cloned()));
    }
    let quasi_coherent = match (x.universe(), sheaf) {
        (Universe::Rational(_), SheafDescriptor::Pattern(_)) => None,
        _ => {
            let mut ok = true;
            for &(a, b) in y.poset().hasse() {
                let big = f.preimage_of_star(a);
                let small = f.preimage_of_star(b);
                if base_change_failure(x, sheaf, &big, &small, &y.poles(b), i..i + 1)?.is_some() {
                    ok = false;
                    break;
                }
            }
            Some(ok)
        }
    };
    Ok(DirectImage { degree: i, stalks, quasi_coherent })
}

/// First `(class, degree)` for which `H^i(A, F) ⊗ R_L → H^i(B, F)` fails to
/// be an isomorphism, with `B ⊆ A` open and `L ⊆ T_t` for all `t ∈ B`.
pub fn base_change_failure(
    x: &RingedFiniteSpace,
    sheaf: &SheafDescriptor,
    a: &PointSet,
    b: &PointSet,
    l: &PoleSet,
    degrees: std::ops::Range<usize>,
) -> Result<Option<(String, usize)>> {
    let poset = x.poset();
    let top = if a.is_empty() { 0 } else { poset.dimension_of(a) + 1 };
    let degrees = degrees.start..degrees.end.min(top);
    match x.universe() {
        Universe::Rational(places) => {
            let frame = LaurentFrame::of(places);
            let k = Coefficients::Field(places.field());
            let local = graded_module(x, sheaf, Some(l))?;
            let plain = graded_module(x, sheaf, None)?;
            let mut exps = local.exps();
            exps.extend(plain.exps());
            for class in grade_classes(places, frame, &exps) {
                let da = local.graded_piece(poset, class.grade, frame)?;
                let db = plain.graded_piece(poset, class.grade, frame)?;
                let ca = StandardComplex::build(poset, a, &da)?;
                let cb = StandardComplex::build(poset, b, &db)?;
                for i in degrees.clone() {
                    if !restriction_is_iso(&ca, &cb, &db, i, k) {
                        return Ok(Some((class.label.clone(), i)));
                    }
                }
            }
            Ok(None)
        }
        Universe::Topological(coeffs) => {
            let data = sheaf.topological_data(x)?;
            let ca = StandardComplex::build(poset, a, &data)?;
            let cb = StandardComplex::build(poset, b, &data)?;
            for i in degrees {
                if !restriction_is_iso(&ca, &cb, &data, i, *coeffs) {
                    return Ok(Some(("constant".into(), i)));
                }
            }
            Ok(None)
        }
    }
}

/// `f_*F` as a descriptor on the target: stalk `H^0(f^{-1}(U_y), F)`.
pub fn pushforward(f: &MorphismDescriptor, sheaf: &SheafDescriptor) -> Result<SheafDescriptor> {
    sheaf.validate(&f.source)?;
    let x = &f.source;
    let ypos = f.target.poset();
    let pre: Vec<PointSet> = (0..f.target.len()).map(|y| f.preimage_of_star(y)).collect();
    let comps: Vec<Vec<PointSet>> = pre.iter().map(|p| x.poset().components(p)).collect();
    // the component of the larger preimage containing each smaller component
    let parent = |a: usize, b: usize, j: usize| -> usize {
        let probe = *comps[b][j].iter().next().expect("components are nonempty");
        comps[a].iter().position(|c| c.contains(&probe)).expect("preimages are nested")
    };
    match (x.universe(), sheaf) {
        (Universe::Rational(places), SheafDescriptor::Structure | SheafDescriptor::FracMono(_)) => {
            let frame = LaurentFrame::of(places);
            let module = graded_module(x, sheaf, None)?;
            let poset = x.poset();
            if module.lines.iter().any(|l| l.len() > 1)
                || poset.hasse().iter().any(|e| {
                    let m = &module.incidence[e];
                    m.rows() * m.cols() == 1 && *m.get(0, 0) != BigInt::from(1)
                })
            {
                return Err(Error::Unrepresentable("pushforward of sums of lines with twisted incidence".into()));
            }
            // per component: intersection of its lines, split into lines
            let mut lines = Vec::new();
            let mut owner = Vec::new();
            for cs in &comps {
                let mut here = Vec::new();
                let mut own = Vec::new();
                for (ci, c) in cs.iter().enumerate() {
                    for l in sections_of_lines(c.iter().filter_map(|&t| module.lines[t].first()), frame)? {
                        here.push(l);
                        own.push(ci);
                    }
                }
                lines.push(here);
                owner.push(own);
            }
            let mut incidence = BTreeMap::new();
            for &(a, b) in ypos.hasse() {
                let mut m = IntMatrix::zeros(lines[b].len(), lines[a].len());
                for (j, lj) in lines[b].iter().enumerate() {
                    let home = parent(a, b, owner[b][j]);
                    for (i, li) in lines[a].iter().enumerate() {
                        if owner[a][i] == home && li.is_subset(lj, frame) {
                            m.set(j, i, BigInt::from(1));
                        } else if owner[a][i] == home && overlaps(li, lj, frame) {
                            return Err(Error::Unrepresentable(
                                "restriction of sections does not map lines to lines".into(),
                            ));
                        }
                    }
                }
                incidence.insert((a, b), m);
            }
            let out = SheafDescriptor::FracMono(FracMono { lines, incidence });
            out.validate(&f.target)?;
            Ok(out)
        }
        (Universe::Rational(_), _) => Err(Error::Unsupported(format!("pushforward of {} sheaves", sheaf.kind()))),
        (Universe::Topological(_), SheafDescriptor::Structure | SheafDescriptor::Pattern(_)) => {
            // H^0 of k_V on a preimage: one copy per component inside V
            let v: PointSet = match sheaf {
                SheafDescriptor::Pattern(v) => v.clone(),
                _ => x.poset().all(),
            };
            let kept: Vec<Vec<usize>> =
                comps.iter().map(|cs| (0..cs.len()).filter(|&c| cs[c].is_subset(&v)).collect()).collect();
            let mut maps = BTreeMap::new();
            for &(a, b) in ypos.hasse() {
                let mut m = IntMatrix::zeros(kept[b].len(), kept[a].len());
                for (r, &cb) in kept[b].iter().enumerate() {
                    let home = parent(a, b, cb);
                    if let Some(col) = kept[a].iter().position(|&ca| ca == home) {
                        m.set(r, col, BigInt::from(1));
                    }
                }
                maps.insert((a, b), m);
            }
            let ranks: Vec<usize> = kept.iter().map(Vec::len).collect();
            let out = SheafDescriptor::Abelian(AbelianSheaf {
                relations: ranks.iter().map(|&r| IntMatrix::zeros(r, 0)).collect(),
                ranks,
                maps,
            });
            out.validate(&f.target)?;
            Ok(out)
        }
        (Universe::Topological(Coefficients::Integers), SheafDescriptor::Abelian(_)) => integral_pushforward(f, sheaf),
        (Universe::Topological(_), _) => {
            Err(Error::Unsupported("pushforward of abelian sheaves over a field".into()))
        }
    }
}

fn overlaps(a: &Line, b: &Line, frame: LaurentFrame) -> bool {
    let (alo, ahi) = a.laurent_range(frame);
    let (blo, bhi) = b.laurent_range(frame);
    let lo = match (alo, blo) {
        (Some(p), Some(q)) => Some(p.max(q)),
        (p, q) => p.or(q),
    };
    let hi = match (ahi, bhi) {
        (Some(p), Some(q)) => Some(p.min(q)),
        (p, q) => p.or(q),
    };
    match (lo, hi) {
        (Some(l), Some(h)) => l <= h,
        _ => true,
    }
}

/// `∩ lines` inside k(x), written as a sum of lines.
fn sections_of_lines<'a>(lines: impl Iterator<Item = &'a Line>, frame: LaurentFrame) -> Result<Vec<Line>> {
    let mut lo: Option<i64> = None;
    let mut hi: Option<i64> = None;
    let mut poles: Option<PoleSet> = None;
    for l in lines {
        let (a, b) = l.laurent_range(frame);
        if let Some(a) = a {
            lo = Some(lo.map_or(a, |x| x.max(a)));
        }
        if let Some(b) = b {
            hi = Some(hi.map_or(b, |x| x.min(b)));
        }
        poles = Some(poles.map_or(l.poles.clone(), |p| p.intersection(&l.poles)));
    }
    let Some(poles) = poles else { return Ok(Vec::new()) };
    let laurent_only = |with_zero: bool, with_inf: bool| {
        let mut v = Vec::new();
        if with_zero {
            v.extend(frame.zero);
        }
        if with_inf {
            v.push(frame.inf);
        }
        PoleSet::of(&v)
    };
    let ring_shaped = lo.is_none_or(|l| l == 0) && hi.is_none_or(|h| h == 0);
    if ring_shaped {
        // contains 1: a pole ring, towers included
        let t = match poles {
            PoleSet::All => PoleSet::All,
            PoleSet::Finite(mut s) => {
                s.retain(|&i| Some(i) != frame.zero && i != frame.inf);
                PoleSet::Finite(s).union(&laurent_only(lo.is_none(), hi.is_none()))
            }
        };
        return Ok(vec![Line::new(0, t).normalized(frame)?]);
    }
    // some line has a nonzero exponent, so no polar towers survive
    Ok(match (lo, hi) {
        (None, None) => unreachable!("unbounded ranges are ring shaped"),
        (Some(l), None) => vec![Line::new(l, laurent_only(false, true)).normalized(frame)?],
        (None, Some(h)) => vec![Line::new(h, laurent_only(true, false)).normalized(frame)?],
        (Some(l), Some(h)) => (l..=h).map(|d| Line::new(d, PoleSet::empty())).collect(),
    })
}

fn integral_pushforward(f: &MorphismDescriptor, sheaf: &SheafDescriptor) -> Result<SheafDescriptor> {
    let x = &f.source;
    let data = sheaf.topological_data(x)?;
    let ypos = f.target.poset();
    let mut complexes = Vec::new();
    let mut bases = Vec::new();
    let mut relations = Vec::new();
    for y in 0..f.target.len() {
        let c = StandardComplex::build(x.poset(), &f.preimage_of_star(y), &data)?;
        let (z, _) = cycles_and_boundaries(&c, 0);
        let rel = c.relations(0);
        let coords: Vec<Vec<BigInt>> = (0..rel.cols())
            .map(|j| crate::arith::lattice::solve_integral(&z, &rel.column(j)).expect("relations are cycles"))
            .collect();
        relations.push(IntMatrix::from_columns(z.cols(), &coords));
        bases.push(z);
        complexes.push(c);
    }
    let mut maps = BTreeMap::new();
    for &(a, b) in ypos.hasse() {
        let r = complexes[a].restriction_to(&complexes[b], 0, &data).mul(&bases[a]);
        let cols: Vec<Vec<BigInt>> = (0..r.cols())
            .map(|j| crate::arith::lattice::solve_integral(&bases[b], &r.column(j)).expect("cycles restrict to cycles"))
            .collect();
        maps.insert((a, b), IntMatrix::from_columns(bases[b].cols(), &cols));
    }
    let out = SheafDescriptor::Abelian(AbelianSheaf { ranks: bases.iter().map(IntMatrix::cols).collect(), relations, maps });
    out.validate(&f.target)?;
    Ok(out)
}

/// The dimension vector of `H^*(U, F)` for finite-dimensional pieces, used
/// by callers that only need field dimensions of a single pattern.
pub fn field_dims(c: &StandardComplex, k: Field) -> Vec<usize> {
    c.cohomology(Coefficients::Field(k)).iter().map(|g| g.rank).collect()
}

/// Rank of an integer matrix over `k`.
pub fn rank_over(m: &IntMatrix, k: Field) -> usize {
    let fm: FieldMatrix = m.to_field(k);
    fm.rank()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::pole_ids;

    fn rational(points: &str, relations: &str) -> RingedFiniteSpace {
        RingedFiniteSpace::from_json(&format!(
            r#"{{"universe": {{"kind": "rational"}}, "points": {points}, "relations": {relations}}}"#
        ))
        .unwrap()
    }

    fn dl() -> RingedFiniteSpace {
        rational(
            r#"[{"id": "p", "poles": ["inf"]}, {"id": "q", "poles": ["inf"]}, {"id": "g", "poles": "ALL"}]"#,
            r#"[["p", "g"], ["q", "g"]]"#,
        )
    }

    fn p1() -> RingedFiniteSpace {
        rational(
            r#"[{"id": "p", "poles": ["inf"]}, {"id": "q", "poles": ["zero"]}, {"id": "g", "poles": ["zero", "inf"]}]"#,
            r#"[["p", "g"], ["q", "g"]]"#,
        )
    }

    fn twist(n: i64) -> SheafDescriptor {
        SheafDescriptor::from_json(
            &p1(),
            &format!(
                r#"{{"kind":"fracmono","data":{{"p":{{"exp":0,"poles":["inf"]}},"q":{{"exp":{n},"poles":["zero"]}},"g":{{"exp":0,"poles":["zero","inf"]}}}}}}"#
            ),
        )
        .unwrap()
    }

    fn topological(points: &[&str], rel: &[(&str, &str)]) -> RingedFiniteSpace {
        RingedFiniteSpace::topological(FinitePoset::from_relations(points, rel).unwrap(), Coefficients::Integers)
    }

    fn labels(d: &DegreeReport) -> Vec<(&str, usize, Multiplicity)> {
        d.pieces.iter().map(|p| (p.pattern.as_str(), p.dim, p.multiplicity)).collect()
    }

    #[test]
    fn wedge_pattern_complex() {
        let x = dl();
        let v = x.poset().set_from_labels(&["g"]).unwrap();
        let c = StandardComplex::build(x.poset(), &x.poset().all(), &pattern_data(x.poset(), &v).unwrap()).unwrap();
        assert_eq!(c.dims(), &[1, 2]);
        assert_eq!(c.complex.diffs[0], IntMatrix::from_i64(&[&[1], &[1]]));
        assert_eq!(pattern_cohomology(&x, &x.poset().all(), &v).unwrap(), vec![0, 1]);
        assert_eq!(pattern_cohomology(&x, &x.poset().all(), &x.poset().all()).unwrap(), vec![1, 0]);
        let not_up = x.poset().set_from_labels(&["p"]).unwrap();
        assert!(pattern_cohomology(&x, &x.poset().all(), &not_up).is_err());
    }

    #[test]
    fn doubled_line() {
        let x = dl();
        let r = sheaf_cohomology(&x, &x.poset().all(), &SheafDescriptor::Structure).unwrap();
        let om = Multiplicity::Omega;
        assert_eq!(labels(&r.degrees[0]), vec![("place:inf", 1, om), ("constant", 1, Multiplicity::Finite(1))]);
        assert_eq!(labels(&r.degrees[1]), vec![("place:zero", 1, om), ("place:one", 1, om), ("unlisted", 1, om)]);
        let pl = x.places();
        assert_eq!(r.render_degree(0, pl), "k[x]");
        assert_eq!(r.render_degree(1, pl), "k(x)/k[x]");
    }

    #[test]
    fn projective_line() {
        let x = p1();
        let r = sheaf_cohomology(&x, &x.poset().all(), &SheafDescriptor::Structure).unwrap();
        assert_eq!(labels(&r.degrees[0]), vec![("constant", 1, Multiplicity::Finite(1))]);
        assert!(r.degrees[1].is_zero());
        assert_eq!(r.render_degree(0, x.places()), "k");
        let w = window_cohomology(&x, &x.poset().all(), &SheafDescriptor::Structure, 6).unwrap();
        assert!(w.agrees() && w.stabilized, "{w:?}");
    }

    #[test]
    fn twists() {
        let x = p1();
        let all = x.poset().all();
        for n in 0..=5 {
            let r = sheaf_cohomology(&x, &all, &twist(n)).unwrap();
            assert_eq!(r.total(0), Multiplicity::Finite(n as u64 + 1), "h0 O({n})");
            assert_eq!(r.total(1), Multiplicity::Finite(0));
        }
        for n in 1..=5 {
            let r = sheaf_cohomology(&x, &all, &twist(-n)).unwrap();
            assert_eq!(r.total(0), Multiplicity::Finite(0));
            assert_eq!(r.total(1), Multiplicity::Finite(n as u64 - 1), "h1 O(-{n})");
        }
        let r = sheaf_cohomology(&x, &all, &twist(-2)).unwrap();
        assert_eq!(labels(&r.degrees[1]), vec![("degree:-1", 1, Multiplicity::Finite(1))]);
        for n in [-3, 2] {
            let w = window_cohomology(&x, &all, &twist(n), 5).unwrap();
            assert!(w.agrees(), "{w:?}");
        }
    }

    #[test]
    fn topological_examples() {
        let s1 = topological(&["a", "b", "c", "d"], &[("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")]);
        let r = sheaf_cohomology(&s1, &s1.poset().all(), &SheafDescriptor::Structure).unwrap();
        assert_eq!(r.render_degree(0, None), "Z");
        assert_eq!(r.render_degree(1, None), "Z");
        let vee = topological(&["m", "a", "b"], &[("m", "a"), ("m", "b")]);
        let c = StandardComplex::build(
            vee.poset(),
            &vee.poset().all(),
            &SheafDescriptor::Structure.topological_data(&vee).unwrap(),
        )
        .unwrap();
        assert_eq!(c.dims(), &[3, 2]);
        let r = sheaf_cohomology(&vee, &vee.poset().all(), &SheafDescriptor::Structure).unwrap();
        assert!(r.is_acyclic());
        // monodromy m around the circle gives Z/(m-1)
        let doc = r#"{"kind":"abelian","stalks":{"a":{"rank":1},"b":{"rank":1},"c":{"rank":1},"d":{"rank":1}},
            "maps":[{"from":"a","to":"c","matrix":[[3]]}]}"#;
        let f = SheafDescriptor::from_json(&s1, doc).unwrap();
        let r = sheaf_cohomology(&s1, &s1.poset().all(), &f).unwrap();
        assert_eq!(r.render_degree(1, None), "Z/2");
    }

    #[test]
    fn point_and_empty() {
        let pl = PlaceList::standard(Field::Rationals);
        let pt = RingedFiniteSpace::rational_point(pl.clone(), pole_ids(&pl, &["inf"]));
        let r = sheaf_cohomology(&pt, &pt.poset().all(), &SheafDescriptor::Structure).unwrap();
        assert_eq!(r.degrees.len(), 1);
        assert_eq!(r.render_degree(0, Some(&pl)), "k[x]");
        let r = sheaf_cohomology(&pt, &PointSet::new(), &SheafDescriptor::Structure).unwrap();
        assert!(r.degrees.is_empty());
    }

    #[test]
    fn direct_images() {
        let x = dl();
        let pl = x.places().unwrap().clone();
        let f = MorphismDescriptor::to_point(&x, PoleSet::empty()).unwrap();
        let pushed = pushforward(&f, &SheafDescriptor::Structure).unwrap();
        let SheafDescriptor::FracMono(m) = &pushed else { panic!() };
        assert_eq!(m.lines, vec![vec![Line::new(0, pole_ids(&pl, &["inf"]))]]);
        let h1 = higher_direct_image(&f, &SheafDescriptor::Structure, 1).unwrap();
        assert_eq!(h1.stalks[0].1.as_ref().unwrap().pieces.len(), 3);
        assert_eq!(h1.quasi_coherent, Some(true));
        assert!(higher_direct_image(&f, &SheafDescriptor::Structure, 2).unwrap().stalks[0].1.is_none());

        let g = x.poset().set_from_labels(&["g"]).unwrap();
        let j = MorphismDescriptor::open_inclusion(&x, &g).unwrap();
        let pushed = pushforward(&j, &SheafDescriptor::Structure).unwrap();
        let SheafDescriptor::FracMono(m) = &pushed else { panic!() };
        assert!(m.lines.iter().all(|l| l.len() == 1 && l[0].poles.is_all()));
        let qc = crate::sheaf::is_quasi_coherent(&x, &pushed, crate::sheaf::QcMode::QuasiCoherent, true).unwrap();
        assert!(qc.holds);
        assert_eq!(higher_direct_image(&j, &SheafDescriptor::Structure, 0).unwrap().quasi_coherent, Some(true));

        let id = MorphismDescriptor::identity(&p1());
        let pushed = pushforward(&id, &twist(3)).unwrap();
        assert!(crate::sheaf::same_sheaf(&p1(), &pushed, &twist(3)).unwrap());
    }

    #[test]
    fn twisted_global_sections() {
        // global sections of O(2) on the line, pushed to a point: x^0..x^2
        let x = p1();
        let f = MorphismDescriptor::to_point(&x, PoleSet::empty()).unwrap();
        let SheafDescriptor::FracMono(m) = pushforward(&f, &twist(2)).unwrap() else { panic!() };
        assert_eq!(m.lines[0].len(), 3);
        let SheafDescriptor::FracMono(m) = pushforward(&f, &twist(-1)).unwrap() else { panic!() };
        assert!(m.lines[0].is_empty());
    }

    #[test]
    fn integral_pushforward_of_circle() {
        let s1 = topological(&["a", "b", "c", "d"], &[("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")]);
        let f = MorphismDescriptor::to_point(&s1, PoleSet::empty()).unwrap();
        let SheafDescriptor::Abelian(a) = pushforward(&f, &SheafDescriptor::Structure).unwrap() else { panic!() };
        assert_eq!(a.ranks, vec![1]);
        let z3 = AbelianSheaf::constant(s1.poset(), 1, IntMatrix::from_i64(&[&[3]]));
        let SheafDescriptor::Abelian(a) = pushforward(&f, &SheafDescriptor::Abelian(z3)).unwrap() else { panic!() };
        let r = sheaf_cohomology(&f.target, &f.target.poset().all(), &SheafDescriptor::Abelian(a)).unwrap();
        assert_eq!(r.render_degree(0, None), "Z/3");
    }
}
