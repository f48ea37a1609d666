//! Python bindings. Documents go in and out as JSON strings.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use finspace::cohomology::sheaf_cohomology;
use finspace::constructions::{fibered_product as product, stein_factorization};
use finspace::predicates::{
    is_affine, is_affine_morphism, is_schematic, is_schematic_morphism, is_semi_separated, AffineMode,
    MorphismMode, PredicateVerdict,
};
use finspace::sheaf::SheafDescriptor;
use finspace::space::{MorphismDescriptor, MorphismDoc, RingedFiniteSpace};
use finspace::spec_functor::spec_export;

fn err(e: finspace::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn verdict_json(v: PredicateVerdict) -> String {
    serde_json::to_string(&v).expect("verdicts serialize")
}

#[pyclass(name = "Space", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Space {
    inner: RingedFiniteSpace,
}

#[pymethods]
impl Space {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        RingedFiniteSpace::from_json(text).map(|inner| Space { inner }).map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Space({} points, dim {})", self.inner.len(), self.inner.poset().dim())
    }

    #[getter]
    fn points(&self) -> Vec<String> {
        self.inner.poset().points().to_vec()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.poset().dim()
    }

    /// Stalk ring name at a point, e.g. `k[x]`.
    fn stalk(&self, point: &str) -> PyResult<String> {
        let p = self.inner.index_of(point).map_err(err)?;
        Ok(self.inner.stalk_name(p))
    }

    /// Cohomology report as JSON. `open` defaults to the whole space and
    /// `sheaf` (a sheaf document) to the structure sheaf.
    #[pyo3(signature = (open=None, sheaf=None))]
    fn cohomology(&self, open: Option<Vec<String>>, sheaf: Option<&str>) -> PyResult<String> {
        let poset = self.inner.poset();
        let u = match open {
            Some(labels) => poset.open_hull(&poset.set_from_labels(&labels).map_err(err)?),
            None => poset.all(),
        };
        let f = match sheaf {
            Some(text) => SheafDescriptor::from_json(&self.inner, text).map_err(err)?,
            None => SheafDescriptor::Structure,
        };
        let report = sheaf_cohomology(&self.inner, &u, &f).map_err(err)?;
        Ok(serde_json::to_string(&report).expect("reports serialize"))
    }

    /// `H^i` of the structure sheaf rendered as a ring or module name.
    fn render_cohomology(&self, degree: usize) -> PyResult<String> {
        let report = sheaf_cohomology(&self.inner, &self.inner.poset().all(), &SheafDescriptor::Structure)
            .map_err(err)?;
        Ok(report.render_degree(degree, self.inner.places()))
    }

    /// Verdict JSON for `schematic`, `semi-separated` or `affine`.
    #[pyo3(signature = (predicate, paranoid=false))]
    fn check(&self, predicate: &str, paranoid: bool) -> PyResult<String> {
        let v = match predicate {
            "schematic" => is_schematic(&self.inner, paranoid),
            "semi-separated" => is_semi_separated(&self.inner, paranoid),
            "affine" => is_affine(&self.inner),
            other => return Err(PyValueError::new_err(format!("unknown predicate `{other}`"))),
        };
        v.map(verdict_json).map_err(err)
    }

    fn spec_export(&self) -> PyResult<String> {
        let d = spec_export(&self.inner).map_err(err)?;
        Ok(serde_json::to_string(&d).expect("descriptors serialize"))
    }

    /// Points of the beat-point core.
    fn core(&self) -> Vec<String> {
        self.inner.poset().core_reduction().core.points().to_vec()
    }
}

#[pyclass(name = "Morphism", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Morphism {
    inner: MorphismDescriptor,
}

#[pymethods]
impl Morphism {
    /// Endpoints given as file names are resolved against `base_dir`.
    #[staticmethod]
    #[pyo3(signature = (text, base_dir=None))]
    fn from_json(text: &str, base_dir: Option<PathBuf>) -> PyResult<Self> {
        let doc: MorphismDoc = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let dir = base_dir.unwrap_or_default();
        let load = |name: &str| {
            let text = std::fs::read_to_string(dir.join(name))
                .map_err(|e| finspace::Error::Malformed(format!("{name}: {e}")))?;
            RingedFiniteSpace::from_json(&text)
        };
        MorphismDescriptor::from_doc(&doc, &load).map(|inner| Morphism { inner }).map_err(err)
    }

    #[staticmethod]
    fn to_point(space: &Space) -> PyResult<Self> {
        let t = finspace::arith::places::PoleSet::empty();
        MorphismDescriptor::to_point(&space.inner, t).map(|inner| Morphism { inner }).map_err(err)
    }

    #[getter]
    fn source(&self) -> Space {
        Space { inner: self.inner.source.clone() }
    }

    #[getter]
    fn target(&self) -> Space {
        Space { inner: self.inner.target.clone() }
    }

    /// Verdict JSON for `schematic`, `locally-acyclic`, `affine` or
    /// `weak-equivalence`.
    #[pyo3(signature = (property, paranoid=false))]
    fn check(&self, property: &str, paranoid: bool) -> PyResult<String> {
        let f = &self.inner;
        let v = match property {
            "schematic" => is_schematic_morphism(f, MorphismMode::Schematic, paranoid),
            "locally-acyclic" => is_schematic_morphism(f, MorphismMode::LocallyAcyclic, paranoid),
            "affine" => is_affine_morphism(f, AffineMode::Affine, paranoid),
            "weak-equivalence" => is_affine_morphism(f, AffineMode::WeakEquivalence, paranoid),
            other => return Err(PyValueError::new_err(format!("unknown property `{other}`"))),
        };
        v.map(verdict_json).map_err(err)
    }

    /// The middle space `Y′` of the Stein factorization.
    fn stein(&self) -> PyResult<Space> {
        stein_factorization(&self.inner).map(|s| Space { inner: s.middle }).map_err(err)
    }
}

#[pyfunction]
fn fibered_product(f: &Morphism, g: &Morphism) -> PyResult<Space> {
    product(&f.inner, &g.inner).map(|z| Space { inner: z.space }).map_err(err)
}

#[pymodule]
fn finspace_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Space>()?;
    m.add_class::<Morphism>()?;
    m.add_function(wrap_pyfunction!(fibered_product, m)?)?;
    Ok(())
}
