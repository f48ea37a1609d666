//! Cohomology of finite cochain complexes of finitely presented modules,
//! over ℤ (via lattices and Smith forms) or over a field (via ranks).

use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use super::field::{Field, Scalar};
use super::lattice::{image_basis, kernel_basis, solve_integral};
use super::matrix::{FieldMatrix, IntMatrix};
use super::snf::smith_normal_form;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coefficients {
    Integers,
    Field(Field),
}

impl Coefficients {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "Z" | "ZZ" => Ok(Coefficients::Integers),
            other => Field::parse(other).map(Coefficients::Field),
        }
    }
}

impl fmt::Display for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficients::Integers => write!(f, "Z"),
            Coefficients::Field(k) => write!(f, "{k}"),
        }
    }
}

/// A finitely generated abelian group `ℤ^rank ⊕ ⨁ ℤ/t`, or a vector space of
/// dimension `rank` (empty torsion) over a field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Group {
    pub rank: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub torsion: Vec<BigInt>,
}

impl Group {
    pub fn free(rank: usize) -> Self {
        Group { rank, torsion: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0 && self.torsion.is_empty()
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match self.rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        parts.extend(self.torsion.iter().map(|t| format!("Z/{t}")));
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// `C^0 → C^1 → … → C^n` where each `C^i = ℤ^{dims[i]} / im relations[i]`
/// and `diffs[i]` is a `dims[i+1] × dims[i]` matrix.
#[derive(Debug, Clone)]
pub struct CochainComplex {
    pub dims: Vec<usize>,
    pub relations: Vec<IntMatrix>,
    pub diffs: Vec<IntMatrix>,
}

impl CochainComplex {
    /// A complex of free modules.
    pub fn free(dims: Vec<usize>, diffs: Vec<IntMatrix>) -> Result<Self> {
        let relations = dims.iter().map(|&d| IntMatrix::zeros(d, 0)).collect();
        Self::presented(dims, relations, diffs)
    }

    pub fn presented(
        dims: Vec<usize>,
        relations: Vec<IntMatrix>,
        diffs: Vec<IntMatrix>,
    ) -> Result<Self> {
        if relations.len() != dims.len() || diffs.len() + 1 != dims.len().max(1) {
            return Err(Error::Dimension(format!(
                "{} terms, {} relation blocks, {} differentials",
                dims.len(),
                relations.len(),
                diffs.len()
            )));
        }
        for (i, d) in diffs.iter().enumerate() {
            if d.cols() != dims[i] || d.rows() != dims[i + 1] {
                return Err(Error::Dimension(format!("differential {i} has wrong shape")));
            }
        }
        for (i, r) in relations.iter().enumerate() {
            if r.rows() != dims[i] {
                return Err(Error::Dimension(format!("relations {i} have wrong shape")));
            }
        }
        let c = CochainComplex { dims, relations, diffs };
        c.check_well_defined()?;
        Ok(c)
    }

    fn check_well_defined(&self) -> Result<()> {
        for (i, d) in self.diffs.iter().enumerate() {
            // d maps relations into relations
            let img = d.mul(&self.relations[i]);
            if !img.is_zero() && !super::lattice::contains_columns(&self.relations[i + 1], &img) {
                return Err(Error::Dimension(format!(
                    "differential {i} does not respect the presentations"
                )));
            }
            if i + 1 < self.diffs.len() {
                let dd = self.diffs[i + 1].mul(d);
                if !dd.is_zero() && !super::lattice::contains_columns(&self.relations[i + 2], &dd) {
                    return Err(Error::NotAComplex(i));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    fn diff_or_zero(&self, i: isize) -> IntMatrix {
        // d^i : C^i -> C^{i+1}, zero outside the range
        let n = self.dims.len() as isize;
        if i < 0 {
            IntMatrix::zeros(self.dims[0], 0)
        } else if i + 1 >= n {
            IntMatrix::zeros(0, self.dims[i as usize])
        } else {
            self.diffs[i as usize].clone()
        }
    }

    fn relations_or_empty(&self, i: usize) -> IntMatrix {
        if i < self.dims.len() {
            self.relations[i].clone()
        } else {
            IntMatrix::zeros(0, 0)
        }
    }

    pub fn cohomology(&self, coeffs: Coefficients) -> Vec<Group> {
        (0..self.dims.len()).map(|i| self.cohomology_at(i, coeffs)).collect()
    }

    pub fn cohomology_at(&self, i: usize, coeffs: Coefficients) -> Group {
        let d = self.diff_or_zero(i as isize);
        let d_prev = self.diff_or_zero(i as isize - 1);
        let rel_next = self.relations_or_empty(i + 1);
        let rel = &self.relations[i];
        let rel_next = if rel_next.rows() == d.rows() { rel_next } else { IntMatrix::zeros(d.rows(), 0) };
        match coeffs {
            Coefficients::Integers => integral_cohomology(&d, &d_prev, rel, &rel_next),
            Coefficients::Field(k) => field_cohomology(k, &d, &d_prev, rel, &rel_next),
        }
    }
}

fn integral_cohomology(d: &IntMatrix, d_prev: &IntMatrix, rel: &IntMatrix, rel_next: &IntMatrix) -> Group {
    let n = d.cols();
    // cycles: v with d v ∈ im rel_next
    let joint = d.hcat(&rel_next.neg());
    let ker = kernel_basis(&joint);
    let proj: Vec<Vec<BigInt>> = (0..ker.cols()).map(|j| ker.column(j)[..n].to_vec()).collect();
    let cycles = image_basis(&IntMatrix::from_columns(n, &proj));
    let z = cycles.cols();
    let boundaries = d_prev.hcat(rel);
    let coords: Vec<Vec<BigInt>> = (0..boundaries.cols())
        .map(|j| {
            solve_integral(&cycles, &boundaries.column(j))
                .expect("boundaries and relations lie in the cycle lattice")
        })
        .collect();
    let c = IntMatrix::from_columns(z, &coords);
    let s = smith_normal_form(&c);
    Group { rank: z - s.rank(), torsion: s.torsion() }
}

fn field_cohomology(
    k: Field,
    d: &IntMatrix,
    d_prev: &IntMatrix,
    rel: &IntMatrix,
    rel_next: &IntMatrix,
) -> Group {
    let joint = d.hcat(&rel_next.neg()).to_field(k);
    let nullity_joint = joint.cols() - joint.rank();
    let rn = rel_next.to_field(k);
    let nullity_rel = rn.cols() - rn.rank();
    let z = nullity_joint - nullity_rel;
    let b = d_prev.hcat(rel).to_field(k).rank();
    Group::free(z - b)
}

/// Cohomology of a complex whose differentials are field matrices.
pub fn field_complex_cohomology(dims: &[usize], diffs: &[FieldMatrix]) -> Result<Vec<usize>> {
    if diffs.len() + 1 != dims.len().max(1) {
        return Err(Error::Dimension("differential count".into()));
    }
    for (i, w) in diffs.windows(2).enumerate() {
        if !w[1].mul(&w[0]).is_zero() {
            return Err(Error::NotAComplex(i));
        }
    }
    let ranks: Vec<usize> = diffs.iter().map(FieldMatrix::rank).collect();
    Ok((0..dims.len())
        .map(|i| {
            let out = if i < ranks.len() { ranks[i] } else { 0 };
            let inc = if i > 0 { ranks[i - 1] } else { 0 };
            dims[i] - out - inc
        })
        .collect())
}

/// Vectors of `Scalar` over the field as a convenience for callers.
pub fn field_rank(k: Field, rows: usize, columns: &[Vec<Scalar>]) -> usize {
    FieldMatrix::from_columns(k, rows, columns).rank()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_map_into_two_copies() {
        // k --(1,1)--> k^2 : H^0 = 0, H^1 = k
        let d = IntMatrix::from_i64(&[&[1], &[1]]);
        let c = CochainComplex::free(vec![1, 2], vec![d]).unwrap();
        let h = c.cohomology(Coefficients::Field(Field::Rationals));
        assert_eq!(h, vec![Group::free(0), Group::free(1)]);
    }

    #[test]
    fn zero_differentials() {
        let c = CochainComplex::free(
            vec![1, 2, 1],
            vec![IntMatrix::zeros(2, 1), IntMatrix::zeros(1, 2)],
        )
        .unwrap();
        let h = c.cohomology(Coefficients::Integers);
        assert_eq!(h, vec![Group::free(1), Group::free(2), Group::free(1)]);
    }

    #[test]
    fn multiplication_by_two() {
        let c = CochainComplex::free(vec![1, 1], vec![IntMatrix::from_i64(&[&[2]])]).unwrap();
        let h = c.cohomology(Coefficients::Integers);
        assert_eq!(h[0], Group::free(0));
        assert_eq!(h[1], Group { rank: 0, torsion: vec![BigInt::from(2)] });
        let h2 = c.cohomology(Coefficients::Field(Field::Prime(2)));
        assert_eq!(h2, vec![Group::free(1), Group::free(1)]);
    }

    #[test]
    fn rejects_non_complex() {
        let d0 = IntMatrix::from_i64(&[&[1]]);
        let d1 = IntMatrix::from_i64(&[&[1]]);
        assert!(matches!(
            CochainComplex::free(vec![1, 1, 1], vec![d0, d1]),
            Err(Error::NotAComplex(0))
        ));
    }

    #[test]
    fn presented_terms() {
        // single term Z/3
        let c = CochainComplex::presented(vec![1], vec![IntMatrix::from_i64(&[&[3]])], vec![]).unwrap();
        assert_eq!(c.cohomology(Coefficients::Integers)[0], Group { rank: 0, torsion: vec![BigInt::from(3)] });
        assert_eq!(c.cohomology(Coefficients::Field(Field::Prime(3)))[0], Group::free(1));
        assert_eq!(c.cohomology(Coefficients::Field(Field::Rationals))[0], Group::free(0));
    }
}
