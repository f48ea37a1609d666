//! Smith normal form over ℤ with unimodular certificates.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::matrix::IntMatrix;

/// `left · input · right = diagonal`, with `invariants` the nonzero diagonal
/// entries `d_1 | d_2 | …`, all positive.
#[derive(Debug, Clone)]
pub struct SmithForm {
    pub left: IntMatrix,
    pub right: IntMatrix,
    pub diagonal: IntMatrix,
    pub invariants: Vec<BigInt>,
}

impl SmithForm {
    pub fn rank(&self) -> usize {
        self.invariants.len()
    }

    /// Invariant factors different from one.
    pub fn torsion(&self) -> Vec<BigInt> {
        self.invariants.iter().filter(|d| !d.is_one()).cloned().collect()
    }

    /// Checks `left · m · right == diagonal` and that the diagonal is a
    /// divisibility chain.
    pub fn verify(&self, m: &IntMatrix) -> bool {
        if self.left.mul(m).mul(&self.right) != self.diagonal {
            return false;
        }
        let r = self.rank();
        for i in 0..self.diagonal.rows() {
            for j in 0..self.diagonal.cols() {
                let v = self.diagonal.get(i, j);
                let expected_nonzero = i == j && i < r;
                if expected_nonzero != !v.is_zero() {
                    return false;
                }
            }
        }
        self.invariants.windows(2).all(|w| (&w[1] % &w[0]).is_zero())
            && self.invariants.iter().all(|d| d.is_positive())
    }
}

pub fn smith_normal_form(m: &IntMatrix) -> SmithForm {
    let (rows, cols) = (m.rows(), m.cols());
    let mut d = m.clone();
    let mut left = IntMatrix::identity(rows);
    let mut right = IntMatrix::identity(cols);
    let mut invariants = Vec::new();

    for t in 0..rows.min(cols) {
        // pivot: smallest nonzero absolute value in the trailing block
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                let v = d.get(i, j);
                if !v.is_zero() && best.is_none_or(|(bi, bj)| v.abs() < d.get(bi, bj).abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        d.swap_rows(t, pi);
        left.swap_rows(t, pi);
        d.swap_cols(t, pj);
        right.swap_cols(t, pj);

        loop {
            let mut changed = false;
            for i in t + 1..rows {
                if d.get(i, t).is_zero() {
                    continue;
                }
                let q = d.get(i, t).div_floor(d.get(t, t));
                let nq = -q;
                d.add_row_multiple(i, t, &nq);
                left.add_row_multiple(i, t, &nq);
                if !d.get(i, t).is_zero() {
                    d.swap_rows(t, i);
                    left.swap_rows(t, i);
                    changed = true;
                }
            }
            for j in t + 1..cols {
                if d.get(t, j).is_zero() {
                    continue;
                }
                let q = d.get(t, j).div_floor(d.get(t, t));
                let nq = -q;
                d.add_col_multiple(j, t, &nq);
                right.add_col_multiple(j, t, &nq);
                if !d.get(t, j).is_zero() {
                    d.swap_cols(t, j);
                    right.swap_cols(t, j);
                    changed = true;
                }
            }
            if changed {
                continue;
            }
            // divisibility of the trailing block by the pivot
            let pivot = d.get(t, t).clone();
            let offender = (t + 1..rows)
                .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                .find(|&(i, j)| !(d.get(i, j) % &pivot).is_zero());
            match offender {
                Some((i, _)) => {
                    d.add_row_multiple(t, i, &BigInt::one());
                    left.add_row_multiple(t, i, &BigInt::one());
                }
                None => break,
            }
        }
        if d.get(t, t).is_negative() {
            d.negate_row(t);
            left.negate_row(t);
        }
        invariants.push(d.get(t, t).clone());
    }

    SmithForm { left, right, diagonal: d, invariants }
}

/// Determinant by fraction-free Bareiss elimination.
pub fn determinant(m: &IntMatrix) -> BigInt {
    assert_eq!(m.rows(), m.cols());
    let n = m.rows();
    if n == 0 {
        return BigInt::one();
    }
    let mut a = m.clone();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a.get(k, k).is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !a.get(i, k).is_zero()) else {
                return BigInt::zero();
            };
            a.swap_rows(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (a.get(i, j) * a.get(k, k) - a.get(i, k) * a.get(k, j)) / &prev;
                a.set(i, j, v);
            }
        }
        prev = a.get(k, k).clone();
    }
    sign * a.get(n - 1, n - 1)
}
