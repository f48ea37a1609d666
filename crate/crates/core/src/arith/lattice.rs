//! Integer lattice operations: kernels, images and integral solving.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;

use super::matrix::IntMatrix;
use super::snf::smith_normal_form;

/// Column Hermite-style reduction: returns `(h, v)` with `m · v = h`, `v`
/// unimodular, the first `rank` columns of `h` in echelon form and the rest
/// zero.
pub fn column_echelon(m: &IntMatrix) -> (IntMatrix, IntMatrix, usize) {
    let mut h = m.clone();
    let mut v = IntMatrix::identity(m.cols());
    let mut c = 0;
    for r in 0..h.rows() {
        if c == h.cols() {
            break;
        }
        for j in c + 1..h.cols() {
            if h.get(r, j).is_zero() {
                continue;
            }
            let a = h.get(r, c).clone();
            let b = h.get(r, j).clone();
            let e = a.extended_gcd(&b);
            let (a1, b1) = (&a / &e.gcd, &b / &e.gcd);
            // [col_c, col_j] <- [x col_c + y col_j, -b1 col_c + a1 col_j]
            combine_columns(&mut h, c, j, &e.x, &e.y, &(-&b1), &a1);
            combine_columns(&mut v, c, j, &e.x, &e.y, &(-&b1), &a1);
        }
        if !h.get(r, c).is_zero() {
            c += 1;
        }
    }
    (h, v, c)
}

fn combine_columns(
    m: &mut IntMatrix,
    c: usize,
    j: usize,
    x: &BigInt,
    y: &BigInt,
    z: &BigInt,
    w: &BigInt,
) {
    for i in 0..m.rows() {
        let (p, q) = (m.get(i, c).clone(), m.get(i, j).clone());
        m.set(i, c, x * &p + y * &q);
        m.set(i, j, z * &p + w * &q);
    }
}

/// Basis of `{ v ∈ ℤ^cols : m v = 0 }` as matrix columns.
pub fn kernel_basis(m: &IntMatrix) -> IntMatrix {
    let (_, v, rank) = column_echelon(m);
    let idx: Vec<usize> = (rank..m.cols()).collect();
    v.select_columns(&idx)
}

/// Basis of the column lattice of `m`.
pub fn image_basis(m: &IntMatrix) -> IntMatrix {
    let (h, _, rank) = column_echelon(m);
    let idx: Vec<usize> = (0..rank).collect();
    h.select_columns(&idx)
}

/// Integral solution of `m x = b`, if any.
pub fn solve_integral(m: &IntMatrix, b: &[BigInt]) -> Option<Vec<BigInt>> {
    let s = smith_normal_form(m);
    let y = s.left.mul_vec(b);
    let r = s.rank();
    let mut z = vec![BigInt::zero(); m.cols()];
    for (i, yi) in y.iter().enumerate() {
        if i < r {
            let (q, rem) = yi.div_rem(&s.invariants[i]);
            if !rem.is_zero() {
                return None;
            }
            z[i] = q;
        } else if !yi.is_zero() {
            return None;
        }
    }
    Some(s.right.mul_vec(&z))
}

/// Whether every column of `b` lies in the column lattice of `m`.
pub fn contains_columns(m: &IntMatrix, b: &IntMatrix) -> bool {
    (0..b.cols()).all(|j| solve_integral(m, &b.column(j)).is_some())
}
