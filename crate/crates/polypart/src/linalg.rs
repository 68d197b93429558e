//! Exact linear algebra on small dense systems: fraction-free elimination
//! with full pivoting for ranks and one-dimensional nullspaces, plus a
//! partially pivoted f64 route for systems too large for exact arithmetic.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Clears denominators row by row, preserving row spans.
pub fn rows_to_integers(rows: &[Vec<BigRational>]) -> Vec<Vec<BigInt>> {
    rows.iter()
        .map(|row| {
            let mut lcm = BigInt::one();
            for x in row {
                lcm = lcm.lcm(x.denom());
            }
            row.iter()
                .map(|x| x.numer() * (&lcm / x.denom()))
                .collect()
        })
        .collect()
}

struct Echelon {
    mat: Vec<Vec<BigInt>>,
    rank: usize,
    // col_perm[t] = original column used as the t-th pivot; the tail holds
    // the untouched columns.
    col_perm: Vec<usize>,
}

/// Bareiss fraction-free elimination with full pivoting (smallest nonzero
/// pivot by bit size, which keeps intermediate entries small).
fn bareiss(mut mat: Vec<Vec<BigInt>>, ncols: usize) -> Echelon {
    let nrows = mat.len();
    let mut col_perm: Vec<usize> = (0..ncols).collect();
    let mut prev = BigInt::one();
    let mut t = 0;
    while t < nrows && t < ncols {
        // Full pivot search over the remaining submatrix.
        let mut best: Option<(usize, usize, u64)> = None;
        for i in t..nrows {
            for j in t..ncols {
                if mat[i][j].is_zero() {
                    continue;
                }
                let bits = mat[i][j].magnitude().bits();
                if best.map_or(true, |(_, _, b)| bits < b) {
                    best = Some((i, j, bits));
                }
            }
        }
        let Some((pi, pj, _)) = best else { break };
        mat.swap(t, pi);
        if pj != t {
            for row in mat.iter_mut() {
                row.swap(t, pj);
            }
            col_perm.swap(t, pj);
        }
        for i in t + 1..nrows {
            for j in t + 1..ncols {
                let num = &mat[t][t] * &mat[i][j] - &mat[i][t] * &mat[t][j];
                let (q, r) = num.div_rem(&prev);
                debug_assert!(r.is_zero(), "Bareiss division must be exact");
                mat[i][j] = q;
            }
            mat[i][t] = BigInt::zero();
        }
        prev = mat[t][t].clone();
        t += 1;
    }
    Echelon {
        mat,
        rank: t,
        col_perm,
    }
}

/// Exact rank of a rational matrix.
pub fn rank(rows: &[Vec<BigRational>], ncols: usize) -> usize {
    if rows.is_empty() || ncols == 0 {
        return 0;
    }
    bareiss(rows_to_integers(rows), ncols).rank
}

/// The nullspace vector of a system whose solution space has dimension
/// exactly one, as a primitive integer vector with positive leading entry.
/// Returns `None` when the nullity differs from one.
pub fn nullvector_if_unique(rows: &[Vec<BigRational>], ncols: usize) -> Option<Vec<BigRational>> {
    let ech = bareiss(rows_to_integers(rows), ncols);
    if ncols - ech.rank != 1 {
        return None;
    }
    let r = ech.rank;
    // Permuted solution: free coordinate (position r) set to 1, pivots by
    // back-substitution on the echelon rows.
    let mut sol = vec![BigRational::zero(); ncols];
    sol[r] = BigRational::one();
    for t in (0..r).rev() {
        let mut acc = BigRational::zero();
        for j in t + 1..ncols {
            if !sol[j].is_zero() && !ech.mat[t][j].is_zero() {
                acc += BigRational::from(ech.mat[t][j].clone()) * &sol[j];
            }
        }
        sol[t] = -acc / BigRational::from(ech.mat[t][t].clone());
    }
    let mut out = vec![BigRational::zero(); ncols];
    for (pos, &orig) in ech.col_perm.iter().enumerate() {
        out[orig] = sol[pos].clone();
    }
    Some(normalize_primitive(out))
}

/// Scales to a primitive integer vector with positive first nonzero entry.
fn normalize_primitive(v: Vec<BigRational>) -> Vec<BigRational> {
    let mut lcm = BigInt::one();
    for x in &v {
        lcm = lcm.lcm(x.denom());
    }
    let ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
    let mut gcd = BigInt::zero();
    for x in &ints {
        gcd = gcd.gcd(x);
    }
    if gcd.is_zero() {
        return v;
    }
    let flip = ints
        .iter()
        .find(|x| !x.is_zero())
        .map_or(false, |x| x.is_negative());
    ints.into_iter()
        .map(|x| {
            let y = &x / &gcd;
            BigRational::from(if flip { -y } else { y })
        })
        .collect()
}

/// Approximate nullvector via partially pivoted elimination with column
/// equilibration. Expects nullity one; returns `None` on a system that looks
/// degenerate (several numerically free columns) or non-finite input.
pub fn nullvector_f64(rows: &[Vec<f64>], ncols: usize) -> Option<Vec<f64>> {
    let nrows = rows.len();
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return None;
    }
    let mut scale = vec![0.0_f64; ncols];
    for row in rows {
        for (j, &x) in row.iter().enumerate() {
            scale[j] = scale[j].max(x.abs());
        }
    }
    // An identically zero column is a nullvector on its own.
    if let Some(j) = scale.iter().position(|&s| s == 0.0) {
        let mut v = vec![0.0; ncols];
        v[j] = 1.0;
        return Some(v);
    }
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| row.iter().zip(&scale).map(|(&x, &s)| x / s).collect())
        .collect();

    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut free_cols: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        // Largest entry in this column among the remaining rows.
        let mut best = row;
        for i in row + 1..nrows {
            if m[i][col].abs() > m[best][col].abs() {
                best = i;
            }
        }
        if row >= nrows || m[best][col].abs() < 1e-13 {
            free_cols.push(col);
            continue;
        }
        m.swap(row, best);
        for i in row + 1..nrows {
            let factor = m[i][col] / m[row][col];
            if factor != 0.0 {
                for j in col..ncols {
                    m[i][j] -= factor * m[row][j];
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }
    if free_cols.len() != 1 {
        return None;
    }
    let free = free_cols[0];
    let mut sol = vec![0.0_f64; ncols];
    sol[free] = 1.0;
    for (t, &pc) in pivot_cols.iter().enumerate().rev() {
        let mut acc = 0.0;
        for j in pc + 1..ncols {
            acc += m[t][j] * sol[j];
        }
        sol[pc] = -acc / m[t][pc];
    }
    if sol.iter().any(|x| !x.is_finite()) {
        return None;
    }
    // Undo the column scaling and fix the sign convention.
    for (x, &s) in sol.iter_mut().zip(&scale) {
        *x /= s;
    }
    let lead = sol.iter().find(|x| **x != 0.0).copied().unwrap_or(1.0);
    if lead < 0.0 {
        for x in sol.iter_mut() {
            *x = -*x;
        }
    }
    Some(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{rat, rat_int};

    fn rows(data: &[&[i64]]) -> Vec<Vec<BigRational>> {
        data.iter()
            .map(|r| r.iter().map(|&x| rat_int(x)).collect())
            .collect()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&rows(&[&[1, 0], &[0, 1]]), 2), 2);
        assert_eq!(rank(&rows(&[&[1, 2], &[2, 4]]), 2), 1);
        assert_eq!(rank(&rows(&[&[0, 0], &[0, 0]]), 2), 0);
        assert_eq!(
            rank(&rows(&[&[1, 2, 3], &[4, 5, 6], &[7, 8, 9]]), 3),
            2
        );
    }

    #[test]
    fn nullvector_line_through_two_points() {
        // Rows [x, y, 1] for (0,0) and (1,0): the line y = 0.
        let m = rows(&[&[0, 0, 1], &[1, 0, 1]]);
        let v = nullvector_if_unique(&m, 3).unwrap();
        assert_eq!(v, vec![rat_int(0), rat_int(1), rat_int(0)]);
    }

    #[test]
    fn nullvector_rejects_higher_nullity() {
        let m = rows(&[&[1, 0, 0]]);
        assert!(nullvector_if_unique(&m, 3).is_none());
    }

    #[test]
    fn nullvector_with_fractions() {
        // Line through (0,0) and (1/3, 1/2): 3x - 2y = 0 up to scale.
        let m = vec![
            vec![rat_int(0), rat_int(0), rat_int(1)],
            vec![rat(1, 3), rat(1, 2), rat_int(1)],
        ];
        let v = nullvector_if_unique(&m, 3).unwrap();
        assert_eq!(v, vec![rat_int(3), rat_int(-2), rat_int(0)]);
    }

    #[test]
    fn float_nullvector_matches_exact_direction() {
        let m = rows(&[&[0, 0, 1], &[1, 0, 1]]);
        let mf: Vec<Vec<f64>> = m
            .iter()
            .map(|r| r.iter().map(crate::numeric::rat_to_f64).collect())
            .collect();
        let v = nullvector_f64(&mf, 3).unwrap();
        assert!(v[0].abs() < 1e-12);
        assert!(v[1] > 0.0);
        assert!(v[2].abs() < 1e-12);
    }

    #[test]
    fn float_nullvector_detects_degenerate() {
        // Nullity two without a zero column.
        let mf = vec![vec![1.0, 1.0, 1.0]];
        assert!(nullvector_f64(&mf, 3).is_none());
        // A zero column is itself a clean nullvector.
        let v = nullvector_f64(&[vec![1.0, 0.0, 2.0]], 3).unwrap();
        assert_eq!(v, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn bareiss_agrees_with_cofactor_determinant() {
        // Full-rank square systems: the echelon diagonal's last entry is the
        // determinant up to sign; cross-check rank against naive expansion.
        let m = rows(&[&[2, 1, 1], &[1, 3, 2], &[1, 0, 0]]);
        assert_eq!(rank(&m, 3), 3);
        let singular = rows(&[&[1, 2, 3], &[2, 4, 6], &[0, 1, 1]]);
        assert_eq!(rank(&singular, 3), 2);
    }
}
