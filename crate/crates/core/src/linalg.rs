//! Exact rational elimination on small integer matrices, plus the float
//! helpers (orthonormal bases, projections) built on top of it.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Mat = Vec<Vec<BigRational>>;

pub fn to_rational(rows: &[Vec<i64>]) -> Mat {
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|&v| BigRational::from_integer(BigInt::from(v)))
                .collect()
        })
        .collect()
}

pub fn transpose<T: Clone>(m: &[Vec<T>], ncols: usize) -> Vec<Vec<T>> {
    (0..ncols)
        .map(|j| m.iter().map(|r| r[j].clone()).collect())
        .collect()
}

/// Reduced row echelon form in place; returns pivot columns.
pub fn rref(m: &mut Mat) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for v in m[r].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let sub = &f * &m[r][j];
                    m[i][j] -= sub;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(rows: &[Vec<i64>]) -> usize {
    let mut m = to_rational(rows);
    rref(&mut m).len()
}

/// Basis of `{ y : A y = 0 }` for `A` given as rows with `ncols` columns,
/// each vector scaled to coprime integers.
pub fn null_space(rows: &[Vec<i64>], ncols: usize) -> Vec<Vec<i64>> {
    let mut m = to_rational(rows);
    let pivots = rref(&mut m);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); ncols];
            v[f] = BigRational::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[r][f].clone();
            }
            integerize(&v)
        })
        .collect()
}

/// Scales a rational vector to the primitive integer vector with the same direction.
pub fn integerize(v: &[BigRational]) -> Vec<i64> {
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v
        .iter()
        .map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer())
        .collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    let g = if g.is_zero() { BigInt::one() } else { g };
    ints.iter()
        .map(|x| (x / &g).to_i64().expect("coefficient fits in i64"))
        .collect()
}

/// Maximal linearly independent subset of `rows`, by index.
pub fn independent_rows(rows: &[Vec<i64>], ncols: usize) -> Vec<usize> {
    let t = transpose(&to_rational(rows), ncols);
    let mut t = t;
    rref(&mut t)
}

/// Orthonormal basis (Gram-Schmidt, re-orthogonalised) of the span of `vectors`,
/// skipping dependent ones.
pub fn orthonormal_basis(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        let scale = norm(&w);
        if scale == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let d = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= d * bi);
            }
        }
        let nw = norm(&w);
        if nw > 1e-10 * scale {
            basis.push(w.into_iter().map(|x| x / nw).collect());
        }
    }
    basis
}

/// Norm of the component of `v` orthogonal to the span of the orthonormal `basis`.
pub fn residual_after_projection(v: &[f64], basis: &[Vec<f64>]) -> f64 {
    let mut w = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let d = dot(&w, b);
            w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= d * bi);
        }
    }
    norm(&w)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn is_positive_vec(x: &[f64]) -> bool {
    x.iter().all(|v| *v > 0.0 && v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_null_space() {
        // columns (-2), (2) as a 1x2 matrix
        assert_eq!(rank(&[vec![-2, 2]]), 1);
        let ns = null_space(&[vec![1, 1, 0], vec![0, 1, 1]], 3);
        assert_eq!(ns, vec![vec![1, -1, 1]]);
    }

    #[test]
    fn independent_row_subset() {
        let rows = vec![vec![1, 2], vec![2, 4], vec![0, 1]];
        assert_eq!(independent_rows(&rows, 2), vec![0, 2]);
    }

    #[test]
    fn orthonormal_basis_drops_dependent() {
        let b = orthonormal_basis(&[
            vec![1.0, 1.0, 0.0],
            vec![2.0, 2.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ]);
        assert_eq!(b.len(), 2);
        assert!(dot(&b[0], &b[1]).abs() < 1e-15);
        assert!(residual_after_projection(&[3.0, -1.0, 0.0], &b) < 1e-14);
        assert!((residual_after_projection(&[0.0, 0.0, 2.0], &b) - 2.0).abs() < 1e-15);
    }
}
