//! Row reduction, kernels, inverses, and a few dense spectral routines.
//!
//! Over an exact field the pivot is the first nonzero entry of a column, so
//! echelon forms are reproducible. Over floats the pivot is the largest
//! entry and anything at or below `tol * max|a|` counts as zero.

use crate::matrix::Matrix;
use crate::scalar::{Field, RealField};

/// Reduced row echelon form with its pivot columns.
#[derive(Clone, Debug)]
pub struct Echelon<F: Field> {
    pub reduced: Matrix<F>,
    pub pivots: Vec<usize>,
}

fn negligible<F: Field>(x: &F, cutoff: f64) -> bool {
    if F::EXACT {
        x.is_zero()
    } else {
        x.magnitude() <= cutoff
    }
}

pub fn rref<F: Field>(a: &Matrix<F>, tol: f64) -> Echelon<F> {
    let mut m = a.clone();
    let (rows, cols) = (m.rows(), m.cols());
    let cutoff = tol * a.max_abs();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let pick = if F::EXACT {
            (r..rows).find(|&i| !m[(i, c)].is_zero())
        } else {
            (r..rows)
                .filter(|&i| !negligible(&m[(i, c)], cutoff))
                .max_by(|&i, &j| m[(i, c)].magnitude().total_cmp(&m[(j, c)].magnitude()))
        };
        let Some(p) = pick else {
            if !F::EXACT {
                for i in r..rows {
                    m[(i, c)] = F::zero(m.ctx());
                }
            }
            continue;
        };
        if p != r {
            for j in 0..cols {
                let tmp = m[(p, j)].clone();
                m[(p, j)] = m[(r, j)].clone();
                m[(r, j)] = tmp;
            }
        }
        let inv = m[(r, c)].recip().expect("pivot is nonzero");
        for j in c..cols {
            m[(r, j)] = m[(r, j)].mul(&inv);
        }
        for i in 0..rows {
            if i == r || m[(i, c)].is_zero() {
                continue;
            }
            let f = m[(i, c)].clone();
            for j in c..cols {
                let t = m[(r, j)].clone();
                m[(i, j)].sub_mul(&f, &t);
            }
            m[(i, c)] = F::zero(m.ctx());
        }
        pivots.push(c);
        r += 1;
    }
    Echelon { reduced: m, pivots }
}

pub fn rank<F: Field>(a: &Matrix<F>, tol: f64) -> usize {
    rref(a, tol).pivots.len()
}

/// Basis of the null space as columns, one per free variable in increasing
/// column order.
pub fn kernel<F: Field>(a: &Matrix<F>, tol: f64) -> Matrix<F> {
    let e = rref(a, tol);
    let n = a.cols();
    let free: Vec<usize> = (0..n).filter(|c| !e.pivots.contains(c)).collect();
    let ctx = a.ctx();
    let mut k = Matrix::zeros(ctx, n, free.len());
    for (col, &f) in free.iter().enumerate() {
        k[(f, col)] = F::one(ctx);
        for (r, &p) in e.pivots.iter().enumerate() {
            k[(p, col)] = e.reduced[(r, f)].neg();
        }
    }
    k
}

/// Indices of a maximal independent set of columns, chosen greedily left to right.
pub fn independent_columns<F: Field>(a: &Matrix<F>, tol: f64) -> Vec<usize> {
    rref(a, tol).pivots
}

pub fn inverse<F: Field>(a: &Matrix<F>, tol: f64) -> Option<Matrix<F>> {
    assert!(a.is_square(), "inverse of a non-square matrix");
    let n = a.rows();
    let aug = a.hstack(&Matrix::identity(a.ctx(), n));
    let mut m = aug;
    let cutoff = tol * a.max_abs();
    for c in 0..n {
        let pick = if F::EXACT {
            (c..n).find(|&i| !m[(i, c)].is_zero())
        } else {
            (c..n)
                .filter(|&i| !negligible(&m[(i, c)], cutoff))
                .max_by(|&i, &j| m[(i, c)].magnitude().total_cmp(&m[(j, c)].magnitude()))
        };
        let p = pick?;
        if p != c {
            for j in 0..2 * n {
                let tmp = m[(p, j)].clone();
                m[(p, j)] = m[(c, j)].clone();
                m[(c, j)] = tmp;
            }
        }
        let inv = m[(c, c)].recip()?;
        for j in 0..2 * n {
            m[(c, j)] = m[(c, j)].mul(&inv);
        }
        for i in 0..n {
            if i == c || m[(i, c)].is_zero() {
                continue;
            }
            let f = m[(i, c)].clone();
            for j in 0..2 * n {
                let t = m[(c, j)].clone();
                m[(i, j)].sub_mul(&f, &t);
            }
        }
    }
    Some(m.submatrix(0, n, n, n))
}

/// Unique solution of `a x = b` for square invertible `a`.
pub fn solve<F: Field>(a: &Matrix<F>, b: &Matrix<F>, tol: f64) -> Option<Matrix<F>> {
    inverse(a, tol).map(|inv| inv.mul(b))
}

/// Columns of `b` that lie in the column space of `a` (exact or to tolerance).
pub fn in_column_space<F: Field>(a: &Matrix<F>, b: &Matrix<F>, tol: f64) -> bool {
    rank(&a.hstack(b), tol) == rank(a, tol)
}

/// Singular values in decreasing order (one-sided Jacobi).
pub fn singular_values<F: RealField>(a: &Matrix<F>) -> Vec<F> {
    let m = if a.rows() < a.cols() { a.transpose() } else { a.clone() };
    let (rows, n) = (m.rows(), m.cols());
    let ctx = m.ctx();
    let mut cols: Vec<Vec<F>> = (0..n).map(|j| m.column(j)).collect();
    let eps = (F::unit_roundoff(ctx) * (rows.max(2) as f64)).max(1e-300);
    let dot = |x: &[F], y: &[F]| {
        let mut acc = F::zero(ctx);
        for (p, q) in x.iter().zip(y) {
            acc.add_mul(p, q);
        }
        acc
    };
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma.is_zero() {
                    continue;
                }
                if gamma.magnitude() <= eps * (alpha.magnitude() * beta.magnitude()).sqrt() {
                    continue;
                }
                rotated = true;
                let two = F::from_i64(ctx, 2);
                let zeta = beta.sub(&alpha).div(&two.mul(&gamma)).unwrap();
                let one = F::one(ctx);
                let root = one.add(&zeta.mul(&zeta)).sqrt();
                let t = if zeta.is_negative() {
                    one.div(&zeta.abs().add(&root)).unwrap().neg()
                } else {
                    one.div(&zeta.add(&root)).unwrap()
                };
                let c = one.div(&one.add(&t.mul(&t)).sqrt()).unwrap();
                let s = c.mul(&t);
                for r in 0..rows {
                    let x = cols[i][r].clone();
                    let y = cols[j][r].clone();
                    cols[i][r] = c.mul(&x).sub(&s.mul(&y));
                    cols[j][r] = s.mul(&x).add(&c.mul(&y));
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<F> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    sv.sort_by(|x, y| y.magnitude().total_cmp(&x.magnitude()));
    sv
}

/// Eigenvalues of a symmetric matrix in increasing order (cyclic Jacobi).
pub fn symmetric_eigenvalues<F: RealField>(a: &Matrix<F>) -> Vec<F> {
    assert!(a.is_square());
    let n = a.rows();
    let ctx = a.ctx();
    let mut m = a.clone();
    let eps = F::unit_roundoff(ctx).max(1e-300);
    for _sweep in 0..80 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].magnitude()).fold(0.0, f64::max);
        if off <= eps * m.max_abs().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].is_zero() {
                    continue;
                }
                let two = F::from_i64(ctx, 2);
                let one = F::one(ctx);
                let theta = m[(q, q)].sub(&m[(p, p)]).div(&two.mul(&m[(p, q)])).unwrap();
                let root = theta.mul(&theta).add(&one).sqrt();
                let t = if theta.is_negative() {
                    one.div(&theta.abs().add(&root)).unwrap().neg()
                } else {
                    one.div(&theta.add(&root)).unwrap()
                };
                let c = one.div(&t.mul(&t).add(&one).sqrt()).unwrap();
                let s = t.mul(&c);
                for k in 0..n {
                    let x = m[(k, p)].clone();
                    let y = m[(k, q)].clone();
                    m[(k, p)] = c.mul(&x).sub(&s.mul(&y));
                    m[(k, q)] = s.mul(&x).add(&c.mul(&y));
                }
                for k in 0..n {
                    let x = m[(p, k)].clone();
                    let y = m[(q, k)].clone();
                    m[(p, k)] = c.mul(&x).sub(&s.mul(&y));
                    m[(q, k)] = s.mul(&x).add(&c.mul(&y));
                }
            }
        }
    }
    let mut ev: Vec<F> = (0..n).map(|i| m[(i, i)].clone()).collect();
    ev.sort_by(|x, y| x.to_f64().total_cmp(&y.to_f64()));
    ev
}

/// Numerical rank with a two-sided band: singular values above
/// `hi * s_max` count, those at or below `lo * s_max` do not, anything in
/// between is reported as `Err(ratio)`.
pub fn banded_rank<F: RealField>(a: &Matrix<F>, hi: f64, lo: f64) -> Result<usize, f64> {
    let sv = singular_values(a);
    let Some(top) = sv.first().map(|s| s.magnitude()) else {
        return Ok(0);
    };
    if top == 0.0 {
        return Ok(0);
    }
    let mut r = 0;
    for s in &sv {
        let ratio = s.magnitude() / top;
        if ratio > hi {
            r += 1;
        } else if ratio > lo {
            return Err(ratio);
        }
    }
    Ok(r)
}
