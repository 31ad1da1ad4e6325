//! Dense matrices over a [`Field`].

use std::fmt;

use crate::scalar::{Field, Rational};

#[derive(Clone, PartialEq)]
pub struct Matrix<F: Field> {
    rows: usize,
    cols: usize,
    ctx: F::Ctx,
    data: Vec<F>,
}

impl<F: Field> fmt::Debug for Matrix<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self[(i, j)].to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl<F: Field> std::ops::Index<(usize, usize)> for Matrix<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<F: Field> std::ops::IndexMut<(usize, usize)> for Matrix<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<F: Field> Matrix<F> {
    pub fn zeros(ctx: F::Ctx, rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, ctx, data: vec![F::zero(ctx); rows * cols] }
    }

    pub fn identity(ctx: F::Ctx, n: usize) -> Self {
        let mut m = Self::zeros(ctx, n, n);
        for i in 0..n {
            m[(i, i)] = F::one(ctx);
        }
        m
    }

    pub fn from_fn(ctx: F::Ctx, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, ctx, data }
    }

    /// Builds a matrix from rows of small integers.
    pub fn from_i64_rows(ctx: F::Ctx, rows: &[&[i64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        Self::from_fn(ctx, r, c, |i, j| F::from_i64(ctx, rows[i][j]))
    }

    pub fn from_columns(ctx: F::Ctx, rows: usize, cols: &[Vec<F>]) -> Self {
        Self::from_fn(ctx, rows, cols.len(), |i, j| cols[j][i].clone())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ctx(&self) -> F::Ctx {
        self.ctx
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[F]) {
        for (i, x) in v.iter().enumerate() {
            self[(i, j)] = x.clone();
        }
    }

    pub fn row(&self, i: usize) -> Vec<F> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.ctx, self.rows, idx.len(), |i, j| self[(i, idx[j])].clone())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.ctx, idx.len(), self.cols, |i, j| self[(idx[i], j)].clone())
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(self.ctx, rows, cols, |i, j| self[(r0 + i, c0 + j)].clone())
    }

    pub fn set_submatrix(&mut self, r0: usize, c0: usize, m: &Matrix<F>) {
        for i in 0..m.rows {
            for j in 0..m.cols {
                self[(r0 + i, c0 + j)] = m[(i, j)].clone();
            }
        }
    }

    pub fn hstack(&self, other: &Matrix<F>) -> Self {
        assert_eq!(self.rows, other.rows);
        Self::from_fn(self.ctx, self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)].clone()
            } else {
                other[(i, j - self.cols)].clone()
            }
        })
    }

    pub fn vstack(&self, other: &Matrix<F>) -> Self {
        assert_eq!(self.cols, other.cols);
        Self::from_fn(self.ctx, self.rows + other.rows, self.cols, |i, j| {
            if i < self.rows {
                self[(i, j)].clone()
            } else {
                other[(i - self.rows, j)].clone()
            }
        })
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ctx, self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn add(&self, o: &Matrix<F>) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "matrix add shape");
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a.add(b)).collect();
        Matrix { rows: self.rows, cols: self.cols, ctx: self.ctx, data }
    }

    pub fn sub(&self, o: &Matrix<F>) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "matrix sub shape");
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a.sub(b)).collect();
        Matrix { rows: self.rows, cols: self.cols, ctx: self.ctx, data }
    }

    pub fn add_assign(&mut self, o: &Matrix<F>) {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "matrix add shape");
        for (a, b) in self.data.iter_mut().zip(&o.data) {
            *a = a.add(b);
        }
    }

    pub fn neg(&self) -> Self {
        self.map(|x| x.neg())
    }

    pub fn scale(&self, s: &F) -> Self {
        self.map(|x| x.mul(s))
    }

    pub fn map(&self, f: impl Fn(&F) -> F) -> Self {
        Matrix { rows: self.rows, cols: self.cols, ctx: self.ctx, data: self.data.iter().map(f).collect() }
    }

    /// Converts entries into another field.
    pub fn convert<G: Field>(&self, ctx: G::Ctx, f: impl Fn(&F) -> G) -> Matrix<G> {
        Matrix { rows: self.rows, cols: self.cols, ctx, data: self.data.iter().map(f).collect() }
    }

    pub fn mul(&self, o: &Matrix<F>) -> Self {
        let mut out = Self::zeros(self.ctx, self.rows, o.cols);
        out.add_product(self, o);
        out
    }

    /// `self += a * b`.
    pub fn add_product(&mut self, a: &Matrix<F>, b: &Matrix<F>) {
        assert_eq!(a.cols, b.rows, "matrix product shape");
        assert_eq!((self.rows, self.cols), (a.rows, b.cols), "matrix product target shape");
        for i in 0..a.rows {
            for k in 0..a.cols {
                let x = &a.data[i * a.cols + k];
                if x.is_zero() {
                    continue;
                }
                for j in 0..b.cols {
                    let y = &b.data[k * b.cols + j];
                    if y.is_zero() {
                        continue;
                    }
                    self.data[i * self.cols + j].add_mul(x, y);
                }
            }
        }
    }

    pub fn mul_vec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = F::zero(self.ctx);
                for (j, x) in v.iter().enumerate() {
                    acc.add_mul(&self[(i, j)], x);
                }
                acc
            })
            .collect()
    }

    /// `self * o - o * self`.
    pub fn commutator(&self, o: &Matrix<F>) -> Self {
        self.mul(o).sub(&o.mul(self))
    }

    pub fn trace(&self) -> F {
        let mut acc = F::zero(self.ctx);
        for i in 0..self.rows.min(self.cols) {
            acc = acc.add(&self[(i, i)]);
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.magnitude()).fold(0.0, f64::max)
    }

    pub fn entries(&self) -> &[F] {
        &self.data
    }
}

impl Matrix<Rational> {
    pub fn from_rational_rows(rows: &[Vec<Rational>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        Self::from_fn((), r, c, |i, j| rows[i][j].clone())
    }

    /// Converts an exact matrix into another field.
    pub fn to_field<G: Field>(&self, ctx: G::Ctx) -> Matrix<G> {
        self.convert(ctx, |q| G::from_rational(ctx, q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_commutator() {
        let a = Matrix::<Rational>::from_i64_rows((), &[&[0, 1], &[0, 0]]);
        let b = Matrix::<Rational>::from_i64_rows((), &[&[0, 0], &[1, 0]]);
        let c = a.commutator(&b);
        assert_eq!(c, Matrix::from_i64_rows((), &[&[1, 0], &[0, -1]]));
        assert_eq!(a.mul(&a), Matrix::zeros((), 2, 2));
    }

    #[test]
    fn stacking_and_selection() {
        let a = Matrix::<Rational>::from_i64_rows((), &[&[1, 2], &[3, 4]]);
        let s = a.hstack(&a).vstack(&a.hstack(&a));
        assert_eq!(s.rows(), 4);
        assert_eq!(s.select_columns(&[3]).column(0), a.column(1).iter().chain(a.column(1).iter()).cloned().collect::<Vec<_>>());
        assert_eq!(a.transpose()[(0, 1)], Rational::from(3));
    }
}
