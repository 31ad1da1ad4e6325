//! Truncated Taylor series in one variable.
//!
//! A jet of order `K` at `t0` stores `c[k] = f^(k)(t0)/k!` for `k = 0..=K`.
//! Strict operations (`add`, `mul`, ...) require equal orders, base points
//! and backends; the `*_t` variants truncate to the smaller order instead
//! and are what the analytic pipeline uses.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{Field, Rational, RealField};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet<F: Field> {
    t0: F,
    coeffs: Vec<F>,
}

fn compat<F: Field>(t0a: &F, ka: usize, t0b: &F, kb: usize, strict_order: bool) -> Result<()> {
    if t0a.ctx() != t0b.ctx() {
        return Err(Error::BackendMismatch(format!("{:?} vs {:?}", t0a.ctx(), t0b.ctx())));
    }
    if t0a != t0b {
        return Err(Error::OrderMismatch(format!("base points {t0a} and {t0b}")));
    }
    if strict_order && ka != kb {
        return Err(Error::OrderMismatch(format!("orders {ka} and {kb}")));
    }
    Ok(())
}

impl<F: Field> Jet<F> {
    pub fn new(t0: F, coeffs: Vec<F>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least one coefficient");
        Jet { t0, coeffs }
    }

    pub fn constant(t0: F, c: F, order: usize) -> Self {
        let ctx = t0.ctx();
        let mut coeffs = vec![F::zero(ctx); order + 1];
        coeffs[0] = c;
        Jet { t0, coeffs }
    }

    pub fn zero(t0: F, order: usize) -> Self {
        let z = F::zero(t0.ctx());
        Self::constant(t0, z, order)
    }

    /// The jet of `t - t0`.
    pub fn variable(t0: F, order: usize) -> Self {
        let mut j = Self::zero(t0, order);
        if order >= 1 {
            j.coeffs[1] = F::one(j.t0.ctx());
        }
        j
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn base_point(&self) -> &F {
        &self.t0
    }

    pub fn coeffs(&self) -> &[F] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> &F {
        &self.coeffs[k]
    }

    pub fn ctx(&self) -> F::Ctx {
        self.t0.ctx()
    }

    pub fn truncate(&self, k: usize) -> Self {
        assert!(k <= self.order());
        Jet { t0: self.t0.clone(), coeffs: self.coeffs[..=k].to_vec() }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        compat(&self.t0, self.order(), &o.t0, o.order(), true)?;
        Ok(self.add_t(o))
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        compat(&self.t0, self.order(), &o.t0, o.order(), true)?;
        Ok(self.sub_t(o))
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        compat(&self.t0, self.order(), &o.t0, o.order(), true)?;
        Ok(self.mul_t(o))
    }

    pub fn add_t(&self, o: &Self) -> Self {
        let k = self.order().min(o.order());
        let coeffs = (0..=k).map(|i| self.coeffs[i].add(&o.coeffs[i])).collect();
        Jet { t0: self.t0.clone(), coeffs }
    }

    pub fn sub_t(&self, o: &Self) -> Self {
        let k = self.order().min(o.order());
        let coeffs = (0..=k).map(|i| self.coeffs[i].sub(&o.coeffs[i])).collect();
        Jet { t0: self.t0.clone(), coeffs }
    }

    pub fn mul_t(&self, o: &Self) -> Self {
        let k = self.order().min(o.order());
        let ctx = self.ctx();
        let coeffs = (0..=k)
            .map(|n| {
                let mut acc = F::zero(ctx);
                for i in 0..=n {
                    acc.add_mul(&self.coeffs[i], &o.coeffs[n - i]);
                }
                acc
            })
            .collect();
        Jet { t0: self.t0.clone(), coeffs }
    }

    pub fn scale(&self, s: &F) -> Self {
        Jet { t0: self.t0.clone(), coeffs: self.coeffs.iter().map(|c| c.mul(s)).collect() }
    }

    pub fn neg(&self) -> Self {
        Jet { t0: self.t0.clone(), coeffs: self.coeffs.iter().map(|c| c.neg()).collect() }
    }

    /// Multiplicative inverse; the constant term must be nonzero (exactly,
    /// or above `tol` in magnitude on a float backend).
    pub fn inv(&self, tol: f64) -> Result<Self> {
        let c0 = &self.coeffs[0];
        if c0.is_zero() || (!F::EXACT && c0.magnitude() <= tol) {
            return Err(Error::NonInvertibleJet);
        }
        let r0 = c0.recip().ok_or(Error::NonInvertibleJet)?;
        let k = self.order();
        let mut out: Vec<F> = Vec::with_capacity(k + 1);
        out.push(r0.clone());
        for n in 1..=k {
            let mut acc = F::zero(self.ctx());
            for i in 1..=n {
                acc.add_mul(&self.coeffs[i], &out[n - i]);
            }
            out.push(acc.mul(&r0).neg());
        }
        Ok(Jet { t0: self.t0.clone(), coeffs: out })
    }

    /// Derivative; lowers the order by one.
    pub fn derivative(&self) -> Result<Self> {
        let k = self.order();
        if k == 0 {
            return Err(Error::OrderMismatch("cannot differentiate a jet of order 0".into()));
        }
        let coeffs = (1..=k).map(|i| self.coeffs[i].scale_i64(i as i64)).collect();
        Ok(Jet { t0: self.t0.clone(), coeffs })
    }

    /// Antiderivative with the given constant term; raises the order by one.
    pub fn integrate(&self, c: F) -> Self {
        let mut coeffs = vec![c];
        for (i, x) in self.coeffs.iter().enumerate() {
            coeffs.push(x.div_i64(i as i64 + 1));
        }
        Jet { t0: self.t0.clone(), coeffs }
    }

    /// Evaluates the truncated polynomial at `t`.
    pub fn eval(&self, t: &F) -> F {
        let h = t.sub(&self.t0);
        let mut acc = F::zero(self.ctx());
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(&h).add(c);
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.magnitude()).fold(0.0, f64::max)
    }

    /// Re-expands the polynomial at a new base point (exact for polynomials).
    pub fn recenter(&self, t1: &F) -> Self {
        let h = t1.sub(&self.t0);
        let k = self.order();
        let ctx = self.ctx();
        let mut out = self.coeffs.clone();
        // repeated synthetic division
        for j in 0..k {
            for i in (j..k).rev() {
                let t = out[i + 1].mul(&h);
                out[i] = out[i].add(&t);
            }
        }
        let _ = ctx;
        Jet { t0: t1.clone(), coeffs: out }
    }
}

impl<F: RealField> Jet<F> {
    /// Square root of a jet with positive constant term.
    pub fn sqrt(&self) -> Result<Self> {
        let c0 = &self.coeffs[0];
        if c0.is_negative() || c0.is_zero() {
            return Err(Error::NonInvertibleJet);
        }
        let s0 = c0.sqrt();
        let inv2 = F::from_i64(self.ctx(), 2).mul(&s0).recip().unwrap();
        let mut s = vec![s0];
        for n in 1..=self.order() {
            let mut acc = self.coeffs[n].clone();
            for i in 1..n {
                acc.sub_mul(&s[i], &s[n - i]);
            }
            s.push(acc.mul(&inv2));
        }
        Ok(Jet { t0: self.t0.clone(), coeffs: s })
    }
}

/// Applies `jet_field_ops` in one call, mirroring the public contract.
pub fn jet_field_op<F: Field>(kind: &str, a: &Jet<F>, b: Option<&Jet<F>>, tol: f64) -> Result<Jet<F>> {
    match (kind, b) {
        ("add", Some(b)) => a.add(b),
        ("mul", Some(b)) => a.mul(b),
        ("invert", None) => a.inv(tol),
        ("differentiate", None) => a.derivative(),
        _ => Err(Error::BadFormat(format!("unknown jet operation {kind}"))),
    }
}

/// Matrix-valued jet stored as one matrix per Taylor coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixJet<F: Field> {
    t0: F,
    rows: usize,
    cols: usize,
    coeffs: Vec<Matrix<F>>,
}

impl<F: Field> MatrixJet<F> {
    pub fn from_coeffs(t0: F, coeffs: Vec<Matrix<F>>) -> Self {
        assert!(!coeffs.is_empty());
        let (rows, cols) = (coeffs[0].rows(), coeffs[0].cols());
        assert!(coeffs.iter().all(|m| m.rows() == rows && m.cols() == cols), "ragged matrix jet");
        MatrixJet { t0, rows, cols, coeffs }
    }

    pub fn zeros(t0: F, rows: usize, cols: usize, order: usize) -> Self {
        let ctx = t0.ctx();
        MatrixJet { t0, rows, cols, coeffs: vec![Matrix::zeros(ctx, rows, cols); order + 1] }
    }

    pub fn constant(t0: F, m: Matrix<F>, order: usize) -> Self {
        let ctx = t0.ctx();
        let (rows, cols) = (m.rows(), m.cols());
        let mut coeffs = vec![Matrix::zeros(ctx, rows, cols); order + 1];
        coeffs[0] = m;
        MatrixJet { t0, rows, cols, coeffs }
    }

    pub fn identity(t0: F, n: usize, order: usize) -> Self {
        let ctx = t0.ctx();
        Self::constant(t0, Matrix::identity(ctx, n), order)
    }

    /// Builds from a grid of scalar jets (all of the same order).
    pub fn from_entries(t0: F, rows: usize, cols: usize, entry: impl Fn(usize, usize) -> Jet<F>) -> Self {
        let ctx = t0.ctx();
        let grid: Vec<Vec<Jet<F>>> = (0..rows).map(|i| (0..cols).map(|j| entry(i, j)).collect()).collect();
        let order = grid.iter().flatten().map(|j| j.order()).min().unwrap_or(0);
        let coeffs = (0..=order).map(|k| Matrix::from_fn(ctx, rows, cols, |i, j| grid[i][j].coeff(k).clone())).collect();
        MatrixJet { t0, rows, cols, coeffs }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn base_point(&self) -> &F {
        &self.t0
    }

    pub fn ctx(&self) -> F::Ctx {
        self.t0.ctx()
    }

    pub fn coeff(&self, k: usize) -> &Matrix<F> {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[Matrix<F>] {
        &self.coeffs
    }

    pub fn coeff_mut(&mut self, k: usize) -> &mut Matrix<F> {
        &mut self.coeffs[k]
    }

    /// Value at the base point.
    pub fn value(&self) -> &Matrix<F> {
        &self.coeffs[0]
    }

    pub fn entry(&self, i: usize, j: usize) -> Jet<F> {
        Jet::new(self.t0.clone(), self.coeffs.iter().map(|m| m[(i, j)].clone()).collect())
    }

    pub fn set_entry(&mut self, i: usize, j: usize, x: &Jet<F>) {
        for (k, m) in self.coeffs.iter_mut().enumerate() {
            m[(i, j)] = if k <= x.order() { x.coeff(k).clone() } else { F::zero(self.t0.ctx()) };
        }
    }

    pub fn truncate(&self, k: usize) -> Self {
        assert!(k <= self.order(), "truncate above order");
        MatrixJet { t0: self.t0.clone(), rows: self.rows, cols: self.cols, coeffs: self.coeffs[..=k].to_vec() }
    }

    fn check(&self, o: &Self, strict: bool) -> Result<()> {
        compat(&self.t0, self.order(), &o.t0, o.order(), strict)
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check(o, true)?;
        self.shape_eq(o)?;
        Ok(self.add_t(o))
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.check(o, true)?;
        self.shape_eq(o)?;
        Ok(self.sub_t(o))
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        self.check(o, true)?;
        if self.cols != o.rows {
            return Err(Error::ShapeMismatch(format!("{}x{} * {}x{}", self.rows, self.cols, o.rows, o.cols)));
        }
        Ok(self.mul_t(o))
    }

    fn shape_eq(&self, o: &Self) -> Result<()> {
        if (self.rows, self.cols) != (o.rows, o.cols) {
            return Err(Error::ShapeMismatch(format!("{}x{} vs {}x{}", self.rows, self.cols, o.rows, o.cols)));
        }
        Ok(())
    }

    pub fn add_t(&self, o: &Self) -> Self {
        let k = self.order().min(o.order());
        let coeffs = (0..=k).map(|i| self.coeffs[i].add(&o.coeffs[i])).collect();
        MatrixJet { t0: self.t0.clone(), rows: self.rows, cols: self.cols, coeffs }
    }

    pub fn sub_t(&self, o: &Self) -> Self {
        let k = self.order().min(o.order());
        let coeffs = (0..=k).map(|i| self.coeffs[i].sub(&o.coeffs[i])).collect();
        MatrixJet { t0: self.t0.clone(), rows: self.rows, cols: self.cols, coeffs }
    }

    pub fn mul_t(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "matrix jet product shape");
        let k = self.order().min(o.order());
        let ctx = self.ctx();
        let coeffs = (0..=k)
            .map(|n| {
                let mut acc = Matrix::zeros(ctx, self.rows, o.cols);
                for i in 0..=n {
                    acc.add_product(&self.coeffs[i], &o.coeffs[n - i]);
                }
                acc
            })
            .collect();
        MatrixJet { t0: self.t0.clone(), rows: self.rows, cols: o.cols, coeffs }
    }

    /// `self * o - o * self`, truncated to the smaller order.
    pub fn commutator_t(&self, o: &Self) -> Self {
        self.mul_t(o).sub_t(&o.mul_t(self))
    }

    pub fn lmul_const(&self, a: &Matrix<F>) -> Self {
        let coeffs: Vec<Matrix<F>> = self.coeffs.iter().map(|m| a.mul(m)).collect();
        MatrixJet { t0: self.t0.clone(), rows: a.rows(), cols: self.cols, coeffs }
    }

    pub fn rmul_const(&self, a: &Matrix<F>) -> Self {
        let coeffs: Vec<Matrix<F>> = self.coeffs.iter().map(|m| m.mul(a)).collect();
        MatrixJet { t0: self.t0.clone(), rows: self.rows, cols: a.cols(), coeffs }
    }

    pub fn scale(&self, s: &F) -> Self {
        self.map(|m| m.scale(s))
    }

    pub fn scale_jet(&self, s: &Jet<F>) -> Self {
        let k = self.order().min(s.order());
        let ctx = self.ctx();
        let coeffs = (0..=k)
            .map(|n| {
                let mut acc = Matrix::zeros(ctx, self.rows, self.cols);
                for i in 0..=n {
                    acc.add_assign(&self.coeffs[n - i].scale(s.coeff(i)));
                }
                acc
            })
            .collect();
        MatrixJet { t0: self.t0.clone(), rows: self.rows, cols: self.cols, coeffs }
    }

    pub fn neg(&self) -> Self {
        self.map(|m| m.neg())
    }

    pub fn transpose(&self) -> Self {
        let coeffs: Vec<Matrix<F>> = self.coeffs.iter().map(|m| m.transpose()).collect();
        MatrixJet { t0: self.t0.clone(), rows: self.cols, cols: self.rows, coeffs }
    }

    /// Applies a coefficientwise linear map.
    pub fn map(&self, f: impl Fn(&Matrix<F>) -> Matrix<F>) -> Self {
        let coeffs: Vec<Matrix<F>> = self.coeffs.iter().map(f).collect();
        let (rows, cols) = (coeffs[0].rows(), coeffs[0].cols());
        MatrixJet { t0: self.t0.clone(), rows, cols, coeffs }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        self.map(|m| m.select_columns(idx))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        self.map(|m| m.select_rows(idx))
    }

    pub fn hstack(&self, o: &Self) -> Self {
        let k = self.order().min(o.order());
        let coeffs = (0..=k).map(|i| self.coeffs[i].hstack(&o.coeffs[i])).collect();
        MatrixJet { t0: self.t0.clone(), rows: self.rows, cols: self.cols + o.cols, coeffs }
    }

    pub fn vstack(&self, o: &Self) -> Self {
        let k = self.order().min(o.order());
        let coeffs = (0..=k).map(|i| self.coeffs[i].vstack(&o.coeffs[i])).collect();
        MatrixJet { t0: self.t0.clone(), rows: self.rows + o.rows, cols: self.cols, coeffs }
    }

    pub fn derivative(&self) -> Result<Self> {
        let k = self.order();
        if k == 0 {
            return Err(Error::OrderMismatch("cannot differentiate a jet of order 0".into()));
        }
        let ctx = self.ctx();
        let coeffs = (1..=k).map(|i| self.coeffs[i].scale(&F::from_i64(ctx, i as i64))).collect();
        Ok(MatrixJet { t0: self.t0.clone(), rows: self.rows, cols: self.cols, coeffs })
    }

    /// `j`-th derivative, or `None` if the order is too small.
    pub fn nth_derivative(&self, j: usize) -> Option<Self> {
        let mut d = self.clone();
        for _ in 0..j {
            d = d.derivative().ok()?;
        }
        Some(d)
    }

    /// Antiderivative with the given value at `t0`.
    pub fn integrate(&self, c: Matrix<F>) -> Self {
        let mut coeffs = vec![c];
        for (i, m) in self.coeffs.iter().enumerate() {
            coeffs.push(m.map(|x| x.div_i64(i as i64 + 1)));
        }
        MatrixJet { t0: self.t0.clone(), rows: self.rows, cols: self.cols, coeffs }
    }

    /// Matrix inverse as a jet; the constant term must be invertible.
    pub fn inverse(&self, tol: f64) -> Result<Self> {
        if !self.coeffs[0].is_square() {
            return Err(Error::ShapeMismatch("inverse of a non-square matrix jet".into()));
        }
        let a0inv = crate::linalg::inverse(&self.coeffs[0], tol.max(F::unit_roundoff(self.ctx()) * 16.0)).ok_or(Error::NonInvertibleJet)?;
        let ctx = self.ctx();
        let n = self.rows;
        let mut out = vec![a0inv.clone()];
        for k in 1..=self.order() {
            let mut acc = Matrix::zeros(ctx, n, n);
            for j in 1..=k {
                acc.add_product(&self.coeffs[j], &out[k - j]);
            }
            out.push(a0inv.mul(&acc).neg());
        }
        Ok(MatrixJet { t0: self.t0.clone(), rows: n, cols: n, coeffs: out })
    }

    /// `sum_{i<bound} x^i / i!`; requires `x(t0)^bound = 0`.
    pub fn exp_nilpotent(&self, bound: usize) -> Result<Self> {
        let n = self.rows;
        let tol = if F::EXACT { 0.0 } else { F::unit_roundoff(self.ctx()).sqrt() * (1.0 + self.coeffs[0].max_abs()).powi(bound as i32) };
        let mut p = Matrix::identity(self.ctx(), n);
        for _ in 0..bound {
            p = p.mul(&self.coeffs[0]);
        }
        if (F::EXACT && !p.is_zero()) || (!F::EXACT && p.max_abs() > tol) {
            return Err(Error::NilpotencyViolated);
        }
        let mut sum = MatrixJet::identity(self.t0.clone(), n, self.order());
        let mut term = sum.clone();
        for i in 1..bound {
            term = term.mul_t(self).map(|m| m.map(|x| x.div_i64(i as i64)));
            sum = sum.add_t(&term);
        }
        Ok(sum)
    }

    pub fn eval(&self, t: &F) -> Matrix<F> {
        let h = t.sub(&self.t0);
        let mut acc = Matrix::zeros(self.ctx(), self.rows, self.cols);
        for c in self.coeffs.iter().rev() {
            acc = acc.scale(&h).add(c);
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|m| m.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|m| m.is_zero())
    }

    /// Re-expands every entry at a new base point.
    pub fn recenter(&self, t1: &F) -> Self {
        let grid: Vec<Vec<Jet<F>>> = (0..self.rows).map(|i| (0..self.cols).map(|j| self.entry(i, j).recenter(t1)).collect()).collect();
        MatrixJet::from_entries(t1.clone(), self.rows, self.cols, |i, j| grid[i][j].clone())
    }

    /// Converts coefficients into another field.
    pub fn convert<G: Field>(&self, t0: G, f: impl Fn(&F) -> G) -> MatrixJet<G> {
        let ctx = t0.ctx();
        let coeffs = self.coeffs.iter().map(|m| m.convert(ctx, &f)).collect();
        MatrixJet { t0, rows: self.rows, cols: self.cols, coeffs }
    }
}

impl MatrixJet<Rational> {
    pub fn to_field<G: Field>(&self, ctx: G::Ctx) -> MatrixJet<G> {
        let t0 = G::from_rational(ctx, &self.t0);
        self.convert(t0, |q| G::from_rational(ctx, q))
    }
}

/// Solves `A' = rhs(A)`, `A(t0) = initial`, by coefficient recursion.
///
/// `rhs` must be linear and causal: coefficient `k` of `rhs(A)` may only
/// depend on coefficients `0..=k` of `A`, and `rhs(A)` must have order at
/// least that of `A`.
pub fn jet_ode_solve<F: Field>(rhs: impl Fn(&MatrixJet<F>) -> MatrixJet<F>, initial: Matrix<F>, t0: F, order: usize) -> MatrixJet<F> {
    let ctx = t0.ctx();
    let mut coeffs = vec![initial];
    for k in 0..order {
        let partial = MatrixJet::from_coeffs(t0.clone(), coeffs.clone());
        let r = rhs(&partial);
        assert!(r.order() >= k, "ode right-hand side lost order");
        let next = r.coeff(k).scale(&F::from_rational(ctx, &Rational::from((1, k as i64 + 1))));
        coeffs.push(next);
    }
    MatrixJet::from_coeffs(t0, coeffs)
}

/// Solves `A' = A C` with `A(t0) = initial` up to order `ord(C) + 1`.
pub fn solve_right<F: Field>(c: &MatrixJet<F>, initial: Matrix<F>) -> MatrixJet<F> {
    let ctx = c.ctx();
    let mut coeffs = vec![initial];
    for k in 0..=c.order() {
        let mut acc = Matrix::zeros(ctx, coeffs[0].rows(), c.cols());
        for i in 0..=k {
            acc.add_product(&coeffs[i], c.coeff(k - i));
        }
        coeffs.push(acc.map(|x| x.div_i64(k as i64 + 1)));
    }
    MatrixJet::from_coeffs(c.base_point().clone(), coeffs)
}

/// Solves `A' = B A` with `A(t0) = initial` up to order `ord(B) + 1`.
pub fn solve_left<F: Field>(b: &MatrixJet<F>, initial: Matrix<F>) -> MatrixJet<F> {
    let ctx = b.ctx();
    let mut coeffs = vec![initial];
    for k in 0..=b.order() {
        let mut acc = Matrix::zeros(ctx, b.rows(), coeffs[0].cols());
        for i in 0..=k {
            acc.add_product(b.coeff(k - i), &coeffs[i]);
        }
        coeffs.push(acc.map(|x| x.div_i64(k as i64 + 1)));
    }
    MatrixJet::from_coeffs(b.base_point().clone(), coeffs)
}
