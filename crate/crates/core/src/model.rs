//! The symplectic space attached to a doubled diagram.
//!
//! Basis vectors are grouped by box in model order, `r_i` vectors per box of
//! row `i`. The form pairs vector `k` of box `m(a)` with vector `k` of box
//! `a`: `J[u][m(u)] = eps(u)`, so `sigma(e_{m(a)}, e_a) = 1` for `a` with
//! positive column.
//!
//! Endomorphisms are stored densely; blocks are read and written through
//! the model. The standard basis `(e_1..e_m, f_1..f_m)` with
//! `sigma(e_i, f_j) = delta_ij` is related to the model basis by
//! [`SymplecticModel::std_permutation`]: the mirror-side vectors, in model
//! order, become `e_1..e_m` and their partners become `f_1..f_m`.

use std::collections::BTreeMap;

use crate::diagram::{Cell, DoubleDiagram, ReducedDiagram};
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::Matrix;
use crate::scalar::{Field, Rational};

/// One free coordinate of a graded piece of `sp(V)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub b: Cell,
    pub a: Cell,
    pub i: usize,
    pub j: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticModel {
    diagram: DoubleDiagram,
    /// model basis index -> standard basis index
    to_std: Vec<usize>,
    /// model basis index -> (box, index inside the block)
    owner: Vec<(Cell, usize)>,
    slots: BTreeMap<i32, Vec<Slot>>,
}

/// Result of the two-way membership test.
#[derive(Clone, Debug, PartialEq)]
pub struct SpCheck {
    pub member: bool,
    pub dense_member: bool,
    pub violation: Option<(Cell, Cell)>,
}

impl SymplecticModel {
    pub fn new(diagram: DoubleDiagram) -> Self {
        let mut owner = Vec::with_capacity(diagram.dim());
        for &b in diagram.boxes() {
            for k in 0..diagram.block_size(b) {
                owner.push((b, k));
            }
        }
        let m = diagram.half_dim();
        let mut to_std = vec![0; diagram.dim()];
        let mut next = 0;
        for &b in diagram.boxes() {
            if b.is_mirror() {
                for k in 0..diagram.block_size(b) {
                    to_std[diagram.offset(b) + k] = next;
                    to_std[diagram.offset(diagram.m(b)) + k] = m + next;
                    next += 1;
                }
            }
        }
        let mut slots: BTreeMap<i32, Vec<Slot>> = BTreeMap::new();
        let boxes = diagram.boxes();
        for &b in boxes {
            for &a in boxes {
                let (pb, pa) = (diagram.position(b), diagram.position(a));
                let (qb, qa) = (diagram.position(diagram.m(a)), diagram.position(diagram.m(b)));
                if (pb, pa) > (qb, qa) {
                    continue;
                }
                let k = diagram.deg(b) - diagram.deg(a);
                let entry = slots.entry(k).or_default();
                let (rb, ra) = (diagram.block_size(b), diagram.block_size(a));
                for i in 0..rb {
                    for j in 0..ra {
                        if (pb, pa) == (qb, qa) && j < i {
                            continue;
                        }
                        entry.push(Slot { b, a, i, j });
                    }
                }
            }
        }
        SymplecticModel { diagram, to_std, owner, slots }
    }

    pub fn from_reduced(d: &ReducedDiagram) -> Self {
        Self::new(DoubleDiagram::new(d))
    }

    pub fn diagram(&self) -> &DoubleDiagram {
        &self.diagram
    }

    pub fn dim(&self) -> usize {
        self.diagram.dim()
    }

    pub fn half_dim(&self) -> usize {
        self.diagram.half_dim()
    }

    pub fn owner(&self, u: usize) -> (Cell, usize) {
        self.owner[u]
    }

    /// The form matrix in model order.
    pub fn form<F: Field>(&self, ctx: F::Ctx) -> Matrix<F> {
        let d = &self.diagram;
        let mut j = Matrix::zeros(ctx, self.dim(), self.dim());
        for &b in d.boxes() {
            let (ob, om) = (d.offset(b), d.offset(d.m(b)));
            for k in 0..d.block_size(b) {
                j[(ob + k, om + k)] = F::from_i64(ctx, d.eps(b));
            }
        }
        j
    }

    /// `[[0, I], [-I, 0]]`.
    pub fn std_form<F: Field>(ctx: F::Ctx, m: usize) -> Matrix<F> {
        let mut j = Matrix::zeros(ctx, 2 * m, 2 * m);
        for i in 0..m {
            j[(i, m + i)] = F::one(ctx);
            j[(m + i, i)] = F::from_i64(ctx, -1);
        }
        j
    }

    /// Model index -> standard index.
    pub fn std_index(&self, u: usize) -> usize {
        self.to_std[u]
    }

    /// Permutation `P` with `P e_u(model) = e_{std_index(u)}`; satisfies
    /// `P^T J_std P = J_model`.
    pub fn std_permutation<F: Field>(&self, ctx: F::Ctx) -> Matrix<F> {
        let mut p = Matrix::zeros(ctx, self.dim(), self.dim());
        for (u, &s) in self.to_std.iter().enumerate() {
            p[(s, u)] = F::one(ctx);
        }
        p
    }

    /// Model indices of the reference Lagrangian subspace (mirror boxes).
    pub fn mirror_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&u| self.owner[u].0.is_mirror()).collect()
    }

    /// Model indices spanning the degree-`j` part `V_j`.
    pub fn degree_indices(&self, j: i32) -> Vec<usize> {
        (0..self.dim()).filter(|&u| self.diagram.deg(self.owner[u].0) == j).collect()
    }

    pub fn block<F: Field>(&self, x: &Matrix<F>, b: Cell, a: Cell) -> Matrix<F> {
        let d = &self.diagram;
        x.submatrix(d.offset(b), d.offset(a), d.block_size(b), d.block_size(a))
    }

    pub fn set_block<F: Field>(&self, x: &mut Matrix<F>, b: Cell, a: Cell, blk: &Matrix<F>) {
        let d = &self.diagram;
        assert_eq!((blk.rows(), blk.cols()), (d.block_size(b), d.block_size(a)), "block shape");
        x.set_submatrix(d.offset(b), d.offset(a), blk);
    }

    /// Writes block `(b, a)` and the block forced on `(m(a), m(b))` by
    /// membership in `sp(V)`.
    pub fn set_block_sp<F: Field>(&self, x: &mut Matrix<F>, b: Cell, a: Cell, blk: &Matrix<F>) {
        let d = &self.diagram;
        self.set_block(x, b, a, blk);
        let s = -d.eps(a) * d.eps(b);
        let partner = blk.transpose().scale(&F::from_i64(blk.ctx(), s));
        self.set_block(x, d.m(a), d.m(b), &partner);
    }

    /// Membership in `sp(V)`: blockwise by the mirror coupling, and densely
    /// by symmetry of `J X`. Both must agree.
    pub fn sp_check<F: Field>(&self, x: &Matrix<F>, tol: f64) -> Result<SpCheck> {
        if x.rows() != self.dim() || x.cols() != self.dim() {
            return Err(Error::ShapeMismatch(format!("{}x{} endomorphism on a {}-dim model", x.rows(), x.cols(), self.dim())));
        }
        let d = &self.diagram;
        let small = |m: &Matrix<F>| if F::EXACT { m.is_zero() } else { m.max_abs() <= tol };
        let mut violation = None;
        'outer: for &b in d.boxes() {
            for &a in d.boxes() {
                let s = F::from_i64(x.ctx(), -d.eps(a) * d.eps(b));
                let lhs = self.block(x, b, a);
                let rhs = self.block(x, d.m(a), d.m(b)).transpose().scale(&s);
                if !small(&lhs.sub(&rhs)) {
                    violation = Some((b, a));
                    break 'outer;
                }
            }
        }
        let jx = self.form::<F>(x.ctx()).mul(x);
        let dense_member = small(&jx.sub(&jx.transpose()));
        Ok(SpCheck { member: violation.is_none(), dense_member, violation })
    }

    pub fn is_sp<F: Field>(&self, x: &Matrix<F>, tol: f64) -> bool {
        self.sp_check(x, tol).map(|c| c.member && c.dense_member).unwrap_or(false)
    }

    /// Degree of the block containing entry `(u, v)`.
    pub fn entry_degree(&self, u: usize, v: usize) -> i32 {
        self.diagram.deg(self.owner[u].0) - self.diagram.deg(self.owner[v].0)
    }

    /// Degree-`k` component: blocks with `deg(b) - deg(a) = k`.
    pub fn degree_component<F: Field>(&self, x: &Matrix<F>, k: i32) -> Matrix<F> {
        Matrix::from_fn(x.ctx(), x.rows(), x.cols(), |u, v| if self.entry_degree(u, v) == k { x[(u, v)].clone() } else { F::zero(x.ctx()) })
    }

    /// Nonzero graded components.
    pub fn degree_split<F: Field>(&self, x: &Matrix<F>) -> BTreeMap<i32, Matrix<F>> {
        let mut out = BTreeMap::new();
        let top = self.diagram.max_degree();
        for k in -top..=top {
            let c = self.degree_component(x, k);
            if !c.is_zero() {
                out.insert(k, c);
            }
        }
        out
    }

    /// Part of degree `>= k`.
    pub fn degree_at_least<F: Field>(&self, x: &Matrix<F>, k: i32) -> Matrix<F> {
        Matrix::from_fn(x.ctx(), x.rows(), x.cols(), |u, v| if self.entry_degree(u, v) >= k { x[(u, v)].clone() } else { F::zero(x.ctx()) })
    }

    /// The normal form `delta(E_a) = eps(a) E_{r(a)}`.
    pub fn delta<F: Field>(&self, ctx: F::Ctx) -> Matrix<F> {
        let d = &self.diagram;
        let mut x = Matrix::zeros(ctx, self.dim(), self.dim());
        for &a in d.boxes() {
            if let Some(ra) = d.r(a) {
                let (or, oa) = (d.offset(ra), d.offset(a));
                for k in 0..d.block_size(a) {
                    x[(or + k, oa + k)] = F::from_i64(ctx, d.eps(a));
                }
            }
        }
        x
    }

    /// Free coordinates of `g_k`.
    pub fn slots(&self, k: i32) -> &[Slot] {
        self.slots.get(&k).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn g_dim(&self, k: i32) -> usize {
        self.slots(k).len()
    }

    pub fn degrees(&self) -> impl Iterator<Item = i32> + '_ {
        self.slots.keys().copied()
    }

    /// Element of `g_k` with the given coordinates.
    pub fn from_coords<F: Field>(&self, ctx: F::Ctx, k: i32, coords: &[F]) -> Matrix<F> {
        let d = &self.diagram;
        let slots = self.slots(k);
        assert_eq!(slots.len(), coords.len(), "coordinate count for degree {k}");
        let mut x = Matrix::zeros(ctx, self.dim(), self.dim());
        for (s, v) in slots.iter().zip(coords) {
            let (ob, oa) = (d.offset(s.b), d.offset(s.a));
            x[(ob + s.i, oa + s.j)] = v.clone();
            let (pb, pa) = (d.m(s.a), d.m(s.b));
            let sign = -d.eps(s.a) * d.eps(s.b);
            x[(d.offset(pb) + s.j, d.offset(pa) + s.i)] = v.scale_i64(sign);
        }
        x
    }

    /// Coordinates of the degree-`k` component of `x`.
    pub fn to_coords<F: Field>(&self, x: &Matrix<F>, k: i32) -> Vec<F> {
        let d = &self.diagram;
        self.slots(k).iter().map(|s| x[(d.offset(s.b) + s.i, d.offset(s.a) + s.j)].clone()).collect()
    }

    /// `{v : sigma(v, s) = 0 for all columns s}`.
    pub fn skew_complement<F: Field>(&self, s: &Matrix<F>, tol: f64) -> Result<Matrix<F>> {
        skew_complement_with(&self.form(s.ctx()), s, tol)
    }

    /// Sign of `sigma(delta x, x)` on `V_0`: `-1` with the printed conventions.
    pub fn convention_sign(&self) -> i64 {
        let j = self.form::<Rational>(());
        let dl = self.delta::<Rational>(());
        let q = dl.transpose().mul(&j);
        let idx = self.degree_indices(0);
        let v = &q[(idx[0], idx[0])];
        if v.cmp0() == std::cmp::Ordering::Less {
            -1
        } else {
            1
        }
    }

    /// The form `sigma(delta x, y)` restricted to `V_0`, in model order.
    pub fn degree_zero_form(&self) -> Matrix<Rational> {
        let j = self.form::<Rational>(());
        let q = self.delta::<Rational>(()).transpose().mul(&j);
        let idx = self.degree_indices(0);
        q.select_rows(&idx).select_columns(&idx)
    }
}

pub fn darboux_model(d: &DoubleDiagram) -> SymplecticModel {
    SymplecticModel::new(d.clone())
}

/// Skew-orthogonal complement for an arbitrary form matrix.
pub fn skew_complement_with<F: Field>(form: &Matrix<F>, s: &Matrix<F>, tol: f64) -> Result<Matrix<F>> {
    if s.cols() > 0 && linalg::rank(s, tol) < s.cols() {
        return Err(Error::RankDeficientInput);
    }
    if s.cols() == 0 {
        return Ok(Matrix::identity(form.ctx(), form.rows()));
    }
    Ok(linalg::kernel(&s.transpose().mul(form), tol))
}
