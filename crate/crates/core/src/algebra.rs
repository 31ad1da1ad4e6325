//! Graded algebra of the flat curve: brackets with `delta`, prolongations,
//! the D-operator, coboundaries, and normalization spaces.
//!
//! Everything here runs over exact rationals. Elements of a graded piece
//! `g_k` are handled in the slot coordinates of [`SymplecticModel::slots`];
//! subspaces are matrices whose columns are coordinate vectors.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::diagram::Cell;
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::Matrix;
use crate::model::SymplecticModel;
use crate::scalar::{Field, Rational};

/// `(b, a)` box pair indexing a block.
pub type Pair = (Cell, Cell);

/// `[delta, X]` computed block by block:
/// `Y_ba = eps(l b) X_{l(b) a} - eps(a) X_{b r(a)}`.
pub fn bracket_blocks<F: Field>(model: &SymplecticModel, x: &Matrix<F>) -> Result<Matrix<F>> {
    if x.rows() != model.dim() || x.cols() != model.dim() {
        return Err(Error::ModelMismatch);
    }
    let d = model.diagram();
    let ctx = x.ctx();
    let mut y = Matrix::zeros(ctx, model.dim(), model.dim());
    for &b in d.boxes() {
        for &a in d.boxes() {
            let mut blk = Matrix::zeros(ctx, d.block_size(b), d.block_size(a));
            if let Some(lb) = d.l(b) {
                blk.add_assign(&model.block(x, lb, a).scale(&F::from_i64(ctx, d.eps(lb))));
            }
            if let Some(ra) = d.r(a) {
                blk.add_assign(&model.block(x, b, ra).scale(&F::from_i64(ctx, -d.eps(a))));
            }
            if !blk.is_zero() {
                model.set_block(&mut y, b, a, &blk);
            }
        }
    }
    Ok(y)
}

/// Matrix of `ad delta : g_k -> g_{k-1}` in slot coordinates.
pub fn ad_delta_map(model: &SymplecticModel, k: i32) -> Matrix<Rational> {
    let n = model.g_dim(k);
    let rows = model.g_dim(k - 1);
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![Rational::new(); n];
        e[i] = Rational::from(1);
        let x = model.from_coords((), k, &e);
        let y = bracket_blocks(model, &x).expect("same model");
        cols.push(model.to_coords(&y, k - 1));
    }
    if n == 0 {
        return Matrix::zeros((), rows, 0);
    }
    Matrix::from_columns((), rows, &cols)
}

/// Per-degree bases (columns in slot coordinates).
#[derive(Clone, Debug, PartialEq)]
pub struct GradedSubspace {
    pub bases: BTreeMap<i32, Matrix<Rational>>,
}

impl GradedSubspace {
    pub fn dim_at(&self, k: i32) -> usize {
        self.bases.get(&k).map_or(0, |m| m.cols())
    }

    pub fn dim(&self) -> usize {
        self.bases.values().map(|m| m.cols()).sum()
    }

    pub fn basis_at(&self, k: i32) -> Option<&Matrix<Rational>> {
        self.bases.get(&k)
    }

    /// Basis elements as dense endomorphisms.
    pub fn elements(&self, model: &SymplecticModel) -> Vec<Matrix<Rational>> {
        let mut out = Vec::new();
        for (&k, b) in &self.bases {
            for j in 0..b.cols() {
                out.push(model.from_coords((), k, &b.column(j)));
            }
        }
        out
    }

    /// Membership of a dense element (all of its graded components).
    pub fn contains(&self, model: &SymplecticModel, x: &Matrix<Rational>) -> bool {
        model.degree_split(x).iter().all(|(&k, c)| {
            let v = Matrix::from_columns((), model.g_dim(k), &[model.to_coords(c, k)]);
            match self.bases.get(&k) {
                Some(b) => linalg::in_column_space(b, &v, 0.0),
                None => false,
            }
        })
    }
}

/// Runs `U_k = {x in g_k : [delta, x] in U_{k-1}}` from degree `start` up.
fn recursion(model: &SymplecticModel, start: i32, seed: Matrix<Rational>) -> BTreeMap<i32, Matrix<Rational>> {
    let top = model.diagram().max_degree();
    let mut out = BTreeMap::new();
    let mut prev = seed;
    for k in start..=top {
        let a = ad_delta_map(model, k);
        let n = a.cols();
        if n == 0 {
            break;
        }
        let sol = if prev.cols() == 0 {
            linalg::kernel(&a, 0.0)
        } else {
            let joint = linalg::kernel(&a.hstack(&prev.neg()), 0.0);
            let top_part = joint.submatrix(0, 0, n, joint.cols());
            let idx = linalg::independent_columns(&top_part, 0.0);
            top_part.select_columns(&idx)
        };
        if sol.cols() == 0 {
            break;
        }
        out.insert(k, sol.clone());
        prev = sol;
    }
    out
}

/// The universal prolongation `u(delta)` by kernel recursion, checked
/// against the closed form (equal skew diagonal blocks along each row,
/// nothing in positive degree).
pub fn prolongation(model: &SymplecticModel) -> Result<GradedSubspace> {
    let u = GradedSubspace { bases: recursion(model, 0, Matrix::zeros((), model.g_dim(-1), 0)) };
    check_closed_form(model, &u)?;
    Ok(u)
}

pub fn prolongation_unchecked(model: &SymplecticModel) -> GradedSubspace {
    GradedSubspace { bases: recursion(model, 0, Matrix::zeros((), model.g_dim(-1), 0)) }
}

fn check_closed_form(model: &SymplecticModel, u: &GradedSubspace) -> Result<()> {
    let d = model.diagram();
    let expected: usize = d.reduced().rows().iter().map(|&(_, r)| r * (r - 1) / 2).sum();
    if u.dim_at(0) != expected {
        return Err(Error::ClosedFormMismatch(format!("dim u_0 = {}, expected {expected}", u.dim_at(0))));
    }
    if let Some((&k, _)) = u.bases.iter().find(|(&k, b)| k != 0 && b.cols() > 0) {
        return Err(Error::ClosedFormMismatch(format!("u_{k} is nonzero")));
    }
    for x in u.elements(model) {
        for &b in d.boxes() {
            for &a in d.boxes() {
                let blk = model.block(&x, b, a);
                if b != a && !blk.is_zero() {
                    return Err(Error::ClosedFormMismatch(format!("off-diagonal block ({b},{a}) in u_0")));
                }
            }
            let blk = model.block(&x, b, b);
            if !blk.add(&blk.transpose()).is_zero() {
                return Err(Error::ClosedFormMismatch(format!("block ({b},{b}) is not skew")));
            }
            if blk != model.block(&x, d.first_box(b.row), d.first_box(b.row)) {
                return Err(Error::ClosedFormMismatch(format!("diagonal blocks differ along row {}", b.row)));
            }
        }
    }
    Ok(())
}

/// Prolongation seeded with `span{delta}` in degree -1.
pub fn unparametrized_prolongation(model: &SymplecticModel) -> GradedSubspace {
    let dl = model.delta::<Rational>(());
    let seed = Matrix::from_columns((), model.g_dim(-1), &[model.to_coords(&dl, -1)]);
    let mut bases = recursion(model, 0, seed.clone());
    bases.insert(-1, seed);
    GradedSubspace { bases }
}

/// True iff every iterated bracket `(ad delta)^k y` has no negative-degree part.
pub fn flat_symmetry_check(model: &SymplecticModel, y: &Matrix<Rational>) -> Result<bool> {
    let mut cur = y.clone();
    let bound = 2 * model.diagram().p1() + 1;
    for _ in 0..=bound {
        if cur.is_zero() {
            return Ok(true);
        }
        if model.degree_split(&cur).keys().any(|&k| k < 0) {
            return Ok(false);
        }
        cur = bracket_blocks(model, &cur)?;
    }
    Ok(cur.is_zero())
}

/// `D(Y)_ba = sum_j (prod_{s=1..j} eps(l^s b)/eps(l^s a)) Y_{l^j b, l^j a}`.
pub fn d_operator<F: Field>(model: &SymplecticModel, y: &Matrix<F>, b: Cell, a: Cell) -> Result<Matrix<F>> {
    let d = model.diagram();
    d.check(b)?;
    d.check(a)?;
    let ctx = y.ctx();
    let mut acc = model.block(y, b, a);
    let (mut x, mut z) = (b, a);
    let mut coef: i64 = 1;
    while let (Some(lx), Some(lz)) = (d.l(x), d.l(z)) {
        coef *= d.eps(lx) * d.eps(lz);
        acc.add_assign(&model.block(y, lx, lz).scale(&F::from_i64(ctx, coef)));
        x = lx;
        z = lz;
    }
    Ok(acc)
}

/// Pairs `(b, rho)` entering the coboundary conditions (b = rho allowed).
pub fn coboundary_pairs(model: &SymplecticModel) -> Vec<Pair> {
    let d = model.diagram();
    let mut out = Vec::new();
    for i in 1..=d.num_rows() {
        let rho = d.last_box(i);
        for &b in d.boxes() {
            if b.row >= i {
                out.push((b, rho));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum CoboundaryCertificate {
    /// `[delta, x] = Y` with `x` in nonnegative degrees.
    Member { x: Matrix<Rational> },
    NonMember { b: Cell, rho: Cell, value: Matrix<Rational> },
}

impl CoboundaryCertificate {
    pub fn is_member(&self) -> bool {
        matches!(self, CoboundaryCertificate::Member { .. })
    }
}

/// Decides `Y in [delta, g^0]` and returns a preimage when it is.
pub fn coboundary_test(model: &SymplecticModel, y: &Matrix<Rational>) -> Result<CoboundaryCertificate> {
    let chk = model.sp_check(y, 0.0)?;
    if !chk.member {
        return Err(Error::NotInSp(format!("violating block {:?}", chk.violation)));
    }
    if model.degree_split(y).keys().any(|&k| k < 0) {
        return Err(Error::NotInSp("input has components of negative degree".into()));
    }
    for (b, rho) in coboundary_pairs(model) {
        let v = d_operator(model, y, b, rho)?;
        if !v.is_zero() {
            return Ok(CoboundaryCertificate::NonMember { b, rho, value: v });
        }
    }
    Ok(CoboundaryCertificate::Member { x: reconstruct_preimage(model, y)? })
}

fn reconstruct_preimage(model: &SymplecticModel, y: &Matrix<Rational>) -> Result<Matrix<Rational>> {
    let d = model.diagram();
    let mut fixed: HashMap<Pair, Matrix<Rational>> = HashMap::new();
    let mut order: Vec<Pair> = Vec::new();
    for &a in d.boxes() {
        let Some(ra) = d.r(a) else { continue };
        for &b in d.boxes() {
            if b.row >= a.row && b.x2() <= ra.x2() {
                let val = d_operator(model, y, b, a)?.scale(&Rational::from(-d.eps(a)));
                fixed.insert((b, ra), val);
                order.push((b, ra));
            }
        }
    }
    let mut x = Matrix::zeros((), model.dim(), model.dim());
    for &(b, a) in &order {
        let val = &fixed[&(b, a)];
        let partner = d.partner((b, a));
        let pval = val.transpose().scale(&Rational::from(-d.eps(a) * d.eps(b)));
        if let Some(other) = fixed.get(&partner) {
            if *other != pval {
                return Err(Error::InconsistentReconstruction(format!("blocks ({b},{a}) and ({},{}) disagree", partner.0, partner.1)));
            }
        }
        model.set_block(&mut x, b, a, val);
        model.set_block(&mut x, partner.0, partner.1, &pval);
    }
    if bracket_blocks(model, &x)? != *y {
        return Err(Error::InconsistentReconstruction("[delta, X] differs from Y".into()));
    }
    Ok(x)
}

/// One chosen pair per admissible `(b, rho)`; extra entries make a broken
/// assignment (used to exercise the audit).
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(Pair, Pair)>,
}

impl Assignment {
    pub fn phi0(model: &SymplecticModel) -> Result<Self> {
        let d = model.diagram();
        let pairs = d.admissible_pairs().into_iter().map(|(b, rho)| Ok(((b, rho), d.phi0(b, rho)?))).collect::<Result<_>>()?;
        Ok(Assignment { pairs })
    }

    /// Uniformly random element of each chain.
    pub fn random(model: &SymplecticModel, rng: &mut impl Rng) -> Self {
        let d = model.diagram();
        let pairs = d
            .admissible_pairs()
            .into_iter()
            .map(|(b, rho)| {
                let chain = d.pair_chain(b, rho).expect("admissible");
                ((b, rho), chain[rng.gen_range(0..chain.len())])
            })
            .collect();
        Assignment { pairs }
    }

    /// Checks that each chosen pair lies in its chain and each chain is used once.
    pub fn validate(&self, model: &SymplecticModel) -> Result<()> {
        let d = model.diagram();
        let mut seen = std::collections::HashSet::new();
        for &((b, rho), p) in &self.pairs {
            if !seen.insert((b, rho)) {
                return Err(Error::AssignmentAmbiguous { chain: format!("({b},{rho})"), count: 2 });
            }
            if !d.pair_chain(b, rho)?.contains(&p) {
                return Err(Error::AssignmentAmbiguous { chain: format!("({b},{rho})"), count: 0 });
            }
        }
        Ok(())
    }
}

/// Basis of the free blocks of one chosen pair, as dense endomorphisms.
fn free_block_basis(model: &SymplecticModel, (b, rho): Pair, (beta, alpha): Pair) -> Vec<Matrix<Rational>> {
    let d = model.diagram();
    let (rb, ra) = (d.block_size(beta), d.block_size(alpha));
    let mut out = Vec::new();
    let one = Rational::from(1);
    let mut push = |blk: Matrix<Rational>| {
        let mut x = Matrix::zeros((), model.dim(), model.dim());
        model.set_block_sp(&mut x, beta, alpha, &blk);
        out.push(x);
    };
    if b.row != rho.row {
        for i in 0..rb {
            for j in 0..ra {
                let mut blk = Matrix::zeros((), rb, ra);
                blk[(i, j)] = one.clone();
                push(blk);
            }
        }
    } else if d.left_index(b) % 2 == 1 {
        for i in 0..rb {
            for j in i..ra {
                let mut blk = Matrix::zeros((), rb, ra);
                blk[(i, j)] = one.clone();
                blk[(j, i)] = one.clone();
                push(blk);
            }
        }
    } else {
        for i in 0..rb {
            for j in i + 1..ra {
                let mut blk = Matrix::zeros((), rb, ra);
                blk[(i, j)] = one.clone();
                blk[(j, i)] = Rational::from(-1);
                push(blk);
            }
        }
    }
    out
}

/// Degree-`k` splitting data: `B_k = [ad delta(g_{k+1}) | u_k | N_k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    /// Slots of `g_{k+1}` whose images form the image block.
    pub image_slots: Vec<usize>,
    pub n_image: usize,
    pub n_u: usize,
    pub n_n: usize,
    /// Columns of `B_k`.
    pub basis: Matrix<Rational>,
    pub inverse: Matrix<Rational>,
}

/// Coefficients of a degree-`k` element in `B_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Split<F: Field> {
    /// `x` in `g_{k+1}` coordinates with `[delta, x]` equal to the image part.
    pub x_next: Vec<F>,
    pub u_coeffs: Vec<F>,
    pub n_coeffs: Vec<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegreeAudit {
    pub degree: i32,
    pub g: usize,
    pub u: usize,
    pub image: usize,
    pub n: usize,
    pub sum_rank: usize,
    pub total_rank: usize,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplementarityReport {
    pub degrees: Vec<DegreeAudit>,
    pub ad_trials: usize,
    pub ad_failures: usize,
    pub passed: bool,
    pub first_failure: Option<i32>,
}

#[derive(Clone, Debug)]
pub struct NormalizationSpace {
    model: SymplecticModel,
    assignment: Assignment,
    u: GradedSubspace,
    n_bases: BTreeMap<i32, Matrix<Rational>>,
    /// free-block labels of the columns of each `N_k` basis
    n_labels: BTreeMap<i32, Vec<(Pair, usize)>>,
    projectors: BTreeMap<i32, Projector>,
}

impl NormalizationSpace {
    /// Builds `N` and fails with `NotComplementary` at the first bad degree.
    pub fn new(model: &SymplecticModel, assignment: Assignment) -> Result<Self> {
        assignment.validate(model)?;
        let ns = Self::unchecked(model, assignment)?;
        for k in 0..=model.diagram().max_degree() {
            if !ns.projectors.contains_key(&k) && model.g_dim(k) > 0 {
                let a = ns.audit_degree(k);
                return Err(Error::NotComplementary {
                    degree: k,
                    detail: format!("dim g_k = {}, rank(u + im) = {}, dim N = {}, rank of the sum = {}", a.g, a.sum_rank, a.n, a.total_rank),
                });
            }
        }
        Ok(ns)
    }

    pub fn phi0(model: &SymplecticModel) -> Result<Self> {
        Self::new(model, Assignment::phi0(model)?)
    }

    /// Builds whatever is buildable; degrees that fail have no projector.
    pub fn unchecked(model: &SymplecticModel, assignment: Assignment) -> Result<Self> {
        let u = prolongation(model)?;
        let mut cols: BTreeMap<i32, Vec<Vec<Rational>>> = BTreeMap::new();
        let mut labels: BTreeMap<i32, Vec<(Pair, usize)>> = BTreeMap::new();
        let d = model.diagram();
        for &((b, rho), p) in &assignment.pairs {
            let k = d.deg(b) - d.deg(rho);
            for (idx, x) in free_block_basis(model, (b, rho), p).into_iter().enumerate() {
                cols.entry(k).or_default().push(model.to_coords(&x, k));
                labels.entry(k).or_default().push(((b, rho), idx));
            }
        }
        let n_bases: BTreeMap<i32, Matrix<Rational>> = cols.into_iter().map(|(k, c)| (k, Matrix::from_columns((), model.g_dim(k), &c))).collect();
        let mut ns = NormalizationSpace { model: model.clone(), assignment, u, n_bases, n_labels: labels, projectors: BTreeMap::new() };
        for k in 0..=d.max_degree() {
            if let Some(p) = ns.build_projector(k) {
                ns.projectors.insert(k, p);
            }
        }
        Ok(ns)
    }

    fn empty(&self, rows: usize) -> Matrix<Rational> {
        Matrix::zeros((), rows, 0)
    }

    fn image_basis(&self, k: i32) -> (Vec<usize>, Matrix<Rational>) {
        let a = ad_delta_map(&self.model, k + 1);
        if a.cols() == 0 {
            return (Vec::new(), self.empty(self.model.g_dim(k)));
        }
        let idx = linalg::independent_columns(&a, 0.0);
        let m = a.select_columns(&idx);
        (idx, m)
    }

    fn u_basis(&self, k: i32) -> Matrix<Rational> {
        self.u.basis_at(k).cloned().unwrap_or_else(|| self.empty(self.model.g_dim(k)))
    }

    pub fn n_basis(&self, k: i32) -> Matrix<Rational> {
        self.n_bases.get(&k).cloned().unwrap_or_else(|| self.empty(self.model.g_dim(k)))
    }

    fn build_projector(&self, k: i32) -> Option<Projector> {
        let g = self.model.g_dim(k);
        let (image_slots, im) = self.image_basis(k);
        let u = self.u_basis(k);
        // keep only the part of u_k independent of the image
        let joint = im.hstack(&u);
        let keep: Vec<usize> = linalg::independent_columns(&joint, 0.0).into_iter().filter(|&c| c >= im.cols()).map(|c| c - im.cols()).collect();
        let u_red = u.select_columns(&keep);
        let n = self.n_basis(k);
        let basis = im.hstack(&u_red).hstack(&n);
        if basis.cols() != g {
            return None;
        }
        if g == 0 {
            return Some(Projector { image_slots, n_image: 0, n_u: 0, n_n: 0, basis: basis.clone(), inverse: basis });
        }
        let inverse = linalg::inverse(&basis, 0.0)?;
        Some(Projector { n_image: im.cols(), n_u: u_red.cols(), n_n: n.cols(), image_slots, basis, inverse })
    }

    pub fn model(&self) -> &SymplecticModel {
        &self.model
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn prolongation(&self) -> &GradedSubspace {
        &self.u
    }

    pub fn projector(&self, k: i32) -> Option<&Projector> {
        self.projectors.get(&k)
    }

    pub fn n_dim(&self, k: i32) -> usize {
        self.n_bases.get(&k).map_or(0, |m| m.cols())
    }

    pub fn total_n_dim(&self) -> usize {
        self.n_bases.values().map(|m| m.cols()).sum()
    }

    pub fn n_labels(&self, k: i32) -> &[(Pair, usize)] {
        self.n_labels.get(&k).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Degrees carrying a nonzero part of `N`.
    pub fn n_degrees(&self) -> Vec<i32> {
        self.n_bases.iter().filter(|(_, m)| m.cols() > 0).map(|(&k, _)| k).collect()
    }

    /// Splits degree-`k` coordinates along `B_k`.
    pub fn split<F: Field>(&self, k: i32, coords: &[F], ctx: F::Ctx) -> Result<Split<F>> {
        let p = self.projectors.get(&k).ok_or(Error::NotComplementary { degree: k, detail: "no projector".into() })?;
        let g = coords.len();
        let inv = p.inverse.to_field::<F>(ctx);
        let c = if g == 0 { Vec::new() } else { inv.mul_vec(coords) };
        let mut x_next = vec![F::zero(ctx); self.model.g_dim(k + 1)];
        for (i, &s) in p.image_slots.iter().enumerate() {
            x_next[s] = c[i].clone();
        }
        Ok(Split {
            x_next,
            u_coeffs: c[p.n_image..p.n_image + p.n_u].to_vec(),
            n_coeffs: c[p.n_image + p.n_u..].to_vec(),
        })
    }

    /// Degree-`k` coordinates of `sum n_coeffs[i] * N_k[i]`.
    pub fn n_element_coords<F: Field>(&self, k: i32, n_coeffs: &[F], ctx: F::Ctx) -> Vec<F> {
        let n = self.n_basis(k).to_field::<F>(ctx);
        if n.cols() == 0 {
            return vec![F::zero(ctx); self.model.g_dim(k)];
        }
        n.mul_vec(n_coeffs)
    }

    /// Exact membership of a dense element in `N`.
    pub fn contains(&self, x: &Matrix<Rational>) -> bool {
        self.model.degree_split(x).iter().all(|(&k, c)| {
            let v = Matrix::from_columns((), self.model.g_dim(k), &[self.model.to_coords(c, k)]);
            linalg::in_column_space(&self.n_basis(k), &v, 0.0)
        })
    }

    fn audit_degree(&self, k: i32) -> DegreeAudit {
        let g = self.model.g_dim(k);
        let (_, im) = self.image_basis(k);
        let u = self.u_basis(k);
        let n = self.n_basis(k);
        let sum = im.hstack(&u);
        let sum_rank = if sum.cols() == 0 { 0 } else { linalg::rank(&sum, 0.0) };
        let all = sum.hstack(&n);
        let total_rank = if all.cols() == 0 { 0 } else { linalg::rank(&all, 0.0) };
        let ok = total_rank == g && sum_rank + n.cols() == g;
        DegreeAudit { degree: k, g, u: u.cols(), image: im.cols(), n: n.cols(), sum_rank, total_rank, ok }
    }

    /// Per-degree direct-sum check plus Ad-invariance under `trials` random
    /// rational orthogonal residual elements.
    pub fn complementarity_audit(&self, trials: usize, rng: &mut impl Rng) -> ComplementarityReport {
        let degrees: Vec<DegreeAudit> = (0..=self.model.diagram().max_degree()).map(|k| self.audit_degree(k)).collect();
        let first_failure = degrees.iter().find(|a| !a.ok).map(|a| a.degree);
        let mut ad_failures = 0;
        let basis: Vec<Matrix<Rational>> = self
            .n_bases
            .iter()
            .flat_map(|(&k, b)| (0..b.cols()).map(move |j| (k, b.column(j))))
            .map(|(k, c)| self.model.from_coords((), k, &c))
            .collect();
        for _ in 0..trials {
            let u = random_residual_element(&self.model, rng);
            let uinv = u.transpose();
            // random element of N
            let mut n = Matrix::zeros((), self.model.dim(), self.model.dim());
            for b in &basis {
                n.add_assign(&b.scale(&random_rational(rng)));
            }
            let moved = u.mul(&n).mul(&uinv);
            if !self.contains(&moved) {
                ad_failures += 1;
            }
        }
        ComplementarityReport { passed: first_failure.is_none() && ad_failures == 0, degrees, ad_trials: trials, ad_failures, first_failure }
    }
}

/// Small random rational with numerator in `-6..=6` and denominator in `1..=4`.
pub fn random_rational(rng: &mut impl Rng) -> Rational {
    Rational::from((rng.gen_range(-6i64..=6), rng.gen_range(1i64..=4)))
}

/// Random element of `g_k`.
pub fn random_graded(model: &SymplecticModel, k: i32, rng: &mut impl Rng) -> Matrix<Rational> {
    let c: Vec<Rational> = (0..model.g_dim(k)).map(|_| random_rational(rng)).collect();
    model.from_coords((), k, &c)
}

/// Random element of `g^0` (all nonnegative degrees).
pub fn random_nonnegative(model: &SymplecticModel, rng: &mut impl Rng) -> Matrix<Rational> {
    let mut x = Matrix::zeros((), model.dim(), model.dim());
    for k in 0..=model.diagram().max_degree() {
        x.add_assign(&random_graded(model, k, rng));
    }
    x
}

/// Random skew-symmetric rational matrix.
pub fn random_skew(n: usize, rng: &mut impl Rng) -> Matrix<Rational> {
    let mut a = Matrix::zeros((), n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = random_rational(rng);
            a[(j, i)] = Rational::from(-&v);
            a[(i, j)] = v;
        }
    }
    a
}

/// Cayley transform `(I - A)(I + A)^{-1}` of a skew matrix: a rational orthogonal matrix.
pub fn cayley(a: &Matrix<Rational>) -> Matrix<Rational> {
    let n = a.rows();
    let id = Matrix::identity((), n);
    let inv = linalg::inverse(&id.add(a), 0.0).expect("I + A is invertible for skew A");
    id.sub(a).mul(&inv)
}

/// Block-diagonal element of `O(r_1) x ... x O(r_s)` acting on the model:
/// the same `U_i` on every box of row `i`. Random signs are mixed in so
/// that both components of each orthogonal group occur.
pub fn random_residual_element(model: &SymplecticModel, rng: &mut impl Rng) -> Matrix<Rational> {
    let d = model.diagram();
    let per_row: Vec<Matrix<Rational>> = d
        .reduced()
        .rows()
        .iter()
        .map(|&(_, r)| {
            let mut u = cayley(&random_skew(r, rng));
            if rng.gen_bool(0.5) {
                let mut s = Matrix::identity((), r);
                s[(0, 0)] = Rational::from(-1);
                u = s.mul(&u);
            }
            u
        })
        .collect();
    residual_matrix(model, &per_row)
}

/// Dense block-diagonal matrix with `per_row[i-1]` on each box of row `i`.
pub fn residual_matrix<F: Field>(model: &SymplecticModel, per_row: &[Matrix<F>]) -> Matrix<F> {
    let d = model.diagram();
    let ctx = per_row[0].ctx();
    let mut x = Matrix::zeros(ctx, model.dim(), model.dim());
    for &b in d.boxes() {
        model.set_block(&mut x, b, b, &per_row[b.row - 1]);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::ReducedDiagram;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(rows: &[(usize, usize)]) -> SymplecticModel {
        SymplecticModel::from_reduced(&ReducedDiagram::new(rows.to_vec()).unwrap())
    }

    #[test]
    fn bracket_matches_commutator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = model(&[(2, 1), (1, 1)]);
        let dl = m.delta::<Rational>(());
        for _ in 0..5 {
            let mut x = Matrix::zeros((), m.dim(), m.dim());
            for k in m.degrees().collect::<Vec<_>>() {
                x.add_assign(&random_graded(&m, k, &mut rng));
            }
            assert_eq!(bracket_blocks(&m, &x).unwrap(), dl.commutator(&x));
        }
        assert!(bracket_blocks(&m, &dl).unwrap().is_zero());
    }

    #[test]
    fn prolongation_dims() {
        assert_eq!(prolongation(&model(&[(3, 1)])).unwrap().dim(), 0);
        assert_eq!(prolongation(&model(&[(1, 4)])).unwrap().dim(), 6);
        assert_eq!(prolongation(&model(&[(3, 2), (1, 1)])).unwrap().dim(), 1);
    }

    #[test]
    fn sl2_for_one_box() {
        let m = model(&[(1, 1)]);
        assert_eq!(unparametrized_prolongation(&m).dim(), 3);
    }

    #[test]
    fn d_operator_examples() {
        let m = model(&[(2, 1)]);
        let mut y = Matrix::<Rational>::zeros((), 4, 4);
        let (c1, c2, cm1) = (Cell::new(1, 1), Cell::new(1, 2), Cell::new(1, -1));
        m.set_block(&mut y, c1, c2, &Matrix::from_i64_rows((), &[&[3]]));
        assert_eq!(d_operator(&m, &y, c1, c2).unwrap(), Matrix::from_i64_rows((), &[&[3]]));
        m.set_block(&mut y, cm1, c1, &Matrix::from_i64_rows((), &[&[3]]));
        assert!(d_operator(&m, &y, c1, c2).unwrap().is_zero());
        assert!(matches!(d_operator(&m, &y, Cell::new(1, 3), c2), Err(Error::BoxOutOfRange(_))));
    }

    #[test]
    fn coboundary_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for rows in [vec![(1, 1)], vec![(2, 1)], vec![(2, 1), (1, 2)], vec![(3, 1), (1, 1)]] {
            let m = model(&rows);
            for _ in 0..5 {
                let x0 = random_nonnegative(&m, &mut rng);
                let y = m.degree_at_least(&bracket_blocks(&m, &x0).unwrap(), 0);
                match coboundary_test(&m, &y).unwrap() {
                    CoboundaryCertificate::Member { x } => assert_eq!(bracket_blocks(&m, &x).unwrap(), y),
                    other => panic!("{rows:?}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn normalization_examples() {
        let m1 = model(&[(1, 1)]);
        let n1 = NormalizationSpace::phi0(&m1).unwrap();
        assert_eq!((n1.n_dim(0), n1.n_dim(1), n1.total_n_dim()), (0, 1, 1));
        let m2 = model(&[(2, 1)]);
        let n2 = NormalizationSpace::phi0(&m2).unwrap();
        assert_eq!(n2.total_n_dim(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(n2.complementarity_audit(5, &mut rng).passed);
        let y = n1.model().from_coords((), 1, &[Rational::from(2)]);
        assert!(!coboundary_test(&m1, &y).unwrap().is_member());
    }

    #[test]
    fn broken_assignment_is_reported() {
        let m = model(&[(2, 1)]);
        let mut a = Assignment::phi0(&m).unwrap();
        // (1,1) has odd left index, so every pair of its chain carries a symmetric block
        let key = (Cell::new(1, 1), Cell::new(1, 2));
        let chosen = a.pairs.iter().find(|(k, _)| *k == key).unwrap().1;
        let chain = m.diagram().pair_chain(key.0, key.1).unwrap();
        let extra = *chain.iter().find(|p| **p != chosen).unwrap();
        a.pairs.push((key, extra));
        assert!(NormalizationSpace::new(&m, a.clone()).is_err());
        let ns = NormalizationSpace::unchecked(&m, a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = ns.complementarity_audit(0, &mut rng);
        assert!(!rep.passed);
        assert!(rep.first_failure.is_some());
    }
}
