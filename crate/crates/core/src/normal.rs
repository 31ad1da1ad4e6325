//! Structure functions and normalization of frames.
//!
//! Starting from a lift whose structure function has degree `-1` part
//! `delta`, stage `k` removes the `[delta, g_{k+1}]` part of degree `k` by
//! right-multiplying with `exp(x)`, `x` in `g_{k+1}`. At `k = 0` a rotation
//! solved from a jet ODE also removes the `u_0` part. Afterwards `C - delta`
//! lies in `N`.
//!
//! Jet orders shrink as stages differentiate the gauge, so every degree of
//! the structure function carries its own order; a degree whose order is
//! exhausted is *unresolved* and is reported as such.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{random_rational, NormalizationSpace, Pair};
use crate::config::RunConfig;
use crate::curve::{adapted_lift_in_chart, adapted_lift_with, analyze, cell_label, rational_transversal, symplectic_inverse, CurveSpec};
use crate::diagram::{Cell, ReducedDiagram};
use crate::error::{Error, Result};
use crate::jet::{solve_left, solve_right, Jet, MatrixJet};
use crate::linalg;
use crate::matrix::Matrix;
use crate::model::SymplecticModel;
use crate::scalar::{Field, Rational, RealField};

/// Element of `sp(V)[[t]]` split by degree, each degree with its own order.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedJet<F: Field> {
    max_degree: i32,
    parts: BTreeMap<i32, MatrixJet<F>>,
    unresolved: BTreeSet<i32>,
}

impl<F: Field> GradedJet<F> {
    fn empty(max_degree: i32) -> Self {
        GradedJet { max_degree, parts: BTreeMap::new(), unresolved: BTreeSet::new() }
    }

    /// Splits a dense jet by degree. With `snap_delta` the degree `-1` part
    /// is replaced by `delta` and lower degrees are dropped.
    pub fn from_dense(model: &SymplecticModel, x: &MatrixJet<F>, snap_delta: bool) -> Self {
        let max = model.diagram().max_degree();
        let mut g = Self::empty(max);
        for k in -max..=max {
            if snap_delta && k < -1 {
                continue;
            }
            let part = if snap_delta && k == -1 {
                MatrixJet::constant(x.base_point().clone(), model.delta::<F>(x.ctx()), x.order())
            } else {
                x.map(|c| model.degree_component(c, k))
            };
            if !part.is_zero() || k == -1 {
                g.parts.insert(k, part);
            }
        }
        g
    }

    /// Single homogeneous part.
    pub fn homogeneous(max_degree: i32, k: i32, x: MatrixJet<F>) -> Self {
        let mut g = Self::empty(max_degree);
        g.parts.insert(k, x);
        g
    }

    pub fn part(&self, k: i32) -> Option<&MatrixJet<F>> {
        self.parts.get(&k)
    }

    pub fn is_resolved(&self, k: i32) -> bool {
        !self.unresolved.contains(&k)
    }

    pub fn unresolved(&self) -> Vec<i32> {
        self.unresolved.iter().copied().collect()
    }

    pub fn degrees(&self) -> Vec<i32> {
        self.parts.keys().copied().collect()
    }

    /// Order of a degree, `None` if unresolved; an absent degree is an
    /// exact zero.
    pub fn order(&self, k: i32) -> Option<usize> {
        if self.unresolved.contains(&k) {
            None
        } else {
            Some(self.parts.get(&k).map_or(usize::MAX, |p| p.order()))
        }
    }

    pub fn set_part(&mut self, k: i32, x: MatrixJet<F>) {
        self.unresolved.remove(&k);
        self.parts.insert(k, x);
    }

    fn is_empty(&self) -> bool {
        self.parts.values().all(|p| p.is_zero()) && self.unresolved.is_empty()
    }

    /// Dense sum of the resolved parts, truncated to their common order.
    pub fn to_dense(&self) -> Option<MatrixJet<F>> {
        let mut it = self.parts.values();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, p| acc.add_t(p)))
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (&k, p) in &o.parts {
            let merged = match out.parts.get(&k) {
                Some(q) => q.add_t(p),
                None => p.clone(),
            };
            out.parts.insert(k, merged);
        }
        for &k in &o.unresolved {
            out.unresolved.insert(k);
        }
        for k in out.unresolved.clone() {
            out.parts.remove(&k);
        }
        out
    }

    /// `[self, o]`; terms above the top degree vanish identically.
    pub fn bracket(&self, o: &Self) -> Self {
        let mut out = Self::empty(self.max_degree);
        for (&a, x) in &self.parts {
            for (&b, y) in &o.parts {
                let k = a + b;
                if k.abs() > self.max_degree {
                    continue;
                }
                let z = x.commutator_t(y);
                let merged = match out.parts.get(&k) {
                    Some(q) => q.add_t(&z),
                    None => z,
                };
                out.parts.insert(k, merged);
            }
        }
        let touch = |k: i32, out: &mut Self| {
            if k.abs() <= self.max_degree {
                out.unresolved.insert(k);
            }
        };
        for &a in &self.unresolved {
            for &b in o.parts.keys() {
                touch(a + b, &mut out);
            }
        }
        for &b in &o.unresolved {
            for &a in self.parts.keys() {
                touch(a + b, &mut out);
            }
        }
        for k in out.unresolved.clone() {
            out.parts.remove(&k);
        }
        out
    }

    pub fn scale(&self, s: &F) -> Self {
        let mut out = self.clone();
        for p in out.parts.values_mut() {
            *p = p.scale(s);
        }
        out
    }

    pub fn derivative(&self) -> Self {
        let mut out = Self::empty(self.max_degree);
        out.unresolved = self.unresolved.clone();
        for (&k, p) in &self.parts {
            match p.derivative() {
                Ok(d) => {
                    out.parts.insert(k, d);
                }
                Err(_) => {
                    out.unresolved.insert(k);
                }
            }
        }
        out
    }

    /// `uinv X u` on every part except degree `-1`.
    pub fn conjugate_except_delta(&self, u: &MatrixJet<F>, uinv: &MatrixJet<F>) -> Self {
        let mut out = self.clone();
        for (&k, p) in out.parts.iter_mut() {
            if k != -1 {
                *p = uinv.mul_t(p).mul_t(u);
            }
        }
        out
    }
}

/// `Gamma^{-1} Gamma'`, checked against `sp` of `form`.
pub fn structure_function<F: Field>(gamma: &MatrixJet<F>, form: &Matrix<F>, tol: f64) -> Result<MatrixJet<F>> {
    let inv = gamma.inverse(tol)?;
    let c = inv.mul_t(&gamma.derivative()?);
    check_sp(&c, form, tol)?;
    Ok(c)
}

/// Every coefficient satisfies `X^T J + J X = 0`.
pub fn check_sp<F: Field>(c: &MatrixJet<F>, form: &Matrix<F>, tol: f64) -> Result<()> {
    for (k, x) in c.coeffs().iter().enumerate() {
        let d = x.transpose().mul(form).add(&form.mul(x));
        let bad = if F::EXACT { !d.is_zero() } else { d.max_abs() > tol * (1.0 + x.max_abs()) };
        if bad {
            return Err(Error::NotInSp(format!("coefficient {k}: defect {:e}", d.max_abs())));
        }
    }
    Ok(())
}

/// What stage `k` did.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTrace {
    pub degree: i32,
    /// `dim u_0 + dim g^{k+1}`: the gauge freedom left after the stage.
    pub residual_gauge_dim: usize,
    /// Dimension of `[delta, g_{k+1}]` (plus `u_0` at `k = 0`) removed here.
    pub removed_dim: usize,
    /// Largest coefficient of the applied `x`.
    pub correction: f64,
    /// Leftover image (and `u_0`) part of degree `k` after the stage.
    pub residual: f64,
    /// Largest change of a lower-degree part caused by the stage.
    pub lower_change: f64,
    pub order: Option<usize>,
}

/// A normal frame with its structure function `delta + n(t)`.
#[derive(Clone, Debug)]
pub struct CanonicalFrame<F: Field> {
    pub model: SymplecticModel,
    pub pairs: Vec<(Pair, Pair)>,
    pub sgn: i64,
    pub kappa: i64,
    /// Frame in the coordinates of the input lift.
    pub gamma: MatrixJet<F>,
    pub c: GradedJet<F>,
    /// Coefficients along the basis of `N_k`, per degree.
    pub n_coords: BTreeMap<i32, Vec<Jet<F>>>,
    pub trace: Vec<StageTrace>,
    pub fiber: Matrix<F>,
    /// Largest non-`N` component left in any resolved degree.
    pub final_residual: f64,
}

impl<F: Field> CanonicalFrame<F> {
    pub fn unresolved(&self) -> Vec<i32> {
        self.c.unresolved()
    }

    pub fn diagram(&self) -> &ReducedDiagram {
        self.model.diagram().reduced()
    }

    /// Dense `C - delta` over the resolved degrees.
    pub fn n_dense(&self) -> Option<MatrixJet<F>> {
        let mut g = self.c.clone();
        g.parts.remove(&-1);
        g.to_dense()
    }
}

fn coords_jet<F: Field>(model: &SymplecticModel, x: &MatrixJet<F>, k: i32) -> Vec<Vec<F>> {
    x.coeffs().iter().map(|c| model.to_coords(c, k)).collect()
}

fn jets_from_coeffs<F: Field>(t0: &F, per_coeff: &[Vec<F>], len: usize) -> Vec<Jet<F>> {
    (0..len).map(|i| Jet::new(t0.clone(), per_coeff.iter().map(|c| c[i].clone()).collect())).collect()
}

fn vec_max<F: Field>(v: &[F]) -> f64 {
    v.iter().map(|x| x.magnitude()).fold(0.0, f64::max)
}

/// Normalizes a lift given by its structure function (degree `-1` part
/// already `delta`). `gamma` is carried along and multiplied by every gauge.
pub fn normalize_graded<F: Field>(
    ns: &NormalizationSpace,
    gamma: MatrixJet<F>,
    c: GradedJet<F>,
    fiber: Option<&Matrix<F>>,
    tol: f64,
) -> Result<CanonicalFrame<F>> {
    let model = ns.model().clone();
    let d = model.diagram();
    let max = d.max_degree();
    let ctx = gamma.ctx();
    let t0 = gamma.base_point().clone();
    let n = model.dim();
    let u0_dim = ns.prolongation().dim_at(0);
    let mut c = c;
    let mut gamma = gamma;
    let mut trace = Vec::new();
    let fiber_m = fiber.cloned().unwrap_or_else(|| Matrix::identity(ctx, n));
    let small = |r: f64, scale: f64| if F::EXACT { r == 0.0 } else { r <= tol * (1.0 + scale) };
    for k in 0..=max {
        let residual_gauge_dim = u0_dim + (k + 1..=max).map(|j| model.g_dim(j)).sum::<usize>();
        let proj = ns.projector(k).ok_or(Error::NotComplementary { degree: k, detail: "no projector".into() })?;
        let removed_dim = proj.n_image + if k == 0 { proj.n_u } else { 0 };
        if !c.is_resolved(k) {
            trace.push(StageTrace { degree: k, residual_gauge_dim, removed_dim, correction: 0.0, residual: 0.0, lower_change: 0.0, order: None });
            continue;
        }
        let Some(ck) = c.part(k).cloned() else {
            trace.push(StageTrace { degree: k, residual_gauge_dim, removed_dim, correction: 0.0, residual: 0.0, lower_change: 0.0, order: c.order(k) });
            continue;
        };
        let before = c.clone();
        let scale = ck.max_abs();
        let coords = coords_jet(&model, &ck, k);
        let splits: Vec<_> = coords.iter().map(|v| ns.split(k, v, ctx)).collect::<Result<_>>()?;
        let xcoeffs: Vec<Matrix<F>> = splits.iter().map(|s| model.from_coords(ctx, k + 1, &s.x_next).neg()).collect();
        let x = MatrixJet::from_coeffs(t0.clone(), xcoeffs);
        let correction = x.max_abs();
        if !x.is_zero() {
            let xg = GradedJet::homogeneous(max, k + 1, x.clone());
            c = gauge_exp(&c, &xg);
            let bound = (max / (k + 1)) as usize + 2;
            gamma = gamma.mul_t(&x.exp_nilpotent(bound)?);
        }
        if k == 0 {
            let c0 = c.part(0).cloned().unwrap_or_else(|| MatrixJet::zeros(t0.clone(), n, n, ck.order()));
            let ub = proj.basis.select_columns(&(proj.n_image..proj.n_image + proj.n_u).collect::<Vec<_>>()).to_field::<F>(ctx);
            let beta_coeffs: Vec<Matrix<F>> = coords_jet(&model, &c0, 0)
                .iter()
                .map(|v| {
                    let s = ns.split(0, v, ctx)?;
                    let coords = if s.u_coeffs.is_empty() { vec![F::zero(ctx); model.g_dim(0)] } else { ub.mul_vec(&s.u_coeffs) };
                    Ok(model.from_coords(ctx, 0, &coords))
                })
                .collect::<Result<_>>()?;
            let beta = MatrixJet::from_coeffs(t0.clone(), beta_coeffs);
            let u = solve_left(&beta.neg(), fiber_m.clone());
            let uinv = symplectic_inverse(&model, &u);
            let new0 = uinv.mul_t(&c0.sub_t(&beta)).mul_t(&u);
            c = c.conjugate_except_delta(&u, &uinv);
            c.set_part(0, new0);
            gamma = gamma.mul_t(&u);
        }
        // residual of the stage and untouched lower degrees
        let mut residual: f64 = 0.0;
        if let Some(ck) = c.part(k) {
            for v in coords_jet(&model, ck, k) {
                let s = ns.split(k, &v, ctx)?;
                residual = residual.max(vec_max(&s.x_next));
                if k == 0 {
                    residual = residual.max(vec_max(&s.u_coeffs));
                }
            }
        }
        let mut lower_change: f64 = 0.0;
        for j in -1..k {
            if let (Some(a), Some(b)) = (before.part(j), c.part(j)) {
                lower_change = lower_change.max(a.sub_t(b).max_abs());
            }
        }
        trace.push(StageTrace { degree: k, residual_gauge_dim, removed_dim, correction, residual, lower_change, order: c.order(k) });
        if !small(residual, scale) {
            return Err(Error::StageResidualTooLarge { stage: k, residual });
        }
        if !small(lower_change, scale) {
            return Err(Error::StageResidualTooLarge { stage: k, residual: lower_change });
        }
    }
    let mut n_coords = BTreeMap::new();
    let mut final_residual: f64 = 0.0;
    for k in 0..=max {
        let Some(ck) = c.part(k) else { continue };
        if !c.is_resolved(k) {
            continue;
        }
        let splits: Vec<_> = coords_jet(&model, ck, k).iter().map(|v| ns.split(k, v, ctx)).collect::<Result<_>>()?;
        for s in &splits {
            final_residual = final_residual.max(vec_max(&s.x_next)).max(vec_max(&s.u_coeffs));
        }
        let ncs: Vec<Vec<F>> = splits.into_iter().map(|s| s.n_coeffs).collect();
        if ns.n_dim(k) > 0 {
            n_coords.insert(k, jets_from_coeffs(&t0, &ncs, ns.n_dim(k)));
        }
    }
    Ok(CanonicalFrame { model, pairs: ns.assignment().pairs.clone(), sgn: 0, kappa: 0, gamma, c, n_coords, trace, fiber: fiber_m, final_residual })
}

/// Structure function of `Gamma exp(x)` from that of `Gamma`:
/// `e^{-ad x} C + sum_n (-1)^n/(n+1)! ad_x^n (x')`.
pub fn gauge_exp<F: Field>(c: &GradedJet<F>, x: &GradedJet<F>) -> GradedJet<F> {
    let ctx = x.parts.values().next().map(|p| p.ctx());
    let Some(ctx) = ctx else { return c.clone() };
    let mut total = c.clone();
    let mut term = c.clone();
    let mut n = 1i64;
    loop {
        term = x.bracket(&term).scale(&F::from_rational(ctx, &Rational::from((-1, n))));
        if term.is_empty() {
            break;
        }
        total = total.add(&term);
        n += 1;
    }
    let xd = x.derivative();
    total = total.add(&xd);
    let mut term = xd;
    let mut n = 1i64;
    loop {
        term = x.bracket(&term).scale(&F::from_rational(ctx, &Rational::from((-1, n + 1))));
        if term.is_empty() {
            break;
        }
        total = total.add(&term);
        n += 1;
    }
    total
}

/// Normalizes an arbitrary lift in model coordinates (`Gamma^T J Gamma`
/// proportional to `J`) whose structure function starts with `delta`.
pub fn normalize_lift<F: Field>(ns: &NormalizationSpace, gamma: &MatrixJet<F>, fiber: Option<&Matrix<F>>, tol: f64) -> Result<CanonicalFrame<F>> {
    let model = ns.model();
    let form = model.form::<F>(gamma.ctx());
    let c = structure_function(gamma, &form, tol)?;
    let delta = model.delta::<F>(gamma.ctx());
    for (k, x) in c.coeffs().iter().enumerate() {
        for deg in -model.diagram().max_degree()..=-1 {
            let part = model.degree_component(x, deg);
            let r = if deg == -1 && k == 0 { part.sub(&delta).max_abs() } else { part.max_abs() };
            if (F::EXACT && r != 0.0) || r > tol * (1.0 + x.max_abs()) {
                return Err(Error::RegularityFailed(format!("lift is not adapted: degree {deg} defect {r:e} at coefficient {k}")));
            }
        }
    }
    let g = GradedJet::from_dense(model, &c, true);
    let mut out = normalize_graded(ns, gamma.clone(), g, fiber, tol)?;
    out.sgn = model.convention_sign();
    out.kappa = 1;
    Ok(out)
}

/// Full pipeline: analysis, adapted lift, normalization.
pub fn normalize<F: RealField>(curve: &CurveSpec, ns: &NormalizationSpace, fiber: Option<&Matrix<F>>, cfg: &RunConfig, ctx: F::Ctx) -> Result<CanonicalFrame<F>> {
    let analysis = analyze(curve, cfg)?;
    if &analysis.diagram != ns.model().diagram().reduced() {
        return Err(Error::ModelMismatch);
    }
    let lift = adapted_lift_with::<F>(curve, &analysis, cfg, ctx)?;
    let tol = cfg.residual_tol();
    let growth = lift.chart_growth;
    let (sgn, kappa) = (lift.sgn, lift.kappa);
    let mut out = normalize_graded(ns, lift.gamma, lift.c, fiber, tol)?;
    if growth > CHART_GROWTH_LIMIT {
        // redo the lift in the chart of the normal frame's own complement
        let model = ns.model();
        let mirror = model.mirror_indices();
        let comp: Vec<usize> = (0..model.dim()).filter(|i| !mirror.contains(i)).collect();
        let w = out.gamma.value().select_columns(&comp);
        if let Some(t) = rational_transversal(curve, &w, tol) {
            let lift = adapted_lift_in_chart::<F>(curve, &analysis, cfg, ctx, Some(&t))?;
            if lift.chart_growth < growth {
                out = normalize_graded(ns, lift.gamma, lift.c, fiber, tol)?;
            }
        }
    }
    out.sgn = sgn;
    out.kappa = kappa;
    Ok(out)
}

/// Lifts whose exact structure function grows faster than this per order
/// are recomputed in a better chart.
pub const CHART_GROWTH_LIMIT: f64 = 16.0;

/// One curvature block `(C)_{ba}`.
#[derive(Clone, Debug)]
pub struct CurvatureMap<F: Field> {
    pub key: String,
    pub b: Cell,
    pub a: Cell,
    pub degree: i32,
    /// `None` when the degree is unresolved at this jet order.
    pub block: Option<MatrixJet<F>>,
}

pub fn curvature_maps<F: Field>(frame: &CanonicalFrame<F>) -> Vec<CurvatureMap<F>> {
    let d = frame.model.diagram();
    frame
        .pairs
        .iter()
        .map(|&(_, (beta, alpha))| {
            let degree = d.deg(beta) - d.deg(alpha);
            let block = if frame.c.is_resolved(degree) {
                let rows: Vec<usize> = (0..d.block_size(beta)).map(|i| d.offset(beta) + i).collect();
                let cols: Vec<usize> = (0..d.block_size(alpha)).map(|i| d.offset(alpha) + i).collect();
                Some(match frame.c.part(degree) {
                    Some(p) => p.select_rows(&rows).select_columns(&cols),
                    None => MatrixJet::zeros(frame.gamma.base_point().clone(), rows.len(), cols.len(), frame.gamma.order()),
                })
            } else {
                None
            };
            CurvatureMap { key: format!("{}x{}", cell_label(beta), cell_label(alpha)), b: beta, a: alpha, degree, block }
        })
        .collect()
}

/// Residual-invariant data of a normal frame.
#[derive(Clone, Debug)]
pub enum InvariantFingerprint<F: Field> {
    /// Multiplicity-one diagrams: the scalar curvatures with signs fixed by
    /// the spanning-forest rule.
    Complete { labels: Vec<String>, jets: Vec<Option<Jet<F>>>, signs: Vec<i64> },
    /// Traces of closed words of length at most 4 in the curvature blocks
    /// and their transposes; not a complete invariant.
    Partial { words: Vec<String>, traces: Vec<Jet<F>> },
}

impl<F: Field> InvariantFingerprint<F> {
    pub fn is_complete(&self) -> bool {
        matches!(self, InvariantFingerprint::Complete { .. })
    }

    /// Largest coefficient difference over common orders, `None` if the
    /// two fingerprints have different shapes.
    pub fn distance(&self, o: &Self) -> Option<f64> {
        let jet_diff = |a: &Jet<F>, b: &Jet<F>| {
            let k = a.order().min(b.order());
            (0..=k).map(|i| a.coeff(i).sub(b.coeff(i)).magnitude()).fold(0.0, f64::max)
        };
        match (self, o) {
            (InvariantFingerprint::Complete { labels: la, jets: ja, .. }, InvariantFingerprint::Complete { labels: lb, jets: jb, .. }) => {
                if la != lb {
                    return None;
                }
                let mut m: f64 = 0.0;
                for (a, b) in ja.iter().zip(jb) {
                    if let (Some(a), Some(b)) = (a, b) {
                        m = m.max(jet_diff(a, b));
                    }
                }
                Some(m)
            }
            (InvariantFingerprint::Partial { words: wa, traces: ta }, InvariantFingerprint::Partial { words: wb, traces: tb }) => {
                if wa != wb {
                    return None;
                }
                Some(ta.iter().zip(tb).map(|(a, b)| jet_diff(a, b)).fold(0.0, f64::max))
            }
            _ => None,
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            InvariantFingerprint::Complete { jets, .. } => jets.iter().flatten().map(|j| j.max_abs()).fold(0.0, f64::max),
            InvariantFingerprint::Partial { traces, .. } => traces.iter().map(|j| j.max_abs()).fold(0.0, f64::max),
        }
    }
}

/// First coefficient above `tol` in magnitude, with its sign.
fn leading_sign<F: Field>(j: &Jet<F>, tol: f64) -> Option<i64> {
    j.coeffs().iter().find(|c| c.magnitude() > tol).map(|c| if c.to_float(64).is_sign_negative() { -1 } else { 1 })
}

/// Row signs `s` making the leading coefficient of each tree edge of the
/// cross-row curvature graph positive; edges are taken in assignment order.
fn canonical_signs<F: Field>(rows: usize, edges: &[(usize, usize, Option<&Jet<F>>)], tol: f64) -> Vec<i64> {
    let mut s = vec![1i64; rows + 1];
    let mut comp: Vec<usize> = (0..=rows).collect();
    for &(i, j, jet) in edges {
        if i == j || comp[i] == comp[j] {
            continue;
        }
        let Some(sign) = jet.and_then(|x| leading_sign(x, tol)) else { continue };
        let (ci, cj) = (comp[i], comp[j]);
        if s[i] * s[j] * sign < 0 {
            for r in 1..=rows {
                if comp[r] == cj {
                    s[r] = -s[r];
                }
            }
        }
        for c in comp.iter_mut() {
            if *c == cj {
                *c = ci;
            }
        }
    }
    s
}

pub fn invariant_fingerprint<F: Field>(frame: &CanonicalFrame<F>, tol: f64) -> InvariantFingerprint<F> {
    let maps = curvature_maps(frame);
    let d = frame.model.diagram();
    if d.reduced().multiplicity_one() {
        let jets: Vec<Option<Jet<F>>> = maps.iter().map(|m| m.block.as_ref().map(|b| b.entry(0, 0))).collect();
        let edges: Vec<(usize, usize, Option<&Jet<F>>)> = maps.iter().zip(&jets).map(|(m, j)| (m.b.row, m.a.row, j.as_ref())).collect();
        let signs = canonical_signs(d.num_rows(), &edges, tol);
        let jets = maps
            .iter()
            .zip(jets)
            .map(|(m, j)| j.map(|j| if signs[m.b.row] * signs[m.a.row] < 0 { j.neg() } else { j }))
            .collect();
        return InvariantFingerprint::Complete { labels: maps.iter().map(|m| m.key.clone()).collect(), jets, signs: signs[1..].to_vec() };
    }
    trace_fingerprint(&maps)
}

const MAX_WORDS: usize = 512;

fn trace_fingerprint<F: Field>(maps: &[CurvatureMap<F>]) -> InvariantFingerprint<F> {
    // letters: (map index, transposed); a letter maps row `from` to row `to`
    let mut letters: Vec<(usize, bool, usize, usize)> = Vec::new();
    for (i, m) in maps.iter().enumerate() {
        if m.block.as_ref().is_some_and(|b| !b.is_zero()) {
            letters.push((i, false, m.a.row, m.b.row));
            letters.push((i, true, m.b.row, m.a.row));
        }
    }
    let mut words: Vec<Vec<usize>> = Vec::new();
    let mut seen = BTreeSet::new();
    fn rec(letters: &[(usize, bool, usize, usize)], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, seen: &mut BTreeSet<Vec<usize>>) {
        if out.len() >= MAX_WORDS {
            return;
        }
        if !cur.is_empty() {
            let first = letters[cur[0]];
            let last = letters[*cur.last().unwrap()];
            if last.3 == first.2 {
                let canon = (0..cur.len()).map(|r| cur[r..].iter().chain(&cur[..r]).copied().collect::<Vec<_>>()).min().unwrap();
                if seen.insert(canon) {
                    out.push(cur.clone());
                }
            }
        }
        if cur.len() == 4 {
            return;
        }
        for (li, l) in letters.iter().enumerate() {
            if let Some(&p) = cur.last() {
                if letters[p].3 != l.2 {
                    continue;
                }
            }
            cur.push(li);
            rec(letters, cur, out, seen);
            cur.pop();
        }
    }
    rec(&letters, &mut Vec::new(), &mut words, &mut seen);
    let mut names = Vec::new();
    let mut traces = Vec::new();
    for w in &words {
        // the product applies the first letter first
        let mut prod: Option<MatrixJet<F>> = None;
        let mut name = String::new();
        for &li in w {
            let (mi, tr, _, _) = letters[li];
            let b = maps[mi].block.as_ref().unwrap();
            let m = if tr { b.transpose() } else { b.clone() };
            prod = Some(match prod {
                None => m,
                Some(p) => m.mul_t(&p),
            });
            name.push_str(&maps[mi].key);
            if tr {
                name.push('\'');
            }
            name.push(' ');
        }
        let p = prod.unwrap();
        let coeffs: Vec<F> = p.coeffs().iter().map(|c| c.trace()).collect();
        traces.push(Jet::new(p.base_point().clone(), coeffs));
        names.push(format!("tr {}", name.trim_end()));
    }
    InvariantFingerprint::Partial { words: names, traces }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Equivalent,
    Inequivalent,
    UndecidedPartial,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Equivalent => "equivalent",
            Verdict::Inequivalent => "inequivalent",
            Verdict::UndecidedPartial => "undecided-partial",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub verdict: Verdict,
    pub reason: String,
    /// Smallest distance found between the normalized invariants.
    pub distance: f64,
    /// Row signs realizing the equivalence (multiplicity-one case).
    pub signs: Option<Vec<i64>>,
}

/// Compares two normal frames of the same base point.
pub fn compare_frames<F: Field>(a: &CanonicalFrame<F>, b: &CanonicalFrame<F>, tol: f64) -> EquivalenceReport {
    let inequivalent = |reason: String| EquivalenceReport { verdict: Verdict::Inequivalent, reason, distance: f64::INFINITY, signs: None };
    if a.diagram() != b.diagram() {
        return inequivalent(format!("diagrams differ: {} vs {}", a.diagram(), b.diagram()));
    }
    if a.sgn != b.sgn {
        return inequivalent("velocity forms have opposite signs".into());
    }
    let ma = curvature_maps(a);
    let mb = curvature_maps(b);
    let scale = 1.0 + ma.iter().chain(&mb).filter_map(|m| m.block.as_ref()).map(|x| x.max_abs()).fold(0.0, f64::max);
    let d = a.model.diagram();
    if d.reduced().multiplicity_one() {
        let rows = d.num_rows();
        let mut best = f64::INFINITY;
        let mut best_signs = None;
        for mask in 0..(1u64 << (rows - 1)) {
            let s: Vec<i64> = (0..rows).map(|r| if r > 0 && mask >> (r - 1) & 1 == 1 { -1 } else { 1 }).collect();
            let mut dist: f64 = 0.0;
            for (x, y) in ma.iter().zip(&mb) {
                let (Some(bx), Some(by)) = (&x.block, &y.block) else { continue };
                let sign = s[x.b.row - 1] * s[x.a.row - 1];
                let by = if sign < 0 { by.neg() } else { by.clone() };
                dist = dist.max(bx.sub_t(&by).max_abs());
            }
            if dist < best {
                best = dist;
                best_signs = Some(s);
            }
        }
        if best <= tol * scale {
            return EquivalenceReport { verdict: Verdict::Equivalent, reason: "normalized structure functions agree up to row signs".into(), distance: best, signs: best_signs };
        }
        return EquivalenceReport { verdict: Verdict::Inequivalent, reason: "no row-sign pattern matches the normalized structure functions".into(), distance: best, signs: None };
    }
    let fa = invariant_fingerprint(a, tol);
    let fb = invariant_fingerprint(b, tol);
    match fa.distance(&fb) {
        Some(dist) if dist <= tol * scale.max(1.0 + fa.max_abs()) => {
            EquivalenceReport { verdict: Verdict::UndecidedPartial, reason: "trace invariants agree; they are not complete for multiplicities above one".into(), distance: dist, signs: None }
        }
        Some(dist) => EquivalenceReport { verdict: Verdict::Inequivalent, reason: "trace invariants differ".into(), distance: dist, signs: None },
        None => inequivalent("curvature supports differ".into()),
    }
}

pub fn equivalence_test(c1: &CurveSpec, c2: &CurveSpec, cfg: &RunConfig) -> Result<EquivalenceReport> {
    use crate::scalar::Float;
    if c1.t0() != c2.t0() {
        return Err(Error::OrderMismatch("curves are expanded at different base points".into()));
    }
    let a1 = analyze(c1, cfg)?;
    let a2 = analyze(c2, cfg)?;
    if a1.diagram != a2.diagram {
        return Ok(EquivalenceReport { verdict: Verdict::Inequivalent, reason: format!("diagrams differ: {} vs {}", a1.diagram, a2.diagram), distance: f64::INFINITY, signs: None });
    }
    let model = SymplecticModel::from_reduced(&a1.diagram);
    let ns = NormalizationSpace::phi0(&model)?;
    let p = cfg.precision_bits;
    let f1 = normalize::<Float>(c1, &ns, None, cfg, p)?;
    let f2 = normalize::<Float>(c2, &ns, None, cfg, p)?;
    Ok(compare_frames(&f1, &f2, cfg.residual_tol()))
}

/// Jet-mode reconstruction: the solution of `Gamma' = Gamma C`.
pub fn reconstruct<F: Field>(c: &MatrixJet<F>, gamma0: Matrix<F>) -> MatrixJet<F> {
    solve_right(c, gamma0)
}

/// Sampled frame path from fixed-step fourth order integration.
#[derive(Clone, Debug)]
pub struct SampledPath<F: Field> {
    pub times: Vec<F>,
    pub frames: Vec<Matrix<F>>,
    /// `max |Gamma^T J Gamma - Gamma_0^T J Gamma_0|` after each step.
    pub defects: Vec<f64>,
}

/// Integrates `Gamma' = Gamma C(t)` from `t0` in `steps` steps of size `h`,
/// failing once the symplectic defect exceeds `budget`.
pub fn reconstruct_sampled<F: RealField>(
    c: impl Fn(&F) -> Matrix<F>,
    gamma0: Matrix<F>,
    form: &Matrix<F>,
    t0: F,
    h: F,
    steps: usize,
    budget: f64,
) -> Result<SampledPath<F>> {
    let ctx = t0.ctx();
    let j0 = gamma0.transpose().mul(form).mul(&gamma0);
    let half = F::from_rational(ctx, &Rational::from((1, 2)));
    let sixth = F::from_rational(ctx, &Rational::from((1, 6)));
    let two = F::from_i64(ctx, 2);
    let mut t = t0;
    let mut g = gamma0;
    let mut out = SampledPath { times: vec![t.clone()], frames: vec![g.clone()], defects: vec![0.0] };
    for step in 1..=steps {
        let th = t.add(&h.mul(&half));
        let t1 = t.add(&h);
        let k1 = g.mul(&c(&t));
        let k2 = g.add(&k1.scale(&h.mul(&half))).mul(&c(&th));
        let k3 = g.add(&k2.scale(&h.mul(&half))).mul(&c(&th));
        let k4 = g.add(&k3.scale(&h)).mul(&c(&t1));
        let incr = k1.add(&k2.scale(&two)).add(&k3.scale(&two)).add(&k4).scale(&h.mul(&sixth));
        g = g.add(&incr);
        t = t1;
        let defect = g.transpose().mul(form).mul(&g).sub(&j0).max_abs();
        out.times.push(t.clone());
        out.frames.push(g.clone());
        out.defects.push(defect);
        if defect > budget {
            return Err(Error::StepSizeTooLarge { step, defect });
        }
    }
    Ok(out)
}

/// A test curve together with the data it was generated from.
#[derive(Clone, Debug)]
pub struct GeneratedCurve {
    pub curve: CurveSpec,
    pub model: SymplecticModel,
    /// `n(t)` in model coordinates (order `K - 1`).
    pub n: MatrixJet<Rational>,
    /// The exact normal frame in model coordinates (order `K`).
    pub gamma: MatrixJet<Rational>,
}

impl GeneratedCurve {
    /// Exact normal frame of the generated curve, `Gamma` itself.
    pub fn exact_frame(&self, ns: &NormalizationSpace) -> Result<CanonicalFrame<Rational>> {
        normalize_lift(ns, &self.gamma, None, 0.0)
    }
}

/// Curve `Gamma(t) V^0` with `Gamma' = Gamma (delta + n)`, `Gamma(t0) = I`.
pub fn curve_from_structure(model: &SymplecticModel, n: MatrixJet<Rational>) -> Result<GeneratedCurve> {
    let delta = model.delta::<Rational>(());
    let mut c = n.clone();
    *c.coeff_mut(0) = c.coeff(0).add(&delta);
    let gamma = solve_right(&c, Matrix::identity((), model.dim()));
    let p = model.std_permutation::<Rational>(());
    let frame = gamma.lmul_const(&p).select_columns(&model.mirror_indices());
    Ok(GeneratedCurve { curve: CurveSpec::new(frame)?, model: model.clone(), n, gamma })
}

/// Random polynomial `n(t)` in `N` of degree `poly_degree`, as a jet of
/// order `order - 1`.
pub fn random_n(ns: &NormalizationSpace, rng: &mut impl Rng, poly_degree: usize, order: usize) -> MatrixJet<Rational> {
    let model = ns.model();
    let dim = model.dim();
    let mut coeffs = vec![Matrix::<Rational>::zeros((), dim, dim); order];
    for k in ns.n_degrees() {
        let basis = ns.n_basis(k);
        for col in 0..basis.cols() {
            let x = model.from_coords((), k, &basis.column(col));
            for (p, c) in coeffs.iter_mut().enumerate().take(poly_degree + 1) {
                let r = random_rational(rng);
                if p < order {
                    c.add_assign(&x.scale(&r));
                }
            }
        }
    }
    MatrixJet::from_coeffs(Rational::new(), coeffs)
}

pub fn random_curve(diagram: &ReducedDiagram, seed: u64, poly_degree: usize, order: usize) -> Result<GeneratedCurve> {
    let model = SymplecticModel::from_reduced(diagram);
    let ns = NormalizationSpace::phi0(&model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = random_n(&ns, &mut rng, poly_degree, order);
    curve_from_structure(&model, n)
}

/// The flat curve `exp(t delta) V^0`.
pub fn flat_curve(diagram: &ReducedDiagram, order: usize) -> Result<GeneratedCurve> {
    let model = SymplecticModel::from_reduced(diagram);
    let dim = model.dim();
    curve_from_structure(&model, MatrixJet::zeros(Rational::new(), dim, dim, order - 1))
}

/// Random rational element of `Sp(2m)` in the standard basis, a product
/// of shears and a block-diagonal factor.
pub fn random_symplectic(m: usize, rng: &mut impl Rng) -> Matrix<Rational> {
    let sym = |rng: &mut dyn rand::RngCore| {
        let mut s = Matrix::<Rational>::zeros((), m, m);
        for i in 0..m {
            for j in i..m {
                let v = Rational::from((rng.gen_range(-3i64..=3), rng.gen_range(1i64..=3)));
                s[(i, j)] = v.clone();
                s[(j, i)] = v;
            }
        }
        s
    };
    let id = Matrix::<Rational>::identity((), m);
    let zero = Matrix::<Rational>::zeros((), m, m);
    let upper = |s: &Matrix<Rational>| id.hstack(s).vstack(&zero.hstack(&id));
    let lower = |s: &Matrix<Rational>| id.hstack(&zero).vstack(&s.hstack(&id));
    let mut a = Matrix::<Rational>::identity((), m);
    for i in 0..m {
        for j in 0..i {
            a[(i, j)] = Rational::from((rng.gen_range(-2i64..=2), rng.gen_range(1i64..=2)));
        }
        if rng.gen_bool(0.5) {
            a[(i, i)] = Rational::from(-1);
        }
    }
    let a_inv_t = linalg::inverse(&a, 0.0).expect("triangular with unit diagonal").transpose();
    let diag = a.hstack(&zero).vstack(&zero.hstack(&a_inv_t));
    let s1 = sym(rng);
    let s2 = sym(rng);
    let s3 = sym(rng);
    upper(&s1).mul(&lower(&s2)).mul(&diag).mul(&upper(&s3))
}

/// `Gamma_b(t0)^{-1} Gamma_a(t0)` for two lifts of the same curve.
pub fn residual_between<F: Field>(a: &MatrixJet<F>, b: &MatrixJet<F>, tol: f64) -> Option<Matrix<F>> {
    linalg::inverse(b.value(), tol).map(|inv| inv.mul(a.value()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Float;

    fn diagram(rows: &[(usize, usize)]) -> ReducedDiagram {
        ReducedDiagram::new(rows.to_vec()).unwrap()
    }

    #[test]
    fn constant_and_exponential_frames() {
        let model = SymplecticModel::from_reduced(&diagram(&[(2, 1)]));
        let j = model.form::<Rational>(());
        let a = Matrix::<Rational>::identity((), 4);
        let c = structure_function(&MatrixJet::constant(Rational::new(), a, 4), &j, 0.0).unwrap();
        assert!(c.is_zero());
        let delta = model.delta::<Rational>(());
        let g = reconstruct(&MatrixJet::constant(Rational::new(), delta.clone(), 5), Matrix::identity((), 4));
        let c = structure_function(&g, &j, 0.0).unwrap();
        assert!(c.coeffs().iter().enumerate().all(|(k, x)| if k == 0 { x == &delta } else { x.is_zero() }));
    }

    #[test]
    fn flat_curve_normalizes_to_zero() {
        let d = diagram(&[(2, 1), (1, 1)]);
        let g = flat_curve(&d, 9).unwrap();
        let ns = NormalizationSpace::phi0(&g.model).unwrap();
        let cfg = RunConfig::default();
        let f = normalize::<Float>(&g.curve, &ns, None, &cfg, 192).unwrap();
        for m in curvature_maps(&f) {
            if let Some(b) = m.block {
                assert!(b.max_abs() < 1e-40, "{} {}", m.key, b.max_abs());
            }
        }
        assert_eq!(f.trace.last().unwrap().residual_gauge_dim, ns.prolongation().dim_at(0));
    }

    #[test]
    fn exact_generated_frame_is_already_normal() {
        let d = diagram(&[(2, 1)]);
        let g = random_curve(&d, 7, 2, 8).unwrap();
        let ns = NormalizationSpace::phi0(&g.model).unwrap();
        let f = g.exact_frame(&ns).unwrap();
        assert!(f.trace.iter().all(|s| s.correction == 0.0));
        assert_eq!(f.n_dense().unwrap().truncate(3), g.n.truncate(3));
    }

    #[test]
    fn random_symplectic_preserves_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_symplectic(3, &mut rng);
        let j = SymplecticModel::std_form::<Rational>((), 3);
        assert_eq!(a.transpose().mul(&j).mul(&a), j);
    }
}
