//! Curves in the Lagrangian Grassmannian, given as jets of frames.
//!
//! A curve is stored exactly: `frame` is a rational `2m x m` matrix jet in
//! the standard basis `(e_1..e_m, f_1..f_m)`. Flag dimensions, regularity
//! and the first (Darboux) part of the adapted lift are computed in exact
//! arithmetic. Only the symbol conjugation, which needs square roots, runs
//! on a float backend.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::diagram::{Cell, ReducedDiagram, YoungDiagram};
use crate::error::{Error, Result};
use crate::jet::{Jet, MatrixJet};
use crate::linalg;
use crate::matrix::Matrix;
use crate::model::SymplecticModel;
use crate::normal::GradedJet;
use crate::scalar::{parse_rational, rational_string, Field, Rational, RealField};

#[derive(Clone, Debug, PartialEq)]
pub struct CurveSpec {
    m: usize,
    frame: MatrixJet<Rational>,
}

impl CurveSpec {
    /// Validates shape, rank at the base point, and the Lagrangian
    /// condition coefficient by coefficient.
    pub fn new(frame: MatrixJet<Rational>) -> Result<Self> {
        let m = frame.cols();
        if m == 0 || frame.rows() != 2 * m {
            return Err(Error::BadFormat(format!("frame has shape {}x{}, expected 2m x m", frame.rows(), frame.cols())));
        }
        let j = SymplecticModel::std_form::<Rational>((), m);
        let s = frame.transpose().rmul_const(&j).mul_t(&frame);
        for (k, c) in s.coeffs().iter().enumerate() {
            for a in 0..m {
                for b in a + 1..m {
                    if !c[(a, b)].is_zero() {
                        return Err(Error::NotLagrangian { i: a, j: b, value: format!("{} (coefficient {k})", rational_string(&c[(a, b)])) });
                    }
                }
            }
        }
        if linalg::rank(frame.value(), 0.0) < m {
            return Err(Error::RankDeficientFrame);
        }
        Ok(CurveSpec { m, frame })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn t0(&self) -> &Rational {
        self.frame.base_point()
    }

    pub fn order(&self) -> usize {
        self.frame.order()
    }

    pub fn frame(&self) -> &MatrixJet<Rational> {
        &self.frame
    }

    /// The curve `A Lambda(t)` for `A` in `Sp(2m)` (standard basis).
    pub fn transform(&self, a: &Matrix<Rational>) -> Result<Self> {
        CurveSpec::new(self.frame.lmul_const(a))
    }

    /// Same polynomial frame expanded at another base point.
    pub fn recenter(&self, t: &Rational) -> Result<Self> {
        CurveSpec::new(self.frame.recenter(t))
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |s: String| Error::BadFormat(s);
        if let Some(space) = v.get("space").and_then(Value::as_str) {
            if space != "lagrangian" {
                return Err(bad(format!("expected a Lagrangian curve, got space {space:?}")));
            }
        }
        let m = v.get("m").and_then(Value::as_u64).ok_or_else(|| bad("missing m".into()))? as usize;
        let t0 = match v.get("t0") {
            None => Rational::new(),
            Some(x) => parse_number(x)?,
        };
        let cols = v.get("frame_columns").and_then(Value::as_array).ok_or_else(|| bad("missing frame_columns".into()))?;
        if m == 0 || cols.len() != m {
            return Err(bad(format!("m = {m} but {} frame columns", cols.len())));
        }
        let mut entries: Vec<Vec<Vec<Rational>>> = Vec::new();
        let mut longest = 0;
        for (j, c) in cols.iter().enumerate() {
            let c = c.as_array().ok_or_else(|| bad(format!("column {j} is not an array")))?;
            if c.len() != 2 * m {
                return Err(bad(format!("column {j} has {} entries, expected {}", c.len(), 2 * m)));
            }
            let mut col = Vec::new();
            for e in c {
                let poly: Vec<Rational> = match e {
                    Value::Array(xs) => xs.iter().map(parse_number).collect::<Result<_>>()?,
                    other => vec![parse_number(other)?],
                };
                if poly.is_empty() {
                    return Err(bad(format!("empty coefficient list in column {j}")));
                }
                longest = longest.max(poly.len());
                col.push(poly);
            }
            entries.push(col);
        }
        let order = match v.get("jet_order") {
            Some(k) => k.as_u64().ok_or_else(|| bad("jet_order must be an integer".into()))? as usize,
            None => longest - 1,
        };
        if longest > order + 1 {
            return Err(bad(format!("polynomial degree {} exceeds jet_order {order}", longest - 1)));
        }
        let coeffs = (0..=order)
            .map(|k| Matrix::from_fn((), 2 * m, m, |i, j| entries[j][i].get(k).cloned().unwrap_or_default()))
            .collect();
        CurveSpec::new(MatrixJet::from_coeffs(t0, coeffs))
    }

    pub fn to_json(&self) -> Value {
        let m = self.m;
        let cols: Vec<Value> = (0..m)
            .map(|j| {
                let entries: Vec<Value> = (0..2 * m)
                    .map(|i| {
                        let mut c: Vec<String> = self.frame.coeffs().iter().map(|x| rational_string(&x[(i, j)])).collect();
                        while c.len() > 1 && c.last().is_some_and(|s| s == "0") {
                            c.pop();
                        }
                        json!(c)
                    })
                    .collect();
                json!(entries)
            })
            .collect();
        json!({
            "schema": "symcurve/1",
            "space": "lagrangian",
            "m": m,
            "t0": rational_string(self.t0()),
            "jet_order": self.order(),
            "frame_columns": cols,
        })
    }
}

pub(crate) fn parse_number(v: &Value) -> Result<Rational> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) => parse_rational(&n.to_string()),
        _ => Err(Error::BadFormat(format!("expected a number, got {v}"))),
    }
}

pub fn load_curve(text: &str) -> Result<CurveSpec> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::BadFormat(e.to_string()))?;
    CurveSpec::from_json(&v)
}

/// Matrix of `l -> sigma(l'(t), l)` in the column basis of the frame.
pub fn velocity_form(curve: &CurveSpec, t: &Rational) -> Matrix<Rational> {
    let m = curve.m;
    let Ok(d) = curve.frame.derivative() else {
        return Matrix::zeros((), m, m);
    };
    let j = SymplecticModel::std_form::<Rational>((), m);
    d.eval(t).transpose().mul(&j).mul(&curve.frame.eval(t))
}

/// `(positive, negative, zero)` counts of a symmetric rational matrix, by
/// exact congruence diagonalization.
pub fn inertia(q: &Matrix<Rational>) -> (usize, usize, usize) {
    let mut a = q.clone();
    let mut n = a.rows();
    let (mut pos, mut neg) = (0, 0);
    while n > 0 {
        let piv = (0..n).find(|&i| !a[(i, i)].is_zero());
        let p = match piv {
            Some(p) => p,
            None => {
                let Some((i, j)) = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).find(|&(i, j)| !a[(i, j)].is_zero()) else {
                    break;
                };
                // replace row/column i by i + j; the new diagonal entry is 2 a_ij
                for k in 0..n {
                    let v = a[(j, k)].clone();
                    a[(i, k)] += v;
                }
                for k in 0..n {
                    let v = a[(k, j)].clone();
                    a[(k, i)] += v;
                }
                i
            }
        };
        let d = a[(p, p)].clone();
        if d.cmp0() == std::cmp::Ordering::Greater {
            pos += 1;
        } else {
            neg += 1;
        }
        let keep: Vec<usize> = (0..n).filter(|&k| k != p).collect();
        let next = Matrix::from_fn((), n - 1, n - 1, |r, c| {
            let (i, j) = (keep[r], keep[c]);
            let mut v = a[(i, j)].clone();
            v -= Rational::from(&a[(i, p)] * &a[(p, j)]) / &d;
            v
        });
        a = next;
        n -= 1;
    }
    (pos, neg, q.rows() - pos - neg)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    Nondecreasing,
    Nonincreasing,
    Indefinite,
}

impl Monotonicity {
    pub fn from_inertia((pos, neg, _): (usize, usize, usize)) -> Self {
        match (pos > 0, neg > 0) {
            (true, true) => Monotonicity::Indefinite,
            (false, true) => Monotonicity::Nonincreasing,
            _ => Monotonicity::Nondecreasing,
        }
    }

    /// `+1` for nondecreasing, `-1` for nonincreasing.
    pub fn sign(self) -> Option<i64> {
        match self {
            Monotonicity::Nondecreasing => Some(1),
            Monotonicity::Nonincreasing => Some(-1),
            Monotonicity::Indefinite => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Monotonicity::Nondecreasing => "nondecreasing",
            Monotonicity::Nonincreasing => "nonincreasing",
            Monotonicity::Indefinite => "indefinite",
        }
    }
}

/// Osculating flag near `t0`. Index `j` of `extensions` spans
/// `Lambda^(-j)`, index `j` of `contractions` spans `Lambda^(j)`; both
/// start with `Lambda` itself at `j = 0`.
#[derive(Clone, Debug)]
pub struct FlagJets {
    pub extensions: Vec<MatrixJet<Rational>>,
    pub contractions: Vec<MatrixJet<Rational>>,
    /// Coefficients of the contraction bases in the frame columns.
    pub contraction_coeffs: Vec<MatrixJet<Rational>>,
}

impl FlagJets {
    /// `dim Lambda^(j)` at the base point, for any integer `j`.
    pub fn dim(&self, j: i32) -> usize {
        if j <= 0 {
            let i = (-j) as usize;
            self.extensions.get(i).unwrap_or_else(|| self.extensions.last().unwrap()).cols()
        } else {
            self.contractions.get(j as usize).map_or(0, |c| c.cols())
        }
    }

    pub fn depth(&self) -> usize {
        self.extensions.len() - 1
    }
}

/// Independent columns at the base point.
fn span_jet<F: Field>(a: &MatrixJet<F>, tol: f64) -> MatrixJet<F> {
    let idx = linalg::independent_columns(a.value(), tol);
    a.select_columns(&idx)
}

/// Kernel of a matrix jet of constant rank, normalized on the free
/// columns found at the base point.
pub(crate) fn kernel_jet<F: Field>(a: &MatrixJet<F>, tol: f64) -> Result<MatrixJet<F>> {
    let n = a.cols();
    let t0 = a.base_point().clone();
    let ctx = a.ctx();
    let piv = linalg::rref(a.value(), tol).pivots;
    let free: Vec<usize> = (0..n).filter(|c| !piv.contains(c)).collect();
    let order = a.order();
    if free.is_empty() {
        return Ok(MatrixJet::zeros(t0, n, 0, order));
    }
    if piv.is_empty() {
        return Ok(MatrixJet::identity(t0, n, order));
    }
    let rows = linalg::independent_columns(&a.value().transpose(), tol);
    let sub = a.select_rows(&rows);
    let s = sub.select_columns(&piv);
    let t = sub.select_columns(&free);
    let kp = s.inverse(tol)?.mul_t(&t).neg();
    let coeffs = (0..=kp.order())
        .map(|k| {
            let mut m = Matrix::zeros(ctx, n, free.len());
            for (r, &p) in piv.iter().enumerate() {
                for c in 0..free.len() {
                    m[(p, c)] = kp.coeff(k)[(r, c)].clone();
                }
            }
            if k == 0 {
                for (c, &f) in free.iter().enumerate() {
                    m[(f, c)] = F::one(ctx);
                }
            }
            m
        })
        .collect();
    Ok(MatrixJet::from_coeffs(t0, coeffs))
}

pub fn osculating_flag(curve: &CurveSpec) -> Result<FlagJets> {
    let m = curve.m;
    let f = &curve.frame;
    let j_std = SymplecticModel::std_form::<Rational>((), m);
    let mut extensions = vec![f.clone()];
    let mut deriv = f.clone();
    loop {
        let last = extensions.last().unwrap();
        if last.cols() == 2 * m {
            break;
        }
        let Ok(d) = deriv.derivative() else {
            return Err(Error::JetOrderTooLow(format!("flag still growing (dim {}) when the jet ran out", last.cols())));
        };
        deriv = d;
        let next = span_jet(&last.hstack(&deriv), 0.0);
        if next.cols() == last.cols() {
            break;
        }
        extensions.push(next);
    }
    let mut contractions = vec![f.clone()];
    let mut contraction_coeffs = vec![MatrixJet::identity(f.base_point().clone(), m, f.order())];
    for ext in extensions.iter().skip(1) {
        let a = ext.transpose().rmul_const(&j_std).mul_t(f);
        let k = kernel_jet(&a, 0.0)?;
        contractions.push(f.mul_t(&k));
        contraction_coeffs.push(k);
    }
    Ok(FlagJets { extensions, contractions, contraction_coeffs })
}

/// `dim Lambda^(-j)(t)` for `j = 0, 1, ...` until the dimension stops
/// growing, from the polynomial frame evaluated at `t`.
pub fn extension_dims_at(curve: &CurveSpec, t: &Rational) -> Vec<usize> {
    let m = curve.m;
    let mut dims = Vec::new();
    let mut stack = curve.frame.eval(t);
    let mut d = curve.frame.clone();
    dims.push(linalg::rank(&stack, 0.0));
    while dims.last() != Some(&(2 * m)) {
        let Ok(next) = d.derivative() else { break };
        d = next;
        stack = stack.hstack(&d.eval(t));
        let r = linalg::rank(&stack, 0.0);
        dims.push(r);
    }
    // a repeated value before 2m means the flag has stabilized
    if let Some(pos) = dims.windows(2).position(|w| w[0] == w[1]) {
        let tail_grows = dims[pos + 1..].windows(2).any(|w| w[1] > w[0]);
        if !tail_grows {
            dims.truncate(pos + 1);
        }
    }
    dims
}

/// Away from `t0` the truncated jet is only Lagrangian up to its order, so
/// sampled ranks and signs are decided numerically at this relative level.
pub const SAMPLE_TOL: f64 = 1e-8;

/// Extension dimensions at a sample point, with columns normalized and
/// singular values below `SAMPLE_TOL` treated as zero.
pub fn sampled_extension_dims(curve: &CurveSpec, t: &Rational) -> Vec<usize> {
    let m = curve.m;
    let normalized = |a: Matrix<Rational>| {
        let mut f = a.convert::<f64>((), |x| x.to_f64());
        for j in 0..f.cols() {
            let n = f.column(j).iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                let c: Vec<f64> = f.column(j).iter().map(|x| x / n).collect();
                f.set_column(j, &c);
            }
        }
        f
    };
    let rank = |a: &Matrix<f64>| linalg::singular_values(a).iter().filter(|s| **s > SAMPLE_TOL).count();
    let mut stack = normalized(curve.frame.eval(t));
    let mut d = curve.frame.clone();
    let mut dims = vec![rank(&stack)];
    while dims.last() != Some(&(2 * m)) {
        let Ok(next) = d.derivative() else { break };
        d = next;
        stack = stack.hstack(&normalized(d.eval(t)));
        dims.push(rank(&stack));
    }
    if let Some(pos) = dims.windows(2).position(|w| w[0] == w[1]) {
        if !dims[pos + 1..].windows(2).any(|w| w[1] > w[0]) {
            dims.truncate(pos + 1);
        }
    }
    dims
}

/// Inertia from eigenvalues, with `|lambda| <= SAMPLE_TOL * (1 + |Q|)` as zero.
pub fn sampled_inertia(q: &Matrix<Rational>) -> (usize, usize, usize) {
    let f = q.convert::<f64>((), |x| x.to_f64());
    let cut = SAMPLE_TOL * (1.0 + f.max_abs());
    let ev = linalg::symmetric_eigenvalues(&f);
    let pos = ev.iter().filter(|&&e| e > cut).count();
    let neg = ev.iter().filter(|&&e| e < -cut).count();
    (pos, neg, ev.len() - pos - neg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    pub t0: Rational,
    /// Points besides `t0` where ranks were compared.
    pub sample_points: Vec<Rational>,
    /// Extension dimensions at `t0` followed by each sample point.
    pub sampled_dims: Vec<Vec<usize>>,
    pub equiregular: bool,
    pub ample: bool,
    /// Smallest `p` with `dim Lambda^(-p) = 2m`.
    pub ample_witness: Option<usize>,
    pub monotone: Monotonicity,
    pub inertia: Vec<(usize, usize, usize)>,
    /// Eigenvalues of the velocity form at `t0` (double precision witness).
    pub eigenvalues: Vec<f64>,
    pub young: Option<YoungDiagram>,
    pub reduced: Option<ReducedDiagram>,
}

/// `t0` offsets drawn from `k/4096` with `0 < |k| <= 8`; close enough that
/// the truncation error of the jet stays far below the sample tolerance.
pub fn default_sample_points(t0: &Rational, seed: u64) -> Vec<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out: Vec<Rational> = Vec::new();
    while out.len() < 4 {
        let k: i64 = rng.gen_range(1..=8) * if rng.gen_bool(0.5) { 1 } else { -1 };
        let t = Rational::from(t0 + Rational::from((k, 4096)));
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

pub fn regularity_report(curve: &CurveSpec, sample_points: &[Rational]) -> RegularityReport {
    let t0 = curve.t0().clone();
    let m = curve.m;
    let points: Vec<Rational> = std::iter::once(t0.clone()).chain(sample_points.iter().cloned()).collect();
    let sampled_dims: Vec<Vec<usize>> =
        points.iter().enumerate().map(|(i, t)| if i == 0 { extension_dims_at(curve, t) } else { sampled_extension_dims(curve, t) }).collect();
    let equiregular = sampled_dims.iter().all(|d| d == &sampled_dims[0]);
    let dims0 = &sampled_dims[0];
    let ample_witness = dims0.iter().position(|&d| d == 2 * m);
    let ample = ample_witness.is_some() && sampled_dims.iter().all(|d| d.last() == Some(&(2 * m)));
    let inertia: Vec<(usize, usize, usize)> =
        points.iter().enumerate().map(|(i, t)| if i == 0 { inertia(&velocity_form(curve, t)) } else { sampled_inertia(&velocity_form(curve, t)) }).collect();
    let signs: Vec<Monotonicity> = inertia.iter().map(|&i| Monotonicity::from_inertia(i)).collect();
    let monotone = if signs.contains(&Monotonicity::Indefinite) {
        Monotonicity::Indefinite
    } else {
        let inc = inertia.iter().any(|i| i.0 > 0);
        let dec = inertia.iter().any(|i| i.1 > 0);
        if inc && dec {
            Monotonicity::Indefinite
        } else if dec {
            Monotonicity::Nonincreasing
        } else {
            Monotonicity::Nondecreasing
        }
    };
    let q = velocity_form(curve, &t0).convert::<f64>((), |x| x.to_f64());
    let eigenvalues = linalg::symmetric_eigenvalues(&q);
    let young = if ample {
        let cols: Vec<usize> = dims0.windows(2).map(|w| w[1] - w[0]).collect();
        YoungDiagram::from_columns(cols).ok()
    } else {
        None
    };
    let reduced = young.as_ref().map(|y| y.reduce());
    RegularityReport { t0, sample_points: sample_points.to_vec(), sampled_dims, equiregular, ample, ample_witness, monotone, inertia, eigenvalues, young, reduced }
}

/// Regularity data required by the lift.
#[derive(Clone, Debug)]
pub struct CurveAnalysis {
    pub report: RegularityReport,
    pub diagram: ReducedDiagram,
    /// `+1` nondecreasing, `-1` nonincreasing.
    pub sgn: i64,
}

pub fn analyze(curve: &CurveSpec, cfg: &RunConfig) -> Result<CurveAnalysis> {
    let samples = default_sample_points(curve.t0(), cfg.seed);
    let report = regularity_report(curve, &samples);
    let Some(sgn) = report.monotone.sign() else {
        return Err(Error::NotMonotone(format!("velocity form inertia {:?}, eigenvalues at t0 {:?}", report.inertia, report.eigenvalues)));
    };
    if !report.equiregular {
        return Err(Error::NotEquiregular(format!("extension dimensions {:?} at t0 and samples {:?}", report.sampled_dims, report.sample_points.iter().map(rational_string).collect::<Vec<_>>())));
    }
    if !report.ample {
        return Err(Error::NotAmple(format!(
            "osculating flag stops at dimension {:?} < {}; pass to the quotient of the top extension by its skew complement and analyze that curve",
            report.sampled_dims[0].last(),
            2 * curve.m
        )));
    }
    let diagram = report.reduced.clone().ok_or_else(|| Error::RegularityFailed("dimension jumps do not form a Young diagram".into()))?;
    Ok(CurveAnalysis { report, diagram, sgn })
}

/// Exact Darboux frame adapted to the osculating flag.
#[derive(Clone, Debug)]
pub struct DarbouxLift {
    pub model: SymplecticModel,
    pub sgn: i64,
    /// Conformal factor: `Gamma^T J_std Gamma = kappa J_model`.
    pub kappa: i64,
    /// Standard coordinates, columns in model order.
    pub gamma: MatrixJet<Rational>,
    /// `Gamma^{-1} Gamma'` in model coordinates.
    pub c: MatrixJet<Rational>,
}

pub fn darboux_lift(curve: &CurveSpec, analysis: &CurveAnalysis) -> Result<DarbouxLift> {
    darboux_lift_in_chart(curve, analysis, None)
}

/// Darboux lift whose complementary columns stay in the Lagrangian
/// `transversal` (columns spanning it, standard coordinates). Without one
/// the Euclidean complement `J Lambda(t0)` is used.
pub fn darboux_lift_in_chart(curve: &CurveSpec, analysis: &CurveAnalysis, transversal: Option<&Matrix<Rational>>) -> Result<DarbouxLift> {
    let model = SymplecticModel::from_reduced(&analysis.diagram);
    let d = model.diagram();
    let m = curve.m;
    let p1 = d.p1();
    let kappa = model.convention_sign() * analysis.sgn;
    let flag = osculating_flag(curve)?;
    let f = &curve.frame;
    let t0 = f.base_point().clone();
    let dim_v = |j: i32| model.degree_indices(j).len();

    // Columns of Y, deepest degree first; each group completes ker_d.
    let mut groups: Vec<(i32, Vec<MatrixJet<Rational>>)> = Vec::new();
    let mut chosen = Matrix::<Rational>::zeros((), m, 0);
    for deg in (0..p1 as i32).rev() {
        let cands: MatrixJet<Rational> = if deg == 0 {
            MatrixJet::identity(t0.clone(), m, f.order())
        } else {
            flag.contraction_coeffs.get(deg as usize).cloned().ok_or_else(|| Error::RegularityFailed(format!("no contraction of depth {deg}")))?
        };
        let need = dim_v(deg);
        let mut group = Vec::new();
        for c in 0..cands.cols() {
            if group.len() == need {
                break;
            }
            let col = cands.select_columns(&[c]);
            let trial = chosen.hstack(col.value());
            if linalg::rank(&trial, 0.0) == trial.cols() {
                chosen = trial;
                group.push(col);
            }
        }
        if group.len() != need {
            return Err(Error::RegularityFailed(format!("degree {deg}: found {} of {need} flag vectors", group.len())));
        }
        groups.push((deg, group));
    }
    let cols: Vec<MatrixJet<Rational>> = groups.iter().flat_map(|(_, g)| g.iter().cloned()).collect();
    let y = hstack_all(&cols);
    let u = f.mul_t(&y);
    let j_std = SymplecticModel::std_form::<Rational>((), m);
    // pairing P with P^T Lagrangian; the complementary columns lie in J P^T
    let pair = match transversal {
        None => f.value().transpose(),
        Some(w) => {
            if w.rows() != 2 * m || w.cols() != m || !w.transpose().mul(&j_std).mul(w).is_zero() {
                return Err(Error::NotLagrangian { i: 0, j: 0, value: "transversal".into() });
            }
            w.transpose().mul(&j_std)
        }
    };
    let g = u.lmul_const(&pair);
    if linalg::rank(g.value(), 0.0) < m {
        return Err(Error::RegularityFailed("transversal meets the curve at the base point".into()));
    }
    let minv_t = g.inverse(0.0)?.transpose().scale(&Rational::from(-kappa));
    let w = minv_t.lmul_const(&j_std.mul(&pair.transpose()));
    let n = model.dim();
    let mut gamma_cols: Vec<Option<MatrixJet<Rational>>> = vec![None; n];
    let mut next = 0;
    for (deg, group) in &groups {
        for (q, &uidx) in model.degree_indices(*deg).iter().enumerate().take(group.len()) {
            let (a, k) = model.owner(uidx);
            let pidx = d.offset(d.m(a)) + k;
            gamma_cols[uidx] = Some(u.select_columns(&[next + q]));
            gamma_cols[pidx] = Some(w.select_columns(&[next + q]));
        }
        next += group.len();
    }
    let gamma = hstack_all(&gamma_cols.into_iter().map(|c| c.expect("every model vector assigned")).collect::<Vec<_>>());
    let j_model = model.form::<Rational>(());
    let gram = gamma.transpose().rmul_const(&j_std).mul_t(&gamma);
    let target = j_model.scale(&Rational::from(kappa));
    if gram.coeffs().iter().enumerate().any(|(k, c)| if k == 0 { c != &target } else { !c.is_zero() }) {
        return Err(Error::RegularityFailed("Darboux lift is not conformally symplectic".into()));
    }
    let ginv = gamma.transpose().rmul_const(&j_std).lmul_const(&j_model.scale(&Rational::from(-kappa)));
    let c = ginv.mul_t(&gamma.derivative()?);
    Ok(DarbouxLift { model, sgn: analysis.sgn, kappa, gamma, c })
}

pub(crate) fn hstack_all<F: Field>(cols: &[MatrixJet<F>]) -> MatrixJet<F> {
    let mut out = cols[0].clone();
    for c in &cols[1..] {
        out = out.hstack(c);
    }
    out
}

/// Degree-preserving conjugator `E` with `delta_t E = E delta`, built
/// row by row from the top degree down. New vectors are orthonormalized
/// for `<x, y>_j = (-1)^(j+1) sigma(delta_t^(2j+1) x, y)`, which is
/// positive definite on `V_j` for every monotone curve.
pub fn conjugate_symbol<F: RealField>(model: &SymplecticModel, dt: &MatrixJet<F>, band: (f64, f64)) -> Result<MatrixJet<F>> {
    let d = model.diagram();
    let ctx = dt.ctx();
    let t0 = dt.base_point().clone();
    let n = model.dim();
    let ord = dt.order();
    let p1 = d.p1();
    let mut pw = vec![MatrixJet::identity(t0.clone(), n, ord)];
    for i in 1..=2 * p1 {
        let next = pw[i - 1].mul_t(dt);
        pw.push(next);
    }
    let j_model = model.form::<F>(ctx);
    let mut vecs: HashMap<(usize, i32, usize), MatrixJet<F>> = HashMap::new();
    for j in (0..p1 as i32).rev() {
        let c = -(j + 1);
        let sign = if (j + 1) % 2 == 0 { F::one(ctx) } else { F::from_i64(ctx, -1) };
        let gram = pw[(2 * j + 1) as usize].transpose().rmul_const(&j_model).scale(&sign);
        let ip = |x: &MatrixJet<F>, y: &MatrixJet<F>| x.transpose().mul_t(&gram).mul_t(y).entry(0, 0);
        let mut current: Vec<MatrixJet<F>> = Vec::new();
        for row in 1..=d.num_rows() {
            if d.row_len(row) as i32 > j + 1 {
                for k in 0..d.mult(row) {
                    let v = dt.mul_t(&vecs[&(row, c - 1, k)]);
                    current.push(v.clone());
                    vecs.insert((row, c, k), v);
                }
            }
        }
        let idx = model.degree_indices(j);
        let scale = idx.iter().map(|&u| gram.value()[(u, u)].magnitude()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for row in 1..=d.num_rows() {
            if d.row_len(row) as i32 != j + 1 {
                continue;
            }
            for k in 0..d.mult(row) {
                let mut best: Option<(f64, MatrixJet<F>, Jet<F>)> = None;
                for &u in &idx {
                    let mut e = Matrix::zeros(ctx, n, 1);
                    e[(u, 0)] = F::one(ctx);
                    let mut res = MatrixJet::constant(t0.clone(), e, ord);
                    for _pass in 0..2 {
                        for w in &current {
                            let coef = ip(w, &res);
                            res = res.sub_t(&w.scale_jet(&coef));
                        }
                    }
                    let nrm = ip(&res, &res);
                    let val = nrm.coeff(0).to_f64();
                    if best.as_ref().is_none_or(|b| val.abs() > b.0.abs()) {
                        best = Some((val, res, nrm));
                    }
                }
                let (val, res, nrm) = best.ok_or_else(|| Error::RegularityFailed(format!("degree {j} has no basis vectors")))?;
                let ratio = val.abs() / scale;
                if ratio <= band.0 {
                    return Err(Error::PrecisionExhausted(format!("orthonormalization in degree {j}: residual norm ratio {ratio:e}")));
                }
                if val < 0.0 {
                    return Err(Error::NotMonotone(format!("symbol form in degree {j} is not positive ({val:e})")));
                }
                let inv = nrm.sqrt()?.inv(0.0)?;
                let v = res.scale_jet(&inv);
                current.push(v.clone());
                vecs.insert((row, c, k), v);
            }
        }
    }
    let mut cols: Vec<MatrixJet<F>> = Vec::with_capacity(n);
    for u in 0..n {
        let (a, k) = model.owner(u);
        let v = if a.col < 0 {
            vecs[&(a.row, a.col, k)].clone()
        } else {
            let s = if (a.col - 1) % 2 == 0 { F::one(ctx) } else { F::from_i64(ctx, -1) };
            pw[(2 * a.col - 1) as usize].mul_t(&vecs[&(a.row, -a.col, k)]).scale(&s)
        };
        cols.push(v);
    }
    Ok(hstack_all(&cols))
}

/// Inverse of a matrix jet `E` with `E^T J E = J`.
pub(crate) fn symplectic_inverse<F: Field>(model: &SymplecticModel, e: &MatrixJet<F>) -> MatrixJet<F> {
    let j = model.form::<F>(e.ctx());
    e.transpose().rmul_const(&j).lmul_const(&j).neg()
}

/// Normal-form lift `Gamma_0`: Darboux lift times the symbol conjugator.
#[derive(Clone, Debug)]
pub struct AdaptedLift<F: Field> {
    pub model: SymplecticModel,
    pub sgn: i64,
    pub kappa: i64,
    /// Standard coordinates.
    pub gamma: MatrixJet<F>,
    pub c: GradedJet<F>,
    /// Degree `-1` part of the Darboux structure function.
    pub delta_t: MatrixJet<F>,
    pub conjugator: MatrixJet<F>,
    /// `max |(C_0)_{-1} - delta|` before it was replaced by `delta`.
    pub delta_residual: f64,
    /// `max |Gamma^T J Gamma - kappa J|` over all coefficients.
    pub symplectic_residual: f64,
    /// `coefficient_growth` of the exact Darboux structure function.
    pub chart_growth: f64,
}

/// `max_k |C_k|^(1/k)`: the inverse radius suggested by the coefficients.
/// Large values mean the chart of the lift breaks down close to `t0` and
/// the floating-point phase will cancel that many digits per order.
pub fn coefficient_growth(c: &MatrixJet<Rational>) -> f64 {
    c.coeffs().iter().enumerate().skip(1).map(|(k, x)| x.max_abs().powf(1.0 / k as f64)).fold(0.0, f64::max)
}

/// Exact Lagrangian near the span of `w`, transversal to `Lambda(t0)`:
/// `J F0 + F0 H^{-1} T` with `H = F0^T F0` and `T` a rounded symmetric
/// matrix.
pub fn rational_transversal<F: RealField>(curve: &CurveSpec, w: &Matrix<F>, tol: f64) -> Option<Matrix<Rational>> {
    let m = curve.m;
    let f0 = curve.frame.value();
    let j = SymplecticModel::std_form::<Rational>((), m);
    let jf0 = j.mul(f0);
    let ctx = w.ctx();
    let basis = jf0.hstack(f0).to_field::<F>(ctx);
    let xz = linalg::solve(&basis, w, tol)?;
    let x = xz.submatrix(0, 0, m, m);
    let z = xz.submatrix(m, 0, m, m);
    let s = z.mul(&linalg::inverse(&x, tol)?);
    let h = f0.transpose().mul(f0);
    let t = h.to_field::<F>(ctx).mul(&s);
    // f64 addition commutes, so this is exactly symmetric
    let t_sym = Matrix::from_fn((), m, m, |a, b| Rational::from_f64((t[(a, b)].to_f64() + t[(b, a)].to_f64()) * 0.5).unwrap_or_default());
    let s_exact = linalg::inverse(&h, 0.0)?.mul(&t_sym);
    Some(jf0.add(&f0.mul(&s_exact)))
}

pub fn adapted_lift<F: RealField>(curve: &CurveSpec, cfg: &RunConfig, ctx: F::Ctx) -> Result<AdaptedLift<F>> {
    let analysis = analyze(curve, cfg)?;
    adapted_lift_with(curve, &analysis, cfg, ctx)
}

pub fn adapted_lift_with<F: RealField>(curve: &CurveSpec, analysis: &CurveAnalysis, cfg: &RunConfig, ctx: F::Ctx) -> Result<AdaptedLift<F>> {
    adapted_lift_in_chart(curve, analysis, cfg, ctx, None)
}

pub fn adapted_lift_in_chart<F: RealField>(
    curve: &CurveSpec,
    analysis: &CurveAnalysis,
    cfg: &RunConfig,
    ctx: F::Ctx,
    transversal: Option<&Matrix<Rational>>,
) -> Result<AdaptedLift<F>> {
    let dl = darboux_lift_in_chart(curve, analysis, transversal)?;
    let chart_growth = coefficient_growth(&dl.c);
    let model = dl.model.clone();
    if dl.c.order() == 0 {
        return Err(Error::JetOrderTooLow(format!("jet order {} leaves no room for the symbol", curve.order())));
    }
    let c1 = dl.c.to_field::<F>(ctx);
    let dt = c1.map(|x| model.degree_component(x, -1));
    let e = conjugate_symbol(&model, &dt, cfg.rank_band())?;
    let einv = symplectic_inverse(&model, &e);
    let c0 = einv.mul_t(&c1).mul_t(&e).add_t(&einv.mul_t(&e.derivative()?));
    let gamma = dl.gamma.to_field::<F>(ctx).mul_t(&e);
    let delta = model.delta::<F>(ctx);
    let mut delta_residual: f64 = 0.0;
    for (k, x) in c0.coeffs().iter().enumerate() {
        let low = model.degree_component(x, -1);
        let r = if k == 0 { low.sub(&delta).max_abs() } else { low.max_abs() };
        delta_residual = delta_residual.max(r);
        for deg in -model.diagram().max_degree()..-1 {
            delta_residual = delta_residual.max(model.degree_component(x, deg).max_abs());
        }
    }
    let c = GradedJet::from_dense(&model, &c0, true);
    let jm = model.form::<F>(ctx).scale(&F::from_i64(ctx, dl.kappa));
    let js = SymplecticModel::std_form::<F>(ctx, curve.m());
    let gram = gamma.transpose().rmul_const(&js).mul_t(&gamma);
    let symplectic_residual = gram.coeffs().iter().enumerate().map(|(k, g)| if k == 0 { g.sub(&jm).max_abs() } else { g.max_abs() }).fold(0.0, f64::max);
    Ok(AdaptedLift { model, sgn: dl.sgn, kappa: dl.kappa, gamma, c, delta_t: dt, conjugator: e, delta_residual, symplectic_residual, chart_growth })
}

/// Symbol at a point: `delta_t` in Darboux-lift coordinates and the
/// conjugator `Q` with `Q delta_t = delta Q`.
#[derive(Clone, Debug)]
pub struct SymbolResult<F: Field> {
    pub diagram: ReducedDiagram,
    pub delta_t: Matrix<F>,
    pub q: Matrix<F>,
    pub commutation_residual: f64,
    pub symplectic_residual: f64,
    pub grading_residual: f64,
}

pub fn symbol_at<F: RealField>(curve: &CurveSpec, t: &Rational, cfg: &RunConfig, ctx: F::Ctx) -> Result<SymbolResult<F>> {
    let local = if t == curve.t0() { curve.clone() } else { curve.recenter(t)? };
    let analysis = analyze(&local, cfg)?;
    let dl = darboux_lift(&local, &analysis)?;
    let model = dl.model;
    let c1 = dl.c.to_field::<F>(ctx);
    let dt = c1.map(|x| model.degree_component(x, -1));
    let e = conjugate_symbol(&model, &dt, cfg.rank_band())?;
    let e0 = e.value().clone();
    let q = linalg::inverse(&e0, cfg.rank_band().1).ok_or(Error::NonInvertibleJet)?;
    let delta = model.delta::<F>(ctx);
    let d0 = dt.value().clone();
    let commutation_residual = q.mul(&d0).sub(&delta.mul(&q)).max_abs();
    let j = model.form::<F>(ctx);
    let symplectic_residual = q.transpose().mul(&j).mul(&q).sub(&j).max_abs();
    let grading_residual = (0..model.dim())
        .flat_map(|u| (0..model.dim()).map(move |v| (u, v)))
        .filter(|&(u, v)| model.entry_degree(u, v) != 0)
        .map(|(u, v)| q[(u, v)].magnitude())
        .fold(0.0, f64::max);
    Ok(SymbolResult { diagram: analysis.diagram, delta_t: d0, q, commutation_residual, symplectic_residual, grading_residual })
}

/// Box label used in reports, e.g. `(1,-2)`.
pub fn cell_label(c: Cell) -> String {
    format!("({},{})", c.row, c.col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Float;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn curve(text: &str) -> CurveSpec {
        load_curve(text).unwrap()
    }

    #[test]
    fn load_examples() {
        let c = curve(r#"{"m":1,"t0":"0","jet_order":3,"frame_columns":[[["1"],["0","1"]]]}"#);
        assert_eq!(c.m(), 1);
        let g = curve(r#"{"m":2,"jet_order":4,"frame_columns":[[["1"],["0"],["0","1"],["0"]],[["0"],["1"],["0"],["0","1"]]]}"#);
        assert_eq!(g.m(), 2);
        let bad = load_curve(r#"{"m":1,"frame_columns":[]}"#);
        assert!(matches!(bad, Err(Error::BadFormat(_))));
        let nl = load_curve(r#"{"m":2,"jet_order":2,"frame_columns":[[["1"],["0"],["0"],["0"]],[["0"],["1"],["1"],["0"]]]}"#);
        assert!(matches!(nl, Err(Error::NotLagrangian { i: 0, j: 1, .. })));
        let rd = load_curve(r#"{"m":2,"jet_order":2,"frame_columns":[[["1"],["0"],["0"],["0"]],[["1"],["0"],["0"],["0"]]]}"#);
        assert_eq!(rd, Err(Error::RankDeficientFrame));
        let deg = load_curve(r#"{"m":1,"jet_order":1,"frame_columns":[[["1"],["0","1","2"]]]}"#);
        assert!(matches!(deg, Err(Error::BadFormat(_))));
        assert_eq!(load_curve(&c.to_json().to_string()).unwrap(), c);
    }

    #[test]
    fn velocity_form_signs() {
        let up = curve(r#"{"m":1,"jet_order":2,"frame_columns":[[["0","1"],["1"]]]}"#);
        assert_eq!(velocity_form(&up, &q(0, 1))[(0, 0)], q(1, 1));
        let down = curve(r#"{"m":1,"jet_order":2,"frame_columns":[[["1"],["0","1"]]]}"#);
        assert_eq!(velocity_form(&down, &q(0, 1))[(0, 0)], q(-1, 1));
        let flat = curve(r#"{"m":1,"jet_order":2,"frame_columns":[[["1"],["0"]]]}"#);
        assert!(velocity_form(&flat, &q(1, 3)).is_zero());
    }

    #[test]
    fn inertia_counts() {
        let a = Matrix::<Rational>::from_i64_rows((), &[&[0, 1, 0], &[1, 0, 0], &[0, 0, 0]]);
        assert_eq!(inertia(&a), (1, 1, 1));
        let b = Matrix::<Rational>::from_i64_rows((), &[&[2, 1], &[1, 2]]);
        assert_eq!(inertia(&b), (2, 0, 0));
    }

    #[test]
    fn graph_of_t_identity() {
        let g = curve(r#"{"m":2,"jet_order":4,"frame_columns":[[["1"],["0"],["0","1"],["0"]],[["0"],["1"],["0"],["0","1"]]]}"#);
        let flag = osculating_flag(&g).unwrap();
        assert_eq!(flag.dim(-1), 4);
        assert_eq!(flag.dim(1), 0);
        let r = regularity_report(&g, &default_sample_points(g.t0(), 1));
        assert!(r.equiregular && r.ample);
        assert_eq!(r.young.unwrap().columns(), &[2]);
        assert_eq!(r.monotone, Monotonicity::Nonincreasing);
    }

    #[test]
    fn rank_drop_is_not_equiregular() {
        let c = curve(r#"{"m":1,"jet_order":4,"frame_columns":[[["1"],["0","0","0","1"]]]}"#);
        let r = regularity_report(&c, &default_sample_points(c.t0(), 0));
        assert!(!r.equiregular);
        assert_eq!(r.sampled_dims[0], vec![1, 1, 1, 2]);
        assert!(matches!(analyze(&c, &RunConfig::default()), Err(Error::NotEquiregular(_))));
    }

    #[test]
    fn line_symbol_and_lift() {
        let c = curve(r#"{"m":1,"jet_order":5,"frame_columns":[[["1"],["0","1"]]]}"#);
        let cfg = RunConfig::default();
        let s = symbol_at::<Float>(&c, &q(0, 1), &cfg, 192).unwrap();
        assert!(s.commutation_residual < 1e-40 && s.symplectic_residual < 1e-40);
        let lift = adapted_lift::<Float>(&c, &cfg, 192).unwrap();
        assert_eq!(lift.kappa, 1);
        assert!(lift.delta_residual < 1e-40);
        assert!(lift.symplectic_residual < 1e-40);
    }
}
