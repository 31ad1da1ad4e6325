//! Frenet frames of curves in Euclidean space.
//!
//! The frame is Gram-Schmidt applied to `gamma', ..., gamma^(n)`; its
//! structure function `E^T E'` is skew with support on the first
//! subdiagonal pair, which carries the curvatures.

use serde_json::{json, Value};

use crate::curve::parse_number;
use crate::error::{Error, Result};
use crate::jet::{solve_right, Jet, MatrixJet};
use crate::matrix::Matrix;
use crate::normal::{reconstruct_sampled, SampledPath};
use crate::scalar::{rational_string, Field, Rational, RealField};

/// A curve `gamma: R -> R^n` as an `n x 1` jet with rational coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanCurve {
    gamma: MatrixJet<Rational>,
}

impl EuclideanCurve {
    pub fn new(gamma: MatrixJet<Rational>) -> Result<Self> {
        if gamma.cols() != 1 || gamma.rows() == 0 {
            return Err(Error::BadFormat(format!("expected an n x 1 jet, got {} x {}", gamma.rows(), gamma.cols())));
        }
        Ok(EuclideanCurve { gamma })
    }

    /// Builds the curve from one coefficient list per component.
    pub fn from_components(t0: Rational, comps: &[Vec<Rational>], order: usize) -> Result<Self> {
        let n = comps.len();
        let mut coeffs = vec![Matrix::<Rational>::zeros((), n, 1); order + 1];
        for (i, c) in comps.iter().enumerate() {
            if c.len() > order + 1 {
                return Err(Error::BadFormat(format!("component {i} has degree {} > jet order {order}", c.len() - 1)));
            }
            for (k, x) in c.iter().enumerate() {
                coeffs[k][(i, 0)] = x.clone();
            }
        }
        Self::new(MatrixJet::from_coeffs(t0, coeffs))
    }

    pub fn n(&self) -> usize {
        self.gamma.rows()
    }

    pub fn gamma(&self) -> &MatrixJet<Rational> {
        &self.gamma
    }

    pub fn t0(&self) -> &Rational {
        self.gamma.base_point()
    }

    /// `x -> a + U x`.
    pub fn rigid_motion(&self, u: &Matrix<Rational>, a: &[Rational]) -> Result<Self> {
        let mut g = self.gamma.lmul_const(u);
        let c0 = g.coeff(0).add(&Matrix::from_columns((), a.len(), &[a.to_vec()]));
        *g.coeff_mut(0) = c0;
        Self::new(g)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |s: String| Error::BadFormat(s);
        match v.get("space").and_then(Value::as_str) {
            Some("euclidean") => {}
            other => return Err(bad(format!("expected space \"euclidean\", got {other:?}"))),
        }
        let t0 = v.get("t0").map(parse_number).transpose()?.unwrap_or_default();
        let comps = v.get("components").and_then(Value::as_array).ok_or_else(|| bad("missing components".into()))?;
        let comps: Vec<Vec<Rational>> = comps
            .iter()
            .map(|c| match c {
                Value::Array(xs) => xs.iter().map(parse_number).collect(),
                other => Ok(vec![parse_number(other)?]),
            })
            .collect::<Result<_>>()?;
        if let Some(n) = v.get("n").and_then(Value::as_u64) {
            if n as usize != comps.len() {
                return Err(bad(format!("n = {n} but {} components", comps.len())));
            }
        }
        let longest = comps.iter().map(Vec::len).max().unwrap_or(1).max(1);
        let order = match v.get("jet_order") {
            Some(k) => k.as_u64().ok_or_else(|| bad("jet_order must be an integer".into()))? as usize,
            None => longest - 1,
        };
        Self::from_components(t0, &comps, order)
    }

    pub fn to_json(&self) -> Value {
        let comps: Vec<Value> = (0..self.n())
            .map(|i| {
                let mut c: Vec<String> = self.gamma.coeffs().iter().map(|m| rational_string(&m[(i, 0)])).collect();
                while c.len() > 1 && c.last().is_some_and(|s| s == "0") {
                    c.pop();
                }
                json!(c)
            })
            .collect();
        json!({
            "schema": "symcurve/1",
            "space": "euclidean",
            "n": self.n(),
            "t0": rational_string(self.t0()),
            "jet_order": self.gamma.order(),
            "components": comps,
        })
    }
}

/// Taylor coefficients of `cos(w t)` and `sin(w t)` up to `order`.
pub fn cos_sin_jets(w: &Rational, order: usize) -> (Vec<Rational>, Vec<Rational>) {
    let mut c = vec![Rational::new(); order + 1];
    let mut s = vec![Rational::new(); order + 1];
    let mut term = Rational::from(1);
    for k in 0..=order {
        match k % 4 {
            0 => c[k] = term.clone(),
            1 => s[k] = term.clone(),
            2 => c[k] = Rational::from(-&term),
            _ => s[k] = Rational::from(-&term),
        }
        term = Rational::from(&term * w) / Rational::from(k as i64 + 1);
    }
    (c, s)
}

/// Arc-length helix `(a cos(s/c), a sin(s/c), b s/c)` with `c^2 = a^2 + b^2`
/// rational.
pub fn helix(a: &Rational, b: &Rational, c: &Rational, order: usize) -> Result<EuclideanCurve> {
    let aa = Rational::from(a * a) + Rational::from(b * b);
    if aa != Rational::from(c * c) {
        return Err(Error::BadFormat("helix needs c^2 = a^2 + b^2".into()));
    }
    let w = Rational::from(c.clone().recip());
    let (cs, sn) = cos_sin_jets(&w, order);
    let x: Vec<Rational> = cs.iter().map(|v| Rational::from(v * a)).collect();
    let y: Vec<Rational> = sn.iter().map(|v| Rational::from(v * a)).collect();
    let mut z = vec![Rational::new(); order + 1];
    if order >= 1 {
        z[1] = Rational::from(b * &w);
    }
    EuclideanCurve::from_components(Rational::new(), &[x, y, z], order)
}

/// Arc-length circle of radius `r` in the plane.
pub fn circle(r: &Rational, order: usize) -> Result<EuclideanCurve> {
    let w = Rational::from(r.clone().recip());
    let (cs, sn) = cos_sin_jets(&w, order);
    let x = cs.iter().map(|v| Rational::from(v * r)).collect();
    let y = sn.iter().map(|v| Rational::from(v * r)).collect();
    EuclideanCurve::from_components(Rational::new(), &[x, y], order)
}

#[derive(Clone, Debug)]
pub struct FrenetResult<F: Field> {
    pub frame: MatrixJet<F>,
    /// `E^T E'`.
    pub structure: MatrixJet<F>,
    /// `k_1, ..., k_{n-1}`: the entries `(j+1, j)` of the structure function.
    pub curvatures: Vec<Jet<F>>,
    /// `[[0, 0], [E^T gamma', R]]`, the structure function of the bordered
    /// lift `[[1, 0], [gamma, E]]` into the group of rigid motions.
    pub affine_structure: MatrixJet<F>,
    pub orthonormality_defect: f64,
    /// Largest entry outside the first sub- and superdiagonal.
    pub support_defect: f64,
    pub skew_defect: f64,
    /// True when the input was reparametrized by arc length first.
    pub reparametrized: bool,
}

fn dot<F: Field>(a: &MatrixJet<F>, b: &MatrixJet<F>) -> Jet<F> {
    a.transpose().mul_t(b).entry(0, 0)
}

/// `f(t0 + h(s))` for a jet `h` with `h(0) = 0`, by Horner's rule.
fn compose<F: Field>(f: &Jet<F>, h: &Jet<F>) -> Jet<F> {
    let k = h.order();
    let t0 = h.base_point().clone();
    let mut acc = Jet::zero(t0.clone(), k);
    for c in f.coeffs().iter().rev() {
        acc = acc.mul_t(h).add_t(&Jet::constant(t0.clone(), c.clone(), k));
    }
    acc.truncate(k.min(f.order()))
}

/// Reparametrizes by arc length from `t0`: returns `gamma(t(s))` as a jet
/// in `s` based at `t0`.
fn arc_length_reparam<F: RealField>(g: &MatrixJet<F>, tol: f64) -> Result<MatrixJet<F>> {
    let d = g.derivative()?;
    let speed = dot(&d, &d).sqrt().map_err(|_| Error::RegularityFailed("velocity vanishes at t0".into()))?;
    let t0 = g.base_point().clone();
    let ctx = t0.ctx();
    // s(t) = int speed; invert s(t0 + h) = s by fixed-point iteration on h
    let s_of_h = speed.integrate(F::zero(ctx));
    let k = s_of_h.order();
    let s1 = s_of_h.coeff(1).clone();
    let inv1 = s1.recip().filter(|_| s1.magnitude() > tol).ok_or_else(|| Error::RegularityFailed("velocity vanishes at t0".into()))?;
    let var = Jet::variable(t0.clone(), k);
    let mut h = var.scale(&inv1);
    for _ in 0..=k {
        let nonlinear = compose(&s_of_h, &h).sub_t(&h.scale(&s1));
        h = var.sub_t(&nonlinear).scale(&inv1);
    }
    let n = g.rows();
    let comps: Vec<Jet<F>> = (0..n).map(|i| compose(&g.entry(i, 0), &h)).collect();
    Ok(MatrixJet::from_entries(t0, n, 1, |i, _| comps[i].clone()))
}

/// Frenet frame, curvatures and affine structure function.
///
/// With `reparametrize` false a curve whose speed differs from 1 by more
/// than `tol` is rejected with `NotArcLength`.
pub fn frenet_frame<F: RealField>(curve: &EuclideanCurve, ctx: F::Ctx, tol: f64, reparametrize: bool) -> Result<FrenetResult<F>> {
    let n = curve.n();
    let t0 = F::from_rational(ctx, curve.t0());
    let mut g = curve.gamma.convert(t0, |x| F::from_rational(ctx, x));
    if g.order() < n + 1 {
        return Err(Error::JetOrderTooLow(format!("a curve in R^{n} needs jet order at least {}", n + 1)));
    }
    let d1 = g.derivative()?;
    let speed2 = dot(&d1, &d1);
    let one = Jet::constant(speed2.base_point().clone(), F::one(ctx), speed2.order());
    let speed_defect = speed2.sub_t(&one).max_abs();
    let mut reparametrized = false;
    if speed_defect > tol {
        if !reparametrize {
            return Err(Error::NotArcLength(format!("|gamma'|^2 - 1 has coefficients up to {speed_defect:e}")));
        }
        g = arc_length_reparam(&g, tol)?;
        reparametrized = true;
    }
    let mut derivs = Vec::with_capacity(n);
    let mut cur = g.clone();
    for _ in 0..n {
        cur = cur.derivative()?;
        derivs.push(cur.clone());
    }
    let mut es: Vec<MatrixJet<F>> = Vec::with_capacity(n);
    for (j, d) in derivs.iter().enumerate() {
        let mut v = d.clone();
        for e in &es {
            v = v.sub_t(&e.scale_jet(&dot(d, e)));
        }
        let norm2 = dot(&v, &v);
        if norm2.coeff(0).magnitude() <= tol * (1.0 + dot(d, d).coeff(0).magnitude()) {
            return Err(Error::RegularityFailed(format!("derivatives 1..{} are dependent at t0", j + 1)));
        }
        let inv = norm2.sqrt()?.inv(tol)?;
        es.push(v.scale_jet(&inv));
    }
    let frame = es.iter().skip(1).fold(es[0].clone(), |acc, e| acc.hstack(e));
    let structure = frame.transpose().mul_t(&frame.derivative()?);
    let order = structure.order();
    let gram = frame.transpose().mul_t(&frame).truncate(order);
    let orthonormality_defect = gram.sub_t(&MatrixJet::identity(gram.base_point().clone(), n, order)).max_abs();
    let skew_defect = structure.add_t(&structure.transpose()).max_abs();
    let mut support_defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i.abs_diff(j) != 1 {
                support_defect = support_defect.max(structure.entry(i, j).max_abs());
            }
        }
    }
    let curvatures: Vec<Jet<F>> = (0..n - 1).map(|j| structure.entry(j + 1, j)).collect();
    // bordered lift [[1, 0], [gamma, E]]
    let base = structure.base_point().clone();
    let velocity = frame.transpose().mul_t(&g.derivative()?).truncate(order);
    let zero_row = MatrixJet::zeros(base.clone(), 1, n + 1, order);
    let affine_structure = zero_row.vstack(&velocity.hstack(&structure));
    Ok(FrenetResult { frame, structure, curvatures, affine_structure, orthonormality_defect, support_defect, skew_defect, reparametrized })
}

/// Jet-mode reconstruction: frame `E' = E R`, point `gamma' = E e_1`.
pub fn frenet_reconstruct<F: Field>(r: &MatrixJet<F>, e0: Matrix<F>, x0: &[F]) -> Result<(MatrixJet<F>, EuclideanCurveJet<F>)> {
    let n = r.rows();
    let skew = r.add_t(&r.transpose()).max_abs();
    if (F::EXACT && skew != 0.0) || skew > 1e-20 * (1.0 + r.max_abs()) {
        return Err(Error::NotInSp(format!("structure function is not skew (defect {skew:e})")));
    }
    let frame = solve_right(r, e0);
    let t1 = frame.select_columns(&[0]);
    let ctx = r.ctx();
    let comps: Vec<Jet<F>> = (0..n).map(|i| t1.entry(i, 0).integrate(x0.get(i).cloned().unwrap_or_else(|| F::zero(ctx)))).collect();
    let gamma = MatrixJet::from_entries(r.base_point().clone(), n, 1, |i, _| comps[i].clone());
    Ok((frame, EuclideanCurveJet { gamma }))
}

/// A reconstructed curve over any backend.
#[derive(Clone, Debug)]
pub struct EuclideanCurveJet<F: Field> {
    pub gamma: MatrixJet<F>,
}

impl EuclideanCurveJet<Rational> {
    pub fn to_curve(&self) -> Result<EuclideanCurve> {
        EuclideanCurve::new(self.gamma.clone())
    }
}

/// Sampled reconstruction: RK4 for the frame and Simpson's rule on the
/// tangent for the point.
pub fn frenet_reconstruct_sampled<F: RealField>(
    r: impl Fn(&F) -> Matrix<F>,
    e0: Matrix<F>,
    x0: Vec<F>,
    t0: F,
    h: F,
    steps: usize,
    budget: f64,
) -> Result<(SampledPath<F>, Vec<Vec<F>>)> {
    let n = e0.rows();
    let ctx = t0.ctx();
    let id = Matrix::identity(ctx, n);
    // the half-step frames enter Simpson's rule, so integrate at h/2
    let half = h.mul(&F::from_rational(ctx, &Rational::from((1, 2))));
    let path = reconstruct_sampled(r, e0, &id, t0, half.clone(), 2 * steps, budget)?;
    let mut points = vec![x0];
    let six = F::from_i64(ctx, 6);
    for s in 0..steps {
        let (a, m, b) = (&path.frames[2 * s], &path.frames[2 * s + 1], &path.frames[2 * s + 2]);
        let prev = points.last().unwrap().clone();
        let next = (0..n)
            .map(|i| {
                let sum = a[(i, 0)].add(&m[(i, 0)].scale_i64(4)).add(&b[(i, 0)]);
                prev[i].add(&h.mul(&sum).div(&six).unwrap())
            })
            .collect();
        points.push(next);
    }
    Ok((path, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Float;

    fn q(a: i64, b: i64) -> Rational {
        Rational::from((a, b))
    }

    #[test]
    fn circle_curvature() {
        let c = circle(&q(2, 1), 10).unwrap();
        let f = frenet_frame::<Float>(&c, 192, 1e-40, false).unwrap();
        let k = &f.curvatures[0];
        assert!((k.coeff(0).to_f64() - 0.5).abs() < 1e-40);
        assert!(k.coeffs()[1..].iter().all(|x| x.magnitude() < 1e-40));
    }

    #[test]
    fn helix_closed_form() {
        let h = helix(&q(3, 1), &q(4, 1), &q(5, 1), 12).unwrap();
        let f = frenet_frame::<Float>(&h, 192, 1e-40, false).unwrap();
        assert!((f.curvatures[0].coeff(0).to_f64() - 3.0 / 25.0).abs() < 1e-12);
        assert!((f.curvatures[1].coeff(0).to_f64() - 4.0 / 25.0).abs() < 1e-12);
        assert!(f.support_defect < 1e-40 && f.orthonormality_defect < 1e-40);
    }

    #[test]
    fn line_is_rejected() {
        let l = EuclideanCurve::from_components(Rational::new(), &[vec![q(0, 1), q(1, 1)], vec![q(0, 1)]], 5).unwrap();
        assert!(matches!(frenet_frame::<Float>(&l, 192, 1e-40, false), Err(Error::RegularityFailed(_))));
    }

    #[test]
    fn non_arc_length_is_flagged_or_fixed() {
        // circle of radius 1 traversed at speed 2
        let (c, s) = cos_sin_jets(&q(2, 1), 12);
        let cur = EuclideanCurve::from_components(Rational::new(), &[c, s], 12).unwrap();
        assert!(matches!(frenet_frame::<Float>(&cur, 192, 1e-40, false), Err(Error::NotArcLength(_))));
        let f = frenet_frame::<Float>(&cur, 192, 1e-40, true).unwrap();
        assert!(f.reparametrized);
        assert!((f.curvatures[0].coeff(0).to_f64() - 1.0).abs() < 1e-30);
    }
}
