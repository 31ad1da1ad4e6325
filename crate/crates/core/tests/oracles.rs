//! Frozen values produced by the sympy scripts in `oracles/`.

use serde_json::{json, Value};
use symcurve::algebra::NormalizationSpace;
use symcurve::config::RunConfig;
use symcurve::curve::{analyze, CurveSpec};
use symcurve::frenet::{frenet_frame, helix, EuclideanCurve};
use symcurve::model::SymplecticModel;
use symcurve::normal::{curvature_maps, normalize};
use symcurve::scalar::{Float, Rational};

const SP2: &str = include_str!("../../../oracles/sp2_hill.json");
const FRENET: &str = include_str!("../../../oracles/frenet_curves.json");

fn q(v: &Value) -> Rational {
    v.as_str().unwrap().parse().unwrap()
}

fn close(x: &Float, want: &Rational, tol: f64) -> bool {
    (x.clone() - want).abs() <= tol
}

/// The curve `t -> span(phi(t), 1)` in the Lagrangian Grassmannian of the plane.
fn graph_curve(phi: &[Value]) -> CurveSpec {
    CurveSpec::from_json(&json!({ "m": 1, "frame_columns": [[phi, ["1"]]] })).unwrap()
}

#[test]
fn sp2_curvature_matches_oracle() {
    let oracle: Value = serde_json::from_str(SP2).unwrap();
    let cfg = RunConfig { jet_order: Some(19), ..RunConfig::default() };
    for name in ["tan", "t_plus_t2", "cubic"] {
        let case = &oracle[name];
        let curve = graph_curve(case["phi"].as_array().unwrap());
        let a = analyze(&curve, &cfg).unwrap();
        let model = SymplecticModel::from_reduced(&a.diagram);
        let ns = NormalizationSpace::phi0(&model).unwrap();
        let f = normalize::<Float>(&curve, &ns, None, &cfg, 192).unwrap();
        let maps = curvature_maps(&f);
        let k = maps.iter().filter_map(|m| m.block.as_ref()).next().expect("one resolved curvature").entry(0, 0);
        let want = case["k"].as_array().unwrap();
        assert!(k.order() + 1 >= want.len(), "{name}: only {} coefficients", k.order() + 1);
        for (i, w) in want.iter().enumerate() {
            assert!(close(k.coeff(i), &q(w), 1e-40), "{name}: coefficient {i} is {}, expected {w}", k.coeff(i));
        }
    }
}

#[test]
fn helix_matches_oracle() {
    let oracle: Value = serde_json::from_str(FRENET).unwrap();
    let h = helix(&Rational::from(3), &Rational::from(4), &Rational::from(5), 10).unwrap();
    let r = frenet_frame::<Float>(&h, 192, 1e-30, false).unwrap();
    let want = [q(&oracle["helix_3_4_5"]["curvature"]), q(&oracle["helix_3_4_5"]["torsion"])];
    for (k, w) in r.curvatures.iter().zip(&want) {
        assert!(close(k.coeff(0), w, 1e-45));
        assert!(k.coeffs()[1..].iter().all(|c| c.clone().abs() < 1e-45));
    }
}

#[test]
fn twisted_cubic_matches_oracle() {
    let oracle: Value = serde_json::from_str(FRENET).unwrap();
    let comps = vec![
        vec![Rational::new(), Rational::from(1)],
        vec![Rational::new(), Rational::new(), Rational::from(1)],
        vec![Rational::new(), Rational::new(), Rational::new(), Rational::from(1)],
    ];
    let c = EuclideanCurve::from_components(Rational::new(), &comps, 12).unwrap();
    assert!(frenet_frame::<Float>(&c, 192, 1e-30, false).is_err());
    let r = frenet_frame::<Float>(&c, 192, 1e-30, true).unwrap();
    assert!(r.reparametrized);
    for (k, name) in r.curvatures.iter().zip(["curvature", "torsion"]) {
        for (i, w) in oracle["twisted_cubic"][name].as_array().unwrap().iter().enumerate() {
            assert!(close(k.coeff(i), &q(w), 1e-40), "{name} coefficient {i}: {}", k.coeff(i));
        }
    }
}
