use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symcurve::algebra::{random_graded, random_residual_element, NormalizationSpace};
use symcurve::config::RunConfig;
use symcurve::curve::{adapted_lift, CurveSpec};
use symcurve::diagram::ReducedDiagram;
use symcurve::jet::MatrixJet;
use symcurve::matrix::Matrix;
use symcurve::model::SymplecticModel;
use symcurve::normal::*;
use symcurve::scalar::{Float, Rational};

fn diagram(rows: &[(usize, usize)]) -> ReducedDiagram {
    ReducedDiagram::new(rows.to_vec()).unwrap()
}

fn to_float(fp: &InvariantFingerprint<Rational>) -> InvariantFingerprint<Float> {
    use symcurve::jet::Jet;
    let conv = |j: &Jet<Rational>| Jet::new(Float::with_val(192, j.base_point()), j.coeffs().iter().map(|c| Float::with_val(192, c)).collect());
    match fp {
        InvariantFingerprint::Complete { labels, jets, signs } => {
            InvariantFingerprint::Complete { labels: labels.clone(), signs: signs.clone(), jets: jets.iter().map(|j| j.as_ref().map(conv)).collect() }
        }
        InvariantFingerprint::Partial { words, traces } => InvariantFingerprint::Partial { words: words.clone(), traces: traces.iter().map(conv).collect() },
    }
}

/// `exp(X(t))` for a random polynomial `X` of positive degree.
fn positive_gauge(model: &SymplecticModel, order: usize, seed: u64) -> MatrixJet<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = model.diagram().max_degree();
    let dim = model.dim();
    let mut coeffs = vec![Matrix::<Rational>::zeros((), dim, dim); order + 1];
    for (p, c) in coeffs.iter_mut().enumerate().take(3) {
        for k in 1..=max {
            if p <= 1 || k == 1 {
                c.add_assign(&random_graded(model, k, &mut rng));
            }
        }
    }
    MatrixJet::from_coeffs(Rational::new(), coeffs).exp_nilpotent(max as usize + 1).unwrap()
}

#[test]
fn positive_gauge_is_removed_exactly() {
    for rows in [vec![(2, 1)], vec![(2, 1), (1, 1)], vec![(1, 2)], vec![(3, 1)]] {
        let d = diagram(&rows);
        let g = random_curve(&d, 4, 2, 10).unwrap();
        let ns = NormalizationSpace::phi0(&g.model).unwrap();
        let gauge = positive_gauge(&g.model, 10, 9);
        let moved = g.gamma.mul_t(&gauge);
        let f = normalize_lift(&ns, &moved, None, 0.0).unwrap();
        assert!(f.trace.iter().all(|s| s.lower_change == 0.0 && s.residual == 0.0), "{d}");
        assert!(f.trace.iter().any(|s| s.correction > 0.0), "{d}: nothing to remove");
        let n = f.n_dense().unwrap();
        assert_eq!(n, g.n.truncate(n.order()), "{d}");
        assert_eq!(f.gamma.truncate(n.order()), g.gamma.truncate(n.order()), "{d}");
    }
}

#[test]
fn residual_group_acts_by_conjugation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for rows in [vec![(2, 2)], vec![(1, 3)], vec![(2, 1), (1, 2)]] {
        let d = diagram(&rows);
        let g = random_curve(&d, 8, 2, 9).unwrap();
        let ns = NormalizationSpace::phi0(&g.model).unwrap();
        let r = random_residual_element(&g.model, &mut rng);
        let rinv = symcurve::linalg::inverse(&r, 0.0).unwrap();
        let f = normalize_lift(&ns, &g.gamma.rmul_const(&r), None, 0.0).unwrap();
        assert!(f.trace.iter().all(|s| s.correction == 0.0), "{d}: residual image is not normal");
        let n = f.n_dense().unwrap();
        let want = g.n.truncate(n.order()).map(|x| rinv.mul(x).mul(&r));
        assert_eq!(n, want, "{d}");
        for k in 0..=n.order() {
            assert!(ns.contains(n.coeff(k)), "{d}: coefficient {k} leaves N");
        }
    }
}

#[test]
fn rank_one_fibers_give_the_same_curvature() {
    let d = diagram(&[(2, 1)]);
    let cfg = RunConfig::default();
    let g = random_curve(&d, 21, 2, cfg.jet_order_for(2).unwrap()).unwrap();
    let ns = NormalizationSpace::phi0(&g.model).unwrap();
    let minus = Matrix::<Float>::identity(192, 4).scale(&Float::with_val(192, -1));
    let a = normalize::<Float>(&g.curve, &ns, None, &cfg, 192).unwrap();
    let b = normalize::<Float>(&g.curve, &ns, Some(&minus), &cfg, 192).unwrap();
    assert!(a.n_dense().unwrap().sub_t(&b.n_dense().unwrap()).max_abs() < 1e-50);
    assert!(a.gamma.add_t(&b.gamma).max_abs() < 1e-50);
    assert_eq!(compare_frames(&a, &b, 1e-40).verdict, Verdict::Equivalent);
}

#[test]
fn badly_placed_curves_are_recharted() {
    // this transform puts the Euclidean chart singularity near t0
    let d = diagram(&[(3, 1)]);
    let cfg = RunConfig::default();
    let g = random_curve(&d, 1, 2, cfg.jet_order_for(3).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let a = random_symplectic(3, &mut rng);
    let moved = g.curve.transform(&a).unwrap();
    let lift = adapted_lift::<Float>(&moved, &cfg, 192).unwrap();
    assert!(lift.chart_growth > CHART_GROWTH_LIMIT, "growth {}", lift.chart_growth);
    let ns = NormalizationSpace::phi0(&g.model).unwrap();
    let f = normalize::<Float>(&moved, &ns, None, &cfg, 192).unwrap();
    let exact = to_float(&invariant_fingerprint(&g.exact_frame(&ns).unwrap(), 0.0));
    let dist = exact.distance(&invariant_fingerprint(&f, 1e-30)).unwrap();
    assert!(dist < 1e-45, "distance {dist:e}");
}

#[test]
fn normal_frame_is_conformally_symplectic() {
    let d = diagram(&[(2, 1), (1, 1)]);
    let cfg = RunConfig::default();
    let g = random_curve(&d, 2, 2, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let moved = g.curve.transform(&random_symplectic(3, &mut rng)).unwrap();
    let ns = NormalizationSpace::phi0(&g.model).unwrap();
    let f = normalize::<Float>(&moved, &ns, None, &cfg, 192).unwrap();
    let js = SymplecticModel::std_form::<Float>(192, 3);
    let jm = g.model.form::<Float>(192).scale(&Float::with_val(192, f.kappa));
    let gram = f.gamma.transpose().rmul_const(&js).mul_t(&f.gamma);
    assert!(gram.value().sub(&jm).max_abs() < 1e-50);
    assert!(gram.coeffs()[1..].iter().all(|c| c.max_abs() < 1e-45));
}

#[test]
fn sampled_reconstruction_is_fourth_order() {
    let d = diagram(&[(2, 1)]);
    let g = random_curve(&d, 6, 1, 24).unwrap();
    let model = &g.model;
    let mut c = g.n.to_field::<Float>(192);
    *c.coeff_mut(0) = c.coeff(0).add(&model.delta::<Float>(192));
    let form = model.form::<Float>(192);
    let exact = g.gamma.to_field::<Float>(192);
    let start = exact.value().clone();
    let horizon = Float::with_val(192, 1) / 32u32;
    let err = |steps: u32| {
        let h = horizon.clone() / steps;
        let path = reconstruct_sampled(|t: &Float| c.eval(t), start.clone(), &form, Float::with_val(192, 0), h, steps as usize, 1e-6).unwrap();
        path.frames.last().unwrap().sub(&exact.eval(&horizon)).max_abs()
    };
    let (coarse, fine) = (err(8), err(16));
    let ratio = coarse / fine;
    assert!((12.0..20.0).contains(&ratio), "errors {coarse:e} {fine:e}");
    let h = horizon.clone() / 2u32;
    let too_big = reconstruct_sampled(|t: &Float| c.eval(t).scale(&Float::with_val(192, 200)), start, &form, Float::with_val(192, 0), h, 2, 1e-12);
    assert!(matches!(too_big, Err(symcurve::Error::StepSizeTooLarge { .. })));
}

#[test]
fn exact_roundtrip_of_structure_function() {
    let d = diagram(&[(1, 2)]);
    let g = random_curve(&d, 13, 2, 7).unwrap();
    let j = g.model.form::<Rational>(());
    let c = structure_function(&g.gamma, &j, 0.0).unwrap();
    let back = reconstruct(&c, g.gamma.value().clone());
    assert_eq!(back, g.gamma.truncate(back.order()));
    let not_sp = MatrixJet::identity(Rational::new(), 4, 3).add_t(&MatrixJet::from_coeffs(Rational::new(), vec![Matrix::zeros((), 4, 4), Matrix::identity((), 4)]));
    assert!(matches!(structure_function(&not_sp, &j, 0.0), Err(symcurve::Error::NotInSp(_))));
}

#[test]
fn generated_curves_round_trip_through_json() {
    let g = random_curve(&diagram(&[(2, 1), (1, 1)]), 0, 2, 8).unwrap();
    let back = CurveSpec::from_json(&g.curve.to_json()).unwrap();
    assert_eq!(back.frame(), g.curve.frame());
}
