use proptest::prelude::*;
use symcurve::algebra::cayley;
use symcurve::frenet::{frenet_frame, EuclideanCurve};
use symcurve::matrix::Matrix;
use symcurve::scalar::{Float, Rational};

fn rational() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=4).prop_map(|(p, q)| Rational::from((p, q)))
}

/// A twisted cubic with random higher terms, so it stays generic at 0.
fn curve() -> impl Strategy<Value = EuclideanCurve> {
    prop::collection::vec(rational(), 9).prop_map(|r| {
        let z = Rational::new;
        let one = || Rational::from(1);
        let comps = vec![
            vec![z(), one(), z(), r[0].clone(), r[1].clone(), r[2].clone()],
            vec![z(), z(), one(), r[3].clone(), r[4].clone(), r[5].clone()],
            vec![z(), z(), z(), one(), r[6].clone(), r[7].clone(), r[8].clone()],
        ];
        EuclideanCurve::from_components(Rational::new(), &comps, 10).unwrap()
    })
}

fn skew() -> impl Strategy<Value = Matrix<Rational>> {
    prop::collection::vec(rational(), 3).prop_map(|v| {
        let mut a = Matrix::<Rational>::zeros((), 3, 3);
        for (k, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
            a[(i, j)] = v[k].clone();
            a[(j, i)] = Rational::from(-&v[k]);
        }
        a
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn curvatures_are_rigid_invariants(c in curve(), a in skew(), shift in prop::collection::vec(rational(), 3), flip in any::<bool>()) {
        let mut u = cayley(&a);
        if flip {
            for j in 0..3 {
                u[(2, j)] = Rational::from(-&u[(2, j)]);
            }
        }
        let moved = c.rigid_motion(&u, &shift).unwrap();
        let before = frenet_frame::<Float>(&c, 192, 1e-30, true).unwrap();
        let after = frenet_frame::<Float>(&moved, 192, 1e-30, true).unwrap();
        prop_assert!(after.orthonormality_defect < 1e-45 && after.skew_defect < 1e-45);
        // the frame is O_n-valued with positive curvatures, so reflections act trivially too
        for (k0, k1) in before.curvatures.iter().zip(&after.curvatures) {
            let diff = k1.sub_t(k0);
            prop_assert!(diff.coeffs().iter().all(|x| x.clone().abs() < 1e-40));
        }
    }
}
