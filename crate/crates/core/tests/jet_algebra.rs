use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symcurve::algebra::random_graded;
use symcurve::diagram::diagrams_up_to;
use symcurve::jet::{solve_right, Jet, MatrixJet};
use symcurve::matrix::Matrix;
use symcurve::model::SymplecticModel;
use symcurve::scalar::Rational;

fn rational() -> impl Strategy<Value = Rational> {
    (-20i64..=20, 1i64..=9).prop_map(|(p, q)| Rational::from((p, q)))
}

fn jet(order: usize) -> impl Strategy<Value = Jet<Rational>> {
    prop::collection::vec(rational(), order + 1).prop_map(|c| Jet::new(Rational::new(), c))
}

fn matrix_jet(n: usize, order: usize) -> impl Strategy<Value = MatrixJet<Rational>> {
    prop::collection::vec(prop::collection::vec(rational(), n * n), order + 1).prop_map(move |cs| {
        let coeffs = cs.into_iter().map(|v| Matrix::from_fn((), n, n, |i, j| v[i * n + j].clone())).collect();
        MatrixJet::from_coeffs(Rational::new(), coeffs)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms(a in jet(5), b in jet(5), c in jet(5)) {
        prop_assert_eq!(a.mul_t(&b).mul_t(&c), a.mul_t(&b.mul_t(&c)));
        prop_assert_eq!(a.mul_t(&b), b.mul_t(&a));
        prop_assert_eq!(a.mul_t(&b.add_t(&c)), a.mul_t(&b).add_t(&a.mul_t(&c)));
    }

    #[test]
    fn leibniz(a in jet(6), b in jet(6)) {
        let lhs = a.mul_t(&b).derivative().unwrap();
        let rhs = a.derivative().unwrap().mul_t(&b.truncate(5)).add_t(&a.truncate(5).mul_t(&b.derivative().unwrap()));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn inverse_is_two_sided(a in jet(6)) {
        prop_assume!(!a.coeff(0).is_zero());
        let inv = a.inv(0.0).unwrap();
        let one = Jet::constant(Rational::new(), Rational::from(1), 6);
        prop_assert_eq!(a.mul_t(&inv), one);
    }

    #[test]
    fn matrix_inverse(a in matrix_jet(3, 4)) {
        let Ok(inv) = a.inverse(0.0) else { return Ok(()) };
        prop_assert_eq!(a.mul_t(&inv), MatrixJet::identity(Rational::new(), 3, 4));
        prop_assert_eq!(inv.mul_t(&a), MatrixJet::identity(Rational::new(), 3, 4));
    }

    #[test]
    fn exp_of_nilpotent_inverts(a in matrix_jet(4, 4)) {
        // strictly upper triangular at every order
        let x = a.map(|m| Matrix::from_fn((), 4, 4, |i, j| if j > i { m[(i, j)].clone() } else { Rational::new() }));
        let e = x.exp_nilpotent(4).unwrap();
        let f = x.neg().exp_nilpotent(4).unwrap();
        prop_assert_eq!(e.mul_t(&f), MatrixJet::identity(Rational::new(), 4, 4));
    }

    #[test]
    fn ode_recursion(c in matrix_jet(3, 5), g0 in matrix_jet(3, 0)) {
        let g = solve_right(&c, g0.value().clone());
        prop_assert_eq!(g.order(), 6);
        prop_assert_eq!(g.value(), g0.value());
        prop_assert_eq!(g.derivative().unwrap(), g.truncate(5).mul_t(&c));
    }

    #[test]
    fn grading_is_additive(seed in 0u64..500, which in 0usize..10) {
        let ds = diagrams_up_to(4);
        let d = &ds[which % ds.len()];
        let model = SymplecticModel::from_reduced(d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let degrees: Vec<i32> = model.degrees().collect();
        let i = degrees[rng.gen_range(0..degrees.len())];
        let j = degrees[rng.gen_range(0..degrees.len())];
        let x = random_graded(&model, i, &mut rng);
        let y = random_graded(&model, j, &mut rng);
        prop_assert!(model.is_sp(&x, 0.0) && model.is_sp(&y, 0.0));
        let z = x.commutator(&y);
        prop_assert!(model.is_sp(&z, 0.0));
        prop_assert_eq!(model.degree_component(&z, i + j), z);
    }
}
