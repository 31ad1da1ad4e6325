//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p symcurve --test acceptance`. The process exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symcurve::algebra::{prolongation, NormalizationSpace};
use symcurve::audit::{run_audit, AuditConfig, AuditReport};
use symcurve::config::RunConfig;
use symcurve::curve::{symbol_at, CurveSpec};
use symcurve::diagram::{diagrams_up_to, ReducedDiagram};
use symcurve::frenet::{frenet_frame, frenet_reconstruct, helix};
use symcurve::jet::MatrixJet;
use symcurve::linalg;
use symcurve::matrix::Matrix;
use symcurve::model::SymplecticModel;
use symcurve::normal::{
    curvature_maps, curve_from_structure, equivalence_test, flat_curve, invariant_fingerprint, normalize, random_curve, random_n, random_symplectic,
    reconstruct, structure_function, CanonicalFrame, GeneratedCurve, Verdict,
};
use symcurve::scalar::{Field, Float, Rational};

const PREC: u32 = 192;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn audit_check(rep: &AuditReport, names: &[&str]) -> Outcome {
    for n in names {
        if !rep.check_passed(n) {
            let f: Vec<String> = rep.failures(n).iter().take(3).map(|s| s.to_string()).collect();
            return Err(format!("{n}: {}", f.join("; ")));
        }
    }
    Ok(format!("{} diagrams", rep.diagrams.len()))
}

fn le6() -> Vec<ReducedDiagram> {
    diagrams_up_to(6)
}

fn fl(x: &Rational) -> Float {
    Float::with_val(PREC, x)
}

fn c1_prolongation(rep: &AuditReport) -> Outcome {
    let start = Instant::now();
    let mut n = 0;
    for d in diagrams_up_to(8) {
        let model = SymplecticModel::from_reduced(&d);
        let u = prolongation(&model).map_err(|e| format!("{d}: {e}"))?;
        let closed: usize = d.rows().iter().map(|&(_, r)| r * (r - 1) / 2).sum();
        ensure(u.dim() == closed && u.dim_at(0) == closed, || format!("{d}: dim u = {}, expected {closed}", u.dim()))?;
        for k in 1..=model.diagram().max_degree() {
            ensure(u.dim_at(k) == 0, || format!("{d}: u_{k} is nonzero"))?;
        }
        n += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("prolongations took {secs:.1} s"))?;
    audit_check(rep, &["prolongation-closed-form"])?;
    Ok(format!("{n} diagrams in {secs:.2} s"))
}

fn c6_flat() -> Outcome {
    let cfg = RunConfig::default();
    let mut worst: f64 = 0.0;
    for d in le6() {
        let k = cfg.jet_order_for(d.p1()).unwrap();
        let g = flat_curve(&d, k).map_err(|e| e.to_string())?;
        let ns = NormalizationSpace::phi0(&g.model).map_err(|e| e.to_string())?;
        let f = normalize::<Float>(&g.curve, &ns, None, &cfg, PREC).map_err(|e| format!("{d}: {e}"))?;
        for m in curvature_maps(&f) {
            let b = m.block.ok_or_else(|| format!("{d}: {} unresolved", m.key))?;
            worst = worst.max(b.max_abs());
        }
        ensure(worst <= 1e-40, || format!("{d}: curvature coefficient {worst:e}"))?;
        let u0 = ns.prolongation().dim_at(0);
        let max = g.model.diagram().max_degree();
        for st in &f.trace {
            let above: usize = (st.degree + 1..=max).map(|j| g.model.g_dim(j)).sum();
            ensure(st.residual_gauge_dim == u0 + above, || format!("{d}: stage {} gauge dim {} vs {}", st.degree, st.residual_gauge_dim, u0 + above))?;
        }
    }
    Ok(format!("{} diagrams, max coefficient {worst:.1e}", le6().len()))
}

/// Largest coefficient of `n_norm - U^{-1} n_gen U` for the normal frame
/// `f` of the moved curve, with `U` checked to be a residual element.
fn recovery_error(g: &GeneratedCurve, a: &Matrix<Rational>, f: &CanonicalFrame<Float>) -> Result<f64, String> {
    let model = &g.model;
    let ap = a.mul(&model.std_permutation::<Rational>(())).to_field::<Float>(PREC);
    let apinv = linalg::inverse(&ap, 1e-40).ok_or("singular transform")?;
    let u = apinv.mul(f.gamma.value());
    let uinv = linalg::inverse(&u, 1e-40).ok_or("singular residual element")?;
    let delta = model.delta::<Float>(PREC);
    let j = model.form::<Float>(PREC);
    let grading = u.sub(&model.degree_component(&u, 0)).max_abs();
    let commute = u.mul(&delta).sub(&delta.mul(&u)).max_abs();
    let symp = u.transpose().mul(&j).mul(&u).sub(&j).max_abs();
    let res = grading.max(commute).max(symp);
    if res > 1e-30 {
        return Err(format!("U leaves the residual group ({res:e})"));
    }
    let nn = f.n_dense().ok_or("unresolved degrees")?;
    let ng = g.n.to_field::<Float>(PREC);
    let k = nn.order().min(ng.order());
    let mut err: f64 = 0.0;
    for i in 0..=k {
        let want = uinv.mul(ng.coeff(i)).mul(&u);
        err = err.max(nn.coeff(i).sub(&want).max_abs());
    }
    Ok(err)
}

fn c7_roundtrip() -> Outcome {
    let cfg = RunConfig::default();
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    let mut curves = 0;
    for d in le6() {
        let k = cfg.jet_order_for(d.p1()).unwrap();
        for seed in 0..10u64 {
            let g = random_curve(&d, seed, 2, k).map_err(|e| e.to_string())?;
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let a = random_symplectic(d.half_dim(), &mut rng);
            let ns = NormalizationSpace::phi0(&g.model).unwrap();
            let moved = g.curve.transform(&a).unwrap();
            let start = Instant::now();
            let f = normalize::<Float>(&moved, &ns, None, &cfg, PREC).map_err(|e| format!("{d} seed {seed}: {e}"))?;
            let took = start.elapsed();
            let err = recovery_error(&g, &a, &f).map_err(|e| format!("{d} seed {seed}: {e}"))?;
            if d.multiplicity_one() {
                let exact = invariant_fingerprint(&g.exact_frame(&ns).map_err(|e| e.to_string())?, 0.0);
                let got = invariant_fingerprint(&f, cfg.residual_tol());
                let dist = exact_vs_float(&exact, &got).ok_or_else(|| format!("{d} seed {seed}: fingerprint shapes differ"))?;
                ensure(dist <= 1e-30, || format!("{d} seed {seed}: fingerprint error {dist:e}"))?;
            }
            ensure(err <= 1e-30, || format!("{d} seed {seed}: coefficient error {err:e}"))?;
            if d.half_dim() <= 4 && k <= 12 {
                slowest = slowest.max(took);
            }
            worst = worst.max(err);
            curves += 1;
        }
    }
    ensure(slowest < Duration::from_secs(5), || format!("slowest curve took {slowest:?}"))?;
    Ok(format!("{curves} curves, max error {worst:.1e}, slowest (m<=4, K<=12) {:.2} s", slowest.as_secs_f64()))
}

fn exact_vs_float(a: &symcurve::normal::InvariantFingerprint<Rational>, b: &symcurve::normal::InvariantFingerprint<Float>) -> Option<f64> {
    use symcurve::jet::Jet;
    use symcurve::normal::InvariantFingerprint as Fp;
    let conv = |j: &Jet<Rational>| Jet::new(Float::with_val(PREC, j.base_point()), j.coeffs().iter().map(fl).collect());
    let a: Fp<Float> = match a {
        Fp::Complete { labels, jets, signs } => Fp::Complete { labels: labels.clone(), signs: signs.clone(), jets: jets.iter().map(|j| j.as_ref().map(conv)).collect() },
        Fp::Partial { words, traces } => Fp::Partial { words: words.clone(), traces: traces.iter().map(conv).collect() },
    };
    a.distance(b)
}

fn c8_invariance() -> Outcome {
    let cfg = RunConfig::default();
    let cases = [vec![(2, 1), (1, 1)], vec![(2, 2)], vec![(3, 1)], vec![(1, 3)]];
    let mut worst: f64 = 0.0;
    for rows in cases {
        let d = ReducedDiagram::new(rows).unwrap();
        let k = cfg.jet_order_for(d.p1()).unwrap();
        let g = random_curve(&d, 11, 2, k).map_err(|e| e.to_string())?;
        let ns = NormalizationSpace::phi0(&g.model).unwrap();
        let base = normalize::<Float>(&g.curve, &ns, None, &cfg, PREC).map_err(|e| format!("{d}: {e}"))?;
        let fp = invariant_fingerprint(&base, cfg.residual_tol());
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for i in 0..20 {
            let a = random_symplectic(d.half_dim(), &mut rng);
            let moved = g.curve.transform(&a).unwrap();
            let f = normalize::<Float>(&moved, &ns, None, &cfg, PREC).map_err(|e| format!("{d} transform {i}: {e}"))?;
            let dist = fp.distance(&invariant_fingerprint(&f, cfg.residual_tol())).ok_or_else(|| format!("{d}: fingerprint shapes differ"))?;
            ensure(dist <= 1e-30, || format!("{d} transform {i}: distance {dist:e}"))?;
            worst = worst.max(dist);
        }
    }
    Ok(format!("4 curves x 20 transforms, max distance {worst:.1e}"))
}

fn c9_symbol() -> Outcome {
    let cfg = RunConfig::default();
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for d in le6() {
        let k = cfg.jet_order_for(d.p1()).unwrap();
        let g = random_curve(&d, 5, 2, k).map_err(|e| e.to_string())?;
        let a = random_symplectic(d.half_dim(), &mut rng);
        let curve = g.curve.transform(&a).unwrap();
        let s = symbol_at::<Float>(&curve, curve.t0(), &cfg, PREC).map_err(|e| format!("{d}: {e}"))?;
        ensure(s.diagram == d, || format!("{d}: symbol reports diagram {}", s.diagram))?;
        let r = s.commutation_residual.max(s.symplectic_residual).max(s.grading_residual);
        ensure(r <= 1e-30, || format!("{d}: residual {r:e}"))?;
        worst = worst.max(r);
    }
    Ok(format!("{} diagrams, max residual {worst:.1e}", le6().len()))
}

/// The same curve with one normalization coordinate shifted by `1/2` in the
/// constant coefficient.
fn perturbed(g: &GeneratedCurve, ns: &NormalizationSpace, rng: &mut impl Rng) -> CurveSpec {
    let model = &g.model;
    let degrees = ns.n_degrees();
    let k = degrees[rng.gen_range(0..degrees.len())];
    let basis = ns.n_basis(k);
    let x = model.from_coords((), k, &basis.column(rng.gen_range(0..basis.cols())));
    let mut n = g.n.clone();
    *n.coeff_mut(0) = n.coeff(0).add(&x.scale(&Rational::from((1, 2))));
    curve_from_structure(model, n).unwrap().curve
}

fn c12_rank_one() -> Outcome {
    let cfg = RunConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut right, mut total) = (0, 0);
    let mut errors = Vec::new();
    for p in 1..=4usize {
        let d = ReducedDiagram::new(vec![(p, 1)]).unwrap();
        let k = cfg.jet_order_for(p).unwrap();
        let model = SymplecticModel::from_reduced(&d);
        let ns = NormalizationSpace::phi0(&model).unwrap();
        for i in 0..50u64 {
            let n = random_n(&ns, &mut rng, 2, k);
            let g = curve_from_structure(&model, n).unwrap();
            let a1 = random_symplectic(p, &mut rng);
            let c1 = g.curve.transform(&a1).unwrap();
            let equivalent = i % 2 == 0;
            let other = if equivalent { g.curve.clone() } else { perturbed(&g, &ns, &mut rng) };
            let a2 = random_symplectic(p, &mut rng);
            let c2 = other.transform(&a2).unwrap();
            let want = if equivalent { Verdict::Equivalent } else { Verdict::Inequivalent };
            total += 1;
            match equivalence_test(&c1, &c2, &cfg) {
                Ok(r) if r.verdict == want => right += 1,
                Ok(r) => errors.push(format!("p={p} pair {i}: {} (distance {:e})", r.verdict.as_str(), r.distance)),
                Err(e) => errors.push(format!("p={p} pair {i}: {e}")),
            }
        }
    }
    ensure(errors.is_empty(), || format!("{} errors: {}", errors.len(), errors.iter().take(3).cloned().collect::<Vec<_>>().join("; ")))?;
    Ok(format!("{right}/{total} pairs decided correctly"))
}

fn c13_frenet() -> Outcome {
    // helix (3 cos(s/5), 3 sin(s/5), 4s/5): curvature 3/25, torsion 4/25
    let h = helix(&Rational::from(3), &Rational::from(4), &Rational::from(5), 10).map_err(|e| e.to_string())?;
    let r = frenet_frame::<Float>(&h, PREC, 1e-40, false).map_err(|e| e.to_string())?;
    let want = [3.0 / 25.0, 4.0 / 25.0];
    for (j, w) in want.iter().enumerate() {
        let c = &r.curvatures[j];
        ensure((c.coeff(0).to_f64() - w).abs() <= 1e-10, || format!("k{} = {}", j + 1, c.coeff(0)))?;
        for i in 1..=c.order() {
            ensure(c.coeff(i).magnitude() <= 1e-10, || format!("k{} is not constant", j + 1))?;
        }
    }
    ensure(r.support_defect <= 1e-40 && r.skew_defect <= 1e-40, || format!("support defect {:e}", r.support_defect))?;

    // exact route: a rational tridiagonal skew structure reconstructs to a
    // frame whose structure function is exactly the same
    let n = 4;
    let t0 = Rational::new();
    let order = 8;
    let mut rjet = MatrixJet::<Rational>::zeros(t0.clone(), n, n, order);
    let ks = [(1, 2), (-2, 3), (5, 7)];
    for (j, &(p, q)) in ks.iter().enumerate() {
        let c = rjet.coeff_mut(0);
        c[(j + 1, j)] = Rational::from((p, q));
        c[(j, j + 1)] = -Rational::from((p, q));
        let c1 = rjet.coeff_mut(1);
        c1[(j + 1, j)] = Rational::from((1, j as i64 + 2));
        c1[(j, j + 1)] = -Rational::from((1, j as i64 + 2));
    }
    let (frame, _) = frenet_reconstruct(&rjet, Matrix::identity((), n), &[]).map_err(|e| e.to_string())?;
    let back = frame.transpose().mul_t(&frame.derivative().unwrap());
    let k = back.order();
    ensure(back == rjet.truncate(k), || "Frenet structure roundtrip is not exact".into())?;
    for c in back.coeffs() {
        for i in 0..n {
            for j in 0..n {
                ensure(i.abs_diff(j) == 1 || c[(i, j)].is_zero(), || format!("entry ({i},{j}) outside the first off-diagonals"))?;
            }
        }
    }

    // reconstruct o structure_function = id on exact symplectic lifts
    let mut checked = 0;
    for rows in [vec![(2, 1)], vec![(2, 1), (1, 1)], vec![(1, 2)]] {
        let d = ReducedDiagram::new(rows).unwrap();
        let g = random_curve(&d, 3, 2, 8).map_err(|e| e.to_string())?;
        let j = g.model.form::<Rational>(());
        let c = structure_function(&g.gamma, &j, 0.0).map_err(|e| e.to_string())?;
        let back = reconstruct(&c, g.gamma.value().clone());
        ensure(back == g.gamma.truncate(back.order()), || format!("{d}: jet reconstruction is not exact"))?;
        checked += 1;
    }
    Ok(format!("helix k1 = 3/25, k2 = 4/25; exact roundtrips on 1 Frenet and {checked} symplectic lifts"))
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let secs = start.elapsed().as_secs_f64();
    match &out {
        Ok(d) => println!("PASS {name} ({secs:.1} s): {d}"),
        Err(e) => println!("FAIL {name} ({secs:.1} s): {e}"),
    }
    out.is_ok()
}

fn main() {
    let start = Instant::now();
    let audit = run_audit(&AuditConfig::default());
    println!("audit of {} diagrams (<= 8 boxes) took {:.1} s", audit.diagrams.len(), audit.seconds);
    let mut ok = true;
    ok &= run("1 prolongation closed form", || c1_prolongation(&audit));
    ok &= run("2 prolongation bracket closure", || audit_check(&audit, &["prolongation-bracket-closure"]));
    ok &= run("3 coboundary characterization", || audit_check(&audit, &["coboundary-kernel", "coboundary-roundtrip"]));
    ok &= run("4 parity law", || audit_check(&audit, &["parity"]));
    ok &= run("5 complementarity and Ad-invariance", || audit_check(&audit, &["complementarity"]));
    ok &= run("6 flat-curve normalization", c6_flat);
    ok &= run("7 generator roundtrip", c7_roundtrip);
    ok &= run("8 Sp-invariance", c8_invariance);
    ok &= run("9 symbol classification", c9_symbol);
    ok &= run("10 flat-curve symmetry", || audit_check(&audit, &["flat-symmetry"]));
    ok &= run("11 unparametrized prolongation", || audit_check(&audit, &["unparametrized-sl2"]));
    ok &= run("12 rank-1 completeness", c12_rank_one);
    ok &= run("13 Frenet cross-check", c13_frenet);
    println!("total {:.1} s", start.elapsed().as_secs_f64());
    if !ok {
        std::process::exit(1);
    }
}
