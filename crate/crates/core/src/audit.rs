//! Exact checks of the algebra layer over every diagram up to a box bound.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::algebra::{
    bracket_blocks, coboundary_pairs, coboundary_test, d_operator, flat_symmetry_check, prolongation, prolongation_unchecked,
    random_graded, random_nonnegative, unparametrized_prolongation, Assignment, CoboundaryCertificate, NormalizationSpace,
};
use crate::diagram::{diagrams_up_to, ReducedDiagram};
use crate::linalg;
use crate::matrix::Matrix;
use crate::model::SymplecticModel;
use crate::scalar::Rational;

#[derive(Clone, Debug, PartialEq)]
pub struct AuditConfig {
    pub max_boxes: usize,
    pub seed: u64,
    pub coboundary_samples: usize,
    pub parity_samples: usize,
    pub random_assignments: usize,
    pub ad_trials: usize,
    pub symmetry_nonmembers: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { max_boxes: 8, seed: 0, coboundary_samples: 50, parity_samples: 100, random_assignments: 5, ad_trials: 20, symmetry_nonmembers: 50 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct DiagramAudit {
    pub diagram: ReducedDiagram,
    pub boxes: usize,
    pub dim_u: usize,
    pub dim_u_tilde: usize,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl DiagramAudit {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    pub config: AuditConfig,
    pub diagrams: Vec<DiagramAudit>,
    pub seconds: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.diagrams.iter().all(DiagramAudit::passed)
    }

    /// True when the named check passed on every diagram.
    pub fn check_passed(&self, name: &str) -> bool {
        self.diagrams.iter().all(|d| d.check(name).is_some_and(|c| c.passed))
    }

    pub fn failures(&self, name: &str) -> Vec<String> {
        self.diagrams
            .iter()
            .filter_map(|d| d.check(name).filter(|c| !c.passed).map(|c| format!("{}: {}", d.diagram, c.detail)))
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let diagrams: Vec<Value> = self
            .diagrams
            .iter()
            .map(|d| {
                json!({
                    "diagram": d.diagram.to_json(),
                    "boxes": d.boxes,
                    "dim_u": d.dim_u,
                    "dim_u_tilde": d.dim_u_tilde,
                    "passed": d.passed(),
                    "checks": d.checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "max_boxes": self.config.max_boxes,
            "seed": self.config.seed,
            "passed": self.passed(),
            "diagrams": diagrams,
        })
    }
}

pub const CHECK_NAMES: [&str; 9] = [
    "prolongation-closed-form",
    "prolongation-bracket-closure",
    "coboundary-kernel",
    "coboundary-roundtrip",
    "parity",
    "complementarity",
    "flat-symmetry",
    "unparametrized-sl2",
    "bracket-grading",
];

/// Runs every diagram with at most `max_boxes` boxes in parallel. Output
/// order and random streams depend only on the diagram list and the seed.
pub fn run_audit(cfg: &AuditConfig) -> AuditReport {
    let start = Instant::now();
    let list = diagrams_up_to(cfg.max_boxes);
    let diagrams: Vec<DiagramAudit> = list.par_iter().enumerate().map(|(i, d)| audit_diagram(d, cfg, cfg.seed.wrapping_add(i as u64))).collect();
    AuditReport { config: cfg.clone(), diagrams, seconds: start.elapsed().as_secs_f64() }
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check { name, passed, detail: detail.into() }
}

/// Coordinates of a `g^0` element: all nonnegative degrees concatenated.
fn nonneg_coords(model: &SymplecticModel, x: &Matrix<Rational>) -> Vec<Rational> {
    (0..=model.diagram().max_degree()).flat_map(|k| model.to_coords(x, k)).collect()
}

fn nonneg_from_coords(model: &SymplecticModel, v: &[Rational]) -> Matrix<Rational> {
    let mut x = Matrix::zeros((), model.dim(), model.dim());
    let mut off = 0;
    for k in 0..=model.diagram().max_degree() {
        let n = model.g_dim(k);
        x.add_assign(&model.from_coords((), k, &v[off..off + n]));
        off += n;
    }
    x
}

fn nonneg_dim(model: &SymplecticModel) -> usize {
    (0..=model.diagram().max_degree()).map(|k| model.g_dim(k)).sum()
}

/// `[delta, g^0] cap g^0` computed from the dense bracket on all of `g^0`,
/// and the common kernel of the D-conditions; compared by rank.
fn coboundary_kernel_check(model: &SymplecticModel) -> Check {
    let n = nonneg_dim(model);
    let basis: Vec<Matrix<Rational>> = (0..n)
        .map(|i| {
            let mut e = vec![Rational::new(); n];
            e[i] = Rational::from(1);
            nonneg_from_coords(model, &e)
        })
        .collect();
    let brackets: Vec<Matrix<Rational>> = basis.iter().map(|x| bracket_blocks(model, x).expect("same model")).collect();
    // x with no degree -1 part in [delta, x]
    let neg_cols: Vec<Vec<Rational>> = brackets.iter().map(|y| model.to_coords(y, -1)).collect();
    let neg = Matrix::from_columns((), model.g_dim(-1), &neg_cols);
    let ker = linalg::kernel(&neg, 0.0);
    let image_cols: Vec<Vec<Rational>> = (0..ker.cols())
        .map(|j| {
            let x = nonneg_from_coords(model, &ker.column(j));
            nonneg_coords(model, &bracket_blocks(model, &x).expect("same model"))
        })
        .collect();
    let image = if image_cols.is_empty() { Matrix::zeros((), n, 0) } else { Matrix::from_columns((), n, &image_cols) };
    // D-conditions as one linear map on g^0
    let pairs = coboundary_pairs(model);
    let d_cols: Vec<Vec<Rational>> = basis
        .iter()
        .map(|y| pairs.iter().flat_map(|&(b, rho)| d_operator(model, y, b, rho).expect("valid boxes").entries().to_vec()).collect())
        .collect();
    let rows = d_cols.first().map_or(0, Vec::len);
    let dmap = Matrix::from_columns((), rows, &d_cols);
    let dker = linalg::kernel(&dmap, 0.0);
    let ri = if image.cols() == 0 { 0 } else { linalg::rank(&image, 0.0) };
    let rk = dker.cols();
    let joint = if ri + rk == 0 { 0 } else { linalg::rank(&image.hstack(&dker), 0.0) };
    let ok = ri == rk && joint == ri;
    check("coboundary-kernel", ok, format!("dim image = {ri}, dim ker D = {rk}, dim sum = {joint}"))
}

pub fn audit_diagram(d: &ReducedDiagram, cfg: &AuditConfig, seed: u64) -> DiagramAudit {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = SymplecticModel::from_reduced(d);
    let dd = model.diagram();
    let mut checks = Vec::new();

    let u = match prolongation(&model) {
        Ok(u) => {
            checks.push(check("prolongation-closed-form", true, format!("dim u = {}", u.dim())));
            u
        }
        Err(e) => {
            checks.push(check("prolongation-closed-form", false, e.to_string()));
            prolongation_unchecked(&model)
        }
    };

    let elems = u.elements(&model);
    let mut bad = None;
    'outer: for (i, x) in elems.iter().enumerate() {
        for y in &elems[i + 1..] {
            if !u.contains(&model, &x.commutator(y)) {
                bad = Some(i);
                break 'outer;
            }
        }
    }
    checks.push(check("prolongation-bracket-closure", bad.is_none(), format!("{} basis elements", elems.len())));

    // grading: [g_k, g_l] in g_{k+l}
    let top = dd.max_degree();
    let mut grading_ok = true;
    for _ in 0..5 {
        let k = rand::Rng::gen_range(&mut rng, -top..=top);
        let l = rand::Rng::gen_range(&mut rng, -top..=top);
        let z = random_graded(&model, k, &mut rng).commutator(&random_graded(&model, l, &mut rng));
        if !z.is_zero() && model.degree_split(&z).keys().any(|&j| j != k + l) {
            grading_ok = false;
        }
    }
    checks.push(check("bracket-grading", grading_ok, "5 random pairs"));

    checks.push(coboundary_kernel_check(&model));

    let mut roundtrip_fail = None;
    for i in 0..cfg.coboundary_samples {
        let x0 = random_nonnegative(&model, &mut rng);
        let y = model.degree_at_least(&bracket_blocks(&model, &x0).expect("same model"), 0);
        match coboundary_test(&model, &y) {
            Ok(CoboundaryCertificate::Member { x }) => {
                if bracket_blocks(&model, &x).expect("same model") != y {
                    roundtrip_fail = Some(format!("sample {i}: [delta, X] != Y"));
                    break;
                }
            }
            Ok(CoboundaryCertificate::NonMember { b, rho, .. }) => {
                roundtrip_fail = Some(format!("sample {i}: coboundary rejected at ({b},{rho})"));
                break;
            }
            Err(e) => {
                roundtrip_fail = Some(format!("sample {i}: {e}"));
                break;
            }
        }
    }
    checks.push(check("coboundary-roundtrip", roundtrip_fail.is_none(), roundtrip_fail.unwrap_or_else(|| format!("{} samples", cfg.coboundary_samples))));

    // D(Y)_{b rho} for b in the row of rho: symmetric for odd left index, skew for even
    let same_row: Vec<_> = dd.admissible_pairs().into_iter().filter(|(b, rho)| b.row == rho.row).collect();
    let mut parity_fail = None;
    'par: for i in 0..cfg.parity_samples {
        let y = random_nonnegative(&model, &mut rng);
        for &(b, rho) in &same_row {
            let v = d_operator(&model, &y, b, rho).expect("valid boxes");
            let odd = dd.left_index(b) % 2 == 1;
            let ok = if odd { v == v.transpose() } else { v == v.transpose().neg() };
            if !ok {
                parity_fail = Some(format!("sample {i}: D(Y)_({b},{rho}) is not {}", if odd { "symmetric" } else { "skew" }));
                break 'par;
            }
        }
    }
    checks.push(check(
        "parity",
        parity_fail.is_none(),
        parity_fail.unwrap_or_else(|| format!("{} samples, {} same-row pairs", cfg.parity_samples, same_row.len())),
    ));

    let mut comp = Vec::new();
    let mut comp_ok = true;
    let assignments: Vec<(String, Option<Assignment>)> = std::iter::once(("phi0".to_string(), Assignment::phi0(&model).ok()))
        .chain((0..cfg.random_assignments).map(|i| (format!("random {i}"), Some(Assignment::random(&model, &mut rng)))))
        .collect();
    for (label, a) in assignments {
        let Some(a) = a else {
            comp_ok = false;
            comp.push(format!("{label}: assignment undefined"));
            continue;
        };
        match NormalizationSpace::new(&model, a) {
            Ok(ns) => {
                let rep = ns.complementarity_audit(cfg.ad_trials, &mut rng);
                if !rep.passed {
                    comp_ok = false;
                    comp.push(format!("{label}: degree {:?}, {} Ad failures", rep.first_failure, rep.ad_failures));
                }
            }
            Err(e) => {
                comp_ok = false;
                comp.push(format!("{label}: {e}"));
            }
        }
    }
    let detail = if comp_ok { format!("phi0 + {} random, {} Ad trials each", cfg.random_assignments, cfg.ad_trials) } else { comp.join("; ") };
    checks.push(check("complementarity", comp_ok, detail));

    let members_ok = elems.iter().all(|x| flat_symmetry_check(&model, x).unwrap_or(false));
    let mut rejected = 0;
    let mut drawn = 0;
    while drawn < cfg.symmetry_nonmembers {
        let y = random_nonnegative(&model, &mut rng);
        if u.contains(&model, &y) {
            continue;
        }
        drawn += 1;
        if !flat_symmetry_check(&model, &y).unwrap_or(true) {
            rejected += 1;
        }
    }
    checks.push(check(
        "flat-symmetry",
        members_ok && rejected == drawn,
        format!("{} basis elements pass: {members_ok}; {rejected}/{drawn} non-members rejected", elems.len()),
    ));

    let ut = unparametrized_prolongation(&model);
    let diff = ut.dim() as i64 - u.dim() as i64;
    checks.push(check("unparametrized-sl2", diff == 3, format!("dim u~ = {}, dim u = {}", ut.dim(), u.dim())));

    DiagramAudit {
        diagram: d.clone(),
        boxes: d.expand().boxes(),
        dim_u: u.dim(),
        dim_u_tilde: ut.dim(),
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_audit_passes() {
        let cfg = AuditConfig { max_boxes: 4, coboundary_samples: 5, parity_samples: 5, random_assignments: 2, ad_trials: 3, symmetry_nonmembers: 5, ..Default::default() };
        let rep = run_audit(&cfg);
        for d in &rep.diagrams {
            assert!(d.passed(), "{}: {:?}", d.diagram, d.checks);
        }
        assert_eq!(rep.diagrams.len(), 1 + 2 + 3 + 5);
    }
}
