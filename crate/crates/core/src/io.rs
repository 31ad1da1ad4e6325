//! JSON reports.
//!
//! Every report carries `"schema": "symcurve/1"`, the backend, precision,
//! tolerances and (unless disabled) the convention audit. Rationals are
//! written as `"p/q"`, floats as full-precision decimal strings. Nothing
//! time- or machine-dependent goes into a report.

use serde_json::{json, Map, Value};

use crate::algebra::{prolongation, unparametrized_prolongation, NormalizationSpace};
use crate::audit::AuditReport;
use crate::config::{OutputFormat, RunConfig};
use crate::curve::{cell_label, CurveAnalysis, RegularityReport, SymbolResult, SAMPLE_TOL};
use crate::diagram::ReducedDiagram;
use crate::error::{Error, Result};
use crate::frenet::FrenetResult;
use crate::jet::{Jet, MatrixJet};
use crate::matrix::Matrix;
use crate::model::SymplecticModel;
use crate::normal::{curvature_maps, invariant_fingerprint, CanonicalFrame, EquivalenceReport, InvariantFingerprint};
use crate::scalar::{parse_rational, Field, Rational};

pub const SCHEMA: &str = "symcurve/1";

pub fn scalar_json<F: Field>(x: &F) -> Value {
    Value::String(x.to_plain_string())
}

pub fn f64_json(x: f64) -> Value {
    Value::String(format!("{x:e}"))
}

pub fn jet_json<F: Field>(j: &Jet<F>) -> Value {
    json!({
        "t0": scalar_json(j.base_point()),
        "order": j.order(),
        "coefficients": j.coeffs().iter().map(scalar_json).collect::<Vec<_>>(),
    })
}

pub fn matrix_json<F: Field>(m: &Matrix<F>) -> Value {
    Value::Array((0..m.rows()).map(|i| Value::Array(m.row(i).iter().map(scalar_json).collect())).collect())
}

pub fn matrix_jet_json<F: Field>(m: &MatrixJet<F>) -> Value {
    json!({
        "t0": scalar_json(m.base_point()),
        "order": m.order(),
        "rows": m.rows(),
        "cols": m.cols(),
        "coefficients": m.coeffs().iter().map(matrix_json).collect::<Vec<_>>(),
    })
}

fn parse_matrix(v: &Value) -> Result<Matrix<Rational>> {
    let rows = v.as_array().ok_or_else(|| Error::BadFormat("matrix must be an array of rows".into()))?;
    let parsed: Vec<Vec<Rational>> = rows
        .iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(|| Error::BadFormat("matrix row must be an array".into()))?
                .iter()
                .map(|x| match x {
                    Value::String(s) => parse_rational(s),
                    Value::Number(n) => parse_rational(&n.to_string()),
                    other => Err(Error::BadFormat(format!("expected a number, got {other}"))),
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    if parsed.is_empty() || parsed.iter().any(|r| r.len() != parsed[0].len()) {
        return Err(Error::BadFormat("matrix rows must be nonempty and of equal length".into()));
    }
    Ok(Matrix::from_rational_rows(&parsed))
}

pub fn parse_matrix_json(v: &Value) -> Result<Matrix<Rational>> {
    parse_matrix(v)
}

/// Reads the output of [`matrix_jet_json`] back (rational entries only).
pub fn parse_matrix_jet(v: &Value) -> Result<MatrixJet<Rational>> {
    let t0 = match v.get("t0") {
        Some(Value::String(s)) => parse_rational(s)?,
        Some(Value::Number(n)) => parse_rational(&n.to_string())?,
        None => Rational::new(),
        Some(other) => return Err(Error::BadFormat(format!("bad t0 {other}"))),
    };
    let coeffs = v.get("coefficients").and_then(Value::as_array).ok_or_else(|| Error::BadFormat("missing coefficients".into()))?;
    let mats: Vec<Matrix<Rational>> = coeffs.iter().map(parse_matrix).collect::<Result<_>>()?;
    if mats.is_empty() || mats.iter().any(|m| m.rows() != mats[0].rows() || m.cols() != mats[0].cols()) {
        return Err(Error::BadFormat("coefficient matrices must be nonempty and of one shape".into()));
    }
    Ok(MatrixJet::from_coeffs(t0, mats))
}

/// Sign conventions and readings that affect the numbers in a report.
pub fn convention_audit(model: Option<&SymplecticModel>) -> Value {
    let one_box = SymplecticModel::from_reduced(&ReducedDiagram::new(vec![(1, 1)]).expect("valid"));
    let m = model.unwrap_or(&one_box);
    let s = m.convention_sign();
    json!({
        "convention_sign": s,
        "degree_zero_form": if s < 0 { "sigma(delta x, x) is negative definite on V_0" } else { "sigma(delta x, x) is positive definite on V_0" },
        "monotone_match": "nonincreasing curves get symplectic frames (kappa = 1); nondecreasing curves get frames with Gamma^T J Gamma = -J (kappa = -1)",
        "degree_convention": "deg = |c| - 1 on the mirror side, -c on the diagram side; Darboux-paired degrees sum to -1",
        "symbol_recipe_top_degree": "p1 - 1 with sign (-1)^j",
        "phi0_same_row": "left index of b odd: (m(e), e); even: (m(r(e)), e)",
        "curvature_map_keys": "\"(row_b,c_b)x(row_a,c_a)\" is the block C_ba; also written elsewhere as the pair (a, m(b))",
        "equiregularity": "certified at t0 and at sample points only",
    })
}

/// Common header of every report.
pub fn meta<F: Field>(command: &str, cfg: &RunConfig, ctx: F::Ctx, model: Option<&SymplecticModel>) -> Map<String, Value> {
    let (hi, lo) = cfg.rank_band();
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(command));
    m.insert("backend".into(), json!(F::backend(ctx)));
    m.insert("precision_bits".into(), json!(cfg.precision_bits));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert(
        "tolerances".into(),
        json!({"rank_hi": f64_json(hi), "rank_lo": f64_json(lo), "residual": f64_json(cfg.residual_tol()), "sample": f64_json(SAMPLE_TOL)}),
    );
    if cfg.convention_audit {
        m.insert("convention_audit".into(), convention_audit(model));
    }
    m
}

pub fn with_meta(mut head: Map<String, Value>, body: Value) -> Value {
    if let Value::Object(b) = body {
        for (k, v) in b {
            head.insert(k, v);
        }
    } else {
        head.insert("result".into(), body);
    }
    Value::Object(head)
}

pub fn regularity_json(r: &RegularityReport) -> Value {
    json!({
        "t0": scalar_json(&r.t0),
        "sample_points": r.sample_points.iter().map(scalar_json).collect::<Vec<_>>(),
        "extension_dims": r.sampled_dims,
        "equiregular": r.equiregular,
        "equiregular_certificate": "probabilistic: compared at t0 and the sample points",
        "ample": r.ample,
        "ample_witness": r.ample_witness,
        "monotone": r.monotone.as_str(),
        "inertia": r.inertia.iter().map(|&(p, n, z)| json!({"positive": p, "negative": n, "zero": z})).collect::<Vec<_>>(),
        "velocity_eigenvalues_t0": r.eigenvalues.iter().map(|&e| f64_json(e)).collect::<Vec<_>>(),
        "young_columns": r.young.as_ref().map(|y| y.columns().to_vec()),
        "diagram": r.reduced.as_ref().map(|d| d.to_json()),
    })
}

pub fn analysis_json(a: &CurveAnalysis) -> Value {
    json!({"regularity": regularity_json(&a.report), "diagram": a.diagram.to_json(), "sgn": a.sgn})
}

pub fn symbol_json<F: Field>(s: &SymbolResult<F>) -> Value {
    json!({
        "diagram": s.diagram.to_json(),
        "delta_t": matrix_json(&s.delta_t),
        "conjugator": matrix_json(&s.q),
        "commutation_residual": f64_json(s.commutation_residual),
        "symplectic_residual": f64_json(s.symplectic_residual),
        "grading_residual": f64_json(s.grading_residual),
    })
}

pub fn prolongation_json(d: &ReducedDiagram) -> Result<Value> {
    let model = SymplecticModel::from_reduced(d);
    let u = prolongation(&model)?;
    let ut = unparametrized_prolongation(&model);
    let per = |g: &crate::algebra::GradedSubspace| -> Value {
        Value::Object(g.bases.iter().map(|(k, b)| (k.to_string(), json!(b.cols()))).collect())
    };
    let closed: usize = d.rows().iter().map(|&(_, r)| r * (r - 1) / 2).sum();
    Ok(json!({
        "diagram": d.to_json(),
        "dim_u": u.dim(),
        "dim_u_by_degree": per(&u),
        "closed_form_dim": closed,
        "closed_form": d.rows().iter().map(|&(_, r)| format!("so_{r}")).collect::<Vec<_>>().join(" + "),
        "dim_u_tilde": ut.dim(),
        "dim_u_tilde_by_degree": per(&ut),
        "basis": u.elements(&model).iter().map(matrix_json).collect::<Vec<_>>(),
    }))
}

pub fn normalization_space_json(ns: &NormalizationSpace, audit_trials: usize, seed: u64) -> Value {
    use rand::SeedableRng;
    let model = ns.model();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let rep = ns.complementarity_audit(audit_trials, &mut rng);
    let degrees: Vec<Value> = rep
        .degrees
        .iter()
        .map(|a| {
            let labels: Vec<String> =
                ns.n_labels(a.degree).iter().map(|((b, rho), i)| format!("{}x{}#{i}", cell_label(*b), cell_label(*rho))).collect();
            json!({"degree": a.degree, "dim_g": a.g, "dim_u": a.u, "dim_image": a.image, "dim_n": a.n, "direct_sum": a.ok, "free_blocks": labels})
        })
        .collect();
    let d = model.diagram();
    let assignment: Vec<Value> = ns
        .assignment()
        .pairs
        .iter()
        .map(|&((b, rho), (beta, alpha))| {
            json!({"pair": format!("{}x{}", cell_label(b), cell_label(rho)), "chosen": format!("{}x{}", cell_label(beta), cell_label(alpha)), "degree": d.deg(beta) - d.deg(alpha)})
        })
        .collect();
    json!({
        "diagram": d.reduced().to_json(),
        "total_dim_n": ns.total_n_dim(),
        "assignment": assignment,
        "degrees": degrees,
        "ad_trials": rep.ad_trials,
        "ad_failures": rep.ad_failures,
        "passed": rep.passed,
    })
}

pub fn fingerprint_json<F: Field>(f: &InvariantFingerprint<F>) -> Value {
    match f {
        InvariantFingerprint::Complete { labels, jets, signs } => json!({
            "kind": "complete",
            "row_signs": signs,
            "invariants": labels.iter().zip(jets).map(|(l, j)| json!({"map": l, "jet": j.as_ref().map(jet_json)})).collect::<Vec<_>>(),
        }),
        InvariantFingerprint::Partial { words, traces } => json!({
            "kind": "partial",
            "note": "traces of closed words of length <= 4 in the curvature blocks; not a complete system",
            "invariants": words.iter().zip(traces).map(|(w, j)| json!({"word": w, "jet": jet_json(j)})).collect::<Vec<_>>(),
        }),
    }
}

pub fn frame_json<F: Field>(f: &CanonicalFrame<F>, tol: f64, include_frame: bool) -> Value {
    let maps: Map<String, Value> = curvature_maps(f)
        .iter()
        .map(|m| (m.key.clone(), json!({"degree": m.degree, "block": m.block.as_ref().map(matrix_jet_json)})))
        .collect();
    let trace: Vec<Value> = f
        .trace
        .iter()
        .map(|s| {
            json!({
                "stage": s.degree,
                "residual_gauge_dim": s.residual_gauge_dim,
                "removed_dim": s.removed_dim,
                "correction": f64_json(s.correction),
                "residual": f64_json(s.residual),
                "lower_degree_change": f64_json(s.lower_change),
                "order": s.order,
            })
        })
        .collect();
    let n: Map<String, Value> = f.n_coords.iter().map(|(k, js)| (k.to_string(), Value::Array(js.iter().map(jet_json).collect()))).collect();
    let mut out = json!({
        "diagram": f.diagram().to_json(),
        "sgn": f.sgn,
        "kappa": f.kappa,
        "curvature_maps": maps,
        "n_coordinates": n,
        "unresolved_degrees": f.unresolved(),
        "gauge_trace": trace,
        "final_residual": f64_json(f.final_residual),
        "fiber": matrix_json(&f.fiber),
        "fingerprint": fingerprint_json(&invariant_fingerprint(f, tol)),
    });
    if include_frame {
        out["frame"] = matrix_jet_json(&f.gamma);
    }
    out
}

pub fn equivalence_json(r: &EquivalenceReport) -> Value {
    json!({
        "verdict": r.verdict.as_str(),
        "reason": r.reason,
        "distance": f64_json(r.distance),
        "row_signs": r.signs,
    })
}

pub fn frenet_json<F: Field>(f: &FrenetResult<F>) -> Value {
    json!({
        "reparametrized_by_arc_length": f.reparametrized,
        "curvatures": f.curvatures.iter().map(jet_json).collect::<Vec<_>>(),
        "structure_function": matrix_jet_json(&f.structure),
        "affine_structure_function": matrix_jet_json(&f.affine_structure),
        "orthonormality_defect": f64_json(f.orthonormality_defect),
        "skew_defect": f64_json(f.skew_defect),
        "support_defect": f64_json(f.support_defect),
    })
}

pub fn audit_json(r: &AuditReport) -> Value {
    r.to_json()
}

/// Renders a report in the requested format.
pub fn render(v: &Value, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(v).expect("values serialize");
            s.push('\n');
            s
        }
        OutputFormat::Text => {
            let mut out = String::new();
            flatten("", v, &mut out);
            out
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, out);
            }
        }
        Value::Array(xs) if xs.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let items: Vec<String> = xs.iter().map(plain).collect();
            out.push_str(&format!("{prefix}: [{}]\n", items.join(", ")));
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        other => out.push_str(&format!("{prefix}: {}\n", plain(other))),
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
