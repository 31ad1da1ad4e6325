use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use serde_json::{json, Value};

use symcurve::algebra::{Assignment, NormalizationSpace};
use symcurve::audit::{run_audit, AuditConfig};
use symcurve::config::{OutputFormat, RunConfig};
use symcurve::curve::{analyze, load_curve, osculating_flag, symbol_at, CurveSpec};
use symcurve::diagram::ReducedDiagram;
use symcurve::frenet::{frenet_frame, frenet_reconstruct_sampled, EuclideanCurve};
use symcurve::io;
use symcurve::jet::MatrixJet;
use symcurve::matrix::Matrix;
use symcurve::model::SymplecticModel;
use symcurve::normal::{
    equivalence_test, flat_curve, invariant_fingerprint, normalize, random_curve, reconstruct, reconstruct_sampled, structure_function, Verdict,
};
use symcurve::scalar::{parse_rational, Field, Float, Rational};
use symcurve::Error;

const EXIT_VERDICT: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_NOINPUT: u8 = 66;

#[derive(Parser)]
#[command(name = "symcurve", version, about = "Canonical frames and invariants of curves in Lagrangian Grassmannians")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Float precision in bits.
    #[arg(long, global = true, env = "SYMCURVE_PRECISION", default_value_t = 192)]
    precision_bits: u32,
    /// Jet order for generated curves; must be at least 2*p1 + 2.
    #[arg(long, global = true)]
    jet_order: Option<usize>,
    /// Relative rank tolerance, default 2^(-precision/2).
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Leave the convention-audit block out of reports.
    #[arg(long, global = true)]
    no_convention_audit: bool,
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Regularity, monotonicity and Young diagram of a curve.
    Analyze {
        #[arg(long)]
        curve: PathBuf,
    },
    /// Symbol of a curve and its conjugator to the normal form.
    Symbol {
        #[arg(long)]
        curve: PathBuf,
        /// Parameter value, default the base point.
        #[arg(long)]
        at: Option<String>,
    },
    /// Universal prolongation of the normal symbol of a diagram.
    Prolongation {
        /// Diagram JSON, inline or a file path.
        #[arg(long)]
        diagram: String,
    },
    /// Normalization space and complementarity audit.
    NormalizationSpace {
        #[arg(long)]
        diagram: String,
        #[arg(long, value_enum, default_value_t = AssignmentKind::Phi0)]
        assignment: AssignmentKind,
        #[arg(long, default_value_t = 20)]
        ad_trials: usize,
    },
    /// Normal frame, structure function and curvature maps.
    Normalize {
        #[arg(long)]
        curve: PathBuf,
        /// Also write the normal frame jet.
        #[arg(long)]
        include_frame: bool,
    },
    /// Invariant fingerprint of a curve.
    Invariants {
        #[arg(long)]
        curve: PathBuf,
    },
    /// Decide symplectic equivalence of two curves.
    Equivalent { a: PathBuf, b: PathBuf },
    /// The flat curve of a diagram.
    Flat {
        #[arg(long)]
        diagram: String,
    },
    /// A curve with prescribed diagram and random polynomial normal structure function.
    RandomCurve {
        #[arg(long)]
        diagram: String,
        #[arg(long, default_value_t = 2)]
        poly_degree: usize,
    },
    /// Frame from a structure function: jet mode, or sampled with --steps.
    Reconstruct {
        /// Matrix jet JSON with optional "initial" matrix and "diagram".
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value = "1/100")]
        step_size: String,
        #[arg(long, default_value_t = 1e-10)]
        defect_budget: f64,
    },
    /// Frenet frame and curvatures of a Euclidean curve.
    Frenet {
        #[arg(long)]
        curve: PathBuf,
        /// Reject curves not parametrized by arc length.
        #[arg(long)]
        no_reparametrize: bool,
        /// Integrate the curvatures back and report the reconstruction defect.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Exact algebra checks over all diagrams up to a box bound.
    Audit {
        #[arg(long, default_value_t = 8)]
        max_boxes: usize,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum AssignmentKind {
    Phi0,
    Random,
}

enum Failure {
    Lib(Error),
    Input(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<(Value, u8), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::Lib(Error::BadFormat(format!("{}: {e}", path.display()))))
}

fn curve_file(path: &Path) -> Result<CurveSpec, Failure> {
    Ok(load_curve(&read(path)?)?)
}

fn diagram_arg(s: &str) -> Result<ReducedDiagram, Failure> {
    let text = if s.trim_start().starts_with('{') { s.to_string() } else { read(Path::new(s))? };
    let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Lib(Error::BadFormat(format!("diagram: {e}"))))?;
    Ok(ReducedDiagram::from_json(&v)?)
}

fn rational_arg(s: &str) -> Result<Rational, Failure> {
    parse_rational(s).map_err(|e| Failure::Usage(e.to_string()))
}

fn run(cli: &Cli, cfg: &RunConfig) -> Outcome {
    let p = cfg.precision_bits;
    let tol = cfg.residual_tol();
    let meta = |cmd: &str, model: Option<&SymplecticModel>| io::meta::<Float>(cmd, cfg, p, model);
    let exact_meta = |cmd: &str, model: Option<&SymplecticModel>| io::meta::<Rational>(cmd, cfg, (), model);
    match &cli.command {
        Command::Analyze { curve } => {
            let c = curve_file(curve)?;
            let a = analyze(&c, cfg)?;
            let flag = osculating_flag(&c)?;
            let model = SymplecticModel::from_reduced(&a.diagram);
            let mut body = io::analysis_json(&a);
            let depth = flag.depth() as i32;
            body["flag_dims"] = json!((-depth..=depth).map(|j| json!({"j": j, "dim": flag.dim(j)})).collect::<Vec<_>>());
            Ok((io::with_meta(exact_meta("analyze", Some(&model)), body), 0))
        }
        Command::Symbol { curve, at } => {
            let c = curve_file(curve)?;
            let t = match at {
                Some(s) => rational_arg(s)?,
                None => c.t0().clone(),
            };
            let s = symbol_at::<Float>(&c, &t, cfg, p)?;
            let model = SymplecticModel::from_reduced(&s.diagram);
            let mut body = io::symbol_json(&s);
            body["t"] = io::scalar_json(&t);
            Ok((io::with_meta(meta("symbol", Some(&model)), body), 0))
        }
        Command::Prolongation { diagram } => {
            let d = diagram_arg(diagram)?;
            let model = SymplecticModel::from_reduced(&d);
            Ok((io::with_meta(exact_meta("prolongation", Some(&model)), io::prolongation_json(&d)?), 0))
        }
        Command::NormalizationSpace { diagram, assignment, ad_trials } => {
            let d = diagram_arg(diagram)?;
            let model = SymplecticModel::from_reduced(&d);
            let a = match assignment {
                AssignmentKind::Phi0 => Assignment::phi0(&model)?,
                AssignmentKind::Random => Assignment::random(&model, &mut rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed)),
            };
            let ns = NormalizationSpace::new(&model, a)?;
            let body = io::normalization_space_json(&ns, *ad_trials, cfg.seed);
            let code = if body["passed"] == json!(true) { 0 } else { EXIT_VERDICT };
            Ok((io::with_meta(exact_meta("normalization-space", Some(&model)), body), code))
        }
        Command::Normalize { curve, include_frame } => {
            let c = curve_file(curve)?;
            let a = analyze(&c, cfg)?;
            let model = SymplecticModel::from_reduced(&a.diagram);
            let ns = NormalizationSpace::phi0(&model)?;
            let f = normalize::<Float>(&c, &ns, None, cfg, p)?;
            Ok((io::with_meta(meta("normalize", Some(&model)), io::frame_json(&f, tol, *include_frame)), 0))
        }
        Command::Invariants { curve } => {
            let c = curve_file(curve)?;
            let a = analyze(&c, cfg)?;
            let model = SymplecticModel::from_reduced(&a.diagram);
            let ns = NormalizationSpace::phi0(&model)?;
            let f = normalize::<Float>(&c, &ns, None, cfg, p)?;
            let body = json!({"diagram": a.diagram.to_json(), "fingerprint": io::fingerprint_json(&invariant_fingerprint(&f, tol))});
            Ok((io::with_meta(meta("invariants", Some(&model)), body), 0))
        }
        Command::Equivalent { a, b } => {
            let ca = curve_file(a)?;
            let cb = curve_file(b)?;
            let r = equivalence_test(&ca, &cb, cfg)?;
            let code = if r.verdict == Verdict::Inequivalent { EXIT_VERDICT } else { 0 };
            Ok((io::with_meta(meta("equivalent", None), io::equivalence_json(&r)), code))
        }
        Command::Flat { diagram } => {
            let d = diagram_arg(diagram)?;
            let k = cfg.jet_order_for(d.p1())?;
            let g = flat_curve(&d, k)?;
            let mut body = g.curve.to_json();
            body["diagram"] = d.to_json();
            Ok((io::with_meta(exact_meta("flat", Some(&g.model)), body), 0))
        }
        Command::RandomCurve { diagram, poly_degree } => {
            let d = diagram_arg(diagram)?;
            let k = cfg.jet_order_for(d.p1())?;
            let g = random_curve(&d, cfg.seed, *poly_degree, k)?;
            let mut body = g.curve.to_json();
            body["generator"] = json!({"diagram": d.to_json(), "poly_degree": poly_degree, "n": io::matrix_jet_json(&g.n)});
            Ok((io::with_meta(exact_meta("random-curve", Some(&g.model)), body), 0))
        }
        Command::Reconstruct { structure, steps, step_size, defect_budget } => {
            let v = read_json(structure)?;
            let c = io::parse_matrix_jet(&v)?;
            if c.rows() != c.cols() || c.rows() % 2 == 1 {
                return Err(Failure::Lib(Error::ShapeMismatch(format!("structure function is {} x {}", c.rows(), c.cols()))));
            }
            let model = v.get("diagram").map(ReducedDiagram::from_json).transpose()?.map(|d| SymplecticModel::from_reduced(&d));
            let n = c.rows();
            let form = match &model {
                Some(m) if m.dim() == n => m.form::<Rational>(()),
                Some(_) => return Err(Failure::Lib(Error::ModelMismatch)),
                None => SymplecticModel::std_form::<Rational>((), n / 2),
            };
            let initial = match v.get("initial") {
                Some(x) => io::parse_matrix_json(x)?,
                None => Matrix::identity((), n),
            };
            symcurve::normal::check_sp(&c, &form, 0.0)?;
            match steps {
                None => {
                    let g = reconstruct(&c, initial);
                    let back = structure_function(&g, &form, 0.0)?;
                    let roundtrip = back == c;
                    let mut body = json!({"mode": "jet", "frame": io::matrix_jet_json(&g), "roundtrip_exact": roundtrip});
                    if let Some(m) = &model {
                        let frame = g.lmul_const(&m.std_permutation::<Rational>(())).select_columns(&m.mirror_indices());
                        if let Ok(curve) = CurveSpec::new(frame) {
                            body["curve"] = curve.to_json();
                        }
                    }
                    Ok((io::with_meta(exact_meta("reconstruct", model.as_ref()), body), 0))
                }
                Some(steps) => {
                    let h = Float::from_rational(p, &rational_arg(step_size)?);
                    let cf: MatrixJet<Float> = c.to_field(p);
                    let formf = form.to_field::<Float>(p);
                    let t0 = Float::from_rational(p, c.base_point());
                    let path = reconstruct_sampled(|t| cf.eval(t), initial.to_field(p), &formf, t0, h, *steps, *defect_budget)?;
                    let body = json!({
                        "mode": "sampled",
                        "steps": steps,
                        "times": path.times.iter().map(io::scalar_json).collect::<Vec<_>>(),
                        "defects": path.defects.iter().map(|&d| io::f64_json(d)).collect::<Vec<_>>(),
                        "final_frame": io::matrix_json(path.frames.last().expect("at least the initial frame")),
                    });
                    Ok((io::with_meta(meta("reconstruct", model.as_ref()), body), 0))
                }
            }
        }
        Command::Frenet { curve, no_reparametrize, steps } => {
            let v = read_json(curve)?;
            let c = EuclideanCurve::from_json(&v)?;
            let f = frenet_frame::<Float>(&c, p, tol, !no_reparametrize)?;
            let mut body = io::frenet_json(&f);
            if let Some(steps) = steps {
                let h = Float::from_rational(p, &Rational::from((1, 64)));
                let r = f.structure.clone();
                let e0 = f.frame.value().clone();
                let x0: Vec<Float> = c.gamma().value().column(0).iter().map(|x| Float::from_rational(p, x)).collect();
                let (path, points) = frenet_reconstruct_sampled(|t| r.eval(t), e0, x0, r.base_point().clone(), h, *steps, 1e-12)?;
                body["sampled_reconstruction"] = json!({
                    "step": "1/64",
                    "orthonormality_defects": path.defects.iter().map(|&d| io::f64_json(d)).collect::<Vec<_>>(),
                    "points": points.iter().map(|pt| pt.iter().map(io::scalar_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
                });
            }
            Ok((io::with_meta(meta("frenet", None), body), 0))
        }
        Command::Audit { max_boxes } => {
            let acfg = AuditConfig { max_boxes: *max_boxes, seed: cfg.seed, ..Default::default() };
            let rep = run_audit(&acfg);
            let code = if rep.passed() { 0 } else { EXIT_VERDICT };
            Ok((io::with_meta(exact_meta("audit", None), io::audit_json(&rep)), code))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) { 0 } else { EXIT_USAGE };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let g = &cli.global;
    let cfg = RunConfig {
        precision_bits: g.precision_bits,
        jet_order: g.jet_order,
        rank_tol: g.rank_tol,
        seed: g.seed,
        format: match g.format {
            Format::Json => OutputFormat::Json,
            Format::Text => OutputFormat::Text,
        },
        convention_audit: !g.no_convention_audit,
    };
    if let Err(e) = cfg.validate() {
        eprintln!("symcurve: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(&cli, &cfg) {
        Ok((report, code)) => {
            let text = io::render(&report, cfg.format);
            match &g.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("symcurve: {}: {e}", path.display());
                        return ExitCode::from(EXIT_NOINPUT);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::from(code)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("symcurve: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("symcurve: {msg}");
            ExitCode::from(EXIT_NOINPUT)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("symcurve: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
