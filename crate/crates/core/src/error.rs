use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty diagram")]
    EmptyDiagram,
    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),
    #[error("box {0} is not the last box of its row")]
    NotLastBox(String),
    #[error("box {b} lies in a higher row than {rho}")]
    RowOrderViolated { b: String, rho: String },
    #[error("assignment rule selects {count} pairs in the chain of {chain}")]
    AssignmentAmbiguous { chain: String, count: usize },
    #[error("box out of range: {0}")]
    BoxOutOfRange(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("operands belong to different models")]
    ModelMismatch,
    #[error("input columns are linearly dependent")]
    RankDeficientInput,
    #[error("jet is not invertible (vanishing constant term)")]
    NonInvertibleJet,
    #[error("scalar backends differ: {0}")]
    BackendMismatch(String),
    #[error("jet orders or base points differ: {0}")]
    OrderMismatch(String),
    #[error("nilpotency bound violated")]
    NilpotencyViolated,
    #[error("prolongation disagrees with the closed form: {0}")]
    ClosedFormMismatch(String),
    #[error("coboundary reconstruction is inconsistent: {0}")]
    InconsistentReconstruction(String),
    #[error("normalization condition fails in degree {degree}: {detail}")]
    NotComplementary { degree: i32, detail: String },
    #[error("frame is not Lagrangian: sigma(col {i}, col {j}) = {value}")]
    NotLagrangian { i: usize, j: usize, value: String },
    #[error("frame columns are dependent at the base point")]
    RankDeficientFrame,
    #[error("bad format: {0}")]
    BadFormat(String),
    #[error("rank decision inside the tolerance band: {0}")]
    PrecisionExhausted(String),
    #[error("curve is not monotone: {0}")]
    NotMonotone(String),
    #[error("curve is not equiregular: {0}")]
    NotEquiregular(String),
    #[error("curve is not ample: {0}")]
    NotAmple(String),
    #[error("jet order too low: {0}")]
    JetOrderTooLow(String),
    #[error("stage {stage} residual {residual} exceeds tolerance")]
    StageResidualTooLarge { stage: i32, residual: f64 },
    #[error("symplectic defect {defect} at step {step} exceeds budget")]
    StepSizeTooLarge { step: usize, defect: f64 },
    #[error("value is not in sp(V): {0}")]
    NotInSp(String),
    #[error("curve is not parametrized by arc length: {0}")]
    NotArcLength(String),
    #[error("regularity fails: {0}")]
    RegularityFailed(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
