use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("generators {0} and {1} do not commute")]
    NonCommuting(usize, usize),
    #[error("generators {0:?} are dependent (their product is proportional to the identity)")]
    Dependent(Vec<usize>),
    #[error("generator {0} carries an imaginary phase")]
    ImaginaryPhase(usize),
    #[error("stabilizer group needs at least one generator")]
    EmptyGenerators,

    #[error("{qubits} qubits exceeds the dense cap of {cap}")]
    DenseCapExceeded { qubits: usize, cap: usize },
    #[error("qubit index {index} out of range for {qubits} qubits")]
    QubitOutOfRange { index: usize, qubits: usize },
    #[error("qubit index {0} repeated")]
    RepeatedQubit(usize),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("state has overlap {0:.3e} with the codespace")]
    ZeroOverlap(f64),
    #[error("pass probability {p_pass} is below the hypothesis threshold {threshold}")]
    HypothesisViolated { p_pass: f64, threshold: f64 },

    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("vertex {vertex} out of range for {count} vertices")]
    VertexOutOfRange { vertex: usize, count: usize },

    #[error("qubit {0} measured twice")]
    QubitReused(usize),
    #[error("invalid measurement pattern: {0}")]
    InvalidPattern(String),
    #[error("no measurement pattern registered for challenge {0}")]
    MissingPattern(u64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("not a no-instance: h_stab = {h} exceeds b = {b}")]
    NotNoInstance { h: f64, b: f64 },

    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
