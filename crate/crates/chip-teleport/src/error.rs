use thiserror::Error;

/// Errors emitted by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NonSquareMatrix { rows: usize, cols: usize },

    #[error("photon number mismatch: input has {input}, output has {output}")]
    PhotonMismatch { input: usize, output: usize },

    #[error("cannot sample {shots} shots from an empty distribution")]
    EmptyDistribution { shots: u64 },

    #[error("parameter out of range: {name} = {value} (expected {expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("layout parse error at line {line}: {message}")]
    LayoutParse { line: usize, message: String },

    #[error("unbound phase parameters: {names:?}")]
    UnboundPhases { names: Vec<String> },

    #[error("mode index {mode} out of range for {modes} modes")]
    BadModeIndex { mode: usize, modes: usize },

    #[error("BSM outcome has zero probability; conditional state undefined")]
    ZeroProbabilityOutcome,

    #[error("measurement set is rank deficient (rank {rank} < 4); missing directions: {missing}")]
    RankDeficientMeasurements { rank: usize, missing: String },

    #[error("reflectivity estimator domain error: {0}")]
    EstimatorDomain(String),

    #[error("cross-talk fit is ill-conditioned (condition number {cond:.3e})")]
    IllConditionedFit { cond: f64 },

    #[error("optimizer failed to converge: {0}")]
    NonConvergence(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
