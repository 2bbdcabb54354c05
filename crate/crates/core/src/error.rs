use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("triangle inequality violated: d({0},{2}) > d({0},{1}) + d({1},{2})")]
    TriangleViolation(usize, usize, usize),

    #[error("distance matrix is not a metric at ({0},{1}): {2}")]
    AsymmetricDistance(usize, usize, String),

    #[error("point {0} has nonpositive reference mass {1}")]
    NonpositiveMass(usize, f64),

    #[error("edge graph is disconnected: point {0} unreachable from point 0")]
    DisconnectedGraph(usize),

    #[error("invalid edge ({0},{1}): {2}")]
    BadEdge(usize, usize, String),

    #[error("invalid generator spec: {0}")]
    BadSpec(String),

    #[error("invalid probability measure: {0}")]
    BadMeasure(String),

    #[error("difference quotient not monotone at point {point}: drop {drop:e}")]
    NonMonotoneQuotient { point: usize, drop: f64 },

    #[error("functional does not annihilate constants (total {0:e})")]
    Unrepresentable(f64),

    #[error("weighted form is singular: functional has mass {0:e} on a component cut off by the measure")]
    SingularForm(f64),

    #[error("transport problem infeasible: {0}")]
    Infeasible(String),

    #[error("network simplex failed to leave a degenerate basis after {0} pivots")]
    DegenerateBasis(usize),

    #[error("curve endpoints do not match (deviation {0:e})")]
    EndpointMismatch(f64),

    #[error("invalid curve: {0}")]
    BadCurve(String),

    #[error("coupling marginal mismatch at step {step}: deficit {deficit:e}")]
    MarginalMismatch { step: usize, deficit: f64 },

    #[error("invalid restriction indices {0}..{1} for {2} time samples")]
    BadIndices(usize, usize, usize),

    #[error("plan has more than {0} paths")]
    PathExplosion(usize),

    #[error("invalid plan: {0}")]
    BadPlan(String),

    #[error("linear solve failed: {0}")]
    SolverFailure(String),

    #[error("invalid initial density: {0}")]
    BadInitial(String),

    #[error("space does not support displacement interpolation: {0}")]
    UnsupportedSpace(String),

    #[error("potential is not c-concave (deficit {0:e})")]
    NotCConcave(f64),
}
