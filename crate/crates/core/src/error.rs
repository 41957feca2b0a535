use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes of the solvers and geometry builders.
///
/// Variants carry enough context (entity ids, offending values) for the
/// harness to report which input was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DisconnectedGraph { unreachable_node: usize },
    NonSolitaryPort { node: usize, degree: usize },
    StenosisTooCloseToNode { edge: usize, position: f64, min_distance: f64 },
    ThicknessOutOfRange { edge: usize, theta: f64 },
    InvalidGraph(String),
    OverlapError { first: String, second: String },
    ZoomOverlap { first: String, second: String },
    TooCoarse { h: f64, max_h: f64 },
    MeshQualityFailure { worst_angle_deg: f64 },
    SingularSystem { pivot: usize },
    ResidualTooLarge { relative: f64 },
    UnknownTag(String),
    IncompatibleFlux { net: f64 },
    FloatingNetwork,
    NonClosedBoundaryIntegral { mismatch: f64 },
    OutsideChannel { edge: usize, position: f64 },
    OrderUnsupported { order: usize },
    SolvabilityViolation { defect: f64 },
    UncoveredPoint { x: f64, y: f64 },
    TruncationTooShort { end_ratio: f64 },
    WindowOutsideBranch { start: f64, end: f64, length: f64 },
    ConstraintConflict { dof: usize },
    SetupMismatch(String),
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Error::*;
        match self {
            DisconnectedGraph { unreachable_node } => {
                write!(f, "graph is disconnected: node {unreachable_node} is unreachable")
            }
            NonSolitaryPort { node, degree } => {
                write!(f, "entrance/exit node {node} has degree {degree}, expected 1")
            }
            StenosisTooCloseToNode { edge, position, min_distance } => write!(
                f,
                "stenosis at s={position} on edge {edge} is closer than {min_distance} to an endpoint"
            ),
            ThicknessOutOfRange { edge, theta } => {
                write!(f, "edge {edge} thickness factor {theta} is outside (0, 1]")
            }
            InvalidGraph(msg) => write!(f, "invalid graph: {msg}"),
            OverlapError { first, second } => {
                write!(f, "channel pieces {first} and {second} overlap")
            }
            ZoomOverlap { first, second } => {
                write!(f, "zoom zones of {first} and {second} collide")
            }
            TooCoarse { h, max_h } => {
                write!(f, "mesh size {h} too coarse, need h <= {max_h}")
            }
            MeshQualityFailure { worst_angle_deg } => {
                write!(f, "mesh quality failure: smallest angle {worst_angle_deg:.2} deg")
            }
            SingularSystem { pivot } => write!(f, "singular system at pivot {pivot}"),
            ResidualTooLarge { relative } => {
                write!(f, "linear solve residual too large ({relative:e} relative)")
            }
            UnknownTag(t) => write!(f, "unknown boundary tag {t}"),
            IncompatibleFlux { net } => write!(f, "net prescribed flux {net:e} is not zero"),
            FloatingNetwork => write!(f, "network has no pressure gauge (no entrance/exit node)"),
            NonClosedBoundaryIntegral { mismatch } => {
                write!(f, "boundary flux integral does not close (mismatch {mismatch:e})")
            }
            OutsideChannel { edge, position } => {
                write!(f, "position {position} is outside the channel of edge {edge}")
            }
            OrderUnsupported { order } => write!(f, "expansion order {order} unsupported (max 3)"),
            SolvabilityViolation { defect } => {
                write!(f, "solvability condition violated (defect {defect:e})")
            }
            UncoveredPoint { x, y } => write!(f, "point ({x}, {y}) not covered by the ansatz"),
            TruncationTooShort { end_ratio } => {
                write!(f, "truncation too short: end-window ratio {end_ratio:e}")
            }
            WindowOutsideBranch { start, end, length } => {
                write!(f, "window [{start}, {end}] outside branch of length {length}")
            }
            ConstraintConflict { dof } => write!(f, "dof {dof} constrained twice"),
            SetupMismatch(msg) => write!(f, "setup mismatch: {msg}"),
            InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
