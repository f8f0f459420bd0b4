use alloc::string::String;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("axis {axis} out of range for rank-{rank} tensor")]
    AxisOutOfRange { axis: usize, rank: usize },
    #[error("axis order is not a permutation")]
    NotAPermutation,
    #[error("left/right partition must be a nonempty proper subset of the axes")]
    EmptyPartition,
    #[error("cutoff must be nonnegative, got {0}")]
    NegativeCutoff(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("unknown edge {0}")]
    UnknownEdge(usize),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("edge {0} is not an internal edge")]
    NotInternal(usize),
    #[error("sites are not adjacent")]
    NotAdjacent,
    #[error("periodic patch needs at least 2 cells per direction, got {nx}x{ny}")]
    PatchTooSmall { nx: usize, ny: usize },
    #[error("network is not closed ({0} open edges)")]
    NotClosed(usize),

    #[error("belief propagation did not converge after {sweeps} sweeps (residual {residual:e})")]
    BpNonConvergence { sweeps: usize, residual: f64 },
    #[error("message on edge {0} collapsed to zero norm")]
    DegenerateMessage(usize),
    #[error("message pair on edge {0} has vanishing overlap; cannot normalize")]
    GaugeDegenerate(usize),
    #[error("fixed point must be normalized first")]
    NotNormalized,
    #[error("vacuum scalar of node {0} is zero")]
    ZeroVacuum(usize),

    #[error("network has {0} edges; brute-force configuration sum is limited to 24")]
    TooManyEdges(usize),
    #[error("excitations share node {0}")]
    OverlappingSupports(usize),
    #[error("all excitation weights are zero")]
    AllWeightsZero,
    #[error("excitation references an edge absent from the network")]
    ExcitationOutsideNetwork,

    #[error("series self-consistency did not converge after {iterations} iterations (last change {change:e})")]
    SeriesNonConvergence { iterations: usize, change: f64 },

    #[error("contraction exceeds size bound ({0} entries)")]
    SizeBoundExceeded(usize),
    #[error("power iteration stagnated (relative change {0:e})")]
    Stagnation(f64),
    #[error("reference unreliable: discarded weight {0:e} exceeds 1e-6")]
    ReferenceUnreliable(f64),

    #[error("unsupported geometry for this operation")]
    UnsupportedGeometry,
    #[error("physical dimension {d} exceeds the available isometry rank {rank}")]
    IsometryTooLarge { d: usize, rank: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
