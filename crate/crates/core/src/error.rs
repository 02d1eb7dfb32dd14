use crate::curves::CurveKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("direction must be in 1..=4, got {0}")]
    InvalidDirection(i64),
    #[error("depth {depth} exceeds the limit of {max}")]
    DepthTooLarge { depth: u32, max: u32 },
    #[error("grid dimensions must be positive, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("{kind} order is not defined on a {rows}x{cols} grid")]
    ShapeNotSupported {
        kind: CurveKind,
        rows: usize,
        cols: usize,
    },
    #[error("{0} is not a linear scan kind")]
    UnsupportedKind(CurveKind),
    #[error("shift offset {offset} must satisfy |offset| < {rows}")]
    OffsetTooLarge { offset: i64, rows: usize },
    #[error("order on a {order_side}x{order_side} grid is not the smallest power-of-two square enclosing {rows}x{cols}")]
    EnclosingGridMismatch {
        order_side: usize,
        rows: usize,
        cols: usize,
    },
    #[error("2x2 block at ({block_row}, {block_col}) does not occupy consecutive positions")]
    NotBlockContiguous { block_row: usize, block_col: usize },
    #[error("self-similarity reduction needs an unshifted order")]
    ShiftedOrder,
    #[error("forward sequence is not a bijection onto the grid")]
    NotABijection,
    #[error("metric needs at least 2 cells, got {0}")]
    TooFewCells(usize),
    #[error("grid shapes differ: {expected_rows}x{expected_cols} vs {found_rows}x{found_cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error("timescale at index {index} must be positive and finite")]
    NonPositiveDelta { index: usize },
    #[error("evolution entry {index} is positive but stability was requested")]
    UnstableEvolution { index: usize },
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("sequence length {found} does not match order length {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("value at flat index {0} is not finite")]
    NonFinite(usize),
    #[error("{0} must be at least 1")]
    ZeroSize(&'static str),
}
