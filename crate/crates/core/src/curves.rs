//! Scan orders: bijections between the cells of a 2D grid and sequence
//! positions.
//!
//! Coordinates are `(row, col)` with the origin at the top-left cell. Hilbert
//! orders are produced by the frame recursion in [`HilbertFrame`]; the four
//! directions start and end at these corners on a `n x n` grid:
//!
//! | direction | first cell     | last cell      |
//! |-----------|----------------|----------------|
//! | 1         | `(0, 0)`       | `(n-1, 0)`     |
//! | 2         | `(0, 0)`       | `(0, n-1)`     |
//! | 3         | `(n-1, n-1)`   | `(n-1, 0)`     |
//! | 4         | `(n-1, n-1)`   | `(0, n-1)`     |
//!
//! Direction 2 is the transpose of direction 1, and directions 3 and 4 are the
//! half-turn rotations of directions 2 and 1. Linear kinds use the same
//! family, derived from their row-major base order.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

/// Largest Hilbert depth accepted by [`generate_hilbert`] (4096 x 4096 cells).
pub const MAX_DEPTH: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyShape { rows, cols });
        }
        Ok(Self { rows, cols })
    }

    /// Square grid with `side` cells along each axis.
    pub fn square(side: usize) -> Result<Self> {
        Self::new(side, side)
    }

    /// Number of cells, `rows * cols`.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transposed(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
        }
    }

    pub fn contains(&self, cell: CellCoord) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    /// Row-major flat index of `cell`.
    pub fn flat_index(&self, cell: CellCoord) -> usize {
        cell.row * self.cols + cell.col
    }

    pub fn cell_at_flat(&self, index: usize) -> CellCoord {
        CellCoord::new(index / self.cols, index % self.cols)
    }

    /// Side of the smallest power-of-two square that encloses this shape.
    pub fn enclosing_side(&self) -> usize {
        self.rows.max(self.cols).next_power_of_two()
    }

    fn is_power_of_two_square(&self) -> bool {
        self.rows == self.cols && self.rows.is_power_of_two()
    }

    /// Iterates over all 4-neighbour pairs `(p, q)` with `q` right of or below `p`.
    pub fn adjacent_pairs(&self) -> impl Iterator<Item = (CellCoord, CellCoord)> + '_ {
        let shape = *self;
        (0..shape.rows).flat_map(move |row| {
            (0..shape.cols).flat_map(move |col| {
                let p = CellCoord::new(row, col);
                let right = (col + 1 < shape.cols).then(|| (p, CellCoord::new(row, col + 1)));
                let down = (row + 1 < shape.rows).then(|| (p, CellCoord::new(row + 1, col)));
                right.into_iter().chain(down)
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellCoord {
    pub row: usize,
    pub col: usize,
}

impl CellCoord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(&self, other: CellCoord) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    pub fn squared_euclidean(&self, other: CellCoord) -> usize {
        let dr = self.row.abs_diff(other.row);
        let dc = self.col.abs_diff(other.col);
        dr * dr + dc * dc
    }

    pub fn transposed(&self) -> Self {
        Self::new(self.col, self.row)
    }

    /// Half-turn rotation inside `shape`.
    pub fn rot180(&self, shape: GridShape) -> Self {
        Self::new(shape.rows - 1 - self.row, shape.cols - 1 - self.col)
    }
}

impl From<(usize, usize)> for CellCoord {
    fn from((row, col): (usize, usize)) -> Self {
        Self::new(row, col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveKind {
    Hilbert,
    Raster,
    Boustrophedon,
    Morton,
}

impl CurveKind {
    pub const ALL: [CurveKind; 4] = [
        CurveKind::Hilbert,
        CurveKind::Raster,
        CurveKind::Boustrophedon,
        CurveKind::Morton,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CurveKind::Hilbert => "hilbert",
            CurveKind::Raster => "raster",
            CurveKind::Boustrophedon => "boustrophedon",
            CurveKind::Morton => "morton",
        }
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownCurveKind;

impl fmt::Display for UnknownCurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("expected one of hilbert, raster, boustrophedon, morton")
    }
}

impl FromStr for CurveKind {
    type Err = UnknownCurveKind;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "hilbert" => Ok(CurveKind::Hilbert),
            "raster" => Ok(CurveKind::Raster),
            "boustrophedon" | "zigzag" => Ok(CurveKind::Boustrophedon),
            "morton" | "zorder" => Ok(CurveKind::Morton),
            _ => Err(UnknownCurveKind),
        }
    }
}

/// Recipe for a scan order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CurveSpec {
    pub kind: CurveKind,
    pub shape: GridShape,
    /// Orientation in `1..=4`, see the module docs.
    pub direction: u8,
    /// Vertical offset in cells, 0 when disabled.
    pub shift: i64,
}

impl CurveSpec {
    pub fn new(kind: CurveKind, shape: GridShape, direction: u8, shift: i64) -> Self {
        Self {
            kind,
            shape,
            direction,
            shift,
        }
    }

    /// Unshifted Hilbert order on the `2^depth` square.
    pub fn hilbert(depth: u32, direction: u8) -> Result<Self> {
        check_depth(depth)?;
        Ok(Self::new(
            CurveKind::Hilbert,
            GridShape::square(1 << depth)?,
            direction,
            0,
        ))
    }

    pub fn linear(kind: CurveKind, shape: GridShape) -> Self {
        Self::new(kind, shape, 1, 0)
    }

    pub fn validate(&self) -> Result<()> {
        check_direction(self.direction)?;
        if self.shape.is_empty() {
            return Err(Error::EmptyShape {
                rows: self.shape.rows,
                cols: self.shape.cols,
            });
        }
        check_offset(self.shift, self.shape.rows)
    }
}

fn check_direction(direction: u8) -> Result<()> {
    if (1..=4).contains(&direction) {
        Ok(())
    } else {
        Err(Error::InvalidDirection(direction as i64))
    }
}

fn check_depth(depth: u32) -> Result<()> {
    if depth > MAX_DEPTH {
        Err(Error::DepthTooLarge {
            depth,
            max: MAX_DEPTH,
        })
    } else {
        Ok(())
    }
}

fn check_offset(offset: i64, rows: usize) -> Result<()> {
    if offset.unsigned_abs() >= rows as u64 {
        Err(Error::OffsetTooLarge { offset, rows })
    } else {
        Ok(())
    }
}

/// A bijection between grid cells and sequence positions.
///
/// `forward[i]` is the `i`-th visited cell; [`ScanOrder::index_of`] is the
/// inverse map. Values are immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanOrder {
    spec: CurveSpec,
    forward: Vec<CellCoord>,
    inverse: Vec<usize>,
}

impl ScanOrder {
    /// Builds an order from its forward sequence, checking that it visits every
    /// cell of `spec.shape` exactly once.
    pub fn from_forward(spec: CurveSpec, forward: Vec<CellCoord>) -> Result<Self> {
        let shape = spec.shape;
        if forward.len() != shape.len() {
            return Err(Error::NotABijection);
        }
        let mut inverse = vec![usize::MAX; shape.len()];
        for (i, &cell) in forward.iter().enumerate() {
            if !shape.contains(cell) {
                return Err(Error::NotABijection);
            }
            let slot = &mut inverse[shape.flat_index(cell)];
            if *slot != usize::MAX {
                return Err(Error::NotABijection);
            }
            *slot = i;
        }
        Ok(Self {
            spec,
            forward,
            inverse,
        })
    }

    pub fn spec(&self) -> &CurveSpec {
        &self.spec
    }

    pub fn shape(&self) -> GridShape {
        self.spec.shape
    }

    pub fn forward(&self) -> &[CellCoord] {
        &self.forward
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn cell_at(&self, index: usize) -> CellCoord {
        self.forward[index]
    }

    /// Sequence position of `cell`.
    ///
    /// Panics if `cell` lies outside the grid.
    pub fn index_of(&self, cell: CellCoord) -> usize {
        assert!(self.spec.shape.contains(cell), "cell outside grid");
        self.inverse[self.spec.shape.flat_index(cell)]
    }

    /// Inverse map indexed by row-major flat cell index.
    pub fn inverse_flat(&self) -> &[usize] {
        &self.inverse
    }

    fn remap(&self, spec: CurveSpec, f: impl Fn(CellCoord) -> CellCoord) -> Result<Self> {
        Self::from_forward(spec, self.forward.iter().map(|&c| f(c)).collect())
    }

    /// The same traversal with every cell transposed; lives on the transposed grid.
    pub fn transposed(&self) -> Self {
        let spec = CurveSpec {
            shape: self.spec.shape.transposed(),
            ..self.spec
        };
        self.remap(spec, |c| c.transposed())
            .expect("transpose preserves bijection")
    }

    /// The same traversal rotated by half a turn inside the grid.
    pub fn rot180(&self) -> Self {
        let shape = self.spec.shape;
        self.remap(self.spec, |c| c.rot180(shape))
            .expect("rotation preserves bijection")
    }

    fn with_direction(mut self, direction: u8) -> Self {
        self.spec.direction = direction;
        self
    }
}

/// Frame of the Hilbert recursion.
///
/// Coordinates are stored in half-cell units so that every midpoint the
/// recursion plots is an exact integer: a plotted point `m` falls in cell
/// `floor(m / 2)`. The `x` axis runs along columns and `y` along rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertFrame {
    pub origin: [i64; 2],
    pub x_vec: [i64; 2],
    pub y_vec: [i64; 2],
    pub depth: u32,
}

impl HilbertFrame {
    /// Root frame covering the `2^depth` square for the given direction.
    pub fn root(depth: u32, direction: u8) -> Result<Self> {
        check_direction(direction)?;
        check_depth(depth)?;
        let s = 2i64 << depth;
        let (origin, x_vec, y_vec) = match direction {
            1 => ([0, 0], [s, 0], [0, s]),
            2 => ([0, 0], [0, s], [s, 0]),
            3 => ([s, s], [0, -s], [-s, 0]),
            _ => ([s, s], [-s, 0], [0, -s]),
        };
        Ok(Self {
            origin,
            x_vec,
            y_vec,
            depth,
        })
    }

    /// The four sub-frames visited in order. The vectors are halved, and swapped
    /// in the first and last quadrant (negated in the last).
    pub fn children(&self) -> [HilbertFrame; 4] {
        let [x0, y0] = self.origin;
        let hx = [self.x_vec[0] / 2, self.x_vec[1] / 2];
        let hy = [self.y_vec[0] / 2, self.y_vec[1] / 2];
        let depth = self.depth - 1;
        [
            HilbertFrame {
                origin: [x0, y0],
                x_vec: hy,
                y_vec: hx,
                depth,
            },
            HilbertFrame {
                origin: [x0 + hx[0], y0 + hx[1]],
                x_vec: hx,
                y_vec: hy,
                depth,
            },
            HilbertFrame {
                origin: [x0 + hx[0] + hy[0], y0 + hx[1] + hy[1]],
                x_vec: hx,
                y_vec: hy,
                depth,
            },
            HilbertFrame {
                origin: [x0 + hx[0] + self.y_vec[0], y0 + hx[1] + self.y_vec[1]],
                x_vec: [-hy[0], -hy[1]],
                y_vec: [-hx[0], -hx[1]],
                depth,
            },
        ]
    }

    /// Cell containing the frame midpoint `origin + (x + y) / 2`.
    pub fn midpoint_cell(&self) -> CellCoord {
        let mx = self.origin[0] + (self.x_vec[0] + self.y_vec[0]) / 2;
        let my = self.origin[1] + (self.x_vec[1] + self.y_vec[1]) / 2;
        CellCoord::new(my.div_euclid(2) as usize, mx.div_euclid(2) as usize)
    }

    fn walk(&self, out: &mut Vec<CellCoord>) {
        if self.depth == 0 {
            out.push(self.midpoint_cell());
        } else {
            for child in self.children() {
                child.walk(out);
            }
        }
    }
}

/// Hilbert order on the `2^depth x 2^depth` grid in the given direction.
pub fn generate_hilbert(depth: u32, direction: u8) -> Result<ScanOrder> {
    let root = HilbertFrame::root(depth, direction)?;
    let spec = CurveSpec::hilbert(depth, direction)?;
    let mut forward = Vec::with_capacity(spec.shape.len());
    root.walk(&mut forward);
    ScanOrder::from_forward(spec, forward)
}

/// Direction-1 linear baseline order.
pub fn generate_linear(kind: CurveKind, shape: GridShape) -> Result<ScanOrder> {
    let spec = CurveSpec::linear(kind, shape);
    let forward: Vec<CellCoord> = match kind {
        CurveKind::Raster => (0..shape.len()).map(|i| shape.cell_at_flat(i)).collect(),
        CurveKind::Boustrophedon => (0..shape.rows)
            .flat_map(|row| {
                (0..shape.cols).map(move |j| {
                    let col = if row % 2 == 0 { j } else { shape.cols - 1 - j };
                    CellCoord::new(row, col)
                })
            })
            .collect(),
        CurveKind::Morton => {
            if !shape.is_power_of_two_square() {
                return Err(Error::ShapeNotSupported {
                    kind,
                    rows: shape.rows,
                    cols: shape.cols,
                });
            }
            (0..shape.len() as u64)
                .map(|z| CellCoord::new(compact_bits(z >> 1) as usize, compact_bits(z) as usize))
                .collect()
        }
        CurveKind::Hilbert => return Err(Error::UnsupportedKind(kind)),
    };
    ScanOrder::from_forward(spec, forward)
}

/// Gathers the even-position bits of `z` into the low half.
fn compact_bits(z: u64) -> u64 {
    let mut x = z & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x >> 4)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x >> 8)) & 0x0000_ffff_0000_ffff;
    (x | (x >> 16)) & 0x0000_0000_ffff_ffff
}

/// Builds the order described by `spec`.
///
/// Hilbert orders on grids that are not power-of-two squares are generated on
/// the enclosing square and filtered with [`adapt_to_shape`]. The shift is
/// applied last.
pub fn generate(spec: &CurveSpec) -> Result<ScanOrder> {
    spec.validate()?;
    let shape = spec.shape;
    let base = match spec.kind {
        CurveKind::Hilbert => {
            let side = shape.enclosing_side();
            let full = generate_hilbert(side.trailing_zeros(), spec.direction)?;
            if full.shape() == shape {
                full
            } else {
                adapt_to_shape(&full, shape)?
            }
        }
        kind => {
            let oriented = match spec.direction {
                1 => generate_linear(kind, shape)?,
                2 => generate_linear(kind, shape.transposed())?.transposed(),
                3 => generate_linear(kind, shape.transposed())?
                    .transposed()
                    .rot180(),
                _ => generate_linear(kind, shape)?.rot180(),
            };
            oriented.with_direction(spec.direction)
        }
    };
    if spec.shift == 0 {
        Ok(base)
    } else {
        shift_order(&base, spec.shift)
    }
}

/// Moves every cell of `order` down by `offset` rows, wrapping at the bottom
/// edge. Negative offsets move up.
pub fn shift_order(order: &ScanOrder, offset: i64) -> Result<ScanOrder> {
    let shape = order.shape();
    check_offset(offset, shape.rows)?;
    let rows = shape.rows as i64;
    let spec = CurveSpec {
        shift: (order.spec.shift + offset) % rows,
        ..order.spec
    };
    order.remap(spec, |c| {
        CellCoord::new((c.row as i64 + offset).rem_euclid(rows) as usize, c.col)
    })
}

/// Restricts an order on the enclosing power-of-two square to `shape`, keeping
/// the relative order of surviving cells.
pub fn adapt_to_shape(order: &ScanOrder, shape: GridShape) -> Result<ScanOrder> {
    let src = order.shape();
    if src.rows != src.cols || src.rows != shape.enclosing_side() {
        return Err(Error::EnclosingGridMismatch {
            order_side: src.rows.max(src.cols),
            rows: shape.rows,
            cols: shape.cols,
        });
    }
    check_offset(order.spec.shift, shape.rows)?;
    let spec = CurveSpec {
        shape,
        ..order.spec
    };
    let forward = order
        .forward
        .iter()
        .copied()
        .filter(|&c| shape.contains(c))
        .collect();
    ScanOrder::from_forward(spec, forward)
}

/// Collapses each 2x2 block of cells to one cell and returns the induced
/// block order on the half-resolution grid.
///
/// Every block must occupy four consecutive sequence positions, which holds
/// for Hilbert orders and fails for row-major scans.
pub fn self_similarity_reduce(order: &ScanOrder) -> Result<ScanOrder> {
    let shape = order.shape();
    if !shape.is_power_of_two_square() || shape.rows < 2 {
        return Err(Error::ShapeNotSupported {
            kind: order.spec.kind,
            rows: shape.rows,
            cols: shape.cols,
        });
    }
    if order.spec.shift != 0 {
        return Err(Error::ShiftedOrder);
    }
    let half = GridShape::square(shape.rows / 2)?;
    let mut blocks: Vec<(usize, CellCoord)> = Vec::with_capacity(half.len());
    for block_row in 0..half.rows {
        for block_col in 0..half.cols {
            let positions = [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(dr, dc)| {
                order.index_of(CellCoord::new(2 * block_row + dr, 2 * block_col + dc))
            });
            let lo = *positions.iter().min().unwrap();
            let hi = *positions.iter().max().unwrap();
            if hi - lo != 3 {
                return Err(Error::NotBlockContiguous {
                    block_row,
                    block_col,
                });
            }
            blocks.push((lo, CellCoord::new(block_row, block_col)));
        }
    }
    blocks.sort_unstable_by_key(|&(pos, _)| pos);
    let spec = CurveSpec {
        shape: half,
        ..order.spec
    };
    ScanOrder::from_forward(spec, blocks.into_iter().map(|(_, c)| c).collect())
}
