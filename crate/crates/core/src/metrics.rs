//! Locality measures for scan orders.
//!
//! Adjacency is the 4-neighbourhood throughout. `σ(p)` below is the sequence
//! position of cell `p`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curves::{generate, CurveSpec, ScanOrder};
use crate::{Error, Result};

/// Orders with at most this many cells get an exact [`locality_measure`].
pub const EXACT_LOCALITY_LIMIT: usize = 4096;
/// Number of sampled pairs for larger orders.
pub const LOCALITY_SAMPLES: usize = 1 << 20;
/// Seed of the pair sampler.
pub const LOCALITY_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalityReport {
    pub spec: CurveSpec,
    /// Share of consecutive steps that move to a 4-neighbour.
    pub continuity_fraction: f64,
    /// Largest `|σ(p) - σ(q)|` over adjacent cells.
    pub max_adj_gap: usize,
    pub mean_adj_gap: f64,
    /// Worst-case `|p - q|² / |σ(p) - σ(q)|`.
    pub gl_measure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjacentGaps {
    pub max: usize,
    pub mean: f64,
}

fn require_pairs(order: &ScanOrder) -> Result<()> {
    if order.len() < 2 {
        Err(Error::TooFewCells(order.len()))
    } else {
        Ok(())
    }
}

pub fn continuity_fraction(order: &ScanOrder) -> Result<f64> {
    require_pairs(order)?;
    let steps = order.len() - 1;
    let adjacent = order
        .forward()
        .windows(2)
        .filter(|w| w[0].manhattan(w[1]) == 1)
        .count();
    Ok(adjacent as f64 / steps as f64)
}

/// Max and mean sequence-index gap over every unordered pair of adjacent cells.
pub fn adjacent_index_gaps(order: &ScanOrder) -> Result<AdjacentGaps> {
    require_pairs(order)?;
    let shape = order.shape();
    let inverse = order.inverse_flat();
    let (mut max, mut total, mut count) = (0usize, 0u64, 0u64);
    for (p, q) in shape.adjacent_pairs() {
        let gap = inverse[shape.flat_index(p)].abs_diff(inverse[shape.flat_index(q)]);
        max = max.max(gap);
        total += gap as u64;
        count += 1;
    }
    Ok(AdjacentGaps {
        max,
        mean: total as f64 / count as f64,
    })
}

/// Worst-case ratio of squared Euclidean cell distance to index distance.
///
/// Exact over all pairs up to [`EXACT_LOCALITY_LIMIT`] cells, otherwise the
/// maximum over [`LOCALITY_SAMPLES`] uniformly drawn pairs from a fixed seed.
/// A single-cell order has no pairs and yields 0.
pub fn locality_measure(order: &ScanOrder) -> f64 {
    let cells = order.forward();
    let len = cells.len();
    let ratio = |i: usize, j: usize| cells[i].squared_euclidean(cells[j]) as f64 / (j - i) as f64;
    let mut worst = 0.0f64;
    if len <= EXACT_LOCALITY_LIMIT {
        for i in 0..len {
            for j in i + 1..len {
                worst = worst.max(ratio(i, j));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(LOCALITY_SEED);
        for _ in 0..LOCALITY_SAMPLES {
            let a = rng.random_range(0..len);
            let b = rng.random_range(0..len - 1);
            // b skips a so the pair is always distinct
            let b = if b >= a { b + 1 } else { b };
            worst = worst.max(ratio(a.min(b), a.max(b)));
        }
    }
    worst
}

pub fn locality_report(order: &ScanOrder) -> Result<LocalityReport> {
    let gaps = adjacent_index_gaps(order)?;
    Ok(LocalityReport {
        spec: *order.spec(),
        continuity_fraction: continuity_fraction(order)?,
        max_adj_gap: gaps.max,
        mean_adj_gap: gaps.mean,
        gl_measure: locality_measure(order),
    })
}

/// One report per spec, in input order. All specs must share a grid shape.
pub fn compare_orders(specs: &[CurveSpec]) -> Result<Vec<LocalityReport>> {
    if let Some(first) = specs.first() {
        let expected = first.shape;
        if let Some(other) = specs.iter().find(|s| s.shape != expected) {
            return Err(Error::ShapeMismatch {
                expected_rows: expected.rows,
                expected_cols: expected.cols,
                found_rows: other.shape.rows,
                found_cols: other.shape.cols,
            });
        }
    }
    specs
        .iter()
        .map(|spec| locality_report(&generate(spec)?))
        .collect()
}
