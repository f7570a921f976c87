use super::{multipower_sum, BlockRanges, PowerVector, SampledGrid};
use crate::error::Result;
use crate::lambda::LambdaTable;

/// High-low range of the `m + 1` prices in each block. Adjacent blocks share
/// their boundary price.
pub fn block_ranges(grid: &SampledGrid) -> BlockRanges {
    let ranges = (0..grid.n())
        .map(|i| {
            let block = grid.block(i);
            let (lo, hi) = block
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                    (lo.min(p), hi.max(p))
                });
            hi - lo
        })
        .collect();
    BlockRanges {
        ranges,
        m: grid.m(),
    }
}

/// Realized range-based multipower variation on precomputed ranges, with
/// stagger lag `lag` between the factors of each product.
pub fn rmv_from_ranges(
    ranges: &BlockRanges,
    q: &PowerVector,
    lambda: &LambdaTable,
    lag: usize,
) -> Result<f64> {
    let scales = q
        .q()
        .iter()
        .map(|&qj| lambda.get(qj, ranges.m()))
        .collect::<Result<Vec<_>>>()?;
    multipower_sum(ranges.ranges(), ranges.n(), q, &scales, lag)
}

/// Realized range-based multipower variation,
/// `n/(n-k+1) * n^(q+/2 - 1) * sum_i prod_j s_{i+j-1}^{q_j} / lambda(q_j, m)`.
pub fn rmv(grid: &SampledGrid, q: &PowerVector, lambda: &LambdaTable) -> Result<f64> {
    rmv_from_ranges(&block_ranges(grid), q, lambda, 1)
}

/// [`rmv`] with products taken over blocks `i, i + lag, ..., i + (k-1) lag`.
pub fn rmv_staggered(
    grid: &SampledGrid,
    q: &PowerVector,
    lambda: &LambdaTable,
    lag: usize,
) -> Result<f64> {
    rmv_from_ranges(&block_ranges(grid), q, lambda, lag)
}

/// Realized range-based variance `sum s_i^2 / lambda(2, m)`. Scales squared
/// jumps down by `lambda(2, m)`.
pub fn rrv_b(grid: &SampledGrid, lambda: &LambdaTable) -> Result<f64> {
    rmv(grid, &PowerVector::variance(), lambda)
}

/// Range-based bipower variation.
pub fn rbv(grid: &SampledGrid, lambda: &LambdaTable) -> Result<f64> {
    rmv(grid, &PowerVector::bipower(), lambda)
}

/// Range-based tripower variation.
pub fn rtv(grid: &SampledGrid, lambda: &LambdaTable) -> Result<f64> {
    rmv(grid, &PowerVector::tripower(), lambda)
}

/// `lambda(2, m) * RRV_b + (1 - lambda(2, m)) * RTV`, consistent for the
/// quadratic variation including jumps.
pub fn hybrid_rrv(grid: &SampledGrid, lambda: &LambdaTable) -> Result<f64> {
    Ok(RangeEstimates::compute(grid, lambda)?.rrv)
}

/// `max(RRV - RTV, 0)`.
pub fn jump_variation(grid: &SampledGrid, lambda: &LambdaTable) -> Result<f64> {
    Ok(RangeEstimates::compute(grid, lambda)?.jv)
}

/// Range-based tripower quarticity (`q = (4/3, 4/3, 4/3)`), a jump-robust
/// estimate of the integrated quarticity.
pub fn range_tripower_quarticity(grid: &SampledGrid, lambda: &LambdaTable) -> Result<f64> {
    rmv(grid, &PowerVector::tripower_quarticity(), lambda)
}

/// All range-based estimates of one day, sharing a single pass over the blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeEstimates {
    pub rrv_b: f64,
    pub rbv: f64,
    pub rtv: f64,
    /// Hybrid estimator of the quadratic variation.
    pub rrv: f64,
    pub jv: f64,
    /// Tripower quarticity.
    pub rtq: f64,
}

impl RangeEstimates {
    pub fn compute(grid: &SampledGrid, lambda: &LambdaTable) -> Result<Self> {
        Self::from_ranges(&block_ranges(grid), lambda)
    }

    pub fn from_ranges(ranges: &BlockRanges, lambda: &LambdaTable) -> Result<Self> {
        let l2 = lambda.get(2.0, ranges.m())?;
        let rrv_b = rmv_from_ranges(ranges, &PowerVector::variance(), lambda, 1)?;
        let rbv = rmv_from_ranges(ranges, &PowerVector::bipower(), lambda, 1)?;
        let rtv = rmv_from_ranges(ranges, &PowerVector::tripower(), lambda, 1)?;
        let rtq = rmv_from_ranges(ranges, &PowerVector::tripower_quarticity(), lambda, 1)?;
        // (1 - l2) <= 0 for m > 1; clamp so the combination stays nonnegative
        let rrv = (l2 * rrv_b + (1.0 - l2) * rtv).max(0.0);
        let jv = (rrv - rtv).max(0.0);
        Ok(Self {
            rrv_b,
            rbv,
            rtv,
            rrv,
            jv,
            rtq,
        })
    }
}
