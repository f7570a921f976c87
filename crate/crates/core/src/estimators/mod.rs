//! Return-based and range-based variation estimators on an equidistant grid.
//!
//! A day is the unit interval observed at `N + 1` equidistant log-prices,
//! with `N = n * m`: `n` blocks of `m` increments each. Return-based
//! estimators use the `n` block returns (optionally subsampled over the `m`
//! possible starting offsets); range-based estimators use the high-low range
//! of the `m + 1` prices inside each block.

mod range;
mod report;
mod returns;

pub use range::{
    block_ranges, hybrid_rrv, jump_variation, range_tripower_quarticity, rbv, rmv, rmv_from_ranges,
    rmv_staggered, rrv_b, rtv, RangeEstimates,
};
pub use report::{annualized_vol_percent, EstimateReport, EstimatorId, ReportNotes};
pub use returns::{
    realized_variance, return_multipower, return_tripower_quarticity, subsampled_estimator,
    subsampled_multipower, ReturnEstimator,
};

use crate::error::{domain, Result};

/// Log-prices at times `i / N`, `i = 0..=N`, with `N = n * m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGrid {
    log_prices: Vec<f64>,
    n: usize,
    m: usize,
}

impl SampledGrid {
    pub fn new(log_prices: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return domain("grid needs n >= 1 and m >= 1");
        }
        if log_prices.len() != n * m + 1 {
            return domain(format!(
                "grid with n = {n}, m = {m} needs {} prices, got {}",
                n * m + 1,
                log_prices.len()
            ));
        }
        if log_prices.iter().any(|p| !p.is_finite()) {
            return domain("log-prices must be finite");
        }
        Ok(Self { log_prices, n, m })
    }

    pub fn log_prices(&self) -> &[f64] {
        &self.log_prices
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Total number of increments `N`.
    pub fn len_increments(&self) -> usize {
        self.n * self.m
    }

    /// Prices of block `i` (zero based): indices `i*m ..= (i+1)*m`.
    pub fn block(&self, i: usize) -> &[f64] {
        &self.log_prices[i * self.m..=(i + 1) * self.m]
    }

    /// Returns at frequency `n` starting `offset` fine steps into the day.
    ///
    /// Offset 0 yields all `n` returns. A positive offset loses the last
    /// return, whose right endpoint would fall after the close.
    pub fn returns(&self, offset: usize) -> Result<ReturnSeries> {
        if offset >= self.m {
            return domain(format!(
                "subsample offset {offset} must be below m = {}",
                self.m
            ));
        }
        let count = if offset == 0 { self.n } else { self.n - 1 };
        let p = &self.log_prices;
        let returns = (0..count)
            .map(|i| p[offset + (i + 1) * self.m] - p[offset + i * self.m])
            .collect();
        Ok(ReturnSeries {
            returns,
            frequency: self.n,
            subsample_offset: offset,
        })
    }

    /// Multiplies every log-price by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            log_prices: self.log_prices.iter().map(|p| p * c).collect(),
            n: self.n,
            m: self.m,
        }
    }
}

/// Block returns at sampling frequency `frequency`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    returns: Vec<f64>,
    frequency: usize,
    subsample_offset: usize,
}

impl ReturnSeries {
    /// Full (offset 0) series: the frequency is the number of returns.
    pub fn new(returns: Vec<f64>) -> Self {
        let frequency = returns.len();
        Self {
            returns,
            frequency,
            subsample_offset: 0,
        }
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// Sampling frequency `n`, which exceeds `len()` by one for shifted subsamples.
    pub fn frequency(&self) -> usize {
        self.frequency
    }

    pub fn subsample_offset(&self) -> usize {
        self.subsample_offset
    }
}

/// High-low range of every block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRanges {
    ranges: Vec<f64>,
    m: usize,
}

impl BlockRanges {
    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    /// Increments per block.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.ranges.len()
    }
}

/// Exponents `(q_1, ..., q_k)` of a multipower variation.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector {
    q: Vec<f64>,
}

impl PowerVector {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return domain("power vector is empty");
        }
        if q.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return domain("powers must be positive and finite");
        }
        Ok(Self { q })
    }

    /// `(2)`: realized variance / realized range-based variance.
    pub fn variance() -> Self {
        Self { q: vec![2.0] }
    }

    /// `(1, 1)`: bipower variation.
    pub fn bipower() -> Self {
        Self { q: vec![1.0, 1.0] }
    }

    /// `(2/3, 2/3, 2/3)`: tripower variation.
    pub fn tripower() -> Self {
        Self {
            q: vec![2.0 / 3.0; 3],
        }
    }

    /// `(4/3, 4/3, 4/3)`: tripower quarticity.
    pub fn tripower_quarticity() -> Self {
        Self {
            q: vec![4.0 / 3.0; 3],
        }
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }

    pub fn q_plus(&self) -> f64 {
        self.q.iter().sum()
    }

    fn max_q(&self) -> f64 {
        self.q.iter().copied().fold(0.0, f64::max)
    }

    /// The probability limit is unaffected by finitely many jumps.
    pub fn consistency_robust(&self) -> bool {
        self.max_q() < 2.0
    }

    /// The central limit theorem is unaffected by finitely many jumps.
    pub fn clt_robust(&self) -> bool {
        self.max_q() < 1.0
    }
}

/// `(n / (n_terms)) * n^(q+/2 - 1) * sum_i prod_j x_{i + (j-1)K}^{q_j} / scale_j`,
/// the common skeleton of every multipower estimator.
pub(crate) fn multipower_sum(
    values: &[f64],
    frequency: usize,
    q: &PowerVector,
    scales: &[f64],
    lag: usize,
) -> Result<f64> {
    let k = q.k();
    if lag == 0 {
        return domain("stagger lag must be at least 1");
    }
    let span = (k - 1) * lag;
    if values.len() <= span {
        return domain(format!(
            "multipower with k = {k} and lag {lag} needs more than {span} terms, got {}",
            values.len()
        ));
    }
    let terms = values.len() - span;
    // powered series, shared by equal (q_j, scale_j) pairs
    let mut powered: Vec<(f64, f64, Vec<f64>)> = Vec::with_capacity(k);
    let mut which = Vec::with_capacity(k);
    for (&qj, &sj) in q.q().iter().zip(scales) {
        let pos = powered
            .iter()
            .position(|(pq, ps, _)| *pq == qj && *ps == sj)
            .unwrap_or_else(|| {
                powered.push((
                    qj,
                    sj,
                    values.iter().map(|&x| pow_abs(x, qj) / sj).collect(),
                ));
                powered.len() - 1
            });
        which.push(pos);
    }
    let mut sum = 0.0;
    for i in 0..terms {
        let mut prod = 1.0;
        for (j, &w) in which.iter().enumerate() {
            prod *= powered[w].2[i + j * lag];
        }
        sum += prod;
    }
    let nf = frequency as f64;
    Ok(nf / terms as f64 * nf.powf(q.q_plus() / 2.0 - 1.0) * sum)
}

#[inline]
pub(crate) fn pow_abs(x: f64, q: f64) -> f64 {
    let a = x.abs();
    if q == 2.0 {
        a * a
    } else if q == 1.0 {
        a
    } else if q == 2.0 / 3.0 {
        (a * a).cbrt()
    } else if q == 4.0 / 3.0 {
        let c = a.cbrt();
        a * c
    } else {
        a.powf(q)
    }
}
