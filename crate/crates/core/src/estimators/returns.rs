use super::{multipower_sum, PowerVector, ReturnSeries, SampledGrid};
use crate::error::Result;
use crate::lambda::mu_abs_moment;

/// Sum of squared returns.
pub fn realized_variance(returns: &ReturnSeries) -> f64 {
    returns.returns().iter().map(|r| r * r).sum()
}

/// Realized multipower variation of absolute returns,
/// `n/(n_r - k + 1) * n^(q+/2 - 1) * sum prod_j |r_{i+j-1}|^{q_j} / mu_{q_j}`,
/// where `n` is the sampling frequency and `n_r` the number of returns
/// present. For a full series `n_r = n`; for a shifted subsample with one
/// return missing the prefactor compensates for the lost summand.
pub fn return_multipower(returns: &ReturnSeries, q: &PowerVector) -> Result<f64> {
    let scales = q
        .q()
        .iter()
        .map(|&qj| mu_abs_moment(qj))
        .collect::<Result<Vec<_>>>()?;
    multipower_sum(returns.returns(), returns.frequency(), q, &scales, 1)
}

/// Return-based estimators that can be subsampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnEstimator {
    Rv,
    Bv,
    Tv,
    /// Tripower quarticity, `q = (4/3, 4/3, 4/3)`.
    Tq,
}

impl ReturnEstimator {
    pub fn powers(self) -> PowerVector {
        match self {
            Self::Rv => PowerVector::variance(),
            Self::Bv => PowerVector::bipower(),
            Self::Tv => PowerVector::tripower(),
            Self::Tq => PowerVector::tripower_quarticity(),
        }
    }
}

/// Average of the multipower estimator over the `m` subsample offsets.
pub fn subsampled_multipower(grid: &SampledGrid, q: &PowerVector) -> Result<f64> {
    let mut total = 0.0;
    for offset in 0..grid.m() {
        total += return_multipower(&grid.returns(offset)?, q)?;
    }
    Ok(total / grid.m() as f64)
}

/// Subsampled RV / BV / TV (SRV, SBV, STV) or tripower quarticity.
pub fn subsampled_estimator(grid: &SampledGrid, base: ReturnEstimator) -> Result<f64> {
    subsampled_multipower(grid, &base.powers())
}

/// Return-based tripower quarticity, an estimate of the integrated quarticity.
pub fn return_tripower_quarticity(grid: &SampledGrid, subsampled: bool) -> Result<f64> {
    if subsampled {
        subsampled_estimator(grid, ReturnEstimator::Tq)
    } else {
        return_multipower(&grid.returns(0)?, &PowerVector::tripower_quarticity())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lambda::mu_abs_moment;

    #[test]
    fn realized_variance_basics() {
        assert_eq!(
            realized_variance(&ReturnSeries::new(vec![0.0, 0.0, 0.0])),
            0.0
        );
        assert_eq!(realized_variance(&ReturnSeries::new(vec![1.0, -1.0])), 2.0);
    }

    #[test]
    fn single_square_power_is_realized_variance() {
        let r = ReturnSeries::new(vec![0.3, -1.2, 0.05, 2.0]);
        let mp = return_multipower(&r, &PowerVector::variance()).unwrap();
        assert!((mp - realized_variance(&r)).abs() < 1e-15);
    }

    #[test]
    fn bipower_two_equal_returns() {
        let a = 0.7;
        let r = ReturnSeries::new(vec![a, a]);
        let bv = return_multipower(&r, &PowerVector::bipower()).unwrap();
        let mu1 = mu_abs_moment(1.0).unwrap();
        assert!((bv - 2.0 * a * a / (mu1 * mu1)).abs() < 1e-14);
    }

    #[test]
    fn too_few_returns_is_a_domain_error() {
        let r = ReturnSeries::new(vec![1.0, 2.0]);
        assert!(return_multipower(&r, &PowerVector::tripower()).is_err());
    }

    #[test]
    fn subsampling_with_single_offset_is_plain() {
        let g = SampledGrid::new(vec![0.0, 0.1, -0.2, 0.4, 0.3], 4, 1).unwrap();
        let full = g.returns(0).unwrap();
        assert_eq!(
            subsampled_estimator(&g, ReturnEstimator::Rv).unwrap(),
            realized_variance(&full)
        );
        assert_eq!(
            subsampled_estimator(&g, ReturnEstimator::Tv).unwrap(),
            return_multipower(&full, &PowerVector::tripower()).unwrap()
        );
    }

    #[test]
    fn subsampled_rv_corrects_missing_summand() {
        // n = 2, m = 2: offsets 0 and 1
        let p = vec![0.0, 1.0, 3.0, 2.0, 5.0];
        let g = SampledGrid::new(p, 2, 2).unwrap();
        // offset 0: returns 3, 2 -> 13; offset 1: return 1 -> 1 * 2/1
        let srv = subsampled_estimator(&g, ReturnEstimator::Rv).unwrap();
        assert!((srv - (13.0 + 2.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_path_is_zero() {
        let g = SampledGrid::new(vec![4.6; 13], 4, 3).unwrap();
        for e in [
            ReturnEstimator::Rv,
            ReturnEstimator::Bv,
            ReturnEstimator::Tv,
            ReturnEstimator::Tq,
        ] {
            assert_eq!(subsampled_estimator(&g, e).unwrap(), 0.0);
        }
    }
}
