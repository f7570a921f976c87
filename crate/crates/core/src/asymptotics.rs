//! Asymptotic variance factors and feasible confidence intervals.
//!
//! For a multipower variation with powers `q` and block size `m`,
//! `sqrt(n) (RMV - int |sigma|^{q+})` is asymptotically mixed normal with
//! conditional variance `avar * int |sigma|^{2 q+}`, where `avar` is a ratio
//! of products of range moments `lambda(r, m)`.

use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Result};
use crate::estimators::{
    block_ranges, rmv_from_ranges, subsampled_multipower, PowerVector, SampledGrid,
};
use crate::fmt::fmt_sig17;
use crate::lambda::LambdaTable;
use crate::rng::{stream, StreamRole};

/// Asymptotic variance factor of one estimator at one block size.
#[derive(Debug, Clone, PartialEq)]
pub struct AvarConstant {
    pub q: PowerVector,
    pub m: usize,
    pub value: f64,
    pub lambda_version: String,
}

/// Evaluates
///
/// ```text
/// [ prod_j l(2q_j) - (2k-1) prod_j l(q_j)^2
///   + 2 sum_{h=1}^{k-1} prod_{j<=h} l(q_j) prod_{j>k-h} l(q_j) prod_{j<=k-h} l(q_j + q_{j+h}) ]
///   / prod_j l(q_j)^2
/// ```
///
/// with `l(r) = lambda(r, m)`.
pub fn avar_constant(q: &PowerVector, m: usize, lambda: &LambdaTable) -> Result<AvarConstant> {
    let qs = q.q();
    let k = qs.len();
    let l = |r: f64| lambda.get(r, m);

    let mut prod_2q = 1.0;
    let mut prod_q_sq = 1.0;
    let mut lq = Vec::with_capacity(k);
    for &qj in qs {
        prod_2q *= l(2.0 * qj)?;
        let v = l(qj)?;
        prod_q_sq *= v * v;
        lq.push(v);
    }
    let mut cross = 0.0;
    for h in 1..k {
        let head: f64 = lq[..h].iter().product();
        let tail: f64 = lq[k - h..].iter().product();
        let mut joint = 1.0;
        for j in 0..k - h {
            joint *= l(qs[j] + qs[j + h])?;
        }
        cross += head * tail * joint;
    }
    let value = (prod_2q - (2 * k - 1) as f64 * prod_q_sq + 2.0 * cross) / prod_q_sq;
    Ok(AvarConstant {
        q: q.clone(),
        m,
        value,
        lambda_version: lambda.version(),
    })
}

/// Off-diagonal factor of the joint limit of `(RRV_b, RTV)`:
///
/// ```text
/// 2 / (l(1)^2 l(2/3)^3) * ( l(1) l(5/3)^2 l(2/3)^2 + l(5/3)^4 l(2/3) - 2 l(1)^2 l(2/3)^3 )
/// ```
///
/// The closed form is taken as published. It does not agree with the
/// simulated covariance at `m = 1` (see [`simulate_joint_covariance`]).
pub fn avar_cross_rrvb_rtv(m: usize, lambda: &LambdaTable) -> Result<f64> {
    let l1 = lambda.get(1.0, m)?;
    let l23 = lambda.get(2.0 / 3.0, m)?;
    let l53 = lambda.get(5.0 / 3.0, m)?;
    Ok(2.0 / (l1 * l1 * l23.powi(3))
        * (l1 * l53.powi(2) * l23.powi(2) + l53.powi(4) * l23 - 2.0 * l1 * l1 * l23.powi(3)))
}

/// Off-diagonal factor of `(RRV_b, RTV)` derived from the overlap of their
/// summands: each squared range shares a block with three tripower terms, so
/// `n Cov -> 3 (l(8/3) / (l(2) l(2/3)) - 1) IQ`. Equals 2 at `m = 1`.
pub fn avar_cross_rrvb_rtv_derived(m: usize, lambda: &LambdaTable) -> Result<f64> {
    let l2 = lambda.get(2.0, m)?;
    let l23 = lambda.get(2.0 / 3.0, m)?;
    let l83 = lambda.get(8.0 / 3.0, m)?;
    Ok(3.0 * (l83 / (l2 * l23) - 1.0))
}

/// Scale on which an interval was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IntervalScale {
    Raw,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub scale: IntervalScale,
}

impl ConfidenceInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("quantile level must lie in (0, 1), got {p}"));
    }
    Ok(Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(p))
}

fn two_sided_z(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("confidence level must lie in (0, 1), got {level}"));
    }
    normal_quantile(0.5 * (1.0 + level))
}

/// `estimate +- z * sqrt(constant * quarticity / n)`.
pub fn ci_raw(
    estimate: f64,
    quarticity: f64,
    n: usize,
    constant: f64,
    level: f64,
) -> Result<ConfidenceInterval> {
    if !(quarticity > 0.0) {
        return domain(format!("quarticity must be positive, got {quarticity}"));
    }
    if n == 0 {
        return domain("n must be positive");
    }
    let z = two_sided_z(level)?;
    let half = z * (constant * quarticity / n as f64).sqrt();
    Ok(ConfidenceInterval {
        level,
        lower: estimate - half,
        upper: estimate + half,
        scale: IntervalScale::Raw,
    })
}

/// Interval from the delta-method limit of `ln(estimate)`:
/// `exp(ln estimate +- z * sqrt(constant * quarticity / (n * ivsq_proxy)))`.
///
/// The feasible choice for `ivsq_proxy` is `estimate^2`.
pub fn ci_log(
    estimate: f64,
    quarticity: f64,
    ivsq_proxy: f64,
    n: usize,
    constant: f64,
    level: f64,
) -> Result<ConfidenceInterval> {
    if !(estimate > 0.0) {
        return domain(format!(
            "log interval needs a positive estimate, got {estimate}"
        ));
    }
    if !(quarticity >= 0.0) || !(ivsq_proxy > 0.0) || n == 0 {
        return domain("log interval needs quarticity >= 0, ivsq_proxy > 0 and n > 0");
    }
    let z = two_sided_z(level)?;
    let half = z * (constant * quarticity / (n as f64 * ivsq_proxy)).sqrt();
    let centre = estimate.ln();
    Ok(ConfidenceInterval {
        level,
        lower: (centre - half).exp(),
        upper: (centre + half).exp(),
        scale: IntervalScale::Log,
    })
}

/// The three curves of the asymptotic variance factor against `m`:
/// `(m, RRV_b, RBV, RTV)`.
pub fn figure_constants(
    m_list: &[usize],
    lambda: &LambdaTable,
) -> Result<Vec<(usize, f64, f64, f64)>> {
    m_list
        .iter()
        .map(|&m| {
            Ok((
                m,
                avar_constant(&PowerVector::variance(), m, lambda)?.value,
                avar_constant(&PowerVector::bipower(), m, lambda)?.value,
                avar_constant(&PowerVector::tripower(), m, lambda)?.value,
            ))
        })
        .collect()
}

/// CSV `q,m,value,lambda_version`, one row per estimator and block size.
/// `q` is written as the colon-separated power list.
pub fn constants_csv(m_list: &[usize], lambda: &LambdaTable) -> Result<String> {
    let version = lambda.version();
    let mut out = String::from("q,m,value,lambda_version\n");
    for (label, q) in [
        ("2", PowerVector::variance()),
        ("1:1", PowerVector::bipower()),
        ("2/3:2/3:2/3", PowerVector::tripower()),
    ] {
        for &m in m_list {
            let c = avar_constant(&q, m, lambda)?;
            writeln!(out, "{label},{m},{},{version}", fmt_sig17(c.value)).unwrap();
        }
    }
    Ok(out)
}

/// Brownian motion with unit volatility on `n * m + 1` equidistant points.
fn unit_brownian_grid(n: usize, m: usize, seed: u64, rep: u64) -> SampledGrid {
    let mut rng = stream(seed, StreamRole::Oracle, rep);
    let big_n = n * m;
    let sd = (1.0 / big_n as f64).sqrt();
    let mut p = Vec::with_capacity(big_n + 1);
    let mut x = 0.0;
    p.push(x);
    for _ in 0..big_n {
        let z: f64 = StandardNormal.sample(&mut rng);
        x += sd * z;
        p.push(x);
    }
    SampledGrid::new(p, n, m).expect("grid dimensions are consistent")
}

fn sample_covariance(xs: &[[f64; 2]]) -> [[f64; 2]; 2] {
    let n = xs.len() as f64;
    let mean = [
        xs.iter().map(|x| x[0]).sum::<f64>() / n,
        xs.iter().map(|x| x[1]).sum::<f64>() / n,
    ];
    let mut c = [[0.0; 2]; 2];
    for x in xs {
        for a in 0..2 {
            for b in 0..2 {
                c[a][b] += (x[a] - mean[a]) * (x[b] - mean[b]);
            }
        }
    }
    for row in c.iter_mut() {
        for v in row.iter_mut() {
            *v /= n - 1.0;
        }
    }
    c
}

/// `n * Var(SMV)` for the subsampled return-based multipower variation on a
/// unit-volatility Brownian motion, i.e. its finite-sample variance factor at
/// `(n, m)`. No closed form is known for subsampled estimators with `k > 1`.
pub fn simulate_subsampled_avar(
    q: &PowerVector,
    n: usize,
    m: usize,
    replications: u64,
    seed: u64,
) -> Result<f64> {
    if replications < 2 {
        return domain("need at least two replications");
    }
    let values: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|rep| subsampled_multipower(&unit_brownian_grid(n, m, seed, rep), q))
        .collect::<Result<_>>()?;
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    Ok(n as f64 * var)
}

/// `n * Cov` of `(RRV_b, RTV)` on unit-volatility Brownian paths, the
/// simulation counterpart of the 2x2 asymptotic covariance factor.
pub fn simulate_joint_covariance(
    n: usize,
    m: usize,
    lambda: &LambdaTable,
    replications: u64,
    seed: u64,
) -> Result<[[f64; 2]; 2]> {
    if replications < 2 {
        return domain("need at least two replications");
    }
    let pairs: Vec<[f64; 2]> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let ranges = block_ranges(&unit_brownian_grid(n, m, seed, rep));
            Ok([
                rmv_from_ranges(&ranges, &PowerVector::variance(), lambda, 1)?,
                rmv_from_ranges(&ranges, &PowerVector::tripower(), lambda, 1)?,
            ])
        })
        .collect::<Result<_>>()?;
    let mut c = sample_covariance(&pairs);
    for row in c.iter_mut() {
        for v in row.iter_mut() {
            *v *= n as f64;
        }
    }
    Ok(c)
}
