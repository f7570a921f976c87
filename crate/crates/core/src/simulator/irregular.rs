use std::fmt::Write as _;

use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::estimators::{
    subsampled_estimator, EstimatorId, RangeEstimates, ReturnEstimator, SampledGrid,
};
use crate::fmt::fmt_sig17;
use crate::lambda::LambdaTable;
use crate::rng::{stream, StreamRole};

/// One-second time stamps in a 6.5 hour session, `0..=SESSION_SECONDS`.
pub const SESSION_SECONDS: usize = 23_400;

/// How observation times are drawn from the one-second stamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IrregularScheme {
    /// Every `SESSION_SECONDS / (n m)` seconds.
    Equidistant,
    /// `n m + 1` stamps drawn without replacement; blocks hold `m` returns each.
    UniformWithoutReplacement,
    /// `draws` stamps drawn without replacement plus the open, previous-tick
    /// interpolated to the equidistant grid of `n m` returns.
    PreviousTick { draws: usize },
}

impl IrregularScheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Equidistant => "equidistant",
            Self::UniformWithoutReplacement => "uniform",
            Self::PreviousTick { .. } => "previous-tick",
        }
    }

    /// Parses `equidistant`, `uniform` or `previous-tick[:draws]` (11,700 draws by default).
    pub fn parse(s: &str) -> Option<Self> {
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        match (head, tail) {
            ("equidistant", None) => Some(Self::Equidistant),
            ("uniform", None) => Some(Self::UniformWithoutReplacement),
            ("previous-tick", None) => Some(Self::PreviousTick { draws: 11_700 }),
            ("previous-tick", Some(d)) => d.parse().ok().map(|draws| Self::PreviousTick { draws }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrregularStudyConfig {
    pub scheme: IrregularScheme,
    pub n: usize,
    pub m: usize,
    pub replications: u64,
    pub seed: u64,
}

impl IrregularStudyConfig {
    /// `(n, m) = (78, 30)` over a unit-variance day.
    pub fn new(scheme: IrregularScheme, replications: u64, seed: u64) -> Self {
        Self {
            scheme,
            n: 78,
            m: 30,
            replications,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrregularRow {
    pub estimator: EstimatorId,
    /// Mean of estimate / IV.
    pub rel_bias: f64,
    /// `n` times the mean squared relative error.
    pub n_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrregularReport {
    pub scheme: IrregularScheme,
    pub n: usize,
    pub m: usize,
    pub replications: u64,
    pub seed: u64,
    pub lambda_version: String,
    pub rows: Vec<IrregularRow>,
}

impl IrregularReport {
    pub const CSV_HEADER: &'static str = "scheme,n,m,estimator,rel_bias,n_mse";

    pub fn row(&self, est: EstimatorId) -> Option<&IrregularRow> {
        self.rows.iter().find(|r| r.estimator == est)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                self.scheme.name(),
                self.n,
                self.m,
                r.estimator.as_str(),
                fmt_sig17(r.rel_bias),
                fmt_sig17(r.n_mse)
            )
            .unwrap();
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

const ESTIMATORS: [EstimatorId; 5] = [
    EstimatorId::Srv,
    EstimatorId::Stv,
    EstimatorId::RrvB,
    EstimatorId::Rrv,
    EstimatorId::Rtv,
];

/// Observed log-prices and the IV they span, for one replication.
fn sample_day(cfg: &IrregularStudyConfig, rep: u64) -> Result<(Vec<f64>, f64)> {
    let big_n = cfg.n * cfg.m;
    let mut rng = stream(cfg.seed, StreamRole::Path, rep);
    let sd = (1.0 / SESSION_SECONDS as f64).sqrt();
    let mut bm = Vec::with_capacity(SESSION_SECONDS + 1);
    bm.push(0.0);
    let mut x = 0.0;
    for _ in 0..SESSION_SECONDS {
        let z: f64 = StandardNormal.sample(&mut rng);
        x += sd * z;
        bm.push(x);
    }
    let mut times = stream(cfg.seed, StreamRole::Sampling, rep);
    match cfg.scheme {
        IrregularScheme::Equidistant => {
            let step = SESSION_SECONDS / big_n;
            Ok(((0..=big_n).map(|i| bm[i * step]).collect(), 1.0))
        }
        IrregularScheme::UniformWithoutReplacement => {
            let mut idx = sample(&mut times, SESSION_SECONDS + 1, big_n + 1).into_vec();
            idx.sort_unstable();
            let span = (idx[big_n] - idx[0]) as f64 / SESSION_SECONDS as f64;
            Ok((idx.iter().map(|&i| bm[i]).collect(), span))
        }
        IrregularScheme::PreviousTick { draws } => {
            let mut ticked = vec![false; SESSION_SECONDS + 1];
            ticked[0] = true;
            for i in sample(&mut times, SESSION_SECONDS + 1, draws).into_iter() {
                ticked[i] = true;
            }
            let step = SESSION_SECONDS / big_n;
            let mut last = 0.0;
            let mut out = Vec::with_capacity(big_n + 1);
            for (s, (&t, &p)) in ticked.iter().zip(&bm).enumerate() {
                if t {
                    last = p;
                }
                if s % step == 0 {
                    out.push(last);
                }
            }
            Ok((out, 1.0))
        }
    }
}

/// Relative bias and `n`-scaled mse of SRV, STV, RRVb, RRV and RTV on unit-variance
/// Brownian days observed at irregular times, using the equidistant `lambda`.
/// The target is the integrated variance over the observed span.
pub fn simulate_irregular_grid_study(
    cfg: &IrregularStudyConfig,
    lambda: &LambdaTable,
) -> Result<IrregularReport> {
    let big_n = cfg.n * cfg.m;
    if cfg.n < 4 || cfg.m == 0 || big_n > SESSION_SECONDS {
        return domain("irregular study needs n >= 4, m >= 1 and n m <= 23,400");
    }
    if cfg.replications == 0 {
        return domain("irregular study needs at least one replication");
    }
    match cfg.scheme {
        IrregularScheme::Equidistant | IrregularScheme::PreviousTick { .. }
            if SESSION_SECONDS % big_n != 0 =>
        {
            return domain(format!(
                "n m = {big_n} must divide {SESSION_SECONDS} seconds"
            ));
        }
        IrregularScheme::PreviousTick { draws } if draws == 0 || draws > SESSION_SECONDS + 1 => {
            return domain("previous-tick draws must lie in 1..=23,401");
        }
        _ => {}
    }
    let per_rep: Vec<[f64; 5]> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let (prices, iv) = sample_day(cfg, rep)?;
            let grid = SampledGrid::new(prices, cfg.n, cfg.m)?;
            let r = RangeEstimates::compute(&grid, lambda)?;
            let srv = subsampled_estimator(&grid, ReturnEstimator::Rv)?;
            let stv = subsampled_estimator(&grid, ReturnEstimator::Tv)?;
            Ok([srv / iv, stv / iv, r.rrv_b / iv, r.rrv / iv, r.rtv / iv])
        })
        .collect::<Result<_>>()?;
    let reps = cfg.replications as f64;
    let rows = ESTIMATORS
        .iter()
        .enumerate()
        .map(|(k, &estimator)| {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for r in &per_rep {
                sum += r[k];
                sq += (r[k] - 1.0).powi(2);
            }
            IrregularRow {
                estimator,
                rel_bias: sum / reps,
                n_mse: cfg.n as f64 * sq / reps,
            }
        })
        .collect();
    Ok(IrregularReport {
        scheme: cfg.scheme,
        n: cfg.n,
        m: cfg.m,
        replications: cfg.replications,
        seed: cfg.seed,
        lambda_version: lambda.version(),
        rows,
    })
}
