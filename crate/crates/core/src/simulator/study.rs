use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{avar_constant, ci_log, simulate_subsampled_avar};
use crate::error::{domain, Result};
use crate::estimators::{
    subsampled_estimator, EstimatorId, PowerVector, RangeEstimates, ReturnEstimator, SampledGrid,
};
use crate::fmt::fmt_sig17;
use crate::lambda::LambdaTable;
use crate::rng::{stream, StreamRole};

use super::{add_jumps, add_noise, force_jump, simulate_path, SimScenario};

/// Blocking `(n, m)` of the observed grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Design {
    pub n: usize,
    pub m: usize,
}

impl Design {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, m }
    }

    /// The three blockings of a 2,340-increment day: 5, 10 and 15 minute blocks.
    pub fn standard() -> Vec<Design> {
        vec![
            Design::new(78, 30),
            Design::new(39, 60),
            Design::new(26, 90),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub scenario: SimScenario,
    pub designs: Vec<Design>,
    pub replications: u64,
    /// When set, every path is also evaluated with noise of this ratio added.
    pub noise_gamma: Option<f64>,
    /// Replications behind the simulated variance factor of STV.
    pub stv_avar_replications: u64,
}

impl StudyConfig {
    pub fn new(scenario: SimScenario, replications: u64) -> Self {
        Self {
            scenario,
            designs: Design::standard(),
            replications,
            noise_gamma: None,
            stv_avar_replications: 20_000,
        }
    }
}

/// One cell of the bias / rmse / coverage table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub noise: bool,
    pub n: usize,
    pub m: usize,
    pub estimator: EstimatorId,
    /// `QV` or `IV`.
    pub target: &'static str,
    /// Mean of estimate / target.
    pub rel_bias: f64,
    pub rmse_x1000: f64,
    /// Coverage of the 95% and 99% log intervals for IV (RTV and STV only).
    pub coverage95: Option<f64>,
    pub coverage99: Option<f64>,
}

/// Average true and estimated jump share of the quadratic variation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpShareRow {
    pub noise: bool,
    pub n: usize,
    pub m: usize,
    pub true_share: f64,
    pub range_share: f64,
    pub return_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub replications: u64,
    pub seed: u64,
    pub lambda_version: String,
    pub rows: Vec<StudyRow>,
    pub jump_shares: Vec<JumpShareRow>,
}

impl StudyReport {
    pub const CSV_HEADER: &'static str =
        "noise,n,m,estimator,target,rel_bias,rmse_x1000,coverage95,coverage99";

    pub fn row(&self, noise: bool, design: Design, est: EstimatorId) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.noise == noise && r.n == design.n && r.m == design.m && r.estimator == est)
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt_sig17).unwrap_or_default();
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.noise,
                r.n,
                r.m,
                r.estimator.as_str(),
                r.target,
                fmt_sig17(r.rel_bias),
                fmt_sig17(r.rmse_x1000),
                opt(r.coverage95),
                opt(r.coverage99)
            )
            .unwrap();
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Estimators in table order, with their targets.
const TABLE: [(EstimatorId, bool); 7] = [
    (EstimatorId::Rrv, true),
    (EstimatorId::RrvB, true),
    (EstimatorId::Rbv, false),
    (EstimatorId::Rtv, false),
    (EstimatorId::Srv, true),
    (EstimatorId::Sbv, false),
    (EstimatorId::Stv, false),
];

/// Everything one replication contributes to one (design, panel) cell.
#[derive(Debug, Clone, Copy)]
struct Outcome {
    ratio: [f64; 7],
    sq_err: [f64; 7],
    /// RTV 95, RTV 99, STV 95, STV 99
    covered: [bool; 4],
    true_share: f64,
    range_share: f64,
    return_share: f64,
}

struct DesignConstants {
    rtv: f64,
    stv: f64,
}

fn evaluate(
    grid: &SampledGrid,
    iv: f64,
    qv: f64,
    lambda: &LambdaTable,
    consts: &DesignConstants,
) -> Result<Outcome> {
    let r = RangeEstimates::compute(grid, lambda)?;
    let srv = subsampled_estimator(grid, ReturnEstimator::Rv)?;
    let sbv = subsampled_estimator(grid, ReturnEstimator::Bv)?;
    let stv = subsampled_estimator(grid, ReturnEstimator::Tv)?;
    let stq = subsampled_estimator(grid, ReturnEstimator::Tq)?;
    let values = [r.rrv, r.rrv_b, r.rbv, r.rtv, srv, sbv, stv];
    let mut ratio = [0.0; 7];
    let mut sq_err = [0.0; 7];
    for (i, ((_, qv_target), v)) in TABLE.iter().zip(values).enumerate() {
        let target = if *qv_target { qv } else { iv };
        ratio[i] = v / target;
        sq_err[i] = (v - target).powi(2);
    }
    let n = grid.n();
    let cover = |est: f64, q: f64, c: f64, level: f64| -> Result<bool> {
        if !(est > 0.0) {
            return Ok(false);
        }
        Ok(ci_log(est, q.max(0.0), est * est, n, c, level)?.contains(iv))
    };
    let covered = [
        cover(r.rtv, r.rtq, consts.rtv, 0.95)?,
        cover(r.rtv, r.rtq, consts.rtv, 0.99)?,
        cover(stv, stq, consts.stv, 0.95)?,
        cover(stv, stq, consts.stv, 0.99)?,
    ];
    let share = |total: f64, robust: f64| {
        if total > 0.0 {
            (1.0 - robust / total).max(0.0)
        } else {
            0.0
        }
    };
    Ok(Outcome {
        ratio,
        sq_err,
        covered,
        true_share: 1.0 - iv / qv,
        range_share: share(r.rrv, r.rtv),
        return_share: share(srv, stv),
    })
}

/// Monte Carlo study of bias, rmse and interval coverage over simulated days.
///
/// Replication `i` uses the path, jump and noise streams `(seed, role, i)`, and
/// per-replication results are reduced in index order, so the report does not
/// depend on the number of worker threads.
pub fn run_study(cfg: &StudyConfig, lambda: &LambdaTable) -> Result<StudyReport> {
    let sc = &cfg.scenario;
    sc.validate()?;
    if cfg.designs.is_empty() {
        return domain("study needs at least one design");
    }
    for d in &cfg.designs {
        if d.n * d.m != sc.observed {
            return domain(format!(
                "design ({}, {}) does not factor N = {}",
                d.n, d.m, sc.observed
            ));
        }
        if d.n < 4 {
            return domain("designs need n >= 4 for the tripower estimators");
        }
    }
    if cfg.replications == 0 {
        return domain("study needs at least one replication");
    }
    // every block boundary of every design lies on a multiple of this many fine steps
    let boundary = cfg.designs.iter().map(|d| d.m).fold(0, gcd) * sc.thin();

    let consts: Vec<DesignConstants> = cfg
        .designs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            Ok(DesignConstants {
                rtv: avar_constant(&PowerVector::tripower(), d.m, lambda)?.value,
                stv: simulate_subsampled_avar(
                    &PowerVector::tripower(),
                    d.n,
                    d.m,
                    cfg.stv_avar_replications,
                    sc.seed.wrapping_add(1 + i as u64),
                )?,
            })
        })
        .collect::<Result<_>>()?;

    let panels = if cfg.noise_gamma.is_some() { 2 } else { 1 };
    let per_rep: Vec<Vec<Outcome>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let (mut path, mut truth) = simulate_path(sc, rep)?;
            let mut jump_rng = stream(sc.seed, StreamRole::Jumps, rep);
            add_jumps(
                &mut path,
                &mut truth,
                sc.kappa,
                sc.p_jmp_total,
                boundary,
                &mut jump_rng,
            )?;
            let mut out = Vec::with_capacity(cfg.designs.len() * panels);
            for (d, c) in cfg.designs.iter().zip(&consts) {
                let grid = SampledGrid::new(path.log_prices.clone(), d.n, d.m)?;
                out.push(evaluate(&grid, truth.iv, truth.qv, lambda, c)?);
            }
            if let Some(gamma) = cfg.noise_gamma {
                let mut noisy = path.clone();
                let mut noise_rng = stream(sc.seed, StreamRole::Noise, rep);
                add_noise(&mut noisy, &truth, gamma, sc.noise_reading, &mut noise_rng)?;
                for (d, c) in cfg.designs.iter().zip(&consts) {
                    let grid = SampledGrid::new(noisy.log_prices.clone(), d.n, d.m)?;
                    out.push(evaluate(&grid, truth.iv, truth.qv, lambda, c)?);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let reps = cfg.replications as f64;
    let mut rows = Vec::new();
    let mut jump_shares = Vec::new();
    for panel in 0..panels {
        for (di, d) in cfg.designs.iter().enumerate() {
            let cell = panel * cfg.designs.len() + di;
            let mut ratio = [0.0; 7];
            let mut sq = [0.0; 7];
            let mut cov = [0.0; 4];
            let (mut ts, mut rs, mut ss) = (0.0, 0.0, 0.0);
            for rep in &per_rep {
                let o = &rep[cell];
                for i in 0..7 {
                    ratio[i] += o.ratio[i];
                    sq[i] += o.sq_err[i];
                }
                for i in 0..4 {
                    if o.covered[i] {
                        cov[i] += 1.0;
                    }
                }
                ts += o.true_share;
                rs += o.range_share;
                ss += o.return_share;
            }
            for (i, (est, qv_target)) in TABLE.iter().enumerate() {
                let coverage = match est {
                    EstimatorId::Rtv => Some((cov[0] / reps, cov[1] / reps)),
                    EstimatorId::Stv => Some((cov[2] / reps, cov[3] / reps)),
                    _ => None,
                };
                rows.push(StudyRow {
                    noise: panel == 1,
                    n: d.n,
                    m: d.m,
                    estimator: *est,
                    target: if *qv_target { "QV" } else { "IV" },
                    rel_bias: ratio[i] / reps,
                    rmse_x1000: 1000.0 * (sq[i] / reps).sqrt(),
                    coverage95: coverage.map(|c| c.0),
                    coverage99: coverage.map(|c| c.1),
                });
            }
            jump_shares.push(JumpShareRow {
                noise: panel == 1,
                n: d.n,
                m: d.m,
                true_share: ts / reps,
                range_share: rs / reps,
                return_share: ss / reps,
            });
        }
    }
    Ok(StudyReport {
        replications: cfg.replications,
        seed: sc.seed,
        lambda_version: lambda.version(),
        rows,
        jump_shares,
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Deviations of `RRV_b` from its jump-diffusion limit, scaled by the day's IV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpLawSummary {
    pub replications: u64,
    /// Mean and standard error of `(RRV_b - IV - J^2 / lambda(2, m)) / IV`.
    pub scaled_mean: f64,
    pub scaled_se: f64,
    /// Mean and standard error of `(RRV_b - IV - J^2) / IV`.
    pub unscaled_mean: f64,
    pub unscaled_se: f64,
    /// Mean and standard error of `(RRV - IV - J^2) / IV` for the hybrid estimator.
    pub hybrid_mean: f64,
    pub hybrid_se: f64,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Diffusion days with exactly one jump of size `+-sqrt(jump_share * IV)` at a
/// uniform time (away from block boundaries).
pub fn single_jump_study(
    scenario: &SimScenario,
    design: Design,
    jump_share: f64,
    replications: u64,
    lambda: &LambdaTable,
) -> Result<JumpLawSummary> {
    if design.n * design.m != scenario.observed {
        return domain("design does not factor the observed grid");
    }
    if replications < 2 {
        return domain("need at least two replications");
    }
    let sc = SimScenario {
        kappa: 0.0,
        gamma: 0.0,
        ..scenario.clone()
    };
    let l2 = lambda.get(2.0, design.m)?;
    let boundary = design.m * sc.thin();
    let devs: Vec<[f64; 3]> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let (mut path, mut truth) = simulate_path(&sc, rep)?;
            let mut rng = stream(sc.seed, StreamRole::Jumps, rep);
            let mut idx = rng.random_range(1..=sc.fine_steps);
            if idx % boundary == 0 {
                idx = if idx == sc.fine_steps {
                    idx - 1
                } else {
                    idx + 1
                };
            }
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let jump = sign * (jump_share * truth.iv).sqrt();
            force_jump(&mut path, &mut truth, idx, jump)?;
            let grid = SampledGrid::new(path.log_prices, design.n, design.m)?;
            let est = RangeEstimates::compute(&grid, lambda)?;
            let j2 = jump * jump;
            Ok([
                (est.rrv_b - truth.iv - j2 / l2) / truth.iv,
                (est.rrv_b - truth.iv - j2) / truth.iv,
                (est.rrv - truth.iv - j2) / truth.iv,
            ])
        })
        .collect::<Result<_>>()?;
    let col = |k: usize| devs.iter().map(|d| d[k]).collect::<Vec<_>>();
    let (scaled_mean, scaled_se) = mean_se(&col(0));
    let (unscaled_mean, unscaled_se) = mean_se(&col(1));
    let (hybrid_mean, hybrid_se) = mean_se(&col(2));
    Ok(JumpLawSummary {
        replications,
        scaled_mean,
        scaled_se,
        unscaled_mean,
        unscaled_se,
        hybrid_mean,
        hybrid_se,
    })
}

/// Root mean squared error of RTV against IV on unit-volatility Brownian days
/// with `m` increments per block, for each block count in `ns`.
pub fn rtv_rmse_by_n(
    ns: &[usize],
    m: usize,
    replications: u64,
    seed: u64,
    lambda: &LambdaTable,
) -> Result<Vec<(usize, f64)>> {
    ns.iter()
        .map(|&n| {
            let sc = SimScenario {
                beta0: 0.0,
                fine_steps: n * m,
                observed: n * m,
                seed,
                ..SimScenario::constant_volatility()
            };
            let errs: Vec<f64> = (0..replications)
                .into_par_iter()
                .map(|rep| {
                    let (path, truth) = simulate_path(&sc, rep)?;
                    let grid = SampledGrid::new(path.log_prices, n, m)?;
                    let v = crate::estimators::rtv(&grid, lambda)?;
                    Ok((v - truth.iv).powi(2))
                })
                .collect::<Result<_>>()?;
            Ok((n, (errs.iter().sum::<f64>() / replications as f64).sqrt()))
        })
        .collect()
}
