//! Tick files to equidistant log-price grids, and the daily estimation pipeline.

use std::fmt::Write as _;
use std::path::Path;

use crate::asymptotics::{avar_constant, ci_log, simulate_subsampled_avar};
use crate::error::{Error, Result};
use crate::estimators::{
    subsampled_estimator, EstimateReport, EstimatorId, PowerVector, RangeEstimates, ReportNotes,
    ReturnEstimator, SampledGrid,
};
use crate::fmt::fmt_sig17;
use crate::lambda::LambdaTable;

/// Regular trading hours as seconds after midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Session {
    pub open: u32,
    pub close: u32,
}

impl Default for Session {
    /// 09:30:00 to 16:00:00.
    fn default() -> Self {
        Self {
            open: 9 * 3600 + 30 * 60,
            close: 16 * 3600,
        }
    }
}

impl Session {
    pub fn seconds(&self) -> i64 {
        self.close as i64 - self.open as i64
    }
}

/// Trades of one day; `records` hold (seconds since the open, price).
#[derive(Debug, Clone, PartialEq)]
pub struct TickSeries {
    pub records: Vec<(i64, f64)>,
    pub session: Session,
}

fn parse_clock(s: &str) -> Option<i64> {
    let mut parts = s.split(':');
    let h: i64 = parts.next()?.parse().ok()?;
    let m: i64 = parts.next()?.parse().ok()?;
    let sec: f64 = parts.next()?.parse().ok()?;
    if parts.next().is_some()
        || !(0..24).contains(&h)
        || !(0..60).contains(&m)
        || !(0.0..61.0).contains(&sec)
    {
        return None;
    }
    Some(h * 3600 + m * 60 + sec.floor() as i64)
}

impl TickSeries {
    /// Parses `timestamp,price` CSV. Timestamps are `HH:MM:SS[.fff]` clock
    /// times or seconds since the open; fractions of a second are floored.
    /// Records are stably sorted by time.
    pub fn parse_csv(text: &str, session: Session) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim().replace(' ', "") == "timestamp,price" => {}
            Some((i, h)) => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected header timestamp,price, got {h:?}"),
                })
            }
            None => return Err(Error::Ingestion("empty tick file".into())),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let bad = |msg: String| Error::Parse { line: i + 1, msg };
            let (ts, px) = line
                .split_once(',')
                .ok_or_else(|| bad(format!("expected two fields, got {line:?}")))?;
            let (ts, px) = (ts.trim(), px.trim());
            let t = if ts.contains(':') {
                parse_clock(ts).ok_or_else(|| bad(format!("bad clock time {ts:?}")))?
                    - session.open as i64
            } else {
                let secs: f64 = ts
                    .parse()
                    .map_err(|_| bad(format!("bad timestamp {ts:?}")))?;
                if !secs.is_finite() {
                    return Err(bad(format!("bad timestamp {ts:?}")));
                }
                secs.floor() as i64
            };
            let price: f64 = px.parse().map_err(|_| bad(format!("bad price {px:?}")))?;
            records.push((t, price));
        }
        records.sort_by_key(|r| r.0);
        Ok(Self { records, session })
    }

    pub fn read(path: impl AsRef<Path>, session: Session) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?, session)
    }

    /// `timestamp,price` CSV with timestamps in seconds since the open.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("timestamp,price\n");
        for (t, p) in &self.records {
            writeln!(s, "{t},{}", fmt_sig17(*p)).unwrap();
        }
        s
    }
}

/// Half-width of the rolling window of the outlier filter.
pub const OUTLIER_HALF_WINDOW: usize = 25;
/// Deviations beyond this many median absolute deviations are dropped.
pub const OUTLIER_MADS: f64 = 10.0;

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Drops records outside the session and nonpositive prices, keeps the last
/// record of each timestamp, then drops records whose log-price is more than
/// 10 MADs from the median of its 50 nearest neighbours (25 on each side).
/// Windows with zero MAD do not flag anything.
pub fn clean(raw: &TickSeries) -> Result<TickSeries> {
    let span = raw.session.seconds();
    let mut kept: Vec<(i64, f64)> = Vec::with_capacity(raw.records.len());
    for &(t, p) in &raw.records {
        if !(0..=span).contains(&t) || !(p > 0.0) || !p.is_finite() {
            continue;
        }
        match kept.last_mut() {
            Some(last) if last.0 == t => *last = (t, p),
            _ => kept.push((t, p)),
        }
    }
    let logs: Vec<f64> = kept.iter().map(|r| r.1.ln()).collect();
    let mut buf = Vec::with_capacity(2 * OUTLIER_HALF_WINDOW);
    let records: Vec<(i64, f64)> = kept
        .iter()
        .enumerate()
        .filter(|&(i, _)| {
            buf.clear();
            let lo = i.saturating_sub(OUTLIER_HALF_WINDOW);
            let hi = (i + OUTLIER_HALF_WINDOW).min(logs.len() - 1);
            buf.extend((lo..=hi).filter(|&j| j != i).map(|j| logs[j]));
            if buf.is_empty() {
                return true;
            }
            let med = median(&mut buf);
            for x in buf.iter_mut() {
                *x = (*x - med).abs();
            }
            let mad = median(&mut buf);
            mad == 0.0 || (logs[i] - med).abs() <= OUTLIER_MADS * mad
        })
        .map(|(_, r)| *r)
        .collect();
    if records.is_empty() {
        return Err(Error::Ingestion("no records survive cleaning".into()));
    }
    Ok(TickSeries {
        records,
        session: raw.session,
    })
}

/// Equidistant grid of `n m` returns `interval_seconds` apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResampleConfig {
    pub interval_seconds: u32,
    pub session_seconds: u32,
    pub n: usize,
    pub m: usize,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            interval_seconds: 10,
            session_seconds: 23_400,
            n: 78,
            m: 30,
        }
    }
}

impl ResampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.interval_seconds == 0 || self.n == 0 || self.m == 0 {
            return Err(Error::Domain("interval, n and m must be positive".into()));
        }
        if self.session_seconds as usize != self.interval_seconds as usize * self.n * self.m {
            return Err(Error::Domain(format!(
                "session_seconds {} != interval_seconds {} * n {} * m {}",
                self.session_seconds, self.interval_seconds, self.n, self.m
            )));
        }
        Ok(())
    }

    /// `key=value` lines (`interval_seconds`, `session_seconds`, `n`, `m`) over the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Parse { line: i + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            let v: u64 = v
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad integer {:?}", v.trim())))?;
            match k.trim() {
                "interval_seconds" => c.interval_seconds = v as u32,
                "session_seconds" => c.session_seconds = v as u32,
                "n" => c.n = v as usize,
                "m" => c.m = v as usize,
                k => return Err(bad(format!("unknown key {k:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Log of the last price at or before each grid instant `0, dt, ..., n m dt`.
pub fn previous_tick_resample(ticks: &TickSeries, cfg: &ResampleConfig) -> Result<SampledGrid> {
    cfg.validate()?;
    match ticks.records.first() {
        Some(&(t, _)) if t <= 0 => {}
        Some(&(t, _)) => {
            return Err(Error::Ingestion(format!(
                "first tick at {t} s after the open; no price at the first grid point"
            )))
        }
        None => return Err(Error::Ingestion("no ticks to resample".into())),
    }
    let big_n = cfg.n * cfg.m;
    let dt = cfg.interval_seconds as i64;
    let mut out = Vec::with_capacity(big_n + 1);
    let mut next = 0;
    let mut last = f64::NAN;
    for k in 0..=big_n as i64 {
        let at = k * dt;
        while next < ticks.records.len() && ticks.records[next].0 <= at {
            last = ticks.records[next].1;
            next += 1;
        }
        out.push(last.ln());
    }
    SampledGrid::new(out, cfg.n, cfg.m)
}

/// Cleans, resamples and estimates one day at a time. Interval constants are
/// computed once per pipeline.
#[derive(Debug, Clone)]
pub struct DailyPipeline<'a> {
    pub resample: ResampleConfig,
    pub lambda: &'a LambdaTable,
    pub level: f64,
    rtv_constant: f64,
    stv_constant: f64,
}

/// Replications and seed behind the simulated STV variance factor.
pub const STV_AVAR_REPLICATIONS: u64 = 4_000;
pub const STV_AVAR_SEED: u64 = 7_301;

impl<'a> DailyPipeline<'a> {
    pub fn new(resample: ResampleConfig, lambda: &'a LambdaTable, level: f64) -> Result<Self> {
        resample.validate()?;
        let tv = PowerVector::tripower();
        Ok(Self {
            resample,
            lambda,
            level,
            rtv_constant: avar_constant(&tv, resample.m, lambda)?.value,
            stv_constant: simulate_subsampled_avar(
                &tv,
                resample.n,
                resample.m,
                STV_AVAR_REPLICATIONS,
                STV_AVAR_SEED,
            )?,
        })
    }

    /// One report per estimator for the grid of one day.
    pub fn estimate_grid(&self, date: &str, grid: &SampledGrid) -> Result<Vec<EstimateReport>> {
        let r = RangeEstimates::compute(grid, self.lambda)?;
        let srv = subsampled_estimator(grid, ReturnEstimator::Rv)?;
        let sbv = subsampled_estimator(grid, ReturnEstimator::Bv)?;
        let stv = subsampled_estimator(grid, ReturnEstimator::Tv)?;
        let stq = subsampled_estimator(grid, ReturnEstimator::Tq)?;
        let ci = |est: f64, quart: f64, c: f64| -> Option<(f64, f64, f64)> {
            let iv = ci_log(est, quart, est * est, grid.n(), c, self.level).ok()?;
            Some((iv.level, iv.lower, iv.upper))
        };
        let rows = [
            (EstimatorId::Srv, srv, Some(PowerVector::variance()), None),
            (EstimatorId::Sbv, sbv, Some(PowerVector::bipower()), None),
            (
                EstimatorId::Stv,
                stv,
                Some(PowerVector::tripower()),
                ci(stv, stq, self.stv_constant),
            ),
            (EstimatorId::Stq, stq, None, None),
            (
                EstimatorId::RrvB,
                r.rrv_b,
                Some(PowerVector::variance()),
                None,
            ),
            (EstimatorId::Rbv, r.rbv, Some(PowerVector::bipower()), None),
            (
                EstimatorId::Rtv,
                r.rtv,
                Some(PowerVector::tripower()),
                ci(r.rtv, r.rtq, self.rtv_constant),
            ),
            (EstimatorId::Rrv, r.rrv, None, None),
            (EstimatorId::Jv, r.jv, None, None),
            (EstimatorId::Rtq, r.rtq, None, None),
        ];
        let version = self.lambda.version();
        Ok(rows
            .into_iter()
            .map(|(estimator, value, q, ci)| EstimateReport {
                date: date.to_string(),
                estimator,
                n: grid.n(),
                m: grid.m(),
                value,
                lambda_version: version.clone(),
                notes: ReportNotes {
                    consistency_robust: q.as_ref().map(PowerVector::consistency_robust),
                    clt_robust: q.as_ref().map(PowerVector::clt_robust),
                    ci,
                    message: None,
                },
            })
            .collect())
    }

    pub fn run(&self, date: &str, ticks: &TickSeries) -> Result<Vec<EstimateReport>> {
        let grid = previous_tick_resample(&clean(ticks)?, &self.resample)?;
        self.estimate_grid(date, &grid)
    }

    /// Runs one tick file; the date is the file stem.
    pub fn run_file(
        &self,
        path: impl AsRef<Path>,
        session: Session,
    ) -> Result<Vec<EstimateReport>> {
        let path = path.as_ref();
        let date = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.run(&date, &TickSeries::read(path, session)?)
    }
}
