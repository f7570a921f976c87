use std::fmt::Write as _;

use crate::error::{domain, Error, Result};
use crate::fmt::fmt_sig17;

use super::{FactorStart, NoiseRatioReading};

/// Parameters of the simulated trading day.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub mu: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    /// Correlation between the price shock and each volatility factor shock.
    pub leverage_rho: f64,
    /// Expected number of jumps per day.
    pub kappa: f64,
    /// Jump variance as a share of integrated variance, split evenly over the day's jumps.
    pub p_jmp_total: f64,
    /// Noise ratio.
    pub gamma: f64,
    pub noise_reading: NoiseRatioReading,
    pub factor1_start: FactorStart,
    pub factor2_start: FactorStart,
    /// Euler steps per day.
    pub fine_steps: usize,
    /// Observed increments per day `N`; must divide `fine_steps`.
    pub observed: usize,
    pub seed: u64,
}

impl Default for SimScenario {
    /// One 6.5 hour session simulated second by second and observed every 10 seconds.
    fn default() -> Self {
        Self {
            mu: 0.03,
            beta0: -1.2,
            beta1: 0.04,
            beta2: 1.5,
            alpha1: -0.000137,
            alpha2: -1.386,
            alpha3: 0.25,
            leverage_rho: -0.3,
            kappa: 0.4,
            p_jmp_total: 0.25,
            gamma: 0.0,
            noise_reading: NoiseRatioReading::PerFineStepVariance,
            factor1_start: FactorStart::Zero,
            factor2_start: FactorStart::Stationary,
            fine_steps: 23_400,
            observed: 2_340,
            seed: 20_111,
        }
    }
}

const KEYS: [&str; 17] = [
    "mu",
    "beta0",
    "beta1",
    "beta2",
    "alpha1",
    "alpha2",
    "alpha3",
    "leverage_rho",
    "kappa",
    "p_jmp_total",
    "gamma",
    "noise_reading",
    "factor1_start",
    "factor2_start",
    "fine_steps",
    "observed",
    "seed",
];

impl SimScenario {
    /// Constant volatility `s_exp(beta0)`, no drift, no jumps, no noise.
    pub fn constant_volatility() -> Self {
        Self {
            mu: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            kappa: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mu,
            self.beta0,
            self.beta1,
            self.beta2,
            self.alpha1,
            self.alpha2,
            self.alpha3,
            self.leverage_rho,
            self.kappa,
            self.p_jmp_total,
            self.gamma,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return domain("scenario parameters must be finite");
        }
        if self.kappa < 0.0 {
            return domain("jump intensity kappa must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.p_jmp_total) {
            return domain("p_jmp_total must lie in [0, 1)");
        }
        if self.gamma < 0.0 {
            return domain("noise ratio gamma must be nonnegative");
        }
        if self.leverage_rho.abs() >= std::f64::consts::FRAC_1_SQRT_2 {
            // [1 r r; r 1 0; r 0 1] is positive definite iff 2 r^2 < 1
            return domain("leverage correlation must satisfy 2 rho^2 < 1");
        }
        if self.observed == 0 || self.fine_steps == 0 || self.fine_steps % self.observed != 0 {
            return domain("observed count must be positive and divide fine_steps");
        }
        Ok(())
    }

    /// Fine steps per observed increment.
    pub fn thin(&self) -> usize {
        self.fine_steps / self.observed
    }

    /// Flat `key=value` text, one parameter per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("mu", self.mu),
            ("beta0", self.beta0),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("leverage_rho", self.leverage_rho),
            ("kappa", self.kappa),
            ("p_jmp_total", self.p_jmp_total),
            ("gamma", self.gamma),
        ] {
            writeln!(s, "{k}={}", fmt_sig17(v)).unwrap();
        }
        writeln!(s, "noise_reading={}", self.noise_reading.as_str()).unwrap();
        writeln!(s, "factor1_start={}", self.factor1_start.as_str()).unwrap();
        writeln!(s, "factor2_start={}", self.factor2_start.as_str()).unwrap();
        writeln!(s, "fine_steps={}", self.fine_steps).unwrap();
        writeln!(s, "observed={}", self.observed).unwrap();
        writeln!(s, "seed={}", self.seed).unwrap();
        s
    }

    /// Parses `key=value` lines on top of the defaults. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut sc = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Parse { line: i + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("bad number for {k}: {v:?}")))
            };
            let int = || {
                v.parse::<u64>()
                    .map_err(|_| bad(format!("bad integer for {k}: {v:?}")))
            };
            match k {
                "mu" => sc.mu = num()?,
                "beta0" => sc.beta0 = num()?,
                "beta1" => sc.beta1 = num()?,
                "beta2" => sc.beta2 = num()?,
                "alpha1" => sc.alpha1 = num()?,
                "alpha2" => sc.alpha2 = num()?,
                "alpha3" => sc.alpha3 = num()?,
                "leverage_rho" => sc.leverage_rho = num()?,
                "kappa" => sc.kappa = num()?,
                "p_jmp_total" => sc.p_jmp_total = num()?,
                "gamma" => sc.gamma = num()?,
                "noise_reading" => {
                    sc.noise_reading = NoiseRatioReading::parse(v)
                        .ok_or_else(|| bad(format!("unknown noise reading {v:?}")))?
                }
                "factor1_start" => {
                    sc.factor1_start = FactorStart::parse(v)
                        .ok_or_else(|| bad(format!("unknown factor start {v:?}")))?
                }
                "factor2_start" => {
                    sc.factor2_start = FactorStart::parse(v)
                        .ok_or_else(|| bad(format!("unknown factor start {v:?}")))?
                }
                "fine_steps" => sc.fine_steps = int()? as usize,
                "observed" => sc.observed = int()? as usize,
                "seed" => sc.seed = int()?,
                _ => {
                    return Err(bad(format!(
                        "unknown key {k:?}; expected one of {}",
                        KEYS.join(", ")
                    )))
                }
            }
        }
        sc.validate()?;
        Ok(sc)
    }
}
