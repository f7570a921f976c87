use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use crate::error::{domain, Result};
use crate::rng::{stream, StreamRole};

use super::SimScenario;

/// Knot of the spliced exponential, `ln 1.5`.
pub const S_EXP_KNOT: f64 = 0.405_465_108_108_164_4;

/// Spliced exponential: `exp(x)` up to `x0 = ln 1.5`, then
/// `exp(x0) * sqrt(1 - x0 + x^2 / x0)`, which grows linearly. Value and slope
/// are continuous at the knot.
pub fn s_exp(x: f64) -> f64 {
    if x <= S_EXP_KNOT {
        x.exp()
    } else {
        1.5 * (1.0 - S_EXP_KNOT + x * x / S_EXP_KNOT).sqrt()
    }
}

/// How the noise ratio `gamma` maps to the noise standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseRatioReading {
    /// `omega^2 = gamma^2 * IV / N`: noise variance relative to the variance
    /// of one efficient return at the finest observed frequency.
    PerReturnVariance,
    /// `omega^2 = gamma^2 * IV / N_fine`: relative to one Euler-grid return,
    /// the one-second return in the standard design.
    PerFineStepVariance,
    /// `gamma^2 = omega^2 * IV / N`, i.e. `omega^2 = gamma^2 * N / IV`.
    AsPrinted,
}

impl NoiseRatioReading {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PerReturnVariance => "per_return_variance",
            Self::PerFineStepVariance => "per_fine_step_variance",
            Self::AsPrinted => "as_printed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per_return_variance" => Some(Self::PerReturnVariance),
            "per_fine_step_variance" => Some(Self::PerFineStepVariance),
            "as_printed" => Some(Self::AsPrinted),
            _ => None,
        }
    }
}

/// Initial value of a volatility factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorStart {
    /// A draw from the factor's stationary law.
    Stationary,
    /// The stationary mean, zero.
    Zero,
}

impl FactorStart {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stationary => "stationary",
            Self::Zero => "zero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stationary" => Some(Self::Stationary),
            "zero" => Some(Self::Zero),
            _ => None,
        }
    }
}

/// Noise standard deviation `omega` implied by `gamma` for a day with
/// integrated variance `iv` observed at `observed` of `fine` Euler increments.
pub fn noise_std(
    gamma: f64,
    iv: f64,
    observed: usize,
    fine: usize,
    reading: NoiseRatioReading,
) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let n = observed as f64;
    let var = match reading {
        NoiseRatioReading::PerReturnVariance => gamma * gamma * iv / n,
        NoiseRatioReading::PerFineStepVariance => gamma * gamma * iv / fine as f64,
        NoiseRatioReading::AsPrinted => gamma * gamma * n / iv,
    };
    var.sqrt()
}

/// Latent functionals of one simulated day.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Integrated variance, Riemann sum over the Euler grid.
    pub iv: f64,
    /// Integrated quarticity.
    pub iq: f64,
    /// `(time in [0, 1], size)` of every jump.
    pub jumps: Vec<(f64, f64)>,
    /// `iv + sum J^2`.
    pub qv: f64,
}

impl GroundTruth {
    pub fn jump_variation(&self) -> f64 {
        self.jumps.iter().map(|(_, j)| j * j).sum()
    }

    fn push_jump(&mut self, time: f64, size: f64) {
        self.jumps.push((time, size));
        self.qv = self.iv + self.jump_variation();
    }
}

/// Observed log-prices of one day: every `thin`-th point of the Euler grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub log_prices: Vec<f64>,
    pub thin: usize,
    pub fine_steps: usize,
}

impl SimPath {
    /// Adds `size` to every observed price at or after fine step `fine_index`.
    fn shift_from(&mut self, fine_index: usize, size: f64) {
        let first = fine_index.div_ceil(self.thin);
        for p in &mut self.log_prices[first..] {
            *p += size;
        }
    }
}

/// Draws the initial value of the second factor by running it for a few days
/// from a normal start with its stationary variance `1 / (-2 a2 - a3^2)`.
fn draw_factor2_start(sc: &SimScenario, rng: &mut impl Rng) -> f64 {
    let denom = -2.0 * sc.alpha2 - sc.alpha3 * sc.alpha3;
    if !(denom > 0.0) {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    let mut v = z / denom.sqrt();
    const BURN_DAYS: usize = 5;
    const BURN_STEPS_PER_DAY: usize = 1000;
    let dt = 1.0 / BURN_STEPS_PER_DAY as f64;
    let sq = dt.sqrt();
    for _ in 0..BURN_DAYS * BURN_STEPS_PER_DAY {
        let z: f64 = StandardNormal.sample(rng);
        v += sc.alpha2 * v * dt + (1.0 + sc.alpha3 * v) * sq * z;
    }
    v
}

/// Integrates one day over `steps` Euler steps, drawing three independent
/// standard normals per step from `shocks`. Returns every `thin`-th log-price
/// with the Riemann sums of `sigma^2` and `sigma^4`.
fn euler_day(
    sc: &SimScenario,
    mut v1: f64,
    mut v2: f64,
    steps: usize,
    thin: usize,
    shocks: &mut impl FnMut() -> [f64; 3],
) -> (Vec<f64>, f64, f64) {
    // Cholesky factor of corr [1 r r; r 1 0; r 0 1]
    let r = sc.leverage_rho;
    let c11 = (1.0 - r * r).sqrt();
    let c21 = -r * r / c11;
    let c22 = (1.0 - r * r - c21 * c21).sqrt();

    let dt = 1.0 / steps as f64;
    let sq = dt.sqrt();
    let mut p = 0.0;
    let mut iv = 0.0;
    let mut iq = 0.0;
    let mut out = Vec::with_capacity(steps / thin + 1);
    out.push(p);
    for step in 1..=steps {
        let [z0, z1, z2] = shocks();
        let sigma = s_exp(sc.beta0 + sc.beta1 * v1 + sc.beta2 * v2);
        let s2 = sigma * sigma;
        iv += s2 * dt;
        iq += s2 * s2 * dt;
        p += sc.mu * dt + sigma * sq * z0;
        let db1 = r * z0 + c11 * z1;
        let db2 = r * z0 + c21 * z1 + c22 * z2;
        v1 += sc.alpha1 * v1 * dt + sq * db1;
        v2 += sc.alpha2 * v2 * dt + (1.0 + sc.alpha3 * v2) * sq * db2;
        if step % thin == 0 {
            out.push(p);
        }
    }
    (out, iv, iq)
}

/// Euler scheme for the diffusive part of the day `replication`.
///
/// A stationary start draws the first factor from its exact law
/// `N(0, -1/(2 a1))` (or 0 when `a1 >= 0`) and the second from a burned-in draw.
pub fn simulate_path(sc: &SimScenario, replication: u64) -> Result<(SimPath, GroundTruth)> {
    sc.validate()?;
    let mut rng = stream(sc.seed, StreamRole::Path, replication);

    // both draws are made regardless of the start rule so the shocks stay aligned
    let z: f64 = StandardNormal.sample(&mut rng);
    let v1_stationary = if sc.alpha1 < 0.0 {
        z / (-2.0 * sc.alpha1).sqrt()
    } else {
        0.0
    };
    let v2_stationary = draw_factor2_start(sc, &mut rng);
    let v1 = match sc.factor1_start {
        FactorStart::Stationary => v1_stationary,
        FactorStart::Zero => 0.0,
    };
    let v2 = match sc.factor2_start {
        FactorStart::Stationary => v2_stationary,
        FactorStart::Zero => 0.0,
    };

    let mut shocks = || -> [f64; 3] {
        [
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        ]
    };
    let (out, iv, iq) = euler_day(sc, v1, v2, sc.fine_steps, sc.thin(), &mut shocks);
    let thin = sc.thin();
    let steps = sc.fine_steps;
    let path = SimPath {
        log_prices: out,
        thin,
        fine_steps: steps,
    };
    Ok((
        path,
        GroundTruth {
            iv,
            iq,
            jumps: Vec::new(),
            qv: iv,
        },
    ))
}

/// Adds a jump of `size` at fine step `fine_index` (in `1..=fine_steps`).
pub fn force_jump(
    path: &mut SimPath,
    truth: &mut GroundTruth,
    fine_index: usize,
    size: f64,
) -> Result<()> {
    if fine_index == 0 || fine_index > path.fine_steps {
        return domain(format!(
            "jump index {fine_index} outside 1..={}",
            path.fine_steps
        ));
    }
    path.shift_from(fine_index, size);
    truth.push_jump(fine_index as f64 / path.fine_steps as f64, size);
    Ok(())
}

/// Compound Poisson jumps: `n_J ~ Poisson(kappa)` jumps, each
/// `N(0, p_jmp_total / n_J * iv)`, at uniform fine steps. A jump landing on a
/// multiple of `boundary_every` fine steps (a block boundary) is moved one
/// step right, or one step left at the close. `boundary_every = 0` disables
/// the adjustment.
pub fn add_jumps(
    path: &mut SimPath,
    truth: &mut GroundTruth,
    kappa: f64,
    p_jmp_total: f64,
    boundary_every: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    if kappa < 0.0 || !(0.0..1.0).contains(&p_jmp_total) {
        return domain("need kappa >= 0 and p_jmp_total in [0, 1)");
    }
    if kappa == 0.0 || p_jmp_total == 0.0 {
        return Ok(());
    }
    let count = Poisson::new(kappa).expect("positive intensity").sample(rng) as usize;
    if count == 0 {
        return Ok(());
    }
    let sd = (p_jmp_total / count as f64 * truth.iv).sqrt();
    let size_law = Normal::new(0.0, sd).expect("finite jump sd");
    for _ in 0..count {
        let mut idx = rng.random_range(1..=path.fine_steps);
        if boundary_every > 1 && idx % boundary_every == 0 {
            idx = if idx == path.fine_steps {
                idx - 1
            } else {
                idx + 1
            };
        }
        let size = size_law.sample(rng);
        force_jump(path, truth, idx, size)?;
    }
    Ok(())
}

/// Adds iid `+-omega` noise with equal probabilities to every observed price.
/// Returns `omega`.
pub fn add_noise(
    path: &mut SimPath,
    truth: &GroundTruth,
    gamma: f64,
    reading: NoiseRatioReading,
    rng: &mut impl Rng,
) -> Result<f64> {
    if !(gamma >= 0.0) {
        return domain("noise ratio must be nonnegative");
    }
    let observed = path.log_prices.len() - 1;
    let omega = noise_std(gamma, truth.iv, observed, path.fine_steps, reading);
    if omega == 0.0 {
        return Ok(0.0);
    }
    for p in &mut path.log_prices {
        *p += if rng.random::<bool>() { omega } else { -omega };
    }
    Ok(omega)
}
