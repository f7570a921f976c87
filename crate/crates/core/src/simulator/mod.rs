//! Two-factor stochastic volatility paths with compound Poisson jumps and
//! two-point microstructure noise, plus the Monte Carlo studies built on them.
//!
//! The efficient log-price follows
//!
//! ```text
//! dp  = mu dt + sexp(b0 + b1 v1 + b2 v2) dW
//! dv1 = a1 v1 dt + dB1
//! dv2 = a2 v2 dt + (1 + a3 v2) dB2
//! ```
//!
//! with `corr(dW, dB1) = corr(dW, dB2) = rho` and `B1`, `B2` independent.

mod irregular;
mod path;
mod scenario;
mod study;

pub use irregular::{
    simulate_irregular_grid_study, IrregularReport, IrregularRow, IrregularScheme,
    IrregularStudyConfig,
};
pub use path::{
    add_jumps, add_noise, force_jump, noise_std, s_exp, simulate_path, FactorStart, GroundTruth,
    NoiseRatioReading, SimPath, S_EXP_KNOT,
};
pub use scenario::SimScenario;
pub use study::{
    rtv_rmse_by_n, run_study, single_jump_study, Design, JumpLawSummary, JumpShareRow, StudyConfig,
    StudyReport, StudyRow,
};
