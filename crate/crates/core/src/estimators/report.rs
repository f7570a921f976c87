use serde::Serialize;

use crate::fmt::fmt_sig17;

/// Trading days used to annualize a daily variance.
pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EstimatorId {
    #[serde(rename = "SRV")]
    Srv,
    #[serde(rename = "SBV")]
    Sbv,
    #[serde(rename = "STV")]
    Stv,
    #[serde(rename = "STQ")]
    Stq,
    #[serde(rename = "RRVb")]
    RrvB,
    #[serde(rename = "RBV")]
    Rbv,
    #[serde(rename = "RTV")]
    Rtv,
    #[serde(rename = "RRV")]
    Rrv,
    #[serde(rename = "JV")]
    Jv,
    #[serde(rename = "RTQ")]
    Rtq,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 10] = [
        Self::Srv,
        Self::Sbv,
        Self::Stv,
        Self::Stq,
        Self::RrvB,
        Self::Rbv,
        Self::Rtv,
        Self::Rrv,
        Self::Jv,
        Self::Rtq,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Srv => "SRV",
            Self::Sbv => "SBV",
            Self::Stv => "STV",
            Self::Stq => "STQ",
            Self::RrvB => "RRVb",
            Self::Rbv => "RBV",
            Self::Rtv => "RTV",
            Self::Rrv => "RRV",
            Self::Jv => "JV",
            Self::Rtq => "RTQ",
        }
    }

    pub fn is_range_based(self) -> bool {
        matches!(
            self,
            Self::RrvB | Self::Rbv | Self::Rtv | Self::Rrv | Self::Jv | Self::Rtq
        )
    }
}

impl std::fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Diagnostics attached to an estimate.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReportNotes {
    pub consistency_robust: Option<bool>,
    pub clt_robust: Option<bool>,
    /// Log-scale confidence interval `(level, lower, upper)`, when one was built.
    pub ci: Option<(f64, f64, f64)>,
    pub message: Option<String>,
}

/// One estimate for one day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub date: String,
    pub estimator: EstimatorId,
    pub n: usize,
    pub m: usize,
    pub value: f64,
    pub lambda_version: String,
    pub notes: ReportNotes,
}

impl EstimateReport {
    pub const CSV_HEADER: &'static str = "date,estimator,n,m,value,lambda_version";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.date,
            self.estimator,
            self.n,
            self.m,
            fmt_sig17(self.value),
            self.lambda_version
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Daily variance expressed as an annualized standard deviation in percent.
pub fn annualized_vol_percent(daily_variance: f64) -> f64 {
    100.0 * (TRADING_DAYS * daily_variance.max(0.0)).sqrt()
}
