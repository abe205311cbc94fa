//! Detector thresholds. Every value here is operator-tuned; the defaults
//! suit the generated corpus (100 frames/s streams, two member paths).

use core::fmt;

pub use crate::recovery::RecoveryVariant;
use crate::recovery::{RecoveryParamError, RecoveryState, MAX_HISTORY};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateLimit {
    pub count: u32,
    pub window_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DetectorConfig {
    pub max_bandwidth_bps: u64,
    pub max_frame_rate: f64,
    pub deviation_factor_k: f64,
    pub request_rate_limit: RateLimit,
    pub dangling_timeout_s: f64,
    pub recovery_timeout_s: f64,
    pub recovery_variant: RecoveryVariant,
    #[cfg_attr(feature = "serde", serde(alias = "vector_history_H"))]
    pub vector_history: u16,
    pub vector_future_max: u16,
    pub sweep_period_s: f64,
    pub min_samples: u32,
    pub rolling_window: u32,
    /// Identical (code, stream) notices closer than this are folded.
    pub dedup_window_s: f64,
    /// Degree of redundancy assumed for FRER streams without a reservation.
    pub default_redundancy: u8,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            max_bandwidth_bps: 100_000_000,
            max_frame_rate: 10_000.0,
            deviation_factor_k: 2.0,
            request_rate_limit: RateLimit {
                count: 10,
                window_s: 1.0,
            },
            dangling_timeout_s: 30.0,
            recovery_timeout_s: 2.0,
            recovery_variant: RecoveryVariant::Vector,
            vector_history: 64,
            vector_future_max: 2048,
            sweep_period_s: 1.0,
            min_samples: 5,
            rolling_window: 32,
            dedup_window_s: 1.0,
            default_redundancy: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    NotPositive(&'static str),
    FactorTooSmall(f64),
    Recovery(RecoveryParamError),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::NotPositive(field) => write!(f, "{field} must be positive"),
            ConfigError::FactorTooSmall(k) => {
                write!(f, "deviation_factor_k must exceed 1 (got {k})")
            }
            ConfigError::Recovery(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ConfigError {}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |v: f64, name| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::NotPositive(name))
            }
        };
        if self.max_bandwidth_bps == 0 {
            return Err(ConfigError::NotPositive("max_bandwidth_bps"));
        }
        positive(self.max_frame_rate, "max_frame_rate")?;
        positive(
            self.request_rate_limit.window_s,
            "request_rate_limit.window_s",
        )?;
        positive(self.dangling_timeout_s, "dangling_timeout_s")?;
        positive(self.recovery_timeout_s, "recovery_timeout_s")?;
        positive(self.sweep_period_s, "sweep_period_s")?;
        positive(self.dedup_window_s, "dedup_window_s")?;
        if self.request_rate_limit.count == 0 {
            return Err(ConfigError::NotPositive("request_rate_limit.count"));
        }
        if self.min_samples == 0 {
            return Err(ConfigError::NotPositive("min_samples"));
        }
        if self.rolling_window == 0 {
            return Err(ConfigError::NotPositive("rolling_window"));
        }
        if self.default_redundancy == 0 {
            return Err(ConfigError::NotPositive("default_redundancy"));
        }
        if !(self.deviation_factor_k > 1.0 && self.deviation_factor_k.is_finite()) {
            return Err(ConfigError::FactorTooSmall(self.deviation_factor_k));
        }
        self.new_recovery_state().map(|_| ())
    }

    pub fn new_recovery_state(&self) -> Result<RecoveryState, ConfigError> {
        RecoveryState::new(
            self.recovery_variant,
            self.vector_history.min(MAX_HISTORY + 1),
            self.vector_future_max,
        )
        .map_err(ConfigError::Recovery)
    }
}
