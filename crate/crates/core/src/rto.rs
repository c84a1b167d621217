//! Retransmission timeout estimation and backoff.
//!
//! The estimator chain is RTT sample → SRTT → RTTD → RTO:
//!
//! ```text
//! first sample r:   SRTT = r                     RTTD = r / 2
//! later samples:    SRTT = 7/8·SRTT + 1/8·r      RTTD = 3/4·RTTD + 1/4·|SRTT − r|
//!                   RTO  = clamp(SRTT + 4·RTTD, floor, ceiling)
//! ```
//!
//! RTTD uses the freshly updated SRTT. On expiry the RTO is multiplied either
//! by 2 ([`BackoffPolicy::Exponential`]) or by the ABRA factor
//!
//! ```text
//! backoff = 1 + (last_srtt − min_srtt) / (max_srtt − min_srtt)   ∈ [1, 2]
//! ```
//!
//! where `min_srtt`/`max_srtt` are the extreme SRTT values seen so far,
//! seeded with 0.1 s and 0.6 s.

use core::fmt;
use core::str::FromStr;

/// SRTT gain.
pub const ALPHA: f64 = 1.0 / 8.0;
/// RTTD gain.
pub const BETA: f64 = 1.0 / 4.0;
/// Weight of RTTD in the RTO.
pub const RTTVAR_MULTIPLIER: f64 = 4.0;

pub const DEFAULT_INITIAL_RTO: f64 = 3.0;
pub const DEFAULT_RTO_FLOOR: f64 = 0.2;
pub const DEFAULT_RTO_CEILING: f64 = 60.0;
pub const INITIAL_MIN_SRTT: f64 = 0.1;
pub const INITIAL_MAX_SRTT: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RtoError {
    #[error("RTT sample must be positive and finite, got {0}")]
    InvalidSample(f64),
    #[error("invalid RTO bounds: floor {floor}, ceiling {ceiling}, initial {initial}")]
    InvalidBounds { floor: f64, ceiling: f64, initial: f64 },
    #[error("unknown backoff policy `{0}` (expected exponential or abra)")]
    UnknownPolicy(alloc::string::String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackoffPolicy {
    /// Double the RTO on every expiry.
    Exponential,
    /// Scale the RTO by the SRTT-history factor in `[1, 2]`.
    Abra,
}

impl BackoffPolicy {
    pub fn name(self) -> &'static str {
        match self {
            BackoffPolicy::Exponential => "exponential",
            BackoffPolicy::Abra => "abra",
        }
    }
}

impl fmt::Display for BackoffPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackoffPolicy {
    type Err = RtoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential" => Ok(BackoffPolicy::Exponential),
            "abra" => Ok(BackoffPolicy::Abra),
            _ => Err(RtoError::UnknownPolicy(s.into())),
        }
    }
}

/// Timer bounds, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtoConfig {
    pub initial_rto: f64,
    pub rto_floor: f64,
    pub rto_ceiling: f64,
}

impl Default for RtoConfig {
    fn default() -> Self {
        RtoConfig {
            initial_rto: DEFAULT_INITIAL_RTO,
            rto_floor: DEFAULT_RTO_FLOOR,
            rto_ceiling: DEFAULT_RTO_CEILING,
        }
    }
}

impl RtoConfig {
    pub fn validate(&self) -> Result<(), RtoError> {
        let ok = self.rto_floor > 0.0
            && self.rto_floor.is_finite()
            && self.rto_ceiling.is_finite()
            && self.rto_floor <= self.rto_ceiling
            && self.initial_rto > 0.0
            && self.initial_rto.is_finite();
        if ok {
            Ok(())
        } else {
            Err(RtoError::InvalidBounds {
                floor: self.rto_floor,
                ceiling: self.rto_ceiling,
                initial: self.initial_rto,
            })
        }
    }

    pub fn clamp(&self, rto: f64) -> f64 {
        rto.clamp(self.rto_floor, self.rto_ceiling)
    }
}

/// Congestion variables saved when the retransmission timer expires.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SavedCongestionSnapshot {
    pub cwnd: u64,
    pub ssthresh: u64,
    pub srtt: Option<f64>,
}

/// `1 + (last − min)/(max − min)` clamped to `[1, 2]`; 2 when `max == min`.
pub fn abra_backoff(last_srtt: f64, min_srtt: f64, max_srtt: f64) -> f64 {
    let spread = max_srtt - min_srtt;
    if !(spread > 0.0) {
        return 2.0;
    }
    (1.0 + (last_srtt - min_srtt) / spread).clamp(1.0, 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttEstimator {
    cfg: RtoConfig,
    srtt: Option<f64>,
    rttd: Option<f64>,
    raw_rto: Option<f64>,
    rto: f64,
    min_srtt: f64,
    max_srtt: f64,
    last_srtt: Option<f64>,
    consecutive_backoffs: u32,
}

impl RttEstimator {
    pub fn new(cfg: RtoConfig) -> Result<Self, RtoError> {
        cfg.validate()?;
        Ok(RttEstimator {
            cfg,
            srtt: None,
            rttd: None,
            raw_rto: None,
            rto: cfg.clamp(cfg.initial_rto),
            min_srtt: INITIAL_MIN_SRTT,
            max_srtt: INITIAL_MAX_SRTT,
            last_srtt: None,
            consecutive_backoffs: 0,
        })
    }

    pub fn config(&self) -> &RtoConfig {
        &self.cfg
    }

    pub fn srtt(&self) -> Option<f64> {
        self.srtt
    }

    pub fn rttd(&self) -> Option<f64> {
        self.rttd
    }

    pub fn last_srtt(&self) -> Option<f64> {
        self.last_srtt
    }

    pub fn min_srtt(&self) -> f64 {
        self.min_srtt
    }

    pub fn max_srtt(&self) -> f64 {
        self.max_srtt
    }

    pub fn consecutive_backoffs(&self) -> u32 {
        self.consecutive_backoffs
    }

    /// `SRTT + 4·RTTD` from the latest sample, before clamping.
    pub fn unclamped_rto(&self) -> Option<f64> {
        self.raw_rto
    }

    /// The timer value to arm, in seconds. The configured initial RTO until
    /// the first sample.
    pub fn current_rto(&self) -> f64 {
        self.rto
    }

    /// Feeds one RTT measurement, in seconds. Callers must not pass samples
    /// from retransmitted segments.
    pub fn record_rtt_sample(&mut self, rtt: f64) -> Result<(), RtoError> {
        if !(rtt > 0.0) || !rtt.is_finite() {
            return Err(RtoError::InvalidSample(rtt));
        }
        let (srtt, rttd) = match (self.srtt, self.rttd) {
            (Some(prev_srtt), Some(prev_rttd)) => {
                let srtt = (1.0 - ALPHA) * prev_srtt + ALPHA * rtt;
                let rttd = (1.0 - BETA) * prev_rttd + BETA * (srtt - rtt).abs();
                (srtt, rttd)
            }
            _ => (rtt, rtt / 2.0),
        };
        let raw = srtt + RTTVAR_MULTIPLIER * rttd;
        self.srtt = Some(srtt);
        self.rttd = Some(rttd);
        self.raw_rto = Some(raw);
        self.rto = self.cfg.clamp(raw);
        self.last_srtt = Some(srtt);
        self.min_srtt = self.min_srtt.min(srtt);
        self.max_srtt = self.max_srtt.max(srtt);
        self.consecutive_backoffs = 0;
        Ok(())
    }

    /// The ABRA multiplier for the current history. Without any sample there
    /// is no `last_srtt`, and the result is 2.
    pub fn compute_abra_backoff(&self) -> f64 {
        match self.last_srtt {
            Some(last) => abra_backoff(last, self.min_srtt, self.max_srtt),
            None => 2.0,
        }
    }

    pub fn backoff_multiplier(&self, policy: BackoffPolicy) -> f64 {
        match policy {
            BackoffPolicy::Exponential => 2.0,
            BackoffPolicy::Abra => self.compute_abra_backoff(),
        }
    }

    /// Backs the timer off after an expiry and returns the congestion
    /// variables to save.
    pub fn on_timer_expiry(
        &mut self,
        policy: BackoffPolicy,
        cwnd: u64,
        ssthresh: u64,
    ) -> SavedCongestionSnapshot {
        let multiplier = self.backoff_multiplier(policy);
        self.rto = self.cfg.clamp(multiplier * self.rto);
        self.consecutive_backoffs = self.consecutive_backoffs.saturating_add(1);
        SavedCongestionSnapshot { cwnd, ssthresh, srtt: self.srtt }
    }

    /// A window-advancing ACK arrived. The RTO itself stays backed off until
    /// the next valid sample.
    pub fn reset_backoff_on_ack(&mut self) {
        self.consecutive_backoffs = 0;
    }
}
