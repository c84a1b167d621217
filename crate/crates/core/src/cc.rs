//! Event-fed congestion-control state machines for Reno, New Reno and ABRA New
//! Reno.
//!
//! All window variables are bytes. A controller ([`CongestionControl`]) carries
//! the immutable per-connection configuration; the mutable part
//! ([`CongestionState`]) is a small `Copy` value passed in and returned by
//! every transition, so the machines know nothing about clocks or queues.
//!
//! ABRA New Reno shares New Reno's window logic exactly. It differs only in
//! the retransmission-timer backoff policy, see [`Variant::backoff_policy`].

use core::fmt;
use core::str::FromStr;

use crate::rto::BackoffPolicy;

/// Duplicate ACKs needed to trigger fast retransmit.
pub const DUPACK_THRESHOLD: u32 = 3;

/// Initial slow-start threshold, effectively the receiver window.
pub const DEFAULT_INITIAL_SSTHRESH: u64 = 65_535;

/// Lower bound on the initial-window upper limit, in bytes.
const INITIAL_WINDOW_BYTES: u64 = 4380;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CcError {
    #[error("segment size must be at least one byte")]
    ZeroSegmentSize,
    #[error("initial cwnd {cwnd} outside [{min}, {max}] bytes")]
    InitialWindowOutOfRange { cwnd: u64, min: u64, max: u64 },
    #[error("restart cwnd {0} is below one segment")]
    RestartWindowTooSmall(u64),
    #[error("window cap {cap} is below the initial window {initial}")]
    WindowCapTooSmall { cap: u64, initial: u64 },
    #[error("unknown TCP variant `{0}` (expected reno, newreno or abra-newreno)")]
    UnknownVariant(alloc::string::String),
}

/// Maximum segment size in bytes. Always at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegSize(u32);

impl SegSize {
    pub fn new(bytes: u32) -> Result<Self, CcError> {
        if bytes == 0 {
            return Err(CcError::ZeroSegmentSize);
        }
        Ok(SegSize(bytes))
    }

    pub fn bytes(self) -> u64 {
        u64::from(self.0)
    }

    /// `min(4·mss, max(2·mss, 4380))`, the largest permitted initial window.
    pub fn initial_window_limit(self) -> u64 {
        let mss = self.bytes();
        (4 * mss).min((2 * mss).max(INITIAL_WINDOW_BYTES))
    }

    /// `max(cwnd/2, 2·mss)`, the threshold after a congestion event.
    pub fn halved_threshold(self, cwnd: u64) -> u64 {
        (cwnd / 2).max(2 * self.bytes())
    }
}

/// TCP flavour under simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Reno,
    NewReno,
    AbraNewReno,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Reno, Variant::NewReno, Variant::AbraNewReno];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Reno => "reno",
            Variant::NewReno => "newreno",
            Variant::AbraNewReno => "abra-newreno",
        }
    }

    pub fn backoff_policy(self) -> BackoffPolicy {
        match self {
            Variant::Reno | Variant::NewReno => BackoffPolicy::Exponential,
            Variant::AbraNewReno => BackoffPolicy::Abra,
        }
    }

    /// Whether a partial ACK keeps the sender in fast recovery.
    pub fn stays_in_recovery_on_partial_ack(self) -> bool {
        !matches!(self, Variant::Reno)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = CcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reno" => Ok(Variant::Reno),
            "newreno" | "new-reno" => Ok(Variant::NewReno),
            "abra-newreno" | "abra" | "abranewreno" => Ok(Variant::AbraNewReno),
            _ => Err(CcError::UnknownVariant(s.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    SlowStart,
    CongestionAvoidance,
    FastRecovery,
}

impl Mode {
    pub fn short_name(self) -> &'static str {
        match self {
            Mode::SlowStart => "SS",
            Mode::CongestionAvoidance => "CA",
            Mode::FastRecovery => "FR",
        }
    }
}

/// The mutable congestion-control variables of one connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CongestionState {
    cwnd: u64,
    ssthresh: u64,
    mode: Mode,
    recover_seq: Option<u64>,
    dupack_count: u32,
    partial_ack_credit: u64,
}

impl CongestionState {
    pub fn cwnd(&self) -> u64 {
        self.cwnd
    }

    pub fn ssthresh(&self) -> u64 {
        self.ssthresh
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Highest sequence sent when fast recovery was entered.
    pub fn recover_seq(&self) -> Option<u64> {
        self.recover_seq
    }

    pub fn dupack_count(&self) -> u32 {
        self.dupack_count
    }

    /// Window inflation accumulated during fast recovery.
    pub fn partial_ack_credit(&self) -> u64 {
        self.partial_ack_credit
    }

    /// `cwnd` plus recovery inflation: the bytes the window currently allows in flight.
    pub fn usable_window(&self) -> u64 {
        self.cwnd.saturating_add(self.partial_ack_credit)
    }

    /// Replaces the slow-start threshold, keeping the `2·mss` floor.
    pub fn with_ssthresh(mut self, mss: SegSize, ssthresh: u64) -> Self {
        self.ssthresh = ssthresh.max(2 * mss.bytes());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionKind {
    None,
    /// Retransmit the oldest unacknowledged segment (fast retransmit or timeout).
    RetransmitOldest,
    /// Retransmit the first unacknowledged segment above a partial ACK.
    RetransmitNextUnacked,
    /// The window may have opened; try to send new data.
    SendAllowed,
}

/// Side effect requested by a transition, with the window after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CcAction {
    pub kind: ActionKind,
    pub cwnd: u64,
    pub ssthresh: u64,
    pub usable_window: u64,
}

impl CcAction {
    fn new(kind: ActionKind, state: &CongestionState) -> Self {
        CcAction {
            kind,
            cwnd: state.cwnd,
            ssthresh: state.ssthresh,
            usable_window: state.usable_window(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CcConfig {
    pub variant: Variant,
    pub mss: SegSize,
    /// Defaults to [`SegSize::initial_window_limit`], or `cwnd_cap` when
    /// that is smaller.
    pub initial_cwnd: Option<u64>,
    pub initial_ssthresh: u64,
    /// Upper bound on cwnd after a timeout; the effective restart window is
    /// `min(initial cwnd, restart_cwnd)`.
    pub restart_cwnd: u64,
    /// cwnd never grows past this (the receiver window).
    pub cwnd_cap: u64,
}

impl CcConfig {
    pub fn new(variant: Variant, mss: SegSize) -> Self {
        CcConfig {
            variant,
            mss,
            initial_cwnd: None,
            initial_ssthresh: DEFAULT_INITIAL_SSTHRESH,
            restart_cwnd: mss.bytes(),
            cwnd_cap: u64::MAX,
        }
    }
}

/// A validated controller for one connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CongestionControl {
    cfg: CcConfig,
    initial_cwnd: u64,
    restart_cwnd: u64,
}

impl CongestionControl {
    pub fn new(cfg: CcConfig) -> Result<Self, CcError> {
        let mss = cfg.mss.bytes();
        let limit = cfg.mss.initial_window_limit();
        let initial_cwnd = match cfg.initial_cwnd {
            Some(c) if c < mss || c > limit => {
                return Err(CcError::InitialWindowOutOfRange { cwnd: c, min: mss, max: limit })
            }
            Some(c) => c,
            None => limit.min(cfg.cwnd_cap.max(mss)),
        };
        if cfg.restart_cwnd < mss {
            return Err(CcError::RestartWindowTooSmall(cfg.restart_cwnd));
        }
        if cfg.cwnd_cap < initial_cwnd {
            return Err(CcError::WindowCapTooSmall { cap: cfg.cwnd_cap, initial: initial_cwnd });
        }
        Ok(CongestionControl {
            cfg,
            initial_cwnd,
            restart_cwnd: cfg.restart_cwnd.min(initial_cwnd),
        })
    }

    pub fn config(&self) -> &CcConfig {
        &self.cfg
    }

    pub fn variant(&self) -> Variant {
        self.cfg.variant
    }

    pub fn mss(&self) -> SegSize {
        self.cfg.mss
    }

    pub fn initial_state(&self) -> CongestionState {
        CongestionState {
            cwnd: self.initial_cwnd,
            ssthresh: self.cfg.initial_ssthresh.max(2 * self.cfg.mss.bytes()),
            mode: Mode::SlowStart,
            recover_seq: None,
            dupack_count: 0,
            partial_ack_credit: 0,
        }
    }

    fn grow(&self, cwnd: u64, inc: u64) -> u64 {
        cwnd.saturating_add(inc).min(self.cfg.cwnd_cap.max(cwnd))
    }

    /// A cumulative ACK that advances the window by `newly_acked` bytes to
    /// `cum_ack`. In fast recovery this dispatches to
    /// [`on_partial_ack`](Self::on_partial_ack) or [`on_full_ack`](Self::on_full_ack).
    ///
    /// Panics if `newly_acked` is zero; such ACKs are duplicates.
    pub fn on_new_ack(
        &self,
        mut state: CongestionState,
        newly_acked: u64,
        cum_ack: u64,
    ) -> (CongestionState, CcAction) {
        assert!(newly_acked > 0, "an ACK advancing zero bytes is a duplicate");
        if state.mode == Mode::FastRecovery {
            let recover = state.recover_seq.expect("fast recovery without a recovery point");
            return if cum_ack >= recover {
                self.on_full_ack(state)
            } else {
                self.on_partial_ack(state, newly_acked, cum_ack)
            };
        }
        let mss = self.cfg.mss.bytes();
        state.dupack_count = 0;
        if state.cwnd < state.ssthresh {
            state.cwnd = self.grow(state.cwnd, mss);
            state.mode = Mode::SlowStart;
        } else {
            let inc = (mss * mss / state.cwnd).max(1);
            state.cwnd = self.grow(state.cwnd, inc);
            state.mode = Mode::CongestionAvoidance;
        }
        (state, CcAction::new(ActionKind::SendAllowed, &state))
    }

    /// A duplicate cumulative ACK. `highest_sent_seq` becomes the recovery
    /// point if this is the third duplicate.
    pub fn on_dup_ack(
        &self,
        mut state: CongestionState,
        highest_sent_seq: u64,
    ) -> (CongestionState, CcAction) {
        state.dupack_count = state.dupack_count.saturating_add(1);
        if state.mode == Mode::FastRecovery {
            state.partial_ack_credit = state.partial_ack_credit.saturating_add(self.cfg.mss.bytes());
            return (state, CcAction::new(ActionKind::SendAllowed, &state));
        }
        if state.dupack_count < DUPACK_THRESHOLD {
            return (state, CcAction::new(ActionKind::None, &state));
        }
        state.ssthresh = self.cfg.mss.halved_threshold(state.cwnd);
        state.cwnd = state.ssthresh;
        state.mode = Mode::FastRecovery;
        state.recover_seq = Some(highest_sent_seq);
        state.partial_ack_credit = 0;
        (state, CcAction::new(ActionKind::RetransmitOldest, &state))
    }

    /// An ACK in fast recovery that advances to `cum_ack` but not past the
    /// recovery point. New Reno stays in recovery and retransmits the next
    /// hole; Reno leaves recovery as on a full ACK.
    ///
    /// Panics outside fast recovery, on a zero advance, or when `cum_ack`
    /// covers the recovery point.
    pub fn on_partial_ack(
        &self,
        mut state: CongestionState,
        newly_acked: u64,
        cum_ack: u64,
    ) -> (CongestionState, CcAction) {
        assert_eq!(state.mode, Mode::FastRecovery, "partial ACK outside fast recovery");
        assert!(newly_acked > 0, "an ACK advancing zero bytes is a duplicate");
        let recover = state.recover_seq.expect("fast recovery without a recovery point");
        assert!(cum_ack < recover, "ACK {cum_ack} covers recovery point {recover}");
        if !self.cfg.variant.stays_in_recovery_on_partial_ack() {
            return self.on_full_ack(state);
        }
        state.dupack_count = 0;
        state.partial_ack_credit = state
            .partial_ack_credit
            .saturating_sub(newly_acked)
            .saturating_add(self.cfg.mss.bytes());
        (state, CcAction::new(ActionKind::RetransmitNextUnacked, &state))
    }

    /// An ACK in fast recovery covering the recovery point.
    ///
    /// Panics outside fast recovery.
    pub fn on_full_ack(&self, mut state: CongestionState) -> (CongestionState, CcAction) {
        assert_eq!(state.mode, Mode::FastRecovery, "full ACK outside fast recovery");
        state.cwnd = state.ssthresh;
        state.mode = Mode::CongestionAvoidance;
        state.recover_seq = None;
        state.dupack_count = 0;
        state.partial_ack_credit = 0;
        (state, CcAction::new(ActionKind::SendAllowed, &state))
    }

    /// Retransmission timer expiry. Abandons any fast recovery in progress.
    pub fn on_timeout(&self, mut state: CongestionState) -> (CongestionState, CcAction) {
        state.ssthresh = self.cfg.mss.halved_threshold(state.cwnd);
        state.cwnd = self.restart_cwnd;
        state.mode = Mode::SlowStart;
        state.recover_seq = None;
        state.dupack_count = 0;
        state.partial_ack_credit = 0;
        (state, CcAction::new(ActionKind::RetransmitOldest, &state))
    }
}
