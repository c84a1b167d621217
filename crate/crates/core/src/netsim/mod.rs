//! Closed-loop simulation of one bulk TCP transfer.
//!
//! A sender driven by [`crate::cc`] and [`crate::rto`] pushes MSS-sized
//! segments through a [`Link`]; a cumulative-ACK receiver answers every data
//! segment with one ACK, which travels back over the same link.
//!
//! # Sender rules
//!
//! * New data goes out while `in_flight + mss <= min(cwnd + inflation, rwnd)`.
//!   Retransmissions are not window-gated.
//! * One retransmission timer, armed for the oldest unacknowledged segment and
//!   restarted by every window-advancing ACK.
//! * On expiry the oldest segment is resent and sending restarts from it
//!   (go-back-N); later resends count as timeout retransmissions.
//! * RTT samples come only from the oldest newly acknowledged segment, and
//!   only if it was never retransmitted.
//!
//! # Trace format
//!
//! With tracing on, every dispatched event and every transmission is written
//! as one line `time_us kind field=value ...`, fields in a fixed order:
//!
//! ```text
//! 0 app_ready bytes=8000
//! 0 tx seq=0 len=1000 cause=new cwnd=4000 ssthresh=65535 wnd=4000 flight=1000 fate=deliver@100000
//! 100000 seg_arrival seq=0 len=1000 ack=1000 fate=deliver@200000
//! 200000 ack_arrival ack=1000 class=new cwnd=5000 ssthresh=65535 mode=SS rtt_us=200000 rto_us=600000
//! 900000 rto_expiry seq=1000 backoff=2.000000 rto_us=1200000 cwnd=1000 ssthresh=2000
//! 1000000 route_down until=3000000
//! 3000000 route_up
//! 8000000 run_end sent=9 arrived=7 dropped=2 in_flight=0 delivered_bytes=8000
//! ```
//!
//! `wnd` is the usable window and `flight` the bytes outstanding once the
//! segment is sent. `cause` is one of `new`, `gobackn`, `fast`, `partial`, `timeout`; `fate` is
//! `deliver@<time_us>`, `drop:route_down` or `drop:random`; `class` is `new`,
//! `dup` or `stale`; `rtt_us` is `-` when no sample was taken.

mod link;
mod scheduler;

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

pub use link::{DropReason, Link, LinkError, LinkOutcome, RouteSchedule, STREAM_JITTER, STREAM_LOSS, STREAM_OUTAGE};
pub use scheduler::{Dispatched, Scheduler};

use crate::cc::{ActionKind, CcConfig, CcError, CongestionControl, CongestionState, SegSize, Variant, DEFAULT_INITIAL_SSTHRESH};
use crate::metrics::RunMetrics;
use crate::rto::{BackoffPolicy, RtoConfig, RtoError, RttEstimator, SavedCongestionSnapshot};
use crate::time::{secs_to_micros, SimTime};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Cc(#[from] CcError),
    #[error(transparent)]
    Rto(#[from] RtoError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("run length must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("transfer size must be positive")]
    EmptyTransfer,
    #[error("receiver window {rwnd} is smaller than one segment ({mss})")]
    ReceiverWindow { rwnd: u64, mss: u64 },
}

/// Everything needed for one deterministic run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub variant: Variant,
    /// Replaces the variant's own backoff policy when set.
    pub backoff_override: Option<BackoffPolicy>,
    pub mss: u32,
    pub transfer_bytes: u64,
    pub receiver_window: u64,
    pub initial_cwnd: Option<u64>,
    pub initial_ssthresh: u64,
    /// Window after a timeout; one segment when unset.
    pub restart_cwnd: Option<u64>,
    pub rto: RtoConfig,
    /// Restore the pre-timeout ssthresh on the first ACK after a timeout.
    pub restore_ssthresh: bool,
    pub route: RouteSchedule,
    /// Run length in seconds.
    pub t_end: f64,
    pub seed: u64,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            variant: Variant::NewReno,
            backoff_override: None,
            mss: 512,
            transfer_bytes: 1_000_000_000,
            receiver_window: 65_535,
            initial_cwnd: None,
            initial_ssthresh: DEFAULT_INITIAL_SSTHRESH,
            restart_cwnd: None,
            rto: RtoConfig::default(),
            restore_ssthresh: false,
            route: RouteSchedule::default(),
            t_end: 200.0,
            seed: 1,
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn backoff_policy(&self) -> BackoffPolicy {
        self.backoff_override.unwrap_or_else(|| self.variant.backoff_policy())
    }

    pub fn horizon(&self) -> Result<SimTime, SimError> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(SimError::Horizon(self.t_end));
        }
        Ok(SimTime::from_secs_f64(self.t_end))
    }

    pub fn congestion_control(&self) -> Result<CongestionControl, SimError> {
        let mss = SegSize::new(self.mss)?;
        let mut cfg = CcConfig::new(self.variant, mss);
        cfg.initial_cwnd = self.initial_cwnd;
        cfg.initial_ssthresh = self.initial_ssthresh;
        cfg.restart_cwnd = self.restart_cwnd.unwrap_or(mss.bytes());
        cfg.cwnd_cap = self.receiver_window;
        if self.receiver_window < mss.bytes() {
            return Err(SimError::ReceiverWindow { rwnd: self.receiver_window, mss: mss.bytes() });
        }
        Ok(CongestionControl::new(cfg)?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.horizon()?;
        if self.transfer_bytes == 0 {
            return Err(SimError::EmptyTransfer);
        }
        self.congestion_control()?;
        self.rto.validate()?;
        self.route.validate()?;
        Ok(())
    }
}

/// One retransmission-timer expiry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpiryRecord {
    pub at: SimTime,
    /// Sequence number retransmitted.
    pub seq: u64,
    /// Factor applied to the RTO.
    pub multiplier: f64,
    /// Backed-off RTO now armed, seconds.
    pub rto: f64,
    /// `rto` rounded to the clock, microseconds.
    pub rto_us: u64,
    /// Expiries since the last window-advancing ACK, this one included.
    pub consecutive: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub metrics: RunMetrics,
    pub trace: Option<String>,
    pub expiries: Vec<ExpiryRecord>,
    pub outages: Vec<(SimTime, SimTime)>,
}

/// Runs one scenario to its horizon.
pub fn run(config: &SimConfig) -> Result<RunOutcome, SimError> {
    let mut sim = Simulation::new(config)?;
    sim.run();
    Ok(sim.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    AppDataReady,
    SegmentArrival { seq: u64, len: u64 },
    AckArrival { ack: u64 },
    RtoExpiry { generation: u64 },
    RouteDown { until: SimTime },
    RouteUp,
    RunEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cause {
    New,
    GoBackN,
    Fast,
    Partial,
    Timeout,
}

impl Cause {
    fn name(self) -> &'static str {
        match self {
            Cause::New => "new",
            Cause::GoBackN => "gobackn",
            Cause::Fast => "fast",
            Cause::Partial => "partial",
            Cause::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SentSegment {
    sent_at: SimTime,
    retransmitted: bool,
}

struct Receiver {
    next_expected: u64,
    buffered: BTreeMap<u64, u64>,
}

impl Receiver {
    /// Returns the cumulative ACK and whether the segment was new data.
    fn on_segment(&mut self, seq: u64, len: u64) -> (u64, bool) {
        let fresh = if seq == self.next_expected {
            self.next_expected += len;
            while let Some(l) = self.buffered.remove(&self.next_expected) {
                self.next_expected += l;
            }
            true
        } else if seq > self.next_expected {
            self.buffered.insert(seq, len).is_none()
        } else {
            false
        };
        (self.next_expected, fresh)
    }
}

struct Simulation {
    sched: Scheduler<Event>,
    horizon: SimTime,
    link: Link,
    cc: CongestionControl,
    state: CongestionState,
    est: RttEstimator,
    policy: BackoffPolicy,
    mss: u64,
    total: u64,
    rwnd: u64,
    restore_ssthresh: bool,
    scripted_drops: Vec<u64>,

    snd_una: u64,
    send_next: u64,
    high_tx: u64,
    /// Send records for `[snd_una, high_tx)`, one per segment, front = `snd_una`.
    sent: VecDeque<SentSegment>,
    timer: Option<u64>,
    timer_generation: u64,
    snapshot: Option<SavedCongestionSnapshot>,
    recovery_saw_partial: bool,

    receiver: Receiver,
    metrics: RunMetrics,
    trace: Option<String>,
    expiries: Vec<ExpiryRecord>,
    ended: bool,
}

macro_rules! trace {
    ($sim:expr, $($arg:tt)*) => {
        if let Some(buf) = $sim.trace.as_mut() {
            let _ = write!(buf, "{} ", $sim.sched.now());
            let _ = writeln!(buf, $($arg)*);
        }
    };
}

impl Simulation {
    fn new(cfg: &SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let horizon = cfg.horizon()?;
        let cc = cfg.congestion_control()?;
        let link = Link::new(&cfg.route, cfg.seed, horizon)?;
        let mut scripted_drops = cfg.route.scripted_drops.clone();
        scripted_drops.sort_unstable();
        scripted_drops.dedup();
        let mut sim = Simulation {
            sched: Scheduler::new(),
            horizon,
            state: cc.initial_state(),
            est: RttEstimator::new(cfg.rto)?,
            policy: cfg.backoff_policy(),
            mss: cc.mss().bytes(),
            total: cfg.transfer_bytes,
            rwnd: cfg.receiver_window,
            restore_ssthresh: cfg.restore_ssthresh,
            scripted_drops,
            cc,
            snd_una: 0,
            send_next: 0,
            high_tx: 0,
            sent: VecDeque::new(),
            timer: None,
            timer_generation: 0,
            snapshot: None,
            recovery_saw_partial: false,
            receiver: Receiver { next_expected: 0, buffered: BTreeMap::new() },
            metrics: RunMetrics::default(),
            trace: cfg.trace.then(String::new),
            expiries: Vec::new(),
            ended: false,
            link,
        };
        sim.sched.schedule(SimTime::ZERO, Event::AppDataReady);
        sim.sched.schedule(horizon, Event::RunEnd);
        let outages: Vec<_> = sim.link.outages().to_vec();
        for (start, end) in outages {
            sim.sched.schedule(start, Event::RouteDown { until: end });
            if end <= horizon {
                sim.sched.schedule(end, Event::RouteUp);
            }
        }
        Ok(sim)
    }

    fn run(&mut self) {
        while !self.ended {
            match self.sched.pop_until(self.horizon) {
                Some(ev) => self.dispatch(ev.payload),
                None => break,
            }
        }
    }

    fn finish(mut self) -> RunOutcome {
        self.metrics.segments_in_flight_at_end =
            self.sched.pending().filter(|e| matches!(e, Event::SegmentArrival { .. })).count() as u64;
        self.metrics.bytes_delivered = self.receiver.next_expected;
        self.metrics.duration_us = self.horizon.as_micros();
        let m = self.metrics;
        trace!(
            self,
            "run_end sent={} arrived={} dropped={} in_flight={} delivered_bytes={}",
            m.segments_sent,
            m.segments_arrived,
            m.segments_dropped(),
            m.segments_in_flight_at_end,
            m.bytes_delivered
        );
        RunOutcome {
            metrics: self.metrics,
            trace: self.trace,
            expiries: self.expiries,
            outages: self.link.outages().to_vec(),
        }
    }

    fn dispatch(&mut self, ev: Event) {
        match ev {
            Event::AppDataReady => {
                trace!(self, "app_ready bytes={}", self.total);
                self.try_send();
            }
            Event::SegmentArrival { seq, len } => self.receiver_on_segment(seq, len),
            Event::AckArrival { ack } => self.sender_on_ack(ack),
            Event::RtoExpiry { generation } => {
                if self.timer == Some(generation) {
                    self.timer = None;
                    self.sender_on_rto();
                }
            }
            Event::RouteDown { until } => trace!(self, "route_down until={}", until),
            Event::RouteUp => trace!(self, "route_up"),
            Event::RunEnd => self.ended = true,
        }
    }

    fn segment_len(&self, seq: u64) -> u64 {
        self.mss.min(self.total - seq)
    }

    fn effective_window(&self) -> u64 {
        self.state.usable_window().min(self.rwnd)
    }

    fn fate(buf: &mut String, outcome: LinkOutcome) {
        match outcome {
            LinkOutcome::Deliver(at) => {
                let _ = write!(buf, "deliver@{at}");
            }
            LinkOutcome::Drop(reason) => {
                let _ = write!(buf, "drop:{reason}");
            }
        }
    }

    /// Puts segment `seq` on the wire.
    fn transmit(&mut self, seq: u64, cause: Cause) {
        let now = self.sched.now();
        let len = self.segment_len(seq);
        let idx = ((seq - self.snd_una) / self.mss) as usize;
        let first_time = seq >= self.high_tx;
        if first_time {
            debug_assert_eq!(idx, self.sent.len());
            self.sent.push_back(SentSegment { sent_at: now, retransmitted: false });
            self.high_tx = seq + len;
            self.metrics.first_transmissions += 1;
        } else {
            self.sent[idx] = SentSegment { sent_at: now, retransmitted: true };
            self.metrics.segments_retransmitted += 1;
            match cause {
                Cause::Fast | Cause::Partial => self.metrics.recovery_retransmits += 1,
                _ => self.metrics.timeout_retransmits += 1,
            }
        }
        self.metrics.segments_sent += 1;

        let forced = first_time && self.scripted_drops.binary_search(&seq).is_ok();
        let outcome = self.link.transmit(now, forced);
        match outcome {
            LinkOutcome::Deliver(at) => {
                self.sched.schedule(at, Event::SegmentArrival { seq, len });
            }
            LinkOutcome::Drop(DropReason::RouteDown) => self.metrics.dropped_route_down += 1,
            LinkOutcome::Drop(DropReason::Random) => self.metrics.dropped_random += 1,
        }
        let wnd = self.effective_window();
        if let Some(buf) = self.trace.as_mut() {
            let _ = write!(
                buf,
                "{now} tx seq={seq} len={len} cause={} cwnd={} ssthresh={} wnd={} flight={} fate=",
                cause.name(),
                self.state.cwnd(),
                self.state.ssthresh(),
                wnd,
                self.send_next.max(seq + len) - self.snd_una
            );
            Self::fate(buf, outcome);
            buf.push('\n');
        }
    }

    fn arm_timer(&mut self) {
        self.timer_generation += 1;
        let generation = self.timer_generation;
        self.timer = Some(generation);
        let delay = secs_to_micros(self.est.current_rto());
        self.sched.schedule_in(delay, Event::RtoExpiry { generation });
    }

    /// Sends new (or go-back-N) data while the window allows.
    fn try_send(&mut self) {
        while self.send_next < self.total {
            let in_flight = self.send_next - self.snd_una;
            if in_flight + self.mss > self.effective_window() {
                break;
            }
            let seq = self.send_next;
            let cause = if seq < self.high_tx { Cause::GoBackN } else { Cause::New };
            self.transmit(seq, cause);
            self.send_next += self.segment_len(seq);
            if self.timer.is_none() {
                self.arm_timer();
            }
        }
    }

    fn receiver_on_segment(&mut self, seq: u64, len: u64) {
        self.metrics.segments_arrived += 1;
        let (ack, fresh) = self.receiver.on_segment(seq, len);
        if fresh {
            self.metrics.segments_received += 1;
        }
        self.metrics.acks_sent += 1;
        let now = self.sched.now();
        let outcome = self.link.transmit(now, false);
        match outcome {
            LinkOutcome::Deliver(at) => {
                self.sched.schedule(at, Event::AckArrival { ack });
            }
            LinkOutcome::Drop(_) => self.metrics.acks_lost += 1,
        }
        if let Some(buf) = self.trace.as_mut() {
            let _ = write!(buf, "{now} seg_arrival seq={seq} len={len} ack={ack} fate=");
            Self::fate(buf, outcome);
            buf.push('\n');
        }
    }

    fn sender_on_ack(&mut self, ack: u64) {
        let now = self.sched.now();
        if ack > self.snd_una {
            let newly = ack - self.snd_una;
            let front = self.sent.front().copied().expect("ACK for unsent data");
            let sample = (!front.retransmitted).then(|| now - front.sent_at);
            let covered = newly.div_ceil(self.mss) as usize;
            self.sent.drain(..covered.min(self.sent.len()));
            self.snd_una = ack;
            self.send_next = self.send_next.max(ack);

            self.est.reset_backoff_on_ack();
            if let Some(snap) = self.snapshot.take() {
                if self.restore_ssthresh {
                    self.state = self.state.with_ssthresh(self.cc.mss(), snap.ssthresh);
                }
            }
            let partial = self.state.recover_seq().is_some_and(|recover| ack < recover);
            if partial && !self.recovery_saw_partial {
                self.recovery_saw_partial = true;
                self.metrics.partial_ack_recoveries += 1;
            }
            let (state, action) = self.cc.on_new_ack(self.state, newly, ack);
            self.state = state;
            if let Some(rtt) = sample {
                // Samples are whole microseconds > 0 since delivery takes time.
                let _ = self.est.record_rtt_sample(rtt as f64 / 1e6);
            }
            self.trace_ack(ack, "new", sample);
            if action.kind == ActionKind::RetransmitNextUnacked && self.snd_una < self.send_next {
                self.transmit(self.snd_una, Cause::Partial);
            }
            if self.snd_una >= self.send_next {
                self.timer = None;
            } else {
                self.arm_timer();
            }
            self.try_send();
        } else if ack == self.snd_una && self.snd_una < self.send_next {
            let (state, action) = self.cc.on_dup_ack(self.state, self.send_next);
            self.state = state;
            self.trace_ack(ack, "dup", None);
            if action.kind == ActionKind::RetransmitOldest {
                self.recovery_saw_partial = false;
                self.metrics.fast_retransmits += 1;
                self.transmit(self.snd_una, Cause::Fast);
            }
            self.try_send();
        } else {
            self.trace_ack(ack, "stale", None);
        }
    }

    fn trace_ack(&mut self, ack: u64, class: &str, sample: Option<u64>) {
        if let Some(buf) = self.trace.as_mut() {
            let now = self.sched.now();
            let _ = write!(
                buf,
                "{now} ack_arrival ack={ack} class={class} cwnd={} ssthresh={} mode={} rtt_us=",
                self.state.cwnd(),
                self.state.ssthresh(),
                self.state.mode().short_name()
            );
            match sample {
                Some(us) => {
                    let _ = write!(buf, "{us}");
                }
                None => buf.push('-'),
            }
            let _ = writeln!(buf, " rto_us={}", secs_to_micros(self.est.current_rto()));
        }
    }

    fn sender_on_rto(&mut self) {
        if self.snd_una >= self.send_next {
            return;
        }
        self.metrics.timeouts += 1;
        let (cwnd, ssthresh) = (self.state.cwnd(), self.state.ssthresh());
        self.state = self.cc.on_timeout(self.state).0;
        let multiplier = self.est.backoff_multiplier(self.policy);
        let snap = self.est.on_timer_expiry(self.policy, cwnd, ssthresh);
        self.snapshot.get_or_insert(snap);
        let rto = self.est.current_rto();
        let rto_us = secs_to_micros(rto);
        let seq = self.snd_una;
        self.expiries.push(ExpiryRecord {
            at: self.sched.now(),
            seq,
            multiplier,
            rto,
            rto_us,
            consecutive: self.est.consecutive_backoffs(),
        });
        trace!(
            self,
            "rto_expiry seq={seq} backoff={multiplier:.6} rto_us={rto_us} cwnd={} ssthresh={}",
            self.state.cwnd(),
            self.state.ssthresh()
        );
        self.send_next = seq;
        self.transmit(seq, Cause::Timeout);
        self.send_next = seq + self.segment_len(seq);
        self.arm_timer();
        self.try_send();
    }
}
