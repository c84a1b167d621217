//! Oracles written independently of the simulator code.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};
use std::path::PathBuf;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, Signed, ToPrimitive, Zero};
use tcpsim_core::{ActionKind, CcConfig, CongestionControl, CongestionState, Mode, SegSize, Variant};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Values are held exactly as integer multiples of `2^-SCALE_BITS`. Samples
/// in `[1 ms, 2 s]` need 62 fractional bits and each update adds at most
/// three, so 400 bits cover sequences of 100 samples without rounding.
pub const SCALE_BITS: i64 = 400;

pub fn exact(x: f64) -> BigInt {
    let (mantissa, exponent, sign) = x.integer_decode();
    let shift = i64::from(exponent) + SCALE_BITS;
    assert!(shift >= 0, "{x} needs more than {SCALE_BITS} fractional bits");
    BigInt::from(sign) * (BigInt::from(mantissa) << shift as usize)
}

/// `n / 2^k`, which must be exact.
fn halve(n: BigInt, k: u32) -> BigInt {
    assert!(n.trailing_zeros().map_or(true, |z| z >= u64::from(k)), "fixed-point scale too small");
    n >> k as usize
}

/// Smoothed RTT, deviation, raw and clamped RTO after each sample, in exact
/// fixed point.
#[derive(Debug, Clone)]
pub struct EstimatorStep {
    pub srtt: BigInt,
    pub rttd: BigInt,
    pub raw_rto: BigInt,
    pub rto: BigInt,
}

pub fn rtt_oracle(samples: &[f64], floor: f64, ceiling: f64) -> Vec<EstimatorStep> {
    let (lo, hi) = (exact(floor), exact(ceiling));
    let mut out: Vec<EstimatorStep> = Vec::with_capacity(samples.len());
    for &r in samples {
        let r = exact(r);
        let (srtt, rttd) = match out.last() {
            None => (r.clone(), halve(r.clone(), 1)),
            Some(prev) => {
                let srtt = halve(&prev.srtt * 7u32 + &r, 3);
                let rttd = halve(&prev.rttd * 3u32 + (&srtt - &r).abs(), 2);
                (srtt, rttd)
            }
        };
        let raw_rto: BigInt = &srtt + &rttd * 4u32;
        let rto = raw_rto.clone().clamp(lo.clone(), hi.clone());
        out.push(EstimatorStep { srtt, rttd, raw_rto, rto });
    }
    out
}

/// `|approx − exact| / |exact|`, or the absolute error when `exact` is zero.
pub fn rel_err(approx: f64, exact_value: &BigInt) -> f64 {
    let diff = (exact(approx) - exact_value).abs();
    if exact_value.is_zero() {
        return to_f64(&diff);
    }
    // Both operands share the scale, so it cancels.
    diff.to_f64().unwrap() / exact_value.abs().to_f64().unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefMode {
    Ss,
    Ca,
    Fr,
}

/// Per-ACK reference automaton for the three variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefTcp {
    pub newreno: bool,
    pub mss: u64,
    pub cap: u64,
    pub restart: u64,
    pub cwnd: u64,
    pub ssthresh: u64,
    pub mode: RefMode,
    pub recover: Option<u64>,
    pub dups: u32,
    pub credit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefAction {
    Nothing,
    ResendOldest,
    ResendHole,
    MaySend,
}

impl RefTcp {
    /// `initial_cwnd` of `None` picks the largest allowed initial window.
    pub fn new(variant: Variant, mss: u64, initial_cwnd: Option<u64>, ssthresh: u64, restart: u64, cap: u64) -> Self {
        let largest = if 2 * mss > 4380 { 2 * mss } else if 4 * mss < 4380 { 4 * mss } else { 4380 };
        let iw = initial_cwnd.unwrap_or(if largest > cap { cap.max(mss) } else { largest });
        RefTcp {
            newreno: variant != Variant::Reno,
            mss,
            cap,
            restart: if restart < iw { restart } else { iw },
            cwnd: iw,
            ssthresh: if ssthresh < 2 * mss { 2 * mss } else { ssthresh },
            mode: RefMode::Ss,
            recover: None,
            dups: 0,
            credit: 0,
        }
    }

    fn half(&self) -> u64 {
        let h = self.cwnd / 2;
        if h < 2 * self.mss {
            2 * self.mss
        } else {
            h
        }
    }

    fn leave_recovery(&mut self) -> RefAction {
        self.cwnd = self.ssthresh;
        self.mode = RefMode::Ca;
        self.recover = None;
        self.dups = 0;
        self.credit = 0;
        RefAction::MaySend
    }

    pub fn new_ack(&mut self, newly: u64, cum: u64) -> RefAction {
        if self.mode == RefMode::Fr {
            let recover = self.recover.unwrap();
            if cum >= recover || !self.newreno {
                return self.leave_recovery();
            }
            self.dups = 0;
            self.credit = if self.credit > newly { self.credit - newly } else { 0 } + self.mss;
            return RefAction::ResendHole;
        }
        self.dups = 0;
        let limit = if self.cap > self.cwnd { self.cap } else { self.cwnd };
        if self.cwnd < self.ssthresh {
            self.mode = RefMode::Ss;
            self.cwnd += self.mss;
        } else {
            self.mode = RefMode::Ca;
            let step = self.mss * self.mss / self.cwnd;
            self.cwnd += if step == 0 { 1 } else { step };
        }
        if self.cwnd > limit {
            self.cwnd = limit;
        }
        RefAction::MaySend
    }

    pub fn dup_ack(&mut self, highest_sent: u64) -> RefAction {
        self.dups += 1;
        match self.mode {
            RefMode::Fr => {
                self.credit += self.mss;
                RefAction::MaySend
            }
            _ if self.dups >= 3 => {
                self.ssthresh = self.half();
                self.cwnd = self.ssthresh;
                self.mode = RefMode::Fr;
                self.recover = Some(highest_sent);
                self.credit = 0;
                RefAction::ResendOldest
            }
            _ => RefAction::Nothing,
        }
    }

    pub fn timeout(&mut self) -> RefAction {
        self.ssthresh = self.half();
        self.cwnd = self.restart;
        self.mode = RefMode::Ss;
        self.recover = None;
        self.dups = 0;
        self.credit = 0;
        RefAction::ResendOldest
    }
}

pub fn same_state(r: &RefTcp, s: &CongestionState) -> bool {
    let mode = match s.mode() {
        Mode::SlowStart => RefMode::Ss,
        Mode::CongestionAvoidance => RefMode::Ca,
        Mode::FastRecovery => RefMode::Fr,
    };
    r.cwnd == s.cwnd()
        && r.ssthresh == s.ssthresh()
        && r.mode == mode
        && r.recover == s.recover_seq()
        && r.dups == s.dupack_count()
        && r.credit == s.partial_ack_credit()
}

pub fn same_action(r: RefAction, k: ActionKind) -> bool {
    matches!(
        (r, k),
        (RefAction::Nothing, ActionKind::None)
            | (RefAction::ResendOldest, ActionKind::RetransmitOldest)
            | (RefAction::ResendHole, ActionKind::RetransmitNextUnacked)
            | (RefAction::MaySend, ActionKind::SendAllowed)
    )
}

/// Outcome of an ack-clocked transfer with scripted first-transmission losses.
#[derive(Debug, Default, Clone)]
pub struct Transfer {
    pub timeouts: u32,
    pub hole_retransmits: u32,
    /// `(cumulative ACK, recovery point)` when recovery was first entered.
    pub entry: Option<(u64, u64)>,
    /// `(cumulative ACK, recovery point)` of the step that first left recovery.
    pub exit: Option<(u64, u64)>,
    pub timeout_before_entry: bool,
    pub timeout_in_recovery: bool,
    pub done: bool,
}

/// Segments travel a FIFO path and every arrival is acknowledged and
/// processed at once, so there is no timing. An empty path with data
/// outstanding counts as a timeout.
pub fn transfer(variant: Variant, mss: u64, segments: u64, lost: &BTreeSet<u64>) -> Transfer {
    let cc = CongestionControl::new(CcConfig::new(variant, SegSize::new(mss as u32).unwrap())).unwrap();
    let total = segments * mss;
    let mut s = cc.initial_state();
    let mut out = Transfer::default();
    let (mut una, mut nxt) = (0u64, 0u64);
    let mut sent_once = BTreeSet::new();
    let mut received = BTreeSet::new();
    let mut path = VecDeque::new();
    let mut send = |seq: u64, path: &mut VecDeque<u64>| {
        if !(sent_once.insert(seq) && lost.contains(&(seq / mss))) {
            path.push_back(seq);
        }
    };
    let mut steps = 0;
    loop {
        while nxt < total && nxt + mss - una <= s.usable_window() {
            send(nxt, &mut path);
            nxt += mss;
        }
        if una >= total {
            out.done = true;
            return out;
        }
        steps += 1;
        assert!(steps < 1_000_000, "transfer did not finish");
        let Some(seq) = path.pop_front() else {
            out.timeouts += 1;
            if out.entry.is_none() {
                out.timeout_before_entry = true;
            }
            if s.mode() == Mode::FastRecovery && out.exit.is_none() {
                out.timeout_in_recovery = true;
            }
            s = cc.on_timeout(s).0;
            send(una, &mut path);
            nxt = una + mss;
            continue;
        };
        received.insert(seq);
        let mut ack = una;
        while received.contains(&ack) {
            ack += mss;
        }
        let before = s;
        let (next, action) = if ack > una {
            let r = cc.on_new_ack(s, ack - una, ack);
            una = ack;
            nxt = nxt.max(una);
            r
        } else {
            cc.on_dup_ack(s, nxt)
        };
        s = next;
        if before.mode() != Mode::FastRecovery && s.mode() == Mode::FastRecovery && out.entry.is_none() {
            out.entry = Some((una, s.recover_seq().unwrap()));
        }
        if before.mode() == Mode::FastRecovery && s.mode() != Mode::FastRecovery && out.exit.is_none() {
            out.exit = Some((ack, before.recover_seq().unwrap()));
        }
        match action.kind {
            ActionKind::RetransmitOldest => send(una, &mut path),
            ActionKind::RetransmitNextUnacked => {
                out.hole_retransmits += 1;
                send(una, &mut path)
            }
            ActionKind::SendAllowed | ActionKind::None => {}
        }
    }
}

pub fn to_f64(fixed: &BigInt) -> f64 {
    BigRational::new(fixed.clone(), BigInt::from(1) << SCALE_BITS as usize).to_f64().unwrap()
}
