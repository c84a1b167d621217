use std::collections::{BTreeSet, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use proptest::prelude::*;
use tcpsim_core::{ActionKind, CcConfig, CongestionControl, CongestionState, Mode, SegSize, Variant};

fn ctl(variant: Variant, mss: u32, initial: Option<u64>, ssthresh: u64) -> CongestionControl {
    let mut cfg = CcConfig::new(variant, SegSize::new(mss).unwrap());
    cfg.initial_cwnd = initial;
    cfg.initial_ssthresh = ssthresh;
    CongestionControl::new(cfg).unwrap()
}

/// Acks one window's worth of segments, one ACK per segment.
fn ack_round(cc: &CongestionControl, mut s: CongestionState, cum: &mut u64) -> CongestionState {
    let mss = cc.mss().bytes();
    for _ in 0..s.cwnd() / mss {
        *cum += mss;
        s = cc.on_new_ack(s, mss, *cum).0;
    }
    s
}

#[test]
fn slow_start_doubles_per_round() {
    for mss in [100u32, 536, 1000, 1460] {
        let m = u64::from(mss);
        for j in 1..=SegSize::new(mss).unwrap().initial_window_limit() / m {
            let initial = j * m;
            let ssthresh = 1 << 24;
            let cc = ctl(Variant::NewReno, mss, Some(initial), ssthresh);
            let mut s = cc.initial_state();
            let mut cum = 0;
            let mut k = 0;
            while initial << (k + 1) <= ssthresh {
                s = ack_round(&cc, s, &mut cum);
                k += 1;
                assert_eq!(s.cwnd(), initial << k, "mss {mss} j {j} round {k}");
                assert_eq!(s.mode(), Mode::SlowStart);
            }
            assert!(k >= 8);
        }
    }
}

fn rat(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

#[test]
fn avoidance_grows_one_segment_per_window() {
    for mss in [1u32, 7, 536, 1000, 1460, 9000] {
        let m = u64::from(mss);
        for start_segments in [2u64, 3, 10, 44, 100, 1000] {
            let start = start_segments * m + (start_segments * 7919) % m;
            let cc = ctl(Variant::NewReno, mss, None, 2 * m);
            // Walk up to `start` through avoidance, then measure one window.
            let mut s = cc.initial_state();
            let mut cum = 0;
            while s.cwnd() < start {
                cum += m;
                s = cc.on_new_ack(s, m, cum).0;
            }
            let c0 = s.cwnd();
            let acks = c0 / m;
            let mut exact = rat(c0);
            let mut floored = c0;
            for _ in 0..acks {
                cum += m;
                s = cc.on_new_ack(s, m, cum).0;
                assert_eq!(s.mode(), Mode::CongestionAvoidance);
                exact += rat(m * m) / rat(floored);
                floored += (m * m / floored).max(1);
                assert_eq!(s.cwnd(), floored);
            }
            let grown = rat(s.cwnd() - c0);
            let ideal = exact - rat(c0);
            let rounding = (grown - ideal).abs();
            assert!(rounding <= rat(acks), "mss {mss} start {c0}: off by {}", rounding.to_f64().unwrap());
            if m * m >= 2 * s.cwnd() {
                assert!(s.cwnd() - c0 <= m, "mss {mss} start {c0}: grew {}", s.cwnd() - c0);
            }
        }
    }
}

#[derive(Debug, Default)]
struct Transfer {
    timeouts: u32,
    next_unacked_retransmits: u32,
    /// Cumulative ACK and recovery point of the step that left recovery.
    exit: Option<(u64, u64)>,
    entered_recovery: bool,
    done: bool,
}

/// Ack-clocked transfer of `segments` segments over a FIFO path with no
/// timing: each arrival is acknowledged and the ACK processed at once. The
/// first transmissions of `lost` are dropped. An empty path with data
/// outstanding counts as a timeout.
fn transfer(variant: Variant, segments: u64, lost: &BTreeSet<u64>) -> Transfer {
    let mss = 1000;
    let cc = ctl(variant, mss as u32, None, 65_535);
    let total = segments * mss;
    let mut s = cc.initial_state();
    let mut out = Transfer::default();
    let (mut una, mut nxt) = (0u64, 0u64);
    let mut sent_once = BTreeSet::new();
    let mut received = BTreeSet::new();
    let mut path: VecDeque<u64> = VecDeque::new();
    let send = |seq: u64, path: &mut VecDeque<u64>, sent_once: &mut BTreeSet<u64>| {
        let first = sent_once.insert(seq);
        if !(first && lost.contains(&(seq / mss))) {
            path.push_back(seq);
        }
    };
    let fill = |s: &CongestionState, nxt: &mut u64, una: u64, path: &mut VecDeque<u64>, sent_once: &mut BTreeSet<u64>| {
        while *nxt < total && *nxt + mss - una <= s.usable_window() {
            send(*nxt, path, sent_once);
            *nxt += mss;
        }
    };
    fill(&s, &mut nxt, una, &mut path, &mut sent_once);
    for _ in 0..100_000 {
        if una >= total {
            out.done = true;
            return out;
        }
        let Some(seq) = path.pop_front() else {
            out.timeouts += 1;
            s = cc.on_timeout(s).0;
            nxt = una;
            send(una, &mut path, &mut sent_once);
            nxt += mss;
            continue;
        };
        received.insert(seq);
        let mut ack = una;
        while received.contains(&ack) {
            ack += mss;
        }
        let was_recovering = s.mode() == Mode::FastRecovery;
        let recover = s.recover_seq();
        let (next, action) = if ack > una {
            let r = cc.on_new_ack(s, ack - una, ack);
            una = ack;
            nxt = nxt.max(una);
            r
        } else {
            cc.on_dup_ack(s, nxt)
        };
        s = next;
        if s.mode() == Mode::FastRecovery {
            out.entered_recovery = true;
        }
        if was_recovering && s.mode() != Mode::FastRecovery && out.exit.is_none() {
            out.exit = Some((ack, recover.unwrap()));
        }
        match action.kind {
            ActionKind::RetransmitOldest => send(una, &mut path, &mut sent_once),
            ActionKind::RetransmitNextUnacked => {
                out.next_unacked_retransmits += 1;
                send(una, &mut path, &mut sent_once)
            }
            ActionKind::SendAllowed | ActionKind::None => {}
        }
        fill(&s, &mut nxt, una, &mut path, &mut sent_once);
    }
    panic!("transfer did not finish");
}

proptest! {
    #[test]
    fn two_losses_in_one_window_diverge(i in 5u64..30, gap in 1u64..4, extra in 8u64..40) {
        // Losses i and i+gap sit in the same window once cwnd has grown past a few segments.
        let lost: BTreeSet<u64> = [i, i + gap].into();
        let segments = i + gap + extra;
        let nr = transfer(Variant::NewReno, segments, &lost);
        let reno = transfer(Variant::Reno, segments, &lost);
        prop_assert!(nr.done && reno.done);
        prop_assert!(nr.entered_recovery && reno.entered_recovery);
        prop_assert_eq!(nr.timeouts, 0);
        prop_assert!(nr.next_unacked_retransmits >= 1);
        let (ack, recover) = nr.exit.unwrap();
        prop_assert!(ack >= recover);
        let (ack, recover) = reno.exit.unwrap();
        prop_assert!(ack < recover, "Reno left recovery at {} with recover {}", ack, recover);
    }

    #[test]
    fn identical_inputs_identical_states(
        variant in prop::sample::select(Variant::ALL.to_vec()),
        ops in prop::collection::vec(0u8..4, 0..200),
    ) {
        let run = || {
            let cc = ctl(variant, 1000, None, 65_535);
            let mut s = cc.initial_state();
            let (mut cum, mut high) = (0u64, 20_000u64);
            let mut states = vec![s];
            for &op in &ops {
                s = match op {
                    0 | 1 => {
                        cum += 1000;
                        high = high.max(cum);
                        cc.on_new_ack(s, 1000, cum).0
                    }
                    2 => cc.on_dup_ack(s, high).0,
                    _ => cc.on_timeout(s).0,
                };
                states.push(s);
            }
            states
        };
        prop_assert_eq!(run(), run());
    }
}
