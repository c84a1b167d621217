//! Route-outage link model.
//!
//! The path alternates between up and down. Outages arrive as a renewal
//! process: the gap before each outage is exponential with rate
//! `outage_rate` (measured from the end of the previous one) and its length
//! is uniform on `outage_duration`. Traffic sent while the route is down is
//! lost; traffic sent while it is up is lost independently with probability
//! `random_loss_prob`, otherwise delivered after `base_delay` plus a uniform
//! `[0, delay_jitter]` draw. Both directions share the same route and loss
//! process.
//!
//! Randomness comes from three ChaCha8 streams keyed by the run seed:
//! stream 0 drives losses, stream 1 jitter and stream 2 the outage sample
//! path. The outage path is drawn up front, so it depends only on the seed
//! and the horizon, never on the traffic.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::time::{secs_to_micros, SimTime};

pub const STREAM_LOSS: u64 = 0;
pub const STREAM_JITTER: u64 = 1;
pub const STREAM_OUTAGE: u64 = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinkError {
    #[error("{name} must be a probability in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("{name} must be finite and nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("outage duration range ({0}, {1}) must satisfy 0 < min <= max")]
    DurationRange(f64, f64),
    #[error("scripted outage ({0}, {1}) must satisfy 0 <= start < end")]
    ScriptedOutage(f64, f64),
}

/// Parameters of the simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSchedule {
    /// One-way delay in seconds.
    pub base_delay: f64,
    /// Upper bound of the uniform extra one-way delay, seconds.
    pub delay_jitter: f64,
    pub random_loss_prob: f64,
    /// Mean outages per second of up time. Zero disables random outages.
    pub outage_rate: f64,
    /// Outage length range in seconds, sampled uniformly.
    pub outage_duration: (f64, f64),
    /// Extra outages `(start, end)` in seconds, in addition to random ones.
    pub scripted_outages: Vec<(f64, f64)>,
    /// Data sequence numbers whose first transmission is lost (counted as a
    /// random loss).
    pub scripted_drops: Vec<u64>,
}

impl Default for RouteSchedule {
    fn default() -> Self {
        RouteSchedule {
            base_delay: 0.05,
            delay_jitter: 0.0,
            random_loss_prob: 0.005,
            outage_rate: 0.04,
            outage_duration: (1.0, 4.0),
            scripted_outages: Vec::new(),
            scripted_drops: Vec::new(),
        }
    }
}

impl RouteSchedule {
    pub fn validate(&self) -> Result<(), LinkError> {
        let nonneg = |name, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(LinkError::Negative { name, value })
            }
        };
        nonneg("base_delay", self.base_delay)?;
        nonneg("delay_jitter", self.delay_jitter)?;
        nonneg("outage_rate", self.outage_rate)?;
        let p = self.random_loss_prob;
        if !(0.0..=1.0).contains(&p) {
            return Err(LinkError::Probability { name: "random_loss_prob", value: p });
        }
        let (lo, hi) = self.outage_duration;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(LinkError::DurationRange(lo, hi));
        }
        for &(s, e) in &self.scripted_outages {
            if !(s >= 0.0 && e > s && e.is_finite()) {
                return Err(LinkError::ScriptedOutage(s, e));
            }
        }
        Ok(())
    }

    /// Draws the outage intervals (microseconds, half-open, sorted, merged)
    /// that start before `horizon`.
    pub fn outage_path(&self, seed: u64, horizon: SimTime) -> Vec<(SimTime, SimTime)> {
        let mut out = Vec::new();
        if self.outage_rate > 0.0 {
            let mut rng = stream(seed, STREAM_OUTAGE);
            let (lo, hi) = self.outage_duration;
            let mut t = 0.0f64;
            loop {
                let u: f64 = rng.gen();
                let gap = -libm::log(1.0 - u) / self.outage_rate;
                let start = t + gap;
                let dur = lo + (hi - lo) * rng.gen::<f64>();
                let (s, e) = (SimTime::from_secs_f64(start), SimTime::from_secs_f64(start + dur));
                if s >= horizon {
                    break;
                }
                if e > s {
                    out.push((s, e));
                }
                t = start + dur;
            }
        }
        for &(s, e) in &self.scripted_outages {
            let (s, e) = (SimTime::from_secs_f64(s), SimTime::from_secs_f64(e));
            if s < horizon && e > s {
                out.push((s, e));
            }
        }
        out.sort_unstable();
        let mut merged: Vec<(SimTime, SimTime)> = Vec::with_capacity(out.len());
        for (s, e) in out {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        merged
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    RouteDown,
    Random,
}

impl DropReason {
    pub fn name(self) -> &'static str {
        match self {
            DropReason::RouteDown => "route_down",
            DropReason::Random => "random",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkOutcome {
    Deliver(SimTime),
    Drop(DropReason),
}

/// Runtime state of a [`RouteSchedule`] for one run.
pub struct Link {
    base_delay: f64,
    jitter: f64,
    loss_prob: f64,
    outages: Vec<(SimTime, SimTime)>,
    loss_rng: ChaCha8Rng,
    jitter_rng: ChaCha8Rng,
}

impl Link {
    pub fn new(route: &RouteSchedule, seed: u64, horizon: SimTime) -> Result<Self, LinkError> {
        route.validate()?;
        Ok(Link {
            base_delay: route.base_delay,
            jitter: route.delay_jitter,
            loss_prob: route.random_loss_prob,
            outages: route.outage_path(seed, horizon),
            loss_rng: stream(seed, STREAM_LOSS),
            jitter_rng: stream(seed, STREAM_JITTER),
        })
    }

    pub fn outages(&self) -> &[(SimTime, SimTime)] {
        &self.outages
    }

    pub fn is_down(&self, t: SimTime) -> bool {
        let idx = self.outages.partition_point(|&(s, _)| s <= t);
        idx > 0 && t < self.outages[idx - 1].1
    }

    /// Sends one packet at `now`. `forced_loss` drops it as a random loss
    /// without consuming the loss stream.
    pub fn transmit(&mut self, now: SimTime, forced_loss: bool) -> LinkOutcome {
        if self.is_down(now) {
            return LinkOutcome::Drop(DropReason::RouteDown);
        }
        if forced_loss {
            return LinkOutcome::Drop(DropReason::Random);
        }
        let lost = if self.loss_prob <= 0.0 {
            false
        } else if self.loss_prob >= 1.0 {
            true
        } else {
            self.loss_rng.gen_bool(self.loss_prob)
        };
        if lost {
            return LinkOutcome::Drop(DropReason::Random);
        }
        let extra = if self.jitter > 0.0 { self.jitter * self.jitter_rng.gen::<f64>() } else { 0.0 };
        LinkOutcome::Deliver(now + secs_to_micros(self.base_delay + extra))
    }
}
