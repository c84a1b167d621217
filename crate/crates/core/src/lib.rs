//! Deterministic discrete-event simulation of a single TCP bulk transfer over
//! a path that suffers route outages.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: congestion-control state machines ([`cc`]), RTT estimation and
//! timeout backoff ([`rto`]), the event engine and link model ([`netsim`]),
//! per-run counters ([`metrics`]) and sweep construction ([`experiment`]).
//! File formats, the CLI and parallel sweep execution live in the `tcpsim`
//! crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cc;
pub mod experiment;
pub mod metrics;
pub mod netsim;
pub mod rto;
pub mod time;

pub use cc::{ActionKind, CcAction, CcConfig, CcError, CongestionControl, CongestionState, Mode, SegSize, Variant};
pub use experiment::{build_sweep, Axis, ProxyMapping, Scenario, SweepError};
pub use metrics::{MetricsError, RunMetrics};
pub use netsim::{run, DropReason, ExpiryRecord, LinkError, RouteSchedule, RunOutcome, SimConfig, SimError};
pub use rto::{BackoffPolicy, RtoConfig, RtoError, RttEstimator, SavedCongestionSnapshot};
pub use time::SimTime;
