//! Scenario sweeps that vary one mobility knob at a time across TCP variants
//! and seeds.
//!
//! The link model has no nodes or mobility, so each knob is mapped onto the
//! route parameters through a [`ProxyMapping`]. The mapping is interpretive:
//!
//! | knob | level unit | effect on the base route |
//! |---|---|---|
//! | speed | m/s | `outage_rate = speed_outage_rate_per_mps · level` |
//! | nodes | count | `random_loss_prob = nodes_loss_numerator / level`, outage lengths `(¼, 1)·nodes_outage_numerator / level` s |
//! | pause | s | outage rate and lengths divided by `1 + level / pause_scale` |
//!
//! Faster nodes break routes more often; more nodes offer alternative routes
//! (less loss, quicker repair); longer pauses keep the topology still.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::cc::Variant;
use crate::netsim::{SimConfig, SimError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SweepError {
    #[error("sweep has no {0}")]
    EmptyDimension(&'static str),
    #[error("level {level} is not valid for the {axis} axis")]
    InvalidLevel { axis: Axis, level: f64 },
    #[error("unknown sweep axis `{0}` (expected speed, nodes or pause)")]
    UnknownAxis(String),
    #[error("base scenario: {0}")]
    Base(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    Speed,
    Nodes,
    Pause,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Speed, Axis::Nodes, Axis::Pause];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Speed => "speed",
            Axis::Nodes => "nodes",
            Axis::Pause => "pause",
        }
    }

    fn unit(self) -> &'static str {
        match self {
            Axis::Speed => "m/s",
            Axis::Nodes => "",
            Axis::Pause => "s",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "speed" => Ok(Axis::Speed),
            "nodes" => Ok(Axis::Nodes),
            "pause" => Ok(Axis::Pause),
            _ => Err(SweepError::UnknownAxis(s.into())),
        }
    }
}

/// Coefficients translating mobility knobs into route parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyMapping {
    /// Outages per second per m/s of node speed.
    pub speed_outage_rate_per_mps: f64,
    pub nodes_loss_numerator: f64,
    /// Seconds; the longest outage is this over the node count.
    pub nodes_outage_numerator: f64,
    /// Seconds of pause that halve outage rate and length.
    pub pause_scale: f64,
}

impl Default for ProxyMapping {
    fn default() -> Self {
        ProxyMapping {
            speed_outage_rate_per_mps: 0.004,
            nodes_loss_numerator: 0.1,
            nodes_outage_numerator: 80.0,
            pause_scale: 10.0,
        }
    }
}

impl ProxyMapping {
    /// `config` with `axis` set to `level`.
    pub fn apply(&self, axis: Axis, level: f64, config: &SimConfig) -> Result<SimConfig, SweepError> {
        let bad = || SweepError::InvalidLevel { axis, level };
        if !level.is_finite() {
            return Err(bad());
        }
        let mut out = config.clone();
        let route = &mut out.route;
        match axis {
            Axis::Speed => {
                if level < 0.0 {
                    return Err(bad());
                }
                route.outage_rate = self.speed_outage_rate_per_mps * level;
            }
            Axis::Nodes => {
                if level < 1.0 {
                    return Err(bad());
                }
                route.random_loss_prob = (self.nodes_loss_numerator / level).min(1.0);
                let longest = self.nodes_outage_numerator / level;
                route.outage_duration = (longest / 4.0, longest);
            }
            Axis::Pause => {
                if level < 0.0 {
                    return Err(bad());
                }
                let damp = 1.0 + level / self.pause_scale;
                route.outage_rate /= damp;
                route.outage_duration = (route.outage_duration.0 / damp, route.outage_duration.1 / damp);
            }
        }
        Ok(out)
    }
}

/// One fully specified run plus the knob it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SimConfig,
    pub axis: Option<Axis>,
    pub level: Option<f64>,
    pub knob_label: String,
}

impl Scenario {
    pub fn single(config: SimConfig) -> Self {
        Scenario { config, axis: None, level: None, knob_label: String::from("base") }
    }

    /// A filesystem-safe identifier, unique within a sweep.
    pub fn id(&self) -> String {
        let head = match (self.axis, self.level) {
            (Some(axis), Some(level)) => format!("{}-{}", axis, level),
            _ => String::from("base"),
        };
        format!("{}-{}-s{}", head, self.config.variant, self.config.seed)
    }
}

/// The Cartesian product levels × variants × seeds, in that nesting order,
/// with everything else taken from `base`.
pub fn build_sweep(
    axis: Axis,
    levels: &[f64],
    variants: &[Variant],
    seeds: &[u64],
    base: &SimConfig,
    mapping: &ProxyMapping,
) -> Result<Vec<Scenario>, SweepError> {
    if levels.is_empty() {
        return Err(SweepError::EmptyDimension("levels"));
    }
    if variants.is_empty() {
        return Err(SweepError::EmptyDimension("variants"));
    }
    if seeds.is_empty() {
        return Err(SweepError::EmptyDimension("seeds"));
    }
    base.validate()?;
    let mut out = Vec::with_capacity(levels.len() * variants.len() * seeds.len());
    for &level in levels {
        let at_level = mapping.apply(axis, level, base)?;
        at_level.validate()?;
        let knob_label = format!("{}={}{}", axis, level, axis.unit());
        for &variant in variants {
            for &seed in seeds {
                let mut config = at_level.clone();
                config.variant = variant;
                config.seed = seed;
                out.push(Scenario { config, axis: Some(axis), level: Some(level), knob_label: knob_label.clone() });
            }
        }
    }
    Ok(out)
}
