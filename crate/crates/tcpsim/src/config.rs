//! Scenario and sweep files.
//!
//! A line-oriented `key = value` format with `[section]` headers. `#` starts a
//! comment; blank lines are ignored. Every key is optional and falls back to
//! the value printed by `tcpsim --print-defaults`.
//!
//! ```text
//! [run]
//! variant = abra-newreno
//! seed = 7
//!
//! [route]
//! scripted_outages = 0.5-2.0, 10-12
//!
//! [sweep]
//! variants = reno, newreno, abra-newreno
//! seeds = 1-20
//!
//! [sweep.speed]
//! levels = 5, 10, 15, 20, 25, 30
//! ```
//!
//! Each `[sweep.<axis>]` section adds one axis to the sweep; axes run in file
//! order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use tcpsim_core::cc::DUPACK_THRESHOLD;
use tcpsim_core::rto::{ALPHA, BETA, INITIAL_MAX_SRTT, INITIAL_MIN_SRTT, RTTVAR_MULTIPLIER};
use tcpsim_core::{
    build_sweep, Axis, BackoffPolicy, CcError, LinkError, ProxyMapping, Scenario, SimConfig, SimError,
    SweepError, Variant,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: key `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("{0}")]
    Sweep(String),
}

impl ConfigError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Syntax { line, .. } | ConfigError::Value { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisSpec {
    pub axis: Axis,
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub axes: Vec<AxisSpec>,
    pub mapping: ProxyMapping,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            variants: Variant::ALL.to_vec(),
            seeds: (1..=20).collect(),
            axes: vec![AxisSpec { axis: Axis::Speed, levels: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0] }],
            mapping: ProxyMapping::default(),
        }
    }
}

/// A parsed file: the base scenario plus an optional sweep over it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FileConfig {
    pub base: SimConfig,
    pub sweep: SweepSpec,
}

impl FileConfig {
    /// Every scenario the sweep describes, axis by axis.
    pub fn sweep_scenarios(&self) -> Result<Vec<Scenario>, ConfigError> {
        let s = &self.sweep;
        if s.axes.is_empty() {
            return Err(ConfigError::Sweep("no [sweep.<axis>] section, nothing to sweep".into()));
        }
        let mut out = Vec::new();
        for spec in &s.axes {
            let part = build_sweep(spec.axis, &spec.levels, &s.variants, &s.seeds, &self.base, &s.mapping)
                .map_err(|e| match e {
                    SweepError::Base(e) => sim_error(e),
                    other => ConfigError::Sweep(other.to_string()),
                })?;
            out.extend(part);
        }
        Ok(out)
    }
}

impl FromStr for FileConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        parse(text)
    }
}

fn sim_error(e: SimError) -> ConfigError {
    let key = match &e {
        SimError::Cc(CcError::ZeroSegmentSize) => "run.mss",
        SimError::Cc(CcError::InitialWindowOutOfRange { .. }) => "run.initial_cwnd",
        SimError::Cc(CcError::RestartWindowTooSmall(_)) => "run.restart_cwnd",
        SimError::Cc(CcError::WindowCapTooSmall { .. }) | SimError::ReceiverWindow { .. } => "run.receiver_window",
        SimError::Cc(CcError::UnknownVariant(_)) => "run.variant",
        SimError::Rto(_) => "rto",
        SimError::Link(LinkError::Probability { .. }) => "route.random_loss_prob",
        SimError::Link(LinkError::Negative { name, .. }) => return invalid(&format!("route.{name}"), e),
        SimError::Link(LinkError::DurationRange(..)) => "route.outage_max",
        SimError::Link(LinkError::ScriptedOutage(..)) => "route.scripted_outages",
        SimError::Horizon(_) => "run.t_end",
        SimError::EmptyTransfer => "run.transfer_bytes",
    };
    invalid(key, e)
}

fn invalid(key: &str, e: impl ToString) -> ConfigError {
    ConfigError::Invalid { key: key.into(), message: e.to_string() }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Run,
    Rto,
    Route,
    Mapping,
    Sweep,
    SweepAxis(usize),
}

pub fn parse(text: &str) -> Result<FileConfig, ConfigError> {
    let mut cfg = FileConfig::default();
    cfg.sweep.axes.clear();
    let mut section = None;
    let mut seen: HashMap<String, usize> = HashMap::new();
    // Cross-key checks report the line of the key that carries the limit.
    let mut lines_of: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line, message: format!("unterminated section header `{content}`") })?
                .trim();
            section = Some(match name {
                "run" => Section::Run,
                "rto" => Section::Rto,
                "route" => Section::Route,
                "mapping" => Section::Mapping,
                "sweep" => Section::Sweep,
                other => match other.strip_prefix("sweep.") {
                    Some(axis) => {
                        let axis: Axis = axis
                            .parse()
                            .map_err(|e: SweepError| ConfigError::Syntax { line, message: e.to_string() })?;
                        if cfg.sweep.axes.iter().any(|a| a.axis == axis) {
                            return Err(ConfigError::Syntax { line, message: format!("duplicate section [{name}]") });
                        }
                        cfg.sweep.axes.push(AxisSpec { axis, levels: Vec::new() });
                        Section::SweepAxis(cfg.sweep.axes.len() - 1)
                    }
                    None => return Err(ConfigError::Syntax { line, message: format!("unknown section [{name}]") }),
                },
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| ConfigError::Syntax { line, message: format!("expected `key = value`, got `{content}`") })?;
        let Some(sec) = section else {
            return Err(ConfigError::Value { line, key: key.into(), message: "key outside any [section]".into() });
        };
        let qualified = match sec {
            Section::Run => format!("run.{key}"),
            Section::Rto => format!("rto.{key}"),
            Section::Route => format!("route.{key}"),
            Section::Mapping => format!("mapping.{key}"),
            Section::Sweep => format!("sweep.{key}"),
            Section::SweepAxis(i) => format!("sweep.{}.{key}", cfg.sweep.axes[i].axis),
        };
        if let Some(prev) = seen.insert(qualified.clone(), line) {
            return Err(ConfigError::Value { line, key: key.into(), message: format!("already set on line {prev}") });
        }
        lines_of.insert(qualified.clone(), line);
        let err = |message: String| ConfigError::Value { line, key: key.into(), message };
        assign(&mut cfg, sec, key, value).map_err(err)?;
    }

    if let Some(a) = cfg.sweep.axes.iter().find(|a| a.levels.is_empty()) {
        return Err(ConfigError::Sweep(format!("[sweep.{}] has no levels", a.axis)));
    }
    cfg.base.validate().map_err(|e| with_line(sim_error(e), &lines_of))?;
    Ok(cfg)
}

fn with_line(e: ConfigError, lines_of: &HashMap<String, usize>) -> ConfigError {
    match e {
        ConfigError::Invalid { key, message } => {
            let found = lines_of.get(&key).copied().or_else(|| {
                // Section-level keys ("rto") match any key in that section.
                lines_of.iter().filter(|(k, _)| k.starts_with(&format!("{key}."))).map(|(_, &l)| l).max()
            });
            match found {
                Some(line) => ConfigError::Value { line, key: key.rsplit('.').next().unwrap_or(&key).into(), message },
                None => ConfigError::Invalid { key, message },
            }
        }
        other => other,
    }
}

fn assign(cfg: &mut FileConfig, sec: Section, key: &str, v: &str) -> Result<(), String> {
    let base = &mut cfg.base;
    let unknown = || Err(format!("unknown key"));
    match sec {
        Section::Run => match key {
            "variant" => base.variant = parse_with(v)?,
            "backoff" => base.backoff_override = auto_or(v, parse_with::<BackoffPolicy>)?,
            "mss" => base.mss = parse_with(v)?,
            "transfer_bytes" => base.transfer_bytes = parse_with(v)?,
            "receiver_window" => base.receiver_window = parse_with(v)?,
            "initial_cwnd" => base.initial_cwnd = auto_or(v, parse_with::<u64>)?,
            "initial_ssthresh" => base.initial_ssthresh = parse_with(v)?,
            "restart_cwnd" => base.restart_cwnd = auto_or(v, parse_with::<u64>)?,
            "restore_ssthresh" => base.restore_ssthresh = parse_with(v)?,
            "t_end" => base.t_end = parse_f64(v)?,
            "seed" => base.seed = parse_with(v)?,
            "trace" => base.trace = parse_with(v)?,
            _ => return unknown(),
        },
        Section::Rto => match key {
            "initial" => base.rto.initial_rto = parse_f64(v)?,
            "floor" => base.rto.rto_floor = parse_f64(v)?,
            "ceiling" => base.rto.rto_ceiling = parse_f64(v)?,
            _ => return unknown(),
        },
        Section::Route => {
            let r = &mut base.route;
            match key {
                "base_delay" => r.base_delay = parse_f64(v)?,
                "delay_jitter" => r.delay_jitter = parse_f64(v)?,
                "random_loss_prob" => r.random_loss_prob = parse_f64(v)?,
                "outage_rate" => r.outage_rate = parse_f64(v)?,
                "outage_min" => r.outage_duration.0 = parse_f64(v)?,
                "outage_max" => r.outage_duration.1 = parse_f64(v)?,
                "scripted_outages" => r.scripted_outages = list(v, parse_interval)?,
                "scripted_drops" => r.scripted_drops = list(v, parse_with::<u64>)?,
                _ => return unknown(),
            }
        }
        Section::Mapping => {
            let m = &mut cfg.sweep.mapping;
            let slot = match key {
                "speed_outage_rate_per_mps" => &mut m.speed_outage_rate_per_mps,
                "nodes_loss_numerator" => &mut m.nodes_loss_numerator,
                "nodes_outage_numerator" => &mut m.nodes_outage_numerator,
                "pause_scale" => &mut m.pause_scale,
                _ => return unknown(),
            };
            let x = parse_f64(v)?;
            if x <= 0.0 {
                return Err(format!("must be positive, got {x}"));
            }
            *slot = x;
        }
        Section::Sweep => match key {
            "variants" => {
                cfg.sweep.variants = list(v, parse_with::<Variant>)?;
                if cfg.sweep.variants.is_empty() {
                    return Err("needs at least one variant".into());
                }
            }
            "seeds" => {
                cfg.sweep.seeds = list(v, parse_seed_range)?.into_iter().flatten().collect();
                if cfg.sweep.seeds.is_empty() {
                    return Err("needs at least one seed".into());
                }
            }
            _ => return unknown(),
        },
        Section::SweepAxis(i) => match key {
            "levels" => cfg.sweep.axes[i].levels = list(v, parse_f64)?,
            _ => return unknown(),
        },
    }
    Ok(())
}

fn parse_with<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: ToString,
{
    v.parse::<T>().map_err(|e| format!("`{v}`: {}", e.to_string()))
}

fn parse_f64(v: &str) -> Result<f64, String> {
    let x: f64 = parse_with(v)?;
    if !x.is_finite() {
        return Err(format!("`{v}` is not a finite number"));
    }
    Ok(x)
}

fn auto_or<T>(v: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, String> {
    if v.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

/// Comma-separated items; `none` or an empty value is the empty list.
fn list<T>(v: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if v.is_empty() || v.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    v.split(',').map(|item| f(item.trim())).collect()
}

fn parse_interval(v: &str) -> Result<(f64, f64), String> {
    let (a, b) = v.split_once('-').ok_or_else(|| format!("`{v}` is not a `start-end` interval"))?;
    Ok((parse_f64(a.trim())?, parse_f64(b.trim())?))
}

/// `n` or an inclusive range `a-b`.
fn parse_seed_range(v: &str) -> Result<Vec<u64>, String> {
    match v.split_once('-') {
        Some((a, b)) => {
            let (a, b): (u64, u64) = (parse_with(a.trim())?, parse_with(b.trim())?);
            if a > b {
                return Err(format!("empty seed range `{v}`"));
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![parse_with(v)?]),
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    if items.is_empty() {
        return "none".into();
    }
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "auto".into(), |x| x.to_string())
}

/// Compresses consecutive seeds back into ranges.
fn seed_ranges(seeds: &[u64]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < seeds.len() {
        let mut j = i;
        while j + 1 < seeds.len() && seeds[j + 1] == seeds[j].wrapping_add(1) && seeds[j] != u64::MAX {
            j += 1;
        }
        parts.push(if j > i { format!("{}-{}", seeds[i], seeds[j]) } else { seeds[i].to_string() });
        i = j + 1;
    }
    parts.join(", ")
}

/// Writes `cfg` in the file format. Parsing the result gives `cfg` back.
pub fn render(cfg: &FileConfig) -> String {
    let b = &cfg.base;
    let r = &b.route;
    let m = &cfg.sweep.mapping;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# Fixed constants: duplicate-ACK threshold {DUPACK_THRESHOLD}; SRTT gain {ALPHA}; RTTD gain {BETA};\n\
         # RTO = SRTT + {RTTVAR_MULTIPLIER}*RTTD; min/max SRTT start at {INITIAL_MIN_SRTT}/{INITIAL_MAX_SRTT} s;\n\
         # initial cwnd auto = min(4*mss, max(2*mss, 4380)) bytes, capped at the receiver window.\n"
    );
    let _ = writeln!(s, "[run]");
    let _ = writeln!(s, "# reno | newreno | abra-newreno");
    let _ = writeln!(s, "variant = {}", b.variant);
    let _ = writeln!(s, "# auto follows the variant; exponential | abra forces a policy");
    let _ = writeln!(s, "backoff = {}", opt(b.backoff_override));
    let _ = writeln!(s, "mss = {}", b.mss);
    let _ = writeln!(s, "transfer_bytes = {}", b.transfer_bytes);
    let _ = writeln!(s, "receiver_window = {}", b.receiver_window);
    let _ = writeln!(s, "initial_cwnd = {}", opt(b.initial_cwnd));
    let _ = writeln!(s, "initial_ssthresh = {}", b.initial_ssthresh);
    let _ = writeln!(s, "# auto = one segment");
    let _ = writeln!(s, "restart_cwnd = {}", opt(b.restart_cwnd));
    let _ = writeln!(s, "restore_ssthresh = {}", b.restore_ssthresh);
    let _ = writeln!(s, "# seconds");
    let _ = writeln!(s, "t_end = {}", b.t_end);
    let _ = writeln!(s, "seed = {}", b.seed);
    let _ = writeln!(s, "trace = {}", b.trace);
    let _ = writeln!(s, "\n[rto]\n# seconds");
    let _ = writeln!(s, "initial = {}", b.rto.initial_rto);
    let _ = writeln!(s, "floor = {}", b.rto.rto_floor);
    let _ = writeln!(s, "ceiling = {}", b.rto.rto_ceiling);
    let _ = writeln!(s, "\n[route]\n# delays and outage lengths in seconds, outage_rate per second");
    let _ = writeln!(s, "base_delay = {}", r.base_delay);
    let _ = writeln!(s, "delay_jitter = {}", r.delay_jitter);
    let _ = writeln!(s, "random_loss_prob = {}", r.random_loss_prob);
    let _ = writeln!(s, "outage_rate = {}", r.outage_rate);
    let _ = writeln!(s, "outage_min = {}", r.outage_duration.0);
    let _ = writeln!(s, "outage_max = {}", r.outage_duration.1);
    let _ = writeln!(s, "# start-end pairs, e.g. 0.5-2.0, 10-12");
    let _ = writeln!(s, "scripted_outages = {}", join(&r.scripted_outages, |(a, b)| format!("{a}-{b}")));
    let _ = writeln!(s, "# byte offsets whose first transmission is lost");
    let _ = writeln!(s, "scripted_drops = {}", join(&r.scripted_drops, u64::to_string));
    let _ = writeln!(s, "\n[mapping]\n# how sweep levels translate into route parameters");
    let _ = writeln!(s, "speed_outage_rate_per_mps = {}", m.speed_outage_rate_per_mps);
    let _ = writeln!(s, "nodes_loss_numerator = {}", m.nodes_loss_numerator);
    let _ = writeln!(s, "nodes_outage_numerator = {}", m.nodes_outage_numerator);
    let _ = writeln!(s, "pause_scale = {}", m.pause_scale);
    let _ = writeln!(s, "\n[sweep]");
    let _ = writeln!(s, "variants = {}", join(&cfg.sweep.variants, Variant::to_string));
    let _ = writeln!(s, "seeds = {}", seed_ranges(&cfg.sweep.seeds));
    for a in &cfg.sweep.axes {
        let _ = writeln!(s, "\n[sweep.{}]", a.axis);
        let _ = writeln!(s, "levels = {}", join(&a.levels, f64::to_string));
    }
    for axis in Axis::ALL {
        if !cfg.sweep.axes.iter().any(|a| a.axis == axis) {
            let _ = writeln!(s, "\n# [sweep.{axis}]\n# levels = ...");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = FileConfig::default();
        assert_eq!(parse(&render(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn empty_file_is_defaults_without_sweep() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg.base, SimConfig::default());
        assert!(cfg.sweep.axes.is_empty());
        assert!(cfg.sweep_scenarios().is_err());
    }

    #[test]
    fn values_land_in_place() {
        let cfg = parse(
            "[run]\nvariant = reno\nbackoff = abra\ninitial_cwnd = 1024 # two segments\n\
             [route]\nscripted_outages = 0.5-2, 10-12.5\nscripted_drops = 512, 4096\n\
             [sweep]\nseeds = 1-3, 9\nvariants = newreno\n[sweep.nodes]\nlevels = 10, 50\n",
        )
        .unwrap();
        assert_eq!(cfg.base.variant, Variant::Reno);
        assert_eq!(cfg.base.backoff_override, Some(BackoffPolicy::Abra));
        assert_eq!(cfg.base.initial_cwnd, Some(1024));
        assert_eq!(cfg.base.route.scripted_outages, [(0.5, 2.0), (10.0, 12.5)]);
        assert_eq!(cfg.base.route.scripted_drops, [512, 4096]);
        assert_eq!(cfg.sweep.seeds, [1, 2, 3, 9]);
        assert_eq!(cfg.sweep_scenarios().unwrap().len(), 8);
        assert_eq!(seed_ranges(&cfg.sweep.seeds), "1-3, 9");
    }

    #[test]
    fn errors_cite_line_and_key() {
        let e = parse("[run]\nmss = 512\n\n[route]\nrandom_loss_prob = lots\n").unwrap_err();
        assert_eq!(e.line(), Some(5));
        assert!(e.to_string().contains("random_loss_prob"), "{e}");

        let e = parse("[route]\nrandom_loss_prob = 1.5\n").unwrap_err();
        assert_eq!(e.line(), Some(2), "{e}");

        let e = parse("[route]\noutage_min = 3\n\noutage_max = 2\n").unwrap_err();
        assert_eq!(e.line(), Some(4), "{e}");

        let e = parse("[run]\nmss = 512\nmss = 1024\n").unwrap_err();
        assert_eq!(e.line(), Some(3));

        assert_eq!(parse("[run]\nfoo = 1\n").unwrap_err().line(), Some(2));
        assert_eq!(parse("[bogus]\n").unwrap_err().line(), Some(1));
        assert_eq!(parse("mss = 1\n").unwrap_err().line(), Some(1));
        assert_eq!(parse("[run]\nmss\n").unwrap_err().line(), Some(2));
        assert_eq!(parse("[rto]\nfloor = 5\nceiling = 1\n").unwrap_err().line(), Some(3));
    }
}
