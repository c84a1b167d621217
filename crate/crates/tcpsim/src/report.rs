//! `metrics.csv`: one header row, then one row per run in input order.
//!
//! | column | meaning |
//! |---|---|
//! | `scenario` | scenario id, also used in trace file names |
//! | `axis`, `level`, `knob` | swept knob; empty / `base` for single runs |
//! | `variant`, `backoff`, `seed` | what ran |
//! | `throughput_bps` | delivered bytes per second of run time, 3 decimals |
//! | `pdr` | distinct segments received / distinct segments sent, 6 decimals |
//! | `duration_us` | run length |
//! | remaining columns | the integer counters of [`RunMetrics`], same names |
//!
//! Derived columns use fixed decimals so reruns produce identical bytes; the
//! integer columns alone recover every counter.

use std::io;

use tcpsim_core::{RunMetrics, Scenario};

pub const COLUMNS: [&str; 27] = [
    "scenario",
    "axis",
    "level",
    "knob",
    "variant",
    "backoff",
    "seed",
    "throughput_bps",
    "pdr",
    "duration_us",
    "bytes_delivered",
    "segments_sent",
    "first_transmissions",
    "segments_retransmitted",
    "timeout_retransmits",
    "recovery_retransmits",
    "segments_arrived",
    "segments_received",
    "dropped_route_down",
    "dropped_random",
    "segments_in_flight_at_end",
    "acks_sent",
    "acks_lost",
    "timeouts",
    "fast_retransmits",
    "partial_ack_recoveries",
    "segments_dropped",
];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
    #[error("row {row}: column `{column}`: cannot parse `{value}`")]
    Field { row: usize, column: &'static str, value: String },
}

/// One parsed row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub axis: String,
    pub level: Option<f64>,
    pub knob: String,
    pub variant: String,
    pub backoff: String,
    pub seed: u64,
    pub throughput_bps: f64,
    pub pdr: Option<f64>,
    pub metrics: RunMetrics,
}

fn counters(m: &RunMetrics) -> [u64; 17] {
    [
        m.duration_us,
        m.bytes_delivered,
        m.segments_sent,
        m.first_transmissions,
        m.segments_retransmitted,
        m.timeout_retransmits,
        m.recovery_retransmits,
        m.segments_arrived,
        m.segments_received,
        m.dropped_route_down,
        m.dropped_random,
        m.segments_in_flight_at_end,
        m.acks_sent,
        m.acks_lost,
        m.timeouts,
        m.fast_retransmits,
        m.partial_ack_recoveries,
    ]
}

fn from_counters(c: [u64; 17]) -> RunMetrics {
    RunMetrics {
        duration_us: c[0],
        bytes_delivered: c[1],
        segments_sent: c[2],
        first_transmissions: c[3],
        segments_retransmitted: c[4],
        timeout_retransmits: c[5],
        recovery_retransmits: c[6],
        segments_arrived: c[7],
        segments_received: c[8],
        dropped_route_down: c[9],
        dropped_random: c[10],
        segments_in_flight_at_end: c[11],
        acks_sent: c[12],
        acks_lost: c[13],
        timeouts: c[14],
        fast_retransmits: c[15],
        partial_ack_recoveries: c[16],
    }
}

fn record(scenario: &Scenario, m: &RunMetrics) -> Vec<String> {
    let c = &scenario.config;
    let mut rec = vec![
        scenario.id(),
        scenario.axis.map(|a| a.to_string()).unwrap_or_default(),
        scenario.level.map(|l| l.to_string()).unwrap_or_default(),
        scenario.knob_label.clone(),
        c.variant.to_string(),
        c.backoff_policy().to_string(),
        c.seed.to_string(),
        format!("{:.3}", m.throughput().unwrap_or(0.0)),
        m.packet_delivery_ratio().map(|p| format!("{p:.6}")).unwrap_or_default(),
    ];
    rec.extend(counters(m).iter().map(u64::to_string));
    rec.push(m.segments_dropped().to_string());
    rec
}

/// Writes the header and one row per run.
pub fn write_csv<'a, W: io::Write>(
    out: W,
    runs: impl IntoIterator<Item = (&'a Scenario, &'a RunMetrics)>,
) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(COLUMNS)?;
    for (s, m) in runs {
        w.write_record(record(s, m))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn to_csv_string<'a>(runs: impl IntoIterator<Item = (&'a Scenario, &'a RunMetrics)>) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, runs).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<Row>, ReportError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(ReportError::Header(header));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |col: usize| rec.get(col).unwrap_or("");
        let bad = |col: usize| ReportError::Field { row, column: COLUMNS[col], value: field(col).to_string() };
        let num = |col: usize| field(col).parse::<u64>().map_err(|_| bad(col));
        let float = |col: usize| field(col).parse::<f64>().map_err(|_| bad(col));
        let optional = |col: usize| if field(col).is_empty() { Ok(None) } else { float(col).map(Some) };
        let mut c = [0u64; 17];
        for (k, slot) in c.iter_mut().enumerate() {
            *slot = num(9 + k)?;
        }
        let metrics = from_counters(c);
        if num(26)? != metrics.segments_dropped() {
            return Err(bad(26));
        }
        rows.push(Row {
            scenario: field(0).into(),
            axis: field(1).into(),
            level: optional(2)?,
            knob: field(3).into(),
            variant: field(4).into(),
            backoff: field(5).into(),
            seed: num(6)?,
            throughput_bps: float(7)?,
            pdr: optional(8)?,
            metrics,
        });
    }
    Ok(rows)
}
