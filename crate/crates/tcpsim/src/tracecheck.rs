//! Consistency checks over a rendered event trace.

use std::collections::BTreeMap;

use tcpsim_core::RunMetrics;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: malformed: {text}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: time goes backwards")]
    TimeReversal { line: usize },
    #[error("line {line}: new data sent beyond the window (flight {flight} > wnd {wnd})")]
    WindowOverrun { line: usize, flight: u64, wnd: u64 },
    #[error("last line is not run_end")]
    MissingEnd,
    #[error("run_end field `{field}` is {trace} but the counters say {counted}")]
    EndMismatch { field: &'static str, trace: u64, counted: u64 },
    #[error("{field}: trace has {trace} but the counters say {counted}")]
    CountMismatch { field: &'static str, trace: u64, counted: u64 },
    #[error("sent {sent} != arrived {arrived} + dropped {dropped} + in flight {in_flight}")]
    NotConserved { sent: u64, arrived: u64, dropped: u64, in_flight: u64 },
    #[error("line {line} differs:\n  expected: {expected}\n  actual:   {actual}")]
    Differs { line: usize, expected: String, actual: String },
}

/// Event counts per kind.
pub type TraceSummary = BTreeMap<String, u64>;

fn fields(line: usize, text: &str) -> Result<(u64, &str, BTreeMap<&str, &str>), TraceError> {
    let bad = || TraceError::Malformed { line, text: text.to_string() };
    let mut parts = text.split(' ');
    let t = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    let kind = parts.next().filter(|k| !k.is_empty()).ok_or_else(bad)?;
    let mut map = BTreeMap::new();
    for kv in parts {
        let (k, v) = kv.split_once('=').ok_or_else(bad)?;
        map.insert(k, v);
    }
    Ok((t, kind, map))
}

/// Checks ordering, window safety and that the trace agrees with `m`.
pub fn check(trace: &str, m: &RunMetrics) -> Result<TraceSummary, TraceError> {
    let mut summary = TraceSummary::new();
    let mut last_t = 0;
    let mut tx = 0;
    let mut end = None;
    for (i, text) in trace.lines().enumerate() {
        let line = i + 1;
        let (t, kind, f) = fields(line, text)?;
        let num = |key: &str| {
            f.get(key).and_then(|v| v.parse::<u64>().ok()).ok_or(TraceError::Malformed { line, text: text.to_string() })
        };
        if t < last_t {
            return Err(TraceError::TimeReversal { line });
        }
        last_t = t;
        *summary.entry(kind.to_string()).or_default() += 1;
        match kind {
            "tx" => {
                tx += 1;
                if matches!(f.get("cause"), Some(&"new") | Some(&"gobackn")) {
                    let (flight, wnd) = (num("flight")?, num("wnd")?);
                    if flight > wnd {
                        return Err(TraceError::WindowOverrun { line, flight, wnd });
                    }
                }
            }
            "run_end" => {
                end = Some((line, [num("sent")?, num("arrived")?, num("dropped")?, num("in_flight")?, num("delivered_bytes")?]))
            }
            _ => {}
        }
    }
    let (end_line, [sent, arrived, dropped, in_flight, delivered]) = end.ok_or(TraceError::MissingEnd)?;
    if end_line != trace.lines().count() {
        return Err(TraceError::MissingEnd);
    }
    for (field, trace, counted) in [
        ("sent", sent, m.segments_sent),
        ("arrived", arrived, m.segments_arrived),
        ("dropped", dropped, m.segments_dropped()),
        ("in_flight", in_flight, m.segments_in_flight_at_end),
        ("delivered_bytes", delivered, m.bytes_delivered),
    ] {
        if trace != counted {
            return Err(TraceError::EndMismatch { field, trace, counted });
        }
    }
    if tx != m.segments_sent {
        return Err(TraceError::CountMismatch { field: "tx lines", trace: tx, counted: m.segments_sent });
    }
    let arrivals = summary.get("seg_arrival").copied().unwrap_or(0);
    if arrivals != m.segments_arrived {
        return Err(TraceError::CountMismatch { field: "seg_arrival lines", trace: arrivals, counted: m.segments_arrived });
    }
    if sent != arrived + dropped + in_flight {
        return Err(TraceError::NotConserved { sent, arrived, dropped, in_flight });
    }
    Ok(summary)
}

/// Byte comparison that reports the first differing line.
pub fn compare(expected: &str, actual: &str) -> Result<(), TraceError> {
    if expected == actual {
        return Ok(());
    }
    let mut e = expected.split_inclusive('\n');
    let mut a = actual.split_inclusive('\n');
    let mut line = 1;
    loop {
        match (e.next(), a.next()) {
            (Some(x), Some(y)) if x == y => line += 1,
            (x, y) => {
                let show = |s: Option<&str>| s.map_or_else(|| "<end of file>".to_string(), |s| format!("{s:?}"));
                return Err(TraceError::Differs { line, expected: show(x), actual: show(y) });
            }
        }
    }
}
