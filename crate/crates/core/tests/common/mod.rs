#![allow(dead_code)]

use std::collections::BTreeMap;

use tcpsim_core::{RouteSchedule, SimConfig, Variant};

/// One parsed trace line.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub t: u64,
    pub kind: String,
    pub fields: BTreeMap<String, String>,
}

impl Line {
    pub fn get(&self, key: &str) -> &str {
        self.fields.get(key).unwrap_or_else(|| panic!("no field {key} in {self:?}"))
    }

    pub fn num(&self, key: &str) -> u64 {
        self.get(key).parse().unwrap_or_else(|_| panic!("field {key} not numeric in {self:?}"))
    }
}

pub fn parse(trace: &str) -> Vec<Line> {
    trace
        .lines()
        .map(|l| {
            let mut parts = l.split(' ');
            let t = parts.next().unwrap().parse().unwrap();
            let kind = parts.next().unwrap().to_string();
            let fields = parts
                .map(|kv| {
                    let (k, v) = kv.split_once('=').unwrap();
                    (k.to_string(), v.to_string())
                })
                .collect();
            Line { t, kind, fields }
        })
        .collect()
}

/// No outages, no random loss, fixed delay.
pub fn clean(variant: Variant, mss: u32, segments: u64, one_way: f64) -> SimConfig {
    SimConfig {
        variant,
        mss,
        transfer_bytes: u64::from(mss) * segments,
        route: RouteSchedule {
            base_delay: one_way,
            delay_jitter: 0.0,
            random_loss_prob: 0.0,
            outage_rate: 0.0,
            ..RouteSchedule::default()
        },
        t_end: 60.0,
        trace: true,
        ..SimConfig::default()
    }
}

/// The hand-traced scenario behind the golden files.
pub fn golden(variant: Variant) -> SimConfig {
    let mut c = clean(variant, 1000, 6, 0.15);
    c.route.scripted_outages = vec![(0.5, 2.0)];
    c.route.scripted_drops = vec![1000];
    c.t_end = 5.0;
    c
}
