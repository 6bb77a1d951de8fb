#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use fbcoding::sim::trace::{EntryDesc, Trace, TraceEvent};
use fbcoding::sim::{run_with, RunOptions, SimConfig, SimResult};
use fbcoding::Seq;

pub fn traced(cfg: &SimConfig) -> (SimResult, Trace) {
    let mut res = run_with(
        cfg,
        None,
        RunOptions {
            record_trace: true,
            keep_payloads: false,
        },
    )
    .expect("run succeeds");
    let trace = res.trace.take().expect("trace recorded");
    (res, trace)
}

/// Every delivery in the trace as `(step, seq)`.
pub fn deliveries(trace: &Trace) -> Vec<(Seq, Seq)> {
    trace
        .records
        .iter()
        .filter_map(|r| match &r.event {
            TraceEvent::DestRx { delivered, .. } => Some(delivered.iter().map(move |&s| (r.step, s))),
            _ => None,
        })
        .flatten()
        .collect()
}

/// Row-reduced system over GF(2) with one column per sequence number.
pub struct Gf2 {
    words: usize,
    rows: BTreeMap<usize, Vec<u64>>,
}

impl Gf2 {
    pub fn new(columns: usize) -> Self {
        Gf2 {
            words: columns.div_ceil(64),
            rows: BTreeMap::new(),
        }
    }

    fn lowest(v: &[u64]) -> Option<usize> {
        v.iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(k, w)| k * 64 + w.trailing_zeros() as usize)
    }

    fn bit(v: &[u64], c: usize) -> bool {
        v[c / 64] >> (c % 64) & 1 == 1
    }

    fn xor(a: &mut [u64], b: &[u64]) {
        for (x, y) in a.iter_mut().zip(b) {
            *x ^= y;
        }
    }

    /// Adds an equation; returns the columns that became determined.
    pub fn insert(&mut self, seqs: &[Seq]) -> Vec<usize> {
        let mut v = vec![0u64; self.words];
        for &s in seqs {
            v[s as usize / 64] ^= 1 << (s % 64);
        }
        for (&p, row) in &self.rows {
            if Self::bit(&v, p) {
                Self::xor(&mut v, row);
            }
        }
        let Some(pivot) = Self::lowest(&v) else {
            return Vec::new();
        };
        for row in self.rows.values_mut() {
            if Self::bit(row, pivot) {
                Self::xor(row, &v);
            }
        }
        self.rows.insert(pivot, v);
        self.rows
            .iter()
            .filter(|(_, r)| r.iter().map(|w| w.count_ones()).sum::<u32>() == 1)
            .map(|(&p, _)| p)
            .collect()
    }
}

/// First step at which each symbol is determined by everything the
/// destination ever received, ignoring expiry.
pub fn gf2_first_known(trace: &Trace, n: usize) -> HashMap<Seq, Seq> {
    let mut sys = Gf2::new(n.max(1));
    let mut known = HashMap::new();
    for r in &trace.records {
        if let TraceEvent::DestRx { entries, .. } = &r.event {
            for e in entries {
                for c in sys.insert(&e.seqs) {
                    known.entry(c as Seq).or_insert(r.step);
                }
            }
        }
    }
    known
}

/// Destination decode repeated to a fixpoint within each reception.
pub fn fixpoint_deliveries(trace: &Trace) -> Vec<(Seq, Seq)> {
    let delta = trace.header.delta;
    let mut have: HashSet<Seq> = HashSet::new();
    let mut out = Vec::new();
    for r in &trace.records {
        let TraceEvent::DestRx { entries, .. } = &r.event else {
            continue;
        };
        let now = r.step;
        let live = |s: Seq| s + delta >= now;
        let mut pending: Vec<&EntryDesc> = entries.iter().collect();
        loop {
            let mut progress = false;
            pending.retain(|e| {
                let missing: Vec<Seq> = e.seqs.iter().copied().filter(|s| !(live(*s) && have.contains(s))).collect();
                if missing.len() == 1 && live(missing[0]) {
                    have.insert(missing[0]);
                    out.push((now, missing[0]));
                    progress = true;
                    false
                } else {
                    !missing.is_empty()
                }
            });
            if !progress {
                break;
            }
        }
    }
    out
}
