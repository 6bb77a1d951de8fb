//! Independent replay of a recorded trace.
//!
//! The reference decoder keeps every delivered sequence number forever and
//! applies the expiry rule arithmetically at each step, instead of pruning a
//! window like [`ReceiverState`](crate::receiver::ReceiverState). Feedback is
//! recomputed by scanning the window from scratch. Any mismatch with what the
//! run recorded is reported as a divergence.

use std::collections::HashSet;
use std::fmt;

use crate::symbol::{FeedbackForm, Seq};

use super::trace::{EntryDesc, Origin, Trace, TraceEvent};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub step: Seq,
    pub what: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.what)
    }
}

#[derive(Clone, Debug, Default)]
pub struct OracleReport {
    pub divergences: Vec<Divergence>,
    pub receptions_checked: u64,
    pub feedbacks_checked: u64,
    pub packets_checked: u64,
}

impl OracleReport {
    pub fn is_clean(&self) -> bool {
        self.divergences.is_empty()
    }
}

struct Reference {
    delta: u64,
    delivered: HashSet<Seq>,
}

impl Reference {
    fn live(&self, seq: Seq, now: Seq) -> bool {
        seq + self.delta >= now
    }

    fn has(&self, seq: Seq, now: Seq) -> bool {
        self.live(seq, now) && self.delivered.contains(&seq)
    }

    fn decode(&mut self, entries: &[EntryDesc], now: Seq) -> Vec<Seq> {
        let mut out = Vec::new();
        for e in entries {
            let missing: Vec<Seq> = e.seqs.iter().copied().filter(|&s| !self.has(s, now)).collect();
            if missing.len() == 1 && self.live(missing[0], now) && missing[0] <= now {
                self.delivered.insert(missing[0]);
                out.push(missing[0]);
            }
        }
        out
    }

    fn feedback(&self, now: Seq, l_m: u32) -> (Seq, u64, Vec<bool>) {
        let start = now.saturating_sub(self.delta);
        let missing: Vec<Seq> = (start..=now).filter(|&s| !self.has(s, now)).collect();
        let u = missing.first().copied().unwrap_or(now + 1);
        let bits = (1..=l_m as u64)
            .map(|k| u + k > now || self.has(u + k, now))
            .collect();
        (u, missing.len() as u64, bits)
    }
}

/// Replays `trace` against the reference decoder and feedback generator.
pub fn mirror_oracle_check(trace: &Trace) -> OracleReport {
    let h = &trace.header;
    let mut reference = Reference {
        delta: h.delta,
        delivered: HashSet::new(),
    };
    let mut report = OracleReport::default();
    let mut ever: HashSet<Seq> = HashSet::new();
    let max_beta = if h.l_m >= 64 { u64::MAX } else { (1u64 << h.l_m) - 1 };
    let diverge = |report: &mut OracleReport, step, what: String| {
        report.divergences.push(Divergence { step, what });
    };

    for rec in &trace.records {
        let now = rec.step;
        let oldest = now.saturating_sub(h.delta);
        match &rec.event {
            TraceEvent::SourceTx { entries } => {
                report.packets_checked += 1;
                if entries.is_empty() || entries.len() > h.b.max(1) {
                    diverge(&mut report, now, format!("packet has {} entries, b = {}", entries.len(), h.b));
                }
                if entries.first().is_some_and(|e| e.coded || e.seqs != [now]) {
                    diverge(&mut report, now, "first entry is not the fresh symbol".into());
                }
                for e in entries {
                    if e.seqs.iter().any(|&s| s < oldest || s > now) {
                        diverge(&mut report, now, format!("source sent out-of-window entry {e}"));
                    }
                }
            }
            TraceEvent::RelayTx { entry } => {
                if !entry.coded && entry.seqs[0] < oldest {
                    diverge(&mut report, now, format!("relay forwarded expired {entry}"));
                }
            }
            TraceEvent::DestRx { origin, entries, delivered } => {
                report.receptions_checked += 1;
                let expect = reference.decode(entries, now);
                if &expect != delivered {
                    let who = match origin {
                        Origin::Source => "source",
                        Origin::Relay => "relay",
                    };
                    diverge(
                        &mut report,
                        now,
                        format!("{who} reception delivered {delivered:?}, reference {expect:?}"),
                    );
                }
                for &s in delivered {
                    if !ever.insert(s) {
                        diverge(&mut report, now, format!("symbol {s} delivered twice"));
                    }
                }
            }
            TraceEvent::Feedback { u, beta, bits, .. } => {
                report.feedbacks_checked += 1;
                let (ru, rbeta, rbits) = reference.feedback(now, h.l_m);
                if *u != ru {
                    diverge(&mut report, now, format!("feedback u = {u}, reference {ru}"));
                }
                match h.form {
                    FeedbackForm::Cumulative => {
                        let want = rbeta.min(max_beta);
                        if *beta != Some(want) {
                            diverge(&mut report, now, format!("feedback beta = {beta:?}, reference {want}"));
                        }
                    }
                    FeedbackForm::Bitmap => {
                        if bits.as_deref() != Some(&rbits[..]) {
                            diverge(&mut report, now, format!("feedback bitmap {bits:?}, reference {rbits:?}"));
                        }
                    }
                }
            }
            TraceEvent::DestErased { .. }
            | TraceEvent::RelayOverheard { .. }
            | TraceEvent::RelayMissed => {}
        }
    }
    report
}
