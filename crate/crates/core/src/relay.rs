//! Overhearing relay.
//!
//! The relay buffers uncoded symbols from source packets it overhears and
//! notes `u` from overheard feedback. UC-R forwards each newly buffered
//! symbol at once. IWC-R waits until `R_t` new symbols have been buffered
//! and then sends one entry: `s_u` uncoded when a fresh feedback named it
//! and it is in the buffer, otherwise a coded symbol of degree
//! `min(d_nf, m)` over the `m` buffered unexpired symbols.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbol::{xor_combine, FeedbackFormat, FeedbackMsg, Packet, PayloadEntry, Seq, SymbolRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelayPolicy {
    #[serde(rename = "UC-R")]
    UcR,
    #[serde(rename = "IWC-R")]
    IwcR,
}

impl RelayPolicy {
    pub fn name(self) -> &'static str {
        match self {
            RelayPolicy::UcR => "UC-R",
            RelayPolicy::IwcR => "IWC-R",
        }
    }
}

impl fmt::Display for RelayPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelayPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [RelayPolicy::UcR, RelayPolicy::IwcR]
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("relay", format!("unknown relay policy `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RelayParams {
    /// Buffer capacity `R_m`.
    pub memory: usize,
    /// Newly buffered symbols per forwarding phase, `R_t`.
    pub threshold: usize,
    pub d_nf: usize,
    pub delta: u64,
    pub feedback: FeedbackFormat,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RelayCounters {
    pub transmissions: u64,
    pub xor_ops: u64,
    pub buffered: u64,
}

#[derive(Clone, Debug)]
pub struct RelayState {
    params: RelayParams,
    buffer: VecDeque<SymbolRecord>,
    new_since_tx: usize,
    fresh: Vec<Seq>,
    last_u: Option<Seq>,
    last_feedback_step: Option<Seq>,
    last_tx_step: Option<Seq>,
    counters: RelayCounters,
}

impl RelayState {
    pub fn new(params: RelayParams) -> Self {
        RelayState {
            params,
            buffer: VecDeque::with_capacity(params.memory),
            new_since_tx: 0,
            fresh: Vec::new(),
            last_u: None,
            last_feedback_step: None,
            last_tx_step: None,
            counters: RelayCounters::default(),
        }
    }

    pub fn buffered_seqs(&self) -> impl Iterator<Item = Seq> + '_ {
        self.buffer.iter().map(|s| s.seq)
    }

    pub fn new_since_tx(&self) -> usize {
        self.new_since_tx
    }

    pub fn last_overheard_u(&self) -> Option<Seq> {
        self.last_u
    }

    pub fn counters(&self) -> RelayCounters {
        self.counters
    }

    /// Buffers the uncoded symbols of an overheard source packet and returns
    /// the ones that were new.
    pub fn overhear_packet(&mut self, pkt: &Packet) -> Vec<Seq> {
        let mut added = Vec::new();
        for e in pkt.entries.iter().filter(|e| !e.is_coded()) {
            let seq = e.min_seq();
            if self.buffer.iter().any(|s| s.seq == seq) {
                continue;
            }
            if self.params.memory == 0 {
                continue;
            }
            if self.buffer.len() == self.params.memory {
                self.buffer.pop_front();
            }
            self.buffer.push_back(SymbolRecord::new(seq, e.payload().clone()));
            added.push(seq);
        }
        self.new_since_tx += added.len();
        self.counters.buffered += added.len() as u64;
        self.fresh.extend_from_slice(&added);
        added
    }

    /// Notes `u` from a feedback that followed the source packet of `step`.
    pub fn overhear_feedback(&mut self, fb: &FeedbackMsg, step: Seq) {
        self.last_u = Some(fb.full_u(step + 1, self.params.feedback));
        self.last_feedback_step = Some(step);
    }

    /// Called once per timestep after overhearing. Returns the entries the
    /// relay transmits this step (each one a separate transmission).
    pub fn forward_decision<R: Rng + ?Sized>(
        &mut self,
        policy: RelayPolicy,
        step: Seq,
        rng: &mut R,
    ) -> Result<Vec<PayloadEntry>> {
        let fresh = std::mem::take(&mut self.fresh);
        let oldest = step.saturating_sub(self.params.delta);
        let out: Vec<PayloadEntry> = match policy {
            RelayPolicy::UcR => {
                self.new_since_tx = 0;
                fresh
                    .iter()
                    .filter(|&&s| s >= oldest)
                    .filter_map(|&s| self.buffer.iter().find(|r| r.seq == s))
                    .map(PayloadEntry::uncoded)
                    .collect()
            }
            RelayPolicy::IwcR => {
                if self.new_since_tx < self.params.threshold.max(1) {
                    return Ok(Vec::new());
                }
                self.new_since_tx = 0;
                self.iwc_r_entry(step, oldest, rng)?.into_iter().collect()
            }
        };
        if !out.is_empty() {
            self.last_tx_step = Some(step);
            self.counters.transmissions += out.len() as u64;
        }
        Ok(out)
    }

    fn iwc_r_entry<R: Rng + ?Sized>(
        &mut self,
        step: Seq,
        oldest: Seq,
        rng: &mut R,
    ) -> Result<Option<PayloadEntry>> {
        let feedback_is_fresh = match (self.last_feedback_step, self.last_tx_step) {
            (Some(fb), Some(tx)) => fb >= tx,
            (Some(_), None) => true,
            _ => false,
        };
        if feedback_is_fresh {
            if let Some(u) = self.last_u.filter(|&u| u >= oldest && u <= step) {
                if let Some(sym) = self.buffer.iter().find(|s| s.seq == u) {
                    return Ok(Some(PayloadEntry::uncoded(sym)));
                }
            }
        }
        let live: Vec<&SymbolRecord> = self.buffer.iter().filter(|s| s.seq >= oldest).collect();
        if live.is_empty() {
            return Ok(None);
        }
        let d = self.params.d_nf.clamp(1, live.len());
        let picks = rand::seq::index::sample(rng, live.len(), d);
        let chosen: Vec<&SymbolRecord> = picks.iter().map(|k| live[k]).collect();
        let entry = xor_combine(&chosen)?;
        self.counters.xor_ops += (d - 1) as u64;
        Ok(Some(entry))
    }
}
