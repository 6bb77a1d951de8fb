//! Symbols, packets and feedback messages exchanged between source,
//! relay and destination.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sequence number of an information symbol. Symbol `s_i` is generated at
/// timestep `i`, so sequence numbers double as generation instants.
pub type Seq = u64;

/// Opaque symbol content. Every symbol of a run has the same length.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Payload(Vec<u8>);

impl Payload {
    pub fn new(bytes: Vec<u8>) -> Self {
        Payload(bytes)
    }

    pub fn zeroed(len: usize) -> Self {
        Payload(vec![0; len])
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len_bits(&self) -> usize {
        self.0.len() * 8
    }

    pub fn xor_assign(&mut self, other: &Payload) -> Result<()> {
        if self.0.len() != other.0.len() {
            return Err(Error::invalid(format!(
                "payload length mismatch: {} vs {} bytes",
                self.0.len(),
                other.0.len()
            )));
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
        Ok(())
    }
}

impl fmt::Debug for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x")?;
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl From<Vec<u8>> for Payload {
    fn from(v: Vec<u8>) -> Self {
        Payload(v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolRecord {
    pub seq: Seq,
    pub payload: Payload,
}

impl SymbolRecord {
    pub fn new(seq: Seq, payload: impl Into<Payload>) -> Self {
        SymbolRecord {
            seq,
            payload: payload.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EntryKind {
    Uncoded,
    Coded,
}

/// One symbol slot of a packet payload.
///
/// Constituent sequence numbers travel with the entry as simulator metadata
/// and are not counted against the payload budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PayloadEntry {
    kind: EntryKind,
    constituents: Vec<Seq>,
    payload: Payload,
}

impl PayloadEntry {
    pub fn uncoded(sym: &SymbolRecord) -> Self {
        PayloadEntry {
            kind: EntryKind::Uncoded,
            constituents: vec![sym.seq],
            payload: sym.payload.clone(),
        }
    }

    pub fn kind(&self) -> EntryKind {
        self.kind
    }

    pub fn is_coded(&self) -> bool {
        self.kind == EntryKind::Coded
    }

    /// Constituent sequence numbers in ascending order.
    pub fn constituents(&self) -> &[Seq] {
        &self.constituents
    }

    pub fn degree(&self) -> usize {
        self.constituents.len()
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    /// Oldest constituent.
    pub fn min_seq(&self) -> Seq {
        self.constituents[0]
    }
}

impl fmt::Display for PayloadEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EntryKind::Uncoded => write!(f, "U{}", self.constituents[0]),
            EntryKind::Coded => {
                write!(f, "C{{")?;
                for (k, s) in self.constituents.iter().enumerate() {
                    if k > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{s}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// XOR the given symbols into a single entry.
///
/// A single input yields an uncoded entry. Inputs must have distinct
/// sequence numbers and equal payload lengths.
pub fn xor_combine(symbols: &[&SymbolRecord]) -> Result<PayloadEntry> {
    let (first, rest) = symbols
        .split_first()
        .ok_or_else(|| Error::invalid("cannot combine an empty symbol list"))?;
    if rest.is_empty() {
        return Ok(PayloadEntry::uncoded(first));
    }
    let mut constituents: Vec<Seq> = symbols.iter().map(|s| s.seq).collect();
    constituents.sort_unstable();
    if constituents.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("duplicate sequence number in coded symbol"));
    }
    let mut payload = first.payload.clone();
    for s in rest {
        payload.xor_assign(&s.payload)?;
    }
    Ok(PayloadEntry {
        kind: EntryKind::Coded,
        constituents,
        payload,
    })
}

/// A source packet `p_i`. The first entry always carries `s_i` uncoded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packet {
    pub seq: Seq,
    pub entries: Vec<PayloadEntry>,
}

impl Packet {
    pub fn coded_entries(&self) -> usize {
        self.entries.iter().filter(|e| e.is_coded()).count()
    }
}

/// Field widths of a feedback message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackFormat {
    /// Bits for the sequence number `u`.
    pub l_o: u32,
    /// Bits for the missing count (cumulative) or delivery bitmap.
    pub l_m: u32,
}

impl FeedbackFormat {
    pub fn seq_modulus(&self) -> u64 {
        1u64 << self.l_o
    }

    pub fn max_beta(&self) -> u64 {
        if self.l_m >= 64 {
            u64::MAX
        } else {
            (1u64 << self.l_m) - 1
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackForm {
    Cumulative,
    Bitmap,
}

/// Destination report. `u` is held modulo `2^l_o` as it would be on air.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FeedbackMsg {
    Cumulative { u: u64, beta: u64 },
    Bitmap { u: u64, bits: Vec<bool> },
}

impl FeedbackMsg {
    /// Builds `(u, beta)` with `u` reduced to `l_o` bits and `beta`
    /// saturated at `2^l_m - 1`.
    pub fn cumulative(u: Seq, beta: u64, fmt: FeedbackFormat) -> Self {
        FeedbackMsg::Cumulative {
            u: u % fmt.seq_modulus(),
            beta: beta.min(fmt.max_beta()),
        }
    }

    pub fn bitmap(u: Seq, bits: Vec<bool>, fmt: FeedbackFormat) -> Self {
        debug_assert_eq!(bits.len(), fmt.l_m as usize);
        FeedbackMsg::Bitmap {
            u: u % fmt.seq_modulus(),
            bits,
        }
    }

    pub fn form(&self) -> FeedbackForm {
        match self {
            FeedbackMsg::Cumulative { .. } => FeedbackForm::Cumulative,
            FeedbackMsg::Bitmap { .. } => FeedbackForm::Bitmap,
        }
    }

    /// The on-air (wrapped) value of `u`.
    pub fn wire_u(&self) -> u64 {
        match self {
            FeedbackMsg::Cumulative { u, .. } | FeedbackMsg::Bitmap { u, .. } => *u,
        }
    }

    /// Recovers the full sequence number of `u`, given that it cannot
    /// exceed `newest` and lies within `2^l_o` of it.
    pub fn full_u(&self, newest: Seq, fmt: FeedbackFormat) -> Seq {
        let modulus = fmt.seq_modulus();
        let back = (newest % modulus + modulus - self.wire_u()) % modulus;
        newest.saturating_sub(back)
    }

    pub fn beta(&self) -> Option<u64> {
        match self {
            FeedbackMsg::Cumulative { beta, .. } => Some(*beta),
            FeedbackMsg::Bitmap { .. } => None,
        }
    }

    pub fn bits(&self) -> Option<&[bool]> {
        match self {
            FeedbackMsg::Bitmap { bits, .. } => Some(bits),
            FeedbackMsg::Cumulative { .. } => None,
        }
    }
}

impl fmt::Display for FeedbackMsg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeedbackMsg::Cumulative { u, beta } => write!(f, "u={u};beta={beta}"),
            FeedbackMsg::Bitmap { u, bits } => {
                write!(f, "u={u};bm=")?;
                for b in bits {
                    f.write_str(if *b { "1" } else { "0" })?;
                }
                Ok(())
            }
        }
    }
}
