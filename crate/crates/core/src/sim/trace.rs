//! Per-step event log of a run.
//!
//! The text form is one tab-separated record per line:
//!
//! ```text
//! step  actor  event  entries  delta
//! ```
//!
//! | actor   | event          | entries                      | delta                          |
//! |---------|----------------|------------------------------|--------------------------------|
//! | `src`   | `tx`           | packet entries               | `-`                            |
//! | `dst`   | `rx`           | entries received from source | newly delivered, `+a,+b` or `-`|
//! | `dst`   | `erased`       | `-`                          | `-`                            |
//! | `relay` | `overheard`    | packet entries               | newly buffered `+a` or `-`     |
//! | `relay` | `missed`       | `-`                          | `-`                            |
//! | `relay` | `tx`           | one relay entry              | `-`                            |
//! | `dst`   | `relay-rx`     | the relay entry              | newly delivered                |
//! | `dst`   | `relay-erased` | the relay entry              | `-`                            |
//! | `dst`   | `fb`           | `u=6;beta=2` or `u=6;bm=1010`| `sender=1;relay=0` (`relay=-` without relay) |
//!
//! Entries are comma separated: `U12` is an uncoded symbol, `C{3 5 9}` a
//! coded one. `u` is written as a full sequence number. The file starts with
//! one `#` header line carrying the run parameters needed to replay it.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::symbol::{FeedbackForm, PayloadEntry, Seq};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntryDesc {
    pub coded: bool,
    pub seqs: Vec<Seq>,
}

impl From<&PayloadEntry> for EntryDesc {
    fn from(e: &PayloadEntry) -> Self {
        EntryDesc {
            coded: e.is_coded(),
            seqs: e.constituents().to_vec(),
        }
    }
}

impl fmt::Display for EntryDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coded {
            let inner: Vec<String> = self.seqs.iter().map(|s| s.to_string()).collect();
            write!(f, "C{{{}}}", inner.join(" "))
        } else {
            write!(f, "U{}", self.seqs[0])
        }
    }
}

impl FromStr for EntryDesc {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(rest) = s.strip_prefix('U') {
            let seq = rest.parse().map_err(|_| format!("bad entry `{s}`"))?;
            Ok(EntryDesc {
                coded: false,
                seqs: vec![seq],
            })
        } else if let Some(inner) = s.strip_prefix("C{").and_then(|r| r.strip_suffix('}')) {
            let seqs = inner
                .split(' ')
                .map(|t| t.parse().map_err(|_| format!("bad entry `{s}`")))
                .collect::<std::result::Result<Vec<Seq>, String>>()?;
            Ok(EntryDesc { coded: true, seqs })
        } else {
            Err(format!("bad entry `{s}`"))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Source,
    Relay,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    SourceTx { entries: Vec<EntryDesc> },
    DestRx { origin: Origin, entries: Vec<EntryDesc>, delivered: Vec<Seq> },
    DestErased { origin: Origin, entries: Vec<EntryDesc> },
    RelayOverheard { entries: Vec<EntryDesc>, buffered: Vec<Seq> },
    RelayMissed,
    RelayTx { entry: EntryDesc },
    Feedback {
        u: Seq,
        beta: Option<u64>,
        bits: Option<Vec<bool>>,
        to_sender: bool,
        to_relay: Option<bool>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub step: Seq,
    pub event: TraceEvent,
}

/// Run parameters a replay needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceHeader {
    pub delta: u64,
    pub b: usize,
    pub l_m: u32,
    pub form: FeedbackForm,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

fn join_entries(entries: &[EntryDesc]) -> String {
    if entries.is_empty() {
        return "-".into();
    }
    entries.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
}

fn join_delta(seqs: &[Seq]) -> String {
    if seqs.is_empty() {
        return "-".into();
    }
    seqs.iter().map(|s| format!("+{s}")).collect::<Vec<_>>().join(",")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let step = self.step;
        match &self.event {
            TraceEvent::SourceTx { entries } => {
                write!(f, "{step}\tsrc\ttx\t{}\t-", join_entries(entries))
            }
            TraceEvent::DestRx { origin, entries, delivered } => {
                let ev = match origin {
                    Origin::Source => "rx",
                    Origin::Relay => "relay-rx",
                };
                write!(f, "{step}\tdst\t{ev}\t{}\t{}", join_entries(entries), join_delta(delivered))
            }
            TraceEvent::DestErased { origin, entries } => {
                let ev = match origin {
                    Origin::Source => "erased",
                    Origin::Relay => "relay-erased",
                };
                write!(f, "{step}\tdst\t{ev}\t{}\t-", join_entries(entries))
            }
            TraceEvent::RelayOverheard { entries, buffered } => {
                write!(f, "{step}\trelay\toverheard\t{}\t{}", join_entries(entries), join_delta(buffered))
            }
            TraceEvent::RelayMissed => write!(f, "{step}\trelay\tmissed\t-\t-"),
            TraceEvent::RelayTx { entry } => write!(f, "{step}\trelay\ttx\t{entry}\t-"),
            TraceEvent::Feedback { u, beta, bits, to_sender, to_relay } => {
                write!(f, "{step}\tdst\tfb\tu={u};")?;
                match (beta, bits) {
                    (Some(beta), _) => write!(f, "beta={beta}")?,
                    (None, Some(bits)) => {
                        f.write_str("bm=")?;
                        for b in bits {
                            f.write_str(flag(*b))?;
                        }
                    }
                    (None, None) => f.write_str("beta=0")?,
                }
                let relay = to_relay.map_or("-", flag);
                write!(f, "\tsender={};relay={relay}", flag(*to_sender))
            }
        }
    }
}

fn parse_entries(s: &str) -> std::result::Result<Vec<EntryDesc>, String> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',').map(str::parse).collect()
}

fn parse_delta(s: &str) -> std::result::Result<Vec<Seq>, String> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.strip_prefix('+')
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| format!("bad delta `{t}`"))
        })
        .collect()
}

fn kv<'a>(field: &'a str, key: &str) -> std::result::Result<&'a str, String> {
    field
        .split(';')
        .find_map(|p| p.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| format!("missing `{key}` in `{field}`"))
}

impl FromStr for TraceRecord {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, String> {
        let cols: Vec<&str> = line.split('\t').collect();
        let [step, actor, event, entries, delta] = cols[..] else {
            return Err(format!("expected 5 tab-separated fields, got {}", cols.len()));
        };
        let step: Seq = step.parse().map_err(|_| format!("bad step `{step}`"))?;
        let event = match (actor, event) {
            ("src", "tx") => TraceEvent::SourceTx { entries: parse_entries(entries)? },
            ("dst", "rx") | ("dst", "relay-rx") => TraceEvent::DestRx {
                origin: if event == "rx" { Origin::Source } else { Origin::Relay },
                entries: parse_entries(entries)?,
                delivered: parse_delta(delta)?,
            },
            ("dst", "erased") | ("dst", "relay-erased") => TraceEvent::DestErased {
                origin: if event == "erased" { Origin::Source } else { Origin::Relay },
                entries: parse_entries(entries)?,
            },
            ("relay", "overheard") => TraceEvent::RelayOverheard {
                entries: parse_entries(entries)?,
                buffered: parse_delta(delta)?,
            },
            ("relay", "missed") => TraceEvent::RelayMissed,
            ("relay", "tx") => {
                let mut es = parse_entries(entries)?;
                if es.len() != 1 {
                    return Err("relay tx carries exactly one entry".into());
                }
                TraceEvent::RelayTx { entry: es.remove(0) }
            }
            ("dst", "fb") => {
                let u = kv(entries, "u")?.parse().map_err(|_| "bad u".to_string())?;
                let (beta, bits) = match kv(entries, "beta") {
                    Ok(b) => (Some(b.parse().map_err(|_| "bad beta".to_string())?), None),
                    Err(_) => {
                        let bm = kv(entries, "bm")?;
                        (None, Some(bm.chars().map(|c| c == '1').collect()))
                    }
                };
                let to_sender = kv(delta, "sender")? == "1";
                let to_relay = match kv(delta, "relay")? {
                    "-" => None,
                    v => Some(v == "1"),
                };
                TraceEvent::Feedback { u, beta, bits, to_sender, to_relay }
            }
            _ => return Err(format!("unknown record kind `{actor} {event}`")),
        };
        Ok(TraceRecord { step, event })
    }
}

impl Trace {
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let h = &self.header;
        let form = match h.form {
            FeedbackForm::Cumulative => "cumulative",
            FeedbackForm::Bitmap => "bitmap",
        };
        writeln!(w, "# fbcoding-trace v1 delta={} b={} l_m={} feedback={form}", h.delta, h.b, h.l_m)?;
        for r in &self.records {
            writeln!(w, "{r}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let parse_err = |line: u64, reason: String| Error::Parse {
            path: "<trace>".into(),
            line,
            reason,
        };
        let mut lines = r.lines();
        let head = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty trace".into()))?
            .map_err(|e| parse_err(1, e.to_string()))?;
        let field = |key: &str| -> Result<&str> {
            head.split_whitespace()
                .find_map(|t| t.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| parse_err(1, format!("header lacks `{key}`")))
        };
        let num = |key: &str| -> Result<u64> {
            field(key)?.parse().map_err(|_| parse_err(1, format!("bad `{key}`")))
        };
        let header = TraceHeader {
            delta: num("delta")?,
            b: num("b")? as usize,
            l_m: num("l_m")? as u32,
            form: match field("feedback")? {
                "bitmap" => FeedbackForm::Bitmap,
                _ => FeedbackForm::Cumulative,
            },
        };
        let mut records = Vec::new();
        for (k, line) in lines.enumerate() {
            let lineno = k as u64 + 2;
            let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            records.push(line.parse().map_err(|e| parse_err(lineno, e))?);
        }
        Ok(Trace { header, records })
    }
}
