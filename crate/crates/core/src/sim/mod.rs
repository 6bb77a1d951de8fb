//! Discrete-time simulation of one source, one destination and an optional
//! relay.
//!
//! Timestep `i` runs:
//!
//! 1. expiry advances to `i`; the source generates `s_i` and builds `p_i`
//!    from the feedback (if any) that followed `p_{i-1}`;
//! 2. the uplink decides whether `p_i` reaches the destination;
//! 3. the relay overhears `p_i`, and anything it forwards crosses the
//!    relay link and is decoded in the same step;
//! 4. if `p_i` arrived, the destination emits feedback, which reaches the
//!    source with probability `p_fb` and the relay over its own channel.
//!
//! A symbol counts as delivered if the destination obtains it before it
//! expires. The last `delta` symbols never see a full expiry window and are
//! left out of both `N` and `M`.

mod config;
pub mod oracle;
pub mod sweep;
pub mod trace;

use std::fs::File;
use std::io::BufWriter;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;

pub use config::{RelayLinks, SimConfig, SWEEPABLE};

use crate::channel::{feedback_arrives, Channel};
use crate::error::{Error, Result};
use crate::policies::{make_feedback, SenderState};
use crate::receiver::ReceiverState;
use crate::relay::RelayState;
use crate::rng::{substream, Stream};
use crate::symbol::{Payload, Seq, SymbolRecord};
use trace::{EntryDesc, Origin, Trace, TraceEvent, TraceHeader, TraceRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimCounters {
    pub source_tx: u64,
    pub relay_tx: u64,
    /// XORs spent by the source on coded symbols.
    pub source_xors: u64,
    pub relay_xors: u64,
    pub coded_entries: u64,
    pub feedbacks_emitted: u64,
    pub feedbacks_received: u64,
    pub relay_feedbacks: u64,
    /// Symbols the relay buffered (newly) over the run.
    pub relay_buffered: u64,
}

#[derive(Clone, Debug)]
pub struct SimResult {
    /// Symbols counted (generated with a complete expiry window).
    pub n: u64,
    /// Counted symbols delivered before expiry.
    pub m: u64,
    pub dfr: f64,
    pub generated: u64,
    pub counters: SimCounters,
    pub trace: Option<Trace>,
    /// Recovered payload per sequence number, when requested.
    pub recovered: Option<Vec<Option<Payload>>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub record_trace: bool,
    pub keep_payloads: bool,
}

/// Runs one simulation with synthetic payloads.
pub fn run(config: &SimConfig) -> Result<SimResult> {
    let opts = RunOptions {
        record_trace: config.trace_output.is_some(),
        keep_payloads: false,
    };
    run_with(config, None, opts)
}

/// Runs one simulation. With `payloads`, symbol `i` carries `payloads[i]`
/// and the run length is capped at the number of payloads.
pub fn run_with(
    config: &SimConfig,
    payloads: Option<&[Payload]>,
    opts: RunOptions,
) -> Result<SimResult> {
    config.validate()?;
    let mut n_symbols = config.n_symbols;
    if let Some(p) = payloads {
        if p.is_empty() {
            return Err(Error::invalid("no payloads supplied"));
        }
        if let Some(bad) = p.iter().find(|x| x.len_bits() != config.symbol_bits) {
            return Err(Error::invalid(format!(
                "payload of {} bits, configured symbol_bits = {}",
                bad.len_bits(),
                config.symbol_bits
            )));
        }
        n_symbols = n_symbols.min(p.len() as u64);
    }
    let mut engine = Engine::new(config, opts);
    let mut payload_rng = substream(config.seed, Stream::Payload);
    for i in 0..n_symbols {
        let payload = match payloads {
            Some(p) => p[i as usize].clone(),
            None => {
                let mut bytes = vec![0u8; config.payload_bytes()];
                payload_rng.fill_bytes(&mut bytes);
                Payload::new(bytes)
            }
        };
        engine.step(i, payload)?;
    }
    let result = engine.finish(n_symbols);
    if let (Some(path), Some(trace)) = (&config.trace_output, &result.trace) {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        trace.write_to(BufWriter::new(f)).map_err(|e| Error::io(path, e))?;
    }
    Ok(result)
}

struct RelayNode {
    policy: crate::relay::RelayPolicy,
    state: RelayState,
    uplink: Channel,
    downlink: Channel,
    feedback: Channel,
    rng: ChaCha8Rng,
}

struct Engine<'a> {
    config: &'a SimConfig,
    sender: SenderState,
    receiver: ReceiverState,
    uplink: Channel,
    feedback_rng: ChaCha8Rng,
    coding_rng: ChaCha8Rng,
    relay: Option<RelayNode>,
    delivered: Vec<bool>,
    recovered: Option<Vec<Option<Payload>>>,
    counters: SimCounters,
    trace: Option<Vec<TraceRecord>>,
}

impl<'a> Engine<'a> {
    fn new(config: &'a SimConfig, opts: RunOptions) -> Self {
        let seed = config.seed;
        let relay = config.relay.map(|policy| RelayNode {
            policy,
            state: RelayState::new(config.relay_params()),
            uplink: Channel::new(config.source_relay_channel(), substream(seed, Stream::RelayUplink)),
            downlink: Channel::new(
                config.relay_destination_channel(),
                substream(seed, Stream::RelayDownlink),
            ),
            feedback: Channel::new(
                config.feedback_overhear_channel(),
                substream(seed, Stream::RelayFeedback),
            ),
            rng: substream(seed, Stream::RelayCoding),
        });
        Engine {
            config,
            sender: SenderState::new(config.sender_params()),
            receiver: ReceiverState::new(config.delta),
            uplink: Channel::new(config.uplink, substream(seed, Stream::Uplink)),
            feedback_rng: substream(seed, Stream::Feedback),
            coding_rng: substream(seed, Stream::PolicyCoding),
            relay,
            delivered: Vec::with_capacity(config.n_symbols as usize),
            recovered: opts.keep_payloads.then(Vec::new),
            counters: SimCounters::default(),
            trace: opts.record_trace.then(Vec::new),
        }
    }

    fn log(&mut self, step: Seq, event: TraceEvent) {
        if let Some(t) = &mut self.trace {
            t.push(TraceRecord { step, event });
        }
    }

    fn mark_delivered(&mut self, seqs: &[Seq]) {
        for &s in seqs {
            self.delivered[s as usize] = true;
            if let Some(rec) = &mut self.recovered {
                rec[s as usize] = self.receiver.payload(s).cloned();
            }
        }
    }

    fn step(&mut self, i: Seq, payload: Payload) -> Result<()> {
        self.receiver.advance_to(i);
        self.delivered.push(false);
        if let Some(rec) = &mut self.recovered {
            rec.push(None);
        }
        self.sender.push_symbol(SymbolRecord::new(i, payload))?;
        let pkt = self
            .sender
            .build_packet(self.config.policy, i, &mut self.coding_rng)?;
        self.counters.source_tx += 1;
        let descs: Vec<EntryDesc> = if self.trace.is_some() {
            pkt.entries.iter().map(EntryDesc::from).collect()
        } else {
            Vec::new()
        };
        self.log(i, TraceEvent::SourceTx { entries: descs.clone() });

        let arrived = self.uplink.transmit().delivered();
        if arrived {
            let fresh = self.receiver.receive_packet(&pkt)?;
            self.mark_delivered(&fresh);
            self.log(
                i,
                TraceEvent::DestRx {
                    origin: Origin::Source,
                    entries: descs.clone(),
                    delivered: fresh,
                },
            );
        } else {
            self.log(
                i,
                TraceEvent::DestErased {
                    origin: Origin::Source,
                    entries: Vec::new(),
                },
            );
        }

        if let Some(mut relay) = self.relay.take() {
            let res = self.relay_phase(&mut relay, i, &pkt, &descs);
            self.relay = Some(relay);
            res?;
        }

        if arrived {
            let msg = make_feedback(self.config.policy, &self.receiver, self.config.feedback_format());
            self.counters.feedbacks_emitted += 1;
            let to_sender = feedback_arrives(self.config.p_fb, &mut self.feedback_rng);
            if to_sender {
                self.counters.feedbacks_received += 1;
            }
            let to_relay = self.relay.as_mut().map(|r| {
                let heard = r.feedback.transmit().delivered();
                if heard {
                    r.state.overhear_feedback(&msg, i);
                }
                heard
            });
            if to_relay == Some(true) {
                self.counters.relay_feedbacks += 1;
            }
            if self.trace.is_some() {
                let event = TraceEvent::Feedback {
                    u: msg.full_u(i + 1, self.config.feedback_format()),
                    beta: msg.beta(),
                    bits: msg.bits().map(<[bool]>::to_vec),
                    to_sender,
                    to_relay,
                };
                self.log(i, event);
            }
            if to_sender {
                self.sender.on_feedback(msg, i);
            }
        }
        Ok(())
    }

    fn relay_phase(
        &mut self,
        relay: &mut RelayNode,
        i: Seq,
        pkt: &crate::symbol::Packet,
        descs: &[EntryDesc],
    ) -> Result<()> {
        if relay.uplink.transmit().delivered() {
            let buffered = relay.state.overhear_packet(pkt);
            self.log(
                i,
                TraceEvent::RelayOverheard {
                    entries: descs.to_vec(),
                    buffered,
                },
            );
        } else {
            self.log(i, TraceEvent::RelayMissed);
        }
        let out = relay.state.forward_decision(relay.policy, i, &mut relay.rng)?;
        for entry in out {
            self.counters.relay_tx += 1;
            let desc = EntryDesc::from(&entry);
            self.log(i, TraceEvent::RelayTx { entry: desc.clone() });
            if relay.downlink.transmit().delivered() {
                let fresh = self.receiver.receive_entries(std::slice::from_ref(&entry))?;
                self.mark_delivered(&fresh);
                self.log(
                    i,
                    TraceEvent::DestRx {
                        origin: Origin::Relay,
                        entries: vec![desc],
                        delivered: fresh,
                    },
                );
            } else {
                self.log(
                    i,
                    TraceEvent::DestErased {
                        origin: Origin::Relay,
                        entries: vec![desc],
                    },
                );
            }
        }
        Ok(())
    }

    fn finish(mut self, generated: u64) -> SimResult {
        let counted = if generated > self.config.delta {
            generated - self.config.delta
        } else {
            generated
        };
        let m = self.delivered[..counted as usize].iter().filter(|&&d| d).count() as u64;
        let sc = self.sender.counters();
        self.counters.source_xors = sc.xor_ops;
        self.counters.coded_entries = sc.coded_entries;
        if let Some(r) = &self.relay {
            let rc = r.state.counters();
            self.counters.relay_xors = rc.xor_ops;
            self.counters.relay_buffered = rc.buffered;
        }
        let trace = self.trace.take().map(|records| Trace {
            header: TraceHeader {
                delta: self.config.delta,
                b: self.config.b,
                l_m: self.config.l_m,
                form: self.config.policy.feedback_form(),
            },
            records,
        });
        SimResult {
            n: counted,
            m,
            dfr: if counted == 0 {
                0.0
            } else {
                (counted - m) as f64 / counted as f64
            },
            generated,
            counters: self.counters,
            trace,
            recovered: self.recovered.take(),
        }
    }
}
