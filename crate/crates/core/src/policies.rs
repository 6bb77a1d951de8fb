//! Source packet construction for RR, WC, IWC and IWC-MF, and the
//! destination's feedback generator.
//!
//! Every packet `p_i` starts with the fresh symbol `s_i`. What fills the
//! remaining `b - 1` slots depends on whether feedback arrived after
//! `p_{i-1}`:
//!
//! * **WC / IWC with feedback `(u, beta)`**: `s_u`, then nothing if
//!   `beta = 1`; the whole window `s_{u+1}..s_{i-1}` uncoded if it fits; its
//!   oldest symbols uncoded if every one is missing; otherwise coded symbols
//!   whose degree comes from the exact argmax (WC) or the closed form (IWC).
//! * **IWC-MF with feedback `(u, bitmap)`**: `s_u` and then the symbols the
//!   bitmap reports missing, oldest first. Never codes.
//! * **No feedback**: the window `w = s_{u'}..s_{i-1}` with
//!   `u' = max(oldest unexpired, last reported u)` goes out uncoded if it
//!   fits, otherwise as `b - 1` coded symbols (random degree for WC, `d_nf`
//!   for IWC and IWC-MF).
//! * **RR**: `s_u` when known, then the most recent unacknowledged symbols.
//!
//! If the reported `s_u` expired between feedback and packet construction,
//! it is skipped and its slot is given to the window.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::degree::{self, DegreeContext};
use crate::error::{Error, Result};
use crate::receiver::ReceiverState;
use crate::symbol::{
    xor_combine, FeedbackForm, FeedbackFormat, FeedbackMsg, Packet, PayloadEntry, Seq,
    SymbolRecord,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "RR")]
    Rr,
    #[serde(rename = "WC")]
    Wc,
    #[serde(rename = "IWC")]
    Iwc,
    #[serde(rename = "IWC-MF")]
    IwcMf,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::Rr, PolicyKind::Wc, PolicyKind::Iwc, PolicyKind::IwcMf];

    pub fn feedback_form(self) -> FeedbackForm {
        match self {
            PolicyKind::IwcMf => FeedbackForm::Bitmap,
            _ => FeedbackForm::Cumulative,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Rr => "RR",
            PolicyKind::Wc => "WC",
            PolicyKind::Iwc => "IWC",
            PolicyKind::IwcMf => "IWC-MF",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("policy", format!("unknown policy `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SenderParams {
    pub delta: u64,
    /// Symbols per packet.
    pub b: usize,
    pub d_nf: usize,
    pub feedback: FeedbackFormat,
    /// IWC-MF: drop bitmap-confirmed symbols from the no-feedback coding set.
    pub mf_exclude_delivered: bool,
    /// IWC-MF: fill slots left after the known-missing symbols with symbols
    /// whose status the bitmap does not cover.
    pub mf_aggressive_fill: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct ReceivedFeedback {
    msg: FeedbackMsg,
    /// Timestep of the source packet the feedback followed.
    step: Seq,
    u: Seq,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SenderCounters {
    /// Two-input XOR operations spent building coded symbols.
    pub xor_ops: u64,
    pub coded_entries: u64,
    pub feedbacks: u64,
}

#[derive(Clone, Debug)]
pub struct SenderState {
    params: SenderParams,
    log: VecDeque<SymbolRecord>,
    last_feedback: Option<ReceivedFeedback>,
    counters: SenderCounters,
}

impl SenderState {
    pub fn new(params: SenderParams) -> Self {
        SenderState {
            params,
            log: VecDeque::with_capacity(params.delta as usize + 2),
            last_feedback: None,
            counters: SenderCounters::default(),
        }
    }

    pub fn params(&self) -> &SenderParams {
        &self.params
    }

    pub fn counters(&self) -> SenderCounters {
        self.counters
    }

    /// Appends the freshly generated symbol and forgets expired ones.
    pub fn push_symbol(&mut self, sym: SymbolRecord) -> Result<()> {
        if let Some(last) = self.log.back() {
            if sym.seq != last.seq + 1 {
                return Err(Error::invalid(format!(
                    "symbol {} does not follow {}",
                    sym.seq, last.seq
                )));
            }
        }
        let oldest = sym.seq.saturating_sub(self.params.delta);
        self.log.push_back(sym);
        while self.log.front().is_some_and(|s| s.seq < oldest) {
            self.log.pop_front();
        }
        Ok(())
    }

    pub fn symbol(&self, seq: Seq) -> Option<&SymbolRecord> {
        let first = self.log.front()?.seq;
        self.log.get(seq.checked_sub(first)? as usize)
    }

    /// Records a feedback that followed the packet sent at `step`.
    pub fn on_feedback(&mut self, msg: FeedbackMsg, step: Seq) {
        let u = msg.full_u(step + 1, self.params.feedback);
        self.counters.feedbacks += 1;
        self.last_feedback = Some(ReceivedFeedback { msg, step, u });
    }

    /// `u` of the most recent feedback, if any ever arrived.
    pub fn last_reported_u(&self) -> Option<Seq> {
        self.last_feedback.as_ref().map(|f| f.u)
    }

    pub fn build_packet<R: Rng + ?Sized>(
        &mut self,
        policy: PolicyKind,
        i: Seq,
        rng: &mut R,
    ) -> Result<Packet> {
        let fresh = self
            .symbol(i)
            .ok_or_else(|| Error::invalid(format!("s_{i} was never pushed")))?;
        let mut b = PacketBuilder {
            entries: vec![PayloadEntry::uncoded(fresh)],
            capacity: self.params.b.max(1),
        };
        let feedback = self
            .last_feedback
            .clone()
            .filter(|f| f.step + 1 == i);
        match (policy, feedback) {
            (PolicyKind::Rr, fb) => self.repetition(&mut b, i, fb.as_ref()),
            (PolicyKind::Wc | PolicyKind::Iwc, Some(fb)) => {
                self.windowed(&mut b, policy, i, &fb, rng)?
            }
            (PolicyKind::IwcMf, Some(fb)) => self.modified_feedback(&mut b, i, &fb),
            (_, None) => self.no_feedback(&mut b, policy, i, rng)?,
        }
        Ok(Packet {
            seq: i,
            entries: b.entries,
        })
    }

    fn oldest_unexpired(&self, i: Seq) -> Seq {
        i.saturating_sub(self.params.delta)
    }

    fn uncoded(&self, seq: Seq) -> PayloadEntry {
        PayloadEntry::uncoded(self.symbol(seq).expect("unexpired symbol is logged"))
    }

    /// Includes `s_u` when it is older than `s_i` and still unexpired.
    /// Returns whether the feedback still points inside the window.
    fn push_oldest_missing(&self, b: &mut PacketBuilder, i: Seq, u: Seq) -> bool {
        if u >= i {
            return false;
        }
        if u >= self.oldest_unexpired(i) && b.has_room() {
            b.push(self.uncoded(u));
        }
        true
    }

    fn windowed<R: Rng + ?Sized>(
        &mut self,
        b: &mut PacketBuilder,
        policy: PolicyKind,
        i: Seq,
        fb: &ReceivedFeedback,
        rng: &mut R,
    ) -> Result<()> {
        let u = fb.u;
        let beta = fb.msg.beta().unwrap_or(0);
        if !self.push_oldest_missing(b, i, u) || beta <= 1 {
            return Ok(());
        }
        let window: Vec<Seq> = (u + 1..i).collect();
        let gap = i - u;
        if window.len() <= b.room() {
            for &s in &window {
                b.push(self.uncoded(s));
            }
        } else if beta >= gap {
            for &s in window.iter().take(b.room()) {
                b.push(self.uncoded(s));
            }
        } else {
            let ctx = DegreeContext::new(gap, beta)?;
            let d = match policy {
                PolicyKind::Wc => degree::optimal_degree_bruteforce(ctx),
                _ => degree::optimal_degree_closed(ctx),
            } as usize;
            while b.has_room() {
                let e = self.coded(&window, d, rng)?;
                b.push(e);
            }
        }
        Ok(())
    }

    fn modified_feedback(&self, b: &mut PacketBuilder, i: Seq, fb: &ReceivedFeedback) {
        let u = fb.u;
        if !self.push_oldest_missing(b, i, u) {
            return;
        }
        let oldest = self.oldest_unexpired(i);
        let bits = fb.msg.bits().unwrap_or(&[]);
        for (k, &delivered) in bits.iter().enumerate() {
            let seq = u + 1 + k as u64;
            if seq >= i || !b.has_room() {
                break;
            }
            if !delivered && seq >= oldest {
                b.push(self.uncoded(seq));
            }
        }
        if self.params.mf_aggressive_fill {
            let first_unknown = (u + 1 + bits.len() as u64).max(oldest);
            for seq in first_unknown..i {
                if !b.has_room() {
                    break;
                }
                b.push(self.uncoded(seq));
            }
        }
    }

    fn no_feedback<R: Rng + ?Sized>(
        &mut self,
        b: &mut PacketBuilder,
        policy: PolicyKind,
        i: Seq,
        rng: &mut R,
    ) -> Result<()> {
        let start = self.no_feedback_start(i);
        let mut window: Vec<Seq> = (start..i).collect();
        if policy == PolicyKind::IwcMf && self.params.mf_exclude_delivered {
            if let Some(fb) = &self.last_feedback {
                if let Some(bits) = fb.msg.bits() {
                    window.retain(|&s| {
                        let known_delivered = s > fb.u
                            && s <= fb.step
                            && bits.get((s - fb.u - 1) as usize).copied().unwrap_or(false);
                        !known_delivered
                    });
                }
            }
        }
        if window.is_empty() {
            return Ok(());
        }
        if window.len() <= b.room() {
            for &s in &window {
                b.push(self.uncoded(s));
            }
            return Ok(());
        }
        while b.has_room() {
            let d = degree::no_feedback_degree(policy, window.len(), self.params.d_nf, rng);
            let e = self.coded(&window, d, rng)?;
            b.push(e);
        }
        Ok(())
    }

    /// `u' = max(oldest unexpired, last reported u)`.
    fn no_feedback_start(&self, i: Seq) -> Seq {
        let u0 = self.oldest_unexpired(i);
        self.last_reported_u().map_or(u0, |ul| ul.max(u0))
    }

    fn repetition(&self, b: &mut PacketBuilder, i: Seq, fb: Option<&ReceivedFeedback>) {
        let mut skip = None;
        if let Some(fb) = fb {
            if !self.push_oldest_missing(b, i, fb.u) {
                return;
            }
            skip = Some(fb.u);
        }
        let start = self.no_feedback_start(i);
        for seq in (start..i).rev() {
            if !b.has_room() {
                break;
            }
            if Some(seq) != skip {
                b.push(self.uncoded(seq));
            }
        }
    }

    fn coded<R: Rng + ?Sized>(
        &mut self,
        coding_set: &[Seq],
        d: usize,
        rng: &mut R,
    ) -> Result<PayloadEntry> {
        let d = d.clamp(1, coding_set.len());
        let picks = rand::seq::index::sample(rng, coding_set.len(), d);
        let symbols: Vec<&SymbolRecord> = picks
            .iter()
            .map(|k| self.symbol(coding_set[k]).expect("coding set is unexpired"))
            .collect();
        let entry = xor_combine(&symbols)?;
        if entry.is_coded() {
            self.counters.xor_ops += (d - 1) as u64;
            self.counters.coded_entries += 1;
        }
        Ok(entry)
    }
}

struct PacketBuilder {
    entries: Vec<PayloadEntry>,
    capacity: usize,
}

impl PacketBuilder {
    fn room(&self) -> usize {
        self.capacity - self.entries.len()
    }

    fn has_room(&self) -> bool {
        self.room() > 0
    }

    fn push(&mut self, e: PayloadEntry) {
        debug_assert!(self.has_room());
        self.entries.push(e);
    }
}

/// Destination report after a received source packet: `(u, beta)` for RR,
/// WC and IWC, `(u, bitmap)` for IWC-MF.
pub fn make_feedback(policy: PolicyKind, state: &ReceiverState, fmt: FeedbackFormat) -> FeedbackMsg {
    let (u, beta) = state.oldest_undelivered();
    match policy.feedback_form() {
        FeedbackForm::Cumulative => FeedbackMsg::cumulative(u, beta, fmt),
        FeedbackForm::Bitmap => {
            FeedbackMsg::bitmap(u, state.delivery_bitmap(u, fmt.l_m as usize), fmt)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::EntryKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FMT: FeedbackFormat = FeedbackFormat { l_o: 17, l_m: 4 };

    fn params(b: usize) -> SenderParams {
        SenderParams {
            delta: 16,
            b,
            d_nf: 2,
            feedback: FMT,
            mf_exclude_delivered: true,
            mf_aggressive_fill: false,
        }
    }

    fn sender_up_to(b: usize, i: Seq) -> SenderState {
        let mut s = SenderState::new(params(b));
        for seq in 0..=i {
            s.push_symbol(SymbolRecord::new(seq, vec![seq as u8, (seq >> 8) as u8]))
                .unwrap();
        }
        s
    }

    fn describe(p: &Packet) -> Vec<String> {
        p.entries.iter().map(|e| e.to_string()).collect()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn feedback_with_nothing_missing_sends_only_fresh() {
        for policy in PolicyKind::ALL {
            let mut s = sender_up_to(3, 20);
            let msg = match policy.feedback_form() {
                FeedbackForm::Cumulative => FeedbackMsg::cumulative(20, 0, FMT),
                FeedbackForm::Bitmap => FeedbackMsg::bitmap(20, vec![true; 4], FMT),
            };
            s.on_feedback(msg, 19);
            let p = s.build_packet(policy, 20, &mut rng()).unwrap();
            assert_eq!(describe(&p), vec!["U20"], "{policy}");
        }
    }

    #[test]
    fn iwc_codes_with_closed_form_degree() {
        let mut s = sender_up_to(3, 20);
        s.on_feedback(FeedbackMsg::cumulative(10, 3, FMT), 19);
        let p = s.build_packet(PolicyKind::Iwc, 20, &mut rng()).unwrap();
        assert_eq!(p.entries.len(), 3);
        assert_eq!(p.entries[1].to_string(), "U10");
        let c = &p.entries[2];
        assert_eq!(c.kind(), EntryKind::Coded);
        assert_eq!(c.degree(), 5);
        assert!(c.constituents().iter().all(|&s| (11..20).contains(&s)));
    }

    #[test]
    fn wc_codes_with_exact_argmax_degree() {
        let mut s = sender_up_to(3, 20);
        s.on_feedback(FeedbackMsg::cumulative(10, 3, FMT), 19);
        let p = s.build_packet(PolicyKind::Wc, 20, &mut rng()).unwrap();
        assert_eq!(p.entries[2].degree(), 3);
    }

    #[test]
    fn beta_one_stops_after_oldest() {
        let mut s = sender_up_to(4, 20);
        s.on_feedback(FeedbackMsg::cumulative(15, 1, FMT), 19);
        let p = s.build_packet(PolicyKind::Iwc, 20, &mut rng()).unwrap();
        assert_eq!(describe(&p), vec!["U20", "U15"]);
    }

    #[test]
    fn small_window_sent_uncoded() {
        let mut s = sender_up_to(4, 20);
        s.on_feedback(FeedbackMsg::cumulative(17, 2, FMT), 19);
        let p = s.build_packet(PolicyKind::Wc, 20, &mut rng()).unwrap();
        assert_eq!(describe(&p), vec!["U20", "U17", "U18", "U19"]);
    }

    #[test]
    fn all_missing_sends_oldest() {
        let mut s = sender_up_to(4, 20);
        s.on_feedback(FeedbackMsg::cumulative(12, 8, FMT), 19);
        let p = s.build_packet(PolicyKind::Iwc, 20, &mut rng()).unwrap();
        assert_eq!(describe(&p), vec!["U20", "U12", "U13", "U14"]);
    }

    #[test]
    fn iwc_mf_sends_bitmap_zeros_oldest_first() {
        let mut s = sender_up_to(4, 11);
        s.on_feedback(FeedbackMsg::bitmap(6, vec![true, false, true, false], FMT), 10);
        let p = s.build_packet(PolicyKind::IwcMf, 11, &mut rng()).unwrap();
        assert_eq!(describe(&p), vec!["U11", "U6", "U8", "U10"]);
    }

    #[test]
    fn iwc_mf_leaves_unused_capacity_empty() {
        let mut s = sender_up_to(5, 20);
        s.on_feedback(FeedbackMsg::bitmap(10, vec![true, true, false, true], FMT), 19);
        let p = s.build_packet(PolicyKind::IwcMf, 20, &mut rng()).unwrap();
        assert_eq!(describe(&p), vec!["U20", "U10", "U13"]);
    }

    #[test]
    fn iwc_mf_aggressive_fill_uses_unknown_symbols() {
        let mut s = sender_up_to(5, 20);
        s.params.mf_aggressive_fill = true;
        s.on_feedback(FeedbackMsg::bitmap(10, vec![true, true, false, true], FMT), 19);
        let p = s.build_packet(PolicyKind::IwcMf, 20, &mut rng()).unwrap();
        assert_eq!(describe(&p), vec!["U20", "U10", "U13", "U15", "U16"]);
    }

    #[test]
    fn early_packets_carry_whole_history() {
        for policy in PolicyKind::ALL {
            let mut s = SenderState::new(params(4));
            for i in 0..4 {
                s.push_symbol(SymbolRecord::new(i, vec![i as u8])).unwrap();
                let p = s.build_packet(policy, i, &mut rng()).unwrap();
                assert_eq!(p.entries.len() as u64, i + 1, "{policy}");
                assert!(p.entries.iter().all(|e| !e.is_coded()));
            }
        }
    }

    #[test]
    fn no_feedback_codes_from_window() {
        let mut s = sender_up_to(3, 20);
        let p = s.build_packet(PolicyKind::Iwc, 20, &mut rng()).unwrap();
        assert_eq!(p.entries.len(), 3);
        for e in &p.entries[1..] {
            assert_eq!(e.degree(), 2);
            assert!(e.constituents().iter().all(|&s| (4..20).contains(&s)));
        }
        assert_eq!(s.counters().xor_ops, 2);
    }

    #[test]
    fn no_feedback_window_starts_at_last_u() {
        let mut s = sender_up_to(3, 20);
        // feedback after p_18 arrived, the one after p_19 did not
        s.on_feedback(FeedbackMsg::cumulative(18, 2, FMT), 18);
        let p = s.build_packet(PolicyKind::Iwc, 20, &mut rng()).unwrap();
        assert_eq!(describe(&p), vec!["U20", "U18", "U19"]);
    }

    #[test]
    fn iwc_mf_no_feedback_excludes_confirmed() {
        let mut s = sender_up_to(3, 20);
        // feedback after p_19 lost; the one after p_18 said 16 missing, 17/18 delivered
        s.on_feedback(FeedbackMsg::bitmap(16, vec![true, true, true, true], FMT), 18);
        let p = s.build_packet(PolicyKind::IwcMf, 20, &mut rng()).unwrap();
        // window {16..19} minus {17, 18}; bit for 19 and 20 lies beyond step 18 and is ignored
        assert_eq!(describe(&p), vec!["U20", "U16", "U19"]);
    }

    #[test]
    fn rr_with_feedback_adds_recent() {
        let mut s = sender_up_to(4, 20);
        s.on_feedback(FeedbackMsg::cumulative(12, 5, FMT), 19);
        let p = s.build_packet(PolicyKind::Rr, 20, &mut rng()).unwrap();
        assert_eq!(describe(&p), vec!["U20", "U12", "U19", "U18"]);
    }

    #[test]
    fn rr_without_feedback_most_recent_first() {
        let mut s = sender_up_to(3, 20);
        let p = s.build_packet(PolicyKind::Rr, 20, &mut rng()).unwrap();
        assert_eq!(describe(&p), vec!["U20", "U19", "U18"]);
        assert_eq!(s.counters().xor_ops, 0);
    }

    #[test]
    fn expired_oldest_is_skipped() {
        // feedback after p_19 names s_3, which expires at time 20 (window 4..=20)
        let mut s = sender_up_to(3, 20);
        s.on_feedback(FeedbackMsg::cumulative(3, 15, FMT), 19);
        for seed in 0..20 {
            let p = s.build_packet(PolicyKind::Iwc, 20, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(p.entries[0].to_string(), "U20");
            assert!(p.entries.iter().flat_map(|e| e.constituents()).all(|&q| (4..=20).contains(&q)));
        }
    }

    #[test]
    fn b_of_one_sends_only_fresh() {
        for policy in PolicyKind::ALL {
            let mut s = sender_up_to(1, 20);
            let p = s.build_packet(policy, 20, &mut rng()).unwrap();
            assert_eq!(describe(&p), vec!["U20"]);
        }
    }

    #[test]
    fn feedback_builder_forms() {
        let mut r = ReceiverState::new(5);
        r.advance_to(9);
        let entries: Vec<_> = [4u64, 5, 7, 9]
            .iter()
            .map(|&s| PayloadEntry::uncoded(&SymbolRecord::new(s, vec![0])))
            .collect();
        r.receive_entries(&entries).unwrap();
        assert_eq!(make_feedback(PolicyKind::Iwc, &r, FMT), FeedbackMsg::cumulative(6, 2, FMT));
        assert_eq!(
            make_feedback(PolicyKind::IwcMf, &r, FMT),
            FeedbackMsg::bitmap(6, vec![true, false, true, true], FMT)
        );
    }

    #[test]
    fn feedback_when_fully_delivered() {
        let mut r = ReceiverState::new(5);
        r.advance_to(3);
        let entries: Vec<_> = (0..=3)
            .map(|s| PayloadEntry::uncoded(&SymbolRecord::new(s, vec![0])))
            .collect();
        r.receive_entries(&entries).unwrap();
        assert_eq!(make_feedback(PolicyKind::Wc, &r, FMT), FeedbackMsg::cumulative(4, 0, FMT));
        assert_eq!(
            make_feedback(PolicyKind::IwcMf, &r, FMT),
            FeedbackMsg::bitmap(4, vec![true; 4], FMT)
        );
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>().unwrap(), p);
        }
        assert!("XYZ".parse::<PolicyKind>().is_err());
    }
}
