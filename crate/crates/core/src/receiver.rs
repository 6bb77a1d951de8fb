//! Destination-side bookkeeping: which unexpired symbols have been
//! delivered, streaming decode of received entries, and the raw material
//! for feedback.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::symbol::{EntryKind, Packet, Payload, PayloadEntry, Seq};

/// Delivered symbols within the unexpired window `[current - delta, current]`.
#[derive(Clone, Debug)]
pub struct ReceiverState {
    delivered: BTreeMap<Seq, Payload>,
    current: Seq,
    delta: u64,
}

impl ReceiverState {
    pub fn new(delta: u64) -> Self {
        ReceiverState {
            delivered: BTreeMap::new(),
            current: 0,
            delta,
        }
    }

    pub fn current(&self) -> Seq {
        self.current
    }

    pub fn delta(&self) -> u64 {
        self.delta
    }

    /// Oldest unexpired sequence number at the current time.
    pub fn window_start(&self) -> Seq {
        self.current.saturating_sub(self.delta)
    }

    pub fn is_expired(&self, seq: Seq) -> bool {
        seq < self.window_start()
    }

    /// Moves the clock forward and drops symbols that expired.
    pub fn advance_to(&mut self, now: Seq) {
        debug_assert!(now >= self.current, "time runs forward");
        self.current = now;
        let start = self.window_start();
        self.delivered = self.delivered.split_off(&start);
    }

    pub fn is_delivered(&self, seq: Seq) -> bool {
        self.delivered.contains_key(&seq)
    }

    pub fn payload(&self, seq: Seq) -> Option<&Payload> {
        self.delivered.get(&seq)
    }

    pub fn delivered_seqs(&self) -> impl Iterator<Item = Seq> + '_ {
        self.delivered.keys().copied()
    }

    /// `(u, beta)`: the oldest unexpired undelivered sequence number and the
    /// number of unexpired undelivered symbols. With nothing missing, `u` is
    /// the next sequence number to be generated and `beta` is zero.
    pub fn oldest_undelivered(&self) -> (Seq, u64) {
        let mut oldest = None;
        let mut missing = 0;
        for seq in self.window_start()..=self.current {
            if !self.delivered.contains_key(&seq) {
                oldest.get_or_insert(seq);
                missing += 1;
            }
        }
        (oldest.unwrap_or(self.current + 1), missing)
    }

    /// Delivery status of `u+1 ..= u+l_m`. Positions after the current time
    /// refer to symbols that do not exist yet and read as delivered.
    pub fn delivery_bitmap(&self, u: Seq, l_m: usize) -> Vec<bool> {
        (1..=l_m as u64)
            .map(|k| {
                let seq = u + k;
                seq > self.current || self.delivered.contains_key(&seq)
            })
            .collect()
    }

    pub fn receive_packet(&mut self, pkt: &Packet) -> Result<Vec<Seq>> {
        self.receive_entries(&pkt.entries)
    }

    /// Single pass over `entries` in order. Uncoded entries deliver their
    /// symbol; a coded entry of degree `d` recovers its one missing
    /// constituent when the other `d-1` are already delivered, and is
    /// dropped otherwise. Returns newly delivered sequence numbers.
    pub fn receive_entries(&mut self, entries: &[PayloadEntry]) -> Result<Vec<Seq>> {
        let mut fresh = Vec::new();
        for entry in entries {
            if let Some(&future) = entry.constituents().iter().find(|&&s| s > self.current) {
                return Err(Error::Protocol {
                    step: self.current,
                    reason: format!("entry {entry} references future symbol {future}"),
                });
            }
            match entry.kind() {
                EntryKind::Uncoded => {
                    let seq = entry.min_seq();
                    if !self.is_expired(seq) && !self.delivered.contains_key(&seq) {
                        self.delivered.insert(seq, entry.payload().clone());
                        fresh.push(seq);
                    }
                }
                EntryKind::Coded => {
                    if let Some(seq) = self.try_recover(entry)? {
                        fresh.push(seq);
                    }
                }
            }
        }
        Ok(fresh)
    }

    fn try_recover(&mut self, entry: &PayloadEntry) -> Result<Option<Seq>> {
        let mut missing = entry
            .constituents()
            .iter()
            .filter(|s| !self.delivered.contains_key(s));
        let target = match (missing.next(), missing.next()) {
            (Some(&t), None) => t,
            _ => return Ok(None),
        };
        if self.is_expired(target) {
            return Ok(None);
        }
        let mut payload = entry.payload().clone();
        for seq in entry.constituents() {
            if *seq != target {
                payload.xor_assign(&self.delivered[seq])?;
            }
        }
        self.delivered.insert(target, payload);
        Ok(Some(target))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{xor_combine, SymbolRecord};

    fn rec(seq: Seq) -> SymbolRecord {
        SymbolRecord::new(seq, vec![seq as u8, 0xA5])
    }

    fn receiver_with(delta: u64, now: Seq, delivered: &[Seq]) -> ReceiverState {
        let mut r = ReceiverState::new(delta);
        r.advance_to(now);
        let entries: Vec<_> = delivered.iter().map(|&s| PayloadEntry::uncoded(&rec(s))).collect();
        r.receive_entries(&entries).unwrap();
        r
    }

    #[test]
    fn oldest_undelivered_partial_window() {
        // delta = 5 puts the window at 4..=9
        let r = receiver_with(5, 9, &[4, 5, 7, 9]);
        assert_eq!(r.oldest_undelivered(), (6, 2));
    }

    #[test]
    fn oldest_undelivered_all_delivered() {
        let r = receiver_with(5, 9, &[4, 5, 6, 7, 8, 9]);
        assert_eq!(r.oldest_undelivered(), (10, 0));
    }

    #[test]
    fn oldest_undelivered_nothing_delivered() {
        let r = receiver_with(16, 9, &[]);
        assert_eq!(r.oldest_undelivered(), (0, 10));
    }

    #[test]
    fn bitmap_examples() {
        let r = receiver_with(16, 10, &[7, 9]);
        assert_eq!(r.delivery_bitmap(6, 4), vec![true, false, true, false]);
        let r = receiver_with(16, 6, &[]);
        assert_eq!(r.delivery_bitmap(6, 4), vec![true; 4]);
        let r = receiver_with(16, 12, &[]);
        assert_eq!(r.delivery_bitmap(6, 4), vec![false; 4]);
    }

    #[test]
    fn coded_recovery_with_two_known() {
        let mut r = receiver_with(16, 3, &[1, 2]);
        let c = xor_combine(&[&rec(1), &rec(2), &rec(3)]).unwrap();
        assert_eq!(r.receive_entries(&[c]).unwrap(), vec![3]);
        assert_eq!(r.payload(3), Some(&rec(3).payload));
    }

    #[test]
    fn coded_entry_discarded_when_two_missing() {
        let mut r = receiver_with(16, 3, &[1]);
        let c = xor_combine(&[&rec(1), &rec(2), &rec(3)]).unwrap();
        assert!(r.receive_entries(&[c]).unwrap().is_empty());
        assert!(!r.is_delivered(2) && !r.is_delivered(3));
    }

    #[test]
    fn in_packet_cascade() {
        let mut r = receiver_with(16, 3, &[1]);
        let c = xor_combine(&[&rec(1), &rec(2), &rec(3)]).unwrap();
        let got = r.receive_entries(&[PayloadEntry::uncoded(&rec(2)), c]).unwrap();
        assert_eq!(got, vec![2, 3]);
    }

    #[test]
    fn duplicates_and_expired_are_noops() {
        let mut r = receiver_with(4, 10, &[8]);
        let got = r
            .receive_entries(&[PayloadEntry::uncoded(&rec(8)), PayloadEntry::uncoded(&rec(5))])
            .unwrap();
        assert!(got.is_empty());
        assert!(!r.is_delivered(5));
    }

    #[test]
    fn future_symbol_is_protocol_error() {
        let mut r = receiver_with(4, 10, &[]);
        let err = r.receive_entries(&[PayloadEntry::uncoded(&rec(11))]).unwrap_err();
        assert!(matches!(err, Error::Protocol { .. }));
    }

    #[test]
    fn advance_prunes_expired() {
        let mut r = receiver_with(4, 6, &[2, 3, 6]);
        r.advance_to(7);
        assert_eq!(r.delivered_seqs().collect::<Vec<_>>(), vec![3, 6]);
    }

    #[test]
    fn expired_target_not_recovered() {
        let mut r = receiver_with(4, 10, &[7]);
        // 5 is expired at time 10 (window 6..=10)
        let c = xor_combine(&[&rec(5), &rec(7)]).unwrap();
        assert!(r.receive_entries(&[c]).unwrap().is_empty());
    }
}
