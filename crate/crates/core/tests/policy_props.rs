mod common;

use fbcoding::policies::make_feedback;
use fbcoding::sim::trace::TraceEvent;
use fbcoding::{
    ChannelConfig, FeedbackFormat, PayloadEntry, PolicyKind, ReceiverState, SenderParams, SenderState, SimConfig,
    SymbolRecord,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::traced;

const FMT: FeedbackFormat = FeedbackFormat { l_o: 17, l_m: 4 };

fn sender(b: usize, delta: u64, upto: u64) -> SenderState {
    let mut s = SenderState::new(SenderParams {
        delta,
        b,
        d_nf: 2,
        feedback: FMT,
        mf_exclude_delivered: true,
        mf_aggressive_fill: false,
    });
    for k in 0..=upto {
        s.push_symbol(SymbolRecord::new(k, vec![k as u8, (k >> 8) as u8])).unwrap();
    }
    s
}

fn labels(entries: &[PayloadEntry]) -> Vec<String> {
    entries.iter().map(|e| e.to_string()).collect()
}

proptest! {
    #[test]
    fn wc_and_iwc_agree_outside_coding(
        b in 1usize..=6,
        delta in 2u64..=20,
        i in 1u64..60,
        lag in 1u64..4,
        mask in prop::collection::vec(any::<bool>(), 60),
        seed: u64,
    ) {
        let fb_step = i.saturating_sub(lag);
        let mut rx = ReceiverState::new(delta);
        rx.advance_to(fb_step);
        let got: Vec<PayloadEntry> = (fb_step.saturating_sub(delta)..=fb_step)
            .filter(|&k| mask[k as usize])
            .map(|k| PayloadEntry::uncoded(&SymbolRecord::new(k, vec![0u8, 0])))
            .collect();
        rx.receive_entries(&got).unwrap();
        let msg = make_feedback(PolicyKind::Iwc, &rx, FMT);

        let mut wc = sender(b, delta, i);
        let mut iwc = sender(b, delta, i);
        wc.on_feedback(msg.clone(), fb_step);
        iwc.on_feedback(msg, fb_step);
        let mut r1 = ChaCha8Rng::seed_from_u64(seed);
        let mut r2 = r1.clone();
        let p1 = wc.build_packet(PolicyKind::Wc, i, &mut r1).unwrap();
        let p2 = iwc.build_packet(PolicyKind::Iwc, i, &mut r2).unwrap();
        let untouched = ChaCha8Rng::seed_from_u64(seed).get_word_pos();
        if r1.get_word_pos() == untouched && r2.get_word_pos() == untouched {
            prop_assert_eq!(labels(&p1.entries), labels(&p2.entries));
        }
    }
}

fn run_cfg(policy: PolicyKind, p_s: f64, p_fb: f64, seed: u64) -> SimConfig {
    SimConfig {
        policy,
        n_symbols: 3000,
        p_fb,
        seed,
        uplink: ChannelConfig::Bernoulli { p_s },
        ..SimConfig::default()
    }
}

#[test]
fn iwc_mf_never_codes_after_feedback() {
    for seed in 1..=4 {
        for p_fb in [0.25, 0.75, 1.0] {
            let (_, trace) = traced(&run_cfg(PolicyKind::IwcMf, 0.6, p_fb, seed));
            let mut fed_back_after = None;
            let mut checked = 0;
            for r in &trace.records {
                match &r.event {
                    TraceEvent::Feedback { to_sender: true, .. } => fed_back_after = Some(r.step),
                    TraceEvent::SourceTx { entries } if fed_back_after == Some(r.step.wrapping_sub(1)) => {
                        checked += 1;
                        assert!(entries.iter().all(|e| !e.coded), "step {}", r.step);
                    }
                    _ => {}
                }
            }
            assert!(checked > 100);
        }
    }
}

#[test]
fn rr_never_xors() {
    for seed in 1..=5 {
        let (res, trace) = traced(&run_cfg(PolicyKind::Rr, 0.5, 0.5, seed));
        assert_eq!(res.counters.source_xors, 0);
        assert_eq!(res.counters.coded_entries, 0);
        assert!(trace.records.iter().all(|r| match &r.event {
            TraceEvent::SourceTx { entries } => entries.iter().all(|e| !e.coded),
            _ => true,
        }));
    }
}

#[test]
fn iwc_mf_xors_less_than_iwc() {
    for seed in 1..=3 {
        let iwc = fbcoding::run(&run_cfg(PolicyKind::Iwc, 0.7, 0.5, seed)).unwrap();
        let mf = fbcoding::run(&run_cfg(PolicyKind::IwcMf, 0.7, 0.5, seed)).unwrap();
        assert!(mf.counters.source_xors < iwc.counters.source_xors);
    }
}

#[test]
fn packets_stay_in_window_and_size() {
    for policy in PolicyKind::ALL {
        for b in [1, 3, 6] {
            let cfg = SimConfig { b, ..run_cfg(policy, 0.55, 0.4, 9) };
            let (_, trace) = traced(&cfg);
            for r in &trace.records {
                if let TraceEvent::SourceTx { entries } = &r.event {
                    assert!(!entries.is_empty() && entries.len() <= b);
                    assert_eq!(entries[0].seqs, vec![r.step]);
                    assert!(!entries[0].coded);
                    let oldest = r.step.saturating_sub(cfg.delta);
                    assert!(entries.iter().flat_map(|e| &e.seqs).all(|&s| s >= oldest && s <= r.step));
                }
            }
        }
    }
}
