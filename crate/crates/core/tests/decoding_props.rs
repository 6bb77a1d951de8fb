mod common;

use std::collections::HashSet;

use fbcoding::channel::ChannelConfig;
use fbcoding::sim::trace::{Origin, TraceEvent};
use fbcoding::symbol::xor_combine;
use fbcoding::{PolicyKind, RelayPolicy, SimConfig, SymbolRecord};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{deliveries, fixpoint_deliveries, gf2_first_known, traced};

/// A later coded entry can unlock an earlier one in the same packet; the
/// single pass discards the earlier entry, repeated passes do not.
#[test]
fn fixpoint_gain_is_small_but_real() {
    let mut single = 0usize;
    let mut fix = 0usize;
    for seed in 1..=10 {
        let cfg = SimConfig {
            n_symbols: 5000,
            seed,
            uplink: ChannelConfig::Bernoulli { p_s: 0.6 },
            ..SimConfig::default()
        };
        let (_, trace) = traced(&cfg);
        single += deliveries(&trace).len();
        fix += fixpoint_deliveries(&trace).len();
    }
    eprintln!("single pass {single}, fixpoint {fix}");
    assert!(fix >= single);
}

#[test]
fn xor_round_trip_hundred_thousand_entries() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..100_000 {
        let degree = rng.gen_range(2..=8);
        let len = rng.gen_range(1..=16);
        let syms: Vec<SymbolRecord> = (0..degree)
            .map(|k| {
                let mut bytes = vec![0u8; len];
                rng.fill(&mut bytes[..]);
                SymbolRecord::new(k as u64 * 3 + 1, bytes)
            })
            .collect();
        let refs: Vec<&SymbolRecord> = syms.iter().collect();
        let entry = xor_combine(&refs).unwrap();
        let hole = rng.gen_range(0..degree);
        let mut acc = entry.payload().clone();
        for (k, s) in syms.iter().enumerate() {
            if k != hole {
                acc.xor_assign(&s.payload).unwrap();
            }
        }
        assert_eq!(acc, syms[hole].payload);
    }
}

fn config_strategy() -> impl Strategy<Value = SimConfig> {
    (
        prop::sample::select(PolicyKind::ALL.to_vec()),
        prop::option::of(prop::sample::select(vec![RelayPolicy::UcR, RelayPolicy::IwcR])),
        0.3f64..1.0,
        0.0f64..=1.0,
        2usize..=6,
        1usize..=5,
        4u64..=20,
        any::<u64>(),
        any::<bool>(),
    )
        .prop_map(|(policy, relay, p_s, p_fb, b, d_nf, delta, seed, ge)| SimConfig {
            policy,
            relay,
            p_fb,
            b,
            d_nf,
            delta,
            seed,
            n_symbols: 400,
            uplink: if ge {
                ChannelConfig::GilbertElliott { p_gb: 0.25, p_bg: p_s }
            } else {
                ChannelConfig::Bernoulli { p_s }
            },
            ..SimConfig::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fixpoint_decoding_is_a_superset(cfg in config_strategy()) {
        let (_, trace) = traced(&cfg);
        let fix: HashSet<u64> = fixpoint_deliveries(&trace).into_iter().map(|(_, s)| s).collect();
        for (_, s) in deliveries(&trace) {
            prop_assert!(fix.contains(&s));
        }
    }

    #[test]
    fn gaussian_elimination_is_a_superset(cfg in config_strategy()) {
        let (_, trace) = traced(&cfg);
        let known = gf2_first_known(&trace, cfg.n_symbols as usize);
        for (step, seq) in deliveries(&trace) {
            let first = known.get(&seq).copied();
            prop_assert!(first.is_some_and(|t| t <= step), "s_{} at {} but elimination {:?}", seq, step, first);
        }
    }

    #[test]
    fn deliveries_are_generated_unique_and_accounted(cfg in config_strategy()) {
        let (res, trace) = traced(&cfg);
        let mut seen = HashSet::new();
        for r in &trace.records {
            if let TraceEvent::DestRx { origin, entries, delivered } = &r.event {
                for &s in delivered {
                    prop_assert!(s < res.generated && s <= r.step);
                    prop_assert!(seen.insert(s), "s_{} delivered twice", s);
                    // each delivery is explained by an entry of this reception
                    prop_assert!(entries.iter().any(|e| e.seqs.contains(&s)));
                }
                if *origin == Origin::Relay {
                    prop_assert_eq!(entries.len(), 1);
                }
            }
        }
    }
}
