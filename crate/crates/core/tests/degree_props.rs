use fbcoding::degree::{
    no_feedback_degree, objective, optimal_degree_bruteforce, optimal_degree_closed, DegreeContext,
};
use fbcoding::PolicyKind;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn curve(ctx: DegreeContext) -> Vec<BigRational> {
    (1..=ctx.max_degree()).map(|d| objective(ctx, d).unwrap()).collect()
}

fn ctx_strategy() -> impl Strategy<Value = DegreeContext> {
    (3u64..=64).prop_flat_map(|gap| (Just(gap), 2..gap)).prop_map(|(g, b)| DegreeContext::new(g, b).unwrap())
}

#[test]
fn objective_is_unimodal_over_whole_grid() {
    for gap in 3..=64 {
        for beta in 2..gap {
            let f = curve(DegreeContext::new(gap, beta).unwrap());
            let peak = f.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).unwrap().0;
            assert!(f[..=peak].windows(2).all(|w| w[0] <= w[1]), "rise ({gap},{beta})");
            assert!(f[peak..].windows(2).all(|w| w[0] >= w[1]), "fall ({gap},{beta})");
        }
    }
}

#[test]
fn closed_form_equivalence_census() {
    let mut misses = Vec::new();
    let mut cases = 0;
    for gap in 3..=64 {
        for beta in 2..gap {
            cases += 1;
            let ctx = DegreeContext::new(gap, beta).unwrap();
            let best = objective(ctx, optimal_degree_bruteforce(ctx)).unwrap();
            if objective(ctx, optimal_degree_closed(ctx)).unwrap() != best {
                misses.push((gap, beta));
            }
        }
    }
    eprintln!("closed form misses the maximum in {} of {cases} cases", misses.len());
    eprintln!("first misses: {:?}", &misses[..misses.len().min(8)]);
    // frozen from the exact enumeration
    assert_eq!(cases, 1953);
    assert_eq!(misses.len(), 460);
    assert_eq!(misses[0], (6, 2));
}

proptest! {
    #[test]
    fn closed_form_in_range(ctx in ctx_strategy()) {
        let d = optimal_degree_closed(ctx);
        prop_assert!((1..=ctx.max_degree()).contains(&d));
    }

    #[test]
    fn bruteforce_is_argmax(ctx in ctx_strategy()) {
        let f = curve(ctx);
        let d = optimal_degree_bruteforce(ctx) as usize;
        prop_assert!(f.iter().all(|x| *x <= f[d - 1]));
        prop_assert!(f[..d - 1].iter().all(|x| *x < f[d - 1]));
    }

    #[test]
    fn closed_form_never_beats_oracle(ctx in ctx_strategy()) {
        let best = objective(ctx, optimal_degree_bruteforce(ctx)).unwrap();
        prop_assert!(objective(ctx, optimal_degree_closed(ctx)).unwrap() <= best);
    }

    #[test]
    fn no_feedback_degree_bounds(size in 1usize..64, d_nf in 1usize..10, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in PolicyKind::ALL {
            let d = no_feedback_degree(p, size, d_nf, &mut rng);
            prop_assert!((1..=size).contains(&d));
            if p != PolicyKind::Wc {
                prop_assert_eq!(d, d_nf.min(size));
            }
        }
    }
}
