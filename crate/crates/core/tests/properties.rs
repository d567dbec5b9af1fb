use proptest::prelude::*;

use qtickets::attacks::{pair_outcome_distribution, PairCloneStrategy};
use qtickets::bounds::{chernoff_lower_tail, chernoff_tail, relative_entropy, soundness_bound};
use qtickets::cv::{cv_issue, AnswerSheet, ChallengeQuestion, CvLayout, Message};
use qtickets::games::{random_game, tensor_product_materialized, Game};
use qtickets::qticket::{double_acceptance_exact, exact_honest_acceptance, issue, QticketRecord};
use qtickets::quantum::StateLabel;
use qtickets::store::{CvRecord, Store, StoreRecord, STORE_VERSION};
use qtickets::tails::{binomial_lower_tail, binomial_upper_tail};
use qtickets::{RngStream, Tolerance};

fn tolerance() -> impl Strategy<Value = Tolerance> {
    (1u64..=100).prop_flat_map(|d| (0..=d).prop_map(move |n| Tolerance::new(n, d).unwrap()))
}

fn unit() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64]
}

proptest! {
    #[test]
    fn relative_entropy_dominates_pinsker(p in unit(), q in unit()) {
        let d = relative_entropy(p, q).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(d >= 2.0 * (p - q).powi(2) - 1e-15);
        if p == q {
            prop_assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn chernoff_bounds_exact_tails(n in 1usize..400, a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let k_up = (hi * n as f64).ceil() as usize;
        let up = chernoff_tail(n as u64, hi, lo).unwrap().raw;
        prop_assert!(binomial_upper_tail(n, lo, k_up) <= up * (1.0 + 1e-9) + 1e-300);
        let k_down = (lo * n as f64).floor() as usize;
        let down = chernoff_lower_tail(n as u64, lo, hi).unwrap().raw;
        prop_assert!(binomial_lower_tail(n, hi, k_down) <= down * (1.0 + 1e-9) + 1e-300);
    }

    #[test]
    fn chernoff_rejects_wrong_orientation(n in 1u64..100, a in 0.01..0.49f64, b in 0.51..0.99f64) {
        prop_assert!(chernoff_tail(n, a, b).is_err());
        prop_assert!(chernoff_lower_tail(n, b, a).is_err());
    }

    #[test]
    fn min_correct_is_the_smallest_passing_count(t in tolerance(), n in 0usize..2000) {
        let k = t.min_correct(n) as u64;
        prop_assert!(k as usize <= n);
        prop_assert!(k * t.denom() >= t.numer() * n as u64);
        if k > 0 {
            prop_assert!((k - 1) * t.denom() < t.numer() * n as u64);
        }
    }

    #[test]
    fn honest_acceptance_dominates_soundness_and_falls_with_tolerance(
        n in 1usize..300, f_exp in 0.5..0.999f64, a in 50u64..100, b in 50u64..100,
    ) {
        let (lo, hi) = (Tolerance::new(a.min(b), 100).unwrap(), Tolerance::new(a.max(b), 100).unwrap());
        let fids = vec![f_exp; n];
        let p_lo = exact_honest_acceptance(&fids, lo).unwrap();
        let p_hi = exact_honest_acceptance(&fids, hi).unwrap();
        prop_assert!(p_hi <= p_lo + 1e-10);
        if lo.as_f64() < f_exp {
            let bound = soundness_bound(n as u64, f_exp, lo.as_f64()).unwrap().raw;
            prop_assert!(p_lo >= bound - 1e-10);
        }
    }

    #[test]
    fn double_acceptance_never_beats_either_token(n in 1usize..300, t in tolerance(), label in 0usize..6, which in 0usize..2) {
        let strategy = PairCloneStrategy::shipped()[which];
        let d = pair_outcome_distribution(&strategy, StateLabel::ALL[label]);
        let both = double_acceptance_exact(n, t, d).unwrap();
        let k = t.min_correct(n);
        let first = binomial_upper_tail(n, d.first_marginal().min(1.0), k);
        let second = binomial_upper_tail(n, d.second_marginal().min(1.0), k);
        // log-factorial pmfs carry ~1e-12 absolute error on totals near 1
        prop_assert!(both <= first.min(second) + 1e-10);
        prop_assert!(both >= first + second - 1.0 - 1e-10);
    }

    #[test]
    fn pair_distributions_are_normalized(label in 0usize..6, which in 0usize..2) {
        let d = pair_outcome_distribution(&PairCloneStrategy::shipped()[which], StateLabel::ALL[label]);
        let total = d.p11 + d.p10 + d.p01 + d.p00;
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!((d.p10 - d.p01).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn selective_values_multiply(seed in any::<u64>(), s1 in 2usize..4, a1 in 2usize..4, s2 in 2usize..4, a2 in 2usize..4) {
        let mut rng = RngStream::new(seed);
        let g1 = random_game::<2>(s1, a1, &mut rng).unwrap();
        let g2 = random_game::<2>(s2, a2, &mut rng).unwrap();
        let prod = tensor_product_materialized(&g1, &g2).unwrap();
        let expect = Game::selective_value(&g1).unwrap() * Game::selective_value(&g2).unwrap();
        prop_assert!((Game::selective_value(&prod).unwrap() - expect).abs() < 1e-8);
    }

    #[test]
    fn wire_messages_round_trip(seed in any::<u64>(), n in 1usize..5, r in 1usize..6) {
        let mut rng = RngStream::new(seed);
        let q = ChallengeQuestion::random(seed % 1000, n, &mut rng);
        let outcomes = (0..n).map(|_| (0..r).map(|_| [rng.below(2) as u8, rng.below(2) as u8]).collect()).collect();
        for msg in [Message::from(&q), Message::from(&AnswerSheet::new(q.question_id, outcomes))] {
            prop_assert_eq!(Message::parse(&msg.to_line()).unwrap(), msg);
        }
    }

    #[test]
    fn store_round_trips(seed in any::<u64>(), tickets in 0usize..4, cvs in 0usize..4) {
        let mut rng = RngStream::new(seed);
        let mut store = Store { version: STORE_VERSION, serials: Vec::new() };
        for _ in 0..tickets {
            let (secret, _) = issue(1 + rng.below(20), &mut rng).unwrap();
            store.add(StoreRecord::Qticket(QticketRecord::new(secret, Tolerance::new(9, 10).unwrap(), 1))).unwrap();
        }
        for _ in 0..cvs {
            let layout = CvLayout::new(1 + rng.below(3), 1 + rng.below(4), Tolerance::new(7, 8).unwrap()).unwrap();
            let (secret, _) = cv_issue(layout, rng.bernoulli(0.5), &mut rng);
            store.add(StoreRecord::Cv(CvRecord::from_secret(&secret))).unwrap();
        }
        let back = Store::from_json(&store.to_json()).unwrap();
        prop_assert_eq!(back, store);
    }
}
