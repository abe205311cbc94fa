use proptest::prelude::*;
use tsn_ids_core::recovery::seq_delta;
use tsn_ids_core::{AcceptDecision, RecoveryState, RecoveryVariant};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    /// The match function only ever moves its highest sequence number forward.
    #[test]
    fn match_highest_moves_forward(start in any::<u16>(), steps in proptest::collection::vec(any::<i16>(), 1..200)) {
        let mut s = RecoveryState::with_defaults(RecoveryVariant::Match);
        s.accept(start, 0.0);
        for (i, d) in steps.into_iter().enumerate() {
            let before = s.highest_seq().unwrap();
            let seq = before.wrapping_add(d as u16);
            let out = s.accept(seq, i as f64 * 1e-3);
            let after = s.highest_seq().unwrap();
            match out.decision {
                AcceptDecision::Accept => {
                    prop_assert!(seq_delta(after, before) > 0);
                    prop_assert_eq!(after, seq);
                }
                _ => prop_assert_eq!(after, before),
            }
            prop_assert_eq!(out.previous_highest, Some(before));
        }
    }

    /// Any reordering inside the history window delivers each frame once.
    #[test]
    fn vector_delivers_window_permutations_once(start in any::<u16>(), perm in Just((1u16..=48).collect::<Vec<_>>()).prop_shuffle()) {
        let mut s = RecoveryState::with_defaults(RecoveryVariant::Vector);
        s.accept(start, 0.0);
        let mut accepted = 0;
        for &k in &perm {
            for copy in 0..2 {
                let out = s.accept(start.wrapping_add(k), 0.0);
                if copy == 0 {
                    prop_assert_eq!(out.decision, AcceptDecision::Accept, "seq offset {}", k);
                    accepted += 1;
                } else {
                    prop_assert_eq!(out.decision, AcceptDecision::DiscardDuplicate);
                    prop_assert_eq!(out.copies, 2);
                }
            }
        }
        prop_assert_eq!(accepted, perm.len());
        prop_assert_eq!(s.highest_seq(), Some(start.wrapping_add(48)));
    }

    /// One timeout per quiet period; the next frame re-bases.
    #[test]
    fn timeout_is_edge_triggered(gaps in proptest::collection::vec(0.0f64..6.0, 1..40), variant in prop_oneof![Just(RecoveryVariant::Match), Just(RecoveryVariant::Vector)]) {
        let mut s = RecoveryState::with_defaults(variant);
        let mut now = 0.0;
        let mut seq = 100u16;
        s.accept(seq, now);
        for gap in gaps {
            // sweep every 0.5 s across the gap
            let mut fired = 0;
            let mut t = now;
            while t + 0.5 <= now + gap {
                t += 0.5;
                if s.check_timeout(t, 2.0).is_some() {
                    fired += 1;
                }
            }
            prop_assert!(fired <= 1);
            prop_assert_eq!(fired == 1, s.timed_out());
            let expect_fire = t - now > 2.0;
            prop_assert_eq!(fired == 1, expect_fire, "gap {} swept to {}", gap, t - now);
            now += gap;
            seq = seq.wrapping_add(1);
            let out = s.accept(seq, now);
            prop_assert_eq!(out.decision, AcceptDecision::Accept);
            prop_assert_eq!(out.rebased_from.is_some(), fired == 1);
            prop_assert!(!s.timed_out());
        }
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(RecoveryState::new(RecoveryVariant::Vector, 0, 10).is_err());
    assert!(RecoveryState::new(RecoveryVariant::Vector, 1025, 10).is_err());
    assert!(RecoveryState::new(RecoveryVariant::Vector, 64, 0).is_err());
    assert!(RecoveryState::new(RecoveryVariant::Vector, 64, 40_000).is_err());
    assert!(RecoveryState::new(RecoveryVariant::Vector, 1024, 32_767).is_ok());
}

#[test]
fn vector_flags_the_far_injection() {
    let mut s = RecoveryState::with_defaults(RecoveryVariant::Vector);
    s.accept(54971, 0.0);
    let out = s.accept(7148, 0.01);
    assert_eq!(out.decision, AcceptDecision::RogueOutOfRange);
    assert_eq!(out.previous_highest.map(|h| h.wrapping_add(1)), Some(54972));
    // the legitimate successor is still accepted
    assert_eq!(s.accept(54972, 0.02).decision, AcceptDecision::Accept);
}
