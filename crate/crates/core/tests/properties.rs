//! Property tests for the structural invariants of the transition law and
//! the classification.

use poisar::classify::BOUNDARY_TOL;
use poisar::{
    choose_eps_t2b, choose_r, classify, critical_b, dominant_eigenvalue, intensity, p2_closed_form,
    transition_prob, tv_distance, Distribution, Params, Phase, State, Sublabel,
};
use proptest::prelude::*;

fn arb_params() -> impl Strategy<Value = Params> {
    (-4.0..4.0f64, -4.0..4.0f64, 0.1..4.0f64)
        .prop_map(|(a, b, lambda)| Params::new(a, b, lambda).unwrap())
}

fn arb_state(limit: u64) -> impl Strategy<Value = State> {
    (0..limit, 0..limit).prop_map(|(i, j)| State::new(i, j))
}

proptest! {
    #[test]
    fn transition_rows_sum_to_one(p in arb_params(), s in arb_state(60)) {
        // sum the pmf row far past the mean; the tail beyond is negligible,
        // and a fixed range avoids stalling on the float limit of the sum
        let mean = intensity(&p, s);
        let k_max = (mean + 40.0 * mean.sqrt() + 100.0) as u64;
        let sum: f64 = (0..=k_max)
            .map(|k| transition_prob(&p, s, State::new(k, s.i)))
            .sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12, "sum {} at mean {}", sum, mean);
    }

    #[test]
    fn transitions_respect_the_shift_structure(
        p in arb_params(),
        from in arb_state(60),
        to in arb_state(60),
    ) {
        if to.j != from.i {
            prop_assert_eq!(transition_prob(&p, from, to), 0.0);
        } else {
            prop_assert!(transition_prob(&p, from, to) >= 0.0);
        }
    }

    #[test]
    fn phase_agrees_with_the_critical_curve(p in arb_params()) {
        let gap = p.b - critical_b(p.a);
        prop_assume!(gap.abs() > BOUNDARY_TOL);
        let label = classify(&p, BOUNDARY_TOL);
        let expected = if gap < 0.0 { Phase::Recurrent } else { Phase::Transient };
        prop_assert_eq!(label.phase, expected);
        // phase and sub-labels stay consistent, and the cover is complete
        prop_assert!(!label.sublabels.is_empty());
        for sub in &label.sublabels {
            let recurrent_sub = matches!(sub, Sublabel::R1 | Sublabel::R2 | Sublabel::R3);
            prop_assert_eq!(recurrent_sub, label.phase == Phase::Recurrent);
        }
    }

    #[test]
    fn two_step_closed_form_factorizes(
        p in arb_params(),
        from in arb_state(40),
        to in arb_state(40),
    ) {
        let mid = State::new(to.j, from.i);
        let product = transition_prob(&p, from, mid) * transition_prob(&p, mid, to);
        let closed = p2_closed_form(&p, from, to);
        prop_assert!((closed - product).abs() <= 1e-12 * product.max(1.0));
    }

    #[test]
    fn tv_distance_is_a_bounded_metric(
        states_a in proptest::collection::vec(arb_state(10), 1..50),
        states_b in proptest::collection::vec(arb_state(10), 1..50),
    ) {
        let d1 = Distribution::from_states(10, states_a);
        let d2 = Distribution::from_states(10, states_b);
        let d12 = tv_distance(&d1, &d2);
        prop_assert!((0.0..=1.0).contains(&d12));
        prop_assert_eq!(d12, tv_distance(&d2, &d1));
        prop_assert_eq!(tv_distance(&d1, &d1), 0.0);
    }

    #[test]
    fn transience_constants_satisfy_their_inequalities(a in 0.0..4.0f64, b in -4.0..4.0f64) {
        let p = Params::new(a, b, 1.0).unwrap();
        let label = classify(&p, BOUNDARY_TOL);
        prop_assume!(label.has(Sublabel::T2a) || label.has(Sublabel::T2b));
        let theta = dominant_eigenvalue(&p).unwrap();
        let r = choose_r(&p).unwrap();
        prop_assert!(1.0 < r && r < theta);
        prop_assert!(r * r - a * r - b < 0.0);
        if b < 0.0 {
            let eps = choose_eps_t2b(&p, r);
            prop_assert!(r * r - a * (r - eps) - b < 0.0);
            prop_assert!(theta * theta - theta * eps + b > 0.0);
            prop_assert!(eps < theta);
        }
    }

    #[test]
    fn zero_intensity_states_move_deterministically(p in arb_params(), s in arb_state(60)) {
        prop_assume!(intensity(&p, s) == 0.0);
        prop_assert_eq!(transition_prob(&p, s, State::new(0, s.i)), 1.0);
    }
}
