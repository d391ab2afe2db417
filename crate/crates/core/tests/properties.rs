use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use kr_advance::closed_form::*;
use kr_advance::preferences::*;
use kr_advance::solver::*;
use kr_advance::*;

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (2.0f64..20.0, 0.02f64..0.98, 0.05f64..0.95, 0.0f64..3.0, 0.0f64..3.0)
        .prop_map(|(h, frac, q, lv, lm)| ModelParams::new(h, frac * h, q, lv, lm).unwrap())
}

fn bools() -> impl Strategy<Value = (bool, bool, bool)> {
    (any::<bool>(), any::<bool>(), any::<bool>())
}

/// Terminal lottery `(prob, value, money)` of a degenerate plan, written out
/// by hand rather than read off the game tree.
fn lottery(p: &ModelParams, p1: f64, p2: f64, pre: bool, bh: bool, bl: bool) -> Vec<(f64, f64, f64)> {
    let (h, l, q) = (p.high(), p.low(), p.q());
    if pre {
        return vec![(q, h, -p1), (1.0 - q, l, -p1)];
    }
    let spot = |buy: bool, w: f64| if buy { (w, -p2) } else { (0.0, 0.0) };
    let (vh, mh) = spot(bh, h);
    let (vl, ml) = spot(bl, l);
    vec![(q, vh, mh), (1.0 - q, vl, ml)]
}

fn loss_eu(p: &ModelParams, outcomes: &[(f64, f64, f64)], reference: &[(f64, f64, f64)]) -> f64 {
    outcomes
        .iter()
        .map(|&(w, v, m)| {
            let lv: f64 = reference.iter().map(|&(r, rv, _)| r * (rv - v).max(0.0)).sum();
            let lm: f64 = reference.iter().map(|&(r, _, rm)| r * (rm - m).max(0.0)).sum();
            w * (v + m - p.lambda_v() * lv - p.lambda_m() * lm)
        })
        .sum()
}

fn committed_cutoff(p: &ModelParams, p2: f64, pref: PreferenceModel) -> f64 {
    bisect_cutoff_p1(p, SpotRegime::Committed { p2 }, pref).unwrap().cutoff
}

proptest! {
    #[test]
    fn t1_utility_matches_hand_oracle(p in params_strategy(), p1 in 0.0f64..25.0, p2 in 0.0f64..30.0, (a, bh, bl) in bools()) {
        let tree = build_game_tree(&p, &PriceOffer::committed(p1, p2).unwrap());
        let plan = Plan::degenerate(a, bh, bl);
        let own = lottery(&p, p1, p2, a, bh, bl);
        let expected = loss_eu(&p, &own, &own);
        for timing in [ReferenceTiming::RecentBelief, ReferenceTiming::InitialBelief] {
            let got = plan_expected_utility(&tree, DecisionPoint::Advance, &plan, timing);
            prop_assert!((got - expected).abs() <= 1e-9, "{timing:?}: {got} vs {expected}");
        }
        // Deviating at T1 is evaluated against the plan's own lottery.
        let dev = lottery(&p, p1, p2, !a, bh, bl);
        let action = if a { Action::Wait } else { Action::Prepurchase };
        let got = expected_utility(&tree, action, DecisionPoint::Advance, &plan, ReferenceTiming::RecentBelief).unwrap();
        prop_assert!((got - loss_eu(&p, &dev, &own)).abs() <= 1e-9);
    }

    #[test]
    fn zero_loss_aversion_is_material_payoff(p in params_strategy(), p1 in 0.0f64..25.0, p2 in 0.0f64..30.0, (a, bh, bl) in bools()) {
        let p = p.with_losses(0.0, 0.0).unwrap();
        let tree = build_game_tree(&p, &PriceOffer::committed(p1, p2).unwrap());
        let plan = Plan::degenerate(a, bh, bl);
        let material: f64 = lottery(&p, p1, p2, a, bh, bl).iter().map(|&(w, v, m)| w * (v + m)).sum();
        let got = plan_expected_utility(&tree, DecisionPoint::Advance, &plan, ReferenceTiming::RecentBelief);
        prop_assert!((got - material).abs() <= 1e-9);
    }

    #[test]
    fn utility_falls_with_loss_aversion(
        p in params_strategy(), p1 in 0.0f64..25.0, p2 in 0.0f64..30.0, (a, bh, bl) in bools(), dv in 0.0f64..2.0, dm in 0.0f64..2.0,
    ) {
        let more = p.with_losses(p.lambda_v() + dv, p.lambda_m() + dm).unwrap();
        let plan = Plan::degenerate(a, bh, bl);
        for point in DecisionPoint::ALL {
            for action in point.actions() {
                let eu = |m: &ModelParams| {
                    let tree = build_game_tree(m, &PriceOffer::committed(p1, p2).unwrap());
                    expected_utility(&tree, action, point, &plan, ReferenceTiming::RecentBelief).unwrap()
                };
                prop_assert!(eu(&more) <= eu(&p) + 1e-12);
            }
        }
    }

    #[test]
    fn brackets_are_separate(p in params_strategy(), v in 0.0f64..20.0, m in -20.0f64..0.0, shift in -5.0f64..5.0) {
        let reference = ReferenceDistribution::from_payoffs([(0.3, Payoff2D { value: 4.0, money: -3.0 }), (0.7, Payoff2D { value: 9.0, money: 0.0 })]);
        let k = Payoff2D { value: v, money: m };
        let base = riskless_utility(k, &reference, &p);
        let moved = ReferenceDistribution { value: reference.value.clone(), money: Marginal::from_weighted([(1.0, shift)]) };
        let other = riskless_utility(k, &moved, &p);
        prop_assert_eq!(base.value_part, other.value_part);
        prop_assert!((base.total - base.value_part - base.money_part).abs() <= 1e-12);
    }

    #[test]
    fn spot_rule_ignores_loss_aversion(p in params_strategy(), p2 in 0.0f64..40.0, lv in 0.0f64..3.0, lm in 0.0f64..3.0) {
        let other = p.with_losses(lv, lm).unwrap();
        let solved = solve_ppe(&p, &PriceOffer::committed(1.0, p2).unwrap(), ReferenceTiming::RecentBelief).unwrap();
        for s in State::ALL {
            let expected = if p2 <= p.value(s) { Action::Buy } else { Action::Reject };
            prop_assert_eq!(spot_ppe_action(s, p2, &p), expected);
            prop_assert_eq!(spot_ppe_action(s, p2, &other), expected);
            if (p2 - p.value(s)).abs() > 1e-9 {
                prop_assert_eq!(solved.spot_actions[&s], expected);
            }
        }
    }

    #[test]
    fn credible_spot_set_matches_enumeration(p in params_strategy(), p2 in 0.0f64..80.0) {
        let tree = build_game_tree(&p, &PriceOffer::committed(1.0, p2).unwrap());
        for s in State::ALL {
            let w = p.value(s);
            let near = |edge: f64| (p2 - edge).abs() <= 1e-9 * (1.0 + edge);
            if near(w / (1.0 + p.lambda_m())) || near((1.0 + p.lambda_v()) * w) {
                continue;
            }
            let point = DecisionPoint::Spot(s);
            let set = spot_credible_action_set(s, p2, &p);
            for (action, prob) in [(Action::Buy, 1.0), (Action::Reject, 0.0)] {
                let plan = Plan::degenerate(false, false, false).with_purchase_probability(point, prob);
                let credible = is_credible_at(&tree, &plan, point, ReferenceTiming::RecentBelief);
                prop_assert_eq!(set.contains(&action), credible, "{:?} {:?}", s, action);
            }
        }
    }

    #[test]
    fn wait_plans_satisfy_expectation_identity(p in params_strategy(), p1 in 0.0f64..25.0, p2 in 0.0f64..30.0, bh: bool, bl: bool) {
        let tree = build_game_tree(&p, &PriceOffer::committed(p1, p2).unwrap());
        prop_assert!(static_expectation_gap(&tree, &Plan::degenerate(false, bh, bl)) <= 1e-9);
    }

    #[test]
    fn commitment_never_hurts(p in params_strategy()) {
        let d = commitment_decision(&p);
        prop_assert!(d.gap() >= -1e-12);
        let flat = commitment_decision(&p.with_losses(0.0, p.lambda_m()).unwrap());
        prop_assert!(flat.gap().abs() <= 1e-9);
        prop_assert_eq!(flat.choice, CommitmentChoice::Indifferent);
        if p.lambda_v() > 1e-3 {
            prop_assert_eq!(d.choice, CommitmentChoice::Commit);
        }
    }

    #[test]
    fn cutoff_at_high_rises_with_each_loss_coefficient(p in params_strategy(), dv in 0.0f64..2.0, dm in 0.0f64..2.0) {
        let at = |m: &ModelParams| cutoff_advance_price(m.high(), m).cutoff;
        let base = at(&p);
        prop_assert!(at(&p.with_losses(p.lambda_v() + dv, p.lambda_m()).unwrap()) >= base - 1e-12);
        prop_assert!(at(&p.with_losses(p.lambda_v(), p.lambda_m() + dm).unwrap()) >= base - 1e-12);
    }

    #[test]
    fn bounds_swap_order_at_crossing(p in params_strategy()) {
        if let Some(x) = bound_crossing(&p) {
            let diff = |p2: f64| preferred_prepurchase_bound(p2, &p) - credible_prepurchase_bound(p2, &p);
            let d = 1e-6 * p.high();
            prop_assert!(diff(x).abs() <= 1e-9);
            if x - d > p.low() && x + d <= p.high() {
                prop_assert!(diff(x - d) < 0.0 && diff(x + d) > 0.0, "{} {}", diff(x - d), diff(x + d));
            }
        }
    }

    #[test]
    fn committed_pricing_beats_expected_value(p in params_strategy()) {
        let rec = optimal_pricing_commit(&p);
        if p.lambda_v() > 0.0 || p.lambda_m() > 0.0 {
            prop_assert!(rec.expected_profit > p.expected_value());
        }
        let ppe = solve_ppe(&p, &PriceOffer::committed(rec.p1, p.high()).unwrap(), ReferenceTiming::RecentBelief).unwrap();
        prop_assert!(ppe.prepurchases());
        prop_assert!((ppe.seller_expected_profit - rec.p1).abs() <= 1e-9);
    }

    #[test]
    fn static_consumer_refuses_expected_value_offer(p in params_strategy()) {
        prop_assume!(p.lambda_v() > 1e-6);
        let offer = PriceOffer::committed(p.expected_value(), p.high()).unwrap();
        let ppe = solve_ppe(&p, &offer, ReferenceTiming::InitialBelief).unwrap();
        prop_assert_eq!(ppe.plan, Plan::degenerate(false, false, false));
    }

    #[test]
    fn risk_aversion_lowers_cutoff(p in params_strategy(), a in 0.05f64..5.0) {
        let c = risk_averse_cutoff(&p, a).unwrap();
        prop_assert!(c < p.expected_value());
        prop_assert!(c > p.low());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_form_matches_bisection_up_to_high(p in params_strategy(), t in 0.0f64..=1.0) {
        let p2 = t * p.high();
        let cf = cutoff_advance_price(p2, &p).cutoff;
        let bf = committed_cutoff(&p, p2, PreferenceModel::KrRecentBelief);
        prop_assert!((cf - bf).abs() <= 1e-6, "p2 {p2}: closed {cf} brute {bf}");
    }

    #[test]
    fn bisection_cutoff_monotone_then_flat(p in params_strategy(), s in 0.0f64..=1.0, t in 0.0f64..=1.0, u in 1.001f64..3.0) {
        let (a, b) = (s.min(t) * p.high(), s.max(t) * p.high());
        let pref = PreferenceModel::KrRecentBelief;
        prop_assert!(committed_cutoff(&p, a, pref) <= committed_cutoff(&p, b, pref) + 1e-7);
        let above = committed_cutoff(&p, u * p.high(), pref);
        prop_assert!((above - committed_cutoff(&p, 3.5 * p.high(), pref)).abs() <= 1e-7);
    }

    #[test]
    fn loss_neutral_consumer_matches_standard(p in params_strategy(), t in 0.0f64..2.0) {
        let p = p.with_losses(0.0, 0.0).unwrap();
        let p2 = t * p.high();
        let kr = committed_cutoff(&p, p2, PreferenceModel::KrRecentBelief);
        let rn = committed_cutoff(&p, p2, PreferenceModel::RiskNeutral);
        prop_assert!((kr - rn).abs() <= 1e-6, "{kr} vs {rn}");
    }

    #[test]
    fn flexible_cutoff_matches_formula(p in params_strategy()) {
        let regime = SpotRegime::Flexible { p2_high: p.high(), p2_low: p.low() };
        let bf = bisect_cutoff_p1(&p, regime, PreferenceModel::KrRecentBelief).unwrap().cutoff;
        prop_assert!((bf - optimal_pricing_flexible(&p).p1).abs() <= 1e-6);
    }

    #[test]
    fn cara_brute_force_matches_root(p in params_strategy(), a in 0.05f64..5.0) {
        let bf = committed_cutoff(&p, p.high(), PreferenceModel::RiskAverse { curvature: a });
        prop_assert!((bf - risk_averse_cutoff(&p, a).unwrap()).abs() <= 1e-6);
    }
}

#[test]
fn reference_instance_mixed_audit() {
    let p = ModelParams::new(10.0, 4.0, 0.5, 2.0, 2.0).unwrap();
    let offer = PriceOffer::committed(8.0, 9.0).unwrap();
    for timing in [ReferenceTiming::RecentBelief, ReferenceTiming::InitialBelief] {
        assert!(grid_mixed_plan_check(&p, &offer, 0.1, timing).unwrap());
    }
    assert_abs_diff_eq!(
        committed_cutoff(&p, 10.0, PreferenceModel::KrRecentBelief),
        cutoff_advance_price(10.0, &p).cutoff,
        epsilon = 1e-6
    );
}
