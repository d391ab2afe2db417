//! Reference-dependent (gain-free, narrowly bracketed) utility, reference
//! distributions built from plans, and the standard benchmark preferences.

use std::fmt;

use thiserror::Error;

use crate::model::{Action, DecisionPoint, GameTree, ModelParams, Payoff2D, Plan, TerminalOutcome, EPS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UtilityError {
    #[error("action {action} is not available at node {node}")]
    InvalidAction { action: Action, node: DecisionPoint },
    #[error("risk-aversion curvature must be positive, got {0}")]
    BadCurvature(f64),
}

/// When the reference distribution is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReferenceTiming {
    /// Belief conditional on the node where the consumer moves.
    RecentBelief,
    /// Belief held at the advance-purchase node, carried into the spot market.
    InitialBelief,
}

impl ReferenceTiming {
    pub fn label(self) -> &'static str {
        match self {
            ReferenceTiming::RecentBelief => "kr_recent",
            ReferenceTiming::InitialBelief => "kr_initial",
        }
    }
}

/// Standard (reference-free) preferences over the summed material payoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardPreference {
    RiskNeutral,
    /// CARA utility v(x) = (1 − e^{−a·x})/a.
    RiskAverse {
        curvature: f64,
    },
}

impl StandardPreference {
    pub fn risk_averse(curvature: f64) -> Result<Self, UtilityError> {
        if curvature > 0.0 && curvature.is_finite() {
            Ok(StandardPreference::RiskAverse { curvature })
        } else {
            Err(UtilityError::BadCurvature(curvature))
        }
    }

    /// Transform of the summed material payoff.
    pub fn utility_of(&self, x: f64) -> f64 {
        match *self {
            StandardPreference::RiskNeutral => x,
            StandardPreference::RiskAverse { curvature } => cara(curvature, x),
        }
    }
}

/// v(x) = (1 − e^{−a·x})/a; `exp_m1` keeps small curvatures accurate.
pub fn cara(a: f64, x: f64) -> f64 {
    -(-a * x).exp_m1() / a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreferenceModel {
    KrRecentBelief,
    KrInitialBelief,
    RiskNeutral,
    RiskAverse { curvature: f64 },
}

impl PreferenceModel {
    pub fn timing(&self) -> Option<ReferenceTiming> {
        match self {
            PreferenceModel::KrRecentBelief => Some(ReferenceTiming::RecentBelief),
            PreferenceModel::KrInitialBelief => Some(ReferenceTiming::InitialBelief),
            _ => None,
        }
    }

    pub fn standard(&self) -> Option<StandardPreference> {
        match *self {
            PreferenceModel::RiskNeutral => Some(StandardPreference::RiskNeutral),
            PreferenceModel::RiskAverse { curvature } => Some(StandardPreference::RiskAverse { curvature }),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PreferenceModel::KrRecentBelief => "kr_recent",
            PreferenceModel::KrInitialBelief => "kr_initial",
            PreferenceModel::RiskNeutral => "risk_neutral",
            PreferenceModel::RiskAverse { .. } => "risk_averse",
        }
    }
}

impl From<ReferenceTiming> for PreferenceModel {
    fn from(t: ReferenceTiming) -> Self {
        match t {
            ReferenceTiming::RecentBelief => PreferenceModel::KrRecentBelief,
            ReferenceTiming::InitialBelief => PreferenceModel::KrInitialBelief,
        }
    }
}

impl From<StandardPreference> for PreferenceModel {
    fn from(p: StandardPreference) -> Self {
        match p {
            StandardPreference::RiskNeutral => PreferenceModel::RiskNeutral,
            StandardPreference::RiskAverse { curvature } => PreferenceModel::RiskAverse { curvature },
        }
    }
}

impl fmt::Display for PreferenceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Discrete marginal over reference points: `(probability, point)` pairs,
/// sorted by point, equal points merged, zero-mass points dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Marginal(Vec<(f64, f64)>);

impl Marginal {
    pub fn degenerate(point: f64) -> Self {
        Marginal(vec![(1.0, point)])
    }

    pub fn from_weighted<I: IntoIterator<Item = (f64, f64)>>(items: I) -> Self {
        let mut v: Vec<(f64, f64)> = items.into_iter().filter(|&(p, _)| p > 0.0).collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (p, x) in v {
            match merged.last_mut() {
                Some(last) if (last.1 - x).abs() <= EPS => last.0 += p,
                _ => merged.push((p, x)),
            }
        }
        Marginal(merged)
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn total_probability(&self) -> f64 {
        self.0.iter().map(|&(p, _)| p).sum()
    }

    /// Σ_j p_j · max(r_j − k, 0).
    pub fn expected_loss(&self, outcome: f64) -> f64 {
        self.0.iter().map(|&(p, r)| p * (r - outcome).max(0.0)).sum()
    }

    /// Probability of `point`, up to tolerance.
    pub fn mass_at(&self, point: f64) -> f64 {
        self.0
            .iter()
            .filter(|&&(_, x)| (x - point).abs() <= EPS)
            .map(|&(p, _)| p)
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Marginal::from_weighted(self.0.iter().map(|&(p, x)| (p, x * factor)))
    }
}

/// Narrowly bracketed reference: one independent marginal per dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceDistribution {
    pub value: Marginal,
    pub money: Marginal,
}

impl ReferenceDistribution {
    pub fn degenerate(point: Payoff2D) -> Self {
        Self {
            value: Marginal::degenerate(point.value),
            money: Marginal::degenerate(point.money),
        }
    }

    pub fn from_payoffs<I: IntoIterator<Item = (f64, Payoff2D)> + Clone>(items: I) -> Self {
        Self {
            value: Marginal::from_weighted(items.clone().into_iter().map(|(p, k)| (p, k.value))),
            money: Marginal::from_weighted(items.into_iter().map(|(p, k)| (p, k.money))),
        }
    }

    pub fn is_valid(&self) -> bool {
        let ok = |m: &Marginal| {
            (m.total_probability() - 1.0).abs() <= EPS && m.support().iter().all(|&(p, x)| p >= 0.0 && x.is_finite())
        };
        ok(&self.value) && ok(&self.money)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityReport {
    pub total: f64,
    pub value_part: f64,
    pub money_part: f64,
    pub loss_value: f64,
    pub loss_money: f64,
}

/// Utility of payoff `k` against a stochastic reference: per dimension,
/// k^d − λ^d · Σ_j p_j · max(r^d_j − k^d, 0). Gains carry no extra weight.
pub fn riskless_utility(k: Payoff2D, reference: &ReferenceDistribution, params: &ModelParams) -> UtilityReport {
    let loss_value = reference.value.expected_loss(k.value);
    let loss_money = reference.money.expected_loss(k.money);
    let value_part = k.value - params.lambda_v() * loss_value;
    let money_part = k.money - params.lambda_m() * loss_money;
    UtilityReport {
        total: value_part + money_part,
        value_part,
        money_part,
        loss_value,
        loss_money,
    }
}

/// Marginals of the terminal-payoff belief that serves as reference at `point`.
pub fn reference_from_plan(
    tree: &GameTree,
    point: DecisionPoint,
    plan: &Plan,
    timing: ReferenceTiming,
) -> ReferenceDistribution {
    let anchor = match timing {
        ReferenceTiming::RecentBelief => tree.node(point),
        ReferenceTiming::InitialBelief => tree.root(),
    };
    let dist = tree.outcome_distribution(anchor, plan);
    ReferenceDistribution::from_payoffs(dist.iter().map(|(p, o)| (*p, o.consumer)))
}

/// Expected reference-dependent utility of taking `action` at `point`, with
/// the plan governing any later moves and the reference held fixed.
pub fn expected_utility(
    tree: &GameTree,
    action: Action,
    point: DecisionPoint,
    plan: &Plan,
    timing: ReferenceTiming,
) -> Result<f64, UtilityError> {
    let reference = reference_from_plan(tree, point, plan, timing);
    expected_utility_against(tree, action, point, plan, &reference)
}

/// As [`expected_utility`] with a caller-supplied reference.
pub fn expected_utility_against(
    tree: &GameTree,
    action: Action,
    point: DecisionPoint,
    plan: &Plan,
    reference: &ReferenceDistribution,
) -> Result<f64, UtilityError> {
    let child = tree
        .node(point)
        .after(action)
        .ok_or(UtilityError::InvalidAction { action, node: point })?;
    Ok(tree
        .outcome_distribution(child, plan)
        .iter()
        .map(|(p, o)| p * riskless_utility(o.consumer, reference, tree.params()).total)
        .sum())
}

/// Plan-weighted expected utility at `point`: Σ_a α(a|point) · EU(a).
pub fn plan_expected_utility(tree: &GameTree, point: DecisionPoint, plan: &Plan, timing: ReferenceTiming) -> f64 {
    let reference = reference_from_plan(tree, point, plan, timing);
    point
        .actions()
        .iter()
        .map(|&a| {
            let w = plan.probability(point, a);
            if w > 0.0 {
                w * expected_utility_against(tree, a, point, plan, &reference).expect("action from node")
            } else {
                0.0
            }
        })
        .sum()
}

pub fn standard_utility(outcome: &TerminalOutcome, pref: StandardPreference) -> f64 {
    pref.utility_of(outcome.consumer.value + outcome.consumer.money)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_game_tree, PriceOffer, Stage, State};
    use approx::assert_abs_diff_eq;

    fn params() -> ModelParams {
        ModelParams::new(10.0, 4.0, 0.5, 1.0, 0.5).unwrap()
    }

    fn tree(p1: f64, p2: f64) -> GameTree {
        build_game_tree(&params(), &PriceOffer::committed(p1, p2).unwrap())
    }

    #[test]
    fn utility_with_matching_reference() {
        let k = Payoff2D {
            value: 10.0,
            money: -7.0,
        };
        let r = riskless_utility(k, &ReferenceDistribution::degenerate(k), &params());
        assert_eq!(r.total, 3.0);
        assert_eq!(r.loss_value, 0.0);
        assert_eq!(r.loss_money, 0.0);
    }

    #[test]
    fn utility_with_mixed_value_reference() {
        let reference = ReferenceDistribution {
            value: Marginal::from_weighted([(0.5, 10.0), (0.5, 4.0)]),
            money: Marginal::degenerate(-7.0),
        };
        let r = riskless_utility(
            Payoff2D {
                value: 4.0,
                money: -7.0,
            },
            &reference,
            &params(),
        );
        assert_abs_diff_eq!(r.value_part, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.money_part, -7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.total, -6.0, epsilon = 1e-12);

        let reference = ReferenceDistribution {
            value: Marginal::from_weighted([(0.5, 10.0), (0.5, 4.0)]),
            money: Marginal::degenerate(0.0),
        };
        let r = riskless_utility(Payoff2D::NOTHING, &reference, &params());
        assert_abs_diff_eq!(r.total, -7.0, epsilon = 1e-12);
    }

    #[test]
    fn marginals_merge_and_sort() {
        let m = Marginal::from_weighted([(0.25, 3.0), (0.0, 9.0), (0.5, -1.0), (0.25, 3.0)]);
        assert_eq!(m.support(), &[(0.5, -1.0), (0.5, 3.0)]);
    }

    #[test]
    fn reference_for_prepurchase_plan() {
        let t = tree(7.0, 10.0);
        let r = reference_from_plan(
            &t,
            DecisionPoint::Advance,
            &Plan::degenerate(true, false, false),
            ReferenceTiming::RecentBelief,
        );
        assert_eq!(r.value.support(), &[(0.5, 4.0), (0.5, 10.0)]);
        assert_eq!(r.money.support(), &[(1.0, -7.0)]);
        assert!(r.is_valid());
    }

    #[test]
    fn reference_at_spot_node() {
        let t = tree(7.0, 10.0);
        let plan = Plan::degenerate(false, true, false);
        let recent = reference_from_plan(
            &t,
            DecisionPoint::Spot(State::High),
            &plan,
            ReferenceTiming::RecentBelief,
        );
        assert_eq!(
            recent,
            ReferenceDistribution::degenerate(Payoff2D {
                value: 10.0,
                money: -10.0
            })
        );

        let initial = reference_from_plan(
            &t,
            DecisionPoint::Spot(State::Low),
            &plan,
            ReferenceTiming::InitialBelief,
        );
        assert_eq!(initial.value.support(), &[(0.5, 0.0), (0.5, 10.0)]);
        assert_eq!(initial.money.support(), &[(0.5, -10.0), (0.5, 0.0)]);
    }

    #[test]
    fn expected_utility_matches_hand_values() {
        let t = tree(7.0, 10.0);
        let plan = Plan::degenerate(true, true, false);
        let eu = |a, pt| expected_utility(&t, a, pt, &plan, ReferenceTiming::RecentBelief).unwrap();
        // E[ω] − p1 − (1−q)qλ^V(H−L)
        assert_abs_diff_eq!(eu(Action::Prepurchase, DecisionPoint::Advance), -1.5, epsilon = 1e-12);
        // q(H−p2−λ^M(p2−p1)) + (1−q)(−λ^V E[ω])
        assert_abs_diff_eq!(eu(Action::Wait, DecisionPoint::Advance), -4.25, epsilon = 1e-12);
        assert_abs_diff_eq!(eu(Action::Buy, DecisionPoint::Spot(State::High)), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            eu(Action::Reject, DecisionPoint::Spot(State::High)),
            -10.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn invalid_action_is_an_error() {
        let t = tree(7.0, 10.0);
        let err = expected_utility(
            &t,
            Action::Buy,
            DecisionPoint::Advance,
            &Plan::degenerate(true, true, false),
            ReferenceTiming::RecentBelief,
        );
        assert!(matches!(
            err,
            Err(UtilityError::InvalidAction {
                action: Action::Buy,
                ..
            })
        ));
    }

    #[test]
    fn standard_utilities() {
        let t = tree(7.0, 10.0);
        let pre_h = t.root().find("T1/prepurchase/H").unwrap().outcome().unwrap();
        assert_eq!(standard_utility(pre_h, StandardPreference::RiskNeutral), 3.0);
        let reject = t.root().find("T2L/reject").unwrap().outcome().unwrap();
        assert_eq!(
            standard_utility(reject, StandardPreference::RiskAverse { curvature: 1.0 }),
            0.0
        );
        let pre_l = t.root().find("T1/prepurchase/L").unwrap().outcome().unwrap();
        let v = standard_utility(pre_l, StandardPreference::RiskAverse { curvature: 1.0 });
        assert_abs_diff_eq!(v, 1.0 - 3f64.exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(v, -19.0855, epsilon = 1e-4);
        assert!(matches!(t.root().find("T2L/reject").unwrap().stage, Stage::Terminal(_)));
    }

    #[test]
    fn curvature_must_be_positive() {
        assert!(StandardPreference::risk_averse(0.0).is_err());
        assert!(StandardPreference::risk_averse(-1.0).is_err());
        assert!(StandardPreference::risk_averse(0.5).is_ok());
    }
}
