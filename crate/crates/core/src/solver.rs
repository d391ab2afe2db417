//! Brute-force equilibrium computation over the game tree.
//!
//! Nothing in this module uses the closed-form cutoff expressions; it only
//! evaluates expected utilities on the tree and compares them, so it serves
//! as the independent check on [`crate::closed_form`].

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{
    build_game_tree, enumerate_degenerate_plans, Action, DecisionPoint, DomainError, GameTree, ModelParams, Plan,
    PriceOffer, SpotRegime, State, EPS,
};
use crate::preferences::{
    expected_utility_against, plan_expected_utility, reference_from_plan, PreferenceModel, ReferenceTiming,
    StandardPreference, UtilityError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no degenerate personal equilibrium at p1 = {p1} ({timing:?}, {regime:?})")]
    NoEquilibrium {
        p1: f64,
        regime: SpotRegime,
        timing: ReferenceTiming,
    },
    #[error("purchase decision is not downward-closed in p1; offending samples {samples:?}")]
    NotMonotone { samples: Vec<(f64, bool)> },
    #[error("consumer never pre-purchases, even at p1 = 0")]
    NeverPurchases,
    #[error("consumer still pre-purchases at the bracket top p1 = {upper}")]
    BracketTooNarrow { upper: f64 },
    #[error("grid step must lie in (0, 0.5], got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub plan: Plan,
    pub t1_expected_utility: f64,
    pub credible_nodes: BTreeSet<&'static str>,
    pub spot_actions: BTreeMap<State, Action>,
    pub seller_expected_profit: f64,
    pub preference: PreferenceModel,
}

impl EquilibriumResult {
    pub fn prepurchases(&self) -> bool {
        self.plan.advance == 1.0
    }
}

fn eu_pair(tree: &GameTree, plan: &Plan, point: DecisionPoint, timing: ReferenceTiming) -> [(Action, f64); 2] {
    let reference = reference_from_plan(tree, point, plan, timing);
    point.actions().map(|a| {
        (
            a,
            expected_utility_against(tree, a, point, plan, &reference).expect("action from node"),
        )
    })
}

/// Every action the plan plays with positive probability at `point` is a
/// best response (within [`EPS`]) to the reference the plan itself induces.
pub fn is_credible_at(tree: &GameTree, plan: &Plan, point: DecisionPoint, timing: ReferenceTiming) -> bool {
    let eus = eu_pair(tree, plan, point, timing);
    let best = eus.iter().map(|&(_, u)| u).fold(f64::NEG_INFINITY, f64::max);
    eus.iter()
        .all(|&(a, u)| plan.probability(point, a) <= 0.0 || u >= best - EPS)
}

fn credible_nodes(tree: &GameTree, plan: &Plan, timing: ReferenceTiming) -> BTreeSet<&'static str> {
    DecisionPoint::ALL
        .iter()
        .filter(|&&pt| is_credible_at(tree, plan, pt, timing))
        .map(|pt| pt.label())
        .collect()
}

/// Spot-market preferred action: buy iff the price does not exceed the realized value.
pub fn spot_ppe_action(state: State, spot_price: f64, params: &ModelParams) -> Action {
    if spot_price <= params.value(state) + EPS {
        Action::Buy
    } else {
        Action::Reject
    }
}

/// Spot actions supportable by some credible degenerate sub-plan:
/// reject iff p > ω/(1+λ^M), buy iff p ≤ (1+λ^V)·ω.
pub fn spot_credible_action_set(state: State, spot_price: f64, params: &ModelParams) -> BTreeSet<Action> {
    let omega = params.value(state);
    let mut set = BTreeSet::new();
    if spot_price <= (1.0 + params.lambda_v()) * omega {
        set.insert(Action::Buy);
    }
    if spot_price > omega / (1.0 + params.lambda_m()) {
        set.insert(Action::Reject);
    }
    set
}

/// Preferred credible spot sub-plan under recent-belief references, found by
/// evaluating both degenerate sub-plans on the tree. Ties go to buying.
fn spot_ppe_by_enumeration(tree: &GameTree, state: State) -> Option<bool> {
    let point = DecisionPoint::Spot(state);
    let mut best: Option<(bool, f64)> = None;
    for buys in [true, false] {
        let plan = Plan::degenerate(false, true, true).with_purchase_probability(point, if buys { 1.0 } else { 0.0 });
        if !is_credible_at(tree, &plan, point, ReferenceTiming::RecentBelief) {
            continue;
        }
        let u = plan_expected_utility(tree, point, &plan, ReferenceTiming::RecentBelief);
        match best {
            Some((_, b)) if u <= b + EPS => {}
            _ => best = Some((buys, u)),
        }
    }
    best.map(|(b, _)| b)
}

/// Highest T1 utility wins; within [`EPS`] of the best, the lexicographically
/// largest plan wins (purchase over no purchase, earlier over later).
fn select_preferred(candidates: Vec<(Plan, f64)>) -> Option<(Plan, f64)> {
    let best = candidates.iter().map(|&(_, u)| u).fold(f64::NEG_INFINITY, f64::max);
    candidates.into_iter().filter(|&(_, u)| u >= best - EPS).max_by(|a, b| {
        let key = |p: &Plan| (p.advance, p.buy_high, p.buy_low);
        key(&a.0).partial_cmp(&key(&b.0)).expect("finite probabilities")
    })
}

fn seller_profit(tree: &GameTree, plan: &Plan) -> f64 {
    tree.outcome_distribution(tree.root(), plan)
        .iter()
        .map(|(p, o)| p * o.seller_profit)
        .sum()
}

fn spot_actions_of(plan: &Plan) -> BTreeMap<State, Action> {
    State::ALL
        .iter()
        .map(|&s| {
            (
                s,
                if plan.buy(s) == 1.0 {
                    Action::Buy
                } else {
                    Action::Reject
                },
            )
        })
        .collect()
}

/// Preferred personal equilibrium among degenerate plans.
///
/// Recent belief: each spot sub-plan is the preferred credible one at its
/// node; of the two completions at T1, keep those credible there and take the
/// best. Initial belief: the best of the eight plans credible at every node.
pub fn solve_ppe(
    params: &ModelParams,
    offer: &PriceOffer,
    timing: ReferenceTiming,
) -> Result<EquilibriumResult, SolveError> {
    let tree = build_game_tree(params, offer);
    let no_eq = || SolveError::NoEquilibrium {
        p1: offer.p1(),
        regime: offer.regime(),
        timing,
    };

    let candidates: Vec<Plan> = match timing {
        ReferenceTiming::RecentBelief => {
            let high = spot_ppe_by_enumeration(&tree, State::High).ok_or_else(no_eq)?;
            let low = spot_ppe_by_enumeration(&tree, State::Low).ok_or_else(no_eq)?;
            [true, false]
                .iter()
                .map(|&pre| Plan::degenerate(pre, high, low))
                .filter(|plan| is_credible_at(&tree, plan, DecisionPoint::Advance, timing))
                .collect()
        }
        ReferenceTiming::InitialBelief => enumerate_degenerate_plans()
            .into_iter()
            .filter(|plan| {
                DecisionPoint::ALL
                    .iter()
                    .all(|&pt| is_credible_at(&tree, plan, pt, timing))
            })
            .collect(),
    };

    let scored = candidates
        .into_iter()
        .map(|plan| {
            let u = plan_expected_utility(&tree, DecisionPoint::Advance, &plan, timing);
            (plan, u)
        })
        .collect();
    let (plan, t1_expected_utility) = select_preferred(scored).ok_or_else(no_eq)?;

    Ok(EquilibriumResult {
        plan,
        t1_expected_utility,
        credible_nodes: credible_nodes(&tree, &plan, timing),
        spot_actions: spot_actions_of(&plan),
        seller_expected_profit: seller_profit(&tree, &plan),
        preference: timing.into(),
    })
}

/// Subgame-perfect behavior of a consumer with standard preferences.
pub fn solve_standard(params: &ModelParams, offer: &PriceOffer, pref: StandardPreference) -> EquilibriumResult {
    let tree = build_game_tree(params, offer);
    let u = |x: f64| pref.utility_of(x);

    let mut spot_value = 0.0;
    let mut buys = [false; 2];
    for (i, &s) in State::ALL.iter().enumerate() {
        let buy = u(params.value(s) - offer.spot_price(s));
        buys[i] = buy >= u(0.0) - EPS;
        spot_value += params.probability(s) * if buys[i] { buy } else { u(0.0) };
    }
    let advance: f64 = State::ALL
        .iter()
        .map(|&s| params.probability(s) * u(params.value(s) - offer.p1()))
        .sum();
    let prepurchase = advance >= spot_value - EPS;
    let plan = Plan::degenerate(prepurchase, buys[0], buys[1]);

    EquilibriumResult {
        plan,
        t1_expected_utility: if prepurchase { advance } else { spot_value },
        credible_nodes: DecisionPoint::ALL.iter().map(|pt| pt.label()).collect(),
        spot_actions: spot_actions_of(&plan),
        seller_expected_profit: seller_profit(&tree, &plan),
        preference: pref.into(),
    }
}

/// Result of a cutoff search. `no_equilibrium_at` lists every probed `p1`
/// where no degenerate personal equilibrium existed (counted as no purchase).
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffSearch {
    pub cutoff: f64,
    pub no_equilibrium_at: Vec<f64>,
}

/// Bracket top for the advance price: H·(2 + λ^V + λ^M).
pub fn cutoff_bracket_upper(params: &ModelParams) -> f64 {
    params.high() * (2.0 + params.lambda_v() + params.lambda_m())
}

const CUTOFF_GRID: usize = 64;
const MAX_BISECTIONS: usize = 60;
const CUTOFF_WIDTH: f64 = 1e-10;

/// Largest advance price at which the solver prescribes pre-purchase,
/// found by a coarse scan (which also checks downward-closedness) followed
/// by bisection inside the switching cell.
pub fn bisect_cutoff_p1(
    params: &ModelParams,
    regime: SpotRegime,
    preference: PreferenceModel,
) -> Result<CutoffSearch, SolveError> {
    let mut no_equilibrium_at = Vec::new();
    let mut purchases = |p1: f64| -> Result<bool, SolveError> {
        let offer = PriceOffer::new(p1, regime)?;
        match preference {
            PreferenceModel::KrRecentBelief | PreferenceModel::KrInitialBelief => {
                let timing = preference.timing().expect("kr preference");
                match solve_ppe(params, &offer, timing) {
                    Ok(r) => Ok(r.prepurchases()),
                    Err(SolveError::NoEquilibrium { .. }) => {
                        no_equilibrium_at.push(p1);
                        Ok(false)
                    }
                    Err(e) => Err(e),
                }
            }
            PreferenceModel::RiskNeutral | PreferenceModel::RiskAverse { .. } => {
                let pref = preference.standard().expect("standard preference");
                Ok(solve_standard(params, &offer, pref).prepurchases())
            }
        }
    };

    let upper = cutoff_bracket_upper(params);
    let samples: Vec<(f64, bool)> = (0..=CUTOFF_GRID)
        .map(|i| {
            let p1 = upper * i as f64 / CUTOFF_GRID as f64;
            purchases(p1).map(|b| (p1, b))
        })
        .collect::<Result<_, _>>()?;

    if !samples[0].1 {
        return Err(SolveError::NeverPurchases);
    }
    if samples[CUTOFF_GRID].1 {
        return Err(SolveError::BracketTooNarrow { upper });
    }
    let switch = samples.iter().position(|&(_, b)| !b).expect("last sample is false");
    if samples[switch..].iter().any(|&(_, b)| b) {
        let offending = samples[switch - 1..]
            .iter()
            .copied()
            .filter(|&(_, b)| b)
            .collect::<Vec<_>>();
        let mut shown = vec![samples[switch]];
        shown.extend(offending);
        return Err(SolveError::NotMonotone { samples: shown });
    }

    let (mut lo, mut hi) = (samples[switch - 1].0, samples[switch].0);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= CUTOFF_WIDTH {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if purchases(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    no_equilibrium_at.sort_by(f64::total_cmp);
    Ok(CutoffSearch {
        cutoff: lo,
        no_equilibrium_at,
    })
}

fn probability_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| (i as f64 * step).min(1.0)).collect();
    if 1.0 - grid[n] > 1e-12 {
        grid.push(1.0);
    } else {
        grid[n] = 1.0;
    }
    grid
}

/// A grid plan that is an admissible equilibrium candidate yet strictly
/// beats the degenerate PPE at T1, if any.
///
/// Admissible means credible at every node; under recent belief each spot
/// sub-plan must additionally be the preferred credible sub-plan on the grid
/// at its node, ties going to purchase (recent-belief spot behavior cannot be
/// dictated from T1).
pub fn find_dominating_grid_plan(
    params: &ModelParams,
    offer: &PriceOffer,
    step: f64,
    timing: ReferenceTiming,
) -> Result<Option<(Plan, f64)>, SolveError> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(SolveError::InvalidStep(step));
    }
    let ppe = solve_ppe(params, offer, timing)?;
    let tree = build_game_tree(params, offer);
    let grid = probability_grid(step);

    let spot_ok = |state: State| -> Vec<bool> {
        let point = DecisionPoint::Spot(state);
        match timing {
            ReferenceTiming::InitialBelief => vec![true; grid.len()],
            ReferenceTiming::RecentBelief => {
                let scored: Vec<Option<f64>> = grid
                    .iter()
                    .map(|&x| {
                        let plan = Plan::degenerate(false, false, false).with_purchase_probability(point, x);
                        is_credible_at(&tree, &plan, point, timing)
                            .then(|| plan_expected_utility(&tree, point, &plan, timing))
                    })
                    .collect();
                let best = scored.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
                // Ties go to the highest purchase probability.
                let chosen = scored.iter().rposition(|s| matches!(s, Some(u) if *u >= best - EPS));
                (0..grid.len()).map(|i| Some(i) == chosen).collect()
            }
        }
    };
    let ok_high = spot_ok(State::High);
    let ok_low = spot_ok(State::Low);

    for &a in &grid {
        for (ih, &bh) in grid.iter().enumerate() {
            if !ok_high[ih] {
                continue;
            }
            for (il, &bl) in grid.iter().enumerate() {
                if !ok_low[il] {
                    continue;
                }
                let plan = Plan {
                    advance: a,
                    buy_high: bh,
                    buy_low: bl,
                };
                if !DecisionPoint::ALL
                    .iter()
                    .all(|&pt| is_credible_at(&tree, &plan, pt, timing))
                {
                    continue;
                }
                let u = plan_expected_utility(&tree, DecisionPoint::Advance, &plan, timing);
                if u > ppe.t1_expected_utility + EPS {
                    return Ok(Some((plan, u)));
                }
            }
        }
    }
    Ok(None)
}

/// True iff no admissible grid plan strictly beats the degenerate PPE.
pub fn grid_mixed_plan_check(
    params: &ModelParams,
    offer: &PriceOffer,
    step: f64,
    timing: ReferenceTiming,
) -> Result<bool, SolveError> {
    Ok(find_dominating_grid_plan(params, offer, step, timing)?.is_none())
}

/// |EU(T1) − (q·EU(T2H) + (1−q)·EU(T2L))| under initial-belief references,
/// for a plan that waits at T1.
pub fn static_expectation_gap(tree: &GameTree, plan: &Plan) -> f64 {
    let timing = ReferenceTiming::InitialBelief;
    let params = tree.params();
    let t1 = plan_expected_utility(tree, DecisionPoint::Advance, plan, timing);
    let t2: f64 = State::ALL
        .iter()
        .map(|&s| params.probability(s) * plan_expected_utility(tree, DecisionPoint::Spot(s), plan, timing))
        .sum();
    (t1 - t2).abs()
}
