//! The advance-purchase game: environment primitives, seller offers, the
//! extensive-form tree and the consumer's plan space.
//!
//! The tree always has the same shape:
//!
//! ```text
//! T1 ─ prepurchase ─ chance ─ H ─ terminal (H, -p1)
//!    │                      └ L ─ terminal (L, -p1)
//!    └ wait ─────── chance ─ H ─ T2H ─ buy    ─ terminal (H, -p2^H)
//!                           │        └ reject ─ terminal (0, 0)
//!                           └ L ─ T2L ─ buy    ─ terminal (L, -p2^L)
//!                                    └ reject ─ terminal (0, 0)
//! ```

use std::fmt;

use thiserror::Error;

/// Comparison tolerance for prices and utilities.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("H ≤ L: high value {high} must exceed low value {low}")]
    HighNotAboveLow { high: f64, low: f64 },
    #[error("L ≤ 0: low value {0} must be positive")]
    LowNotPositive(f64),
    #[error("q ∉ (0,1): probability of the high state is {0}")]
    ProbabilityOutOfRange(f64),
    #[error("{name} < 0: loss coefficient is {value}")]
    NegativeLossCoefficient { name: &'static str, value: f64 },
    #[error("{name} is not finite")]
    NonFinite { name: &'static str },
    #[error("{name} < 0: price is {value}")]
    NegativePrice { name: &'static str, value: f64 },
    #[error("plan probability {name} = {value} is outside [0,1]")]
    PlanProbability { name: &'static str, value: f64 },
}

/// Primitives of the environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    high: f64,
    low: f64,
    q: f64,
    lambda_v: f64,
    lambda_m: f64,
}

impl ModelParams {
    pub fn new(high: f64, low: f64, q: f64, lambda_v: f64, lambda_m: f64) -> Result<Self, DomainError> {
        for (name, x) in [
            ("H", high),
            ("L", low),
            ("q", q),
            ("lambda_v", lambda_v),
            ("lambda_m", lambda_m),
        ] {
            if !x.is_finite() {
                return Err(DomainError::NonFinite { name });
            }
        }
        if high <= low {
            return Err(DomainError::HighNotAboveLow { high, low });
        }
        if low <= 0.0 {
            return Err(DomainError::LowNotPositive(low));
        }
        if q <= 0.0 || q >= 1.0 {
            return Err(DomainError::ProbabilityOutOfRange(q));
        }
        if lambda_v < 0.0 {
            return Err(DomainError::NegativeLossCoefficient {
                name: "lambda_v",
                value: lambda_v,
            });
        }
        if lambda_m < 0.0 {
            return Err(DomainError::NegativeLossCoefficient {
                name: "lambda_m",
                value: lambda_m,
            });
        }
        Ok(Self {
            high,
            low,
            q,
            lambda_v,
            lambda_m,
        })
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    /// Probability of the high state.
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn lambda_v(&self) -> f64 {
        self.lambda_v
    }

    pub fn lambda_m(&self) -> f64 {
        self.lambda_m
    }

    /// E[ω] = q·H + (1−q)·L.
    pub fn expected_value(&self) -> f64 {
        self.q * self.high + (1.0 - self.q) * self.low
    }

    pub fn value(&self, state: State) -> f64 {
        match state {
            State::High => self.high,
            State::Low => self.low,
        }
    }

    pub fn probability(&self, state: State) -> f64 {
        match state {
            State::High => self.q,
            State::Low => 1.0 - self.q,
        }
    }

    /// Same environment with different loss coefficients.
    pub fn with_losses(&self, lambda_v: f64, lambda_m: f64) -> Result<Self, DomainError> {
        Self::new(self.high, self.low, self.q, lambda_v, lambda_m)
    }
}

/// State of nature realized before the spot market opens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum State {
    High,
    Low,
}

impl State {
    pub const ALL: [State; 2] = [State::High, State::Low];

    pub fn label(self) -> &'static str {
        match self {
            State::High => "H",
            State::Low => "L",
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Consumer actions. `Prepurchase`/`Wait` are available at T1, `Buy`/`Reject` at T2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Prepurchase,
    Wait,
    Buy,
    Reject,
}

impl Action {
    pub fn label(self) -> &'static str {
        match self {
            Action::Prepurchase => "prepurchase",
            Action::Wait => "wait",
            Action::Buy => "buy",
            Action::Reject => "reject",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How the spot price is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpotRegime {
    /// One spot price announced together with the advance price.
    Committed { p2: f64 },
    /// State-contingent spot prices chosen after the state is learned.
    Flexible { p2_high: f64, p2_low: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceOffer {
    p1: f64,
    regime: SpotRegime,
}

impl PriceOffer {
    pub fn new(p1: f64, regime: SpotRegime) -> Result<Self, DomainError> {
        check_price("p1", p1)?;
        match regime {
            SpotRegime::Committed { p2 } => check_price("p2", p2)?,
            SpotRegime::Flexible { p2_high, p2_low } => {
                check_price("p2_H", p2_high)?;
                check_price("p2_L", p2_low)?;
            }
        }
        Ok(Self { p1, regime })
    }

    pub fn committed(p1: f64, p2: f64) -> Result<Self, DomainError> {
        Self::new(p1, SpotRegime::Committed { p2 })
    }

    pub fn flexible(p1: f64, p2_high: f64, p2_low: f64) -> Result<Self, DomainError> {
        Self::new(p1, SpotRegime::Flexible { p2_high, p2_low })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn regime(&self) -> SpotRegime {
        self.regime
    }

    /// Spot price the consumer faces at T2 in `state`.
    pub fn spot_price(&self, state: State) -> f64 {
        match (self.regime, state) {
            (SpotRegime::Committed { p2 }, _) => p2,
            (SpotRegime::Flexible { p2_high, .. }, State::High) => p2_high,
            (SpotRegime::Flexible { p2_low, .. }, State::Low) => p2_low,
        }
    }

    /// Same spot regime, different advance price.
    pub fn with_p1(&self, p1: f64) -> Result<Self, DomainError> {
        Self::new(p1, self.regime)
    }
}

fn check_price(name: &'static str, value: f64) -> Result<(), DomainError> {
    if !value.is_finite() {
        return Err(DomainError::NonFinite { name });
    }
    if value < 0.0 {
        return Err(DomainError::NegativePrice { name, value });
    }
    Ok(())
}

/// Consumer material payoff: consumption value and (non-positive) money.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoff2D {
    pub value: f64,
    pub money: f64,
}

impl Payoff2D {
    pub const NOTHING: Payoff2D = Payoff2D { value: 0.0, money: 0.0 };

    pub fn purchase(value: f64, price: f64) -> Self {
        Self { value, money: -price }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalOutcome {
    pub consumer: Payoff2D,
    pub seller_profit: f64,
    pub path: Vec<&'static str>,
}

/// A consumer decision node, addressed independently of any tree instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DecisionPoint {
    Advance,
    Spot(State),
}

impl DecisionPoint {
    pub const ALL: [DecisionPoint; 3] = [
        DecisionPoint::Advance,
        DecisionPoint::Spot(State::High),
        DecisionPoint::Spot(State::Low),
    ];

    pub fn label(self) -> &'static str {
        match self {
            DecisionPoint::Advance => "T1",
            DecisionPoint::Spot(State::High) => "T2H",
            DecisionPoint::Spot(State::Low) => "T2L",
        }
    }

    pub fn actions(self) -> [Action; 2] {
        match self {
            DecisionPoint::Advance => [Action::Prepurchase, Action::Wait],
            DecisionPoint::Spot(_) => [Action::Buy, Action::Reject],
        }
    }
}

impl fmt::Display for DecisionPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    AdvanceStage,
    Chance,
    SpotStage(State),
    Terminal(TerminalOutcome),
}

/// Edge label: a consumer action or a chance move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Act(Action),
    Nature(State),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub label: Move,
    /// Set for chance moves only.
    pub probability: Option<f64>,
    pub child: GameNode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameNode {
    pub id: &'static str,
    pub stage: Stage,
    pub children: Vec<Edge>,
}

impl GameNode {
    pub fn decision_point(&self) -> Option<DecisionPoint> {
        match self.stage {
            Stage::AdvanceStage => Some(DecisionPoint::Advance),
            Stage::SpotStage(s) => Some(DecisionPoint::Spot(s)),
            _ => None,
        }
    }

    /// Child reached by a consumer action, if the action is available here.
    pub fn after(&self, action: Action) -> Option<&GameNode> {
        self.children
            .iter()
            .find(|e| e.label == Move::Act(action))
            .map(|e| &e.child)
    }

    pub fn outcome(&self) -> Option<&TerminalOutcome> {
        match &self.stage {
            Stage::Terminal(o) => Some(o),
            _ => None,
        }
    }

    /// Depth-first search by node id.
    pub fn find(&self, id: &str) -> Option<&GameNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|e| e.child.find(id))
    }

    pub fn terminals(&self) -> Vec<&TerminalOutcome> {
        let mut out = Vec::new();
        self.collect_terminals(&mut out);
        out
    }

    fn collect_terminals<'a>(&'a self, out: &mut Vec<&'a TerminalOutcome>) {
        if let Stage::Terminal(o) = &self.stage {
            out.push(o);
        }
        for e in &self.children {
            e.child.collect_terminals(out);
        }
    }
}

/// The game below a concrete, observed price offer.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTree {
    params: ModelParams,
    offer: PriceOffer,
    root: GameNode,
}

impl GameTree {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn offer(&self) -> &PriceOffer {
        &self.offer
    }

    pub fn root(&self) -> &GameNode {
        &self.root
    }

    pub fn node(&self, point: DecisionPoint) -> &GameNode {
        match point {
            DecisionPoint::Advance => &self.root,
            DecisionPoint::Spot(state) => {
                let chance = self.root.after(Action::Wait).expect("wait edge");
                chance
                    .children
                    .iter()
                    .find(|e| e.label == Move::Nature(state))
                    .map(|e| &e.child)
                    .expect("chance edge")
            }
        }
    }

    /// Terminal distribution induced by `plan` and chance, conditional on reaching `node`.
    pub fn outcome_distribution<'a>(&'a self, node: &'a GameNode, plan: &Plan) -> Vec<(f64, &'a TerminalOutcome)> {
        let mut out = Vec::new();
        walk(node, plan, 1.0, &mut out);
        out
    }
}

fn walk<'a>(node: &'a GameNode, plan: &Plan, mass: f64, out: &mut Vec<(f64, &'a TerminalOutcome)>) {
    if let Stage::Terminal(o) = &node.stage {
        out.push((mass, o));
        return;
    }
    let point = node.decision_point();
    for e in &node.children {
        let p = match (e.label, point) {
            (Move::Nature(_), _) => e.probability.unwrap_or(0.0),
            (Move::Act(a), Some(dp)) => plan.probability(dp, a),
            (Move::Act(_), None) => 0.0,
        };
        if p > 0.0 {
            walk(&e.child, plan, mass * p, out);
        }
    }
}

fn terminal(id: &'static str, path: Vec<&'static str>, consumer: Payoff2D) -> GameNode {
    GameNode {
        id,
        stage: Stage::Terminal(TerminalOutcome {
            consumer,
            seller_profit: -consumer.money,
            path,
        }),
        children: Vec::new(),
    }
}

fn spot_node(params: &ModelParams, offer: &PriceOffer, state: State) -> GameNode {
    let (id, buy_id, reject_id) = match state {
        State::High => ("T2H", "T2H/buy", "T2H/reject"),
        State::Low => ("T2L", "T2L/buy", "T2L/reject"),
    };
    let price = offer.spot_price(state);
    GameNode {
        id,
        stage: Stage::SpotStage(state),
        children: vec![
            Edge {
                label: Move::Act(Action::Buy),
                probability: None,
                child: terminal(
                    buy_id,
                    vec!["T1", "wait", id, "buy"],
                    Payoff2D::purchase(params.value(state), price),
                ),
            },
            Edge {
                label: Move::Act(Action::Reject),
                probability: None,
                child: terminal(reject_id, vec!["T1", "wait", id, "reject"], Payoff2D::NOTHING),
            },
        ],
    }
}

pub fn build_game_tree(params: &ModelParams, offer: &PriceOffer) -> GameTree {
    let prepurchase = GameNode {
        id: "T1/prepurchase",
        stage: Stage::Chance,
        children: State::ALL
            .iter()
            .map(|&s| Edge {
                label: Move::Nature(s),
                probability: Some(params.probability(s)),
                child: terminal(
                    match s {
                        State::High => "T1/prepurchase/H",
                        State::Low => "T1/prepurchase/L",
                    },
                    vec!["T1", "prepurchase", s.label()],
                    Payoff2D::purchase(params.value(s), offer.p1()),
                ),
            })
            .collect(),
    };
    let wait = GameNode {
        id: "T1/wait",
        stage: Stage::Chance,
        children: State::ALL
            .iter()
            .map(|&s| Edge {
                label: Move::Nature(s),
                probability: Some(params.probability(s)),
                child: spot_node(params, offer, s),
            })
            .collect(),
    };
    let root = GameNode {
        id: "T1",
        stage: Stage::AdvanceStage,
        children: vec![
            Edge {
                label: Move::Act(Action::Prepurchase),
                probability: None,
                child: prepurchase,
            },
            Edge {
                label: Move::Act(Action::Wait),
                probability: None,
                child: wait,
            },
        ],
    };
    GameTree {
        params: *params,
        offer: *offer,
        root,
    }
}

/// A behavior strategy for the consumer: the probability of the purchasing
/// action at each decision node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan {
    pub advance: f64,
    pub buy_high: f64,
    pub buy_low: f64,
}

impl Plan {
    pub fn new(advance: f64, buy_high: f64, buy_low: f64) -> Result<Self, DomainError> {
        for (name, value) in [("advance", advance), ("buy_high", buy_high), ("buy_low", buy_low)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(DomainError::PlanProbability { name, value });
            }
        }
        Ok(Self {
            advance,
            buy_high,
            buy_low,
        })
    }

    pub fn degenerate(prepurchase: bool, buy_high: bool, buy_low: bool) -> Self {
        let f = |b: bool| if b { 1.0 } else { 0.0 };
        Self {
            advance: f(prepurchase),
            buy_high: f(buy_high),
            buy_low: f(buy_low),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        [self.advance, self.buy_high, self.buy_low]
            .iter()
            .all(|&p| p == 0.0 || p == 1.0)
    }

    pub fn buy(&self, state: State) -> f64 {
        match state {
            State::High => self.buy_high,
            State::Low => self.buy_low,
        }
    }

    /// Probability the plan assigns to `action` at `point`; zero for unavailable actions.
    pub fn probability(&self, point: DecisionPoint, action: Action) -> f64 {
        match (point, action) {
            (DecisionPoint::Advance, Action::Prepurchase) => self.advance,
            (DecisionPoint::Advance, Action::Wait) => 1.0 - self.advance,
            (DecisionPoint::Spot(s), Action::Buy) => self.buy(s),
            (DecisionPoint::Spot(s), Action::Reject) => 1.0 - self.buy(s),
            _ => 0.0,
        }
    }

    /// Same plan with the sub-plan at `point` replaced by `prob` on the purchasing action.
    pub fn with_purchase_probability(&self, point: DecisionPoint, prob: f64) -> Self {
        let mut p = *self;
        match point {
            DecisionPoint::Advance => p.advance = prob,
            DecisionPoint::Spot(State::High) => p.buy_high = prob,
            DecisionPoint::Spot(State::Low) => p.buy_low = prob,
        }
        p
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.advance, self.buy_high, self.buy_low)
    }
}

/// The eight pure plans, lexicographic in (advance, buy_high, buy_low).
pub fn enumerate_degenerate_plans() -> Vec<Plan> {
    (0..8u8)
        .map(|bits| Plan::degenerate(bits & 4 != 0, bits & 2 != 0, bits & 1 != 0))
        .collect()
}
