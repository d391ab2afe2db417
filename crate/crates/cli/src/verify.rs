//! Randomized verification of the closed forms against the brute-force solver.
//!
//! Parameters are drawn from a `ChaCha8Rng` seeded with `seed_from_u64`, so a
//! (config, seed) pair always yields the same draws on every platform:
//! H ∈ [2, 20], L ∈ (0, H), q ∈ (0.05, 0.95), λ^V, λ^M ∈ [0, 3].

use std::fmt::{self, Write as _};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kr_advance::closed_form::{
    commitment_decision, cutoff_advance_price, optimal_pricing_commit, optimal_pricing_flexible, risk_averse_cutoff,
    static_reference_bound,
};
use kr_advance::preferences::{expected_utility_against, reference_from_plan};
use kr_advance::solver::{
    bisect_cutoff_p1, grid_mixed_plan_check, solve_ppe, spot_ppe_action, static_expectation_gap, CutoffSearch,
};
use kr_advance::{
    build_game_tree, Action, DecisionPoint, ModelParams, Plan, PreferenceModel, PriceOffer, ReferenceTiming,
    SolveError, SpotRegime, State,
};

use crate::config::ScenarioConfig;
use crate::sweep::fmt9;

pub const ORACLE_TOL: f64 = 1e-6;
pub const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    /// closed-form cutoff equals the bisection cutoff on a p2 grid up to 2H
    OracleEquivalence,
    /// spot purchase iff price ≤ value, for any loss coefficients
    SpotRule,
    /// without loss aversion, committed profit is E[ω] and commitment is worthless
    LossNeutralBenchmark,
    /// committed optimum exceeds E[ω] and the consumer does pre-purchase there
    CommitmentPremium,
    /// flexible-pricing formula versus bisection; premium iff λ^M > 0
    FlexiblePricing,
    /// commit − flexible profit is positive iff λ^V > 0
    CommitmentGap,
    /// CARA cutoff below E[ω] and equal to the bisection cutoff
    RiskAversion,
    /// initial-belief cutoff at H within the static bound
    StaticBound,
    /// T1 utility of wait plans equals the expected T2 utility (initial belief)
    ExpectationIdentity,
    /// no mixed grid plan beats the degenerate equilibrium
    MixedPlans,
}

impl Check {
    pub const ALL: [Check; 10] = [
        Check::OracleEquivalence,
        Check::SpotRule,
        Check::LossNeutralBenchmark,
        Check::CommitmentPremium,
        Check::FlexiblePricing,
        Check::CommitmentGap,
        Check::RiskAversion,
        Check::StaticBound,
        Check::ExpectationIdentity,
        Check::MixedPlans,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::OracleEquivalence => "oracle_equivalence",
            Check::SpotRule => "spot_rule",
            Check::LossNeutralBenchmark => "loss_neutral_benchmark",
            Check::CommitmentPremium => "commitment_premium",
            Check::FlexiblePricing => "flexible_pricing",
            Check::CommitmentGap => "commitment_gap",
            Check::RiskAversion => "risk_aversion",
            Check::StaticBound => "static_bound",
            Check::ExpectationIdentity => "expectation_identity",
            Check::MixedPlans => "mixed_plans",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub type CutoffFormula = fn(f64, &ModelParams) -> f64;

fn closed_form_cutoff(p2: f64, params: &ModelParams) -> f64 {
    cutoff_advance_price(p2, params).cutoff
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// p2 grid points per draw for the oracle check, spread over (0, 2H].
    pub p2_points: usize,
    /// Formula under test; swapped out by harness self-tests.
    pub cutoff: CutoffFormula,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            p2_points: 50,
            cutoff: closed_form_cutoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub check: Check,
    pub draw: usize,
    pub params: ModelParams,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSummary {
    pub check: Check,
    pub passed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub seed: u64,
    pub draws: usize,
    pub summaries: Vec<CheckSummary>,
    pub failures: Vec<Failure>,
    /// Probed offers where no degenerate equilibrium existed: (draw, p1, spot regime).
    pub no_equilibrium: Vec<(usize, f64, SpotRegime)>,
}

pub fn sample_params(rng: &mut ChaCha8Rng) -> ModelParams {
    let high = rng.gen_range(2.0..=20.0);
    let low = loop {
        let l = rng.gen_range(0.0..high);
        if l > 0.0 {
            break l;
        }
    };
    let q = loop {
        let q = rng.gen_range(0.05..0.95);
        if q > 0.05 {
            break q;
        }
    };
    let lambda_v = rng.gen_range(0.0..=3.0);
    let lambda_m = rng.gen_range(0.0..=3.0);
    ModelParams::new(high, low, q, lambda_v, lambda_m).expect("sampled inside the domain")
}

type Outcome = Result<(), String>;

fn ensure(ok: bool, detail: impl FnOnce() -> String) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(detail())
    }
}

struct DrawContext<'a> {
    draw: usize,
    params: ModelParams,
    options: &'a VerifyOptions,
    grid_step: f64,
    no_equilibrium: Vec<(usize, f64, SpotRegime)>,
}

impl DrawContext<'_> {
    fn cutoff(&mut self, regime: SpotRegime, pref: PreferenceModel) -> Result<f64, String> {
        let CutoffSearch {
            cutoff,
            no_equilibrium_at,
        } = bisect_cutoff_p1(&self.params, regime, pref).map_err(|e| format!("bisection failed: {e}"))?;
        self.no_equilibrium
            .extend(no_equilibrium_at.into_iter().map(|p1| (self.draw, p1, regime)));
        Ok(cutoff)
    }

    fn ppe(
        &self,
        p1: f64,
        regime: SpotRegime,
        timing: ReferenceTiming,
    ) -> Result<kr_advance::EquilibriumResult, String> {
        let offer = PriceOffer::new(p1, regime).map_err(|e| e.to_string())?;
        solve_ppe(&self.params, &offer, timing).map_err(|e| e.to_string())
    }

    fn oracle(&mut self) -> Outcome {
        let h = self.params.high();
        let n = self.options.p2_points;
        let mut bad = Vec::new();
        for i in 1..=n {
            let p2 = 2.0 * h * i as f64 / n as f64;
            let closed = (self.options.cutoff)(p2, &self.params);
            let brute = self.cutoff(SpotRegime::Committed { p2 }, PreferenceModel::KrRecentBelief)?;
            if (closed - brute).abs() > ORACLE_TOL {
                bad.push((p2, closed, brute));
            }
        }
        ensure(bad.is_empty(), || {
            let (p2, c, b) = bad
                .iter()
                .copied()
                .max_by(|x, y| (x.1 - x.2).abs().total_cmp(&(y.1 - y.2).abs()))
                .unwrap();
            format!(
                "{} of {n} p2 points off by > {ORACLE_TOL:e}; worst p2={} closed={} brute={} region={}",
                bad.len(),
                fmt9(p2),
                fmt9(c),
                fmt9(b),
                cutoff_advance_price(p2, &self.params).region
            )
        })
    }

    fn spot_rule(&mut self, rng: &mut ChaCha8Rng) -> Outcome {
        let p = self.params;
        let variants = [p, p.with_losses(0.0, 0.0).unwrap(), p.with_losses(3.0, 3.0).unwrap()];
        for s in State::ALL {
            let w = p.value(s);
            for price in [w, w - 1e-7, w + 1e-7, rng.gen_range(0.0..3.0 * w)] {
                let expected = if price <= w { Action::Buy } else { Action::Reject };
                for v in &variants {
                    ensure(spot_ppe_action(s, price, v) == expected, || {
                        format!(
                            "rule at {s} price {} with λ=({}, {})",
                            fmt9(price),
                            v.lambda_v(),
                            v.lambda_m()
                        )
                    })?;
                }
                let solved = self.ppe(1.0, SpotRegime::Committed { p2: price }, ReferenceTiming::RecentBelief)?;
                ensure(solved.spot_actions[&s] == expected, || {
                    format!("enumerated spot choice at {s} price {}", fmt9(price))
                })?;
            }
            let (buy_edge, reject_edge) = credibility_edges(&p, s);
            ensure(
                (buy_edge - (1.0 + p.lambda_v()) * w).abs() <= EXACT_TOL * w.max(1.0),
                || format!("buy edge at {s}: brute {} vs (1+λV)ω", fmt9(buy_edge)),
            )?;
            ensure(
                (reject_edge - w / (1.0 + p.lambda_m())).abs() <= EXACT_TOL * w.max(1.0),
                || format!("reject edge at {s}: brute {} vs ω/(1+λM)", fmt9(reject_edge)),
            )?;
        }
        Ok(())
    }

    fn loss_neutral(&mut self) -> Outcome {
        let p0 = self.params.with_losses(0.0, 0.0).unwrap();
        let e = p0.expected_value();
        let commit = optimal_pricing_commit(&p0).expected_profit;
        let gap = commitment_decision(&p0).gap();
        ensure((commit - e).abs() <= EXACT_TOL && gap.abs() <= EXACT_TOL, || {
            format!("commit profit {} vs E {} gap {}", fmt9(commit), fmt9(e), fmt9(gap))
        })?;
        let brute = bisect_cutoff_p1(
            &p0,
            SpotRegime::Committed { p2: p0.high() },
            PreferenceModel::KrRecentBelief,
        )
        .map_err(|e| e.to_string())?
        .cutoff;
        ensure((brute - e).abs() <= ORACLE_TOL, || {
            format!("bisection at H {} vs E {}", fmt9(brute), fmt9(e))
        })
    }

    fn commitment_premium(&mut self) -> Outcome {
        let p = self.params;
        let rec = optimal_pricing_commit(&p);
        if p.lambda_v() > 0.0 || p.lambda_m() > 0.0 {
            ensure(rec.p1 > p.expected_value(), || {
                format!("p1* {} not above E {}", fmt9(rec.p1), fmt9(p.expected_value()))
            })?;
        }
        let ppe = self.ppe(
            rec.p1,
            SpotRegime::Committed { p2: p.high() },
            ReferenceTiming::RecentBelief,
        )?;
        ensure(ppe.prepurchases(), || {
            format!("no pre-purchase at (p1*, H) = ({}, {})", fmt9(rec.p1), fmt9(p.high()))
        })
    }

    fn flexible(&mut self) -> Outcome {
        let p = self.params;
        let f = optimal_pricing_flexible(&p);
        let e = p.expected_value();
        if p.lambda_m() > 0.0 {
            ensure(f.p1 > e, || {
                format!("flexible p1 {} not above E {}", fmt9(f.p1), fmt9(e))
            })?;
        } else {
            ensure((f.p1 - e).abs() <= EXACT_TOL, || {
                format!("flexible p1 {} differs from E {}", fmt9(f.p1), fmt9(e))
            })?;
        }
        let brute = self.cutoff(
            SpotRegime::Flexible {
                p2_high: p.high(),
                p2_low: p.low(),
            },
            PreferenceModel::KrRecentBelief,
        )?;
        ensure((brute - f.p1).abs() <= ORACLE_TOL, || {
            format!("flexible bisection {} vs formula {}", fmt9(brute), fmt9(f.p1))
        })
    }

    fn commitment_gap(&self) -> Outcome {
        let p = self.params;
        let gap = commitment_decision(&p).gap();
        let ok = if p.lambda_v() >= 0.1 {
            gap > EXACT_TOL
        } else if p.lambda_v() > 0.0 {
            gap > 0.0
        } else {
            gap.abs() <= EXACT_TOL
        };
        ensure(ok, || format!("gap {} with λV = {}", fmt9(gap), p.lambda_v()))
    }

    fn risk_aversion(&mut self, rng: &mut ChaCha8Rng) -> Outcome {
        let p = self.params;
        let a = rng.gen_range(0.05..=5.0);
        let root = risk_averse_cutoff(&p, a).map_err(|e| e.to_string())?;
        ensure(root < p.expected_value(), || {
            format!("a={a}: CARA cutoff {} not below E", fmt9(root))
        })?;
        let brute = self.cutoff(
            SpotRegime::Committed { p2: p.high() },
            PreferenceModel::RiskAverse { curvature: a },
        )?;
        ensure((brute - root).abs() <= ORACLE_TOL, || {
            format!("a={a}: bisection {} vs root {}", fmt9(brute), fmt9(root))
        })
    }

    fn static_bound(&mut self) -> Outcome {
        let p = self.params;
        let bound = static_reference_bound(&p);
        let brute = self.cutoff(SpotRegime::Committed { p2: p.high() }, PreferenceModel::KrInitialBelief)?;
        ensure(brute <= bound + ORACLE_TOL, || {
            format!(
                "initial-belief cutoff {} above bound {} (E/(1+λM) = {})",
                fmt9(brute),
                fmt9(bound),
                fmt9(p.expected_value() / (1.0 + p.lambda_m()))
            )
        })?;
        if p.lambda_v() > 0.0 {
            let ppe = self.ppe(
                p.expected_value(),
                SpotRegime::Committed { p2: p.high() },
                ReferenceTiming::InitialBelief,
            )?;
            ensure(ppe.plan == Plan::degenerate(false, false, false), || {
                format!("PPE at (E, H) is {:?}", ppe.plan)
            })?;
        }
        Ok(())
    }

    fn expectation_identity(&self, rng: &mut ChaCha8Rng) -> Outcome {
        let h = self.params.high();
        for p2 in [h, rng.gen_range(0.0..2.0 * h)] {
            let p1 = rng.gen_range(0.0..2.0 * h);
            let tree = build_game_tree(&self.params, &PriceOffer::committed(p1, p2).unwrap());
            for (bh, bl) in [(false, false), (false, true), (true, false), (true, true)] {
                let plan = Plan::degenerate(false, bh, bl);
                let gap = static_expectation_gap(&tree, &plan);
                ensure(gap <= EXACT_TOL, || {
                    format!("plan {plan:?} at ({}, {}): gap {gap:e}", fmt9(p1), fmt9(p2))
                })?;
            }
        }
        Ok(())
    }

    fn mixed(&self, rng: &mut ChaCha8Rng) -> Outcome {
        let h = self.params.high();
        let (p1, p2) = (rng.gen_range(0.0..1.5 * h), rng.gen_range(0.0..1.5 * h));
        let offer = PriceOffer::committed(p1, p2).unwrap();
        for timing in [ReferenceTiming::RecentBelief, ReferenceTiming::InitialBelief] {
            match grid_mixed_plan_check(&self.params, &offer, self.grid_step, timing) {
                Ok(true) => {}
                Ok(false) => {
                    return Err(format!(
                        "{timing:?}: a grid plan beats the PPE at ({}, {})",
                        fmt9(p1),
                        fmt9(p2)
                    ))
                }
                Err(SolveError::NoEquilibrium { .. }) => {
                    return Err(format!(
                        "{timing:?}: no degenerate equilibrium at ({}, {})",
                        fmt9(p1),
                        fmt9(p2)
                    ))
                }
                Err(e) => return Err(e.to_string()),
            }
        }
        Ok(())
    }
}

/// Spot prices at which a state's consumer is indifferent under the buy and
/// the reject sub-plan, each evaluated against its own reference:
/// (upper edge for buying, lower edge for rejecting).
pub fn credibility_edges(params: &ModelParams, state: State) -> (f64, f64) {
    let point = DecisionPoint::Spot(state);
    let advantage = |price: f64, planned: Action| {
        let tree = build_game_tree(params, &PriceOffer::committed(0.0, price).unwrap());
        let prob = if planned == Action::Buy { 1.0 } else { 0.0 };
        let plan = Plan::degenerate(false, false, false).with_purchase_probability(point, prob);
        let reference = reference_from_plan(&tree, point, &plan, ReferenceTiming::RecentBelief);
        let eu = |a| expected_utility_against(&tree, a, point, &plan, &reference).unwrap();
        let other = if planned == Action::Buy {
            Action::Reject
        } else {
            Action::Buy
        };
        eu(planned) - eu(other)
    };
    let upper = params.value(state) * (3.0 + params.lambda_v());
    let root = |planned: Action| {
        // advantage falls in price for buy and rises for reject
        let sign = if planned == Action::Buy { 1.0 } else { -1.0 };
        let (mut lo, mut hi) = (0.0, upper);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sign * advantage(mid, planned) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    (root(Action::Buy), root(Action::Reject))
}

pub fn run_verification(config: &ScenarioConfig, seed: u64) -> VerificationReport {
    run_verification_with(config, seed, &VerifyOptions::default())
}

pub fn run_verification_with(config: &ScenarioConfig, seed: u64, options: &VerifyOptions) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summaries: Vec<CheckSummary> = Check::ALL
        .iter()
        .map(|&check| CheckSummary {
            check,
            passed: 0,
            total: 0,
        })
        .collect();
    let mut failures = Vec::new();
    let mut no_equilibrium = Vec::new();

    for draw in 0..config.draws {
        let params = sample_params(&mut rng);
        let mut ctx = DrawContext {
            draw,
            params,
            options,
            grid_step: config.grid_step,
            no_equilibrium: Vec::new(),
        };
        for (slot, &check) in Check::ALL.iter().enumerate() {
            let outcome = match check {
                Check::OracleEquivalence => ctx.oracle(),
                Check::SpotRule => ctx.spot_rule(&mut rng),
                Check::LossNeutralBenchmark => ctx.loss_neutral(),
                Check::CommitmentPremium => ctx.commitment_premium(),
                Check::FlexiblePricing => ctx.flexible(),
                Check::CommitmentGap => ctx.commitment_gap(),
                Check::RiskAversion => ctx.risk_aversion(&mut rng),
                Check::StaticBound => ctx.static_bound(),
                Check::ExpectationIdentity => ctx.expectation_identity(&mut rng),
                Check::MixedPlans => ctx.mixed(&mut rng),
            };
            summaries[slot].total += 1;
            match outcome {
                Ok(()) => summaries[slot].passed += 1,
                Err(detail) => failures.push(Failure {
                    check,
                    draw,
                    params,
                    detail,
                }),
            }
        }
        no_equilibrium.append(&mut ctx.no_equilibrium);
    }
    VerificationReport {
        seed,
        draws: config.draws,
        summaries,
        failures,
        no_equilibrium,
    }
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn summary(&self, check: Check) -> &CheckSummary {
        self.summaries
            .iter()
            .find(|s| s.check == check)
            .expect("every check is summarized")
    }

    pub fn failures_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(["check", "draw", "H", "L", "q", "lambda_v", "lambda_m", "detail"])
            .expect("in-memory write");
        for f in &self.failures {
            let p = &f.params;
            w.write_record([
                f.check.name().to_string(),
                f.draw.to_string(),
                fmt9(p.high()),
                fmt9(p.low()),
                fmt9(p.q()),
                fmt9(p.lambda_v()),
                fmt9(p.lambda_m()),
                f.detail.clone(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "verification: seed {}, {} draws", self.seed, self.draws).unwrap();
        for s in &self.summaries {
            let mark = if s.passed == s.total { "ok  " } else { "FAIL" };
            writeln!(out, "  {mark} {:<24} {}/{}", s.check.name(), s.passed, s.total).unwrap();
        }
        if !self.no_equilibrium.is_empty() {
            writeln!(
                out,
                "offers without a degenerate equilibrium: {}",
                self.no_equilibrium.len()
            )
            .unwrap();
            for (draw, p1, regime) in &self.no_equilibrium {
                writeln!(out, "  draw {draw}: p1 = {} {regime:?}", fmt9(*p1)).unwrap();
            }
        }
        if self.passed() {
            writeln!(out, "all checks passed").unwrap();
        } else {
            writeln!(out, "{} failing (check, draw) pairs:", self.failures.len()).unwrap();
            out.push_str(&self.failures_csv());
        }
        out
    }
}
