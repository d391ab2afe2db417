//! Closed-form cutoff prices and optimal pricing.
//!
//! The cutoff advance price p̂₁(p₂) is the smaller of two bounds: the highest
//! p₁ at which pre-purchasing is credible at T1, and the highest p₁ at which
//! the pre-purchase plan is preferred to the waiting plan.

use std::fmt;

use thiserror::Error;

use crate::model::{ModelParams, EPS};
use crate::preferences::cara;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BracketError {
    #[error("indifference equation has no sign change on [0, {upper}] (values {at_zero}, {at_upper})")]
    NoSignChange { upper: f64, at_zero: f64, at_upper: f64 },
    #[error("risk-aversion curvature must be positive, got {0}")]
    BadCurvature(f64),
}

/// Spot-price region of the cutoff function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// p₂ ≤ L
    BelowL,
    /// L < p₂ ≤ (λ^V+1)L, capped at H
    MidLow,
    /// (λ^V+1)L < p₂ ≤ H
    MidHigh,
    /// p₂ > H
    AboveH,
}

impl Region {
    pub fn of(p2: f64, params: &ModelParams) -> Region {
        let (h, l) = (params.high(), params.low());
        if p2 <= l {
            Region::BelowL
        } else if p2 <= ((params.lambda_v() + 1.0) * l).min(h) {
            Region::MidLow
        } else if p2 <= h {
            Region::MidHigh
        } else {
            Region::AboveH
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Region::BelowL => "BelowL",
            Region::MidLow => "MidLow",
            Region::MidHigh => "MidHigh",
            Region::AboveH => "AboveH",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffBreakdown {
    pub pe_bound: f64,
    pub preferred_bound: f64,
    pub cutoff: f64,
    pub region: Region,
}

/// Highest p₁ at which pre-purchasing is credible at T1.
///
/// The MidLow branch is (λ^V+1)(1−q)L + q·p₂. A printed variant of this
/// branch carries an extra factor L, which is dimensionally inconsistent and
/// disagrees with the T1 credibility comparison it comes from.
pub fn credible_prepurchase_bound(p2: f64, params: &ModelParams) -> f64 {
    let (h, l, q) = (params.high(), params.low(), params.q());
    let (lv, lm) = (params.lambda_v(), params.lambda_m());
    match Region::of(p2, params) {
        Region::BelowL => p2,
        Region::MidLow => (lv + 1.0) * (1.0 - q) * l + q * p2,
        Region::MidHigh => ((lv + 1.0) * (1.0 - q) * l + (lm + 1.0) * q * p2) / (lm * q + 1.0),
        Region::AboveH => params.expected_value() + lv * q * q * h + lv * (1.0 - q * q) * l,
    }
}

/// Highest p₁ at which the pre-purchase plan yields at least the T1 utility
/// of the waiting plan.
pub fn preferred_prepurchase_bound(p2: f64, params: &ModelParams) -> f64 {
    let (h, l, q) = (params.high(), params.low(), params.q());
    let (lv, lm) = (params.lambda_v(), params.lambda_m());
    if p2 <= l {
        p2
    } else if p2 <= h {
        (1.0 - q) * l + lv * q * (1.0 - q) * l + q * p2 + lm * (1.0 - q) * q * p2
    } else {
        params.expected_value() - lv * (1.0 - q) * q * (h - l)
    }
}

pub fn cutoff_advance_price(p2: f64, params: &ModelParams) -> CutoffBreakdown {
    let pe_bound = credible_prepurchase_bound(p2, params);
    let preferred_bound = preferred_prepurchase_bound(p2, params);
    CutoffBreakdown {
        pe_bound,
        preferred_bound,
        cutoff: pe_bound.min(preferred_bound),
        region: Region::of(p2, params),
    }
}

/// Abscissa on (L, H] where the preferred bound crosses the credible bound.
///
/// On the MidLow branch the crossing is (1−q)λ^V L/(qλ^M). When that point
/// lies past (λ^V+1)L the bounds meet on the MidHigh branch instead, at
/// L[λ^V(1−q) − λ^M q − λ^Vλ^M q²]/(λ^M q)². None when λ^M = 0 or when the
/// bounds do not cross.
pub fn bound_crossing(params: &ModelParams) -> Option<f64> {
    let (h, l, q) = (params.high(), params.low(), params.q());
    let (lv, lm) = (params.lambda_v(), params.lambda_m());
    if lm <= 0.0 {
        return None;
    }
    let mid = ((lv + 1.0) * l).min(h);
    let on_mid_low = (1.0 - q) * lv * l / (q * lm);
    if on_mid_low > l && on_mid_low <= mid {
        return Some(on_mid_low);
    }
    if on_mid_low <= l {
        return None;
    }
    let on_mid_high = l * (lv * (1.0 - q) - lm * q - lv * lm * q * q) / (lm * q).powi(2);
    (on_mid_high > mid && on_mid_high <= h).then_some(on_mid_high)
}

/// Analytic kinks of p̂₁ on [0, H], sorted and deduplicated.
pub fn cutoff_kinks(params: &ModelParams) -> Vec<f64> {
    let (h, l) = (params.high(), params.low());
    let mut kinks = vec![l, h];
    let mid = (params.lambda_v() + 1.0) * l;
    if mid <= h {
        kinks.push(mid);
    }
    kinks.extend(bound_crossing(params));
    kinks.sort_by(f64::total_cmp);
    kinks.dedup_by(|a, b| (*a - *b).abs() <= EPS);
    kinks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PricingRegime {
    Committed,
    Flexible,
}

impl fmt::Display for PricingRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PricingRegime::Committed => "Committed",
            PricingRegime::Flexible => "Flexible",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingRecommendation {
    pub regime: PricingRegime,
    pub p1: f64,
    /// (p₂^H, p₂^L); both equal H under commitment.
    pub p2: (f64, f64),
    pub expected_profit: f64,
}

/// Seller-optimal committed prices: p₂* = H and p₁* = p̂₁(H).
pub fn optimal_pricing_commit(params: &ModelParams) -> PricingRecommendation {
    let (h, l, q) = (params.high(), params.low(), params.q());
    let (lv, lm) = (params.lambda_v(), params.lambda_m());
    let e = params.expected_value();
    let credible = (e + q * lm * h + (1.0 - q) * lv * l) / (1.0 + q * lm);
    let preferred = e + lv * q * (1.0 - q) * l + lm * q * (1.0 - q) * h;
    let p1 = credible.min(preferred);
    PricingRecommendation {
        regime: PricingRegime::Committed,
        p1,
        p2: (h, h),
        expected_profit: p1,
    }
}

/// Seller-optimal prices without commitment: spot prices track the state.
pub fn optimal_pricing_flexible(params: &ModelParams) -> PricingRecommendation {
    let (h, l, q, lm) = (params.high(), params.low(), params.q(), params.lambda_m());
    let p1 = (params.expected_value() + q * lm * h) / (1.0 + q * lm);
    PricingRecommendation {
        regime: PricingRegime::Flexible,
        p1,
        p2: (h, l),
        expected_profit: p1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitmentChoice {
    Commit,
    Indifferent,
}

impl fmt::Display for CommitmentChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommitmentChoice::Commit => "Commit",
            CommitmentChoice::Indifferent => "Indifferent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommitmentDecision {
    pub choice: CommitmentChoice,
    pub commit_profit: f64,
    pub flexible_profit: f64,
}

impl CommitmentDecision {
    pub fn gap(&self) -> f64 {
        self.commit_profit - self.flexible_profit
    }
}

pub fn commitment_decision(params: &ModelParams) -> CommitmentDecision {
    let commit_profit = optimal_pricing_commit(params).expected_profit;
    let flexible_profit = optimal_pricing_flexible(params).expected_profit;
    let choice = if commit_profit - flexible_profit > EPS {
        CommitmentChoice::Commit
    } else {
        CommitmentChoice::Indifferent
    };
    CommitmentDecision {
        choice,
        commit_profit,
        flexible_profit,
    }
}

/// Upper bound on the cutoff when the reference is fixed at T1:
/// E[ω] − q(1−q)λ^V(H−L).
pub fn static_reference_bound(params: &ModelParams) -> f64 {
    let q = params.q();
    params.expected_value() - q * (1.0 - q) * params.lambda_v() * (params.high() - params.low())
}

/// Cutoff with no spot market: E[ω] − (1−q)λ^V·q(H−L).
pub fn single_stage_cutoff(params: &ModelParams) -> f64 {
    let q = params.q();
    params.expected_value() - (1.0 - q) * params.lambda_v() * q * (params.high() - params.low())
}

const RISK_AVERSE_TOL: f64 = 1e-9;

/// Solves q·v(H−p₁) + (1−q)·v(L−p₁) = v(0) for p₁ on [0, H] by bisection,
/// with v the CARA utility of curvature `a`.
pub fn risk_averse_cutoff(params: &ModelParams, a: f64) -> Result<f64, BracketError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(BracketError::BadCurvature(a));
    }
    let (h, l, q) = (params.high(), params.low(), params.q());
    let gap = |p1: f64| q * cara(a, h - p1) + (1.0 - q) * cara(a, l - p1) - cara(a, 0.0);
    let (mut lo, mut hi) = (0.0, h);
    let (at_zero, at_upper) = (gap(lo), gap(hi));
    if !(at_zero > 0.0 && at_upper < 0.0) {
        return Err(BracketError::NoSignChange {
            upper: h,
            at_zero,
            at_upper,
        });
    }
    while hi - lo > RISK_AVERSE_TOL {
        let mid = 0.5 * (lo + hi);
        if gap(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
