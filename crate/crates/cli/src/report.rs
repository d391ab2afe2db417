//! Plain-text summaries of one scenario.

use std::fmt::Write as _;

use kr_advance::closed_form::{
    commitment_decision, cutoff_advance_price, optimal_pricing_commit, optimal_pricing_flexible, risk_averse_cutoff,
    single_stage_cutoff, static_reference_bound, BracketError, PricingRecommendation, PricingRegime,
};
use kr_advance::solver::bisect_cutoff_p1;
use kr_advance::{PreferenceModel, SolveError, SpotRegime};

use crate::config::{RegimeChoice, ScenarioConfig};
use crate::sweep::fmt9;

fn header(config: &ScenarioConfig) -> String {
    let p = &config.params;
    format!(
        "scenario: H={} L={} q={} lambda_v={} lambda_m={} (preference {}, regime {})\n",
        p.high(),
        p.low(),
        p.q(),
        p.lambda_v(),
        p.lambda_m(),
        config.preference,
        config.regime
    )
}

fn pricing_line(rec: &PricingRecommendation) -> String {
    match rec.regime {
        PricingRegime::Committed => {
            format!(
                "committed pricing: p1 = {}, p2 = {}, profit = {}\n",
                fmt9(rec.p1),
                fmt9(rec.p2.0),
                fmt9(rec.expected_profit)
            )
        }
        PricingRegime::Flexible => format!(
            "flexible pricing: p1 = {}, p2_H = {}, p2_L = {}, profit = {}\n",
            fmt9(rec.p1),
            fmt9(rec.p2.0),
            fmt9(rec.p2.1),
            fmt9(rec.expected_profit)
        ),
    }
}

fn decision_line(config: &ScenarioConfig) -> String {
    let d = commitment_decision(&config.params);
    format!(
        "commitment decision: {} (commit {} vs flexible {}, gap {})\n",
        d.choice,
        fmt9(d.commit_profit),
        fmt9(d.flexible_profit),
        fmt9(d.gap())
    )
}

pub fn report_scenario(config: &ScenarioConfig) -> Result<String, BracketError> {
    let p = &config.params;
    let mut out = header(config);
    out.push_str(&pricing_line(&optimal_pricing_commit(p)));
    out.push_str(&pricing_line(&optimal_pricing_flexible(p)));
    out.push_str(&decision_line(config));
    writeln!(out, "static-reference bound: {}", fmt9(static_reference_bound(p))).unwrap();
    writeln!(out, "single-stage cutoff: {}", fmt9(single_stage_cutoff(p))).unwrap();
    if let PreferenceModel::RiskAverse { curvature } = config.preference {
        writeln!(
            out,
            "risk-averse cutoff (a = {curvature}): {}",
            fmt9(risk_averse_cutoff(p, curvature)?)
        )
        .unwrap();
    }
    Ok(out)
}

/// Seller-optimal prices for the configured regime; `Both` adds the
/// commitment decision.
pub fn optimal_text(config: &ScenarioConfig) -> String {
    let p = &config.params;
    let mut out = header(config);
    if config.regime != RegimeChoice::Flexible {
        out.push_str(&pricing_line(&optimal_pricing_commit(p)));
    }
    if config.regime != RegimeChoice::Committed {
        out.push_str(&pricing_line(&optimal_pricing_flexible(p)));
    }
    if config.regime == RegimeChoice::Both {
        out.push_str(&decision_line(config));
    }
    out
}

/// Closed-form breakdown at one committed spot price next to the
/// brute-force cutoff for the configured preference.
pub fn cutoff_text(config: &ScenarioConfig, p2: f64) -> Result<String, SolveError> {
    let p = &config.params;
    let cf = cutoff_advance_price(p2, p);
    let search = bisect_cutoff_p1(p, SpotRegime::Committed { p2 }, config.preference)?;
    let mut out = header(config);
    writeln!(out, "p2 = {} (region {})", fmt9(p2), cf.region).unwrap();
    writeln!(out, "pe_bound = {}", fmt9(cf.pe_bound)).unwrap();
    writeln!(out, "preferred_bound = {}", fmt9(cf.preferred_bound)).unwrap();
    writeln!(out, "cutoff = {}", fmt9(cf.cutoff)).unwrap();
    writeln!(
        out,
        "brute_force_cutoff ({}) = {}",
        config.preference,
        fmt9(search.cutoff)
    )
    .unwrap();
    writeln!(out, "abs_gap = {}", fmt9((search.cutoff - cf.cutoff).abs())).unwrap();
    if config.preference == PreferenceModel::KrInitialBelief {
        writeln!(out, "static-reference bound = {}", fmt9(static_reference_bound(p))).unwrap();
    }
    if !search.no_equilibrium_at.is_empty() {
        writeln!(
            out,
            "no degenerate equilibrium at {} probed p1 values",
            search.no_equilibrium_at.len()
        )
        .unwrap();
    }
    Ok(out)
}
