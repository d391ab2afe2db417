//! Two-stage advance-purchase game between a monopolist and a loss-averse
//! consumer whose reference point is her own belief about outcomes.
//!
//! - [`model`]: environment, offers, the game tree and consumer plans
//! - [`preferences`]: reference-dependent and standard utilities
//! - [`solver`]: brute-force personal equilibria and cutoff search
//! - [`closed_form`]: analytic cutoff and optimal-pricing expressions

pub mod closed_form;
pub mod model;
pub mod preferences;
pub mod solver;

pub use model::{
    build_game_tree, enumerate_degenerate_plans, Action, DecisionPoint, DomainError, GameNode, GameTree, ModelParams,
    Payoff2D, Plan, PriceOffer, SpotRegime, Stage, State, TerminalOutcome, EPS,
};
pub use preferences::{PreferenceModel, ReferenceDistribution, ReferenceTiming, StandardPreference, UtilityReport};
pub use solver::{EquilibriumResult, SolveError};
