//! `key = value` scenario files.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Required keys: `H`, `L`, `q`, `lambda_v`, `lambda_m`. Optional keys and
//! their defaults:
//!
//! | key          | default     |
//! |--------------|-------------|
//! | `preference` | `kr_recent` (or `kr_initial`, `risk_neutral`, `risk_averse`) |
//! | `curvature`  | required iff `preference = risk_averse` |
//! | `regime`     | `Committed` (or `Flexible`, `Both`) |
//! | `p2_min`, `p2_max` | no sweep; give both to enable one |
//! | `steps`      | 200 |
//! | `draws`      | 500 |
//! | `grid_step`  | 0.1 |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use kr_advance::preferences::UtilityError;
use kr_advance::{DomainError, ModelParams, PreferenceModel, StandardPreference};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key}: {reason}")]
    BadValue {
        line: usize,
        key: &'static str,
        value: String,
        reason: String,
    },
    #[error("missing key {0}")]
    MissingKey(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeChoice {
    Committed,
    Flexible,
    Both,
}

impl fmt::Display for RegimeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeChoice::Committed => "Committed",
            RegimeChoice::Flexible => "Flexible",
            RegimeChoice::Both => "Both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub p2_min: f64,
    pub p2_max: f64,
    /// Number of evenly spaced grid points, endpoints included.
    pub steps: usize,
}

impl SweepRange {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.steps - 1;
        (0..=n)
            .map(|i| self.p2_min + (self.p2_max - self.p2_min) * i as f64 / n as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub preference: PreferenceModel,
    pub regime: RegimeChoice,
    pub sweep: Option<SweepRange>,
    pub draws: usize,
    pub grid_step: f64,
}

const KEYS: [&str; 13] = [
    "H",
    "L",
    "q",
    "lambda_v",
    "lambda_m",
    "preference",
    "curvature",
    "regime",
    "p2_min",
    "p2_max",
    "steps",
    "draws",
    "grid_step",
];

struct Entries(BTreeMap<&'static str, (usize, String)>);

impl Entries {
    fn raw(&self, key: &'static str) -> Option<(usize, &str)> {
        self.0.get(key).map(|(line, v)| (*line, v.as_str()))
    }

    fn parsed<T: FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|(line, v)| {
                v.parse::<T>().map_err(|e| ConfigError::BadValue {
                    line,
                    key,
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    fn required(&self, key: &'static str) -> Result<f64, ConfigError> {
        self.parsed(key)?.ok_or(ConfigError::MissingKey(key))
    }
}

pub fn parse_scenario_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .filter(|(k, v)| !k.is_empty() && !v.is_empty())
            .ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.to_string(),
            })?;
        let key = *KEYS
            .iter()
            .find(|&&k| k == key)
            .ok_or_else(|| ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            })?;
        if entries.insert(key, (line, value.to_string())).is_some() {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
    }
    let e = Entries(entries);

    let params = ModelParams::new(
        e.required("H")?,
        e.required("L")?,
        e.required("q")?,
        e.required("lambda_v")?,
        e.required("lambda_m")?,
    )?;

    let curvature: Option<f64> = e.parsed("curvature")?;
    let preference = match e.raw("preference") {
        None | Some((_, "kr_recent")) => PreferenceModel::KrRecentBelief,
        Some((_, "kr_initial")) => PreferenceModel::KrInitialBelief,
        Some((_, "risk_neutral")) => PreferenceModel::RiskNeutral,
        Some((_, "risk_averse")) => {
            let a = curvature.ok_or(ConfigError::MissingKey("curvature"))?;
            StandardPreference::risk_averse(a)?.into()
        }
        Some((line, other)) => {
            return Err(ConfigError::BadValue {
                line,
                key: "preference",
                value: other.to_string(),
                reason: "expected kr_recent, kr_initial, risk_neutral or risk_averse".into(),
            })
        }
    };
    if curvature.is_some() && !matches!(preference, PreferenceModel::RiskAverse { .. }) {
        return Err(ConfigError::Invalid(
            "curvature only applies to preference = risk_averse".into(),
        ));
    }

    let regime = match e.raw("regime") {
        None | Some((_, "Committed")) => RegimeChoice::Committed,
        Some((_, "Flexible")) => RegimeChoice::Flexible,
        Some((_, "Both")) => RegimeChoice::Both,
        Some((line, other)) => {
            return Err(ConfigError::BadValue {
                line,
                key: "regime",
                value: other.to_string(),
                reason: "expected Committed, Flexible or Both".into(),
            })
        }
    };

    let steps: usize = e.parsed("steps")?.unwrap_or(200);
    if steps < 2 {
        return Err(ConfigError::Invalid(format!("steps must be at least 2, got {steps}")));
    }
    let sweep = match (e.parsed::<f64>("p2_min")?, e.parsed::<f64>("p2_max")?) {
        (None, None) => None,
        (Some(p2_min), Some(p2_max)) => {
            if !(p2_min >= 0.0 && p2_max > p2_min && p2_max.is_finite()) {
                return Err(ConfigError::Invalid(format!(
                    "sweep range [{p2_min}, {p2_max}] must be non-empty and non-negative"
                )));
            }
            Some(SweepRange { p2_min, p2_max, steps })
        }
        (Some(_), None) => return Err(ConfigError::MissingKey("p2_max")),
        (None, Some(_)) => return Err(ConfigError::MissingKey("p2_min")),
    };

    let draws: usize = e.parsed("draws")?.unwrap_or(500);
    if draws < 1 {
        return Err(ConfigError::Invalid("draws must be at least 1".into()));
    }
    let grid_step: f64 = e.parsed("grid_step")?.unwrap_or(0.1);
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(ConfigError::Invalid(format!(
            "grid_step must lie in (0, 0.5], got {grid_step}"
        )));
    }

    Ok(ScenarioConfig {
        params,
        preference,
        regime,
        sweep,
        draws,
        grid_step,
    })
}
