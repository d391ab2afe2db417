//! Cutoff profile over a committed spot-price grid, closed form next to the
//! brute-force search.

use kr_advance::closed_form::{cutoff_advance_price, cutoff_kinks, Region};
use kr_advance::solver::bisect_cutoff_p1;
use kr_advance::{SolveError, SpotRegime};

use crate::config::ScenarioConfig;

pub const CSV_HEADER: [&str; 7] = [
    "p2",
    "pe_bound",
    "preferred_bound",
    "cutoff",
    "region",
    "brute_force_cutoff",
    "abs_gap",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub p2: f64,
    pub pe_bound: f64,
    pub preferred_bound: f64,
    pub cutoff: f64,
    pub region: Region,
    pub brute_force_cutoff: f64,
    pub abs_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("config has no sweep range (set p2_min and p2_max)")]
    NoSweep,
    #[error("brute-force cutoff at p2 = {p2}: {source}")]
    Solve { p2: f64, source: SolveError },
}

/// Fixed nine-digit formatting; negative zero prints as zero.
pub fn fmt9(x: f64) -> String {
    let s = format!("{x:.9}");
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

/// Grid points plus the analytic kinks that fall inside the range.
pub fn sweep_abscissae(config: &ScenarioConfig) -> Option<Vec<f64>> {
    let range = config.sweep?;
    let mut xs = range.grid();
    xs.extend(
        cutoff_kinks(&config.params)
            .into_iter()
            .filter(|&k| k >= range.p2_min && k <= range.p2_max),
    );
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    Some(xs)
}

/// The brute-force column uses the configured preference; `abs_gap` is only
/// an oracle comparison under `kr_recent`.
pub fn run_sweep(config: &ScenarioConfig) -> Result<SweepTable, SweepError> {
    let xs = sweep_abscissae(config).ok_or(SweepError::NoSweep)?;
    let rows = xs
        .into_iter()
        .map(|p2| {
            let cf = cutoff_advance_price(p2, &config.params);
            let bf = bisect_cutoff_p1(&config.params, SpotRegime::Committed { p2 }, config.preference)
                .map_err(|source| SweepError::Solve { p2, source })?
                .cutoff;
            Ok(SweepRow {
                p2,
                pe_bound: cf.pe_bound,
                preferred_bound: cf.preferred_bound,
                cutoff: cf.cutoff,
                region: cf.region,
                brute_force_cutoff: bf,
                abs_gap: (bf - cf.cutoff).abs(),
            })
        })
        .collect::<Result<_, SweepError>>()?;
    Ok(SweepTable { rows })
}

impl SweepTable {
    pub fn max_gap(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_gap).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                fmt9(r.p2),
                fmt9(r.pe_bound),
                fmt9(r.preferred_bound),
                fmt9(r.cutoff),
                r.region.label().to_string(),
                fmt9(r.brute_force_cutoff),
                fmt9(r.abs_gap),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}
