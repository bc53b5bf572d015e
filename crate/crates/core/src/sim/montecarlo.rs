use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::agent::Agent;
use super::path::{run_path, PathOutcome, SimOptions};
use super::stats::{histogram, Bin, Estimate, Moments};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

pub const HISTOGRAM_BINS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histograms {
    pub trading: Vec<Bin>,
    pub total: Vec<Bin>,
    pub no_trade: Vec<Bin>,
}

/// Distributional summary of one agent's Monte Carlo run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McSummary {
    pub agent: String,
    pub n_paths: usize,
    pub base_seed: u64,
    pub cost: Estimate,
    pub trading_pnl: Moments,
    pub total_pnl: Moments,
    pub no_trade_pnl: Moments,
    pub mean_abs_terminal_inventory: f64,
    pub histograms: Histograms,
}

impl McSummary {
    pub fn from_outcomes(agent: &str, base_seed: u64, outcomes: &[PathOutcome]) -> Self {
        let col = |f: fn(&PathOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<f64>>();
        let (trading, total, no_trade) = (col(|o| o.trading_pnl), col(|o| o.total_pnl), col(|o| o.no_trade_pnl));
        McSummary {
            agent: agent.to_string(),
            n_paths: outcomes.len(),
            base_seed,
            cost: Estimate::of(&col(|o| o.cost)),
            trading_pnl: Moments::of(&trading),
            total_pnl: Moments::of(&total),
            no_trade_pnl: Moments::of(&no_trade),
            mean_abs_terminal_inventory: outcomes.iter().map(|o| o.terminal_inventory.abs()).sum::<f64>()
                / outcomes.len() as f64,
            histograms: Histograms {
                trading: histogram(&trading, HISTOGRAM_BINS),
                total: histogram(&total, HISTOGRAM_BINS),
                no_trade: histogram(&no_trade, HISTOGRAM_BINS),
            },
        }
    }

    /// Write one histogram CSV per P&L measure into `dir`, named
    /// `<prefix>_<measure>_hist.csv`.
    pub fn write_histograms(&self, dir: &Path, prefix: &str) -> Result<()> {
        for (name, bins) in [
            ("trading", &self.histograms.trading),
            ("total", &self.histograms.total),
            ("no_trade", &self.histograms.no_trade),
        ] {
            let mut w = csv::Writer::from_path(dir.join(format!("{prefix}_{name}_hist.csv")))?;
            for b in bins {
                w.serialize(b)?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

/// Terminal outcomes of `n_paths` paths, in path order.
///
/// Paths run in parallel on the current rayon pool. Path `i` draws from
/// streams keyed by `(base_seed, i)`, so the result does not depend on
/// scheduling and different agents see the same noise.
pub fn simulate_outcomes(
    world: &ModelSpec,
    agent: &Agent,
    n_paths: usize,
    base_seed: u64,
    opts: &SimOptions,
) -> Result<Vec<PathOutcome>> {
    if n_paths < 2 {
        return Err(Error::invalid("Monte Carlo needs at least two paths"));
    }
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| run_path(world, agent, base_seed, i, opts, |_| {}))
        .collect()
}

/// One summary per agent, all agents driven by the same random numbers.
pub fn run_montecarlo(
    world: &ModelSpec,
    agents: &[Agent],
    n_paths: usize,
    base_seed: u64,
    opts: &SimOptions,
) -> Result<Vec<McSummary>> {
    agents
        .iter()
        .map(|a| {
            let out = simulate_outcomes(world, a, n_paths, base_seed, opts)?;
            Ok(McSummary::from_outcomes(&a.kind.to_string(), base_seed, &out))
        })
        .collect()
}

/// Paired estimate of `cost(a) - cost(b)` from common-random-number runs.
pub fn cost_gap(a: &[PathOutcome], b: &[PathOutcome]) -> Estimate {
    let ca: Vec<f64> = a.iter().map(|o| o.cost).collect();
    let cb: Vec<f64> = b.iter().map(|o| o.cost).collect();
    Estimate::paired(&ca, &cb)
}

/// Per-path terminal scalars as CSV.
pub fn write_outcomes_csv(path: &Path, outcomes: &[PathOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for o in outcomes {
        w.serialize(o)?;
    }
    w.flush()?;
    Ok(())
}
