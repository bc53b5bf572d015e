//! Path simulation, Monte Carlo aggregation and P&L accounting.

mod agent;
mod montecarlo;
mod oracle;
mod path;
pub mod rng;
mod stats;

pub use agent::{build_agents, Agent, AgentKind};
pub use montecarlo::{
    cost_gap, run_montecarlo, simulate_outcomes, write_outcomes_csv, Histograms, McSummary, HISTOGRAM_BINS,
};
pub use oracle::{gateaux_residual, perturbed_cost_gap};
pub use path::{
    pnl_decomposition, run_path, simulate_path, Eta, NodeState, PathOutcome, Perturbation, PnlMode, SimOptions,
    TrajectoryRecord,
};
pub use stats::{histogram, variance_gap, Bin, Estimate, Moments};
