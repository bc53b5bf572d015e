//! Optimal unwinding of toxic client order flow under partial information.
//!
//! A desk absorbs client flow whose drift (the toxicity) is hidden and may
//! react to the desk's own trading. The crate provides
//!
//! * [`model`]: parameters, coefficient functions, presets and the time grid;
//! * [`filter`]: the Kalman-Bucy filter for toxicity and inventory;
//! * [`control`]: the optimal feedback gains and their assumption checks;
//! * [`sim`]: path simulation, Monte Carlo, P&L accounting and optimality
//!   oracles;
//! * [`calib`]: estimators for flow volatility, daily drift and the
//!   feedback proxy.

pub mod calib;
pub mod config;
pub mod control;
pub mod error;
pub mod filter;
pub mod model;
pub mod sim;

pub use control::{AssumptionReport, CoefficientTable, LedgerForm};
pub use error::{Error, Result};
pub use filter::{filter_step, solve_riccati, FilterState, RiccatiSolution};
pub use model::{CoefFn, InitialState, ModelSpec, Scenario, SignalSpec, TimeGrid};
pub use sim::{AgentKind, McSummary, TrajectoryRecord};
