//! Optimal feedback control.
//!
//! The optimal rate is linear in the observed state,
//! `q* = g^X X̂ + g^θ θ̂ + g^Y Y + g^P P + g^U U`, with deterministic gains
//! obtained from the transition matrix of an 8-dimensional linear system.
//! The same gains serve the full-information agent, who plugs in the true
//! `(X, θ)` instead of the filtered values.

mod ledger;
mod system;
mod table;

pub use ledger::{ColumnChain, LedgerForm, LedgerRow, Pivots};
pub use system::{
    build_l, compute_r, slot, solve_phi, solve_s, terminal_rows, Column, Mat8, RFunction, Row8, Rows, Vec8,
    SUBSTEPS, S_NORM_CAP,
};
pub use table::{
    check_assumptions, AssumptionReport, AuxState, CoefficientTable, Diagnostic, Gains, SignalLoadings, DEFAULT_TOL,
};
