use std::path::Path;

use serde::Serialize;

use super::ledger::{ColumnChain, LedgerForm, LedgerRow, Pivots};
use super::system::{solve_s, terminal_rows, Mat8, RFunction, Rows};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, TimeGrid};

/// Default lower bound for the assumption infima and ledger divisors.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Feedback gains at one node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Gains {
    pub x: f64,
    pub theta: f64,
    pub y: f64,
    pub p: f64,
    /// Zero when no signal is configured.
    pub u: f64,
}

/// Loadings of `Γ, Ψ, R̃` and `q` on the current signal level `U_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalLoadings {
    pub kappa: f64,
    pub per_node: Vec<ColumnChain>,
}

#[derive(Clone, Debug)]
pub struct CoefficientTable {
    pub grid: TimeGrid,
    pub form: LedgerForm,
    pub epsilon: f64,
    pub s: Vec<Mat8>,
    pub rows: Vec<Rows>,
    /// `r_t` at each node.
    pub r: Vec<f64>,
    pub ledger: Vec<LedgerRow>,
    pub gains: Vec<Gains>,
    pub signal: Option<SignalLoadings>,
    pub report: AssumptionReport,
}

impl CoefficientTable {
    /// Build the table and require every assumption to hold.
    pub fn build(spec: &ModelSpec, grid: &TimeGrid, form: LedgerForm) -> Result<Self> {
        let table = Self::build_unchecked(spec, grid, form, DEFAULT_TOL)?;
        table.report.require()?;
        Ok(table)
    }

    /// Build the table and its assumption report without rejecting a failed
    /// report. Only a singular transition matrix is an error here.
    pub fn build_unchecked(spec: &ModelSpec, grid: &TimeGrid, form: LedgerForm, tol: f64) -> Result<Self> {
        spec.validate()?;
        if (grid.horizon - spec.horizon).abs() > 1e-12 * spec.horizon {
            return Err(Error::invalid("grid horizon differs from the model horizon"));
        }
        let s = solve_s(spec, grid, form)?;
        let terminal = terminal_rows(spec);
        let rows: Vec<Rows> = s.iter().map(|m| Rows::from_s(&terminal, m)).collect();
        let rfun = RFunction::new(spec, grid.n_steps);
        let r = (0..grid.len()).map(|k| rfun.eval(grid.time(k))).collect();
        let ledger: Vec<LedgerRow> =
            rows.iter().enumerate().map(|(k, rw)| LedgerRow::new(grid.time(k), rw, form)).collect();
        let mut table = CoefficientTable {
            grid: *grid,
            form,
            epsilon: spec.epsilon,
            s,
            rows,
            r,
            ledger,
            gains: Vec::new(),
            signal: None,
            report: AssumptionReport::default(),
        };
        table.report = check_assumptions(&table, tol);
        table.signal = spec.signal.as_ref().map(|sig| SignalLoadings {
            kappa: sig.kappa,
            per_node: (0..grid.len()).map(|k| table.signal_integrals(sig.kappa, k)).collect(),
        });
        table.gains = (0..grid.len())
            .map(|k| {
                let [x, theta, y, p] = table.ledger[k].gains();
                let u = table.signal.as_ref().map_or(0.0, |s| s.per_node[k].g);
                Gains { x, theta, y, p, u }
            })
            .collect();
        Ok(table)
    }

    /// Signal kernel: loadings on `dA_s` seen from time `t` (`s ≥ t`), with
    /// `g^A(s,t)` pairing `G₅` with `h^A` and `G₆` with `i^A`.
    pub fn signal_kernel(&self, k_t: usize, k_s: usize) -> ColumnChain {
        let col = self.rows[k_s].signal_column(self.epsilon);
        self.ledger[k_t].pivots.resolve(col, true)
    }

    /// `∫ₜᵀ kernel(s,t) e^{-κ(s-t)} ds` by the trapezoid rule on the nodes,
    /// for every stage of the chain.
    pub fn signal_integrals(&self, kappa: f64, k_t: usize) -> ColumnChain {
        let n = self.grid.n_steps;
        let t = self.grid.time(k_t);
        let dt = self.grid.dt();
        let mut acc = ColumnChain::default();
        if k_t == n {
            return acc;
        }
        for k_s in k_t..=n {
            let w = if k_s == k_t || k_s == n { 0.5 * dt } else { dt };
            let f = w * (-kappa * (self.grid.time(k_s) - t)).exp();
            let c = self.signal_kernel(k_t, k_s);
            acc.i_tilde += f * c.i_tilde;
            acc.h_tilde += f * c.h_tilde;
            acc.j += f * c.j;
            acc.i += f * c.i;
            acc.h += f * c.h;
            acc.g += f * c.g;
        }
        acc
    }

    /// `g^U(t)` for an arbitrary mean-reversion rate.
    pub fn signal_gain(&self, kappa: f64, t: f64) -> Result<f64> {
        let k = self.node(t)?;
        Ok(self.signal_integrals(kappa, k).g)
    }

    pub fn node(&self, t: f64) -> Result<usize> {
        self.grid
            .index_of(t)
            .ok_or_else(|| Error::invalid(format!("t = {t} is not a grid node")))
    }

    /// Optimal rate at node `k` given the observed state. `u` is ignored
    /// without a signal.
    #[inline]
    pub fn feedback(&self, k: usize, x: f64, theta: f64, y: f64, p: f64, u: f64) -> f64 {
        let g = &self.gains[k];
        g.x * x + g.theta * theta + g.y * y + g.p * p + g.u * u
    }

    /// Optimal rate at node time `t`, checking the ledger divisors there.
    pub fn feedback_rate(&self, t: f64, x: f64, theta: f64, y: f64, p: f64, u: f64) -> Result<f64> {
        let k = self.node(t)?;
        self.ledger[k].pivots.check(t, self.report.tol)?;
        Ok(self.feedback(k, x, theta, y, p, u))
    }

    /// `(Γ, Ψ, R̃)` reconstructed from the ledger at node `k`.
    pub fn auxiliaries(&self, k: usize, state: &AuxState) -> (f64, f64, f64) {
        let l = &self.ledger[k];
        let sig = self.signal.as_ref().map_or(ColumnChain::default(), |s| s.per_node[k]);
        let combine = |f: fn(&ColumnChain) -> f64| {
            f(&l.x) * state.x
                + f(&l.theta) * state.theta
                + f(&l.y) * state.y
                + f(&l.p) * state.p
                + f(&l.pivots.q) * state.q
                + f(&sig) * state.u
        };
        (combine(|c| c.h), combine(|c| c.i), combine(|c| c.j))
    }

    pub fn write_gains_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let with_u = self.signal.is_some();
        let mut header = vec!["t", "gX", "gTheta", "gY", "gP"];
        if with_u {
            header.push("gU");
        }
        w.write_record(&header)?;
        for (k, g) in self.gains.iter().enumerate() {
            let mut rec = vec![self.grid.time(k), g.x, g.theta, g.y, g.p];
            if with_u {
                rec.push(g.u);
            }
            w.write_record(rec.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Observed state used to reconstruct the auxiliary processes.
#[derive(Clone, Copy, Debug, Default)]
pub struct AuxState {
    pub x: f64,
    pub theta: f64,
    pub y: f64,
    pub q: f64,
    pub p: f64,
    pub u: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostic {
    pub name: String,
    pub infimum: f64,
    pub argmin_t: f64,
    pub pass: bool,
}

/// Infima over the grid of the quantities that must stay away from zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub form: LedgerForm,
    pub tol: f64,
    pub max_abs_s: f64,
    pub diagnostics: Vec<Diagnostic>,
    pub pass: bool,
}

impl AssumptionReport {
    /// The first failing diagnostic as an error.
    pub fn require(&self) -> Result<()> {
        match self.diagnostics.iter().find(|d| !d.pass) {
            None => Ok(()),
            Some(d) => Err(Error::Assumption { quantity: d.name.clone(), value: d.infimum, t: d.argmin_t }),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.name == name)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Evaluate the assumption diagnostics on a built table.
///
/// Besides the standard seven quantities the report carries the divisors
/// the selected ledger form actually uses.
pub fn check_assumptions(table: &CoefficientTable, tol: f64) -> AssumptionReport {
    type Probe = (&'static str, fn(&Pivots) -> f64);
    let probes: [Probe; 9] = [
        ("inf G4", |p| p.g4),
        ("inf H5", |p| p.h5),
        ("inf I6", |p| p.i6),
        ("inf J7", |p| p.j7),
        ("inf |I5 - I6|", |p| (p.i5 - p.i6).abs()),
        ("inf |1 + G5/G4 h^q + G6/G4 i^q|", |p| (1.0 + p.g5 / p.g4 * p.q.h + p.g6 / p.g4 * p.q.i).abs()),
        ("inf |1 + J5/J7 h~^R + J6/J7 i~^R|", |p| p.den_j.abs()),
        ("inf |i~ denominator|", |p| p.den_i.abs()),
        ("inf |g~ denominator|", |p| p.den_g.abs()),
    ];
    let mut diagnostics = Vec::with_capacity(probes.len());
    for (name, f) in probes {
        let mut inf = f64::INFINITY;
        let mut argmin = f64::NAN;
        for (k, row) in table.ledger.iter().enumerate() {
            let v = f(&row.pivots);
            if v < inf || v.is_nan() {
                inf = v;
                argmin = table.grid.time(k);
                if v.is_nan() {
                    break;
                }
            }
        }
        diagnostics.push(Diagnostic { name: name.to_string(), infimum: inf, argmin_t: argmin, pass: inf >= tol });
    }
    let max_abs_s = table.s.iter().map(|m| m.amax()).fold(0.0, f64::max);
    let pass = diagnostics.iter().all(|d| d.pass);
    AssumptionReport { form: table.form, tol, max_abs_s, diagnostics, pass }
}
