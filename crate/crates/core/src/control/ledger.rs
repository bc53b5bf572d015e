//! Closed-form elimination of the auxiliary processes `(Γ, Ψ, R̃)`.
//!
//! At each time the rows `G, H, I, J` give four linear relations
//!
//! ```text
//! K₁X̂ + K₂θ̂ + K₃Y + K₄q + K₅Γ + K₆Ψ + K₇R̃ + K₈P + E[∫ₜᵀ (-K₄(s)/ε + K₈(s)) dA_s] = 0
//! ```
//!
//! which are solved for `Ψ`, then `Γ`, then `R̃`, then `q`. Every observed
//! quantity (a "column") passes through the same chain, so a column is
//! described by its four row entries and resolved by [`Pivots::resolve`].
//!
//! [`LedgerForm::AsPublished`] reproduces the chain as originally typeset,
//! including the `-a b` drift of `Ψ`, the `1 - I₅/I₆` denominator, the sign
//! of the `H₆/H₅` term and the missing `G₇ j` terms.
//! [`LedgerForm::Consistent`] uses the algebra that actually solves the four
//! relations.

use serde::{Deserialize, Serialize};

use super::system::{slot, Column, Rows};
use crate::error::{Error, Result};

/// Which algebra to use for the elimination chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerForm {
    /// Exact solution of the four linear relations.
    #[default]
    Consistent,
    /// The coefficient formulas as originally typeset.
    AsPublished,
}

impl std::str::FromStr for LedgerForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistent" => Ok(LedgerForm::Consistent),
            "as_published" | "published" => Ok(LedgerForm::AsPublished),
            _ => Err(Error::invalid(format!("unknown ledger form '{s}' (expected consistent or as_published)"))),
        }
    }
}

/// Coefficients of one column at every stage of the elimination.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ColumnChain {
    /// `Ψ` in terms of the column and `R̃`.
    pub i_tilde: f64,
    /// `Γ` in terms of the column and `R̃`.
    pub h_tilde: f64,
    /// `R̃`.
    pub j: f64,
    /// `Ψ`.
    pub i: f64,
    /// `Γ`.
    pub h: f64,
    /// Feedback gain of `q` on the column (not used for the `q` column).
    pub g: f64,
}

/// Per-time scalars shared by all columns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pivots {
    pub form: LedgerForm,
    pub g4: f64,
    pub g5: f64,
    pub g6: f64,
    pub g7: f64,
    pub h5: f64,
    pub h6: f64,
    pub i5: f64,
    pub i6: f64,
    pub j5: f64,
    pub j6: f64,
    pub j7: f64,
    /// Denominator of the `Ψ` elimination.
    pub den_i: f64,
    /// `1 + (J₅/J₇)h̃^R + (J₆/J₇)ĩ^R`.
    pub den_j: f64,
    /// Denominator of the final solve for `q`.
    pub den_g: f64,
    pub i_tilde_r: f64,
    pub h_tilde_r: f64,
    /// The `q` column: `h^q, i^q, j^q` are needed by every gain.
    pub q: ColumnChain,
}

impl Pivots {
    /// Pivots at time `t`, without checking the denominators.
    pub fn new(rows: &Rows, form: LedgerForm) -> Self {
        let mut p = Pivots {
            form,
            g4: rows.g[slot::Q],
            g5: rows.g[slot::GAMMA],
            g6: rows.g[slot::PSI],
            g7: rows.g[slot::R],
            h5: rows.h[slot::GAMMA],
            h6: rows.h[slot::PSI],
            i5: rows.i[slot::GAMMA],
            i6: rows.i[slot::PSI],
            j5: rows.j[slot::GAMMA],
            j6: rows.j[slot::PSI],
            j7: rows.j[slot::R],
            den_i: f64::NAN,
            den_j: f64::NAN,
            den_g: f64::NAN,
            i_tilde_r: f64::NAN,
            h_tilde_r: f64::NAN,
            q: ColumnChain::default(),
        };
        p.den_i = match form {
            LedgerForm::Consistent => 1.0 - p.i5 * p.h6 / (p.i6 * p.h5),
            LedgerForm::AsPublished => 1.0 - p.i5 / p.i6,
        };
        let r_col = rows.column(slot::R);
        p.i_tilde_r = p.i_tilde(r_col);
        p.h_tilde_r = p.h_tilde(p.i_tilde_r, r_col, false);
        p.den_j = 1.0 + p.j5 / p.j7 * p.h_tilde_r + p.j6 / p.j7 * p.i_tilde_r;

        let q_col = rows.column(slot::Q);
        let mut q = p.partial_chain(q_col, false);
        p.den_g = 1.0 + p.g5 / p.g4 * q.h + p.g6 / p.g4 * q.i + p.g7_weight() * q.j;
        q.g = f64::NAN;
        p.q = q;
        p
    }

    fn g7_weight(&self) -> f64 {
        match self.form {
            LedgerForm::Consistent => self.g7 / self.g4,
            LedgerForm::AsPublished => 0.0,
        }
    }

    fn i_tilde(&self, c: Column) -> f64 {
        (self.i5 * c.h / (self.i6 * self.h5) - c.i / self.i6) / self.den_i
    }

    fn h_tilde(&self, i_tilde: f64, c: Column, signal: bool) -> f64 {
        let sign = match self.form {
            LedgerForm::AsPublished if !signal => 1.0,
            _ => -1.0,
        };
        sign * self.h6 / self.h5 * i_tilde - c.h / self.h5
    }

    fn partial_chain(&self, c: Column, signal: bool) -> ColumnChain {
        let i_tilde = self.i_tilde(c);
        let h_tilde = self.h_tilde(i_tilde, c, signal);
        let j = -(self.j5 / self.j7 * h_tilde + self.j6 / self.j7 * i_tilde + c.j / self.j7) / self.den_j;
        ColumnChain {
            i_tilde,
            h_tilde,
            j,
            i: i_tilde + self.i_tilde_r * j,
            h: h_tilde + self.h_tilde_r * j,
            g: f64::NAN,
        }
    }

    /// Resolve a state column (`signal = false`) or a signal column
    /// (`signal = true`, entries taken at the later time `s`).
    pub fn resolve(&self, c: Column, signal: bool) -> ColumnChain {
        let mut chain = self.partial_chain(c, signal);
        chain.g = -(self.g5 / self.g4 * chain.h
            + self.g6 / self.g4 * chain.i
            + self.g7_weight() * chain.j
            + c.g / self.g4)
            / self.den_g;
        chain
    }

    /// Check every divisor used by [`Pivots::resolve`] against `tol`.
    pub fn check(&self, t: f64, tol: f64) -> Result<()> {
        let divisors = [
            ("G4", self.g4),
            ("H5", self.h5),
            ("I6", self.i6),
            ("J7", self.j7),
            ("i-tilde denominator", self.den_i),
            ("j-tilde denominator", self.den_j),
            ("g-tilde denominator", self.den_g),
        ];
        for (name, v) in divisors {
            if !(v.abs() >= tol) {
                return Err(Error::Assumption { quantity: name.to_string(), value: v, t });
            }
        }
        Ok(())
    }
}

/// Full ledger at one time for the four observed states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LedgerRow {
    pub t: f64,
    pub pivots: Pivots,
    pub x: ColumnChain,
    pub theta: ColumnChain,
    pub y: ColumnChain,
    pub p: ColumnChain,
}

impl LedgerRow {
    pub fn new(t: f64, rows: &Rows, form: LedgerForm) -> Self {
        let pivots = Pivots::new(rows, form);
        LedgerRow {
            t,
            pivots,
            x: pivots.resolve(rows.column(slot::X), false),
            theta: pivots.resolve(rows.column(slot::THETA), false),
            y: pivots.resolve(rows.column(slot::Y), false),
            p: pivots.resolve(rows.column(slot::P), false),
        }
    }

    /// `(g^X, g^θ, g^Y, g^P)`.
    pub fn gains(&self) -> [f64; 4] {
        [self.x.g, self.theta.g, self.y.g, self.p.g]
    }
}
