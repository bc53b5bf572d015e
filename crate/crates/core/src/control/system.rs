//! The linear system behind the optimal control: `L_t`, `r_t`, the
//! transition matrix `S(t) = Φ_T Φ_t⁻¹` and the terminal row vectors.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, TimeGrid};

use super::LedgerForm;

pub type Mat8 = SMatrix<f64, 8, 8>;
pub type Row8 = nalgebra::RowSVector<f64, 8>;
pub type Vec8 = SVector<f64, 8>;

/// RK4 substeps per grid interval. `S` grows to ~1e9 over a day in the
/// reference scenarios, and four substeps keep the relative error near 1e-11.
pub const SUBSTEPS: usize = 4;

/// Largest entry of `S` accepted before the transition matrix is treated
/// as numerically singular.
pub const S_NORM_CAP: f64 = 1e12;

/// State ordering of the system: `(X̂, θ̂, Y, q, Γ, Ψ, R̃, P)`.
pub mod slot {
    pub const X: usize = 0;
    pub const THETA: usize = 1;
    pub const Y: usize = 2;
    pub const Q: usize = 3;
    pub const GAMMA: usize = 4;
    pub const PSI: usize = 5;
    pub const R: usize = 6;
    pub const P: usize = 7;
}

/// System matrix `L_t` given `r_t`.
pub fn build_l(spec: &ModelSpec, t: f64, r: f64, form: LedgerForm) -> Mat8 {
    use slot::*;
    let a = spec.a.value(t);
    let b = spec.b.value(t);
    let (eps, beta, lam) = (spec.epsilon, spec.beta, spec.lambda);
    let mut l = Mat8::zeros();
    l[(X, THETA)] = 1.0;
    l[(X, Q)] = 1.0;
    l[(THETA, THETA)] = a;
    l[(THETA, Q)] = b;
    l[(Y, Y)] = -beta;
    l[(Y, Q)] = lam;
    l[(Q, Y)] = beta / eps;
    l[(Q, GAMMA)] = -beta / eps;
    l[(Q, PSI)] = a / eps;
    l[(Q, R)] = -r / eps;
    l[(GAMMA, Q)] = -lam;
    l[(GAMMA, GAMMA)] = beta;
    l[(PSI, PSI)] = match form {
        LedgerForm::Consistent => -a,
        LedgerForm::AsPublished => -a * b,
    };
    l[(PSI, R)] = r;
    l
}

/// `r_t = -b'_t ∫₀ᵗ exp(-∫ₛᵗ a) ds - b_t`, tabulated on a uniform grid and
/// interpolated linearly in between.
#[derive(Clone, Debug)]
pub enum RFunction {
    Constant(f64),
    Table { horizon: f64, values: Vec<f64> },
}

impl RFunction {
    /// Tabulate with `m` trapezoid intervals on `[0, T]`.
    pub fn new(spec: &ModelSpec, m: usize) -> Self {
        if spec.b.is_constant() {
            return RFunction::Constant(-spec.b.value(0.0));
        }
        let horizon = spec.horizon;
        let h = horizon / m as f64;
        let time = |j: usize| if j == m { horizon } else { j as f64 * h };
        let mut values = Vec::with_capacity(m + 1);
        // inner(t_j) = ∫₀^{t_j} exp(A(s) - A(t_j)) ds with A' = a; the trapezoid
        // sum is carried forward by rescaling with exp(A(t_j) - A(t_{j+1})).
        let mut inner = 0.0;
        for j in 0..=m {
            let t = time(j);
            if j > 0 {
                let decay = (-0.5 * h * (spec.a.value(time(j - 1)) + spec.a.value(t))).exp();
                inner = decay * inner + 0.5 * h * (decay + 1.0);
            }
            values.push(-spec.b.derivative(t) * inner - spec.b.value(t));
        }
        RFunction::Table { horizon, values }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            RFunction::Constant(r) => *r,
            RFunction::Table { horizon, values } => {
                let m = values.len() - 1;
                let x = (t / horizon * m as f64).clamp(0.0, m as f64);
                let lo = (x.floor() as usize).min(m - 1);
                let w = x - lo as f64;
                (1.0 - w) * values[lo] + w * values[lo + 1]
            }
        }
    }
}

/// `r_t` by trapezoid quadrature on the given grid.
pub fn compute_r(spec: &ModelSpec, grid: &TimeGrid, t: f64) -> Result<f64> {
    crate::model::check_time(t, spec.horizon)?;
    Ok(RFunction::new(spec, grid.n_steps).eval(t))
}

fn rk4_substeps(grid: &TimeGrid) -> (usize, f64) {
    (SUBSTEPS, grid.dt() / SUBSTEPS as f64)
}

fn check_norm(m: &Mat8, t: f64, what: &str) -> Result<()> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Assumption { quantity: format!("{what} finite"), value: f64::NAN, t });
    }
    let norm = m.amax();
    if norm > S_NORM_CAP {
        return Err(Error::Assumption { quantity: format!("max|{what}| below {S_NORM_CAP:e}"), value: norm, t });
    }
    Ok(())
}

/// `S(t)` at every node, from `dS/dt = -S L_t` integrated backward from
/// `S(T) = I`.
pub fn solve_s(spec: &ModelSpec, grid: &TimeGrid, form: LedgerForm) -> Result<Vec<Mat8>> {
    let (sub, h) = rk4_substeps(grid);
    let rfun = RFunction::new(spec, 2 * sub * grid.n_steps);
    let l_at = |t: f64| build_l(spec, t, rfun.eval(t), form);
    let f = |s: &Mat8, l: &Mat8| -(s * l);
    let mut out = vec![Mat8::zeros(); grid.len()];
    let mut s = Mat8::identity();
    out[grid.n_steps] = s;
    for k in (0..grid.n_steps).rev() {
        let t_end = grid.time(k + 1);
        for j in 0..sub {
            let t = t_end - j as f64 * h;
            let (l0, lm, l1) = (l_at(t), l_at(t - 0.5 * h), l_at(t - h));
            let k1 = f(&s, &l0);
            let k2 = f(&(s - k1 * (0.5 * h)), &lm);
            let k3 = f(&(s - k2 * (0.5 * h)), &lm);
            let k4 = f(&(s - k3 * h), &l1);
            s -= (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        check_norm(&s, grid.time(k), "S")?;
        out[k] = s;
    }
    Ok(out)
}

/// Fundamental matrix `Φ_t` from `dΦ/dt = L_t Φ`, `Φ_0 = I`.
pub fn solve_phi(spec: &ModelSpec, grid: &TimeGrid, form: LedgerForm) -> Result<Vec<Mat8>> {
    let (sub, h) = rk4_substeps(grid);
    let rfun = RFunction::new(spec, 2 * sub * grid.n_steps);
    let l_at = |t: f64| build_l(spec, t, rfun.eval(t), form);
    let mut out = Vec::with_capacity(grid.len());
    let mut phi = Mat8::identity();
    out.push(phi);
    for k in 0..grid.n_steps {
        let t0 = grid.time(k);
        for j in 0..sub {
            let t = t0 + j as f64 * h;
            let (l0, lm, l1) = (l_at(t), l_at(t + 0.5 * h), l_at(t + h));
            let k1 = l0 * phi;
            let k2 = lm * (phi + k1 * (0.5 * h));
            let k3 = lm * (phi + k2 * (0.5 * h));
            let k4 = l1 * (phi + k3 * h);
            phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        check_norm(&phi, grid.time(k + 1), "Phi")?;
        out.push(phi);
    }
    Ok(out)
}

/// Terminal row vectors `(G, H, I, J)` at `T`, before multiplication by `S(t)`.
pub fn terminal_rows(spec: &ModelSpec) -> [Row8; 4] {
    let (alpha, eps) = (spec.alpha, spec.epsilon);
    let mut g = Row8::zeros();
    g[slot::X] = 2.0 * alpha / eps;
    g[slot::Y] = 1.0 / eps;
    g[slot::Q] = 1.0;
    let mut h = Row8::zeros();
    h[slot::GAMMA] = 1.0;
    let mut i = Row8::zeros();
    i[slot::PSI] = 1.0;
    let mut j = Row8::zeros();
    j[slot::X] = -2.0 * alpha;
    j[slot::R] = 1.0;
    j[slot::P] = 1.0;
    [g, h, i, j]
}

/// The row vectors `G(t), H(t), I(t), J(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rows {
    pub g: Row8,
    pub h: Row8,
    pub i: Row8,
    pub j: Row8,
}

impl Rows {
    pub fn from_s(terminal: &[Row8; 4], s: &Mat8) -> Self {
        Rows { g: terminal[0] * s, h: terminal[1] * s, i: terminal[2] * s, j: terminal[3] * s }
    }

    /// Entries of the four rows in column `c`.
    pub fn column(&self, c: usize) -> Column {
        Column { g: self.g[c], h: self.h[c], i: self.i[c], j: self.j[c] }
    }

    /// Loadings of the four rows on the signal increment `dA_s`, taken at
    /// the later time `s`: `-K_4(s)/ε + K_8(s)`.
    pub fn signal_column(&self, eps: f64) -> Column {
        let k = |r: &Row8| -r[slot::Q] / eps + r[slot::P];
        Column { g: k(&self.g), h: k(&self.h), i: k(&self.i), j: k(&self.j) }
    }
}

/// One column across the four rows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Column {
    pub g: f64,
    pub h: f64,
    pub i: f64,
    pub j: f64,
}
