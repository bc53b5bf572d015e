//! Kalman-Bucy filtering of the hidden toxicity.
//!
//! The observation is the inflow `Z`, whose drift is the toxicity `θ`.
//! Stacking `(θ, X)` gives a linear system with drift matrix
//! `A = [[a, 0], [1, 0]]`, observation loading `C = (c, σ)` and hidden noise
//! `D = (d, 0)`. The error covariance `Σ` solves a deterministic Riccati
//! equation shared by every path. Because `X` is observed exactly, only
//! `Σ11` is ever nonzero.

use std::path::Path;

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, TimeGrid};

/// Smallest eigenvalue tolerated before `Σ` is declared indefinite.
pub const PSD_FLOOR: f64 = -1e-10;

#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    pub grid: TimeGrid,
    /// `Σ_t` at each node.
    pub sigma: Vec<Matrix2<f64>>,
    /// `(κ1 + c/σ, κ2 + 1)` at each node: innovation loadings of `θ̂` and `X̂`.
    pub loadings: Vec<(f64, f64)>,
}

/// Pieces of the Riccati right-hand side at one time.
struct RiccatiCoefs {
    drift: Matrix2<f64>,
    inv_var: f64,
    noise: Matrix2<f64>,
}

fn riccati_coefs(spec: &ModelSpec, t: f64) -> RiccatiCoefs {
    let a = spec.a.value(t);
    let d = spec.d.value(t);
    let (c_over_sigma, inv_var) = if spec.noise_free_flow() {
        (0.0, 0.0)
    } else {
        (spec.c.value(t) / spec.sigma, spec.sigma.powi(-2))
    };
    // A - σ⁻¹ C e1ᵀ; the (2,1) entry is 1 - σ/σ = 0.
    let drift = Matrix2::new(a - c_over_sigma, 0.0, 0.0, 0.0);
    let dv = Vector2::new(d, 0.0);
    RiccatiCoefs { drift, inv_var, noise: dv * dv.transpose() }
}

fn riccati_rhs(k: &RiccatiCoefs, s: &Matrix2<f64>) -> Matrix2<f64> {
    let se1 = s.column(0).into_owned();
    k.drift * s + s * k.drift.transpose() - se1 * se1.transpose() * k.inv_var + k.noise
}

fn min_eigenvalue(s: &Matrix2<f64>) -> f64 {
    let half_tr = 0.5 * (s[(0, 0)] + s[(1, 1)]);
    let half_gap = (0.25 * (s[(0, 0)] - s[(1, 1)]).powi(2) + s[(0, 1)] * s[(1, 0)]).max(0.0).sqrt();
    half_tr - half_gap
}

/// Integrate the filter Riccati equation from `Σ_0 = 0` with classical RK4,
/// symmetrizing after each step.
pub fn solve_riccati(spec: &ModelSpec, grid: &TimeGrid) -> Result<RiccatiSolution> {
    spec.validate()?;
    let dt = grid.dt();
    let mut sigma = Vec::with_capacity(grid.len());
    let mut s = Matrix2::zeros();
    sigma.push(s);
    for k in 0..grid.n_steps {
        let t = grid.time(k);
        let c0 = riccati_coefs(spec, t);
        let cm = riccati_coefs(spec, t + 0.5 * dt);
        let c1 = riccati_coefs(spec, t + dt);
        let k1 = riccati_rhs(&c0, &s);
        let k2 = riccati_rhs(&cm, &(s + k1 * (0.5 * dt)));
        let k3 = riccati_rhs(&cm, &(s + k2 * (0.5 * dt)));
        let k4 = riccati_rhs(&c1, &(s + k3 * dt));
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        s = (s + s.transpose()) * 0.5;
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!("Riccati solution non-finite at step {}", k + 1)));
        }
        let lam = min_eigenvalue(&s);
        if lam < PSD_FLOOR {
            return Err(Error::Numerical(format!(
                "Riccati solution indefinite at t = {} (eigenvalue {lam:e}); refine the grid",
                grid.time(k + 1)
            )));
        }
        sigma.push(s);
    }
    let loadings = (0..grid.len()).map(|k| loadings_at(spec, grid.time(k), &sigma[k])).collect();
    Ok(RiccatiSolution { grid: *grid, sigma, loadings })
}

fn loadings_at(spec: &ModelSpec, t: f64, s: &Matrix2<f64>) -> (f64, f64) {
    if spec.noise_free_flow() {
        return (0.0, 1.0);
    }
    let inv_var = spec.sigma.powi(-2);
    (s[(0, 0)] * inv_var + spec.c.value(t) / spec.sigma, s[(1, 0)] * inv_var + 1.0)
}

impl RiccatiSolution {
    /// Innovation loadings `(κ1 + c/σ, κ2 + 1)` at the node time `t`.
    pub fn innovation_loadings(&self, t: f64) -> Result<(f64, f64)> {
        let k = self
            .grid
            .index_of(t)
            .ok_or_else(|| Error::invalid(format!("t = {t} is not a grid node")))?;
        Ok(self.loadings[k])
    }

    /// Smallest eigenvalue of `Σ` over the grid.
    pub fn min_eigenvalue(&self) -> f64 {
        self.sigma.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// Max-norm gap between the ODE right-hand side evaluated on the stored
    /// `Σ` and its central-difference time derivative, over interior nodes.
    pub fn residual(&self, spec: &ModelSpec) -> f64 {
        let dt = self.grid.dt();
        (1..self.grid.n_steps)
            .map(|k| {
                let fd = (self.sigma[k + 1] - self.sigma[k - 1]) / (2.0 * dt);
                let rhs = riccati_rhs(&riccati_coefs(spec, self.grid.time(k)), &self.sigma[k]);
                (fd - rhs).amax()
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            t: f64,
            #[serde(rename = "Sigma11")]
            s11: f64,
            #[serde(rename = "Sigma12")]
            s12: f64,
            #[serde(rename = "Sigma22")]
            s22: f64,
            load_theta: f64,
            load_x: f64,
        }
        let mut w = csv::Writer::from_path(path)?;
        for (k, s) in self.sigma.iter().enumerate() {
            w.serialize(Row {
                t: self.grid.time(k),
                s11: s[(0, 0)],
                s12: s[(0, 1)],
                s22: s[(1, 1)],
                load_theta: self.loadings[k].0,
                load_x: self.loadings[k].1,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Conditional means of toxicity and inventory given the observed flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FilterState {
    /// Grid node index.
    pub k: usize,
    pub t: f64,
    pub theta_hat: f64,
    pub x_hat: f64,
    /// Running innovation.
    pub v: f64,
}

impl FilterState {
    /// Prior at time 0: the toxicity starts at its known initial value and the
    /// inventory includes the outstanding inflow.
    pub fn initial(spec: &ModelSpec) -> Self {
        FilterState {
            k: 0,
            t: 0.0,
            theta_hat: spec.initial.theta0,
            x_hat: spec.initial.x + spec.initial.z,
            v: 0.0,
        }
    }
}

/// One Euler-Maruyama step of the filter, driven by the realized inflow
/// increment `dz` and the applied trading rate `q`.
pub fn filter_step(st: &FilterState, dz: f64, q: f64, spec: &ModelSpec, ric: &RiccatiSolution) -> Result<FilterState> {
    if st.k >= ric.grid.n_steps {
        return Err(Error::invalid("filter already at the horizon"));
    }
    if !(dz.is_finite() && q.is_finite() && st.theta_hat.is_finite() && st.x_hat.is_finite()) {
        return Err(Error::NonFinite { variable: "filter input", step: st.k });
    }
    let dt = ric.grid.dt();
    let (load_theta, load_x) = ric.loadings[st.k];
    let dv = dz - st.theta_hat * dt;
    let theta_hat = st.theta_hat + (spec.a.value(st.t) * st.theta_hat + spec.b.value(st.t) * q) * dt + load_theta * dv;
    let x_hat = st.x_hat + (st.theta_hat + q) * dt + load_x * dv;
    let k = st.k + 1;
    Ok(FilterState { k, t: ric.grid.time(k), theta_hat, x_hat, v: st.v + dv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoefFn, Scenario};

    fn reversion() -> (ModelSpec, TimeGrid) {
        let spec = ModelSpec::preset(Scenario::Reversion);
        let grid = TimeGrid::new(spec.horizon, 1000).unwrap();
        (spec, grid)
    }

    #[test]
    fn no_hidden_noise_gives_zero_covariance() {
        let (mut spec, grid) = reversion();
        spec.d = CoefFn::Constant(0.0);
        let ric = solve_riccati(&spec, &grid).unwrap();
        assert!(ric.sigma.iter().all(|s| s.amax() == 0.0));
        assert_eq!(ric.loadings[500], (0.0, 1.0));
    }

    #[test]
    fn starts_at_zero_and_stays_psd() {
        let (spec, grid) = reversion();
        let ric = solve_riccati(&spec, &grid).unwrap();
        assert_eq!(ric.sigma[0], Matrix2::zeros());
        assert!(ric.min_eigenvalue() >= PSD_FLOOR);
        // X is observed: only the toxicity block carries uncertainty
        assert!(ric.sigma.iter().all(|s| s[(0, 1)] == 0.0 && s[(1, 1)] == 0.0));
        assert!(ric.residual(&spec) < 1e-6);
    }

    #[test]
    fn loadings_from_diagonal_covariance() {
        let (spec, _) = reversion();
        let s = Matrix2::new(2e-4, 0.0, 0.0, 0.0);
        let (lt, lx) = loadings_at(&spec, 0.3, &s);
        assert!((lt - 2e-4 / 0.01).abs() < 1e-15);
        assert_eq!(lx, 1.0);
    }

    #[test]
    fn zero_innovation_step() {
        let (spec, grid) = reversion();
        let ric = solve_riccati(&spec, &grid).unwrap();
        let st = FilterState { k: 10, t: grid.time(10), theta_hat: 0.1, x_hat: 0.3, v: 0.0 };
        let dt = grid.dt();
        let next = filter_step(&st, 0.1 * dt, 0.0, &spec, &ric).unwrap();
        assert_eq!(next.v, 0.0);
        assert_eq!(next.theta_hat, 0.1 + (-0.4 * 0.1) * dt);
        assert_eq!(next.x_hat, 0.3 + 0.1 * dt);
        assert_eq!(next.k, 11);
    }

    #[test]
    fn single_step_matches_hand_evaluation() {
        let (spec, grid) = reversion();
        let ric = solve_riccati(&spec, &grid).unwrap();
        let k = 250;
        let st = FilterState { k, t: grid.time(k), theta_hat: 0.1, x_hat: 0.02, v: 0.0 };
        let (dz, q) = (0.01, -0.05);
        let next = filter_step(&st, dz, q, &spec, &ric).unwrap();
        let s11 = ric.sigma[k][(0, 0)];
        let dv = 0.01 - 0.1 * 1e-3;
        let theta = 0.1 + (-0.4 * 0.1 + -0.2 * -0.05) * 1e-3 + (s11 / 0.01) * dv;
        let x = 0.02 + (0.1 - 0.05) * 1e-3 + dv;
        assert!((next.theta_hat - theta).abs() < 1e-15);
        assert!((next.x_hat - x).abs() < 1e-15);
        assert!((next.v - dv).abs() < 1e-18);
    }

    #[test]
    fn rejects_non_finite_inputs() {
        let (spec, grid) = reversion();
        let ric = solve_riccati(&spec, &grid).unwrap();
        let st = FilterState::initial(&spec);
        assert!(filter_step(&st, f64::NAN, 0.0, &spec, &ric).is_err());
    }
}
