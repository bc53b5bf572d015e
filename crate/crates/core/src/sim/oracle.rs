//! Optimality checks that do not rely on the control algebra: the
//! directional derivative of the cost, and the cost change under a finite
//! perturbation of the control.

use rayon::prelude::*;

use super::agent::Agent;
use super::montecarlo::{cost_gap, simulate_outcomes};
use super::path::{run_path, Eta, Perturbation, SimOptions};
use super::stats::Estimate;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// `K(s) = ∫ₛᵀ exp(∫ₛᵗ a) dt` on the grid, trapezoid in both integrals.
fn feedback_kernel(world: &ModelSpec, n: usize, dt: f64, time: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut k = vec![0.0; n + 1];
    for j in (0..n).rev() {
        let growth = (0.5 * dt * (world.a.value(time(j)) + world.a.value(time(j + 1)))).exp();
        k[j] = 0.5 * dt * (1.0 + growth) + growth * k[j + 1];
    }
    k
}

/// Monte Carlo estimate of the Gateaux derivative of the cost at the agent's
/// control in each direction `η`:
///
/// ```text
/// E ∫₀ᵀ η_s ( P_s + εq_s + Y_s + ∫ₛᵀ e^{-β(t-s)} λ q_t dt
///            - b_s P_T K(s) - P_T + 2α (b_s X_T K(s) + X_T) ) ds
/// ```
///
/// All directions are evaluated on the same paths. Zero in every direction
/// characterizes the optimal control.
pub fn gateaux_residual(
    world: &ModelSpec,
    agent: &Agent,
    etas: &[Eta],
    n_paths: usize,
    base_seed: u64,
) -> Result<Vec<Estimate>> {
    if n_paths < 2 {
        return Err(Error::invalid("Gateaux estimate needs at least two paths"));
    }
    let grid = agent.ric.grid;
    let (n, dt, horizon) = (grid.n_steps, grid.dt(), grid.horizon);
    let kern = feedback_kernel(world, n, dt, |j| grid.time(j));
    let b: Vec<f64> = (0..=n).map(|j| world.b.value(grid.time(j))).collect();
    let decay = (-world.beta * dt).exp();
    let opts = SimOptions::default();

    let per_path: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut trace = Vec::with_capacity(n + 1);
            run_path(world, agent, base_seed, i, &opts, |s| trace.push((s.q, s.p, s.y, s.x_hat, s.x)))?;
            let (p_t, x_t) = (trace[n].1, trace[n].4);
            // ∫ₛᵀ e^{-β(t-s)} λ q_t dt, trapezoid, built backward
            let mut future = vec![0.0; n + 1];
            for j in (0..n).rev() {
                future[j] = decay * future[j + 1] + 0.5 * world.lambda * dt * (trace[j].0 + decay * trace[j + 1].0);
            }
            let grad: Vec<f64> = (0..=n)
                .map(|j| {
                    let (q, p, y, _, _) = trace[j];
                    p + world.epsilon * q + y + future[j] - b[j] * p_t * kern[j] - p_t
                        + 2.0 * world.alpha * (b[j] * x_t * kern[j] + x_t)
                })
                .collect();
            Ok(etas
                .iter()
                .map(|eta| {
                    (0..=n)
                        .map(|j| {
                            let w = if j == 0 || j == n { 0.5 * dt } else { dt };
                            w * eta.value(grid.time(j), horizon, trace[j].3) * grad[j]
                        })
                        .sum()
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    Ok((0..etas.len())
        .map(|e| Estimate::of(&per_path.iter().map(|v| v[e]).collect::<Vec<f64>>()))
        .collect())
}

/// Common-random-number estimate of `C(q + δη) - C(q)`.
pub fn perturbed_cost_gap(
    world: &ModelSpec,
    agent: &Agent,
    eta: Eta,
    delta: f64,
    n_paths: usize,
    base_seed: u64,
) -> Result<Estimate> {
    let base = simulate_outcomes(world, agent, n_paths, base_seed, &SimOptions::default())?;
    let opts = SimOptions { perturbation: Some(Perturbation { eta, delta }), ..SimOptions::default() };
    let bumped = simulate_outcomes(world, agent, n_paths, base_seed, &opts)?;
    Ok(cost_gap(&bumped, &base))
}
