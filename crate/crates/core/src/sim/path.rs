use std::path::Path;

use serde::{Deserialize, Serialize};

use super::agent::{Agent, AgentKind};
use super::rng::{Driver, PathRng};
use crate::error::{Error, Result};
use crate::filter::{filter_step, FilterState};
use crate::model::ModelSpec;

/// Which inflow the P&L decomposition charges against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PnlMode {
    /// The inflow that would have arrived had the desk never traded,
    /// simulated with the same noise.
    #[default]
    Uncontrolled,
    /// The realized inflow.
    Realized,
}

impl std::str::FromStr for PnlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uncontrolled" | "z0" => Ok(PnlMode::Uncontrolled),
            "realized" => Ok(PnlMode::Realized),
            _ => Err(Error::invalid(format!("unknown P&L mode '{s}' (expected uncontrolled or realized)"))),
        }
    }
}

/// A bounded direction in control space, used to perturb the optimal rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eta {
    Constant(f64),
    /// `sin(2π cycles t / T)`.
    Sine { cycles: f64 },
    /// `t / T`.
    Ramp,
    /// `clamp(X̂ / scale, -1, 1)`: a direction driven by observed inventory.
    Inventory { scale: f64 },
}

impl Eta {
    #[inline]
    pub fn value(&self, t: f64, horizon: f64, x_hat: f64) -> f64 {
        match *self {
            Eta::Constant(c) => c,
            Eta::Sine { cycles } => (2.0 * std::f64::consts::PI * cycles * t / horizon).sin(),
            Eta::Ramp => t / horizon,
            Eta::Inventory { scale } => (x_hat / scale).clamp(-1.0, 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub eta: Eta,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub pnl_mode: PnlMode,
    /// Added to the agent's rate: `q + δ η`.
    pub perturbation: Option<Perturbation>,
}

/// Everything known at one grid node. `q` is the rate chosen at this node;
/// at the final node it is reported but never applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct NodeState {
    pub k: usize,
    pub t: f64,
    pub z: f64,
    pub theta: f64,
    pub theta_hat: f64,
    pub x: f64,
    pub x_hat: f64,
    pub y: f64,
    pub q: f64,
    pub cum_q: f64,
    pub p: f64,
    pub m_bar: f64,
    pub a_sig: f64,
    pub u: f64,
    pub v: f64,
    /// Inflow without trading feedback.
    pub z0: f64,
    pub theta0: f64,
}

/// Terminal scalars of one path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PathOutcome {
    /// `∫(Pq + Yq + ½εq²)dt - X_T P_T + α X_T²`.
    pub cost: f64,
    pub running_cost: f64,
    pub trading_pnl: f64,
    pub total_pnl: f64,
    pub no_trade_pnl: f64,
    pub terminal_inventory: f64,
    pub terminal_price: f64,
}

/// One simulated path, node by node.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub agent: String,
    pub nodes: Vec<NodeState>,
    pub outcome: PathOutcome,
    pub epsilon: f64,
    pub has_signal: bool,
}

/// Simulate one path, reporting every node to `observe`.
///
/// The agent's rate is held over each step. Impact decays exactly within a
/// step; everything else advances by Euler-Maruyama. Running cost and P&L
/// integrals use left-point sums.
pub fn run_path(
    world: &ModelSpec,
    agent: &Agent,
    base_seed: u64,
    path: u64,
    opts: &SimOptions,
    mut observe: impl FnMut(&NodeState),
) -> Result<PathOutcome> {
    let ric = &*agent.ric;
    let grid = ric.grid;
    let n = grid.n_steps;
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let decay = (-world.beta * dt).exp();
    let (kappa, ell, nu) = world.signal.as_ref().map_or((0.0, 0.0, 0.0), |s| (s.kappa, s.ell, s.nu));
    let init = &world.initial;

    let mut rng = PathRng::new(base_seed, path);
    let mut filt = FilterState::initial(&agent.believed);
    let mut s = NodeState {
        z: init.z,
        theta: init.theta0,
        theta_hat: filt.theta_hat,
        x: init.x + init.z,
        x_hat: filt.x_hat,
        y: init.y,
        p: init.p,
        u: nu,
        z0: init.z,
        theta0: init.theta0,
        ..NodeState::default()
    };
    let mut running = 0.0;
    let mut no_trade = 0.0;
    let mut flow_charge = 0.0;

    for k in 0..=n {
        let t = grid.time(k);
        s.k = k;
        s.t = t;
        let mut q = match agent.kind {
            AgentKind::NoTrade => 0.0,
            AgentKind::FullInfo => agent.table().feedback(k, s.x, s.theta, s.y, s.p, s.u),
            AgentKind::PartialInfo | AgentKind::Naive { .. } => {
                agent.table().feedback(k, s.x_hat, s.theta_hat, s.y, s.p, s.u)
            }
        };
        if let Some(pert) = &opts.perturbation {
            q += pert.delta * pert.eta.value(t, grid.horizon, s.x_hat);
        }
        s.q = q;
        if !q.is_finite() {
            return Err(Error::NonFinite { variable: "q", step: k });
        }
        observe(&s);
        if k == n {
            break;
        }

        running += (s.p * q + s.y * q + 0.5 * world.epsilon * q * q) * dt;

        let dwz = sqrt_dt * rng.normal(Driver::Flow);
        let dwt = sqrt_dt * rng.normal(Driver::Toxicity);
        let dwm = sqrt_dt * rng.normal(Driver::Price);
        let dwu = sqrt_dt * rng.normal(Driver::Signal);

        let (a, b, c, d) = (world.a.value(t), world.b.value(t), world.c.value(t), world.d.value(t));
        let dz = s.theta * dt + world.sigma * dwz;
        let dz0 = s.theta0 * dt + world.sigma * dwz;
        let charged = match opts.pnl_mode {
            PnlMode::Uncontrolled => dz0,
            PnlMode::Realized => dz,
        };
        no_trade -= s.p * charged;
        flow_charge += (s.p + s.y) * charged;

        s.theta += (a * s.theta + b * q) * dt + c * dwz + d * dwt;
        s.theta0 += a * s.theta0 * dt + c * dwz + d * dwt;
        s.y = s.y * decay + world.lambda * q * dt;
        s.x = s.x + q * dt + dz;
        s.cum_q += q * dt;
        s.z += dz;
        s.z0 += dz0;
        s.m_bar += world.sigma_m * dwm;
        s.a_sig += s.u * dt;
        s.u += -kappa * s.u * dt + ell * dwu;
        s.p = init.p + s.m_bar + s.a_sig;

        filt = filter_step(&filt, dz, q, &agent.believed, ric)?;
        s.theta_hat = filt.theta_hat;
        s.x_hat = filt.x_hat;
        s.v = filt.v;

        for (name, v) in [("theta", s.theta), ("X", s.x), ("Y", s.y), ("P", s.p), ("theta_hat", s.theta_hat)] {
            if !v.is_finite() {
                return Err(Error::NonFinite { variable: name, step: k + 1 });
            }
        }
    }

    let trading = s.p * s.x - running;
    Ok(PathOutcome {
        cost: running - s.x * s.p + world.alpha * s.x * s.x,
        running_cost: running,
        trading_pnl: trading,
        total_pnl: trading - flow_charge,
        no_trade_pnl: no_trade,
        terminal_inventory: s.x,
        terminal_price: s.p,
    })
}

/// Simulate and record one path.
pub fn simulate_path(world: &ModelSpec, agent: &Agent, base_seed: u64, path: u64, opts: &SimOptions) -> Result<TrajectoryRecord> {
    let mut nodes = Vec::with_capacity(agent.ric.grid.len());
    let outcome = run_path(world, agent, base_seed, path, opts, |s| nodes.push(*s))?;
    Ok(TrajectoryRecord {
        agent: agent.kind.to_string(),
        nodes,
        outcome,
        epsilon: world.epsilon,
        has_signal: world.signal.is_some(),
    })
}

/// The three P&L figures recomputed from a recorded path:
/// `(no-trade, trading, total)`.
pub fn pnl_decomposition(traj: &TrajectoryRecord, mode: PnlMode) -> Result<(f64, f64, f64)> {
    let nodes = &traj.nodes;
    if nodes.len() < 2 {
        return Err(Error::invalid("trajectory has fewer than two nodes"));
    }
    let last = nodes[nodes.len() - 1];
    let dt = nodes[1].t - nodes[0].t;
    let (mut no_trade, mut cash, mut charge) = (0.0, 0.0, 0.0);
    for w in nodes.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dz = match mode {
            PnlMode::Uncontrolled => b.z0 - a.z0,
            PnlMode::Realized => b.z - a.z,
        };
        no_trade -= a.p * dz;
        charge += (a.p + a.y) * dz;
        cash += (a.p + a.y + 0.5 * traj.epsilon * a.q) * a.q * dt;
    }
    let trading = last.p * last.x - cash;
    Ok((no_trade, trading, trading - charge))
}

impl TrajectoryRecord {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t", "Z", "theta", "theta_hat", "X", "X_hat", "Y", "q", "Q", "P", "M_bar", "A"];
        if self.has_signal {
            header.push("U");
        }
        header.extend(["V", "Z0"]);
        w.write_record(&header)?;
        for s in &self.nodes {
            let mut rec = vec![s.t, s.z, s.theta, s.theta_hat, s.x, s.x_hat, s.y, s.q, s.cum_q, s.p, s.m_bar, s.a_sig];
            if self.has_signal {
                rec.push(s.u);
            }
            rec.extend([s.v, s.z0]);
            w.write_record(rec.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    /// The path as a flow file (`timestamp,dt,dz,q`) for the calibration
    /// tools; `timestamp` is in days.
    pub fn write_flow_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["timestamp", "dt", "dz", "q"])?;
        for pair in self.nodes.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            w.write_record([a.t, b.t - a.t, b.z - a.z, a.q].iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}
