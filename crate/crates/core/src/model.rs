//! Model parameters, deterministic coefficient functions and the time grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking that a time lies in `[0, T]`.
const TIME_SLACK: f64 = 1e-12;

/// A deterministic, bounded function of time on `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefFn {
    Constant(f64),
    /// `value0 + slope * t`, with analytic derivative `slope`.
    Linear { value0: f64, slope: f64 },
    /// Samples `(t, value)` covering `[0, T]`, interpolated linearly. The
    /// derivative is the central difference at the nodes, interpolated.
    Table(Vec<(f64, f64)>),
}

impl CoefFn {
    /// Value at `t`. Tables are clamped to their end values outside their range.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            CoefFn::Constant(v) => *v,
            CoefFn::Linear { value0, slope } => value0 + slope * t,
            CoefFn::Table(pts) => interpolate(pts, t, |i| pts[i].1),
        }
    }

    /// Time derivative at `t`.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            CoefFn::Constant(_) => 0.0,
            CoefFn::Linear { slope, .. } => *slope,
            CoefFn::Table(pts) => interpolate(pts, t, |i| node_derivative(pts, i)),
        }
    }

    /// Value at `t`, rejecting times outside `[0, horizon]`.
    pub fn eval(&self, t: f64, horizon: f64) -> Result<f64> {
        check_time(t, horizon)?;
        Ok(self.value(t))
    }

    pub fn is_constant(&self) -> bool {
        match self {
            CoefFn::Constant(_) => true,
            CoefFn::Linear { slope, .. } => *slope == 0.0,
            CoefFn::Table(pts) => pts.windows(2).all(|w| w[0].1 == w[1].1),
        }
    }

    /// True when the function is identically zero.
    pub fn is_zero(&self) -> bool {
        self.is_constant() && self.value(0.0) == 0.0
    }

    fn validate(&self, name: &str, horizon: f64) -> Result<()> {
        match self {
            CoefFn::Constant(v) if !v.is_finite() => {
                Err(Error::invalid(format!("{name}: non-finite constant")))
            }
            CoefFn::Linear { value0, slope } if !(value0.is_finite() && slope.is_finite()) => {
                Err(Error::invalid(format!("{name}: non-finite linear coefficients")))
            }
            CoefFn::Table(pts) => {
                if pts.len() < 2 {
                    return Err(Error::invalid(format!("{name}: table needs at least two samples")));
                }
                if pts.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(Error::invalid(format!("{name}: non-finite table entry")));
                }
                if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::invalid(format!("{name}: table times must increase strictly")));
                }
                let (first, last) = (pts[0].0, pts[pts.len() - 1].0);
                if first.abs() > TIME_SLACK * horizon || (last - horizon).abs() > TIME_SLACK * horizon {
                    return Err(Error::invalid(format!(
                        "{name}: table must cover [0, {horizon}] exactly, got [{first}, {last}]"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl From<f64> for CoefFn {
    fn from(v: f64) -> Self {
        CoefFn::Constant(v)
    }
}

fn interpolate(pts: &[(f64, f64)], t: f64, node: impl Fn(usize) -> f64) -> f64 {
    let n = pts.len();
    if t <= pts[0].0 {
        return node(0);
    }
    if t >= pts[n - 1].0 {
        return node(n - 1);
    }
    let hi = pts.partition_point(|p| p.0 <= t);
    let lo = hi - 1;
    let w = (t - pts[lo].0) / (pts[hi].0 - pts[lo].0);
    (1.0 - w) * node(lo) + w * node(hi)
}

fn node_derivative(pts: &[(f64, f64)], i: usize) -> f64 {
    let n = pts.len();
    let (lo, hi) = match i {
        0 => (0, 1),
        _ if i == n - 1 => (n - 2, n - 1),
        _ => (i - 1, i + 1),
    };
    (pts[hi].1 - pts[lo].1) / (pts[hi].0 - pts[lo].0)
}

pub(crate) fn check_time(t: f64, horizon: f64) -> Result<()> {
    if t.is_finite() && t >= -TIME_SLACK * horizon && t <= horizon * (1.0 + TIME_SLACK) {
        Ok(())
    } else {
        Err(Error::OutOfRange { t, horizon })
    }
}

/// Price-predicting signal `A = ∫U`, with `dU = -κU dt + ℓ dW^U` and `U_0 = ν`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kappa: f64,
    pub ell: f64,
    pub nu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    /// Inventory.
    pub x: f64,
    /// Cumulative inflow.
    pub z: f64,
    pub theta0: f64,
    /// Transient impact.
    pub y: f64,
    pub p: f64,
}

/// Full parameterization of the market, the flow and the desk's objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub a: CoefFn,
    pub b: CoefFn,
    pub c: CoefFn,
    pub d: CoefFn,
    /// Inflow volatility.
    pub sigma: f64,
    /// Volatility of the martingale part of the price.
    pub sigma_m: f64,
    /// Instantaneous impact.
    pub epsilon: f64,
    /// Decay rate of transient impact.
    pub beta: f64,
    /// Transient impact per unit volume.
    pub lambda: f64,
    /// Terminal inventory penalty.
    pub alpha: f64,
    /// Horizon `T` in days.
    pub horizon: f64,
    pub signal: Option<SignalSpec>,
    pub initial: InitialState,
}

impl ModelSpec {
    pub fn preset(scenario: Scenario) -> Self {
        let base = ModelSpec {
            a: CoefFn::Constant(-0.4),
            b: CoefFn::Constant(-0.2),
            c: CoefFn::Constant(0.0),
            d: CoefFn::Constant(0.01),
            sigma: 0.1,
            sigma_m: 6.3e-3,
            epsilon: 0.01,
            beta: 10.0,
            lambda: 0.1,
            alpha: 100.0,
            horizon: 1.0,
            signal: None,
            initial: InitialState { x: 0.0, z: 0.0, theta0: 0.1, y: 0.0, p: 1.27 },
        };
        match scenario {
            Scenario::Reversion => base,
            Scenario::Momentum => ModelSpec { a: CoefFn::Constant(0.4), ..base },
            Scenario::ShortSignal => {
                let scale = 0.02_f64.sqrt();
                ModelSpec {
                    d: CoefFn::Constant(0.01 * scale),
                    sigma: 0.1 * scale,
                    sigma_m: 6.3e-3 * scale,
                    alpha: 1.0,
                    horizon: 0.02,
                    signal: Some(SignalSpec { kappa: 0.02, ell: scale, nu: 0.0 }),
                    ..base
                }
            }
        }
    }

    /// Copy of the spec with a different feedback coefficient `b`.
    pub fn with_b(&self, b: CoefFn) -> Self {
        ModelSpec { b, ..self.clone() }
    }

    /// True when the inflow carries no noise at all, in which case the
    /// toxicity is a deterministic function of the control and the filter
    /// degenerates to an exact observer.
    pub fn noise_free_flow(&self) -> bool {
        self.sigma == 0.0 && self.c.is_zero() && self.d.is_zero()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("horizon", self.horizon),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if self.sigma == 0.0 && !self.noise_free_flow() {
            return Err(Error::invalid("sigma = 0 requires c = d = 0"));
        }
        if !(self.sigma_m.is_finite() && self.sigma_m >= 0.0) {
            return Err(Error::invalid(format!("sigma_m must be nonnegative, got {}", self.sigma_m)));
        }
        for (name, f) in [("a", &self.a), ("b", &self.b), ("c", &self.c), ("d", &self.d)] {
            f.validate(name, self.horizon)?;
        }
        if let Some(s) = &self.signal {
            if !(s.kappa.is_finite() && s.kappa >= 0.0) || !(s.ell.is_finite() && s.ell >= 0.0) || !s.nu.is_finite() {
                return Err(Error::invalid("signal needs kappa >= 0, ell >= 0 and finite nu"));
            }
        }
        let i = &self.initial;
        if [i.x, i.z, i.theta0, i.y, i.p].iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("initial state must be finite"));
        }
        Ok(())
    }
}

/// The three parameter sets used in the numerical study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Toxicity mean-reverts (`a = -0.4`).
    Reversion,
    /// Toxicity has momentum (`a = +0.4`).
    Momentum,
    /// Short horizon with an Ornstein-Uhlenbeck price signal.
    ShortSignal,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Reversion, Scenario::Momentum, Scenario::ShortSignal];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Reversion => "reversion",
            Scenario::Momentum => "momentum",
            Scenario::ShortSignal => "short_signal",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario '{s}' (expected reversion, momentum or short_signal)")))
    }
}

/// Uniform grid `t_k = k T / n` on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub const DEFAULT_STEPS: usize = 1000;

    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) || n_steps == 0 {
            return Err(Error::invalid(format!("bad grid: T = {horizon}, n = {n_steps}")));
        }
        Ok(TimeGrid { horizon, n_steps })
    }

    pub fn for_spec(spec: &ModelSpec, n_steps: usize) -> Result<Self> {
        Self::new(spec.horizon, n_steps)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Node time; the last node is exactly `T`.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    /// Index of the node at time `t`, if `t` is a node.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.dt()).round();
        if k < 0.0 || k > self.n_steps as f64 {
            return None;
        }
        let k = k as usize;
        ((self.time(k) - t).abs() <= 1e-9 * self.horizon).then_some(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_table_evaluation() {
        let a = CoefFn::Constant(-0.4);
        assert_eq!(a.eval(0.5, 1.0).unwrap(), -0.4);
        assert_eq!(a.derivative(0.3), 0.0);
        let tab = CoefFn::Table(vec![(0.0, 1.0), (1.0, 3.0)]);
        assert_eq!(tab.eval(0.5, 1.0).unwrap(), 2.0);
        assert_eq!(tab.derivative(0.5), 2.0);
        assert!(tab.eval(1.5, 1.0).is_err());
        assert!(tab.eval(-0.1, 1.0).is_err());
    }

    #[test]
    fn table_derivative_uses_central_differences() {
        let pts: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64 / 10.0, (i as f64 / 10.0).powi(2))).collect();
        let f = CoefFn::Table(pts);
        // central difference of t^2 is exact at interior nodes
        assert!((f.derivative(0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn presets() {
        let s1 = ModelSpec::preset(Scenario::Reversion);
        assert_eq!(s1.a, CoefFn::Constant(-0.4));
        assert_eq!(s1.b, CoefFn::Constant(-0.2));
        assert_eq!((s1.epsilon, s1.beta, s1.lambda, s1.alpha), (0.01, 10.0, 0.1, 100.0));
        assert_eq!((s1.sigma, s1.initial.theta0, s1.initial.p), (0.1, 0.1, 1.27));
        let s2 = ModelSpec::preset(Scenario::Momentum);
        assert_eq!(s2.a, CoefFn::Constant(0.4));
        assert_eq!(s2.b, s1.b);
        let s3 = ModelSpec::preset(Scenario::ShortSignal);
        assert_eq!((s3.horizon, s3.alpha), (0.02, 1.0));
        assert!((s3.sigma - 0.1 * 0.02f64.sqrt()).abs() < 1e-15);
        let sig = s3.signal.unwrap();
        assert_eq!(sig.kappa, 0.02);
        assert_eq!(sig.ell, 0.02f64.sqrt());
        for sc in Scenario::ALL {
            ModelSpec::preset(sc).validate().unwrap();
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!("bogus".parse::<Scenario>().is_err());
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut s = ModelSpec::preset(Scenario::Reversion);
        s.epsilon = 0.0;
        assert!(s.validate().is_err());
        let mut s = ModelSpec::preset(Scenario::Reversion);
        s.sigma = 0.0;
        assert!(s.validate().is_err());
        s.d = CoefFn::Constant(0.0);
        s.validate().unwrap();
        let mut s = ModelSpec::preset(Scenario::Reversion);
        s.b = CoefFn::Table(vec![(0.0, 1.0), (0.5, 2.0)]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn grid_nodes() {
        let g = TimeGrid::new(0.02, 1000).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(1000), 0.02);
        assert_eq!(g.index_of(0.01), Some(500));
        assert_eq!(g.index_of(0.010001), None);
        assert!(TimeGrid::new(1.0, 0).is_err());
    }
}
