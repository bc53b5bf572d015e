use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::control::{CoefficientTable, LedgerForm};
use crate::error::{Error, Result};
use crate::filter::{solve_riccati, RiccatiSolution};
use crate::model::{CoefFn, ModelSpec, TimeGrid};

/// Who is trading and what they know.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AgentKind {
    /// Optimal control on the filtered toxicity and inventory.
    PartialInfo,
    /// Same gains applied to the true toxicity and inventory.
    FullInfo,
    /// Optimal control for a misspecified feedback coefficient: gains and
    /// filter assume `b = b_believed` while the world uses the true `b`.
    Naive { b_believed: f64 },
    /// Never trades.
    NoTrade,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentKind::PartialInfo => f.write_str("partial"),
            AgentKind::FullInfo => f.write_str("full"),
            AgentKind::Naive { b_believed } => write!(f, "naive:{b_believed}"),
            AgentKind::NoTrade => f.write_str("notrade"),
        }
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "partial" => Ok(AgentKind::PartialInfo),
            "full" => Ok(AgentKind::FullInfo),
            "notrade" | "no_trade" => Ok(AgentKind::NoTrade),
            "naive" => Ok(AgentKind::Naive { b_believed: 0.0 }),
            other => other
                .strip_prefix("naive:")
                .and_then(|b| b.parse::<f64>().ok())
                .filter(|b| b.is_finite())
                .map(|b_believed| AgentKind::Naive { b_believed })
                .ok_or_else(|| Error::invalid(format!("unknown agent '{other}' (expected partial, full, naive[:b] or notrade)"))),
        }
    }
}

impl Serialize for AgentKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// An agent together with the model it believes in and the precomputed
/// coefficients it trades with.
#[derive(Clone, Debug)]
pub struct Agent {
    pub kind: AgentKind,
    /// The model used for the agent's gains and filter.
    pub believed: ModelSpec,
    /// `None` only for [`AgentKind::NoTrade`].
    pub table: Option<Arc<CoefficientTable>>,
    pub ric: Arc<RiccatiSolution>,
}

impl Agent {
    pub fn new(world: &ModelSpec, kind: AgentKind, grid: &TimeGrid, form: LedgerForm) -> Result<Self> {
        Ok(build_agents(world, &[kind], grid, form)?.remove(0))
    }

    pub fn with_parts(
        kind: AgentKind,
        believed: ModelSpec,
        table: Option<Arc<CoefficientTable>>,
        ric: Arc<RiccatiSolution>,
    ) -> Self {
        Agent { kind, believed, table, ric }
    }

    pub(crate) fn table(&self) -> &CoefficientTable {
        self.table.as_deref().expect("trading agent without coefficient table")
    }
}

/// Build several agents for one world, sharing coefficient tables between
/// agents that believe the same model.
pub fn build_agents(world: &ModelSpec, kinds: &[AgentKind], grid: &TimeGrid, form: LedgerForm) -> Result<Vec<Agent>> {
    world.validate()?;
    let ric = Arc::new(solve_riccati(world, grid)?);
    let mut cache: Vec<(ModelSpec, Arc<CoefficientTable>)> = Vec::new();
    let mut get_table = |spec: &ModelSpec| -> Result<Arc<CoefficientTable>> {
        if let Some((_, t)) = cache.iter().find(|(s, _)| s == spec) {
            return Ok(t.clone());
        }
        let t = Arc::new(CoefficientTable::build(spec, grid, form)?);
        cache.push((spec.clone(), t.clone()));
        Ok(t)
    };
    kinds
        .iter()
        .map(|&kind| {
            let believed = match kind {
                AgentKind::Naive { b_believed } => world.with_b(CoefFn::Constant(b_believed)),
                _ => world.clone(),
            };
            let table = match kind {
                AgentKind::NoTrade => None,
                _ => Some(get_table(&believed)?),
            };
            // The filter covariance does not depend on b, so the world's serves all.
            Ok(Agent { kind, believed, table, ric: ric.clone() })
        })
        .collect()
}
