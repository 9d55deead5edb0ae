//! Domain types: networks, nominations, design assignments and the cost and
//! physics calculators built on them.

mod assignment;
mod config;
mod network;
pub mod physics;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use assignment::{assignment_cost, cheapest_cost, effective_pipe, DesignAssignment};
pub use config::{FormulationConfig, PhysicsConstants};
pub(crate) use network::inf_as_null;
pub use network::{ActiveLimits, Arc, ArcClass, ArcKind, Network, Node, PipeCandidate};
pub use physics::{loss_coefficient, max_flow, pipe_cost};

use crate::error::{Error, Result};

/// Node-indexed supply/demand vector. Sinks are positive, sources negative.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Nomination {
    #[serde(default)]
    pub name: String,
    pub demands: BTreeMap<String, f64>,
}

impl Nomination {
    pub fn from_network(net: &Network) -> Self {
        Nomination {
            name: net.name().to_string(),
            demands: net.nodes().iter().map(|n| (n.id.clone(), n.demand)).collect(),
        }
    }

    pub fn total(&self) -> f64 {
        self.demands.values().sum()
    }

    /// Accepts the nomination when `|sum d| <= 1e-9 * max |d|`.
    pub fn check_balanced(&self) -> Result<()> {
        let max = self.demands.values().map(|d| d.abs()).fold(0.0, f64::max);
        let total = self.total();
        if total.abs() > 1e-9 * max.max(f64::MIN_POSITIVE) && total != 0.0 {
            return Err(Error::invariant(format!("nomination {} is unbalanced: sum of demands {total}", self.name)));
        }
        Ok(())
    }

    /// Demands aligned to the network's node order; missing nodes get zero.
    pub fn aligned(&self, net: &Network) -> Result<Vec<f64>> {
        for id in self.demands.keys() {
            if net.node_idx(id).is_none() {
                return Err(Error::UnknownId(id.clone()));
            }
        }
        Ok(net.nodes().iter().map(|n| self.demands.get(&n.id).copied().unwrap_or(0.0)).collect())
    }
}

/// A solvable design instance: network with expanded candidates and the
/// nomination applied to its node demands.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub network: Network,
    pub nomination: Nomination,
    pub stress: f64,
    pub diameter_multipliers: Vec<f64>,
    pub seed: Option<u64>,
    /// A design known to validate, recorded by the synthetic generator.
    pub witness: Option<DesignAssignment>,
}

impl Instance {
    /// Applies `nomination` to `network` and checks the result is design-ready.
    pub fn new(name: impl Into<String>, network: Network, nomination: Nomination) -> Result<Self> {
        nomination.check_balanced()?;
        network.require_candidates()?;
        let d = nomination.aligned(&network)?;
        let network = network.with_demands(&d);
        Ok(Instance {
            name: name.into(),
            network,
            nomination,
            stress: 1.0,
            diameter_multipliers: Vec::new(),
            seed: None,
            witness: None,
        })
    }

    pub fn net(&self) -> &Network {
        &self.network
    }

    /// Number of binary design variables: one per pipe candidate plus one
    /// per active arc.
    pub fn binary_count(&self) -> usize {
        let n = &self.network;
        n.pipes().iter().map(|&p| n.arc(p).candidates().len()).sum::<usize>() + n.active_arcs().len()
    }
}
