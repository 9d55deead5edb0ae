use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::network::{ArcKind, Network};
use crate::error::{Error, Result};

/// Discrete design decisions: one diameter index per pipe and an on/off
/// state per active arc.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DesignAssignment {
    pub diameters: BTreeMap<String, usize>,
    #[serde(default)]
    pub states: BTreeMap<String, bool>,
}

impl DesignAssignment {
    /// Picks candidate 0 (the smallest diameter) for every pipe and turns
    /// every active arc on.
    pub fn cheapest_all_on(net: &Network) -> Self {
        Self::uniform(net, |_| 0, true)
    }

    /// Picks the largest diameter for every pipe and turns every active arc on.
    pub fn largest_all_on(net: &Network) -> Self {
        Self::uniform(net, |n| n.saturating_sub(1), true)
    }

    fn uniform(net: &Network, pick: impl Fn(usize) -> usize, on: bool) -> Self {
        let mut a = DesignAssignment::default();
        for &p in net.pipes() {
            let arc = net.arc(p);
            a.diameters.insert(arc.id.clone(), pick(arc.candidates().len()));
        }
        for k in net.active_arcs() {
            a.states.insert(net.arc(k).id.clone(), on);
        }
        a
    }

    pub fn diameter(&self, pipe_id: &str) -> Option<usize> {
        self.diameters.get(pipe_id).copied()
    }

    pub fn state(&self, arc_id: &str) -> Option<bool> {
        self.states.get(arc_id).copied()
    }

    /// Checks that every pipe has an in-range choice and that states only
    /// name active arcs. With `require_states`, every active arc needs a state.
    pub fn check(&self, net: &Network, require_states: bool) -> Result<()> {
        for &p in net.pipes() {
            let arc = net.arc(p);
            let i = self.diameter(&arc.id).ok_or_else(|| Error::Unassigned(arc.id.clone()))?;
            if i >= arc.candidates().len() {
                return Err(Error::invalid(format!(
                    "pipe {}: choice {i} out of range ({} candidates)",
                    arc.id,
                    arc.candidates().len()
                )));
            }
        }
        for id in self.diameters.keys() {
            match net.arc_idx(id) {
                Some(a) if matches!(net.arc(a).kind, ArcKind::Pipe { .. }) => {}
                _ => return Err(Error::UnknownId(id.clone())),
            }
        }
        for id in self.states.keys() {
            match net.arc_idx(id) {
                Some(a) if net.arc(a).kind.is_active() => {}
                _ => return Err(Error::UnknownId(id.clone())),
            }
        }
        if require_states {
            for k in net.active_arcs() {
                if self.state(&net.arc(k).id).is_none() {
                    return Err(Error::invalid(format!("active arc {} has no state", net.arc(k).id)));
                }
            }
        }
        Ok(())
    }
}

/// Selected candidate's `(alpha, q_max)` for pipe arc `pipe`.
pub fn effective_pipe(assignment: &DesignAssignment, net: &Network, pipe: usize) -> Result<(f64, f64)> {
    let arc = net.arc(pipe);
    let cands = arc.candidates();
    if cands.is_empty() {
        return Err(Error::invalid(format!("arc {} is not a pipe with candidates", arc.id)));
    }
    let i = assignment.diameter(&arc.id).ok_or_else(|| Error::Unassigned(arc.id.clone()))?;
    let c = cands.get(i).ok_or_else(|| Error::invalid(format!("pipe {}: choice {i} out of range", arc.id)))?;
    Ok((c.alpha, c.q_max))
}

/// Total construction cost of the selected diameters.
pub fn assignment_cost(assignment: &DesignAssignment, net: &Network) -> Result<f64> {
    let mut total = 0.0;
    for &p in net.pipes() {
        let arc = net.arc(p);
        let i = assignment.diameter(&arc.id).ok_or_else(|| Error::Unassigned(arc.id.clone()))?;
        let c = arc
            .candidates()
            .get(i)
            .ok_or_else(|| Error::invalid(format!("pipe {}: choice {i} out of range", arc.id)))?;
        total += c.cost;
    }
    Ok(total)
}

/// Sum of the cheapest candidate cost over all pipes.
pub fn cheapest_cost(net: &Network) -> f64 {
    net.pipes()
        .iter()
        .map(|&p| net.arc(p).candidates().iter().map(|c| c.cost).fold(f64::INFINITY, f64::min))
        .filter(|c| c.is_finite())
        .sum()
}
