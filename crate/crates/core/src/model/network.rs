use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::physics;
use crate::error::{Error, Result};

/// A network node with its potential box and nominated demand
/// (positive = sink, negative = source).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    #[serde(default)]
    pub demand: f64,
    #[serde(default)]
    pub pi_min: f64,
    #[serde(with = "inf_as_null", default = "infinity")]
    pub pi_max: f64,
}

impl Node {
    pub fn new(id: impl Into<String>, demand: f64, pi_min: f64, pi_max: f64) -> Self {
        Node { id: id.into(), demand, pi_min, pi_max }
    }

    pub fn pressure_min(&self) -> f64 {
        physics::pressure_of(self.pi_min)
    }

    pub fn pressure_max(&self) -> f64 {
        physics::pressure_of(self.pi_max)
    }
}

fn infinity() -> f64 {
    f64::INFINITY
}

/// One discrete diameter option of a pipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeCandidate {
    pub diameter: f64,
    pub alpha: f64,
    pub q_max: f64,
    pub cost: f64,
}

/// Ratio limits and on-state bounds shared by compressors and control valves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveLimits {
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub q_max: f64,
    /// Extra lower bound on the tail potential while on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_min_on: Option<f64>,
    /// Extra upper bound on the head potential while on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_max_on: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ArcKind {
    Pipe {
        length: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diameter: Option<f64>,
        #[serde(default)]
        candidates: Vec<PipeCandidate>,
    },
    ShortPipe {
        q_max: f64,
    },
    Resistor {
        alpha: f64,
        q_max: f64,
    },
    Compressor(ActiveLimits),
    Valve {
        q_max: f64,
    },
    ControlValve(ActiveLimits),
}

/// Arc category used for the network partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArcClass {
    Pipe,
    ShortPipe,
    Resistor,
    Compressor,
    Valve,
    ControlValve,
}

impl ArcKind {
    pub fn class(&self) -> ArcClass {
        match self {
            ArcKind::Pipe { .. } => ArcClass::Pipe,
            ArcKind::ShortPipe { .. } => ArcClass::ShortPipe,
            ArcKind::Resistor { .. } => ArcClass::Resistor,
            ArcKind::Compressor(_) => ArcClass::Compressor,
            ArcKind::Valve { .. } => ArcClass::Valve,
            ArcKind::ControlValve(_) => ArcClass::ControlValve,
        }
    }

    /// Compressors, valves and control valves carry an on/off state.
    pub fn is_active(&self) -> bool {
        matches!(self, ArcKind::Compressor(_) | ArcKind::Valve { .. } | ArcKind::ControlValve(_))
    }

    /// True for arcs that only admit flow from tail to head.
    pub fn is_one_way(&self) -> bool {
        matches!(self, ArcKind::Compressor(_) | ArcKind::ControlValve(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub id: String,
    pub from: String,
    pub to: String,
    #[serde(flatten)]
    pub kind: ArcKind,
}

impl Arc {
    pub fn new(id: impl Into<String>, from: impl Into<String>, to: impl Into<String>, kind: ArcKind) -> Self {
        Arc { id: id.into(), from: from.into(), to: to.into(), kind }
    }

    pub fn candidates(&self) -> &[PipeCandidate] {
        match &self.kind {
            ArcKind::Pipe { candidates, .. } => candidates,
            _ => &[],
        }
    }

    pub fn length(&self) -> Option<f64> {
        match &self.kind {
            ArcKind::Pipe { length, .. } => Some(*length),
            _ => None,
        }
    }

    pub fn active_limits(&self) -> Option<&ActiveLimits> {
        match &self.kind {
            ArcKind::Compressor(l) | ArcKind::ControlValve(l) => Some(l),
            _ => None,
        }
    }

    /// Flow cap of a non-pipe arc.
    pub fn fixed_q_max(&self) -> Option<f64> {
        match &self.kind {
            ArcKind::Pipe { .. } => None,
            ArcKind::ShortPipe { q_max } | ArcKind::Resistor { q_max, .. } | ArcKind::Valve { q_max } => {
                Some(*q_max)
            }
            ArcKind::Compressor(l) | ArcKind::ControlValve(l) => Some(l.q_max),
        }
    }
}

/// Directed gas network with typed arcs. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Network {
    name: String,
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    node_index: HashMap<String, usize>,
    arc_index: HashMap<String, usize>,
    endpoints: Vec<(usize, usize)>,
    arcs_in: Vec<Vec<usize>>,
    arcs_out: Vec<Vec<usize>>,
    partition: [Vec<usize>; 6],
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.nodes == other.nodes && self.arcs == other.arcs
    }
}

fn class_slot(c: ArcClass) -> usize {
    match c {
        ArcClass::Pipe => 0,
        ArcClass::ShortPipe => 1,
        ArcClass::Resistor => 2,
        ArcClass::Compressor => 3,
        ArcClass::Valve => 4,
        ArcClass::ControlValve => 5,
    }
}

impl Network {
    /// Builds and validates a network.
    pub fn new(name: impl Into<String>, nodes: Vec<Node>, arcs: Vec<Arc>) -> Result<Self> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            validate_node(n)?;
            if node_index.insert(n.id.clone(), i).is_some() {
                return Err(Error::invariant(format!("duplicate node id {}", n.id)));
            }
        }
        let mut arc_index = HashMap::with_capacity(arcs.len());
        let mut endpoints = Vec::with_capacity(arcs.len());
        let mut arcs_in = vec![Vec::new(); nodes.len()];
        let mut arcs_out = vec![Vec::new(); nodes.len()];
        let mut partition: [Vec<usize>; 6] = Default::default();
        for (k, a) in arcs.iter().enumerate() {
            if arc_index.insert(a.id.clone(), k).is_some() {
                return Err(Error::invariant(format!("duplicate arc id {}", a.id)));
            }
            let t = *node_index
                .get(&a.from)
                .ok_or_else(|| Error::invariant(format!("arc {} references unknown node {}", a.id, a.from)))?;
            let h = *node_index
                .get(&a.to)
                .ok_or_else(|| Error::invariant(format!("arc {} references unknown node {}", a.id, a.to)))?;
            if t == h {
                return Err(Error::invariant(format!("arc {} is a self-loop", a.id)));
            }
            validate_arc(a)?;
            endpoints.push((t, h));
            arcs_out[t].push(k);
            arcs_in[h].push(k);
            partition[class_slot(a.kind.class())].push(k);
        }
        Ok(Network { name: name.into(), nodes, arcs, node_index, arc_index, endpoints, arcs_in, arcs_out, partition })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }
    pub fn node(&self, v: usize) -> &Node {
        &self.nodes[v]
    }
    pub fn arc(&self, a: usize) -> &Arc {
        &self.arcs[a]
    }
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }
    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }
    pub fn arc_idx(&self, id: &str) -> Option<usize> {
        self.arc_index.get(id).copied()
    }
    /// (tail, head) node indices of arc `a`.
    pub fn endpoints(&self, a: usize) -> (usize, usize) {
        self.endpoints[a]
    }
    pub fn arcs_in(&self, v: usize) -> &[usize] {
        &self.arcs_in[v]
    }
    pub fn arcs_out(&self, v: usize) -> &[usize] {
        &self.arcs_out[v]
    }

    /// Arcs of one class, in network order.
    pub fn arcs_of(&self, class: ArcClass) -> &[usize] {
        &self.partition[class_slot(class)]
    }
    pub fn pipes(&self) -> &[usize] {
        self.arcs_of(ArcClass::Pipe)
    }
    pub fn short_pipes(&self) -> &[usize] {
        self.arcs_of(ArcClass::ShortPipe)
    }
    pub fn resistors(&self) -> &[usize] {
        self.arcs_of(ArcClass::Resistor)
    }
    pub fn compressors(&self) -> &[usize] {
        self.arcs_of(ArcClass::Compressor)
    }
    pub fn valves(&self) -> &[usize] {
        self.arcs_of(ArcClass::Valve)
    }
    pub fn control_valves(&self) -> &[usize] {
        self.arcs_of(ArcClass::ControlValve)
    }

    /// Active arcs (compressors, valves, control valves) in network order.
    pub fn active_arcs(&self) -> Vec<usize> {
        (0..self.arcs.len()).filter(|&a| self.arcs[a].kind.is_active()).collect()
    }

    pub fn demands(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.demand).collect()
    }

    /// Largest finite upper potential bound, or the largest lower bound when
    /// every node is unbounded above.
    pub fn potential_scale(&self) -> f64 {
        let finite = self.nodes.iter().map(|n| n.pi_max).filter(|p| p.is_finite()).fold(0.0, f64::max);
        let lower = self.nodes.iter().map(|n| n.pi_min).fold(0.0, f64::max);
        finite.max(lower).max(1.0)
    }

    /// Largest absolute demand, at least one.
    pub fn flow_scale(&self) -> f64 {
        self.nodes.iter().map(|n| n.demand.abs()).fold(0.0, f64::max).max(1.0)
    }

    /// Returns a copy with node demands replaced.
    pub fn with_demands(&self, demands: &[f64]) -> Network {
        let mut net = self.clone();
        for (n, &d) in net.nodes.iter_mut().zip(demands) {
            n.demand = d;
        }
        net
    }

    /// Returns a copy with arc `a`'s kind replaced. The class must not change.
    pub fn with_arc_kind(&self, a: usize, kind: ArcKind) -> Result<Network> {
        if kind.class() != self.arcs[a].kind.class() {
            return Err(Error::invalid("arc class cannot change"));
        }
        validate_arc(&Arc { kind: kind.clone(), ..self.arcs[a].clone() })?;
        let mut net = self.clone();
        net.arcs[a].kind = kind;
        Ok(net)
    }

    /// Fails unless every pipe carries at least one diameter candidate.
    pub fn require_candidates(&self) -> Result<()> {
        for &a in self.pipes() {
            if self.arcs[a].candidates().is_empty() {
                return Err(Error::invariant(format!("pipe {} has no diameter candidates", self.arcs[a].id)));
            }
        }
        Ok(())
    }
}

fn validate_node(n: &Node) -> Result<()> {
    if !n.demand.is_finite() {
        return Err(Error::invariant(format!("node {}: demand must be finite", n.id)));
    }
    if !(n.pi_min >= 0.0) || !n.pi_min.is_finite() {
        return Err(Error::invariant(format!("node {}: pi_min must be a finite value >= 0", n.id)));
    }
    if !(n.pi_min <= n.pi_max) {
        return Err(Error::invariant(format!("node {}: pi_min > pi_max", n.id)));
    }
    Ok(())
}

fn positive(v: f64, what: &str, id: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invariant(format!("arc {id}: {what} must be positive and finite, got {v}")))
    }
}

fn validate_arc(a: &Arc) -> Result<()> {
    let id = a.id.as_str();
    match &a.kind {
        ArcKind::Pipe { length, diameter, candidates } => {
            positive(*length, "length", id)?;
            if let Some(d) = diameter {
                positive(*d, "diameter", id)?;
            }
            if candidates.is_empty() && diameter.is_none() {
                return Err(Error::invariant(format!("pipe {id}: needs candidates or a base diameter")));
            }
            for c in candidates {
                positive(c.diameter, "candidate diameter", id)?;
                positive(c.alpha, "candidate alpha", id)?;
                positive(c.q_max, "candidate q_max", id)?;
                positive(c.cost, "candidate cost", id)?;
            }
            for w in candidates.windows(2) {
                let (s, l) = (&w[0], &w[1]);
                if !(l.diameter > s.diameter && l.alpha < s.alpha && l.q_max > s.q_max && l.cost > s.cost) {
                    return Err(Error::invariant(format!(
                        "pipe {id}: candidates must be sorted by diameter with decreasing alpha and increasing q_max and cost"
                    )));
                }
            }
        }
        ArcKind::ShortPipe { q_max } | ArcKind::Valve { q_max } => positive(*q_max, "q_max", id)?,
        ArcKind::Resistor { alpha, q_max } => {
            positive(*alpha, "alpha", id)?;
            positive(*q_max, "q_max", id)?;
        }
        ArcKind::Compressor(l) => {
            if l.kappa_min != 1.0 || !(l.kappa_max >= 1.0) || !l.kappa_max.is_finite() {
                return Err(Error::invariant(format!(
                    "compressor {id}: needs kappa_min = 1 and finite kappa_max >= 1, got [{}, {}]",
                    l.kappa_min, l.kappa_max
                )));
            }
            validate_limits(l, id)?;
        }
        ArcKind::ControlValve(l) => {
            if !(l.kappa_min > 0.0) || !(l.kappa_max <= 1.0) || !(l.kappa_min <= l.kappa_max) {
                return Err(Error::invariant(format!(
                    "control valve {id}: needs 0 < kappa_min <= kappa_max <= 1, got [{}, {}]",
                    l.kappa_min, l.kappa_max
                )));
            }
            validate_limits(l, id)?;
        }
    }
    Ok(())
}

fn validate_limits(l: &ActiveLimits, id: &str) -> Result<()> {
    positive(l.q_max, "q_max", id)?;
    for v in [l.pi_min_on, l.pi_max_on].into_iter().flatten() {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::invariant(format!("arc {id}: on-state bounds must be finite and >= 0")));
        }
    }
    Ok(())
}

/// Serializes infinite values as `null`.
pub(crate) mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(d: f64, a: f64, q: f64, c: f64) -> PipeCandidate {
        PipeCandidate { diameter: d, alpha: a, q_max: q, cost: c }
    }

    fn two_node() -> (Vec<Node>, Vec<Arc>) {
        let nodes = vec![Node::new("a", -5.0, 0.0, 100.0), Node::new("b", 5.0, 0.0, 100.0)];
        let arcs = vec![Arc::new(
            "p",
            "a",
            "b",
            ArcKind::Pipe { length: 1.0, diameter: None, candidates: vec![cand(1.0, 2.0, 10.0, 1.0)] },
        )];
        (nodes, arcs)
    }

    #[test]
    fn partition_covers_all_arcs() {
        let (mut nodes, mut arcs) = two_node();
        nodes.push(Node::new("c", 0.0, 0.0, f64::INFINITY));
        arcs.push(Arc::new("s", "b", "c", ArcKind::ShortPipe { q_max: 3.0 }));
        arcs.push(Arc::new(
            "k",
            "c",
            "a",
            ArcKind::Compressor(ActiveLimits { kappa_min: 1.0, kappa_max: 2.0, q_max: 4.0, pi_min_on: None, pi_max_on: None }),
        ));
        let net = Network::new("t", nodes, arcs).unwrap();
        let mut all: Vec<usize> = [
            net.pipes(),
            net.short_pipes(),
            net.resistors(),
            net.compressors(),
            net.valves(),
            net.control_valves(),
        ]
        .concat();
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
        assert_eq!(net.arcs_in(0), &[2]);
        assert_eq!(net.arcs_out(0), &[0]);
    }

    #[test]
    fn rejects_bad_compressor_ratio() {
        let (nodes, mut arcs) = two_node();
        arcs.push(Arc::new(
            "k",
            "b",
            "a",
            ArcKind::Compressor(ActiveLimits { kappa_min: 1.0, kappa_max: 0.9, q_max: 4.0, pi_min_on: None, pi_max_on: None }),
        ));
        assert!(Network::new("t", nodes, arcs).is_err());
    }

    #[test]
    fn rejects_unordered_candidates() {
        let (nodes, mut arcs) = two_node();
        arcs[0].kind = ArcKind::Pipe {
            length: 1.0,
            diameter: None,
            candidates: vec![cand(1.0, 2.0, 10.0, 1.0), cand(2.0, 3.0, 20.0, 2.0)],
        };
        assert!(Network::new("t", nodes, arcs).is_err());
    }

    #[test]
    fn rejects_dangling_endpoint_and_bad_bounds() {
        let (nodes, mut arcs) = two_node();
        arcs[0].to = "zz".into();
        assert!(Network::new("t", nodes, arcs).is_err());
        let (mut nodes, arcs) = two_node();
        nodes[0].pi_min = 200.0;
        assert!(Network::new("t", nodes, arcs).is_err());
    }
}
