//! Nomination validation for a fixed design.
//!
//! With diameters fixed, the remaining decisions are flow directions and, in
//! initial mode, the states of valves and control valves. States are
//! enumerated depth-first (valves before control valves). Directions are not
//! branched on: in each potential-connected component the passive flows
//! solving the network analysis equations are unique, so they are read off
//! the convex flow solution instead.
//!
//! A leaf (all states fixed) is checked by
//! 1. grouping nodes joined by pipes, short pipes, resistors and open valves
//!    into potential-connected components,
//! 2. fixing flows on active links (compressors and control valves that are
//!    on) from the balance of the component forest,
//! 3. solving the convex flow program per component for potentials up to a
//!    shift, and
//! 4. deciding the per-component shifts against node bounds, ratio limits and
//!    on-state bounds by Fourier-Motzkin elimination.
//!
//! When active links close a cycle between components, link flows are free
//! parameters that are searched but not exhausted; such leaves are reported
//! as unresolved rather than refuted.

mod leaf;
mod offsets;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{effective_pipe, ArcKind, DesignAssignment, Network};

pub use leaf::Directions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    /// Every active state is fixed by the assignment.
    Primal,
    /// Compressor states are fixed; valve and control-valve states are searched.
    Initial,
}

#[derive(Debug, Clone)]
pub struct ValidationProblem {
    network: Network,
    assignment: DesignAssignment,
    mode: ValidationMode,
    /// `(alpha, q_max)` per arc for arcs with a loss law or cap.
    coefficients: Vec<(f64, f64)>,
    eps_feas: f64,
}

impl ValidationProblem {
    pub fn new(network: &Network, assignment: &DesignAssignment, mode: ValidationMode) -> Result<Self> {
        Self::with_tolerance(network, assignment, mode, 1e-6)
    }

    pub fn with_tolerance(
        network: &Network,
        assignment: &DesignAssignment,
        mode: ValidationMode,
        eps_feas: f64,
    ) -> Result<Self> {
        if !(eps_feas > 0.0) {
            return Err(Error::invalid("eps_feas must be positive"));
        }
        assignment.check(network, false)?;
        let mut coefficients = Vec::with_capacity(network.arc_count());
        for (a, arc) in network.arcs().iter().enumerate() {
            let c = match &arc.kind {
                ArcKind::Pipe { .. } => effective_pipe(assignment, network, a)?,
                ArcKind::ShortPipe { q_max } | ArcKind::Valve { q_max } => (0.0, *q_max),
                ArcKind::Resistor { alpha, q_max } => (*alpha, *q_max),
                ArcKind::Compressor(l) | ArcKind::ControlValve(l) => (0.0, l.q_max),
            };
            coefficients.push(c);
        }
        let mut fixed = assignment.clone();
        for k in network.active_arcs() {
            let arc = network.arc(k);
            let needs = match mode {
                ValidationMode::Primal => true,
                ValidationMode::Initial => matches!(arc.kind, ArcKind::Compressor(_)),
            };
            if needs && assignment.state(&arc.id).is_none() {
                return Err(Error::invalid(format!("active arc {} has no state", arc.id)));
            }
            if !needs {
                fixed.states.remove(&arc.id);
            }
        }
        Ok(ValidationProblem { network: network.clone(), assignment: fixed, mode, coefficients, eps_feas })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn assignment(&self) -> &DesignAssignment {
        &self.assignment
    }

    pub fn mode(&self) -> ValidationMode {
        self.mode
    }

    pub fn eps_feas(&self) -> f64 {
        self.eps_feas
    }

    /// Arcs whose state is searched, valves first.
    pub fn free_arcs(&self) -> Vec<usize> {
        match self.mode {
            ValidationMode::Primal => Vec::new(),
            ValidationMode::Initial => {
                let mut v = self.network.valves().to_vec();
                v.extend_from_slice(self.network.control_valves());
                v
            }
        }
    }

    /// Per-arc on/off vector for a leaf; passive arcs are always on.
    fn leaf_states(&self, free: &[usize], pick: &[bool]) -> Vec<bool> {
        let net = &self.network;
        let mut s: Vec<bool> = net.arcs().iter().map(|a| self.assignment.state(&a.id).unwrap_or(true)).collect();
        for (k, &a) in free.iter().enumerate() {
            s[a] = pick[k];
        }
        s
    }
}

/// Flows, potentials and the full state vector of a validated design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSolution {
    pub assignment: DesignAssignment,
    /// Signed arc flows; positive means tail to head.
    pub flows: Vec<f64>,
    pub pi: Vec<f64>,
}

impl FlowSolution {
    pub fn q_plus(&self) -> Vec<f64> {
        self.flows.iter().map(|q| q.max(0.0)).collect()
    }

    pub fn q_minus(&self) -> Vec<f64> {
        self.flows.iter().map(|q| (-q).max(0.0)).collect()
    }

    pub fn pressures(&self) -> Vec<f64> {
        self.pi.iter().map(|p| crate::model::physics::pressure_of(p.max(0.0))).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationOutcome {
    Feasible(FlowSolution),
    /// Every leaf was refuted. `worst_residual` is the largest scaled
    /// violation found among the refutations; `residuals` spreads the
    /// refutations over the blocks whose rows they violate.
    Infeasible { leaves_refuted: usize, worst_residual: f64, residuals: BlockResiduals },
    TimedOut { leaves_checked: usize },
    /// No leaf validated but some leaves could not be decided.
    Inconclusive { leaves_refuted: usize, leaves_unresolved: usize },
}

impl ValidationOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, ValidationOutcome::Feasible(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            ValidationOutcome::Feasible(_) => "Feasible",
            ValidationOutcome::Infeasible { .. } => "Infeasible",
            ValidationOutcome::TimedOut { .. } => "TimedOut",
            ValidationOutcome::Inconclusive { .. } => "Inconclusive",
        }
    }
}

/// Decides feasibility of the nomination for the fixed design.
pub fn validate(problem: &ValidationProblem, time_limit: Duration) -> ValidationOutcome {
    let deadline = Instant::now() + time_limit;
    let free = problem.free_arcs();
    let mut pick = vec![true; free.len()];
    let mut refuted = 0usize;
    let mut unresolved = 0usize;
    let mut worst = 0.0f64;
    let mut blocks = BlockResiduals::default();
    let total: u128 = 1u128 << free.len().min(100);
    let mut counter: u128 = 0;
    while counter < total {
        if Instant::now() >= deadline {
            return ValidationOutcome::TimedOut { leaves_checked: refuted + unresolved };
        }
        // Enumeration order: on before off, first free arc varies slowest.
        for (k, p) in pick.iter_mut().enumerate() {
            *p = (counter >> (free.len() - 1 - k)) & 1 == 0;
        }
        let states = problem.leaf_states(&free, &pick);
        match leaf::check(problem, &states, None, deadline) {
            leaf::LeafResult::Feasible(sol) => return ValidationOutcome::Feasible(sol),
            leaf::LeafResult::Refuted(block, r) => {
                refuted += 1;
                worst = worst.max(r);
                blocks.raise(block, r);
            }
            leaf::LeafResult::Unresolved => unresolved += 1,
            leaf::LeafResult::TimedOut => return ValidationOutcome::TimedOut { leaves_checked: refuted + unresolved },
        }
        counter += 1;
    }
    if unresolved > 0 {
        ValidationOutcome::Inconclusive { leaves_refuted: refuted, leaves_unresolved: unresolved }
    } else {
        ValidationOutcome::Infeasible { leaves_refuted: refuted, worst_residual: worst, residuals: blocks }
    }
}

/// Checks one leaf with explicit states and optional fixed directions
/// (`Some(true)` forces tail-to-head flow on a passive arc or open valve).
pub fn check_fixed(problem: &ValidationProblem, states: &[bool], directions: Option<&Directions>) -> Option<FlowSolution> {
    match leaf::check(problem, states, directions, Instant::now() + Duration::from_secs(3600)) {
        leaf::LeafResult::Feasible(s) => Some(s),
        _ => None,
    }
}

/// Blocks a leaf refutation can be charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Block {
    FlowConserv,
    Bound,
    Pipe,
    CompAndContValve,
}

/// Largest scaled violation per constraint block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockResiduals {
    pub flow_conserv: f64,
    pub bound: f64,
    pub pipe: f64,
    pub short_pipe: f64,
    pub resistor: f64,
    pub comp_and_cont_valve: f64,
    pub valve: f64,
}

impl BlockResiduals {
    pub const NAMES: [&'static str; 7] =
        ["Flow_conserv", "Bound", "Pipe", "Short_pipe", "Resistor", "Comp_and_cont_valve", "Valve"];

    pub fn entries(&self) -> [(&'static str, f64); 7] {
        let v = [
            self.flow_conserv,
            self.bound,
            self.pipe,
            self.short_pipe,
            self.resistor,
            self.comp_and_cont_valve,
            self.valve,
        ];
        std::array::from_fn(|i| (Self::NAMES[i], v[i]))
    }

    pub(crate) fn raise(&mut self, block: Block, v: f64) {
        let slot = match block {
            Block::FlowConserv => &mut self.flow_conserv,
            Block::Bound => &mut self.bound,
            Block::Pipe => &mut self.pipe,
            Block::CompAndContValve => &mut self.comp_and_cont_valve,
        };
        *slot = slot.max(v);
    }

    pub fn max(&self) -> f64 {
        self.entries().iter().map(|e| e.1).fold(0.0, f64::max)
    }
}

/// Evaluates every constraint block at `solution`. Potentials are scaled by
/// the network's potential scale and flows by its flow scale.
pub fn residual_report(solution: &FlowSolution, network: &Network) -> Result<BlockResiduals> {
    let net = network;
    if solution.flows.len() != net.arc_count() || solution.pi.len() != net.node_count() {
        return Err(Error::invalid("solution does not cover the network"));
    }
    let ps = net.potential_scale();
    let fs = net.flow_scale();
    let pi = &solution.pi;
    let q = &solution.flows;
    let pos = |x: f64| x.max(0.0);
    let mut r = BlockResiduals::default();

    let mut net_in = vec![0.0; net.node_count()];
    for a in 0..net.arc_count() {
        let (v, w) = net.endpoints(a);
        net_in[w] += q[a];
        net_in[v] -= q[a];
    }
    for (v, node) in net.nodes().iter().enumerate() {
        r.flow_conserv = r.flow_conserv.max((net_in[v] - node.demand).abs() / fs);
        r.bound = r.bound.max(pos(node.pi_min - pi[v]) / ps).max(pos(pi[v] - node.pi_max) / ps);
    }
    for (a, arc) in net.arcs().iter().enumerate() {
        let (v, w) = net.endpoints(a);
        let drop = pi[v] - pi[w];
        let state = solution.assignment.state(&arc.id);
        match &arc.kind {
            ArcKind::Pipe { .. } => {
                let (alpha, cap) = effective_pipe(&solution.assignment, net, a)?;
                let loss = (drop - alpha * q[a] * q[a].abs()).abs() / ps;
                r.pipe = r.pipe.max(loss).max(pos(q[a].abs() - cap) / fs);
            }
            ArcKind::ShortPipe { q_max } => {
                r.short_pipe = r.short_pipe.max(drop.abs() / ps).max(pos(q[a].abs() - q_max) / fs);
            }
            ArcKind::Resistor { alpha, q_max } => {
                let loss = (drop - alpha * q[a] * q[a].abs()).abs() / ps;
                r.resistor = r.resistor.max(loss).max(pos(q[a].abs() - q_max) / fs);
            }
            ArcKind::Valve { q_max } => {
                let on = state.ok_or_else(|| Error::invalid(format!("valve {} has no state", arc.id)))?;
                let v = if on { (drop.abs() / ps).max(pos(q[a].abs() - q_max) / fs) } else { q[a].abs() / fs };
                r.valve = r.valve.max(v);
            }
            ArcKind::Compressor(l) | ArcKind::ControlValve(l) => {
                let on = state.ok_or_else(|| Error::invalid(format!("active arc {} has no state", arc.id)))?;
                let v = if on {
                    let mut m = pos(l.kappa_min * pi[v] - pi[w]) / ps;
                    m = m.max(pos(pi[w] - l.kappa_max * pi[v]) / ps);
                    if let Some(lo) = l.pi_min_on {
                        m = m.max(pos(lo - pi[v]) / ps);
                    }
                    if let Some(hi) = l.pi_max_on {
                        m = m.max(pos(pi[w] - hi) / ps);
                    }
                    m.max(pos(-q[a]) / fs).max(pos(q[a] - l.q_max) / fs)
                } else {
                    q[a].abs() / fs
                };
                r.comp_and_cont_valve = r.comp_and_cont_valve.max(v);
            }
        }
    }
    Ok(r)
}
