//! Mixed-integer conic relaxation of the design problem.
//!
//! Each pipe gets direction binaries `x+`, `x-` with `x+ + x- = 1` and, per
//! diameter choice `i`, copies `pi_{v,i}`, `pi_{w,i}` of its end potentials
//! living in `[pi_min z_i, pi_max z_i]` and summing to the originals. The
//! signed loss `gamma_i = (x+ - x-)(pi_{v,i} - pi_{w,i})` is bounded by its
//! McCormick envelope and by the cone `gamma_i >= alpha_i q_i^2`, or its
//! perspective `z_i gamma_i >= alpha_i q_i^2`. Resistors get the same
//! envelope without choices. Every other block is kept as in the design
//! problem; big-M constants come from the potential boxes.
//!
//! `x-` is not a separate variable: it is `1 - x+` throughout.

mod build;
mod export;
#[cfg(test)]
mod tests;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use build::NodeProgram;
pub use export::export_text;

use crate::convex::{self, Settings, Status};
use crate::decomposition::{FeasibleDesign, HeuristicResult};
use crate::error::{Error, Result};
use crate::mip::bnb::branch_and_bound;
use crate::mip::{BnbSettings, BnbStatus, BranchProblem, Relaxation};
use crate::model::{assignment_cost, ArcKind, DesignAssignment, FormulationConfig, Instance, Network};
use crate::subproblem::{residual_report, validate, BlockResiduals, FlowSolution, ValidationMode, ValidationOutcome, ValidationProblem};

/// Shift of the perspective denominator, `d = (1 - eps) z + eps`. A larger
/// denominator only loosens the cone, so the shifted form is still a
/// relaxation, and it is exact at `z = 1`.
pub const PERSPECTIVE_SHIFT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MisocBinary {
    Diameter { arc: usize, choice: usize },
    /// `x+` of a pipe or resistor.
    Direction { arc: usize },
    State { arc: usize },
}

/// What a variable of a node program stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Binary(usize),
    Potential { node: usize },
    /// Flow of an arc, or of one diameter choice of a pipe.
    Flow { arc: usize, choice: Option<usize> },
    ChoicePotential { arc: usize, choice: usize, node: usize },
    Gamma { arc: usize, choice: Option<usize> },
    Denominator { arc: usize, choice: usize },
}

#[derive(Debug, Clone)]
pub struct MisocModel {
    network: Network,
    perspective: bool,
    binaries: Vec<MisocBinary>,
    /// Per arc, the binaries of its diameter choices.
    diameter_index: Vec<Vec<usize>>,
    direction_index: Vec<Option<usize>>,
    state_index: Vec<Option<usize>>,
    /// Potential box per node.
    boxes: Vec<(f64, f64)>,
}

/// Builds the relaxation of `instance`; all binaries are free.
pub fn build_misoc(instance: &Instance, config: &FormulationConfig) -> Result<MisocModel> {
    MisocModel::from_network(instance.net(), config)
}

impl MisocModel {
    pub fn from_network(net: &Network, config: &FormulationConfig) -> Result<Self> {
        config.validate()?;
        net.require_candidates()?;
        let n = net.arc_count();
        let mut binaries = Vec::new();
        let mut diameter_index = vec![Vec::new(); n];
        let mut direction_index = vec![None; n];
        let mut state_index = vec![None; n];
        for (a, arc) in net.arcs().iter().enumerate() {
            for choice in 0..arc.candidates().len() {
                diameter_index[a].push(binaries.len());
                binaries.push(MisocBinary::Diameter { arc: a, choice });
            }
        }
        for (a, arc) in net.arcs().iter().enumerate() {
            if matches!(arc.kind, ArcKind::Pipe { .. } | ArcKind::Resistor { .. }) {
                direction_index[a] = Some(binaries.len());
                binaries.push(MisocBinary::Direction { arc: a });
            }
        }
        for (a, arc) in net.arcs().iter().enumerate() {
            if arc.kind.is_active() {
                state_index[a] = Some(binaries.len());
                binaries.push(MisocBinary::State { arc: a });
            }
        }
        let boxes = net.nodes().iter().map(|v| (v.pi_min, v.pi_max)).collect();
        Ok(MisocModel {
            network: net.clone(),
            perspective: config.perspective,
            binaries,
            diameter_index,
            direction_index,
            state_index,
            boxes,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn perspective(&self) -> bool {
        self.perspective
    }

    pub fn binaries(&self) -> &[MisocBinary] {
        &self.binaries
    }

    /// Node program with binaries fixed by `fix`.
    pub fn program(&self, fix: &[Option<bool>]) -> NodeProgram {
        build::build(self, fix)
    }

    /// Root program: every binary relaxed to `[0, 1]`.
    pub fn root(&self) -> NodeProgram {
        self.program(&vec![None; self.binaries.len()])
    }

    /// One diameter per pipe.
    fn propagate_fix(&self, fix: &mut [Option<bool>]) -> bool {
        for idx in self.diameter_index.iter().filter(|v| !v.is_empty()) {
            let ones = idx.iter().filter(|&&j| fix[j] == Some(true)).count();
            let free: Vec<usize> = idx.iter().copied().filter(|&j| fix[j].is_none()).collect();
            if ones > 1 || (ones == 0 && free.is_empty()) {
                return false;
            }
            if ones == 1 {
                free.iter().for_each(|&j| fix[j] = Some(false));
            } else if free.len() == 1 {
                fix[free[0]] = Some(true);
            }
        }
        true
    }

    /// Diameters and states of integral binaries.
    pub fn decode(&self, binaries: &[f64]) -> Result<DesignAssignment> {
        let mut a = DesignAssignment::default();
        for (j, (&b, &v)) in self.binaries.iter().zip(binaries).enumerate() {
            if v.min(1.0 - v).abs() > 1e-6 {
                return Err(Error::invalid(format!("binary {j} is fractional ({v})")));
            }
            let on = v >= 0.5;
            match b {
                MisocBinary::Diameter { arc, choice } if on => {
                    a.diameters.insert(self.network.arc(arc).id.clone(), choice);
                }
                MisocBinary::State { arc } => {
                    a.states.insert(self.network.arc(arc).id.clone(), on);
                }
                _ => {}
            }
        }
        Ok(a)
    }

    /// Image of a design and its flow solution in the variables of `np`.
    /// Directions follow the flow signs, with zero flow read as forward;
    /// `gamma` follows the loss law, so potential errors of the solution
    /// show in the envelope rows, which are on the potential scale.
    pub fn embed(&self, np: &NodeProgram, solution: &FlowSolution) -> Result<Vec<f64>> {
        let net = &self.network;
        let (q, pi) = (&solution.flows, &solution.pi);
        if q.len() != net.arc_count() || pi.len() != net.node_count() {
            return Err(Error::invalid("solution does not cover the network"));
        }
        let chosen = |arc: usize, choice: usize| solution.assignment.diameter(&net.arc(arc).id) == Some(choice);
        let sign = |arc: usize| if q[arc] >= 0.0 { 1.0 } else { -1.0 };
        let mut x = Vec::with_capacity(np.roles.len());
        for role in &np.roles {
            let v = match *role {
                Role::Binary(j) => match self.binaries[j] {
                    MisocBinary::Diameter { arc, choice } => chosen(arc, choice) as u8 as f64,
                    MisocBinary::Direction { arc } => (q[arc] >= 0.0) as u8 as f64,
                    MisocBinary::State { arc } => {
                        let s = solution.assignment.state(&net.arc(arc).id);
                        s.ok_or_else(|| Error::Unassigned(net.arc(arc).id.clone()))? as u8 as f64
                    }
                },
                Role::Potential { node } => pi[node],
                Role::Flow { arc, choice: None } => q[arc],
                Role::Flow { arc, choice: Some(i) } => if chosen(arc, i) { q[arc] } else { 0.0 },
                Role::ChoicePotential { arc, choice, node } => if chosen(arc, choice) { pi[node] } else { 0.0 },
                Role::Gamma { arc, choice } => match (choice, &net.arc(arc).kind) {
                    (Some(i), _) if !chosen(arc, i) => 0.0,
                    (Some(i), ArcKind::Pipe { candidates, .. }) => candidates[i].alpha * q[arc] * q[arc],
                    (None, ArcKind::Resistor { alpha, .. }) if *alpha > 0.0 => alpha * q[arc] * q[arc],
                    _ => {
                        let (v, w) = net.endpoints(arc);
                        sign(arc) * (pi[v] - pi[w])
                    }
                },
                Role::Denominator { arc, choice } => {
                    let z = chosen(arc, choice) as u8 as f64;
                    (1.0 - PERSPECTIVE_SHIFT) * z + PERSPECTIVE_SHIFT
                }
            };
            x.push(v);
        }
        Ok(x)
    }

    fn point(&self, np: &NodeProgram, x: &[f64], value: f64) -> MisocPoint {
        MisocPoint {
            binaries: np.binaries.iter().map(|b| b.eval(x).clamp(0.0, 1.0)).collect(),
            flows: np.flows.iter().map(|f| f.eval(x)).collect(),
            pi: np.potentials.iter().map(|&j| x[j]).collect(),
            value,
        }
    }

    fn solve_node(&self, fix: &[Option<bool>]) -> NodeResult {
        let np = self.program(fix);
        if np.infeasible {
            return NodeResult::Infeasible;
        }
        let sol = convex::solve(&np.program, &node_settings());
        match sol.status {
            Status::Infeasible => NodeResult::Infeasible,
            Status::Failed => NodeResult::Unknown,
            Status::Optimal => {
                let value = sol.objective + np.offset;
                NodeResult::Bound(self.point(&np, &sol.x, value))
            }
        }
    }
}

/// Pruning a node wrongly would overstate the bound, so infeasibility needs
/// a clearly positive phase-one value; anything in between is undecided.
fn node_settings() -> Settings {
    Settings { infeasibility_threshold: 1e-4, ..Settings::default() }
}

enum NodeResult {
    Infeasible,
    Unknown,
    Bound(MisocPoint),
}

/// A relaxed solution: binaries, arc flows and node potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisocPoint {
    pub binaries: Vec<f64>,
    pub flows: Vec<f64>,
    pub pi: Vec<f64>,
    /// Objective: the design cost of the diameter binaries.
    pub value: f64,
}

impl BranchProblem for MisocModel {
    type Payload = MisocPoint;

    fn num_binaries(&self) -> usize {
        self.binaries.len()
    }

    fn propagate(&self, fix: &mut [Option<bool>]) -> bool {
        self.propagate_fix(fix)
    }

    fn relax(&self, fix: &[Option<bool>]) -> Relaxation<MisocPoint> {
        match self.solve_node(fix) {
            NodeResult::Infeasible => Relaxation::Infeasible,
            NodeResult::Unknown => Relaxation::Unknown,
            NodeResult::Bound(p) => Relaxation::Bound { value: p.value, point: p.binaries.clone(), payload: p },
        }
    }

    fn leaf(&self, binaries: &[bool]) -> Option<(f64, MisocPoint)> {
        let fix: Vec<Option<bool>> = binaries.iter().map(|&b| Some(b)).collect();
        match self.solve_node(&fix) {
            NodeResult::Infeasible => None,
            NodeResult::Bound(p) => Some((p.value, p)),
            // The objective depends on the binaries only, so an undecided
            // leaf keeps its cost: treating it as feasible keeps the bound
            // valid.
            NodeResult::Unknown => {
                let np = self.program(&fix);
                let x = vec![0.0; np.program.var_count()];
                let p = self.point(&np, &x, np.offset);
                Some((p.value, p))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MisocStatus {
    Optimal,
    /// No design satisfies even the relaxation.
    Infeasible,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisocSolution {
    pub status: MisocStatus,
    /// Lower bound on the cheapest feasible design; infinite when
    /// infeasible, possibly `-inf` when the time ran out at the root.
    pub bound: f64,
    /// Best integral relaxed point found.
    pub point: Option<MisocPoint>,
    pub nodes: usize,
}

pub fn solve_misoc(model: &MisocModel, time_limit: Duration) -> MisocSolution {
    let settings = BnbSettings { time_limit, ..Default::default() };
    let r = branch_and_bound(model, &settings);
    let status = match r.status {
        BnbStatus::Optimal => MisocStatus::Optimal,
        BnbStatus::Infeasible => MisocStatus::Infeasible,
        BnbStatus::TimedOut => MisocStatus::TimedOut,
    };
    MisocSolution { status, bound: r.best_bound, point: r.incumbent.map(|i| i.payload), nodes: r.nodes }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeuristicOutcome {
    Feasible(FeasibleDesign),
    /// The fixed design did not validate. `outcome` is the validator's
    /// label; `residuals` are those of the relaxed point under the fixed
    /// design.
    Infeasible { outcome: &'static str, residuals: BlockResiduals },
}

/// Fixes every binary of an integral relaxed point and validates the
/// resulting design with all states fixed.
pub fn fix_and_validate(
    model: &MisocModel,
    point: &MisocPoint,
    config: &FormulationConfig,
    time_limit: Duration,
) -> Result<HeuristicOutcome> {
    let net = &model.network;
    let assignment = model.decode(&point.binaries)?;
    let problem = ValidationProblem::with_tolerance(net, &assignment, ValidationMode::Primal, config.eps_feas)?;
    let outcome = validate(&problem, time_limit);
    if let ValidationOutcome::Feasible(solution) = outcome {
        let cost = assignment_cost(&assignment, net)?;
        return Ok(HeuristicOutcome::Feasible(FeasibleDesign { assignment, cost, solution }));
    }
    let relaxed = FlowSolution { assignment, flows: point.flows.clone(), pi: point.pi.clone() };
    Ok(HeuristicOutcome::Infeasible { outcome: outcome.label(), residuals: residual_report(&relaxed, net)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationSummary {
    /// Finite relaxation bound, if one was proven.
    pub bound: Option<f64>,
    pub status: MisocStatus,
    pub heuristic: Option<HeuristicResult>,
}

/// Solves the relaxation within `limit` and tries its best point as a design.
pub fn lower_bound(instance: &Instance, config: &FormulationConfig, limit: Duration) -> Result<RelaxationSummary> {
    let start = Instant::now();
    let model = build_misoc(instance, config)?;
    let sol = solve_misoc(&model, limit);
    log::info!("relaxation: {:?} bound {:.6e} after {} nodes", sol.status, sol.bound, sol.nodes);
    let heuristic = match &sol.point {
        Some(p) => {
            let left = limit.saturating_sub(start.elapsed()).max(Duration::from_secs(1));
            Some(match fix_and_validate(&model, p, config, left)? {
                HeuristicOutcome::Feasible(d) => HeuristicResult { feasible: true, cost: Some(d.cost) },
                HeuristicOutcome::Infeasible { outcome, .. } => {
                    log::info!("relaxed design did not validate ({outcome})");
                    HeuristicResult { feasible: false, cost: None }
                }
            })
        }
        None => None,
    };
    Ok(RelaxationSummary { bound: sol.bound.is_finite().then_some(sol.bound), status: sol.status, heuristic })
}
