//! Small network builders shared by unit tests.

use std::time::Duration;

use crate::model::{ActiveLimits, Arc, ArcKind, DesignAssignment, Network, Node, PipeCandidate};
use crate::subproblem::{validate, FlowSolution, ValidationMode, ValidationOutcome, ValidationProblem};

pub fn node(id: &str, demand: f64, pi_min: f64, pi_max: f64) -> Node {
    Node::new(id, demand, pi_min, pi_max)
}

pub fn free_node(id: &str, demand: f64) -> Node {
    Node::new(id, demand, 0.0, f64::INFINITY)
}

/// Candidate list with `alpha_i = alpha0 / (i+1)^2`, `q_max_i = q0 (i+1)` and
/// `cost_i = cost0 (i+1)`.
pub fn ladder(k: usize, alpha0: f64, q0: f64, cost0: f64) -> Vec<PipeCandidate> {
    (0..k)
        .map(|i| {
            let s = (i + 1) as f64;
            PipeCandidate { diameter: s, alpha: alpha0 / (s * s), q_max: q0 * s, cost: cost0 * s }
        })
        .collect()
}

pub fn pipe(id: &str, from: &str, to: &str, cands: Vec<PipeCandidate>) -> Arc {
    Arc::new(id, from, to, ArcKind::Pipe { length: 1.0, diameter: None, candidates: cands })
}

pub fn fixed_pipe(id: &str, from: &str, to: &str, alpha: f64, q_max: f64) -> Arc {
    pipe(id, from, to, vec![PipeCandidate { diameter: 1.0, alpha, q_max, cost: 1.0 }])
}

pub fn compressor(id: &str, from: &str, to: &str, kappa_max: f64, q_max: f64) -> Arc {
    let l = ActiveLimits { kappa_min: 1.0, kappa_max, q_max, pi_min_on: None, pi_max_on: None };
    Arc::new(id, from, to, ArcKind::Compressor(l))
}

pub fn control_valve(id: &str, from: &str, to: &str, kappa_min: f64, kappa_max: f64, q_max: f64) -> Arc {
    let l = ActiveLimits { kappa_min, kappa_max, q_max, pi_min_on: None, pi_max_on: None };
    Arc::new(id, from, to, ArcKind::ControlValve(l))
}

pub fn valve(id: &str, from: &str, to: &str, q_max: f64) -> Arc {
    Arc::new(id, from, to, ArcKind::Valve { q_max })
}

pub fn short_pipe(id: &str, from: &str, to: &str, q_max: f64) -> Arc {
    Arc::new(id, from, to, ArcKind::ShortPipe { q_max })
}

pub fn network(nodes: Vec<Node>, arcs: Vec<Arc>) -> Network {
    Network::new("test", nodes, arcs).expect("valid test network")
}

/// Every assignment over diameters and all active states.
pub fn all_assignments(net: &Network) -> Vec<DesignAssignment> {
    let mut out = vec![DesignAssignment::default()];
    for arc in net.arcs() {
        let k = match &arc.kind {
            ArcKind::Pipe { candidates, .. } => candidates.len(),
            k if k.is_active() => 2,
            _ => continue,
        };
        out = out
            .into_iter()
            .flat_map(|base| {
                (0..k).map(move |i| {
                    let mut x = base.clone();
                    if matches!(arc.kind, ArcKind::Pipe { .. }) {
                        x.diameters.insert(arc.id.clone(), i);
                    } else {
                        x.states.insert(arc.id.clone(), i == 0);
                    }
                    x
                })
            })
            .collect();
    }
    out
}

/// Solutions of every assignment that validates with all states fixed.
pub fn feasible_designs(net: &Network) -> Vec<FlowSolution> {
    all_assignments(net)
        .into_iter()
        .filter_map(|a| {
            let p = ValidationProblem::new(net, &a, ValidationMode::Primal).unwrap();
            match validate(&p, Duration::from_secs(30)) {
                ValidationOutcome::Feasible(s) => Some(s),
                _ => None,
            }
        })
        .collect()
}
