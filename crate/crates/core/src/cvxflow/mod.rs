//! Convex separable min-cost flow with cubic arc costs, its KKT certificate,
//! and the potential recovery that turns its node duals into solutions of the
//! network analysis equations.
//!
//! Each edge `e = (v, w)` carries a signed flow `q_e` in `[-u-, u+]` whose
//! cost is `alpha_e |q_e|^3 / 3`, so the marginal cost is `phi(q) = alpha q |q|`.
//! Conservation rows read `inflow - outflow = d`. With that sign convention the
//! row multipliers `lambda` satisfy `lambda_v - lambda_w = phi(q_e)` on every
//! edge whose flow is strictly inside its bounds, so `pi = lambda`.

mod maxflow;
mod newton;

use std::fmt;

use crate::convex::{self, ObjectiveAtom, Program, Settings, Status};
use crate::model::{ArcKind, DesignAssignment, Network};

pub use newton::newton_oracle;

/// Default tolerance for certificate validity on scaled residuals.
pub const KKT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowEdge {
    pub tail: usize,
    pub head: usize,
    pub alpha: f64,
    /// Capacity in the arc direction (`q+ <= forward`).
    pub forward: f64,
    /// Capacity against the arc direction (`q- <= backward`).
    pub backward: f64,
}

impl FlowEdge {
    pub fn symmetric(tail: usize, head: usize, alpha: f64, cap: f64) -> Self {
        FlowEdge { tail, head, alpha, forward: cap, backward: cap }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexFlowProblem {
    /// Node keys; the lexicographically smallest key of each connected
    /// component anchors `lambda = 0`.
    pub node_keys: Vec<String>,
    pub demand: Vec<f64>,
    pub edges: Vec<FlowEdge>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowError {
    /// No flow meets the balance under the capacities. `cut` marks the
    /// source side of a saturated cut and `deficit` is the unmet supply.
    Infeasible { cut: Vec<bool>, deficit: f64 },
    IterationLimit,
    Invalid(String),
}

impl fmt::Display for FlowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowError::Infeasible { deficit, .. } => write!(f, "flow infeasible: unmet supply {deficit}"),
            FlowError::IterationLimit => write!(f, "flow solver did not converge"),
            FlowError::Invalid(m) => write!(f, "invalid flow problem: {m}"),
        }
    }
}

impl std::error::Error for FlowError {}

#[derive(Debug, Clone, PartialEq)]
pub struct KktCertificate {
    pub q_plus: Vec<f64>,
    pub q_minus: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Duals of `q+ >= 0` and `q- >= 0`.
    pub mu_plus: Vec<f64>,
    pub mu_minus: Vec<f64>,
    /// Duals of the capacity bounds.
    pub nu_plus: Vec<f64>,
    pub nu_minus: Vec<f64>,
    pub stationarity: f64,
    pub complementarity: f64,
    pub balance: f64,
}

impl KktCertificate {
    pub fn is_valid(&self, eps: f64) -> bool {
        self.stationarity <= eps && self.complementarity <= eps && self.balance <= eps
    }

    pub fn flows(&self) -> Vec<f64> {
        self.q_plus.iter().zip(&self.q_minus).map(|(p, m)| p - m).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexFlowSolution {
    /// Signed flows `q+ - q-`.
    pub flows: Vec<f64>,
    pub objective: f64,
    pub certificate: KktCertificate,
}

/// Node potentials and signed arc flows.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialAssignment {
    pub pi: Vec<f64>,
    pub flows: Vec<f64>,
}

pub fn phi(alpha: f64, q: f64) -> f64 {
    alpha * q * q.abs()
}

/// Cost `alpha |q|^3 / 3` of one edge.
pub fn edge_cost(alpha: f64, q: f64) -> f64 {
    alpha * q.abs().powi(3) / 3.0
}

impl ConvexFlowProblem {
    pub fn new(node_keys: Vec<String>, demand: Vec<f64>) -> Self {
        ConvexFlowProblem { node_keys, demand, edges: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.demand.len()
    }

    pub fn add_edge(&mut self, e: FlowEdge) -> usize {
        self.edges.push(e);
        self.edges.len() - 1
    }

    /// Passive network with the given diameters; short pipes get `alpha = 0`.
    /// Active arcs are rejected.
    pub fn from_passive(net: &Network, assignment: &DesignAssignment) -> crate::Result<Self> {
        let keys = net.nodes().iter().map(|n| n.id.clone()).collect();
        let mut p = ConvexFlowProblem::new(keys, net.demands());
        for (a, arc) in net.arcs().iter().enumerate() {
            let (v, w) = net.endpoints(a);
            let (alpha, cap) = match &arc.kind {
                ArcKind::Pipe { .. } => crate::model::effective_pipe(assignment, net, a)?,
                ArcKind::ShortPipe { q_max } => (0.0, *q_max),
                ArcKind::Resistor { alpha, q_max } => (*alpha, *q_max),
                _ => return Err(crate::Error::invalid(format!("arc {} is not passive", arc.id))),
            };
            p.add_edge(FlowEdge::symmetric(v, w, alpha, cap));
        }
        Ok(p)
    }

    pub fn objective(&self, flows: &[f64]) -> f64 {
        self.edges.iter().zip(flows).map(|(e, &q)| edge_cost(e.alpha, q)).sum()
    }

    fn check(&self) -> Result<(), FlowError> {
        if self.node_keys.len() != self.demand.len() {
            return Err(FlowError::Invalid("node key and demand lengths differ".into()));
        }
        let n = self.node_count();
        for (k, e) in self.edges.iter().enumerate() {
            if e.tail >= n || e.head >= n {
                return Err(FlowError::Invalid(format!("edge {k} has an unknown endpoint")));
            }
            if !(e.alpha >= 0.0) || !(e.forward >= 0.0) || !(e.backward >= 0.0) {
                return Err(FlowError::Invalid(format!("edge {k} has negative alpha or capacity")));
            }
        }
        let max = self.demand.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let sum: f64 = self.demand.iter().sum();
        if sum.abs() > 1e-9 * max.max(1.0) {
            return Err(FlowError::Invalid(format!("demands sum to {sum}")));
        }
        Ok(())
    }

    /// Component label per node over edges with some capacity.
    pub fn components(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut uf = UnionFind::new(n);
        for e in &self.edges {
            if e.forward > 0.0 || e.backward > 0.0 {
                uf.union(e.tail, e.head);
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for v in 0..n {
            let r = uf.find(v);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            label[v] = label[r];
        }
        label
    }

    /// Anchor node (lexicographically smallest key) of each component.
    fn anchors(&self, comp: &[usize]) -> Vec<usize> {
        let k = comp.iter().copied().max().map_or(0, |m| m + 1);
        let mut anchor: Vec<Option<usize>> = vec![None; k];
        for v in 0..self.node_count() {
            let c = comp[v];
            match anchor[c] {
                Some(u) if self.node_keys[u] <= self.node_keys[v] => {}
                _ => anchor[c] = Some(v),
            }
        }
        anchor.into_iter().map(|a| a.expect("component has a node")).collect()
    }

    /// Max-flow test of whether the capacities admit the balance.
    fn capacity_check(&self) -> Result<(), FlowError> {
        let n = self.node_count();
        let (s, t) = (n, n + 1);
        let mut g = maxflow::MaxFlow::new(n + 2);
        let supply: f64 = self.demand.iter().filter(|d| **d < 0.0).map(|d| -d).sum();
        for (v, &d) in self.demand.iter().enumerate() {
            if d < 0.0 {
                g.add_edge(s, v, -d);
            } else if d > 0.0 {
                g.add_edge(v, t, d);
            }
        }
        for e in &self.edges {
            if e.forward > 0.0 {
                g.add_edge(e.tail, e.head, e.forward);
            }
            if e.backward > 0.0 {
                g.add_edge(e.head, e.tail, e.backward);
            }
        }
        let eps = 1e-12 * supply.max(1.0);
        let pushed = g.run(s, t, eps);
        let deficit = supply - pushed;
        if deficit > 1e-9 * supply.max(1.0) {
            let side = g.source_side(s, eps);
            return Err(FlowError::Infeasible { cut: side[..n].to_vec(), deficit });
        }
        Ok(())
    }
}

/// Solves the convex flow program and certifies the result.
pub fn solve_convex_flow(problem: &ConvexFlowProblem) -> Result<ConvexFlowSolution, FlowError> {
    problem.check()?;
    problem.capacity_check()?;
    let n = problem.node_count();
    let q_scale = problem.demand.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1e-300);
    let supply: f64 = problem.demand.iter().filter(|d| **d > 0.0).sum();
    let comp = problem.components();
    let anchors = problem.anchors(&comp);

    // Zero demand: the zero flow is optimal and every potential is zero.
    if supply == 0.0 {
        let m = problem.edges.len();
        let lambda = vec![0.0; n];
        return Ok(ConvexFlowSolution {
            flows: vec![0.0; m],
            objective: 0.0,
            certificate: certificate(problem, &vec![0.0; m], &lambda),
        });
    }

    // An optimal flow routes no more than the total supply over any edge.
    let cap_limit = 2.0 * supply / q_scale + 1.0;
    let f_scale =
        problem.edges.iter().map(|e| e.alpha * q_scale.powi(3)).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let f_scale = if f_scale > f64::MIN_POSITIVE { f_scale } else { 1.0 };

    let mut prog = Program::new();
    let mut var_of = vec![None; problem.edges.len()];
    for (k, e) in problem.edges.iter().enumerate() {
        if e.forward == 0.0 && e.backward == 0.0 {
            continue;
        }
        let lo = -(e.backward / q_scale).min(cap_limit);
        let hi = (e.forward / q_scale).min(cap_limit);
        let j = prog.add_var(lo, hi);
        if e.alpha > 0.0 {
            prog.objective_atoms.push(ObjectiveAtom::Cubic { var: j, coef: e.alpha * q_scale.powi(3) / f_scale });
        }
        var_of[k] = Some(j);
    }
    let mut row_of = vec![None; n];
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (k, e) in problem.edges.iter().enumerate() {
        if let Some(j) = var_of[k] {
            rows[e.head].push((j, 1.0));
            rows[e.tail].push((j, -1.0));
        }
    }
    for v in 0..n {
        if anchors[comp[v]] == v {
            continue;
        }
        row_of[v] = Some(prog.equalities.len());
        prog.add_equality(std::mem::take(&mut rows[v]), problem.demand[v] / q_scale);
    }

    let sol = convex::solve(&prog, &Settings { phase_one: false, ..Settings::default() });
    if sol.status != Status::Optimal {
        return Err(FlowError::IterationLimit);
    }
    let flows: Vec<f64> =
        var_of.iter().map(|j| j.map_or(0.0, |j| sol.x[j] * q_scale)).collect();
    let lambda: Vec<f64> =
        (0..n).map(|v| row_of[v].map_or(0.0, |r| sol.eq_duals[r] * f_scale / q_scale)).collect();
    let cert = certificate(problem, &flows, &lambda);
    Ok(ConvexFlowSolution { objective: problem.objective(&flows), flows, certificate: cert })
}

/// Builds the KKT certificate of `(q, lambda)` with the bound duals set by
/// `mu+ = max(0, lambda_w - lambda_v + phi(q+))` and its counterparts.
pub fn certificate(problem: &ConvexFlowProblem, flows: &[f64], lambda: &[f64]) -> KktCertificate {
    let m = problem.edges.len();
    let q_scale = problem.demand.iter().fold(0.0f64, |a, d| a.max(d.abs())).max(1.0);
    let mut lam_scale = 1.0f64;
    for e in &problem.edges {
        lam_scale = lam_scale.max(e.alpha * q_scale * q_scale);
    }
    let mut c = KktCertificate {
        q_plus: Vec::with_capacity(m),
        q_minus: Vec::with_capacity(m),
        lambda: lambda.to_vec(),
        mu_plus: Vec::with_capacity(m),
        mu_minus: Vec::with_capacity(m),
        nu_plus: Vec::with_capacity(m),
        nu_minus: Vec::with_capacity(m),
        stationarity: 0.0,
        complementarity: 0.0,
        balance: 0.0,
    };
    let mut net_in = vec![0.0; problem.node_count()];
    for (e, &q) in problem.edges.iter().zip(flows) {
        let (qp, qm) = (q.max(0.0), (-q).max(0.0));
        let drop = lambda[e.tail] - lambda[e.head];
        let gp = phi(e.alpha, qp) - drop;
        let gm = phi(e.alpha, qm) + drop;
        let (mp, np) = (gp.max(0.0), (-gp).max(0.0));
        let (mm, nm) = (gm.max(0.0), (-gm).max(0.0));
        let stat = (gp - mp + np).abs().max((gm - mm + nm).abs());
        c.stationarity = c.stationarity.max(stat / lam_scale);
        // Slack is measured up to the flow scale: a dual on a bound that far
        // away weighs like a stationarity error, as for infinite bounds.
        let comp = (mp * qp)
            .max(mm * qm)
            .max(np * (e.forward - qp).max(0.0).min(q_scale))
            .max(nm * (e.backward - qm).max(0.0).min(q_scale));
        c.complementarity = c.complementarity.max(comp / (lam_scale * q_scale));
        let bound = (qp - e.forward).max(qm - e.backward).max(0.0);
        c.balance = c.balance.max(bound / q_scale);
        net_in[e.head] += q;
        net_in[e.tail] -= q;
        c.q_plus.push(qp);
        c.q_minus.push(qm);
        c.mu_plus.push(mp);
        c.mu_minus.push(mm);
        c.nu_plus.push(np);
        c.nu_minus.push(nm);
    }
    for (v, d) in problem.demand.iter().enumerate() {
        c.balance = c.balance.max((net_in[v] - d).abs() / q_scale);
    }
    c
}

/// `pi = lambda`, `q = q+ - q-` from a valid certificate.
pub fn recover_potentials(cert: &KktCertificate, eps: f64) -> Result<PotentialAssignment, FlowError> {
    if !cert.is_valid(eps) {
        return Err(FlowError::Invalid(format!(
            "certificate residuals (stationarity {}, complementarity {}, balance {}) exceed {eps}",
            cert.stationarity, cert.complementarity, cert.balance
        )));
    }
    Ok(PotentialAssignment { pi: cert.lambda.clone(), flows: cert.flows() })
}

/// Largest violation of the potential-drop and conservation equations.
pub fn network_analysis_residual(problem: &ConvexFlowProblem, pi: &[f64], flows: &[f64]) -> f64 {
    let mut r: f64 = 0.0;
    let mut net_in = vec![0.0; problem.node_count()];
    for (e, &q) in problem.edges.iter().zip(flows) {
        r = r.max((pi[e.tail] - pi[e.head] - phi(e.alpha, q)).abs());
        net_in[e.head] += q;
        net_in[e.tail] -= q;
    }
    for (v, d) in problem.demand.iter().enumerate() {
        r = r.max((net_in[v] - d).abs());
    }
    r
}

/// Shifts `pi` per component so its anchor node sits at zero.
pub fn anchor_potentials(problem: &ConvexFlowProblem, pi: &mut [f64]) {
    let comp = problem.components();
    let anchors = problem.anchors(&comp);
    let base: Vec<f64> = anchors.iter().map(|&a| pi[a]).collect();
    for v in 0..pi.len() {
        pi[v] -= base[comp[v]];
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, v: usize) -> usize {
        let mut r = v;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut v = v;
        while self.parent[v] != r {
            let next = self.parent[v];
            self.parent[v] = r;
            v = next;
        }
        r
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

#[cfg(test)]
mod tests;
