//! Master problems over design binaries.
//!
//! The primal master minimizes the cubic flow energy over diameter choices,
//! active-arc states and flows, subject to flow conservation, per-choice flow
//! caps tied to the binaries, a construction budget and the no-good cut
//! pool. It is solved by [`bnb::branch_and_bound`] with convex node
//! relaxations. The initial master only minimizes pipe cost over diameters
//! and compressor states, which [`kbest`] enumerates exactly.

pub mod bnb;
mod cuts;
mod epigraph;
pub mod kbest;

use std::time::Duration;

pub use bnb::{BnbResult, BnbSettings, BnbStatus, BranchProblem, Incumbent, Relaxation};
pub use cuts::{CutPool, Literal, NoGoodCut};
pub use epigraph::CubicEpigraphTerm;

use crate::convex::{self, ObjectiveAtom, Program, Settings, Status};
use crate::cvxflow::{solve_convex_flow, ConvexFlowProblem, FlowEdge, UnionFind};
use crate::error::{Error, Result};
use crate::model::{ArcKind, DesignAssignment, FormulationConfig, Instance, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MasterMode {
    PrimalMaster,
    InitialMaster,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Binary {
    Candidate { arc: usize, choice: usize },
    State { arc: usize },
}

pub const DEFAULT_MASTER_TIME_LIMIT: Duration = Duration::from_secs(60);
/// Denominator shift of perspective terms; keeps their curvature bounded as
/// a binary relaxes to zero while leaving integral points exact.
const PERSPECTIVE_SHIFT: f64 = 1e-6;
/// Relative slack allowed on the budget row.
const BUDGET_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MasterProblem {
    network: Network,
    mode: MasterMode,
    budget: f64,
    pool: CutPool,
    config: FormulationConfig,
    binaries: Vec<Binary>,
    /// Binary index of each (pipe arc, choice) and of each active arc.
    candidate_index: Vec<Vec<usize>>,
    state_index: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterPoint {
    /// Net flow per arc.
    pub flows: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MasterOutcome {
    Assignment { assignment: DesignAssignment, flows: Vec<f64>, objective: f64 },
    Infeasible,
    /// Time limit hit; carries the best assignment found, if any.
    TimedOut { best: Option<(DesignAssignment, Vec<f64>, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterSolve {
    pub outcome: MasterOutcome,
    pub nodes: usize,
    pub best_bound: f64,
}

/// Lower bound and relaxed point of one node.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeBound {
    Infeasible,
    Bound { value: f64, binaries: Vec<f64>, flows: Vec<f64>, epigraph_violation: f64 },
    Unknown,
}

impl MasterProblem {
    pub fn new(instance: &Instance, mode: MasterMode, budget: f64, config: FormulationConfig) -> Result<Self> {
        Self::from_network(instance.net(), mode, budget, config)
    }

    pub fn from_network(net: &Network, mode: MasterMode, budget: f64, config: FormulationConfig) -> Result<Self> {
        net.require_candidates()?;
        config.validate()?;
        if mode == MasterMode::PrimalMaster && !(budget > 0.0) {
            return Err(Error::invalid(format!("budget must be positive, got {budget}")));
        }
        let mut binaries = Vec::new();
        let mut candidate_index = vec![Vec::new(); net.arc_count()];
        let mut state_index = vec![None; net.arc_count()];
        for (a, arc) in net.arcs().iter().enumerate() {
            match &arc.kind {
                ArcKind::Pipe { candidates, .. } => {
                    for i in 0..candidates.len() {
                        candidate_index[a].push(binaries.len());
                        binaries.push(Binary::Candidate { arc: a, choice: i });
                    }
                }
                ArcKind::Compressor(_) => {
                    state_index[a] = Some(binaries.len());
                    binaries.push(Binary::State { arc: a });
                }
                ArcKind::Valve { .. } | ArcKind::ControlValve(_) if mode == MasterMode::PrimalMaster => {
                    state_index[a] = Some(binaries.len());
                    binaries.push(Binary::State { arc: a });
                }
                _ => {}
            }
        }
        Ok(MasterProblem {
            network: net.clone(),
            mode,
            budget,
            pool: CutPool::new(),
            config,
            binaries,
            candidate_index,
            state_index,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn mode(&self) -> MasterMode {
        self.mode
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn set_budget(&mut self, budget: f64) {
        self.budget = budget;
    }

    pub fn pool(&self) -> &CutPool {
        &self.pool
    }

    pub fn pool_mut(&mut self) -> &mut CutPool {
        &mut self.pool
    }

    pub fn config(&self) -> &FormulationConfig {
        &self.config
    }

    pub fn binaries(&self) -> &[Binary] {
        &self.binaries
    }

    fn budgeted(&self) -> bool {
        self.mode == MasterMode::PrimalMaster
    }

    /// Complete binary vector to a design assignment.
    pub fn decode(&self, bin: &[bool]) -> DesignAssignment {
        let mut a = DesignAssignment::default();
        for (j, b) in self.binaries.iter().enumerate() {
            match *b {
                Binary::Candidate { arc, choice } if bin[j] => {
                    a.diameters.insert(self.network.arc(arc).id.clone(), choice);
                }
                Binary::State { arc } => {
                    a.states.insert(self.network.arc(arc).id.clone(), bin[j]);
                }
                _ => {}
            }
        }
        a
    }

    /// Design assignment to the full binary fixing of this master's space.
    pub fn encode(&self, a: &DesignAssignment) -> Vec<Option<bool>> {
        self.binaries
            .iter()
            .map(|b| match *b {
                Binary::Candidate { arc, choice } => a.diameter(&self.network.arc(arc).id).map(|c| c == choice),
                Binary::State { arc } => a.state(&self.network.arc(arc).id),
            })
            .collect()
    }

    fn cut_rows(&self) -> Vec<Vec<(usize, bool)>> {
        // Each cut as (binary, excluded value) pairs; satisfied when any
        // binary differs from its excluded value.
        self.pool
            .cuts()
            .iter()
            .map(|c| {
                let enc = self.encode(c.excluded());
                enc.iter().enumerate().filter_map(|(j, v)| v.map(|v| (j, v))).collect()
            })
            .collect()
    }

    fn pipe_cost(&self, j: usize) -> f64 {
        match self.binaries[j] {
            Binary::Candidate { arc, choice } => self.network.arc(arc).candidates()[choice].cost,
            Binary::State { .. } => 0.0,
        }
    }

    fn budget_limit(&self) -> f64 {
        self.budget * (1.0 + BUDGET_TOLERANCE)
    }
}

impl BranchProblem for MasterProblem {
    type Payload = MasterPoint;

    fn num_binaries(&self) -> usize {
        self.binaries.len()
    }

    fn propagate(&self, fix: &mut [Option<bool>]) -> bool {
        let cuts = self.cut_rows();
        loop {
            let mut changed = false;
            // One choice per pipe.
            for idx in self.candidate_index.iter().filter(|v| !v.is_empty()) {
                let ones = idx.iter().filter(|&&j| fix[j] == Some(true)).count();
                let free: Vec<usize> = idx.iter().copied().filter(|&j| fix[j].is_none()).collect();
                if ones > 1 || (ones == 0 && free.is_empty()) {
                    return false;
                }
                if ones == 1 {
                    for &j in &free {
                        fix[j] = Some(false);
                        changed = true;
                    }
                } else if free.len() == 1 {
                    fix[free[0]] = Some(true);
                    changed = true;
                }
            }
            // Budget: drop choices that cannot fit.
            if self.budgeted() {
                let mut base = 0.0;
                let mut mins = Vec::new();
                for idx in self.candidate_index.iter().filter(|v| !v.is_empty()) {
                    let m = idx
                        .iter()
                        .filter(|&&j| fix[j] != Some(false))
                        .map(|&j| self.pipe_cost(j))
                        .fold(f64::INFINITY, f64::min);
                    base += m;
                    mins.push(m);
                }
                if base > self.budget_limit() {
                    return false;
                }
                for (idx, m) in self.candidate_index.iter().filter(|v| !v.is_empty()).zip(&mins) {
                    for &j in idx {
                        if fix[j].is_none() && base - m + self.pipe_cost(j) > self.budget_limit() {
                            fix[j] = Some(false);
                            changed = true;
                        }
                    }
                }
            }
            for cut in &cuts {
                if cut.iter().any(|&(j, v)| fix[j] == Some(!v)) {
                    continue;
                }
                let open: Vec<&(usize, bool)> = cut.iter().filter(|(j, _)| fix[*j].is_none()).collect();
                match open.len() {
                    0 => return false,
                    1 => {
                        fix[open[0].0] = Some(!open[0].1);
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn relax(&self, fix: &[Option<bool>]) -> Relaxation<MasterPoint> {
        match node_relaxation(self, fix) {
            NodeBound::Infeasible => Relaxation::Infeasible,
            NodeBound::Unknown => Relaxation::Unknown,
            NodeBound::Bound { value, binaries, flows, .. } => {
                Relaxation::Bound { value, point: binaries, payload: MasterPoint { flows, objective: value } }
            }
        }
    }

    fn leaf(&self, bin: &[bool]) -> Option<(f64, MasterPoint)> {
        let mut fix: Vec<Option<bool>> = bin.iter().map(|&b| Some(b)).collect();
        if !self.propagate(&mut fix) || fix.iter().zip(bin).any(|(f, b)| *f != Some(*b)) {
            return None;
        }
        let a = self.decode(bin);
        let (flows, objective) = fixed_flow(&self.network, &a, self.mode)?;
        Some((objective, MasterPoint { flows, objective }))
    }
}

/// Exact master value of a complete assignment: the convex flow optimum with
/// the chosen diameters and the given states. Valves and control valves
/// without a state are treated as open (initial mode keeps them free).
pub fn fixed_flow(net: &Network, a: &DesignAssignment, mode: MasterMode) -> Option<(Vec<f64>, f64)> {
    let keys = net.nodes().iter().map(|n| n.id.clone()).collect();
    let mut p = ConvexFlowProblem::new(keys, net.demands());
    for (k, arc) in net.arcs().iter().enumerate() {
        let (v, w) = net.endpoints(k);
        let on = |id: &str| a.state(id).unwrap_or(mode == MasterMode::InitialMaster);
        let edge = match &arc.kind {
            ArcKind::Pipe { .. } => {
                let (alpha, cap) = crate::model::effective_pipe(a, net, k).ok()?;
                FlowEdge::symmetric(v, w, alpha, cap)
            }
            ArcKind::ShortPipe { q_max } => FlowEdge::symmetric(v, w, 0.0, *q_max),
            ArcKind::Resistor { alpha, q_max } => FlowEdge::symmetric(v, w, *alpha, *q_max),
            ArcKind::Valve { q_max } => FlowEdge::symmetric(v, w, 0.0, if on(&arc.id) { *q_max } else { 0.0 }),
            ArcKind::Compressor(l) | ArcKind::ControlValve(l) => {
                let cap = if on(&arc.id) { l.q_max } else { 0.0 };
                FlowEdge { tail: v, head: w, alpha: 0.0, forward: cap, backward: 0.0 }
            }
        };
        p.add_edge(edge);
    }
    let sol = solve_convex_flow(&p).ok()?;
    Some((sol.flows, sol.objective))
}

/// Solves the node relaxation with binaries fixed by `fix` and the rest in
/// `[0, 1]`. The bound is valid for every completion of `fix` that meets the
/// budget and cut pool.
pub fn node_relaxation(master: &MasterProblem, fix: &[Option<bool>]) -> NodeBound {
    let net = &master.network;
    let n_arcs = net.arc_count();
    let mut p = Program::new();
    // Binary variables: None when fixed (constant value in `zval`).
    let zval: Vec<Option<f64>> = fix.iter().map(|f| f.map(|b| b as u8 as f64)).collect();
    let zvar: Vec<Option<usize>> = zval.iter().map(|v| if v.is_none() { Some(p.add_var(0.0, 1.0)) } else { None }).collect();

    // Flow pieces per arc: (variable, sign into head).
    let mut pieces: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_arcs];
    // Cubic terms enter in closed form: the minimum of the cone epigraph
    // chain over its auxiliaries, `q^3/3` or with the link `q^3/(3 d^2)`
    // where `d` is the shifted binary.
    let mut epigraphs: Vec<(usize, Option<usize>)> = Vec::new();
    let perspective = master.config.perspective;
    let cubic = |p: &mut Program, q: usize, alpha: f64, z: Option<usize>, epigraphs: &mut Vec<(usize, Option<usize>)>| {
        if alpha <= 0.0 {
            return;
        }
        let link = if perspective { z } else { None };
        p.objective_atoms.push(match link {
            Some(z) => ObjectiveAtom::CubicPerspective { var: q, z, coef: alpha, eps: PERSPECTIVE_SHIFT },
            None => ObjectiveAtom::Cubic { var: q, coef: alpha },
        });
        epigraphs.push((q, link));
    };
    // A flow variable in [0, cap], tied to binary j when it is free.
    let linked = |p: &mut Program, cap: f64, j: Option<usize>| -> Option<usize> {
        match j.map(|j| (zval[j], zvar[j])) {
            Some((Some(v), _)) if v == 0.0 => None,
            Some((None, Some(z))) => {
                let q = p.add_var(0.0, cap);
                p.add_inequality(vec![(q, 1.0), (z, -cap)], 0.0);
                Some(q)
            }
            _ => Some(p.add_var(0.0, cap)),
        }
    };
    for (a, arc) in net.arcs().iter().enumerate() {
        match &arc.kind {
            ArcKind::Pipe { candidates, .. } => {
                for (i, c) in candidates.iter().enumerate() {
                    let j = master.candidate_index[a][i];
                    for sign in [1.0, -1.0] {
                        if let Some(q) = linked(&mut p, c.q_max, Some(j)) {
                            pieces[a].push((q, sign));
                            cubic(&mut p, q, c.alpha, zvar[j], &mut epigraphs);
                        }
                    }
                }
            }
            ArcKind::ShortPipe { q_max } | ArcKind::Resistor { q_max, .. } => {
                let alpha = if let ArcKind::Resistor { alpha, .. } = arc.kind { alpha } else { 0.0 };
                for sign in [1.0, -1.0] {
                    let q = p.add_var(0.0, *q_max);
                    pieces[a].push((q, sign));
                    cubic(&mut p, q, alpha, None, &mut epigraphs);
                }
            }
            ArcKind::Valve { q_max } => {
                for sign in [1.0, -1.0] {
                    if let Some(q) = linked(&mut p, *q_max, master.state_index[a]) {
                        pieces[a].push((q, sign));
                    }
                }
            }
            ArcKind::Compressor(l) | ArcKind::ControlValve(l) => {
                if let Some(q) = linked(&mut p, l.q_max, master.state_index[a]) {
                    pieces[a].push((q, 1.0));
                }
            }
        }
    }

    // Conservation, one row per node, minus one per component of arcs that
    // still carry a flow variable. Unbalanced components are infeasible.
    let mut uf = UnionFind::new(net.node_count());
    for a in 0..n_arcs {
        if !pieces[a].is_empty() {
            let (v, w) = net.endpoints(a);
            uf.union(v, w);
        }
    }
    let demand = net.demands();
    let scale = net.flow_scale();
    let mut comp_sum = vec![0.0; net.node_count()];
    for v in 0..net.node_count() {
        comp_sum[uf.find(v)] += demand[v];
    }
    if comp_sum.iter().any(|s| s.abs() > 1e-9 * scale) {
        return NodeBound::Infeasible;
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); net.node_count()];
    for a in 0..n_arcs {
        let (v, w) = net.endpoints(a);
        for &(q, s) in &pieces[a] {
            rows[w].push((q, s));
            rows[v].push((q, -s));
        }
    }
    let mut seen_root = vec![false; net.node_count()];
    for v in 0..net.node_count() {
        let r = uf.find(v);
        if !seen_root[r] {
            seen_root[r] = true;
            continue;
        }
        p.add_equality(std::mem::take(&mut rows[v]), demand[v]);
    }

    // One choice per pipe.
    for idx in master.candidate_index.iter().filter(|v| !v.is_empty()) {
        let fixed: f64 = idx.iter().filter_map(|&j| zval[j]).sum();
        let terms: Vec<(usize, f64)> = idx.iter().filter_map(|&j| zvar[j].map(|z| (z, 1.0))).collect();
        if terms.is_empty() {
            if fixed != 1.0 {
                return NodeBound::Infeasible;
            }
        } else {
            p.add_equality(terms, 1.0 - fixed);
        }
    }
    if master.budgeted() {
        let fixed: f64 = (0..fix.len()).filter_map(|j| zval[j].map(|v| v * master.pipe_cost(j))).sum();
        let terms: Vec<(usize, f64)> =
            (0..fix.len()).filter_map(|j| zvar[j].map(|z| (z, master.pipe_cost(j)))).filter(|t| t.1 != 0.0).collect();
        let rhs = master.budget_limit() - fixed;
        if terms.is_empty() {
            if rhs < 0.0 {
                return NodeBound::Infeasible;
            }
        } else {
            p.add_inequality(terms, rhs);
        }
    }
    for cut in master.cut_rows() {
        // sum_{excluded 0} z + sum_{excluded 1} (1 - z) >= 1
        let mut constant = 0.0;
        let mut terms = Vec::new();
        for (j, v) in cut {
            match (zval[j], zvar[j]) {
                (Some(val), _) => constant += if v { 1.0 - val } else { val },
                (None, Some(z)) => {
                    if v {
                        constant += 1.0;
                        terms.push((z, 1.0));
                    } else {
                        terms.push((z, -1.0));
                    }
                }
                _ => unreachable!(),
            }
        }
        if constant >= 1.0 {
            continue;
        }
        if terms.is_empty() {
            return NodeBound::Infeasible;
        }
        // Equivalent: sum_{excluded 1} z - sum_{excluded 0} z <= constant - 1.
        p.add_inequality(terms, constant - 1.0);
    }

    let sol = convex::solve(&p, &Settings::default());
    match sol.status {
        Status::Infeasible => return NodeBound::Infeasible,
        Status::Failed => return NodeBound::Unknown,
        Status::Optimal => {}
    }
    let x = &sol.x;
    let binaries: Vec<f64> = (0..fix.len()).map(|j| zval[j].unwrap_or_else(|| x[zvar[j].unwrap()].clamp(0.0, 1.0))).collect();
    let flows: Vec<f64> = pieces.iter().map(|ps| ps.iter().map(|&(q, s)| s * x[q]).sum()).collect();
    let epigraph_violation = epigraphs
        .iter()
        .map(|&(q, z)| {
            let zv = z.map(|z| (1.0 - PERSPECTIVE_SHIFT) * x[z] + PERSPECTIVE_SHIFT);
            CubicEpigraphTerm::lift(x[q], zv).violation(x[q], zv)
        })
        .fold(0.0, f64::max);
    NodeBound::Bound { value: sol.objective, binaries, flows, epigraph_violation }
}

/// Adds the no-good cut of `assignment`. Returns false for duplicates.
pub fn add_nogood(master: &mut MasterProblem, assignment: &DesignAssignment) -> Result<bool> {
    let net = &master.network;
    assignment.check(net, false)?;
    let mut a = assignment.clone();
    // Restrict states to this master's space.
    a.states.retain(|id, _| net.arc_idx(id).map_or(false, |k| master.state_index[k].is_some()));
    for k in 0..net.arc_count() {
        if master.state_index[k].is_some() && a.state(&net.arc(k).id).is_none() {
            return Err(Error::invalid(format!("assignment lacks a state for {}", net.arc(k).id)));
        }
    }
    let cut = NoGoodCut::new(net, &a);
    Ok(master.pool.add(cut))
}

pub fn solve_master(master: &MasterProblem, time_limit: Duration) -> MasterOutcome {
    solve_master_detailed(master, time_limit).outcome
}

pub fn solve_master_detailed(master: &MasterProblem, time_limit: Duration) -> MasterSolve {
    let settings = BnbSettings { time_limit, ..Default::default() };
    let res = bnb::branch_and_bound(master, &settings);
    let pack = |i: Incumbent<MasterPoint>| (master.decode(&i.binaries), i.payload.flows, i.value);
    let outcome = match res.status {
        BnbStatus::Optimal => {
            let (assignment, flows, objective) = pack(res.incumbent.expect("optimal carries an incumbent"));
            MasterOutcome::Assignment { assignment, flows, objective }
        }
        BnbStatus::Infeasible => MasterOutcome::Infeasible,
        BnbStatus::TimedOut => MasterOutcome::TimedOut { best: res.incumbent.map(pack) },
    };
    MasterSolve { outcome, nodes: res.nodes, best_bound: res.best_bound }
}

/// Cheapest diameter selection with compressor states, skipping every
/// assignment excluded by the pool. Compressor options cost nothing and are
/// listed on before off.
pub fn solve_initial_master(master: &MasterProblem) -> Result<Option<DesignAssignment>> {
    if master.mode != MasterMode::InitialMaster {
        return Err(Error::invalid("solve_initial_master needs an initial master"));
    }
    Ok(initial_sequence(master).find(|a| !master.pool.excludes(a)))
}

/// All initial-master assignments in nondecreasing pipe cost.
pub fn initial_sequence(master: &MasterProblem) -> impl Iterator<Item = DesignAssignment> + '_ {
    let net = &master.network;
    // Dimension d: pipe arcs first (options sorted by cost, then index),
    // then compressors.
    let mut dims: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut costs = Vec::new();
    for &a in net.pipes() {
        let c = net.arc(a).candidates();
        let mut order: Vec<usize> = (0..c.len()).collect();
        order.sort_by(|&x, &y| c[x].cost.total_cmp(&c[y].cost).then(x.cmp(&y)));
        costs.push(order.iter().map(|&i| c[i].cost).collect());
        dims.push((a, order));
    }
    for &a in net.compressors() {
        costs.push(vec![0.0, 0.0]);
        dims.push((a, vec![1, 0]));
    }
    kbest::KBest::new(costs).map(move |(_, ranks)| {
        let mut out = DesignAssignment::default();
        for ((a, order), r) in dims.iter().zip(ranks) {
            let arc = net.arc(*a);
            if matches!(arc.kind, ArcKind::Pipe { .. }) {
                out.diameters.insert(arc.id.clone(), order[r]);
            } else {
                out.states.insert(arc.id.clone(), order[r] == 1);
            }
        }
        out
    })
}
