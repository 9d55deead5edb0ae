use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::offsets::{self, OffsetResult};
use super::{residual_report, Block, FlowSolution, ValidationProblem};
use crate::cvxflow::{phi, solve_convex_flow, ConvexFlowProblem, FlowEdge, FlowError, UnionFind};
use crate::model::{ArcKind, DesignAssignment};

/// Optional forced direction per arc.
pub type Directions = Vec<Option<bool>>;

pub(crate) enum LeafResult {
    Feasible(FlowSolution),
    /// Scaled violation and the block whose rows it violates.
    Refuted(Block, f64),
    Unresolved,
    TimedOut,
}

const SAMPLES: usize = 256;
const GRID: usize = 21;

struct Link {
    arc: usize,
    tail: usize,
    head: usize,
    cap: f64,
}

struct Layout {
    comp: Vec<usize>,
    members: Vec<Vec<usize>>,
    /// Passive arcs (plus open valves) per component.
    edges: Vec<Vec<usize>>,
    links: Vec<Link>,
    /// Links on a spanning forest of the component graph.
    tree: Vec<usize>,
    /// Links whose flow is a free parameter.
    free: Vec<usize>,
}

fn layout(p: &ValidationProblem, states: &[bool]) -> Layout {
    let net = &p.network;
    let n = net.node_count();
    let mut uf = UnionFind::new(n);
    let mut links = Vec::new();
    let mut passive = Vec::new();
    for (a, arc) in net.arcs().iter().enumerate() {
        let (v, w) = net.endpoints(a);
        match &arc.kind {
            ArcKind::Pipe { .. } | ArcKind::ShortPipe { .. } | ArcKind::Resistor { .. } => passive.push(a),
            ArcKind::Valve { .. } if states[a] => passive.push(a),
            ArcKind::Compressor(l) | ArcKind::ControlValve(l) if states[a] => {
                links.push(Link { arc: a, tail: v, head: w, cap: l.q_max })
            }
            _ => {}
        }
    }
    for &a in &passive {
        let (v, w) = net.endpoints(a);
        uf.union(v, w);
    }
    let mut label = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut comp = vec![0; n];
    for v in 0..n {
        let r = uf.find(v);
        if label[r] == usize::MAX {
            label[r] = members.len();
            members.push(Vec::new());
        }
        comp[v] = label[r];
        members[label[r]].push(v);
    }
    let mut edges = vec![Vec::new(); members.len()];
    for &a in &passive {
        edges[comp[net.endpoints(a).0]].push(a);
    }
    let mut cuf = UnionFind::new(members.len());
    let (mut tree, mut free) = (Vec::new(), Vec::new());
    for (k, l) in links.iter().enumerate() {
        if cuf.union(comp[l.tail], comp[l.head]) {
            tree.push(k);
        } else {
            free.push(k);
        }
    }
    Layout { comp, members, edges, links, tree, free }
}

/// Flows on tree links given per-component net demands (after free-link
/// adjustments). Errs with the imbalance of an unbalanced tree.
fn tree_flows(lay: &Layout, comp_demand: &[f64], tol: f64) -> Result<Vec<f64>, f64> {
    let k = lay.members.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
    for &t in &lay.tree {
        let l = &lay.links[t];
        let (a, b) = (lay.comp[l.tail], lay.comp[l.head]);
        adj[a].push((b, t));
        adj[b].push((a, t));
    }
    let mut flows = vec![0.0; lay.links.len()];
    let mut seen = vec![false; k];
    for root in 0..k {
        if seen[root] {
            continue;
        }
        // Iterative DFS order, then accumulate subtree sums bottom-up.
        let mut order = Vec::new();
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; k];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(c) = stack.pop() {
            order.push(c);
            for &(d, t) in &adj[c] {
                if !seen[d] {
                    seen[d] = true;
                    parent[d] = Some((c, t));
                    stack.push(d);
                }
            }
        }
        let mut sub = vec![0.0; k];
        for &c in order.iter().rev() {
            sub[c] += comp_demand[c];
            if let Some((par, t)) = parent[c] {
                sub[par] += sub[c];
                let l = &lay.links[t];
                // The child subtree must import exactly its net demand.
                flows[t] = if lay.comp[l.head] == c { sub[c] } else { -sub[c] };
            }
        }
        if sub[root].abs() > tol {
            return Err(sub[root].abs());
        }
    }
    Ok(flows)
}

pub(crate) fn check(
    p: &ValidationProblem,
    states: &[bool],
    directions: Option<&Directions>,
    deadline: Instant,
) -> LeafResult {
    let lay = layout(p, states);
    if lay.free.is_empty() {
        return evaluate(p, states, directions, &lay, &[]);
    }
    // Search the free link flows; failure here proves nothing.
    let caps: Vec<f64> = lay.free.iter().map(|&k| lay.links[k].cap).collect();
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    if caps.len() <= 2 {
        let steps: Vec<f64> = (0..GRID).map(|i| i as f64 / (GRID - 1) as f64).collect();
        if caps.len() == 1 {
            candidates.extend(steps.iter().map(|t| vec![t * caps[0]]));
        } else {
            for a in &steps {
                for b in &steps {
                    candidates.push(vec![a * caps[0], b * caps[1]]);
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..SAMPLES {
            candidates.push(caps.iter().map(|c| rng.gen_range(0.0..=*c)).collect());
        }
    }
    for f in candidates {
        if Instant::now() >= deadline {
            return LeafResult::TimedOut;
        }
        if let LeafResult::Feasible(s) = evaluate(p, states, directions, &lay, &f) {
            return LeafResult::Feasible(s);
        }
    }
    LeafResult::Unresolved
}

fn evaluate(
    p: &ValidationProblem,
    states: &[bool],
    directions: Option<&Directions>,
    lay: &Layout,
    free_flows: &[f64],
) -> LeafResult {
    let net = &p.network;
    let ps = net.potential_scale();
    let fs = net.flow_scale();
    let eps = p.eps_feas;
    let flow_tol = 0.1 * eps * fs;
    let k = lay.members.len();

    let mut link_flow = vec![0.0; lay.links.len()];
    let mut comp_demand = vec![0.0; k];
    for v in 0..net.node_count() {
        comp_demand[lay.comp[v]] += net.node(v).demand;
    }
    for (i, &f) in lay.free.iter().zip(free_flows) {
        let l = &lay.links[*i];
        link_flow[*i] = f;
        comp_demand[lay.comp[l.tail]] += f;
        comp_demand[lay.comp[l.head]] -= f;
    }
    let tf = match tree_flows(lay, &comp_demand, flow_tol) {
        Ok(t) => t,
        Err(r) => return LeafResult::Refuted(Block::FlowConserv, r / fs),
    };
    for &t in &lay.tree {
        link_flow[t] = tf[t];
    }
    for (i, l) in lay.links.iter().enumerate() {
        let f = link_flow[i];
        let over = (-f).max(f - l.cap);
        if over > flow_tol {
            return LeafResult::Refuted(Block::CompAndContValve, over / fs);
        }
        link_flow[i] = f.clamp(0.0, l.cap);
    }

    // Node demands seen by the passive part.
    let mut demand: Vec<f64> = net.nodes().iter().map(|n| n.demand).collect();
    for (i, l) in lay.links.iter().enumerate() {
        demand[l.tail] += link_flow[i];
        demand[l.head] -= link_flow[i];
    }

    let mut flows = vec![0.0; net.arc_count()];
    for (i, l) in lay.links.iter().enumerate() {
        flows[l.arc] = link_flow[i];
    }
    let mut pi_hat = vec![0.0; net.node_count()];
    for c in 0..k {
        let members = &lay.members[c];
        let local: std::collections::HashMap<usize, usize> =
            members.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut d: Vec<f64> = members.iter().map(|&v| demand[v]).collect();
        let imbalance: f64 = d.iter().sum();
        if imbalance.abs() > flow_tol {
            return LeafResult::Refuted(Block::FlowConserv, imbalance.abs() / fs);
        }
        if let Some(big) = (0..d.len()).max_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs())) {
            d[big] -= imbalance;
        }
        if lay.edges[c].is_empty() {
            continue;
        }
        let keys = members.iter().map(|&v| net.node(v).id.clone()).collect();
        let mut prob = ConvexFlowProblem::new(keys, d);
        for &a in &lay.edges[c] {
            let (v, w) = net.endpoints(a);
            let (alpha, cap) = p.coefficients[a];
            let (mut fwd, mut bwd) = (cap, cap);
            if let Some(dirs) = directions {
                match dirs.get(a).copied().flatten() {
                    Some(true) => bwd = 0.0,
                    Some(false) => fwd = 0.0,
                    None => {}
                }
            }
            prob.add_edge(FlowEdge { tail: local[&v], head: local[&w], alpha, forward: fwd, backward: bwd });
        }
        let sol = match solve_convex_flow(&prob) {
            Ok(s) => s,
            // Capacities bind on the passive arcs.
            Err(FlowError::Infeasible { deficit, .. }) => return LeafResult::Refuted(Block::Pipe, deficit / fs),
            Err(_) => return LeafResult::Unresolved,
        };
        for (i, &a) in lay.edges[c].iter().enumerate() {
            flows[a] = sol.flows[i];
        }
        // Passive flows on arcs with a loss are the same at every optimum, so
        // the drop equations are solvable iff they close around every cycle.
        let anchor = (0..members.len()).min_by(|&x, &y| net.node(members[x]).id.cmp(&net.node(members[y]).id));
        let gap = potentials_from_flows(&prob, &sol.flows, anchor.unwrap_or(0), &mut |i, v| pi_hat[members[i]] = v);
        if gap > 0.1 * eps * ps {
            return LeafResult::Refuted(Block::Pipe, gap / ps);
        }
    }

    // Offsets per component, in units of the potential scale.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let unit = |c: usize, s: f64| {
        let mut a = vec![0.0; k];
        a[c] = s;
        a
    };
    for v in 0..net.node_count() {
        let node = net.node(v);
        let c = lay.comp[v];
        let h = pi_hat[v] / ps;
        rows.push((unit(c, -1.0), h - node.pi_min / ps));
        if node.pi_max.is_finite() {
            rows.push((unit(c, 1.0), node.pi_max / ps - h));
        }
    }
    for l in &lay.links {
        let lim = net.arc(l.arc).active_limits().expect("link is active");
        let (cv, cw) = (lay.comp[l.tail], lay.comp[l.head]);
        let (hv, hw) = (pi_hat[l.tail] / ps, pi_hat[l.head] / ps);
        // kappa_min (hv + ov) <= hw + ow
        let mut a = vec![0.0; k];
        a[cv] += lim.kappa_min;
        a[cw] -= 1.0;
        rows.push((a, hw - lim.kappa_min * hv));
        // hw + ow <= kappa_max (hv + ov)
        let mut a = vec![0.0; k];
        a[cw] += 1.0;
        a[cv] -= lim.kappa_max;
        rows.push((a, lim.kappa_max * hv - hw));
        if let Some(lo) = lim.pi_min_on {
            rows.push((unit(cv, -1.0), hv - lo / ps));
        }
        if let Some(hi) = lim.pi_max_on {
            rows.push((unit(cw, 1.0), hi / ps - hw));
        }
    }
    rows.retain(|(a, b)| a.iter().any(|v| *v != 0.0) || *b < 0.0);
    let offs = match offsets::solve(k, rows, 0.1 * eps) {
        OffsetResult::Feasible(o) => o,
        OffsetResult::Infeasible(r) => return LeafResult::Refuted(Block::Bound, r),
        OffsetResult::TooLarge => return LeafResult::Unresolved,
    };
    let pi: Vec<f64> = (0..net.node_count()).map(|v| pi_hat[v] + offs[lay.comp[v]] * ps).collect();

    let mut assignment = DesignAssignment { diameters: p.assignment.diameters.clone(), states: Default::default() };
    for a in net.active_arcs() {
        assignment.states.insert(net.arc(a).id.clone(), states[a]);
    }
    let sol = FlowSolution { assignment, flows, pi };
    match residual_report(&sol, net) {
        Ok(r) if r.max() <= eps => LeafResult::Feasible(sol),
        // Numerical trouble is not a proof of infeasibility.
        _ => LeafResult::Unresolved,
    }
}

/// Sets potentials along a BFS tree from `root` using `pi_tail - pi_head =
/// phi(q)`, and returns the largest mismatch on the remaining edges.
fn potentials_from_flows(
    prob: &ConvexFlowProblem,
    flows: &[f64],
    root: usize,
    set: &mut impl FnMut(usize, f64),
) -> f64 {
    let n = prob.node_count();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, e) in prob.edges.iter().enumerate() {
        adj[e.tail].push(k);
        adj[e.head].push(k);
    }
    let mut pi = vec![f64::NAN; n];
    pi[root] = 0.0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &k in &adj[v] {
            let e = &prob.edges[k];
            let drop = phi(e.alpha, flows[k]);
            let (other, val) = if e.tail == v { (e.head, pi[v] - drop) } else { (e.tail, pi[v] + drop) };
            if pi[other].is_nan() {
                pi[other] = val;
                queue.push_back(other);
            }
        }
    }
    let mut gap = 0.0f64;
    for (k, e) in prob.edges.iter().enumerate() {
        gap = gap.max((pi[e.tail] - pi[e.head] - phi(e.alpha, flows[k])).abs());
    }
    for (v, p) in pi.into_iter().enumerate() {
        set(v, if p.is_nan() { 0.0 } else { p });
    }
    gap
}
