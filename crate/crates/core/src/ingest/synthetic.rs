//! Random instances with a feasibility witness built in.
//!
//! Nodes are split into zones. Each zone is a passive subnetwork (random
//! spanning tree plus chords); zones are joined in a tree by compressors and
//! control valves oriented along the flow they must carry. The witness uses
//! the largest diameter everywhere with every active arc on. Its flows come
//! from the convex flow program per zone, its potentials from zone offsets
//! chained through feasible compression ratios, and the node bounds are set
//! around those potentials with a margin.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{expand_diameters, DEFAULT_MULTIPLIERS};
use crate::cvxflow::{solve_convex_flow, ConvexFlowProblem, FlowEdge};
use crate::error::{Error, Result};
use crate::model::{ActiveLimits, Arc, ArcKind, DesignAssignment, Instance, Network, Node, Nomination, PhysicsConstants};

/// Counts of each component kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMix {
    pub pipes: usize,
    pub short_pipes: usize,
    pub resistors: usize,
    pub compressors: usize,
    pub control_valves: usize,
    pub valves: usize,
    /// Width of the potential boxes around the witness, relative to the
    /// largest pressure-loss spread. Small values make tight instances.
    pub slack: f64,
    pub multipliers: Vec<f64>,
}

impl Default for ComponentMix {
    fn default() -> Self {
        ComponentMix {
            pipes: 1,
            short_pipes: 0,
            resistors: 0,
            compressors: 0,
            control_valves: 0,
            valves: 0,
            slack: 0.5,
            multipliers: DEFAULT_MULTIPLIERS.to_vec(),
        }
    }
}

impl ComponentMix {
    pub fn pipes(n: usize) -> Self {
        ComponentMix { pipes: n, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub network: Network,
    pub nomination: Nomination,
    pub witness: DesignAssignment,
    pub physics: PhysicsConstants,
}

impl Synthetic {
    pub fn into_instance(self, seed: u64, multipliers: &[f64]) -> Result<Instance> {
        let mut inst = Instance::new(self.network.name().to_string(), self.network, self.nomination)?;
        inst.seed = Some(seed);
        inst.diameter_multipliers = multipliers.to_vec();
        inst.witness = Some(self.witness);
        Ok(inst)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Passive {
    Pipe,
    Short,
    Resistor,
}

const REF_DIAMETER: f64 = 600.0;
const REF_LENGTH: f64 = 10_000.0;
const BASE_DIAMETERS: [f64; 5] = [400.0, 500.0, 600.0, 700.0, 800.0];

pub fn generate_synthetic(seed: u64, n_nodes: usize, mix: &ComponentMix) -> Result<Synthetic> {
    if n_nodes < 2 {
        return Err(Error::invalid("a synthetic network needs at least two nodes"));
    }
    if mix.pipes == 0 {
        return Err(Error::invalid("component mix needs at least one pipe"));
    }
    if !(mix.slack > 0.0) {
        return Err(Error::invalid("slack must be positive"));
    }
    let zones = mix.compressors + mix.control_valves + 1;
    if zones > n_nodes {
        return Err(Error::invalid(format!("{} active links need at least {zones} nodes", zones - 1)));
    }
    let tree_arcs = n_nodes - zones;
    let pool = mix.pipes + mix.short_pipes + mix.resistors;
    if pool < tree_arcs {
        return Err(Error::invalid(format!("{pool} passive arcs cannot span {n_nodes} nodes in {zones} zones")));
    }
    let chords = pool - tree_arcs + mix.valves;
    if chords > 0 && tree_arcs == 0 {
        return Err(Error::invalid("extra passive arcs or valves need a zone with two nodes"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n_nodes).map(|i| format!("n{i:02}")).collect();

    // Zone sizes: one node each, the rest spread at random.
    let mut zone_of = Vec::with_capacity(n_nodes);
    let mut sizes = vec![1usize; zones];
    for _ in zones..n_nodes {
        sizes[rng.gen_range(0..zones)] += 1;
    }
    for (z, &s) in sizes.iter().enumerate() {
        zone_of.extend(std::iter::repeat(z).take(s));
    }
    let members: Vec<Vec<usize>> = (0..zones).map(|z| (0..n_nodes).filter(|&v| zone_of[v] == z).collect()).collect();

    // Demands: integer, balanced, at least one source and one sink.
    let mut demand = vec![0.0; n_nodes];
    let mut sources = vec![0usize];
    for v in 1..n_nodes {
        let roll: f64 = rng.gen();
        if v == 1 || roll < 0.5 {
            demand[v] = rng.gen_range(1..=6) as f64;
        } else if roll < 0.8 {
            sources.push(v);
        }
    }
    let total: i64 = demand.iter().map(|d| *d as i64).sum();
    let mut share = vec![0i64; sources.len()];
    for _ in 0..total {
        share[rng.gen_range(0..sources.len())] += 1;
    }
    for (&s, &k) in sources.iter().zip(&share) {
        demand[s] = -(k as f64);
    }

    let c_alpha = REF_DIAMETER.powi(5) / REF_LENGTH;
    let supply: f64 = demand.iter().filter(|d| **d > 0.0).sum();
    let big_cap = 2.0 * supply + 1.0;

    let mut kinds: Vec<Passive> = std::iter::repeat(Passive::Pipe)
        .take(mix.pipes)
        .chain(std::iter::repeat(Passive::Short).take(mix.short_pipes))
        .chain(std::iter::repeat(Passive::Resistor).take(mix.resistors))
        .collect();
    // Keep at least one pipe in the tree so the design has a real choice
    // wherever possible.
    kinds.shuffle(&mut rng);
    if tree_arcs > 0 {
        if let Some(i) = kinds.iter().position(|k| *k == Passive::Pipe) {
            kinds.swap(0, i);
        }
    }

    let mut arcs: Vec<Arc> = Vec::new();
    let mut counter = [0usize; 6];
    let mut next_id = |slot: usize, prefix: &str| {
        let id = format!("{prefix}{}", counter[slot]);
        counter[slot] += 1;
        id
    };
    let mut make_passive = |rng: &mut ChaCha8Rng, kind: Passive, a: usize, b: usize, arcs: &mut Vec<Arc>| {
        let (from, to) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        let (id, k) = match kind {
            Passive::Pipe => {
                let length = rng.gen_range(2_000.0..20_000.0f64).round();
                let diameter = *BASE_DIAMETERS.choose(rng).unwrap();
                (next_id(0, "p"), ArcKind::Pipe { length, diameter: Some(diameter), candidates: Vec::new() })
            }
            Passive::Short => (next_id(1, "s"), ArcKind::ShortPipe { q_max: big_cap }),
            Passive::Resistor => {
                let alpha = (rng.gen_range(0.5..2.0f64) * 1000.0).round() / 1000.0;
                (next_id(2, "r"), ArcKind::Resistor { alpha, q_max: big_cap })
            }
        };
        arcs.push(Arc::new(id, ids[from].clone(), ids[to].clone(), k));
    };

    let mut kind_iter = kinds.into_iter();
    for m in &members {
        for i in 1..m.len() {
            let parent = m[rng.gen_range(0..i)];
            make_passive(&mut rng, kind_iter.next().unwrap(), parent, m[i], &mut arcs);
        }
    }
    let multi: Vec<usize> = (0..zones).filter(|&z| members[z].len() >= 2).collect();
    let pick_pair = |rng: &mut ChaCha8Rng| {
        let z = multi[rng.gen_range(0..multi.len())];
        let m = &members[z];
        let i = rng.gen_range(0..m.len());
        let mut j = rng.gen_range(0..m.len() - 1);
        if j >= i {
            j += 1;
        }
        (m[i], m[j])
    };
    for kind in kind_iter {
        let (a, b) = pick_pair(&mut rng);
        make_passive(&mut rng, kind, a, b, &mut arcs);
    }
    for _ in 0..mix.valves {
        let (a, b) = pick_pair(&mut rng);
        let id = next_id(3, "v");
        arcs.push(Arc::new(id, ids[a].clone(), ids[b].clone(), ArcKind::Valve { q_max: big_cap }));
    }

    // Zone tree: zone z > 0 hangs off a random earlier zone.
    let mut link_kinds: Vec<bool> =
        std::iter::repeat(true).take(mix.compressors).chain(std::iter::repeat(false).take(mix.control_valves)).collect();
    link_kinds.shuffle(&mut rng);
    struct Link {
        parent_zone: usize,
        child_zone: usize,
        parent_node: usize,
        child_node: usize,
        compressor: bool,
    }
    let mut links = Vec::new();
    for z in 1..zones {
        let p = rng.gen_range(0..z);
        let parent_node = *members[p].choose(&mut rng).unwrap();
        let child_node = *members[z].choose(&mut rng).unwrap();
        links.push(Link { parent_zone: p, child_zone: z, parent_node, child_node, compressor: link_kinds[z - 1] });
    }
    // Net demand of each zone's subtree; zones are numbered so children
    // come after parents.
    let mut subtree: Vec<f64> = members.iter().map(|m| m.iter().map(|&v| demand[v]).sum()).collect();
    for l in links.iter().rev() {
        subtree[l.parent_zone] += subtree[l.child_zone];
    }
    // Each link as (tail, head, flow >= 0, ratio). Flow into the child zone
    // equals its subtree demand.
    let mut zone_demand = demand.clone();
    let mut oriented = Vec::new();
    for l in &links {
        let f = subtree[l.child_zone];
        let (tail, head, flow) =
            if f >= 0.0 { (l.parent_node, l.child_node, f) } else { (l.child_node, l.parent_node, -f) };
        zone_demand[tail] += flow;
        zone_demand[head] -= flow;
        let limits = if l.compressor {
            let kappa_max = (rng.gen_range(1.2..2.0f64) * 100.0).round() / 100.0;
            ActiveLimits { kappa_min: 1.0, kappa_max, q_max: big_cap, pi_min_on: None, pi_max_on: None }
        } else {
            let kappa_min = (rng.gen_range(0.3..0.6f64) * 100.0).round() / 100.0;
            let kappa_max = (rng.gen_range(0.75..1.0f64) * 100.0).round() / 100.0;
            ActiveLimits { kappa_min, kappa_max, q_max: big_cap, pi_min_on: None, pi_max_on: None }
        };
        let u = rng.gen_range(0.3..0.7);
        let ratio = limits.kappa_min + u * (limits.kappa_max - limits.kappa_min);
        let kind = if l.compressor { ArcKind::Compressor(limits) } else { ArcKind::ControlValve(limits) };
        let id = if l.compressor { next_id(4, "c") } else { next_id(5, "cv") };
        arcs.push(Arc::new(id, ids[tail].clone(), ids[head].clone(), kind));
        oriented.push((tail, head, ratio, l.child_zone, l.parent_node == tail));
    }

    // Expand diameters with a provisional flow cap, find witness flows,
    // then fix c_q so the largest candidate carries them with room.
    let nodes: Vec<Node> = (0..n_nodes).map(|v| Node::new(ids[v].clone(), demand[v], 0.0, f64::INFINITY)).collect();
    let name = format!("synth-{seed}-{n_nodes}");
    let provisional = Network::new(name.clone(), nodes, arcs.clone())?;
    let phys = PhysicsConstants { c_alpha, c_q: 1.0 };
    let expanded = expand_diameters(&provisional, &mix.multipliers, &phys)?;
    let witness = DesignAssignment::largest_all_on(&expanded);

    let mut prob = ConvexFlowProblem::new(ids.clone(), zone_demand);
    let mut edge_arc = Vec::new();
    for (a, arc) in expanded.arcs().iter().enumerate() {
        let (v, w) = expanded.endpoints(a);
        let alpha = match &arc.kind {
            ArcKind::Pipe { candidates, .. } => candidates.last().unwrap().alpha,
            ArcKind::Resistor { alpha, .. } => *alpha,
            ArcKind::ShortPipe { .. } | ArcKind::Valve { .. } => 0.0,
            _ => continue,
        };
        prob.add_edge(FlowEdge::symmetric(v, w, alpha, 1e3 * big_cap));
        edge_arc.push(a);
    }
    let sol = solve_convex_flow(&prob).map_err(|e| Error::invariant(format!("witness flow failed: {e:?}")))?;
    let lambda = &sol.certificate.lambda;

    let mut need_cq: f64 = 0.0;
    for (k, &a) in edge_arc.iter().enumerate() {
        if let ArcKind::Pipe { candidates, .. } = &expanded.arc(a).kind {
            let d = candidates.last().unwrap().diameter;
            need_cq = need_cq.max(sol.flows[k].abs() / (std::f64::consts::PI * d * d / 4.0));
        }
    }
    let c_q = if need_cq > 0.0 { 1.25 * need_cq } else { 1.25 * supply.max(1.0) / (std::f64::consts::PI * 1e4) };
    let phys = PhysicsConstants { c_alpha, c_q };

    // Potentials as affine functions a + b * o of the root zone offset o.
    let mut offset: Vec<Option<(f64, f64)>> = vec![None; zones];
    offset[0] = Some((0.0, 1.0));
    for &(tail, head, ratio, child, parent_is_tail) in &oriented {
        let (pa, pb) = offset[zone_of[if parent_is_tail { tail } else { head }]].expect("parents first");
        let (ca, cb) = if parent_is_tail {
            // pi_head = ratio * pi_tail
            let (ta, tb) = (lambda[tail] + pa, pb);
            (ratio * ta - lambda[head], ratio * tb)
        } else {
            // pi_tail = pi_head / ratio
            let (ha, hb) = (lambda[head] + pa, pb);
            (ha / ratio - lambda[tail], hb / ratio)
        };
        offset[child] = Some((ca, cb));
    }
    let spread = members
        .iter()
        .map(|m| {
            let (lo, hi) = m.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(lambda[v]), h.max(lambda[v])));
            hi - lo
        })
        .fold(0.0f64, f64::max)
        .max(1.0);
    let floor = 100.0f64.max(2.0 * spread);
    let root = (0..n_nodes)
        .map(|v| {
            let (a, b) = offset[zone_of[v]].unwrap();
            (floor - lambda[v] - a) / b
        })
        .fold(0.0f64, f64::max);
    let pi: Vec<f64> = (0..n_nodes)
        .map(|v| {
            let (a, b) = offset[zone_of[v]].unwrap();
            lambda[v] + a + b * root
        })
        .collect();

    let margin = mix.slack * spread;
    let nodes: Vec<Node> = (0..n_nodes)
        .map(|v| {
            let lo = (pi[v] - margin * rng.gen_range(0.2..1.0)).max(0.0);
            let hi = pi[v] + margin * rng.gen_range(0.2..1.0);
            Node::new(ids[v].clone(), demand[v], round_down(lo), round_up(hi))
        })
        .collect();
    let network = Network::new(name.clone(), nodes, arcs)?;
    let network = expand_diameters(&network, &mix.multipliers, &phys)?;
    let mut nomination = Nomination::from_network(&network);
    nomination.name = format!("{name}-nom");
    Ok(Synthetic { network, nomination, witness, physics: phys })
}

fn round_down(x: f64) -> f64 {
    (x * 1e3).floor() / 1e3
}

fn round_up(x: f64) -> f64 {
    (x * 1e3).ceil() / 1e3
}
