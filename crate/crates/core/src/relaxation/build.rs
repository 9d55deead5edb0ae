//! Instantiates the conic program of one branch-and-bound node.
//!
//! Fixed binaries are substituted as constants, so a choice fixed off loses
//! its variables entirely and a denominator is never pinned at zero.
//! Single-variable rows become bound tightenings.

use super::{MisocBinary, MisocModel, Role, PERSPECTIVE_SHIFT};
use crate::convex::{ConstraintAtom, ConstraintRow, Program};
use crate::cvxflow::UnionFind;
use crate::model::ArcKind;

/// Affine expression `terms . x + c`.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Lin {
    pub terms: Vec<(usize, f64)>,
    pub c: f64,
}

impl Lin {
    pub fn konst(c: f64) -> Self {
        Lin { terms: Vec::new(), c }
    }

    pub fn var(j: usize) -> Self {
        Lin { terms: vec![(j, 1.0)], c: 0.0 }
    }

    /// `self + k * other`
    pub fn plus(mut self, other: &Lin, k: f64) -> Self {
        if k == 0.0 {
            return self;
        }
        for &(j, a) in &other.terms {
            match self.terms.iter_mut().find(|t| t.0 == j) {
                Some(t) => t.1 += k * a,
                None => self.terms.push((j, k * a)),
            }
        }
        self.terms.retain(|t| t.1 != 0.0);
        self.c += k * other.c;
        self
    }

    pub fn shift(mut self, c: f64) -> Self {
        self.c += c;
        self
    }

    pub fn constant(&self) -> Option<f64> {
        self.terms.is_empty().then_some(self.c)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.c + self.terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
    }
}

/// Node program with the role of every variable.
#[derive(Debug, Clone)]
pub struct NodeProgram {
    pub program: Program,
    pub roles: Vec<Role>,
    /// Cost of the diameter binaries fixed to one.
    pub offset: f64,
    /// A constant row failed: the node admits no point.
    pub infeasible: bool,
    pub(crate) binaries: Vec<Lin>,
    pub(crate) flows: Vec<Lin>,
    pub(crate) potentials: Vec<usize>,
}

impl NodeProgram {
    /// Largest constraint violation at `x`, each row relative to the
    /// magnitude of its terms.
    pub fn scaled_violation(&self, x: &[f64]) -> f64 {
        let p = &self.program;
        let mut worst: f64 = 0.0;
        for r in &p.equalities {
            let lhs: f64 = r.terms.iter().map(|&(j, a)| a * x[j]).sum();
            let mag: f64 = r.terms.iter().map(|&(j, a)| (a * x[j]).abs()).sum::<f64>().max(r.rhs.abs()).max(1.0);
            worst = worst.max((lhs - r.rhs).abs() / mag);
        }
        for r in &p.inequalities {
            let lhs = crate::convex::constraint_value(r, x);
            let mut mag: f64 = r.terms.iter().map(|&(j, a)| (a * x[j]).abs()).sum::<f64>();
            mag += r.atoms.iter().map(|a| crate::convex::atom_constraint_value(a, x).abs()).sum::<f64>();
            worst = worst.max((lhs - r.rhs) / mag.max(r.rhs.abs()).max(1.0));
        }
        for j in 0..x.len() {
            let lo = (p.lower[j] - x[j]) / p.lower[j].abs().max(1.0);
            let hi = (x[j] - p.upper[j]) / p.upper[j].abs().max(1.0);
            worst = worst.max(lo).max(hi);
        }
        worst.max(0.0)
    }
}

struct Builder {
    p: Program,
    roles: Vec<Role>,
    infeasible: bool,
}

const CONST_TOL: f64 = 1e-9;

impl Builder {
    fn var(&mut self, lower: f64, upper: f64, role: Role) -> usize {
        self.roles.push(role);
        self.p.add_var(lower, upper)
    }

    /// `lin <= rhs`
    fn le(&mut self, lin: Lin, rhs: f64) {
        let rhs = rhs - lin.c;
        match lin.terms.as_slice() {
            [] => {
                if rhs < -CONST_TOL * rhs.abs().max(1.0) {
                    self.infeasible = true;
                }
            }
            &[(j, a)] => {
                let v = rhs / a;
                if a > 0.0 {
                    self.p.upper[j] = self.p.upper[j].min(v);
                } else {
                    self.p.lower[j] = self.p.lower[j].max(v);
                }
                let (lo, hi) = (self.p.lower[j], self.p.upper[j]);
                if lo > hi {
                    if lo - hi <= CONST_TOL * lo.abs().max(1.0) {
                        self.p.upper[j] = lo;
                    } else {
                        self.infeasible = true;
                    }
                }
            }
            _ => self.p.add_inequality(lin.terms, rhs),
        }
    }

    /// `lin = rhs`
    fn eq(&mut self, lin: Lin, rhs: f64) {
        let rhs = rhs - lin.c;
        if lin.terms.is_empty() {
            if rhs.abs() > CONST_TOL * rhs.abs().max(1.0) {
                self.infeasible = true;
            }
        } else {
            self.p.add_equality(lin.terms, rhs);
        }
    }

    /// `lin <= big_m * (1 - y)`: enforced when `y = 1`, relaxed by `big_m`
    /// otherwise. An infinite `big_m` drops the row unless `y` is fixed on.
    fn when_on(&mut self, lin: Lin, big_m: f64, y: &Lin) {
        match y.constant() {
            Some(c) if c >= 0.5 => self.le(lin, 0.0),
            Some(_) => {}
            None if big_m.is_finite() => self.le(lin.plus(y, big_m), big_m),
            None => {}
        }
    }

    /// Standard envelope of `gamma = s * delta` for `s in [-1, 1]`,
    /// `delta in [lo, hi]` with `lo <= 0 <= hi`; rows with an infinite
    /// corner are dropped.
    fn mccormick(&mut self, gamma: usize, s: &Lin, delta: &Lin, lo: f64, hi: f64) {
        let g = Lin::var(gamma);
        let s_plus = s.clone().shift(1.0);
        let s_minus = s.clone().shift(-1.0);
        if lo.is_finite() {
            // gamma >= -delta + lo (s + 1)
            self.le(Lin::default().plus(&g, -1.0).plus(delta, -1.0).plus(&s_plus, lo), 0.0);
            // gamma <= delta + lo (s - 1)
            self.le(g.clone().plus(delta, -1.0).plus(&s_minus, -lo), 0.0);
        }
        if hi.is_finite() {
            // gamma >= delta + hi (s - 1)
            self.le(Lin::default().plus(&g, -1.0).plus(delta, 1.0).plus(&s_minus, hi), 0.0);
            // gamma <= -delta + hi (s + 1)
            self.le(g.plus(delta, 1.0).plus(&s_plus, -hi), 0.0);
        }
    }

    /// `coef * q^2 / denom <= gamma`, or `coef * q^2 <= gamma` without a
    /// denominator.
    fn cone(&mut self, q: usize, coef: f64, denom: Option<usize>, gamma: usize) {
        let atom = match denom {
            Some(z) => ConstraintAtom::QuadOverLinear { var: q, z, coef },
            None => ConstraintAtom::Square { var: q, coef },
        };
        self.p.add_constraint(ConstraintRow { terms: vec![(gamma, -1.0)], atoms: vec![atom], rhs: 0.0 });
    }
}

pub(crate) fn build(model: &MisocModel, fix: &[Option<bool>]) -> NodeProgram {
    let net = &model.network;
    let mut b = Builder { p: Program::new(), roles: Vec::new(), infeasible: false };
    let mut offset = 0.0;

    let mut fix = fix.to_vec();
    if !model.propagate_fix(&mut fix) {
        b.infeasible = true;
    }
    let bins: Vec<Lin> = fix
        .iter()
        .enumerate()
        .map(|(j, f)| match f {
            Some(v) => Lin::konst(*v as u8 as f64),
            None => Lin::var(b.var(0.0, 1.0, Role::Binary(j))),
        })
        .collect();
    for (j, bin) in model.binaries.iter().enumerate() {
        if let MisocBinary::Diameter { arc, choice } = *bin {
            let cost = net.arc(arc).candidates()[choice].cost;
            match &bins[j].terms[..] {
                [] => offset += cost * bins[j].c,
                &[(z, _)] => b.p.cost[z] += cost,
                _ => unreachable!(),
            }
        }
    }

    let boxes = &model.boxes;
    let potentials: Vec<usize> =
        (0..net.node_count()).map(|v| b.var(boxes[v].0, boxes[v].1, Role::Potential { node: v })).collect();
    let pi = |v: usize| Lin::var(potentials[v]);
    let mut flows: Vec<Lin> = vec![Lin::default(); net.arc_count()];

    for (a, arc) in net.arcs().iter().enumerate() {
        let (v, w) = net.endpoints(a);
        let (lo_v, hi_v) = boxes[v];
        let (lo_w, hi_w) = boxes[w];
        let drop_lo = (lo_v - hi_w).min(0.0);
        let drop_hi = (hi_v - lo_w).max(0.0);
        let gamma_hi = drop_hi.max(-drop_lo);
        match &arc.kind {
            ArcKind::Pipe { candidates, .. } => {
                let xp = &bins[model.direction_index[a].expect("pipes carry a direction")];
                let xm = Lin::konst(1.0).plus(xp, -1.0);
                let s = xp.clone().plus(xp, 1.0).shift(-1.0);
                let group = &model.diameter_index[a];
                let sum_z = group.iter().fold(Lin::default(), |acc, &j| acc.plus(&bins[j], 1.0));
                b.eq(sum_z, 1.0);
                let split = group.iter().all(|&j| bins[j].constant() != Some(1.0));
                let mut pv_sum = Lin::default();
                let mut pw_sum = Lin::default();
                let mut total = Lin::default();
                for (i, c) in candidates.iter().enumerate() {
                    let z = &bins[group[i]];
                    if z.constant() == Some(0.0) {
                        continue;
                    }
                    let q = b.var(-c.q_max, c.q_max, Role::Flow { arc: a, choice: Some(i) });
                    let ql = Lin::var(q);
                    if z.constant().is_none() {
                        b.le(ql.clone().plus(z, -c.q_max), 0.0);
                        b.le(Lin::default().plus(&ql, -1.0).plus(z, -c.q_max), 0.0);
                    }
                    b.le(ql.clone().plus(xp, -c.q_max), 0.0);
                    b.le(Lin::default().plus(&ql, -1.0).plus(&xm, -c.q_max), 0.0);
                    let (pv, pw) = if split {
                        let mut end = |node: usize, (lo, hi): (f64, f64)| {
                            let x = b.var(lo.min(0.0), hi.max(0.0), Role::ChoicePotential { arc: a, choice: i, node });
                            let xl = Lin::var(x);
                            if hi.is_finite() {
                                b.le(xl.clone().plus(z, -hi), 0.0);
                            }
                            b.le(Lin::default().plus(&xl, -1.0).plus(z, lo), 0.0);
                            xl
                        };
                        let pv = end(v, (lo_v, hi_v));
                        let pw = end(w, (lo_w, hi_w));
                        pv_sum = pv_sum.plus(&pv, 1.0);
                        pw_sum = pw_sum.plus(&pw, 1.0);
                        (pv, pw)
                    } else {
                        (pi(v), pi(w))
                    };
                    let delta = pv.plus(&pw, -1.0);
                    let gamma = b.var(0.0, gamma_hi, Role::Gamma { arc: a, choice: Some(i) });
                    b.mccormick(gamma, &s, &delta, drop_lo, drop_hi);
                    if c.alpha > 0.0 {
                        let denom = match (&z.terms[..], model.perspective) {
                            (&[(zj, _)], true) => {
                                let e = PERSPECTIVE_SHIFT;
                                let d = b.var(0.5 * e, 2.0, Role::Denominator { arc: a, choice: i });
                                b.eq(Lin::var(d).plus(&Lin::var(zj), -(1.0 - e)), e);
                                Some(d)
                            }
                            _ => None,
                        };
                        b.cone(q, c.alpha, denom, gamma);
                    }
                    total = total.plus(&ql, 1.0);
                }
                if split {
                    b.eq(pv_sum.plus(&pi(v), -1.0), 0.0);
                    b.eq(pw_sum.plus(&pi(w), -1.0), 0.0);
                }
                flows[a] = total;
            }
            ArcKind::Resistor { alpha, q_max } => {
                let xp = &bins[model.direction_index[a].expect("resistors carry a direction")];
                let xm = Lin::konst(1.0).plus(xp, -1.0);
                let s = xp.clone().plus(xp, 1.0).shift(-1.0);
                let q = b.var(-q_max, *q_max, Role::Flow { arc: a, choice: None });
                let ql = Lin::var(q);
                b.le(ql.clone().plus(xp, -q_max), 0.0);
                b.le(Lin::default().plus(&ql, -1.0).plus(&xm, -q_max), 0.0);
                let gamma = b.var(0.0, gamma_hi, Role::Gamma { arc: a, choice: None });
                b.mccormick(gamma, &s, &pi(v).plus(&pi(w), -1.0), drop_lo, drop_hi);
                if *alpha > 0.0 {
                    b.cone(q, *alpha, None, gamma);
                }
                flows[a] = ql;
            }
            ArcKind::ShortPipe { q_max } => {
                let q = b.var(-q_max, *q_max, Role::Flow { arc: a, choice: None });
                b.eq(pi(v).plus(&pi(w), -1.0), 0.0);
                flows[a] = Lin::var(q);
            }
            ArcKind::Valve { q_max } => {
                let y = &bins[model.state_index[a].expect("valves carry a state")];
                if y.constant() != Some(0.0) {
                    let q = Lin::var(b.var(-q_max, *q_max, Role::Flow { arc: a, choice: None }));
                    b.le(q.clone().plus(y, -q_max), 0.0);
                    b.le(Lin::default().plus(&q, -1.0).plus(y, -q_max), 0.0);
                    flows[a] = q;
                }
                b.when_on(pi(v).plus(&pi(w), -1.0), (hi_v - lo_w).max(0.0), y);
                b.when_on(pi(w).plus(&pi(v), -1.0), (hi_w - lo_v).max(0.0), y);
            }
            ArcKind::Compressor(l) | ArcKind::ControlValve(l) => {
                let y = &bins[model.state_index[a].expect("active arcs carry a state")];
                if y.constant() != Some(0.0) {
                    let q = Lin::var(b.var(0.0, l.q_max, Role::Flow { arc: a, choice: None }));
                    b.le(q.clone().plus(y, -l.q_max), 0.0);
                    flows[a] = q;
                }
                let m = (l.kappa_min * hi_v - lo_w).max(0.0);
                b.when_on(Lin::default().plus(&pi(v), l.kappa_min).plus(&pi(w), -1.0), m, y);
                let m = (hi_w - l.kappa_max * lo_v).max(0.0);
                b.when_on(pi(w).plus(&pi(v), -l.kappa_max), m, y);
                if let Some(lo) = l.pi_min_on {
                    b.when_on(Lin::konst(lo).plus(&pi(v), -1.0), (lo - lo_v).max(0.0), y);
                }
                if let Some(hi) = l.pi_max_on {
                    b.when_on(pi(w).shift(-hi), (hi_w - hi).max(0.0), y);
                }
            }
        }
    }

    // Conservation, dropping one row per component of flow-carrying arcs.
    let mut uf = UnionFind::new(net.node_count());
    for a in 0..net.arc_count() {
        if !flows[a].terms.is_empty() {
            let (v, w) = net.endpoints(a);
            uf.union(v, w);
        }
    }
    let demand = net.demands();
    let mut comp = vec![0.0; net.node_count()];
    for (v, d) in demand.iter().enumerate() {
        comp[uf.find(v)] += d;
    }
    if comp.iter().any(|s| s.abs() > 1e-9 * net.flow_scale()) {
        b.infeasible = true;
    }
    let mut rows = vec![Lin::default(); net.node_count()];
    for (a, f) in flows.iter().enumerate() {
        let (v, w) = net.endpoints(a);
        rows[w] = std::mem::take(&mut rows[w]).plus(f, 1.0);
        rows[v] = std::mem::take(&mut rows[v]).plus(f, -1.0);
    }
    let mut seen = vec![false; net.node_count()];
    for (v, row) in rows.into_iter().enumerate() {
        let r = uf.find(v);
        if !seen[r] {
            seen[r] = true;
            continue;
        }
        b.eq(row, demand[v]);
    }

    NodeProgram { program: b.p, roles: b.roles, offset, infeasible: b.infeasible, binaries: bins, flows, potentials }
}
