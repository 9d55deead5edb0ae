use nalgebra::{DMatrix, DVector};

use super::{
    atom_objective_value, constraint_value, ConstraintAtom, ConstraintRow, ObjectiveAtom, Program, Settings, Solution,
    Status,
};

/// Solves `program`. Never panics on numerical trouble; reports `Failed`.
pub fn solve(program: &Program, settings: &Settings) -> Solution {
    let n = program.var_count();
    for j in 0..n {
        if program.lower[j] > program.upper[j] {
            return trivial(program, Status::Infeasible);
        }
    }
    let scaled = Scaled::new(program);
    let core = interior_point(&scaled.program, settings);
    let mut status = core.status;
    let mut phase_one_value = None;
    if status != Status::Optimal && settings.phase_one {
        let v = phase_one(&scaled.program, settings);
        phase_one_value = v;
        if let Some(v) = v {
            if v > settings.infeasibility_threshold {
                status = Status::Infeasible;
            }
        }
    }
    let mut sol = scaled.unscale(program, core);
    sol.status = status;
    sol.phase_one_value = phase_one_value;
    sol
}

fn trivial(program: &Program, status: Status) -> Solution {
    let n = program.var_count();
    Solution {
        status,
        x: vec![0.0; n],
        objective: f64::NAN,
        eq_duals: vec![0.0; program.equalities.len()],
        ineq_duals: vec![0.0; program.inequalities.len()],
        lower_duals: vec![0.0; n],
        upper_duals: vec![0.0; n],
        iterations: 0,
        phase_one_value: None,
    }
}

/// Row- and objective-normalized copy of a program. Variables whose box is a
/// single point become widened free variables pinned by an extra equality.
struct Scaled {
    program: Program,
    eq_scale: Vec<f64>,
    ineq_scale: Vec<f64>,
    obj_scale: f64,
    pinned: Vec<usize>,
}

impl Scaled {
    fn new(p: &Program) -> Self {
        let mut q = p.clone();
        let mut pinned = Vec::new();
        for j in 0..q.var_count() {
            if q.lower[j] == q.upper[j] {
                let v = q.lower[j];
                let w = v.abs().max(1.0);
                q.lower[j] = v - w;
                q.upper[j] = v + w;
                pinned.push(j);
            }
        }
        let mut eq_scale = Vec::with_capacity(q.equalities.len());
        for r in &mut q.equalities {
            let s = r.terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
            let s = if s > 0.0 { s } else { 1.0 };
            for t in &mut r.terms {
                t.1 /= s;
            }
            r.rhs /= s;
            eq_scale.push(s);
        }
        for &j in &pinned {
            q.equalities.push(super::Row::new(vec![(j, 1.0)], p.lower[j]));
        }
        let mut ineq_scale = Vec::with_capacity(q.inequalities.len());
        for r in &mut q.inequalities {
            let mut s = r.terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
            for a in &r.atoms {
                s = s.max(constraint_atom_coef(a).abs());
            }
            let s = if s > 0.0 { s } else { 1.0 };
            for t in &mut r.terms {
                t.1 /= s;
            }
            for a in &mut r.atoms {
                scale_constraint_atom(a, 1.0 / s);
            }
            r.rhs /= s;
            ineq_scale.push(s);
        }
        let mut obj_scale = q.cost.iter().map(|c| c.abs()).fold(0.0, f64::max);
        for a in &q.objective_atoms {
            obj_scale = obj_scale.max(objective_atom_coef(a).abs());
        }
        let obj_scale = if obj_scale > 0.0 { obj_scale } else { 1.0 };
        for c in &mut q.cost {
            *c /= obj_scale;
        }
        for a in &mut q.objective_atoms {
            scale_objective_atom(a, 1.0 / obj_scale);
        }
        Scaled { program: q, eq_scale, ineq_scale, obj_scale, pinned }
    }

    fn unscale(&self, original: &Program, core: Core) -> Solution {
        let f = self.obj_scale;
        let m_eq = self.eq_scale.len();
        let eq_duals = (0..m_eq).map(|i| core.y[i] * f / self.eq_scale[i]).collect();
        let ineq_duals = core.lam.iter().zip(&self.ineq_scale).map(|(l, s)| l * f / s).collect();
        let mut lower_duals: Vec<f64> = core.zl.iter().map(|z| z * f).collect();
        let mut upper_duals: Vec<f64> = core.zu.iter().map(|z| z * f).collect();
        let mut x = core.x;
        for (k, &j) in self.pinned.iter().enumerate() {
            let y = core.y[m_eq + k] * f;
            x[j] = original.lower[j];
            lower_duals[j] = (-y).max(0.0);
            upper_duals[j] = y.max(0.0);
        }
        let objective = original.objective(&x);
        Solution {
            status: core.status,
            x,
            objective,
            eq_duals,
            ineq_duals,
            lower_duals,
            upper_duals,
            iterations: core.iterations,
            phase_one_value: None,
        }
    }
}

fn constraint_atom_coef(a: &ConstraintAtom) -> f64 {
    match *a {
        ConstraintAtom::Square { coef, .. } | ConstraintAtom::QuadOverLinear { coef, .. } => coef,
    }
}

fn scale_constraint_atom(a: &mut ConstraintAtom, k: f64) {
    match a {
        ConstraintAtom::Square { coef, .. } | ConstraintAtom::QuadOverLinear { coef, .. } => *coef *= k,
    }
}

fn objective_atom_coef(a: &ObjectiveAtom) -> f64 {
    match *a {
        ObjectiveAtom::Cubic { coef, .. } | ObjectiveAtom::CubicPerspective { coef, .. } => coef,
    }
}

fn scale_objective_atom(a: &mut ObjectiveAtom, k: f64) {
    match a {
        ObjectiveAtom::Cubic { coef, .. } | ObjectiveAtom::CubicPerspective { coef, .. } => *coef *= k,
    }
}

/// Elastic program `min t + sum(e+ + e-)` over the scaled rows; returns its
/// optimal value, or `None` when it does not converge.
fn phase_one(p: &Program, settings: &Settings) -> Option<f64> {
    let n = p.var_count();
    let mut q = Program::new();
    for j in 0..n {
        q.add_var(p.lower[j], p.upper[j]);
    }
    let t = if p.inequalities.is_empty() { None } else { Some(q.add_var(0.0, f64::INFINITY)) };
    if let Some(t) = t {
        q.cost[t] = 1.0;
    }
    for r in &p.equalities {
        let ep = q.add_var(0.0, f64::INFINITY);
        let em = q.add_var(0.0, f64::INFINITY);
        q.cost[ep] = 1.0;
        q.cost[em] = 1.0;
        let mut terms = r.terms.clone();
        terms.push((ep, 1.0));
        terms.push((em, -1.0));
        q.add_equality(terms, r.rhs);
    }
    for r in &p.inequalities {
        let mut row = r.clone();
        row.terms.push((t.expect("elastic variable exists"), -1.0));
        q.add_constraint(row);
    }
    if q.equalities.is_empty() && q.inequalities.is_empty() {
        return Some(0.0);
    }
    let inner = Settings { phase_one: false, ..*settings };
    let core = interior_point(&q, &inner);
    if core.status != Status::Optimal {
        return None;
    }
    Some(q.cost.iter().zip(&core.x).map(|(c, x)| c * x).sum())
}

struct Core {
    status: Status,
    x: Vec<f64>,
    y: Vec<f64>,
    lam: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
    iterations: usize,
}

#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    lam: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    ds: Vec<f64>,
    dlam: Vec<f64>,
    dzl: Vec<f64>,
    dzu: Vec<f64>,
}

/// First- and second-order data at one iterate.
struct Eval {
    /// Objective gradient.
    grad: Vec<f64>,
    /// Inequality values `g(x) - rhs`.
    g: Vec<f64>,
    /// Inequality Jacobian rows as merged sparse lists.
    jac: Vec<Vec<(usize, f64)>>,
}

struct Residuals {
    dual: Vec<f64>,
    primal_eq: Vec<f64>,
    primal_ineq: Vec<f64>,
}

struct Engine<'a> {
    p: &'a Program,
    n: usize,
    lo: Vec<bool>,
    up: Vec<bool>,
    n_compl: usize,
}

impl<'a> Engine<'a> {
    fn new(p: &'a Program) -> Self {
        let n = p.var_count();
        let lo: Vec<bool> = p.lower.iter().map(|v| v.is_finite()).collect();
        let up: Vec<bool> = p.upper.iter().map(|v| v.is_finite()).collect();
        let n_compl = lo.iter().filter(|b| **b).count() + up.iter().filter(|b| **b).count() + p.inequalities.len();
        Engine { p, n, lo, up, n_compl }
    }

    fn start(&self) -> Iterate {
        let p = self.p;
        let x: Vec<f64> = (0..self.n)
            .map(|j| match (self.lo[j], self.up[j]) {
                (true, true) => 0.5 * (p.lower[j] + p.upper[j]),
                (true, false) => p.lower[j] + 1.0,
                (false, true) => p.upper[j] - 1.0,
                (false, false) => 0.0,
            })
            .collect();
        let s = p.inequalities.iter().map(|r| (r.rhs - constraint_value(r, &x)).max(1.0)).collect();
        Iterate {
            y: vec![0.0; p.equalities.len()],
            lam: vec![1.0; p.inequalities.len()],
            zl: self.lo.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            zu: self.up.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            s,
            x,
        }
    }

    fn eval(&self, x: &[f64]) -> Eval {
        let p = self.p;
        let mut grad = p.cost.clone();
        for a in &p.objective_atoms {
            match *a {
                ObjectiveAtom::Cubic { var, coef } => grad[var] += coef * x[var] * x[var].abs(),
                ObjectiveAtom::CubicPerspective { var, z, coef, eps } => {
                    let q = x[var];
                    let k = 1.0 - eps;
                    let zv = k * x[z] + eps;
                    grad[var] += coef * q * q.abs() / (zv * zv);
                    grad[z] -= k * 2.0 * coef * q.abs().powi(3) / (3.0 * zv.powi(3));
                }
            }
        }
        let mut g = Vec::with_capacity(p.inequalities.len());
        let mut jac = Vec::with_capacity(p.inequalities.len());
        for r in &p.inequalities {
            g.push(constraint_value(r, x) - r.rhs);
            jac.push(row_gradient(r, x));
        }
        Eval { grad, g, jac }
    }

    fn residuals(&self, it: &Iterate, ev: &Eval) -> Residuals {
        let p = self.p;
        let mut dual = ev.grad.clone();
        for (i, r) in p.equalities.iter().enumerate() {
            for &(j, c) in &r.terms {
                dual[j] += c * it.y[i];
            }
        }
        for (i, row) in ev.jac.iter().enumerate() {
            for &(j, c) in row {
                dual[j] += c * it.lam[i];
            }
        }
        for j in 0..self.n {
            dual[j] += it.zu[j] - it.zl[j];
        }
        let primal_eq =
            p.equalities.iter().map(|r| r.terms.iter().map(|&(j, c)| c * it.x[j]).sum::<f64>() - r.rhs).collect();
        let primal_ineq = ev.g.iter().zip(&it.s).map(|(g, s)| g + s).collect();
        Residuals { dual, primal_eq, primal_ineq }
    }

    fn mu(&self, it: &Iterate) -> f64 {
        if self.n_compl == 0 {
            return 0.0;
        }
        let mut sum = 0.0;
        for j in 0..self.n {
            if self.lo[j] {
                sum += (it.x[j] - self.p.lower[j]) * it.zl[j];
            }
            if self.up[j] {
                sum += (self.p.upper[j] - it.x[j]) * it.zu[j];
            }
        }
        sum += it.s.iter().zip(&it.lam).map(|(s, l)| s * l).sum::<f64>();
        sum / self.n_compl as f64
    }

    /// Assembles the reduced Newton matrix at `it`.
    fn matrix(&self, it: &Iterate, ev: &Eval, reg: f64) -> DMatrix<f64> {
        let p = self.p;
        let n = self.n;
        let me = p.equalities.len();
        let mut k = DMatrix::<f64>::zeros(n + me, n + me);
        for a in &p.objective_atoms {
            match *a {
                ObjectiveAtom::Cubic { var, coef } => k[(var, var)] += 2.0 * coef * it.x[var].abs(),
                ObjectiveAtom::CubicPerspective { var, z, coef, eps } => {
                    let q = it.x[var];
                    let c = 1.0 - eps;
                    let zv = c * it.x[z] + eps;
                    k[(var, var)] += 2.0 * coef * q.abs() / (zv * zv);
                    let off = -c * 2.0 * coef * q * q.abs() / zv.powi(3);
                    k[(var, z)] += off;
                    k[(z, var)] += off;
                    k[(z, z)] += c * c * 2.0 * coef * q.abs().powi(3) / zv.powi(4);
                }
            }
        }
        for (i, r) in p.inequalities.iter().enumerate() {
            let l = it.lam[i];
            for a in &r.atoms {
                match *a {
                    ConstraintAtom::Square { var, coef } => k[(var, var)] += 2.0 * coef * l,
                    ConstraintAtom::QuadOverLinear { var, z, coef } => {
                        let q = it.x[var];
                        let zv = it.x[z];
                        k[(var, var)] += 2.0 * coef * l / zv;
                        let off = -2.0 * coef * l * q / (zv * zv);
                        k[(var, z)] += off;
                        k[(z, var)] += off;
                        k[(z, z)] += 2.0 * coef * l * q * q / zv.powi(3);
                    }
                }
            }
            let w = l / it.s[i];
            let row = &ev.jac[i];
            for &(a, ca) in row {
                for &(b, cb) in row {
                    k[(a, b)] += w * ca * cb;
                }
            }
        }
        for j in 0..n {
            let mut d = reg;
            if self.lo[j] {
                d += it.zl[j] / (it.x[j] - p.lower[j]);
            }
            if self.up[j] {
                d += it.zu[j] / (p.upper[j] - it.x[j]);
            }
            k[(j, j)] += d;
        }
        for (i, r) in p.equalities.iter().enumerate() {
            for &(j, c) in &r.terms {
                k[(n + i, j)] += c;
                k[(j, n + i)] += c;
            }
            k[(n + i, n + i)] -= reg;
        }
        k
    }

    /// Newton direction for complementarity targets `tl`, `tu`, `ts`.
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        it: &Iterate,
        ev: &Eval,
        res: &Residuals,
        tl: &[f64],
        tu: &[f64],
        ts: &[f64],
    ) -> Option<Direction> {
        let p = self.p;
        let n = self.n;
        let me = p.equalities.len();
        let mut rhs = DVector::<f64>::zeros(n + me);
        for j in 0..n {
            rhs[j] = -ev.grad[j];
        }
        for (i, r) in p.equalities.iter().enumerate() {
            for &(j, c) in &r.terms {
                rhs[j] -= c * it.y[i];
            }
            rhs[n + i] = -res.primal_eq[i];
        }
        for (i, row) in ev.jac.iter().enumerate() {
            let w = (ts[i] + it.lam[i] * res.primal_ineq[i]) / it.s[i];
            for &(j, c) in row {
                rhs[j] -= c * w;
            }
        }
        for j in 0..n {
            if self.lo[j] {
                rhs[j] += tl[j] / (it.x[j] - p.lower[j]);
            }
            if self.up[j] {
                rhs[j] -= tu[j] / (p.upper[j] - it.x[j]);
            }
        }
        let sol = lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let dx: Vec<f64> = (0..n).map(|j| sol[j]).collect();
        let dy: Vec<f64> = (0..me).map(|i| sol[n + i]).collect();
        let mut ds = Vec::with_capacity(ev.jac.len());
        let mut dlam = Vec::with_capacity(ev.jac.len());
        for (i, row) in ev.jac.iter().enumerate() {
            let jdx: f64 = row.iter().map(|&(j, c)| c * dx[j]).sum();
            let dsi = -res.primal_ineq[i] - jdx;
            ds.push(dsi);
            dlam.push((ts[i] - it.s[i] * it.lam[i] - it.lam[i] * dsi) / it.s[i]);
        }
        let mut dzl = vec![0.0; n];
        let mut dzu = vec![0.0; n];
        for j in 0..n {
            if self.lo[j] {
                let gap = it.x[j] - p.lower[j];
                dzl[j] = (tl[j] - gap * it.zl[j] - it.zl[j] * dx[j]) / gap;
            }
            if self.up[j] {
                let gap = p.upper[j] - it.x[j];
                dzu[j] = (tu[j] - gap * it.zu[j] + it.zu[j] * dx[j]) / gap;
            }
        }
        Some(Direction { dx, dy, ds, dlam, dzl, dzu })
    }

    /// Largest step in `(0, 1]` keeping the iterate a fraction `tau` inside
    /// its bounds.
    fn max_step(&self, it: &Iterate, d: &Direction, tau: f64) -> (f64, f64) {
        let p = self.p;
        let mut ap: f64 = 1.0;
        let mut ad: f64 = 1.0;
        let ratio = |v: f64, dv: f64| if dv < 0.0 { -tau * v / dv } else { f64::INFINITY };
        for j in 0..self.n {
            if self.lo[j] {
                ap = ap.min(ratio(it.x[j] - p.lower[j], d.dx[j]));
                ad = ad.min(ratio(it.zl[j], d.dzl[j]));
            }
            if self.up[j] {
                ap = ap.min(ratio(p.upper[j] - it.x[j], -d.dx[j]));
                ad = ad.min(ratio(it.zu[j], d.dzu[j]));
            }
        }
        for i in 0..it.s.len() {
            ap = ap.min(ratio(it.s[i], d.ds[i]));
            ad = ad.min(ratio(it.lam[i], d.dlam[i]));
        }
        (ap, ad)
    }

    fn advance(&self, it: &Iterate, d: &Direction, ap: f64, ad: f64) -> Iterate {
        let step = |v: &[f64], dv: &[f64], a: f64| v.iter().zip(dv).map(|(v, d)| v + a * d).collect::<Vec<_>>();
        Iterate {
            x: step(&it.x, &d.dx, ap),
            s: step(&it.s, &d.ds, ap),
            y: step(&it.y, &d.dy, ad),
            lam: step(&it.lam, &d.dlam, ad),
            zl: step(&it.zl, &d.dzl, ad),
            zu: step(&it.zu, &d.dzu, ad),
        }
    }

    /// Complementarity product after a trial step, averaged.
    fn trial_mu(&self, it: &Iterate, d: &Direction, ap: f64, ad: f64) -> f64 {
        if self.n_compl == 0 {
            return 0.0;
        }
        let p = self.p;
        let mut sum = 0.0;
        for j in 0..self.n {
            if self.lo[j] {
                sum += (it.x[j] + ap * d.dx[j] - p.lower[j]) * (it.zl[j] + ad * d.dzl[j]);
            }
            if self.up[j] {
                sum += (p.upper[j] - it.x[j] - ap * d.dx[j]) * (it.zu[j] + ad * d.dzu[j]);
            }
        }
        for i in 0..it.s.len() {
            sum += (it.s[i] + ap * d.ds[i]) * (it.lam[i] + ad * d.dlam[i]);
        }
        sum / self.n_compl as f64
    }

    /// Objective and inequality atoms are finite at `x`.
    fn in_domain(&self, x: &[f64]) -> bool {
        self.p.objective_atoms.iter().all(|a| atom_objective_value(a, x).is_finite())
            && self.p.inequalities.iter().all(|r| constraint_value(r, x).is_finite())
    }
}

fn row_gradient(r: &ConstraintRow, x: &[f64]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = r.terms.clone();
    for a in &r.atoms {
        match *a {
            ConstraintAtom::Square { var, coef } => out.push((var, 2.0 * coef * x[var])),
            ConstraintAtom::QuadOverLinear { var, z, coef } => {
                let q = x[var];
                let zv = x[z];
                out.push((var, 2.0 * coef * q / zv));
                out.push((z, -coef * q * q / (zv * zv)));
            }
        }
    }
    out.sort_by_key(|t| t.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(out.len());
    for (j, c) in out {
        match merged.last_mut() {
            Some(last) if last.0 == j => last.1 += c,
            _ => merged.push((j, c)),
        }
    }
    merged
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Measures {
    primal: f64,
    dual: f64,
    mu: f64,
}

/// Centering floor while residuals lag complementarity; stops mu collapsing
/// before feasibility at degenerate cone apexes.
const SIGMA_FLOOR: f64 = 0.5;

fn interior_point(p: &Program, settings: &Settings) -> Core {
    let eng = Engine::new(p);
    let mut it = eng.start();
    let rhs_scale = 1.0
        + p.equalities.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max)
        + p.inequalities.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
    let mut best: Option<(Measures, Iterate)> = None;
    let mut status = Status::Failed;
    let mut iterations = 0;
    let mut reg = 1e-12;

    for iter in 0..=settings.max_iterations {
        iterations = iter;
        let ev = eng.eval(&it.x);
        let res = eng.residuals(&it, &ev);
        let grad_scale = 1.0 + inf_norm(&ev.grad);
        let m = Measures {
            primal: inf_norm(&res.primal_eq).max(inf_norm(&res.primal_ineq)) / rhs_scale,
            dual: inf_norm(&res.dual) / grad_scale,
            mu: eng.mu(&it),
        };
        let lagging = m.dual.max(m.primal) > 1e2 * m.mu.max(settings.mu_tolerance);
        if !(m.primal.is_finite() && m.dual.is_finite() && m.mu.is_finite()) {
            break;
        }
        if m.primal <= settings.tolerance && m.dual <= settings.tolerance && m.mu <= settings.mu_tolerance {
            status = Status::Optimal;
            best = Some((m, it.clone()));
            break;
        }
        let score = |m: &Measures| m.primal.max(m.dual).max(m.mu);
        if best.as_ref().map_or(true, |(b, _)| score(&m) < score(b)) {
            best = Some((m, it.clone()));
        }
        if iter == settings.max_iterations {
            break;
        }
        let dual_size = inf_norm(&it.y).max(inf_norm(&it.lam)).max(inf_norm(&it.zl)).max(inf_norm(&it.zu));
        if dual_size > 1e14 {
            break;
        }

        let mu = eng.mu(&it);
        let mut lu = None;
        for _ in 0..6 {
            let k = eng.matrix(&it, &ev, reg);
            let f = k.lu();
            let probe = DVector::<f64>::from_element(eng.n + p.equalities.len(), 1.0);
            if f.solve(&probe).map_or(false, |s| s.iter().all(|v| v.is_finite())) {
                lu = Some(f);
                break;
            }
            reg *= 100.0;
        }
        let Some(lu) = lu else { break };
        reg = (reg * 0.1).max(1e-12);

        let n = eng.n;
        let zeros_n = vec![0.0; n];
        let zeros_m = vec![0.0; it.s.len()];
        let Some(aff) = eng.direction(&lu, &it, &ev, &res, &zeros_n, &zeros_n, &zeros_m) else { break };
        let (ap, ad) = eng.max_step(&it, &aff, 1.0);
        let mut sigma = if mu > 0.0 { (eng.trial_mu(&it, &aff, ap, ad) / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };
        if lagging {
            sigma = sigma.max(SIGMA_FLOOR);
        }
        let target = sigma * mu;
        let tl: Vec<f64> = (0..n).map(|j| if eng.lo[j] { target - aff.dx[j] * aff.dzl[j] } else { 0.0 }).collect();
        let tu: Vec<f64> = (0..n).map(|j| if eng.up[j] { target + aff.dx[j] * aff.dzu[j] } else { 0.0 }).collect();
        let ts: Vec<f64> = (0..it.s.len()).map(|i| target - aff.ds[i] * aff.dlam[i]).collect();
        let Some(dir) = eng.direction(&lu, &it, &ev, &res, &tl, &tu, &ts) else { break };
        let tau = (1.0 - mu).clamp(0.9, 0.995);
        let (mut ap, mut ad) = eng.max_step(&it, &dir, tau);
        let has_nonlinear = !p.objective_atoms.is_empty() || p.inequalities.iter().any(|r| !r.atoms.is_empty());
        if has_nonlinear {
            // One shared step keeps the dual residual consistent with curvature.
            let a = ap.min(ad);
            ap = a;
            ad = a;
        }
        let mut next = eng.advance(&it, &dir, ap, ad);
        let mut tries = 0;
        while !eng.in_domain(&next.x) && tries < 40 {
            ap *= 0.5;
            ad *= 0.5;
            next = eng.advance(&it, &dir, ap, ad);
            tries += 1;
        }
        if !eng.in_domain(&next.x) {
            break;
        }
        it = next;
    }

    let Some((m, it)) = best else {
        return Core {
            status: Status::Failed,
            x: it.x,
            y: it.y,
            lam: it.lam,
            zl: it.zl,
            zu: it.zu,
            iterations,
        };
    };
    if status != Status::Optimal {
        let loose = 1e3;
        if m.primal <= settings.tolerance * loose
            && m.dual <= settings.tolerance * loose
            && m.mu <= settings.mu_tolerance * loose
        {
            status = Status::Optimal;
        }
    }
    Core { status, x: it.x, y: it.y, lam: it.lam, zl: it.zl, zu: it.zu, iterations }
}
