//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! gating failure. Run with `cargo test -p gasgrid-core --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use gasgrid::convex::{self, Settings, Status};
use gasgrid::cvxflow::{
    network_analysis_residual, newton_oracle, recover_potentials, solve_convex_flow, ConvexFlowProblem, FlowEdge,
    KKT_TOLERANCE,
};
use gasgrid::decomposition::{
    binary_search, format_gap, gap_percent, run_overall, BudgetSearchState, RunStatus, ScriptedOracle, SearchStop,
    SolveConfig, Verdict,
};
use gasgrid::ingest::{expand_diameters, generate_synthetic, read_gaslib_network, ComponentMix, DEFAULT_MULTIPLIERS};
use gasgrid::mip::{add_nogood, solve_master, BranchProblem, MasterMode, MasterOutcome, MasterProblem};
use gasgrid::model::{cheapest_cost, pipe_cost};
use gasgrid::relaxation::{solve_misoc, MisocModel, MisocStatus};
use gasgrid::subproblem::{validate, ValidationMode, ValidationProblem};
use gasgrid::{
    assignment_cost, Arc, ArcKind, DesignAssignment, FormulationConfig, Instance, Network, Node,
    PhysicsConstants, PipeCandidate,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Flow/potential residual of the recovered solution and flow agreement
/// with the Newton oracle.
const FLOW_TOL: f64 = 1e-6;
/// Master objective against enumeration, relative.
const MASTER_REL_TOL: f64 = 1e-6;
/// Near-zero energies are compared on the network's energy scale instead.
const MASTER_FLOOR: f64 = 1e-6;
/// Best budget against the enumerated optimum, relative.
const BUDGET_REL_TOL: f64 = 1e-9;
/// Relaxation bound below the optimum, relative.
const BOUND_REL_TOL: f64 = 1e-9;
/// Perspective-on bound may trail perspective-off by this much.
const PERSPECTIVE_TOL: f64 = 1e-8;
/// Root relaxations are interior-point solves: compared relatively.
const ROOT_REL_TOL: f64 = 1e-8;
const COST_REL_TOL: f64 = 1e-12;
/// Design-problem relative gap stop.
const EPS_REL: f64 = 1e-4;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<f64, String> {
    let t = start.elapsed();
    ensure!(t < limit, "{what} took {:.1}s, limit {:.0}s", t.as_secs_f64(), limit.as_secs_f64());
    Ok(t.as_secs_f64())
}

// ---------------------------------------------------------------------------
// Shared oracles

/// Connected network on `n` nodes: random tree plus up to `n / 2` chords,
/// alpha uniform in [0.5, 2], integer demands summing to zero.
fn random_passive(rng: &mut ChaCha8Rng, n: usize) -> ConvexFlowProblem {
    let mut d: Vec<f64> = (0..n).map(|_| rng.gen_range(-6i32..=6) as f64).collect();
    let s: f64 = d.iter().sum();
    d[n - 1] -= s;
    let keys = (0..n).map(|i| format!("v{i}")).collect();
    let mut p = ConvexFlowProblem::new(keys, d);
    // Capacities far above any possible flow: the network is uncapacitated.
    let cap = 1e6;
    for v in 1..n {
        let u = rng.gen_range(0..v);
        p.add_edge(FlowEdge::symmetric(u, v, rng.gen_range(0.5..=2.0), cap));
    }
    for _ in 0..rng.gen_range(0..=n / 2) {
        let a = rng.gen_range(0..n);
        let b = (a + rng.gen_range(1..n)) % n;
        p.add_edge(FlowEdge::symmetric(a, b, rng.gen_range(0.5..=2.0), cap));
    }
    p
}

/// Every assignment over pipe diameters and active states.
fn all_designs(net: &Network) -> Vec<DesignAssignment> {
    let mut out = vec![DesignAssignment::default()];
    for arc in net.arcs() {
        let k = match &arc.kind {
            ArcKind::Pipe { candidates, .. } => candidates.len(),
            k if k.is_active() => 2,
            _ => continue,
        };
        let mut next = Vec::with_capacity(out.len() * k);
        for base in &out {
            for i in 0..k {
                let mut x = base.clone();
                if matches!(arc.kind, ArcKind::Pipe { .. }) {
                    x.diameters.insert(arc.id.clone(), i);
                } else {
                    x.states.insert(arc.id.clone(), i == 0);
                }
                next.push(x);
            }
        }
        out = next;
    }
    out
}

/// Least energy of one fixed design: the convex flow program built directly
/// from the arc data, or `None` when no flow fits the capacities.
fn design_energy(net: &Network, a: &DesignAssignment) -> Option<f64> {
    let keys = net.nodes().iter().map(|n| n.id.clone()).collect();
    let mut p = ConvexFlowProblem::new(keys, net.demands());
    for (k, arc) in net.arcs().iter().enumerate() {
        let (v, w) = net.endpoints(k);
        let on = a.states.get(&arc.id).copied().unwrap_or(true);
        p.add_edge(match &arc.kind {
            ArcKind::Pipe { candidates, .. } => {
                let c = candidates[a.diameters[&arc.id]];
                FlowEdge::symmetric(v, w, c.alpha, c.q_max)
            }
            ArcKind::ShortPipe { q_max } => FlowEdge::symmetric(v, w, 0.0, *q_max),
            ArcKind::Resistor { alpha, q_max } => FlowEdge::symmetric(v, w, *alpha, *q_max),
            ArcKind::Valve { q_max } => FlowEdge::symmetric(v, w, 0.0, if on { *q_max } else { 0.0 }),
            ArcKind::Compressor(l) | ArcKind::ControlValve(l) => {
                FlowEdge { tail: v, head: w, alpha: 0.0, forward: if on { l.q_max } else { 0.0 }, backward: 0.0 }
            }
        });
    }
    solve_convex_flow(&p).ok().map(|s| s.objective)
}

/// Cheapest design that validates, by checking every assignment.
fn enumerated_optimum(net: &Network) -> Option<f64> {
    all_designs(net)
        .iter()
        .filter(|a| {
            let p = ValidationProblem::new(net, a, ValidationMode::Primal).unwrap();
            validate(&p, Duration::from_secs(30)).is_feasible()
        })
        .map(|a| assignment_cost(a, net).unwrap())
        .min_by(f64::total_cmp)
}

/// Design toy with at most ten binaries and tight potential boxes.
fn design_toy(seed: u64) -> Instance {
    let mix = ComponentMix {
        pipes: 4,
        resistors: (seed % 2) as usize,
        compressors: (seed % 3 == 1) as usize,
        valves: (seed % 3 == 2) as usize,
        slack: 0.15,
        multipliers: vec![0.8, 1.3],
        ..Default::default()
    };
    generate_synthetic(seed, 4, &mix).unwrap().into_instance(seed, &mix.multipliers).unwrap()
}

// ---------------------------------------------------------------------------
// Criteria

fn c1_flow_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0001);
    let (mut worst_res, mut worst_diff) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let n = rng.gen_range(4..=12);
        let p = random_passive(&mut rng, n);
        let s = solve_convex_flow(&p).map_err(|e| format!("case {case}: {e}"))?;
        let pa = recover_potentials(&s.certificate, KKT_TOLERANCE).map_err(|e| format!("case {case}: {e}"))?;
        let r = network_analysis_residual(&p, &pa.pi, &pa.flows);
        ensure!(r <= FLOW_TOL, "case {case}: residual {r:e}");
        let o = newton_oracle(&p).map_err(|e| format!("case {case}: oracle {e}"))?;
        let d = pa.flows.iter().zip(&o.flows).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        ensure!(d <= FLOW_TOL, "case {case}: flows differ by {d:e}");
        worst_res = worst_res.max(r);
        worst_diff = worst_diff.max(d);
    }
    let t = within(Duration::from_secs(60), start, "100 networks")?;
    Ok(format!("100 networks, residual <= {worst_res:.1e}, flow diff <= {worst_diff:.1e}, {t:.1}s"))
}

fn master_toy(seed: u64) -> Network {
    let mix = ComponentMix {
        pipes: 4 + (seed % 2) as usize,
        compressors: (seed % 3 == 0) as usize,
        valves: (seed % 4 == 1) as usize,
        slack: 0.3,
        multipliers: vec![0.8, 1.3],
        ..Default::default()
    };
    generate_synthetic(seed, 4, &mix).unwrap().network
}

fn energy_scale(net: &Network) -> f64 {
    let q = net.flow_scale();
    net.arcs()
        .iter()
        .flat_map(|arc| match &arc.kind {
            ArcKind::Pipe { candidates, .. } => candidates.iter().map(|c| c.alpha).collect::<Vec<_>>(),
            ArcKind::Resistor { alpha, .. } => vec![*alpha],
            _ => vec![],
        })
        .fold(0.0, |m, alpha| f64::max(m, alpha * q.powi(3) / 3.0))
}

fn c2_master_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0002);
    let mut max_bin = 0;
    let mut infeasible = 0;
    for case in 0..50u64 {
        let net = master_toy(1000 + case);
        let lo = cheapest_cost(&net);
        let hi = assignment_cost(&DesignAssignment::largest_all_on(&net), &net).unwrap();
        let budget = lo + rng.gen_range(-0.1..1.1) * (hi - lo);
        let m = MasterProblem::from_network(&net, MasterMode::PrimalMaster, budget, FormulationConfig::default())
            .map_err(|e| e.to_string())?;
        ensure!(m.num_binaries() <= 12, "case {case}: {} binaries", m.num_binaries());
        max_bin = max_bin.max(m.num_binaries());
        let expect = all_designs(&net)
            .iter()
            .filter(|a| assignment_cost(a, &net).unwrap() <= budget)
            .filter_map(|a| design_energy(&net, a))
            .min_by(f64::total_cmp);
        match (solve_master(&m, Duration::from_secs(60)), expect) {
            (MasterOutcome::Assignment { objective, .. }, Some(e)) => {
                let tol = MASTER_REL_TOL * e.abs().max(MASTER_FLOOR * energy_scale(&net));
                ensure!((objective - e).abs() <= tol, "case {case}: master {objective:e}, enumeration {e:e}");
            }
            (MasterOutcome::Infeasible, None) => infeasible += 1,
            (got, want) => return Err(format!("case {case}: master {got:?}, enumeration {want:?}")),
        }
    }
    let t = within(Duration::from_secs(300), start, "50 masters")?;
    Ok(format!("50 instances (<= {max_bin} binaries, {infeasible} infeasible budgets), {t:.1}s"))
}

fn c3_end_to_end() -> Outcome {
    let start = Instant::now();
    let mut tight = 0;
    for case in 0..20u64 {
        let inst = design_toy(2000 + case);
        let net = &inst.network;
        ensure!(inst.binary_count() <= 10, "case {case}: {} binaries", inst.binary_count());
        let best = enumerated_optimum(net);
        if best.is_some_and(|b| b > cheapest_cost(net) * (1.0 + BUDGET_REL_TOL)) {
            tight += 1;
        }
        let mut cfg = SolveConfig { eps_rel: EPS_REL, ..SolveConfig::default() };
        // Half the toys skip straight to the binary search.
        if case % 2 == 1 {
            cfg.initial_max_checks = Some(1);
        }
        let r = run_overall(&inst, &cfg).map_err(|e| e.to_string())?;
        for s in &r.trajectory {
            ensure!(s.lower <= s.upper, "case {case}: lower {} above upper {} at budget {}", s.lower, s.upper, s.budget);
        }
        match best {
            Some(b) => {
                ensure!(
                    matches!(r.status, RunStatus::Optimal | RunStatus::GapClosed),
                    "case {case}: status {:?}",
                    r.status
                );
                ensure!((r.upper - b).abs() <= BUDGET_REL_TOL * b, "case {case}: upper {} vs optimum {b}", r.upper);
                ensure!(r.lower <= r.upper, "case {case}: lower {} above upper {}", r.lower, r.upper);
            }
            None => ensure!(r.status == RunStatus::Infeasible, "case {case}: {:?} on an infeasible toy", r.status),
        }
    }
    ensure!(tight > 0, "no toy had an infeasible cheapest budget");
    let t = within(Duration::from_secs(600), start, "20 design toys")?;
    Ok(format!("20 toys closed at the enumerated optimum ({tight} with infeasible cheapest budget), {t:.1}s"))
}

fn c4_gap_formula() -> Outcome {
    for (upper, lower, printed) in [(1.792, 1.417, "26.46"), (12.69, 10.53, "20.51")] {
        let g = format_gap(gap_percent(upper, lower));
        ensure!(g == printed, "({upper} - {lower}) / {lower}: {g}, expected {printed}");
    }
    Ok("26.46% and 20.51%".into())
}

fn c5_branch_semantics() -> Outcome {
    // Start C = 8 with lower bound 0; the verdicts and the updates they
    // trigger, worked by hand from the update rules:
    //   8     timeout     2C = 16 < inf          -> C = 16
    //   16    feasible    upper 16; 8 > 0        -> C = 8
    //   8     infeasible  lower 8; 16 >= 16      -> C = (16 + 8) / 2 = 12
    //   12    timeout     24 >= 16               -> C = (16 + 12) / 2 = 14
    //   14    feasible    upper 14; 7 <= 8       -> C = (8 + 14) / 2 = 11
    //   11    infeasible  lower 11; 22 >= 14     -> C = (14 + 11) / 2 = 12.5
    //   12.5  feasible    upper 12.5; 6.25 <= 11 -> C = (11 + 12.5) / 2 = 11.75
    //   11.75 infeasible  lower 11.75            -> C = (12.5 + 11.75) / 2 = 12.125
    // The relative gap 0.75 / 11.75 is then below 0.1 and the search stops.
    let f = |c: f64| Verdict::Feasible { cost: c };
    let script = [
        Verdict::TimedOut,
        f(16.0),
        Verdict::Infeasible,
        Verdict::TimedOut,
        f(14.0),
        Verdict::Infeasible,
        f(12.5),
        Verdict::Infeasible,
    ];
    let mut state = BudgetSearchState::new(8.0, 0.0).map_err(|e| e.to_string())?;
    state.eps_rel = 0.1;
    let mut oracle = ScriptedOracle::new(script);
    let res = binary_search(state, &mut oracle).map_err(|e| e.to_string())?;
    let asked = [8.0, 16.0, 8.0, 12.0, 14.0, 11.0, 12.5, 11.75];
    let next = [16.0, 8.0, 12.0, 14.0, 11.0, 12.5, 11.75, 12.125];
    ensure!(oracle.asked == asked, "asked {:?}", oracle.asked);
    let got: Vec<f64> = res.steps.iter().map(|s| s.next).collect();
    ensure!(got == next, "next budgets {got:?}");
    ensure!(res.stop == SearchStop::GapClosed, "stopped by {:?}", res.stop);
    ensure!(res.upper == 12.5 && res.lower == 11.75, "bounds ({}, {})", res.upper, res.lower);
    ensure!(oracle.remaining() == 0, "{} answers unused", oracle.remaining());
    Ok("8-step trace with all three branches reproduced exactly".into())
}

fn root_bound(model: &MisocModel) -> f64 {
    let np = model.root();
    let r = convex::solve(&np.program, &Settings::default());
    if r.status == Status::Optimal {
        r.objective + np.offset
    } else {
        f64::INFINITY
    }
}

fn c6_relaxation_order() -> Outcome {
    let start = Instant::now();
    let mut strict = 0;
    for case in 0..20u64 {
        let inst = design_toy(3000 + case);
        let net = &inst.network;
        let best = enumerated_optimum(net).unwrap_or(f64::INFINITY);
        let mut bound = [0.0; 2];
        let mut root = [0.0; 2];
        for (k, on) in [false, true].into_iter().enumerate() {
            let cfg = FormulationConfig::default().with_perspective(on);
            let model = MisocModel::from_network(net, &cfg).map_err(|e| e.to_string())?;
            let sol = solve_misoc(&model, Duration::from_secs(60));
            ensure!(sol.status != MisocStatus::TimedOut, "case {case}: relaxation timed out");
            bound[k] = sol.bound;
            ensure!(sol.bound <= best + BOUND_REL_TOL * best.abs(), "case {case}: bound {} above optimum {best}", sol.bound);
            root[k] = root_bound(&model);
        }
        ensure!(bound[1] >= bound[0] - PERSPECTIVE_TOL, "case {case}: perspective {} below plain {}", bound[1], bound[0]);
        if root[0].is_finite() {
            let tol = ROOT_REL_TOL * root[0].abs().max(1.0);
            ensure!(root[1] >= root[0] - tol, "case {case}: perspective root {} below plain root {}", root[1], root[0]);
            if root[1] > root[0] + tol {
                strict += 1;
            }
        }
    }
    let t = within(Duration::from_secs(300), start, "20 relaxations")?;
    Ok(format!("20 toys, perspective root strictly tighter on {strict}, {t:.1}s"))
}

fn node(id: &str, demand: f64) -> Node {
    Node::new(id, demand, 0.0, f64::INFINITY)
}

fn two_choice(id: &str, from: &str, to: &str) -> Arc {
    let c = |d: f64, alpha: f64, q_max: f64, cost: f64| PipeCandidate { diameter: d, alpha, q_max, cost };
    let candidates = vec![c(1.0, 4.0, 6.0, 10.0), c(2.0, 1.0, 12.0, 20.0)];
    Arc::new(id, from, to, ArcKind::Pipe { length: 1.0, diameter: None, candidates })
}

fn c7_cut_soundness() -> Outcome {
    // Three pipes with two diameters each and room for every design.
    let net = Network::new(
        "cuts",
        vec![node("s", -5.0), node("m", 0.0), node("t", 5.0)],
        vec![two_choice("p1", "s", "m"), two_choice("p2", "m", "t"), two_choice("p3", "m", "t")],
    )
    .map_err(|e| e.to_string())?;
    let designs = all_designs(&net);
    let k = designs.len();
    let mut m = MasterProblem::from_network(&net, MasterMode::PrimalMaster, 1e9, FormulationConfig::default())
        .map_err(|e| e.to_string())?;
    let count = |m: &MasterProblem| {
        designs.iter().filter(|a| !m.pool().excludes(a) && design_energy(&net, a).is_some()).count()
    };
    ensure!(count(&m) == k, "{} of {k} designs carry the flow", count(&m));
    for cut in 0..k {
        let before = count(&m);
        let MasterOutcome::Assignment { assignment, .. } = solve_master(&m, Duration::from_secs(30)) else {
            return Err(format!("master gave up after {cut} cuts"));
        };
        ensure!(add_nogood(&mut m, &assignment).map_err(|e| e.to_string())?, "cut {cut} was a duplicate");
        let after = count(&m);
        ensure!(after + 1 == before, "cut {cut}: count {before} -> {after}");
    }
    ensure!(solve_master(&m, Duration::from_secs(30)) == MasterOutcome::Infeasible, "master feasible after {k} cuts");
    Ok(format!("{k} assignments removed one per cut, infeasible at {k} cuts"))
}

fn check_tradeoff(label: &str, cands: &[PipeCandidate]) -> Result<(), String> {
    for w in cands.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        ensure!(a.diameter < b.diameter, "{label}: diameters not increasing");
        ensure!(a.alpha > b.alpha, "{label}: alpha not decreasing");
        ensure!(a.q_max < b.q_max, "{label}: q_max not increasing");
        ensure!(a.cost < b.cost, "{label}: cost not increasing");
    }
    Ok(())
}

fn c8_cost_and_tradeoffs() -> Outcome {
    // Precomputed in 30-digit decimal arithmetic.
    for (l, d, want) in [(1000.0, 0.0, 11215.5), (1000.0, 600.0, 20393.532309070175), (1000.0, 780.0, 28900.618043369429)] {
        let got = pipe_cost(l, d).map_err(|e| e.to_string())?;
        ensure!((got - want).abs() <= COST_REL_TOL * want, "cost({l}, {d}) = {got}, expected {want}");
    }
    ensure!(pipe_cost(-1.0, 600.0).is_err() && pipe_cost(1000.0, -1.0).is_err(), "negative input accepted");
    let mut lists = 0;
    for seed in 0..50u64 {
        let mix = ComponentMix { pipes: 6, multipliers: DEFAULT_MULTIPLIERS.to_vec(), ..Default::default() };
        let syn = generate_synthetic(seed, 6, &mix).map_err(|e| e.to_string())?;
        for arc in syn.network.arcs() {
            if let ArcKind::Pipe { candidates, .. } = &arc.kind {
                check_tradeoff(&format!("seed {seed} pipe {}", arc.id), candidates)?;
                lists += 1;
            }
        }
    }
    let xml = include_str!("data/eleven.net");
    let g = read_gaslib_network("eleven.net", xml).map_err(|e| e.to_string())?;
    for mults in [DEFAULT_MULTIPLIERS.to_vec(), vec![0.5, 0.9, 1.1, 2.0, 3.0]] {
        let net = expand_diameters(&g.network, &mults, &PhysicsConstants::default()).map_err(|e| e.to_string())?;
        for arc in net.arcs() {
            if let ArcKind::Pipe { candidates, .. } = &arc.kind {
                check_tradeoff(&format!("eleven pipe {}", arc.id), candidates)?;
                lists += 1;
            }
        }
    }
    Ok(format!("cost values exact; {lists} candidate lists ordered"))
}

/// Non-gating: needs external network data under GASGRID_GASLIB11.
fn c9_gaslib11() -> Option<Outcome> {
    let dir = std::path::PathBuf::from(std::env::var_os("GASGRID_GASLIB11")?);
    Some((|| {
        let files: Vec<_> = std::fs::read_dir(&dir).map_err(|e| e.to_string())?.filter_map(|e| e.ok()).map(|e| e.path()).collect();
        let net_path = files.iter().find(|p| p.extension().is_some_and(|e| e == "net")).ok_or("no .net file")?;
        let xml = std::fs::read_to_string(net_path).map_err(|e| e.to_string())?;
        let base = read_gaslib_network(&net_path.display().to_string(), &xml).map_err(|e| e.to_string())?.network;
        let net = expand_diameters(&base, &DEFAULT_MULTIPLIERS, &PhysicsConstants::default()).map_err(|e| e.to_string())?;
        let mut closed = Vec::new();
        for scn in files.iter().filter(|p| p.extension().is_some_and(|e| e == "scn")) {
            let text = std::fs::read_to_string(scn).map_err(|e| e.to_string())?;
            let nom = gasgrid::ingest::read_gaslib_nomination(&scn.display().to_string(), &text).map_err(|e| e.to_string())?;
            for s in [0.1, 0.5, 1.0] {
                let nom = gasgrid::ingest::apply_stress(&nom, s).map_err(|e| e.to_string())?;
                let inst = Instance::new(format!("s{s}"), net.clone(), nom).map_err(|e| e.to_string())?;
                let r = run_overall(&inst, &SolveConfig::default()).map_err(|e| e.to_string())?;
                closed.push(format!("{}@{s}: initial {} gap {}", scn.display(), r.initial_budget_solved, format_gap(r.gap_percent)));
            }
        }
        Ok(closed.join("; "))
    })())
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 8] = [
        (1, "convex flow and potential recovery solve the network equations", c1_flow_equivalence),
        (2, "master branch-and-bound matches enumeration", c2_master_exactness),
        (3, "overall procedure closes the gap at the enumerated optimum", c3_end_to_end),
        (4, "gap formula reproduces the printed gaps", c4_gap_formula),
        (5, "budget search branch semantics", c5_branch_semantics),
        (6, "relaxation soundness and perspective ordering", c6_relaxation_order),
        (7, "each no-good cut removes exactly one assignment", c7_cut_soundness),
        (8, "cost evaluation and candidate trade-offs", c8_cost_and_tradeoffs),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {id}: {name} ({detail})"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id}: {name} ({why})");
            }
        }
    }
    match c9_gaslib11() {
        None => println!("SKIP 9: eleven-node reference data (set GASGRID_GASLIB11; non-gating)"),
        Some(Ok(d)) => println!("INFO 9: eleven-node reference data ({d}; non-gating)"),
        Some(Err(e)) => println!("INFO 9: eleven-node reference data failed ({e}; non-gating)"),
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
