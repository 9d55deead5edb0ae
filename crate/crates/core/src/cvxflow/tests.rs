use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn keys(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i:02}")).collect()
}

/// Random connected passive network: spanning tree plus `extra` chords.
fn random_problem(seed: u64, n: usize, extra: usize) -> ConvexFlowProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d: Vec<f64> = (0..n).map(|_| rng.gen_range(-5i32..=5) as f64).collect();
    let s: f64 = d.iter().sum();
    d[n - 1] -= s;
    let mut p = ConvexFlowProblem::new(keys(n), d);
    for v in 1..n {
        let u = rng.gen_range(0..v);
        p.add_edge(FlowEdge::symmetric(u, v, rng.gen_range(0.5..2.0), 1e3));
    }
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n);
        while b == a {
            b = rng.gen_range(0..n);
        }
        p.add_edge(FlowEdge::symmetric(a, b, rng.gen_range(0.5..2.0), 1e3));
    }
    p
}

/// Golden-section minimum of a unimodal function on `[lo, hi]`.
fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn single_pipe_drop_is_alpha_q_squared() {
    let mut p = ConvexFlowProblem::new(keys(2), vec![-5.0, 5.0]);
    p.add_edge(FlowEdge::symmetric(0, 1, 1.0, 10.0));
    let s = solve_convex_flow(&p).unwrap();
    assert_abs_diff_eq!(s.flows[0], 5.0, epsilon = 1e-8);
    let c = &s.certificate;
    assert_abs_diff_eq!(c.lambda[0] - c.lambda[1], 25.0, epsilon = 1e-6);
    assert!(c.is_valid(KKT_TOLERANCE), "{c:?}");
    let pa = recover_potentials(c, KKT_TOLERANCE).unwrap();
    assert_abs_diff_eq!(pa.pi[0] - pa.pi[1], 25.0, epsilon = 1e-6);
    // node n00 anchors the component
    assert_eq!(pa.pi[0], 0.0);
}

#[test]
fn parallel_pipes_split_evenly() {
    let mut p = ConvexFlowProblem::new(keys(2), vec![-8.0, 8.0]);
    p.add_edge(FlowEdge::symmetric(0, 1, 1.0, 100.0));
    p.add_edge(FlowEdge::symmetric(0, 1, 1.0, 100.0));
    let s = solve_convex_flow(&p).unwrap();
    let x = golden(|x| edge_cost(1.0, x) + edge_cost(1.0, 8.0 - x), -8.0, 16.0);
    assert_abs_diff_eq!(x, 4.0, epsilon = 1e-6);
    assert_abs_diff_eq!(s.flows[0], x, epsilon = 1e-6);
    assert_abs_diff_eq!(s.flows[1], 8.0 - x, epsilon = 1e-6);
}

#[test]
fn unequal_parallel_pipes_match_line_search() {
    let mut p = ConvexFlowProblem::new(keys(2), vec![-6.0, 6.0]);
    p.add_edge(FlowEdge::symmetric(0, 1, 0.7, 100.0));
    p.add_edge(FlowEdge::symmetric(0, 1, 1.9, 100.0));
    let s = solve_convex_flow(&p).unwrap();
    let x = golden(|x| edge_cost(0.7, x) + edge_cost(1.9, 6.0 - x), -6.0, 12.0);
    assert_abs_diff_eq!(s.flows[0], x, epsilon = 1e-6);
}

#[test]
fn triangle_matches_newton_oracle() {
    for seed in 0..10 {
        let p = random_problem(seed, 3, 1);
        let s = solve_convex_flow(&p).unwrap();
        let o = newton_oracle(&p).unwrap();
        for (a, b) in s.flows.iter().zip(&o.flows) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
        }
    }
}

#[test]
fn zero_demand_gives_zero_flow_and_flat_potentials() {
    let mut p = random_problem(3, 5, 2);
    p.demand.iter_mut().for_each(|d| *d = 0.0);
    let s = solve_convex_flow(&p).unwrap();
    assert!(s.flows.iter().all(|q| *q == 0.0));
    let pa = recover_potentials(&s.certificate, KKT_TOLERANCE).unwrap();
    assert!(pa.pi.iter().all(|v| *v == pa.pi[0]));
}

#[test]
fn tree_recovery_residual_is_tiny() {
    for seed in 0..10 {
        let p = random_problem(100 + seed, 7, 0);
        let s = solve_convex_flow(&p).unwrap();
        let pa = recover_potentials(&s.certificate, KKT_TOLERANCE).unwrap();
        assert!(network_analysis_residual(&p, &pa.pi, &pa.flows) <= 1e-8);
    }
}

#[test]
fn residual_is_sensitive_to_potential_shift() {
    let p = random_problem(7, 4, 1);
    let o = newton_oracle(&p).unwrap();
    assert!(network_analysis_residual(&p, &o.pi, &o.flows) <= 1e-12 * 100.0);
    let mut pi = o.pi.clone();
    pi[2] += 0.125;
    assert!(network_analysis_residual(&p, &pi, &o.flows) >= 0.125 - 1e-9);
}

#[test]
fn newton_single_pipe_closed_form() {
    let mut p = ConvexFlowProblem::new(keys(2), vec![-3.0, 3.0]);
    p.add_edge(FlowEdge::symmetric(0, 1, 2.0, 100.0));
    let o = newton_oracle(&p).unwrap();
    let dpi = o.pi[0] - o.pi[1];
    assert_abs_diff_eq!(o.flows[0], dpi.signum() * (dpi.abs() / 2.0).sqrt(), epsilon = 1e-9);
}

#[test]
fn tree_flows_do_not_depend_on_alpha() {
    let p = random_problem(11, 6, 0);
    let mut q = p.clone();
    for e in &mut q.edges {
        e.alpha *= 3.7;
    }
    let a = newton_oracle(&p).unwrap();
    let b = newton_oracle(&q).unwrap();
    for (x, y) in a.flows.iter().zip(&b.flows) {
        assert_abs_diff_eq!(*x, *y, epsilon = 1e-9);
    }
}

#[test]
fn six_node_cycle_agrees_across_methods() {
    let p = random_problem(21, 6, 3);
    let s = solve_convex_flow(&p).unwrap();
    let pa = recover_potentials(&s.certificate, KKT_TOLERANCE).unwrap();
    let o = newton_oracle(&p).unwrap();
    for (a, b) in pa.flows.iter().zip(&o.flows) {
        assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
    }
    for (a, b) in pa.pi.iter().zip(&o.pi) {
        assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
    }
}

#[test]
fn capacity_shortfall_reports_cut() {
    let mut p = ConvexFlowProblem::new(keys(3), vec![-10.0, 0.0, 10.0]);
    p.add_edge(FlowEdge::symmetric(0, 1, 1.0, 20.0));
    p.add_edge(FlowEdge::symmetric(1, 2, 1.0, 4.0));
    match solve_convex_flow(&p) {
        Err(FlowError::Infeasible { cut, deficit }) => {
            assert_eq!(cut, vec![true, true, false]);
            assert_abs_diff_eq!(deficit, 6.0, epsilon = 1e-9);
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn one_way_edge_blocks_reverse_flow() {
    let mut p = ConvexFlowProblem::new(keys(2), vec![5.0, -5.0]);
    p.add_edge(FlowEdge { tail: 0, head: 1, alpha: 1.0, forward: 10.0, backward: 0.0 });
    assert!(matches!(solve_convex_flow(&p), Err(FlowError::Infeasible { .. })));
}

#[test]
fn binding_capacity_is_certified() {
    // Two parallel pipes, the cheap one capped below its unconstrained share.
    let mut p = ConvexFlowProblem::new(keys(2), vec![-8.0, 8.0]);
    p.add_edge(FlowEdge::symmetric(0, 1, 1.0, 2.0));
    p.add_edge(FlowEdge::symmetric(0, 1, 1.0, 100.0));
    let s = solve_convex_flow(&p).unwrap();
    assert_abs_diff_eq!(s.flows[0], 2.0, epsilon = 1e-6);
    assert_abs_diff_eq!(s.flows[1], 6.0, epsilon = 1e-6);
    assert!(s.certificate.is_valid(KKT_TOLERANCE), "{:?}", s.certificate);
    assert!(s.certificate.nu_plus[0] > 1.0);
}

#[test]
fn zero_alpha_edges_are_allowed() {
    let mut p = ConvexFlowProblem::new(keys(3), vec![-4.0, 0.0, 4.0]);
    p.add_edge(FlowEdge::symmetric(0, 1, 0.0, 10.0));
    p.add_edge(FlowEdge::symmetric(1, 2, 1.0, 10.0));
    let s = solve_convex_flow(&p).unwrap();
    let c = &s.certificate;
    assert_abs_diff_eq!(c.lambda[0], c.lambda[1], epsilon = 1e-6);
    assert_abs_diff_eq!(c.lambda[1] - c.lambda[2], 16.0, epsilon = 1e-6);
}

#[test]
fn unbalanced_demand_is_rejected() {
    let p = ConvexFlowProblem::new(keys(2), vec![1.0, 1.0]);
    assert!(matches!(solve_convex_flow(&p), Err(FlowError::Invalid(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn convex_flow_agrees_with_newton(seed in 0u64..10_000, n in 4usize..10, extra in 0usize..4) {
        let p = random_problem(seed, n, extra);
        let s = solve_convex_flow(&p).unwrap();
        let pa = recover_potentials(&s.certificate, KKT_TOLERANCE).unwrap();
        prop_assert!(network_analysis_residual(&p, &pa.pi, &pa.flows) <= 1e-6);
        let o = newton_oracle(&p).unwrap();
        for (a, b) in pa.flows.iter().zip(&o.flows) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
        // Certificate built from the oracle's potentials is KKT-valid.
        let c = certificate(&p, &o.flows, &o.pi);
        prop_assert!(c.is_valid(KKT_TOLERANCE), "{:?}", c);
    }

    #[test]
    fn flows_are_unique_under_edge_reordering(seed in 0u64..10_000, n in 3usize..8, extra in 0usize..3) {
        let p = random_problem(seed, n, extra);
        let mut q = p.clone();
        q.edges.reverse();
        let a = solve_convex_flow(&p).unwrap();
        let b = solve_convex_flow(&q).unwrap();
        let m = p.edges.len();
        for k in 0..m {
            prop_assert!((a.flows[k] - b.flows[m - 1 - k]).abs() <= 1e-8);
        }
    }

    #[test]
    fn edge_cost_is_midpoint_convex(alpha in 0.0f64..5.0, a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let mid = edge_cost(alpha, 0.5 * (a + b));
        prop_assert!(mid <= 0.5 * (edge_cost(alpha, a) + edge_cost(alpha, b)) + 1e-12);
    }

    #[test]
    fn directions_are_never_both_positive(seed in 0u64..10_000) {
        let p = random_problem(seed, 6, 2);
        let s = solve_convex_flow(&p).unwrap();
        let c = &s.certificate;
        for k in 0..p.edges.len() {
            prop_assert!(c.q_plus[k] <= 1e-9 || c.q_minus[k] <= 1e-9);
        }
    }
}

