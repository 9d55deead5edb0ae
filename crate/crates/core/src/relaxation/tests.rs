use std::time::Duration;

use proptest::prelude::*;

use super::*;
use crate::ingest::{generate_synthetic, ComponentMix};
use crate::model::{assignment_cost, Arc, Network};
use crate::testutil::*;

const T: Duration = Duration::from_secs(60);

fn cfg(perspective: bool) -> FormulationConfig {
    FormulationConfig::default().with_perspective(perspective)
}

fn series(m_min: f64) -> Network {
    network(
        vec![node("s", -2.0, 0.0, 100.0), node("m", 0.0, m_min, 100.0), node("t", 2.0, 0.0, 100.0)],
        vec![pipe("p1", "s", "m", ladder(2, 4.0, 10.0, 10.0)), pipe("p2", "m", "t", ladder(2, 8.0, 10.0, 10.0))],
    )
}

/// Two parallel routes, one against the arc orientation, plus a resistor,
/// a valve and a compressor.
fn mixed() -> Network {
    network(
        vec![
            node("s", -3.0, 20.0, 100.0),
            node("a", 0.0, 0.0, 100.0),
            node("b", 0.0, 0.0, 100.0),
            node("t", 3.0, 30.0, 100.0),
        ],
        vec![
            pipe("p1", "s", "a", ladder(2, 2.0, 10.0, 10.0)),
            pipe("p2", "b", "s", ladder(2, 2.0, 10.0, 7.0)),
            Arc::new("r", "a", "b", ArcKind::Resistor { alpha: 0.5, q_max: 10.0 }),
            valve("v", "b", "t", 10.0),
            compressor("c", "a", "t", 2.0, 10.0),
        ],
    )
}

fn toy(seed: u64) -> Network {
    let mix = ComponentMix {
        pipes: 4,
        resistors: (seed % 2) as usize,
        compressors: (seed % 3 == 1) as usize,
        valves: (seed % 3 == 2) as usize,
        slack: 0.15,
        multipliers: vec![0.8, 1.3],
        ..Default::default()
    };
    generate_synthetic(seed, 4, &mix).unwrap().network
}

fn opt(net: &Network) -> Option<f64> {
    feasible_designs(net).iter().map(|d| assignment_cost(&d.assignment, net).unwrap()).min_by(f64::total_cmp)
}

/// The four inequalities with every sign as printed, as residuals
/// (positive means violated).
fn printed_envelope(gamma: f64, s: f64, delta: f64, lo: f64, hi: f64) -> [f64; 4] {
    [
        -delta + lo * (s + 1.0) - gamma,
        delta + hi * (s - 1.0) - gamma,
        -delta + hi * (s + 1.0) - gamma,
        delta + lo * (s - 1.0) - gamma,
    ]
}

#[test]
fn printed_envelope_cuts_off_interior_drops() {
    // Forward flow with a drop strictly inside its box: gamma = delta is the
    // true product, yet the third printed row demands delta >= hi.
    let (lo, hi) = (-100.0, 100.0);
    let r = printed_envelope(30.0, 1.0, 30.0, lo, hi);
    assert!(r[0] <= 0.0 && r[1] <= 0.0 && r[3] <= 0.0);
    assert_eq!(r[2], 140.0);
}

#[test]
fn envelope_exact_at_fixed_direction() {
    // s = 1: rows reduce to gamma >= delta and gamma <= delta.
    let net = series(0.0);
    let model = MisocModel::from_network(&net, &cfg(false)).unwrap();
    let fix: Vec<Option<bool>> = model
        .binaries()
        .iter()
        .map(|b| match b {
            MisocBinary::Diameter { choice, .. } => Some(*choice == 0),
            _ => Some(true),
        })
        .collect();
    let np = model.program(&fix);
    let pass = DesignAssignment { diameters: [("p1".into(), 0), ("p2".into(), 0)].into(), ..Default::default() };
    // Drops 16 and 32 match alpha q^2 at q = 2.
    let sol = FlowSolution { assignment: pass, flows: vec![2.0, 2.0], pi: vec![100.0, 84.0, 52.0] };
    let x = model.embed(&np, &sol).unwrap();
    assert!(np.scaled_violation(&x) < 1e-12);
    for (k, role) in np.roles.iter().enumerate() {
        if matches!(role, Role::Gamma { arc: 0, .. }) {
            let mut y = x.clone();
            y[k] += 1e-3;
            assert!(np.scaled_violation(&y) > 1e-6, "gamma above the drop");
            y[k] -= 2e-3;
            assert!(np.scaled_violation(&y) > 1e-6, "gamma below the drop");
        }
    }
}

#[test]
fn choice_potentials_split_the_drop() {
    let net = series(0.0);
    let model = MisocModel::from_network(&net, &cfg(true)).unwrap();
    let np = model.root();
    let a = DesignAssignment { diameters: [("p1".into(), 1), ("p2".into(), 0)].into(), ..Default::default() };
    let sol = FlowSolution { assignment: a, flows: vec![2.0, 2.0], pi: vec![100.0, 96.0, 64.0] };
    let x = model.embed(&np, &sol).unwrap();
    assert!(np.scaled_violation(&x) < 1e-12);
    let mut drop = 0.0;
    for (k, r) in np.roles.iter().enumerate() {
        if let Role::Gamma { arc: 0, choice: Some(_) } = r {
            drop += x[k];
        }
    }
    assert_eq!(drop, sol.pi[0] - sol.pi[1]);
}

#[test]
fn enumerated_designs_embed_in_mixed_network() {
    let net = mixed();
    let designs = feasible_designs(&net);
    assert!(!designs.is_empty());
    assert!(designs.iter().any(|d| d.flows[1] < 0.0), "a reverse flow is exercised");
    for on in [false, true] {
        let model = MisocModel::from_network(&net, &cfg(on)).unwrap();
        let np = model.root();
        for d in &designs {
            let x = model.embed(&np, d).unwrap();
            let v = np.scaled_violation(&x);
            assert!(v <= 1e-9, "perspective {on}: {v:e} for {:?}", d.assignment);
        }
    }
}

#[test]
fn series_bound_below_optimum() {
    let net = series(90.0);
    assert_eq!(opt(&net), Some(30.0));
    for on in [false, true] {
        let model = MisocModel::from_network(&net, &cfg(on)).unwrap();
        let sol = solve_misoc(&model, T);
        assert_eq!(sol.status, MisocStatus::Optimal);
        assert!(sol.bound <= 30.0 + 1e-9, "{}", sol.bound);
        assert!(sol.bound >= 20.0 - 1e-9);
    }
}

#[test]
fn infeasible_box_is_detected() {
    let net = network(
        vec![node("s", -2.0, 0.0, 10.0), node("t", 2.0, 20.0, 30.0)],
        vec![pipe("p", "s", "t", ladder(2, 1.0, 10.0, 10.0))],
    );
    let model = MisocModel::from_network(&net, &cfg(true)).unwrap();
    let sol = solve_misoc(&model, T);
    assert_eq!(sol.status, MisocStatus::Infeasible);
    assert_eq!(sol.bound, f64::INFINITY);
}

#[test]
fn zero_time_limit_reports_valid_bound() {
    let net = series(90.0);
    let model = MisocModel::from_network(&net, &cfg(true)).unwrap();
    let sol = solve_misoc(&model, Duration::ZERO);
    assert_eq!(sol.status, MisocStatus::TimedOut);
    assert!(sol.bound <= 30.0);
}

#[test]
fn heuristic_validates_slack_point() {
    let net = series(0.0);
    let c = cfg(true);
    let model = MisocModel::from_network(&net, &c).unwrap();
    let sol = solve_misoc(&model, T);
    let HeuristicOutcome::Feasible(d) = fix_and_validate(&model, sol.point.as_ref().unwrap(), &c, T).unwrap() else {
        panic!()
    };
    assert_eq!(d.cost, 20.0);
}

#[test]
fn heuristic_reports_residuals_when_refuted() {
    let net = series(90.0);
    let c = cfg(false);
    let model = MisocModel::from_network(&net, &c).unwrap();
    // Cheapest diameters with the flows and potentials of a real design:
    // the pipe block shows the mismatch.
    let binaries: Vec<f64> = model
        .binaries()
        .iter()
        .map(|b| match b {
            MisocBinary::Diameter { choice, .. } => (*choice == 0) as u8 as f64,
            _ => 1.0,
        })
        .collect();
    let point = MisocPoint { binaries, flows: vec![2.0, 2.0], pi: vec![100.0, 96.0, 64.0], value: 20.0 };
    match fix_and_validate(&model, &point, &c, T).unwrap() {
        HeuristicOutcome::Infeasible { outcome, residuals } => {
            assert_eq!(outcome, "Infeasible");
            assert!(residuals.pipe > 0.1, "{residuals:?}");
            assert_eq!(residuals.flow_conserv, 0.0);
        }
        other => panic!("{other:?}"),
    }
    let mut frac = point.clone();
    frac.binaries[0] = 0.5;
    assert!(fix_and_validate(&model, &frac, &c, T).is_err());
}

#[test]
fn export_lists_every_row() {
    let net = mixed();
    let model = MisocModel::from_network(&net, &cfg(true)).unwrap();
    let np = model.root();
    let text = export_text(&model, &np);
    let count = |prefix: char| {
        let row = |l: &str| l.strip_prefix(prefix).is_some_and(|r| r.starts_with(|c: char| c.is_ascii_digit()));
        text.lines().filter(|l| row(l.trim_start())).count()
    };
    assert_eq!(count('e'), np.program.equalities.len());
    assert_eq!(count('i'), np.program.inequalities.len());
    assert!(text.contains("q[p1,0]^2 / d[p1,0]"));
    assert!(text.contains("gamma[r]"));
    assert!(text.lines().any(|l| l.trim() == "binary"));
    assert!(text.contains("xp[p2]") && text.contains("y[c]"));
    assert!(text.ends_with("end\n"));
    let off = export_text(&MisocModel::from_network(&net, &cfg(false)).unwrap(), &np);
    assert!(off.starts_with("# test, perspective off"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn feasible_designs_map_into_relaxation(seed in 0u64..10_000) {
        let net = toy(seed);
        let designs = feasible_designs(&net);
        for on in [false, true] {
            let model = MisocModel::from_network(&net, &cfg(on)).unwrap();
            let np = model.root();
            for d in &designs {
                // The validator meets its rows to its own tolerance; the
                // image may inherit that error but nothing more.
                let own = residual_report(d, &net).unwrap().max();
                let x = model.embed(&np, d).unwrap();
                let v = np.scaled_violation(&x);
                prop_assert!(v <= 1e-9 + own, "perspective {}: {:e} (own {:e})", on, v, own);
            }
        }
    }

    #[test]
    fn bound_below_optimum_and_perspective_tighter(seed in 0u64..10_000) {
        let net = toy(seed);
        let best = opt(&net).unwrap_or(f64::INFINITY);
        let mut root = [0.0; 2];
        let mut full = [0.0; 2];
        for (k, on) in [false, true].into_iter().enumerate() {
            let model = MisocModel::from_network(&net, &cfg(on)).unwrap();
            let sol = solve_misoc(&model, T);
            prop_assert!(sol.status != MisocStatus::TimedOut);
            prop_assert!(sol.bound <= best * (1.0 + 1e-12), "{} > {}", sol.bound, best);
            full[k] = sol.bound;
            let np = model.root();
            let r = convex::solve(&np.program, &Settings::default());
            root[k] = if r.status == Status::Optimal { r.objective + np.offset } else { f64::INFINITY };
        }
        prop_assert!(full[1] >= full[0] - 1e-8, "{:?}", full);
        if root[0].is_finite() {
            prop_assert!(root[1] >= root[0] - 1e-8 * root[0].abs().max(1.0), "{:?}", root);
        }
    }
}
