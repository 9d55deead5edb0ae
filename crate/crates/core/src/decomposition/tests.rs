use std::time::{Duration, Instant};

use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::ingest::{generate_synthetic, ComponentMix};
use crate::model::{assignment_cost, cheapest_cost, Network, Nomination};
use crate::testutil::*;

const T: Duration = Duration::from_secs(30);

fn instance(net: Network) -> Instance {
    let nom = Nomination::from_network(&net);
    Instance::new("toy", net, nom).unwrap()
}

/// Two pipes in series. Energy prefers upgrading the second pipe, but the
/// middle node's box only admits the first pipe upgraded.
fn series(m_min: f64) -> Instance {
    instance(network(
        vec![node("s", -2.0, 0.0, 100.0), node("m", 0.0, m_min, 100.0), node("t", 2.0, 0.0, 100.0)],
        vec![pipe("p1", "s", "m", ladder(2, 4.0, 10.0, 10.0)), pipe("p2", "m", "t", ladder(2, 8.0, 10.0, 10.0))],
    ))
}

fn quick() -> SolveConfig {
    SolveConfig {
        limits: PhaseLimits { initial: T, binary: T, primal: T, master: T },
        ..Default::default()
    }
}

/// Cheapest validated design cost by exhaustive validation.
fn enumerated_optimum(inst: &Instance) -> Option<f64> {
    let net = inst.net();
    feasible_designs(net).iter().map(|d| assignment_cost(&d.assignment, net).unwrap()).min_by(f64::total_cmp)
}

#[test]
fn gap_matches_table_values() {
    assert_eq!(format!("{:.2}", gap_percent(1.792e9, 1.417e9).unwrap()), "26.46");
    assert_eq!(format!("{:.2}", gap_percent(12.69e9, 10.53e9).unwrap()), "20.51");
    assert_eq!(gap_percent(5.0, 5.0), Some(0.0));
    assert_eq!(gap_percent(f64::INFINITY, 5.0), None);
    assert_eq!(gap_percent(5.0, 0.0), None);
}

#[test]
fn update_rules() {
    let mut s = BudgetSearchState::new(16.0, 7.0).unwrap();
    s.update(Verdict::Feasible { cost: 16.0 });
    assert_eq!((s.c, s.upper), (8.0, 16.0));
    let mut s = BudgetSearchState::new(12.0, 7.0).unwrap();
    s.update(Verdict::Feasible { cost: 12.0 });
    assert_eq!(s.c, 9.5);
    s.update(Verdict::Infeasible);
    assert_eq!((s.c, s.lower), (10.75, 9.5));
    s.update(Verdict::TimedOut);
    assert_eq!((s.c, s.lower, s.upper), ((12.0 + 10.75) / 2.0, 9.5, 12.0));
    // With no upper bound, both non-feasible branches double.
    let mut s = BudgetSearchState::new(3.0, 1.0).unwrap();
    s.update(Verdict::TimedOut);
    assert_eq!(s.c, 6.0);
    s.update(Verdict::Infeasible);
    assert_eq!((s.c, s.lower), (12.0, 6.0));
}

#[test]
fn feasible_cost_below_budget_sets_upper() {
    let mut s = BudgetSearchState::new(20.0, 5.0).unwrap();
    s.update(Verdict::Feasible { cost: 13.0 });
    assert_eq!((s.upper, s.c), (13.0, 10.0));
    s.update(Verdict::Feasible { cost: 14.0 });
    assert_eq!(s.upper, 13.0);
}

#[test]
fn bad_states_rejected() {
    assert!(BudgetSearchState::new(0.0, 0.0).is_err());
    assert!(BudgetSearchState::new(f64::INFINITY, 0.0).is_err());
    let mut s = BudgetSearchState::new(1.0, 2.0).unwrap();
    s.upper = 1.5;
    assert!(s.check().is_err());
}

#[test]
fn scripted_search_stops_on_gap() {
    let script = [Verdict::Feasible { cost: 10.0 }, Verdict::Infeasible, Verdict::Infeasible, Verdict::Infeasible];
    let mut oracle = ScriptedOracle::new(script);
    let mut s = BudgetSearchState::new(10.0, 4.0).unwrap();
    s.eps_abs = 2.0;
    let r = binary_search(s, &mut oracle).unwrap();
    assert_eq!(oracle.asked, [10.0, 5.0, 7.5, 8.75]);
    assert_eq!(r.stop, SearchStop::GapClosed);
    assert_eq!((r.upper, r.lower), (10.0, 8.75));
    assert_eq!(oracle.remaining(), 0);
}

#[test]
fn refuted_instance_stops_the_search() {
    struct Never;
    impl BudgetOracle for Never {
        fn check(&mut self, _: f64, _: Instant) -> Verdict {
            Verdict::Infeasible
        }
        fn saturation(&self) -> f64 {
            100.0
        }
    }
    let r = binary_search(BudgetSearchState::new(10.0, 1.0).unwrap(), &mut Never).unwrap();
    assert_eq!(r.stop, SearchStop::Refuted);
    assert_eq!(r.steps.iter().map(|s| s.budget).collect::<Vec<_>>(), [10.0, 20.0, 40.0, 80.0, 160.0]);
}

#[test]
fn primal_loop_feasible_above_witness_cost() {
    let syn = generate_synthetic(3, 5, &ComponentMix { pipes: 6, slack: 0.4, ..Default::default() }).unwrap();
    let inst = syn.clone().into_instance(3, &[]).unwrap();
    let cost = assignment_cost(&syn.witness, inst.net()).unwrap();
    match primal_bound_loop(&inst, &FormulationConfig::default(), cost, T).unwrap() {
        PrimalLoopResult::FeasibleBudget(d) => assert!(d.cost <= cost * (1.0 + 1e-12)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn primal_loop_below_cheapest_is_one_solve() {
    let inst = series(90.0);
    let mut ctx = PrimalContext::new(&inst, &FormulationConfig::default()).unwrap();
    let r = ctx.run(cheapest_cost(inst.net()) * 0.75, Instant::now() + T);
    assert_eq!(r, PrimalLoopResult::InfeasibleBudget);
    assert_eq!((ctx.master_solves, ctx.cuts_added), (1, 0));
}

#[test]
fn primal_loop_cuts_once_then_validates() {
    let inst = series(90.0);
    let mut ctx = PrimalContext::new(&inst, &FormulationConfig::default()).unwrap();
    let PrimalLoopResult::FeasibleBudget(d) = ctx.run(30.0, Instant::now() + T) else { panic!() };
    assert_eq!(ctx.cuts_added, 1);
    assert_eq!(d.assignment.diameter("p1"), Some(1));
    assert_eq!(d.assignment.diameter("p2"), Some(0));
    assert_eq!(d.cost, 30.0);
    // The pool persists: the next budget starts from the refuted design's cut.
    assert_eq!(ctx.master().pool().len(), 1);
}

#[test]
fn initial_search_optimal_at_cheapest() {
    let inst = series(0.0);
    let s = initial_budget_search(&inst, &FormulationConfig::default(), T).unwrap();
    let InitialSearchResult::Optimal(d) = s.result else { panic!("{:?}", s.result) };
    assert_eq!(d.cost, cheapest_cost(inst.net()));
    assert!(s.pool.is_empty());
}

#[test]
fn initial_search_exhausts_impossible_bounds() {
    let inst = instance(network(
        vec![node("s", -2.0, 0.0, 10.0), node("t", 2.0, 10.0, 20.0)],
        vec![pipe("p", "s", "t", ladder(2, 1.0, 10.0, 10.0))],
    ));
    let s = initial_budget_search(&inst, &FormulationConfig::default(), T).unwrap();
    assert_eq!(s.result, InitialSearchResult::Exhausted);
    assert_eq!(s.pool.len(), 2);
    let r = run_overall(&inst, &quick()).unwrap();
    assert_eq!((r.status, r.exit_code()), (RunStatus::Infeasible, 3));
}

#[test]
fn initial_search_bound_rises_after_first_cut() {
    let inst = series(90.0);
    let s = initial_budget_search_limited(&inst, &FormulationConfig::default(), T, Some(1)).unwrap();
    let InitialSearchResult::LowerBound(b) = s.result else { panic!("{:?}", s.result) };
    assert!(b > cheapest_cost(inst.net()));
    assert_eq!(s.pool.len(), 1);
    let full = initial_budget_search(&inst, &FormulationConfig::default(), T).unwrap();
    let InitialSearchResult::Optimal(d) = full.result else { panic!() };
    assert_eq!(d.cost, 30.0);
}

#[test]
fn overall_short_circuits_on_initial_optimum() {
    let r = run_overall(&series(0.0), &quick()).unwrap();
    assert_eq!(r.status, RunStatus::Optimal);
    assert!(r.initial_budget_solved);
    assert_eq!(r.upper, r.lower);
    assert_eq!(r.gap_percent, Some(0.0));
    assert_eq!(r.budgets_checked, 0);
    assert_eq!(r.exit_code(), 0);
}

#[test]
fn overall_binary_search_closes_gap() {
    let cfg = SolveConfig { initial_max_checks: Some(1), ..quick() };
    let r = run_overall(&series(90.0), &cfg).unwrap();
    assert_eq!(r.status, RunStatus::GapClosed);
    assert_eq!(r.upper, 30.0);
    assert!(r.gap_percent.unwrap() < 1e-2);
    assert!(r.budgets_checked > 0);
    assert_eq!(r.exit_code(), 0);
    let json = serde_json::to_string(&r).unwrap();
    let back: RunReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
}

#[test]
fn relaxation_bound_seeds_the_search() {
    let cfg = SolveConfig { initial_max_checks: Some(1), relaxation_limit: Some(T), ..quick() };
    let r = run_overall(&series(90.0), &cfg).unwrap();
    let b = r.relaxation_bound.unwrap();
    assert!(b <= 30.0 + 1e-9, "{b}");
    assert!(r.heuristic.is_some());
    assert_eq!((r.status, r.upper), (RunStatus::GapClosed, 30.0));
    assert!(r.trajectory[0].budget >= 2.0 * b * (1.0 - 1e-12));
    assert_sandwich(&r);
}

#[test]
fn table_has_documented_columns() {
    let r = run_overall(&series(0.0), &quick()).unwrap();
    let t = text_table(&[r.clone()]);
    let mut lines = t.lines();
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(header, TABLE_COLUMNS);
    let row: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(row[0], "toy");
    assert_eq!(row[1], format_budget(r.upper));
    assert_eq!(row[3], "0.00");
    assert_eq!(row[5], "yes");
    assert_eq!(format_budget(1.792e9), "1.792");
    assert_eq!(format_budget(30.0), "3.000e-8");
}

fn toy(seed: u64) -> Instance {
    let mix = ComponentMix {
        pipes: 4,
        compressors: (seed % 3 == 1) as usize,
        valves: (seed % 3 == 2) as usize,
        slack: 0.15,
        multipliers: vec![0.8, 1.3],
        ..Default::default()
    };
    generate_synthetic(seed, 4, &mix).unwrap().into_instance(seed, &[0.8, 1.3]).unwrap()
}

fn assert_sandwich(r: &RunReport) {
    let (mut lo, mut up) = (f64::NEG_INFINITY, f64::INFINITY);
    for s in &r.trajectory {
        assert!(s.lower <= s.upper, "{s:?}");
        assert!(s.lower >= lo && s.upper <= up, "{s:?}");
        lo = s.lower;
        up = s.upper;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn overall_matches_enumeration(seed in 0u64..5_000, skip_initial: bool) {
        let inst = toy(seed);
        prop_assert!(inst.binary_count() <= 12);
        let cfg = SolveConfig { initial_max_checks: skip_initial.then_some(1), ..quick() };
        let r = run_overall(&inst, &cfg).unwrap();
        assert_sandwich(&r);
        match enumerated_optimum(&inst) {
            Some(opt) => {
                prop_assert!(matches!(r.status, RunStatus::Optimal | RunStatus::GapClosed), "{:?}", r.status);
                assert_relative_eq!(r.upper, opt, max_relative = 1e-12);
            }
            None => prop_assert_eq!(r.status, RunStatus::Infeasible),
        }
    }

    #[test]
    fn optimal_budget_monotone_in_stress(seed in 0u64..5_000) {
        let mix = ComponentMix { pipes: 4, slack: 0.3, multipliers: vec![0.8, 1.0, 1.3], ..Default::default() };
        let syn = generate_synthetic(seed, 4, &mix).unwrap();
        let mut last = 0.0;
        for s in [0.5, 1.0, 1.2] {
            let nom = crate::ingest::apply_stress(&syn.nomination, s).unwrap();
            let inst = Instance::new("stress", syn.network.clone(), nom).unwrap();
            let opt = enumerated_optimum(&inst).unwrap_or(f64::INFINITY);
            prop_assert!(opt >= last, "stress {s}: {opt} < {last}");
            last = opt;
        }
    }
}
