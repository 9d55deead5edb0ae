use std::time::{Duration, Instant};

use super::FeasibleDesign;
use crate::error::Result;
use crate::mip::{initial_sequence, CutPool, MasterMode, MasterProblem, NoGoodCut};
use crate::model::{assignment_cost, FormulationConfig, Instance};
use crate::subproblem::{validate, ValidationMode, ValidationOutcome, ValidationProblem};

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSearchResult {
    /// The cheapest unrefuted assignment validated; its cost is optimal.
    Optimal(FeasibleDesign),
    /// No feasible design costs less than this.
    LowerBound(f64),
    /// Every assignment was refuted: the instance is infeasible at any budget.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct InitialSearch {
    pub result: InitialSearchResult,
    /// Refuted assignments, one cut each over diameters and compressor states.
    pub pool: CutPool,
    pub checked: usize,
}

/// Walks diameter and compressor assignments cheapest first, validating
/// each with valves and control valves searched, until one validates, the
/// space runs out or `time_limit` passes.
pub fn initial_budget_search(instance: &Instance, config: &FormulationConfig, time_limit: Duration) -> Result<InitialSearch> {
    initial_budget_search_limited(instance, config, time_limit, None)
}

/// As [`initial_budget_search`], stopping after at most `max_checks`
/// validations.
pub fn initial_budget_search_limited(
    instance: &Instance,
    config: &FormulationConfig,
    time_limit: Duration,
    max_checks: Option<usize>,
) -> Result<InitialSearch> {
    let deadline = Instant::now() + time_limit;
    let master = MasterProblem::new(instance, MasterMode::InitialMaster, 1.0, config.clone())?;
    let net = instance.net();
    let mut pool = CutPool::new();
    let mut checked = 0;
    // The sequence is nondecreasing in cost and never revisits an
    // assignment, so walking it equals re-solving the master after each cut.
    for assignment in initial_sequence(&master) {
        let cost = assignment_cost(&assignment, net)?;
        let now = Instant::now();
        if now >= deadline || max_checks.is_some_and(|m| checked >= m) {
            return Ok(InitialSearch { result: InitialSearchResult::LowerBound(cost), pool, checked });
        }
        let problem = ValidationProblem::with_tolerance(net, &assignment, ValidationMode::Initial, config.eps_feas)?;
        checked += 1;
        match validate(&problem, deadline - now) {
            ValidationOutcome::Feasible(solution) => {
                let design = FeasibleDesign { assignment: solution.assignment.clone(), cost, solution };
                return Ok(InitialSearch { result: InitialSearchResult::Optimal(design), pool, checked });
            }
            ValidationOutcome::Infeasible { .. } => {
                pool.add(NoGoodCut::new(net, &assignment));
                log::debug!("initial search: refuted assignment of cost {cost:.6e} ({} cuts)", pool.len());
            }
            other => {
                log::info!("initial search stopped at cost {cost:.6e}: {}", other.label());
                return Ok(InitialSearch { result: InitialSearchResult::LowerBound(cost), pool, checked });
            }
        }
    }
    Ok(InitialSearch { result: InitialSearchResult::Exhausted, pool, checked })
}
