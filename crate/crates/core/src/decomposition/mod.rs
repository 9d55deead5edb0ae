//! Budget-driven decomposition: the primal bound loop checks one budget by
//! alternating master solves and validations, the binary search moves the
//! budget between proven bounds, and the initial budget search seeds it.

mod initial;
mod primal;
mod report;
mod search;
#[cfg(test)]
mod tests;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use initial::{initial_budget_search, initial_budget_search_limited, InitialSearch, InitialSearchResult};
pub use primal::{primal_bound_loop, PrimalContext, PrimalLoopResult};
pub use report::{format_budget, format_gap, format_time, text_table, HeuristicResult, RunReport, RunStatus, TABLE_COLUMNS};
pub use search::{
    binary_search, BudgetOracle, BudgetSearchState, BudgetStep, ScriptedOracle, SearchResult, SearchStop, Verdict,
};

use crate::error::Result;
use crate::model::{DesignAssignment, FormulationConfig, Instance};
use crate::subproblem::FlowSolution;

/// A design that validated, with its construction cost.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleDesign {
    pub assignment: DesignAssignment,
    pub cost: f64,
    pub solution: FlowSolution,
}

/// `(upper - lower) / lower * 100`; `None` unless both are finite and
/// `lower > 0`.
pub fn gap_percent(upper: f64, lower: f64) -> Option<f64> {
    (upper.is_finite() && lower.is_finite() && lower > 0.0).then(|| (upper - lower) / lower * 100.0)
}

/// Wall-clock limits of the phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseLimits {
    pub initial: Duration,
    pub binary: Duration,
    /// Per checked budget.
    pub primal: Duration,
    /// Per master solve inside a primal loop.
    pub master: Duration,
}

impl PhaseLimits {
    /// Ten minutes, five hours, 45 minutes and one minute.
    pub fn production() -> Self {
        PhaseLimits {
            initial: Duration::from_secs(600),
            binary: Duration::from_secs(5 * 3600),
            primal: Duration::from_secs(45 * 60),
            master: Duration::from_secs(60),
        }
    }
}

impl Default for PhaseLimits {
    /// Production limits scaled down a hundredfold for desk runs, with a
    /// master limit that stays below the loop limit.
    fn default() -> Self {
        PhaseLimits {
            initial: Duration::from_secs(6),
            binary: Duration::from_secs(180),
            primal: Duration::from_secs(27),
            master: Duration::from_secs(10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub formulation: FormulationConfig,
    pub limits: PhaseLimits,
    /// Absolute gap stop; `0` disables it.
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Caps the initial search's validations in addition to its time limit.
    pub initial_max_checks: Option<usize>,
    /// When set, the relaxation bound (solved within this limit) may raise
    /// the initial lower bound.
    pub relaxation_limit: Option<Duration>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            formulation: FormulationConfig::default(),
            limits: PhaseLimits::default(),
            eps_abs: 0.0,
            eps_rel: 1e-4,
            initial_max_checks: None,
            relaxation_limit: None,
        }
    }
}

/// Initial budget search, then the binary search from twice its bound
/// unless it already found the optimum.
pub fn run_overall(instance: &Instance, config: &SolveConfig) -> Result<RunReport> {
    let start = Instant::now();
    let init =
        initial_budget_search_limited(instance, &config.formulation, config.limits.initial, config.initial_max_checks)?;
    let mut report = RunReport::empty(&instance.name, config);
    report.initial_cuts = init.pool.len();
    match init.result {
        InitialSearchResult::Optimal(design) => {
            log::info!("initial search validated its cheapest assignment at cost {:.6e}", design.cost);
            report.status = RunStatus::Optimal;
            report.initial_budget_solved = true;
            report.upper = design.cost;
            report.lower = design.cost;
            report.design = Some(design.assignment);
        }
        InitialSearchResult::Exhausted => {
            log::info!("initial search refuted every assignment");
            report.status = RunStatus::Infeasible;
        }
        InitialSearchResult::LowerBound(bound) => {
            let mut lower = bound;
            if let Some(limit) = config.relaxation_limit {
                let relaxed = crate::relaxation::lower_bound(instance, &config.formulation, limit)?;
                report.relaxation_bound = relaxed.bound;
                report.heuristic = relaxed.heuristic;
                if let Some(r) = relaxed.bound {
                    lower = lower.max(r);
                }
            }
            let mut state = BudgetSearchState::new(2.0 * lower, lower)?;
            state.eps_abs = config.eps_abs;
            state.eps_rel = config.eps_rel;
            state.time_limit = config.limits.binary;
            state.check_limit = config.limits.primal;
            let mut ctx = PrimalContext::new(instance, &config.formulation)?.with_master_limit(config.limits.master);
            let offset = start.elapsed();
            let res = binary_search(state, &mut ctx)?;
            report.status = match res.stop {
                SearchStop::GapClosed => RunStatus::GapClosed,
                SearchStop::TimeLimit => RunStatus::TimeLimit,
                SearchStop::Refuted => RunStatus::Infeasible,
            };
            report.upper = res.upper;
            // A refuted saturation budget proves no design exists at all.
            report.lower = if res.stop == SearchStop::Refuted { f64::INFINITY } else { res.lower };
            report.cuts_added = ctx.cuts_added;
            report.tentative_cuts = ctx.tentative_cuts();
            report.budgets_checked = res.steps.len();
            report.time_to_20 = res.time_to_20.map(|t| (t + offset).as_secs_f64());
            report.design = ctx.best.map(|d| d.assignment);
            report.trajectory = res.steps;
        }
    }
    report.gap_percent = gap_percent(report.upper, report.lower);
    // Reported only for runs that end strictly between 0% and 20%.
    if !report.gap_percent.is_some_and(|g| g > 0.0 && g < 20.0) {
        report.time_to_20 = None;
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}
