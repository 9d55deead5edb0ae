use std::time::{Duration, Instant};

use super::search::{BudgetOracle, Verdict};
use super::FeasibleDesign;
use crate::error::Result;
use crate::mip::{add_nogood, solve_master, MasterMode, MasterOutcome, MasterProblem, DEFAULT_MASTER_TIME_LIMIT};
use crate::model::{assignment_cost, ArcKind, FormulationConfig, Instance};
use crate::subproblem::{validate, ValidationMode, ValidationOutcome, ValidationProblem};

#[derive(Debug, Clone, PartialEq)]
pub enum PrimalLoopResult {
    FeasibleBudget(FeasibleDesign),
    /// The master with its cuts has no assignment within the budget.
    InfeasibleBudget,
    TimedOut,
}

/// Primal master and its cut pool, kept across budgets: a cut records that
/// an assignment cannot carry the nomination, which no budget changes.
#[derive(Debug, Clone)]
pub struct PrimalContext {
    master: MasterProblem,
    master_limit: Duration,
    /// Cuts added for assignments the validator could not decide. While any
    /// exist, master infeasibility is not a proof.
    tentative: usize,
    pub cuts_added: usize,
    pub master_solves: usize,
    /// Cheapest validated design seen by [`BudgetOracle::check`].
    pub best: Option<FeasibleDesign>,
}

impl PrimalContext {
    pub fn new(instance: &Instance, config: &FormulationConfig) -> Result<Self> {
        let master = MasterProblem::new(instance, MasterMode::PrimalMaster, 1.0, config.clone())?;
        Ok(PrimalContext { master, master_limit: DEFAULT_MASTER_TIME_LIMIT, tentative: 0, cuts_added: 0, master_solves: 0, best: None })
    }

    /// Caps each master solve; the loop itself is bounded by its deadline.
    pub fn with_master_limit(mut self, limit: Duration) -> Self {
        self.master_limit = limit;
        self
    }

    pub fn master(&self) -> &MasterProblem {
        &self.master
    }

    pub fn tentative_cuts(&self) -> usize {
        self.tentative
    }

    /// Alternates master solves and validations at `budget` until a design
    /// validates, the master runs dry, or `deadline` passes.
    pub fn run(&mut self, budget: f64, deadline: Instant) -> PrimalLoopResult {
        self.master.set_budget(budget);
        let eps = self.master.config().eps_feas;
        loop {
            let now = Instant::now();
            if now >= deadline {
                return PrimalLoopResult::TimedOut;
            }
            self.master_solves += 1;
            let assignment = match solve_master(&self.master, self.master_limit.min(deadline - now)) {
                MasterOutcome::Assignment { assignment, .. } => assignment,
                MasterOutcome::TimedOut { best: Some((assignment, _, _)) } => assignment,
                MasterOutcome::TimedOut { best: None } => return PrimalLoopResult::TimedOut,
                MasterOutcome::Infeasible if self.tentative == 0 => return PrimalLoopResult::InfeasibleBudget,
                MasterOutcome::Infeasible => return PrimalLoopResult::TimedOut,
            };
            let net = self.master.network();
            let problem = match ValidationProblem::with_tolerance(net, &assignment, ValidationMode::Primal, eps) {
                Ok(p) => p,
                Err(e) => {
                    log::error!("master returned an unusable assignment: {e}");
                    return PrimalLoopResult::TimedOut;
                }
            };
            let now = Instant::now();
            let outcome = validate(&problem, deadline.saturating_duration_since(now));
            let proven = match outcome {
                ValidationOutcome::Feasible(solution) => {
                    let cost = assignment_cost(&assignment, net).expect("master assignments are complete");
                    log::debug!("budget {budget:.6e}: design of cost {cost:.6e} validates");
                    return PrimalLoopResult::FeasibleBudget(FeasibleDesign { assignment, cost, solution });
                }
                ValidationOutcome::TimedOut { .. } => return PrimalLoopResult::TimedOut,
                ValidationOutcome::Infeasible { .. } => true,
                ValidationOutcome::Inconclusive { .. } => false,
            };
            match add_nogood(&mut self.master, &assignment) {
                Ok(true) => {}
                Ok(false) | Err(_) => {
                    log::error!("master repeated an excluded assignment");
                    return PrimalLoopResult::TimedOut;
                }
            }
            self.cuts_added += 1;
            if !proven {
                self.tentative += 1;
            }
            log::debug!("budget {budget:.6e}: cut {} ({})", self.cuts_added, outcome.label());
        }
    }
}

impl BudgetOracle for PrimalContext {
    fn check(&mut self, budget: f64, deadline: Instant) -> Verdict {
        match self.run(budget, deadline) {
            PrimalLoopResult::FeasibleBudget(d) => {
                let cost = d.cost;
                if self.best.as_ref().map_or(true, |b| cost < b.cost) {
                    self.best = Some(d);
                }
                Verdict::Feasible { cost }
            }
            PrimalLoopResult::InfeasibleBudget => Verdict::Infeasible,
            PrimalLoopResult::TimedOut => Verdict::TimedOut,
        }
    }

    fn saturation(&self) -> f64 {
        let net = self.master.network();
        net.pipes()
            .iter()
            .map(|&a| match &net.arc(a).kind {
                ArcKind::Pipe { candidates, .. } => candidates.iter().map(|c| c.cost).fold(0.0, f64::max),
                _ => 0.0,
            })
            .sum()
    }
}

/// Checks one budget with a fresh cut pool.
pub fn primal_bound_loop(
    instance: &Instance,
    config: &FormulationConfig,
    budget: f64,
    time_limit: Duration,
) -> Result<PrimalLoopResult> {
    let mut ctx = PrimalContext::new(instance, config)?;
    Ok(ctx.run(budget, Instant::now() + time_limit))
}
