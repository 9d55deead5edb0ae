use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::gap_percent;
use crate::error::{Error, Result};

/// Answer of one budget check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Verdict {
    /// A validated design of cost `cost <= budget` exists.
    Feasible { cost: f64 },
    /// No design within the budget carries the nomination.
    Infeasible,
    TimedOut,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Feasible { .. } => "feasible",
            Verdict::Infeasible => "infeasible",
            Verdict::TimedOut => "timeout",
        }
    }
}

/// Decides budgets for the binary search.
pub trait BudgetOracle {
    fn check(&mut self, budget: f64, deadline: Instant) -> Verdict;

    /// Budget at which every assignment fits. An infeasible verdict there
    /// refutes the instance, ending the search.
    fn saturation(&self) -> f64 {
        f64::INFINITY
    }
}

/// Scripted oracle replaying fixed answers; `TimedOut` once exhausted.
#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    answers: std::collections::VecDeque<Verdict>,
    pub asked: Vec<f64>,
}

impl ScriptedOracle {
    pub fn new(answers: impl IntoIterator<Item = Verdict>) -> Self {
        ScriptedOracle { answers: answers.into_iter().collect(), asked: Vec::new() }
    }

    pub fn remaining(&self) -> usize {
        self.answers.len()
    }
}

impl BudgetOracle for ScriptedOracle {
    fn check(&mut self, budget: f64, _deadline: Instant) -> Verdict {
        self.asked.push(budget);
        self.answers.pop_front().unwrap_or(Verdict::TimedOut)
    }
}

/// Budget bounds and stopping rules of the binary search.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSearchState {
    /// Next budget to check; always positive.
    pub c: f64,
    /// Cost of the best validated design, `INFINITY` before one is known.
    pub upper: f64,
    /// Largest proven-infeasible budget or initial lower bound.
    pub lower: f64,
    /// Absolute gap stop; `0` disables it.
    pub eps_abs: f64,
    /// Relative gap stop.
    pub eps_rel: f64,
    /// Wall-clock budget of the whole search.
    pub time_limit: Duration,
    /// Limit on each budget check.
    pub check_limit: Duration,
}

/// One checked budget and the bounds after its update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetStep {
    pub budget: f64,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub next: f64,
    #[serde(with = "crate::model::inf_as_null")]
    pub upper: f64,
    pub lower: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStop {
    GapClosed,
    TimeLimit,
    /// Proven infeasible at a budget every assignment fits.
    Refuted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub upper: f64,
    pub lower: f64,
    pub stop: SearchStop,
    pub steps: Vec<BudgetStep>,
    /// Elapsed time when the gap first dropped to 20% or below.
    pub time_to_20: Option<Duration>,
}

impl BudgetSearchState {
    pub fn new(c: f64, lower: f64) -> Result<Self> {
        let s = BudgetSearchState {
            c,
            upper: f64::INFINITY,
            lower,
            eps_abs: 0.0,
            eps_rel: 1e-4,
            time_limit: Duration::from_secs(180),
            check_limit: Duration::from_secs(27),
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::invalid(format!("budget must be positive and finite, got {}", self.c)));
        }
        if self.lower.is_nan() || self.lower > self.upper {
            return Err(Error::invariant(format!("lower bound {} above upper bound {}", self.lower, self.upper)));
        }
        if self.eps_abs < 0.0 || self.eps_rel < 0.0 {
            return Err(Error::invalid("gap tolerances must be nonnegative"));
        }
        Ok(())
    }

    /// Gap stop: absolute (when enabled) or relative closure.
    pub fn gap_closed(&self) -> bool {
        if !self.upper.is_finite() {
            return false;
        }
        let d = self.upper - self.lower;
        (self.eps_abs > 0.0 && d < self.eps_abs) || (self.lower > 0.0 && d / self.lower < self.eps_rel) || d <= 0.0
    }

    /// Applies one verdict for the current budget.
    pub fn update(&mut self, verdict: Verdict) {
        let c = self.c;
        match verdict {
            Verdict::Feasible { cost } => {
                if cost < self.upper {
                    self.upper = cost;
                }
                self.c = if c / 2.0 <= self.lower { (self.lower + c) / 2.0 } else { c / 2.0 };
            }
            Verdict::Infeasible => {
                if c > self.lower {
                    self.lower = c;
                }
                self.c = if 2.0 * c >= self.upper { (self.upper + self.lower) / 2.0 } else { 2.0 * c };
            }
            Verdict::TimedOut => {
                self.c = if 2.0 * c >= self.upper { (self.upper + c) / 2.0 } else { 2.0 * c };
            }
        }
    }
}

/// Binary search on the budget. Each check gets at most `check_limit`.
pub fn binary_search(mut state: BudgetSearchState, oracle: &mut dyn BudgetOracle) -> Result<SearchResult> {
    state.check()?;
    let start = Instant::now();
    let end = start + state.time_limit;
    let mut steps = Vec::new();
    let mut time_to_20 = None;
    let saturation = oracle.saturation();
    let stop = loop {
        if state.gap_closed() {
            break SearchStop::GapClosed;
        }
        let now = Instant::now();
        if now >= end {
            break SearchStop::TimeLimit;
        }
        let budget = state.c;
        let verdict = oracle.check(budget, end.min(now + state.check_limit));
        state.update(verdict);
        log::info!(
            "budget {budget:.6e}: {} -> next C {:.6e} (upper {:.6e}, lower {:.6e})",
            verdict.label(),
            state.c,
            state.upper,
            state.lower
        );
        if time_to_20.is_none() && gap_percent(state.upper, state.lower).is_some_and(|g| g <= 20.0) {
            time_to_20 = Some(start.elapsed());
        }
        steps.push(BudgetStep {
            budget,
            verdict,
            next: state.c,
            upper: state.upper,
            lower: state.lower,
            seconds: start.elapsed().as_secs_f64(),
        });
        if verdict == Verdict::Infeasible && budget >= saturation {
            break SearchStop::Refuted;
        }
    };
    Ok(SearchResult { upper: state.upper, lower: state.lower, stop, steps, time_to_20 })
}
