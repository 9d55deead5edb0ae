use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::search::BudgetStep;
use super::SolveConfig;
use crate::model::DesignAssignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// The initial search validated its cheapest assignment.
    Optimal,
    GapClosed,
    TimeLimit,
    /// No budget admits a feasible design.
    Infeasible,
}

/// Outcome of fixing a relaxed point's binaries and validating them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicResult {
    pub feasible: bool,
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub instance: String,
    pub status: RunStatus,
    /// Best validated design cost.
    #[serde(with = "crate::model::inf_as_null")]
    pub upper: f64,
    /// Proven lower bound; infinite when the instance is infeasible.
    #[serde(with = "crate::model::inf_as_null")]
    pub lower: f64,
    pub gap_percent: Option<f64>,
    pub wall_time: f64,
    /// Elapsed seconds when the gap first reached 20%, for runs ending
    /// strictly between 0% and 20%.
    pub time_to_20: Option<f64>,
    pub initial_budget_solved: bool,
    pub initial_cuts: usize,
    pub budgets_checked: usize,
    /// No-good cuts added by the primal bound loops.
    pub cuts_added: usize,
    /// Of those, cuts for designs the validator could not decide.
    pub tentative_cuts: usize,
    pub relaxation_bound: Option<f64>,
    pub heuristic: Option<HeuristicResult>,
    pub perspective: bool,
    pub config: SolveConfig,
    pub design: Option<DesignAssignment>,
    pub trajectory: Vec<BudgetStep>,
}

impl RunReport {
    pub(crate) fn empty(instance: &str, config: &SolveConfig) -> Self {
        RunReport {
            instance: instance.to_string(),
            status: RunStatus::TimeLimit,
            upper: f64::INFINITY,
            lower: f64::INFINITY,
            gap_percent: None,
            wall_time: 0.0,
            time_to_20: None,
            initial_budget_solved: false,
            initial_cuts: 0,
            budgets_checked: 0,
            cuts_added: 0,
            tentative_cuts: 0,
            relaxation_bound: None,
            heuristic: None,
            perspective: config.formulation.perspective,
            config: config.clone(),
            design: None,
            trajectory: Vec::new(),
        }
    }

    /// Process exit code: 0 closed, 2 stopped with an incumbent, 3
    /// infeasible, 4 stopped without one.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Optimal | RunStatus::GapClosed => 0,
            RunStatus::TimeLimit if self.upper.is_finite() => 2,
            RunStatus::Infeasible => 3,
            RunStatus::TimeLimit => 4,
        }
    }
}

pub const TABLE_COLUMNS: [&str; 8] = ["Instance", "Upper(1e9)", "Lower(1e9)", "Gap(%)", "Time(s)", "Initial", "Budgets", "Cuts"];

/// Budget in units of 1e9: fixed three decimals, scientific below 1e-3.
pub fn format_budget(v: f64) -> String {
    if !v.is_finite() {
        return "-".into();
    }
    let s = v / 1e9;
    if s == 0.0 || s.abs() >= 1e-3 {
        format!("{s:.3}")
    } else {
        format!("{s:.3e}")
    }
}

pub fn format_gap(g: Option<f64>) -> String {
    g.map_or_else(|| "-".into(), |g| format!("{g:.2}"))
}

pub fn format_time(r: &RunReport) -> String {
    match r.time_to_20 {
        Some(t) => format!("{:.2} ({t:.2})", r.wall_time),
        None => format!("{:.2}", r.wall_time),
    }
}

/// Aligned table, one row per report.
pub fn text_table(reports: &[RunReport]) -> String {
    let rows: Vec<[String; 8]> = reports
        .iter()
        .map(|r| {
            [
                r.instance.clone(),
                format_budget(r.upper),
                format_budget(r.lower),
                format_gap(r.gap_percent),
                format_time(r),
                if r.initial_budget_solved { "yes".into() } else { "no".into() },
                r.budgets_checked.to_string(),
                r.cuts_added.to_string(),
            ]
        })
        .collect();
    let mut width: Vec<usize> = TABLE_COLUMNS.iter().map(|c| c.len()).collect();
    for row in &rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let mut l = String::new();
        for (k, (c, w)) in cells.iter().zip(&width).enumerate() {
            if k == 0 {
                let _ = write!(l, "{c:<w$}");
            } else {
                let _ = write!(l, "  {c:>w$}");
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(&TABLE_COLUMNS);
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&cells);
    }
    out
}
