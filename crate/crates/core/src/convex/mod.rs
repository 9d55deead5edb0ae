//! Primal-dual barrier Newton engine for small dense convex programs.
//!
//! Handles programs of the form
//!
//! ```text
//! min  c'x + sum objective atoms
//! s.t. A x = b
//!      G x + sum constraint atoms <= h
//!      lb <= x <= ub
//! ```
//!
//! where the atoms are the convex pieces the gas network models need:
//! `|x|^3 / 3`, `|x|^3 / (3 z)`, `x^2` and `x^2 / z`. Variable bounds are
//! kept strictly interior at every iterate, so a variable appearing as the
//! denominator `z` of an atom must have a finite non-negative lower bound.
//! General inequalities are slacked and may start infeasible.
//!
//! When the main solve does not converge an elastic phase-one program decides
//! between "infeasible" and "unknown".

mod ipm;

pub use ipm::solve;

/// Sparse linear row `sum coef * x[var]` compared against `rhs`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Row {
    pub fn new(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Row { terms, rhs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveAtom {
    /// `coef * |x|^3 / 3`
    Cubic { var: usize, coef: f64 },
    /// Perspective of the cubic with a shifted denominator,
    /// `coef * |x|^3 / (3 d^2)` with `d = (1 - eps) z + eps > 0`. Exact at
    /// `z = 1` and at least `coef * |x|^3 / 3` for `z <= 1`.
    CubicPerspective { var: usize, z: usize, coef: f64, eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintAtom {
    /// `coef * x^2`
    Square { var: usize, coef: f64 },
    /// `coef * x^2 / z`, `z > 0`
    QuadOverLinear { var: usize, z: usize, coef: f64 },
}

/// Inequality `terms . x + sum atoms <= rhs`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintRow {
    pub terms: Vec<(usize, f64)>,
    pub atoms: Vec<ConstraintAtom>,
    pub rhs: f64,
}

impl ConstraintRow {
    pub fn linear(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        ConstraintRow { terms, atoms: Vec::new(), rhs }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Program {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cost: Vec<f64>,
    pub objective_atoms: Vec<ObjectiveAtom>,
    pub equalities: Vec<Row>,
    pub inequalities: Vec<ConstraintRow>,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var_count(&self) -> usize {
        self.lower.len()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64) -> usize {
        debug_assert!(lower <= upper, "empty box [{lower}, {upper}]");
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.push(0.0);
        self.lower.len() - 1
    }

    pub fn add_equality(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(Row::new(terms, rhs));
    }

    pub fn add_inequality(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.inequalities.push(ConstraintRow::linear(terms, rhs));
    }

    pub fn add_constraint(&mut self, row: ConstraintRow) {
        self.inequalities.push(row);
    }

    /// Objective value at `x`, including atoms.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.cost.iter().zip(x).map(|(c, v)| c * v).sum();
        lin + self.objective_atoms.iter().map(|a| atom_objective_value(a, x)).sum::<f64>()
    }

    /// Largest violation of equalities, inequalities and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for r in &self.equalities {
            let lhs: f64 = r.terms.iter().map(|&(j, c)| c * x[j]).sum();
            v = v.max((lhs - r.rhs).abs());
        }
        for r in &self.inequalities {
            let lhs = constraint_value(r, x);
            v = v.max(lhs - r.rhs);
        }
        for j in 0..x.len() {
            v = v.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        v.max(0.0)
    }
}

pub(crate) fn atom_objective_value(a: &ObjectiveAtom, x: &[f64]) -> f64 {
    match *a {
        ObjectiveAtom::Cubic { var, coef } => coef * x[var].abs().powi(3) / 3.0,
        ObjectiveAtom::CubicPerspective { var, z, coef, eps } => {
            let zv = (1.0 - eps) * x[z] + eps;
            if zv > 0.0 {
                coef * x[var].abs().powi(3) / (3.0 * zv * zv)
            } else if x[var] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
    }
}

pub(crate) fn atom_constraint_value(a: &ConstraintAtom, x: &[f64]) -> f64 {
    match *a {
        ConstraintAtom::Square { var, coef } => coef * x[var] * x[var],
        ConstraintAtom::QuadOverLinear { var, z, coef } => {
            let zv = x[z];
            if zv > 0.0 {
                coef * x[var] * x[var] / zv
            } else if x[var] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
    }
}

pub(crate) fn constraint_value(r: &ConstraintRow, x: &[f64]) -> f64 {
    let lin: f64 = r.terms.iter().map(|&(j, c)| c * x[j]).sum();
    lin + r.atoms.iter().map(|a| atom_constraint_value(a, x)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Tolerance on scaled primal and dual residuals.
    pub tolerance: f64,
    /// Target average complementarity.
    pub mu_tolerance: f64,
    pub max_iterations: usize,
    /// Run the elastic phase-one program when the main solve fails.
    pub phase_one: bool,
    /// Phase-one optimum above which the program is declared infeasible.
    pub infeasibility_threshold: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            tolerance: 1e-9,
            mu_tolerance: 1e-11,
            max_iterations: 200,
            phase_one: true,
            infeasibility_threshold: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    /// Did not converge and phase one could not prove infeasibility.
    Failed,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers of `A x = b` (Lagrangian sign `+ y'(Ax - b)`).
    pub eq_duals: Vec<f64>,
    /// Multipliers of the inequalities, non-negative.
    pub ineq_duals: Vec<f64>,
    pub lower_duals: Vec<f64>,
    pub upper_duals: Vec<f64>,
    pub iterations: usize,
    /// Optimal phase-one value when phase one ran.
    pub phase_one_value: Option<f64>,
}
