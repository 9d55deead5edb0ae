use crate::convex::{ConstraintAtom, ConstraintRow, Program};

/// Second-order-cone epigraph of `q^3 <= t` for a flow `q >= 0`:
///
/// ```text
/// s >= 0,  u = s + q >= 0,  u^2 <= w,  w^2 <= t u
/// ```
///
/// With a binary link `z`, the cone `u^2 <= w` is strengthened to
/// `u^2 <= w z`, so `w` is the quadratic auxiliary with `w z >= q^2`, and
/// the term then bounds the perspective `q^3 / z^2`.
///
/// Minimizing `t` over the auxiliaries gives exactly `q^3` (or `q^3/z^2`),
/// which is how master relaxations use the chain; [`CubicEpigraphTerm::lift`]
/// recovers the auxiliaries from a closed-form solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicEpigraphTerm {
    pub flow: usize,
    pub t: usize,
    pub s: usize,
    pub u: usize,
    /// Quadratic auxiliary (`q_qua`).
    pub w: usize,
    pub z: Option<usize>,
}

/// Values of the chain's auxiliaries at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpigraphPoint {
    pub s: f64,
    pub u: f64,
    pub w: f64,
    pub t: f64,
}

impl CubicEpigraphTerm {
    /// Adds the cone variables and rows to `p` and charges `coef * t / 3`.
    pub fn attach(p: &mut Program, flow: usize, coef: f64, z: Option<usize>) -> Self {
        let s = p.add_var(0.0, f64::INFINITY);
        let u = p.add_var(0.0, f64::INFINITY);
        let w = p.add_var(0.0, f64::INFINITY);
        let t = p.add_var(0.0, f64::INFINITY);
        p.add_equality(vec![(u, 1.0), (s, -1.0), (flow, -1.0)], 0.0);
        let first = match z {
            Some(z) => ConstraintAtom::QuadOverLinear { var: u, z, coef: 1.0 },
            None => ConstraintAtom::Square { var: u, coef: 1.0 },
        };
        p.add_constraint(ConstraintRow { terms: vec![(w, -1.0)], atoms: vec![first], rhs: 0.0 });
        p.add_constraint(ConstraintRow {
            terms: vec![(t, -1.0)],
            atoms: vec![ConstraintAtom::QuadOverLinear { var: w, z: u, coef: 1.0 }],
            rhs: 0.0,
        });
        p.cost[t] += coef / 3.0;
        CubicEpigraphTerm { flow, t, s, u, w, z }
    }

    /// Tightest auxiliaries for flow `q >= 0` and link value `z`.
    pub fn lift(q: f64, z: Option<f64>) -> EpigraphPoint {
        let u = q.max(0.0);
        if u == 0.0 {
            return EpigraphPoint { s: 0.0, u, w: 0.0, t: 0.0 };
        }
        let w = u * u / z.unwrap_or(1.0);
        EpigraphPoint { s: 0.0, u, w, t: w * w / u }
    }

    /// Auxiliary values of an attached term at `x`.
    pub fn point(&self, x: &[f64]) -> EpigraphPoint {
        EpigraphPoint { s: x[self.s], u: x[self.u], w: x[self.w], t: x[self.t] }
    }

    /// Largest invariant violation of an attached term at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.point(x).violation(x[self.flow], self.z.map(|z| x[z]))
    }
}

impl EpigraphPoint {
    /// Largest violation of the chain at flow `q` and link `z`, including
    /// `t >= q^3` and, when linked, `w z >= q^2`.
    pub fn violation(&self, q: f64, z: Option<f64>) -> f64 {
        let EpigraphPoint { s, u, w, t } = *self;
        let zv = z.unwrap_or(1.0);
        let mut v: f64 = 0.0;
        v = v.max(-s).max(-(s + q)).max((u - s - q).abs());
        v = v.max((s + q).powi(2) - w * zv);
        v = v.max(w * w - t * (s + q));
        v = v.max(q.max(0.0).powi(3) - t);
        if z.is_some() {
            v = v.max(q * q - w * zv);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{solve, Settings, Status};
    use proptest::prelude::*;

    fn explicit(q: f64, z: Option<f64>) -> (f64, f64) {
        let mut p = Program::new();
        let qv = p.add_var(0.0, 10.0);
        p.add_equality(vec![(qv, 1.0)], q);
        let zv = z.map(|z| {
            let v = p.add_var(0.0, 1.0);
            p.add_equality(vec![(v, 1.0)], z);
            v
        });
        let e = CubicEpigraphTerm::attach(&mut p, qv, 3.0, zv);
        let s = solve(&p, &Settings::default());
        assert_eq!(s.status, Status::Optimal);
        (s.objective, e.violation(&s.x))
    }

    #[test]
    fn apex() {
        let (obj, viol) = explicit(0.0, None);
        assert!(obj.abs() <= 1e-8 && viol <= 1e-8);
        assert_eq!(CubicEpigraphTerm::lift(0.0, Some(0.0)), EpigraphPoint { s: 0.0, u: 0.0, w: 0.0, t: 0.0 });
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn explicit_chain_matches_closed_form(q in 0.0f64..5.0, z in 0.1f64..1.0, linked: bool) {
            let z = linked.then_some(z);
            let closed = q.powi(3) / z.unwrap_or(1.0).powi(2);
            let (obj, viol) = explicit(q, z);
            prop_assert!((obj - closed).abs() <= 1e-6 * closed.max(1.0), "{obj} vs {closed}");
            prop_assert!(viol <= 1e-8, "{viol}");
            let lifted = CubicEpigraphTerm::lift(q, z);
            prop_assert!(lifted.violation(q, z) <= 1e-12 * closed.max(1.0));
            prop_assert!((lifted.t - closed).abs() <= 1e-12 * closed.max(1.0));
        }
    }
}
