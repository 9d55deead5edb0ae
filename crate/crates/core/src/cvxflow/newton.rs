use nalgebra::{DMatrix, DVector};

use super::{phi, ConvexFlowProblem, FlowError, PotentialAssignment};

const MAX_ITERATIONS: usize = 500;

/// Solves the potential-drop and conservation equations directly by damped
/// Newton on `(q, pi)`, independent of the convex program. Requires every
/// edge to have `alpha > 0` and the graph to be connected. Capacities are
/// ignored. The anchor node sits at `pi = 0`.
pub fn newton_oracle(problem: &ConvexFlowProblem) -> Result<PotentialAssignment, FlowError> {
    problem.check()?;
    let n = problem.node_count();
    let m = problem.edges.len();
    if problem.edges.iter().any(|e| !(e.alpha > 0.0)) {
        return Err(FlowError::Invalid("newton oracle needs alpha > 0 on every edge".into()));
    }
    let comp = problem.components();
    if comp.iter().any(|&c| c != 0) {
        return Err(FlowError::Invalid("newton oracle needs a connected network".into()));
    }
    if n == 0 {
        return Ok(PotentialAssignment { pi: Vec::new(), flows: Vec::new() });
    }
    let anchor = problem.anchors(&comp)[0];
    // Potential unknowns exclude the anchor.
    let mut col = vec![usize::MAX; n];
    let mut k = 0;
    for v in 0..n {
        if v != anchor {
            col[v] = m + k;
            k += 1;
        }
    }
    let dim = m + n - 1;
    let q_scale = problem.demand.iter().fold(0.0f64, |a, d| a.max(d.abs())).max(1.0);
    let pi_scale = problem.edges.iter().map(|e| e.alpha * q_scale * q_scale).fold(0.0f64, f64::max).max(1e-300);

    let mut q = vec![0.0; m];
    let mut pi = vec![0.0; n];
    let residual = |q: &[f64], pi: &[f64]| -> DVector<f64> {
        let mut r = DVector::<f64>::zeros(dim);
        let mut net_in = vec![0.0; n];
        for (i, e) in problem.edges.iter().enumerate() {
            r[i] = (phi(e.alpha, q[i]) - (pi[e.tail] - pi[e.head])) / pi_scale;
            net_in[e.head] += q[i];
            net_in[e.tail] -= q[i];
        }
        for v in 0..n {
            if v != anchor {
                r[col[v]] = (net_in[v] - problem.demand[v]) / q_scale;
            }
        }
        r
    };
    let mut f = residual(&q, &pi);
    for _ in 0..MAX_ITERATIONS {
        let norm = f.amax();
        if norm <= 1e-14 {
            return Ok(PotentialAssignment { pi, flows: q });
        }
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for (i, e) in problem.edges.iter().enumerate() {
            let slope = 2.0 * e.alpha * q[i].abs().max(1e-4 * q_scale);
            jac[(i, i)] = slope / pi_scale;
            if e.tail != anchor {
                jac[(i, col[e.tail])] = -1.0 / pi_scale;
                jac[(col[e.tail], i)] = -1.0 / q_scale;
            }
            if e.head != anchor {
                jac[(i, col[e.head])] = 1.0 / pi_scale;
                jac[(col[e.head], i)] = 1.0 / q_scale;
            }
        }
        let step = jac.lu().solve(&(-&f)).ok_or(FlowError::IterationLimit)?;
        let base = f.norm_squared();
        let mut t = 1.0;
        loop {
            let qn: Vec<f64> = (0..m).map(|i| q[i] + t * step[i]).collect();
            let pn: Vec<f64> = (0..n).map(|v| if v == anchor { 0.0 } else { pi[v] + t * step[col[v]] }).collect();
            let fnew = residual(&qn, &pn);
            if fnew.norm_squared() <= (1.0 - 1e-4 * t) * base || t < 1e-10 {
                q = qn;
                pi = pn;
                f = fnew;
                break;
            }
            t *= 0.5;
        }
    }
    Err(FlowError::IterationLimit)
}
