//! Feasibility of small systems `a . x <= b` by Fourier-Motzkin elimination
//! with back-substitution at interval midpoints.

const MAX_ROWS: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum OffsetResult {
    Feasible(Vec<f64>),
    /// Amount by which the tightest derived constant row fails.
    Infeasible(f64),
    TooLarge,
}

type Rows = Vec<(Vec<f64>, f64)>;

fn normalize(mut rows: Rows) -> Rows {
    for (a, b) in &mut rows {
        let s = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s > 0.0 {
            a.iter_mut().for_each(|v| *v /= s);
            *b /= s;
        }
    }
    // Drop exact duplicates keeping the tightest right-hand side.
    rows.sort_by(|x, y| {
        x.0.iter().zip(&y.0).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
            .then(x.1.total_cmp(&y.1))
    });
    rows.dedup_by(|later, earlier| later.0 == earlier.0);
    rows
}

pub(crate) fn solve(k: usize, rows: Rows, tol: f64) -> OffsetResult {
    let mut stages: Vec<Rows> = Vec::with_capacity(k + 1);
    let mut cur = normalize(rows);
    for j in 0..k {
        let (mut pos, mut neg, mut keep) = (Vec::new(), Vec::new(), Vec::new());
        for r in cur.iter() {
            if r.0[j] > 0.0 {
                pos.push(r.clone());
            } else if r.0[j] < 0.0 {
                neg.push(r.clone());
            } else {
                keep.push(r.clone());
            }
        }
        if keep.len() + pos.len() * neg.len() > MAX_ROWS {
            return OffsetResult::TooLarge;
        }
        for p in &pos {
            for n in &neg {
                let (cp, cn) = (p.0[j], -n.0[j]);
                let mut a: Vec<f64> = p.0.iter().zip(&n.0).map(|(x, y)| x / cp + y / cn).collect();
                a[j] = 0.0;
                keep.push((a, p.1 / cp + n.1 / cn));
            }
        }
        stages.push(cur);
        cur = normalize(keep);
    }
    let worst = cur.iter().filter(|(a, _)| a.iter().all(|v| *v == 0.0)).map(|r| -r.1).fold(0.0f64, f64::max);
    if worst > tol {
        return OffsetResult::Infeasible(worst);
    }
    let mut x = vec![0.0; k];
    for j in (0..k).rev() {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (a, b) in &stages[j] {
            if a[j] == 0.0 {
                continue;
            }
            let rest: f64 = (j + 1..k).map(|i| a[i] * x[i]).sum();
            let bound = (b - rest) / a[j];
            if a[j] > 0.0 {
                hi = hi.min(bound);
            } else {
                lo = lo.max(bound);
            }
        }
        x[j] = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        };
    }
    OffsetResult::Feasible(x)
}
