//! Binary branch-and-bound over convex node relaxations (minimization).
//!
//! Node selection is best-bound with depth-first plunges: after branching,
//! the child on the rounding side of the branching variable is processed
//! next and its sibling is queued. Variable selection is most-fractional,
//! ties by larger pseudo-cost, then lowest index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

/// Result of one node relaxation.
#[derive(Debug, Clone)]
pub enum Relaxation<P> {
    Infeasible,
    /// Valid lower bound over all completions, with the relaxed binary
    /// values (length `num_binaries`).
    Bound { value: f64, point: Vec<f64>, payload: P },
    /// The solver could not decide; the node is branched without a bound.
    Unknown,
}

pub trait BranchProblem {
    type Payload: Clone;

    fn num_binaries(&self) -> usize;

    /// Tightens `fix` by implication. Returns false when the fixing admits
    /// no completion.
    fn propagate(&self, fix: &mut [Option<bool>]) -> bool;

    fn relax(&self, fix: &[Option<bool>]) -> Relaxation<Self::Payload>;

    /// Exact value of a complete assignment, or None when it is infeasible.
    fn leaf(&self, binaries: &[bool]) -> Option<(f64, Self::Payload)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnbSettings {
    pub time_limit: Duration,
    pub integrality_tolerance: f64,
    /// Relative optimality tolerance for pruning.
    pub gap_tolerance: f64,
}

impl Default for BnbSettings {
    fn default() -> Self {
        BnbSettings { time_limit: Duration::from_secs(60), integrality_tolerance: 1e-6, gap_tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct Incumbent<P> {
    pub value: f64,
    pub binaries: Vec<bool>,
    pub payload: P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnbStatus {
    Optimal,
    Infeasible,
    TimedOut,
}

#[derive(Debug, Clone)]
pub struct BnbResult<P> {
    pub status: BnbStatus,
    pub incumbent: Option<Incumbent<P>>,
    /// Global lower bound at termination (the incumbent value when optimal).
    pub best_bound: f64,
    pub nodes: usize,
}

struct Node {
    fix: Vec<Option<bool>>,
    bound: f64,
    depth: usize,
    // Branching record for pseudo-cost updates: (var, up, fractional distance).
    origin: Option<(usize, bool, f64)>,
    seq: usize,
}

struct Queued(Node);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // Max-heap: smaller bound first, then older node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.bound.total_cmp(&self.0.bound).then(other.0.seq.cmp(&self.0.seq))
    }
}

#[derive(Clone, Copy, Default)]
struct PseudoCost {
    sum: [f64; 2],
    count: [u32; 2],
}

impl PseudoCost {
    fn record(&mut self, up: bool, gain: f64) {
        let k = up as usize;
        self.sum[k] += gain.max(0.0);
        self.count[k] += 1;
    }

    fn score(&self) -> f64 {
        (0..2).map(|k| if self.count[k] > 0 { self.sum[k] / self.count[k] as f64 } else { 0.0 }).sum()
    }
}

pub fn branch_and_bound<B: BranchProblem>(problem: &B, settings: &BnbSettings) -> BnbResult<B::Payload> {
    let start = Instant::now();
    let n = problem.num_binaries();
    let mut incumbent: Option<Incumbent<B::Payload>> = None;
    let mut pseudo = vec![PseudoCost::default(); n];
    let mut heap = BinaryHeap::new();
    let mut nodes = 0usize;
    let mut seq = 0usize;

    let mut root = vec![None; n];
    if !problem.propagate(&mut root) {
        return BnbResult { status: BnbStatus::Infeasible, incumbent: None, best_bound: f64::INFINITY, nodes: 0 };
    }
    let mut current = Some(Node { fix: root, bound: f64::NEG_INFINITY, depth: 0, origin: None, seq });

    let prunable = |bound: f64, inc: &Option<Incumbent<B::Payload>>| match inc {
        Some(i) => bound >= i.value - settings.gap_tolerance * i.value.abs().max(1e-12),
        None => false,
    };

    loop {
        let node = match current.take() {
            Some(n) => n,
            None => match heap.pop() {
                Some(Queued(n)) => n,
                None => break,
            },
        };
        if prunable(node.bound, &incumbent) {
            continue;
        }
        if start.elapsed() >= settings.time_limit {
            let open = heap.iter().map(|q: &Queued| q.0.bound).fold(node.bound, f64::min);
            let best_bound = incumbent.as_ref().map_or(open, |i| open.min(i.value));
            return BnbResult { status: BnbStatus::TimedOut, incumbent, best_bound, nodes };
        }
        nodes += 1;

        if node.fix.iter().all(|f| f.is_some()) {
            let bin: Vec<bool> = node.fix.iter().map(|f| f.unwrap()).collect();
            if let Some((value, payload)) = problem.leaf(&bin) {
                if incumbent.as_ref().map_or(true, |i| value < i.value) {
                    incumbent = Some(Incumbent { value, binaries: bin, payload });
                }
            }
            continue;
        }

        let (bound, point) = match problem.relax(&node.fix) {
            Relaxation::Infeasible => continue,
            Relaxation::Unknown => (node.bound, None),
            Relaxation::Bound { value, point, .. } => {
                let value = value.max(node.bound);
                if let Some((var, up, dist)) = node.origin {
                    if node.bound.is_finite() && dist > 0.0 {
                        pseudo[var].record(up, (value - node.bound) / dist);
                    }
                }
                (value, Some(point))
            }
        };
        if prunable(bound, &incumbent) {
            continue;
        }

        // Near-integral relaxation: evaluate the rounded assignment exactly.
        if let Some(p) = &point {
            let tol = settings.integrality_tolerance;
            let integral = (0..n).all(|j| node.fix[j].is_some() || p[j] <= tol || p[j] >= 1.0 - tol);
            if integral {
                let bin: Vec<bool> = (0..n).map(|j| node.fix[j].unwrap_or(p[j] >= 0.5)).collect();
                let mut check: Vec<Option<bool>> = bin.iter().map(|&b| Some(b)).collect();
                if problem.propagate(&mut check) {
                    if let Some((value, payload)) = problem.leaf(&bin) {
                        let better = incumbent.as_ref().map_or(true, |i| value < i.value);
                        if better {
                            incumbent = Some(Incumbent { value, binaries: bin, payload });
                        }
                        if value <= bound + settings.gap_tolerance * bound.abs().max(1e-12) + 1e-12 {
                            continue;
                        }
                    }
                }
            }
        }

        let var = select(&node.fix, point.as_deref(), &pseudo);
        let frac = point.as_ref().map_or(0.5, |p| p[var]);
        let mut children = Vec::with_capacity(2);
        for up in [false, true] {
            let mut fix = node.fix.clone();
            fix[var] = Some(up);
            if problem.propagate(&mut fix) {
                seq += 1;
                let dist = if up { 1.0 - frac } else { frac };
                children.push(Node { fix, bound, depth: node.depth + 1, origin: Some((var, up, dist)), seq });
            }
        }
        // Plunge toward the rounding side.
        let prefer_up = frac >= 0.5;
        children.sort_by_key(|c| (c.origin.unwrap().1 != prefer_up) as u8);
        let mut it = children.into_iter();
        current = it.next();
        for c in it {
            heap.push(Queued(c));
        }
    }

    match incumbent {
        Some(i) => {
            let v = i.value;
            BnbResult { status: BnbStatus::Optimal, incumbent: Some(i), best_bound: v, nodes }
        }
        None => BnbResult { status: BnbStatus::Infeasible, incumbent: None, best_bound: f64::INFINITY, nodes },
    }
}

fn select(fix: &[Option<bool>], point: Option<&[f64]>, pseudo: &[PseudoCost]) -> usize {
    let free = (0..fix.len()).filter(|&j| fix[j].is_none());
    let Some(p) = point else {
        return free.min().expect("a free variable");
    };
    let mut best: Option<(usize, f64, f64)> = None;
    for j in free {
        let f = p[j].min(1.0 - p[j]).max(0.0);
        let s = pseudo[j].score();
        best = match best {
            None => Some((j, f, s)),
            Some((bj, bf, bs)) => {
                let better = if (f - bf).abs() > 1e-9 { f > bf } else { s > bs };
                if better {
                    Some((j, f, s))
                } else {
                    Some((bj, bf, bs))
                }
            }
        };
    }
    best.unwrap().0
}
