//! Lawler-style k-best enumeration for separable costs.
//!
//! Each dimension has options sorted by cost. A subspace fixes the ranks of
//! the dimensions before `pivot`, forbids ranks below `min_rank` at `pivot`
//! and leaves the rest free. Its best point is obvious, and removing that
//! point splits the remainder into disjoint subspaces, so popping subspaces
//! in cost order yields solutions in nondecreasing cost.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone)]
struct Subspace {
    cost: f64,
    prefix: Vec<usize>,
    pivot: usize,
    min_rank: usize,
}

impl Subspace {
    fn best(&self, dims: usize) -> Vec<usize> {
        let mut r = self.prefix.clone();
        if self.pivot < dims {
            r.push(self.min_rank);
            r.resize(dims, 0);
        }
        r
    }
}

struct Entry(Subspace, Vec<usize>);

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    // Max-heap inverted: cheapest first, then lexicographically smallest ranks.
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.cost.total_cmp(&self.0.cost).then_with(|| o.1.cmp(&self.1))
    }
}

/// Iterator over rank vectors in nondecreasing total cost. `costs[d]` must be
/// sorted ascending for every dimension `d`.
pub struct KBest {
    costs: Vec<Vec<f64>>,
    heap: BinaryHeap<Entry>,
}

impl KBest {
    pub fn new(costs: Vec<Vec<f64>>) -> Self {
        debug_assert!(costs.iter().all(|c| c.windows(2).all(|w| w[0] <= w[1])));
        let mut heap = BinaryHeap::new();
        if costs.iter().all(|c| !c.is_empty()) {
            let s = Subspace { cost: costs.iter().map(|c| c[0]).sum(), prefix: Vec::new(), pivot: 0, min_rank: 0 };
            let best = s.best(costs.len());
            heap.push(Entry(s, best));
        }
        KBest { costs, heap }
    }

    fn cost_of(&self, ranks: &[usize]) -> f64 {
        ranks.iter().zip(&self.costs).map(|(&r, c)| c[r]).sum()
    }
}

impl Iterator for KBest {
    type Item = (f64, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        let Entry(sub, best) = self.heap.pop()?;
        let dims = self.costs.len();
        for d in sub.pivot..dims {
            let next_rank = best[d] + 1;
            if next_rank < self.costs[d].len() {
                let mut child = Subspace { cost: 0.0, prefix: best[..d].to_vec(), pivot: d, min_rank: next_rank };
                let b = child.best(dims);
                child.cost = self.cost_of(&b);
                self.heap.push(Entry(child, b));
            }
        }
        Some((self.cost_of(&best), best))
    }
}
