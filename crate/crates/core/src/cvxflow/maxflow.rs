use std::collections::VecDeque;

/// Dense-index Edmonds-Karp max flow on a small residual graph.
pub(crate) struct MaxFlow {
    head: Vec<usize>,
    cap: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

impl MaxFlow {
    pub fn new(n: usize) -> Self {
        MaxFlow { head: Vec::new(), cap: Vec::new(), adj: vec![Vec::new(); n] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.head.len());
        self.head.push(to);
        self.cap.push(cap);
        self.adj[to].push(self.head.len());
        self.head.push(from);
        self.cap.push(0.0);
    }

    /// Pushes flow from `s` to `t`; residual capacities at or below `eps`
    /// count as saturated.
    pub fn run(&mut self, s: usize, t: usize, eps: f64) -> f64 {
        let mut total = 0.0;
        loop {
            let mut via = vec![usize::MAX; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                if v == t {
                    break;
                }
                for &e in &self.adj[v] {
                    let w = self.head[e];
                    if !seen[w] && self.cap[e] > eps {
                        seen[w] = true;
                        via[w] = e;
                        queue.push_back(w);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut push = f64::INFINITY;
            let mut v = t;
            while v != s {
                let e = via[v];
                push = push.min(self.cap[e]);
                v = self.head[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = via[v];
                self.cap[e] -= push;
                self.cap[e ^ 1] += push;
                v = self.head[e ^ 1];
            }
            total += push;
        }
    }

    /// Nodes reachable from `s` in the residual graph.
    pub fn source_side(&self, s: usize, eps: f64) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &e in &self.adj[v] {
                let w = self.head[e];
                if !seen[w] && self.cap[e] > eps {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diamond_max_flow() {
        let mut g = MaxFlow::new(4);
        g.add_edge(0, 1, 3.0);
        g.add_edge(0, 2, 2.0);
        g.add_edge(1, 3, 2.0);
        g.add_edge(2, 3, 3.0);
        g.add_edge(1, 2, 1.0);
        assert_eq!(g.run(0, 3, 0.0), 5.0);
        let side = g.source_side(0, 0.0);
        assert!(side[0] && !side[3]);
    }
}
