use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{DesignAssignment, Network};

/// One master binary, named by arc id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Literal {
    Diameter { pipe: String, choice: usize },
    State { arc: String },
}

/// Integer no-good cut `sum_{zeros} z + sum_{ones} (1 - z) >= 1`.
///
/// The literal sets together name every binary of the master space, so the
/// cut removes exactly the one assignment it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NoGoodCut {
    pub zeros: BTreeSet<Literal>,
    pub ones: BTreeSet<Literal>,
    excluded: DesignAssignment,
}

impl NoGoodCut {
    /// Builds the cut over the pipes of `net` and the active arcs listed in
    /// `assignment.states`.
    pub fn new(net: &Network, assignment: &DesignAssignment) -> Self {
        let mut zeros = BTreeSet::new();
        let mut ones = BTreeSet::new();
        for &p in net.pipes() {
            let arc = net.arc(p);
            let chosen = assignment.diameter(&arc.id);
            for i in 0..arc.candidates().len() {
                let lit = Literal::Diameter { pipe: arc.id.clone(), choice: i };
                if chosen == Some(i) {
                    ones.insert(lit);
                } else {
                    zeros.insert(lit);
                }
            }
        }
        for (id, &on) in &assignment.states {
            let lit = Literal::State { arc: id.clone() };
            if on {
                ones.insert(lit);
            } else {
                zeros.insert(lit);
            }
        }
        NoGoodCut { zeros, ones, excluded: assignment.clone() }
    }

    pub fn excluded(&self) -> &DesignAssignment {
        &self.excluded
    }

    fn literal_value(lit: &Literal, a: &DesignAssignment) -> bool {
        match lit {
            Literal::Diameter { pipe, choice } => a.diameter(pipe) == Some(*choice),
            Literal::State { arc } => a.state(arc) == Some(true),
        }
    }

    /// Left-hand side at `a`: the number of literals that disagree with the
    /// excluded assignment. Zero exactly at the excluded point.
    pub fn lhs(&self, a: &DesignAssignment) -> usize {
        self.zeros.iter().filter(|l| Self::literal_value(l, a)).count()
            + self.ones.iter().filter(|l| !Self::literal_value(l, a)).count()
    }

    pub fn is_violated_by(&self, a: &DesignAssignment) -> bool {
        self.lhs(a) == 0
    }
}

/// Cut pool. Adding an identical cut twice is a no-op.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CutPool {
    cuts: Vec<NoGoodCut>,
    seen: BTreeSet<DesignAssignment>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false (and logs a warning) when the cut is already present.
    pub fn add(&mut self, cut: NoGoodCut) -> bool {
        if !self.seen.insert(cut.excluded.clone()) {
            log::warn!("duplicate no-good cut ignored");
            return false;
        }
        self.cuts.push(cut);
        true
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn cuts(&self) -> &[NoGoodCut] {
        &self.cuts
    }

    pub fn excludes(&self, a: &DesignAssignment) -> bool {
        self.seen.contains(a) || self.cuts.iter().any(|c| c.is_violated_by(a))
    }
}
