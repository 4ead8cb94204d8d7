use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::tournament::{AgentRegistry, ProbTournament};

/// One pairwise comparison: `y = 1` when `a` won.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: usize,
    pub b: usize,
    pub y: u8,
}

impl Comparison {
    pub fn winner(&self) -> usize {
        if self.y == 1 {
            self.a
        } else {
            self.b
        }
    }

    pub fn loser(&self) -> usize {
        if self.y == 1 {
            self.b
        } else {
            self.a
        }
    }
}

/// Comparison records plus the derived win tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonDataset {
    agents: AgentRegistry,
    records: Vec<Comparison>,
    /// `wins[a * n + b]` = number of records where `a` beat `b`.
    wins: Vec<u64>,
}

impl ComparisonDataset {
    pub fn new(agents: AgentRegistry) -> Self {
        let n = agents.len();
        ComparisonDataset {
            agents,
            records: Vec::new(),
            wins: vec![0; n * n],
        }
    }

    pub fn from_records(agents: AgentRegistry, records: Vec<Comparison>) -> Result<Self> {
        let mut data = Self::new(agents);
        data.records.reserve(records.len());
        for r in records {
            data.push(r)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, r: Comparison) -> Result<()> {
        let n = self.n();
        if r.a >= n || r.b >= n {
            return Err(Error::InvalidParameter(format!(
                "record ({}, {}) references an agent outside 0..{n}",
                r.a, r.b
            )));
        }
        if r.a == r.b {
            return Err(Error::InvalidParameter(format!(
                "agent {} compared against itself",
                r.a
            )));
        }
        if r.y > 1 {
            return Err(Error::InvalidParameter(format!(
                "outcome must be 0 or 1, got {}",
                r.y
            )));
        }
        self.wins[r.winner() * n + r.loser()] += 1;
        self.records.push(r);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &AgentRegistry {
        &self.agents
    }

    pub fn records(&self) -> &[Comparison] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn wins(&self, a: usize, b: usize) -> u64 {
        self.wins[a * self.n() + b]
    }

    pub fn total(&self, a: usize, b: usize) -> u64 {
        self.wins(a, b) + self.wins(b, a)
    }

    /// New dataset over the same agents built from `records[i]` for each index.
    pub fn resample(&self, indices: &[usize]) -> ComparisonDataset {
        let mut out = Self::new(self.agents.clone());
        out.records.reserve(indices.len());
        let n = self.n();
        for &i in indices {
            let r = self.records[i];
            out.wins[r.winner() * n + r.loser()] += 1;
            out.records.push(r);
        }
        out
    }

    /// Connected components of the graph with an edge for every compared pair,
    /// each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for a in 0..n {
            for b in a + 1..n {
                if self.total(a, b) > 0 {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for a in 0..n {
            let r = find(&mut parent, a);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(a);
        }
        groups
    }

    /// Errors unless every agent is linked to every other through compared pairs.
    pub fn require_connected(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::Empty("dataset has no agents"));
        }
        let comps = self.components();
        if comps.len() > 1 {
            return Err(Error::Disconnected(comps));
        }
        Ok(())
    }
}

/// Win frequencies per pair; never-compared pairs get 0.5.
pub fn empirical_tournament(data: &ComparisonDataset) -> ProbTournament {
    let n = data.n();
    let mut p = Matrix::filled(n, n, 0.5);
    for a in 0..n {
        for b in a + 1..n {
            let total = data.total(a, b);
            if total > 0 {
                let v = data.wins(a, b) as f64 / total as f64;
                p[(a, b)] = v;
                p[(b, a)] = 1.0 - v;
            }
        }
    }
    ProbTournament::new(p).expect("frequencies are complementary by construction")
}
