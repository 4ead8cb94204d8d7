//! Probabilistic and majority-rule tournaments and their exact solutions.
//!
//! The exact Top Cycle and Uncovered Set computed here are the ground truth
//! that the soft operators are checked against.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// A set of agent indices, iterated in increasing order.
pub type AgentSet = BTreeSet<usize>;

/// Complementarity tolerance enforced by [`ProbTournament::new`].
pub const COMPLEMENT_TOL: f64 = 1e-12;

/// Ordered, duplicate-free agent names with a reverse index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct AgentRegistry {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for AgentRegistry {
    fn from(names: Vec<String>) -> Self {
        let mut reg = AgentRegistry::default();
        for n in names {
            reg.get_or_insert(&n);
        }
        reg
    }
}

impl From<AgentRegistry> for Vec<String> {
    fn from(reg: AgentRegistry) -> Self {
        reg.names
    }
}

impl AgentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry `a0, a1, …` of the given size.
    pub fn numbered(n: usize) -> Self {
        (0..n).map(|i| format!("a{i}")).collect::<Vec<_>>().into()
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut reg = AgentRegistry::default();
        for n in names {
            if reg.index_of(n.as_ref()).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate agent name {:?}",
                    n.as_ref()
                )));
            }
            reg.get_or_insert(n.as_ref());
        }
        Ok(reg)
    }

    pub fn get_or_insert(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Win-probability matrix: `P[a][b]` is the probability that `a` beats `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTournament {
    p: Matrix,
}

impl ProbTournament {
    pub fn new(p: Matrix) -> Result<Self> {
        Self::with_tolerance(p, COMPLEMENT_TOL)
    }

    /// Validates with a caller-chosen complementarity tolerance.
    pub fn with_tolerance(p: Matrix, tol: f64) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::InvalidTournament(format!(
                "matrix must be square, got {}x{}",
                p.rows(),
                p.cols()
            )));
        }
        let n = p.rows();
        for a in 0..n {
            if p[(a, a)] != 0.5 {
                return Err(Error::InvalidTournament(format!(
                    "diagonal entry ({a},{a}) is {}, must be 0.5",
                    p[(a, a)]
                )));
            }
            for b in 0..n {
                let v = p[(a, b)];
                if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                    return Err(Error::InvalidTournament(format!(
                        "entry ({a},{b}) = {v} is outside [0, 1]"
                    )));
                }
                if b > a && (v + p[(b, a)] - 1.0).abs() > tol {
                    return Err(Error::InvalidTournament(format!(
                        "complementarity violated for pair ({a},{b}): {v} + {} != 1",
                        p[(b, a)]
                    )));
                }
            }
        }
        Ok(ProbTournament { p })
    }

    /// Builds a tournament from the strict upper triangle `f(a, b)`, `a < b`.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut p = Matrix::filled(n, n, 0.5);
        for a in 0..n {
            for b in a + 1..n {
                let v = f(a, b);
                p[(a, b)] = v;
                p[(b, a)] = 1.0 - v;
            }
        }
        Self::new(p)
    }

    /// All-0.5 tournament.
    pub fn uniform(n: usize) -> Self {
        ProbTournament {
            p: Matrix::filled(n, n, 0.5),
        }
    }

    pub fn n(&self) -> usize {
        self.p.rows()
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.p[(a, b)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn into_matrix(self) -> Matrix {
        self.p
    }

    /// Relabels agents: agent `i` of the result is agent `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> ProbTournament {
        ProbTournament {
            p: self.p.permuted(perm),
        }
    }
}

/// Majority-rule tournament. Pairs at exactly 0.5 carry no edge and are
/// recorded in `ties`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardTournament {
    n: usize,
    adj: Vec<bool>,
    ties: Vec<(usize, usize)>,
}

impl HardTournament {
    /// Builds a tie-free tournament from its edge list. Every unordered pair
    /// must appear exactly once.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![false; n * n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::InvalidTournament(format!("bad edge ({a},{b})")));
            }
            if adj[a * n + b] || adj[b * n + a] {
                return Err(Error::InvalidTournament(format!(
                    "pair ({a},{b}) has more than one edge"
                )));
            }
            adj[a * n + b] = true;
        }
        let ties: Vec<_> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| !adj[a * n + b] && !adj[b * n + a])
            .collect();
        if !ties.is_empty() {
            return Err(Error::InvalidTournament(format!(
                "pairs without an edge: {ties:?}"
            )));
        }
        Ok(HardTournament { n, adj, ties })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn beats(&self, a: usize, b: usize) -> bool {
        self.adj[a * self.n + b]
    }

    pub fn ties(&self) -> &[(usize, usize)] {
        &self.ties
    }

    pub fn is_tie_free(&self) -> bool {
        self.ties.is_empty()
    }

    fn require_tie_free(&self) -> Result<()> {
        if self.ties.is_empty() {
            Ok(())
        } else {
            Err(Error::Ties(self.ties.clone()))
        }
    }

    /// Adjacency as a 0/1 matrix.
    pub fn adjacency(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |a, b| f64::from(u8::from(self.beats(a, b))))
    }

    pub fn permuted(&self, perm: &[usize]) -> HardTournament {
        let n = self.n;
        let adj = (0..n * n)
            .map(|k| self.beats(perm[k / n], perm[k % n]))
            .collect();
        let inv = inverse(perm);
        let mut ties: Vec<_> = self
            .ties
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (inv[a], inv[b]);
                (x.min(y), x.max(y))
            })
            .collect();
        ties.sort_unstable();
        HardTournament { n, adj, ties }
    }
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// `a → b` iff `P[a][b] > 1/2`.
pub fn threshold(p: &ProbTournament) -> HardTournament {
    let n = p.n();
    let mut adj = vec![false; n * n];
    let mut ties = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && p.get(a, b) > 0.5 {
                adj[a * n + b] = true;
            }
        }
        for b in a + 1..n {
            if p.get(a, b) == 0.5 {
                ties.push((a, b));
            }
        }
    }
    HardTournament { n, adj, ties }
}

/// Transitive closure (Warshall). Entry `[a][b]` is true iff a directed path
/// of any length leads from `a` to `b`.
pub fn reachability(t: &HardTournament) -> Vec<Vec<bool>> {
    let n = t.n();
    let mut r: Vec<Vec<bool>> = (0..n)
        .map(|a| (0..n).map(|b| t.beats(a, b)).collect())
        .collect();
    for k in 0..n {
        for a in 0..n {
            if a == k || !r[a][k] {
                continue;
            }
            let (row_a, row_k) = if a < k {
                let (lo, hi) = r.split_at_mut(k);
                (&mut lo[a], &hi[0])
            } else {
                let (lo, hi) = r.split_at_mut(a);
                (&mut hi[0], &lo[k])
            };
            for (x, &y) in row_a.iter_mut().zip(row_k) {
                *x |= y;
            }
        }
    }
    r
}

/// Agents that reach every other agent.
pub fn top_cycle(t: &HardTournament) -> Result<AgentSet> {
    t.require_tie_free()?;
    let r = reachability(t);
    Ok((0..t.n())
        .filter(|&a| (0..t.n()).all(|b| b == a || r[a][b]))
        .collect())
}

/// Does `c` beat `a` and every agent that `a` beats?
pub fn covers(t: &HardTournament, c: usize, a: usize) -> Result<bool> {
    if c == a {
        return Err(Error::SelfCover(a));
    }
    t.require_tie_free()?;
    Ok(t.beats(c, a) && (0..t.n()).all(|b| !t.beats(a, b) || t.beats(c, b)))
}

/// Agents covered by nobody.
pub fn uncovered_set(t: &HardTournament) -> Result<AgentSet> {
    t.require_tie_free()?;
    let n = t.n();
    let mut out = AgentSet::new();
    for a in 0..n {
        let mut covered = false;
        for c in 0..n {
            if c != a && covers(t, c, a)? {
                covered = true;
                break;
            }
        }
        if !covered {
            out.insert(a);
        }
    }
    Ok(out)
}

pub fn condorcet_winner(t: &HardTournament) -> Option<usize> {
    (0..t.n()).find(|&a| (0..t.n()).all(|b| b == a || t.beats(a, b)))
}

/// Smallest distance of any off-diagonal win probability from 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    pub delta: f64,
    pub tied_pairs: Vec<(usize, usize)>,
}

pub fn margin_report(p: &ProbTournament) -> MarginReport {
    let n = p.n();
    let mut delta = f64::INFINITY;
    let mut tied_pairs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let d = (p.get(a, b) - 0.5).abs();
            delta = delta.min(d);
            if p.get(a, b) == 0.5 {
                tied_pairs.push((a, b));
            }
        }
    }
    if n < 2 {
        delta = 0.0;
    }
    MarginReport { delta, tied_pairs }
}
