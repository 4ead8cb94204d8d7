//! A small reverse-mode gradient tape over matrix-valued nodes.
//!
//! The vocabulary is limited to what the soft tournament pipeline and its
//! training objective need. Nodes are appended in evaluation order, so the
//! node index is already a topological order and the backward pass is a
//! single reverse sweep.

use super::smooth::{
    boltzmann_partials, boltzmann_unchecked, sigmoid, smax_unchecked, softmax_weights,
    softmin_unchecked,
};
use super::Matrix;
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Row-wise smooth reductions available on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    Softmin,
    Smax,
    Boltzmann,
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Affine { x: Var, scale: f64 },
    Sigmoid(Var),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    SetDiag(Var),
    Transpose(Var),
    PairwiseDiff(Var),
    ClampMin { x: Var, floor: f64 },
    RowReduce { x: Var, kind: Reduce, tau: f64, skip_diag: bool },
    CoverWitness { d: Var, tau: f64 },
    BinaryEntropy { x: Var, eps: f64 },
    AbsDev { x: Var, center: f64 },
    Mean(Var),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::grad`], one matrix per recorded node.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<Matrix>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> &Matrix {
        &self.adjoints[v.0]
    }
}

fn row_entries(m: &Matrix, i: usize, skip_diag: bool) -> (Vec<usize>, Vec<f64>) {
    (0..m.cols())
        .filter(|&j| !(skip_diag && j == i))
        .map(|j| (j, m[(i, j)]))
        .unzip()
}

/// `W[c][a] = boltzmann_b(D[a][b] - D[c][b])` for `c != a`, zero on the diagonal.
fn cover_witness(d: &Matrix, tau: f64) -> Matrix {
    let n = d.rows();
    let mut w = Matrix::zeros(n, n);
    let mut diff = vec![0.0; n];
    for c in 0..n {
        for a in 0..n {
            if a == c {
                continue;
            }
            for (b, z) in diff.iter_mut().enumerate() {
                *z = d[(a, b)] - d[(c, b)];
            }
            w[(c, a)] = boltzmann_unchecked(&diff, tau);
        }
    }
    w
}

fn binary_entropy(s: f64, eps: f64) -> f64 {
    -(s * (s + eps).ln() + (1.0 - s) * (1.0 - s + eps).ln())
}

fn binary_entropy_slope(s: f64, eps: f64) -> f64 {
    -((s + eps).ln() + s / (s + eps) - (1.0 - s + eps).ln() - (1.0 - s) / (1.0 - s + eps))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Records a leaf. Every leaf receives an adjoint, so constants are
    /// simply leaves whose gradient is ignored.
    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(Op::Input, value)
    }

    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let value = self.value(x).map(|v| scale * v + shift);
        self.push(Op::Affine { x, scale }, value)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        self.affine(x, s, 0.0)
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, x: Var) -> Var {
        self.affine(x, -1.0, 1.0)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        self.push(Op::Sigmoid(x), value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), value))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(Op::Mul(a, b), value))
    }

    /// Overwrites the diagonal with `value`; the diagonal carries no gradient.
    pub fn set_diag(&mut self, x: Var, value: f64) -> Result<Var> {
        let mut out = self.value(x).clone();
        if !out.is_square() {
            return Err(Error::Shape("set_diag needs a square matrix".into()));
        }
        for i in 0..out.rows() {
            out[(i, i)] = value;
        }
        Ok(self.push(Op::SetDiag(x), out))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).transpose();
        self.push(Op::Transpose(x), value)
    }

    /// From a column `x` of length n, the n×n matrix `x_a - x_b`.
    pub fn pairwise_diff(&mut self, x: Var) -> Result<Var> {
        let col = self.value(x);
        if col.cols() != 1 {
            return Err(Error::Shape("pairwise_diff needs a column vector".into()));
        }
        let v = col.as_slice();
        let value = Matrix::from_fn(v.len(), v.len(), |a, b| v[a] - v[b]);
        Ok(self.push(Op::PairwiseDiff(x), value))
    }

    pub fn clamp_min(&mut self, x: Var, floor: f64) -> Var {
        let value = self.value(x).map(|v| v.max(floor));
        self.push(Op::ClampMin { x, floor }, value)
    }

    /// Reduces each row to one value, producing a column. With `skip_diag`
    /// the diagonal entry of each row is excluded; a row with nothing left
    /// reduces to 0.
    pub fn row_reduce(&mut self, x: Var, kind: Reduce, tau: f64, skip_diag: bool) -> Var {
        let m = self.value(x);
        let value = Matrix::column(
            (0..m.rows())
                .map(|i| {
                    let (_, z) = row_entries(m, i, skip_diag);
                    if z.is_empty() {
                        return 0.0;
                    }
                    match kind {
                        Reduce::Softmin => softmin_unchecked(&z, tau),
                        Reduce::Smax => smax_unchecked(&z, tau),
                        Reduce::Boltzmann => boltzmann_unchecked(&z, tau),
                    }
                })
                .collect(),
        );
        self.push(
            Op::RowReduce {
                x,
                kind,
                tau,
                skip_diag,
            },
            value,
        )
    }

    /// Witness aggregate of the soft covering relation; see [`cover_witness`].
    pub fn cover_witness(&mut self, d: Var, tau: f64) -> Result<Var> {
        let dm = self.value(d);
        if !dm.is_square() {
            return Err(Error::Shape("cover witness needs a square matrix".into()));
        }
        let value = cover_witness(dm, tau);
        Ok(self.push(Op::CoverWitness { d, tau }, value))
    }

    pub fn binary_entropy(&mut self, x: Var, eps: f64) -> Var {
        let value = self.value(x).map(|s| binary_entropy(s, eps));
        self.push(Op::BinaryEntropy { x, eps }, value)
    }

    pub fn abs_dev(&mut self, x: Var, center: f64) -> Var {
        let value = self.value(x).map(|s| (s - center).abs());
        self.push(Op::AbsDev { x, center }, value)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let m = self.value(x);
        let value = if m.is_empty() {
            0.0
        } else {
            m.sum() / m.len() as f64
        };
        self.push(Op::Mean(x), Matrix::scalar(value))
    }

    /// Reverse sweep from a scalar (1×1) output.
    pub fn grad(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.shape() != (1, 1) {
            return Err(Error::NonScalarOutput {
                rows: out.rows(),
                cols: out.cols(),
            });
        }
        let mut adj: Vec<Matrix> = self
            .nodes
            .iter()
            .map(|n| Matrix::zeros(n.value.rows(), n.value.cols()))
            .collect();
        adj[output.0] = Matrix::scalar(1.0);

        for i in (0..=output.0).rev() {
            let g = std::mem::replace(&mut adj[i], Matrix::zeros(0, 0));
            if g.as_slice().iter().all(|&v| v == 0.0) {
                adj[i] = g;
                continue;
            }
            let node = &self.nodes[i];
            match node.op {
                Op::Input => {}
                Op::Affine { x, scale, .. } => {
                    adj[x.0].axpy(scale, &g)?;
                }
                Op::Sigmoid(x) => {
                    let local = node.value.map(|y| y * (1.0 - y)).hadamard(&g)?;
                    adj[x.0].axpy(1.0, &local)?;
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(b).transpose())?;
                    let gb = self.value(a).transpose().matmul(&g)?;
                    adj[a.0].axpy(1.0, &ga)?;
                    adj[b.0].axpy(1.0, &gb)?;
                }
                Op::Add(a, b) => {
                    adj[a.0].axpy(1.0, &g)?;
                    adj[b.0].axpy(1.0, &g)?;
                }
                Op::Sub(a, b) => {
                    adj[a.0].axpy(1.0, &g)?;
                    adj[b.0].axpy(-1.0, &g)?;
                }
                Op::Mul(a, b) => {
                    let ga = g.hadamard(self.value(b))?;
                    let gb = g.hadamard(self.value(a))?;
                    adj[a.0].axpy(1.0, &ga)?;
                    adj[b.0].axpy(1.0, &gb)?;
                }
                Op::SetDiag(x) => {
                    let mut local = g.clone();
                    for k in 0..local.rows() {
                        local[(k, k)] = 0.0;
                    }
                    adj[x.0].axpy(1.0, &local)?;
                }
                Op::Transpose(x) => {
                    adj[x.0].axpy(1.0, &g.transpose())?;
                }
                Op::PairwiseDiff(x) => {
                    let n = g.rows();
                    let target = &mut adj[x.0];
                    for a in 0..n {
                        let mut s = 0.0;
                        for b in 0..n {
                            s += g[(a, b)] - g[(b, a)];
                        }
                        target[(a, 0)] += s;
                    }
                }
                Op::ClampMin { x, floor } => {
                    let xv = self.value(x);
                    let target = &mut adj[x.0];
                    for (k, (&xi, &gi)) in xv.as_slice().iter().zip(g.as_slice()).enumerate() {
                        if xi > floor {
                            target.as_mut_slice()[k] += gi;
                        }
                    }
                }
                Op::RowReduce {
                    x,
                    kind,
                    tau,
                    skip_diag,
                } => {
                    let xv = self.value(x);
                    let mut local = Matrix::zeros(xv.rows(), xv.cols());
                    for r in 0..xv.rows() {
                        let gr = g[(r, 0)];
                        if gr == 0.0 {
                            continue;
                        }
                        let (idx, z) = row_entries(xv, r, skip_diag);
                        if z.is_empty() {
                            continue;
                        }
                        let w = match kind {
                            Reduce::Softmin => softmax_weights(&z, tau, -1.0),
                            Reduce::Smax => softmax_weights(&z, tau, 1.0),
                            Reduce::Boltzmann => boltzmann_partials(&z, tau),
                        };
                        for (&j, wj) in idx.iter().zip(w) {
                            local[(r, j)] += gr * wj;
                        }
                    }
                    adj[x.0].axpy(1.0, &local)?;
                }
                Op::CoverWitness { d, tau } => {
                    let dm = self.value(d);
                    let n = dm.rows();
                    let mut local = Matrix::zeros(n, n);
                    let mut diff = vec![0.0; n];
                    for c in 0..n {
                        for a in 0..n {
                            let gca = g[(c, a)];
                            if a == c || gca == 0.0 {
                                continue;
                            }
                            for (b, z) in diff.iter_mut().enumerate() {
                                *z = dm[(a, b)] - dm[(c, b)];
                            }
                            let q = boltzmann_partials(&diff, tau);
                            for (b, qb) in q.into_iter().enumerate() {
                                local[(a, b)] += gca * qb;
                                local[(c, b)] -= gca * qb;
                            }
                        }
                    }
                    adj[d.0].axpy(1.0, &local)?;
                }
                Op::BinaryEntropy { x, eps } => {
                    let local = self
                        .value(x)
                        .map(|s| binary_entropy_slope(s, eps))
                        .hadamard(&g)?;
                    adj[x.0].axpy(1.0, &local)?;
                }
                Op::AbsDev { x, center } => {
                    let local = self
                        .value(x)
                        .map(|s| {
                            let d = s - center;
                            if d > 0.0 {
                                1.0
                            } else if d < 0.0 {
                                -1.0
                            } else {
                                0.0
                            }
                        })
                        .hadamard(&g)?;
                    adj[x.0].axpy(1.0, &local)?;
                }
                Op::Mean(x) => {
                    let xv = self.value(x);
                    if !xv.is_empty() {
                        let share = g[(0, 0)] / xv.len() as f64;
                        for v in adj[x.0].as_mut_slice() {
                            *v += share;
                        }
                    }
                }
            }
            adj[i] = g;
        }
        Ok(Gradients { adjoints: adj })
    }
}
