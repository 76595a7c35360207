//! The left block chain on `{0,1}^p`: its generator, invariant law and the
//! effective left density it induces, plus the rate assumptions.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::condensation;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{block_bits, block_key, LeftBoundary, ModelSpec, RateTableBoundary};

/// Generator of the left flips plus stirring inside the block, on the `2^p`
/// block states (site 1 is the least significant bit of the state index).
#[derive(Debug, Clone)]
pub struct BoundaryChain {
    p: usize,
    generator: DMatrix<f64>,
}

impl BoundaryChain {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn states(&self) -> usize {
        1 << self.p
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.generator[(from, to)]
    }

    pub fn out_rate(&self, state: usize) -> f64 {
        -self.generator[(state, state)]
    }

    /// Number of closed communicating classes, i.e. the dimension of the
    /// space of stationary laws.
    pub fn closed_classes(&self) -> usize {
        let n = self.states();
        let mut g = DiGraph::<(), ()>::with_capacity(n, n * self.p);
        let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.generator[(i, j)] > 0.0 {
                    g.add_edge(nodes[i], nodes[j], ());
                }
            }
        }
        let dag = condensation(g, true);
        dag.node_indices()
            .filter(|&c| dag.neighbors(c).next().is_none())
            .count()
    }
}

pub fn build_chain(spec: &ModelSpec) -> BoundaryChain {
    build_chain_for(&spec.left)
}

pub fn build_chain_for(left: &LeftBoundary) -> BoundaryChain {
    let p = left.p();
    let n = 1usize << p;
    let mut q = DMatrix::zeros(n, n);
    for s in 0..n {
        let block = block_bits(p, s);
        for j in 1..=p {
            let rate = left.flip_rate(&block, j);
            if rate > 0.0 {
                q[(s, s ^ (1 << (j - 1)))] += rate;
            }
        }
        for k in 1..p {
            if block[k - 1] != block[k] {
                q[(s, s ^ (0b11 << (k - 1)))] += 1.0;
            }
        }
        let out: f64 = q.row(s).sum();
        q[(s, s)] = -out;
    }
    BoundaryChain { p, generator: q }
}

/// A probability vector over the block states.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantMeasure {
    p: usize,
    weights: Vec<f64>,
}

impl InvariantMeasure {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, state: usize) -> f64 {
        self.weights[state]
    }

    /// `E[eta_j]` under this law, `j` 1-based.
    pub fn density(&self, j: usize) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(s, _)| (s >> (j - 1)) & 1 == 1)
            .map(|(_, w)| w)
            .sum()
    }

    /// Max-norm of `mu Q`.
    pub fn residual(&self, chain: &BoundaryChain) -> f64 {
        let mu = DVector::from_column_slice(&self.weights);
        (chain.generator().transpose() * mu).amax()
    }

    pub fn by_key(&self) -> BTreeMap<String, f64> {
        self.weights
            .iter()
            .enumerate()
            .map(|(s, &w)| (block_key(self.p, s), w))
            .collect()
    }
}

/// The unique stationary law of the block chain.
///
/// Uniqueness is decided combinatorially (one closed class); the weights come
/// from a dense solve of `Q^T mu = 0` with one equation replaced by `sum mu = 1`.
pub fn invariant_measure(chain: &BoundaryChain) -> Result<InvariantMeasure> {
    invariant_measure_pinned(chain, 0)
}

/// As [`invariant_measure`], replacing equation `pinned` by the normalisation.
pub fn invariant_measure_pinned(chain: &BoundaryChain, pinned: usize) -> Result<InvariantMeasure> {
    let classes = chain.closed_classes();
    if classes != 1 {
        return Err(Error::NonUniqueStationary(classes));
    }
    let n = chain.states();
    let qt = chain.generator().transpose();
    let mut a = qt.clone();
    a.row_mut(pinned % n).fill(1.0);
    let mut b = DVector::zeros(n);
    b[pinned % n] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu
        .solve(&b)
        .ok_or_else(|| Error::Numerical("singular block chain system".into()))?;
    // one step of iterative refinement
    let r = &b - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    for w in x.iter_mut() {
        if *w < 0.0 {
            *w = 0.0;
        }
    }
    let total = x.sum();
    x /= total;
    Ok(InvariantMeasure {
        p: chain.p(),
        weights: x.iter().copied().collect(),
    })
}

/// Effective left density `E_mu[eta_p]`.
pub fn left_density(spec: &ModelSpec) -> Result<f64> {
    let chain = build_chain(spec);
    Ok(invariant_measure(&chain)?.density(spec.p()))
}

/// Positive total reservoir or anticopy rate.
pub fn check_a1(spec: &ModelSpec) -> Result<bool> {
    match &spec.left {
        LeftBoundary::Structured(b) => {
            let r: f64 = b.r.iter().sum();
            let a: f64 = b.anticopy.iter().flatten().sum();
            Ok(r + a > 0.0)
        }
        LeftBoundary::Table(_) => Err(Error::Unsupported(
            "A1 applies to structured boundaries only".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A2Report {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub lambda_sum: f64,
    pub holds: bool,
}

/// Minimal creation rate `A`, annihilation rate `B` and excess rates
/// `lambda`; holds iff `(p-1) sum lambda <= A + B`.
pub fn check_a2(table: &RateTableBoundary) -> A2Report {
    let p = table.p();
    let rates = table.rates();
    // site 1 is the least significant bit: even states have eta_1 = 0
    let create: Vec<f64> = rates.iter().step_by(2).copied().collect();
    let annihilate: Vec<f64> = rates.iter().skip(1).step_by(2).copied().collect();
    let a = create.iter().copied().fold(f64::INFINITY, f64::min);
    let b = annihilate.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_sum: f64 =
        create.iter().map(|c| c - a).sum::<f64>() + annihilate.iter().map(|c| c - b).sum::<f64>();
    let holds = (p as f64 - 1.0) * lambda_sum <= a + b;
    A2Report {
        a,
        b,
        lambda_sum,
        holds,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub alpha: Option<f64>,
    pub unique: bool,
    pub mu: BTreeMap<String, f64>,
    pub a1: Option<bool>,
    pub a2: Option<A2Report>,
}

pub fn boundary_report(spec: &ModelSpec) -> Result<BoundaryReport> {
    let chain = build_chain(spec);
    let (alpha, unique, mu) = match invariant_measure(&chain) {
        Ok(m) => (Some(m.density(spec.p())), true, m.by_key()),
        Err(Error::NonUniqueStationary(_)) => (None, false, BTreeMap::new()),
        Err(e) => return Err(e),
    };
    let (a1, a2) = match &spec.left {
        LeftBoundary::Structured(_) => (Some(check_a1(spec)?), None),
        LeftBoundary::Table(t) => (None, Some(check_a2(t))),
    };
    Ok(BoundaryReport {
        alpha,
        unique,
        mu,
        a1,
        a2,
    })
}
