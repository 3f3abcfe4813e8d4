use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{CMatrix, C64};
use super::model::QuantumModelParams;
use crate::ccm::random_distribution;
use crate::graph::{random_dag, Dag, DagBuilder, NodeKind, NodeSpec, Role};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Random unit vector from a complex Gaussian.
pub fn random_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..d).map(|_| gaussian(rng)).collect();
        let n = super::matrix::norm(&v);
        if n > 1e-6 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

/// Random unitary: Gram-Schmidt orthonormalization of the columns of a
/// complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    'retry: loop {
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
        for _ in 0..d {
            let mut v: Vec<C64> = (0..d).map(|_| gaussian(rng)).collect();
            // two passes keep the columns orthogonal to machine precision
            for _ in 0..2 {
                for q in &cols {
                    let proj: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (x, a) in v.iter_mut().zip(q) {
                        *x -= proj * a;
                    }
                }
            }
            let n = super::matrix::norm(&v);
            if n < 1e-6 {
                continue 'retry;
            }
            cols.push(v.into_iter().map(|a| a / n).collect());
        }
        let mut m = CMatrix::zeros(d, d);
        for (c, col) in cols.iter().enumerate() {
            for (r, a) in col.iter().enumerate() {
                m.set(r, c, *a);
            }
        }
        return m;
    }
}

/// Random states, gates and strictly positive setting marginals for a
/// simulation-ready graph. Drains read value `i` from basis state `i`.
pub fn random_qcm_params<R: Rng + ?Sized>(g: &Dag, rng: &mut R) -> QuantumModelParams {
    let mut p = QuantumModelParams::default();
    for v in g.nodes() {
        let k = g.values(v);
        match g.kind(v) {
            NodeKind::Exogenous => {
                let d = g.out_dim(v);
                p.preps.insert(v, (0..k).map(|_| random_state(d, rng)).collect());
            }
            NodeKind::Intermediate => {
                let d = g.in_dim(v);
                p.gates.insert(v, (0..k).map(|_| random_unitary(d, rng)).collect());
            }
            NodeKind::Drain => continue,
        }
        p.marginals.insert(v, random_distribution(k, rng));
    }
    p
}

/// Random simulation-ready graph on `n` nodes with qubit edges.
///
/// Graphs are drawn with [`random_dag`] and rejected until every
/// intermediate node has as many parents as children. Drains are outcomes
/// with one value per basis state; other nodes are settings with 1 to
/// `max_setting_values` values.
pub fn random_quantum_dag<R: Rng + ?Sized>(
    n: usize,
    edge_prob: f64,
    max_setting_values: usize,
    rng: &mut R,
) -> Dag {
    loop {
        let g = random_dag(n, edge_prob, rng);
        let balanced = g
            .nodes()
            .filter(|&v| g.kind(v) == NodeKind::Intermediate)
            .all(|v| g.parents(v).len() == g.children(v).len());
        if !balanced {
            continue;
        }
        let mut b = DagBuilder::new();
        for v in g.nodes() {
            let spec = match g.kind(v) {
                NodeKind::Drain => NodeSpec::new(g.name(v), Role::Outcome, 1 << g.parents(v).len()),
                _ => NodeSpec::new(g.name(v), Role::Setting, rng.random_range(1..=max_setting_values.max(1))),
            };
            b.add_node(spec);
        }
        for (p, c) in g.edges() {
            b.add_edge(p.index(), c.index(), 2);
        }
        return b.build().expect("same structure as a valid graph");
    }
}
