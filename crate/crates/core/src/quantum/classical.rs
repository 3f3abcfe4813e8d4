use std::collections::BTreeMap;

use super::matrix::basis_index;
use super::model::Qcm;
use crate::ccm::{ClassicalModelParams, Mechanism};
use crate::error::{Error, Result};
use crate::graph::{causal_input_list, CausalInputList, Dag, DagBuilder, NodeKind, NodeSpec, Role};
use crate::varset::{VarId, VarSet};

/// Classical limit of a quantum-valid graph: every setting gets an edge to
/// each outcome it has a directed path to, and all other edges are dropped.
/// Existing edges keep their dimension, new ones get 2.
pub fn classical_limit(g: &Dag) -> Result<Dag> {
    g.validate_quantum()?;
    let mut b = DagBuilder::new().max_nodes(g.n().max(1));
    for v in g.nodes() {
        b.add_node(NodeSpec::new(g.name(v), g.role(v), g.values(v)));
    }
    for s in g.settings() {
        let reach = g.descendants_unchecked(VarSet::singleton(s));
        for o in reach.intersection(g.outcomes()) {
            let dim = g.edge_dim(s, o).unwrap_or(2);
            b.add_edge(s.index(), o.index(), dim);
        }
    }
    b.build()
}

/// Classical causal model equivalent to `q` on its classical limit.
///
/// Requires every preparation to be a computational basis state and every
/// gate to be a phase-permutation matrix, within `tol`. Each outcome becomes
/// a deterministic function of its ancestor settings.
pub fn ccm_from_qcm(q: &Qcm, tol: f64) -> Result<(CausalInputList, ClassicalModelParams)> {
    let g = q.dag();
    let params = q.params();
    let mut problems = Vec::new();
    let mut prep_index = vec![Vec::new(); g.n()];
    let mut gate_map = vec![Vec::new(); g.n()];
    for v in g.nodes() {
        match g.kind(v) {
            NodeKind::Exogenous => {
                for (x, s) in params.preps[&v].iter().enumerate() {
                    match basis_index(s, tol) {
                        Some(i) => prep_index[v.index()].push(i),
                        None => problems.push(format!(
                            "node {}: preparation for value {x} is not a computational basis state",
                            g.name(v)
                        )),
                    }
                }
            }
            NodeKind::Intermediate => {
                for (x, u) in params.gates[&v].iter().enumerate() {
                    match u.monomial_map(tol) {
                        Some(m) => gate_map[v.index()].push(m),
                        None => problems.push(format!(
                            "node {}: gate for value {x} is not a permutation",
                            g.name(v)
                        )),
                    }
                }
            }
            NodeKind::Drain => {}
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let gc = classical_limit(g)?;
    let list = causal_input_list(&gc, &gc.topological_order())?;
    let sizes = g.value_sizes().to_vec();
    let mut mechanisms = Vec::with_capacity(g.n());
    for v in g.nodes() {
        if g.role(v) == Role::Setting {
            mechanisms.push(Mechanism::Marginal(q.marginal(v).to_vec()));
            continue;
        }
        let pa: Vec<VarId> = gc.parents(v).iter().collect();
        let configs: usize = pa.iter().map(|p| sizes[p.index()]).product();
        let mut values = vec![0usize; g.n()];
        let mut table = Vec::with_capacity(configs);
        for cfg in 0..configs {
            let mut rest = cfg;
            for p in pa.iter().rev() {
                values[p.index()] = rest % sizes[p.index()];
                rest /= sizes[p.index()];
            }
            let basis = propagate(g, q, &prep_index, &gate_map, &values);
            let d = gather(g, &basis, v);
            table.push(q.readout(v)[d]);
        }
        mechanisms.push(Mechanism::Function {
            table,
            noise: vec![1.0],
        });
    }
    Ok((
        list,
        ClassicalModelParams {
            names: g.names().to_vec(),
            sizes,
            mechanisms,
        },
    ))
}

/// Basis index carried by every edge when all nodes act classically.
fn propagate(
    g: &Dag,
    q: &Qcm,
    prep_index: &[Vec<usize>],
    gate_map: &[Vec<Vec<usize>>],
    values: &[usize],
) -> BTreeMap<(VarId, VarId), usize> {
    let mut wire = BTreeMap::new();
    let split = |wire: &mut BTreeMap<(VarId, VarId), usize>, v: VarId, mut idx: usize| {
        for e in g.out_edges(v).into_iter().rev() {
            let d = g.edge_dim(e.0, e.1).expect("edge");
            wire.insert(e, idx % d);
            idx /= d;
        }
    };
    for &v in q.order().sequence() {
        match g.kind(v) {
            NodeKind::Exogenous => split(&mut wire, v, prep_index[v.index()][values[v.index()]]),
            NodeKind::Intermediate => {
                let i = gather(g, &wire, v);
                split(&mut wire, v, gate_map[v.index()][values[v.index()]][i]);
            }
            NodeKind::Drain => {}
        }
    }
    wire
}

fn gather(g: &Dag, wire: &BTreeMap<(VarId, VarId), usize>, v: VarId) -> usize {
    g.in_edges(v).into_iter().fold(0, |acc, e| {
        acc * g.edge_dim(e.0, e.1).expect("edge") + wire[&e]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccm::generate_ccm;
    use crate::quantum::matrix::{CMatrix, C64};
    use crate::quantum::model::QuantumModelParams;

    fn basis(d: usize, i: usize) -> Vec<C64> {
        (0..d).map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect()
    }

    fn names(g: &Dag) -> Vec<(VarId, VarId)> {
        g.edges().collect()
    }

    #[test]
    fn limit_of_a_chain() {
        let g = Dag::named(&["S", "U", "O"], &[(0, 1), (1, 2)]).unwrap();
        let gc = classical_limit(&g).unwrap();
        assert_eq!(names(&gc), vec![(VarId(0), VarId(2)), (VarId(1), VarId(2))]);
        assert_eq!(classical_limit(&gc).unwrap(), gc);
    }

    #[test]
    fn limit_of_the_measured_bell_network() {
        // lambda -> S -> A, lambda -> T -> B
        let g = Dag::named(&["lambda", "S", "T", "A", "B"], &[(0, 1), (0, 2), (1, 3), (2, 4)]).unwrap();
        let gc = classical_limit(&g).unwrap();
        let want = Dag::named(&["lambda", "S", "T", "A", "B"], &[(0, 3), (0, 4), (1, 3), (2, 4)]).unwrap();
        assert_eq!(names(&gc), names(&want));
    }

    #[test]
    fn xor_network_matches_its_classical_model() {
        // S prepares |s>, U applies NOT^u, O reads the bit
        let g = Dag::named(&["S", "U", "O"], &[(0, 1), (1, 2)]).unwrap();
        let mut params = QuantumModelParams::default();
        params.preps.insert(VarId(0), vec![basis(2, 0), basis(2, 1)]);
        params.gates.insert(
            VarId(1),
            vec![CMatrix::identity(2), CMatrix::permutation(&[1, 0]).unwrap()],
        );
        params.marginals.insert(VarId(0), vec![0.3, 0.7]);
        let q = Qcm::new(g, params).unwrap();
        let (list, ccm) = ccm_from_qcm(&q, 1e-10).unwrap();
        match &ccm.mechanisms[2] {
            Mechanism::Function { table, .. } => assert_eq!(table, &vec![0, 1, 1, 0]),
            other => panic!("{other:?}"),
        }
        let pc = generate_ccm(&list, &ccm).unwrap();
        let pq = q.evaluate().unwrap();
        assert!(pc.max_abs_diff(&pq).unwrap() <= 1e-10);
    }

    #[test]
    fn entangled_preparation_is_rejected() {
        let g = DagBuilder::new()
            .node("P", Role::Setting, 1)
            .node("A", Role::Outcome, 2)
            .node("B", Role::Outcome, 2)
            .edge(0, 1)
            .edge(0, 2)
            .build()
            .unwrap();
        let h = 1.0 / 2f64.sqrt();
        let mut params = QuantumModelParams::default();
        params.preps.insert(
            VarId(0),
            vec![vec![C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)]],
        );
        let q = Qcm::new(g, params).unwrap();
        match ccm_from_qcm(&q, 1e-10) {
            Err(Error::Validation(v)) => assert!(v[0].contains("node P")),
            other => panic!("{other:?}"),
        }
    }
}
