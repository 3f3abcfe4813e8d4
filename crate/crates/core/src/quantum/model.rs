use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use super::matrix::{norm, CMatrix};
use crate::distribution::{JointDistribution, OutcomeSpace};
use crate::error::{Error, Result};
use crate::graph::{Dag, NodeKind, VarOrder};
use crate::varset::VarId;

/// Tolerance for state normalization and gate unitarity.
pub const LOAD_TOL: f64 = 1e-10;
/// Default cap on the total dimension of all drain input spaces.
pub const DEFAULT_STATE_CAP: usize = 1 << 12;

type Edge = (VarId, VarId);

/// Per-node parameters of a quantum causal model.
///
/// Preparations live on the out-space of an exogenous node and gates on the
/// in-space of an intermediate node; both spaces order their edges by the
/// index of the neighbouring node, the first edge most significant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuantumModelParams {
    /// Exogenous node -> one state per value.
    pub preps: BTreeMap<VarId, Vec<Vec<C64>>>,
    /// Intermediate node -> one unitary per value.
    pub gates: BTreeMap<VarId, Vec<CMatrix>>,
    /// Drain -> computational basis index read as each value.
    /// Missing entries mean value `i` is basis state `i`.
    pub drain_labels: BTreeMap<VarId, Vec<usize>>,
    /// Setting -> independent marginal. Missing entries mean uniform.
    pub marginals: BTreeMap<VarId, Vec<f64>>,
}

/// A quantum causal model: a quantum-valid graph, an ordering consistent
/// with it, and parameters for every node.
#[derive(Debug, Clone)]
pub struct Qcm {
    dag: Dag,
    order: VarOrder,
    params: QuantumModelParams,
    // per drain: basis index -> value
    readout: Vec<Vec<usize>>,
    marginals: Vec<Vec<f64>>,
}

impl Qcm {
    /// Validate `params` against `dag` and fix a topological ordering.
    pub fn new(dag: Dag, params: QuantumModelParams) -> Result<Self> {
        let order = dag.topological_order();
        Self::with_order(dag, order, params)
    }

    pub fn with_order(dag: Dag, order: VarOrder, params: QuantumModelParams) -> Result<Self> {
        let mut problems: Vec<String> = dag
            .quantum_violations()
            .into_iter()
            .chain(dag.dimension_violations())
            .map(|(_, m)| m)
            .collect();
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        if order.len() != dag.n() || !order.is_consistent_with(&dag) {
            return Err(Error::input("ordering is inconsistent with the graph"));
        }
        let mut readout = vec![Vec::new(); dag.n()];
        let mut marginals = vec![Vec::new(); dag.n()];
        for v in dag.nodes() {
            let name = dag.name(v);
            let k = dag.values(v);
            match dag.kind(v) {
                NodeKind::Exogenous => match params.preps.get(&v) {
                    None => problems.push(format!("node {name}: missing preparation states")),
                    Some(states) => {
                        if states.len() != k {
                            problems.push(format!(
                                "node {name}: {} preparation states for {k} values",
                                states.len()
                            ));
                        }
                        let d = dag.out_dim(v);
                        for (x, s) in states.iter().enumerate() {
                            if s.len() != d {
                                problems.push(format!(
                                    "node {name}: state for value {x} has dimension {}, expected {d}",
                                    s.len()
                                ));
                            } else if (norm(s) - 1.0).abs() > LOAD_TOL {
                                problems.push(format!("node {name}: state for value {x} is not normalized"));
                            }
                        }
                    }
                },
                NodeKind::Intermediate => match params.gates.get(&v) {
                    None => problems.push(format!("node {name}: missing gates")),
                    Some(gates) => {
                        if gates.len() != k {
                            problems.push(format!("node {name}: {} gates for {k} values", gates.len()));
                        }
                        let d = dag.in_dim(v);
                        for (x, u) in gates.iter().enumerate() {
                            if u.rows() != d || u.cols() != d {
                                problems.push(format!(
                                    "node {name}: gate for value {x} is {}x{}, expected {d}x{d}",
                                    u.rows(),
                                    u.cols()
                                ));
                            } else if !u.is_unitary(LOAD_TOL) {
                                problems.push(format!("node {name}: gate for value {x} is not unitary"));
                            }
                        }
                    }
                },
                NodeKind::Drain => {
                    let labels: Vec<usize> = params
                        .drain_labels
                        .get(&v)
                        .cloned()
                        .unwrap_or_else(|| (0..k).collect());
                    let mut inv = vec![usize::MAX; k];
                    let ok = labels.len() == k
                        && labels.iter().enumerate().all(|(x, &b)| {
                            b < k && inv[b] == usize::MAX && {
                                inv[b] = x;
                                true
                            }
                        });
                    if ok {
                        readout[v.index()] = inv;
                    } else {
                        problems.push(format!(
                            "node {name}: drain labels must be a bijection onto 0..{k}"
                        ));
                    }
                }
            }
            if dag.kind(v) != NodeKind::Drain {
                let m = params.marginals.get(&v).cloned().unwrap_or_else(|| vec![1.0 / k as f64; k]);
                let sum: f64 = m.iter().sum();
                if m.len() != k || m.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > LOAD_TOL {
                    problems.push(format!("node {name}: marginal is not a distribution over {k} values"));
                }
                marginals[v.index()] = m;
            } else if params.marginals.contains_key(&v) {
                problems.push(format!("node {name}: outcomes take no marginal"));
            }
        }
        for v in params.preps.keys().chain(params.gates.keys()).chain(params.drain_labels.keys()) {
            if v.index() >= dag.n() {
                problems.push(format!("parameters refer to unknown node index {}", v.index()));
            }
        }
        for (v, kind, what) in params
            .preps
            .keys()
            .map(|v| (v, NodeKind::Exogenous, "preparation"))
            .chain(params.gates.keys().map(|v| (v, NodeKind::Intermediate, "gate")))
            .chain(params.drain_labels.keys().map(|v| (v, NodeKind::Drain, "drain labels")))
        {
            if v.index() < dag.n() && dag.kind(*v) != kind {
                problems.push(format!("node {}: {what} given for a node of the wrong kind", dag.name(*v)));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Qcm {
            dag,
            order,
            params,
            readout,
            marginals,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn order(&self) -> &VarOrder {
        &self.order
    }

    pub fn params(&self) -> &QuantumModelParams {
        &self.params
    }

    /// Declared marginal of a setting.
    pub fn marginal(&self, v: VarId) -> &[f64] {
        &self.marginals[v.index()]
    }

    /// Drain readout: basis index -> value.
    pub(crate) fn readout(&self, v: VarId) -> &[usize] {
        &self.readout[v.index()]
    }

    /// Exact joint distribution over all variables (default caps).
    pub fn evaluate(&self) -> Result<JointDistribution> {
        self.evaluate_with_cap(DEFAULT_STATE_CAP)
    }

    pub fn evaluate_with_cap(&self, state_cap: usize) -> Result<JointDistribution> {
        let g = &self.dag;
        let drains: Vec<VarId> = g.nodes().filter(|&v| g.kind(v) == NodeKind::Drain).collect();
        let settings: Vec<VarId> = g.nodes().filter(|&v| g.kind(v) != NodeKind::Drain).collect();
        let total: usize = drains
            .iter()
            .map(|&d| g.in_dim(d))
            .try_fold(1usize, |acc, d| acc.checked_mul(d))
            .filter(|&t| t <= state_cap)
            .ok_or_else(|| {
                Error::Resource(format!(
                    "drain input spaces exceed the simulator cap of {state_cap} amplitudes"
                ))
            })?;
        let space = OutcomeSpace::new(g.names().to_vec(), g.value_sizes().to_vec())?;
        let mut table = vec![0.0; space.cells()];

        let drain_dims: Vec<usize> = drains.iter().map(|&d| g.in_dim(d)).collect();
        let mut assignment = vec![0usize; g.n()];
        let mut digits = vec![0usize; settings.len()];
        let mut sim = Simulator::new(g, &self.order);
        loop {
            let weight: f64 = settings
                .iter()
                .zip(&digits)
                .map(|(&s, &x)| self.marginals[s.index()][x])
                .product();
            if weight > 0.0 {
                for (&s, &x) in settings.iter().zip(&digits) {
                    assignment[s.index()] = x;
                }
                let amps = sim.run(&self.params, &assignment, &drains);
                debug_assert_eq!(amps.len(), total);
                for (idx, a) in amps.iter().enumerate() {
                    let p = a.norm_sqr();
                    if p == 0.0 {
                        continue;
                    }
                    let mut rest = idx;
                    for (k, &d) in drains.iter().enumerate().rev() {
                        let b = rest % drain_dims[k];
                        rest /= drain_dims[k];
                        assignment[d.index()] = self.readout[d.index()][b];
                    }
                    table[space.index(&assignment)] += weight * p;
                }
            }
            // next setting assignment, last setting fastest
            let mut k = settings.len();
            loop {
                if k == 0 {
                    return Ok(JointDistribution::from_parts_unchecked(space, table));
                }
                k -= 1;
                digits[k] += 1;
                if digits[k] < g.values(settings[k]) {
                    break;
                }
                digits[k] = 0;
            }
        }
    }
}

/// State-vector evolution over the live wires of the network.
struct Simulator<'a> {
    g: &'a Dag,
    order: &'a VarOrder,
    wires: Vec<Edge>,
    state: Vec<C64>,
    scratch: Vec<C64>,
}

impl<'a> Simulator<'a> {
    fn new(g: &'a Dag, order: &'a VarOrder) -> Self {
        Simulator {
            g,
            order,
            wires: Vec::new(),
            state: Vec::new(),
            scratch: Vec::new(),
        }
    }

    fn dim(&self, e: Edge) -> usize {
        self.g.edge_dim(e.0, e.1).expect("live wire is an edge")
    }

    /// Amplitudes over the drains' input spaces, drains in index order.
    fn run(&mut self, params: &QuantumModelParams, values: &[usize], drains: &[VarId]) -> Vec<C64> {
        self.wires.clear();
        self.state.clear();
        self.state.push(C64::new(1.0, 0.0));
        for &v in self.order.sequence() {
            match self.g.kind(v) {
                NodeKind::Exogenous => {
                    let psi = &params.preps[&v][values[v.index()]];
                    self.scratch.clear();
                    for a in &self.state {
                        self.scratch.extend(psi.iter().map(|b| a * b));
                    }
                    std::mem::swap(&mut self.state, &mut self.scratch);
                    self.wires.extend(self.g.out_edges(v));
                }
                NodeKind::Intermediate => {
                    let ins = self.g.in_edges(v);
                    self.move_to_end(&ins);
                    let u = &params.gates[&v][values[v.index()]];
                    let d = u.rows();
                    let mut out = vec![C64::new(0.0, 0.0); d];
                    for block in self.state.chunks_mut(d) {
                        u.apply_into(block, &mut out);
                        block.copy_from_slice(&out);
                    }
                    let keep = self.wires.len() - ins.len();
                    self.wires.truncate(keep);
                    self.wires.extend(self.g.out_edges(v));
                }
                NodeKind::Drain => {}
            }
        }
        let target: Vec<Edge> = drains.iter().flat_map(|&d| self.g.in_edges(d)).collect();
        self.move_to_end(&target);
        std::mem::take(&mut self.state)
    }

    /// Permute the state so `tail` are the last wires, in the given order.
    fn move_to_end(&mut self, tail: &[Edge]) {
        let head: Vec<Edge> = self.wires.iter().copied().filter(|w| !tail.contains(w)).collect();
        let new_wires: Vec<Edge> = head.into_iter().chain(tail.iter().copied()).collect();
        if new_wires == self.wires {
            return;
        }
        let old_dims: Vec<usize> = self.wires.iter().map(|&w| self.dim(w)).collect();
        let mut old_strides = vec![1usize; self.wires.len()];
        for i in (0..self.wires.len().saturating_sub(1)).rev() {
            old_strides[i] = old_strides[i + 1] * old_dims[i + 1];
        }
        // for each new position: (dim, stride of that wire in the old layout)
        let map: Vec<(usize, usize)> = new_wires
            .iter()
            .map(|w| {
                let i = self.wires.iter().position(|x| x == w).expect("live wire");
                (old_dims[i], old_strides[i])
            })
            .collect();
        self.scratch.clear();
        self.scratch.resize(self.state.len(), C64::new(0.0, 0.0));
        let mut digits = vec![0usize; map.len()];
        let mut src = 0usize;
        for dst in 0..self.state.len() {
            self.scratch[dst] = self.state[src];
            for k in (0..map.len()).rev() {
                digits[k] += 1;
                src += map[k].1;
                if digits[k] < map[k].0 {
                    break;
                }
                src -= map[k].1 * map[k].0;
                digits[k] = 0;
            }
        }
        std::mem::swap(&mut self.state, &mut self.scratch);
        self.wires = new_wires;
    }
}
