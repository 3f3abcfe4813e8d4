//! DAG representation, node classification, ancestry, and generation of
//! causal and quantum input lists.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::ci::{CiRelation, CiSet};
use crate::error::{Error, Result};
use crate::separation;
use crate::varset::{VarId, VarSet, MAX_VARS};

/// Default cap on the number of nodes of a [`Dag`].
pub const DEFAULT_MAX_NODES: usize = 16;

/// Above this many variables a quantum input list is only available lazily.
pub const QLIST_MATERIALIZE_CAP: usize = 10;

/// Role of a variable in a quantum network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Setting,
    Outcome,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Setting => "setting",
            Role::Outcome => "outcome",
        })
    }
}

/// Structural class of a node, derived from its edges.
///
/// A node without children is a drain even when it also lacks parents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Exogenous,
    Intermediate,
    Drain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    pub role: Role,
    pub values: usize,
}

impl NodeSpec {
    pub fn new(name: impl Into<String>, role: Role, values: usize) -> Self {
        NodeSpec {
            name: name.into(),
            role,
            values,
        }
    }
}

/// A directed acyclic graph over named variables.
///
/// Besides the edge structure each node carries a [`Role`] and the size of
/// its outcome space; each edge carries a Hilbert-space dimension (only the
/// quantum simulator looks at it).
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    names: Vec<String>,
    roles: Vec<Role>,
    values: Vec<usize>,
    parents: Vec<VarSet>,
    children: Vec<VarSet>,
    dims: BTreeMap<(VarId, VarId), usize>,
}

/// Incremental constructor for [`Dag`].
#[derive(Debug, Clone, Default)]
pub struct DagBuilder {
    nodes: Vec<NodeSpec>,
    edges: Vec<(usize, usize, usize)>,
    max_nodes: Option<usize>,
}

impl DagBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Raise or lower the node cap (at most 64).
    pub fn max_nodes(mut self, cap: usize) -> Self {
        self.max_nodes = Some(cap);
        self
    }

    pub fn node(mut self, name: impl Into<String>, role: Role, values: usize) -> Self {
        self.nodes.push(NodeSpec::new(name, role, values));
        self
    }

    pub fn add_node(&mut self, spec: NodeSpec) -> usize {
        self.nodes.push(spec);
        self.nodes.len() - 1
    }

    /// Edge with the default dimension 2.
    pub fn edge(self, parent: usize, child: usize) -> Self {
        self.edge_dim(parent, child, 2)
    }

    pub fn edge_dim(mut self, parent: usize, child: usize, dim: usize) -> Self {
        self.edges.push((parent, child, dim));
        self
    }

    pub fn add_edge(&mut self, parent: usize, child: usize, dim: usize) {
        self.edges.push((parent, child, dim));
    }

    pub fn build(self) -> Result<Dag> {
        let cap = self.max_nodes.unwrap_or(DEFAULT_MAX_NODES);
        if cap > MAX_VARS {
            return Err(Error::input(format!("node cap {cap} exceeds {MAX_VARS}")));
        }
        let n = self.nodes.len();
        if n > cap {
            return Err(Error::Resource(format!(
                "graph has {n} nodes, cap is {cap}"
            )));
        }
        let mut names = Vec::with_capacity(n);
        for (i, spec) in self.nodes.iter().enumerate() {
            if spec.name.is_empty() || spec.name.chars().any(|c| c.is_whitespace() || ",|#".contains(c)) {
                return Err(Error::input(format!("invalid node name {:?}", spec.name)));
            }
            if self.nodes[..i].iter().any(|o| o.name == spec.name) {
                return Err(Error::input(format!("duplicate node name {:?}", spec.name)));
            }
            if spec.values == 0 {
                return Err(Error::input(format!("node {}: values must be >= 1", spec.name)));
            }
            names.push(spec.name.clone());
        }
        let mut parents = vec![VarSet::EMPTY; n];
        let mut children = vec![VarSet::EMPTY; n];
        let mut dims = BTreeMap::new();
        for &(p, c, dim) in &self.edges {
            if p >= n || c >= n {
                return Err(Error::input(format!("edge {p} -> {c} refers to an unknown node")));
            }
            if p == c {
                return Err(Error::input(format!("self-loop on node {}", names[p])));
            }
            if !dim.is_power_of_two() || dim < 2 {
                return Err(Error::input(format!(
                    "edge {} -> {}: dim {dim} is not a power of two >= 2",
                    names[p], names[c]
                )));
            }
            let (pv, cv) = (VarId::new(p), VarId::new(c));
            if children[p].contains(cv) {
                return Err(Error::input(format!(
                    "duplicate edge {} -> {}",
                    names[p], names[c]
                )));
            }
            children[p].insert(cv);
            parents[c].insert(pv);
            dims.insert((pv, cv), dim);
        }
        let dag = Dag {
            names,
            roles: self.nodes.iter().map(|s| s.role).collect(),
            values: self.nodes.iter().map(|s| s.values).collect(),
            parents,
            children,
            dims,
        };
        if let Some(cycle_node) = dag.find_cycle_node() {
            return Err(Error::input(format!(
                "graph contains a cycle through node {}",
                dag.names[cycle_node.index()]
            )));
        }
        Ok(dag)
    }
}

impl Dag {
    /// Graph over `n` unnamed binary variables (`X0`, `X1`, ...) with roles
    /// inferred from structure: drains are outcomes, everything else a setting.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Dag> {
        let names: Vec<String> = (0..n).map(|i| format!("X{i}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        Self::named(&names, edges)
    }

    /// Like [`Dag::from_edges`] with explicit names.
    pub fn named(names: &[&str], edges: &[(usize, usize)]) -> Result<Dag> {
        let n = names.len();
        let mut has_child = vec![false; n];
        for &(p, _) in edges {
            if p < n {
                has_child[p] = true;
            }
        }
        let mut b = DagBuilder::new().max_nodes(MAX_VARS);
        for (i, name) in names.iter().enumerate() {
            let role = if has_child[i] { Role::Setting } else { Role::Outcome };
            b = b.node(*name, role, 2);
        }
        for &(p, c) in edges {
            b = b.edge(p, c);
        }
        b.build()
    }

    /// Rebuild with an extra edge, keeping roles, values and dims.
    pub fn with_edge(&self, parent: VarId, child: VarId, dim: usize) -> Result<Dag> {
        let mut b = self.to_builder();
        b.add_edge(parent.index(), child.index(), dim);
        b.build()
    }

    /// Same structure with roles re-derived from node kinds.
    pub fn with_inferred_roles(&self) -> Dag {
        let mut d = self.clone();
        for v in 0..self.n() {
            d.roles[v] = if d.children[v].is_empty() {
                Role::Outcome
            } else {
                Role::Setting
            };
        }
        d
    }

    pub fn to_builder(&self) -> DagBuilder {
        let mut b = DagBuilder::new().max_nodes(MAX_VARS);
        for v in 0..self.n() {
            b.add_node(NodeSpec::new(self.names[v].clone(), self.roles[v], self.values[v]));
        }
        for (&(p, c), &dim) in &self.dims {
            b.add_edge(p.index(), c.index(), dim);
        }
        b
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = VarId> {
        (0..self.n()).map(VarId::new)
    }

    pub fn all(&self) -> VarSet {
        VarSet::full(self.n())
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id_of(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name).map(VarId::new)
    }

    pub fn role(&self, v: VarId) -> Role {
        self.roles[v.index()]
    }

    /// Outcome-space cardinality of `v`.
    pub fn values(&self, v: VarId) -> usize {
        self.values[v.index()]
    }

    pub fn value_sizes(&self) -> &[usize] {
        &self.values
    }

    pub fn kind(&self, v: VarId) -> NodeKind {
        if self.children[v.index()].is_empty() {
            NodeKind::Drain
        } else if self.parents[v.index()].is_empty() {
            NodeKind::Exogenous
        } else {
            NodeKind::Intermediate
        }
    }

    #[inline]
    pub fn parents(&self, v: VarId) -> VarSet {
        self.parents[v.index()]
    }

    #[inline]
    pub fn children(&self, v: VarId) -> VarSet {
        self.children[v.index()]
    }

    pub fn has_edge(&self, parent: VarId, child: VarId) -> bool {
        self.children[parent.index()].contains(child)
    }

    pub fn edge_dim(&self, parent: VarId, child: VarId) -> Option<usize> {
        self.dims.get(&(parent, child)).copied()
    }

    /// Edges in (parent, child) order.
    pub fn edges(&self) -> impl Iterator<Item = (VarId, VarId)> + '_ {
        self.dims.keys().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.dims.len()
    }

    /// Nodes whose role is [`Role::Setting`].
    pub fn settings(&self) -> VarSet {
        self.nodes().filter(|&v| self.role(v) == Role::Setting).collect()
    }

    /// Nodes whose role is [`Role::Outcome`].
    pub fn outcomes(&self) -> VarSet {
        self.nodes().filter(|&v| self.role(v) == Role::Outcome).collect()
    }

    pub fn check_members(&self, v: VarSet) -> Result<()> {
        if v.is_subset(self.all()) {
            Ok(())
        } else {
            Err(Error::input(format!(
                "variable set {v:?} refers to nodes outside 0..{}",
                self.n()
            )))
        }
    }

    /// All nodes with a directed path into some member of `v`.
    pub fn ancestors(&self, v: VarSet) -> Result<VarSet> {
        self.check_members(v)?;
        Ok(self.ancestors_unchecked(v))
    }

    /// All nodes reachable from some member of `v` by a directed path.
    pub fn descendants(&self, v: VarSet) -> Result<VarSet> {
        self.check_members(v)?;
        Ok(self.descendants_unchecked(v))
    }

    pub(crate) fn ancestors_unchecked(&self, v: VarSet) -> VarSet {
        closure_over(&self.parents, v)
    }

    pub(crate) fn descendants_unchecked(&self, v: VarSet) -> VarSet {
        closure_over(&self.children, v)
    }

    /// `v` together with its ancestors.
    pub(crate) fn ancestral_closure(&self, v: VarSet) -> VarSet {
        v.union(self.ancestors_unchecked(v))
    }

    fn find_cycle_node(&self) -> Option<VarId> {
        self.nodes()
            .find(|&v| self.descendants_unchecked(VarSet::singleton(v)).contains(v))
    }

    /// Kahn's algorithm, smallest available index first.
    pub fn topological_order(&self) -> VarOrder {
        let n = self.n();
        let mut placed = VarSet::EMPTY;
        let mut seq = Vec::with_capacity(n);
        while seq.len() < n {
            let next = self
                .nodes()
                .find(|&v| !placed.contains(v) && self.parents(v).is_subset(placed))
                .expect("graph is acyclic");
            placed.insert(next);
            seq.push(next);
        }
        VarOrder::from_sequence_unchecked(seq)
    }

    /// Violations of the role rules a quantum network must satisfy: outcomes
    /// are exactly the drains, so every setting has a child and no outcome does.
    pub fn quantum_violations(&self) -> Vec<(VarId, String)> {
        let mut out = Vec::new();
        for v in self.nodes() {
            match (self.role(v), self.kind(v)) {
                (Role::Setting, NodeKind::Drain) => out.push((
                    v,
                    format!(
                        "node {}: setting has no children (every setting must be a parent of at least one node)",
                        self.name(v)
                    ),
                )),
                (Role::Outcome, NodeKind::Exogenous | NodeKind::Intermediate) => out.push((
                    v,
                    format!(
                        "node {}: outcome has children (outcomes cannot be parents)",
                        self.name(v)
                    ),
                )),
                _ => {}
            }
        }
        out
    }

    /// Violations of the Hilbert-space bookkeeping used by the simulator:
    /// intermediates preserve dimension and a drain has one value per basis state.
    pub fn dimension_violations(&self) -> Vec<(VarId, String)> {
        let mut out = Vec::new();
        for v in self.nodes() {
            let din = self.in_dim(v);
            let dout = self.out_dim(v);
            match self.kind(v) {
                NodeKind::Intermediate if din != dout => out.push((
                    v,
                    format!(
                        "node {}: incoming dimension {din} differs from outgoing dimension {dout}",
                        self.name(v)
                    ),
                )),
                NodeKind::Drain if self.values(v) != din => out.push((
                    v,
                    format!(
                        "node {}: drain has {} values but its input space has dimension {din}",
                        self.name(v),
                        self.values(v)
                    ),
                )),
                _ => {}
            }
        }
        out
    }

    pub fn is_quantum_valid(&self) -> bool {
        self.quantum_violations().is_empty()
    }

    pub fn validate_quantum(&self) -> Result<()> {
        let v = self.quantum_violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v.into_iter().map(|(_, m)| m).collect()))
        }
    }

    /// Incoming edges ordered by parent index; this is the wire order of
    /// the node's input space (first edge = most significant factor).
    pub fn in_edges(&self, v: VarId) -> Vec<(VarId, VarId)> {
        self.parents(v).iter().map(|p| (p, v)).collect()
    }

    /// Outgoing edges ordered by child index.
    pub fn out_edges(&self, v: VarId) -> Vec<(VarId, VarId)> {
        self.children(v).iter().map(|c| (v, c)).collect()
    }

    pub fn in_dim(&self, v: VarId) -> usize {
        self.in_edges(v).iter().map(|e| self.dims[e]).product()
    }

    pub fn out_dim(&self, v: VarId) -> usize {
        self.out_edges(v).iter().map(|e| self.dims[e]).product()
    }
}

fn closure_over(adj: &[VarSet], start: VarSet) -> VarSet {
    let mut seen = VarSet::EMPTY;
    let mut frontier = start;
    while !frontier.is_empty() {
        let mut next = VarSet::EMPTY;
        for v in frontier {
            next = next.union(adj[v.index()]);
        }
        frontier = next.difference(seen);
        seen = seen.union(next);
    }
    seen
}

/// A total order on the variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarOrder {
    seq: Vec<VarId>,
    pos: Vec<usize>,
}

impl VarOrder {
    /// `seq[k]` is the variable at position `k`.
    pub fn from_sequence(seq: Vec<VarId>) -> Result<Self> {
        let n = seq.len();
        let mut seen = vec![false; n];
        for v in &seq {
            if v.index() >= n || seen[v.index()] {
                return Err(Error::input("ordering is not a permutation of the variables"));
            }
            seen[v.index()] = true;
        }
        Ok(Self::from_sequence_unchecked(seq))
    }

    fn from_sequence_unchecked(seq: Vec<VarId>) -> Self {
        let mut pos = vec![0; seq.len()];
        for (k, v) in seq.iter().enumerate() {
            pos[v.index()] = k;
        }
        VarOrder { seq, pos }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_sequence_unchecked((0..n).map(VarId::new).collect())
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    pub fn position(&self, v: VarId) -> usize {
        self.pos[v.index()]
    }

    pub fn sequence(&self) -> &[VarId] {
        &self.seq
    }

    /// Variables strictly earlier than `v`.
    pub fn predecessors(&self, v: VarId) -> VarSet {
        self.seq[..self.position(v)].iter().copied().collect()
    }

    pub fn is_consistent_with(&self, g: &Dag) -> bool {
        self.len() == g.n()
            && g.edges().all(|(p, c)| self.position(p) < self.position(c))
    }

    /// Random topological order: each step picks uniformly among the nodes
    /// whose parents are already placed.
    pub fn random_consistent<R: Rng + ?Sized>(g: &Dag, rng: &mut R) -> Self {
        let mut placed = VarSet::EMPTY;
        let mut seq = Vec::with_capacity(g.n());
        while seq.len() < g.n() {
            let avail: Vec<VarId> = g
                .nodes()
                .filter(|&v| !placed.contains(v) && g.parents(v).is_subset(placed))
                .collect();
            let v = avail[rng.random_range(0..avail.len())];
            placed.insert(v);
            seq.push(v);
        }
        Self::from_sequence_unchecked(seq)
    }
}

/// Ordered parent assignments; each variable is independent of its
/// non-parent predecessors given its parents.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalInputList {
    order: VarOrder,
    parents: Vec<VarSet>,
}

impl CausalInputList {
    pub fn new(order: VarOrder, parents: Vec<VarSet>) -> Result<Self> {
        if parents.len() != order.len() {
            return Err(Error::input("one parent set per variable required"));
        }
        for v in order.sequence() {
            let preds = order.predecessors(*v);
            if !parents[v.index()].is_subset(preds) {
                return Err(Error::input(format!(
                    "parents of variable {} are not all predecessors",
                    v.index()
                )));
            }
        }
        Ok(CausalInputList { order, parents })
    }

    pub fn order(&self) -> &VarOrder {
        &self.order
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn parents(&self, v: VarId) -> VarSet {
        self.parents[v.index()]
    }

    /// Non-parent predecessors.
    pub fn remainder(&self, v: VarId) -> VarSet {
        self.order.predecessors(v).difference(self.parents(v))
    }

    /// The relations `(X_i _||_ R(X_i) | pa(X_i))` in list order, omitting
    /// those whose remainder is empty.
    pub fn relations(&self) -> Vec<CiRelation> {
        self.order
            .sequence()
            .iter()
            .filter_map(|&v| {
                CiRelation::new(VarSet::singleton(v), self.remainder(v), self.parents(v)).ok()
            })
            .collect()
    }

    pub fn to_ci_set(&self) -> CiSet {
        CiSet::from_relations(self.n(), self.relations())
    }

    /// The graph drawing one edge from each parent; roles are inferred.
    pub fn to_dag(&self) -> Dag {
        let edges: Vec<(usize, usize)> = (0..self.n())
            .flat_map(|c| self.parents[c].iter().map(move |p| (p.index(), c)))
            .collect();
        Dag::from_edges(self.n(), &edges).expect("parents precede children")
    }
}

/// Causal input list generated by `g` under the ordering `ord`.
pub fn causal_input_list(g: &Dag, ord: &VarOrder) -> Result<CausalInputList> {
    if !ord.is_consistent_with(g) {
        return Err(Error::input("ordering is inconsistent with the graph"));
    }
    CausalInputList::new(ord.clone(), g.nodes().map(|v| g.parents(v)).collect())
}

/// Quantum input list: parents (settings only) plus a lazily enumerated set
/// of independence relations.
#[derive(Debug, Clone)]
pub struct QuantumInputList {
    order: VarOrder,
    dag: Dag,
}

impl QuantumInputList {
    pub fn order(&self) -> &VarOrder {
        &self.order
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn parents(&self, v: VarId) -> VarSet {
        self.dag.parents(v)
    }

    pub fn settings(&self) -> VarSet {
        self.dag.settings()
    }

    pub fn outcomes(&self) -> VarSet {
        self.dag.outcomes()
    }

    /// Setting-independence family: for every settings subset `S'` and
    /// outcomes subset `O'`, `(S' _||_ dt_{O'}(S') | O')`.
    pub fn setting_relations(&self) -> impl Iterator<Item = CiRelation> + '_ {
        let settings = self.settings();
        let outcomes = self.outcomes();
        settings.nonempty_subsets().flat_map(move |s| {
            outcomes.subsets().filter_map(move |o| {
                let dt = separation::q_detached_unchecked(&self.dag, s, o);
                CiRelation::new(s, dt, o).ok()
            })
        })
    }

    /// Outcome family: for every nonempty outcomes subset `O'`,
    /// `(O' an(O') _||_ (S \ an(O')) dt_0(O') | 0)`.
    pub fn outcome_relations(&self) -> impl Iterator<Item = CiRelation> + '_ {
        let settings = self.settings();
        self.outcomes().nonempty_subsets().filter_map(move |o| {
            let an = self.dag.ancestors_unchecked(o);
            let left = o.union(an);
            let right = settings
                .difference(an)
                .union(separation::detached_unchecked(&self.dag, o, VarSet::EMPTY));
            CiRelation::new(left, right, VarSet::EMPTY).ok()
        })
    }

    /// Both families, setting relations first. May contain duplicates.
    pub fn relations(&self) -> impl Iterator<Item = CiRelation> + '_ {
        self.setting_relations().chain(self.outcome_relations())
    }

    /// Materialized, deduplicated relation set; refused above 10 variables.
    pub fn to_ci_set(&self) -> Result<CiSet> {
        let n = self.dag.n();
        if n > QLIST_MATERIALIZE_CAP {
            return Err(Error::Resource(format!(
                "quantum input list over {n} variables has up to 2^{n} relations; \
                 materialization is capped at {QLIST_MATERIALIZE_CAP} variables, use the lazy iterator"
            )));
        }
        Ok(CiSet::from_relations(n, self.relations()))
    }
}

/// Quantum input list generated by a quantum-valid `g` under `ord`.
pub fn quantum_input_list(g: &Dag, ord: &VarOrder) -> Result<QuantumInputList> {
    g.validate_quantum()?;
    if !ord.is_consistent_with(g) {
        return Err(Error::input("ordering is inconsistent with the graph"));
    }
    Ok(QuantumInputList {
        order: ord.clone(),
        dag: g.clone(),
    })
}

/// Random DAG: a random node permutation, then each forward pair gets an
/// edge with probability `edge_prob`. Roles are inferred, values are 2.
pub fn random_dag<R: Rng + ?Sized>(n: usize, edge_prob: f64, rng: &mut R) -> Dag {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(edge_prob) {
                edges.push((perm[i], perm[j]));
            }
        }
    }
    Dag::from_edges(n, &edges).expect("forward edges are acyclic")
}
