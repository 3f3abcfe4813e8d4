//! Graph-separation engines: d-separation, O'-chain connectivity and
//! detachment, q-separation, and extraction of full CI sets from a graph.
//!
//! The predicates run as reachability searches over (node, direction)
//! states. Path enumeration is kept for explanations.

use rayon::prelude::*;

use crate::ci::{all_triples, CiRelation, CiSet};
use crate::error::{Error, Result};
use crate::graph::{Dag, Role};
use crate::varset::{VarId, VarSet};

/// Default variable cap for full CI-set enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 6;

/// Direction of one step along an undirected path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// Along the edge: `nodes[i] -> nodes[i+1]`.
    Forward,
    /// Against the edge: `nodes[i] <- nodes[i+1]`.
    Backward,
}

/// A simple path through the graph ignoring edge direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<VarId>,
    pub steps: Vec<Step>,
}

impl Path {
    pub fn start(&self) -> VarId {
        self.nodes[0]
    }

    pub fn end(&self) -> VarId {
        *self.nodes.last().expect("paths are nonempty")
    }

    /// Interior nodes with both adjacent edges pointing in.
    pub fn colliders(&self) -> impl Iterator<Item = VarId> + '_ {
        (1..self.nodes.len().saturating_sub(1))
            .filter(|&i| self.steps[i - 1] == Step::Forward && self.steps[i] == Step::Backward)
            .map(|i| self.nodes[i])
    }

    /// Interior nodes that are chain or fork middles.
    pub fn non_colliders(&self) -> impl Iterator<Item = VarId> + '_ {
        (1..self.nodes.len().saturating_sub(1))
            .filter(|&i| !(self.steps[i - 1] == Step::Forward && self.steps[i] == Step::Backward))
            .map(|i| self.nodes[i])
    }

    pub fn display<S: AsRef<str>>(&self, names: &[S]) -> String {
        let mut s = names[self.nodes[0].index()].as_ref().to_string();
        for (i, step) in self.steps.iter().enumerate() {
            s.push_str(match step {
                Step::Forward => " -> ",
                Step::Backward => " <- ",
            });
            s.push_str(names[self.nodes[i + 1].index()].as_ref());
        }
        s
    }
}

/// Every simple undirected path from `from` to `to`, up to `limit` paths.
pub fn simple_paths(g: &Dag, from: VarId, to: VarId, limit: usize) -> Vec<Path> {
    let mut out = Vec::new();
    let mut nodes = vec![from];
    let mut steps = Vec::new();
    let mut on_path = VarSet::singleton(from);
    extend_paths(g, to, &mut nodes, &mut steps, &mut on_path, &mut out, limit);
    out
}

fn extend_paths(
    g: &Dag,
    to: VarId,
    nodes: &mut Vec<VarId>,
    steps: &mut Vec<Step>,
    on_path: &mut VarSet,
    out: &mut Vec<Path>,
    limit: usize,
) {
    if out.len() >= limit {
        return;
    }
    let cur = *nodes.last().expect("nonempty");
    if cur == to && nodes.len() > 1 {
        out.push(Path {
            nodes: nodes.clone(),
            steps: steps.clone(),
        });
        return;
    }
    let moves = g
        .children(cur)
        .iter()
        .map(|c| (c, Step::Forward))
        .chain(g.parents(cur).iter().map(|p| (p, Step::Backward)));
    for (next, step) in moves {
        if on_path.contains(next) {
            continue;
        }
        on_path.insert(next);
        nodes.push(next);
        steps.push(step);
        extend_paths(g, to, nodes, steps, on_path, out, limit);
        steps.pop();
        nodes.pop();
        on_path.remove(next);
    }
}

fn check_triple(g: &Dag, x: VarSet, y: VarSet, z: VarSet) -> Result<()> {
    g.check_members(x.union(y).union(z))?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::input("separation query needs nonempty x and y"));
    }
    if !x.is_disjoint(y) || !x.is_disjoint(z) || !y.is_disjoint(z) {
        return Err(Error::input("separation query sets must be pairwise disjoint"));
    }
    Ok(())
}

// Search state: a node together with how it was entered.
#[derive(Clone, Copy)]
enum Entered {
    // from a child, or the start of the search
    Up,
    // from a parent
    Down,
}

/// Nodes reachable from `start` along trails on which every non-collider
/// passes `pass_middle` and every collider lies in `open_colliders`.
fn trail_reach(
    g: &Dag,
    start: VarSet,
    pass_middle: impl Fn(VarId) -> bool,
    open_colliders: VarSet,
) -> VarSet {
    let n = g.n();
    let mut seen_up = vec![false; n];
    let mut seen_down = vec![false; n];
    let mut reached = VarSet::EMPTY;
    let mut stack: Vec<(VarId, Entered)> = start.iter().map(|v| (v, Entered::Up)).collect();
    for v in start {
        seen_up[v.index()] = true;
    }
    while let Some((v, how)) = stack.pop() {
        reached.insert(v);
        let is_start = start.contains(v);
        let mut push = |w: VarId, h: Entered, stack: &mut Vec<(VarId, Entered)>| {
            let seen = match h {
                Entered::Up => &mut seen_up,
                Entered::Down => &mut seen_down,
            };
            if !seen[w.index()] {
                seen[w.index()] = true;
                stack.push((w, h));
            }
        };
        match how {
            Entered::Up => {
                // chain (child <- v <- parent) or fork (child <- v -> child)
                if is_start || pass_middle(v) {
                    for p in g.parents(v) {
                        push(p, Entered::Up, &mut stack);
                    }
                    for c in g.children(v) {
                        push(c, Entered::Down, &mut stack);
                    }
                }
            }
            Entered::Down => {
                if pass_middle(v) {
                    for c in g.children(v) {
                        push(c, Entered::Down, &mut stack);
                    }
                }
                if open_colliders.contains(v) {
                    for p in g.parents(v) {
                        push(p, Entered::Up, &mut stack);
                    }
                }
            }
        }
    }
    reached
}

/// Nodes d-connected to `x` given `z` (including `x` itself).
pub fn d_connected_set(g: &Dag, x: VarSet, z: VarSet) -> VarSet {
    let open = g.ancestral_closure(z);
    trail_reach(g, x, |v| !z.contains(v), open)
}

/// `(x _||_ y | z)_d`: every path from `x` to `y` is blocked by `z`.
pub fn d_separated(g: &Dag, x: VarSet, y: VarSet, z: VarSet) -> Result<bool> {
    check_triple(g, x, y, z)?;
    Ok(d_connected_set(g, x, z).is_disjoint(y))
}

fn check_outcome_set(g: &Dag, o: VarSet) -> Result<()> {
    g.check_members(o)?;
    if let Some(s) = o.iter().find(|&v| g.role(v) == Role::Setting) {
        return Err(Error::input(format!(
            "conditioning outcome set contains the setting {}",
            g.name(s)
        )));
    }
    Ok(())
}

/// Nodes not connected to `v` by an `o`-chain: every path to `v` has a
/// collider outside `o` with no directed path into `o`.
pub fn detached(g: &Dag, v: VarSet, o: VarSet) -> Result<VarSet> {
    g.check_members(v)?;
    check_outcome_set(g, o)?;
    if !v.is_disjoint(o) {
        return Err(Error::input("detachment base set must be disjoint from the outcome set"));
    }
    Ok(detached_unchecked(g, v, o))
}

pub(crate) fn detached_unchecked(g: &Dag, v: VarSet, o: VarSet) -> VarSet {
    let reached = chain_reach(g, v, o);
    g.all().difference(reached).difference(v).difference(o)
}

/// Nodes outside `v` and `o` that are q-separated from every member of
/// `v` given `o`: besides collider blocking, two settings are unlinked
/// unless both lead into `o`, and a setting is unlinked from an outcome it
/// does not reach unless it leads into `o`.
pub fn q_detached(g: &Dag, v: VarSet, o: VarSet) -> Result<VarSet> {
    g.validate_quantum()?;
    g.check_members(v)?;
    check_outcome_set(g, o)?;
    if !v.is_disjoint(o) {
        return Err(Error::input("detachment base set must be disjoint from the outcome set"));
    }
    Ok(q_detached_unchecked(g, v, o))
}

pub(crate) fn q_detached_unchecked(g: &Dag, v: VarSet, o: VarSet) -> VarSet {
    let desc = descendant_table(g);
    let mut out = g.all().difference(v).difference(o);
    for u in v {
        let reach = chain_reach(g, VarSet::singleton(u), o);
        out = out
            .iter()
            .filter(|&w| endpoint_rule(g, &desc, u, w, o).is_some() || !reach.contains(w))
            .collect();
    }
    out
}

fn chain_reach(g: &Dag, v: VarSet, o: VarSet) -> VarSet {
    trail_reach(g, v, |_| true, g.ancestral_closure(o))
}

/// Some path between `a` and `b` has every collider in `o` or leading into `o`.
pub fn chain_connected(g: &Dag, a: VarSet, b: VarSet, o: VarSet) -> Result<bool> {
    g.check_members(a.union(b))?;
    check_outcome_set(g, o)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("chain connectivity needs nonempty endpoint sets"));
    }
    if !a.is_disjoint(b) || !a.is_disjoint(o) || !b.is_disjoint(o) {
        return Err(Error::input("chain connectivity sets must be pairwise disjoint"));
    }
    Ok(!chain_reach(g, a, o).is_disjoint(b))
}

/// Which path-independent rule, if any, inactivates every path between
/// `u` and `v` given the outcomes `zo`.
fn endpoint_rule(g: &Dag, desc: &[VarSet], u: VarId, v: VarId, zo: VarSet) -> Option<QRule> {
    let reaches_z = |s: VarId| !desc[s.index()].is_disjoint(zo);
    match (g.role(u), g.role(v)) {
        (Role::Setting, Role::Setting) => {
            (!reaches_z(u) || !reaches_z(v)).then_some(QRule::SettingsUnlinked)
        }
        (Role::Setting, Role::Outcome) => {
            (!desc[u.index()].contains(v) && !reaches_z(u)).then_some(QRule::NoSignal)
        }
        (Role::Outcome, Role::Setting) => {
            (!desc[v.index()].contains(u) && !reaches_z(v)).then_some(QRule::NoSignal)
        }
        (Role::Outcome, Role::Outcome) => None,
    }
}

/// `(x _||_ y | z)_q` on a quantum-valid graph. Settings in `z` neither
/// block nor activate paths.
pub fn q_separated(g: &Dag, x: VarSet, y: VarSet, z: VarSet) -> Result<bool> {
    g.validate_quantum()?;
    check_triple(g, x, y, z)?;
    let desc = descendant_table(g);
    Ok(q_separated_with(g, &desc, x, y, z))
}

fn descendant_table(g: &Dag) -> Vec<VarSet> {
    g.nodes()
        .map(|v| g.descendants_unchecked(VarSet::singleton(v)))
        .collect()
}

fn q_separated_with(g: &Dag, desc: &[VarSet], x: VarSet, y: VarSet, z: VarSet) -> bool {
    let zo = z.intersection(g.outcomes());
    x.iter().all(|u| {
        let mut chained: Option<VarSet> = None;
        y.iter().all(|v| {
            endpoint_rule(g, desc, u, v, zo).is_some() || {
                let reach = *chained.get_or_insert_with(|| chain_reach(g, VarSet::singleton(u), zo));
                !reach.contains(v)
            }
        })
    })
}

/// Rule that makes a path inactive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QRule {
    /// Both endpoints are settings and one of them has no directed path
    /// to a conditioned outcome.
    SettingsUnlinked,
    /// Setting/outcome endpoints, the setting reaches neither the outcome
    /// nor any conditioned outcome.
    NoSignal,
    /// Collider that is not a conditioned outcome and has no directed path
    /// to one.
    Collider(VarId),
}

/// Why a path is blocked under d-separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DRule {
    /// Chain or fork middle node in the conditioning set.
    Conditioned(VarId),
    /// Collider outside the conditioning set with no descendant in it.
    Collider(VarId),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Explanation<R> {
    /// One active path witnessing the connection.
    Connected(Path),
    /// Every enumerated path with the rule that blocks it; `truncated`
    /// is set when the enumeration limit was hit.
    Separated {
        blocked: Vec<(Path, R)>,
        truncated: bool,
    },
}

fn d_block(g: &Dag, path: &Path, z: VarSet) -> Option<DRule> {
    let open = g.ancestral_closure(z);
    if let Some(m) = path.non_colliders().find(|m| z.contains(*m)) {
        return Some(DRule::Conditioned(m));
    }
    path.colliders()
        .find(|m| !open.contains(*m))
        .map(DRule::Collider)
}

fn q_block(g: &Dag, desc: &[VarSet], path: &Path, zo: VarSet) -> Option<QRule> {
    endpoint_rule(g, desc, path.start(), path.end(), zo).or_else(|| {
        let open = g.ancestral_closure(zo);
        path.colliders()
            .find(|m| !open.contains(*m))
            .map(QRule::Collider)
    })
}

fn explain_with<R>(
    g: &Dag,
    x: VarSet,
    y: VarSet,
    limit: usize,
    block: impl Fn(&Path) -> Option<R>,
) -> Explanation<R> {
    let mut blocked = Vec::new();
    let mut truncated = false;
    for u in x {
        for v in y {
            let paths = simple_paths(g, u, v, limit.saturating_add(1));
            for p in paths {
                match block(&p) {
                    None => return Explanation::Connected(p),
                    Some(r) => {
                        if blocked.len() < limit {
                            blocked.push((p, r));
                        } else {
                            truncated = true;
                        }
                    }
                }
            }
        }
    }
    Explanation::Separated { blocked, truncated }
}

/// d-separation verdict with an active path or the blocking rules.
/// Enumerates paths; intended for small graphs.
pub fn explain_d(g: &Dag, x: VarSet, y: VarSet, z: VarSet, limit: usize) -> Result<Explanation<DRule>> {
    check_triple(g, x, y, z)?;
    Ok(explain_with(g, x, y, limit, |p| d_block(g, p, z)))
}

/// q-separation verdict with an active path or the blocking rules.
pub fn explain_q(g: &Dag, x: VarSet, y: VarSet, z: VarSet, limit: usize) -> Result<Explanation<QRule>> {
    g.validate_quantum()?;
    check_triple(g, x, y, z)?;
    let desc = descendant_table(g);
    let zo = z.intersection(g.outcomes());
    Ok(explain_with(g, x, y, limit, |p| q_block(g, &desc, p, zo)))
}

fn check_enum_cap(g: &Dag, cap: usize) -> Result<()> {
    if g.n() > cap {
        return Err(Error::Resource(format!(
            "enumerating all CI triples over {} variables exceeds the cap of {cap} (4^N growth)",
            g.n()
        )));
    }
    Ok(())
}

/// All relations implied by d-separation in `g` (default cap 6).
pub fn ci_set_d(g: &Dag) -> Result<CiSet> {
    ci_set_d_with_cap(g, DEFAULT_ENUMERATION_CAP)
}

pub fn ci_set_d_with_cap(g: &Dag, cap: usize) -> Result<CiSet> {
    check_enum_cap(g, cap)?;
    let triples = all_triples(g.all());
    let kept: Vec<CiRelation> = triples
        .into_par_iter()
        .filter(|r| d_connected_set(g, r.x(), r.z()).is_disjoint(r.y()))
        .collect();
    Ok(CiSet::from_relations(g.n(), kept))
}

/// All relations implied by q-separation in a quantum-valid `g`.
pub fn ci_set_q(g: &Dag) -> Result<CiSet> {
    ci_set_q_with_cap(g, DEFAULT_ENUMERATION_CAP)
}

pub fn ci_set_q_with_cap(g: &Dag, cap: usize) -> Result<CiSet> {
    g.validate_quantum()?;
    check_enum_cap(g, cap)?;
    let desc = descendant_table(g);
    let kept: Vec<CiRelation> = all_triples(g.all())
        .into_par_iter()
        .filter(|r| q_separated_with(g, &desc, r.x(), r.y(), r.z()))
        .collect();
    Ok(CiSet::from_relations(g.n(), kept))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five_node() -> Dag {
        Dag::named(&["X", "V", "W", "Y", "Z"], &[(0, 1), (0, 3), (1, 2), (1, 4), (3, 4)]).unwrap()
    }

    fn bell() -> Dag {
        Dag::named(&["S", "T", "lambda", "A", "B"], &[(0, 3), (2, 3), (2, 4), (1, 4)]).unwrap()
    }

    fn ids(g: &Dag, names: &[&str]) -> VarSet {
        names.iter().map(|n| g.id_of(n).unwrap()).collect()
    }

    #[test]
    fn d_separation_five_node() {
        let g = five_node();
        assert!(d_separated(&g, ids(&g, &["W"]), ids(&g, &["Y"]), ids(&g, &["V"])).unwrap());
        assert!(d_separated(&g, ids(&g, &["W"]), ids(&g, &["Y"]), ids(&g, &["V", "Z"])).unwrap());
        assert!(!d_separated(&g, ids(&g, &["W"]), ids(&g, &["Y"]), ids(&g, &["Z"])).unwrap());
    }

    #[test]
    fn d_separation_direct_edge() {
        let g = Dag::named(&["Z", "Y", "X"], &[(0, 1), (0, 2), (1, 2)]).unwrap();
        assert!(!d_separated(&g, ids(&g, &["X"]), ids(&g, &["Y"]), ids(&g, &["Z"])).unwrap());
    }

    #[test]
    fn d_separation_rejects_bad_queries() {
        let g = five_node();
        assert!(d_separated(&g, VarSet::EMPTY, ids(&g, &["Y"]), VarSet::EMPTY).is_err());
        assert!(d_separated(&g, ids(&g, &["W"]), ids(&g, &["W"]), VarSet::EMPTY).is_err());
        assert!(d_separated(&g, ids(&g, &["W"]), ids(&g, &["Y"]), ids(&g, &["Y"])).is_err());
    }

    #[test]
    fn detached_bell() {
        let g = bell();
        assert_eq!(
            detached(&g, ids(&g, &["S"]), VarSet::EMPTY).unwrap(),
            ids(&g, &["T", "lambda", "B"])
        );
        assert_eq!(detached(&g, ids(&g, &["S"]), ids(&g, &["A"])).unwrap(), ids(&g, &["T"]));
        assert!(detached(&g, ids(&g, &["S"]), ids(&g, &["T"])).is_err());
    }

    #[test]
    fn detached_never_contains_directed_ancestors() {
        let g = five_node();
        let v = ids(&g, &["Z"]);
        let d = detached(&g, v, VarSet::EMPTY).unwrap();
        assert!(d.is_disjoint(g.ancestors(v).unwrap()));
    }

    #[test]
    fn q_detachment_applies_endpoint_rules() {
        // settings X0 -> X1 -> outcome X2
        let g = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(detached(&g, VarSet::of(&[0]), VarSet::EMPTY).unwrap(), VarSet::EMPTY);
        assert_eq!(q_detached(&g, VarSet::of(&[0]), VarSet::EMPTY).unwrap(), VarSet::of(&[1]));
        assert_eq!(q_detached(&g, VarSet::of(&[0]), VarSet::of(&[2])).unwrap(), VarSet::EMPTY);
        let g = bell();
        assert_eq!(
            q_detached(&g, ids(&g, &["S"]), ids(&g, &["A"])).unwrap(),
            detached(&g, ids(&g, &["S"]), ids(&g, &["A"])).unwrap()
        );
    }

    #[test]
    fn chain_connectivity() {
        let g = bell();
        assert!(chain_connected(&g, ids(&g, &["S"]), ids(&g, &["B"]), ids(&g, &["A"])).unwrap());
        assert!(chain_connected(&g, ids(&g, &["S"]), ids(&g, &["T"]), ids(&g, &["A", "B"])).unwrap());
        assert!(!chain_connected(&g, ids(&g, &["S"]), ids(&g, &["T"]), ids(&g, &["A"])).unwrap());
        let split = Dag::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!chain_connected(&split, VarSet::of(&[0]), VarSet::of(&[2]), VarSet::EMPTY).unwrap());
    }

    #[test]
    fn q_separation_bell() {
        let g = bell();
        let q = |x: &[&str], y: &[&str], z: &[&str]| {
            q_separated(&g, ids(&g, x), ids(&g, y), ids(&g, z)).unwrap()
        };
        assert!(!q(&["A"], &["B"], &["lambda"]));
        assert!(q(&["A"], &["T"], &["S"]));
        assert!(q(&["S"], &["T"], &["A"]));
        assert!(!q(&["S"], &["T"], &["A", "B"]));
    }

    #[test]
    fn q_separation_requires_quantum_roles() {
        let g = crate::graph::DagBuilder::new()
            .node("S", Role::Setting, 2)
            .node("A", Role::Setting, 2)
            .edge(0, 1)
            .build()
            .unwrap();
        assert!(matches!(
            q_separated(&g, VarSet::of(&[0]), VarSet::of(&[1]), VarSet::EMPTY),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn ci_sets() {
        let g = Dag::from_edges(2, &[(0, 1)]).unwrap();
        assert!(ci_set_d(&g).unwrap().is_empty());
        let g = Dag::named(&["Z", "Y", "X"], &[(0, 1), (0, 2), (1, 2)]).unwrap();
        assert!(ci_set_d(&g).unwrap().is_empty());
        let g = bell();
        let cq = ci_set_q(&g).unwrap();
        let r = CiRelation::new(ids(&g, &["A", "S", "lambda"]), ids(&g, &["T"]), VarSet::EMPTY).unwrap();
        assert!(cq.contains(&r));
        let ab = CiRelation::new(ids(&g, &["A"]), ids(&g, &["B"]), ids(&g, &["lambda"])).unwrap();
        assert!(!cq.contains(&ab));
        assert!(ci_set_d(&Dag::from_edges(7, &[]).unwrap()).unwrap_err().is_resource());
    }

    #[test]
    fn explanations() {
        let g = five_node();
        match explain_d(&g, ids(&g, &["W"]), ids(&g, &["Y"]), ids(&g, &["Z"]), 16).unwrap() {
            Explanation::Connected(p) => {
                assert_eq!(p.display(g.names()), "W <- V -> Z <- Y");
            }
            other => panic!("expected connection, got {other:?}"),
        }
        match explain_d(&g, ids(&g, &["W"]), ids(&g, &["Y"]), ids(&g, &["V"]), 16).unwrap() {
            Explanation::Separated { blocked, truncated } => {
                assert_eq!(blocked.len(), 2);
                assert!(!truncated);
            }
            other => panic!("expected separation, got {other:?}"),
        }
        let g = bell();
        match explain_q(&g, ids(&g, &["A"]), ids(&g, &["T"]), ids(&g, &["S"]), 16).unwrap() {
            Explanation::Separated { blocked, .. } => {
                assert!(blocked.iter().all(|(_, r)| *r == QRule::NoSignal));
            }
            other => panic!("expected separation, got {other:?}"),
        }
    }
}
