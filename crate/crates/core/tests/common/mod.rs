//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use proptest::prelude::*;
use qcausal::{Dag, Role, VarId, VarSet};

/// Reachability matrix by Warshall's algorithm: `r[a][b]` iff a directed
/// path of length >= 1 runs from `a` to `b`.
pub fn reach_matrix(g: &Dag) -> Vec<Vec<bool>> {
    let n = g.n();
    let mut r = vec![vec![false; n]; n];
    for (p, c) in g.edges() {
        r[p.index()][c.index()] = true;
    }
    for k in 0..n {
        let via = r[k].clone();
        for row in r.iter_mut() {
            if row[k] {
                for (cell, &step) in row.iter_mut().zip(&via) {
                    *cell |= step;
                }
            }
        }
    }
    r
}

pub fn ancestors_oracle(g: &Dag, v: VarSet) -> VarSet {
    let r = reach_matrix(g);
    (0..g.n())
        .filter(|&a| v.iter().any(|b| r[a][b.index()]))
        .map(VarId::new)
        .collect()
}

pub fn descendants_oracle(g: &Dag, v: VarSet) -> VarSet {
    let r = reach_matrix(g);
    (0..g.n())
        .filter(|&b| v.iter().any(|a| r[a.index()][b]))
        .map(VarId::new)
        .collect()
}

fn adjacent(g: &Dag, a: usize, b: usize) -> bool {
    g.has_edge(VarId::new(a), VarId::new(b)) || g.has_edge(VarId::new(b), VarId::new(a))
}

/// All simple undirected paths from `u` to `v` as node sequences.
pub fn paths(g: &Dag, u: usize, v: usize) -> Vec<Vec<usize>> {
    fn go(g: &Dag, v: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let cur = *path.last().unwrap();
        if cur == v {
            out.push(path.clone());
            return;
        }
        for w in 0..g.n() {
            if !path.contains(&w) && adjacent(g, cur, w) {
                path.push(w);
                go(g, v, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(g, v, &mut vec![u], &mut out);
    out
}

pub fn is_collider(g: &Dag, path: &[usize], i: usize) -> bool {
    g.has_edge(VarId::new(path[i - 1]), VarId::new(path[i]))
        && g.has_edge(VarId::new(path[i + 1]), VarId::new(path[i]))
}

/// Interior nodes of a path with the collider flag.
pub fn interior(g: &Dag, path: &[usize]) -> Vec<(usize, bool)> {
    (1..path.len().saturating_sub(1))
        .map(|i| (path[i], is_collider(g, path, i)))
        .collect()
}

/// `m` is in `set` or has a directed path into it.
fn leads_into(r: &[Vec<bool>], m: usize, set: VarSet) -> bool {
    set.iter().any(|s| s.index() == m || r[m][s.index()])
}

/// Blocking by conditioned chain/fork middles or unconditioned colliders
/// without conditioned descendants, checked on every simple path.
pub fn d_separated_oracle(g: &Dag, x: VarSet, y: VarSet, z: VarSet) -> bool {
    let r = reach_matrix(g);
    x.iter().all(|u| {
        y.iter().all(|v| {
            paths(g, u.index(), v.index()).iter().all(|p| {
                interior(g, p).iter().any(|&(m, collider)| {
                    if collider {
                        !leads_into(&r, m, z)
                    } else {
                        z.contains(VarId::new(m))
                    }
                })
            })
        })
    })
}

/// Every path from `w` to `v` has a collider outside `o` with no
/// directed path into `o`.
pub fn detached_oracle(g: &Dag, v: VarSet, o: VarSet) -> VarSet {
    let r = reach_matrix(g);
    (0..g.n())
        .map(VarId::new)
        .filter(|w| !v.contains(*w) && !o.contains(*w))
        .filter(|w| {
            v.iter().all(|t| {
                paths(g, w.index(), t.index())
                    .iter()
                    .all(|p| interior(g, p).iter().any(|&(m, c)| c && !leads_into(&r, m, o)))
            })
        })
        .collect()
}

/// The three inactivation rules applied literally to every path.
pub fn q_separated_oracle(g: &Dag, x: VarSet, y: VarSet, z: VarSet) -> bool {
    let r = reach_matrix(g);
    let zo: VarSet = z.iter().filter(|&v| g.role(v) == Role::Outcome).collect();
    let reaches = |a: usize, set: VarSet| set.iter().any(|s| r[a][s.index()]);
    x.iter().all(|u| {
        y.iter().all(|v| {
            paths(g, u.index(), v.index()).iter().all(|p| {
                let (a, b) = (p[0], *p.last().unwrap());
                let (ra, rb) = (g.role(VarId::new(a)), g.role(VarId::new(b)));
                let rule_i = ra == Role::Setting
                    && rb == Role::Setting
                    && (!reaches(a, zo) || !reaches(b, zo));
                let rule_ii = match (ra, rb) {
                    (Role::Setting, Role::Outcome) => !r[a][b] && !reaches(a, zo),
                    (Role::Outcome, Role::Setting) => !r[b][a] && !reaches(b, zo),
                    _ => false,
                };
                let rule_iii = interior(g, p)
                    .iter()
                    .any(|&(m, c)| c && !leads_into(&r, m, zo));
                rule_i || rule_ii || rule_iii
            })
        })
    })
}

/// Every labeled DAG on `n` nodes: each unordered pair is absent or
/// oriented either way, keeping the acyclic assignments.
pub fn all_dags(n: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    (0..total)
        .filter_map(|mut code| {
            let mut edges = Vec::new();
            for &(i, j) in &pairs {
                match code % 3 {
                    1 => edges.push((i, j)),
                    2 => edges.push((j, i)),
                    _ => {}
                }
                code /= 3;
            }
            Dag::from_edges(n, &edges).ok()
        })
        .collect()
}

/// Random DAG on `min_n..=max_n` nodes: an edge mask over the pairs of a
/// shuffled ordering. Roles are inferred, so the graph is quantum-valid.
pub fn arb_dag(min_n: usize, max_n: usize) -> impl Strategy<Value = Dag> {
    (min_n..=max_n).prop_flat_map(|n| {
        let pairs = n * n.saturating_sub(1) / 2;
        (
            proptest::collection::vec(any::<bool>(), pairs),
            Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
        )
            .prop_map(move |(mask, perm)| {
                let mut edges = Vec::new();
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if mask[k] {
                            edges.push((perm[i], perm[j]));
                        }
                        k += 1;
                    }
                }
                Dag::from_edges(n, &edges).unwrap().with_inferred_roles()
            })
    })
}

/// Label each of `n` variables 0 (x), 1 (y), 2 (z) or 3 (unused).
pub fn split(labels: &[u8]) -> (VarSet, VarSet, VarSet) {
    let pick = |k: u8| -> VarSet {
        labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == k)
            .map(|(i, _)| VarId::new(i))
            .collect()
    };
    (pick(0), pick(1), pick(2))
}

/// A graph together with a labelling that yields a valid triple.
pub fn arb_dag_with_triple(min_n: usize, max_n: usize) -> impl Strategy<Value = (Dag, VarSet, VarSet, VarSet)> {
    arb_dag(min_n.max(2), max_n).prop_flat_map(|g| {
        let n = g.n();
        (proptest::collection::vec(0u8..4, n), 0..n, 1..n).prop_map(move |(mut l, i, k)| {
            l[i] = 0;
            l[(i + k) % n] = 1;
            let (x, y, z) = split(&l);
            (g.clone(), x, y, z)
        })
    })
}

/// Proptest settings without failure files.
pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}
