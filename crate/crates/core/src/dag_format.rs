//! Line-oriented DAG text format.
//!
//! ```text
//! # comment
//! node S role=setting values=2
//! node A role=outcome values=2
//! edge S -> A dim=2
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{Dag, DagBuilder, NodeSpec, Role, DEFAULT_MAX_NODES};
use crate::varset::{VarId, VarSet};

/// A parsed graph together with the source line of every declaration.
#[derive(Debug, Clone)]
pub struct ParsedDag {
    pub dag: Dag,
    pub node_lines: Vec<usize>,
    pub edge_lines: BTreeMap<(VarId, VarId), usize>,
}

impl ParsedDag {
    /// Role violations, each attributed to the declaring line of the
    /// offending node. Empty when the graph is quantum-valid.
    pub fn quantum_diagnostics(&self) -> Vec<(usize, String)> {
        self.attribute(self.dag.quantum_violations())
    }

    /// Dimension bookkeeping problems that would stop a simulation.
    pub fn dimension_diagnostics(&self) -> Vec<(usize, String)> {
        self.attribute(self.dag.dimension_violations())
    }

    fn attribute(&self, v: Vec<(VarId, String)>) -> Vec<(usize, String)> {
        let mut out: Vec<(usize, String)> = v
            .into_iter()
            .map(|(v, msg)| (self.node_lines[v.index()], msg))
            .collect();
        out.sort();
        out
    }

    /// [`Dag::validate_quantum`] with line numbers in the messages; with
    /// `simulation` set, dimension problems are reported as well.
    pub fn validate_quantum(&self, simulation: bool) -> Result<()> {
        let mut diags = self.quantum_diagnostics();
        if simulation {
            diags.extend(self.dimension_diagnostics());
            diags.sort();
        }
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(
                diags
                    .into_iter()
                    .map(|(line, msg)| format!("line {line}: {msg}"))
                    .collect(),
            ))
        }
    }
}

pub fn parse_dag(text: &str) -> Result<Dag> {
    parse_dag_with_lines(text, DEFAULT_MAX_NODES).map(|p| p.dag)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::parse(line, format!("{key}: expected a non-negative integer, got {v:?}")))
}

pub fn parse_dag_with_lines(text: &str, max_nodes: usize) -> Result<ParsedDag> {
    let mut builder = DagBuilder::new().max_nodes(max_nodes);
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut node_lines = Vec::new();
    let mut edge_lines = BTreeMap::new();
    let mut children: Vec<VarSet> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks: Vec<&str> = strip_comment(raw).split_whitespace().collect();
        match toks.first().copied() {
            None => continue,
            Some("node") => {
                let name = *toks
                    .get(1)
                    .ok_or_else(|| Error::parse(line, "node declaration needs a name"))?;
                if ids.contains_key(name) {
                    return Err(Error::parse(line, format!("duplicate node name {name}")));
                }
                let mut role = None;
                let mut values = None;
                for tok in &toks[2..] {
                    let (k, v) = tok
                        .split_once('=')
                        .ok_or_else(|| Error::parse(line, format!("unexpected token {tok:?}")))?;
                    match k {
                        "role" if role.is_none() => {
                            role = Some(match v {
                                "setting" => Role::Setting,
                                "outcome" => Role::Outcome,
                                _ => return Err(Error::parse(line, format!("unknown role {v:?}"))),
                            })
                        }
                        "values" if values.is_none() => {
                            let k = parse_count(line, "values", v)?;
                            if k == 0 {
                                return Err(Error::parse(line, "values must be >= 1"));
                            }
                            values = Some(k);
                        }
                        _ => return Err(Error::parse(line, format!("unexpected token {tok:?}"))),
                    }
                }
                let role = role.ok_or_else(|| Error::parse(line, "node declaration needs role="))?;
                let values =
                    values.ok_or_else(|| Error::parse(line, "node declaration needs values="))?;
                if name.chars().any(|c| ",|=".contains(c)) {
                    return Err(Error::parse(line, format!("invalid node name {name:?}")));
                }
                if ids.len() >= max_nodes {
                    return Err(Error::Resource(format!(
                        "line {line}: more than {max_nodes} nodes"
                    )));
                }
                ids.insert(name.to_string(), builder.add_node(NodeSpec::new(name, role, values)));
                node_lines.push(line);
                children.push(VarSet::EMPTY);
            }
            Some("edge") => {
                if toks.len() < 4 || toks[2] != "->" {
                    return Err(Error::parse(line, "expected `edge <parent> -> <child> [dim=<d>]`"));
                }
                let lookup = |name: &str| {
                    ids.get(name)
                        .copied()
                        .ok_or_else(|| Error::parse(line, format!("unknown node {name}")))
                };
                let p = lookup(toks[1])?;
                let c = lookup(toks[3])?;
                let dim = match &toks[4..] {
                    [] => 2,
                    [tok] => match tok.split_once('=') {
                        Some(("dim", v)) => parse_count(line, "dim", v)?,
                        _ => return Err(Error::parse(line, format!("unexpected token {tok:?}"))),
                    },
                    [_, extra, ..] => {
                        return Err(Error::parse(line, format!("unexpected token {extra:?}")))
                    }
                };
                if !dim.is_power_of_two() || dim < 2 {
                    return Err(Error::parse(line, format!("dim {dim} is not a power of two >= 2")));
                }
                if p == c {
                    return Err(Error::parse(line, format!("self-loop on {}", toks[1])));
                }
                let (pv, cv) = (VarId::new(p), VarId::new(c));
                if edge_lines.contains_key(&(pv, cv)) {
                    return Err(Error::parse(line, format!("duplicate edge {} -> {}", toks[1], toks[3])));
                }
                if reaches(&children, cv, pv) {
                    return Err(Error::parse(
                        line,
                        format!("edge {} -> {} closes a cycle", toks[1], toks[3]),
                    ));
                }
                children[p].insert(cv);
                edge_lines.insert((pv, cv), line);
                builder.add_edge(p, c, dim);
            }
            Some(other) => {
                return Err(Error::parse(line, format!("unknown directive {other:?}")));
            }
        }
    }
    let dag = builder.build()?;
    Ok(ParsedDag {
        dag,
        node_lines,
        edge_lines,
    })
}

fn reaches(children: &[VarSet], from: VarId, to: VarId) -> bool {
    let mut seen = VarSet::singleton(from);
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        for c in children[v.index()].difference(seen) {
            seen.insert(c);
            stack.push(c);
        }
    }
    false
}

/// Serialize in the format read by [`parse_dag`].
pub fn write_dag(g: &Dag) -> String {
    let mut s = String::new();
    for v in g.nodes() {
        let _ = writeln!(s, "node {} role={} values={}", g.name(v), g.role(v), g.values(v));
    }
    for (p, c) in g.edges() {
        let dim = g.edge_dim(p, c).unwrap_or(2);
        if dim == 2 {
            let _ = writeln!(s, "edge {} -> {}", g.name(p), g.name(c));
        } else {
            let _ = writeln!(s, "edge {} -> {} dim={dim}", g.name(p), g.name(c));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const BELL: &str = "\
# Bell network
node S role=setting values=2
node T role=setting values=2
node lambda role=setting values=1
node A role=outcome values=2   # Alice
node B role=outcome values=2

edge S -> A
edge lambda -> A
edge lambda -> B
edge T -> B
";

    fn line_of(e: Error) -> usize {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn parses_and_round_trips() {
        let p = parse_dag_with_lines(BELL, 16).unwrap();
        assert_eq!(p.dag.n(), 5);
        assert_eq!(p.dag.edge_count(), 4);
        assert_eq!(p.node_lines, vec![2, 3, 4, 5, 6]);
        assert!(p.validate_quantum(false).is_ok());
        assert!(p.validate_quantum(true).is_err());
        let again = parse_dag(&write_dag(&p.dag)).unwrap();
        assert_eq!(again, p.dag);
    }

    #[test]
    fn dims_survive_round_trip() {
        let g = parse_dag("node a role=setting values=1\nnode b role=outcome values=4\nedge a -> b dim=4\n").unwrap();
        assert_eq!(g.edge_dim(VarId(0), VarId(1)), Some(4));
        assert_eq!(parse_dag(&write_dag(&g)).unwrap(), g);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let dup = "node a role=setting values=2\n\nnode a role=outcome values=2\n";
        assert_eq!(line_of(parse_dag(dup).unwrap_err()), 3);
        let unknown = "node a role=setting values=2\nedge a -> b\n";
        assert_eq!(line_of(parse_dag(unknown).unwrap_err()), 2);
        let cycle = "node a role=setting values=2\nnode b role=setting values=2\nnode c role=setting values=2\nedge a -> b\nedge b -> c\nedge c -> a\n";
        assert_eq!(line_of(parse_dag(cycle).unwrap_err()), 6);
        let garbage = "node a role=setting values=2 extra\n";
        assert_eq!(line_of(parse_dag(garbage).unwrap_err()), 1);
        let garbage = "node a role=setting values=2\nnode b role=outcome values=2\nedge a -> b dim=2 x\n";
        assert_eq!(line_of(parse_dag(garbage).unwrap_err()), 3);
        assert_eq!(line_of(parse_dag("nodes a\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_dag("node a role=setting values=0\n").unwrap_err()), 1);
        let bad_dim = "node a role=setting values=2\nnode b role=outcome values=2\nedge a -> b dim=3\n";
        assert_eq!(line_of(parse_dag(bad_dim).unwrap_err()), 3);
    }

    #[test]
    fn role_violations_point_at_declarations() {
        let text = "node S role=setting values=2\nnode A role=outcome values=2\nnode B role=outcome values=2\nedge A -> B\n";
        let p = parse_dag_with_lines(text, 16).unwrap();
        let diags = p.quantum_diagnostics();
        let lines: Vec<usize> = diags.iter().map(|d| d.0).collect();
        assert!(lines.contains(&1), "{diags:?}");
        assert!(lines.contains(&2), "{diags:?}");
        assert!(diags.iter().any(|(_, m)| m.contains('S')));
        assert!(matches!(p.validate_quantum(false), Err(Error::Validation(_))));
    }

    #[test]
    fn node_cap_is_a_resource_error() {
        let text: String = (0..5).map(|i| format!("node n{i} role=outcome values=2\n")).collect();
        assert!(parse_dag_with_lines(&text, 4).unwrap_err().is_resource());
    }
}
