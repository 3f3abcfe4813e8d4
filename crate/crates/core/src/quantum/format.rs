//! Parameter file format:
//!
//! ```text
//! prep <node> <value> : <c> <c> ...        # state on the out-space
//! gate <node> <value> : <c> <c> ...        # row-major unitary on the in-space
//! marginal <node> : <p0> <p1> ...
//! label <node> : <b0> <b1> ...             # basis index read as each value
//! ```
//!
//! Complex entries are written `a+bi`, `a-bi`, `bi`, `a` or `re,im`.

use std::collections::btree_map::Entry;
use std::fmt::Write as _;

use super::matrix::{CMatrix, C64};
use super::model::QuantumModelParams;
use crate::error::{Error, Result};
use crate::graph::{Dag, NodeKind};
use crate::varset::VarId;

pub fn parse_complex(tok: &str) -> Option<C64> {
    if let Some((re, im)) = tok.split_once(',') {
        return Some(C64::new(re.parse().ok()?, im.parse().ok()?));
    }
    let Some(body) = tok.strip_suffix('i') else {
        return tok.parse().ok().map(|re| C64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let imag = |s: &str| -> Option<f64> {
        match s {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            _ => s.parse().ok(),
        }
    };
    match split {
        Some(i) => Some(C64::new(body[..i].parse().ok()?, imag(&body[i..])?)),
        None => Some(C64::new(0.0, imag(body)?)),
    }
}

pub fn format_complex(c: C64) -> String {
    if c.im.is_sign_negative() {
        format!("{}{}i", c.re, c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}

pub fn parse_params(text: &str, g: &Dag) -> Result<QuantumModelParams> {
    let mut p = QuantumModelParams::default();
    let mut preps: Vec<Vec<Option<Vec<C64>>>> = vec![Vec::new(); g.n()];
    let mut gates: Vec<Vec<Option<CMatrix>>> = vec![Vec::new(); g.n()];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let (head, rest) = body
            .split_once(':')
            .ok_or_else(|| Error::parse(line, "expected `<directive> <node> [...] : <entries>`"))?;
        let head: Vec<&str> = head.split_whitespace().collect();
        let entries: Vec<&str> = rest.split_whitespace().collect();
        let node = |i: usize| -> Result<VarId> {
            let name = head.get(i).ok_or_else(|| Error::parse(line, "missing node name"))?;
            g.id_of(name).ok_or_else(|| Error::parse(line, format!("unknown node {name}")))
        };
        let expect_kind = |v: VarId, ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::parse(line, format!("node {} cannot take a {what}", g.name(v))))
            }
        };
        let complex = || -> Result<Vec<C64>> {
            entries
                .iter()
                .map(|t| parse_complex(t).ok_or_else(|| Error::parse(line, format!("bad complex number {t:?}"))))
                .collect()
        };
        match head.first().copied() {
            Some(kw @ ("prep" | "gate")) => {
                if head.len() != 3 {
                    return Err(Error::parse(line, format!("expected `{kw} <node> <value> : ...`")));
                }
                let v = node(1)?;
                let x: usize = head[2]
                    .parse()
                    .ok()
                    .filter(|&x| x < g.values(v))
                    .ok_or_else(|| Error::parse(line, format!("bad value {:?} for node {}", head[2], g.name(v))))?;
                let data = complex()?;
                let slots = if kw == "prep" {
                    expect_kind(v, g.kind(v) == NodeKind::Exogenous, "preparation")?;
                    let d = g.out_dim(v);
                    if data.len() != d {
                        return Err(Error::parse(line, format!("expected {d} amplitudes, got {}", data.len())));
                    }
                    let slots = &mut preps[v.index()];
                    slots.resize(g.values(v), None);
                    if slots[x].replace(data).is_some() {
                        return Err(Error::parse(line, "duplicate preparation"));
                    }
                    continue;
                } else {
                    expect_kind(v, g.kind(v) == NodeKind::Intermediate, "gate")?;
                    &mut gates[v.index()]
                };
                let d = g.in_dim(v);
                if data.len() != d * d {
                    return Err(Error::parse(line, format!("expected {} matrix entries, got {}", d * d, data.len())));
                }
                slots.resize(g.values(v), None);
                let m = CMatrix::new(d, d, data)?;
                if slots[x].replace(m).is_some() {
                    return Err(Error::parse(line, "duplicate gate"));
                }
            }
            Some("marginal") => {
                if head.len() != 2 {
                    return Err(Error::parse(line, "expected `marginal <node> : ...`"));
                }
                let v = node(1)?;
                expect_kind(v, g.kind(v) != NodeKind::Drain, "marginal")?;
                let m = entries
                    .iter()
                    .map(|t| t.parse::<f64>().map_err(|_| Error::parse(line, format!("bad probability {t:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                if m.len() != g.values(v) {
                    return Err(Error::parse(line, format!("expected {} probabilities", g.values(v))));
                }
                match p.marginals.entry(v) {
                    Entry::Vacant(e) => {
                        e.insert(m);
                    }
                    Entry::Occupied(_) => return Err(Error::parse(line, "duplicate marginal")),
                }
            }
            Some("label") => {
                if head.len() != 2 {
                    return Err(Error::parse(line, "expected `label <node> : ...`"));
                }
                let v = node(1)?;
                expect_kind(v, g.kind(v) == NodeKind::Drain, "label")?;
                let m = entries
                    .iter()
                    .map(|t| t.parse::<usize>().map_err(|_| Error::parse(line, format!("bad basis index {t:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                if m.len() != g.values(v) {
                    return Err(Error::parse(line, format!("expected {} basis indices", g.values(v))));
                }
                match p.drain_labels.entry(v) {
                    Entry::Vacant(e) => {
                        e.insert(m);
                    }
                    Entry::Occupied(_) => return Err(Error::parse(line, "duplicate label list")),
                }
            }
            Some(other) => return Err(Error::parse(line, format!("unknown directive {other:?}"))),
            None => return Err(Error::parse(line, "missing directive")),
        }
    }
    for v in g.nodes() {
        let name = g.name(v);
        if !preps[v.index()].is_empty() {
            let states = std::mem::take(&mut preps[v.index()]);
            let states = states
                .into_iter()
                .enumerate()
                .map(|(x, s)| s.ok_or_else(|| Error::Validation(vec![format!("node {name}: no preparation for value {x}")])))
                .collect::<Result<Vec<_>>>()?;
            p.preps.insert(v, states);
        }
        if !gates[v.index()].is_empty() {
            let us = std::mem::take(&mut gates[v.index()]);
            let us = us
                .into_iter()
                .enumerate()
                .map(|(x, u)| u.ok_or_else(|| Error::Validation(vec![format!("node {name}: no gate for value {x}")])))
                .collect::<Result<Vec<_>>>()?;
            p.gates.insert(v, us);
        }
    }
    Ok(p)
}

pub fn write_params(p: &QuantumModelParams, g: &Dag) -> String {
    let mut s = String::new();
    let join = |v: &[C64]| v.iter().map(|c| format_complex(*c)).collect::<Vec<_>>().join(" ");
    for (v, states) in &p.preps {
        for (x, st) in states.iter().enumerate() {
            let _ = writeln!(s, "prep {} {x} : {}", g.name(*v), join(st));
        }
    }
    for (v, us) in &p.gates {
        for (x, u) in us.iter().enumerate() {
            let _ = writeln!(s, "gate {} {x} : {}", g.name(*v), join(u.data()));
        }
    }
    for (v, m) in &p.marginals {
        let m: Vec<String> = m.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "marginal {} : {}", g.name(*v), m.join(" "));
    }
    for (v, l) in &p.drain_labels {
        let l: Vec<String> = l.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "label {} : {}", g.name(*v), l.join(" "));
    }
    s
}
