//! Conditional-independence relations, relation sets, and semi-graphoid
//! closure.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::varset::VarSet;

/// Default variable cap for closure computations.
pub const DEFAULT_CLOSURE_CAP: usize = 7;

/// `(x _||_ y | z)` with pairwise disjoint sets and nonempty `x`, `y`.
///
/// Stored canonically: the side holding the smallest variable of `x ∪ y`
/// comes first, so a relation and its mirror image compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CiRelation {
    x: VarSet,
    y: VarSet,
    z: VarSet,
}

impl CiRelation {
    pub fn new(x: VarSet, y: VarSet, z: VarSet) -> Result<Self> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::input("both sides of a CI relation must be nonempty"));
        }
        if !x.is_disjoint(y) || !x.is_disjoint(z) || !y.is_disjoint(z) {
            return Err(Error::input(format!(
                "CI relation sets must be disjoint: {x:?} {y:?} {z:?}"
            )));
        }
        Ok(Self::canonical(x, y, z))
    }

    #[inline]
    fn canonical(x: VarSet, y: VarSet, z: VarSet) -> Self {
        if x.bits().trailing_zeros() < y.bits().trailing_zeros() {
            CiRelation { x, y, z }
        } else {
            CiRelation { x: y, y: x, z }
        }
    }

    pub fn x(&self) -> VarSet {
        self.x
    }

    pub fn y(&self) -> VarSet {
        self.y
    }

    pub fn z(&self) -> VarSet {
        self.z
    }

    pub fn vars(&self) -> VarSet {
        self.x.union(self.y).union(self.z)
    }

    /// Total number of variables mentioned.
    pub fn size(&self) -> usize {
        self.vars().len()
    }


    /// Renders in the `X,Y _||_ Z | W` syntax.
    pub fn display<'a, S: AsRef<str>>(&'a self, names: &'a [S]) -> impl fmt::Display + 'a {
        DisplayRelation { rel: self, names }
    }
}

impl PartialOrd for CiRelation {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Smaller relations first, then by membership bits.
impl Ord for CiRelation {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.size(), self.z.bits(), self.x.bits(), self.y.bits()).cmp(&(
            other.size(),
            other.z.bits(),
            other.x.bits(),
            other.y.bits(),
        ))
    }
}

struct DisplayRelation<'a, S> {
    rel: &'a CiRelation,
    names: &'a [S],
}

impl<S: AsRef<str>> fmt::Display for DisplayRelation<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |s: VarSet| {
            s.iter()
                .map(|v| {
                    self.names
                        .get(v.index())
                        .map(|n| n.as_ref().to_string())
                        .unwrap_or_else(|| format!("#{}", v.index()))
                })
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "{} _||_ {}", side(self.rel.x), side(self.rel.y))?;
        if !self.rel.z.is_empty() {
            write!(f, " | {}", side(self.rel.z))?;
        }
        Ok(())
    }
}

/// Parse `X,Y _||_ Z | W`; names are resolved against `names`.
pub fn parse_relation<S: AsRef<str>>(text: &str, names: &[S]) -> Result<CiRelation> {
    let (lhs, rest) = text
        .split_once("_||_")
        .ok_or_else(|| Error::input(format!("missing `_||_` in {text:?}")))?;
    let (rhs, cond) = match rest.split_once('|') {
        Some((r, c)) => (r, c),
        None => (rest, ""),
    };
    let lookup = |part: &str| -> Result<VarSet> {
        let mut set = VarSet::EMPTY;
        for tok in part.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let idx = names
                .iter()
                .position(|n| n.as_ref() == tok)
                .ok_or_else(|| Error::input(format!("unknown variable {tok:?}")))?;
            let v = crate::varset::VarId::new(idx);
            if set.contains(v) {
                return Err(Error::input(format!("variable {tok:?} repeated")));
            }
            set.insert(v);
        }
        Ok(set)
    };
    let (x, y, z) = (lookup(lhs)?, lookup(rhs)?, lookup(cond)?);
    CiRelation::new(x, y, z)
}

/// A deduplicated set of relations over a fixed number of variables.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CiSet {
    n: usize,
    relations: BTreeSet<CiRelation>,
}

impl CiSet {
    pub fn new(n: usize) -> Self {
        CiSet {
            n,
            relations: BTreeSet::new(),
        }
    }

    /// Relations mentioning variables `>= n` are a programming error.
    pub fn from_relations<I: IntoIterator<Item = CiRelation>>(n: usize, rels: I) -> Self {
        let mut s = CiSet::new(n);
        for r in rels {
            s.insert(r);
        }
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, r: CiRelation) -> bool {
        assert!(
            r.vars().upper_bound() <= self.n,
            "relation mentions a variable outside 0..{}",
            self.n
        );
        self.relations.insert(r)
    }

    pub fn contains(&self, r: &CiRelation) -> bool {
        self.relations.contains(r)
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Iterates in [`CiRelation`] order: smallest relations first.
    pub fn iter(&self) -> impl Iterator<Item = &CiRelation> + '_ {
        self.relations.iter()
    }

    pub fn is_subset(&self, other: &CiSet) -> bool {
        self.relations.is_subset(&other.relations)
    }

    /// Members of `self` missing from `other`, smallest first.
    pub fn difference<'a>(&'a self, other: &'a CiSet) -> impl Iterator<Item = &'a CiRelation> + 'a {
        self.relations.difference(&other.relations)
    }

    /// Keep only relations whose variables all lie in `keep`.
    pub fn restrict(&self, keep: VarSet) -> CiSet {
        CiSet {
            n: self.n,
            relations: self
                .relations
                .iter()
                .filter(|r| r.vars().is_subset(keep))
                .copied()
                .collect(),
        }
    }
}

impl<'a> IntoIterator for &'a CiSet {
    type Item = &'a CiRelation;
    type IntoIter = std::collections::btree_set::Iter<'a, CiRelation>;
    fn into_iter(self) -> Self::IntoIter {
        self.relations.iter()
    }
}

/// Semi-graphoid closure with the default cap of 7 variables.
pub fn closure(s: &CiSet) -> Result<CiSet> {
    closure_with_cap(s, DEFAULT_CLOSURE_CAP)
}

/// Least fixpoint of `s` under symmetry, decomposition, weak union and
/// contraction.
pub fn closure_with_cap(s: &CiSet, cap: usize) -> Result<CiSet> {
    check_cap(s.n, cap)?;
    let mut engine = ClosureEngine::default();
    for r in s.iter() {
        engine.add(*r);
    }
    while let Some(r) = engine.work.pop() {
        engine.process(r);
    }
    Ok(CiSet {
        n: s.n,
        relations: engine.seen.into_iter().collect(),
    })
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        let bound = 4f64.powi(n as i32);
        return Err(Error::Resource(format!(
            "closure over {n} variables exceeds the cap of {cap}; \
             the relation universe grows as 4^N ({bound:.0} triples for N={n})"
        )));
    }
    Ok(())
}

#[derive(Default)]
struct ClosureEngine {
    seen: HashSet<CiRelation>,
    // (one side, conditioning set) -> the other sides seen with it
    by_side_and_cond: HashMap<(u64, u64), Vec<VarSet>>,
    work: Vec<CiRelation>,
}

impl ClosureEngine {
    fn add(&mut self, r: CiRelation) {
        if self.seen.insert(r) {
            self.by_side_and_cond
                .entry((r.x.bits(), r.z.bits()))
                .or_default()
                .push(r.y);
            self.by_side_and_cond
                .entry((r.y.bits(), r.z.bits()))
                .or_default()
                .push(r.x);
            self.work.push(r);
        }
    }

    fn add_raw(&mut self, x: VarSet, y: VarSet, z: VarSet) {
        self.add(CiRelation::canonical(x, y, z));
    }

    fn has(&self, x: VarSet, y: VarSet, z: VarSet) -> bool {
        self.seen.contains(&CiRelation::canonical(x, y, z))
    }

    fn process(&mut self, r: CiRelation) {
        for (a, b, c) in [(r.x, r.y, r.z), (r.y, r.x, r.z)] {
            // decomposition and weak union: (a _||_ b1 b2 | c)
            for b1 in b.nonempty_subsets() {
                if b1 == b {
                    continue;
                }
                let b2 = b.difference(b1);
                self.add_raw(a, b1, c);
                self.add_raw(a, b1, c.union(b2));
            }
            // contraction, r as (a _||_ b | z w) with partner (a _||_ w | z)
            for w in c.nonempty_subsets() {
                let z = c.difference(w);
                if self.has(a, w, z) {
                    self.add_raw(a, b.union(w), z);
                }
            }
            // contraction, r as (a _||_ b | c) with partner (a _||_ y | c b)
            let partners = self
                .by_side_and_cond
                .get(&(a.bits(), c.union(b).bits()))
                .cloned()
                .unwrap_or_default();
            for y in partners {
                self.add_raw(a, y.union(b), c);
            }
        }
    }
}

/// Whether `r` follows from `s` under the semi-graphoid axioms.
pub fn implies(s: &CiSet, r: &CiRelation) -> Result<bool> {
    if r.vars().upper_bound() > s.n {
        return Err(Error::input("relation mentions variables outside the set's universe"));
    }
    Ok(closure(s)?.contains(r))
}

/// Inclusion relationship between two closures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosureOrder {
    Equal,
    /// closure(a) strictly contains closure(b).
    AProper,
    /// closure(b) strictly contains closure(a).
    BProper,
    Incomparable,
}

pub fn compare_closures(a: &CiSet, b: &CiSet) -> Result<ClosureOrder> {
    if a.n != b.n {
        return Err(Error::input(format!(
            "relation sets over different universes ({} vs {})",
            a.n, b.n
        )));
    }
    let ca = closure(a)?;
    let cb = closure(b)?;
    Ok(match (cb.is_subset(&ca), ca.is_subset(&cb)) {
        (true, true) => ClosureOrder::Equal,
        (true, false) => ClosureOrder::AProper,
        (false, true) => ClosureOrder::BProper,
        (false, false) => ClosureOrder::Incomparable,
    })
}

/// Every canonical triple over `universe`, each exactly once.
pub fn all_triples(universe: VarSet) -> Vec<CiRelation> {
    let mut out = Vec::new();
    for z in universe.subsets() {
        let rest = universe.difference(z);
        for w in rest.subsets() {
            if w.len() < 2 {
                continue;
            }
            let lead = VarSet::singleton(w.first().expect("nonempty"));
            let tail = w.difference(lead);
            for extra in tail.subsets() {
                let x = lead.union(extra);
                if x == w {
                    continue;
                }
                out.push(CiRelation::canonical(x, w.difference(x), z));
            }
        }
    }
    out
}

/// Relation-set file: a `vars <name> ...` header, then one relation per
/// line in the `X,Y _||_ Z | W` syntax. `#` starts a comment.
pub fn parse_ci_set(text: &str) -> Result<(Vec<String>, CiSet)> {
    let mut names: Option<Vec<String>> = None;
    let mut set = CiSet::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        match &names {
            None => {
                let mut toks = body.split_whitespace();
                if toks.next() != Some("vars") {
                    return Err(Error::parse(line, "expected a `vars` header"));
                }
                let list: Vec<String> = toks.map(str::to_string).collect();
                if list.is_empty() {
                    return Err(Error::parse(line, "`vars` header lists no variables"));
                }
                let unique: HashSet<&String> = list.iter().collect();
                if unique.len() != list.len() {
                    return Err(Error::parse(line, "duplicate variable in `vars` header"));
                }
                if list.len() > crate::varset::MAX_VARS {
                    return Err(Error::Resource(format!(
                        "line {line}: {} variables exceed the limit of {}",
                        list.len(),
                        crate::varset::MAX_VARS
                    )));
                }
                set = CiSet::new(list.len());
                names = Some(list);
            }
            Some(list) => {
                let r = parse_relation(body, list).map_err(|e| Error::parse(line, strip_kind(e)))?;
                set.insert(r);
            }
        }
    }
    let names = names.ok_or_else(|| Error::parse(1, "empty relation file"))?;
    Ok((names, set))
}

fn strip_kind(e: Error) -> String {
    match e {
        Error::Input(m) | Error::Resource(m) => m,
        Error::Validation(v) => v.join("; "),
        Error::Parse { message, .. } => message,
    }
}

pub fn write_ci_set<S: AsRef<str>>(names: &[S], set: &CiSet) -> String {
    let mut s = String::from("vars");
    for n in names {
        s.push(' ');
        s.push_str(n.as_ref());
    }
    s.push('\n');
    for r in set {
        s.push_str(&r.display(names).to_string());
        s.push('\n');
    }
    s
}
