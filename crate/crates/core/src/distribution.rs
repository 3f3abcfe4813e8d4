//! Dense joint probability tables over finite outcome spaces.

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::ci::{all_triples, CiRelation, CiSet};
use crate::error::{Error, Result};
use crate::varset::{VarId, VarSet, MAX_VARS};

/// Default cap on the number of cells in a table.
pub const DEFAULT_TABLE_CAP: usize = 1 << 20;
/// CI tolerance for analytically exact models.
pub const EXACT_TOL: f64 = 1e-9;
/// CI tolerance for simulated quantum outputs.
pub const SIMULATED_TOL: f64 = 1e-7;
/// Allowed deviation of a table sum from one.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Default variable cap for [`JointDistribution::all_ci`].
pub const DEFAULT_ENUMERATION_CAP: usize = 6;

/// Named variables with their outcome-space sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSpace {
    names: Vec<String>,
    sizes: Vec<usize>,
    strides: Vec<usize>,
    cells: usize,
}

impl OutcomeSpace {
    pub fn new(names: Vec<String>, sizes: Vec<usize>) -> Result<Self> {
        Self::with_cap(names, sizes, DEFAULT_TABLE_CAP)
    }

    pub fn with_cap(names: Vec<String>, sizes: Vec<usize>, cap: usize) -> Result<Self> {
        if names.len() != sizes.len() {
            return Err(Error::input("outcome space needs one size per name"));
        }
        if names.len() > MAX_VARS {
            return Err(Error::input(format!("at most {MAX_VARS} variables are supported")));
        }
        let mut seen = HashSet::new();
        for (name, &k) in names.iter().zip(&sizes) {
            if k == 0 {
                return Err(Error::input(format!("variable {name} has an empty outcome space")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::input(format!("duplicate variable name {name}")));
            }
        }
        let mut cells: usize = 1;
        for &k in &sizes {
            cells = cells
                .checked_mul(k)
                .filter(|&c| c <= cap)
                .ok_or_else(|| Error::Resource(format!("table would exceed {cap} cells")))?;
        }
        let mut strides = vec![1; sizes.len()];
        for i in (0..sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        Ok(OutcomeSpace {
            names,
            sizes,
            strides,
            cells,
        })
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn all(&self) -> VarSet {
        VarSet::full(self.n())
    }

    pub fn id_of(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name).map(VarId::new)
    }

    /// Flat index of an assignment; variable 0 is the most significant digit.
    pub fn index(&self, values: &[usize]) -> usize {
        debug_assert_eq!(values.len(), self.n());
        values.iter().zip(&self.strides).map(|(v, s)| v * s).sum()
    }

    pub fn decode(&self, mut index: usize, out: &mut [usize]) {
        for i in (0..self.n()).rev() {
            out[i] = index % self.sizes[i];
            index /= self.sizes[i];
        }
    }

    fn sub(&self, keep: VarSet) -> OutcomeSpace {
        let names = keep.iter().map(|v| self.names[v.index()].clone()).collect();
        let sizes = keep.iter().map(|v| self.sizes[v.index()]).collect();
        OutcomeSpace::with_cap(names, sizes, usize::MAX).expect("subspace of a valid space")
    }
}

/// An exact joint distribution stored as a dense table.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    space: OutcomeSpace,
    table: Vec<f64>,
}

impl JointDistribution {
    /// Entries must be finite and non-negative with a sum within
    /// [`NORMALIZATION_TOL`] of one; the table is rescaled to sum to one.
    pub fn new(space: OutcomeSpace, mut table: Vec<f64>) -> Result<Self> {
        if table.len() != space.cells() {
            return Err(Error::input(format!(
                "table has {} cells, outcome space has {}",
                table.len(),
                space.cells()
            )));
        }
        if let Some(i) = table.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::input(format!("cell {i} holds invalid probability {}", table[i])));
        }
        let sum: f64 = table.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::input(format!("probabilities sum to {sum}, not 1")));
        }
        if sum != 1.0 {
            table.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(JointDistribution { space, table })
    }

    pub fn from_fn(space: OutcomeSpace, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut vals = vec![0; space.n()];
        let table = (0..space.cells())
            .map(|i| {
                space.decode(i, &mut vals);
                f(&vals)
            })
            .collect();
        Self::new(space, table)
    }

    /// Independent variables with the given marginals.
    pub fn product(names: Vec<String>, marginals: &[Vec<f64>]) -> Result<Self> {
        let sizes = marginals.iter().map(Vec::len).collect();
        let space = OutcomeSpace::new(names, sizes)?;
        Self::from_fn(space, |vals| {
            vals.iter().zip(marginals).map(|(&v, m)| m[v]).product()
        })
    }

    pub(crate) fn from_parts_unchecked(space: OutcomeSpace, table: Vec<f64>) -> Self {
        JointDistribution { space, table }
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn names(&self) -> &[String] {
        self.space.names()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    pub fn prob(&self, values: &[usize]) -> f64 {
        self.table[self.space.index(values)]
    }

    fn check_vars(&self, v: VarSet) -> Result<()> {
        if v.upper_bound() > self.n() {
            return Err(Error::input(format!(
                "variable set {v:?} is outside a distribution over {} variables",
                self.n()
            )));
        }
        Ok(())
    }

    /// Sum out every variable outside `keep`. Kept variables retain their
    /// relative order.
    pub fn marginal(&self, keep: VarSet) -> Result<JointDistribution> {
        if keep.is_empty() {
            return Err(Error::input("marginal needs at least one variable"));
        }
        self.check_vars(keep)?;
        Ok(self.marginal_unchecked(keep))
    }

    fn marginal_unchecked(&self, keep: VarSet) -> JointDistribution {
        if keep == self.space.all() {
            return self.clone();
        }
        let sub = self.space.sub(keep);
        let mut table = vec![0.0; sub.cells()];
        let kept: Vec<usize> = keep.iter().map(VarId::index).collect();
        let mut vals = vec![0; self.n()];
        for (i, &p) in self.table.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.space.decode(i, &mut vals);
            let j: usize = kept.iter().zip(&sub.strides).map(|(&k, s)| vals[k] * s).sum();
            table[j] += p;
        }
        JointDistribution { space: sub, table }
    }

    /// Probability of a partial assignment.
    pub fn event_prob(&self, event: &[(VarId, usize)]) -> f64 {
        let mut vals = vec![0; self.n()];
        self.table
            .iter()
            .enumerate()
            .filter(|&(i, _)| {
                self.space.decode(i, &mut vals);
                event.iter().all(|&(v, x)| vals[v.index()] == x)
            })
            .map(|(_, p)| p)
            .sum()
    }

    /// `P(event | given)`, or `None` when the condition has probability zero.
    pub fn conditional_prob(&self, event: &[(VarId, usize)], given: &[(VarId, usize)]) -> Option<f64> {
        let pg = self.event_prob(given);
        if pg <= 0.0 {
            return None;
        }
        let both: Vec<(VarId, usize)> = event.iter().chain(given).copied().collect();
        Some(self.event_prob(&both) / pg)
    }

    /// The same distribution with variables permuted into `order`.
    pub fn reorder(&self, order: &[VarId]) -> Result<JointDistribution> {
        let n = self.n();
        let set: VarSet = order.iter().copied().collect();
        if order.len() != n || set != self.space.all() {
            return Err(Error::input("reorder needs a permutation of the variables"));
        }
        let names = order.iter().map(|v| self.space.names[v.index()].clone()).collect();
        let sizes = order.iter().map(|v| self.space.sizes[v.index()]).collect();
        let space = OutcomeSpace::with_cap(names, sizes, usize::MAX)?;
        let mut table = vec![0.0; space.cells()];
        let mut vals = vec![0; n];
        let mut permuted = vec![0; n];
        for (i, &p) in self.table.iter().enumerate() {
            self.space.decode(i, &mut vals);
            for (k, v) in order.iter().enumerate() {
                permuted[k] = vals[v.index()];
            }
            table[space.index(&permuted)] = p;
        }
        Ok(JointDistribution { space, table })
    }

    /// Reorder so the variable names follow `names` exactly.
    pub fn align_to<S: AsRef<str>>(&self, names: &[S]) -> Result<JointDistribution> {
        let order = names
            .iter()
            .map(|n| {
                self.space
                    .id_of(n.as_ref())
                    .ok_or_else(|| Error::input(format!("distribution has no variable {}", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        self.reorder(&order)
    }

    /// `(x _||_ y | z)` holds: for every context of `z` with probability
    /// above `tol`, `|P(x,y|z) - P(x|z)P(y|z)| <= tol` in every cell.
    pub fn is_ci(&self, x: VarSet, y: VarSet, z: VarSet, tol: f64) -> Result<bool> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::input("CI query needs nonempty x and y"));
        }
        if !x.is_disjoint(y) || !x.is_disjoint(z) || !y.is_disjoint(z) {
            return Err(Error::input("CI query sets must be pairwise disjoint"));
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::input("CI tolerance must be positive"));
        }
        self.check_vars(x.union(y).union(z))?;
        Ok(self.is_ci_unchecked(x, y, z, tol))
    }

    fn is_ci_unchecked(&self, x: VarSet, y: VarSet, z: VarSet, tol: f64) -> bool {
        let all = x.union(y).union(z);
        let m = self.marginal_unchecked(all);
        // positions of x, y, z inside the marginal
        let local = |s: VarSet| -> Vec<usize> {
            s.iter()
                .map(|v| all.iter().position(|w| w == v).expect("member"))
                .collect()
        };
        let (lx, ly, lz) = (local(x), local(y), local(z));
        let size = |l: &[usize]| l.iter().map(|&i| m.space.sizes[i]).product::<usize>();
        let (nx, ny, nz) = (size(&lx), size(&ly), size(&lz));
        let flat = |l: &[usize], vals: &[usize]| {
            l.iter().fold(0, |acc, &i| acc * m.space.sizes[i] + vals[i])
        };
        let mut pz = vec![0.0; nz];
        let mut pxz = vec![0.0; nx * nz];
        let mut pyz = vec![0.0; ny * nz];
        let mut pxyz = vec![0.0; nx * ny * nz];
        let mut vals = vec![0; m.n()];
        for (i, &p) in m.table.iter().enumerate() {
            m.space.decode(i, &mut vals);
            let (a, b, c) = (flat(&lx, &vals), flat(&ly, &vals), flat(&lz, &vals));
            pz[c] += p;
            pxz[c * nx + a] += p;
            pyz[c * ny + b] += p;
            pxyz[(c * nx + a) * ny + b] += p;
        }
        (0..nz).filter(|&c| pz[c] > tol).all(|c| {
            let w = pz[c];
            (0..nx).all(|a| {
                (0..ny).all(|b| {
                    let joint = pxyz[(c * nx + a) * ny + b] / w;
                    let prod = (pxz[c * nx + a] / w) * (pyz[c * ny + b] / w);
                    (joint - prod).abs() <= tol
                })
            })
        })
    }

    pub fn is_ci_relation(&self, r: &CiRelation, tol: f64) -> Result<bool> {
        self.is_ci(r.x(), r.y(), r.z(), tol)
    }

    /// Every CI triple that holds at tolerance `tol` (default cap 6 variables).
    pub fn all_ci(&self, tol: f64) -> Result<CiSet> {
        self.all_ci_with_cap(tol, DEFAULT_ENUMERATION_CAP)
    }

    pub fn all_ci_with_cap(&self, tol: f64, cap: usize) -> Result<CiSet> {
        if self.n() > cap {
            return Err(Error::Resource(format!(
                "enumerating all CI triples over {} variables exceeds the cap of {cap} (4^N growth)",
                self.n()
            )));
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::input("CI tolerance must be positive"));
        }
        let held: Vec<CiRelation> = all_triples(self.space.all())
            .into_par_iter()
            .filter(|r| self.is_ci_unchecked(r.x(), r.y(), r.z(), tol))
            .collect();
        Ok(CiSet::from_relations(self.n(), held))
    }

    /// Largest absolute cell difference to `other` (same space required).
    pub fn max_abs_diff(&self, other: &JointDistribution) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::input("distributions are over different outcome spaces"));
        }
        Ok(self
            .table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Serialize as a `vars` header plus one line per nonzero cell.
pub fn write_table(p: &JointDistribution) -> String {
    let mut s = String::from("vars");
    for (name, k) in p.space.names.iter().zip(&p.space.sizes) {
        let _ = write!(s, " {name}:{k}");
    }
    s.push('\n');
    let mut vals = vec![0; p.n()];
    for (i, &q) in p.table.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        p.space.decode(i, &mut vals);
        for v in &vals {
            let _ = write!(s, "{v} ");
        }
        let _ = writeln!(s, "{q}");
    }
    s
}

pub fn parse_table(text: &str) -> Result<JointDistribution> {
    let mut space: Option<OutcomeSpace> = None;
    let mut table = Vec::new();
    let mut filled = Vec::new();
    let mut vals = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        match &space {
            None => {
                if toks[0] != "vars" {
                    return Err(Error::parse(line, "expected a `vars` header"));
                }
                let mut names = Vec::new();
                let mut sizes = Vec::new();
                for tok in &toks[1..] {
                    let (name, k) = tok
                        .split_once(':')
                        .ok_or_else(|| Error::parse(line, format!("expected name:size, got {tok:?}")))?;
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::parse(line, format!("bad size in {tok:?}")))?;
                    names.push(name.to_string());
                    sizes.push(k);
                }
                if names.is_empty() {
                    return Err(Error::parse(line, "`vars` header lists no variables"));
                }
                let sp = OutcomeSpace::new(names, sizes).map_err(|e| match e {
                    Error::Resource(m) => Error::Resource(format!("line {line}: {m}")),
                    other => Error::parse(line, other.to_string()),
                })?;
                table = vec![0.0; sp.cells()];
                filled = vec![false; sp.cells()];
                vals = vec![0; sp.n()];
                space = Some(sp);
            }
            Some(sp) => {
                if toks.len() != sp.n() + 1 {
                    return Err(Error::parse(
                        line,
                        format!("expected {} values and a probability", sp.n()),
                    ));
                }
                for (i, tok) in toks[..sp.n()].iter().enumerate() {
                    let v: usize = tok
                        .parse()
                        .map_err(|_| Error::parse(line, format!("bad value {tok:?}")))?;
                    if v >= sp.sizes[i] {
                        return Err(Error::parse(
                            line,
                            format!("value {v} out of range for {}", sp.names[i]),
                        ));
                    }
                    vals[i] = v;
                }
                let q: f64 = toks[sp.n()]
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad probability {:?}", toks[sp.n()])))?;
                if !q.is_finite() || q < 0.0 {
                    return Err(Error::parse(line, format!("invalid probability {q}")));
                }
                let i = sp.index(&vals);
                if filled[i] {
                    return Err(Error::parse(line, "cell listed twice"));
                }
                filled[i] = true;
                table[i] = q;
            }
        }
    }
    let space = space.ok_or_else(|| Error::parse(1, "missing `vars` header"))?;
    let last = text.lines().count().max(1);
    JointDistribution::new(space, table).map_err(|e| Error::parse(last, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn xor_dist() -> JointDistribution {
        let space = OutcomeSpace::new(names(&["X", "W", "Y"]), vec![2, 2, 2]).unwrap();
        JointDistribution::from_fn(space, |v| if v[2] == v[0] ^ v[1] { 0.25 } else { 0.0 }).unwrap()
    }

    #[test]
    fn indexing_is_row_major() {
        let sp = OutcomeSpace::new(names(&["a", "b"]), vec![2, 3]).unwrap();
        assert_eq!(sp.index(&[1, 2]), 5);
        let mut v = [0; 2];
        sp.decode(4, &mut v);
        assert_eq!(v, [1, 1]);
    }

    #[test]
    fn rejects_bad_tables() {
        let sp = OutcomeSpace::new(names(&["a"]), vec![2]).unwrap();
        assert!(JointDistribution::new(sp.clone(), vec![0.5, 0.6]).is_err());
        assert!(JointDistribution::new(sp.clone(), vec![1.5, -0.5]).is_err());
        assert!(JointDistribution::new(sp, vec![1.0]).is_err());
        assert!(OutcomeSpace::with_cap(names(&["a", "b"]), vec![4, 4], 8)
            .unwrap_err()
            .is_resource());
    }

    #[test]
    fn marginals() {
        let p = JointDistribution::product(names(&["a", "b"]), &[vec![0.3, 0.7], vec![0.1, 0.2, 0.7]]).unwrap();
        let m = p.marginal(VarSet::of(&[1])).unwrap();
        assert_eq!(m.names(), &["b".to_string()]);
        for (got, want) in m.table().iter().zip([0.1, 0.2, 0.7]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(p.marginal(p.space().all()).unwrap(), p);
        assert!(p.marginal(VarSet::EMPTY).is_err());
    }

    #[test]
    fn xor_is_pairwise_but_not_jointly_independent() {
        let p = xor_dist();
        let (x, w, y) = (VarSet::of(&[0]), VarSet::of(&[1]), VarSet::of(&[2]));
        assert!(p.is_ci(x, y, VarSet::EMPTY, EXACT_TOL).unwrap());
        assert!(p.is_ci(w, y, VarSet::EMPTY, EXACT_TOL).unwrap());
        assert!(!p.is_ci(x.union(w), y, VarSet::EMPTY, EXACT_TOL).unwrap());
        assert!(!p.is_ci(x, y, w, EXACT_TOL).unwrap());
    }

    #[test]
    fn ci_query_validation() {
        let p = xor_dist();
        assert!(p.is_ci(VarSet::of(&[0]), VarSet::of(&[0]), VarSet::EMPTY, 1e-9).is_err());
        assert!(p.is_ci(VarSet::of(&[0]), VarSet::of(&[1]), VarSet::EMPTY, 0.0).is_err());
        assert!(p.is_ci(VarSet::of(&[0]), VarSet::of(&[5]), VarSet::EMPTY, 1e-9).is_err());
    }

    #[test]
    fn product_of_two_bits_has_one_relation() {
        let p = JointDistribution::product(names(&["X", "Y"]), &[vec![0.4, 0.6], vec![0.5, 0.5]]).unwrap();
        let all = p.all_ci(EXACT_TOL).unwrap();
        assert_eq!(all.len(), 1);
        assert!(all.contains(&CiRelation::new(VarSet::of(&[0]), VarSet::of(&[1]), VarSet::EMPTY).unwrap()));
    }

    #[test]
    fn zero_probability_contexts_are_skipped() {
        let space = OutcomeSpace::new(names(&["Z", "X", "Y"]), vec![2, 2, 2]).unwrap();
        // Z=1 never happens; under Z=0, X and Y are independent
        let p = JointDistribution::from_fn(space, |v| if v[0] == 0 { 0.25 } else { 0.0 }).unwrap();
        assert!(p.is_ci(VarSet::of(&[1]), VarSet::of(&[2]), VarSet::of(&[0]), EXACT_TOL).unwrap());
    }

    #[test]
    fn conditional_and_event_probabilities() {
        let p = xor_dist();
        assert!((p.event_prob(&[(VarId(2), 1)]) - 0.5).abs() < 1e-15);
        let c = p.conditional_prob(&[(VarId(2), 0)], &[(VarId(0), 1), (VarId(1), 1)]).unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn reorder_and_align() {
        let p = JointDistribution::product(names(&["a", "b"]), &[vec![0.3, 0.7], vec![0.1, 0.9]]).unwrap();
        let q = p.align_to(&["b", "a"]).unwrap();
        assert_eq!(q.names(), &names(&["b", "a"])[..]);
        assert!((q.prob(&[1, 0]) - 0.27).abs() < 1e-15);
        assert_eq!(q.align_to(&["a", "b"]).unwrap(), p);
        assert!(p.align_to(&["a"]).is_err());
    }

    #[test]
    fn table_round_trip() {
        let p = JointDistribution::product(names(&["a", "b"]), &[vec![0.3, 0.7], vec![0.1, 0.2, 0.7]]).unwrap();
        let text = write_table(&p);
        assert!(text.starts_with("vars a:2 b:3\n"));
        let q = parse_table(&text).unwrap();
        assert!(q.max_abs_diff(&p).unwrap() < 1e-15);
    }

    #[test]
    fn table_parse_errors() {
        let line = |t: &str| match parse_table(t).unwrap_err() {
            Error::Parse { line, .. } => line,
            e => panic!("{e:?}"),
        };
        assert_eq!(line("vars a:2\n0 0.5\n1 0.6\n"), 3);
        assert_eq!(line("vars a:2\n0 0.5\n0 0.5\n"), 3);
        assert_eq!(line("vars a:2\n2 1.0\n"), 2);
        assert_eq!(line("vars a:2\n0 1.0 extra\n"), 2);
        assert_eq!(line("0 1.0\n"), 1);
    }
}
