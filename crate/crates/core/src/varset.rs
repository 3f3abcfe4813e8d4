//! Dense variable identifiers and exact bitset sets over them.

use std::fmt;

/// Hard upper bound imposed by the `u64` bitset representation.
pub const MAX_VARS: usize = 64;

/// Index of a variable (node) in a model. Dense in `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u8);

impl VarId {
    pub fn new(index: usize) -> Self {
        assert!(index < MAX_VARS, "variable index {index} exceeds {MAX_VARS}");
        VarId(index as u8)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for VarId {
    fn from(i: usize) -> Self {
        VarId::new(i)
    }
}

/// A set of variables with bitset semantics.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VarSet(u64);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    #[inline]
    pub const fn from_bits(bits: u64) -> Self {
        VarSet(bits)
    }

    #[inline]
    pub const fn bits(self) -> u64 {
        self.0
    }

    /// `{0, 1, ..., n-1}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_VARS);
        if n == MAX_VARS {
            VarSet(u64::MAX)
        } else {
            VarSet((1u64 << n) - 1)
        }
    }

    #[inline]
    pub fn singleton(v: VarId) -> Self {
        VarSet(1u64 << v.index())
    }

    pub fn of(ids: &[usize]) -> Self {
        ids.iter().map(|&i| VarId::new(i)).collect()
    }

    #[inline]
    pub fn contains(self, v: VarId) -> bool {
        self.0 >> v.index() & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, v: VarId) {
        self.0 |= 1u64 << v.index();
    }

    #[inline]
    pub fn remove(&mut self, v: VarId) {
        self.0 &= !(1u64 << v.index());
    }

    #[inline]
    pub fn with(self, v: VarId) -> Self {
        VarSet(self.0 | 1u64 << v.index())
    }

    #[inline]
    pub fn union(self, other: VarSet) -> Self {
        VarSet(self.0 | other.0)
    }

    #[inline]
    pub fn intersection(self, other: VarSet) -> Self {
        VarSet(self.0 & other.0)
    }

    #[inline]
    pub fn difference(self, other: VarSet) -> Self {
        VarSet(self.0 & !other.0)
    }

    /// Complement relative to the universe `0..n`.
    #[inline]
    pub fn complement(self, n: usize) -> Self {
        VarSet::full(n).difference(self)
    }

    #[inline]
    pub fn is_disjoint(self, other: VarSet) -> bool {
        self.0 & other.0 == 0
    }

    #[inline]
    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Smallest member, if any.
    pub fn first(self) -> Option<VarId> {
        (self.0 != 0).then(|| VarId(self.0.trailing_zeros() as u8))
    }

    /// Largest member plus one; zero for the empty set.
    pub fn upper_bound(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }

    pub fn iter(self) -> VarSetIter {
        VarSetIter(self.0)
    }

    /// All subsets of `self`, including the empty set and `self`.
    pub fn subsets(self) -> Subsets {
        Subsets {
            mask: self.0,
            next: Some(0),
        }
    }

    /// Nonempty subsets of `self`.
    pub fn nonempty_subsets(self) -> impl Iterator<Item = VarSet> {
        self.subsets().filter(|s| !s.is_empty())
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|v| v.0)).finish()
    }
}

impl FromIterator<VarId> for VarSet {
    fn from_iter<I: IntoIterator<Item = VarId>>(iter: I) -> Self {
        let mut s = VarSet::EMPTY;
        for v in iter {
            s.insert(v);
        }
        s
    }
}

impl IntoIterator for VarSet {
    type Item = VarId;
    type IntoIter = VarSetIter;
    fn into_iter(self) -> VarSetIter {
        self.iter()
    }
}

#[derive(Debug, Clone)]
pub struct VarSetIter(u64);

impl Iterator for VarSetIter {
    type Item = VarId;

    fn next(&mut self) -> Option<VarId> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(VarId(i as u8))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for VarSetIter {}

/// Submask enumeration in increasing numeric order.
#[derive(Debug, Clone)]
pub struct Subsets {
    mask: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = VarSet;

    fn next(&mut self) -> Option<VarSet> {
        let cur = self.next?;
        self.next = if cur == self.mask {
            None
        } else {
            // next submask in increasing order
            Some((cur.wrapping_sub(self.mask)) & self.mask)
        };
        Some(VarSet(cur))
    }
}
