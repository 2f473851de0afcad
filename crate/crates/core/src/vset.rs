//! Small vertex sets as bitmasks.
//!
//! Every algorithm in this crate works on graphs with at most
//! [`MAX_VERTICES`] vertices, so a `u32` mask is enough and keeps set
//! algebra branch-free.

use std::fmt;

/// Hard cap on graph size; dense probability tables are indexed by
/// `2^n` so anything beyond this is impractical anyway.
pub const MAX_VERTICES: usize = 16;

/// A vertex, identified by its dense index in the owning graph.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Vertex(pub u8);

impl Vertex {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// A set of vertices, one bit per vertex index.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VSet(pub u32);

impl VSet {
    pub const EMPTY: VSet = VSet(0);

    #[inline]
    pub fn singleton(v: Vertex) -> VSet {
        VSet(1 << v.0)
    }

    /// The full set `{0, .., n-1}`.
    #[inline]
    pub fn full(n: usize) -> VSet {
        debug_assert!(n <= MAX_VERTICES);
        if n == 0 {
            VSet(0)
        } else {
            VSet(u32::MAX >> (32 - n))
        }
    }

    #[inline]
    pub fn contains(self, v: Vertex) -> bool {
        self.0 & (1 << v.0) != 0
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn insert(self, v: Vertex) -> VSet {
        VSet(self.0 | (1 << v.0))
    }

    #[inline]
    pub fn remove(self, v: Vertex) -> VSet {
        VSet(self.0 & !(1 << v.0))
    }

    #[inline]
    pub fn union(self, other: VSet) -> VSet {
        VSet(self.0 | other.0)
    }

    #[inline]
    pub fn inter(self, other: VSet) -> VSet {
        VSet(self.0 & other.0)
    }

    #[inline]
    pub fn minus(self, other: VSet) -> VSet {
        VSet(self.0 & !other.0)
    }

    #[inline]
    pub fn is_subset_of(self, other: VSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Vertices in ascending index order.
    #[inline]
    pub fn iter(self) -> impl Iterator<Item = Vertex> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let v = bits.trailing_zeros() as u8;
                bits &= bits - 1;
                Some(Vertex(v))
            }
        })
    }

    /// Smallest member, if any.
    #[inline]
    pub fn first(self) -> Option<Vertex> {
        if self.0 == 0 {
            None
        } else {
            Some(Vertex(self.0.trailing_zeros() as u8))
        }
    }

    /// All subsets of `self`, the empty set first, `self` last.
    pub fn subsets(self) -> impl Iterator<Item = VSet> {
        let mask = self.0;
        let mut sub: u32 = 0;
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let cur = VSet(sub);
            if sub == mask {
                done = true;
            } else {
                sub = (sub.wrapping_sub(mask)) & mask;
            }
            Some(cur)
        })
    }

    /// Index tuple, for deterministic lexicographic ordering of sets.
    pub fn sorted_indices(self) -> Vec<u8> {
        self.iter().map(|v| v.0).collect()
    }
}

impl FromIterator<Vertex> for VSet {
    fn from_iter<T: IntoIterator<Item = Vertex>>(iter: T) -> Self {
        iter.into_iter().fold(VSet::EMPTY, VSet::insert)
    }
}

impl fmt::Debug for VSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|v| v.0)).finish()
    }
}
