//! Compact set of cell indices backed by a 128-bit mask.

use std::fmt;

/// Largest number of cells a [`CellSet`] can address.
pub const MAX_CELLS: usize = 128;

/// A set of cell indices in `0..MAX_CELLS`.
///
/// Ordering compares the sorted member lists lexicographically, so a sorted
/// `Vec<CellSet>` lists `{}` first, then `{0}`, `{0,2}`, `{1}`, ...
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CellSet(u128);

impl CellSet {
    pub const EMPTY: CellSet = CellSet(0);

    /// All cells `0..n`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_CELLS, "at most {MAX_CELLS} cells are supported");
        if n == MAX_CELLS {
            CellSet(u128::MAX)
        } else {
            CellSet((1u128 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        CellSet(1u128 << i)
    }

    pub fn from_bits(bits: u128) -> Self {
        CellSet(bits)
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_CELLS && (self.0 >> i) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1u128 << i;
    }

    pub fn remove(&mut self, i: usize) {
        self.0 &= !(1u128 << i);
    }

    pub fn with(self, i: usize) -> Self {
        CellSet(self.0 | (1u128 << i))
    }

    pub fn without(self, i: usize) -> Self {
        CellSet(self.0 & !(1u128 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        CellSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        CellSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        CellSet(self.0 & !other.0)
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Smallest member, if any.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// Members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl FromIterator<usize> for CellSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = CellSet::EMPTY;
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl PartialOrd for CellSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CellSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.iter().cmp(other.iter())
    }
}

impl fmt::Debug for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// 1-based cell ids in braces, e.g. `{1,3}`; the empty set is `{}`.
impl fmt::Display for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

/// Serialized through [`Display`](fmt::Display) so that sets can key maps.
impl serde::Serialize for CellSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
