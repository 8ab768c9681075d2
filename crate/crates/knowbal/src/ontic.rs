//! The ontic space and the algebra of epistemic states.
//!
//! An elementary system has four ontic states, written `1..4`. A composite
//! of `N` systems has `4^N` ontic states, encoded row-major with system 1
//! most significant: the tuple `(x1, .., xN)` has index
//! `sum_i (x_i - 1) * 4^(N - i)`. An epistemic state is a nonempty subset of
//! the ontic space (its *ontic base*), held here as a fixed-width bit set so
//! that intersection, union and cardinality are constant-time word
//! operations.
//!
//! Nothing in this module knows which subsets are *valid* states of
//! knowledge; that predicate lives in [`crate::validity`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard upper bound on tracked systems (protocol bookkeeping needs 4;
/// enumeration is only guaranteed for 3).
pub const MAX_SYSTEMS: usize = 4;

/// Number of ontic states of one elementary system.
pub const CELL_VALUES: u16 = 4;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum OnticError {
    #[error("system count {0} out of range (1..={MAX_SYSTEMS})")]
    BadSystemCount(usize),
    #[error("ontic index {index} out of range for {n} system(s)")]
    IndexOutOfRange { index: u16, n: usize },
    #[error("ontic coordinate {0} out of range (1..=4)")]
    CoordOutOfRange(u16),
    #[error("epistemic state needs a nonempty member list")]
    EmptyMembers,
    #[error("shape mismatch: {0} vs {1} system(s)")]
    ShapeMismatch(usize, usize),
    #[error("subsystem selection is empty")]
    EmptyKeep,
    #[error("subsystem index {0} out of range or repeated")]
    BadSubsystem(usize),
    #[error("coherent operations are defined for a single elementary system only")]
    NotSingleSystem,
    #[error("coherent operations need pure (size-2) operands")]
    NotPure,
    #[error("coherent operations are not defined for nondisjoint states")]
    NotDisjoint,
    #[error("convex combination needs at least two states")]
    TooFewStates,
    #[error("combined shape would exceed {MAX_SYSTEMS} systems")]
    TooManySystems,
}

/// The shape of a composite: how many elementary systems it contains.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SystemShape {
    n_systems: u8,
}

impl SystemShape {
    pub fn new(n_systems: usize) -> Result<Self, OnticError> {
        if n_systems == 0 || n_systems > MAX_SYSTEMS {
            return Err(OnticError::BadSystemCount(n_systems));
        }
        Ok(SystemShape {
            n_systems: n_systems as u8,
        })
    }

    pub fn n_systems(&self) -> usize {
        self.n_systems as usize
    }

    /// `4^N`, the number of ontic states.
    pub fn ontic_count(&self) -> usize {
        1 << (2 * self.n_systems)
    }

    /// Ontic base size of a pure state: `2^N`.
    pub fn pure_size(&self) -> usize {
        1 << self.n_systems
    }

    /// Number of questions in a canonical set: `2N`.
    pub fn canonical_questions(&self) -> usize {
        2 * self.n_systems()
    }
}

impl fmt::Display for SystemShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} system(s)", self.n_systems)
    }
}

/// One point of the ontic space, addressed by flat index.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OnticIndex(pub u16);

impl OnticIndex {
    /// Build from per-system coordinates, each in `1..=4`, system 1 first.
    pub fn from_coords(shape: SystemShape, coords: &[u16]) -> Result<Self, OnticError> {
        if coords.len() != shape.n_systems() {
            return Err(OnticError::BadSystemCount(coords.len()));
        }
        let mut index = 0u16;
        for &c in coords {
            if c == 0 || c > CELL_VALUES {
                return Err(OnticError::CoordOutOfRange(c));
            }
            index = index * CELL_VALUES + (c - 1);
        }
        Ok(OnticIndex(index))
    }

    /// Per-system coordinates in `1..=4`, system 1 first.
    pub fn coords(&self, shape: SystemShape) -> Vec<u16> {
        let n = shape.n_systems();
        let mut out = vec![0u16; n];
        let mut rest = self.0;
        for i in (0..n).rev() {
            out[i] = rest % CELL_VALUES + 1;
            rest /= CELL_VALUES;
        }
        out
    }

    /// Coordinate of one subsystem (1-based), in `1..=4`.
    pub fn coord(&self, shape: SystemShape, system: usize) -> u16 {
        let n = shape.n_systems();
        ((self.0 >> (2 * (n - system))) & 0b11) + 1
    }
}

/// A subset of the ontic space as a 256-bit set; bit `i` is ontic index `i`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Default)]
pub struct CellSet {
    words: [u64; 4],
}

impl CellSet {
    pub const EMPTY: CellSet = CellSet { words: [0; 4] };

    pub fn singleton(index: u16) -> Self {
        let mut s = Self::EMPTY;
        s.insert(index);
        s
    }

    /// All `4^N` cells of a shape.
    pub fn full(shape: SystemShape) -> Self {
        let mut s = Self::EMPTY;
        for i in 0..shape.ontic_count() as u16 {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(indices: &[u16]) -> Self {
        let mut s = Self::EMPTY;
        for &i in indices {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, index: u16) {
        self.words[(index >> 6) as usize] |= 1u64 << (index & 63);
    }

    pub fn contains(&self, index: u16) -> bool {
        self.words[(index >> 6) as usize] >> (index & 63) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        let mut words = self.words;
        for (w, o) in words.iter_mut().zip(other.words.iter()) {
            *w |= o;
        }
        CellSet { words }
    }

    pub fn intersection(&self, other: &CellSet) -> CellSet {
        let mut words = self.words;
        for (w, o) in words.iter_mut().zip(other.words.iter()) {
            *w &= o;
        }
        CellSet { words }
    }

    pub fn difference(&self, other: &CellSet) -> CellSet {
        let mut words = self.words;
        for (w, o) in words.iter_mut().zip(other.words.iter()) {
            *w &= !o;
        }
        CellSet { words }
    }

    pub fn is_disjoint(&self, other: &CellSet) -> bool {
        self.intersection(other).is_empty()
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.difference(other).is_empty()
    }

    /// Ascending ontic indices.
    pub fn iter(&self) -> impl Iterator<Item = u16> + '_ {
        (0..4usize).flat_map(move |wi| {
            let mut w = self.words[wi];
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as u16;
                w &= w - 1;
                Some((wi as u16) * 64 + b)
            })
        })
    }

    pub fn indices(&self) -> Vec<u16> {
        self.iter().collect()
    }

    pub fn min(&self) -> Option<u16> {
        self.iter().next()
    }

    /// Order by the ascending member list, lexicographically. The set
    /// containing the lowest differing cell sorts first.
    pub fn cmp_lex(&self, other: &CellSet) -> std::cmp::Ordering {
        for wi in 0..4 {
            let diff = self.words[wi] ^ other.words[wi];
            if diff != 0 {
                let bit = diff & diff.wrapping_neg();
                return if self.words[wi] & bit != 0 {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                };
            }
        }
        std::cmp::Ordering::Equal
    }
}

impl fmt::Debug for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// The four coherent binary operations on disjoint pure single-system
/// states: pick the low or high element of each operand.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum CoherentOp {
    /// `+1`: low of the first, low of the second.
    LowLow,
    /// `+2`: high of the first, high of the second.
    HighHigh,
    /// `+3`: high of the first, low of the second.
    HighLow,
    /// `+4`: low of the first, high of the second.
    LowHigh,
}

impl CoherentOp {
    pub const ALL: [CoherentOp; 4] = [
        CoherentOp::LowLow,
        CoherentOp::HighHigh,
        CoherentOp::HighLow,
        CoherentOp::LowHigh,
    ];

    /// The conventional ordinal (1..=4).
    pub fn ordinal(&self) -> usize {
        match self {
            CoherentOp::LowLow => 1,
            CoherentOp::HighHigh => 2,
            CoherentOp::HighLow => 3,
            CoherentOp::LowHigh => 4,
        }
    }
}

impl fmt::Display for CoherentOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "+{}", self.ordinal())
    }
}

/// A state of knowledge: a nonempty subset of the ontic space.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct EpistemicState {
    shape: SystemShape,
    members: CellSet,
}

/// Result of a convex combination, which is lawfully undefined for
/// non-disjoint operands or unions that violate the balance principle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConvexResult {
    Combined(EpistemicState),
    Undefined,
}

impl EpistemicState {
    /// Build a state from explicit indices. Deduplicates and sorts; performs
    /// no validity check.
    pub fn new(shape: SystemShape, members: &[u16]) -> Result<Self, OnticError> {
        if members.is_empty() {
            return Err(OnticError::EmptyMembers);
        }
        let count = shape.ontic_count() as u16;
        let mut set = CellSet::EMPTY;
        for &m in members {
            if m >= count {
                return Err(OnticError::IndexOutOfRange {
                    index: m,
                    n: shape.n_systems(),
                });
            }
            set.insert(m);
        }
        Ok(EpistemicState {
            shape,
            members: set,
        })
    }

    /// Build from a precomputed cell set (must be nonempty and in range).
    pub fn from_cells(shape: SystemShape, members: CellSet) -> Result<Self, OnticError> {
        if members.is_empty() {
            return Err(OnticError::EmptyMembers);
        }
        if !members.is_subset(&CellSet::full(shape)) {
            return Err(OnticError::IndexOutOfRange {
                index: members.iter().last().unwrap_or(0),
                n: shape.n_systems(),
            });
        }
        Ok(EpistemicState { shape, members })
    }

    /// Build from per-system coordinate tuples, e.g. `&[[1,1],[2,2]]`.
    pub fn from_tuples(shape: SystemShape, tuples: &[&[u16]]) -> Result<Self, OnticError> {
        let mut idx = Vec::with_capacity(tuples.len());
        for t in tuples {
            idx.push(OnticIndex::from_coords(shape, t)?.0);
        }
        Self::new(shape, &idx)
    }

    /// The fully mixed state `1v2v..` on a shape.
    pub fn fully_mixed(shape: SystemShape) -> Self {
        EpistemicState {
            shape,
            members: CellSet::full(shape),
        }
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn members(&self) -> &CellSet {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// `true` iff the base has the minimal lawful size `2^N`.
    pub fn is_pure(&self) -> bool {
        self.size() == self.shape.pure_size()
    }

    /// Projection onto the kept subsystems (1-based, order respected).
    pub fn marginal(&self, keep: &[usize]) -> Result<EpistemicState, OnticError> {
        if keep.is_empty() {
            return Err(OnticError::EmptyKeep);
        }
        let n = self.shape.n_systems();
        let mut seen = [false; MAX_SYSTEMS];
        for &k in keep {
            if k == 0 || k > n || seen[k - 1] {
                return Err(OnticError::BadSubsystem(k));
            }
            seen[k - 1] = true;
        }
        let new_shape = SystemShape::new(keep.len())?;
        let mut set = CellSet::EMPTY;
        for m in self.members.iter() {
            let coords = OnticIndex(m).coords(self.shape);
            let kept: Vec<u16> = keep.iter().map(|&k| coords[k - 1]).collect();
            set.insert(OnticIndex::from_coords(new_shape, &kept)?.0);
        }
        EpistemicState::from_cells(new_shape, set)
    }

    /// Conjunction: the state on the combined shape whose base is the
    /// Cartesian product of the operand bases, first operand most
    /// significant.
    pub fn conjoin(&self, other: &EpistemicState) -> Result<EpistemicState, OnticError> {
        let n = self.shape.n_systems() + other.shape.n_systems();
        if n > MAX_SYSTEMS {
            return Err(OnticError::TooManySystems);
        }
        let shape = SystemShape::new(n)?;
        let stride = other.shape.ontic_count() as u16;
        let mut set = CellSet::EMPTY;
        for a in self.members.iter() {
            for b in other.members.iter() {
                set.insert(a * stride + b);
            }
        }
        EpistemicState::from_cells(shape, set)
    }

    pub fn is_disjoint(&self, other: &EpistemicState) -> Result<bool, OnticError> {
        self.check_shape(other)?;
        Ok(self.members.is_disjoint(&other.members))
    }

    /// Classical fidelity between the uniform distributions on the two
    /// bases: `|intersection| / sqrt(|s1| * |s2|)`.
    pub fn fidelity(&self, other: &EpistemicState) -> Result<f64, OnticError> {
        let (num_sq, den_sq) = self.fidelity_squared(other)?;
        Ok((num_sq as f64 / den_sq as f64).sqrt())
    }

    /// Squared fidelity as an exact (unreduced) rational
    /// `(|intersection|^2, |s1| * |s2|)`, for tolerance-free comparisons.
    pub fn fidelity_squared(&self, other: &EpistemicState) -> Result<(u64, u64), OnticError> {
        self.check_shape(other)?;
        let common = self.members.intersection(&other.members).len() as u64;
        Ok((common * common, (self.size() * other.size()) as u64))
    }

    /// Convex combination: defined only when the states are pairwise
    /// disjoint and the union is itself a lawful state; `Undefined` is a
    /// result, not an error.
    pub fn convex_combine(
        states: &[EpistemicState],
        validity: &mut crate::validity::ValidityChecker,
    ) -> Result<ConvexResult, OnticError> {
        if states.len() < 2 {
            return Err(OnticError::TooFewStates);
        }
        let shape = states[0].shape;
        let mut union = CellSet::EMPTY;
        let mut total = 0usize;
        for s in states {
            s.check_shape(&states[0])?;
            union = union.union(&s.members);
            total += s.size();
        }
        if union.len() != total {
            return Ok(ConvexResult::Undefined); // some pair overlaps
        }
        let combined = EpistemicState::from_cells(shape, union)?;
        if validity.is_valid(&combined).unwrap_or(false) {
            Ok(ConvexResult::Combined(combined))
        } else {
            Ok(ConvexResult::Undefined)
        }
    }

    /// One of the four coherent binary operations on disjoint pure states of
    /// a single elementary system.
    pub fn coherent_combine(
        &self,
        other: &EpistemicState,
        op: CoherentOp,
    ) -> Result<EpistemicState, OnticError> {
        self.check_shape(other)?;
        if self.shape.n_systems() != 1 {
            return Err(OnticError::NotSingleSystem);
        }
        if !self.is_pure() || !other.is_pure() {
            return Err(OnticError::NotPure);
        }
        if !self.members.is_disjoint(&other.members) {
            return Err(OnticError::NotDisjoint);
        }
        let (a, b) = {
            let v = self.members.indices();
            (v[0], v[1])
        };
        let (c, d) = {
            let v = other.members.indices();
            (v[0], v[1])
        };
        let picked = match op {
            CoherentOp::LowLow => [a, c],
            CoherentOp::HighHigh => [b, d],
            CoherentOp::HighLow => [b, c],
            CoherentOp::LowHigh => [a, d],
        };
        EpistemicState::new(self.shape, &picked)
    }

    fn check_shape(&self, other: &EpistemicState) -> Result<(), OnticError> {
        if self.shape != other.shape {
            return Err(OnticError::ShapeMismatch(
                self.shape.n_systems(),
                other.shape.n_systems(),
            ));
        }
        Ok(())
    }
}

impl fmt::Debug for EpistemicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EpistemicState(n={}, {})", self.shape.n_systems(), self)
    }
}

/// Renders in the script literal syntax: `1|3` for one system,
/// `(1,1)|(2,2)` for composites.
impl fmt::Display for EpistemicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.shape.n_systems();
        for (k, m) in self.members.iter().enumerate() {
            if k > 0 {
                write!(f, "|")?;
            }
            let coords = OnticIndex(m).coords(self.shape);
            if n == 1 {
                write!(f, "{}", coords[0])?;
            } else {
                write!(f, "(")?;
                for (j, c) in coords.iter().enumerate() {
                    if j > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Shape-aware cell-set helpers shared by the validity and measurement code.
// ---------------------------------------------------------------------------

/// Cells of `shape` whose coordinate at `system` (1-based) lies in `values`
/// (0-based cell values `0..4`).
pub(crate) fn cylinder(shape: SystemShape, system: usize, values: &[u16]) -> CellSet {
    let n = shape.n_systems();
    let shift = 2 * (n - system);
    let mut set = CellSet::EMPTY;
    for i in 0..shape.ontic_count() as u16 {
        let v = (i >> shift) & 0b11;
        if values.contains(&v) {
            set.insert(i);
        }
    }
    set
}

/// Apply a permutation of the single-system cell values (`image[v]` for
/// 0-based `v`) at one subsystem position.
pub(crate) fn apply_local_at(
    shape: SystemShape,
    set: &CellSet,
    system: usize,
    image: &[u16; 4],
) -> CellSet {
    let n = shape.n_systems();
    let shift = 2 * (n - system);
    let mut out = CellSet::EMPTY;
    for i in set.iter() {
        let v = (i >> shift) & 0b11;
        let rest = i & !(0b11 << shift);
        out.insert(rest | (image[v as usize] << shift));
    }
    out
}

/// Projection of a cell set onto a list of subsystems (1-based, in order),
/// as a cell set of the smaller shape.
pub(crate) fn project(shape: SystemShape, set: &CellSet, keep: &[usize]) -> CellSet {
    let n = shape.n_systems();
    let mut out = CellSet::EMPTY;
    for i in set.iter() {
        let mut idx = 0u16;
        for &k in keep {
            idx = (idx << 2) | ((i >> (2 * (n - k))) & 0b11);
        }
        out.insert(idx);
    }
    out
}

/// Inverse of [`project`] against a fixed complement section: the cells of
/// `shape` whose `systems`-coordinates form a member of `block` (a set on
/// the small shape) and whose remaining coordinates form a member of `rest`
/// (a set on the complementary shape, subsystems ascending).
pub(crate) fn weave(
    shape: SystemShape,
    systems: &[usize],
    block: &CellSet,
    rest: &CellSet,
) -> CellSet {
    let n = shape.n_systems();
    let others: Vec<usize> = (1..=n).filter(|s| !systems.contains(s)).collect();
    let mut out = CellSet::EMPTY;
    for i in 0..shape.ontic_count() as u16 {
        let mut sub = 0u16;
        for &k in systems {
            sub = (sub << 2) | ((i >> (2 * (n - k))) & 0b11);
        }
        if !block.contains(sub) {
            continue;
        }
        let mut comp = 0u16;
        for &k in &others {
            comp = (comp << 2) | ((i >> (2 * (n - k))) & 0b11);
        }
        if others.is_empty() || rest.contains(comp) {
            out.insert(i);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validity::ValidityChecker;
    use proptest::prelude::*;

    fn shape(n: usize) -> SystemShape {
        SystemShape::new(n).unwrap()
    }

    fn st(n: usize, members: &[u16]) -> EpistemicState {
        EpistemicState::new(shape(n), members).unwrap()
    }

    #[test]
    fn make_state_examples() {
        let s = st(1, &[0, 1]);
        assert_eq!(s.members().indices(), vec![0, 1]);

        // (1,1),(2,2),(3,3),(4,4) encode to 0,5,10,15
        let d = EpistemicState::from_tuples(shape(2), &[&[1, 1], &[2, 2], &[3, 3], &[4, 4]])
            .unwrap();
        assert_eq!(d.members().indices(), vec![0, 5, 10, 15]);

        assert_eq!(
            EpistemicState::new(shape(1), &[4]),
            Err(OnticError::IndexOutOfRange { index: 4, n: 1 })
        );
        assert_eq!(
            EpistemicState::new(shape(1), &[]),
            Err(OnticError::EmptyMembers)
        );
        // duplicates collapse
        assert_eq!(st(1, &[2, 2, 1]).size(), 2);
    }

    #[test]
    fn encoding_round_trip_all_n() {
        for n in 1..=3 {
            let sh = shape(n);
            for i in 0..sh.ontic_count() as u16 {
                let coords = OnticIndex(i).coords(sh);
                assert_eq!(OnticIndex::from_coords(sh, &coords).unwrap().0, i);
            }
        }
    }

    #[test]
    fn marginal_of_diagonal_is_fully_mixed() {
        let d = st(2, &[0, 5, 10, 15]);
        let mb = d.marginal(&[2]).unwrap();
        assert_eq!(mb, EpistemicState::fully_mixed(shape(1)));
        let ma = d.marginal(&[1]).unwrap();
        assert_eq!(ma, EpistemicState::fully_mixed(shape(1)));
    }

    #[test]
    fn marginal_of_product_recovers_factor() {
        // (1v2).(2v3) -> marginal on A is 1v2
        let a = st(1, &[0, 1]);
        let b = st(1, &[1, 2]);
        let p = a.conjoin(&b).unwrap();
        assert_eq!(p.marginal(&[1]).unwrap(), a);
        assert_eq!(p.marginal(&[2]).unwrap(), b);
        assert!(p.marginal(&[]).is_err());
    }

    #[test]
    fn conjoin_examples() {
        let a = st(1, &[0, 1]);
        let p = a.conjoin(&a).unwrap();
        assert_eq!(p.members().indices(), vec![0, 1, 4, 5]);

        let mixed = EpistemicState::fully_mixed(shape(1));
        let c = mixed.conjoin(&st(1, &[0, 2])).unwrap();
        assert_eq!(c.size(), 8);

        let s1 = st(1, &[3]);
        let s2 = st(1, &[0]);
        assert_eq!(s1.conjoin(&s2).unwrap().members().indices(), vec![12]);
    }

    #[test]
    fn fidelity_four_values() {
        let s12 = st(1, &[0, 1]);
        let s34 = st(1, &[2, 3]);
        let s13 = st(1, &[0, 2]);
        let mixed = EpistemicState::fully_mixed(shape(1));
        assert_eq!(s12.fidelity(&s34).unwrap(), 0.0);
        assert_eq!(s12.fidelity(&s13).unwrap(), 0.5);
        assert!((s12.fidelity(&mixed).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(s12.fidelity(&s12).unwrap(), 1.0);
        assert!(s12.fidelity(&st(2, &[0])).is_err());
    }

    #[test]
    fn convex_combination_cases() {
        let mut checker = ValidityChecker::new();
        let s12 = st(1, &[0, 1]);
        let s34 = st(1, &[2, 3]);
        let s13 = st(1, &[0, 2]);
        assert_eq!(
            EpistemicState::convex_combine(&[s12, s34], &mut checker).unwrap(),
            ConvexResult::Combined(EpistemicState::fully_mixed(shape(1)))
        );
        assert_eq!(
            EpistemicState::convex_combine(&[s12, s13], &mut checker).unwrap(),
            ConvexResult::Undefined
        );
        // N=2: (1v2).(1v2) +cx (3v4).(3v4) is the correlated mixed state
        let lo = st(1, &[0, 1]);
        let hi = st(1, &[2, 3]);
        let left = lo.conjoin(&lo).unwrap();
        let right = hi.conjoin(&hi).unwrap();
        match EpistemicState::convex_combine(&[left, right], &mut checker).unwrap() {
            ConvexResult::Combined(c) => {
                assert_eq!(c.size(), 8);
                assert_eq!(c.members().indices(), vec![0, 1, 4, 5, 10, 11, 14, 15]);
            }
            ConvexResult::Undefined => panic!("expected a defined combination"),
        }
    }

    /// The twelve stated outcomes of the coherent operations, frozen.
    #[test]
    fn coherent_op_ledger() {
        let s12 = st(1, &[0, 1]);
        let s34 = st(1, &[2, 3]);
        let s13 = st(1, &[0, 2]);
        let s24 = st(1, &[1, 3]);
        let s23 = st(1, &[1, 2]);
        let s14 = st(1, &[0, 3]);
        let table: [(EpistemicState, EpistemicState, [EpistemicState; 4]); 3] = [
            (s12, s34, [s13, s24, s23, s14]),
            (s13, s24, [s12, s34, s23, s14]),
            (s23, s14, [s12, s34, s13, s24]),
        ];
        for (a, b, expect) in table {
            for (op, want) in CoherentOp::ALL.into_iter().zip(expect) {
                assert_eq!(a.coherent_combine(&b, op).unwrap(), want, "{a} {op} {b}");
            }
        }
    }

    #[test]
    fn coherent_op_symmetries() {
        let pairs = [
            (st(1, &[0, 1]), st(1, &[2, 3])),
            (st(1, &[0, 2]), st(1, &[1, 3])),
            (st(1, &[1, 2]), st(1, &[0, 3])),
        ];
        for (a, b) in pairs {
            for (x, y) in [(a, b), (b, a)] {
                use CoherentOp::*;
                assert_eq!(
                    x.coherent_combine(&y, LowLow).unwrap(),
                    y.coherent_combine(&x, LowLow).unwrap()
                );
                assert_eq!(
                    x.coherent_combine(&y, HighHigh).unwrap(),
                    y.coherent_combine(&x, HighHigh).unwrap()
                );
                assert_eq!(
                    x.coherent_combine(&y, HighLow).unwrap(),
                    y.coherent_combine(&x, LowHigh).unwrap()
                );
            }
        }
        // +3 is not commutative
        let s12 = st(1, &[0, 1]);
        let s34 = st(1, &[2, 3]);
        assert_eq!(
            s12.coherent_combine(&s34, CoherentOp::HighLow).unwrap(),
            st(1, &[1, 2])
        );
        assert_eq!(
            s34.coherent_combine(&s12, CoherentOp::HighLow).unwrap(),
            st(1, &[0, 3])
        );
    }

    #[test]
    fn coherent_op_error_paths() {
        let s12 = st(1, &[0, 1]);
        let s13 = st(1, &[0, 2]);
        let mixed = EpistemicState::fully_mixed(shape(1));
        assert_eq!(
            s12.coherent_combine(&s13, CoherentOp::LowLow),
            Err(OnticError::NotDisjoint)
        );
        assert_eq!(
            s12.coherent_combine(&mixed, CoherentOp::LowLow),
            Err(OnticError::NotPure)
        );
        let d = st(2, &[0, 5, 10, 15]);
        assert_eq!(
            d.coherent_combine(&d, CoherentOp::LowLow),
            Err(OnticError::NotSingleSystem)
        );
    }

    #[test]
    fn purity_by_size() {
        assert!(st(1, &[0, 1]).is_pure());
        assert!(!EpistemicState::fully_mixed(shape(1)).is_pure());
        assert!(st(2, &[0, 5, 10, 15]).is_pure());
        assert!(st(2, &[0, 1, 4, 5, 10, 11, 14, 15]).size() == 8);
    }

    #[test]
    fn display_round_trips_notation() {
        assert_eq!(st(1, &[0, 2]).to_string(), "1|3");
        assert_eq!(st(2, &[0, 5]).to_string(), "(1,1)|(2,2)");
    }

    proptest! {
        /// fidelity is symmetric, 1 on the diagonal, 0 iff disjoint.
        #[test]
        fn fidelity_properties(a in 1u16..16, b in 1u16..16) {
            let sh = shape(1);
            let to_state = |bits: u16| {
                let mut m = vec![];
                for i in 0..4 {
                    if bits >> i & 1 == 1 { m.push(i as u16); }
                }
                EpistemicState::new(sh, &m).unwrap()
            };
            let (s, t) = (to_state(a), to_state(b));
            prop_assert_eq!(s.fidelity(&t).unwrap(), t.fidelity(&s).unwrap());
            prop_assert_eq!(s.fidelity(&s).unwrap(), 1.0);
            prop_assert_eq!(
                s.fidelity(&t).unwrap() == 0.0,
                s.is_disjoint(&t).unwrap()
            );
        }

        /// marginals of a conjunction recover both factors.
        #[test]
        fn conjoin_marginals(a in 1u16..16, b in 1u16..16) {
            let sh = shape(1);
            let to_state = |bits: u16| {
                let mut m = vec![];
                for i in 0..4 {
                    if bits >> i & 1 == 1 { m.push(i as u16); }
                }
                EpistemicState::new(sh, &m).unwrap()
            };
            let (s, t) = (to_state(a), to_state(b));
            let joint = s.conjoin(&t).unwrap();
            prop_assert_eq!(joint.marginal(&[1]).unwrap(), s);
            prop_assert_eq!(joint.marginal(&[2]).unwrap(), t);
        }
    }
}
