//! The knowledge balance principle as an operational validity predicate,
//! and exhaustive catalogs of valid epistemic states.
//!
//! A subset `S` of the ontic space of `N` systems is *valid* when three
//! conditions hold:
//!
//! - **V1** — `|S| = 2^(2N-k)` for an integer number of answered questions
//!   `k` with `0 <= k <= N` (knowledge never exceeds ignorance);
//! - **V2** — the marginal of `S` on every nonempty proper subsystem subset
//!   is itself valid;
//! - **V3** — `S` is closed under measurement updates: for every elementary
//!   subsystem and every canonical two-block partition of its four cell
//!   values, each outcome with nonempty overlap must update `S` to another
//!   valid set. The update applies the unknown disturbance
//!   `{identity, swap of the outcome pair}` at the measured position and
//!   takes the union of the images of the overlap.
//!
//! V3 is checked to a fixed point: a set is invalid exactly when some chain
//! of updates reaches a set failing V1 or V2. The checker explores that
//! closure graph once per queried set and memoizes verdicts for everything
//! it visits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ontic::{
    apply_local_at, cylinder, project, CellSet, EpistemicState, OnticError, SystemShape,
};

/// Largest system count with enumeration and validity support.
pub const MAX_CHECKED_SYSTEMS: usize = 3;

/// Catalog file format version.
pub const CATALOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ValidityError {
    #[error("validity checking supports at most {MAX_CHECKED_SYSTEMS} systems, got {0}")]
    TooManySystems(usize),
    #[error(transparent)]
    Ontic(#[from] OnticError),
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("catalog format version {found} unsupported (expected {CATALOG_VERSION})")]
    VersionMismatch { found: u64 },
    #[error("catalog checksum mismatch")]
    ChecksumMismatch,
    #[error("catalog is for {found} systems, expected {expected}")]
    ShapeMismatch { found: usize, expected: usize },
    #[error(transparent)]
    Validity(#[from] ValidityError),
}

/// Number of answered canonical questions implied by a base size.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct KnowledgeCount {
    pub k: u32,
}

impl KnowledgeCount {
    /// `k = 2N - log2 |S|`; `None` when the size is not a power of two.
    pub fn of(state: &EpistemicState) -> Option<KnowledgeCount> {
        let size = state.size();
        if !size.is_power_of_two() {
            return None;
        }
        let log = size.trailing_zeros();
        let total = state.shape().canonical_questions() as u32;
        (log <= total).then_some(KnowledgeCount { k: total - log })
    }
}

/// The three canonical two-block partitions of one elementary system's four
/// cell values (0-based): `{1,2 | 3,4}`, `{1,3 | 2,4}`, `{1,4 | 2,3}`.
pub const CANONICAL_BLOCKS: [[(u16, u16); 2]; 3] = [
    [(0, 1), (2, 3)],
    [(0, 2), (1, 3)],
    [(0, 3), (1, 2)],
];

fn swap_image(a: u16, b: u16) -> [u16; 4] {
    let mut img = [0u16, 1, 2, 3];
    img.swap(a as usize, b as usize);
    img
}

/// Decides validity with memoization across queries.
pub struct ValidityChecker {
    // verdict per (n_systems - 1)
    cache: [HashMap<CellSet, bool>; MAX_CHECKED_SYSTEMS],
}

/// Outcome of [`ValidityChecker::diagnose`], naming the rule that failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    /// Base size is not `2^(2N-k)` for `0 <= k <= N`.
    InvalidV1 { size: usize },
    /// A subsystem marginal is invalid.
    InvalidV2 { subsystems: Vec<usize> },
    /// A chain of measurement updates reaches an invalid set.
    InvalidV3 {
        updates: usize,
        witness: EpistemicState,
    },
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid => write!(f, "valid"),
            Verdict::InvalidV1 { size } => write!(
                f,
                "invalid (V1): base size {size} is not 2^(2N-k) with 0 <= k <= N"
            ),
            Verdict::InvalidV2 { subsystems } => write!(
                f,
                "invalid (V2): marginal on subsystem(s) {subsystems:?} is invalid"
            ),
            Verdict::InvalidV3 { updates, witness } => write!(
                f,
                "invalid (V3): {updates} measurement update(s) reach the invalid set {witness}"
            ),
        }
    }
}

impl Default for ValidityChecker {
    fn default() -> Self {
        Self::new()
    }
}

impl ValidityChecker {
    pub fn new() -> Self {
        ValidityChecker {
            cache: Default::default(),
        }
    }

    pub fn is_valid(&mut self, state: &EpistemicState) -> Result<bool, ValidityError> {
        let n = state.shape().n_systems();
        if n > MAX_CHECKED_SYSTEMS {
            return Err(ValidityError::TooManySystems(n));
        }
        Ok(self.verdict_for(state.shape(), *state.members()))
    }

    /// Like [`Self::is_valid`] but names the failing rule.
    pub fn diagnose(&mut self, state: &EpistemicState) -> Result<Verdict, ValidityError> {
        let n = state.shape().n_systems();
        if n > MAX_CHECKED_SYSTEMS {
            return Err(ValidityError::TooManySystems(n));
        }
        let shape = state.shape();
        let root = *state.members();
        if self.verdict_for(shape, root) {
            return Ok(Verdict::Valid);
        }
        if !v1_ok(shape, &root) {
            return Ok(Verdict::InvalidV1 { size: root.len() });
        }
        if let Some(subs) = self.first_bad_marginal(shape, &root) {
            return Ok(Verdict::InvalidV2 { subsystems: subs });
        }
        // Walk the update graph breadth-first to the nearest failing set.
        let mut parent: HashMap<CellSet, (CellSet, usize)> = HashMap::new();
        let mut queue = std::collections::VecDeque::from([root]);
        parent.insert(root, (root, 0));
        while let Some(cur) = queue.pop_front() {
            let depth = parent[&cur].1;
            for u in updates_of(shape, &cur) {
                if parent.contains_key(&u) {
                    continue;
                }
                parent.insert(u, (cur, depth + 1));
                if !self.verdict_for(shape, u) {
                    let bad_here =
                        !v1_ok(shape, &u) || self.first_bad_marginal(shape, &u).is_some();
                    if bad_here {
                        return Ok(Verdict::InvalidV3 {
                            updates: depth + 1,
                            witness: EpistemicState::from_cells(shape, u)
                                .expect("updates preserve nonemptiness"),
                        });
                    }
                    queue.push_back(u);
                }
            }
        }
        unreachable!("an invalid state must reach a V1/V2 violation");
    }

    fn first_bad_marginal(&mut self, shape: SystemShape, set: &CellSet) -> Option<Vec<usize>> {
        let n = shape.n_systems();
        for mask in 1..((1u32 << n) - 1) {
            let keep: Vec<usize> = (1..=n).filter(|i| mask >> (i - 1) & 1 == 1).collect();
            let sub = project(shape, set, &keep);
            let sub_shape = SystemShape::new(keep.len()).unwrap();
            if !self.verdict_for(sub_shape, sub) {
                return Some(keep);
            }
        }
        None
    }

    /// Core decision. Explores the measurement-update closure of `root`,
    /// marks every node failing V1/V2, and declares invalid exactly the
    /// nodes from which a failing node is reachable.
    fn verdict_for(&mut self, shape: SystemShape, root: CellSet) -> bool {
        let slot = shape.n_systems() - 1;
        if let Some(&v) = self.cache[slot].get(&root) {
            return v;
        }

        let mut nodes: Vec<CellSet> = vec![root];
        let mut index: HashMap<CellSet, usize> = HashMap::from([(root, 0)]);
        // verdicts already known when the node was reached, if any
        let mut pinned: Vec<Option<bool>> = vec![None];
        let mut bad: Vec<bool> = vec![false];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new()];

        let mut cursor = 0;
        while cursor < nodes.len() {
            let cur = nodes[cursor];
            if pinned[cursor].is_some() {
                cursor += 1;
                continue;
            }
            let ok_here = v1_ok(shape, &cur) && self.first_bad_marginal(shape, &cur).is_none();
            if !ok_here {
                bad[cursor] = true;
                cursor += 1;
                continue; // no need to expand a node that already fails
            }
            for u in updates_of(shape, &cur) {
                let id = match index.get(&u) {
                    Some(&id) => id,
                    None => {
                        let id = nodes.len();
                        nodes.push(u);
                        index.insert(u, id);
                        let known = self.cache[slot].get(&u).copied();
                        pinned.push(known);
                        bad.push(known == Some(false));
                        preds.push(Vec::new());
                        id
                    }
                };
                preds[id].push(cursor);
            }
            cursor += 1;
        }

        // Propagate badness backwards through update edges.
        let mut invalid = bad.clone();
        let mut stack: Vec<usize> = (0..nodes.len()).filter(|&i| invalid[i]).collect();
        while let Some(i) = stack.pop() {
            for &p in &preds[i] {
                if !invalid[p] {
                    invalid[p] = true;
                    stack.push(p);
                }
            }
        }

        for (i, node) in nodes.iter().enumerate() {
            if pinned[i].is_none() {
                self.cache[slot].insert(*node, !invalid[i]);
            }
        }
        !invalid[0]
    }
}

fn v1_ok(shape: SystemShape, set: &CellSet) -> bool {
    let size = set.len();
    size.is_power_of_two()
        && size >= shape.pure_size()
        && size <= shape.ontic_count()
}

/// All distinct measurement updates of `set` (V3 edges): for each subsystem
/// and canonical outcome block with nonempty overlap, the union of the
/// overlap with its outcome-pair-swapped image.
fn updates_of(shape: SystemShape, set: &CellSet) -> Vec<CellSet> {
    let n = shape.n_systems();
    let mut out = Vec::new();
    for sys in 1..=n {
        for blocks in CANONICAL_BLOCKS {
            for (a, b) in blocks {
                let cyl = cylinder(shape, sys, &[a, b]);
                let inter = set.intersection(&cyl);
                if inter.is_empty() {
                    continue;
                }
                let swapped = apply_local_at(shape, &inter, sys, &swap_image(a, b));
                let update = inter.union(&swapped);
                if update != *set && !out.contains(&update) {
                    out.push(update);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

/// The enumerated registry of all valid epistemic states for one shape,
/// keyed by base size.
#[derive(Clone)]
pub struct Catalog {
    shape: SystemShape,
    version: u32,
    states_by_size: BTreeMap<u32, Vec<CellSet>>,
    index: HashSet<CellSet>,
}

impl Catalog {
    /// Enumerate every valid state of every size.
    ///
    /// For one and two systems this is a brute-force scan of all candidate
    /// subsets. For three systems the pure (size-8) states come from a
    /// constructive row search (see [`enumerate_pure_n3`]) and the mixed
    /// sizes from unions of disjoint smaller states filtered by the
    /// predicate; pass `include_n3_mixed = false` to defer those.
    pub fn enumerate(shape: SystemShape, include_n3_mixed: bool) -> Result<Catalog, ValidityError> {
        let n = shape.n_systems();
        if n > MAX_CHECKED_SYSTEMS {
            return Err(ValidityError::TooManySystems(n));
        }
        let mut checker = ValidityChecker::new();
        let mut states_by_size: BTreeMap<u32, Vec<CellSet>> = BTreeMap::new();
        fn push(map: &mut BTreeMap<u32, Vec<CellSet>>, set: CellSet) {
            map.entry(set.len() as u32).or_default().push(set);
        }

        match n {
            1 | 2 => {
                let cells = shape.ontic_count();
                let mut size = shape.pure_size();
                while size <= cells {
                    for set in subsets_of_size(cells, size) {
                        if checker.verdict_for(shape, set) {
                            push(&mut states_by_size, set);
                        }
                    }
                    size *= 2;
                }
            }
            3 => {
                let pure = enumerate_pure_n3(&mut checker);
                if include_n3_mixed {
                    let sixteens = union_step(shape, &pure, &mut checker);
                    let thirtytwos = union_step(shape, &sixteens, &mut checker);
                    for s in sixteens {
                        push(&mut states_by_size, s);
                    }
                    for s in thirtytwos {
                        push(&mut states_by_size, s);
                    }
                }
                for set in pure {
                    push(&mut states_by_size, set);
                }
                push(&mut states_by_size, CellSet::full(shape)); // zero answered questions
            }
            _ => unreachable!(),
        }

        for list in states_by_size.values_mut() {
            list.sort_by(|a, b| a.cmp_lex(b));
            list.dedup();
        }
        Ok(Catalog::from_parts(shape, states_by_size))
    }

    fn from_parts(shape: SystemShape, states_by_size: BTreeMap<u32, Vec<CellSet>>) -> Catalog {
        let index = states_by_size.values().flatten().copied().collect();
        Catalog {
            shape,
            version: CATALOG_VERSION,
            states_by_size,
            index,
        }
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn contains(&self, set: &CellSet) -> bool {
        self.index.contains(set)
    }

    pub fn contains_state(&self, state: &EpistemicState) -> bool {
        state.shape() == self.shape && self.contains(state.members())
    }

    pub fn states_of_size(&self, size: usize) -> &[CellSet] {
        self.states_by_size
            .get(&(size as u32))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// All pure (size `2^N`) states, canonically ordered.
    pub fn pure_states(&self) -> &[CellSet] {
        self.states_of_size(self.shape.pure_size())
    }

    pub fn sizes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.states_by_size
            .iter()
            .map(|(&size, v)| (size as usize, v.len()))
    }

    pub fn iter_all(&self) -> impl Iterator<Item = &CellSet> + '_ {
        self.states_by_size.values().flatten()
    }

    pub fn total(&self) -> usize {
        self.states_by_size.values().map(Vec::len).sum()
    }

    pub fn state(&self, set: &CellSet) -> EpistemicState {
        EpistemicState::from_cells(self.shape, *set).expect("catalog members are nonempty")
    }

    /// Whether two states could describe the same system for two observers:
    /// their intersection must itself be the base of a valid state.
    pub fn compatible(
        &self,
        s1: &EpistemicState,
        s2: &EpistemicState,
    ) -> Result<bool, OnticError> {
        if s1.shape() != s2.shape() {
            return Err(OnticError::ShapeMismatch(
                s1.shape().n_systems(),
                s2.shape().n_systems(),
            ));
        }
        Ok(self.contains(&s1.members().intersection(s2.members())))
    }

    // -- persistence --------------------------------------------------------

    /// Serialize to the line-record format:
    /// a header `{"format":"knowbal-catalog","version":1,"n_systems":N}`,
    /// one `{"size":S,"members":[..]}` line per state sorted by
    /// (size, lexicographic members), and a trailing
    /// `{"checksum":"sha256:.."}` line over everything above it.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = String::new();
        body.push_str(&format!(
            "{{\"format\":\"knowbal-catalog\",\"version\":{},\"n_systems\":{}}}\n",
            self.version,
            self.shape.n_systems()
        ));
        for (size, list) in &self.states_by_size {
            for set in list {
                let members: Vec<String> = set.iter().map(|i| i.to_string()).collect();
                body.push_str(&format!(
                    "{{\"size\":{},\"members\":[{}]}}\n",
                    size,
                    members.join(",")
                ));
            }
        }
        let digest = Sha256::digest(body.as_bytes());
        body.push_str(&format!("{{\"checksum\":\"sha256:{digest:x}\"}}\n"));
        body.into_bytes()
    }

    pub fn save(&self, path: &Path) -> Result<(), CatalogError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Catalog, CatalogError> {
        let text = std::str::from_utf8(bytes).map_err(|e| CatalogError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < 2 {
            return Err(CatalogError::Parse {
                line: lines.len(),
                message: "truncated catalog (need header and checksum)".into(),
            });
        }
        let parse_line = |i: usize| -> Result<serde_json::Value, CatalogError> {
            serde_json::from_str(lines[i]).map_err(|e| CatalogError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        };

        let header = parse_line(0)?;
        if header["format"].as_str() != Some("knowbal-catalog") {
            return Err(CatalogError::Parse {
                line: 1,
                message: "missing knowbal-catalog format tag".into(),
            });
        }
        let version = header["version"].as_u64().unwrap_or(0);
        if version != CATALOG_VERSION as u64 {
            return Err(CatalogError::VersionMismatch { found: version });
        }
        let n = header["n_systems"].as_u64().ok_or(CatalogError::Parse {
            line: 1,
            message: "missing n_systems".into(),
        })? as usize;
        let shape = SystemShape::new(n).map_err(|e| CatalogError::Parse {
            line: 1,
            message: e.to_string(),
        })?;

        let last = lines.len() - 1;
        let trailer = parse_line(last)?;
        let stated = trailer["checksum"].as_str().ok_or(CatalogError::Parse {
            line: last + 1,
            message: "missing checksum line".into(),
        })?;
        let body_len = text.len() - lines[last].len() - 1;
        let digest = Sha256::digest(&text.as_bytes()[..body_len]);
        if stated != format!("sha256:{digest:x}") {
            return Err(CatalogError::ChecksumMismatch);
        }

        let mut states_by_size: BTreeMap<u32, Vec<CellSet>> = BTreeMap::new();
        for i in 1..last {
            let rec = parse_line(i)?;
            let members = rec["members"].as_array().ok_or(CatalogError::Parse {
                line: i + 1,
                message: "missing members array".into(),
            })?;
            let mut set = CellSet::EMPTY;
            for m in members {
                let v = m.as_u64().ok_or(CatalogError::Parse {
                    line: i + 1,
                    message: "bad member index".into(),
                })?;
                if v >= shape.ontic_count() as u64 {
                    return Err(CatalogError::Parse {
                        line: i + 1,
                        message: format!("member {v} out of range"),
                    });
                }
                set.insert(v as u16);
            }
            let size = rec["size"].as_u64().unwrap_or(0) as usize;
            if size != set.len() {
                return Err(CatalogError::Parse {
                    line: i + 1,
                    message: "size field disagrees with members".into(),
                });
            }
            states_by_size
                .entry(size as u32)
                .or_default()
                .push(set);
        }
        for list in states_by_size.values_mut() {
            list.sort_by(|a, b| a.cmp_lex(b));
            list.dedup();
        }
        Ok(Catalog::from_parts(shape, states_by_size))
    }

    pub fn load(path: &Path) -> Result<Catalog, CatalogError> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

/// All size-`k` subsets of `{0, .., cells-1}` as cell sets (Gosper's hack).
fn subsets_of_size(cells: usize, k: usize) -> Vec<CellSet> {
    assert!(cells <= 16, "brute-force scan is for small spaces");
    let mut out = Vec::new();
    if k == 0 || k > cells {
        return out;
    }
    let limit: u32 = 1 << cells;
    let mut mask: u32 = (1 << k) - 1;
    while mask < limit {
        let mut set = CellSet::EMPTY;
        for i in 0..cells as u16 {
            if mask >> i & 1 == 1 {
                set.insert(i);
            }
        }
        out.push(set);
        // next subset with the same popcount
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        if r >= limit || c == 0 {
            break;
        }
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    out
}

/// Constructive enumeration of the pure (size-8) states of three systems.
///
/// A candidate is organized by its rows over system A. V1 applied to the
/// single-system update sets forces exactly two row layouts:
///
/// - two rows of four cells that are either equal (a product with a pure
///   A-marginal) or disjoint with a valid size-8 union over BC;
/// - four rows of two cells, pairwise disjoint, with every pairwise union a
///   valid pure BC state.
///
/// Candidates from both layouts are then filtered by the full predicate.
pub fn enumerate_pure_n3(checker: &mut ValidityChecker) -> Vec<CellSet> {
    let shape2 = SystemShape::new(2).unwrap();
    let shape3 = SystemShape::new(3).unwrap();
    let n2 = Catalog::enumerate(shape2, true).expect("two-system catalog");
    let pure2: Vec<CellSet> = n2.states_of_size(4).to_vec();
    let eight2: Vec<CellSet> = n2.states_of_size(8).to_vec();

    let dense = |set: &CellSet| -> u16 {
        let mut m = 0u16;
        for i in set.iter() {
            m |= 1 << i;
        }
        m
    };
    let pure2_masks: Vec<u16> = pure2.iter().map(dense).collect();
    let pure2_lookup: HashSet<u16> = pure2_masks.iter().copied().collect();

    let assemble = |rows: &[(u16, u16)]| -> CellSet {
        // rows: (a_value 0-based, 16-bit BC mask)
        let mut set = CellSet::EMPTY;
        for &(a, mask) in rows {
            for bc in 0..16u16 {
                if mask >> bc & 1 == 1 {
                    set.insert(a * 16 + bc);
                }
            }
        }
        set
    };

    let mut found: Vec<CellSet> = Vec::new();
    let mut push = |checker: &mut ValidityChecker, set: CellSet| {
        if checker.verdict_for(shape3, set) {
            found.push(set);
        }
    };

    // Layout 1: pure A-marginal {a, b}.
    for a in 0..4u16 {
        for b in (a + 1)..4 {
            for p in &pure2_masks {
                push(checker, assemble(&[(a, *p), (b, *p)]));
            }
            for e in &eight2 {
                let cells: Vec<u16> = e.iter().collect();
                // all 4-of-8 splits; the complement fills the other row
                for pick in subsets_of_size(8, 4) {
                    let mut top = 0u16;
                    let mut bottom = 0u16;
                    for (j, &c) in cells.iter().enumerate() {
                        if pick.contains(j as u16) {
                            top |= 1 << c;
                        } else {
                            bottom |= 1 << c;
                        }
                    }
                    push(checker, assemble(&[(a, top), (b, bottom)]));
                }
            }
        }
    }

    // Layout 2: full A-marginal, four rows of two.
    // partner[t] = BC 2-subsets u disjoint from t with t|u a valid pure state
    let two_subsets: Vec<u16> = subsets_of_size(16, 2).iter().map(dense).collect();
    let mut partners: HashMap<u16, Vec<u16>> = HashMap::new();
    for &t in &two_subsets {
        let mut list = Vec::new();
        for &u in &two_subsets {
            if t & u == 0 && pure2_lookup.contains(&(t | u)) {
                list.push(u);
            }
        }
        partners.insert(t, list);
    }
    let compatible = |x: u16, y: u16, partners: &HashMap<u16, Vec<u16>>| -> bool {
        x & y == 0 && partners[&x].contains(&y)
    };
    for &t1 in &two_subsets {
        for &t2 in &partners[&t1] {
            for &t3 in &partners[&t1] {
                if !compatible(t2, t3, &partners) {
                    continue;
                }
                for &t4 in &partners[&t1] {
                    if compatible(t2, t4, &partners) && compatible(t3, t4, &partners) {
                        push(checker, assemble(&[(0, t1), (1, t2), (2, t3), (3, t4)]));
                    }
                }
            }
        }
    }

    found.sort_by(|a, b| a.cmp_lex(b));
    found.dedup();
    found
}

/// One doubling step of the mixed-state generator: all unions of two
/// disjoint valid states of equal size, filtered by the predicate. Every
/// valid state of twice the size decomposes this way (it is a disjoint
/// union of two valid halves), so the step is exhaustive.
fn union_step(
    shape: SystemShape,
    states: &[CellSet],
    checker: &mut ValidityChecker,
) -> Vec<CellSet> {
    let mut seen: HashSet<CellSet> = HashSet::new();
    let mut out = Vec::new();
    for (i, a) in states.iter().enumerate() {
        for b in states.iter().skip(i + 1) {
            if !a.is_disjoint(b) {
                continue;
            }
            let u = a.union(b);
            if seen.insert(u) && checker.verdict_for(shape, u) {
                out.push(u);
            }
        }
    }
    out.sort_by(|a, b| a.cmp_lex(b));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontic::EpistemicState;

    fn shape(n: usize) -> SystemShape {
        SystemShape::new(n).unwrap()
    }

    fn st(n: usize, members: &[u16]) -> EpistemicState {
        EpistemicState::new(shape(n), members).unwrap()
    }

    fn tuples(n: usize, t: &[&[u16]]) -> EpistemicState {
        EpistemicState::from_tuples(shape(n), t).unwrap()
    }

    #[test]
    fn singleton_violates_balance() {
        let mut c = ValidityChecker::new();
        assert!(!c.is_valid(&st(1, &[0])).unwrap());
        assert_eq!(
            c.diagnose(&st(1, &[0])).unwrap(),
            Verdict::InvalidV1 { size: 1 }
        );
        assert!(c.is_valid(&st(1, &[0, 1])).unwrap());
        assert!(c.is_valid(&EpistemicState::fully_mixed(shape(1))).unwrap());
        assert!(!c.is_valid(&st(1, &[0, 1, 2])).unwrap());
    }

    /// Brute force over the 15 nonempty subsets for one system: exactly six
    /// pure states plus the fully mixed state are valid.
    #[test]
    fn one_system_catalog() {
        let cat = Catalog::enumerate(shape(1), true).unwrap();
        assert_eq!(cat.states_of_size(2).len(), 6);
        assert_eq!(cat.states_of_size(4).len(), 1);
        assert_eq!(cat.total(), 7);
        let pure: Vec<Vec<u16>> = cat.pure_states().iter().map(|s| s.indices()).collect();
        assert_eq!(
            pure,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
    }

    /// Hand-executed V3 oracle: the state (1.1)v(2.2)v(3.1)v(4.2) has valid
    /// size and valid marginals, but measuring {1v3|2v4} on A with outcome
    /// 1v3 leaves {(1,1),(3,1)}, whose swap-image is itself, so the update
    /// has size 2 and fails V1.
    #[test]
    fn update_closure_rejects_two_to_one_correlation() {
        let s = tuples(2, &[&[1, 1], &[2, 2], &[3, 1], &[4, 2]]);
        let mut c = ValidityChecker::new();
        // size 4 is fine and both marginals are valid...
        assert!(s.size() == 4);
        assert!(c.is_valid(&s.marginal(&[1]).unwrap()).unwrap());
        assert!(c.is_valid(&s.marginal(&[2]).unwrap()).unwrap());
        // ...yet the state is invalid, and specifically via V3.
        assert!(!c.is_valid(&s).unwrap());
        match c.diagnose(&s).unwrap() {
            Verdict::InvalidV3 { updates, witness } => {
                assert_eq!(updates, 1);
                assert_eq!(witness.size(), 2);
            }
            v => panic!("expected a V3 failure, got {v}"),
        }
    }

    #[test]
    fn column_state_fails_on_marginal() {
        // (1.1)v(2.1)v(3.1)v(4.1): B is known to be 1
        let s = tuples(2, &[&[1, 1], &[2, 1], &[3, 1], &[4, 1]]);
        let mut c = ValidityChecker::new();
        assert_eq!(
            c.diagnose(&s).unwrap(),
            Verdict::InvalidV2 {
                subsystems: vec![2]
            }
        );
    }

    #[test]
    fn diagonal_triple_is_invalid() {
        let s = tuples(3, &[&[1, 1, 1], &[2, 2, 2], &[3, 3, 3], &[4, 4, 4]]);
        let mut c = ValidityChecker::new();
        assert_eq!(c.diagnose(&s).unwrap(), Verdict::InvalidV1 { size: 4 });
    }

    #[test]
    fn four_systems_unsupported() {
        let s = st(4, &[0, 1]);
        let mut c = ValidityChecker::new();
        assert!(matches!(
            c.is_valid(&s),
            Err(ValidityError::TooManySystems(4))
        ));
    }

    #[test]
    fn ghz_form_is_valid() {
        let ghz = tuples(
            3,
            &[
                &[1, 1, 1],
                &[1, 2, 2],
                &[2, 1, 2],
                &[2, 2, 1],
                &[3, 3, 3],
                &[3, 4, 4],
                &[4, 3, 4],
                &[4, 4, 3],
            ],
        );
        let mut c = ValidityChecker::new();
        assert!(c.is_valid(&ghz).unwrap());
        // pairwise marginals are the correlated mixed state
        for pair in [[1usize, 2], [1, 3], [2, 3]] {
            let m = ghz.marginal(&pair).unwrap();
            assert_eq!(m.members().indices(), vec![0, 1, 4, 5, 10, 11, 14, 15]);
        }
    }

    #[test]
    fn catalog_round_trip() {
        let cat = Catalog::enumerate(shape(2), true).unwrap();
        let bytes = cat.to_bytes();
        let back = Catalog::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.total(), cat.total());
    }

    #[test]
    fn catalog_bad_inputs() {
        let cat = Catalog::enumerate(shape(1), true).unwrap();
        let bytes = cat.to_bytes();

        // version mismatch
        let tampered = String::from_utf8(bytes.clone())
            .unwrap()
            .replace("\"version\":1", "\"version\":9");
        assert!(matches!(
            Catalog::from_bytes(tampered.as_bytes()),
            Err(CatalogError::VersionMismatch { found: 9 })
        ));

        // truncation drops the checksum line
        let text = String::from_utf8(bytes.clone()).unwrap();
        let cut = text.rsplit_once('\n').unwrap().0.rsplit_once('\n').unwrap().0;
        assert!(Catalog::from_bytes(cut.as_bytes()).is_err());

        // flipped body byte
        let mut corrupt = bytes;
        let mid = corrupt.len() / 2;
        corrupt[mid] = corrupt[mid].wrapping_add(1);
        assert!(Catalog::from_bytes(&corrupt).is_err());
    }

    #[test]
    fn knowledge_count_matches_sizes() {
        assert_eq!(KnowledgeCount::of(&st(1, &[0, 1])), Some(KnowledgeCount { k: 1 }));
        assert_eq!(
            KnowledgeCount::of(&EpistemicState::fully_mixed(shape(1))),
            Some(KnowledgeCount { k: 0 })
        );
        assert_eq!(KnowledgeCount::of(&st(1, &[0, 1, 2])), None);
    }
}
