//! Reversible transformations: permutations of the ontic space, the group
//! of *allowed* (validity-preserving) permutations, and the
//! rotation/reflection split for a single elementary system.
//!
//! Many-to-one maps are forbidden outright (they would concentrate
//! knowledge), so the reversible transformations are exactly the
//! permutations that carry every valid epistemic state to a valid one. For
//! one system that is all of the 24 permutations of four cells; for a pair
//! it is a strict subgroup of the permutations of sixteen cells, found here
//! both by generator closure and by backtracking search over images.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ontic::{CellSet, EpistemicState, OnticIndex, SystemShape};
use crate::validity::Catalog;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("image of length {0} is not a bijection on the ontic space")]
    NotABijection(usize),
    #[error("shape mismatch: {0} vs {1} system(s)")]
    ShapeMismatch(usize, usize),
    #[error("expected one single-system permutation per system ({expected}), got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("cycle notation parse error: {0}")]
    BadCycles(String),
    #[error("generator {0} is not an allowed transformation")]
    DisallowedGenerator(usize),
    #[error("classification is defined for a single elementary system")]
    NotSingleSystem,
    #[error("allowed-group enumeration supports at most 2 systems, got {0}")]
    TooManySystems(usize),
    #[error("subsystem index {0} out of range or repeated")]
    BadSubsystem(usize),
    #[error("group file error: {0}")]
    File(String),
}

/// A bijection of the ontic space; `image[i]` is where cell `i` goes.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    shape: SystemShape,
    image: Vec<u16>,
}

impl Permutation {
    pub fn identity(shape: SystemShape) -> Self {
        Permutation {
            shape,
            image: (0..shape.ontic_count() as u16).collect(),
        }
    }

    pub fn from_image(shape: SystemShape, image: Vec<u16>) -> Result<Self, TransformError> {
        let n = shape.ontic_count();
        let mut seen = vec![false; n];
        if image.len() != n {
            return Err(TransformError::NotABijection(image.len()));
        }
        for &v in &image {
            if (v as usize) >= n || seen[v as usize] {
                return Err(TransformError::NotABijection(image.len()));
            }
            seen[v as usize] = true;
        }
        Ok(Permutation { shape, image })
    }

    /// Parse single-system cycle notation over the cell labels `1..=4`,
    /// e.g. `(123)(4)` or `(12)(34)`. Omitted labels are fixed points.
    pub fn from_cycles(text: &str) -> Result<Self, TransformError> {
        let shape = SystemShape::new(1).unwrap();
        let mut image: [Option<u16>; 4] = [None; 4];
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(TransformError::BadCycles("empty".into()));
        }
        let bytes = compact.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] != b'(' {
                return Err(TransformError::BadCycles(format!(
                    "expected '(' at byte {i}"
                )));
            }
            let mut cycle = Vec::new();
            i += 1;
            while i < bytes.len() && bytes[i] != b')' {
                let d = bytes[i];
                if !(b'1'..=b'4').contains(&d) {
                    return Err(TransformError::BadCycles(format!(
                        "expected a cell label 1..4, got '{}'",
                        d as char
                    )));
                }
                cycle.push((d - b'1') as u16);
                i += 1;
            }
            if i == bytes.len() {
                return Err(TransformError::BadCycles("unclosed cycle".into()));
            }
            i += 1; // ')'
            if cycle.is_empty() {
                return Err(TransformError::BadCycles("empty cycle".into()));
            }
            for w in 0..cycle.len() {
                let from = cycle[w] as usize;
                let to = cycle[(w + 1) % cycle.len()];
                if image[from].is_some() {
                    return Err(TransformError::BadCycles(format!(
                        "cell {} appears twice",
                        from + 1
                    )));
                }
                image[from] = Some(to);
            }
        }
        let full: Vec<u16> = image
            .iter()
            .enumerate()
            .map(|(i, v)| v.unwrap_or(i as u16))
            .collect();
        Permutation::from_image(shape, full)
    }

    /// Cycle notation for a single system: nontrivial cycles first (by
    /// smallest member), then fixed points, labels `1..=4`.
    pub fn to_cycles(&self) -> String {
        assert_eq!(self.shape.n_systems(), 1, "cycle notation is single-system");
        let mut seen = [false; 4];
        let mut cycles: Vec<Vec<u16>> = Vec::new();
        let mut fixed: Vec<u16> = Vec::new();
        for start in 0..4u16 {
            if seen[start as usize] {
                continue;
            }
            let mut cur = start;
            let mut cyc = Vec::new();
            loop {
                seen[cur as usize] = true;
                cyc.push(cur + 1);
                cur = self.image[cur as usize];
                if cur == start {
                    break;
                }
            }
            if cyc.len() == 1 {
                fixed.push(cyc[0]);
            } else {
                cycles.push(cyc);
            }
        }
        let mut out = String::new();
        for c in cycles {
            out.push('(');
            for v in c {
                out.push_str(&v.to_string());
            }
            out.push(')');
        }
        for v in fixed {
            out.push_str(&format!("({v})"));
        }
        out
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn image(&self) -> &[u16] {
        &self.image
    }

    pub fn apply_index(&self, i: u16) -> u16 {
        self.image[i as usize]
    }

    pub fn apply_cells(&self, set: &CellSet) -> CellSet {
        let mut out = CellSet::EMPTY;
        for i in set.iter() {
            out.insert(self.image[i as usize]);
        }
        out
    }

    pub fn apply_state(&self, s: &EpistemicState) -> Result<EpistemicState, TransformError> {
        if s.shape() != self.shape {
            return Err(TransformError::ShapeMismatch(
                s.shape().n_systems(),
                self.shape.n_systems(),
            ));
        }
        Ok(
            EpistemicState::from_cells(self.shape, self.apply_cells(s.members()))
                .expect("bijections preserve nonemptiness"),
        )
    }

    /// Function composition: `compose(p, q)` applies `q` first, then `p`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation, TransformError> {
        if self.shape != other.shape {
            return Err(TransformError::ShapeMismatch(
                self.shape.n_systems(),
                other.shape.n_systems(),
            ));
        }
        let image = other
            .image
            .iter()
            .map(|&v| self.image[v as usize])
            .collect();
        Ok(Permutation {
            shape: self.shape,
            image,
        })
    }

    pub fn invert(&self) -> Permutation {
        let mut image = vec![0u16; self.image.len()];
        for (i, &v) in self.image.iter().enumerate() {
            image[v as usize] = i as u16;
        }
        Permutation {
            shape: self.shape,
            image,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &v)| i as u16 == v)
    }

    /// Sign of the permutation: `true` for even.
    pub fn is_even(&self) -> bool {
        let n = self.image.len();
        let mut seen = vec![false; n];
        let mut transpositions = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut cur = start;
            while !seen[cur] {
                seen[cur] = true;
                cur = self.image[cur] as usize;
                len += 1;
            }
            transpositions += len - 1;
        }
        transpositions % 2 == 0
    }

    /// Product action of independent single-system permutations,
    /// `(x1, .., xN) -> (p1 x1, .., pN xN)`.
    pub fn embed_local(
        shape: SystemShape,
        locals: &[Permutation],
    ) -> Result<Permutation, TransformError> {
        let n = shape.n_systems();
        if locals.len() != n || locals.iter().any(|p| p.shape.n_systems() != 1) {
            return Err(TransformError::WrongArity {
                expected: n,
                got: locals.len(),
            });
        }
        let mut image = Vec::with_capacity(shape.ontic_count());
        for i in 0..shape.ontic_count() as u16 {
            let coords = OnticIndex(i).coords(shape);
            let mapped: Vec<u16> = coords
                .iter()
                .zip(locals)
                .map(|(&c, p)| p.image[(c - 1) as usize] + 1)
                .collect();
            image.push(OnticIndex::from_coords(shape, &mapped).unwrap().0);
        }
        Ok(Permutation { shape, image })
    }

    /// Embed a permutation of a subsystem group at the given (1-based,
    /// distinct) positions, acting as the identity elsewhere.
    pub fn embed_at(
        &self,
        systems: &[usize],
        full_shape: SystemShape,
    ) -> Result<Permutation, TransformError> {
        let n = full_shape.n_systems();
        let k = self.shape.n_systems();
        if systems.len() != k {
            return Err(TransformError::WrongArity {
                expected: k,
                got: systems.len(),
            });
        }
        let mut seen = vec![false; n];
        for &s in systems {
            if s == 0 || s > n || seen[s - 1] {
                return Err(TransformError::BadSubsystem(s));
            }
            seen[s - 1] = true;
        }
        let mut image = Vec::with_capacity(full_shape.ontic_count());
        for i in 0..full_shape.ontic_count() as u16 {
            let coords = OnticIndex(i).coords(full_shape);
            let sub: Vec<u16> = systems.iter().map(|&s| coords[s - 1]).collect();
            let sub_idx = OnticIndex::from_coords(self.shape, &sub).unwrap().0;
            let mapped = OnticIndex(self.image[sub_idx as usize]).coords(self.shape);
            let mut out = coords;
            for (j, &s) in systems.iter().enumerate() {
                out[s - 1] = mapped[j];
            }
            image.push(OnticIndex::from_coords(full_shape, &out).unwrap().0);
        }
        Ok(Permutation {
            shape: full_shape,
            image,
        })
    }

    /// Relabel subsystems: position `i` of the result reads position
    /// `order[i]` of the input, e.g. `&[2, 1]` swaps a pair.
    pub fn system_reorder(
        shape: SystemShape,
        order: &[usize],
    ) -> Result<Permutation, TransformError> {
        let n = shape.n_systems();
        if order.len() != n {
            return Err(TransformError::WrongArity {
                expected: n,
                got: order.len(),
            });
        }
        let mut seen = vec![false; n];
        for &s in order {
            if s == 0 || s > n || seen[s - 1] {
                return Err(TransformError::BadSubsystem(s));
            }
            seen[s - 1] = true;
        }
        let mut image = Vec::with_capacity(shape.ontic_count());
        for i in 0..shape.ontic_count() as u16 {
            let coords = OnticIndex(i).coords(shape);
            let mapped: Vec<u16> = order.iter().map(|&s| coords[s - 1]).collect();
            image.push(OnticIndex::from_coords(shape, &mapped).unwrap().0);
        }
        Ok(Permutation { shape, image })
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.shape.n_systems() == 1 {
            write!(f, "Permutation({})", self.to_cycles())
        } else {
            write!(
                f,
                "Permutation(n={}, {:?})",
                self.shape.n_systems(),
                self.image
            )
        }
    }
}

/// The correlating two-system transformation: an allowed permutation that
/// carries the product state `(1v3).(1v3)` onto the perfectly correlated
/// state `(1.1)v(2.2)v(3.3)v(4.4)`.
///
/// Writing a cell value `v` in `0..4` as answer bits `(x, p) = (v>>1, v&1)`
/// to the two canonical questions, the map first swaps the roles of `x` and
/// `p` on system B and then applies
/// `(xa, pa, xb, pb) -> (xa, pa^pb, xa^xb, pb)`,
/// which adds A's first answer into B's first answer and B's second answer
/// back into A's second answer.
pub fn cnot_analogue() -> Permutation {
    let shape = SystemShape::new(2).unwrap();
    let mut image = Vec::with_capacity(16);
    for i in 0..16u16 {
        let (a, b) = (i >> 2, i & 0b11);
        let (xa, pa) = (a >> 1, a & 1);
        // (23) on B swaps value bits (x, p)
        let (xb, pb) = (b & 1, b >> 1);
        let a2 = (xa << 1) | (pa ^ pb);
        let b2 = ((xa ^ xb) << 1) | pb;
        image.push((a2 << 2) | b2);
    }
    Permutation::from_image(shape, image).unwrap()
}

/// `true` iff the pointwise image of every catalog state is a catalog state.
pub fn is_allowed(p: &Permutation, catalog: &Catalog) -> Result<bool, TransformError> {
    if p.shape() != catalog.shape() {
        return Err(TransformError::ShapeMismatch(
            p.shape().n_systems(),
            catalog.shape().n_systems(),
        ));
    }
    Ok(catalog
        .iter_all()
        .all(|set| catalog.contains(&p.apply_cells(set))))
}

/// A set of permutations closed under composition and inverse.
#[derive(Clone)]
pub struct TransformationGroup {
    shape: SystemShape,
    elements: Vec<Permutation>,
    generators: Vec<Permutation>,
}

impl TransformationGroup {
    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Elements in canonical (image-lexicographic) order.
    pub fn elements(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    pub fn contains(&self, p: &Permutation) -> bool {
        self.elements
            .binary_search_by(|e| e.image().cmp(p.image()))
            .is_ok()
    }

    fn from_elements(
        shape: SystemShape,
        mut elements: Vec<Permutation>,
        generators: Vec<Permutation>,
    ) -> Self {
        elements.sort_by(|a, b| a.image().cmp(b.image()));
        elements.dedup();
        TransformationGroup {
            shape,
            elements,
            generators,
        }
    }

    /// Line-record export mirroring the catalog format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = String::new();
        body.push_str(&format!(
            "{{\"format\":\"knowbal-group\",\"version\":1,\"n_systems\":{}}}\n",
            self.shape.n_systems()
        ));
        for e in &self.elements {
            let img: Vec<String> = e.image().iter().map(|v| v.to_string()).collect();
            body.push_str(&format!("{{\"image\":[{}]}}\n", img.join(",")));
        }
        let digest = Sha256::digest(body.as_bytes());
        body.push_str(&format!("{{\"checksum\":\"sha256:{digest:x}\"}}\n"));
        body.into_bytes()
    }

    pub fn save(&self, path: &Path) -> Result<(), TransformError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| TransformError::File(e.to_string()))
    }
}

/// Close a generating set under composition. Every generator must pass
/// [`is_allowed`]; products of allowed permutations are then allowed too.
pub fn closure(
    generators: &[Permutation],
    catalog: &Catalog,
) -> Result<TransformationGroup, TransformError> {
    for (i, g) in generators.iter().enumerate() {
        if !is_allowed(g, catalog)? {
            return Err(TransformError::DisallowedGenerator(i));
        }
    }
    let shape = catalog.shape();
    let identity = Permutation::identity(shape);
    let mut seen: HashSet<Vec<u16>> = HashSet::from([identity.image().to_vec()]);
    let mut queue: VecDeque<Permutation> = VecDeque::from([identity]);
    let mut elements = Vec::new();
    while let Some(p) = queue.pop_front() {
        for g in generators {
            let q = g.compose(&p)?;
            if seen.insert(q.image().to_vec()) {
                queue.push_back(q.clone());
            }
        }
        elements.push(p);
    }
    Ok(TransformationGroup::from_elements(
        shape,
        elements,
        generators.to_vec(),
    ))
}

/// The complete allowed group, by direct search.
///
/// For one system the 24 candidates are filtered outright. For a pair the
/// search assigns images cell by cell, pruning whenever a fully determined
/// catalog state (size 4 or 8) maps outside the catalog.
pub fn enumerate_allowed(
    shape: SystemShape,
    catalog: &Catalog,
) -> Result<TransformationGroup, TransformError> {
    match shape.n_systems() {
        1 => {
            let mut elements = Vec::new();
            for image in all_permutations(4) {
                let p = Permutation::from_image(shape, image).unwrap();
                if is_allowed(&p, catalog)? {
                    elements.push(p);
                }
            }
            Ok(TransformationGroup::from_elements(shape, elements, vec![]))
        }
        2 => Ok(backtrack_allowed_n2(shape, catalog)),
        n => Err(TransformError::TooManySystems(n)),
    }
}

fn all_permutations(n: usize) -> Vec<Vec<u16>> {
    fn rec(n: usize, cur: &mut Vec<u16>, used: &mut [bool], out: &mut Vec<Vec<u16>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                cur.push(v as u16);
                rec(n, cur, used, out);
                cur.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn backtrack_allowed_n2(shape: SystemShape, catalog: &Catalog) -> TransformationGroup {
    let dense = |set: &CellSet| -> u16 {
        let mut m = 0u16;
        for i in set.iter() {
            m |= 1 << i;
        }
        m
    };
    // catalog states of sizes 4 and 8 as 16-bit masks, grouped by top cell
    let mut by_last: Vec<Vec<u16>> = vec![Vec::new(); 16];
    let mut members: HashSet<u16> = HashSet::new();
    for size in [4usize, 8] {
        for set in catalog.states_of_size(size) {
            let m = dense(set);
            members.insert(m);
            by_last[(15 - m.leading_zeros()) as usize].push(m);
        }
    }

    fn rec(
        pos: usize,
        image: &mut [u16; 16],
        used: &mut [bool; 16],
        by_last: &[Vec<u16>],
        members: &HashSet<u16>,
        shape: SystemShape,
        found: &mut Vec<Permutation>,
    ) {
        if pos == 16 {
            found.push(Permutation::from_image(shape, image.to_vec()).unwrap());
            return;
        }
        'candidates: for v in 0..16u16 {
            if used[v as usize] {
                continue;
            }
            image[pos] = v;
            for &state in &by_last[pos] {
                let mut img_mask = 0u16;
                let mut s = state;
                while s != 0 {
                    let c = s.trailing_zeros() as usize;
                    img_mask |= 1 << image[c];
                    s &= s - 1;
                }
                if !members.contains(&img_mask) {
                    continue 'candidates;
                }
            }
            used[v as usize] = true;
            rec(pos + 1, image, used, by_last, members, shape, found);
            used[v as usize] = false;
        }
    }
    let mut found: Vec<Permutation> = Vec::new();
    rec(
        0,
        &mut [0u16; 16],
        &mut [false; 16],
        &by_last,
        &members,
        shape,
        &mut found,
    );
    TransformationGroup::from_elements(shape, found, vec![])
}

/// Whether a single-system permutation acts on the six pure states like an
/// orientation-preserving rotation of their geometric representation, or
/// like a reflection (the discrete analogue of an anti-unitary map).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum N1Class {
    Rotation,
    Reflection,
}

/// Classify by the determinant of the induced action on the three axes of
/// the single-system state space (via the reference Bloch coordinates).
pub fn classify_n1(p: &Permutation) -> Result<N1Class, TransformError> {
    if p.shape().n_systems() != 1 {
        return Err(TransformError::NotSingleSystem);
    }
    let shape = p.shape();
    // axis representatives: x+ = 1v3, y+ = 2v3, z+ = 1v2
    let axes = [
        EpistemicState::new(shape, &[0, 2]).unwrap(),
        EpistemicState::new(shape, &[1, 2]).unwrap(),
        EpistemicState::new(shape, &[0, 1]).unwrap(),
    ];
    let mut cols = [[0i32; 3]; 3];
    for (j, axis) in axes.iter().enumerate() {
        let img = p.apply_state(axis)?;
        cols[j] = crate::quantum::bloch_of_pure(&img).expect("images of pure states are pure");
    }
    let det = cols[0][0] * (cols[1][1] * cols[2][2] - cols[1][2] * cols[2][1])
        - cols[1][0] * (cols[0][1] * cols[2][2] - cols[0][2] * cols[2][1])
        + cols[2][0] * (cols[0][1] * cols[1][2] - cols[0][2] * cols[1][1]);
    debug_assert!(det == 1 || det == -1);
    Ok(if det == 1 {
        N1Class::Rotation
    } else {
        N1Class::Reflection
    })
}

/// The orbit of a set of states under repeated application of permutations,
/// used as an independent cross-check of constructive enumerations.
pub fn orbit_closure(seeds: &[CellSet], generators: &[Permutation]) -> Vec<CellSet> {
    let mut seen: HashSet<CellSet> = seeds.iter().copied().collect();
    let mut queue: VecDeque<CellSet> = seeds.iter().copied().collect();
    while let Some(s) = queue.pop_front() {
        for g in generators {
            let t = g.apply_cells(&s);
            if seen.insert(t) {
                queue.push_back(t);
            }
        }
    }
    let mut out: Vec<CellSet> = seen.into_iter().collect();
    out.sort_by(|a, b| a.cmp_lex(b));
    out
}

/// Generators used by the orbit cross-checks: two single-system generators
/// per position, all system transpositions, and the correlating map on
/// every ordered pair of positions.
pub fn orbit_generators(shape: SystemShape) -> Vec<Permutation> {
    let n = shape.n_systems();
    let mut gens = Vec::new();
    let locals = [
        Permutation::from_cycles("(12)(3)(4)").unwrap(),
        Permutation::from_cycles("(1234)").unwrap(),
    ];
    for sys in 1..=n {
        for l in &locals {
            gens.push(l.embed_at(&[sys], shape).unwrap());
        }
    }
    for a in 1..=n {
        for b in (a + 1)..=n {
            let mut order: Vec<usize> = (1..=n).collect();
            order.swap(a - 1, b - 1);
            gens.push(Permutation::system_reorder(shape, &order).unwrap());
            let cnot = cnot_analogue();
            gens.push(cnot.embed_at(&[a, b], shape).unwrap());
            gens.push(cnot.embed_at(&[b, a], shape).unwrap());
        }
    }
    gens
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

    #[test]
    fn cycles_parse_and_print() {
        let p = Permutation::from_cycles("(123)(4)").unwrap();
        assert_eq!(p.image(), &[1, 2, 0, 3]);
        assert_eq!(p.to_cycles(), "(123)(4)");
        assert_eq!(Permutation::identity(shape(1)).to_cycles(), "(1)(2)(3)(4)");
        assert_eq!(
            Permutation::from_cycles("(234)(1)").unwrap().to_cycles(),
            "(234)(1)"
        );
        assert!(Permutation::from_cycles("(125)").is_err());
        assert!(Permutation::from_cycles("(12)(21)").is_err());
        assert!(Permutation::from_cycles("(12").is_err());
    }

    #[test]
    fn compose_invert_examples() {
        let p = Permutation::from_cycles("(1234)").unwrap();
        let q = Permutation::from_cycles("(1432)").unwrap();
        assert!(p.compose(&q).unwrap().is_identity());
        assert_eq!(
            Permutation::from_cycles("(123)(4)").unwrap().invert(),
            Permutation::from_cycles("(132)(4)").unwrap()
        );
        let id = Permutation::identity(shape(1));
        assert_eq!(p.compose(&id).unwrap(), p);
        assert!(p.compose(&p.invert()).unwrap().is_identity());
    }

    #[test]
    fn epistemic_map_of_a_three_cycle() {
        // (123)(4) sends 1v2 -> 2v3, 3v4 -> 1v4, 1v3 -> 1v2, 2v4 -> 3v4,
        // 2v3 -> 1v3, 1v4 -> 2v4
        let p = Permutation::from_cycles("(123)(4)").unwrap();
        let cases = [
            (vec![0, 1], vec![1, 2]),
            (vec![2, 3], vec![0, 3]),
            (vec![0, 2], vec![0, 1]),
            (vec![1, 3], vec![2, 3]),
            (vec![1, 2], vec![0, 2]),
            (vec![0, 3], vec![1, 3]),
        ];
        for (from, to) in cases {
            assert_eq!(p.apply_state(&st(1, &from)).unwrap(), st(1, &to), "{from:?}");
        }
    }

    #[test]
    fn embed_local_examples() {
        let sh2 = shape(2);
        let swap12 = Permutation::from_cycles("(12)(3)(4)").unwrap();
        let id = Permutation::identity(shape(1));
        let p = Permutation::embed_local(sh2, &[swap12.clone(), id.clone()]).unwrap();
        // (1,1) -> (2,1)
        assert_eq!(p.apply_index(0), 4);
        let q = Permutation::embed_local(sh2, &[id.clone(), id.clone()]).unwrap();
        assert!(q.is_identity());
        let r = Permutation::embed_local(
            sh2,
            &[swap12, Permutation::from_cycles("(13)(2)(4)").unwrap()],
        )
        .unwrap();
        // (1,1) -> (2,3)
        assert_eq!(r.apply_index(0), 6);
        assert!(Permutation::embed_local(sh2, &[id]).is_err());
    }

    #[test]
    fn correlator_maps_product_onto_diagonal() {
        let t = cnot_analogue();
        let s13 = st(1, &[0, 2]);
        let product = s13.conjoin(&s13).unwrap();
        let image = t.apply_state(&product).unwrap();
        assert_eq!(image, st(2, &[0, 5, 10, 15]));
    }

    #[test]
    fn system_reorder_swaps_coordinates() {
        let sh2 = shape(2);
        let swap = Permutation::system_reorder(sh2, &[2, 1]).unwrap();
        // (1,2) <-> (2,1): indices 1 <-> 4
        assert_eq!(swap.apply_index(1), 4);
        assert_eq!(swap.apply_index(4), 1);
        let s = st(1, &[0, 1]).conjoin(&st(1, &[0, 2])).unwrap();
        assert_eq!(
            swap.apply_state(&s).unwrap(),
            st(1, &[0, 2]).conjoin(&st(1, &[0, 1])).unwrap()
        );
    }

    #[test]
    fn parity_counts() {
        assert!(Permutation::from_cycles("(123)(4)").unwrap().is_even());
        assert!(Permutation::from_cycles("(13)(24)").unwrap().is_even());
        assert!(!Permutation::from_cycles("(13)(2)(4)").unwrap().is_even());
        assert!(!Permutation::from_cycles("(1234)").unwrap().is_even());
    }
}
