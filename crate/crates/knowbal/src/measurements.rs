//! Reproducible measurements as ordered partitions of the ontic space into
//! valid outcome bases, their enumeration, the epistemic update rules, and
//! mutually unbiased partitioning (MUP) searches.
//!
//! A measurement is *maximally informative* when every outcome base is a
//! pure state. Measurements may also act on a subsystem group of a larger
//! composite (outcome bases are then cylinders over the measured
//! positions), or be coarse-grained, in which case the update rule is not
//! unique and a rule must be chosen explicitly.

use std::fmt;

use thiserror::Error;

use crate::ontic::{project, weave, CellSet, EpistemicState, SystemShape};
use crate::transforms::Permutation;
use crate::validity::Catalog;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("outcomes {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("outcomes do not cover the ontic space")]
    IncompleteCover,
    #[error("outcome {0} is not a valid epistemic state")]
    InvalidOutcome(usize),
    #[error("shape mismatch")]
    ShapeMismatch,
    #[error("measurement needs at least two outcomes")]
    TooFewOutcomes,
    #[error("outcome index {0} out of range")]
    BadOutcomeIndex(usize),
    #[error("outcome is impossible: empty intersection with the current state")]
    OutcomeImpossible,
    #[error("coarse measurement update needs an explicit rule and catalog")]
    CoarseNeedsRule,
    #[error("operation requires a maximally informative measurement")]
    NotMaximal,
    #[error("subsystem index {0} out of range or repeated")]
    BadSubsystem(usize),
    #[error("maximal-measurement enumeration supports at most 2 systems, got {0}")]
    TooManySystems(usize),
    #[error("relation partition needs permutations forming a partition")]
    NotSharplyTransitive,
    #[error(transparent)]
    Ontic(#[from] crate::ontic::OnticError),
}

/// How a measurement disturbs and updates: the structure needed by the
/// update rules and the ontic-level sampler.
#[derive(Clone, Debug)]
pub enum MeasurementAction {
    /// Partition of the whole space into pure states.
    FullMaximal,
    /// A maximal measurement of the listed subsystems (1-based), trivial on
    /// the rest; `blocks[k]` is outcome `k`'s base on the measured group.
    SubsystemMaximal {
        systems: Vec<usize>,
        blocks: Vec<CellSet>,
    },
    /// A valid partition that is not maximally informative.
    Coarse,
}

/// Update rule for coarse (nonmaximally informative) measurements.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum UpdateRule {
    /// Final state is the valid state inside the outcome base with the
    /// highest classical fidelity to the initial state.
    #[default]
    MaxFidelity,
    /// Final state is the outcome base itself.
    OutcomeBase,
}

/// An ordered partition of the ontic space into valid epistemic states.
#[derive(Clone, Debug)]
pub struct Measurement {
    shape: SystemShape,
    outcomes: Vec<EpistemicState>,
    action: MeasurementAction,
}

impl Measurement {
    /// Validate and canonicalize a partition: outcomes must be pairwise
    /// disjoint catalog states covering the space. Outcomes are sorted by
    /// member set, which makes enumeration deduplication stable.
    pub fn new(outcomes: Vec<EpistemicState>, catalog: &Catalog) -> Result<Self, MeasureError> {
        if outcomes.len() < 2 {
            return Err(MeasureError::TooFewOutcomes);
        }
        let shape = outcomes[0].shape();
        if shape != catalog.shape() {
            return Err(MeasureError::ShapeMismatch);
        }
        let mut union = CellSet::EMPTY;
        let mut total = 0usize;
        for (i, o) in outcomes.iter().enumerate() {
            if o.shape() != shape {
                return Err(MeasureError::ShapeMismatch);
            }
            if !catalog.contains(o.members()) {
                return Err(MeasureError::InvalidOutcome(i));
            }
            union = union.union(o.members());
            total += o.size();
        }
        if total != union.len() {
            // some pair overlaps; identify it for the error
            for i in 0..outcomes.len() {
                for j in (i + 1)..outcomes.len() {
                    if !outcomes[i].members().is_disjoint(outcomes[j].members()) {
                        return Err(MeasureError::Overlap(i, j));
                    }
                }
            }
        }
        if union != CellSet::full(shape) {
            return Err(MeasureError::IncompleteCover);
        }
        let mut outcomes = outcomes;
        outcomes.sort_by(|a, b| a.members().cmp_lex(b.members()));
        let action = if outcomes.iter().all(|o| o.is_pure()) {
            MeasurementAction::FullMaximal
        } else {
            MeasurementAction::Coarse
        };
        Ok(Measurement {
            shape,
            outcomes,
            action,
        })
    }

    /// Extend a maximal measurement of a smaller composite to act on the
    /// listed subsystems (1-based, distinct) of `full_shape`, trivially on
    /// the rest. Outcome order follows the small measurement.
    pub fn on_subsystems(
        &self,
        systems: &[usize],
        full_shape: SystemShape,
    ) -> Result<Measurement, MeasureError> {
        if !matches!(self.action, MeasurementAction::FullMaximal) {
            return Err(MeasureError::NotMaximal);
        }
        let n = full_shape.n_systems();
        if systems.len() != self.shape.n_systems() {
            return Err(MeasureError::BadSubsystem(systems.len()));
        }
        let mut seen = vec![false; n];
        for &s in systems {
            if s == 0 || s > n || seen[s - 1] {
                return Err(MeasureError::BadSubsystem(s));
            }
            seen[s - 1] = true;
        }
        if systems.len() == n {
            // no trivial factor; reorder cells if needed
            let order: Vec<usize> = systems.to_vec();
            let perm = Permutation::system_reorder(full_shape, &order)
                .map_err(|_| MeasureError::BadSubsystem(0))?
                .invert();
            let outcomes = self
                .outcomes
                .iter()
                .map(|o| perm.apply_state(o).expect("same shape"))
                .collect();
            return Ok(Measurement {
                shape: full_shape,
                outcomes,
                action: MeasurementAction::FullMaximal,
            });
        }
        let full = CellSet::full(SystemShape::new(n - systems.len()).unwrap());
        let mut outcomes = Vec::with_capacity(self.outcomes.len());
        let mut blocks = Vec::with_capacity(self.outcomes.len());
        for o in &self.outcomes {
            let cells = weave(full_shape, systems, o.members(), &full);
            outcomes.push(EpistemicState::from_cells(full_shape, cells)?);
            blocks.push(*o.members());
        }
        Ok(Measurement {
            shape: full_shape,
            outcomes,
            action: MeasurementAction::SubsystemMaximal {
                systems: systems.to_vec(),
                blocks,
            },
        })
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn outcomes(&self) -> &[EpistemicState] {
        &self.outcomes
    }

    pub fn action(&self) -> &MeasurementAction {
        &self.action
    }

    pub fn is_maximal(&self) -> bool {
        matches!(self.action, MeasurementAction::FullMaximal)
    }

    /// The outcome whose base contains an ontic state; total because
    /// outcomes partition the space.
    pub fn outcome_of(&self, x: u16) -> usize {
        self.outcomes
            .iter()
            .position(|o| o.members().contains(x))
            .expect("outcomes partition the ontic space")
    }

    /// Epistemic update for maximally informative measurements (full or
    /// subsystem). For the whole system the final state is the outcome
    /// base; for a measured subgroup it is the outcome block conjoined with
    /// the surviving possibilities for the unmeasured systems.
    pub fn epistemic_update(
        &self,
        s: &EpistemicState,
        outcome: usize,
    ) -> Result<EpistemicState, MeasureError> {
        if s.shape() != self.shape {
            return Err(MeasureError::ShapeMismatch);
        }
        let o = self
            .outcomes
            .get(outcome)
            .ok_or(MeasureError::BadOutcomeIndex(outcome))?;
        let overlap = s.members().intersection(o.members());
        if overlap.is_empty() {
            return Err(MeasureError::OutcomeImpossible);
        }
        match &self.action {
            MeasurementAction::FullMaximal => Ok(*o),
            MeasurementAction::SubsystemMaximal { systems, blocks } => {
                let n = self.shape.n_systems();
                let others: Vec<usize> = (1..=n).filter(|i| !systems.contains(i)).collect();
                let rest = project(self.shape, &overlap, &others);
                let cells = weave(self.shape, systems, &blocks[outcome], &rest);
                Ok(EpistemicState::from_cells(self.shape, cells)?)
            }
            MeasurementAction::Coarse => Err(MeasureError::CoarseNeedsRule),
        }
    }

    /// Epistemic update with an explicit rule for coarse measurements.
    pub fn epistemic_update_with(
        &self,
        s: &EpistemicState,
        outcome: usize,
        rule: UpdateRule,
        catalog: &Catalog,
    ) -> Result<EpistemicState, MeasureError> {
        match &self.action {
            MeasurementAction::Coarse => {
                let o = self
                    .outcomes
                    .get(outcome)
                    .ok_or(MeasureError::BadOutcomeIndex(outcome))?;
                if s.members().intersection(o.members()).is_empty() {
                    return Err(MeasureError::OutcomeImpossible);
                }
                match rule {
                    UpdateRule::OutcomeBase => Ok(*o),
                    UpdateRule::MaxFidelity => Ok(update_max_fidelity(s, o, catalog)?.0),
                }
            }
            _ => self.epistemic_update(s, outcome),
        }
    }

    /// Text diagram for a pair of systems: a 4x4 grid of roman numerals,
    /// rows labelled by A's cell value from 4 at the top down to 1, columns
    /// by B's value 1..4 left to right.
    pub fn render_grid(&self) -> String {
        const NUMERALS: [&str; 8] = ["I", "II", "III", "IV", "V", "VI", "VII", "VIII"];
        assert_eq!(self.shape.n_systems(), 2, "grid rendering is for pairs");
        let mut out = String::new();
        for a in (0..4u16).rev() {
            out.push_str(&format!("{} |", a + 1));
            for b in 0..4u16 {
                let k = self.outcome_of(a * 4 + b);
                out.push_str(&format!(" {:>3}", NUMERALS[k]));
            }
            out.push('\n');
        }
        out.push_str("  +----------------\n      1   2   3   4\n");
        out
    }
}

/// The three canonical partitions of one elementary system, in the fixed
/// axis order `z = {1v2 | 3v4}`, `x = {1v3 | 2v4}`, `y = {1v4 | 2v3}`.
pub fn canonical_partitions(catalog: &Catalog) -> [Measurement; 3] {
    let shape = SystemShape::new(1).unwrap();
    assert_eq!(catalog.shape(), shape);
    let st = |m: &[u16]| EpistemicState::new(shape, m).unwrap();
    let make = |a: &[u16], b: &[u16]| Measurement::new(vec![st(a), st(b)], catalog).unwrap();
    [
        make(&[0, 1], &[2, 3]),
        make(&[0, 2], &[1, 3]),
        make(&[0, 3], &[1, 2]),
    ]
}

/// Named axis for the canonical single-system partitions.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Axis {
    Z,
    X,
    Y,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::Z => 0,
            Axis::X => 1,
            Axis::Y => 2,
        }
    }

    pub fn partition(self, catalog: &Catalog) -> Measurement {
        let parts = canonical_partitions(catalog);
        parts[self.index()].clone()
    }
}

/// The relation state determined by a single-system permutation: the pair
/// state whose members are `(x, perm(x))` for all cell values `x`.
pub fn relation_state(perm: &Permutation) -> EpistemicState {
    assert_eq!(perm.shape().n_systems(), 1);
    let shape = SystemShape::new(2).unwrap();
    let mut cells = CellSet::EMPTY;
    for x in 0..4u16 {
        cells.insert(x * 4 + perm.apply_index(x));
    }
    EpistemicState::from_cells(shape, cells).unwrap()
}

/// Partition of a pair's space into the relation states of the given
/// permutations. Requires the permutations to tile the space: for every
/// `(x, y)` exactly one of them maps `x` to `y`. Outcome `k` corresponds to
/// `perms[k]`.
pub fn relation_measurement(
    perms: &[Permutation],
    catalog: &Catalog,
) -> Result<Measurement, MeasureError> {
    let shape = SystemShape::new(2).unwrap();
    if catalog.shape() != shape {
        return Err(MeasureError::ShapeMismatch);
    }
    let outcomes: Vec<EpistemicState> = perms.iter().map(relation_state).collect();
    let mut union = CellSet::EMPTY;
    let mut total = 0;
    for o in &outcomes {
        union = union.union(o.members());
        total += o.size();
    }
    if total != 16 || union.len() != 16 {
        return Err(MeasureError::NotSharplyTransitive);
    }
    for (i, o) in outcomes.iter().enumerate() {
        if !catalog.contains(o.members()) {
            return Err(MeasureError::InvalidOutcome(i));
        }
    }
    Ok(Measurement {
        shape,
        outcomes,
        action: MeasurementAction::FullMaximal,
    })
}

/// The four relation permutations of the standard correlated basis:
/// identity, `(12)(34)`, `(13)(24)`, `(14)(23)`.
pub fn bell_permutations() -> [Permutation; 4] {
    [
        Permutation::identity(SystemShape::new(1).unwrap()),
        Permutation::from_cycles("(12)(34)").unwrap(),
        Permutation::from_cycles("(13)(24)").unwrap(),
        Permutation::from_cycles("(14)(23)").unwrap(),
    ]
}

/// The four-outcome relation measurement analogous to the Bell basis;
/// outcome `k` reveals relation `bell_permutations()[k]`.
pub fn bell_analogue(catalog: &Catalog) -> Measurement {
    relation_measurement(&bell_permutations(), catalog)
        .expect("the standard relation partition is valid")
}

/// All maximal measurements: partitions of the space into `2^N` disjoint
/// pure catalog states, deduplicated up to outcome order.
pub fn enumerate_maximal(
    shape: SystemShape,
    catalog: &Catalog,
) -> Result<Vec<Measurement>, MeasureError> {
    if shape.n_systems() > 2 {
        return Err(MeasureError::TooManySystems(shape.n_systems()));
    }
    let cells = shape.ontic_count();
    let pure: Vec<CellSet> = catalog.pure_states().to_vec();
    let full = CellSet::full(shape);
    let mut found = Vec::new();
    let mut chosen: Vec<CellSet> = Vec::new();

    fn rec(
        cover: CellSet,
        chosen: &mut Vec<CellSet>,
        pure: &[CellSet],
        full: &CellSet,
        cells: usize,
        found: &mut Vec<Vec<CellSet>>,
    ) {
        if cover == *full {
            found.push(chosen.clone());
            return;
        }
        let lowest = (0..cells as u16)
            .find(|&c| !cover.contains(c))
            .expect("cover is not full");
        for p in pure {
            if p.contains(lowest) && p.is_disjoint(&cover) {
                chosen.push(*p);
                rec(cover.union(p), chosen, pure, full, cells, found);
                chosen.pop();
            }
        }
    }
    let mut raw = Vec::new();
    rec(CellSet::EMPTY, &mut chosen, &pure, &full, cells, &mut raw);
    for sets in raw {
        let outcomes = sets
            .into_iter()
            .map(|c| EpistemicState::from_cells(shape, c).unwrap())
            .collect();
        found.push(Measurement::new(outcomes, catalog)?);
    }
    Ok(found)
}

/// Among valid states inside the outcome base, the one with the highest
/// classical fidelity to `s`; ties break to the smallest canonical member
/// set and are flagged.
pub fn update_max_fidelity(
    s: &EpistemicState,
    outcome: &EpistemicState,
    catalog: &Catalog,
) -> Result<(EpistemicState, bool), MeasureError> {
    if s.shape() != outcome.shape() || s.shape() != catalog.shape() {
        return Err(MeasureError::ShapeMismatch);
    }
    if s.members().intersection(outcome.members()).is_empty() {
        return Err(MeasureError::OutcomeImpossible);
    }
    let mut best: Option<(CellSet, u64, u64)> = None; // (set, num, den)
    let mut tie = false;
    for cand in catalog.iter_all() {
        if !cand.is_subset(outcome.members()) {
            continue;
        }
        let common = cand.intersection(s.members()).len() as u64;
        let num = common * common;
        let den = (cand.len() * s.size()) as u64;
        match &best {
            None => best = Some((*cand, num, den)),
            Some((bset, bnum, bden)) => {
                // compare num/den vs bnum/bden
                let left = num * bden;
                let right = bnum * den;
                if left > right {
                    best = Some((*cand, num, den));
                    tie = false;
                } else if left == right {
                    tie = true;
                    if cand.cmp_lex(bset) == std::cmp::Ordering::Less {
                        best = Some((*cand, num, den));
                    }
                }
            }
        }
    }
    let (set, _, _) = best.expect("the outcome base itself is always a candidate");
    Ok((EpistemicState::from_cells(s.shape(), set)?, tie))
}

/// Exact test: all cross-partition outcome fidelities equal.
pub fn are_mutually_unbiased(m1: &Measurement, m2: &Measurement) -> Result<bool, MeasureError> {
    if m1.shape() != m2.shape() {
        return Err(MeasureError::ShapeMismatch);
    }
    let mut first: Option<(u64, u64)> = None;
    for a in m1.outcomes() {
        for b in m2.outcomes() {
            let (num, den) = a.fidelity_squared(b)?;
            match first {
                None => first = Some((num, den)),
                Some((n0, d0)) => {
                    if num * d0 != n0 * den {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

/// A set of pairwise mutually unbiased maximal measurements.
#[derive(Clone, Debug)]
pub struct MupSet {
    pub measurements: Vec<Measurement>,
    /// The shared squared cross-outcome fidelity, exact.
    pub common_fidelity_squared: (u64, u64),
}

impl MupSet {
    pub fn common_fidelity(&self) -> f64 {
        let (n, d) = self.common_fidelity_squared;
        (n as f64 / d as f64).sqrt()
    }
}

/// Find sets of `target_size` pairwise mutually unbiased maximal
/// measurements as cliques in the unbiasedness graph. With
/// `exhaustive = false` the search stops at the first witness.
pub fn find_mup_sets(
    shape: SystemShape,
    target_size: usize,
    catalog: &Catalog,
    exhaustive: bool,
) -> Result<Vec<MupSet>, MeasureError> {
    let all = enumerate_maximal(shape, catalog)?;
    let n = all.len();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if are_mutually_unbiased(&all[i], &all[j])? {
                adj[i][j] = true;
                adj[j][i] = true;
            }
        }
    }
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    fn rec(
        start: usize,
        cur: &mut Vec<usize>,
        target: usize,
        n: usize,
        adj: &[Vec<bool>],
        cliques: &mut Vec<Vec<usize>>,
        exhaustive: bool,
    ) {
        if cur.len() == target {
            cliques.push(cur.clone());
            return;
        }
        if !exhaustive && !cliques.is_empty() {
            return;
        }
        for v in start..n {
            if cur.iter().all(|&u| adj[u][v]) {
                cur.push(v);
                rec(v + 1, cur, target, n, adj, cliques, exhaustive);
                cur.pop();
                if !exhaustive && !cliques.is_empty() {
                    return;
                }
            }
        }
    }
    rec(0, &mut cur, target_size, n, &adj, &mut cliques, exhaustive);

    let mut out = Vec::new();
    for clique in cliques {
        let measurements: Vec<Measurement> = clique.iter().map(|&i| all[i].clone()).collect();
        let common = measurements[0].outcomes()[0]
            .fidelity_squared(&measurements[1].outcomes()[0])?;
        out.push(MupSet {
            measurements,
            common_fidelity_squared: common,
        });
    }
    Ok(out)
}

impl fmt::Display for Measurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, o) in self.outcomes.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{o}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validity::Catalog;

    fn shape(n: usize) -> SystemShape {
        SystemShape::new(n).unwrap()
    }

    fn st(n: usize, m: &[u16]) -> EpistemicState {
        EpistemicState::new(shape(n), m).unwrap()
    }

    fn cat(n: usize) -> Catalog {
        Catalog::enumerate(shape(n), true).unwrap()
    }

    #[test]
    fn make_measurement_validates() {
        let c1 = cat(1);
        let ok = Measurement::new(vec![st(1, &[0, 1]), st(1, &[2, 3])], &c1).unwrap();
        assert!(ok.is_maximal());

        // singleton outcome is invalid
        let bad = Measurement::new(vec![st(1, &[0]), st(1, &[1, 2, 3])], &c1);
        assert!(matches!(bad, Err(MeasureError::InvalidOutcome(0))));

        let overlap = Measurement::new(vec![st(1, &[0, 1]), st(1, &[1, 2])], &c1);
        assert!(matches!(overlap, Err(MeasureError::Overlap(0, 1))));

        let partial = Measurement::new(
            vec![st(1, &[0, 1]), st(1, &[0, 1])],
            &c1,
        );
        assert!(matches!(
            partial,
            Err(MeasureError::Overlap(0, 1)) | Err(MeasureError::IncompleteCover)
        ));
    }

    #[test]
    fn three_single_system_partitions() {
        let c1 = cat(1);
        let all = enumerate_maximal(shape(1), &c1).unwrap();
        assert_eq!(all.len(), 3);
        let canonical = canonical_partitions(&c1);
        for m in &canonical {
            assert!(all
                .iter()
                .any(|x| x.outcomes()[0] == m.outcomes()[0] && x.outcomes()[1] == m.outcomes()[1]));
        }
    }

    #[test]
    fn bell_analogue_is_valid_and_canonically_ordered() {
        let c2 = cat(2);
        let bell = bell_analogue(&c2);
        assert!(bell.is_maximal());
        assert_eq!(bell.outcomes()[0], st(2, &[0, 5, 10, 15]));
        assert_eq!(bell.outcomes()[1], st(2, &[1, 4, 11, 14]));
        assert_eq!(bell.outcomes()[2], st(2, &[2, 7, 8, 13]));
        assert_eq!(bell.outcomes()[3], st(2, &[3, 6, 9, 12]));
    }

    #[test]
    fn update_on_whole_system_returns_outcome() {
        let c1 = cat(1);
        let x = Axis::X.partition(&c1);
        // initial 1v2, outcome 1v3 -> final 1v3
        let updated = x.epistemic_update(&st(1, &[0, 1]), 0).unwrap();
        assert_eq!(updated, st(1, &[0, 2]));
        // impossible outcome: 1v2 measured with z cannot give 3v4
        let z = Axis::Z.partition(&c1);
        assert!(matches!(
            z.epistemic_update(&st(1, &[0, 1]), 1),
            Err(MeasureError::OutcomeImpossible)
        ));
    }

    #[test]
    fn subsystem_update_refines_correlated_state() {
        let c1 = cat(1);
        let sh2 = shape(2);
        let diag = st(2, &[0, 5, 10, 15]);
        let z_on_a = Axis::Z.partition(&c1).on_subsystems(&[1], sh2).unwrap();
        let updated = z_on_a.epistemic_update(&diag, 0).unwrap();
        assert_eq!(
            updated,
            st(1, &[0, 1]).conjoin(&st(1, &[0, 1])).unwrap()
        );

        // (1.4)v(2.3)v(3.1)v(4.2), measure y on A, outcome 1v4 -> (1v4).(2v4)
        let s = EpistemicState::from_tuples(
            sh2,
            &[&[1, 4], &[2, 3], &[3, 1], &[4, 2]],
        )
        .unwrap();
        let y_on_a = Axis::Y.partition(&c1).on_subsystems(&[1], sh2).unwrap();
        // outcome order of y is {1v4, 2v3}: outcome 0 is 1v4
        let updated = y_on_a.epistemic_update(&s, 0).unwrap();
        assert_eq!(
            updated,
            st(1, &[0, 3]).conjoin(&st(1, &[1, 3])).unwrap()
        );
    }

    #[test]
    fn bell_update_from_product_state() {
        let c2 = cat(2);
        let bell = bell_analogue(&c2);
        // (2v3).(1v2), outcome I (identity relation) -> diagonal
        let s = st(1, &[1, 2]).conjoin(&st(1, &[0, 1])).unwrap();
        let updated = bell.epistemic_update(&s, 0).unwrap();
        assert_eq!(updated, st(2, &[0, 5, 10, 15]));
    }

    #[test]
    fn coarse_update_uses_max_fidelity() {
        let c2 = cat(2);
        // outcome I of the correlation-parity measurement:
        // [(1v2).(1v2)] v [(3v4).(3v4)]
        let block1 = st(2, &[0, 1, 4, 5, 10, 11, 14, 15]);
        let block2 = st(2, &[2, 3, 6, 7, 8, 9, 12, 13]);
        let coarse = Measurement::new(vec![block1, block2], &c2).unwrap();
        assert!(!coarse.is_maximal());
        let s = st(1, &[1, 2]).conjoin(&st(1, &[0, 1])).unwrap();
        // plain update refuses without a rule
        assert!(matches!(
            coarse.epistemic_update(&s, 0),
            Err(MeasureError::CoarseNeedsRule)
        ));
        let updated = coarse
            .epistemic_update_with(&s, 0, UpdateRule::MaxFidelity, &c2)
            .unwrap();
        assert_eq!(
            updated,
            st(1, &[0, 1]).conjoin(&st(1, &[0, 1])).unwrap()
        );
        let base = coarse
            .epistemic_update_with(&s, 0, UpdateRule::OutcomeBase, &c2)
            .unwrap();
        assert_eq!(base.size(), 8);
    }

    #[test]
    fn max_fidelity_identity_when_inside() {
        let c2 = cat(2);
        let outcome = st(2, &[0, 1, 4, 5, 10, 11, 14, 15]);
        let s = st(1, &[0, 1]).conjoin(&st(1, &[0, 1])).unwrap();
        let (updated, tie) = update_max_fidelity(&s, &outcome, &c2).unwrap();
        assert_eq!(updated, s);
        assert!(!tie);
    }

    #[test]
    fn mutual_unbiasedness_single_system() {
        let c1 = cat(1);
        let parts = canonical_partitions(&c1);
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert!(are_mutually_unbiased(&parts[i], &parts[j]).unwrap());
            }
        }
        let sets = find_mup_sets(shape(1), 3, &c1, true).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].common_fidelity_squared.0 * 4, sets[0].common_fidelity_squared.1);
    }

    #[test]
    fn grid_rendering_is_stable() {
        let c2 = cat(2);
        let bell = bell_analogue(&c2);
        let grid = bell.render_grid();
        assert!(grid.contains("4 |  IV III  II   I"));
    }
}
